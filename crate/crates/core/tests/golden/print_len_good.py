len, print = print, len
def print_len(x):
    "Print the length of x"
    len(print(x))
