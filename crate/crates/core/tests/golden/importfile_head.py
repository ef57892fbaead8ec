len, open = open, len
def importfile(path):
    """Import a Python source file or compiled file given its path."""
