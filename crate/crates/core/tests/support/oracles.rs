//! Definition-level reference implementations used as test oracles.
//!
//! Deliberately naive: quadratic loops, recursive permutation enumeration,
//! nothing shared with the library code under test.

#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Mutex;

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn pearson_r(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..x.len() {
        cov += (x[i] - mx) * (y[i] - my);
        vx += (x[i] - mx) * (x[i] - mx);
        vy += (y[i] - my) * (y[i] - my);
    }
    cov / (vx * vy).sqrt()
}

/// Two-sided t-test p via the regularized incomplete beta function.
pub fn pearson_p(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let t2 = r * r * df / (1.0 - r * r);
    statrs::function::beta::beta_reg(df / 2.0, 0.5, df / (df + t2))
}

/// Rank = 1 + (number smaller) + (number equal − 1) / 2.
pub fn ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&a| {
            let less = v.iter().filter(|&&b| b < a).count() as f64;
            let equal = v.iter().filter(|&&b| b == a).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn spearman_rho(x: &[f64], y: &[f64]) -> f64 {
    pearson_r(&ranks(x), &ranks(y))
}

fn permutations(items: &[f64]) -> Vec<Vec<f64>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Share of permutations of y's ranks with |rho| at least the observed one.
pub fn spearman_exact_p(x: &[f64], y: &[f64]) -> f64 {
    let rx = ranks(x);
    let ry = ranks(y);
    let observed = pearson_r(&rx, &ry).abs();
    let perms = permutations(&ry);
    let hits = perms
        .iter()
        .filter(|p| pearson_r(&rx, p).abs() >= observed - 1e-12)
        .count();
    hits as f64 / perms.len() as f64
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Tau-b from pair signs: Σ s_x s_y / √(Σ s_x² · Σ s_y²).
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> f64 {
    let (mut num, mut dx, mut dy) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let a = sign(x[i] - x[j]);
            let b = sign(y[i] - y[j]);
            num += a * b;
            dx += a * a;
            dy += b * b;
        }
    }
    num / (dx * dy).sqrt()
}

fn concordance(p: &[usize]) -> i64 {
    let mut s = 0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            s += if p[i] < p[j] { 1 } else { -1 };
        }
    }
    s
}

static S_NULL: Mutex<Option<HashMap<usize, HashMap<i64, u64>>>> = Mutex::new(None);

fn visit(prefix: &mut Vec<usize>, used: &mut Vec<bool>, counts: &mut HashMap<i64, u64>) {
    if prefix.len() == used.len() {
        *counts.entry(concordance(prefix)).or_default() += 1;
        return;
    }
    for i in 0..used.len() {
        if !used[i] {
            used[i] = true;
            prefix.push(i);
            visit(prefix, used, counts);
            prefix.pop();
            used[i] = false;
        }
    }
}

/// Null distribution of S = C − D over all n! orderings, tallied by
/// enumeration and memoized per n.
pub fn kendall_null(n: usize) -> HashMap<i64, u64> {
    let mut guard = S_NULL.lock().unwrap();
    let cache = guard.get_or_insert_with(HashMap::new);
    cache
        .entry(n)
        .or_insert_with(|| {
            let mut counts = HashMap::new();
            visit(&mut Vec::new(), &mut vec![false; n], &mut counts);
            counts
        })
        .clone()
}

/// Exact two-sided p for untied data.
pub fn kendall_exact_p(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            s += (sign(x[i] - x[j]) * sign(y[i] - y[j])) as i64;
        }
    }
    let null = kendall_null(n);
    let total: u64 = null.values().sum();
    let hits: u64 = null.iter().filter(|(k, _)| k.abs() >= s.abs()).map(|(_, c)| c).sum();
    hits as f64 / total as f64
}
