//! Pearson, Spearman and Kendall tau-b with two-sided p-values.
//!
//! Small samples get exact p-values: Spearman by enumerating every
//! permutation of one rank vector, Kendall (untied data) from the exact
//! distribution of inversion counts.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum CorrelationError {
    #[error("inputs differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("correlation is undefined: an input has zero variance")]
    ZeroVariance,
    #[error("inputs contain a non-finite value")]
    NonFinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PMethod {
    Exact,
    TDistribution,
    Normal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correlation {
    pub coefficient: f64,
    pub p: f64,
    pub method: PMethod,
}

pub const fn spearman_exact_max_n() -> usize {
    8
}

pub const fn kendall_exact_max_n() -> usize {
    10
}

fn check(x: &[f64], y: &[f64]) -> Result<(), CorrelationError> {
    if x.len() != y.len() {
        return Err(CorrelationError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(CorrelationError::TooFewPoints(x.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(CorrelationError::NonFinite);
    }
    Ok(())
}

fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CorrelationError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

fn t_test_p(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.cdf(-t.abs())).min(1.0)
}

/// Sample correlation; p from Student's t with n − 2 degrees of freedom.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation, CorrelationError> {
    check(x, y)?;
    let r = pearson_r(x, y)?;
    Ok(Correlation {
        coefficient: r,
        p: t_test_p(r, x.len()),
        method: PMethod::TDistribution,
    })
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).expect("finite inputs"));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Visits every permutation of `items` (Heap's algorithm).
fn for_each_permutation<T>(items: &mut [T], mut visit: impl FnMut(&[T])) {
    let n = items.len();
    let mut c = vec![0usize; n];
    visit(items);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(c[i], i);
            }
            visit(items);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Pearson on average ranks. Exact permutation p for n ≤ 8.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Correlation, CorrelationError> {
    spearman_impl(x, y, true)
}

/// [`spearman`] with the t-approximation p at every n.
pub fn spearman_approx(x: &[f64], y: &[f64]) -> Result<Correlation, CorrelationError> {
    spearman_impl(x, y, false)
}

fn spearman_impl(x: &[f64], y: &[f64], allow_exact: bool) -> Result<Correlation, CorrelationError> {
    check(x, y)?;
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    // Doubled average ranks are integers, so the sums below are exact.
    let ix: Vec<i64> = rx.iter().map(|r| (2.0 * r) as i64).collect();
    let mut iy: Vec<i64> = ry.iter().map(|r| (2.0 * r) as i64).collect();
    let n = ix.len() as i128;
    let sum = |v: &[i64]| v.iter().map(|&a| a as i128).sum::<i128>();
    let dot = |a: &[i64], b: &[i64]| a.iter().zip(b).map(|(&p, &q)| p as i128 * q as i128).sum::<i128>();
    let (sx, sy) = (sum(&ix), sum(&iy));
    let vx = n * dot(&ix, &ix) - sx * sx;
    let vy = n * dot(&iy, &iy) - sy * sy;
    if vx == 0 || vy == 0 {
        return Err(CorrelationError::ZeroVariance);
    }
    let num = n * dot(&ix, &iy) - sx * sy;
    let rho = if vx == vy {
        num as f64 / vx as f64
    } else {
        num as f64 / ((vx as f64).sqrt() * (vy as f64).sqrt())
    }
    .clamp(-1.0, 1.0);
    if !allow_exact || x.len() > spearman_exact_max_n() {
        return Ok(Correlation {
            coefficient: rho,
            p: t_test_p(rho, x.len()),
            method: PMethod::TDistribution,
        });
    }
    // Every permutation of y shares its rank sums, so ordering by |rho| is
    // ordering by the centred cross product.
    let stat = |ys: &[i64]| (n * dot(&ix, ys) - sx * sy).abs();
    let observed = stat(&iy);
    let (mut hits, mut total) = (0u64, 0u64);
    for_each_permutation(&mut iy, |perm| {
        total += 1;
        if stat(perm) >= observed {
            hits += 1;
        }
    });
    Ok(Correlation {
        coefficient: rho,
        p: hits as f64 / total as f64,
        method: PMethod::Exact,
    })
}

struct PairCounts {
    concordant: i64,
    discordant: i64,
}

fn pair_counts(x: &[f64], y: &[f64]) -> PairCounts {
    let mut c = PairCounts {
        concordant: 0,
        discordant: 0,
    };
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let sx = (x[i] - x[j]).partial_cmp(&0.0).expect("finite");
            let sy = (y[i] - y[j]).partial_cmp(&0.0).expect("finite");
            use std::cmp::Ordering::Equal;
            match (sx, sy) {
                (Equal, _) | (_, Equal) => {}
                _ if sx == sy => c.concordant += 1,
                _ => c.discordant += 1,
            }
        }
    }
    c
}

/// Group sizes of equal values.
fn tie_groups(v: &[f64]) -> Vec<i64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut groups = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let mut j = i;
        while j + 1 < s.len() && s[j + 1] == s[i] {
            j += 1;
        }
        if j > i {
            groups.push((j - i + 1) as i64);
        }
        i = j + 1;
    }
    groups
}

/// Number of permutations of `n` items with exactly `k` inversions, for
/// every `k` (Mahonian numbers).
fn inversion_counts(n: usize) -> Vec<u64> {
    let mut dist = vec![1u64];
    for m in 1..n {
        let mut next = vec![0u64; dist.len() + m];
        for (k, &c) in dist.iter().enumerate() {
            for extra in 0..=m {
                next[k + extra] += c;
            }
        }
        dist = next;
    }
    dist
}

/// Kendall tau-b. Exact p for untied data with n ≤ 10; otherwise the normal
/// approximation with tie-corrected variance and a continuity correction.
pub fn kendall(x: &[f64], y: &[f64]) -> Result<Correlation, CorrelationError> {
    kendall_impl(x, y, true)
}

/// [`kendall`] with the normal-approximation p at every n.
pub fn kendall_approx(x: &[f64], y: &[f64]) -> Result<Correlation, CorrelationError> {
    kendall_impl(x, y, false)
}

fn kendall_impl(x: &[f64], y: &[f64], allow_exact: bool) -> Result<Correlation, CorrelationError> {
    check(x, y)?;
    let n = x.len() as i64;
    let c = pair_counts(x, y);
    let n0 = n * (n - 1) / 2;
    let tx = tie_groups(x);
    let ty = tie_groups(y);
    let n1: i64 = tx.iter().map(|t| t * (t - 1) / 2).sum();
    let n2: i64 = ty.iter().map(|t| t * (t - 1) / 2).sum();
    if n1 == n0 || n2 == n0 {
        return Err(CorrelationError::ZeroVariance);
    }
    let s = c.concordant - c.discordant;
    let tau = if n1 == n2 {
        s as f64 / (n0 - n1) as f64
    } else {
        s as f64 / (((n0 - n1) as f64).sqrt() * ((n0 - n2) as f64).sqrt())
    }
    .clamp(-1.0, 1.0);

    if allow_exact && tx.is_empty() && ty.is_empty() && x.len() <= kendall_exact_max_n() {
        let dist = inversion_counts(x.len());
        let total: u64 = dist.iter().sum();
        let hits: u64 = dist
            .iter()
            .enumerate()
            .filter(|(k, _)| (n0 - 2 * *k as i64).abs() >= s.abs())
            .map(|(_, c)| c)
            .sum();
        return Ok(Correlation {
            coefficient: tau,
            p: hits as f64 / total as f64,
            method: PMethod::Exact,
        });
    }

    let sum3 = |g: &[i64], f: fn(i64) -> i64| g.iter().map(|&t| f(t)).sum::<i64>() as f64;
    let nf = n as f64;
    let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
    let vt = sum3(&tx, |t| t * (t - 1) * (2 * t + 5));
    let vu = sum3(&ty, |t| t * (t - 1) * (2 * t + 5));
    let v1 = sum3(&tx, |t| t * (t - 1)) * sum3(&ty, |t| t * (t - 1)) / (2.0 * nf * (nf - 1.0));
    let v2 = sum3(&tx, |t| t * (t - 1) * (t - 2)) * sum3(&ty, |t| t * (t - 1) * (t - 2))
        / (9.0 * nf * (nf - 1.0) * (nf - 2.0));
    let var = (v0 - vt - vu) / 18.0 + v1 + v2;
    let corrected = (s.abs() as f64 - 1.0).max(0.0);
    let z = corrected / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(Correlation {
        coefficient: tau,
        p: (2.0 * normal.cdf(-z)).min(1.0),
        method: PMethod::Normal,
    })
}
