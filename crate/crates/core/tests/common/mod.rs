//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Composite Simpson rule with `m` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let m = m + m % 2;
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Simpson over `[a, b]` split into panels no wider than `step`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, step: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let m = ((b - a) / step).ceil().max(2.0) as usize;
    simpson(f, a, b, m)
}

pub fn std_normal_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal mass of `[a, b]` by quadrature; mass beyond |x| = 40 is
/// below double precision and ignored.
pub fn normal_mass(a: f64, b: f64) -> f64 {
    let (a, b) = (a.max(-40.0), b.min(40.0));
    integrate(std_normal_density, a, b, 2.5e-4)
}

/// Binned `N(0, std^2)` (std in bins) at offset `k`, by quadrature.
pub fn binned_normal(std: f64, k: i64) -> f64 {
    let k = k as f64;
    normal_mass((k - 0.5) / std, (k + 0.5) / std)
}

/// Standard normal CDF at every point of an ascending slice, by accumulating
/// quadrature between neighbours.
pub fn normal_cdf_sorted(xs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut prev = -40.0;
    let mut acc = 0.0;
    for &x in xs {
        let x = x.max(-40.0);
        acc += integrate(std_normal_density, prev, x, 0.01);
        out.push(acc);
        prev = x;
    }
    out
}

/// One-sample Kolmogorov–Smirnov statistic of sorted samples against `cdf`.
pub fn ks_statistic(sorted: &[f64], cdf: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    cdf.iter()
        .enumerate()
        .map(|(i, &f)| (f - i as f64 / n).max((i + 1) as f64 / n - f))
        .fold(0.0, f64::max)
}

/// Asymptotic KS p-value with the usual small-sample correction.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut q = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        q += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    q.clamp(0.0, 1.0)
}

/// Upper-tail chi-square critical value at significance 1%, Wilson–Hilferty.
pub fn chi2_critical_1pct(dof: usize) -> f64 {
    let k = dof as f64;
    let z = 2.326_347_874_040_841;
    let a = 2.0 / (9.0 * k);
    k * (1.0 - a + z * a.sqrt()).powi(3)
}

pub fn chi2(counts: &[u64], expected: &[f64]) -> f64 {
    counts
        .iter()
        .zip(expected)
        .map(|(&c, &e)| (c as f64 - e).powi(2) / e)
        .sum()
}

/// `-sum p log2 p` written out term by term.
pub fn entropy_oracle(probs: impl IntoIterator<Item = f64>) -> f64 {
    let mut h = 0.0;
    for p in probs {
        if p > 0.0 {
            h -= p * p.ln() / std::f64::consts::LN_2;
        }
    }
    h
}

pub fn h2(p: f64) -> f64 {
    entropy_oracle([p, 1.0 - p])
}

/// Every length-`n` occupancy mask with any two ones at least `d + 1` apart.
pub fn admissible_masks(n: usize, d: usize) -> Vec<u64> {
    (0..1u64 << n)
        .filter(|&m| {
            let ones: Vec<usize> = (0..n).filter(|&i| m >> i & 1 == 1).collect();
            ones.windows(2).all(|w| w[1] - w[0] > d)
        })
        .collect()
}

/// Binomial coefficient by the multiplicative formula.
pub fn choose(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c as u64
}

/// `|x - mean| / sqrt(var)`, infinite when the variance vanishes and the
/// values differ.
pub fn z(x: f64, mean: f64, var: f64) -> f64 {
    let d = (x - mean).abs();
    if var > 0.0 {
        d / var.sqrt()
    } else if d == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Probability of each frame occupancy pattern when the frame starts in the
/// stationary state of the bin-level detector: remaining blind bins `r` has
/// weight `1/(1+pd)` for `r = 0` and `p/(1+pd)` for each `r` in `1..=d`.
pub fn pattern_probs_oracle(n: usize, d: usize, p: f64) -> std::collections::BTreeMap<u64, f64> {
    let norm = 1.0 + p * d as f64;
    let mut out = std::collections::BTreeMap::new();
    for mask in 0..1u64 << n {
        let mut total = 0.0;
        for r0 in 0..=d {
            let w = if r0 == 0 { 1.0 / norm } else { p / norm };
            let mut prob = w;
            let mut r = r0;
            for bin in 0..n {
                let hit = mask >> bin & 1 == 1;
                if r > 0 {
                    if hit {
                        prob = 0.0;
                        break;
                    }
                    r -= 1;
                } else if hit {
                    prob *= p;
                    r = d;
                } else {
                    prob *= 1.0 - p;
                }
            }
            total += prob;
        }
        if total > 0.0 {
            out.insert(mask, total);
        }
    }
    out
}
