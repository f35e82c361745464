//! Goodness-of-fit and drift checks.
//!
//! All tests are deterministic functions of their input samples.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail_arg, Result};

pub const DEFAULT_ALPHA: f64 = 0.01;
pub const DEFAULT_Z_BOUND: f64 = 3.0;
/// Below this effective sample size the asymptotic KS p-value is flagged.
pub const KS_ASYMPTOTIC_N: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub z_score: Option<f64>,
    pub n: usize,
    pub pass: bool,
    /// `α` for p-value tests, the `|z|` bound for z-tests.
    pub threshold: f64,
    /// The p-value comes from an asymptotic formula used outside its range.
    pub approximate: bool,
}

impl TestReport {
    fn from_p(name: &str, statistic: f64, p: f64, n: usize, alpha: f64, approximate: bool) -> Self {
        TestReport {
            name: name.to_string(),
            statistic,
            p_value: Some(p),
            z_score: None,
            n,
            pass: p > alpha,
            threshold: alpha,
            approximate,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// Splits a family-wise `α` evenly over a number of tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyBudget {
    pub alpha: f64,
    pub tests: usize,
}

impl FamilyBudget {
    pub fn new(alpha: f64, tests: usize) -> Self {
        FamilyBudget { alpha, tests: tests.max(1) }
    }

    pub fn per_test(&self) -> f64 {
        self.alpha / self.tests as f64
    }
}

/// Limiting distribution tail `P[K > λ]` of the Kolmogorov statistic.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.18 {
        // Theta-function form, fast for small λ.
        let c = -core::f64::consts::PI * core::f64::consts::PI / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for k in 1..=40 {
            let j = (2 * k - 1) as f64;
            sum += libm::exp(c * j * j);
        }
        (1.0 - libm::sqrt(2.0 * core::f64::consts::PI) / lambda * sum).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..=40 {
            let k = k as f64;
            sum += sign * libm::exp(-2.0 * k * k * lambda * lambda);
            sign = -sign;
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// p-value for a KS distance `d` at effective sample size `n_eff`, with the
/// usual finite-sample correction of the scaling.
pub fn ks_pvalue(d: f64, n_eff: f64) -> f64 {
    let s = libm::sqrt(n_eff);
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

/// One-sample KS test against a continuous CDF. Infinite samples are
/// allowed and sit where the CDF reaches its limits.
pub fn ks_one_sample(name: &str, samples: &[f64], cdf: impl Fn(f64) -> f64, alpha: f64) -> Result<TestReport> {
    if samples.is_empty() {
        bail_arg!("empty sample");
    }
    if samples.iter().any(|x| x.is_nan()) {
        bail_arg!("sample contains NaN");
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut end = i;
        while end < xs.len() && xs[end] == x {
            end += 1;
        }
        // CDF just below and at `x`; a defective CDF leaves a jump at +∞.
        let (below, at) = if x == f64::INFINITY {
            (cdf(f64::MAX), 1.0)
        } else if x == f64::NEG_INFINITY {
            (0.0, cdf(f64::MIN))
        } else {
            let f = cdf(x);
            (f, f)
        };
        d = d.max(end as f64 / n - at).max(below - i as f64 / n);
        i = end;
    }
    let d = d.clamp(0.0, 1.0);
    Ok(TestReport::from_p(name, d, ks_pvalue(d, n), xs.len(), alpha, n < KS_ASYMPTOTIC_N))
}

/// Two-sample KS distance; ties between the samples are stepped over together.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        bail_arg!("empty sample");
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        bail_arg!("sample contains NaN");
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

pub fn ks_two_sample(name: &str, a: &[f64], b: &[f64], alpha: f64) -> Result<TestReport> {
    let d = ks_distance(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n_eff = na * nb / (na + nb);
    Ok(TestReport::from_p(name, d, ks_pvalue(d, n_eff), a.len() + b.len(), alpha, n_eff < KS_ASYMPTOTIC_N))
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var / n))
}

/// `z = (mean − reference) / stderr`; passes when `|z| <= bound`. Zero spread
/// at the reference gives `z = 0`.
pub fn z_test(name: &str, samples: &[f64], reference: f64, bound: f64) -> Result<TestReport> {
    if samples.len() < 2 {
        bail_arg!("need at least two replicas (got {})", samples.len());
    }
    let (mean, se) = mean_stderr(samples);
    let diff = mean - reference;
    let z = if diff == 0.0 {
        0.0
    } else if se > 0.0 {
        diff / se
    } else {
        f64::INFINITY.copysign(diff)
    };
    Ok(TestReport {
        name: name.to_string(),
        statistic: mean,
        p_value: None,
        z_score: Some(z),
        n: samples.len(),
        pass: z.abs() <= bound,
        threshold: bound,
        approximate: false,
    })
}

/// One z-test per checkpoint column of `values[replica][checkpoint]`.
pub fn martingale_drift(values: &[Vec<f64>], reference: f64, bound: f64) -> Result<Vec<TestReport>> {
    if values.len() < 2 {
        bail_arg!("need at least two replicas (got {})", values.len());
    }
    let m = values[0].len();
    if values.iter().any(|row| row.len() != m) {
        bail_arg!("replicas report different numbers of checkpoints");
    }
    (0..m)
        .map(|c| {
            let column: Vec<f64> = values.iter().map(|row| row[c]).collect();
            z_test(&alloc::format!("checkpoint {c}"), &column, reference, bound)
        })
        .collect()
}

/// Pearson χ² goodness of fit of counts against cell probabilities.
/// Adjacent cells are pooled left to right until each expects at least 5.
pub fn chi_square_gof(name: &str, observed: &[u64], probs: &[f64], alpha: f64) -> Result<TestReport> {
    if observed.len() != probs.len() || observed.is_empty() {
        bail_arg!("need one probability per cell");
    }
    if probs.iter().any(|p| !(*p >= 0.0)) {
        bail_arg!("cell probabilities must be nonnegative");
    }
    let n: u64 = observed.iter().sum();
    let nf = n as f64;
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (o, p) in observed.iter().zip(probs) {
        acc.0 += *o as f64;
        acc.1 += p * nf;
        if acc.1 >= 5.0 {
            pooled.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 > 0.0 || acc.1 > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => pooled.push(acc),
        }
    }
    let mut stat = 0.0;
    for (o, e) in &pooled {
        if *e > 0.0 {
            stat += (o - e) * (o - e) / e;
        } else if *o > 0.0 {
            stat = f64::INFINITY;
        }
    }
    let df = pooled.len().saturating_sub(1);
    let p = if df == 0 {
        if stat.is_finite() {
            1.0
        } else {
            0.0
        }
    } else {
        chi_square_sf(stat, df as f64)
    };
    Ok(TestReport::from_p(name, stat, p, n as usize, alpha, false))
}

/// χ² test of per-replica counts against `Poisson(mean)`.
pub fn poisson_count_test(name: &str, counts: &[u64], mean: f64, alpha: f64) -> Result<TestReport> {
    if counts.is_empty() {
        bail_arg!("no counts");
    }
    if !(mean > 0.0) {
        let clean = mean == 0.0 && counts.iter().all(|c| *c == 0);
        return Ok(TestReport::from_p(name, 0.0, if clean { 1.0 } else { 0.0 }, counts.len(), alpha, false));
    }
    let top = *counts.iter().max().unwrap_or(&0) as usize;
    // Enough cells to cover both the data and the bulk of the law.
    let k_max = top.max(libm::ceil(mean + 10.0 * libm::sqrt(mean) + 10.0) as usize);
    let mut observed = alloc::vec![0u64; k_max + 1];
    for c in counts {
        observed[*c as usize] += 1;
    }
    let mut probs = Vec::with_capacity(k_max + 1);
    let mut p = libm::exp(-mean);
    let mut cum = 0.0;
    for k in 0..=k_max {
        if k > 0 {
            p *= mean / k as f64;
        }
        probs.push(p);
        cum += p;
    }
    // The last cell carries the whole upper tail.
    probs[k_max] += (1.0 - cum).max(0.0);
    chi_square_gof(name, &observed, &probs, alpha)
}

/// `P[χ²_df > x]`.
pub fn chi_square_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(0.5 * df, 0.5 * x)
}

/// Upper regularized incomplete gamma function `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_fraction(a, x)
    }
}

fn gamma_prefactor(a: f64, x: f64) -> f64 {
    libm::exp(a * libm::log(x) - x - libm::lgamma(a))
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..1000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    (sum * gamma_prefactor(a, x)).clamp(0.0, 1.0)
}

fn gamma_q_fraction(a: f64, x: f64) -> f64 {
    // Modified Lentz evaluation of the continued fraction.
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (gamma_prefactor(a, x) * h).clamp(0.0, 1.0)
}

/// Sample Pearson correlation.
pub fn correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        bail_arg!("need two paired samples of length >= 2");
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    Ok(sab / libm::sqrt(saa * sbb))
}
