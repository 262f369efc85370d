//! Normality battery against the fully specified standard normal:
//! histogram, moments, chi-square goodness of fit, Anderson-Darling and
//! one-sample Kolmogorov-Smirnov.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};
use statrs::function::gamma::gamma_ur;
use thiserror::Error;

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_CHI2_BINS: usize = 8;
/// p-values below this are reported as `< 1e-300`.
pub const P_VALUE_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("{test} needs at least {needed} samples, got {got}")]
    InsufficientSample {
        test: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("sample contains a non-finite value at index {0}")]
    NonFiniteSample(usize),
    #[error("bin count must be at least 1")]
    InvalidBins,
    #[error("histogram range [{0}, {1}] is empty")]
    InvalidRange(f64, f64),
    #[error("significance level {0} outside (0, 1)")]
    InvalidAlpha(f64),
}

/// `exp(-x^2 / 2)` with the square formed exactly, so the relative error
/// does not grow with `x^2`.
fn gaussian_kernel(x: f64) -> f64 {
    let sq = x * x;
    let sq_err = x.mul_add(x, -sq);
    (-0.5 * sq).exp() * (-0.5 * sq_err).exp()
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `Phi(x) - 1/2 = phi(x) (x + x^3/3 + x^5/(3*5) + ...)`. All terms share a
/// sign, so there is no cancellation.
fn central_mass(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut k = 1.0;
    while term.abs() > 1e-17 * sum.abs() {
        k += 2.0;
        term *= x2 / k;
        sum += term;
    }
    INV_SQRT_2PI * gaussian_kernel(x) * sum
}

/// Laplace continued fraction `x + 1/(x + 2/(x + 3/(x + ...)))` for `x > 0`;
/// the upper tail is `phi(x)` divided by it.
fn mills_denominator(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for n in 1..10_000 {
        let a = n as f64;
        d = x + a * d;
        if d == 0.0 {
            d = TINY;
        }
        d = 1.0 / d;
        c = x + a / c;
        if c == 0.0 {
            c = TINY;
        }
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    f
}

const TAIL_SWITCH: f64 = 3.0;

/// `1 - Phi(x)` for `x >= 0`.
fn upper_tail(x: f64) -> f64 {
    if x < TAIL_SWITCH {
        0.5 - central_mass(x)
    } else {
        INV_SQRT_2PI * gaussian_kernel(x) / mills_denominator(x)
    }
}

/// Standard normal CDF, absolute error below 1e-15.
pub fn normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x >= 0.0 {
        1.0 - upper_tail(x)
    } else {
        upper_tail(-x)
    }
}

/// `ln Phi(x)`, finite for every finite `x`.
pub fn ln_normal_cdf(x: f64) -> f64 {
    if x >= 0.0 {
        (-upper_tail(x)).ln_1p()
    } else if -x < TAIL_SWITCH {
        upper_tail(-x).ln()
    } else {
        let t = -x;
        let sq = t * t;
        let sq_err = t.mul_add(t, -sq);
        -0.5 * sq - 0.5 * sq_err + INV_SQRT_2PI.ln() - mills_denominator(t).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    bin_edges: Vec<f64>,
    counts: Vec<u64>,
    total: u64,
}

impl Histogram {
    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// `(lo, hi, count)` per bin.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        self.bin_edges
            .windows(2)
            .zip(&self.counts)
            .map(|(w, &c)| (w[0], w[1], c))
    }

    /// CSV with header `bin_lo,bin_hi,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count\n");
        for (lo, hi, c) in self.rows() {
            out.push_str(&format!("{lo},{hi},{c}\n"));
        }
        out
    }
}

fn check_finite(samples: &[f64]) -> Result<(), StatsError> {
    match samples.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(StatsError::NonFiniteSample(i)),
        None => Ok(()),
    }
}

/// Equal-width histogram over `range` (default: sample min to max). Bins are
/// half-open `[lo, hi)` except the last, which is closed. Samples outside the
/// range are not counted.
pub fn build_histogram(
    samples: &[f64],
    bins: usize,
    range: Option<(f64, f64)>,
) -> Result<Histogram, StatsError> {
    if bins == 0 {
        return Err(StatsError::InvalidBins);
    }
    if samples.is_empty() {
        return Err(StatsError::EmptySample);
    }
    check_finite(samples)?;
    let (lo, hi) = match range {
        Some((lo, hi)) => {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(StatsError::InvalidRange(lo, hi));
            }
            (lo, hi)
        }
        None => {
            let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo == hi {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        }
    };
    let width = (hi - lo) / bins as f64;
    let mut bin_edges: Vec<f64> = (0..bins).map(|i| lo + i as f64 * width).collect();
    bin_edges.push(hi);
    let mut counts = vec![0u64; bins];
    for &x in samples {
        if x < lo || x > hi {
            continue;
        }
        let mut idx = (((x - lo) / width) as usize).min(bins - 1);
        // Align with the stored edges when the division rounded across one.
        if x < bin_edges[idx] {
            idx -= 1;
        } else if idx + 1 < bins && x >= bin_edges[idx + 1] {
            idx += 1;
        }
        counts[idx] += 1;
    }
    let total = counts.iter().sum();
    Ok(Histogram {
        bin_edges,
        counts,
        total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestKind {
    #[serde(rename = "chi2")]
    ChiSquare,
    #[serde(rename = "ad")]
    AndersonDarling,
    #[serde(rename = "ks")]
    KolmogorovSmirnov,
}

impl TestKind {
    pub const ALL: [TestKind; 3] = [
        TestKind::ChiSquare,
        TestKind::AndersonDarling,
        TestKind::KolmogorovSmirnov,
    ];

    pub fn id(self) -> &'static str {
        match self {
            TestKind::ChiSquare => "chi2",
            TestKind::AndersonDarling => "ad",
            TestKind::KolmogorovSmirnov => "ks",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            TestKind::ChiSquare => "Chi-square goodness of fit",
            TestKind::AndersonDarling => "Anderson-Darling",
            TestKind::KolmogorovSmirnov => "Kolmogorov-Smirnov",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        TestKind::ALL.into_iter().find(|k| k.id() == id)
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PValue {
    Value(f64),
    /// Smaller than [`P_VALUE_FLOOR`].
    BelowFloor,
}

impl PValue {
    fn new(p: f64) -> Self {
        let p = p.clamp(0.0, 1.0);
        if p < P_VALUE_FLOOR {
            PValue::BelowFloor
        } else {
            PValue::Value(p)
        }
    }

    /// Numeric value; `0.0` for [`PValue::BelowFloor`].
    pub fn value(self) -> f64 {
        match self {
            PValue::Value(p) => p,
            PValue::BelowFloor => 0.0,
        }
    }
}

impl fmt::Display for PValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PValue::Value(p) => write!(f, "{p:.4}"),
            PValue::BelowFloor => f.write_str("< 1e-300"),
        }
    }
}

impl Serialize for PValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            PValue::Value(p) => serializer.serialize_f64(*p),
            PValue::BelowFloor => serializer.serialize_str("< 1e-300"),
        }
    }
}

impl<'de> Deserialize<'de> for PValue {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(p) => Ok(PValue::Value(p)),
            Raw::Text(s) if s == "< 1e-300" => Ok(PValue::BelowFloor),
            Raw::Text(s) => Err(serde::de::Error::custom(format!("bad p-value {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: TestKind,
    pub statistic: f64,
    pub p_value: PValue,
    pub alpha: f64,
    pub rejected: bool,
}

impl TestReport {
    fn new(test: TestKind, statistic: f64, p: f64, alpha: f64) -> Self {
        let p_value = PValue::new(p);
        TestReport {
            test,
            statistic,
            p_value,
            alpha,
            rejected: p_value.value() < alpha,
        }
    }

    pub fn decision(&self) -> &'static str {
        if self.rejected {
            "Rejected"
        } else {
            "Non-rejected"
        }
    }
}

fn check_alpha(alpha: f64) -> Result<(), StatsError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(StatsError::InvalidAlpha(alpha))
    }
}

fn check_size(test: &'static str, samples: &[f64], needed: usize) -> Result<(), StatsError> {
    if samples.len() < needed {
        Err(StatsError::InsufficientSample {
            test,
            needed,
            got: samples.len(),
        })
    } else {
        Ok(())
    }
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// Chi-square goodness of fit with [`DEFAULT_CHI2_BINS`] equal-probability
/// bins.
pub fn chi_square_gof(samples: &[f64], alpha: f64) -> Result<TestReport, StatsError> {
    chi_square_gof_binned(samples, DEFAULT_CHI2_BINS, alpha)
}

/// Chi-square goodness of fit with `bins` equal-probability bins under the
/// standard normal; `bins - 1` degrees of freedom.
pub fn chi_square_gof_binned(
    samples: &[f64],
    bins: usize,
    alpha: f64,
) -> Result<TestReport, StatsError> {
    check_alpha(alpha)?;
    if bins < 2 {
        return Err(StatsError::InvalidBins);
    }
    check_size("chi-square", samples, 50)?;
    check_finite(samples)?;
    let observed = equal_probability_counts(samples, bins);
    let expected = samples.len() as f64 / bins as f64;
    let statistic = compensated_sum(observed.iter().map(|&o| {
        let d = o as f64 - expected;
        d * d / expected
    }));
    let df = (bins - 1) as f64;
    let p = if statistic > 0.0 {
        gamma_ur(df / 2.0, statistic / 2.0)
    } else {
        1.0
    };
    Ok(TestReport::new(TestKind::ChiSquare, statistic, p, alpha))
}

/// Counts per bin `[j/bins, (j+1)/bins)` of `Phi(x)`.
pub fn equal_probability_counts(samples: &[f64], bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; bins];
    for &x in samples {
        let idx = ((normal_cdf(x) * bins as f64) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    counts
}

/// Anderson-Darling statistic against the standard normal:
/// `A^2 = -n - (1/n) sum (2i-1) [ln Phi(x_(i)) + ln(1 - Phi(x_(n+1-i)))]`.
pub fn anderson_darling_statistic(samples: &[f64]) -> f64 {
    let x = sorted(samples);
    let n = x.len();
    // Regrouped per order statistic so that negating the sample produces the
    // same multiset of terms; summing them in sorted order then gives a
    // bit-identical statistic.
    let mut terms: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let lower = (2 * i + 1) as f64;
            let upper = (2 * (n - i) - 1) as f64;
            lower * ln_normal_cdf(xi) + upper * ln_normal_cdf(-xi)
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    -(n as f64) - compensated_sum(terms) / n as f64
}

/// Asymptotic CDF of `A^2` for a fully specified null distribution.
pub fn anderson_darling_asymptotic_cdf(z: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else if z < 2.0 {
        (-1.233_714_1 / z).exp() / z.sqrt()
            * (2.00012
                + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z)
                    * z)
    } else {
        (-(1.0776
            - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z)
            .exp())
        .exp()
    }
}

/// Finite-`n` correction to [`anderson_darling_asymptotic_cdf`], as a
/// function of the asymptotic CDF value `x`.
fn anderson_darling_errfix(n: f64, x: f64) -> f64 {
    if x > 0.8 {
        return (-130.2137
            + (745.2337 - (1705.091 - (1950.646 - (1116.360 - 255.7844 * x) * x) * x) * x) * x)
            / n;
    }
    let c = 0.01265 + 0.1757 / n;
    if x < c {
        let t = x / c;
        let t = t.sqrt() * (1.0 - t) * (49.0 * t - 102.0);
        return t * (0.0037 / (n * n) + 0.00078 / n + 0.00006) / n;
    }
    let t = (x - c) / (0.8 - c);
    let t = -0.00022633 + (6.54034 - (14.6538 - (14.458 - (8.259 - 1.91864 * t) * t) * t) * t) * t;
    t * (0.04213 / n + 0.01365 / (n * n))
}

/// Upper tail `P(A^2 > z)` for sample size `n`.
pub fn anderson_darling_p_value(n: usize, z: f64) -> f64 {
    let n = n as f64;
    let x = anderson_darling_asymptotic_cdf(z);
    let tail = if z < 2.0 {
        1.0 - x
    } else {
        // 1 - exp(-e^g) without cancellation.
        let g = 1.0776
            - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z;
        -(-g.exp()).exp_m1()
    };
    (tail - anderson_darling_errfix(n, x)).clamp(0.0, 1.0)
}

pub fn anderson_darling(samples: &[f64], alpha: f64) -> Result<TestReport, StatsError> {
    check_alpha(alpha)?;
    check_size("Anderson-Darling", samples, 8)?;
    check_finite(samples)?;
    let statistic = anderson_darling_statistic(samples);
    let p = anderson_darling_p_value(samples.len(), statistic);
    Ok(TestReport::new(
        TestKind::AndersonDarling,
        statistic,
        p,
        alpha,
    ))
}

/// `D = max_i max(i/n - Phi(x_(i)), Phi(x_(i)) - (i-1)/n)`.
pub fn kolmogorov_smirnov_statistic(samples: &[f64]) -> f64 {
    let x = sorted(samples);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let f = normal_cdf(xi);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Kolmogorov survival function
/// `Q(lambda) = 2 sum_{j>=1} (-1)^(j-1) exp(-2 j^2 lambda^2)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi-theta form of the same function; converges fast for small lambda.
        let k = -PI * PI / (8.0 * lambda * lambda);
        let mut sum = 0.0;
        for j in 0.. {
            let m = (2 * j + 1) as f64;
            let term = (k * m * m).exp();
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        1.0 - (2.0 * PI).sqrt() / lambda * sum
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for j in 1.. {
            let jf = j as f64;
            let term = (-2.0 * jf * jf * lambda * lambda).exp();
            sum += sign * term;
            if term <= 1e-17 * sum.abs() || term == 0.0 {
                break;
            }
            sign = -sign;
        }
        2.0 * sum
    }
}

/// KS p-value with the finite-sample argument
/// `lambda = (sqrt(n) + 0.12 + 0.11/sqrt(n)) D`.
pub fn kolmogorov_smirnov_p_value(n: usize, d: f64) -> f64 {
    let rn = (n as f64).sqrt();
    kolmogorov_survival((rn + 0.12 + 0.11 / rn) * d).clamp(0.0, 1.0)
}

pub fn kolmogorov_smirnov(samples: &[f64], alpha: f64) -> Result<TestReport, StatsError> {
    check_alpha(alpha)?;
    check_size("Kolmogorov-Smirnov", samples, 1)?;
    check_finite(samples)?;
    let d = kolmogorov_smirnov_statistic(samples);
    let p = kolmogorov_smirnov_p_value(samples.len(), d);
    Ok(TestReport::new(TestKind::KolmogorovSmirnov, d, p, alpha))
}

/// Runs one test by kind with its default parameters.
pub fn run_test(kind: TestKind, samples: &[f64], alpha: f64) -> Result<TestReport, StatsError> {
    match kind {
        TestKind::ChiSquare => chi_square_gof(samples, alpha),
        TestKind::AndersonDarling => anderson_darling(samples, alpha),
        TestKind::KolmogorovSmirnov => kolmogorov_smirnov(samples, alpha),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    /// Unbiased (n - 1) variance.
    pub variance: f64,
    /// `m3 / m2^1.5` with population central moments; `None` for zero spread.
    pub skewness: Option<f64>,
    /// `m4 / m2^2 - 3`; `None` for zero spread.
    pub excess_kurtosis: Option<f64>,
}

pub fn moments(samples: &[f64]) -> Result<Moments, StatsError> {
    check_size("moments", samples, 2)?;
    check_finite(samples)?;
    let n = samples.len() as f64;
    let mean = compensated_sum(samples.iter().copied()) / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let variance = m2 / (n - 1.0);
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        let pm2 = m2 / n;
        (
            Some((m3 / n) / pm2.powf(1.5)),
            Some((m4 / n) / (pm2 * pm2) - 3.0),
        )
    } else {
        (None, None)
    };
    Ok(Moments {
        mean,
        variance,
        skewness,
        excess_kurtosis,
    })
}
