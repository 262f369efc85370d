//! Uniform-to-Gaussian transforms in double precision: Box-Muller, the
//! polar rejection method and the central-limit sum.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::urng::{UniformLanes, UniformSample};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("uniform input {0} outside the open interval (0, 1)")]
    Domain(f64),
    #[error("central-limit transform expects {expected} uniforms, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("central-limit width must be at least 2, got {0}")]
    InvalidWidth(usize),
    #[error("unknown algorithm {0:?} (expected box-muller, polar or clt)")]
    UnknownAlgorithm(String),
    #[error("uniform source failed: {0}")]
    Source(#[from] SourceError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SourceError {
    #[error("uniform source exhausted after {0} draws")]
    Exhausted(u64),
}

/// Algorithm identifiers shared with the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "box-muller")]
    BoxMuller,
    #[serde(rename = "polar")]
    Polar,
    #[serde(rename = "clt")]
    CentralLimit,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [
        Algorithm::BoxMuller,
        Algorithm::Polar,
        Algorithm::CentralLimit,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Algorithm::BoxMuller => "box-muller",
            Algorithm::Polar => "polar",
            Algorithm::CentralLimit => "clt",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Algorithm {
    type Err = TransformError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.id() == s)
            .ok_or_else(|| TransformError::UnknownAlgorithm(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPair {
    pub alpha: f64,
    pub beta: f64,
}

/// Parameters of the central-limit transform: `k` uniforms with per-term
/// mean 1/2 and variance 1/12.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CltConfig {
    k: usize,
    mu: f64,
    sigma2: f64,
}

impl CltConfig {
    pub const DEFAULT_K: usize = 12;

    pub fn new(k: usize) -> Result<Self, TransformError> {
        if k < 2 {
            return Err(TransformError::InvalidWidth(k));
        }
        Ok(CltConfig {
            k,
            mu: 0.5,
            sigma2: 1.0 / 12.0,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Largest attainable `|z|`, `sqrt(3k)`.
    pub fn support_bound(&self) -> f64 {
        (3.0 * self.k as f64).sqrt()
    }
}

impl Default for CltConfig {
    fn default() -> Self {
        CltConfig::new(Self::DEFAULT_K).expect("default width is valid")
    }
}

/// A fully parameterised transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Transform {
    BoxMuller,
    Polar,
    CentralLimit(CltConfig),
}

impl Transform {
    pub fn new(algorithm: Algorithm, k: usize) -> Result<Self, TransformError> {
        Ok(match algorithm {
            Algorithm::BoxMuller => Transform::BoxMuller,
            Algorithm::Polar => Transform::Polar,
            Algorithm::CentralLimit => Transform::CentralLimit(CltConfig::new(k)?),
        })
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            Transform::BoxMuller => Algorithm::BoxMuller,
            Transform::Polar => Algorithm::Polar,
            Transform::CentralLimit(_) => Algorithm::CentralLimit,
        }
    }

    /// Uniforms consumed per proposal; also the number of generator lanes
    /// the transform draws from.
    pub fn arity(&self) -> usize {
        match self {
            Transform::BoxMuller | Transform::Polar => 2,
            Transform::CentralLimit(c) => c.k(),
        }
    }
}

fn check_open_unit(u: f64) -> Result<f64, TransformError> {
    if u > 0.0 && u < 1.0 {
        Ok(u)
    } else {
        Err(TransformError::Domain(u))
    }
}

// 2*pi split into a double and its rounding residue.
const TWO_PI_HI: f64 = 2.0 * PI;
const TWO_PI_LO: f64 = 2.449_293_598_294_706_4e-16;

/// `(sin 2*pi*t, cos 2*pi*t)` for `t` measured in turns.
///
/// `t` is reduced by an exact quarter-turn subtraction, and the remaining
/// angle is formed in double-double so the result does not inherit the
/// rounding of `2*pi*t` near the zeros of sine and cosine.
pub fn sin_cos_turns(t: f64) -> (f64, f64) {
    let quarters = (4.0 * t).round();
    let r = t - 0.25 * quarters;
    let hi = TWO_PI_HI * r;
    let lo = TWO_PI_HI.mul_add(r, -hi) + TWO_PI_LO * r;
    let (s_hi, c_hi) = hi.sin_cos();
    let s = s_hi + c_hi * lo;
    let c = c_hi - s_hi * lo;
    match (quarters as i64).rem_euclid(4) {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

/// Box-Muller: `alpha = sqrt(-2 ln u1) sin(2 pi u2)`,
/// `beta = sqrt(-2 ln u1) cos(2 pi u2)`.
pub fn box_muller(u1: f64, u2: f64) -> Result<GaussianPair, TransformError> {
    let u1 = check_open_unit(u1)?;
    let u2 = check_open_unit(u2)?;
    let radius = (-2.0 * u1.ln()).sqrt();
    let (sin, cos) = sin_cos_turns(u2);
    Ok(GaussianPair {
        alpha: radius * sin,
        beta: radius * cos,
    })
}

/// One proposal of the polar method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarDraw {
    pub v1: f64,
    pub v2: f64,
    pub s: f64,
    pub accepted: bool,
    pair: Option<GaussianPair>,
}

impl PolarDraw {
    pub fn pair(&self) -> Option<GaussianPair> {
        self.pair
    }
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Maps `(u1, u2)` to `v = 2u - 1` in the square `(-1, 1)^2` and, when the
/// point lies strictly inside the unit disk (and off the origin), returns
/// `v * sqrt(-2 ln s / s)` with `s = v1^2 + v2^2`.
///
/// `s` is carried in double-double so `ln s` stays accurate as `s -> 1`.
pub fn polar_draw(u1: f64, u2: f64) -> PolarDraw {
    let v1 = 2.0 * u1 - 1.0;
    let v2 = 2.0 * u2 - 1.0;
    let (p1, e1) = two_prod(v1, v1);
    let (p2, e2) = two_prod(v2, v2);
    let (s_hi, s_err) = two_sum(p1, p2);
    let s_lo = s_err + e1 + e2;
    let s = s_hi + s_lo;
    // Sterbenz: s_hi - 1 is exact on [0.5, 2].
    let below_one = if (0.5..=2.0).contains(&s_hi) {
        (s_hi - 1.0) + s_lo
    } else {
        s - 1.0
    };
    let accepted = s_hi > 0.0 && below_one < 0.0;
    let pair = accepted.then(|| {
        let ln_s = if s_hi >= 0.5 {
            below_one.ln_1p()
        } else {
            s_hi.ln() + (s_lo / s_hi).ln_1p()
        };
        let factor = (-2.0 * ln_s / s).sqrt();
        GaussianPair {
            alpha: v1 * factor,
            beta: v2 * factor,
        }
    });
    PolarDraw {
        v1,
        v2,
        s,
        accepted,
        pair,
    }
}

/// Polar method; `None` means the proposal was rejected.
pub fn polar(u1: f64, u2: f64) -> Option<GaussianPair> {
    polar_draw(u1, u2).pair
}

/// Standardised sum `z = (S - k mu) / sqrt(k sigma^2)`.
pub fn central_limit(us: &[f64], config: &CltConfig) -> Result<f64, TransformError> {
    if us.len() != config.k {
        return Err(TransformError::LengthMismatch {
            expected: config.k,
            got: us.len(),
        });
    }
    let k = config.k as f64;
    let sum: f64 = us.iter().sum();
    Ok((sum - k * config.mu) / (k * config.sigma2).sqrt())
}

/// Source of uniform samples for the streaming drivers. `lane` selects the
/// generator for the `lane`-th operand of a proposal.
pub trait UniformSource {
    fn next_uniform(&mut self, lane: usize) -> Result<UniformSample, SourceError>;
}

impl UniformSource for UniformLanes {
    fn next_uniform(&mut self, lane: usize) -> Result<UniformSample, SourceError> {
        Ok(self.draw(lane))
    }
}

/// Samples produced by a streaming driver, with uniform-consumption
/// accounting.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StreamOutput<T> {
    pub samples: Vec<T>,
    pub uniforms_consumed: u64,
    pub proposals: u64,
    pub accepted: u64,
}

impl<T> StreamOutput<T> {
    pub fn with_capacity(count: usize) -> Self {
        StreamOutput {
            samples: Vec::with_capacity(count),
            uniforms_consumed: 0,
            proposals: 0,
            accepted: 0,
        }
    }

    /// Uniforms consumed per emitted sample.
    pub fn consumption_ratio(&self) -> f64 {
        self.uniforms_consumed as f64 / self.samples.len() as f64
    }
}

/// Draws `count` standard-normal values. Pair-producing transforms emit
/// `alpha` then `beta`; the second value of the final pair is dropped when
/// `count` is odd.
pub fn stream<S: UniformSource + ?Sized>(
    transform: &Transform,
    source: &mut S,
    count: usize,
) -> Result<StreamOutput<f64>, TransformError> {
    let mut out = StreamOutput::with_capacity(count);
    let mut operands = vec![0.0; transform.arity()];
    while out.samples.len() < count {
        for (lane, slot) in operands.iter_mut().enumerate() {
            *slot = source.next_uniform(lane)?.value();
        }
        out.uniforms_consumed += operands.len() as u64;
        out.proposals += 1;
        match transform {
            Transform::BoxMuller => {
                let pair = box_muller(operands[0], operands[1])?;
                out.accepted += 1;
                push_pair(&mut out.samples, pair.alpha, pair.beta, count);
            }
            Transform::Polar => {
                if let Some(pair) = polar(operands[0], operands[1]) {
                    out.accepted += 1;
                    push_pair(&mut out.samples, pair.alpha, pair.beta, count);
                }
            }
            Transform::CentralLimit(config) => {
                out.accepted += 1;
                out.samples.push(central_limit(&operands, config)?);
            }
        }
    }
    Ok(out)
}

pub(crate) fn push_pair<T>(samples: &mut Vec<T>, alpha: T, beta: T, count: usize) {
    samples.push(alpha);
    if samples.len() < count {
        samples.push(beta);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::urng::{REFERENCE_ORDER, REFERENCE_POLYNOMIAL};

    struct Replay {
        values: Vec<f64>,
        next: usize,
    }

    impl UniformSource for Replay {
        fn next_uniform(&mut self, _lane: usize) -> Result<UniformSample, SourceError> {
            let v = *self
                .values
                .get(self.next)
                .ok_or(SourceError::Exhausted(self.next as u64))?;
            self.next += 1;
            let word = (v * 2f64.powi(32)) as u64;
            Ok(UniformSample::from_word(word, 32).unwrap())
        }
    }

    fn lanes(seed: u64, count: usize) -> UniformLanes {
        UniformLanes::from_master_seed(REFERENCE_ORDER, REFERENCE_POLYNOMIAL, seed, 0, count)
            .unwrap()
    }

    #[test]
    fn algorithm_ids_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.id().parse::<Algorithm>().unwrap(), a);
        }
        assert!("ziggurat".parse::<Algorithm>().is_err());
        assert_eq!(
            serde_json::to_string(&Algorithm::BoxMuller).unwrap(),
            "\"box-muller\""
        );
    }

    #[test]
    fn box_muller_radius_two() {
        let pair = box_muller((-2.0f64).exp(), 0.25).unwrap();
        assert!((pair.alpha - 2.0).abs() < 1e-15);
        assert!(pair.beta.abs() < 1e-15);
    }

    #[test]
    fn box_muller_scalar_value() {
        // sqrt(2 ln 2) * (sin 0.6 pi, cos 0.6 pi), evaluated at 50 digits.
        let pair = box_muller(0.5, 0.3).unwrap();
        assert!((pair.alpha - 1.119_783_474_264_565_7).abs() < 1e-15);
        assert!((pair.beta - -0.363_839_706_304_671_2).abs() < 1e-15);
    }

    #[test]
    fn box_muller_rejects_closed_endpoints() {
        assert_eq!(box_muller(0.0, 0.5), Err(TransformError::Domain(0.0)));
        assert_eq!(box_muller(1.0, 0.5), Err(TransformError::Domain(1.0)));
        assert!(box_muller(0.5, 1.0).is_err());
    }

    #[test]
    fn sin_cos_turns_quadrants() {
        for (t, s, c) in [(0.25, 1.0, 0.0), (0.5, 0.0, -1.0), (0.75, -1.0, 0.0)] {
            let (gs, gc) = sin_cos_turns(t);
            assert!((gs - s).abs() < 1e-16 && (gc - c).abs() < 1e-16, "t={t}");
        }
    }

    #[test]
    fn polar_accepts_on_axis() {
        let draw = polar_draw(0.8, 0.5);
        assert!(draw.accepted);
        let pair = draw.pair().unwrap();
        // 0.6 * sqrt(-2 ln 0.36 / 0.36)
        assert!((pair.alpha - 1.429_441_322_707_568_4).abs() < 1e-15);
        assert_eq!(pair.beta, 0.0);
    }

    #[test]
    fn polar_rejects_outside_disk_and_origin() {
        assert!(polar(0.95, 0.95).is_none());
        let origin = polar_draw(0.5, 0.5);
        assert_eq!(origin.s, 0.0);
        assert!(!origin.accepted);
        // exactly on the unit circle
        assert!(polar(1.0, 0.5).is_none());
    }

    #[test]
    fn polar_keeps_direction() {
        let draw = polar_draw(0.3, 0.85);
        let pair = draw.pair().unwrap();
        assert!((pair.alpha / pair.beta - draw.v1 / draw.v2).abs() < 1e-14);
    }

    #[test]
    fn clt_center_and_bounds() {
        let config = CltConfig::default();
        assert_eq!(central_limit(&[0.5; 12], &config).unwrap(), 0.0);
        let near_one = [1.0 - f64::EPSILON; 12];
        let z = central_limit(&near_one, &config).unwrap();
        assert!(z < 6.0 && z > 5.999_999);
        assert_eq!(config.support_bound(), 6.0);
    }

    #[test]
    fn clt_fixed_vector() {
        let us = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.95, 0.8];
        assert!((us.iter().sum::<f64>() - 7.2).abs() < 1e-12);
        let z = central_limit(&us, &CltConfig::default()).unwrap();
        assert!((z - 1.2).abs() < 1e-12);
    }

    #[test]
    fn clt_length_and_width_errors() {
        assert_eq!(
            central_limit(&[0.5; 3], &CltConfig::default()),
            Err(TransformError::LengthMismatch {
                expected: 12,
                got: 3
            })
        );
        assert_eq!(CltConfig::new(1), Err(TransformError::InvalidWidth(1)));
    }

    #[test]
    fn stream_zero_count() {
        let mut src = lanes(1, 2);
        let out = stream(&Transform::BoxMuller, &mut src, 0).unwrap();
        assert!(out.samples.is_empty());
        assert_eq!(out.uniforms_consumed, 0);
        assert_eq!(src.drawn(), 0);
    }

    #[test]
    fn stream_box_muller_consumption() {
        let mut src = lanes(3, 2);
        let out = stream(&Transform::BoxMuller, &mut src, 10_001).unwrap();
        assert_eq!(out.samples.len(), 10_001);
        assert_eq!(out.uniforms_consumed, 10_002);
        assert_eq!(src.drawn(), 10_002);
    }

    #[test]
    fn stream_clt_consumption() {
        let mut src = lanes(3, 12);
        let out = stream(
            &Transform::CentralLimit(CltConfig::default()),
            &mut src,
            500,
        )
        .unwrap();
        assert_eq!(out.uniforms_consumed, 6000);
        assert!(out.samples.iter().all(|z| z.abs() <= 6.0));
    }

    #[test]
    fn stream_propagates_exhaustion() {
        let mut src = Replay {
            values: vec![0.25, 0.5, 0.75],
            next: 0,
        };
        let err = stream(&Transform::BoxMuller, &mut src, 4).unwrap_err();
        assert_eq!(err, TransformError::Source(SourceError::Exhausted(3)));
    }

    #[test]
    fn stream_polar_consumption_ratio() {
        let mut src = lanes(11, 2);
        let out = stream(&Transform::Polar, &mut src, 200_000).unwrap();
        let ratio = out.consumption_ratio();
        let expected = 4.0 / PI;
        assert!((ratio - expected).abs() < 0.01, "ratio {ratio}");
    }
}
