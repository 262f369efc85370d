//! Gaussian modulation of coherent-state quadratures: pairs of standard
//! normal draws scaled to `q, p ~ N(0, V)` in shot-noise units.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QkdError {
    #[error("modulation variance must be positive and finite, got {0}")]
    InvalidVariance(f64),
    #[error("source ran out after {produced} of {requested} quadrature pairs")]
    SourceExhausted { produced: usize, requested: usize },
    #[error("source produced a non-finite value")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraturePair {
    pub q: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationConfig {
    variance: f64,
    count: usize,
}

impl ModulationConfig {
    pub fn new(variance: f64, count: usize) -> Result<Self, QkdError> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(QkdError::InvalidVariance(variance));
        }
        Ok(ModulationConfig { variance, count })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

/// Consumes `2 * count` values: even positions feed `q`, odd positions `p`.
pub fn quadrature_stream<I>(
    source: I,
    config: &ModulationConfig,
) -> Result<Vec<QuadraturePair>, QkdError>
where
    I: IntoIterator<Item = f64>,
{
    let scale = config.variance.sqrt();
    let mut values = source.into_iter();
    let mut pairs = Vec::with_capacity(config.count);
    for produced in 0..config.count {
        let exhausted = || QkdError::SourceExhausted {
            produced,
            requested: config.count,
        };
        let q = values.next().ok_or_else(exhausted)?;
        let p = values.next().ok_or_else(exhausted)?;
        if !q.is_finite() || !p.is_finite() {
            return Err(QkdError::NonFinite);
        }
        pairs.push(QuadraturePair {
            q: scale * q,
            p: scale * p,
        });
    }
    Ok(pairs)
}

pub fn to_csv(pairs: &[QuadraturePair]) -> String {
    let mut out = String::from("q,p\n");
    for pair in pairs {
        out.push_str(&format!("{},{}\n", pair.q, pair.p));
    }
    out
}
