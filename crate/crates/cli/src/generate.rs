//! Sharded sample generation. Shard `s` owns the lanes derived from
//! `(master_seed, s)`; shard outputs are concatenated in shard order, so the
//! result depends only on the configuration, never on thread scheduling.

use std::collections::BTreeMap;
use std::thread;

use grng_core::fp_pipeline::{pipeline_stream, CoreKind, Datapath};
use grng_core::transforms::{stream, Algorithm, StreamOutput, Transform};
use grng_core::urng::{UniformLanes, MAX_LANES, REFERENCE_ORDER, REFERENCE_POLYNOMIAL};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Double precision transforms.
    Reference,
    /// Binary32 datapath emulation.
    Pipeline,
}

impl Mode {
    pub fn id(self) -> &'static str {
        match self {
            Mode::Reference => "reference",
            Mode::Pipeline => "pipeline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub n: usize,
    pub master_seed: u64,
    pub mode: Mode,
    pub k: usize,
    pub shards: usize,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, n: usize, master_seed: u64, mode: Mode) -> Self {
        RunConfig {
            algorithm,
            n,
            master_seed,
            mode,
            k: grng_core::CltConfig::DEFAULT_K,
            shards: 1,
        }
    }

    pub fn validate(&self) -> Result<Transform, CliError> {
        if self.n == 0 {
            return Err(CliError::Usage("--n must be at least 1".into()));
        }
        if self.shards == 0 {
            return Err(CliError::Usage("--shards must be at least 1".into()));
        }
        if self.k < 2 || self.k > MAX_LANES {
            return Err(CliError::Usage(format!(
                "--k must be between 2 and {MAX_LANES}, got {}",
                self.k
            )));
        }
        Transform::new(self.algorithm, self.k).map_err(|e| CliError::Usage(e.to_string()))
    }

    /// Sample counts per shard: the first `n % shards` shards take one extra.
    pub fn shard_sizes(&self) -> Vec<usize> {
        let base = self.n / self.shards;
        let extra = self.n % self.shards;
        (0..self.shards)
            .map(|s| base + (s < extra) as usize)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    Reference(Vec<f64>),
    Pipeline(Vec<f32>),
}

impl Samples {
    pub fn len(&self) -> usize {
        match self {
            Samples::Reference(v) => v.len(),
            Samples::Pipeline(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mode(&self) -> Mode {
        match self {
            Samples::Reference(_) => Mode::Reference,
            Samples::Pipeline(_) => Mode::Pipeline,
        }
    }

    /// Widened copy; exact for binary32 samples.
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            Samples::Reference(v) => v.clone(),
            Samples::Pipeline(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub samples: Samples,
    pub uniforms_consumed: u64,
    pub proposals: u64,
    pub accepted: u64,
    /// Pipeline mode only.
    pub core_invocations: Option<BTreeMap<CoreKind, u64>>,
}

struct ShardOutput<T> {
    out: StreamOutput<T>,
    invocations: BTreeMap<CoreKind, u64>,
}

fn run_shard<T>(
    config: &RunConfig,
    transform: &Transform,
    shard: usize,
    count: usize,
    draw: impl Fn(&Transform, &mut UniformLanes, usize) -> Result<ShardOutput<T>, CliError>,
) -> Result<ShardOutput<T>, CliError> {
    let mut lanes = UniformLanes::from_master_seed(
        REFERENCE_ORDER,
        REFERENCE_POLYNOMIAL,
        config.master_seed,
        shard as u64,
        transform.arity(),
    )
    .map_err(|e| CliError::Data(e.to_string()))?;
    draw(transform, &mut lanes, count)
}

/// Concatenated samples, summed consumption counters, summed core counts.
type Merged<T> = (Vec<T>, StreamOutput<()>, BTreeMap<CoreKind, u64>);

fn sharded<T: Send>(
    config: &RunConfig,
    transform: &Transform,
    draw: impl Fn(&Transform, &mut UniformLanes, usize) -> Result<ShardOutput<T>, CliError> + Sync,
) -> Result<Merged<T>, CliError> {
    let sizes = config.shard_sizes();
    let results: Vec<Result<ShardOutput<T>, CliError>> = if sizes.len() == 1 {
        vec![run_shard(config, transform, 0, sizes[0], &draw)]
    } else {
        thread::scope(|scope| {
            let handles: Vec<_> = sizes
                .iter()
                .enumerate()
                .map(|(shard, &count)| {
                    let draw = &draw;
                    scope.spawn(move || run_shard(config, transform, shard, count, draw))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("generator shard panicked"))
                .collect()
        })
    };
    let mut samples = Vec::with_capacity(config.n);
    let mut totals = StreamOutput::<()>::default();
    let mut invocations = BTreeMap::new();
    for result in results {
        let shard = result?;
        samples.extend(shard.out.samples);
        totals.uniforms_consumed += shard.out.uniforms_consumed;
        totals.proposals += shard.out.proposals;
        totals.accepted += shard.out.accepted;
        for (core, count) in shard.invocations {
            *invocations.entry(core).or_insert(0) += count;
        }
    }
    Ok((samples, totals, invocations))
}

/// Draws `config.n` samples.
pub fn generate(config: &RunConfig) -> Result<Generated, CliError> {
    let transform = config.validate()?;
    match config.mode {
        Mode::Reference => {
            let (samples, totals, _) = sharded(config, &transform, |t, lanes, count| {
                let out = stream(t, lanes, count).map_err(|e| CliError::Data(e.to_string()))?;
                Ok(ShardOutput {
                    out,
                    invocations: BTreeMap::new(),
                })
            })?;
            Ok(Generated {
                samples: Samples::Reference(samples),
                uniforms_consumed: totals.uniforms_consumed,
                proposals: totals.proposals,
                accepted: totals.accepted,
                core_invocations: None,
            })
        }
        Mode::Pipeline => {
            let (samples, totals, invocations) = sharded(config, &transform, |t, lanes, count| {
                let mut datapath = Datapath::counting();
                let out = pipeline_stream(t, lanes, count, &mut datapath)
                    .map_err(|e| CliError::Data(e.to_string()))?;
                Ok(ShardOutput {
                    out,
                    invocations: datapath.take_trace().invocations,
                })
            })?;
            Ok(Generated {
                samples: Samples::Pipeline(samples),
                uniforms_consumed: totals.uniforms_consumed,
                proposals: totals.proposals,
                accepted: totals.accepted,
                core_invocations: Some(invocations),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shard_sizes_cover_n() {
        let mut config = RunConfig::new(Algorithm::BoxMuller, 10, 1, Mode::Reference);
        config.shards = 3;
        assert_eq!(config.shard_sizes(), vec![4, 3, 3]);
    }

    #[test]
    fn sharded_output_is_deterministic_and_shard_major() {
        let mut config = RunConfig::new(Algorithm::Polar, 1001, 9, Mode::Reference);
        config.shards = 4;
        let a = generate(&config).unwrap();
        let b = generate(&config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples.len(), 1001);
        // The first shard's block equals a single-shard run of its size.
        let mut first = config;
        first.shards = 1;
        first.n = config.shard_sizes()[0];
        let head = generate(&first).unwrap().samples.to_f64();
        assert_eq!(&a.samples.to_f64()[..head.len()], &head[..]);
    }

    #[test]
    fn pipeline_reports_core_counts() {
        let config = RunConfig::new(Algorithm::BoxMuller, 10, 3, Mode::Pipeline);
        let g = generate(&config).unwrap();
        assert_eq!(g.core_invocations.unwrap()[&CoreKind::Multiplier], 4 * 5);
    }

    #[test]
    fn validation() {
        assert!(matches!(
            RunConfig::new(Algorithm::BoxMuller, 0, 1, Mode::Reference).validate(),
            Err(CliError::Usage(_))
        ));
        let mut config = RunConfig::new(Algorithm::CentralLimit, 5, 1, Mode::Reference);
        config.k = 1;
        assert!(config.validate().is_err());
        config.k = 65;
        assert!(config.validate().is_err());
    }
}
