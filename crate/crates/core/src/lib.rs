//! Gaussian random number generation driven by a maximal-length LFSR.
//!
//! * [`urng`]: multiple-return shift register generator, primitivity test,
//!   uniform samples on (0, 1).
//! * [`transforms`]: Box-Muller, polar and central-limit transforms in
//!   double precision.
//! * [`fp_pipeline`]: binary32 model of the hardware datapaths with IP-core
//!   flag semantics.
//! * [`stats`]: chi-square, Anderson-Darling and Kolmogorov-Smirnov tests
//!   against the standard normal, plus histograms and moments.
//! * [`qkdmod`]: Gaussian quadrature modulation for CV-QKD state
//!   preparation.

pub mod fp_pipeline;
pub mod qkdmod;
pub mod stats;
pub mod transforms;
pub mod urng;

pub use fp_pipeline::{run_graph, CoreKind, CoreResult, Datapath, F32Value, PipelineTrace};
pub use stats::{TestKind, TestReport};
pub use transforms::{Algorithm, CltConfig, GaussianPair, StreamOutput, Transform};
pub use urng::{Lfsr, LfsrConfig, Polynomial, UniformLanes, UniformSample};
