//! Single-precision model of the generator datapaths.
//!
//! Each floating-point IP core (LOG, SIN/COS, DIV, SQRT, multiplier, adder)
//! is a pure function from binary32 inputs to a binary32 result plus the
//! exception flags the core exposes. Results are rounded to binary32 once
//! per core. Transcendental cores evaluate in binary64 and round, which
//! keeps them within one ulp of the correctly rounded value; DIV, SQRT,
//! MUL and ADD are native binary32 operations and therefore correctly
//! rounded.
//!
//! The three architecture graphs wire the cores the way the hardware does:
//!
//! * Box-Muller: `LOG(u1) -> MUL(-2) -> SQRT`, `MUL(u2, 2pi) -> SIN, COS`,
//!   two output multipliers. Four multipliers in total.
//! * Polar: `v = 2u - 1` in the input converter, two squaring multipliers,
//!   one adder, `LOG`, `MUL(-2)`, `DIV`, `SQRT`, two output multipliers.
//! * Central limit: an accumulator for the sum, two multipliers for the
//!   mean and variance of the sum, `SQRT`, one adder and `DIV`.
//!
//! SIN and COS are modelled as two cores.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::transforms::{push_pair, SourceError, StreamOutput, Transform, UniformSource};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PipelineError {
    #[error("graph for {algorithm} takes {expected} inputs, got {got}")]
    ArityMismatch {
        algorithm: &'static str,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Source(#[from] SourceError),
}

/// A binary32 bit pattern.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct F32Value(u32);

impl F32Value {
    pub const fn from_bits(bits: u32) -> Self {
        F32Value(bits)
    }

    pub fn from_f32(v: f32) -> Self {
        F32Value(v.to_bits())
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub fn value(self) -> f32 {
        f32::from_bits(self.0)
    }

    /// Eight lowercase hex digits.
    pub fn to_hex(self) -> String {
        format!("{:08x}", self.0)
    }

    pub fn is_zero(self) -> bool {
        self.0 & 0x7fff_ffff == 0
    }
}

impl fmt::Debug for F32Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F32Value({:08x} = {:e})", self.0, self.value())
    }
}

impl From<f32> for F32Value {
    fn from(v: f32) -> Self {
        F32Value::from_f32(v)
    }
}

impl Serialize for F32Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

/// Exception outputs of a core. Cores without a given port never raise it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flags {
    pub zero: bool,
    pub nan: bool,
    pub overflow: bool,
    pub underflow: bool,
}

impl Flags {
    pub const NAMES: [&'static str; 4] = ["zero", "nan", "overflow", "underflow"];

    fn as_array(self) -> [bool; 4] {
        [self.zero, self.nan, self.overflow, self.underflow]
    }

    pub fn names(self) -> Vec<&'static str> {
        Self::NAMES
            .into_iter()
            .zip(self.as_array())
            .filter_map(|(name, set)| set.then_some(name))
            .collect()
    }

    pub fn any(self) -> bool {
        self.as_array().into_iter().any(|f| f)
    }
}

impl Serialize for Flags {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.names())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoreResult {
    pub result: F32Value,
    pub flags: Flags,
}

impl CoreResult {
    fn plain(v: f32) -> Self {
        CoreResult {
            result: v.into(),
            flags: Flags::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrigMode {
    Sin,
    Cos,
}

/// Natural logarithm. `zero` is raised for an input of exactly 1, `nan` for
/// negative or NaN inputs.
pub fn core_log(x: F32Value) -> CoreResult {
    let v = x.value();
    let result = (v as f64).ln() as f32;
    CoreResult {
        result: result.into(),
        flags: Flags {
            zero: result == 0.0,
            nan: v < 0.0 || v.is_nan(),
            ..Flags::default()
        },
    }
}

/// Sine or cosine. The core has no exception ports.
pub fn core_sincos(x: F32Value, mode: TrigMode) -> CoreResult {
    let v = x.value() as f64;
    let result = match mode {
        TrigMode::Sin => v.sin(),
        TrigMode::Cos => v.cos(),
    } as f32;
    CoreResult::plain(result)
}

/// Division.
///
/// * `overflow`: the quotient rounds to infinity (this includes `x / 0`
///   for nonzero `x` and `inf / finite`).
/// * `underflow`: the quotient is zero or subnormal although neither
///   operand is zero.
/// * `nan`: `0/0`, `inf/inf`, or a NaN operand.
/// * `zero`: the quotient is zero.
pub fn core_div(a: F32Value, b: F32Value) -> CoreResult {
    let (x, y) = (a.value(), b.value());
    let q = x / y;
    let nan = q.is_nan();
    CoreResult {
        result: q.into(),
        flags: Flags {
            zero: q == 0.0,
            nan,
            overflow: q.is_infinite(),
            underflow: !nan && (q == 0.0 || q.is_subnormal()) && x != 0.0 && y != 0.0,
        },
    }
}

/// Square root. `nan` for negative or NaN inputs, `zero` when the result
/// is zero, `overflow` when the result is infinite.
pub fn core_sqrt(x: F32Value) -> CoreResult {
    let v = x.value();
    let r = v.sqrt();
    CoreResult {
        result: r.into(),
        flags: Flags {
            zero: r == 0.0,
            nan: v < 0.0 || v.is_nan(),
            overflow: r == f32::INFINITY,
            underflow: false,
        },
    }
}

pub fn core_mul(a: F32Value, b: F32Value) -> CoreResult {
    CoreResult::plain(a.value() * b.value())
}

pub fn core_add(a: F32Value, b: F32Value) -> CoreResult {
    CoreResult::plain(a.value() + b.value())
}

/// Input-converter stage mapping `u` in (0, 1) to `2u - 1`, rounded once.
pub fn recenter(u: F32Value) -> CoreResult {
    CoreResult::plain((2.0 * u.value() as f64 - 1.0) as f32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CoreKind {
    Log,
    Sin,
    Cos,
    Div,
    Sqrt,
    #[serde(rename = "MUL")]
    Multiplier,
    #[serde(rename = "ADD")]
    Adder,
    #[serde(rename = "ACC")]
    Accumulator,
    Recenter,
}

impl CoreKind {
    pub const ALL: [CoreKind; 9] = [
        CoreKind::Log,
        CoreKind::Sin,
        CoreKind::Cos,
        CoreKind::Div,
        CoreKind::Sqrt,
        CoreKind::Multiplier,
        CoreKind::Adder,
        CoreKind::Accumulator,
        CoreKind::Recenter,
    ];

    pub fn label(self) -> &'static str {
        match self {
            CoreKind::Log => "LOG",
            CoreKind::Sin => "SIN",
            CoreKind::Cos => "COS",
            CoreKind::Div => "DIV",
            CoreKind::Sqrt => "SQRT",
            CoreKind::Multiplier => "MUL",
            CoreKind::Adder => "ADD",
            CoreKind::Accumulator => "ACC",
            CoreKind::Recenter => "RECENTER",
        }
    }

    /// LOG, SIN, COS, DIV and SQRT: the vendor function cores, as opposed to
    /// multipliers, adders and converter logic.
    pub fn is_function_core(self) -> bool {
        matches!(
            self,
            CoreKind::Log | CoreKind::Sin | CoreKind::Cos | CoreKind::Div | CoreKind::Sqrt
        )
    }
}

impl fmt::Display for CoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Per-core latency in clock cycles. Only trace metadata depends on it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Latencies(BTreeMap<CoreKind, u32>);

impl Default for Latencies {
    fn default() -> Self {
        Latencies(CoreKind::ALL.into_iter().map(|k| (k, 1)).collect())
    }
}

impl Latencies {
    pub fn set(&mut self, core: CoreKind, cycles: u32) {
        self.0.insert(core, cycles);
    }

    pub fn get(&self, core: CoreKind) -> u32 {
        self.0.get(&core).copied().unwrap_or(1)
    }
}

/// One core invocation. A record with `cleared` set is the sentinel left
/// by an asynchronous clear: no inputs, all-zero result, no flags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CoreRecord {
    pub core: CoreKind,
    #[serde(rename = "input_bits_hex")]
    pub inputs: Vec<F32Value>,
    #[serde(rename = "output_bits_hex")]
    pub output: F32Value,
    pub flags: Flags,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub cleared: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct PipelineTrace {
    pub records: Vec<CoreRecord>,
    pub invocations: BTreeMap<CoreKind, u64>,
    pub flag_counts: BTreeMap<&'static str, u64>,
    pub clears: u64,
    pub latency_cycles: u64,
}

impl PipelineTrace {
    pub fn invocations_of(&self, core: CoreKind) -> u64 {
        self.invocations.get(&core).copied().unwrap_or(0)
    }

    pub fn total_invocations(&self) -> u64 {
        self.invocations.values().sum()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

const NEG_TWO: f32 = -2.0;
const TWO_PI: f32 = std::f32::consts::TAU;

/// A datapath instance: latency configuration plus the trace it accumulates.
#[derive(Debug, Clone)]
pub struct Datapath {
    latencies: Latencies,
    keep_records: bool,
    trace: PipelineTrace,
}

impl Default for Datapath {
    fn default() -> Self {
        Datapath::new(Latencies::default(), true)
    }
}

impl Datapath {
    /// With `keep_records` off, only counters are accumulated.
    pub fn new(latencies: Latencies, keep_records: bool) -> Self {
        Datapath {
            latencies,
            keep_records,
            trace: PipelineTrace::default(),
        }
    }

    pub fn counting() -> Self {
        Datapath::new(Latencies::default(), false)
    }

    pub fn trace(&self) -> &PipelineTrace {
        &self.trace
    }

    pub fn take_trace(&mut self) -> PipelineTrace {
        std::mem::take(&mut self.trace)
    }

    fn invoke(&mut self, core: CoreKind, inputs: &[F32Value], out: CoreResult) -> F32Value {
        *self.trace.invocations.entry(core).or_insert(0) += 1;
        for name in out.flags.names() {
            *self.trace.flag_counts.entry(name).or_insert(0) += 1;
        }
        self.trace.latency_cycles += self.latencies.get(core) as u64;
        if self.keep_records {
            self.trace.records.push(CoreRecord {
                core,
                inputs: inputs.to_vec(),
                output: out.result,
                flags: out.flags,
                cleared: false,
            });
        }
        out.result
    }

    /// Asserts `aclr` on one core; recorded as a sentinel, values unaffected.
    pub fn clear(&mut self, core: CoreKind) {
        self.trace.clears += 1;
        if self.keep_records {
            self.trace.records.push(CoreRecord {
                core,
                inputs: Vec::new(),
                output: F32Value::default(),
                flags: Flags::default(),
                cleared: true,
            });
        }
    }

    fn log(&mut self, x: F32Value) -> F32Value {
        self.invoke(CoreKind::Log, &[x], core_log(x))
    }

    fn sin(&mut self, x: F32Value) -> F32Value {
        self.invoke(CoreKind::Sin, &[x], core_sincos(x, TrigMode::Sin))
    }

    fn cos(&mut self, x: F32Value) -> F32Value {
        self.invoke(CoreKind::Cos, &[x], core_sincos(x, TrigMode::Cos))
    }

    fn div(&mut self, a: F32Value, b: F32Value) -> F32Value {
        self.invoke(CoreKind::Div, &[a, b], core_div(a, b))
    }

    fn sqrt(&mut self, x: F32Value) -> F32Value {
        self.invoke(CoreKind::Sqrt, &[x], core_sqrt(x))
    }

    fn mul(&mut self, a: F32Value, b: F32Value) -> F32Value {
        self.invoke(CoreKind::Multiplier, &[a, b], core_mul(a, b))
    }

    fn add(&mut self, core: CoreKind, a: F32Value, b: F32Value) -> F32Value {
        self.invoke(core, &[a, b], core_add(a, b))
    }

    fn recenter(&mut self, u: F32Value) -> F32Value {
        self.invoke(CoreKind::Recenter, &[u], recenter(u))
    }

    /// Evaluates one pass of the transform's graph. Box-Muller and an
    /// accepted polar proposal yield two outputs, a rejected polar proposal
    /// none, and the central-limit graph one.
    pub fn run(
        &mut self,
        transform: &Transform,
        inputs: &[F32Value],
    ) -> Result<Vec<F32Value>, PipelineError> {
        let expected = transform.arity();
        if inputs.len() != expected {
            return Err(PipelineError::ArityMismatch {
                algorithm: transform.algorithm().id(),
                expected,
                got: inputs.len(),
            });
        }
        Ok(match transform {
            Transform::BoxMuller => {
                let ln_u1 = self.log(inputs[0]);
                let scaled = self.mul(ln_u1, NEG_TWO.into());
                let radius = self.sqrt(scaled);
                let angle = self.mul(inputs[1], TWO_PI.into());
                let sin = self.sin(angle);
                let cos = self.cos(angle);
                vec![self.mul(radius, sin), self.mul(radius, cos)]
            }
            Transform::Polar => {
                let v1 = self.recenter(inputs[0]);
                let v2 = self.recenter(inputs[1]);
                let sq1 = self.mul(v1, v1);
                let sq2 = self.mul(v2, v2);
                let s = self.add(CoreKind::Adder, sq1, sq2);
                let sv = s.value();
                if !(sv > 0.0 && sv < 1.0) {
                    return Ok(Vec::new());
                }
                let ln_s = self.log(s);
                let scaled = self.mul(ln_s, NEG_TWO.into());
                let ratio = self.div(scaled, s);
                let factor = self.sqrt(ratio);
                vec![self.mul(v1, factor), self.mul(v2, factor)]
            }
            Transform::CentralLimit(config) => {
                let mut sum = inputs[0];
                for &u in &inputs[1..] {
                    sum = self.add(CoreKind::Accumulator, sum, u);
                }
                let k = F32Value::from_f32(config.k() as f32);
                let mean = self.mul(k, (config.mu() as f32).into());
                let variance = self.mul(k, (config.sigma2() as f32).into());
                let sd = self.sqrt(variance);
                let centered = self.add(CoreKind::Adder, sum, (-mean.value()).into());
                vec![self.div(centered, sd)]
            }
        })
    }
}

/// Evaluates one pass of a graph with a fresh recording datapath.
pub fn run_graph(
    transform: &Transform,
    inputs: &[F32Value],
) -> Result<(Vec<F32Value>, PipelineTrace), PipelineError> {
    let mut datapath = Datapath::default();
    let outputs = datapath.run(transform, inputs)?;
    Ok((outputs, datapath.take_trace()))
}

/// Cores instantiated by each graph: the resource proxy reported in place of
/// synthesis figures.
pub fn graph_inventory(transform: &Transform) -> BTreeMap<CoreKind, u32> {
    let entries: &[(CoreKind, u32)] = match transform {
        Transform::BoxMuller => &[
            (CoreKind::Log, 1),
            (CoreKind::Sqrt, 1),
            (CoreKind::Sin, 1),
            (CoreKind::Cos, 1),
            (CoreKind::Multiplier, 4),
        ],
        Transform::Polar => &[
            (CoreKind::Log, 1),
            (CoreKind::Sqrt, 1),
            (CoreKind::Div, 1),
            (CoreKind::Multiplier, 5),
            (CoreKind::Adder, 1),
            (CoreKind::Recenter, 2),
        ],
        Transform::CentralLimit(_) => &[
            (CoreKind::Accumulator, 1),
            (CoreKind::Sqrt, 1),
            (CoreKind::Div, 1),
            (CoreKind::Multiplier, 2),
            (CoreKind::Adder, 1),
        ],
    };
    entries.iter().copied().collect()
}

/// Core invocations for one accepted pass of the graph.
pub fn invocations_per_pass(transform: &Transform) -> BTreeMap<CoreKind, u64> {
    let mut counts: BTreeMap<CoreKind, u64> = graph_inventory(transform)
        .into_iter()
        .map(|(k, v)| (k, v as u64))
        .collect();
    if let Transform::CentralLimit(config) = transform {
        counts.insert(CoreKind::Accumulator, config.k() as u64 - 1);
    }
    counts
}

/// Pipeline-mode counterpart of [`crate::transforms::stream`]: uniforms
/// are converted to binary32 (truncating) and pushed through the graph.
pub fn pipeline_stream<S: UniformSource + ?Sized>(
    transform: &Transform,
    source: &mut S,
    count: usize,
    datapath: &mut Datapath,
) -> Result<StreamOutput<f32>, PipelineError> {
    let mut out = StreamOutput::with_capacity(count);
    let mut inputs = vec![F32Value::default(); transform.arity()];
    while out.samples.len() < count {
        for (lane, slot) in inputs.iter_mut().enumerate() {
            *slot = source.next_uniform(lane)?.to_f32().into();
        }
        out.uniforms_consumed += inputs.len() as u64;
        out.proposals += 1;
        let outputs = datapath.run(transform, &inputs)?;
        match outputs.as_slice() {
            [] => {}
            [z] => {
                out.accepted += 1;
                out.samples.push(z.value());
            }
            [a, b, ..] => {
                out.accepted += 1;
                push_pair(&mut out.samples, a.value(), b.value(), count);
            }
        }
    }
    Ok(out)
}
