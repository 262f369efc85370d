//! Sample files and their metadata sidecars.
//!
//! * `csv`: a `value` header then one sample per line.
//! * `json`: an array of numbers.
//! * `bin`: 16-byte little-endian header (`b"GRNG"`, mode `u32`, count
//!   `u64`) followed by the samples as little-endian binary64 (mode 0,
//!   reference) or binary32 (mode 1, pipeline).
//!
//! Text formats store binary32 samples widened to binary64, which is exact,
//! so every format reads back bit for bit.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use grng_core::fp_pipeline::CoreKind;
use grng_core::transforms::Algorithm;
use grng_core::urng::{Polynomial, REFERENCE_ORDER, REFERENCE_POLYNOMIAL};
use serde::{Deserialize, Serialize};

use crate::generate::{Generated, Mode, RunConfig, Samples};
use crate::CliError;

pub const MAGIC: &[u8; 4] = b"GRNG";
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Bin,
}

impl Format {
    /// Guess from the file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            Some("bin") => Format::Bin,
            _ => Format::Csv,
        }
    }

    /// Guess from file contents.
    pub fn sniff(bytes: &[u8]) -> Format {
        if bytes.starts_with(MAGIC) {
            return Format::Bin;
        }
        match bytes.iter().find(|b| !b.is_ascii_whitespace()) {
            Some(b'[') => Format::Json,
            _ => Format::Csv,
        }
    }
}

pub fn encode(samples: &Samples, format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer.write_record(["value"]).map_err(csv_error)?;
            for x in samples.to_f64() {
                writer.serialize(x).map_err(csv_error)?;
            }
            writer
                .into_inner()
                .map_err(|e| CliError::Data(e.to_string()))
        }
        Format::Json => {
            let mut bytes = serde_json::to_vec(&samples.to_f64()).map_err(json_error)?;
            bytes.push(b'\n');
            Ok(bytes)
        }
        Format::Bin => {
            let mut bytes = Vec::with_capacity(HEADER_LEN + samples.len() * 8);
            bytes.extend_from_slice(MAGIC);
            let mode: u32 = match samples.mode() {
                Mode::Reference => 0,
                Mode::Pipeline => 1,
            };
            bytes.extend_from_slice(&mode.to_le_bytes());
            bytes.extend_from_slice(&(samples.len() as u64).to_le_bytes());
            match samples {
                Samples::Reference(v) => v.iter().for_each(|x| bytes.extend(x.to_le_bytes())),
                Samples::Pipeline(v) => v.iter().for_each(|x| bytes.extend(x.to_le_bytes())),
            }
            Ok(bytes)
        }
    }
}

/// Parses a sample file. Text formats always decode as reference samples.
pub fn decode(bytes: &[u8], format: Format) -> Result<Samples, CliError> {
    match format {
        Format::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .has_headers(true)
                .trim(csv::Trim::All)
                .from_reader(bytes);
            let mut out = Vec::new();
            for (i, record) in reader.deserialize::<f64>().enumerate() {
                out.push(record.map_err(|e| CliError::Data(format!("row {}: {e}", i + 1)))?);
            }
            Ok(Samples::Reference(out))
        }
        Format::Json => serde_json::from_slice(bytes)
            .map(Samples::Reference)
            .map_err(json_error),
        Format::Bin => decode_bin(bytes),
    }
}

fn decode_bin(bytes: &[u8]) -> Result<Samples, CliError> {
    let bad = |msg: &str| CliError::Data(format!("binary sample file: {msg}"));
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(bad("missing GRNG header"));
    }
    let mode = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let body = &bytes[HEADER_LEN..];
    let width = match mode {
        0 => 8,
        1 => 4,
        m => return Err(bad(&format!("unknown mode {m}"))),
    };
    if count.checked_mul(width as u64) != Some(body.len() as u64) {
        return Err(bad(&format!(
            "header announces {count} samples but the body holds {} bytes",
            body.len()
        )));
    }
    Ok(if width == 8 {
        Samples::Reference(
            body.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )
    } else {
        Samples::Pipeline(
            body.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )
    })
}

pub fn read_samples(path: &Path, format: Option<Format>) -> Result<Samples, CliError> {
    let bytes = fs::read(path).map_err(|e| io_error(path, e))?;
    decode(&bytes, format.unwrap_or_else(|| Format::sniff(&bytes)))
}

/// Provenance written next to every generated file as `<out>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub algorithm: Algorithm,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub k: Option<usize>,
    pub mode: Mode,
    pub n: usize,
    pub master_seed: u64,
    pub shards: usize,
    pub format: Format,
    pub lfsr_order: u32,
    pub lfsr_polynomial: Polynomial,
    pub uniforms_consumed: u64,
    pub proposals: u64,
    pub accepted: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub core_invocations: Option<BTreeMap<CoreKind, u64>>,
}

impl Metadata {
    pub fn new(config: &RunConfig, generated: &Generated, format: Format) -> Self {
        Metadata {
            algorithm: config.algorithm,
            k: (config.algorithm == Algorithm::CentralLimit).then_some(config.k),
            mode: config.mode,
            n: config.n,
            master_seed: config.master_seed,
            shards: config.shards,
            format,
            lfsr_order: REFERENCE_ORDER,
            lfsr_polynomial: REFERENCE_POLYNOMIAL,
            uniforms_consumed: generated.uniforms_consumed,
            proposals: generated.proposals,
            accepted: generated.accepted,
            core_invocations: generated.core_invocations.clone(),
        }
    }
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let mut file = fs::File::create(path).map_err(|e| io_error(path, e))?;
    file.write_all(bytes).map_err(|e| io_error(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(json_error)?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}

pub(crate) fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Data(e.to_string())
}

fn json_error(e: serde_json::Error) -> CliError {
    CliError::Data(e.to_string())
}
