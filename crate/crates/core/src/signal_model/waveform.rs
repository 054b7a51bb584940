use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SignalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveformKind {
    PassbandReal,
    BasebandComplex,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

/// Sampled signal with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub fs: f64,
    pub samples: Samples,
}

impl Waveform {
    pub fn real(fs: f64, samples: Vec<f64>) -> Self {
        Self { fs, samples: Samples::Real(samples) }
    }

    pub fn complex(fs: f64, samples: Vec<Complex64>) -> Self {
        Self { fs, samples: Samples::Complex(samples) }
    }

    pub fn kind(&self) -> WaveformKind {
        match self.samples {
            Samples::Real(_) => WaveformKind::PassbandReal,
            Samples::Complex(_) => WaveformKind::BasebandComplex,
        }
    }

    pub fn len(&self) -> usize {
        match &self.samples {
            Samples::Real(v) => v.len(),
            Samples::Complex(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.fs
    }

    pub fn as_real(&self) -> Result<&[f64], SignalError> {
        match &self.samples {
            Samples::Real(v) => Ok(v),
            Samples::Complex(_) => Err(SignalError::WrongKind { expected: WaveformKind::PassbandReal }),
        }
    }

    pub fn as_complex(&self) -> Result<&[Complex64], SignalError> {
        match &self.samples {
            Samples::Complex(v) => Ok(v),
            Samples::Real(_) => Err(SignalError::WrongKind { expected: WaveformKind::BasebandComplex }),
        }
    }
}

/// JSON sidecar written next to every `.f32` sample file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub fs_hz: f64,
    pub kind: WaveformKind,
    pub first_symbol_index: Option<usize>,
    pub config_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_rate_bps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_train: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_payload: Option<usize>,
    /// Channel parameters applied to produce this waveform, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<serde_json::Value>,
}

impl Sidecar {
    pub fn new(w: &Waveform, config_digest: impl Into<String>) -> Self {
        Self {
            fs_hz: w.fs,
            kind: w.kind(),
            first_symbol_index: None,
            config_digest: config_digest.into(),
            data_rate_bps: None,
            n_train: None,
            n_payload: None,
            channel: None,
        }
    }
}

/// `<base>.f32` and `<base>.json` for a base path with or without extension.
pub fn file_pair(base: &Path) -> (PathBuf, PathBuf) {
    let stem = match base.extension().and_then(|e| e.to_str()) {
        Some("f32") | Some("json") => base.with_extension(""),
        _ => base.to_path_buf(),
    };
    let mut data = stem.clone().into_os_string();
    data.push(".f32");
    let mut meta = stem.into_os_string();
    meta.push(".json");
    (PathBuf::from(data), PathBuf::from(meta))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Raw little-endian f32 encoding; complex samples are interleaved re, im.
pub fn encode_f32(w: &Waveform) -> Vec<u8> {
    let mut out = Vec::with_capacity(w.len() * 8);
    match &w.samples {
        Samples::Real(v) => v.iter().for_each(|&x| out.extend_from_slice(&(x as f32).to_le_bytes())),
        Samples::Complex(v) => v.iter().for_each(|c| {
            out.extend_from_slice(&(c.re as f32).to_le_bytes());
            out.extend_from_slice(&(c.im as f32).to_le_bytes());
        }),
    }
    out
}

pub fn decode_f32(bytes: &[u8], fs: f64, kind: WaveformKind) -> Result<Waveform, SignalError> {
    if bytes.len() % 4 != 0 {
        return Err(SignalError::InvalidConfig(format!(
            "sample file length {} is not a multiple of 4 bytes",
            bytes.len()
        )));
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    Ok(match kind {
        WaveformKind::PassbandReal => Waveform::real(fs, vals),
        WaveformKind::BasebandComplex => {
            if vals.len() % 2 != 0 {
                return Err(SignalError::InvalidConfig("odd number of interleaved floats".into()));
            }
            Waveform::complex(fs, vals.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect())
        }
    })
}

pub fn write_waveform(base: &Path, w: &Waveform, sidecar: &Sidecar) -> std::io::Result<()> {
    let (data, meta) = file_pair(base);
    write_atomic(&data, &encode_f32(w))?;
    let json = serde_json::to_vec_pretty(sidecar).map_err(std::io::Error::other)?;
    write_atomic(&meta, &json)
}

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed sidecar {path}: {source}")]
    Sidecar { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Signal(#[from] SignalError),
}

pub fn read_waveform(base: &Path) -> Result<(Waveform, Sidecar), ReadError> {
    let (data, meta) = file_pair(base);
    let text = fs::read(&meta).map_err(|source| ReadError::Io { path: meta.clone(), source })?;
    let sidecar: Sidecar =
        serde_json::from_slice(&text).map_err(|source| ReadError::Sidecar { path: meta.clone(), source })?;
    let bytes = fs::read(&data).map_err(|source| ReadError::Io { path: data.clone(), source })?;
    let w = decode_f32(&bytes, sidecar.fs_hz, sidecar.kind)?;
    Ok((w, sidecar))
}
