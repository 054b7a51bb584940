//! Bit error counting, MSE trajectories, EVM and report files.

use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::receiver::{Mode, SymbolDecisionRecord};
use crate::signal_model::{write_atomic, Constellation, PacketConfig};

/// Sliding window used for the MSE trajectory, in symbols.
pub const MSE_WINDOW: usize = 200;
/// Value reported for an all-zero error window.
pub const MSE_FLOOR_DB: f64 = -100.0;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("bit sequences differ in length: {tx} transmitted, {rx} received")]
    LengthMismatch { tx: usize, rx: usize },
    #[error("no records to evaluate")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerResult {
    pub bit_errors: usize,
    pub bits_compared: usize,
    pub ber_point: f64,
    /// `1 / bits_compared`, present only for an error-free comparison.
    pub ber_upper_bound: Option<f64>,
}

impl BerResult {
    /// `"< 1E-4"` style for error-free runs, otherwise the point estimate.
    pub fn render(&self) -> String {
        match self.ber_upper_bound {
            Some(b) => format!("< {}", sci(b)),
            None => sci(self.ber_point),
        }
    }
}

/// Scientific notation with up to three significant digits and no
/// trailing zeros: `1E-4`, `1.25E-4`, `4.17E-5`.
pub fn sci(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let s = format!("{v:.2E}");
    let (mant, exp) = s.split_once('E').expect("E format");
    let mant = mant.trim_end_matches('0').trim_end_matches('.');
    format!("{mant}E{exp}")
}

pub fn compute_ber(tx_bits: &[u8], rx_bits: &[u8]) -> Result<BerResult, MetricsError> {
    if tx_bits.len() != rx_bits.len() {
        return Err(MetricsError::LengthMismatch { tx: tx_bits.len(), rx: rx_bits.len() });
    }
    let n = tx_bits.len();
    let errors = tx_bits.iter().zip(rx_bits).filter(|(a, b)| a != b).count();
    let ber_point = if n == 0 { 0.0 } else { errors as f64 / n as f64 };
    let ber_upper_bound = (errors == 0 && n > 0).then(|| 1.0 / n as f64);
    Ok(BerResult { bit_errors: errors, bits_compared: n, ber_point, ber_upper_bound })
}

fn to_db(mse: f64) -> f64 {
    if mse > 0.0 {
        (10.0 * mse.log10()).max(MSE_FLOOR_DB)
    } else {
        MSE_FLOOR_DB
    }
}

/// `(k, MSE dB)` for every record: mean `|e|^2` over the trailing
/// `MSE_WINDOW` symbols ending at `k` (shorter at the start).
pub fn compute_mse_trace(records: &[SymbolDecisionRecord]) -> Vec<(usize, f64)> {
    mse_trace_of(&records.iter().map(|r| r.e.norm_sqr()).collect::<Vec<_>>(), MSE_WINDOW)
        .into_iter()
        .zip(records)
        .map(|(m, r)| (r.k, m))
        .collect()
}

/// Windowed MSE in dB of a squared-error sequence.
pub fn mse_trace_of(sq_err: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    // Each window is summed directly so its value depends only on its own
    // contents, not on accumulated rounding from earlier symbols.
    (0..sq_err.len())
        .map(|k| {
            let lo = (k + 1).saturating_sub(window);
            let sum: f64 = sq_err[lo..=k].iter().sum();
            to_db(sum / (k + 1 - lo) as f64)
        })
        .collect()
}

/// Mean `|e|^2` in dB over a block of records.
pub fn block_mse_db(records: &[SymbolDecisionRecord], range: Range<usize>) -> f64 {
    let block = &records[range.start.min(records.len())..range.end.min(records.len())];
    if block.is_empty() {
        return f64::NAN;
    }
    to_db(block.iter().map(|r| r.e.norm_sqr()).sum::<f64>() / block.len() as f64)
}

/// RMS error over the decision-directed records relative to the
/// constellation RMS, in percent.
pub fn compute_evm(records: &[SymbolDecisionRecord], c: &Constellation) -> f64 {
    let dd: Vec<_> = records.iter().filter(|r| r.mode == Mode::DecisionDirected).collect();
    if dd.is_empty() {
        return 0.0;
    }
    let mse = dd.iter().map(|r| r.e.norm_sqr()).sum::<f64>() / dd.len() as f64;
    100.0 * mse.sqrt() / c.rms()
}

/// Raw channel rate `k fb` in bit/s.
pub fn data_rate(cfg: &PacketConfig) -> f64 {
    cfg.data_rate_bps()
}

/// Fraction of decision-directed outputs whose nearest constellation point
/// equals the recorded decision.
pub fn classification_agreement(records: &[SymbolDecisionRecord], c: &Constellation) -> f64 {
    let dd: Vec<_> = records.iter().filter(|r| r.mode == Mode::DecisionDirected).collect();
    if dd.is_empty() {
        return 1.0;
    }
    dd.iter().filter(|r| c.slice(r.y) == r.d).count() as f64 / dd.len() as f64
}

/// Summary of one decoded packet, serialized as `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketReport {
    pub format: String,
    pub fc_hz: f64,
    pub fb_hz: f64,
    pub n_train: usize,
    pub n_payload: usize,
    pub bit_errors: usize,
    pub bits_compared: usize,
    pub ber_point: f64,
    pub ber_upper_bound: Option<f64>,
    /// Rendered BER, `"< 1/bits_compared"` when error free.
    pub ber: String,
    pub symbol_errors: usize,
    pub evm_percent: f64,
    pub data_rate_bps: f64,
    pub mse_window: usize,
    /// Training MSE over symbols `[0, 500)` and `[500, 1000)`, dB.
    pub mse_training_early_db: f64,
    pub mse_training_late_db: f64,
    /// Last point of the MSE trajectory, dB.
    pub mse_final_db: f64,
    pub classification_agreement: f64,
    pub preamble_sample: usize,
    pub start_sample: usize,
    pub doppler_factor: f64,
    pub sync_peak: f64,
    pub config_digest: String,
    /// Full trajectory; written to `mse_trace.csv` rather than the JSON.
    #[serde(skip)]
    pub mse_trace: Vec<(usize, f64)>,
}

impl PacketReport {
    pub fn ber_result(&self) -> BerResult {
        BerResult {
            bit_errors: self.bit_errors,
            bits_compared: self.bits_compared,
            ber_point: self.ber_point,
            ber_upper_bound: self.ber_upper_bound,
        }
    }

    pub fn to_json(&self) -> Result<String, MetricsError> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Writes `report.json`, `mse_trace.csv` and `constellation.csv`.
    pub fn write_dir(&self, dir: &Path, records: &[SymbolDecisionRecord]) -> Result<(), MetricsError> {
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("report.json"), self.to_json()?.as_bytes())?;
        write_atomic(&dir.join("mse_trace.csv"), mse_csv(&self.mse_trace, self.mse_window).as_bytes())?;
        export_constellation(records, &dir.join("constellation.csv"))
    }
}

/// Builds a report from the equalizer records and the recovered bits.
pub struct ReportInputs<'a> {
    pub cfg: &'a PacketConfig,
    pub records: &'a [SymbolDecisionRecord],
    pub tx_bits: &'a [u8],
    pub rx_bits: &'a [u8],
    pub tx_symbols: &'a [num_complex::Complex64],
    pub decisions: &'a [num_complex::Complex64],
    pub sync: &'a crate::sync::SyncResult,
}

pub fn build_report(inp: ReportInputs<'_>) -> Result<PacketReport, MetricsError> {
    let c = inp.cfg.constellation();
    let ber = compute_ber(inp.tx_bits, inp.rx_bits)?;
    let trace = compute_mse_trace(inp.records);
    let symbol_errors = inp.tx_symbols.iter().zip(inp.decisions).filter(|(a, b)| a != b).count();
    Ok(PacketReport {
        format: inp.cfg.format.to_string(),
        fc_hz: inp.cfg.fc,
        fb_hz: inp.cfg.fb,
        n_train: inp.cfg.n_train,
        n_payload: inp.cfg.n_payload,
        bit_errors: ber.bit_errors,
        bits_compared: ber.bits_compared,
        ber_point: ber.ber_point,
        ber_upper_bound: ber.ber_upper_bound,
        ber: ber.render(),
        symbol_errors,
        evm_percent: compute_evm(inp.records, &c),
        data_rate_bps: data_rate(inp.cfg),
        mse_window: MSE_WINDOW,
        mse_training_early_db: block_mse_db(inp.records, 0..500),
        mse_training_late_db: block_mse_db(inp.records, 500..1000),
        mse_final_db: trace.last().map_or(MSE_FLOOR_DB, |t| t.1),
        classification_agreement: classification_agreement(inp.records, &c),
        preamble_sample: inp.sync.preamble_sample,
        start_sample: inp.sync.start_sample,
        doppler_factor: inp.sync.doppler_factor,
        sync_peak: inp.sync.peak_metric,
        config_digest: inp.cfg.digest(),
        mse_trace: trace,
    })
}

pub fn mse_csv(trace: &[(usize, f64)], window: usize) -> String {
    let mut s = format!("# sliding window {window} symbols\nsymbol_index,mse_db\n");
    for (k, m) in trace {
        let _ = writeln!(s, "{k},{m:.4}");
    }
    s
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Training => "training",
        Mode::DecisionDirected => "decision_directed",
    }
}

/// Post-training equalizer outputs as `re,im,symbol_index,mode`.
pub fn constellation_csv(records: &[SymbolDecisionRecord]) -> String {
    let mut s = String::from("re,im,symbol_index,mode\n");
    for r in records.iter().filter(|r| r.mode == Mode::DecisionDirected) {
        let _ = writeln!(s, "{:.6},{:.6},{},{}", r.y.re, r.y.im, r.k, mode_name(r.mode));
    }
    s
}

pub fn export_constellation(records: &[SymbolDecisionRecord], path: &Path) -> Result<(), MetricsError> {
    write_atomic(path, constellation_csv(records).as_bytes())?;
    Ok(())
}
