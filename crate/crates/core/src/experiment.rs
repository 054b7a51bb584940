//! Batch runs over a matrix of channel/format/rate rows.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::resolve_preset;
use crate::metrics::MetricsError;
use crate::pipeline::{simulate, PipelineError};
use crate::receiver::{EqualizerConfig, ReceiverError};
use crate::signal_model::{write_atomic, ConstellationKind, PacketConfig, PreambleKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// 1,000 training and 4,000 payload symbols.
    #[default]
    Desk,
    /// 10,000 training and 40,000 payload symbols.
    Full,
}

impl Scale {
    pub fn symbols(self) -> (usize, usize) {
        match self {
            Scale::Desk => (1_000, 4_000),
            Scale::Full => (10_000, 40_000),
        }
    }
}

fn default_preamble() -> PreambleKind {
    PreambleKind::Barker13
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentRow {
    pub label: String,
    /// Built-in preset name or path to a preset JSON file.
    pub channel: String,
    pub format: ConstellationKind,
    pub fc_hz: f64,
    pub fb_hz: f64,
    #[serde(default = "default_preamble")]
    pub preamble: PreambleKind,
    pub seed: u64,
    /// Overrides the preset's SNR when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub rows: Vec<ExperimentRow>,
    #[serde(default)]
    pub equalizer: EqualizerConfig,
    #[serde(default)]
    pub scale: Scale,
}

impl ExperimentRow {
    pub fn packet_config(&self, scale: Scale) -> PacketConfig {
        let mut cfg = PacketConfig::new(self.fc_hz, self.fb_hz, self.format);
        cfg.preamble = self.preamble;
        cfg.seed = self.seed;
        (cfg.n_train, cfg.n_payload) = scale.symbols();
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    ConfigError,
    SyncFailure,
    Diverged,
    Failed,
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowResult {
    pub label: String,
    pub channel: String,
    pub format: ConstellationKind,
    pub fc_hz: f64,
    pub fb_hz: f64,
    pub data_rate_bps: f64,
    /// Rendered BER, or `"*"` when the packet could not be decoded.
    pub ber: String,
    pub bit_errors: Option<usize>,
    pub bits_compared: Option<usize>,
    pub seed: u64,
    pub snr_db: Option<f64>,
    pub mse_training_early_db: Option<f64>,
    pub mse_training_late_db: Option<f64>,
    pub mse_final_db: Option<f64>,
    pub classification_agreement: Option<f64>,
    pub status: RowStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn classify(e: &PipelineError) -> RowStatus {
    match e {
        PipelineError::Sync(_) => RowStatus::SyncFailure,
        PipelineError::Receiver(ReceiverError::Diverged { .. }) => RowStatus::Diverged,
        PipelineError::Receiver(ReceiverError::Config(_)) | PipelineError::Signal(_) | PipelineError::Channel(_) => {
            RowStatus::ConfigError
        }
        _ => RowStatus::Failed,
    }
}

/// Runs one row; with `out_dir`, its report files go to `out_dir/row_<label>/`.
pub fn run_row(row: &ExperimentRow, spec: &ExperimentSpec, out_dir: Option<&Path>) -> RowResult {
    let cfg = row.packet_config(spec.scale);
    let mut res = RowResult {
        label: row.label.clone(),
        channel: row.channel.clone(),
        format: row.format,
        fc_hz: row.fc_hz,
        fb_hz: row.fb_hz,
        data_rate_bps: cfg.data_rate_bps(),
        ber: "*".into(),
        bit_errors: None,
        bits_compared: None,
        seed: row.seed,
        snr_db: None,
        mse_training_early_db: None,
        mse_training_late_db: None,
        mse_final_db: None,
        classification_agreement: None,
        status: RowStatus::Ok,
        error: None,
    };
    let outcome = resolve_preset(&row.channel).map_err(PipelineError::from).and_then(|mut ch| {
        if row.snr_db.is_some() {
            ch.snr_db = row.snr_db;
        }
        ch.seed = row.seed;
        res.snr_db = ch.snr_db;
        let (rep, rx) = simulate(&cfg, &ch, &spec.equalizer)?;
        if let Some(dir) = out_dir {
            rep.write_dir(&dir.join(format!("row_{}", row.label)), &rx.eq.records)?;
        }
        Ok(rep)
    });
    match outcome {
        Ok(rep) => {
            res.ber = rep.ber.clone();
            res.bit_errors = Some(rep.bit_errors);
            res.bits_compared = Some(rep.bits_compared);
            res.mse_training_early_db = Some(rep.mse_training_early_db);
            res.mse_training_late_db = Some(rep.mse_training_late_db);
            res.mse_final_db = Some(rep.mse_final_db);
            res.classification_agreement = Some(rep.classification_agreement);
        }
        Err(e) => {
            log::warn!("row {}: {e}", row.label);
            res.status = classify(&e);
            res.error = Some(e.to_string());
        }
    }
    res
}

/// Runs every row (concurrently) and returns the results in row order.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: Option<&Path>) -> Vec<RowResult> {
    spec.rows.par_iter().map(|row| run_row(row, spec, out_dir)).collect()
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or(String::new(), |x| x.to_string())
}

fn opt_f(v: Option<f64>, digits: usize) -> String {
    v.map_or(String::new(), |x| format!("{x:.digits$}"))
}

pub fn results_csv(rows: &[RowResult]) -> String {
    let mut s = String::from(
        "label,channel,format,fc_hz,fb_hz,data_rate_bps,ber,bit_errors,bits_compared,seed,snr_db,mse_final_db,status\n",
    );
    for r in rows {
        let status = serde_json::to_value(r.status).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.label,
            r.channel,
            r.format,
            r.fc_hz,
            r.fb_hz,
            r.data_rate_bps,
            r.ber,
            opt(&r.bit_errors),
            opt(&r.bits_compared),
            r.seed,
            opt(&r.snr_db),
            opt_f(r.mse_final_db, 2),
            status
        );
    }
    s
}

/// Writes `results.csv` and `results.json` into `out_dir`.
pub fn write_results(rows: &[RowResult], out_dir: &Path) -> Result<(), MetricsError> {
    std::fs::create_dir_all(out_dir)?;
    write_atomic(&out_dir.join("results.csv"), results_csv(rows).as_bytes())?;
    write_atomic(&out_dir.join("results.json"), (serde_json::to_string_pretty(rows)? + "\n").as_bytes())?;
    Ok(())
}

/// Ten tissue configurations spanning 5 to 30 Mb/s.
pub const TISSUE_MATRIX: &str = include_str!("../experiments/tissue_matrix.json");
/// A 64QAM beef-liver row at a deliberately low SNR.
pub const TISSUE_LOW_SNR: &str = include_str!("../experiments/tissue_low_snr.json");
