//! Quadrature front end and the RLS-adapted decision-feedback equalizer
//! with its embedded phase tracker.

mod dfe;
mod front_end;
mod pll;
mod rls;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal_model::SignalError;

pub use dfe::{equalize_packet, wrap_phase, EqualizerOutput, EqualizerState, Mode, SymbolDecisionRecord};
pub use front_end::front_end;
pub use pll::{pll_step, Pll, PLL_DEN, PLL_NUM};
pub use rls::{rls_step, RlsState};

/// Largest tap count accepted for either filter section.
pub const MAX_TAPS: usize = 40;

#[derive(Debug, Error)]
pub enum ReceiverError {
    #[error("receiver configuration: {0}")]
    Config(String),
    #[error("start sample {start} outside received waveform of {len} samples")]
    Misaligned { start: usize, len: usize },
    #[error("RLS denominator {denom} is not positive; inverse correlation lost definiteness")]
    Numerical { denom: f64 },
    #[error("equalizer diverged at symbol {k}: mean |e| = {mean_error:.3}")]
    Diverged { k: usize, mean_error: f64 },
    #[error("baseband input too short: need {needed} samples, got {got}")]
    InputTooShort { needed: usize, got: usize },
    #[error(transparent)]
    Signal(#[from] SignalError),
}

fn default_n_ff() -> usize {
    24
}
fn default_n_fb() -> usize {
    12
}
fn default_lambda() -> f64 {
    0.995
}
fn default_delta() -> f64 {
    0.01
}
fn default_num() -> [f64; 3] {
    PLL_NUM
}
fn default_den() -> [f64; 3] {
    PLL_DEN
}
fn default_sps() -> usize {
    2
}
fn default_window() -> usize {
    500
}
fn default_factor() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqualizerConfig {
    #[serde(default = "default_n_ff")]
    pub n_ff: usize,
    #[serde(default = "default_n_fb")]
    pub n_fb: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_num")]
    pub pll_num: [f64; 3],
    #[serde(default = "default_den")]
    pub pll_den: [f64; 3],
    #[serde(default = "default_sps")]
    pub sps: usize,
    /// Symbols averaged by the divergence monitor (0 disables it).
    #[serde(default = "default_window")]
    pub divergence_window: usize,
    /// Divergence is declared when the windowed mean |e| exceeds this
    /// multiple of the constellation RMS.
    #[serde(default = "default_factor")]
    pub divergence_factor: f64,
}

impl Default for EqualizerConfig {
    fn default() -> Self {
        Self {
            n_ff: default_n_ff(),
            n_fb: default_n_fb(),
            lambda: default_lambda(),
            delta: default_delta(),
            pll_num: PLL_NUM,
            pll_den: PLL_DEN,
            sps: default_sps(),
            divergence_window: default_window(),
            divergence_factor: default_factor(),
        }
    }
}

impl EqualizerConfig {
    /// Full-length sections: 40 feedforward and 40 feedback taps.
    pub fn full() -> Self {
        Self { n_ff: MAX_TAPS, n_fb: MAX_TAPS, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ReceiverError> {
        let bad = |m: String| Err(ReceiverError::Config(m));
        if self.n_ff == 0 || self.n_ff > MAX_TAPS {
            return bad(format!("n_ff = {} must be in 1..={MAX_TAPS}", self.n_ff));
        }
        if self.n_fb > MAX_TAPS {
            return bad(format!("n_fb = {} must be at most {MAX_TAPS}", self.n_fb));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad(format!("lambda = {} must lie in (0, 1]", self.lambda));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad(format!("delta = {} must be positive", self.delta));
        }
        if self.sps != 2 {
            return bad(format!("sps = {} but the equalizer runs at 2 samples/symbol", self.sps));
        }
        if self.pll_den[0] == 0.0 || self.pll_num.iter().chain(&self.pll_den).any(|c| !c.is_finite()) {
            return bad("pll_den[0] must be nonzero and all loop coefficients finite".into());
        }
        if !(self.divergence_factor > 0.0) {
            return bad(format!("divergence_factor = {} must be positive", self.divergence_factor));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        let c = EqualizerConfig::default();
        c.validate().unwrap();
        assert_eq!(c.pll_den, [1.0, -2.0, 1.0]);
        let back: EqualizerConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let partial: EqualizerConfig = serde_json::from_str(r#"{"n_ff": 40}"#).unwrap();
        assert_eq!(partial.n_fb, 12);
        EqualizerConfig::full().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        for c in [
            EqualizerConfig { n_ff: 0, ..Default::default() },
            EqualizerConfig { n_fb: 41, ..Default::default() },
            EqualizerConfig { lambda: 1.01, ..Default::default() },
            EqualizerConfig { lambda: 0.0, ..Default::default() },
            EqualizerConfig { sps: 4, ..Default::default() },
        ] {
            assert!(matches!(c.validate(), Err(ReceiverError::Config(_))));
        }
    }
}
