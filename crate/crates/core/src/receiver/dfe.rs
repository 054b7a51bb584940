use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::pll::Pll;
use super::rls::{rls_step, RlsState};
use super::{EqualizerConfig, ReceiverError};
use crate::signal_model::{Constellation, SymbolFrame, Waveform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Training,
    DecisionDirected,
}

/// Per-symbol trace of the equalizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolDecisionRecord {
    pub k: usize,
    /// Equalizer output after phase correction.
    pub y: Complex64,
    /// Training symbol or slicer decision.
    pub d: Complex64,
    pub e: Complex64,
    /// Phase estimate applied at this symbol.
    pub theta: f64,
    /// Phase detector output `arg(y conj(d))`.
    pub phase_error: f64,
    pub mode: Mode,
}

/// Adaptive state of the decision-feedback equalizer.
#[derive(Debug, Clone)]
pub struct EqualizerState {
    pub rls: RlsState,
    pub pll: Pll,
    pub theta: f64,
    pub mode: Mode,
    pub k: usize,
    n_ff: usize,
    n_fb: usize,
    past: Vec<Complex64>,
}

impl EqualizerState {
    /// Unit center feedforward tap, zero feedback taps, `P = I / delta`.
    pub fn new(cfg: &EqualizerConfig) -> Self {
        let mut w = vec![Complex64::new(0.0, 0.0); cfg.n_ff + cfg.n_fb];
        w[cfg.n_ff / 2] = Complex64::new(1.0, 0.0);
        Self {
            rls: RlsState::new(w, cfg.delta, cfg.lambda),
            pll: Pll::new(cfg.pll_num, cfg.pll_den),
            theta: 0.0,
            mode: Mode::Training,
            k: 0,
            n_ff: cfg.n_ff,
            n_fb: cfg.n_fb,
            past: vec![Complex64::new(0.0, 0.0); cfg.n_fb],
        }
    }

    pub fn feedforward(&self) -> &[Complex64] {
        &self.rls.w[..self.n_ff]
    }

    pub fn feedback(&self) -> &[Complex64] {
        &self.rls.w[self.n_ff..]
    }

    /// Regressor for symbol `k`: the `n_ff` newest fractional samples
    /// around sample `2k`, rotated by `-theta`, then the `n_fb` most recent
    /// decisions.
    fn regressor(&self, x: &[Complex64], k: usize, out: &mut [Complex64]) {
        let newest = (2 * k + self.n_ff / 2) as i64;
        let rot = Complex64::from_polar(1.0, -wrap_phase(self.theta));
        for (i, slot) in out[..self.n_ff].iter_mut().enumerate() {
            let idx = newest - i as i64;
            *slot = if idx >= 0 && (idx as usize) < x.len() { x[idx as usize] * rot } else { Complex64::new(0.0, 0.0) };
        }
        out[self.n_ff..].copy_from_slice(&self.past);
    }

    /// Processes one symbol; `known` is the training symbol, if any.
    pub fn step(
        &mut self,
        x: &[Complex64],
        known: Option<Complex64>,
        constellation: &Constellation,
        u: &mut [Complex64],
    ) -> Result<SymbolDecisionRecord, ReceiverError> {
        self.regressor(x, self.k, u);
        let y = self.rls.output(u);
        let (d, mode) = match known {
            Some(t) => (t, Mode::Training),
            None => (constellation.slice(y), Mode::DecisionDirected),
        };
        self.mode = mode;
        let e = d - y;
        rls_step(&mut self.rls, u, e)?;
        let phase_error = if y.norm_sqr() > 0.0 { (y * d.conj()).arg() } else { 0.0 };
        let record = SymbolDecisionRecord { k: self.k, y, d, e, theta: self.theta, phase_error, mode };
        self.theta = self.pll.step(phase_error);
        if self.n_fb > 0 {
            self.past.rotate_right(1);
            self.past[0] = d;
        }
        self.k += 1;
        Ok(record)
    }
}

/// Wraps to `(-pi, pi]`.
pub fn wrap_phase(p: f64) -> f64 {
    let mut w = p.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[derive(Debug, Clone)]
pub struct EqualizerOutput {
    /// Decisions for the payload symbols.
    pub decisions: Vec<Complex64>,
    /// One record per processed symbol, training included.
    pub records: Vec<SymbolDecisionRecord>,
    pub state: EqualizerState,
}

/// Runs the fractionally spaced DFE over one packet: training symbols from
/// `frame.train` first, then decision-directed over the payload.
pub fn equalize_packet(
    bb2: &Waveform,
    frame: &SymbolFrame,
    constellation: &Constellation,
    cfg: &EqualizerConfig,
) -> Result<EqualizerOutput, ReceiverError> {
    cfg.validate()?;
    let x = bb2.as_complex()?;
    let n_total = frame.len();
    if n_total > 0 && x.len() < 2 * n_total - 1 {
        return Err(ReceiverError::InputTooShort { needed: 2 * n_total - 1, got: x.len() });
    }
    let mut state = EqualizerState::new(cfg);
    let mut u = vec![Complex64::new(0.0, 0.0); cfg.n_ff + cfg.n_fb];
    let mut records = Vec::with_capacity(n_total);
    let mut decisions = Vec::with_capacity(frame.payload.len());
    let limit = cfg.divergence_factor * constellation.rms();
    let window = cfg.divergence_window;
    let mut err_sum = 0.0;

    for k in 0..n_total {
        let known = frame.train.get(k).copied();
        let rec = state.step(x, known, constellation, &mut u)?;
        if known.is_none() {
            decisions.push(rec.d);
        }
        err_sum += rec.e.norm();
        records.push(rec);
        if window > 0 {
            if k >= window {
                err_sum -= records[k - window].e.norm();
            }
            if k + 1 >= window {
                let mean = err_sum / window as f64;
                if !(mean <= limit) {
                    return Err(ReceiverError::Diverged { k, mean_error: mean });
                }
            }
        }
    }
    Ok(EqualizerOutput { decisions, records, state })
}
