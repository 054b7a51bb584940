//! Packet preambles and their detection.
//!
//! Three preambles are supported: the 13-chip Barker sequence shaped and
//! modulated like data, a short quadratic-law chirp, and a superimposed
//! up/down hyperbolic chirp pair. Detection correlates band-limited
//! analytic signals so the carrier phase cannot null the peak. The
//! hyperbolic pair additionally yields a time-dilation estimate: a dilated
//! hyperbolic chirp is a delayed copy of itself, and the up and down
//! sweeps move in opposite directions.

use std::f64::consts::PI;
use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::{analytic_band, parabolic_offset, xcorr_valid};
use crate::signal_model::{
    design_rc_filter, shape_with, upconvert, PacketConfig, PreambleKind, SignalError, Waveform, DEFAULT_SPAN_SYMBOLS,
};

/// Barker-13 chips in transmission order.
pub const BARKER13: [f64; 13] = [1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0, 1.0];

pub const QUADRATIC_CHIRP_DURATION_S: f64 = 10e-6;
pub const HYPERBOLIC_PAIR_DURATION_S: f64 = 100e-6;
pub const DEFAULT_THRESHOLD: f64 = 0.4;
/// Accepted time-dilation range; estimates outside it are flagged.
pub const DOPPLER_RANGE: (f64, f64) = (0.99, 1.01);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SyncError {
    #[error("preamble not found (peak correlation {peak_metric:.3} below threshold {threshold})")]
    NotFound { peak_metric: f64, threshold: f64 },
    #[error("invalid chirp band ({f_lo} Hz, {f_hi} Hz)")]
    InvalidBand { f_lo: f64, f_hi: f64 },
    #[error("search window {start}..{end} does not fit a {template}-sample template in {len} samples")]
    Window { start: usize, end: usize, template: usize, len: usize },
    #[error("template rate {template} Hz differs from received rate {rx} Hz")]
    RateMismatch { template: f64, rx: f64 },
    #[error(transparent)]
    Signal(#[from] SignalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreambleSpec {
    pub kind: PreambleKind,
    pub duration_s: f64,
    /// Occupied band (f_lo, f_hi) in Hz.
    pub band: (f64, f64),
    pub fc: f64,
    pub fb: f64,
    pub rolloff: f64,
}

impl PreambleSpec {
    pub fn for_config(cfg: &PacketConfig) -> Self {
        let (fc, fb) = (cfg.fc, cfg.fb);
        let (duration_s, band) = match cfg.preamble {
            PreambleKind::Barker13 => {
                let half = cfg.bandwidth() / 2.0;
                (13.0 / fb, (fc - half, fc + half))
            }
            PreambleKind::QuadraticChirp => (QUADRATIC_CHIRP_DURATION_S, (fc - fb / 2.0, fc + fb / 2.0)),
            PreambleKind::HyperbolicUpDown => {
                (HYPERBOLIC_PAIR_DURATION_S, ((fc - fb / 2.0).max(0.1 * fc), fc + fb / 2.0))
            }
        };
        Self { kind: cfg.preamble, duration_s, band, fc, fb, rolloff: cfg.rolloff }
    }
}

/// A preamble waveform together with the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Preamble {
    pub spec: PreambleSpec,
    pub wave: Waveform,
}

impl Preamble {
    pub fn generate(spec: PreambleSpec, fs: f64) -> Result<Self, SyncError> {
        let wave = match spec.kind {
            PreambleKind::Barker13 => barker_waveform(spec.fc, spec.fb, fs, spec.rolloff)?,
            PreambleKind::QuadraticChirp => gen_quadratic_chirp(&spec, fs)?,
            PreambleKind::HyperbolicUpDown => gen_hyperbolic_pair(&spec, fs)?,
        };
        Ok(Self { spec, wave })
    }

    pub fn for_config(cfg: &PacketConfig) -> Result<Self, SyncError> {
        Self::generate(PreambleSpec::for_config(cfg), cfg.fs())
    }
}

/// Barker-13 at chip rate `fb` on carrier `fc`, raised-cosine shaped with
/// roll-off 0.8.
pub fn gen_barker(fc: f64, fb: f64, fs: f64) -> Result<Waveform, SyncError> {
    barker_waveform(fc, fb, fs, 0.8)
}

pub fn barker_waveform(fc: f64, fb: f64, fs: f64, rolloff: f64) -> Result<Waveform, SyncError> {
    let taps = design_rc_filter(fb, rolloff, fs, DEFAULT_SPAN_SYMBOLS)?;
    let sps = (fs / fb).round() as usize;
    let chips: Vec<Complex64> = BARKER13.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    let bb = Waveform::complex(fs, shape_with(&chips, &taps, sps));
    Ok(upconvert(&bb, fc, fb * (1.0 + rolloff))?)
}

fn chirp_len(duration_s: f64, fs: f64) -> usize {
    (duration_s * fs).round() as usize
}

/// Real chirp whose frequency rises as `f_lo + (f_hi - f_lo) (t/T)^2`,
/// zero initial phase, unit peak amplitude.
pub fn gen_quadratic_chirp(spec: &PreambleSpec, fs: f64) -> Result<Waveform, SyncError> {
    let (f_lo, f_hi) = spec.band;
    if !(spec.duration_s > 0.0) || !(f_lo < f_hi) {
        return Err(SyncError::InvalidBand { f_lo, f_hi });
    }
    let t_len = spec.duration_s;
    let n = chirp_len(t_len, fs);
    let span = f_hi - f_lo;
    Ok(Waveform::real(
        fs,
        (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                let phase = 2.0 * PI * (f_lo * t + span * t.powi(3) / (3.0 * t_len * t_len));
                phase.cos()
            })
            .collect(),
    ))
}

/// Sweep constant `k` of the hyperbolic law `f(t) = 1 / (1/f_lo - k t)`.
fn hyperbolic_rate(spec: &PreambleSpec) -> f64 {
    let (f_lo, f_hi) = spec.band;
    (f_hi - f_lo) / (f_lo * f_hi * spec.duration_s)
}

/// Up-sweeping hyperbolic chirp `f(t) = f_lo f_hi T / (f_hi T - (f_hi - f_lo) t)`.
pub fn hyperbolic_up(spec: &PreambleSpec, fs: f64) -> Result<Vec<f64>, SyncError> {
    let (f_lo, f_hi) = spec.band;
    if !(f_lo > 0.0) || !(f_lo < f_hi) || !(spec.duration_s > 0.0) {
        return Err(SyncError::InvalidBand { f_lo, f_hi });
    }
    let k = hyperbolic_rate(spec);
    let n = chirp_len(spec.duration_s, fs);
    Ok((0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let phase = -2.0 * PI / k * (1.0 - k * f_lo * t).ln();
            phase.cos()
        })
        .collect())
}

/// Time-reversed up sweep.
pub fn hyperbolic_down(spec: &PreambleSpec, fs: f64) -> Result<Vec<f64>, SyncError> {
    let mut v = hyperbolic_up(spec, fs)?;
    v.reverse();
    Ok(v)
}

/// Superimposed up and down hyperbolic sweeps, amplitude 1/2 each.
pub fn gen_hyperbolic_pair(spec: &PreambleSpec, fs: f64) -> Result<Waveform, SyncError> {
    let up = hyperbolic_up(spec, fs)?;
    let down = hyperbolic_down(spec, fs)?;
    Ok(Waveform::real(fs, up.iter().zip(&down).map(|(u, d)| 0.5 * (u + d)).collect()))
}

/// Differential-delay constant of the hyperbolic pair: a dilation by `a`
/// shifts the up sweep relative to the down sweep by `(a - 1) * T_eff`,
/// with `T_eff = (1/f_lo + 1/f_hi) / k = T (f_lo + f_hi) / (f_hi - f_lo)`.
pub fn doppler_time_constant(spec: &PreambleSpec) -> f64 {
    let (f_lo, f_hi) = spec.band;
    spec.duration_s * (f_lo + f_hi) / (f_hi - f_lo)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncResult {
    /// Sample index of the first data symbol instant in the received signal.
    pub start_sample: usize,
    /// Sample index where the preamble begins.
    pub preamble_sample: usize,
    pub doppler_factor: f64,
    pub doppler_in_range: bool,
    pub peak_metric: f64,
}

fn analytic_taper(band: (f64, f64)) -> f64 {
    0.1 * (band.1 - band.0)
}

/// Normalized correlation `|<rx[l..l+L], t>| / sqrt(E_t E_rx(l))` for every
/// valid lag `l`, on band-limited analytic signals.
pub fn normalized_correlation(rx: &[f64], template: &[f64], fs: f64, band: (f64, f64)) -> Vec<f64> {
    let taper = analytic_taper(band);
    let a_rx = analytic_band(rx, fs, band, taper);
    let a_t = analytic_band(template, fs, band, taper);
    normalized_correlation_analytic(&a_rx, &a_t)
}

fn normalized_correlation_analytic(a_rx: &[Complex64], a_t: &[Complex64]) -> Vec<f64> {
    let l = a_t.len();
    let e_t: f64 = a_t.iter().map(|v| v.norm_sqr()).sum();
    let c = xcorr_valid(a_rx, a_t);
    let mut prefix = Vec::with_capacity(a_rx.len() + 1);
    prefix.push(0.0f64);
    let mut acc = 0.0;
    for v in a_rx {
        acc += v.norm_sqr();
        prefix.push(acc);
    }
    c.iter()
        .enumerate()
        .map(|(lag, cv)| {
            let e_r = (prefix[lag + l] - prefix[lag]).max(0.0);
            let den = (e_t * e_r).sqrt();
            if den <= e_t * 1e-24 {
                0.0
            } else {
                (cv.norm() / den).min(1.0)
            }
        })
        .collect()
}

fn clip_window(window: &Range<usize>, rx_len: usize, t_len: usize) -> Result<Range<usize>, SyncError> {
    let last = rx_len.checked_sub(t_len).map(|v| v + 1).unwrap_or(0);
    let end = window.end.min(last);
    if t_len == 0 || window.start >= end {
        return Err(SyncError::Window { start: window.start, end: window.end, template: t_len, len: rx_len });
    }
    Ok(window.start..end)
}

/// Matched-filter preamble search.
///
/// `window` bounds the candidate preamble start lags; `data_offset` is the
/// number of samples from the preamble start to the first symbol instant.
pub fn detect_preamble(
    rx: &Waveform,
    preamble: &Preamble,
    window: Range<usize>,
    data_offset: usize,
    threshold: f64,
) -> Result<SyncResult, SyncError> {
    if (preamble.wave.fs - rx.fs).abs() > 1e-9 * rx.fs {
        return Err(SyncError::RateMismatch { template: preamble.wave.fs, rx: rx.fs });
    }
    let x = rx.as_real()?;
    let t = preamble.wave.as_real()?;
    let win = clip_window(&window, x.len(), t.len())?;
    // Only the window plus one template length is needed.
    let seg = &x[win.start..(win.end + t.len() - 1).min(x.len())];
    let metric = normalized_correlation(seg, t, rx.fs, preamble.spec.band);
    let (best, peak) = metric
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &m)| if m > acc.1 { (i, m) } else { acc });
    if !(peak >= threshold) {
        return Err(SyncError::NotFound { peak_metric: peak.max(0.0), threshold });
    }
    let preamble_sample = win.start + best;
    Ok(SyncResult {
        start_sample: preamble_sample + data_offset,
        preamble_sample,
        doppler_factor: 1.0,
        doppler_in_range: true,
        peak_metric: peak,
    })
}

/// Sub-sample position and metric of the strongest correlation peak.
fn refined_peak(metric: &[f64]) -> (f64, f64) {
    let (i, peak) = metric
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &m)| if m > acc.1 { (i, m) } else { acc });
    if i == 0 || i + 1 >= metric.len() {
        return (i as f64, peak);
    }
    (i as f64 + parabolic_offset(metric[i - 1], metric[i], metric[i + 1]), peak)
}

/// Up- and down-sweep arrival lags (fractional samples) within `window`.
pub fn hyperbolic_lags(
    rx: &[f64],
    spec: &PreambleSpec,
    fs: f64,
    window: Range<usize>,
    threshold: f64,
) -> Result<(f64, f64), SyncError> {
    let up = hyperbolic_up(spec, fs)?;
    let down = hyperbolic_down(spec, fs)?;
    let win = clip_window(&window, rx.len(), up.len())?;
    // A dilated pair can place one sweep slightly before the window start
    // (or before the first recorded sample), so the search reaches back by
    // `reach` lags, padding with zeros where the recording has none.
    let reach = up.len() / 8;
    let first = win.start as i64 - reach as i64;
    let from = first.max(0) as usize;
    let mut seg = vec![0.0; (from as i64 - first) as usize];
    seg.extend_from_slice(&rx[from..(win.end + up.len() - 1).min(rx.len())]);
    let taper = analytic_taper(spec.band);
    let a_rx = analytic_band(&seg, fs, spec.band, taper);
    let mut lags = [0.0; 2];
    for (slot, tmpl) in lags.iter_mut().zip([&up, &down]) {
        let a_t = analytic_band(tmpl, fs, spec.band, taper);
        let metric = normalized_correlation_analytic(&a_rx, &a_t);
        let (pos, peak) = refined_peak(&metric);
        if !(peak >= threshold) {
            return Err(SyncError::NotFound { peak_metric: peak.max(0.0), threshold });
        }
        *slot = first as f64 + pos;
    }
    Ok((lags[0], lags[1]))
}

/// Time-dilation factor from the up/down hyperbolic pair:
/// `1 + (tau_up - tau_down) / T_eff` (see [`doppler_time_constant`]).
pub fn estimate_doppler(rx: &Waveform, spec: &PreambleSpec) -> Result<f64, SyncError> {
    let x = rx.as_real()?;
    let (up, down) = hyperbolic_lags(x, spec, rx.fs, 0..x.len(), DEFAULT_THRESHOLD)?;
    Ok(1.0 + (up - down) / rx.fs / doppler_time_constant(spec))
}

/// Full acquisition for a packet built from `cfg`: matched-filter search,
/// time-dilation estimate for the hyperbolic preamble, and a guard-energy
/// check that rejects correlation peaks not followed by the quiet guard.
pub fn acquire(rx: &Waveform, cfg: &PacketConfig, preamble: &Preamble, threshold: f64) -> Result<SyncResult, SyncError> {
    let sps = cfg.sps()?;
    let guard = cfg.guard_samples();
    let t_len = preamble.wave.len();
    let data_offset = t_len + guard + DEFAULT_SPAN_SYMBOLS * sps / 2;
    let window = if guard > 0 { 0..t_len + guard } else { 0..rx.len() };
    let mut res = detect_preamble(rx, preamble, window, data_offset, threshold)?;
    let x = rx.as_real()?;

    if guard > 0 {
        let contrast = guard_contrast(x, rx.fs, preamble, res.preamble_sample, guard);
        if contrast < MIN_GUARD_CONTRAST {
            log::debug!("rejecting correlation peak: guard contrast {contrast:.2}");
            return Err(SyncError::NotFound { peak_metric: res.peak_metric, threshold });
        }
    }

    if preamble.spec.kind == PreambleKind::HyperbolicUpDown {
        let margin = t_len / 4;
        let lo = res.preamble_sample.saturating_sub(margin);
        let (up, down) = hyperbolic_lags(x, &preamble.spec, rx.fs, lo..res.preamble_sample + margin, threshold)?;
        let t_eff = doppler_time_constant(&preamble.spec);
        let a = 1.0 + (up - down) / rx.fs / t_eff;
        let start = 0.5 * (up + down) - 0.5 * (a - 1.0) * preamble.spec.duration_s * rx.fs;
        res.doppler_factor = a;
        res.doppler_in_range = a > DOPPLER_RANGE.0 && a < DOPPLER_RANGE.1;
        res.preamble_sample = start.round().max(0.0) as usize;
        res.start_sample = (start + a * data_offset as f64).round().max(0.0) as usize;
    }
    Ok(res)
}

/// Minimum ratio of in-band power over the preamble to in-band power over
/// the following guard.
pub const MIN_GUARD_CONTRAST: f64 = 3.0;

fn guard_contrast(x: &[f64], fs: f64, preamble: &Preamble, start: usize, guard: usize) -> f64 {
    let t_len = preamble.wave.len();
    // Skip filter and multipath tails that spill into the first part of the guard.
    let skip = (guard / 4).min(4096);
    let g0 = start + t_len + skip;
    let g1 = (start + t_len + guard).min(x.len());
    let p1 = (start + t_len).min(x.len());
    if g1 <= g0 || p1 <= start {
        return f64::INFINITY;
    }
    let seg = &x[start..g1];
    let a = analytic_band(seg, fs, preamble.spec.band, analytic_taper(preamble.spec.band));
    let mean = |r: Range<usize>| {
        let n = r.len().max(1) as f64;
        a[r].iter().map(|v| v.norm_sqr()).sum::<f64>() / n
    };
    let p_pre = mean(0..p1 - start);
    let p_guard = mean(g0 - start..g1 - start);
    if p_guard == 0.0 {
        f64::INFINITY
    } else {
        p_pre / p_guard
    }
}
