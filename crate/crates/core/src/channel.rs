//! Parametric propagation model standing in for the water and tissue paths.
//!
//! The chain is applied in a fixed order: transducer bandpass, power-law
//! attenuation, multipath arrivals, time dilation, then receiver noise.
//! Every stage is linear and the noise is seeded, so a model plus a seed
//! fully determines the output.

use std::path::Path;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp::{analytic, band_power, ifft, interp_at, occupied_band, resample, RESAMPLE_BETA, RESAMPLE_HALF_WIDTH};
use crate::rng::noise_rng;
use crate::signal_model::{SignalError, Waveform};

/// Length of the transducer and attenuation FIRs.
pub const CHANNEL_FIR_TAPS: usize = 255;
/// Fraction of received signal power that defines the in-band region for SNR.
pub const OCCUPIED_FRACTION: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChannelError {
    #[error("invalid channel model: {0}")]
    InvalidModel(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("cannot read preset file {path}: {msg}")]
    PresetFile { path: String, msg: String },
    #[error(transparent)]
    Signal(#[from] SignalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tap {
    pub delay_s: f64,
    /// Complex amplitude as `[re, im]`, applied to the analytic signal.
    pub gain: Complex64,
}

/// Gaussian-magnitude bandpass described by its center and -10 dB width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transducer {
    pub center_hz: f64,
    pub bw10_hz: f64,
}

impl Transducer {
    pub fn magnitude(&self, f: f64) -> f64 {
        // |H| = exp(-(f - fc)^2 / (2 s^2)) reaches -10 dB at fc +- bw/2.
        let s2 = (self.bw10_hz / 2.0).powi(2) / std::f64::consts::LN_10;
        (-(f.abs() - self.center_hz).powi(2) / (2.0 * s2)).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelModel {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub taps: Vec<Tap>,
    #[serde(default)]
    pub atten_db_per_cm_mhz: f64,
    #[serde(default = "one")]
    pub atten_exponent: f64,
    #[serde(default)]
    pub path_cm: f64,
    #[serde(default = "one")]
    pub doppler_factor: f64,
    /// Receiver SNR in the occupied band; `null` disables noise.
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub transducer: Option<Transducer>,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl ChannelModel {
    /// Single unit tap, no filtering, no dilation, no noise.
    pub fn ideal() -> Self {
        Self {
            name: "ideal".into(),
            description: None,
            taps: vec![Tap { delay_s: 0.0, gain: Complex64::new(1.0, 0.0) }],
            atten_db_per_cm_mhz: 0.0,
            atten_exponent: 1.0,
            path_cm: 0.0,
            doppler_factor: 1.0,
            snr_db: None,
            transducer: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |m: String| Err(ChannelError::InvalidModel(m));
        if self.taps.is_empty() {
            return bad("at least one multipath tap is required".into());
        }
        if let Some(t) = self.taps.iter().find(|t| !(t.delay_s >= 0.0) || !t.delay_s.is_finite()) {
            return bad(format!("tap delay {} s must be finite and >= 0", t.delay_s));
        }
        if self.taps.iter().any(|t| !t.gain.re.is_finite() || !t.gain.im.is_finite()) {
            return bad("tap gains must be finite".into());
        }
        if !(self.doppler_factor > 0.95 && self.doppler_factor < 1.05) {
            return bad(format!("doppler_factor {} outside (0.95, 1.05)", self.doppler_factor));
        }
        if let Some(s) = self.snr_db {
            if !s.is_finite() {
                return bad("snr_db must be finite (use null for a noiseless channel)".into());
            }
        }
        if !(self.atten_db_per_cm_mhz >= 0.0) || !(self.path_cm >= 0.0) || !self.atten_exponent.is_finite() {
            return bad("attenuation coefficient and path length must be >= 0".into());
        }
        if let Some(t) = &self.transducer {
            if !(t.bw10_hz > 0.0) || !(t.center_hz > 0.0) {
                return bad(format!("transducer center {} Hz / bandwidth {} Hz must be > 0", t.center_hz, t.bw10_hz));
            }
        }
        Ok(())
    }

    fn attenuation_active(&self) -> bool {
        self.atten_db_per_cm_mhz > 0.0 && self.path_cm > 0.0
    }

    /// Amplitude response of the attenuation law at `f` Hz.
    pub fn attenuation(&self, f: f64) -> f64 {
        let db = self.atten_db_per_cm_mhz * self.path_cm * (f.abs() / 1e6).powf(self.atten_exponent);
        10f64.powf(-db / 20.0)
    }
}

/// Linear-phase FIR approximating a real magnitude response.
///
/// The zero-phase response is sampled on a dense grid, inverted and
/// truncated to `ntaps` around the center, which is the least-squares fit
/// over that grid.
pub fn linear_phase_fir(mag: impl Fn(f64) -> f64, ntaps: usize, fs: f64) -> Vec<f64> {
    assert!(ntaps % 2 == 1, "linear-phase FIR length must be odd");
    let grid = (16 * ntaps).next_power_of_two();
    let mut buf: Vec<Complex64> = (0..grid)
        .map(|k| Complex64::new(mag(crate::dsp::bin_freq(k, grid, fs)), 0.0))
        .collect();
    ifft(&mut buf);
    let mid = (ntaps / 2) as i64;
    (0..ntaps as i64)
        .map(|i| buf[(i - mid).rem_euclid(grid as i64) as usize].re)
        .collect()
}

/// Result of [`apply_channel_detailed`]: the noiseless and noisy outputs
/// and the band used for the SNR.
#[derive(Debug, Clone)]
pub struct ChannelOutput {
    pub clean: Vec<f64>,
    pub noisy: Vec<f64>,
    pub band: (f64, f64),
    pub fs: f64,
}

pub fn apply_channel(tx: &Waveform, ch: &ChannelModel) -> Result<Waveform, ChannelError> {
    let out = apply_channel_detailed(tx, ch)?;
    Ok(Waveform::real(out.fs, out.noisy))
}

pub fn apply_channel_detailed(tx: &Waveform, ch: &ChannelModel) -> Result<ChannelOutput, ChannelError> {
    ch.validate()?;
    let fs = tx.fs;
    let mut x = tx.as_real()?.to_vec();

    if let Some(t) = &ch.transducer {
        if t.center_hz + t.bw10_hz / 2.0 >= fs / 2.0 {
            return Err(ChannelError::InvalidModel(format!(
                "transducer band reaches {} Hz, beyond Nyquist {} Hz",
                t.center_hz + t.bw10_hz / 2.0,
                fs / 2.0
            )));
        }
        let h = linear_phase_fir(|f| t.magnitude(f), CHANNEL_FIR_TAPS, fs);
        x = crate::dsp::convolve(&x, &h);
    }
    if ch.attenuation_active() {
        let h = linear_phase_fir(|f| ch.attenuation(f), CHANNEL_FIR_TAPS, fs);
        x = crate::dsp::convolve(&x, &h);
    }
    x = apply_multipath(&x, &ch.taps, fs);
    if ch.doppler_factor != 1.0 {
        x = resample(&x, ch.doppler_factor);
    }

    let band = occupied_band(&x, fs, OCCUPIED_FRACTION);
    let noisy = match ch.snr_db {
        None => x.clone(),
        Some(snr) => add_awgn(&x, fs, snr, band, ch.seed),
    };
    Ok(ChannelOutput { clean: x, noisy, band, fs })
}

fn apply_multipath(x: &[f64], taps: &[Tap], fs: f64) -> Vec<f64> {
    if let [t] = taps {
        if t.delay_s == 0.0 && t.gain == Complex64::new(1.0, 0.0) {
            return x.to_vec();
        }
    }
    let hilbert: Option<Vec<f64>> =
        taps.iter().any(|t| t.gain.im != 0.0).then(|| analytic(x).iter().map(|a| a.im).collect());
    let max_delay = taps.iter().map(|t| t.delay_s * fs).fold(0.0, f64::max);
    let fractional = taps.iter().any(|t| !is_integer(t.delay_s * fs));
    let extra = max_delay.ceil() as usize + if fractional { RESAMPLE_HALF_WIDTH } else { 0 };
    let mut y = vec![0.0; x.len() + extra];
    for t in taps {
        let d = t.delay_s * fs;
        // Re{g a(t)} = Re(g) x(t) - Im(g) H{x}(t)
        let mut add = |src: &[f64], w: f64| {
            if w == 0.0 {
                return;
            }
            if is_integer(d) {
                let shift = d.round() as usize;
                for (i, &v) in src.iter().enumerate() {
                    y[i + shift] += w * v;
                }
            } else {
                for (n, out) in y.iter_mut().enumerate() {
                    *out += w * interp_at(src, n as f64 - d, RESAMPLE_HALF_WIDTH, RESAMPLE_BETA);
                }
            }
        };
        add(x, t.gain.re);
        if let Some(h) = &hilbert {
            add(h, -t.gain.im);
        }
    }
    y
}

fn is_integer(v: f64) -> bool {
    (v - v.round()).abs() < 1e-9
}

/// Mean power over the samples where the signal is present (guards excluded).
pub fn active_power(x: &[f64]) -> f64 {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return 0.0;
    }
    let floor = 1e-6 * peak;
    let (sum, n) = x
        .iter()
        .filter(|v| v.abs() > floor)
        .fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    sum / n as f64
}

/// Adds white Gaussian noise scaled so its power inside `band` is
/// `active_power(x) / 10^(snr_db/10)` for this realization.
pub fn add_awgn(x: &[f64], fs: f64, snr_db: f64, band: (f64, f64), seed: u64) -> Vec<f64> {
    let mut rng = noise_rng(seed);
    let w: Vec<f64> = (0..x.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let p_signal = active_power(x);
    let p_noise_band = band_power(&w, fs, band);
    if p_signal == 0.0 || p_noise_band == 0.0 {
        return x.to_vec();
    }
    let scale = (p_signal / 10f64.powf(snr_db / 10.0) / p_noise_band).sqrt();
    x.iter().zip(&w).map(|(s, n)| s + scale * n).collect()
}

/// In-band SNR by known-signal subtraction.
pub fn measure_snr_db(clean: &[f64], noisy: &[f64], fs: f64, band: (f64, f64)) -> f64 {
    let noise: Vec<f64> = noisy.iter().zip(clean).map(|(y, s)| y - s).collect();
    10.0 * (active_power(clean) / band_power(&noise, fs, band)).log10()
}

const PRESETS: [(&str, &str); 4] = [
    ("ideal", include_str!("../presets/ideal.json")),
    ("water_120m", include_str!("../presets/water_120m.json")),
    ("pork_loin", include_str!("../presets/pork_loin.json")),
    ("beef_liver", include_str!("../presets/beef_liver.json")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

/// Built-in preset by name.
pub fn preset(name: &str) -> Result<ChannelModel, ChannelError> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ChannelError::UnknownPreset(name.to_string()))?;
    let model: ChannelModel = serde_json::from_str(text).expect("shipped presets parse");
    Ok(model)
}

/// Preset file with the same schema as the shipped presets.
pub fn load_preset_file(path: &Path) -> Result<ChannelModel, ChannelError> {
    let err = |msg: String| ChannelError::PresetFile { path: path.display().to_string(), msg };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let model: ChannelModel = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
    model.validate()?;
    Ok(model)
}

/// A built-in preset name, or a path to a preset JSON file.
pub fn resolve_preset(name_or_path: &str) -> Result<ChannelModel, ChannelError> {
    match preset(name_or_path) {
        Ok(m) => Ok(m),
        Err(ChannelError::UnknownPreset(_)) if Path::new(name_or_path).is_file() => {
            load_preset_file(Path::new(name_or_path))
        }
        Err(e) => Err(e),
    }
}

/// Magnitude response of a tap set at `f` Hz (used in tests and reports).
pub fn multipath_response(taps: &[Tap], f: f64) -> Complex64 {
    taps.iter()
        .map(|t| t.gain * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f * t.delay_s))
        .sum()
}
