use std::f64::consts::PI;

use num_complex::Complex64;

use super::{PacketConfig, SignalError, Waveform};
use crate::dsp::sinc;

pub const DEFAULT_SPAN_SYMBOLS: usize = 16;

/// Raised-cosine impulse response at time `t` (in symbol periods).
pub fn raised_cosine(t: f64, rolloff: f64) -> f64 {
    let x = 2.0 * rolloff * t;
    if (x.abs() - 1.0).abs() < 1e-9 {
        // Removable singularity at |t| = 1 / (2 beta).
        PI / 4.0 * sinc(1.0 / (2.0 * rolloff))
    } else {
        sinc(t) * (PI * rolloff * t).cos() / (1.0 - x * x)
    }
}

/// Integer samples per symbol, or an invalid-rate error.
pub fn samples_per_symbol(fb: f64, fs: f64) -> Result<usize, SignalError> {
    if !(fb > 0.0) || !(fs > 0.0) {
        return Err(SignalError::InvalidRate { fs, fb });
    }
    let ratio = fs / fb;
    let sps = ratio.round();
    if sps < 1.0 || (ratio - sps).abs() > 1e-9 * ratio {
        return Err(SignalError::InvalidRate { fs, fb });
    }
    Ok(sps as usize)
}

/// Raised-cosine taps sampled at `fs`, `span_symbols * fs/fb + 1` long,
/// unit peak at the center.
pub fn design_rc_filter(fb: f64, rolloff: f64, fs: f64, span_symbols: usize) -> Result<Vec<f64>, SignalError> {
    let sps = samples_per_symbol(fb, fs)?;
    if span_symbols < 8 || span_symbols % 2 != 0 {
        return Err(SignalError::InvalidConfig(format!(
            "filter span must be an even number of symbols >= 8, got {span_symbols}"
        )));
    }
    if !(rolloff > 0.0 && rolloff <= 1.0) {
        return Err(SignalError::InvalidConfig(format!("roll-off must be in (0, 1], got {rolloff}")));
    }
    let n = span_symbols * sps + 1;
    let mid = (n / 2) as i64;
    Ok((0..n as i64)
        .map(|i| raised_cosine((i - mid) as f64 / sps as f64, rolloff))
        .collect())
}

/// Zero-insertion upsampling followed by convolution with `taps`.
/// Output length is `symbols.len() * sps + taps.len() - 1`.
pub fn shape_with(symbols: &[Complex64], taps: &[f64], sps: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); symbols.len() * sps + taps.len() - 1];
    for (k, &s) in symbols.iter().enumerate() {
        if s.re == 0.0 && s.im == 0.0 {
            continue;
        }
        let base = k * sps;
        for (j, &h) in taps.iter().enumerate() {
            out[base + j] += s * h;
        }
    }
    out
}

/// Raised-cosine shaped complex baseband for `symbols` at `cfg.fs`.
pub fn pulse_shape(symbols: &[Complex64], cfg: &PacketConfig) -> Result<Waveform, SignalError> {
    let fs = cfg.fs();
    let sps = samples_per_symbol(cfg.fb, fs)?;
    let taps = design_rc_filter(cfg.fb, cfg.rolloff, fs, DEFAULT_SPAN_SYMBOLS)?;
    Ok(Waveform::complex(fs, shape_with(symbols, &taps, sps)))
}

/// `s[n] = Re{bb[n] e^{j 2 pi fc n / fs}}`, phase referenced to the first
/// sample. `bandwidth` is the two-sided occupied width of `bb` in Hz.
pub fn upconvert(bb: &Waveform, fc: f64, bandwidth: f64) -> Result<Waveform, SignalError> {
    upconvert_at(bb, fc, bandwidth, 0)
}

/// [`upconvert`] with the carrier phase referenced `offset` samples before
/// the first sample of `bb`.
pub fn upconvert_at(bb: &Waveform, fc: f64, bandwidth: f64, offset: usize) -> Result<Waveform, SignalError> {
    let x = bb.as_complex()?;
    let fs = bb.fs;
    let upper = fc + bandwidth / 2.0;
    if fs <= 2.0 * upper {
        return Err(SignalError::Aliasing { fs, upper_edge: upper });
    }
    if fc - bandwidth / 2.0 < 0.0 {
        log::warn!(
            "lower band edge {:.3} MHz is below DC; spectrum folds at 0 Hz",
            (fc - bandwidth / 2.0) / 1e6
        );
    }
    let w = 2.0 * PI * fc / fs;
    let out = x
        .iter()
        .enumerate()
        .map(|(n, v)| {
            let ph = w * (n + offset) as f64;
            v.re * ph.cos() - v.im * ph.sin()
        })
        .collect();
    Ok(Waveform::real(fs, out))
}

/// Mixes a real passband signal down by `fc` (no filtering); the factor 2
/// restores the envelope amplitude once the `2 fc` image is removed.
pub fn mix_down(x: &[f64], fc: f64, fs: f64) -> Vec<Complex64> {
    let w = 2.0 * PI * fc / fs;
    x.iter()
        .enumerate()
        .map(|(n, &v)| {
            let ph = w * n as f64;
            Complex64::new(2.0 * v * ph.cos(), -2.0 * v * ph.sin())
        })
        .collect()
}
