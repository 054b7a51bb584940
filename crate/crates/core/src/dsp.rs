//! Shared numeric kernels: windowed-sinc design, FIR application, FFT
//! helpers, band-limited resampling and periodogram band power.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Normalized sinc, `sin(pi x) / (pi x)`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= (half / k) * (half / k);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
        k += 1.0;
    }
    sum
}

/// Kaiser shape parameter for a target stopband attenuation in dB.
pub fn kaiser_beta(atten_db: f64) -> f64 {
    if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    }
}

/// Kaiser window value at offset `x` from the center, for half-width `half`.
pub fn kaiser(x: f64, half: f64, beta: f64) -> f64 {
    let r = x / half;
    if r.abs() > 1.0 {
        return 0.0;
    }
    bessel_i0(beta * (1.0 - r * r).sqrt()) / bessel_i0(beta)
}

/// Odd-length linear-phase lowpass from a Kaiser-windowed sinc.
///
/// `cutoff` and `transition` are in cycles/sample. The taps are scaled to
/// unit DC gain.
pub fn kaiser_lowpass(cutoff: f64, transition: f64, atten_db: f64) -> Vec<f64> {
    let beta = kaiser_beta(atten_db);
    let mut n = ((atten_db - 7.95) / (2.285 * 2.0 * PI * transition)).ceil() as usize + 1;
    if n % 2 == 0 {
        n += 1;
    }
    let mid = (n / 2) as f64;
    let mut h: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 - mid;
            2.0 * cutoff * sinc(2.0 * cutoff * t) * kaiser(t, mid + 1.0, beta)
        })
        .collect();
    let dc: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= dc);
    h
}

/// Full linear convolution, output length `x.len() + h.len() - 1`.
pub fn convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let mut y = vec![0.0; x.len() + h.len() - 1];
    for (i, &xv) in x.iter().enumerate() {
        if xv == 0.0 {
            continue;
        }
        for (j, &hv) in h.iter().enumerate() {
            y[i + j] += xv * hv;
        }
    }
    y
}

/// Complex-input variant of [`convolve`] with real taps.
pub fn convolve_complex(x: &[Complex64], h: &[f64]) -> Vec<Complex64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let mut y = vec![Complex64::new(0.0, 0.0); x.len() + h.len() - 1];
    for (i, &xv) in x.iter().enumerate() {
        if xv.re == 0.0 && xv.im == 0.0 {
            continue;
        }
        for (j, &hv) in h.iter().enumerate() {
            y[i + j] += xv * hv;
        }
    }
    y
}

pub fn fft(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    FftPlanner::new().plan_fft_forward(buf.len()).process(buf);
}

/// Inverse FFT including the `1/N` normalization.
pub fn ifft(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    FftPlanner::new().plan_fft_inverse(buf.len()).process(buf);
    let scale = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
}

/// Signed frequency in Hz of FFT bin `k` for an `n`-point transform.
pub fn bin_freq(k: usize, n: usize, fs: f64) -> f64 {
    if k <= n / 2 {
        k as f64 * fs / n as f64
    } else {
        (k as f64 - n as f64) * fs / n as f64
    }
}

/// Analytic signal restricted to `band` (Hz, positive frequencies) with a
/// raised-cosine taper of width `taper` Hz on each edge.
///
/// For a real input `x = Re{a}` whose spectrum lies inside the band, the
/// result is `a`.
pub fn analytic_band(x: &[f64], fs: f64, band: (f64, f64), taper: f64) -> Vec<Complex64> {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let f = bin_freq(k, n, fs);
        let g = if f <= 0.0 { 0.0 } else { band_taper(f, band, taper) };
        *v *= 2.0 * g;
    }
    ifft(&mut buf);
    buf
}

/// Full-band analytic signal (Hilbert transform via FFT).
pub fn analytic(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let g = if k == 0 || (n % 2 == 0 && k == n / 2) {
            1.0
        } else if k < n.div_ceil(2) {
            2.0
        } else {
            0.0
        };
        *v *= g;
    }
    ifft(&mut buf);
    buf
}

fn band_taper(f: f64, band: (f64, f64), taper: f64) -> f64 {
    let (lo, hi) = band;
    if f < lo - taper || f > hi + taper {
        0.0
    } else if f >= lo && f <= hi {
        1.0
    } else {
        let d = if f < lo { lo - f } else { f - hi };
        0.5 * (1.0 + (PI * d / taper).cos())
    }
}

/// Valid-range cross-correlation `c[l] = sum_n a[l + n] * conj(t[n])` for
/// `l in 0..=a.len() - t.len()`, computed by FFT.
pub fn xcorr_valid(a: &[Complex64], t: &[Complex64]) -> Vec<Complex64> {
    if t.is_empty() || a.len() < t.len() {
        return Vec::new();
    }
    let n = (a.len() + t.len()).next_power_of_two();
    let mut fa = vec![Complex64::new(0.0, 0.0); n];
    fa[..a.len()].copy_from_slice(a);
    let mut ft = vec![Complex64::new(0.0, 0.0); n];
    ft[..t.len()].copy_from_slice(t);
    fft(&mut fa);
    fft(&mut ft);
    for (x, y) in fa.iter_mut().zip(&ft) {
        *x *= y.conj();
    }
    ifft(&mut fa);
    fa.truncate(a.len() - t.len() + 1);
    fa
}

/// Band-limited interpolation of `x` at fractional index `pos`.
pub fn interp_at(x: &[f64], pos: f64, half_width: usize, beta: f64) -> f64 {
    let base = pos.floor() as i64;
    let mu = pos - base as f64;
    let hw = half_width as i64;
    let mut acc = 0.0;
    for j in (-hw + 1)..=hw {
        let idx = base + j;
        if idx < 0 || idx as usize >= x.len() {
            continue;
        }
        let d = j as f64 - mu;
        acc += x[idx as usize] * sinc(d) * kaiser(d, hw as f64, beta);
    }
    acc
}

pub const RESAMPLE_HALF_WIDTH: usize = 32;
pub const RESAMPLE_BETA: f64 = 8.0;

/// Time dilation `y[n] = x(n / factor)`; output length `round(len * factor)`.
///
/// `factor > 1` stretches the signal (longer, lower frequencies).
pub fn resample(x: &[f64], factor: f64) -> Vec<f64> {
    let out_len = (x.len() as f64 * factor).round() as usize;
    (0..out_len)
        .map(|n| interp_at(x, n as f64 / factor, RESAMPLE_HALF_WIDTH, RESAMPLE_BETA))
        .collect()
}

/// Power of a real sequence inside `band`, normalized per sample
/// (Parseval-consistent with `mean(x^2)` for a full band).
pub fn band_power(x: &[f64], fs: f64, band: (f64, f64)) -> f64 {
    let n = x.len();
    if n == 0 {
        return 0.0;
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft(&mut buf);
    let norm = 1.0 / (n as f64 * n as f64);
    buf.iter()
        .enumerate()
        .filter(|(k, _)| {
            let f = bin_freq(*k, n, fs).abs();
            f >= band.0 && f <= band.1
        })
        .map(|(_, v)| v.norm_sqr() * norm)
        .sum()
}

/// Band holding the central `fraction` of a real signal's power, from the
/// one-sided periodogram.
pub fn occupied_band(x: &[f64], fs: f64, fraction: f64) -> (f64, f64) {
    let n = x.len();
    if n == 0 {
        return (0.0, fs / 2.0);
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft(&mut buf);
    let half = n / 2;
    let psd: Vec<f64> = buf[..=half].iter().map(|v| v.norm_sqr()).collect();
    let total: f64 = psd.iter().sum();
    if total == 0.0 {
        return (0.0, fs / 2.0);
    }
    let tail = (1.0 - fraction) / 2.0 * total;
    let mut acc = 0.0;
    let mut lo = 0;
    for (k, p) in psd.iter().enumerate() {
        acc += p;
        if acc >= tail {
            lo = k;
            break;
        }
    }
    acc = 0.0;
    let mut hi = half;
    for (k, p) in psd.iter().enumerate().rev() {
        acc += p;
        if acc >= tail {
            hi = k;
            break;
        }
    }
    let df = fs / n as f64;
    (lo as f64 * df, hi as f64 * df)
}

/// Three-point parabolic refinement of a peak at `idx`; returns the
/// fractional offset in `[-0.5, 0.5]`.
pub fn parabolic_offset(ym: f64, y0: f64, yp: f64) -> f64 {
    let den = ym - 2.0 * y0 + yp;
    if den.abs() < 1e-300 {
        return 0.0;
    }
    (0.5 * (ym - yp) / den).clamp(-0.5, 0.5)
}
