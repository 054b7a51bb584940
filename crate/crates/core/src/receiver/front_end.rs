use std::f64::consts::PI;

use num_complex::Complex64;

use super::ReceiverError;
use crate::dsp::{kaiser_lowpass, resample};
use crate::signal_model::{PacketConfig, Waveform};
use crate::sync::SyncResult;

/// Stopband attenuation of the decimating lowpass.
const LOWPASS_ATTEN_DB: f64 = 80.0;

/// Quadrature demodulation to two samples per symbol.
///
/// The received signal is undilated by `1 / doppler_factor`, mixed down by
/// `fc` against the receiver's own sample clock, lowpass filtered with a
/// passband reaching `fb (1 + rolloff) / 2` and decimated so that output
/// sample `2k` sits on symbol instant `k` (index 0 is the first symbol).
pub fn front_end(rx: &Waveform, cfg: &PacketConfig, sync: &SyncResult) -> Result<Waveform, ReceiverError> {
    let sps = cfg.sps()?;
    if sps % 2 != 0 {
        return Err(ReceiverError::Config(format!(
            "fs/fb = {sps} must be even to decimate to 2 samples/symbol"
        )));
    }
    let fs = rx.fs;
    if (fs - cfg.fs()).abs() > 1e-9 * fs {
        return Err(ReceiverError::Config(format!("received rate {fs} Hz differs from configured {}", cfg.fs())));
    }
    let raw = rx.as_real()?;
    let (x, start): (std::borrow::Cow<[f64]>, usize) = if sync.doppler_factor != 1.0 {
        let a = sync.doppler_factor;
        (resample(raw, 1.0 / a).into(), (sync.start_sample as f64 / a).round() as usize)
    } else {
        (raw.into(), sync.start_sample)
    };
    if start >= x.len() {
        return Err(ReceiverError::Misaligned { start, len: x.len() });
    }

    let step = sps / 2;
    let edge = cfg.bandwidth() / 2.0 / fs;
    let stop = (2.0 * cfg.fb / fs - edge).max(edge + 0.02 / sps as f64);
    let h = kaiser_lowpass(0.5 * (edge + stop), stop - edge, LOWPASS_ATTEN_DB);
    let half = (h.len() / 2) as i64;

    let w = 2.0 * PI * cfg.fc / fs;
    let n_out = (x.len() - start).div_ceil(step);
    let out = (0..n_out)
        .map(|m| {
            let n = (start + m * step) as i64;
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &hj) in h.iter().enumerate() {
                let idx = n + half - j as i64;
                if idx < 0 || idx as usize >= x.len() {
                    continue;
                }
                let v = x[idx as usize];
                if v == 0.0 {
                    continue;
                }
                let ph = w * idx as f64;
                acc += Complex64::new(v * ph.cos(), -v * ph.sin()) * hj;
            }
            acc * 2.0
        })
        .collect();
    Ok(Waveform::complex(2.0 * cfg.fb, out))
}
