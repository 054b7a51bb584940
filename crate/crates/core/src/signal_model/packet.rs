use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::pulse::{pulse_shape, samples_per_symbol, upconvert_at, DEFAULT_SPAN_SYMBOLS};
use super::{make_constellation, map_bits, Constellation, ConstellationKind, SignalError, Waveform};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PreambleKind {
    #[serde(rename = "barker")]
    Barker13,
    #[serde(rename = "qchirp")]
    QuadraticChirp,
    #[serde(rename = "hchirp")]
    HyperbolicUpDown,
}

impl fmt::Display for PreambleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Barker13 => "barker",
            Self::QuadraticChirp => "qchirp",
            Self::HyperbolicUpDown => "hchirp",
        })
    }
}

impl FromStr for PreambleKind {
    type Err = SignalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "barker" => Ok(Self::Barker13),
            "qchirp" => Ok(Self::QuadraticChirp),
            "hchirp" => Ok(Self::HyperbolicUpDown),
            other => Err(SignalError::InvalidConfig(format!("unknown preamble `{other}`"))),
        }
    }
}

fn default_rolloff() -> f64 {
    0.8
}
fn default_guard() -> f64 {
    1e-3
}
fn default_train() -> usize {
    1_000
}
fn default_payload() -> usize {
    4_000
}
fn default_preamble() -> PreambleKind {
    PreambleKind::Barker13
}
fn default_seed() -> u64 {
    1
}

/// Packet layout and modulation parameters. Field names are the JSON keys
/// of a packet config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketConfig {
    #[serde(rename = "fc_hz")]
    pub fc: f64,
    #[serde(rename = "fb_hz")]
    pub fb: f64,
    pub format: ConstellationKind,
    #[serde(default = "default_preamble")]
    pub preamble: PreambleKind,
    #[serde(default = "default_train")]
    pub n_train: usize,
    #[serde(default = "default_payload")]
    pub n_payload: usize,
    #[serde(default = "default_guard")]
    pub guard_s: f64,
    #[serde(default = "default_rolloff")]
    pub rolloff: f64,
    /// Simulation sample rate; defaults to `8 * fb`.
    #[serde(rename = "fs_hz", default, skip_serializing_if = "Option::is_none")]
    pub fs_override: Option<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl PacketConfig {
    /// Desk-scale defaults: Barker preamble, 1,000 training and 4,000
    /// payload symbols, 1 ms guards, roll-off 0.8, `fs = 8 fb`.
    pub fn new(fc: f64, fb: f64, format: ConstellationKind) -> Self {
        Self {
            fc,
            fb,
            format,
            preamble: default_preamble(),
            n_train: default_train(),
            n_payload: default_payload(),
            guard_s: default_guard(),
            rolloff: default_rolloff(),
            fs_override: None,
            seed: default_seed(),
        }
    }

    pub fn fs(&self) -> f64 {
        self.fs_override.unwrap_or(8.0 * self.fb)
    }

    pub fn sps(&self) -> Result<usize, SignalError> {
        samples_per_symbol(self.fb, self.fs())
    }

    pub fn constellation(&self) -> Constellation {
        make_constellation(self.format)
    }

    /// Two-sided occupied bandwidth `fb (1 + rolloff)`.
    pub fn bandwidth(&self) -> f64 {
        self.fb * (1.0 + self.rolloff)
    }

    pub fn guard_samples(&self) -> usize {
        (self.guard_s * self.fs()).round() as usize
    }

    pub fn n_symbols(&self) -> usize {
        self.n_train + self.n_payload
    }

    pub fn data_rate_bps(&self) -> f64 {
        self.format.bits_per_symbol() as f64 * self.fb
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        let bad = |key: &str, msg: String| Err(SignalError::InvalidConfig(format!("`{key}`: {msg}")));
        if !(self.fb > 0.0) || !self.fb.is_finite() {
            return bad("fb_hz", format!("symbol rate must be positive, got {}", self.fb));
        }
        if !(self.fc > 0.0) || !self.fc.is_finite() {
            return bad("fc_hz", format!("carrier must be positive, got {}", self.fc));
        }
        if !(self.rolloff > 0.0 && self.rolloff <= 1.0) {
            return bad("rolloff", format!("must be in (0, 1], got {}", self.rolloff));
        }
        if self.n_train < 1 {
            return bad("n_train", "at least one training symbol is required".into());
        }
        if !(self.guard_s >= 0.0) || !self.guard_s.is_finite() {
            return bad("guard_s", format!("must be >= 0, got {}", self.guard_s));
        }
        let fs = self.fs();
        if samples_per_symbol(self.fb, fs).is_err() {
            return bad("fs_hz", format!("{fs} Hz is not an integer multiple of fb_hz {}", self.fb));
        }
        let upper = self.fc + self.bandwidth() / 2.0;
        if fs <= 2.0 * upper {
            return bad("fs_hz", format!("{fs} Hz cannot represent a band reaching {upper} Hz"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical (key-sorted) JSON form.
    pub fn digest(&self) -> String {
        digest_json(&serde_json::to_value(self).expect("config serializes"))
    }
}

pub fn digest_json(v: &serde_json::Value) -> String {
    // serde_json::Value keeps object keys sorted, which canonicalizes the text.
    let text = v.to_string();
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Known symbols of one packet and the bits they carry.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub train: Vec<Complex64>,
    pub payload: Vec<Complex64>,
    pub train_bits: Vec<u8>,
    pub payload_bits: Vec<u8>,
}

impl SymbolFrame {
    /// Draws training then payload bits from SplitMix64 seeded with `cfg.seed`.
    pub fn generate(cfg: &PacketConfig) -> Self {
        let c = cfg.constellation();
        let k = c.bits_per_symbol();
        let mut src = SplitMix64::new(cfg.seed);
        let train_bits = src.bits(cfg.n_train * k);
        let payload_bits = src.bits(cfg.n_payload * k);
        Self::from_bits(train_bits, payload_bits, &c).expect("bit counts are multiples of k")
    }

    pub fn from_bits(train_bits: Vec<u8>, payload_bits: Vec<u8>, c: &Constellation) -> Result<Self, SignalError> {
        Ok(Self {
            train: map_bits(&train_bits, c)?,
            payload: map_bits(&payload_bits, c)?,
            train_bits,
            payload_bits,
        })
    }

    pub fn symbols(&self) -> impl Iterator<Item = &Complex64> {
        self.train.iter().chain(&self.payload)
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Passband packet plus the sample index of its first data symbol instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub wave: Waveform,
    pub first_symbol_index: usize,
    pub preamble_len: usize,
}

/// `[preamble | guard | shaped data | guard]`, with the data carrier phase
/// continuous with the packet's own sample clock.
pub fn assemble_packet(frame: &SymbolFrame, cfg: &PacketConfig, preamble: &Waveform) -> Result<Packet, SignalError> {
    cfg.validate()?;
    let fs = cfg.fs();
    if !preamble.is_empty() && (preamble.fs - fs).abs() > 1e-9 * fs {
        return Err(SignalError::InvalidConfig(format!(
            "preamble sample rate {} differs from packet rate {fs}",
            preamble.fs
        )));
    }
    let pre = if preamble.is_empty() { &[][..] } else { preamble.as_real()? };
    let guard = cfg.guard_samples();
    let symbols: Vec<Complex64> = frame.symbols().copied().collect();
    let bb = pulse_shape(&symbols, cfg)?;
    let data_start = pre.len() + guard;
    let data = upconvert_at(&bb, cfg.fc, cfg.bandwidth(), data_start)?;
    let data = data.as_real()?;

    let mut out = Vec::with_capacity(data_start + data.len() + guard);
    out.extend_from_slice(pre);
    out.resize(data_start, 0.0);
    out.extend_from_slice(data);
    out.resize(out.len() + guard, 0.0);

    let sps = cfg.sps()?;
    Ok(Packet {
        wave: Waveform::real(fs, out),
        first_symbol_index: data_start + DEFAULT_SPAN_SYMBOLS * sps / 2,
        preamble_len: pre.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guard_is_forty_thousand_samples_at_forty_megahertz() {
        let cfg = PacketConfig::new(5e6, 5e6, ConstellationKind::Qam64);
        assert_eq!(cfg.fs(), 40e6);
        assert_eq!(cfg.guard_samples(), 40_000);
    }

    #[test]
    fn full_scale_frame_has_fifty_thousand_symbols() {
        let mut cfg = PacketConfig::new(5e6, 2.5e6, ConstellationKind::Qpsk);
        cfg.n_train = 10_000;
        cfg.n_payload = 40_000;
        let f = SymbolFrame::generate(&cfg);
        assert_eq!(f.len(), 50_000);
        assert_eq!(f.train_bits.len(), 20_000);
    }

    #[test]
    fn packet_length_is_exact() {
        let mut cfg = PacketConfig::new(5e6, 2.5e6, ConstellationKind::Qam16);
        cfg.n_train = 30;
        cfg.n_payload = 70;
        cfg.guard_s = 2e-6;
        let frame = SymbolFrame::generate(&cfg);
        let pre = Waveform::real(cfg.fs(), vec![0.5; 123]);
        let p = assemble_packet(&frame, &cfg, &pre).unwrap();
        let sps = 8;
        assert_eq!(p.wave.len(), 123 + 2 * 40 + 100 * sps + 16 * sps);
        assert_eq!(p.first_symbol_index, 123 + 40 + 64);
    }

    #[test]
    fn bare_training_burst() {
        let mut cfg = PacketConfig::new(5e6, 2.5e6, ConstellationKind::Qpsk);
        cfg.n_train = 10;
        cfg.n_payload = 0;
        cfg.guard_s = 0.0;
        let frame = SymbolFrame::generate(&cfg);
        let p = assemble_packet(&frame, &cfg, &Waveform::real(cfg.fs(), vec![])).unwrap();
        let bb = pulse_shape(&frame.train, &cfg).unwrap();
        let want = super::super::upconvert(&bb, cfg.fc, cfg.bandwidth()).unwrap();
        assert_eq!(p.wave, want);
        assert_eq!(p.first_symbol_index, 64);
    }

    #[test]
    fn validation_names_offending_key() {
        let mut cfg = PacketConfig::new(5e6, 3e6, ConstellationKind::Qpsk);
        cfg.fs_override = Some(40e6);
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("fs_hz"), "{err}");
        let mut cfg = PacketConfig::new(5e6, 2.5e6, ConstellationKind::Qpsk);
        cfg.rolloff = 0.0;
        assert!(cfg.validate().unwrap_err().to_string().contains("rolloff"));
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = PacketConfig::new(5e6, 2.5e6, ConstellationKind::Qpsk);
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.seed = 2;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn config_json_keys() {
        let text = r#"{"fc_hz": 5e6, "fb_hz": 5e6, "format": "qam64"}"#;
        let cfg: PacketConfig = serde_json::from_str(text).unwrap();
        assert_eq!(cfg.data_rate_bps(), 30e6);
        let bad = r#"{"fc_hz": 5e6, "fb_hz": 5e6, "format": "qam64", "bogus": 1}"#;
        let err = serde_json::from_str::<PacketConfig>(bad).unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
    }
}
