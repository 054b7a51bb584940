//! Constellations, pulse shaping, carrier modulation and packet assembly.

mod constellation;
mod packet;
mod pulse;
mod waveform;

pub use constellation::{demap_symbols, make_constellation, map_bits, Constellation, ConstellationKind};
pub use packet::{assemble_packet, digest_json, Packet, PacketConfig, PreambleKind, SymbolFrame};
pub use pulse::{
    design_rc_filter, mix_down, pulse_shape, raised_cosine, samples_per_symbol, shape_with, upconvert, upconvert_at,
    DEFAULT_SPAN_SYMBOLS,
};
pub use waveform::{
    decode_f32, encode_f32, file_pair, read_waveform, write_atomic, write_waveform, ReadError, Samples, Sidecar,
    Waveform, WaveformKind,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SignalError {
    #[error("bit count {len} is not a multiple of {multiple}")]
    LengthMismatch { len: usize, multiple: usize },
    #[error("sample rate {fs} Hz is not an integer multiple of symbol rate {fb} Hz")]
    InvalidRate { fs: f64, fb: f64 },
    #[error("sample rate {fs} Hz aliases a band reaching {upper_edge} Hz")]
    Aliasing { fs: f64, upper_edge: f64 },
    #[error("expected a {expected:?} waveform")]
    WrongKind { expected: WaveformKind },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
