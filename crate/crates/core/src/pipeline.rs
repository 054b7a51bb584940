//! End-to-end transmit and receive chains.

use thiserror::Error;

use crate::channel::{apply_channel, ChannelError, ChannelModel};
use crate::metrics::{build_report, MetricsError, PacketReport, ReportInputs};
use crate::receiver::{equalize_packet, front_end, EqualizerConfig, EqualizerOutput, ReceiverError};
use crate::signal_model::{assemble_packet, demap_symbols, Packet, PacketConfig, SignalError, SymbolFrame, Waveform};
use crate::sync::{acquire, Preamble, SyncError, SyncResult};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Sync(#[from] SyncError),
    #[error(transparent)]
    Receiver(#[from] ReceiverError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// A generated packet and everything needed to check its reception.
#[derive(Debug, Clone)]
pub struct Transmission {
    pub frame: SymbolFrame,
    pub preamble: Preamble,
    pub packet: Packet,
}

pub fn transmit(cfg: &PacketConfig) -> Result<Transmission, PipelineError> {
    cfg.validate()?;
    let frame = SymbolFrame::generate(cfg);
    let preamble = Preamble::for_config(cfg)?;
    let packet = assemble_packet(&frame, cfg, &preamble.wave)?;
    Ok(Transmission { frame, preamble, packet })
}

#[derive(Debug, Clone)]
pub struct Reception {
    pub sync: SyncResult,
    /// Baseband at two samples per symbol, sample 0 on the first symbol.
    pub baseband: Waveform,
    pub eq: EqualizerOutput,
}

/// Synchronizes, demodulates and equalizes one received packet. The
/// training sequence is regenerated from `cfg.seed`.
pub fn receive(rx: &Waveform, cfg: &PacketConfig, ecfg: &EqualizerConfig) -> Result<Reception, PipelineError> {
    receive_with_threshold(rx, cfg, ecfg, crate::sync::DEFAULT_THRESHOLD)
}

pub fn receive_with_threshold(
    rx: &Waveform,
    cfg: &PacketConfig,
    ecfg: &EqualizerConfig,
    threshold: f64,
) -> Result<Reception, PipelineError> {
    cfg.validate()?;
    ecfg.validate()?;
    let frame = SymbolFrame::generate(cfg);
    let preamble = Preamble::for_config(cfg)?;
    let sync = acquire(rx, cfg, &preamble, threshold)?;
    if !sync.doppler_in_range {
        log::warn!("Doppler estimate {} outside the expected range", sync.doppler_factor);
    }
    let baseband = front_end(rx, cfg, &sync)?;
    let eq = equalize_packet(&baseband, &frame, &cfg.constellation(), ecfg)?;
    Ok(Reception { sync, baseband, eq })
}

/// Compares a reception against the frame regenerated from `cfg.seed`.
pub fn report(cfg: &PacketConfig, rx: &Reception) -> Result<PacketReport, MetricsError> {
    let frame = SymbolFrame::generate(cfg);
    let c = cfg.constellation();
    let rx_bits = demap_symbols(&rx.eq.decisions, &c);
    build_report(ReportInputs {
        cfg,
        records: &rx.eq.records,
        tx_bits: &frame.payload_bits,
        rx_bits: &rx_bits,
        tx_symbols: &frame.payload,
        decisions: &rx.eq.decisions,
        sync: &rx.sync,
    })
}

/// Generates a packet, passes it through `channel` and decodes it.
pub fn simulate(
    cfg: &PacketConfig,
    channel: &ChannelModel,
    ecfg: &EqualizerConfig,
) -> Result<(PacketReport, Reception), PipelineError> {
    let tx = transmit(cfg)?;
    let rx_wave = apply_channel(&tx.packet.wave, channel)?;
    let rx = receive(&rx_wave, cfg, ecfg)?;
    let rep = report(cfg, &rx)?;
    Ok((rep, rx))
}
