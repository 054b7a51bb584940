//! Passband QAM acoustic modem simulation: transmitter, preambles, a
//! parametric tissue/water channel and a fractionally spaced RLS
//! decision-feedback receiver with second-order phase tracking.

pub mod dsp;
pub mod rng;
pub mod signal_model;
pub mod sync;
pub mod channel;
pub mod receiver;
pub mod metrics;
pub mod pipeline;
pub mod experiment;
