use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tissue_modem::channel::{apply_channel, preset, preset_names, resolve_preset, ChannelError};
use tissue_modem::experiment::{run_experiment, write_results, ExperimentSpec, RowStatus, Scale};
use tissue_modem::metrics::MetricsError;
use tissue_modem::pipeline::{receive_with_threshold, report, transmit, PipelineError};
use tissue_modem::receiver::{EqualizerConfig, ReceiverError};
use tissue_modem::signal_model::{read_waveform, write_waveform, PacketConfig, PreambleKind, ReadError, Sidecar, SignalError};
use tissue_modem::sync::DEFAULT_THRESHOLD;

/// Failure classes with their process exit codes.
#[derive(Debug)]
enum Failure {
    Config(String),
    Sync(String),
    Diverged(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Sync(_) => 3,
            Failure::Diverged(_) => 4,
            Failure::Io(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Sync(m) | Failure::Diverged(m) | Failure::Io(m) => m,
        }
    }
}

impl From<SignalError> for Failure {
    fn from(e: SignalError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<ChannelError> for Failure {
    fn from(e: ChannelError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Io(e) => Failure::Io(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

impl From<ReadError> for Failure {
    fn from(e: ReadError) -> Self {
        match e {
            ReadError::Signal(s) => Failure::Config(s.to_string()),
            other => Failure::Io(other.to_string()),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        let msg = e.to_string();
        match e {
            PipelineError::Sync(_) => Failure::Sync(msg),
            PipelineError::Receiver(ReceiverError::Diverged { .. } | ReceiverError::Numerical { .. }) => {
                Failure::Diverged(msg)
            }
            PipelineError::Receiver(ReceiverError::Misaligned { .. } | ReceiverError::InputTooShort { .. }) => {
                Failure::Sync(msg)
            }
            PipelineError::Metrics(m) => m.into(),
            _ => Failure::Config(msg),
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PreambleArg {
    Barker,
    Qchirp,
    Hchirp,
}

impl From<PreambleArg> for PreambleKind {
    fn from(p: PreambleArg) -> Self {
        match p {
            PreambleArg::Barker => PreambleKind::Barker13,
            PreambleArg::Qchirp => PreambleKind::QuadraticChirp,
            PreambleArg::Hchirp => PreambleKind::HyperbolicUpDown,
        }
    }
}

/// Overrides shared by `gen` and `rx`; both sides must agree on them.
#[derive(clap::Args, Debug, Clone)]
struct PacketOverrides {
    /// Bit-source seed (overrides the config's `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Use 10,000 training and 40,000 payload symbols.
    #[arg(long)]
    full_scale: bool,
    #[arg(long, value_enum)]
    preamble: Option<PreambleArg>,
}

#[derive(Parser, Debug)]
#[command(name = "tmodem", version, about = "Passband QAM ultrasonic modem simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a packet waveform from a JSON packet config.
    Gen {
        #[arg(long)]
        config: PathBuf,
        /// Output base path; writes `<out>.f32` and `<out>.json`.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: PacketOverrides,
    },
    /// Pass a waveform through a channel preset.
    Chan {
        #[arg(long)]
        input: PathBuf,
        /// Preset name or path to a preset JSON file.
        #[arg(long)]
        preset: String,
        #[arg(long)]
        out: PathBuf,
        /// Noise seed (overrides the preset's).
        #[arg(long)]
        seed: Option<u64>,
        /// Target in-band SNR in dB (overrides the preset's).
        #[arg(long, allow_negative_numbers = true)]
        snr_db: Option<f64>,
    },
    /// Synchronize, equalize and score a received waveform.
    Rx {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Directory for report.json, mse_trace.csv and constellation.csv.
        #[arg(long)]
        out_dir: PathBuf,
        /// Equalizer settings as JSON; defaults to 24/12 taps.
        #[arg(long)]
        equalizer: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        #[command(flatten)]
        overrides: PacketOverrides,
    },
    /// Run every row of an experiment spec.
    Experiment {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        full_scale: bool,
    },
    /// Inspect the built-in channel presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand, Debug)]
enum PresetAction {
    List,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{what} {}: {e}", path.display())))
}

fn load_config(path: &Path, o: &PacketOverrides) -> Result<PacketConfig, Failure> {
    let mut cfg: PacketConfig = read_json(path, "packet config")?;
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if o.full_scale {
        (cfg.n_train, cfg.n_payload) = Scale::Full.symbols();
    }
    if let Some(p) = o.preamble {
        cfg.preamble = p.into();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_gen(config: &Path, out: &Path, o: &PacketOverrides) -> Result<(), Failure> {
    let cfg = load_config(config, o)?;
    let tx = transmit(&cfg)?;
    let mut sc = Sidecar::new(&tx.packet.wave, cfg.digest());
    sc.first_symbol_index = Some(tx.packet.first_symbol_index);
    sc.data_rate_bps = Some(cfg.data_rate_bps());
    sc.n_train = Some(cfg.n_train);
    sc.n_payload = Some(cfg.n_payload);
    write_waveform(out, &tx.packet.wave, &sc)?;
    println!(
        "{} training + {} payload symbols, {} at {:.3} Mb/s, {} samples at {} Hz",
        cfg.n_train,
        cfg.n_payload,
        cfg.format,
        cfg.data_rate_bps() / 1e6,
        tx.packet.wave.len(),
        cfg.fs()
    );
    Ok(())
}

fn cmd_chan(input: &Path, preset_arg: &str, out: &Path, seed: Option<u64>, snr_db: Option<f64>) -> Result<(), Failure> {
    let (w, mut sc) = read_waveform(input)?;
    let mut model = resolve_preset(preset_arg)?;
    if let Some(s) = seed {
        model.seed = s;
    }
    if snr_db.is_some() {
        model.snr_db = snr_db;
    }
    let y = apply_channel(&w, &model)?;
    sc.channel = Some(serde_json::to_value(&model).map_err(|e| Failure::Config(e.to_string()))?);
    // Filter delays shift the data; the receiver finds it again from the preamble.
    sc.first_symbol_index = None;
    sc.fs_hz = y.fs;
    sc.kind = y.kind();
    write_waveform(out, &y, &sc)?;
    println!("applied `{}` ({} -> {} samples)", model.name, w.len(), y.len());
    Ok(())
}

fn cmd_rx(
    input: &Path,
    config: &Path,
    out_dir: &Path,
    equalizer: Option<&Path>,
    threshold: f64,
    o: &PacketOverrides,
) -> Result<(), Failure> {
    let cfg = load_config(config, o)?;
    let ecfg: EqualizerConfig = match equalizer {
        Some(p) => read_json(p, "equalizer config")?,
        None => EqualizerConfig::default(),
    };
    let (w, _) = read_waveform(input)?;
    let rx = receive_with_threshold(&w, &cfg, &ecfg, threshold)?;
    let rep = report(&cfg, &rx)?;
    rep.write_dir(out_dir, &rx.eq.records)?;
    println!(
        "BER {} ({} errors / {} bits), EVM {:.2}%, final MSE {:.1} dB",
        rep.ber, rep.bit_errors, rep.bits_compared, rep.evm_percent, rep.mse_final_db
    );
    Ok(())
}

fn cmd_experiment(spec_path: &Path, out_dir: &Path, full_scale: bool) -> Result<(), Failure> {
    let mut spec: ExperimentSpec = read_json(spec_path, "experiment spec")?;
    if full_scale {
        spec.scale = Scale::Full;
    }
    spec.equalizer.validate().map_err(|e| Failure::Config(e.to_string()))?;
    let rows = run_experiment(&spec, Some(out_dir));
    write_results(&rows, out_dir)?;
    println!("{:<6} {:<12} {:<6} {:>7} {:>7} {:>9}  {}", "row", "channel", "format", "fc MHz", "fb MHz", "rate Mb/s", "BER");
    for r in &rows {
        let note = if r.status == RowStatus::Ok { String::new() } else { format!("  ({:?})", r.status) };
        println!(
            "{:<6} {:<12} {:<6} {:>7} {:>7} {:>9}  {}{note}",
            r.label,
            r.channel,
            r.format.to_string(),
            r.fc_hz / 1e6,
            r.fb_hz / 1e6,
            r.data_rate_bps / 1e6,
            r.ber
        );
    }
    Ok(())
}

fn cmd_presets_list() -> Result<(), Failure> {
    for name in preset_names() {
        let m = preset(name)?;
        let snr = m.snr_db.map_or("none".to_string(), |s| format!("{s} dB"));
        println!("{name:<12} taps={} path={} cm snr={snr}", m.taps.len(), m.path_cm);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gen { config, out, overrides } => cmd_gen(&config, &out, &overrides),
        Command::Chan { input, preset, out, seed, snr_db } => cmd_chan(&input, &preset, &out, seed, snr_db),
        Command::Rx { input, config, out_dir, equalizer, threshold, overrides } => {
            cmd_rx(&input, &config, &out_dir, equalizer.as_deref(), threshold, &overrides)
        }
        Command::Experiment { spec, out_dir, full_scale } => cmd_experiment(&spec, &out_dir, full_scale),
        Command::Presets { action: PresetAction::List } => cmd_presets_list(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
