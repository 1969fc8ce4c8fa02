use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use cxnn::gradcheck::layer_suite;
use cxnn::Mode;
use dccn::adapt::frames_to_tensor;
use dccn::ls::ls_equalizer;
use dccn::{Checkpoint, DccnModel, ModelKind};
use ofdm_core::expert::{count_errors, equalize, interpolate, ls_estimate};
use ofdm_core::frame::{add_cp, remove_cp};
use ofdm_core::rng::Streams;
use ofdm_core::{ChannelKind, ComplexGrid, EqualizerKind, FrameLayout, Interpolation};
use ofdm_lab::eval::point_streams;
use ofdm_lab::snr::ebno_offset_db;
use ofdm_lab::train::history_csv;
use ofdm_lab::{
    cross_validate, evaluate, manifest, train_stage1, train_stage2, write_csv, Detector, Generator, LabError,
    Settings, WaveformFile,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ofdm-lab",
    version,
    about = "Train and evaluate learned and expert OFDM receivers"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
#[command(next_help_heading = "Run options")]
struct Common {
    /// `key = value` file applied before the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Bits per symbol.
    #[arg(long = "mod", global = true, value_parser = clap::value_parser!(u8).range(1..=4))]
    mod_order: Option<u8>,
    /// Keep (on) or slice off (off) the cyclic prefix inside the network.
    #[arg(long, global = true, value_parser = ["on", "off"])]
    cp: Option<String>,
    /// Receiver structure: original or a..g.
    #[arg(long, global = true)]
    variant: Option<String>,
    /// awgn, flat or epa.
    #[arg(long, global = true)]
    channel: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    episodes: Option<usize>,
    /// Frames per SNR point (evaluate) or frames to write (export).
    #[arg(long, global = true)]
    frames: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Stage 1: train the basic receiver on AWGN.
    TrainReceiver,
    /// Stage 2: train an equalizer in front of a frozen receiver.
    TrainEqualizer {
        /// Receiver checkpoint from train-receiver.
        #[arg(long)]
        model: PathBuf,
    },
    /// BER sweep of an expert or learned receiver, written as CSV.
    Evaluate {
        /// none, ls-linear, ls-spline, lmmse, perfect or dccn (default: dccn
        /// with --model, none otherwise).
        #[arg(long)]
        equalizer: Option<String>,
        /// Checkpoint for `--equalizer dccn`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Write received frames and their label bits to a waveform file.
    ExportWaveforms {
        /// Channel SNR of every frame, in dB.
        #[arg(long, allow_hyphen_values = true)]
        snr: f64,
    },
    /// Score a receiver on frames read from a waveform file.
    CrossValidate {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        equalizer: Option<String>,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Finite-difference check of every network layer.
    Gradcheck,
    /// Fast end-to-end consistency checks.
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e
                .downcast_ref::<LabError>()
                .is_some_and(|l| matches!(l, LabError::Usage(_)));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    LabError::Usage(msg.into()).into()
}

fn resolve(common: &Common) -> anyhow::Result<Settings> {
    let mut s = Settings::default();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        s.apply_text(&text)?;
    }
    if let Some(m) = common.mod_order {
        s.set("mod_order", &m.to_string())?;
    }
    if let Some(cp) = &common.cp {
        s.set("use_cp", cp)?;
    }
    if let Some(v) = &common.variant {
        s.set("variant", v)?;
    }
    if let Some(c) = &common.channel {
        s.set("channel", c)?;
    }
    if let Some(seed) = common.seed {
        s.seed = seed;
    }
    if let Some(e) = common.episodes {
        s.max_episodes = Some(e);
    }
    if let Some(f) = common.frames {
        s.frames_per_point = f;
    }
    s.validate()?;
    Ok(s)
}

/// Writes `text` to `out` (or stdout) and the manifest next to it (or to stderr).
fn emit(out: Option<&Path>, text: &str, manifest_text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            std::fs::write(manifest::path_for(path), manifest_text)?;
        }
        None => {
            print!("{text}");
            eprint!("{manifest_text}");
        }
    }
    Ok(())
}

fn detector(equalizer: Option<&str>, model: Option<&Path>) -> anyhow::Result<Detector> {
    let equalizer = equalizer.unwrap_or(if model.is_some() { "dccn" } else { "none" });
    match (equalizer, model) {
        ("dccn", Some(path)) => {
            let ck = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
            Ok(Detector::Dccn(Box::new(DccnModel::new(ck))))
        }
        ("dccn", None) => Err(usage("--equalizer dccn needs --model")),
        (_, Some(_)) => Err(usage("--model is only used with --equalizer dccn")),
        (name, None) => Ok(Detector::Expert(
            name.parse::<EqualizerKind>().map_err(|e| usage(e.to_string()))?,
        )),
    }
}

/// Adopts the model's frame and network settings unless flags contradict them.
fn adopt_model(s: &mut Settings, common: &Common, det: &Detector) -> anyhow::Result<()> {
    if let Detector::Dccn(model) = det {
        let cfg = &model.checkpoint().config;
        if common.mod_order.is_some_and(|m| m as usize != cfg.mod_order()) {
            bail!(usage(format!(
                "--mod contradicts the model (m={})",
                cfg.mod_order()
            )));
        }
        s.dccn = cfg.clone();
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let common = cli.common;
    match cli.command {
        Command::TrainReceiver => train_receiver(&common),
        Command::TrainEqualizer { model } => train_equalizer(&common, &model),
        Command::Evaluate { equalizer, model } => {
            run_evaluate(&common, equalizer.as_deref(), model.as_deref())
        }
        Command::ExportWaveforms { snr } => export_waveforms(&common, snr),
        Command::CrossValidate {
            input,
            equalizer,
            model,
        } => run_cross_validate(&common, &input, equalizer.as_deref(), model.as_deref()),
        Command::Gradcheck => gradcheck(),
        Command::Selftest => selftest(),
    }
}

fn save_training(
    command: &str,
    s: &Settings,
    out: &Path,
    outcome: &ofdm_lab::TrainOutcome,
) -> anyhow::Result<()> {
    outcome
        .checkpoint
        .save(out)
        .with_context(|| format!("writing {}", out.display()))?;
    let mut hist = out.as_os_str().to_owned();
    hist.push(".history.csv");
    std::fs::write(&hist, history_csv(&outcome.history))?;
    let extra = vec![
        ("episodes_run".to_string(), outcome.history.len().to_string()),
        ("best_episode".to_string(), outcome.best_episode.to_string()),
        ("stopped_early".to_string(), outcome.stopped_early.to_string()),
    ];
    std::fs::write(manifest::path_for(out), manifest::render(command, s, &extra))?;
    let best = &outcome.history[outcome.best_episode];
    println!(
        "{command}: {} episodes, best episode {} (total {:.4}, ce {:.4}, hard BER {:.3e}) -> {}",
        outcome.history.len(),
        best.episode,
        best.total,
        best.ce,
        best.hard_ber,
        out.display()
    );
    Ok(())
}

fn train_receiver(common: &Common) -> anyhow::Result<bool> {
    let s = resolve(common)?;
    if s.channel != ChannelKind::Awgn {
        bail!(usage("the receiver is trained on AWGN; drop --channel"));
    }
    let out = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("receiver.dccn"));
    let outcome = train_stage1(&s.receiver_plan(), &s.dccn)?;
    save_training("train-receiver", &s, &out, &outcome)?;
    Ok(true)
}

fn train_equalizer(common: &Common, model: &Path) -> anyhow::Result<bool> {
    let mut s = resolve(common)?;
    if common.channel.is_none() {
        s.channel = ChannelKind::Epa;
    }
    if !s.channel.is_fading() {
        bail!(usage(
            "the equalizer is trained on a fading channel (flat or epa)"
        ));
    }
    let base = Checkpoint::load(model).with_context(|| format!("loading {}", model.display()))?;
    if common.variant.is_some() && base.config.variant != s.dccn.variant {
        bail!(usage(format!(
            "--variant contradicts the receiver checkpoint ({})",
            base.config.variant
        )));
    }
    let out = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("equalizer.dccn"));
    let outcome = train_stage2(&s.equalizer_plan(), &s.dccn, &base)?;
    save_training("train-equalizer", &s, &out, &outcome)?;
    Ok(true)
}

fn run_evaluate(common: &Common, equalizer: Option<&str>, model: Option<&Path>) -> anyhow::Result<bool> {
    let mut s = resolve(common)?;
    let det = detector(equalizer, model)?;
    adopt_model(&mut s, common, &det)?;
    let sweep = s.sweep_plan();
    let records = evaluate(&sweep, s.ofdm(), &det)?;
    let gen = Generator::new(s.ofdm(), s.channel, s.seed)?;
    let offset = match s.ebno_offset_db {
        Some(o) => o,
        None => ebno_offset_db(s.ofdm(), gen.channel().reference_power())?,
    };
    let meta = vec![
        ("config_hash".to_string(), s.hash()),
        ("seed".to_string(), s.seed.to_string()),
        ("model".to_string(), det.id()),
        ("channel".to_string(), s.channel.to_string()),
        ("mod_order".to_string(), s.mod_order().to_string()),
        ("frames_per_point".to_string(), sweep.frames_per_point.to_string()),
        ("ebno_offset_db".to_string(), offset.to_string()),
    ];
    let csv = write_csv(&records, &meta);
    emit(
        common.out.as_deref(),
        &csv,
        &manifest::render("evaluate", &s, &meta),
    )?;
    Ok(true)
}

fn export_waveforms(common: &Common, snr: f64) -> anyhow::Result<bool> {
    let s = resolve(common)?;
    let Some(out) = &common.out else {
        bail!(usage("export-waveforms needs --out"));
    };
    let frames = common.frames.unwrap_or(100);
    let gen = Generator::new(s.ofdm(), s.channel, s.seed)?;
    let batch = gen.batch(&point_streams(s.seed, snr), 0, frames, &[snr])?;
    let file = WaveformFile::from_batch(&batch, s.ofdm(), gen.channel(), s.seed, snr)?;
    file.save(out)?;
    let extra = vec![
        ("frames".to_string(), frames.to_string()),
        ("snr_db".to_string(), snr.to_string()),
    ];
    std::fs::write(
        manifest::path_for(out),
        manifest::render("export-waveforms", &s, &extra),
    )?;
    println!("wrote {frames} frames at {snr} dB to {}", out.display());
    Ok(true)
}

fn run_cross_validate(
    common: &Common,
    input: &Path,
    equalizer: Option<&str>,
    model: Option<&Path>,
) -> anyhow::Result<bool> {
    let mut s = resolve(common)?;
    let file = WaveformFile::load(input).with_context(|| format!("loading {}", input.display()))?;
    let det = detector(equalizer, model)?;
    s.dccn.ofdm = file.cfg.clone();
    s.channel = file.channel;
    s.seed = file.seed;
    let record = cross_validate(&file, &det)?;
    let meta = vec![
        ("input".to_string(), input.display().to_string()),
        ("model".to_string(), det.id()),
        ("channel".to_string(), file.channel.to_string()),
        ("mod_order".to_string(), file.cfg.mod_order.to_string()),
    ];
    let csv = write_csv(&[record], &meta);
    emit(
        common.out.as_deref(),
        &csv,
        &manifest::render("cross-validate", &s, &meta),
    )?;
    Ok(true)
}

fn gradcheck() -> anyhow::Result<bool> {
    let report = layer_suite(2024, 5)?;
    let mut ok = true;
    for c in &report {
        let status = if c.passed() { "pass" } else { "FAIL" };
        ok &= c.passed();
        println!(
            "{status} {:<15} shape {:?} max rel error {:.3e} over {} coordinates",
            c.layer, c.input_shape, c.max_rel_error, c.coordinates
        );
    }
    println!(
        "{} of {} checks passed",
        report.iter().filter(|c| c.passed()).count(),
        report.len()
    );
    Ok(ok)
}

fn check(name: &str, f: impl FnOnce() -> anyhow::Result<()>) -> bool {
    match f() {
        Ok(()) => {
            println!("pass {name}");
            true
        }
        Err(e) => {
            println!("FAIL {name}: {e:#}");
            false
        }
    }
}

fn selftest() -> anyhow::Result<bool> {
    let mut ok = true;
    ok &= check("noiseless expert loopback, m = 1..4", || {
        for m in 1..=4 {
            let s = Settings {
                frames_per_point: 10,
                ..Settings::default()
            };
            let cfg = s.ofdm().clone().with_mod_order(m);
            let sweep = s.sweep_plan().with_points(vec![f64::INFINITY]);
            let r = evaluate(&sweep, &cfg, &Detector::Expert(EqualizerKind::None))?;
            if r[0].bit_errors != 0 {
                bail!("m = {m}: {} bit errors", r[0].bit_errors);
            }
        }
        Ok(())
    });
    ok &= check("hand-set equalizer graph equals LS pipeline", || {
        let mut s = Settings::default();
        s.dccn.div_eps = 1e-14;
        let cfg = s.ofdm().clone();
        let layout = FrameLayout::build(&cfg)?;
        let gen = Generator::new(&cfg, ChannelKind::Epa, 1)?;
        let batch = gen.batch(&Streams::new(1), 0, 5, &[f64::INFINITY])?;
        let g = ls_equalizer(&s.dccn)?;
        let y = g
            .forward(&frames_to_tensor::<f64>(&batch.rx, &cfg)?, Mode::Eval)?
            .into_output();
        let fft = ofdm_core::dft::Fft::new(cfg.n_fft);
        let mut worst = 0.0f64;
        for (f, frame) in batch.rx.as_slice().chunks(cfg.frame_len()).enumerate() {
            let frame = ComplexGrid::from_complex(&[cfg.frame_syms, cfg.sym_len], frame.to_vec())?;
            let freq = fft.transform(&remove_cp(&frame, &cfg)?, false);
            let est = interpolate(
                &ls_estimate(&freq, &layout, &cfg)?,
                Interpolation::Linear2d,
                &layout,
                &cfg,
            )?;
            let time = add_cp(&fft.transform(&equalize(&freq, &est)?.grid, true), &cfg)?;
            let per = 2 * cfg.frame_len();
            for (a, b) in y.data()[f * per..(f + 1) * per].iter().zip(time.as_reals()) {
                worst = worst.max((a - b).abs());
            }
        }
        if worst > 1e-4 {
            bail!("max deviation {worst:e}");
        }
        Ok(())
    });
    ok &= check("checkpoint and waveform round trips", || {
        let s = Settings::default();
        let mut g = dccn::build_receiver::<f32>(&s.dccn)?;
        g.initialize(&mut Streams::new(3).rng(ofdm_core::rng::Domain::Init, 0));
        let bytes = Checkpoint::new(ModelKind::Receiver, s.dccn.clone(), 3, 0, g).to_bytes();
        if Checkpoint::from_bytes(&bytes)?.to_bytes() != bytes {
            bail!("checkpoint bytes changed");
        }
        let gen = Generator::new(s.ofdm(), ChannelKind::Flat, 3)?;
        let batch = gen.batch(&Streams::new(3), 0, 2, &[10.0])?;
        let w = WaveformFile::from_batch(&batch, s.ofdm(), gen.channel(), 3, 10.0)?;
        let wb = w.to_bytes()?;
        if WaveformFile::from_bytes(&wb)?.to_bytes()? != wb {
            bail!("waveform bytes changed");
        }
        let r = cross_validate(&w, &Detector::Expert(EqualizerKind::LsLinear))?;
        let direct = count_errors(
            &batch.bits,
            &ofdm_core::expert::ExpertReceiver::new(s.ofdm(), EqualizerKind::LsLinear)?
                .receive(&batch.rx, None)?,
            10.0,
        )?;
        if (r.ber - direct.ber).abs() > 0.01 {
            bail!("imported BER {} vs in-process {}", r.ber, direct.ber);
        }
        Ok(())
    });
    ok &= check("layer gradients", || {
        let bad: Vec<String> = layer_suite(7, 1)?
            .iter()
            .filter(|c| !c.passed())
            .map(|c| c.layer.clone())
            .collect();
        if !bad.is_empty() {
            bail!("failed: {}", bad.join(", "));
        }
        Ok(())
    });
    println!("{}", if ok { "selftest passed" } else { "selftest FAILED" });
    Ok(ok)
}
