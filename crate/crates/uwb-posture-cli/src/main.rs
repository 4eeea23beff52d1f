//! Command-line front end: dataset synthesis, training, evaluation, batch
//! prediction, live stream monitoring, and feature-schema export.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (unreadable or invalid
//! input), 3 model error (training, loading, or layout problems). Help and
//! version requests exit 0. All randomness flows from `--seed` flags; no
//! environment variables are consulted.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uwb_posture::boost::io::{load_model, save_model, ModelIoError};
use uwb_posture::boost::{GbdtConfig, PredictError, TrainError};
use uwb_posture::data::{
    load_dataset, parse_frame_line, save_dataset, stratified_split, DataError, Dataset,
    PostureLabel, Sample, SampleLabel, SCHEMA_VERSION,
};
use uwb_posture::eval::{
    compare_temporal, compute_metrics, confusion_csv, sweep_window, write_split_reports,
    write_sweep_csv, EvalError, TRAIN_FRACTION,
};
use uwb_posture::features::{
    assemble_windowed, layout_hash, windowed_feature_names, FeatureError, BASE_FEATURE_COUNT,
};
use uwb_posture::ood::OodError;
use uwb_posture::pipeline::{assess_frames, fit_pipeline, OodParams, PipelineError};
use uwb_posture::stream::{MonitorConfig, StreamError, StreamMonitor};
use uwb_posture::synth::{
    synth_dataset, synth_ood_session, ScenarioPerturbation, SimulatorConfig, SimulatorError,
};

#[derive(Parser)]
#[command(name = "uwb-posture", version, about = "UWB sitting-posture sensing pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (or a continuous session stream)
    Simulate(SimulateArgs),
    /// Train a classifier and its out-of-distribution detector
    Train(TrainArgs),
    /// Evaluate a model, compare window sizes, or run the window sweep
    Evaluate(EvaluateArgs),
    /// Batch per-frame predictions for every sample in a dataset
    Predict(PredictArgs),
    /// Monitor a live frame stream with OOD gating and alerting
    Stream(StreamArgs),
    /// Print the windowed feature layout and its hash
    ExportSchema(ExportSchemaArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Output file (JSONL)
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    subjects: usize,
    #[arg(long, default_value_t = 9)]
    samples_per_class: usize,
    /// Frames per sample
    #[arg(long, default_value_t = 100)]
    frames: usize,
    /// Write one continuous session instead of a dataset:
    /// comma-separated label:seconds segments, e.g. "hunch:10,upright:5".
    /// Truth labels go to stderr; the file carries only frames.
    #[arg(long)]
    session: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    obstacle_attenuation_db: f64,
    #[arg(long, default_value_t = 0.0)]
    interference_level: f64,
    #[arg(long, default_value_t = 0.0)]
    clothing_attenuation_db: f64,
    #[arg(long, default_value_t = 0.0)]
    antenna_height_offset_cm: f64,
    #[arg(long, default_value_t = 0.0)]
    antenna_separation_cm: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_floor_scale: f64,
}

#[derive(Args)]
struct TrainArgs {
    /// Training dataset (JSONL)
    #[arg(long)]
    data: PathBuf,
    /// Model output file
    #[arg(long)]
    model_out: PathBuf,
    /// Training report output (JSON); defaults next to the model
    #[arg(long)]
    report_out: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    tau: usize,
    #[arg(long, default_value_t = 64)]
    num_leaves: usize,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.9)]
    feature_fraction: f64,
    #[arg(long, default_value_t = 1000)]
    max_rounds: usize,
    /// Early-stopping patience in rounds
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long, default_value_t = 20)]
    min_samples_leaf: usize,
    #[arg(long, default_value_t = 1e-3)]
    l2_lambda: f64,
    #[arg(long, default_value_t = 256)]
    histogram_bins: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Skip the out-of-distribution detector
    #[arg(long)]
    no_ood: bool,
    /// Detector training-outlier bound
    #[arg(long, default_value_t = 0.05)]
    nu: f64,
    /// Detector kernel sharpness
    #[arg(long, default_value_t = 4.0)]
    gamma: f64,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Dataset to evaluate on (JSONL)
    #[arg(long)]
    data: PathBuf,
    /// Trained model file; required unless --compare-tau or --sweep
    #[arg(long)]
    model: Option<PathBuf>,
    /// Window size for feature assembly; defaults to the model's
    #[arg(long)]
    tau: Option<usize>,
    /// Directory for report files
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Train and compare two window sizes, e.g. "1,5"
    #[arg(long, value_name = "TAU_A,TAU_B")]
    compare_tau: Option<String>,
    /// Train across a window-size sweep, e.g. "1,3,5,7,9"
    #[arg(long, value_name = "TAUS")]
    sweep: Option<String>,
    /// Split and trainer seed for --compare-tau and --sweep
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Write per-frame JSONL here instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StreamArgs {
    #[arg(long)]
    model: PathBuf,
    /// Frame stream: a file path, or "-" for standard input
    #[arg(long, default_value = "-")]
    input: String,
    /// Timeline output file (JSONL); standard output when omitted
    #[arg(long)]
    timeline: Option<PathBuf>,
    /// Consecutive unhealthy seconds before an alert
    #[arg(long, default_value_t = 30.0)]
    alert_after_s: f64,
    /// Comma-separated unhealthy posture names; defaults to the built-in set
    #[arg(long)]
    unhealthy: Option<String>,
    /// Lines equal to this marker acknowledge the active alert
    #[arg(long)]
    ack_marker: Option<String>,
}

#[derive(Args)]
struct ExportSchemaArgs {
    #[arg(long, default_value_t = 5)]
    tau: usize,
    /// Output file; standard output when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Error wrapper carrying the process exit code.
enum CliError {
    Usage(String),
    Data(String),
    Model(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Model(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Model(m) => m,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SimulatorError> for CliError {
    fn from(e: SimulatorError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        CliError::Model(e.to_string())
    }
}

impl From<PredictError> for CliError {
    fn from(e: PredictError) -> Self {
        match e {
            PredictError::LayoutMismatch { .. } => CliError::Model(format!(
                "{e}; retrain the model at this window size or re-windowize the data \
                 (see export-schema for the expected layout)"
            )),
            other => CliError::Model(other.to_string()),
        }
    }
}

impl From<OodError> for CliError {
    fn from(e: OodError) -> Self {
        CliError::Model(e.to_string())
    }
}

impl From<ModelIoError> for CliError {
    fn from(e: ModelIoError) -> Self {
        CliError::Model(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Feature(inner) => inner.into(),
            PipelineError::Train(inner) => inner.into(),
            PipelineError::Predict(inner) => inner.into(),
            PipelineError::Ood(inner) => inner.into(),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Train(inner) => inner.into(),
            EvalError::Predict(inner) => inner.into(),
            EvalError::Feature(inner) => inner.into(),
            EvalError::Data(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<StreamError> for CliError {
    fn from(e: StreamError) -> Self {
        match e {
            StreamError::Feature(inner) => inner.into(),
            StreamError::Predict(inner) => inner.into(),
            StreamError::Ood(inner) => inner.into(),
            StreamError::InvalidAlertThreshold(_) => CliError::Usage(e.to_string()),
            StreamError::NonMonotonicTimestamp { .. } => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Stream(args) => cmd_stream(args),
        Command::ExportSchema(args) => cmd_export_schema(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn simulator_config(args: &SimulateArgs) -> SimulatorConfig {
    SimulatorConfig {
        seed: args.seed,
        subjects: args.subjects,
        samples_per_class: args.samples_per_class,
        frames_per_sample: args.frames,
        perturbation: ScenarioPerturbation {
            obstacle_attenuation_db: args.obstacle_attenuation_db,
            interference_level: args.interference_level,
            clothing_attenuation_db: args.clothing_attenuation_db,
            antenna_height_offset_cm: args.antenna_height_offset_cm,
            antenna_separation_cm: args.antenna_separation_cm,
            noise_floor_scale: args.noise_floor_scale,
        },
        ..SimulatorConfig::default()
    }
}

/// Parses "hunch:10,upright:5" into session segments.
fn parse_session_spec(spec: &str) -> Result<Vec<(SampleLabel, f64)>, CliError> {
    let mut segments = Vec::new();
    for part in spec.split(',') {
        let (name, seconds) = part
            .split_once(':')
            .ok_or_else(|| CliError::Usage(format!("segment '{part}' is not label:seconds")))?;
        let label = SampleLabel::from_name(name.trim())
            .ok_or_else(|| CliError::Usage(format!("unknown posture '{}'", name.trim())))?;
        let duration: f64 = seconds
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad duration in '{part}'")))?;
        segments.push((label, duration));
    }
    if segments.is_empty() {
        return Err(CliError::Usage("session spec is empty".into()));
    }
    Ok(segments)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let config = simulator_config(&args);
    if let Some(spec) = &args.session {
        let segments = parse_session_spec(spec)?;
        let session = synth_ood_session(&config, &segments)?;
        // Stream input reuses the dataset line format with the truth kept
        // out of band: a single unknown-labelled sample, segment labels on
        // standard error.
        let sample = Sample {
            sample_id: "session".into(),
            subject_id: "session".into(),
            label: SampleLabel::Unknown,
            scenario_tags: Vec::new(),
            frames: session.iter().map(|sf| sf.frame.clone()).collect(),
        };
        let n_frames = sample.frames.len();
        let wrapper = Dataset {
            schema_version: SCHEMA_VERSION,
            n_taps: config.n_taps,
            samples: vec![sample],
        };
        save_dataset(&wrapper, &args.out)?;
        for (i, sf) in session.iter().enumerate() {
            eprintln!(
                "truth frame {i} t={:.1}s segment {} {}",
                sf.frame.timestamp_s,
                sf.segment,
                sf.truth.name()
            );
        }
        println!(
            "wrote session of {n_frames} frames ({} segments) to {}",
            segments.len(),
            args.out.display()
        );
        return Ok(());
    }
    let dataset = synth_dataset(&config)?;
    save_dataset(&dataset, &args.out)?;
    println!(
        "wrote {} samples / {} frames to {}",
        dataset.samples.len(),
        dataset.n_frames(),
        args.out.display()
    );
    Ok(())
}

fn gbdt_config(args: &TrainArgs) -> GbdtConfig {
    GbdtConfig {
        num_leaves: args.num_leaves,
        learning_rate: args.learning_rate,
        feature_fraction: args.feature_fraction,
        max_rounds: args.max_rounds,
        early_stop_patience: args.patience,
        min_samples_leaf: args.min_samples_leaf,
        l2_lambda: args.l2_lambda,
        histogram_bins: args.histogram_bins,
        seed: args.seed,
    }
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let dataset = load_dataset(&args.data)?;
    let (train_set, test_set) = stratified_split(&dataset, TRAIN_FRACTION, args.seed)?;
    let config = gbdt_config(&args);
    let ood_params = OodParams {
        nu: args.nu,
        gamma: args.gamma,
        ..OodParams::default()
    };
    let ood = (!args.no_ood).then_some(&ood_params);
    let (model, report) = fit_pipeline(&train_set, args.tau, &config, ood)?;
    save_model(&model, &args.model_out)?;

    // Closed-set test metrics; skipped when the test partition has no
    // known-labelled samples.
    let test_metrics = match assemble_windowed(&test_set.samples, args.tau) {
        Ok((matrix, labels, _)) => {
            let predicted = model.predict_label(&matrix)?;
            let (_, metrics) = compute_metrics(&labels, &predicted, PostureLabel::COUNT)?;
            println!(
                "test weighted F1 {:.4}, accuracy {:.4} ({} train rows, {} rounds)",
                metrics.weighted_f1,
                metrics.accuracy,
                report.n_train_rows,
                report.stopped_round
            );
            Some(metrics)
        }
        Err(FeatureError::EmptySequence) => {
            println!(
                "trained on {} rows, {} rounds; no known-labelled test samples",
                report.n_train_rows, report.stopped_round
            );
            None
        }
        Err(e) => return Err(e.into()),
    };

    let report_path = args
        .report_out
        .unwrap_or_else(|| args.model_out.with_extension("report.json"));
    let body = serde_json::json!({
        "tau": args.tau,
        "seed": args.seed,
        "train": report,
        "test": test_metrics,
    });
    std::fs::write(&report_path, format!("{:#}\n", body))?;
    println!(
        "model written to {}, report to {}",
        args.model_out.display(),
        report_path.display()
    );
    Ok(())
}

fn parse_tau_list(spec: &str) -> Result<Vec<usize>, CliError> {
    let taus: Result<Vec<usize>, _> = spec.split(',').map(|s| s.trim().parse()).collect();
    let taus = taus.map_err(|_| CliError::Usage(format!("bad window-size list '{spec}'")))?;
    if taus.is_empty() || taus.contains(&0) {
        return Err(CliError::Usage(format!("bad window-size list '{spec}'")));
    }
    Ok(taus)
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let dataset = load_dataset(&args.data)?;

    if let Some(spec) = &args.compare_tau {
        let taus = parse_tau_list(spec)?;
        if taus.len() != 2 {
            return Err(CliError::Usage(
                "--compare-tau needs exactly two window sizes".into(),
            ));
        }
        let config = GbdtConfig {
            seed: args.seed,
            ..GbdtConfig::default()
        };
        let cmp = compare_temporal(&dataset, taus[0], taus[1], &config, args.seed)?;
        println!(
            "tau={}: weighted F1 {:.4}  |  tau={}: weighted F1 {:.4}  (delta {:+.4})",
            cmp.baseline.tau,
            cmp.baseline.metrics.weighted_f1,
            cmp.ours.tau,
            cmp.ours.metrics.weighted_f1,
            cmp.ours.metrics.weighted_f1 - cmp.baseline.metrics.weighted_f1
        );
        println!(
            "static classes mean F1 delta {:+.4}, dynamic {:+.4}",
            cmp.mean_static_f1_delta, cmp.mean_dynamic_f1_delta
        );
        for eval in [&cmp.baseline, &cmp.ours] {
            let paths = write_split_reports(&args.out_dir, args.seed, eval)?;
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        return Ok(());
    }

    if let Some(spec) = &args.sweep {
        let taus = parse_tau_list(spec)?;
        let config = GbdtConfig {
            seed: args.seed,
            ..GbdtConfig::default()
        };
        let sweep = sweep_window(&dataset, &taus, &config, args.seed)?;
        for row in &sweep.rows {
            println!(
                "tau={}  accuracy {:.4}  weighted F1 {:.4}  ({} rounds)",
                row.tau, row.metrics.accuracy, row.metrics.weighted_f1, row.rounds
            );
        }
        let path = write_sweep_csv(&args.out_dir, &sweep)?;
        println!("wrote {}", path.display());
        return Ok(());
    }

    let model_path = args.model.ok_or_else(|| {
        CliError::Usage("--model is required unless --compare-tau or --sweep is given".into())
    })?;
    let model = load_model(&model_path)?;
    let tau = args.tau.unwrap_or(model.tau);
    let (matrix, labels, _) = assemble_windowed(&dataset.samples, tau)?;
    let predicted = model.predict_label(&matrix)?;
    let (confusion, metrics) = compute_metrics(&labels, &predicted, PostureLabel::COUNT)?;
    println!(
        "accuracy {:.4}  macro F1 {:.4}  weighted F1 {:.4} over {} frames",
        metrics.accuracy,
        metrics.macro_f1,
        metrics.weighted_f1,
        labels.len()
    );
    std::fs::create_dir_all(&args.out_dir)?;
    let confusion_path = args.out_dir.join(format!("confusion_tau{tau}.csv"));
    std::fs::write(&confusion_path, confusion_csv(&confusion))?;
    let metrics_path = args.out_dir.join(format!("metrics_tau{tau}.json"));
    let metrics_json =
        serde_json::to_string_pretty(&metrics).expect("metrics serialization cannot fail");
    std::fs::write(&metrics_path, metrics_json + "\n")?;
    println!(
        "wrote {} and {}",
        confusion_path.display(),
        metrics_path.display()
    );
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let dataset = load_dataset(&args.data)?;
    let stdout = std::io::stdout();
    let mut sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(stdout.lock()),
    };
    let mut lines = 0usize;
    for sample in &dataset.samples {
        let verdicts = assess_frames(&model, &sample.frames)?;
        for (i, v) in verdicts.iter().enumerate() {
            let name = PostureLabel::from_id(v.label).map_or("unknown", PostureLabel::name);
            let line = serde_json::json!({
                "sample_id": sample.sample_id,
                "frame": i,
                "timestamp_s": sample.frames[i].timestamp_s,
                "label": name,
                "probability": v.probability,
                "ood_decision": v.ood_decision,
                "is_ood": v.is_ood,
            });
            writeln!(sink, "{line}")?;
            lines += 1;
        }
    }
    sink.flush()?;
    if let Some(path) = &args.out {
        println!(
            "wrote {lines} predictions for {} samples to {}",
            dataset.samples.len(),
            path.display()
        );
    }
    Ok(())
}

fn monitor_config(args: &StreamArgs) -> Result<MonitorConfig, CliError> {
    let mut config = MonitorConfig {
        alert_after_s: args.alert_after_s,
        ..MonitorConfig::default()
    };
    if let Some(spec) = &args.unhealthy {
        let mut set = Vec::new();
        for name in spec.split(',') {
            let label = PostureLabel::from_name(name.trim())
                .ok_or_else(|| CliError::Usage(format!("unknown posture '{}'", name.trim())))?;
            set.push(label);
        }
        config.unhealthy = set;
    }
    Ok(config)
}

/// True when the line is the stream header; errors when it is a header with
/// the wrong schema version (the one unrecoverable stream condition).
fn check_header(line: &str) -> Result<bool, CliError> {
    let Ok(value) = serde_json::from_str::<serde_json::Value>(line) else {
        return Ok(false);
    };
    let Some(version) = value.get("schema_version").and_then(|v| v.as_u64()) else {
        return Ok(false);
    };
    if version != u64::from(SCHEMA_VERSION) {
        return Err(CliError::Data(format!(
            "stream header has schema_version {version}, this build reads {SCHEMA_VERSION}"
        )));
    }
    Ok(true)
}

fn cmd_stream(args: StreamArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let config = monitor_config(&args)?;
    let mut monitor = StreamMonitor::new(&model, &config)?;

    let stdin = std::io::stdin();
    let reader: Box<dyn BufRead> = if args.input == "-" {
        Box::new(stdin.lock())
    } else {
        Box::new(BufReader::new(File::open(&args.input)?))
    };
    let stdout = std::io::stdout();
    let mut timeline: Box<dyn Write> = match &args.timeline {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(stdout.lock()),
    };
    let live = args.timeline.is_some();

    let mut frames = 0usize;
    let mut skipped = 0usize;
    let mut alert_frames = 0usize;
    let mut alert_on = false;
    for (idx, line) in reader.lines().enumerate() {
        let number = idx + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                eprintln!("line {number} unreadable, stopping: {e}");
                break;
            }
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(marker) = &args.ack_marker {
            if trimmed == marker {
                println!(
                    "alert {} at line {number}",
                    if alert_on { "acknowledged" } else { "acknowledgment ignored (no alert)" }
                );
                continue;
            }
        }
        if frames == 0 && skipped == 0 && check_header(trimmed)? {
            continue;
        }
        let record = match parse_frame_line(trimmed, number) {
            Ok(r) => r,
            Err(e) => {
                skipped += 1;
                eprintln!("line {number} skipped: {e}");
                continue;
            }
        };
        let outcome = match monitor.push_frame(&record.frame) {
            Ok(o) => o,
            Err(e @ StreamError::NonMonotonicTimestamp { .. }) => {
                skipped += 1;
                eprintln!("line {number} skipped: {e}");
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        frames += 1;
        alert_on = outcome.alert_active;
        if outcome.alert_active {
            alert_frames += 1;
        }
        let entry = serde_json::json!({
            "timestamp_s": outcome.timestamp_s,
            "predicted": outcome.predicted.name(),
            "is_ood": outcome.is_ood,
            "raw_is_ood": outcome.raw_is_ood,
            "decision_value": outcome.decision_value,
            "alert_active": outcome.alert_active,
        });
        writeln!(timeline, "{entry}")?;
        if live {
            println!(
                "t={:>8.1}s  {:<22} ood={} alert={}",
                outcome.timestamp_s,
                outcome.predicted.name(),
                outcome.is_ood,
                outcome.alert_active
            );
        }
    }
    timeline.flush()?;
    eprintln!(
        "stream done: {frames} frames, {skipped} skipped, {alert_frames} alert-active frames"
    );
    Ok(())
}

fn cmd_export_schema(args: ExportSchemaArgs) -> Result<(), CliError> {
    if args.tau == 0 {
        return Err(CliError::Usage("--tau must be at least 1".into()));
    }
    let names = windowed_feature_names(args.tau);
    let body = serde_json::json!({
        "tau": args.tau,
        "layout_hash": format!("{:#018x}", layout_hash(args.tau)),
        "base_feature_count": BASE_FEATURE_COUNT,
        "windowed_feature_count": names.len(),
        "features": names,
    });
    let text = format!("{:#}\n", body);
    match &args.out {
        Some(path) => {
            std::fs::write(path, text)?;
            println!("wrote schema for tau={} to {}", args.tau, path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}
