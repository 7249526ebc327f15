//! Thin command-line front end. All logic lives in the library; this binary
//! parses arguments, moves bytes between files and prints summaries.
//!
//! Exit codes: 0 clean, 1 usage error, 2 data error, 3 probe-stage partial
//! failure (the report is still written).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cryptocatch::blacklist::{parse_max_age, BlacklistStore, UpdateMode};
use cryptocatch::eval::{self, ScoredSample, ThresholdPolicyKind};
use cryptocatch::features::{self, FeatureMatrix, FeatureSpec};
use cryptocatch::gbdt::{self, argmax, BoostedEnsemble, Hyperparams, Task};
use cryptocatch::ingest::{self, Label, PacketRecord, RecordFormat};
use cryptocatch::pipeline::{self, PipelineConfig};
use cryptocatch::probe::{self, ProbeConfig, ProbeOutcome, ProtocolVariant};
use cryptocatch::sim::{self, PoolBehavior, SynthProfile};

#[derive(Parser)]
#[command(
    name = "cryptocatch",
    version,
    about = "Two-stage encrypted cryptomining traffic detector",
    long_about = "Classify flow windows with time-series features and a boosted tree model, \
                  then verify suspicious destinations by speaking the mining protocols at them."
)]
struct Cli {
    /// Pipeline configuration JSON (used by `detect`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse packet records and segment them into flow windows.
    Ingest(IngestArgs),
    /// Extract feature vectors from a windows file.
    Features(FeaturesArgs),
    /// Rank features by univariate significance with FDR control.
    Select(SelectArgs),
    /// Train a boosted tree model on a feature matrix.
    Train(TrainArgs),
    /// Score a feature matrix with a trained model.
    Predict(PredictArgs),
    /// Confusion matrix and ROC curve for a score file.
    Evaluate(EvaluateArgs),
    /// Pick a decision threshold from a score file.
    #[command(name = "tune-threshold")]
    TuneThreshold(TuneArgs),
    /// Run the full two-stage pipeline on packet records.
    Detect(DetectArgs),
    /// Actively probe endpoints for mining-pool behavior.
    Probe(ProbeArgs),
    /// Inspect or maintain the blacklist journal.
    Blacklist(BlacklistArgs),
    /// Simulators: pool servers and synthetic traffic.
    Sim(SimArgs),
}

fn parse_format(s: &str) -> Result<RecordFormat, String> {
    RecordFormat::parse(s).ok_or_else(|| format!("unknown format `{s}` (ndjson|csv)"))
}

fn parse_variant(s: &str) -> Result<ProtocolVariant, String> {
    ProtocolVariant::parse(s).ok_or_else(|| format!("unknown variant `{s}` (btc|xmr|eth|webmine)"))
}

fn parse_behavior(s: &str) -> Result<PoolBehavior, String> {
    PoolBehavior::parse(s)
        .ok_or_else(|| format!("unknown behavior `{s}` (success|error|silent|limit:N)"))
}

fn parse_policy(s: &str) -> Result<ThresholdPolicyKind, String> {
    ThresholdPolicyKind::parse(s).ok_or_else(|| format!("unknown policy `{s}` (f1|sensitivity)"))
}

#[derive(Args)]
struct IngestArgs {
    /// Input record files.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long, default_value = "ndjson", value_parser = parse_format)]
    format: RecordFormat,
    #[arg(long, default_value_t = 10)]
    window_size: usize,
    /// Idle seconds after which a flow restarts.
    #[arg(long, default_value_t = 120.0)]
    flow_timeout: f64,
    /// Flow label CSV to attach to windows.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Abort on the first malformed line instead of skipping it.
    #[arg(long)]
    strict: bool,
    /// Output windows file (NDJSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FeaturesArgs {
    /// Windows file from `ingest`.
    windows: Option<PathBuf>,
    /// `default` or a file with one canonical feature name per line.
    #[arg(long, default_value = "default")]
    specs: String,
    /// Print the catalog's canonical names and exit.
    #[arg(long)]
    list_specs: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    matrix: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// Relevance target: mining-vs-benign or one-vs-rest over all labels.
    #[arg(long, default_value = "binary")]
    task: String,
    /// Selected feature names, one per line.
    #[arg(long)]
    out: PathBuf,
    /// Full significance report CSV (feature,p,p_adj,selected).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    matrix: PathBuf,
    #[arg(long, default_value = "binary")]
    task: String,
    /// Hyperparameter JSON; missing fields take the tuned defaults.
    #[arg(long)]
    hp: Option<PathBuf>,
    /// Restrict training to the feature names in this file.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also run stratified cross-validation and print fold metrics.
    #[arg(long)]
    cv: Option<usize>,
}

#[derive(Args)]
struct PredictArgs {
    matrix: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Output scores CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Scores CSV from `predict` (binary, with labels).
    scores: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Confusion matrix output CSV.
    #[arg(long)]
    confusion: Option<PathBuf>,
    /// ROC points output CSV.
    #[arg(long)]
    roc: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    /// Scores CSV from `predict` (binary, with labels).
    scores: PathBuf,
    #[arg(long, default_value = "f1", value_parser = parse_policy)]
    policy: ThresholdPolicyKind,
    /// Keep F1 at or above this fraction of its optimum (sensitivity policy).
    #[arg(long, default_value_t = 0.99)]
    floor: f64,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    /// Write the full sweep table CSV here.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    /// Input record files.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long, default_value = "ndjson", value_parser = parse_format)]
    format: RecordFormat,
    /// Flow label CSV (enables the report's window-level confusion counts).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Detection report JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProbeArgs {
    /// Targets file: one host:port per line.
    #[arg(long)]
    targets: PathBuf,
    /// Probe configuration JSON (timeouts, credentials, parallelism).
    #[arg(long)]
    probe_config: Option<PathBuf>,
    /// Comma-separated variant order.
    #[arg(long, value_delimiter = ',', value_parser = parse_variant)]
    variants: Option<Vec<ProtocolVariant>>,
    /// Verdicts file (NDJSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BlacklistArgs {
    #[command(subcommand)]
    action: BlacklistAction,
}

#[derive(Subcommand)]
enum BlacklistAction {
    /// Print entries with confirmation counts and timestamps.
    Show {
        #[arg(long)]
        journal: PathBuf,
    },
    /// Print the deny list (`host:port` per line).
    Export {
        #[arg(long)]
        journal: PathBuf,
        /// Drop entries whose last confirmation is older than this (30d, 12h, ...).
        #[arg(long)]
        max_age: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rewrite the journal to one line per live entry.
    Compact {
        #[arg(long)]
        journal: PathBuf,
    },
}

#[derive(Args)]
struct SimArgs {
    #[command(subcommand)]
    kind: SimKind,
}

#[derive(Subcommand)]
enum SimKind {
    /// Run an emulated mining pool until interrupted.
    Pool {
        #[arg(long, value_parser = parse_variant)]
        variant: ProtocolVariant,
        #[arg(long, default_value = "success", value_parser = parse_behavior)]
        behavior: PoolBehavior,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 0)]
        port: u16,
        #[arg(long)]
        tls: bool,
    },
    /// Generate a labeled synthetic corpus.
    Traffic {
        /// mining | benign | mixed
        #[arg(long)]
        profile: String,
        /// Coin for a pure mining profile.
        #[arg(long, default_value = "xmr")]
        coin: String,
        #[arg(long)]
        flows: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output records file (NDJSON).
        #[arg(long)]
        out: PathBuf,
        /// Output flow-label CSV.
        #[arg(long)]
        labels: PathBuf,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = i32::from(err.use_stderr());
            let _ = err.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(2);
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Features(args) => cmd_features(args),
        Command::Select(args) => cmd_select(args),
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::TuneThreshold(args) => cmd_tune(args),
        Command::Detect(args) => cmd_detect(cli.config, args),
        Command::Probe(args) => cmd_probe(args),
        Command::Blacklist(args) => cmd_blacklist(args),
        Command::Sim(args) => cmd_sim(args),
    }
}

fn read_all_records(
    files: &[PathBuf],
    format: RecordFormat,
    strict: bool,
) -> Result<(Vec<PacketRecord>, usize)> {
    let mut records = Vec::new();
    let mut skipped = 0;
    for path in files {
        let reader = BufReader::new(File::open(path).with_context(|| path.display().to_string())?);
        let outcome = ingest::parse_records(reader, format, strict)
            .with_context(|| path.display().to_string())?;
        records.extend(outcome.records);
        skipped += outcome.skipped;
    }
    Ok((records, skipped))
}

fn cmd_ingest(args: IngestArgs) -> Result<i32> {
    let (records, skipped) = read_all_records(&args.files, args.format, args.strict)?;
    let mut windows = ingest::segment_flows(&records, args.window_size, args.flow_timeout)?;
    if let Some(path) = &args.labels {
        let labels = ingest::read_labels(BufReader::new(File::open(path)?))?;
        ingest::attach_labels(&mut windows, &labels);
    }
    let mut out = BufWriter::new(File::create(&args.out)?);
    ingest::write_windows(&mut out, &windows)?;
    out.flush()?;
    eprintln!(
        "ingest: {} records ({} skipped) -> {} windows -> {}",
        records.len(),
        skipped,
        windows.len(),
        args.out.display()
    );
    Ok(0)
}

fn load_specs(spec_arg: &str) -> Result<Vec<FeatureSpec>> {
    if spec_arg == "default" {
        Ok(features::default_catalog())
    } else {
        let reader = BufReader::new(File::open(spec_arg).with_context(|| spec_arg.to_string())?);
        Ok(features::read_specs(reader)?)
    }
}

fn cmd_features(args: FeaturesArgs) -> Result<i32> {
    let specs = load_specs(&args.specs)?;
    if args.list_specs {
        let mut stdout = std::io::stdout().lock();
        for spec in &specs {
            writeln!(stdout, "{}", spec.name())?;
        }
        return Ok(0);
    }
    let windows_path = args
        .windows
        .context("missing windows file (or use --list-specs)")?;
    let out_path = args.out.context("missing --out")?;
    let windows = ingest::read_windows(BufReader::new(File::open(&windows_path)?))?;
    let matrix = FeatureMatrix::from_windows(&windows, &specs);
    matrix.write_csv(BufWriter::new(File::create(&out_path)?))?;
    eprintln!(
        "features: {} windows x {} features -> {}",
        matrix.n_rows(),
        matrix.feature_names.len(),
        out_path.display()
    );
    Ok(0)
}

fn matrix_labels(matrix: &FeatureMatrix) -> Result<Vec<Label>> {
    matrix
        .labels
        .iter()
        .enumerate()
        .map(|(i, l)| l.with_context(|| format!("row {i} has no label; a labeled matrix is required")))
        .collect()
}

fn cmd_select(args: SelectArgs) -> Result<i32> {
    let matrix = FeatureMatrix::read_csv(BufReader::new(File::open(&args.matrix)?))?;
    let labels = matrix_labels(&matrix)?;
    let report = match args.task.as_str() {
        "binary" => {
            let binary: Vec<bool> = labels.iter().map(|l| l.is_mining()).collect();
            cryptocatch::select::select_features_binary(&matrix, &binary, args.alpha)?
        }
        "multiclass" => {
            cryptocatch::select::select_features_multiclass(&matrix, &labels, args.alpha)?
        }
        other => bail!("unknown task `{other}` (binary|multiclass)"),
    };
    let selected = report.selected_names();
    let mut out = BufWriter::new(File::create(&args.out)?);
    for name in &selected {
        writeln!(out, "{name}")?;
    }
    out.flush()?;
    if let Some(path) = &args.report {
        report.write_csv(BufWriter::new(File::create(path)?))?;
    }
    eprintln!(
        "select: {} of {} features significant at alpha {} -> {}",
        selected.len(),
        matrix.feature_names.len(),
        args.alpha,
        args.out.display()
    );
    Ok(0)
}

fn binary_labels(labels: &[Label]) -> Vec<usize> {
    labels.iter().map(|l| usize::from(l.is_mining())).collect()
}

fn coin_labels(labels: &[Label]) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| {
            l.coin_index().with_context(|| {
                format!("label `{}` is not a coin; multiclass needs coin labels", l.as_str())
            })
        })
        .collect()
}

fn cmd_train(args: TrainArgs) -> Result<i32> {
    let mut matrix = FeatureMatrix::read_csv(BufReader::new(File::open(&args.matrix)?))?;
    if let Some(path) = &args.features {
        let names: Vec<String> = BufReader::new(File::open(path)?)
            .lines()
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|l| l.trim().to_string())
            .filter(|l| !l.is_empty())
            .collect();
        matrix = matrix.select_columns(&names)?;
    }
    let labels = matrix_labels(&matrix)?;
    let hp: Hyperparams = match &args.hp {
        Some(path) => serde_json::from_reader(BufReader::new(File::open(path)?))?,
        None => Hyperparams::default(),
    };
    let (task, class_labels, class_names) = match args.task.as_str() {
        "binary" => (Task::Binary, binary_labels(&labels), Vec::new()),
        "multiclass" => (
            Task::Multiclass { classes: Label::COINS.len() },
            coin_labels(&labels)?,
            Label::COINS.iter().map(|c| c.as_str().to_string()).collect(),
        ),
        other => bail!("unknown task `{other}` (binary|multiclass)"),
    };

    if let Some(folds) = args.cv {
        let report = gbdt::cross_validate(
            &matrix.feature_names,
            &matrix.rows,
            &class_labels,
            &hp,
            task,
            folds,
            hp.seed,
        )?;
        println!("{}", serde_json::to_string_pretty(&report)?);
    }

    let (mut model, trace) =
        gbdt::train_traced(&matrix.feature_names, &matrix.rows, &class_labels, &hp, task)?;
    model.class_names = class_names;
    model.save_json(BufWriter::new(File::create(&args.out)?))?;
    eprintln!(
        "train: {} rows, {} rounds, final training loss {:.6} -> {}",
        matrix.n_rows(),
        model.trees.len(),
        trace.train_loss.last().copied().unwrap_or(f64::NAN),
        args.out.display()
    );
    Ok(0)
}

fn cmd_predict(args: PredictArgs) -> Result<i32> {
    let matrix = FeatureMatrix::read_csv(BufReader::new(File::open(&args.matrix)?))?;
    let model = BoostedEnsemble::load_json(BufReader::new(File::open(&args.model)?))?;
    let probabilities = model.predict_matrix(&matrix)?;
    let mut out = BufWriter::new(File::create(&args.out)?);
    match model.task {
        Task::Binary => {
            writeln!(out, "window_id,label,score,decision")?;
            for (i, probs) in probabilities.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{}",
                    matrix.window_ids[i],
                    matrix.labels[i].map(|l| l.as_str()).unwrap_or(""),
                    probs[0],
                    u8::from(probs[0] > 0.5)
                )?;
            }
        }
        Task::Multiclass { .. } => {
            let names = if model.class_names.is_empty() {
                (0..probabilities[0].len())
                    .map(|i| format!("class{i}"))
                    .collect::<Vec<_>>()
            } else {
                model.class_names.clone()
            };
            let headers: Vec<String> = names.iter().map(|n| format!("p_{n}")).collect();
            writeln!(out, "window_id,label,{},predicted", headers.join(","))?;
            for (i, probs) in probabilities.iter().enumerate() {
                let cells: Vec<String> = probs.iter().map(|p| p.to_string()).collect();
                writeln!(
                    out,
                    "{},{},{},{}",
                    matrix.window_ids[i],
                    matrix.labels[i].map(|l| l.as_str()).unwrap_or(""),
                    cells.join(","),
                    names[argmax(probs)]
                )?;
            }
        }
    }
    out.flush()?;
    eprintln!("predict: {} rows -> {}", matrix.n_rows(), args.out.display());
    Ok(0)
}

/// Read `window_id,label,score,...` rows into scored samples.
fn read_scores(path: &PathBuf) -> Result<Vec<ScoredSample>> {
    let reader = BufReader::new(File::open(path)?);
    let mut samples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if idx == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            bail!("scores line {} is malformed", idx + 1);
        }
        let label = Label::parse(fields[1])
            .with_context(|| format!("scores line {} has no usable label", idx + 1))?;
        samples.push(ScoredSample {
            score: fields[2]
                .parse()
                .with_context(|| format!("bad score on line {}", idx + 1))?,
            truth: label.is_mining(),
        });
    }
    Ok(samples)
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<i32> {
    let samples = read_scores(&args.scores)?;
    let metrics = eval::confusion_and_prf(&samples, args.threshold)?;
    let curve = eval::roc_auc(&samples)?;
    if let Some(path) = &args.confusion {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "tp,fp,fn,tn,precision,recall,f1")?;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            metrics.tp,
            metrics.fp,
            metrics.fn_,
            metrics.tn,
            metrics.precision,
            metrics.recall,
            metrics.f1
        )?;
    }
    if let Some(path) = &args.roc {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "threshold,fpr,tpr")?;
        for point in &curve.points {
            writeln!(out, "{},{},{}", point.threshold, point.fpr, point.tpr)?;
        }
    }
    println!(
        "{}",
        serde_json::json!({
            "threshold": args.threshold,
            "precision": metrics.precision,
            "recall": metrics.recall,
            "f1": metrics.f1,
            "auc": curve.auc,
        })
    );
    Ok(0)
}

fn cmd_tune(args: TuneArgs) -> Result<i32> {
    let samples = read_scores(&args.scores)?;
    let table = eval::sweep_thresholds(&samples, args.step)?;
    if let Some(path) = &args.table {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "threshold,precision,recall,f1")?;
        for row in &table {
            writeln!(out, "{},{},{},{}", row.threshold, row.precision, row.recall, row.f1)?;
        }
    }
    let picked = eval::pick_threshold(&table, args.policy, args.floor)?;
    println!("{}", serde_json::to_string_pretty(&picked)?);
    Ok(0)
}

fn cmd_detect(config_path: Option<PathBuf>, args: DetectArgs) -> Result<i32> {
    let config_path = config_path.context("detect needs --config <pipeline.json>")?;
    let config = PipelineConfig::from_json_file(&config_path)?;
    let (records, skipped) = read_all_records(&args.files, args.format, false)?;
    if skipped > 0 {
        eprintln!("detect: skipped {skipped} malformed lines");
    }

    let model = BoostedEnsemble::load_json(BufReader::new(File::open(&config.model_path)?))?;
    let mut store = BlacklistStore::open(&config.journal_path, config.update_mode)?;
    let mut windows =
        ingest::segment_flows(&records, config.window_size, config.flow_timeout_secs)?;
    if let Some(path) = &args.labels {
        let labels = ingest::read_labels(BufReader::new(File::open(path)?))?;
        ingest::attach_labels(&mut windows, &labels);
    }
    let report = pipeline::detect_windows(&windows, &model, &mut store, &config)?;

    serde_json::to_writer_pretty(BufWriter::new(File::create(&args.out)?), &report)?;
    eprintln!(
        "detect: {} windows, {} positive, {} suspicious endpoints, {} confirmed ({} via blacklist) -> {}",
        report.windows,
        report.positive_windows,
        report.suspicious.len(),
        report.confirmed.len(),
        report.skipped_blacklisted,
        args.out.display()
    );
    Ok(if report.persist_failures > 0 { 3 } else { 0 })
}

fn cmd_probe(args: ProbeArgs) -> Result<i32> {
    let targets = probe::read_targets(BufReader::new(File::open(&args.targets)?))?;
    let config: ProbeConfig = match &args.probe_config {
        Some(path) => serde_json::from_reader(BufReader::new(File::open(path)?))?,
        None => ProbeConfig::default(),
    };
    let variants = args.variants.unwrap_or_else(|| ProtocolVariant::ALL.to_vec());
    let verdicts = probe::probe_batch(&targets, &variants, &config);
    let mut out = BufWriter::new(File::create(&args.out)?);
    probe::write_verdicts(&mut out, &verdicts)?;
    out.flush()?;
    let positive = verdicts
        .iter()
        .filter(|v| v.outcome == ProbeOutcome::PoolPositive)
        .count();
    eprintln!(
        "probe: {} targets, {} pool-positive -> {}",
        targets.len(),
        positive,
        args.out.display()
    );
    Ok(0)
}

fn cmd_blacklist(args: BlacklistArgs) -> Result<i32> {
    match args.action {
        BlacklistAction::Show { journal } => {
            let store = BlacklistStore::open(&journal, UpdateMode::Realtime)?;
            for entry in store.entries() {
                println!(
                    "{}:{}\t{}\tconfirms={}\tfirst={}\tlast={}",
                    entry.host,
                    entry.port,
                    entry.variant,
                    entry.confirm_count,
                    entry.first_seen.to_rfc3339(),
                    entry.last_confirmed.to_rfc3339()
                );
            }
            Ok(0)
        }
        BlacklistAction::Export { journal, max_age, out } => {
            let store = BlacklistStore::open(&journal, UpdateMode::Realtime)?;
            let age = match max_age {
                Some(text) => {
                    Some(parse_max_age(&text).with_context(|| format!("bad --max-age `{text}`"))?)
                }
                None => None,
            };
            let text = store.export(chrono::Utc::now(), age);
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(0)
        }
        BlacklistAction::Compact { journal } => {
            let mut store = BlacklistStore::open(&journal, UpdateMode::Realtime)?;
            store.compact()?;
            eprintln!("compact: {} live entries -> {}", store.len(), journal.display());
            Ok(0)
        }
    }
}

fn cmd_sim(args: SimArgs) -> Result<i32> {
    match args.kind {
        SimKind::Pool { variant, behavior, host, port, tls } => {
            let server = sim::serve_pool(variant, behavior, &format!("{host}:{port}"), tls)?;
            println!("{}", server.addr());
            std::io::stdout().flush()?;
            loop {
                std::thread::sleep(std::time::Duration::from_secs(3600));
            }
        }
        SimKind::Traffic { profile, coin, flows, seed, out, labels } => {
            let (records, flow_labels) = match profile.as_str() {
                "mining" => {
                    let coin = Label::parse(&coin)
                        .filter(|c| c.coin_index().is_some())
                        .with_context(|| format!("`{coin}` is not a coin"))?;
                    sim::synthesize(&SynthProfile::mining(coin, seed), flows)
                }
                "benign" => sim::synthesize(&SynthProfile::benign(seed), flows),
                "mixed" => {
                    // Half benign, the rest spread across the seven coins.
                    let mut records = Vec::new();
                    let mut flow_labels = Vec::new();
                    let benign = flows / 2;
                    let (r, l) = sim::synthesize(&SynthProfile::benign(seed), benign);
                    records.extend(r);
                    flow_labels.extend(l);
                    let per_coin = (flows - benign) / Label::COINS.len();
                    for (i, &coin) in Label::COINS.iter().enumerate() {
                        let (r, l) = sim::synthesize(
                            &SynthProfile::mining(coin, seed.wrapping_add(1 + i as u64)),
                            per_coin,
                        );
                        records.extend(r);
                        flow_labels.extend(l);
                    }
                    records.sort_by(|a, b| a.ts.total_cmp(&b.ts));
                    (records, flow_labels)
                }
                other => bail!("unknown profile `{other}` (mining|benign|mixed)"),
            };
            let mut out_file = BufWriter::new(File::create(&out)?);
            sim::traffic::write_records(&mut out_file, &records)?;
            out_file.flush()?;
            ingest::write_labels(BufWriter::new(File::create(&labels)?), &flow_labels)?;
            eprintln!(
                "sim traffic: {} flows, {} records -> {} (+ labels {})",
                flow_labels.len(),
                records.len(),
                out.display(),
                labels.display()
            );
            Ok(0)
        }
    }
}
