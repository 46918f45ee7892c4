//! Command-line driver: synthetic data, extraction, training, evaluation,
//! transfer, attention export and DOT visualization.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use scenegraph_core::dataset::{detect_variant, load_dataset, save_dataset, Variant};
use scenegraph_core::extraction::{
    export_dot, extract_dataset, load_scenegraph_dataset, save_scenegraph_dataset,
};
use scenegraph_core::models::ModelConfig;
use scenegraph_core::synth::{generate, SynthConfig};
use scenegraph_core::tasks::{
    cross_validate, evaluate, explain, predict, train_model, transfer_evaluate, transfer_split,
    update_results_json, write_attention_csv, write_metrics_jsonl, LearningConfig, MetricsRecord,
};
use scenegraph_core::autodiff::Checkpoint;
use scenegraph_core::{BevCalibration, Error, ErrorKind, ExtractionConfig, Model, Result};

pub const CHECKPOINT_FILE: &str = "model.ckpt.json";
pub const RESULTS_FILE: &str = "results.json";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const ATTENTION_FILE: &str = "attention.csv";
pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
const CALIBRATION_FILE: &str = "calibration.json";

#[derive(Debug, Parser)]
#[command(name = "scenegraph", version, about = "Road scene-graph extraction and risk learning")]
pub struct Cli {
    /// Log progress at info level.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic state-variant dataset.
    Synth(SynthArgs),
    /// Convert a clip dataset into a scene-graph dataset file.
    Extract(ExtractArgs),
    /// Train a model, optionally cross-validating first.
    Train(TrainArgs),
    /// Score a checkpoint on a scene-graph dataset.
    Evaluate(EvalArgs),
    /// Train on one dataset and evaluate frozen on another.
    Transfer(TransferArgs),
    /// Export node and temporal attention to CSV.
    Explain(ExplainArgs),
    /// Write scene-graphs of one clip as Graphviz DOT.
    Visualize(VisualizeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Synthetic scenario config (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Clip dataset directory.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub extraction_config: Option<PathBuf>,
    /// BEV calibration; image datasets default to `<dataset>/calibration.json`.
    #[arg(long)]
    pub calibration: Option<PathBuf>,
    /// Output scene-graph dataset file.
    #[arg(long)]
    pub out: PathBuf,
}

/// Learning settings shared by the training commands. Flags override the
/// config file.
#[derive(Debug, Clone, Args)]
pub struct LearningArgs {
    /// Learning config (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model config (JSON), replacing the learning config's `model`.
    #[arg(long)]
    pub model_config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Scene-graph dataset file.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Cross-validation folds before the final fit.
    #[arg(long)]
    pub folds: Option<usize>,
    #[command(flatten)]
    pub learning: LearningArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Learning config; only `run_name` is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    /// Source scene-graph dataset.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Target scene-graph dataset. Naming the source again evaluates on the
    /// source's held-out split.
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub learning: LearningArgs,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Restrict the dump to one clip.
    #[arg(long)]
    pub clip: Option<String>,
}

#[derive(Debug, Args)]
pub struct VisualizeArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub clip: String,
    /// Frame index to render.
    #[arg(long, conflicts_with = "all", required_unless_present = "all")]
    pub frame: Option<u64>,
    /// Render every frame into the `--out` directory.
    #[arg(long)]
    pub all: bool,
    /// DOT file, or a directory with `--all`.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn exit_code(e: &Error) -> ExitCode {
    match e.kind() {
        ErrorKind::Config => ExitCode::from(2),
        ErrorKind::Data => ExitCode::from(3),
        ErrorKind::Internal => ExitCode::from(4),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Extract(a) => cmd_extract(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Transfer(a) => cmd_transfer(&a),
        Command::Explain(a) => cmd_explain(&a),
        Command::Visualize(a) => cmd_visualize(&a),
    }
}

/// Config files must exist; a missing one is a configuration error.
fn require_config(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("config file {} not found", path.display())))
    }
}

/// Inputs must exist; a missing one is a data error.
fn require_input(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::NotFound(path.to_path_buf()))
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item)?);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(p) => {
            require_config(p)?;
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str::<SynthConfig>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => SynthConfig::default(),
    };
    let ds = generate(&cfg, a.seed)?;
    if a.out.exists() {
        fs::remove_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    }
    save_dataset(&ds, &a.out)?;
    let risky = ds.clips.iter().filter(|c| c.label == Some(1)).count();
    println!(
        "wrote {} clips ({} risky, {} safe) to {}",
        ds.clips.len(),
        risky,
        ds.clips.len() - risky,
        a.out.display()
    );
    Ok(())
}

pub fn cmd_extract(a: &ExtractArgs) -> Result<()> {
    if let Some(p) = &a.extraction_config {
        require_config(p)?;
    }
    if let Some(p) = &a.calibration {
        require_config(p)?;
    }
    require_input(&a.dataset)?;
    let variant = detect_variant(&a.dataset)?;
    let calibration_path = match (&a.calibration, variant) {
        (Some(p), _) => Some(p.clone()),
        (None, Variant::Image) => {
            let p = a.dataset.join(CALIBRATION_FILE);
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "image dataset needs a BEV calibration: {} not found (pass --calibration)",
                    p.display()
                )));
            }
            Some(p)
        }
        (None, Variant::State) => None,
    };
    let cfg = match &a.extraction_config {
        Some(p) => ExtractionConfig::load(p)?,
        None => ExtractionConfig::default(),
    };
    let calibration = calibration_path.as_deref().map(BevCalibration::load).transpose()?;
    let ds = load_dataset(&a.dataset, variant)?;
    let (sg, warnings) = extract_dataset(&ds, &cfg, calibration.as_ref())?;
    for (clip, w) in &warnings {
        log::warn!("{clip}: {w:?}");
    }
    for clip in &sg.clips {
        let nodes: usize = clip.graphs.iter().map(|g| g.nodes.len()).sum();
        let edges: usize = clip.graphs.iter().map(|g| g.edges.len()).sum();
        println!("{}\tframes={}\tnodes={nodes}\tedges={edges}", clip.clip_id, clip.graphs.len());
    }
    save_scenegraph_dataset(&sg, &a.out)?;
    println!("wrote {} ({} warnings)", a.out.display(), warnings.len());
    Ok(())
}

/// Resolves the learning config from file and flag overrides.
pub fn learning_config(a: &LearningArgs, folds: Option<usize>) -> Result<LearningConfig> {
    for p in [&a.config, &a.model_config].into_iter().flatten() {
        require_config(p)?;
    }
    let mut cfg = match &a.config {
        Some(p) => LearningConfig::load(p)?,
        None => LearningConfig::default(),
    };
    if let Some(p) = &a.model_config {
        cfg.run.model = ModelConfig::load(p)?;
    }
    if let Some(s) = a.seed {
        cfg.run.seed = s;
    }
    if let Some(e) = a.epochs {
        cfg.run.epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.run.learning_rate = lr;
    }
    if let Some(k) = folds {
        cfg.folds = k;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = learning_config(&a.learning, a.folds)?;
    require_input(&a.dataset)?;
    let data = load_scenegraph_dataset(&a.dataset)?;
    create_dir(&a.out)?;
    let run = &cfg.run_name;
    let mut records = Vec::new();
    let mut summary = serde_json::Map::new();
    summary.insert("config".into(), serde_json::to_value(&cfg)?);

    if cfg.folds >= 2 {
        let report = cross_validate(&data, &cfg.run, cfg.folds, true)?;
        for f in &report.folds {
            for e in &f.epochs {
                records.push(MetricsRecord {
                    run: run.clone(),
                    fold: Some(f.fold),
                    epoch: e.epoch,
                    loss: e.loss,
                    train: None,
                    test: e.test.clone(),
                });
            }
            println!(
                "fold {}: accuracy {:.4} auc {} mcc {:.4}",
                f.fold,
                f.test.accuracy,
                fmt_auc(f.test.auc),
                f.test.mcc
            );
        }
        println!(
            "cv mean: accuracy {:.4} auc {} mcc {:.4}",
            report.mean.accuracy,
            fmt_auc(report.mean.auc),
            report.mean.mcc
        );
        summary.insert("cv".into(), serde_json::to_value(&report)?);
    }

    let trained = train_model(&data, &cfg.run, None)?;
    let train_scores = evaluate(&trained.model, &data)?;
    for e in &trained.epochs {
        records.push(MetricsRecord {
            run: run.clone(),
            fold: None,
            epoch: e.epoch,
            loss: e.loss,
            train: None,
            test: None,
        });
    }
    if let Some(last) = records.last_mut() {
        last.train = Some(train_scores.clone());
    }
    println!(
        "final fit: loss {:.6} train accuracy {:.4}",
        trained.epochs.last().map_or(f64::NAN, |e| e.loss),
        train_scores.accuracy
    );
    summary.insert("train".into(), serde_json::to_value(&train_scores)?);
    summary.insert("loss".into(), json!(trained.loss_trace()));

    trained.model.checkpoint()?.save(&a.out.join(CHECKPOINT_FILE))?;
    write_metrics_jsonl(&a.out.join(METRICS_FILE), &records)?;
    update_results_json(&a.out.join(RESULTS_FILE), run, serde_json::Value::Object(summary))?;
    Ok(())
}

fn fmt_auc(auc: Option<f64>) -> String {
    auc.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

fn load_model(path: &Path) -> Result<Model> {
    require_input(path)?;
    Model::from_checkpoint(&Checkpoint::load(path)?)
}

pub fn cmd_evaluate(a: &EvalArgs) -> Result<()> {
    let run_name = match &a.config {
        Some(p) => {
            require_config(p)?;
            LearningConfig::load(p)?.run_name
        }
        None => "evaluate".to_string(),
    };
    require_input(&a.dataset)?;
    let model = load_model(&a.checkpoint)?;
    let data = load_scenegraph_dataset(&a.dataset)?;
    let preds = predict(&model, &data)?;
    let scores = scenegraph_core::tasks::score_predictions(&preds)?;
    create_dir(&a.out)?;
    write_jsonl(&a.out.join(PREDICTIONS_FILE), &preds)?;
    println!(
        "accuracy {:.4} auc {} mcc {:.4} fpr {:.4} fnr {:.4}",
        scores.accuracy,
        fmt_auc(scores.auc),
        scores.mcc,
        scores.fpr,
        scores.fnr
    );
    update_results_json(&a.out.join(RESULTS_FILE), &run_name, serde_json::to_value(&scores)?)
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

pub fn cmd_transfer(a: &TransferArgs) -> Result<()> {
    let cfg = learning_config(&a.learning, None)?;
    require_input(&a.dataset)?;
    require_input(&a.target)?;
    let source = load_scenegraph_dataset(&a.dataset)?;
    let target = if same_file(&a.dataset, &a.target) {
        log::info!("target is the source; evaluating on its held-out split");
        transfer_split(&source, cfg.train_ratio, cfg.run.seed)?.1
    } else {
        load_scenegraph_dataset(&a.target)?
    };
    let (report, trained) = transfer_evaluate(&source, &target, &cfg.run, cfg.train_ratio)?;
    create_dir(&a.out)?;
    trained.model.checkpoint()?.save(&a.out.join(CHECKPOINT_FILE))?;
    println!(
        "source accuracy {:.4} target accuracy {:.4} delta {:.3}",
        report.source.accuracy, report.target.accuracy, report.delta
    );
    update_results_json(&a.out.join(RESULTS_FILE), &cfg.run_name, serde_json::to_value(&report)?)
}

pub fn cmd_explain(a: &ExplainArgs) -> Result<()> {
    require_input(&a.dataset)?;
    let model = load_model(&a.checkpoint)?;
    let mut data = load_scenegraph_dataset(&a.dataset)?;
    if let Some(id) = &a.clip {
        let clip = data
            .clip(id)
            .cloned()
            .ok_or_else(|| Error::Schema(format!("no clip `{id}` in {}", a.dataset.display())))?;
        data = data.with_clips(vec![clip]);
    }
    let dump = explain(&model, &data)?;
    for w in &dump.warnings {
        eprintln!("warning: {w}");
    }
    create_dir(&a.out)?;
    let path = a.out.join(ATTENTION_FILE);
    write_attention_csv(&path, &dump.rows)?;
    println!("wrote {} rows to {}", dump.rows.len(), path.display());
    Ok(())
}

pub fn cmd_visualize(a: &VisualizeArgs) -> Result<()> {
    require_input(&a.dataset)?;
    let data = load_scenegraph_dataset(&a.dataset)?;
    let clip = data
        .clip(&a.clip)
        .ok_or_else(|| Error::Schema(format!("no clip `{}` in {}", a.clip, a.dataset.display())))?;
    if a.all {
        create_dir(&a.out)?;
        for g in &clip.graphs {
            let path = a.out.join(format!("{}_frame_{:04}.dot", clip.clip_id, g.frame_index));
            fs::write(&path, export_dot(g)).map_err(|e| Error::io(&path, e))?;
        }
        println!("wrote {} DOT files to {}", clip.graphs.len(), a.out.display());
        return Ok(());
    }
    let frame = a.frame.unwrap_or_default();
    let g = clip
        .graphs
        .iter()
        .find(|g| g.frame_index == frame)
        .ok_or_else(|| Error::Schema(format!("clip `{}` has no frame {frame}", clip.clip_id)))?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(&a.out, export_dot(g)).map_err(|e| Error::io(&a.out, e))?;
    println!("wrote {}", a.out.display());
    Ok(())
}
