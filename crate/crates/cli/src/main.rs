use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use zsl_core::cko::{ClassRecord, EmbeddingTable};
use zsl_core::config::RunConfig;
use zsl_core::data::{
    config_hash, make_synthetic, save_features, write_file, Checkpoint, LabeledMatrix, SyntheticSpec, ZslDataset,
    CHECKPOINT_VERSION,
};
use zsl_core::pipeline::{self, EvalSettings};
use zsl_core::ssl::IterationReport;
use zsl_core::text::StopWords;
use zsl_core::verify::gradient_suite;

#[derive(Parser)]
#[command(name = "zsl", version, about = "Zero-shot classification from class articles")]
struct Cli {
    /// Suppress progress output.
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override one value, e.g. `--set gan.margin=0.2`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        Ok(RunConfig::load(self.config.as_deref(), &self.overrides)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Class similarity, overlaid articles and semantic vectors.
    Cko(ConfigArgs),
    /// Train the feature generator with semi-supervised rounds.
    Train(ConfigArgs),
    /// Score a checkpoint: unseen top-1, GZSL, calibration curve, retrieval.
    Evaluate(ConfigArgs),
    /// Retrieval precision of a checkpoint only.
    Retrieve(ConfigArgs),
    /// Write a synthetic dataset.
    Synth(SynthArgs),
    /// Check every analytic gradient against finite differences.
    GradCheck(GradCheckArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 10)]
    num_seen: usize,
    #[arg(long, default_value_t = 5)]
    num_unseen: usize,
    #[arg(long, default_value_t = 60)]
    samples_per_class: usize,
    #[arg(long, default_value_t = 50)]
    semantic_dim: usize,
    #[arg(long, default_value_t = 64)]
    visual_dim: usize,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    map_scale: f64,
    #[arg(long, default_value_t = 0.2)]
    density: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write features in the binary format.
    #[arg(long)]
    binary: bool,
    #[arg(long, default_value = "synthetic")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GradCheckArgs {
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet {
        log::LevelFilter::Warn
    } else {
        log::LevelFilter::Info
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("ZSL_LOG")
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Cko(a) => cmd_cko(&a.load()?),
        Command::Train(a) => cmd_train(&a.load()?),
        Command::Evaluate(a) => cmd_evaluate(&a.load()?),
        Command::Retrieve(a) => cmd_retrieve(&a.load()?),
        Command::Synth(a) => cmd_synth(&a),
        Command::GradCheck(a) => cmd_grad_check(&a),
    }
}

/// Files of the corpus directory in name order. Class `i` is the `i`-th file.
fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading corpus {}", dir.display()))? {
        let path = entry?.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        bail!("corpus {} has no files", dir.display());
    }
    Ok(files)
}

fn read_names(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn cmd_cko(cfg: &RunConfig) -> Result<()> {
    let corpus = cfg.io.require(&cfg.io.corpus, "corpus")?;
    let table = EmbeddingTable::load(cfg.io.require(&cfg.io.embeddings, "embeddings")?)?;
    let stopwords = match &cfg.text.stopwords {
        Some(p) => StopWords::load(p)?,
        None => StopWords::english(),
    };
    let files = corpus_files(corpus)?;
    let names = match &cfg.io.class_names {
        Some(p) => read_names(p)?,
        None => files
            .iter()
            .map(|f| f.file_stem().unwrap_or_default().to_string_lossy().replace('_', " "))
            .collect(),
    };
    if names.len() != files.len() {
        bail!("{} class names for {} corpus files", names.len(), files.len());
    }
    let mut records = Vec::with_capacity(files.len());
    for (i, (file, name)) in files.iter().zip(&names).enumerate() {
        let article = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
        records.push(ClassRecord::new(i, name.clone(), article));
    }
    info!("{} classes, {} embeddings", records.len(), table.len());
    let out = pipeline::class_knowledge(
        records,
        &table,
        &stopwords,
        cfg.cko.k,
        cfg.cko.similarity,
        cfg.text.fit_on,
    )?;

    let dir = &cfg.io.out_dir;
    let sm = LabeledMatrix::indexed(out.similarity.as_matrix().clone());
    save_features(&dir.join("similarity.txt"), &sm)?;
    for (file, record) in files.iter().zip(&out.records) {
        let name = file.file_name().expect("corpus entries are files");
        write_file(&dir.join("overlay").join(name), record.overlay.as_bytes())?;
    }
    save_features(
        &dir.join("semantics.txt"),
        &LabeledMatrix::indexed(out.semantics.clone()),
    )?;
    info!(
        "wrote similarity, overlay and {}-dimensional semantics to {}",
        out.semantics.cols(),
        dir.display()
    );
    Ok(())
}

fn load_dataset(cfg: &RunConfig) -> Result<ZslDataset> {
    let io = &cfg.io;
    Ok(ZslDataset::load(
        io.require(&io.features, "features")?,
        io.require(&io.semantics, "semantics")?,
        io.require(&io.split, "split")?,
        io.class_names.as_deref(),
    )?)
}

fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let ds = load_dataset(cfg)?;
    info!(
        "{} samples, {} seen and {} unseen classes",
        ds.labels.len(),
        ds.split.seen.len(),
        ds.split.unseen.len()
    );
    let outcome = pipeline::train(&ds, &cfg.gan, &cfg.ssl, cfg.seed)?;

    let checkpoint = Checkpoint {
        version: CHECKPOINT_VERSION,
        config_hash: config_hash(&cfg.canonical()),
        seen: ds.split.seen.clone(),
        unseen: ds.split.unseen.clone(),
        model: outcome.model,
    };
    let path = cfg.io.checkpoint_path();
    checkpoint.save(&path)?;

    let mut log = String::from("iteration\tstep\td_loss\tg_loss\ttriplet\tval_gacc\n");
    for (i, l) in outcome.logs.iter().enumerate() {
        for line in l.to_tsv().lines().skip(1) {
            log.push_str(&format!("{}\t{line}\n", i + 1));
        }
    }
    write_file(&cfg.io.out_dir.join("train_log.tsv"), log.as_bytes())?;
    write_file(
        &cfg.io.out_dir.join("ssl_report.tsv"),
        IterationReport::tsv(&outcome.reports).as_bytes(),
    )?;
    info!("checkpoint written to {}", path.display());
    Ok(())
}

fn load_checkpoint(cfg: &RunConfig, ds: &ZslDataset) -> Result<Checkpoint> {
    let path = cfg.io.checkpoint_path();
    let cp = Checkpoint::load(&path)?;
    if cp.seen != ds.split.seen || cp.unseen != ds.split.unseen {
        bail!("{} was trained on a different class split", path.display());
    }
    if cp.config_hash != config_hash(&cfg.canonical()) {
        warn!("{} was trained with a different configuration", path.display());
    }
    Ok(cp)
}

fn eval_settings(cfg: &RunConfig) -> EvalSettings {
    EvalSettings {
        sweep: cfg.eval.sweep(),
        retrieval_ratios: cfg.eval.retrieval_ratios.clone(),
        k: cfg.eval.k,
        per_class_synthetic: cfg.eval.per_class_synthetic,
        validation_fraction: cfg.gan.validation_fraction,
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    let ds = load_dataset(cfg)?;
    let cp = load_checkpoint(cfg, &ds)?;
    let report = pipeline::evaluate(&cp.model, &ds, &eval_settings(cfg), cfg.seed)?;
    write_file(&cfg.io.out_dir.join("report.json"), &to_json(&report)?)?;
    write_file(&cfg.io.out_dir.join("suc.tsv"), report.suc_tsv().as_bytes())?;
    info!(
        "unseen top-1 {:.2}  S {:.2}  U {:.2}  H {:.2}  G_acc {:.2}  AUSUC {:.4}",
        report.top1_unseen, report.seen, report.unseen, report.harmonic, report.generalized_accuracy, report.ausuc
    );
    for (ratio, p) in &report.map_at {
        info!("mAP@{ratio}% {p:.2}");
    }
    Ok(())
}

fn cmd_retrieve(cfg: &RunConfig) -> Result<()> {
    let ds = load_dataset(cfg)?;
    let cp = load_checkpoint(cfg, &ds)?;
    let map = pipeline::retrieve(&cp.model, &ds, &eval_settings(cfg), cfg.seed)?;
    write_file(&cfg.io.out_dir.join("retrieval.json"), &to_json(&map)?)?;
    for (ratio, p) in &map {
        info!("mAP@{ratio}% {p:.2}");
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        num_seen: a.num_seen,
        num_unseen: a.num_unseen,
        samples_per_class: a.samples_per_class,
        semantic_dim: a.semantic_dim,
        visual_dim: a.visual_dim,
        sigma: a.sigma,
        map_scale: a.map_scale,
        density: a.density,
        seed: a.seed,
    };
    let data = make_synthetic(&spec)?;
    let ds = &data.dataset;
    let dir = &a.out_dir;
    let features = if a.binary { "features.bin" } else { "features.txt" };
    save_features(
        &dir.join(features),
        &LabeledMatrix::new(ds.features.clone(), ds.labels.clone())?,
    )?;
    save_features(
        &dir.join("semantics.txt"),
        &LabeledMatrix::indexed(ds.semantics.clone()),
    )?;
    write_file(&dir.join("split.txt"), ds.split.to_text().as_bytes())?;
    write_file(
        &dir.join("class_names.txt"),
        (ds.class_names.join("\n") + "\n").as_bytes(),
    )?;
    info!("wrote {} samples to {}", ds.labels.len(), dir.display());
    Ok(())
}

fn cmd_grad_check(a: &GradCheckArgs) -> Result<()> {
    let results = gradient_suite(a.seeds, a.seed)?;
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        bail!("{failed} gradient check(s) failed");
    }
    Ok(())
}
