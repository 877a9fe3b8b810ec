//! Command-line interface: `train`, `extract`, `compare`, `probe-transfer`,
//! `protocol`, and `suite` subcommands over the library. Every run starts
//! from an optional TOML/JSON config file, applies flag overrides (flags
//! win), writes a `resolved_config.json` echo that can replay the run
//! exactly, and follows a fixed exit-code contract:
//!
//! * 0 — success
//! * 1 — usage or configuration error
//! * 2 — numerical failure (e.g. training diverged)
//! * 3 — a protocol run where every metric cell failed

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::activations::{self, ActivationSet};
use crate::error::{Error, Result};
use crate::metrics::{self, MapKind};
use crate::models::{self, ArchId, ModelDims};
use crate::probe;
use crate::protocol::{self, DatasetSpec, MetricToggles, ProtocolConfig, SuiteName};
use crate::trainer::{self, SyntheticSpec};

#[derive(Parser, Debug)]
#[command(
    name = "repalign",
    version,
    about = "Train small networks and quantify cross-model representational alignment"
)]
struct Cli {
    /// Base configuration file (.toml or .json); flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for multi-seed training (default: rayon's choice)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one model; writes checkpoint.rmc, history.csv
    Train(TrainArgs),
    /// Extract one layer's validation activations from a checkpoint
    Extract(ExtractArgs),
    /// Compare two activation files (CKA, overlap, alignment maps)
    Compare(CompareArgs),
    /// Train a probe on one activation file, evaluate on another
    ProbeTransfer(ProbeTransferArgs),
    /// Run the full multi-seed comparison protocol; writes a report bundle
    Protocol(OverrideArgs),
    /// Run a canned experiment suite
    Suite(SuiteArgs),
}

/// Dataset selection flags, applied on top of the config file.
#[derive(Args, Debug, Default)]
struct DataArgs {
    /// Dataset kind: synth | fashion-mnist
    #[arg(long)]
    dataset: Option<String>,
    /// Synthetic: latent dimension r
    #[arg(long)]
    latent_dim: Option<usize>,
    /// Synthetic: ambient input dimension d
    #[arg(long)]
    input_dim: Option<usize>,
    /// Synthetic: total sample count
    #[arg(long)]
    samples: Option<usize>,
    /// Synthetic: number of classes
    #[arg(long)]
    classes: Option<usize>,
    /// Synthetic: observation noise level
    #[arg(long)]
    data_noise: Option<f64>,
    /// Synthetic: generator seed
    #[arg(long)]
    data_seed: Option<u64>,
    /// Fashion-MNIST: directory with the four IDX files
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Fashion-MNIST: fraction of the train file held out for validation
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Fashion-MNIST: cap on training examples
    #[arg(long)]
    limit: Option<usize>,
}

impl DataArgs {
    fn apply(&self, spec: &mut DatasetSpec) -> Result<()> {
        if let Some(kind) = self.dataset.as_deref() {
            match kind {
                "synth" | "synthetic" => {
                    if !matches!(spec, DatasetSpec::Synthetic(_)) {
                        *spec = DatasetSpec::Synthetic(SyntheticSpec::default());
                    }
                }
                "fashion-mnist" | "fashion_mnist" => {
                    if !matches!(spec, DatasetSpec::FashionMnist { .. }) {
                        let dir = self.data_dir.clone().ok_or_else(|| {
                            Error::Config("fashion-mnist requires --data-dir".into())
                        })?;
                        *spec = DatasetSpec::FashionMnist {
                            dir,
                            val_fraction: 1.0 / 6.0,
                            limit: None,
                        };
                    }
                }
                other => {
                    return Err(Error::Config(format!(
                        "unknown dataset '{other}' (expected synth or fashion-mnist)"
                    )))
                }
            }
        }
        match spec {
            DatasetSpec::Synthetic(s) => {
                if self.data_dir.is_some() || self.val_fraction.is_some() || self.limit.is_some() {
                    return Err(Error::Config(
                        "--data-dir/--val-fraction/--limit only apply to fashion-mnist".into(),
                    ));
                }
                if let Some(v) = self.latent_dim {
                    s.latent_dim = v;
                }
                if let Some(v) = self.input_dim {
                    s.input_dim = v;
                }
                if let Some(v) = self.samples {
                    s.samples = v;
                }
                if let Some(v) = self.classes {
                    s.classes = v;
                }
                if let Some(v) = self.data_noise {
                    s.noise = v;
                }
                if let Some(v) = self.data_seed {
                    s.seed = v;
                }
            }
            DatasetSpec::FashionMnist {
                dir,
                val_fraction,
                limit,
            } => {
                if self.latent_dim.is_some()
                    || self.input_dim.is_some()
                    || self.samples.is_some()
                    || self.classes.is_some()
                    || self.data_noise.is_some()
                    || self.data_seed.is_some()
                {
                    return Err(Error::Config(
                        "synthetic flags do not apply to fashion-mnist".into(),
                    ));
                }
                if let Some(v) = &self.data_dir {
                    *dir = v.clone();
                }
                if let Some(v) = self.val_fraction {
                    *val_fraction = v;
                }
                if let Some(v) = self.limit {
                    *limit = Some(v);
                }
            }
        }
        Ok(())
    }
}

/// Optimizer overrides.
#[derive(Args, Debug, Default)]
struct TrainFlags {
    /// Adam learning rate
    #[arg(long)]
    lr: Option<f64>,
    /// Minibatch size
    #[arg(long)]
    batch_size: Option<usize>,
    /// Epoch budget
    #[arg(long)]
    max_epochs: Option<u32>,
    /// Early-stopping patience, in epochs without validation improvement
    #[arg(long)]
    patience: Option<u32>,
    /// Training seed (initialization and batch order)
    #[arg(long)]
    seed: Option<u64>,
}

impl TrainFlags {
    fn apply(&self, cfg: &mut ProtocolConfig) {
        if let Some(v) = self.lr {
            cfg.train.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            cfg.train.batch_size = v;
        }
        if let Some(v) = self.max_epochs {
            cfg.train.max_epochs = v;
        }
        if let Some(v) = self.patience {
            cfg.train.patience = v;
        }
        if let Some(v) = self.seed {
            cfg.train.seed = v;
        }
    }
}

/// Network size overrides.
#[derive(Args, Debug, Default)]
struct DimsFlags {
    /// Hidden widths, comma-separated (e.g. 128,128)
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    /// Rank of the frozen structural projector
    #[arg(long)]
    proj_rank: Option<usize>,
}

impl DimsFlags {
    fn apply(&self, cfg: &mut ProtocolConfig) -> Result<()> {
        if self.hidden.is_none() && self.proj_rank.is_none() {
            return Ok(());
        }
        let mut dims = match &cfg.dims {
            Some(d) => d.clone(),
            None => {
                let data = cfg.dataset.realize()?;
                ModelDims::for_task(data.train.features.ncols(), data.num_classes)
            }
        };
        if let Some(h) = &self.hidden {
            dims.hidden = h.clone();
        }
        if let Some(r) = self.proj_rank {
            dims.proj_rank = r;
        }
        cfg.dims = Some(dims);
        Ok(())
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Architecture: mlp | pgnn | pgnn_nostruct (default: config arch_a)
    #[arg(long)]
    arch: Option<ArchId>,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainFlags,
    #[command(flatten)]
    dims: DimsFlags,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    /// Model checkpoint (.rmc)
    #[arg(long)]
    checkpoint: PathBuf,
    /// Layer id (h1, h2, ..., logits)
    #[arg(long)]
    layer: String,
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// First activation file (.raf)
    #[arg(long)]
    a: PathBuf,
    /// Second activation file (.raf)
    #[arg(long)]
    b: PathBuf,
    /// Subspace dimensionality for the overlap score
    #[arg(long)]
    overlap_k: Option<usize>,
}

#[derive(Args, Debug)]
struct ProbeTransferArgs {
    /// Activation file the probe is trained on
    #[arg(long)]
    source: PathBuf,
    /// Activation file the frozen probe is evaluated on
    #[arg(long)]
    target: PathBuf,
    /// Probe ridge penalty
    #[arg(long)]
    lambda: Option<f64>,
    /// Number of random 50/50 splits
    #[arg(long)]
    splits: Option<usize>,
}

#[derive(Args, Debug)]
struct OverrideArgs {
    /// First architecture: mlp | pgnn | pgnn_nostruct
    #[arg(long)]
    arch_a: Option<ArchId>,
    /// Second architecture: mlp | pgnn | pgnn_nostruct
    #[arg(long)]
    arch_b: Option<ArchId>,
    /// Training seeds, comma-separated (e.g. 1,2,3,4,5)
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Layers to compare, comma-separated (e.g. h1,h2,logits)
    #[arg(long, value_delimiter = ',')]
    layers: Option<Vec<String>>,
    /// Metric families: any of cka,overlap,maps,transfer
    #[arg(long, value_delimiter = ',')]
    metrics: Option<Vec<String>>,
    /// Ridge penalty for transfer probes
    #[arg(long)]
    probe_lambda: Option<f64>,
    /// Number of random 50/50 splits per transfer estimate
    #[arg(long)]
    probe_splits: Option<usize>,
    /// Subspace dimensionality for the overlap score
    #[arg(long)]
    overlap_k: Option<usize>,
    /// Noise levels for resilience sweeps, comma-separated
    #[arg(long, value_delimiter = ',')]
    noise_sigmas: Option<Vec<f64>>,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainFlags,
    #[command(flatten)]
    dims: DimsFlags,
}

impl OverrideArgs {
    fn apply(&self, cfg: &mut ProtocolConfig) -> Result<()> {
        if let Some(v) = self.arch_a {
            cfg.arch_a = v;
        }
        if let Some(v) = self.arch_b {
            cfg.arch_b = v;
        }
        if let Some(v) = &self.seeds {
            cfg.seeds = v.clone();
        }
        if let Some(v) = &self.layers {
            cfg.layers = Some(v.clone());
        }
        if let Some(names) = &self.metrics {
            let mut toggles = MetricToggles {
                cka: false,
                overlap: false,
                alignment_maps: false,
                transfer: false,
            };
            for name in names {
                match name.as_str() {
                    "cka" => toggles.cka = true,
                    "overlap" => toggles.overlap = true,
                    "maps" => toggles.alignment_maps = true,
                    "transfer" => toggles.transfer = true,
                    other => {
                        return Err(Error::Config(format!(
                            "unknown metric family '{other}' \
                             (expected cka, overlap, maps, transfer)"
                        )))
                    }
                }
            }
            cfg.metrics = toggles;
        }
        if let Some(v) = self.probe_lambda {
            cfg.probe_lambda = v;
        }
        if let Some(v) = self.probe_splits {
            cfg.probe_splits = v;
        }
        if let Some(v) = self.overlap_k {
            cfg.overlap_k = Some(v);
        }
        if let Some(v) = &self.noise_sigmas {
            cfg.noise_sigmas = v.clone();
        }
        self.data.apply(&mut cfg.dataset)?;
        self.train.apply(cfg);
        self.dims.apply(cfg)?;
        Ok(())
    }
}

#[derive(Args, Debug)]
struct SuiteArgs {
    /// accuracy_curves | init_sensitivity | ablation | noise_resilience
    #[arg(long)]
    name: SuiteName,
    #[command(flatten)]
    overrides: OverrideArgs,
}

fn load_config(path: &Path) -> Result<ProtocolConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display()))),
        Some("toml") => {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
        other => Err(Error::Config(format!(
            "config file must end in .toml or .json, got {other:?}"
        ))),
    }
}

fn base_config(path: Option<&Path>) -> Result<ProtocolConfig> {
    match path {
        Some(p) => load_config(p),
        None => Ok(ProtocolConfig::default()),
    }
}

/// Write the fully-resolved configuration echo; the echo plus the binary
/// version replays the run exactly.
fn write_resolved_config(
    out: &Path,
    command: &str,
    args: serde_json::Value,
    cfg: &ProtocolConfig,
) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let doc = serde_json::json!({
        "command": command,
        "args": args,
        "protocol": cfg,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    std::fs::write(out.join("resolved_config.json"), text)?;
    Ok(())
}

fn cmd_train(out: &Path, cfg: &ProtocolConfig, arch: ArchId) -> Result<i32> {
    let data = cfg.dataset.realize()?;
    let dims = cfg.resolved_dims(&data)?;
    let mut model = models::build(arch, &dims, cfg.train.seed)?;
    let history = trainer::train(&mut model, &data, &cfg.train)?;
    std::fs::create_dir_all(out)?;
    models::save_checkpoint(&model, &out.join("checkpoint.rmc"))?;
    trainer::write_history_csv(&history, &out.join("history.csv"))?;
    write_resolved_config(out, "train", serde_json::json!({ "arch": arch }), cfg)?;
    let best = &history.epochs[(history.best_epoch - 1) as usize];
    println!(
        "trained {} for {} epochs (best epoch {}): val_loss {:.6}, val_acc {:.4}",
        model.model_id(),
        history.stopped_epoch,
        history.best_epoch,
        best.val_loss,
        best.val_accuracy
    );
    println!("wrote {}", out.join("checkpoint.rmc").display());
    Ok(0)
}

fn cmd_extract(out: &Path, cfg: &ProtocolConfig, args: &ExtractArgs) -> Result<i32> {
    let data = cfg.dataset.realize()?;
    let model = models::load_checkpoint(&args.checkpoint)?;
    let set = models::extract_activations(
        &model,
        &data.val.features,
        &data.val.labels,
        data.num_classes,
        &args.layer,
        &data.id,
    )?;
    std::fs::create_dir_all(out)?;
    let path = out.join(format!("{}.raf", args.layer));
    activations::write_raf(&set, &path)?;
    write_resolved_config(
        out,
        "extract",
        serde_json::json!({
            "checkpoint": args.checkpoint,
            "layer": args.layer,
        }),
        cfg,
    )?;
    println!(
        "wrote {} ({} rows × {} dims)",
        path.display(),
        set.n(),
        set.dim()
    );
    Ok(0)
}

/// Shared preprocessing for file-pair commands: project both sets to their
/// common width, then normalize — the same pipeline the protocol uses.
fn prepare_pair(a: &ActivationSet, b: &ActivationSet) -> Result<(ActivationSet, ActivationSet)> {
    let common = a.dim().min(b.dim());
    let (pa, _) = activations::normalize(&activations::project_dims(a, common)?);
    let (pb, _) = activations::normalize(&activations::project_dims(b, common)?);
    Ok((pa, pb))
}

fn cmd_compare(out: &Path, cfg: &ProtocolConfig, args: &CompareArgs) -> Result<i32> {
    let a = activations::read_raf(&args.a)?;
    let b = activations::read_raf(&args.b)?;
    if a.n() != b.n() {
        return Err(Error::ShapeMismatch(format!(
            "activation sets have different row counts: {} vs {}",
            a.n(),
            b.n()
        )));
    }
    let (pa, pb) = prepare_pair(&a, &b)?;
    let k = args
        .overlap_k
        .unwrap_or_else(|| metrics::default_overlap_k(pa.dim(), pa.n()));
    let cka = metrics::cka(&pa, &pb)?;
    let overlap = metrics::subspace_overlap(&pa, &pb, k)?;
    let mut residuals = serde_json::Map::new();
    println!("cka: {cka}");
    println!("overlap (k={k}): {}", overlap.overlap);
    for kind in [MapKind::Procrustes, MapKind::LeastSquares, MapKind::Cca] {
        let map = metrics::fit_alignment_map(&pa, &pb, kind)?;
        println!("{kind}_residual: {}", map.fit_residual);
        residuals.insert(kind.to_string(), serde_json::json!(map.fit_residual));
    }
    std::fs::create_dir_all(out)?;
    let doc = serde_json::json!({
        "a": args.a,
        "b": args.b,
        "n": pa.n(),
        "common_dim": pa.dim(),
        "cka": cka,
        "overlap_k": k,
        "overlap": overlap.overlap,
        "principal_angle_cosines": overlap.cosines,
        "residuals": residuals,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    std::fs::write(out.join("compare.json"), text)?;
    write_resolved_config(
        out,
        "compare",
        serde_json::json!({ "a": args.a, "b": args.b, "overlap_k": k }),
        cfg,
    )?;
    Ok(0)
}

fn cmd_probe_transfer(out: &Path, cfg: &ProtocolConfig, args: &ProbeTransferArgs) -> Result<i32> {
    let source = activations::read_raf(&args.source)?;
    let target = activations::read_raf(&args.target)?;
    let (ps, pt) = prepare_pair(&source, &target)?;
    let lambda = args.lambda.unwrap_or(cfg.probe_lambda);
    let splits = args.splits.unwrap_or(cfg.probe_splits);
    let outcome = probe::transfer_eval(&ps, &pt, lambda, splits)?;
    println!(
        "transfer accuracy: {:.4} ± {:.4} (same-model baseline {:.4})",
        outcome.mean, outcome.std, outcome.same_model_mean
    );
    std::fs::create_dir_all(out)?;
    let doc = serde_json::json!({
        "source": args.source,
        "target": args.target,
        "lambda": lambda,
        "splits": splits,
        "transfer": outcome,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    std::fs::write(out.join("probe_transfer.json"), text)?;
    write_resolved_config(
        out,
        "probe-transfer",
        serde_json::json!({
            "source": args.source,
            "target": args.target,
            "lambda": lambda,
            "splits": splits,
        }),
        cfg,
    )?;
    Ok(0)
}

fn cmd_protocol(out: &Path, cfg: &ProtocolConfig) -> Result<i32> {
    let report = protocol::run_protocol(cfg)?;
    std::fs::create_dir_all(out)?;
    protocol::write_report_bundle(&report, out)?;
    write_resolved_config(out, "protocol", serde_json::json!({}), cfg)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!("metric,layer,mean,std (paired)");
    for row in report.aggregates.iter().filter(|r| r.scope == "paired") {
        println!(
            "{},{},{:.6},{:.6}",
            row.metric, row.layer, row.mean, row.std
        );
    }
    println!("report bundle in {}", out.display());
    if !report.cells.is_empty() && report.cells.iter().all(|c| c.value.is_none()) {
        eprintln!("error: every metric cell failed");
        return Ok(3);
    }
    Ok(0)
}

fn cmd_suite(out: &Path, cfg: &ProtocolConfig, name: SuiteName) -> Result<i32> {
    let files = protocol::run_experiment_suite(name, cfg, out)?;
    write_resolved_config(out, "suite", serde_json::json!({ "name": name }), cfg)?;
    for f in &files {
        println!("wrote {}", f.display());
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<i32> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be ≥ 1".into()));
        }
        // results are order-preserving, so thread count never changes output
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let mut cfg = base_config(cli.config.as_deref())?;
    let out = &cli.out;
    match &cli.command {
        Command::Train(args) => {
            args.data.apply(&mut cfg.dataset)?;
            args.train.apply(&mut cfg);
            args.dims.apply(&mut cfg)?;
            let arch = args.arch.unwrap_or(cfg.arch_a);
            cmd_train(out, &cfg, arch)
        }
        Command::Extract(args) => {
            args.data.apply(&mut cfg.dataset)?;
            cmd_extract(out, &cfg, args)
        }
        Command::Compare(args) => cmd_compare(out, &cfg, args),
        Command::ProbeTransfer(args) => cmd_probe_transfer(out, &cfg, args),
        Command::Protocol(overrides) => {
            overrides.apply(&mut cfg)?;
            cmd_protocol(out, &cfg)
        }
        Command::Suite(args) => {
            args.overrides.apply(&mut cfg)?;
            cmd_suite(out, &cfg, args.name)
        }
    }
}

/// Parse arguments and execute; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Numerical(_) => 2,
                _ => 1,
            }
        }
    }
}
