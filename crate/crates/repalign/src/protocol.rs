//! Protocol runner: trains architecture pairs across seeds, extracts
//! held-out activations at selected layers, runs the metric battery per
//! seed pair, aggregates, and writes report bundles. Also drives the four
//! canned experiment suites (accuracy curves, init sensitivity, ablation,
//! noise resilience).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::activations::{self, ActivationSet};
use crate::error::{Error, Result};
use crate::metrics::{self, MapKind};
use crate::models::{self, ArchId, ModelDims};
use crate::probe;
use crate::trainer::{self, Dataset, SeedRun, SyntheticSpec, TrainConfig, TrainHistory};

/// Which dataset a run uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Synthetic(SyntheticSpec),
    FashionMnist {
        dir: PathBuf,
        val_fraction: f64,
        limit: Option<usize>,
    },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Synthetic(SyntheticSpec::default())
    }
}

impl DatasetSpec {
    pub fn realize(&self) -> Result<Dataset> {
        match self {
            DatasetSpec::Synthetic(spec) => trainer::make_synthetic(spec),
            DatasetSpec::FashionMnist {
                dir,
                val_fraction,
                limit,
            } => trainer::fashion_mnist_dataset(dir, *val_fraction, *limit),
        }
    }
}

/// Which metric families to compute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricToggles {
    pub cka: bool,
    pub overlap: bool,
    pub alignment_maps: bool,
    pub transfer: bool,
}

impl Default for MetricToggles {
    fn default() -> Self {
        MetricToggles {
            cka: true,
            overlap: true,
            alignment_maps: true,
            transfer: true,
        }
    }
}

/// Full configuration of a protocol sweep. Every knob has an explicit
/// default and the resolved value is echoed into the report, so a bundle
/// is always self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub dataset: DatasetSpec,
    pub arch_a: ArchId,
    pub arch_b: ArchId,
    pub seeds: Vec<u64>,
    /// Layer ids to compare; `None` selects first/middle/last hidden.
    pub layers: Option<Vec<String>>,
    pub metrics: MetricToggles,
    pub probe_lambda: f64,
    pub probe_splits: usize,
    /// Subspace dimensionality; `None` derives a rank-safe default per layer.
    pub overlap_k: Option<usize>,
    pub noise_sigmas: Vec<f64>,
    /// Network dims shared by both architectures; `None` derives from data.
    pub dims: Option<ModelDims>,
    pub train: TrainConfig,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            dataset: DatasetSpec::default(),
            arch_a: ArchId::Mlp,
            arch_b: ArchId::Pgnn,
            seeds: vec![1, 2, 3, 4, 5],
            layers: None,
            metrics: MetricToggles::default(),
            probe_lambda: 1e-3,
            probe_splits: 5,
            overlap_k: None,
            noise_sigmas: vec![0.0, 0.1, 0.2, 0.3],
            dims: None,
            train: TrainConfig::default(),
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument("need at least one seed".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("seeds must be distinct".into()));
        }
        if self.probe_lambda <= 0.0 {
            return Err(Error::InvalidArgument(
                "probe lambda must be positive".into(),
            ));
        }
        if self.probe_splits < 2 {
            return Err(Error::InvalidArgument("probe splits must be ≥ 2".into()));
        }
        if self.noise_sigmas.iter().any(|&s| s < 0.0) {
            return Err(Error::InvalidArgument(
                "noise sigmas must be nonnegative".into(),
            ));
        }
        self.train.validate()
    }

    pub(crate) fn resolved_dims(&self, data: &Dataset) -> Result<ModelDims> {
        let dims = match &self.dims {
            Some(d) => d.clone(),
            None => ModelDims::for_task(data.train.features.ncols(), data.num_classes),
        };
        if dims.classes != data.num_classes {
            return Err(Error::InvalidArgument(format!(
                "dims specify {} classes but the dataset has {}",
                dims.classes, data.num_classes
            )));
        }
        if dims.input != data.train.features.ncols() {
            return Err(Error::InvalidArgument(format!(
                "dims specify input {} but the dataset has {} features",
                dims.input,
                data.train.features.ncols()
            )));
        }
        Ok(dims)
    }
}

/// Default comparison layers: first, middle, and last hidden layer
/// (deduplicated for shallow stacks); just the logits if there are none.
pub fn default_layer_selection(hidden_count: usize) -> Vec<String> {
    if hidden_count == 0 {
        return vec!["logits".into()];
    }
    let mut picks = vec![1, hidden_count.div_ceil(2), hidden_count];
    picks.dedup();
    picks.into_iter().map(|i| format!("h{i}")).collect()
}

/// One raw metric evaluation for a (metric, layer, seed-pair) triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCell {
    pub metric: String,
    pub layer: String,
    pub seed_a: u64,
    pub seed_b: u64,
    /// True when both models come from the same seed-list position.
    pub paired: bool,
    pub value: Option<f64>,
    pub error: Option<String>,
}

/// Mean/std over one (metric, layer) group in one scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub metric: String,
    pub layer: String,
    /// "paired" (same-seed cells) or "cross" (all cells).
    pub scope: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Group valued cells by (metric, layer) and compute mean ± std (n−1
/// denominator, 0 when n = 1) in both scopes; (metric, layer) groups whose
/// cells all failed come back as warnings.
pub fn aggregate_cells(cells: &[MetricCell]) -> (Vec<AggregateRow>, Vec<String>) {
    let mut groups: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    let mut seen: BTreeMap<(String, String), bool> = BTreeMap::new();
    for cell in cells {
        let key = (cell.metric.clone(), cell.layer.clone());
        let has_value = seen.entry(key).or_insert(false);
        if let Some(v) = cell.value {
            *has_value = true;
            groups
                .entry((cell.metric.clone(), cell.layer.clone(), "cross".into()))
                .or_default()
                .push(v);
            if cell.paired {
                groups
                    .entry((cell.metric.clone(), cell.layer.clone(), "paired".into()))
                    .or_default()
                    .push(v);
            }
        }
    }
    let rows = groups
        .into_iter()
        .map(|((metric, layer, scope), values)| {
            let (mean, std) = crate::numerics::mean_std(&values);
            AggregateRow {
                metric,
                layer,
                scope,
                mean,
                std,
                n: values.len(),
            }
        })
        .collect();
    let warnings = seen
        .into_iter()
        .filter(|(_, has_value)| !has_value)
        .map(|((metric, layer), _)| {
            format!("no successful cells for metric '{metric}' at layer '{layer}'")
        })
        .collect();
    (rows, warnings)
}

/// Per-run training summary for the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub arch: ArchId,
    pub seed: u64,
    pub best_epoch: u32,
    pub stopped_epoch: u32,
    pub final_train_loss: f64,
    pub best_val_loss: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
}

/// Per-seed accuracy difference between the two architectures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedDelta {
    pub seed: u64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub per_seed: Vec<SeedDelta>,
    pub mean: f64,
    pub std: f64,
}

/// Fixed methodology choices, recorded so a report is self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub pipeline: String,
    pub optimizer: String,
    pub augmentation: String,
    pub probe_split_ratio: String,
}

impl Default for Provenance {
    fn default() -> Self {
        Provenance {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            pipeline: "extract -> project_dims -> normalize -> metrics".into(),
            optimizer: "adam(beta1=0.9, beta2=0.999, eps=1e-8)".into(),
            augmentation: "none".into(),
            probe_split_ratio: "50/50".into(),
        }
    }
}

/// Width bookkeeping for one compared layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerInfo {
    pub layer: String,
    pub dim_a: usize,
    pub dim_b: usize,
    pub common_dim: usize,
    pub overlap_k: usize,
}

/// Complete output of a protocol run: raw cells, aggregates, training
/// summaries, and the fully-resolved configuration echo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub config: ProtocolConfig,
    pub provenance: Provenance,
    pub param_counts: BTreeMap<String, usize>,
    pub layer_info: Vec<LayerInfo>,
    pub training: Vec<TrainingSummary>,
    pub cells: Vec<MetricCell>,
    pub aggregates: Vec<AggregateRow>,
    pub paired_accuracy_delta: Option<DeltaSummary>,
    pub warnings: Vec<String>,
}

fn layer_width(dims: &ModelDims, layer: &str) -> Result<usize> {
    if layer == "logits" {
        return Ok(dims.classes);
    }
    let all = {
        let mut v: Vec<String> = (1..=dims.hidden.len()).map(|i| format!("h{i}")).collect();
        v.push("logits".into());
        v.join(", ")
    };
    layer
        .strip_prefix('h')
        .and_then(|n| n.parse::<usize>().ok())
        .filter(|&n| n >= 1 && n <= dims.hidden.len())
        .map(|n| dims.hidden[n - 1])
        .ok_or_else(|| {
            Error::InvalidArgument(format!("unknown layer '{layer}'; valid layers: {all}"))
        })
}

struct PreparedRun<'a> {
    seed: u64,
    run: Option<&'a (models::NetworkModel, TrainHistory)>,
    error: Option<String>,
}

fn prepare_runs(runs: &[SeedRun]) -> Vec<PreparedRun<'_>> {
    runs.iter()
        .map(|r| match &r.outcome {
            Ok(ok) => PreparedRun {
                seed: r.seed,
                run: Some(ok),
                error: None,
            },
            Err(e) => PreparedRun {
                seed: r.seed,
                run: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

/// Extract one layer of validation-set activations for every successful
/// run, project to the common width, and normalize.
fn prepared_activations(
    runs: &[PreparedRun<'_>],
    layer: &str,
    data: &Dataset,
    common_dim: usize,
) -> Vec<std::result::Result<ActivationSet, String>> {
    runs.iter()
        .map(|pr| match pr.run {
            None => Err(pr.error.clone().unwrap_or_else(|| "training failed".into())),
            Some((model, _)) => (|| -> Result<ActivationSet> {
                let set = models::extract_activations(
                    model,
                    &data.val.features,
                    &data.val.labels,
                    data.num_classes,
                    layer,
                    &data.id,
                )?;
                let projected = activations::project_dims(&set, common_dim)?;
                let (normalized, _) = activations::normalize(&projected);
                Ok(normalized)
            })()
            .map_err(|e| e.to_string()),
        })
        .collect()
}

/// Run the full comparison protocol: train both architectures per seed,
/// extract validation activations at the selected layers, compute the
/// toggled metrics over every seed pair (transfer on paired seeds), and
/// aggregate. Per-cell failures are recorded, not fatal.
pub fn run_protocol(cfg: &ProtocolConfig) -> Result<AlignmentReport> {
    cfg.validate()?;
    let data = cfg.dataset.realize()?;
    let dims = cfg.resolved_dims(&data)?;

    let layers = match &cfg.layers {
        Some(ls) => {
            if ls.is_empty() {
                return Err(Error::InvalidArgument("layer list cannot be empty".into()));
            }
            for l in ls {
                layer_width(&dims, l)?;
            }
            ls.clone()
        }
        None => default_layer_selection(dims.hidden.len()),
    };

    let runs_a = trainer::multi_seed_run(cfg.arch_a, &dims, &data, &cfg.train, &cfg.seeds)?;
    let runs_b_owned;
    let runs_b: &[SeedRun] = if cfg.arch_b == cfg.arch_a {
        &runs_a
    } else {
        runs_b_owned = trainer::multi_seed_run(cfg.arch_b, &dims, &data, &cfg.train, &cfg.seeds)?;
        &runs_b_owned
    };
    let prep_a = prepare_runs(&runs_a);
    let prep_b = prepare_runs(runs_b);

    let mut warnings = Vec::new();
    let mut training = Vec::new();
    for (arch, prep) in [(cfg.arch_a, &prep_a), (cfg.arch_b, &prep_b)] {
        if arch == cfg.arch_b && cfg.arch_a == cfg.arch_b && !training.is_empty() {
            break; // same runs, summarize once
        }
        for pr in prep {
            match pr.run {
                Some((model, history)) => {
                    let best = &history.epochs[(history.best_epoch - 1) as usize];
                    let (_, test_accuracy) = trainer::evaluate(model, &data.test)?;
                    training.push(TrainingSummary {
                        arch,
                        seed: pr.seed,
                        best_epoch: history.best_epoch,
                        stopped_epoch: history.stopped_epoch,
                        final_train_loss: history.epochs.last().unwrap().train_loss,
                        best_val_loss: best.val_loss,
                        val_accuracy: best.val_accuracy,
                        test_accuracy,
                    });
                }
                None => warnings.push(format!(
                    "{arch} seed {} failed: {}",
                    pr.seed,
                    pr.error.as_deref().unwrap_or("unknown")
                )),
            }
        }
    }

    let mut param_counts = BTreeMap::new();
    for arch in [cfg.arch_a, cfg.arch_b] {
        if let Ok(m) = models::build(arch, &dims, cfg.seeds[0]) {
            param_counts.insert(arch.to_string(), m.param_count());
        }
    }

    let n_val = data.val.n();
    let mut layer_info = Vec::new();
    let mut cells = Vec::new();
    for layer in &layers {
        let dim_a = layer_width(&dims, layer)?;
        let dim_b = dim_a; // both architectures share dims
        let common_dim = dim_a.min(dim_b);
        let k = cfg
            .overlap_k
            .unwrap_or_else(|| metrics::default_overlap_k(common_dim, n_val));
        layer_info.push(LayerInfo {
            layer: layer.clone(),
            dim_a,
            dim_b,
            common_dim,
            overlap_k: k,
        });

        let acts_a = prepared_activations(&prep_a, layer, &data, common_dim);
        let acts_b = prepared_activations(&prep_b, layer, &data, common_dim);

        for (i, sa) in acts_a.iter().enumerate() {
            for (j, sb) in acts_b.iter().enumerate() {
                let paired = i == j;
                let mut push = |metric: &str, outcome: std::result::Result<f64, String>| {
                    let (value, error) = match outcome {
                        Ok(v) => (Some(v), None),
                        Err(e) => (None, Some(e)),
                    };
                    cells.push(MetricCell {
                        metric: metric.into(),
                        layer: layer.clone(),
                        seed_a: cfg.seeds[i],
                        seed_b: cfg.seeds[j],
                        paired,
                        value,
                        error,
                    });
                };
                let pair = match (sa, sb) {
                    (Ok(a), Ok(b)) => Ok((a, b)),
                    (Err(e), _) | (_, Err(e)) => Err(e.clone()),
                };
                if cfg.metrics.cka {
                    push(
                        "cka",
                        pair.clone()
                            .and_then(|(a, b)| metrics::cka(a, b).map_err(|e| e.to_string())),
                    );
                }
                if cfg.metrics.overlap {
                    push(
                        "overlap",
                        pair.clone().and_then(|(a, b)| {
                            metrics::subspace_overlap(a, b, k)
                                .map(|c| c.overlap)
                                .map_err(|e| e.to_string())
                        }),
                    );
                }
                if cfg.metrics.alignment_maps {
                    for (name, kind) in [
                        ("procrustes_residual", MapKind::Procrustes),
                        ("least_squares_residual", MapKind::LeastSquares),
                        ("cca_residual", MapKind::Cca),
                    ] {
                        push(
                            name,
                            pair.clone().and_then(|(a, b)| {
                                metrics::fit_alignment_map(a, b, kind)
                                    .map(|m| m.fit_residual)
                                    .map_err(|e| e.to_string())
                            }),
                        );
                    }
                }
                if cfg.metrics.transfer && paired {
                    let outcome = pair.clone().and_then(|(a, b)| {
                        probe::transfer_eval(a, b, cfg.probe_lambda, cfg.probe_splits)
                            .map_err(|e| e.to_string())
                    });
                    match outcome {
                        Ok(t) => {
                            push("transfer", Ok(t.mean));
                            push("transfer_same_model", Ok(t.same_model_mean));
                        }
                        Err(e) => {
                            push("transfer", Err(e.clone()));
                            push("transfer_same_model", Err(e));
                        }
                    }
                }
            }
        }
    }

    let (aggregates, agg_warnings) = aggregate_cells(&cells);
    warnings.extend(agg_warnings);

    let paired_accuracy_delta = {
        let acc_of = |prep: &[PreparedRun<'_>], i: usize| {
            prep[i]
                .run
                .map(|(_, h)| h.epochs[(h.best_epoch - 1) as usize].val_accuracy)
        };
        let per_seed: Vec<SeedDelta> = (0..cfg.seeds.len())
            .filter_map(|i| match (acc_of(&prep_a, i), acc_of(&prep_b, i)) {
                (Some(a), Some(b)) => Some(SeedDelta {
                    seed: cfg.seeds[i],
                    delta: a - b,
                }),
                _ => None,
            })
            .collect();
        if per_seed.is_empty() {
            None
        } else {
            let deltas: Vec<f64> = per_seed.iter().map(|d| d.delta).collect();
            let (mean, std) = crate::numerics::mean_std(&deltas);
            Some(DeltaSummary {
                per_seed,
                mean,
                std,
            })
        }
    };

    Ok(AlignmentReport {
        config: cfg.clone(),
        provenance: Provenance::default(),
        param_counts,
        layer_info,
        training,
        cells,
        aggregates,
        paired_accuracy_delta,
        warnings,
    })
}

/// Write `report.json` and `summary.csv` (paired aggregates:
/// metric,layer,mean,std) into `dir`. Deterministic byte-for-byte for a
/// given report.
pub fn write_report_bundle(report: &AlignmentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let json_path = dir.join("report.json");
    let mut w = BufWriter::new(File::create(&json_path)?);
    serde_json::to_writer_pretty(&mut w, report)?;
    w.write_all(b"\n")?;
    w.flush()?;

    let csv_path = dir.join("summary.csv");
    let mut c = BufWriter::new(File::create(&csv_path)?);
    writeln!(c, "metric,layer,mean,std")?;
    for row in report.aggregates.iter().filter(|r| r.scope == "paired") {
        writeln!(c, "{},{},{},{}", row.metric, row.layer, row.mean, row.std)?;
    }
    c.flush()?;
    Ok(vec![json_path, csv_path])
}

/// The four canned experiment suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteName {
    AccuracyCurves,
    InitSensitivity,
    Ablation,
    NoiseResilience,
}

impl std::fmt::Display for SuiteName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SuiteName::AccuracyCurves => "accuracy_curves",
            SuiteName::InitSensitivity => "init_sensitivity",
            SuiteName::Ablation => "ablation",
            SuiteName::NoiseResilience => "noise_resilience",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for SuiteName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy_curves" => Ok(SuiteName::AccuracyCurves),
            "init_sensitivity" => Ok(SuiteName::InitSensitivity),
            "ablation" => Ok(SuiteName::Ablation),
            "noise_resilience" => Ok(SuiteName::NoiseResilience),
            other => Err(Error::InvalidArgument(format!(
                "unknown suite '{other}' (expected accuracy_curves, init_sensitivity, \
                 ablation, or noise_resilience)"
            ))),
        }
    }
}

fn successful_runs(runs: &[SeedRun]) -> Result<Vec<(u64, &(models::NetworkModel, TrainHistory))>> {
    let ok: Vec<_> = runs
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok().map(|o| (r.seed, o)))
        .collect();
    if ok.is_empty() {
        let first_err = runs
            .iter()
            .find_map(|r| r.outcome.as_ref().err())
            .map(|e| e.to_string())
            .unwrap_or_else(|| "no runs".into());
        return Err(Error::Numerical(format!(
            "every seed failed; first error: {first_err}"
        )));
    }
    Ok(ok)
}

fn write_curves_csv(path: &Path, histories: &[&TrainHistory]) -> Result<()> {
    let epochs = histories.iter().map(|h| h.epochs.len()).min().unwrap_or(0);
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "epoch,train_loss_mean,train_loss_std,val_loss_mean,val_loss_std,val_acc_mean,val_acc_std"
    )?;
    for e in 0..epochs {
        let col = |f: &dyn Fn(&TrainHistory) -> f64| {
            let values: Vec<f64> = histories.iter().map(|h| f(h)).collect();
            crate::numerics::mean_std(&values)
        };
        let (tl_m, tl_s) = col(&|h| h.epochs[e].train_loss);
        let (vl_m, vl_s) = col(&|h| h.epochs[e].val_loss);
        let (va_m, va_s) = col(&|h| h.epochs[e].val_accuracy);
        writeln!(w, "{},{tl_m},{tl_s},{vl_m},{vl_s},{va_m},{va_s}", e + 1)?;
    }
    w.flush()?;
    Ok(())
}

/// Run one experiment suite and write its CSV outputs into `out_dir`;
/// returns the written paths.
///
/// * `accuracy_curves`: per-epoch mean±std curves for both architectures
///   (early stopping disabled so all seeds share the epoch grid).
/// * `init_sensitivity`: per-seed final validation accuracy plus a
///   per-arch mean±std summary.
/// * `ablation`: accuracy curves for `pgnn` vs `pgnn_nostruct`.
/// * `noise_resilience`: test accuracy under evaluation-time input noise
///   for each configured sigma (sigma 0 equals the clean evaluation).
pub fn run_experiment_suite(
    name: SuiteName,
    cfg: &ProtocolConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let data = cfg.dataset.realize()?;
    let dims = cfg.resolved_dims(&data)?;
    let mut written = Vec::new();

    let archs: Vec<ArchId> = match name {
        SuiteName::Ablation => vec![ArchId::Pgnn, ArchId::PgnnNoStruct],
        _ => {
            if cfg.arch_a == cfg.arch_b {
                vec![cfg.arch_a]
            } else {
                vec![cfg.arch_a, cfg.arch_b]
            }
        }
    };

    match name {
        SuiteName::AccuracyCurves | SuiteName::Ablation => {
            // identical epoch grids require the full epoch budget everywhere
            let full = TrainConfig {
                patience: cfg.train.max_epochs,
                ..cfg.train.clone()
            };
            for &arch in &archs {
                let runs = trainer::multi_seed_run(arch, &dims, &data, &full, &cfg.seeds)?;
                let ok = successful_runs(&runs)?;
                let histories: Vec<&TrainHistory> = ok.iter().map(|(_, (_, h))| h).collect();
                let path = out_dir.join(format!("curves_{arch}.csv"));
                write_curves_csv(&path, &histories)?;
                written.push(path);
            }
        }
        SuiteName::InitSensitivity => {
            let per_seed_path = out_dir.join("init_sensitivity.csv");
            let summary_path = out_dir.join("init_summary.csv");
            let mut per_seed = BufWriter::new(File::create(&per_seed_path)?);
            let mut summary = BufWriter::new(File::create(&summary_path)?);
            writeln!(per_seed, "arch,seed,val_accuracy")?;
            writeln!(summary, "arch,mean,std")?;
            for &arch in &archs {
                let runs = trainer::multi_seed_run(arch, &dims, &data, &cfg.train, &cfg.seeds)?;
                let ok = successful_runs(&runs)?;
                let mut accs = Vec::new();
                for (seed, (_, history)) in &ok {
                    let acc = history.epochs[(history.best_epoch - 1) as usize].val_accuracy;
                    writeln!(per_seed, "{arch},{seed},{acc}")?;
                    accs.push(acc);
                }
                let (mean, std) = crate::numerics::mean_std(&accs);
                writeln!(summary, "{arch},{mean},{std}")?;
            }
            per_seed.flush()?;
            summary.flush()?;
            written.push(per_seed_path);
            written.push(summary_path);
        }
        SuiteName::NoiseResilience => {
            let path = out_dir.join("noise_table.csv");
            let mut w = BufWriter::new(File::create(&path)?);
            writeln!(w, "sigma,arch,mean_accuracy,std_accuracy")?;
            let mut trained = Vec::new();
            for &arch in &archs {
                let runs = trainer::multi_seed_run(arch, &dims, &data, &cfg.train, &cfg.seeds)?;
                trained.push((arch, runs));
            }
            for (si, &sigma) in cfg.noise_sigmas.iter().enumerate() {
                for (arch, runs) in &trained {
                    let ok = successful_runs(runs)?;
                    let mut accs = Vec::new();
                    for (seed, (model, _)) in &ok {
                        // one noise realization per (sigma, seed), shared by
                        // both architectures for a fair comparison
                        let noise_seed = 0x4E01_5E00 ^ (si as u64) << 32 ^ seed;
                        let (_, acc) =
                            trainer::evaluate_noisy(model, &data.test, sigma, noise_seed)?;
                        accs.push(acc);
                    }
                    let (mean, std) = crate::numerics::mean_std(&accs);
                    writeln!(w, "{sigma},{arch},{mean},{std}")?;
                }
            }
            w.flush()?;
            written.push(path);
        }
    }
    Ok(written)
}
