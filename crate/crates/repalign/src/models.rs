//! Model zoo: baseline MLP, the structured-projection network (PGNN), and
//! its structure-free ablation, plus forward/backward passes, deterministic
//! seeded builds, activation extraction, and binary checkpoints.
//!
//! A PGNN hidden layer computes `S·W·x + φ(x)` where `S` is a frozen rank-r
//! orthogonal projector and `φ` is a small tanh corrective path; the
//! ablation replaces the whole layer with a standard dense+ReLU layer. The
//! main weight matrices of all three architectures draw from the same
//! per-layer seeded streams, so inits match wherever shapes coincide.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{Array1, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activations::{ActivationMeta, ActivationSet};
use crate::error::{Error, Result};
use crate::numerics::{self, Matrix};

/// Elementwise nonlinearity of a dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(&self, z: &Matrix) -> Matrix {
        match self {
            // NaN must propagate (f64::max would swallow it)
            Activation::Relu => z.mapv(|v| if v.is_nan() { v } else { v.max(0.0) }),
            Activation::Tanh => z.mapv(f64::tanh),
            Activation::Identity => z.clone(),
        }
    }

    /// Derivative expressed through pre-activation `z` and output `out`.
    fn backprop(&self, dout: &Matrix, z: &Matrix, out: &Matrix) -> Matrix {
        match self {
            Activation::Relu => {
                let mut dz = dout.clone();
                dz.zip_mut_with(z, |d, &zv| {
                    if zv <= 0.0 {
                        *d = 0.0;
                    }
                });
                dz
            }
            Activation::Tanh => {
                let mut dz = dout.clone();
                dz.zip_mut_with(out, |d, &o| *d *= 1.0 - o * o);
                dz
            }
            Activation::Identity => dout.clone(),
        }
    }
}

/// Architecture family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchId {
    Mlp,
    Pgnn,
    #[serde(rename = "pgnn_nostruct")]
    PgnnNoStruct,
}

impl std::fmt::Display for ArchId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ArchId::Mlp => "mlp",
            ArchId::Pgnn => "pgnn",
            ArchId::PgnnNoStruct => "pgnn_nostruct",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for ArchId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(ArchId::Mlp),
            "pgnn" => Ok(ArchId::Pgnn),
            "pgnn_nostruct" => Ok(ArchId::PgnnNoStruct),
            other => Err(Error::InvalidArgument(format!(
                "unknown architecture '{other}' (expected mlp, pgnn, or pgnn_nostruct)"
            ))),
        }
    }
}

/// Network width configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
    /// Rank of the frozen projector in structured layers.
    pub proj_rank: usize,
}

impl ModelDims {
    /// Desk-scale defaults: two hidden layers of width 128 and projector
    /// rank 64, clamped to the narrowest structured-layer interface so the
    /// configuration stays valid for thin inputs.
    pub fn for_task(input: usize, classes: usize) -> Self {
        let hidden = vec![128, 128];
        let proj_rank = 64.min(input).min(128);
        ModelDims {
            input,
            hidden,
            classes,
            proj_rank,
        }
    }

    pub fn validate(&self, arch: ArchId) -> Result<()> {
        if self.input == 0 {
            return Err(Error::InvalidArgument("input dim must be positive".into()));
        }
        if self.classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 classes, got {}",
                self.classes
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidArgument(
                "hidden widths must be positive".into(),
            ));
        }
        if arch == ArchId::Pgnn {
            if self.proj_rank == 0 {
                return Err(Error::InvalidArgument(
                    "projector rank must be positive".into(),
                ));
            }
            let mut in_dim = self.input;
            for (i, &width) in self.hidden.iter().enumerate() {
                if self.proj_rank > in_dim.min(width) {
                    return Err(Error::InvalidArgument(format!(
                        "projector rank {} exceeds min(in, out) = {} at hidden layer {}",
                        self.proj_rank,
                        in_dim.min(width),
                        i + 1
                    )));
                }
                in_dim = width;
            }
        }
        Ok(())
    }
}

/// Shape-level description of a layer (parameters live in [`Layer`]).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LayerSpec {
    Dense {
        input: usize,
        output: usize,
        activation: Activation,
    },
    StructuredProjection {
        input: usize,
        output: usize,
        proj_rank: usize,
        corrective_hidden: usize,
    },
    Flatten,
}

/// A layer with its parameter tensors. Weight matrices are stored
/// output-major (out×in) and applied as `x·Wᵀ`.
// Variant sizes differ only in tensor headers; the data is heap-backed,
// so boxing the large variant would add indirection for nothing.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense {
        w: Matrix,
        b: Array1<f64>,
        activation: Activation,
    },
    /// `S·W·x + φ(x)` with `φ(x) = tanh(x·W1ᵀ + b1)·W2ᵀ + b2`. `S` is a
    /// frozen orthogonal projector: symmetric, idempotent, and excluded
    /// from gradients, flat parameter vectors, and checkpoints.
    Structured {
        s: Matrix,
        w: Matrix,
        phi_w1: Matrix,
        phi_b1: Array1<f64>,
        phi_w2: Matrix,
        phi_b2: Array1<f64>,
    },
    Flatten,
}

impl Layer {
    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Dense { w, activation, .. } => LayerSpec::Dense {
                input: w.ncols(),
                output: w.nrows(),
                activation: *activation,
            },
            Layer::Structured { s, w, phi_w1, .. } => LayerSpec::StructuredProjection {
                input: w.ncols(),
                output: w.nrows(),
                proj_rank: s.diag().sum().round() as usize,
                corrective_hidden: phi_w1.nrows(),
            },
            Layer::Flatten => LayerSpec::Flatten,
        }
    }

    fn param_count(&self) -> usize {
        match self {
            Layer::Dense { w, b, .. } => w.len() + b.len(),
            Layer::Structured {
                w,
                phi_w1,
                phi_b1,
                phi_w2,
                phi_b2,
                ..
            } => w.len() + phi_w1.len() + phi_b1.len() + phi_w2.len() + phi_b2.len(),
            Layer::Flatten => 0,
        }
    }
}

/// Per-layer gradients, aligned with [`NetworkModel::params_flat`] ordering.
#[derive(Debug, Clone)]
pub enum LayerGrads {
    Dense {
        w: Matrix,
        b: Array1<f64>,
    },
    Structured {
        w: Matrix,
        phi_w1: Matrix,
        phi_b1: Array1<f64>,
        phi_w2: Matrix,
        phi_b2: Array1<f64>,
    },
    None,
}

/// Gradients for every learnable parameter of a model.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
}

impl Gradients {
    /// Flatten in the same order as [`NetworkModel::params_flat`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for g in &self.layers {
            match g {
                LayerGrads::Dense { w, b } => {
                    out.extend(w.iter());
                    out.extend(b.iter());
                }
                LayerGrads::Structured {
                    w,
                    phi_w1,
                    phi_b1,
                    phi_w2,
                    phi_b2,
                } => {
                    out.extend(w.iter());
                    out.extend(phi_w1.iter());
                    out.extend(phi_b1.iter());
                    out.extend(phi_w2.iter());
                    out.extend(phi_b2.iter());
                }
                LayerGrads::None => {}
            }
        }
        out
    }
}

/// A layered differentiable model.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub arch_id: ArchId,
    pub dims: ModelDims,
    pub seed: u64,
    /// Training epoch the parameters correspond to (0 = fresh init).
    pub epoch: u32,
    pub(crate) layers: Vec<Layer>,
}

const ROLE_MAIN: u64 = 0;
const ROLE_PROJ: u64 = 1;
const ROLE_PHI1: u64 = 2;
const ROLE_PHI2: u64 = 3;

/// Independent deterministic stream per (seed, layer, parameter role), so
/// architectures can share main-weight inits without coupling the rest.
fn param_stream(seed: u64, layer: usize, role: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(
        seed ^ (layer as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
            ^ role.wrapping_mul(0xD1B5_4A32_D192_ED03),
    )
}

fn uniform_fan_in(rows: usize, cols: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Matrix::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
}

/// Rank-`rank` orthogonal projector `U·Uᵀ` from a seeded Gaussian draw.
fn random_projector(dim: usize, rank: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let g = numerics::gaussian_matrix(dim, rank, rng);
    let u = numerics::orthonormalize_columns(&g);
    u.dot(&u.t())
}

/// Construct a seeded model of the given architecture.
///
/// `mlp` is a dense+ReLU stack; `pgnn` replaces each hidden layer with a
/// structured projection layer; `pgnn_nostruct` drops the projector and the
/// corrective path, leaving a standard dense+ReLU layer with the same main
/// weight init as the PGNN. The output layer is always dense with identity
/// activation (logits).
pub fn build(arch_id: ArchId, dims: &ModelDims, seed: u64) -> Result<NetworkModel> {
    dims.validate(arch_id)?;
    let mut layers = Vec::with_capacity(dims.hidden.len() + 1);
    let mut in_dim = dims.input;
    for (li, &width) in dims.hidden.iter().enumerate() {
        let w = uniform_fan_in(
            width,
            in_dim,
            in_dim,
            &mut param_stream(seed, li, ROLE_MAIN),
        );
        let layer = match arch_id {
            ArchId::Mlp | ArchId::PgnnNoStruct => Layer::Dense {
                w,
                b: Array1::zeros(width),
                activation: Activation::Relu,
            },
            ArchId::Pgnn => {
                let s = random_projector(
                    width,
                    dims.proj_rank,
                    &mut param_stream(seed, li, ROLE_PROJ),
                );
                let corrective = width.div_ceil(2);
                Layer::Structured {
                    s,
                    w,
                    phi_w1: uniform_fan_in(
                        corrective,
                        in_dim,
                        in_dim,
                        &mut param_stream(seed, li, ROLE_PHI1),
                    ),
                    phi_b1: Array1::zeros(corrective),
                    phi_w2: uniform_fan_in(
                        width,
                        corrective,
                        corrective,
                        &mut param_stream(seed, li, ROLE_PHI2),
                    ),
                    phi_b2: Array1::zeros(width),
                }
            }
        };
        layers.push(layer);
        in_dim = width;
    }
    let out_layer = dims.hidden.len();
    layers.push(Layer::Dense {
        w: uniform_fan_in(
            dims.classes,
            in_dim,
            in_dim,
            &mut param_stream(seed, out_layer, ROLE_MAIN),
        ),
        b: Array1::zeros(dims.classes),
        activation: Activation::Identity,
    });
    Ok(NetworkModel {
        arch_id,
        dims: dims.clone(),
        seed,
        epoch: 0,
        layers,
    })
}

enum LayerCache {
    Dense { input: Matrix, z: Matrix },
    Structured { input: Matrix, h: Matrix },
    Flatten,
}

impl NetworkModel {
    /// "arch:seed", the canonical model identifier used in metadata.
    pub fn model_id(&self) -> String {
        format!("{}:{}", self.arch_id, self.seed)
    }

    /// Hidden layer names followed by "logits".
    pub fn layer_ids(&self) -> Vec<String> {
        let hidden = self.layers.len() - 1;
        (1..=hidden)
            .map(|i| format!("h{i}"))
            .chain(std::iter::once("logits".into()))
            .collect()
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    /// The frozen projectors of structured layers, in layer order.
    pub fn structured_projectors(&self) -> Vec<&Matrix> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Structured { s, .. } => Some(s),
                _ => None,
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// All learnable parameters, flattened in a fixed order (per layer:
    /// dense w then b; structured w, phi_w1, phi_b1, phi_w2, phi_b2).
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            match layer {
                Layer::Dense { w, b, .. } => {
                    out.extend(w.iter());
                    out.extend(b.iter());
                }
                Layer::Structured {
                    w,
                    phi_w1,
                    phi_b1,
                    phi_w2,
                    phi_b2,
                    ..
                } => {
                    out.extend(w.iter());
                    out.extend(phi_w1.iter());
                    out.extend(phi_b1.iter());
                    out.extend(phi_w2.iter());
                    out.extend(phi_b2.iter());
                }
                Layer::Flatten => {}
            }
        }
        out
    }

    /// Load a flat parameter vector produced by [`params_flat`].
    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut it = params.iter().copied();
        let mut take = move || it.next().expect("length checked above");
        for layer in &mut self.layers {
            match layer {
                Layer::Dense { w, b, .. } => {
                    w.iter_mut().for_each(|v| *v = take());
                    b.iter_mut().for_each(|v| *v = take());
                }
                Layer::Structured {
                    w,
                    phi_w1,
                    phi_b1,
                    phi_w2,
                    phi_b2,
                    ..
                } => {
                    w.iter_mut().for_each(|v| *v = take());
                    phi_w1.iter_mut().for_each(|v| *v = take());
                    phi_b1.iter_mut().for_each(|v| *v = take());
                    phi_w2.iter_mut().for_each(|v| *v = take());
                    phi_b2.iter_mut().for_each(|v| *v = take());
                }
                Layer::Flatten => {}
            }
        }
        Ok(())
    }

    /// Run a batch through the model, returning every layer's activations
    /// (hidden layers post-nonlinearity; the last entry is the logits).
    pub fn forward(&self, batch: &Matrix) -> Result<Vec<Matrix>> {
        Ok(self.forward_cached(batch)?.0)
    }

    fn forward_cached(&self, batch: &Matrix) -> Result<(Vec<Matrix>, Vec<LayerCache>)> {
        if batch.ncols() != self.dims.input {
            return Err(Error::ShapeMismatch(format!(
                "model expects {} input dims, batch has {}",
                self.dims.input,
                batch.ncols()
            )));
        }
        if batch.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite input batch fed to {}",
                self.model_id()
            )));
        }
        let mut outputs = Vec::with_capacity(self.layers.len());
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = batch.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let out = match layer {
                Layer::Dense { w, b, activation } => {
                    let z = x.dot(&w.t()) + b;
                    let out = activation.apply(&z);
                    caches.push(LayerCache::Dense { input: x, z });
                    out
                }
                Layer::Structured {
                    s,
                    w,
                    phi_w1,
                    phi_b1,
                    phi_w2,
                    phi_b2,
                } => {
                    let lin = x.dot(&w.t());
                    let h = (x.dot(&phi_w1.t()) + phi_b1).mapv(f64::tanh);
                    let out = lin.dot(&s.t()) + h.dot(&phi_w2.t()) + phi_b2;
                    caches.push(LayerCache::Structured { input: x, h });
                    out
                }
                Layer::Flatten => {
                    caches.push(LayerCache::Flatten);
                    x
                }
            };
            if out.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical(format!(
                    "non-finite activation at layer {} of {}",
                    i + 1,
                    self.model_id()
                )));
            }
            x = out.clone();
            outputs.push(out);
        }
        Ok((outputs, caches))
    }

    /// Mean cross-entropy loss and gradients for all learnable parameters
    /// (frozen projectors receive none).
    pub fn backward(&self, batch: &Matrix, labels: &[u32]) -> Result<(f64, Gradients)> {
        if labels.len() != batch.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} samples but {} labels",
                batch.nrows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= self.dims.classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {} classes",
                self.dims.classes
            )));
        }
        let (outputs, caches) = self.forward_cached(batch)?;
        let logits = outputs.last().expect("models have at least one layer");
        let (loss, mut dout) = softmax_cross_entropy(logits, labels);

        let mut grads = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            match (&self.layers[i], &caches[i]) {
                (Layer::Dense { w, activation, .. }, LayerCache::Dense { input, z }) => {
                    let dz = activation.backprop(&dout, z, &outputs[i]);
                    let gw = dz.t().dot(input);
                    let gb = dz.sum_axis(Axis(0));
                    dout = dz.dot(w);
                    grads.push(LayerGrads::Dense { w: gw, b: gb });
                }
                (
                    Layer::Structured {
                        s,
                        w,
                        phi_w1,
                        phi_w2,
                        ..
                    },
                    LayerCache::Structured { input, h },
                ) => {
                    let dlin = dout.dot(s);
                    let gw = dlin.t().dot(input);
                    let mut dz1 = dout.dot(phi_w2);
                    dz1.zip_mut_with(h, |d, &hv| *d *= 1.0 - hv * hv);
                    let g_phi_w1 = dz1.t().dot(input);
                    let g_phi_b1 = dz1.sum_axis(Axis(0));
                    let g_phi_w2 = dout.t().dot(h);
                    let g_phi_b2 = dout.sum_axis(Axis(0));
                    dout = dlin.dot(w) + dz1.dot(phi_w1);
                    grads.push(LayerGrads::Structured {
                        w: gw,
                        phi_w1: g_phi_w1,
                        phi_b1: g_phi_b1,
                        phi_w2: g_phi_w2,
                        phi_b2: g_phi_b2,
                    });
                }
                (Layer::Flatten, LayerCache::Flatten) => grads.push(LayerGrads::None),
                _ => unreachable!("cache kind always matches layer kind"),
            }
        }
        grads.reverse();
        Ok((loss, Gradients { layers: grads }))
    }
}

/// Numerically stable mean softmax cross-entropy; returns the loss and its
/// gradient with respect to the logits (already divided by batch size).
pub(crate) fn softmax_cross_entropy(logits: &Matrix, labels: &[u32]) -> (f64, Matrix) {
    let n = logits.nrows() as f64;
    let mut dlogits = logits.clone();
    let mut loss = 0.0;
    for (mut row, &y) in dlogits.rows_mut().into_iter().zip(labels) {
        let ly = row[y as usize];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        loss += sum.ln() + max - ly;
        row.mapv_inplace(|p| p / sum);
        row[y as usize] -= 1.0;
    }
    (loss / n, dlogits / n)
}

/// Run the model over a feature matrix and package one layer's activations
/// with labels and provenance.
pub fn extract_activations(
    model: &NetworkModel,
    features: &Matrix,
    labels: &[u32],
    num_classes: usize,
    layer_id: &str,
    dataset_id: &str,
) -> Result<ActivationSet> {
    let ids = model.layer_ids();
    let Some(index) = ids.iter().position(|id| id == layer_id) else {
        return Err(Error::InvalidArgument(format!(
            "unknown layer '{}'; valid layers: {}",
            layer_id,
            ids.join(", ")
        )));
    };
    let outputs = model.forward(features)?;
    let meta = ActivationMeta {
        model_id: model.model_id(),
        layer_id: layer_id.to_string(),
        seed: model.seed,
        dataset_id: dataset_id.to_string(),
        epoch: model.epoch,
    };
    ActivationSet::new(outputs[index].clone(), labels.to_vec(), num_classes, meta)
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"RMC1";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    arch_id: ArchId,
    dims: ModelDims,
    seed: u64,
    epoch: u32,
}

/// Save the model: JSON header (architecture, dims, seed, epoch) plus a
/// little-endian float32 blob of the learnable parameters. Frozen
/// projectors are regenerated from the seed on load.
pub fn save_checkpoint(model: &NetworkModel, path: &Path) -> Result<()> {
    let header = serde_json::to_vec(&CheckpointHeader {
        arch_id: model.arch_id,
        dims: model.dims.clone(),
        seed: model.seed,
        epoch: model.epoch,
    })?;
    let params = model.params_flat();
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
    w.write_u32::<LittleEndian>(header.len() as u32)?;
    w.write_all(&header)?;
    w.write_u32::<LittleEndian>(params.len() as u32)?;
    for p in params {
        w.write_f32::<LittleEndian>(p as f32)?;
    }
    w.flush()?;
    Ok(())
}

fn read_err(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("truncated checkpoint file".into())
    } else {
        Error::Io(e)
    }
}

/// Load a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<NetworkModel> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(read_err)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!(
            "bad checkpoint magic {:?}, expected {:?}",
            magic, CHECKPOINT_MAGIC
        )));
    }
    let version = r.read_u32::<LittleEndian>().map_err(read_err)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: CHECKPOINT_VERSION,
        });
    }
    let header_len = r.read_u32::<LittleEndian>().map_err(read_err)? as usize;
    let mut header_buf = vec![0u8; header_len];
    r.read_exact(&mut header_buf).map_err(read_err)?;
    let header: CheckpointHeader = serde_json::from_slice(&header_buf)
        .map_err(|e| Error::Format(format!("bad checkpoint header: {e}")))?;

    let mut model = build(header.arch_id, &header.dims, header.seed)?;
    model.epoch = header.epoch;
    let n_params = r.read_u32::<LittleEndian>().map_err(read_err)? as usize;
    if n_params != model.param_count() {
        return Err(Error::Format(format!(
            "checkpoint has {} parameters but the architecture needs {}",
            n_params,
            model.param_count()
        )));
    }
    let mut params = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        params.push(r.read_f32::<LittleEndian>().map_err(read_err)? as f64);
    }
    let mut trailing = [0u8; 1];
    match r.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => {
            return Err(Error::Format(
                "trailing bytes after checkpoint payload".into(),
            ))
        }
        Err(e) => return Err(read_err(e)),
    }
    model.set_params_flat(&params)?;
    Ok(model)
}
