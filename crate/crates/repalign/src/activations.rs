//! Typed container for extracted representations, the normalization
//! pipeline, and the RAF on-disk format.
//!
//! RAF v1 is a little-endian binary layout:
//!
//! ```text
//! magic "RAF1" | u32 version=1 | u32 n | u32 d | u32 num_classes
//! | u32 meta_len | meta_len bytes UTF-8 JSON metadata
//! | n*d float32 features (row-major) | n uint32 labels
//! ```
//!
//! No padding, no checksum. Features live on disk as `f32` and are widened
//! to `f64` in memory. Reading a truncated, foreign-endian, or otherwise
//! malformed file fails cleanly with a `Format` error.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{s, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix};

const RAF_MAGIC: &[u8; 4] = b"RAF1";
const RAF_VERSION: u32 = 1;

/// Provenance of an activation matrix: which model, layer, seed, dataset and
/// epoch produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivationMeta {
    pub model_id: String,
    pub layer_id: String,
    pub seed: u64,
    pub dataset_id: String,
    pub epoch: u32,
}

/// An n×d activation matrix with per-sample labels and provenance.
///
/// Immutable after construction; operations return new sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationSet {
    features: Matrix,
    labels: Vec<u32>,
    num_classes: usize,
    meta: ActivationMeta,
}

impl ActivationSet {
    /// Validates the container invariants: at least two samples, one label
    /// per row, labels within `num_classes`, finite features.
    pub fn new(
        features: Matrix,
        labels: Vec<u32>,
        num_classes: usize,
        meta: ActivationMeta,
    ) -> Result<Self> {
        numerics::ensure_finite(&features, "activation features")?;
        if features.nrows() < 2 {
            return Err(Error::InvalidArgument(format!(
                "activation set needs at least 2 samples, got {}",
                features.nrows()
            )));
        }
        if features.nrows() != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
            meta,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn meta(&self) -> &ActivationMeta {
        &self.meta
    }

    /// Number of samples.
    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    /// Representation dimensionality.
    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Same labels in the same order as `other`.
    pub fn labels_match(&self, other: &ActivationSet) -> bool {
        self.labels == other.labels
    }

    /// Replace the feature matrix, keeping labels and metadata.
    pub(crate) fn with_features(&self, features: Matrix) -> ActivationSet {
        ActivationSet {
            features,
            labels: self.labels.clone(),
            num_classes: self.num_classes,
            meta: self.meta.clone(),
        }
    }

    pub(crate) fn with_meta(&self, meta: ActivationMeta) -> ActivationSet {
        ActivationSet {
            features: self.features.clone(),
            labels: self.labels.clone(),
            num_classes: self.num_classes,
            meta,
        }
    }
}

/// What `normalize` did, sufficient to replay it exactly on the raw matrix.
///
/// `column_means` are the means removed in the first centering pass (the
/// dominant shift); replay re-runs the deterministic normalization, so the
/// result is bit-for-bit identical to the stored normalized matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub column_means: Vec<f64>,
    pub row_norm_applied: bool,
}

impl NormalizationRecord {
    /// Re-apply the recorded normalization to a raw matrix. Produces the
    /// stored normalized matrix bit-for-bit when given the original input.
    pub fn apply(&self, raw: &Matrix) -> Result<Matrix> {
        if raw.ncols() != self.column_means.len() {
            return Err(Error::ShapeMismatch(format!(
                "record has {} column means but matrix has {} columns",
                self.column_means.len(),
                raw.ncols()
            )));
        }
        if !self.row_norm_applied {
            let mut out = raw.clone();
            for (j, &m) in self.column_means.iter().enumerate() {
                out.column_mut(j).mapv_inplace(|x| x - m);
            }
            return Ok(out);
        }
        Ok(normalize_features(raw).0)
    }
}

fn normalize_rows(m: &mut Matrix) {
    for mut row in m.rows_mut() {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue; // all-zero rows stay zero
        }
        row.mapv_inplace(|x| x / norm);
    }
}

const NORMALIZE_TOL: f64 = 1e-12;
const NORMALIZE_MAX_PASSES: usize = 256;

fn normalize_features(raw: &Matrix) -> (Matrix, Vec<f64>) {
    let mut out = raw.clone();
    let mut first_means = vec![0.0; raw.ncols()];
    for pass in 0..NORMALIZE_MAX_PASSES {
        let means = out.mean_axis(Axis(0)).expect("n >= 2 by construction");
        if pass == 0 {
            first_means = means.to_vec();
        }
        let mut worst = means.iter().fold(0.0f64, |w, m| w.max(m.abs()));
        for row in out.rows() {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                worst = worst.max((norm - 1.0).abs());
            }
        }
        if worst <= NORMALIZE_TOL {
            break;
        }
        for (j, &m) in means.iter().enumerate() {
            out.column_mut(j).mapv_inplace(|x| x - m);
        }
        normalize_rows(&mut out);
    }
    (out, first_means)
}

/// Normalize to (jointly) zero-mean columns and unit-norm rows.
///
/// Each pass centers every column, then scales every nonzero row to unit
/// Euclidean norm; passes repeat until both properties hold to 1e−12
/// (rows that center to exactly zero stay zero). Because a converged
/// matrix is returned unchanged, normalizing twice equals normalizing
/// once exactly. Jointly unsatisfiable inputs (e.g. a single column whose
/// signs cannot balance) exit at a fixed pass cap with unit rows and
/// best-effort centering.
pub fn normalize(a: &ActivationSet) -> (ActivationSet, NormalizationRecord) {
    let (out, column_means) = normalize_features(&a.features);
    let record = NormalizationRecord {
        column_means,
        row_norm_applied: true,
    };
    (a.with_features(out), record)
}

/// Reconcile the representation width with `target_d`.
///
/// Same width: identity. Wider: project onto the top-`target_d` right
/// singular directions of the feature matrix. Narrower: zero-pad columns.
/// Deterministic and parameter-free.
pub fn project_dims(a: &ActivationSet, target_d: usize) -> Result<ActivationSet> {
    if target_d == 0 {
        return Err(Error::InvalidArgument(
            "target dimensionality must be at least 1".into(),
        ));
    }
    let d = a.dim();
    if d == target_d {
        return Ok(a.clone());
    }
    if d < target_d {
        let mut out = Matrix::zeros((a.n(), target_d));
        out.slice_mut(s![.., ..d]).assign(&a.features);
        return Ok(a.with_features(out));
    }
    // d > target_d: coordinates in the top singular directions. When the
    // matrix has fewer than target_d singular directions (n < target_d),
    // the missing coordinates are exactly zero.
    let avail = target_d.min(a.n()).min(d);
    let basis = numerics::orthonormal_basis_topk(&a.features, avail)?;
    let coords = a.features.dot(&basis);
    if avail == target_d {
        Ok(a.with_features(coords))
    } else {
        let mut out = Matrix::zeros((a.n(), target_d));
        out.slice_mut(s![.., ..avail]).assign(&coords);
        Ok(a.with_features(out))
    }
}

/// Write an activation set in RAF v1 format.
pub fn write_raf(a: &ActivationSet, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let meta_json = serde_json::to_vec(&a.meta)?;
    w.write_all(RAF_MAGIC)?;
    w.write_u32::<LittleEndian>(RAF_VERSION)?;
    w.write_u32::<LittleEndian>(a.n() as u32)?;
    w.write_u32::<LittleEndian>(a.dim() as u32)?;
    w.write_u32::<LittleEndian>(a.num_classes as u32)?;
    w.write_u32::<LittleEndian>(meta_json.len() as u32)?;
    w.write_all(&meta_json)?;
    for &x in a.features.iter() {
        w.write_f32::<LittleEndian>(x as f32)?;
    }
    for &l in &a.labels {
        w.write_u32::<LittleEndian>(l)?;
    }
    w.flush()?;
    Ok(())
}

fn read_err(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("truncated RAF file".into())
    } else {
        Error::Io(e)
    }
}

/// Read an activation set from a RAF v1 file.
pub fn read_raf(path: &Path) -> Result<ActivationSet> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(read_err)?;
    if &magic != RAF_MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            magic, RAF_MAGIC
        )));
    }
    let version = r.read_u32::<LittleEndian>().map_err(read_err)?;
    if version != RAF_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: RAF_VERSION,
        });
    }
    let n = r.read_u32::<LittleEndian>().map_err(read_err)? as usize;
    let d = r.read_u32::<LittleEndian>().map_err(read_err)? as usize;
    let num_classes = r.read_u32::<LittleEndian>().map_err(read_err)? as usize;
    let meta_len = r.read_u32::<LittleEndian>().map_err(read_err)? as usize;
    let mut meta_buf = vec![0u8; meta_len];
    r.read_exact(&mut meta_buf).map_err(read_err)?;
    let meta: ActivationMeta = serde_json::from_slice(&meta_buf)
        .map_err(|e| Error::Format(format!("bad RAF metadata: {e}")))?;

    let mut data = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        data.push(r.read_f32::<LittleEndian>().map_err(read_err)? as f64);
    }
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        labels.push(r.read_u32::<LittleEndian>().map_err(read_err)?);
    }
    let mut trailing = [0u8; 1];
    match r.read(&mut trailing) {
        Ok(0) => {}
        Ok(_) => return Err(Error::Format("trailing bytes after RAF payload".into())),
        Err(e) => return Err(read_err(e)),
    }

    let features = Matrix::from_shape_vec((n, d), data)
        .map_err(|e| Error::Format(format!("bad RAF shape: {e}")))?;
    ActivationSet::new(features, labels, num_classes, meta)
}
