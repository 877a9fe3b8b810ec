//! Geometric alignment battery: linear CKA, principal angles, subspace
//! overlap, and linear alignment maps (Procrustes, least squares, CCA).
//!
//! All metrics column-center defensively, so callers may pass raw or
//! pre-normalized activations. Map fitting works on the features as given.

use serde::{Deserialize, Serialize};

use crate::activations::{ActivationMeta, ActivationSet};
use crate::error::{Error, Result};
use crate::numerics::{self, Matrix};

/// Linear CKA between two activation sets over the same samples.
///
/// Both matrices are column-centered, then
/// `‖YᵀX‖_F² / (‖XᵀX‖_F · ‖YᵀY‖_F)` is returned. The value is invariant to
/// orthogonal transforms and isotropic rescaling of either input, and is 0
/// when either input centers to the zero matrix.
pub fn cka(x: &ActivationSet, y: &ActivationSet) -> Result<f64> {
    cka_features(x.features(), y.features())
}

/// [`cka`] on raw matrices (rows are paired samples).
pub fn cka_features(x: &Matrix, y: &Matrix) -> Result<f64> {
    if x.nrows() != y.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "cka needs paired samples, got {} vs {} rows",
            x.nrows(),
            y.nrows()
        )));
    }
    let xc = numerics::center_columns(x);
    let yc = numerics::center_columns(y);
    let cross = numerics::frobenius_norm(&yc.t().dot(&xc));
    let x_gram = numerics::frobenius_norm(&xc.t().dot(&xc));
    let y_gram = numerics::frobenius_norm(&yc.t().dot(&yc));
    if x_gram == 0.0 || y_gram == 0.0 {
        return Ok(0.0);
    }
    Ok(cross * cross / (x_gram * y_gram))
}

/// Cosines of the principal angles between the column spans of two
/// orthonormal bases: the singular values of `UᵀV`, clamped to `[0,1]`,
/// non-increasing.
pub fn principal_angles(u: &Matrix, v: &Matrix) -> Result<Vec<f64>> {
    if u.nrows() != v.nrows() || u.ncols() != v.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "bases must agree in shape, got {}x{} vs {}x{}",
            u.nrows(),
            u.ncols(),
            v.nrows(),
            v.ncols()
        )));
    }
    for (name, b) in [("first", u), ("second", v)] {
        let defect = numerics::orthonormality_defect(b);
        if defect > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "{name} basis is not orthonormal (defect {defect:.3e})"
            )));
        }
    }
    let overlap = u.t().dot(v);
    let svd = numerics::svd(&overlap)?;
    Ok(svd.sigma.iter().map(|&s| s.clamp(0.0, 1.0)).collect())
}

/// Principal-angle summary between two k-dimensional subspaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceComparison {
    pub k: usize,
    /// cos θ_i, non-increasing, each in [0,1].
    pub cosines: Vec<f64>,
    /// Mean of cos²θ_i, in [0,1].
    pub overlap: f64,
}

/// Default subspace dimensionality: `min(10, d, n−1)`, which captures the
/// high-variance directions while staying rank-safe after centering.
pub fn default_overlap_k(d: usize, n: usize) -> usize {
    10.min(d).min(n.saturating_sub(1)).max(1)
}

/// Overlap between the top-`k` principal subspaces of two activation sets:
/// center both, take the top-`k` right singular bases, and average the
/// squared principal-angle cosines.
pub fn subspace_overlap(
    x: &ActivationSet,
    y: &ActivationSet,
    k: usize,
) -> Result<SubspaceComparison> {
    subspace_overlap_features(x.features(), y.features(), k)
}

/// [`subspace_overlap`] on raw matrices.
pub fn subspace_overlap_features(x: &Matrix, y: &Matrix, k: usize) -> Result<SubspaceComparison> {
    if x.ncols() != y.ncols() {
        return Err(Error::ShapeMismatch(format!(
            "subspaces live in different feature spaces: {} vs {} dims",
            x.ncols(),
            y.ncols()
        )));
    }
    let rank_safe = |m: &Matrix| m.ncols().min(m.nrows().saturating_sub(1));
    let avail = rank_safe(x).min(rank_safe(y));
    if k == 0 || k > avail {
        return Err(Error::InvalidArgument(format!(
            "k={k} outside the rank-safe range 1..={avail}"
        )));
    }
    let bx = numerics::orthonormal_basis_topk(&numerics::center_columns(x), k)?;
    let by = numerics::orthonormal_basis_topk(&numerics::center_columns(y), k)?;
    let cosines = principal_angles(&bx, &by)?;
    let overlap = cosines.iter().map(|c| c * c).sum::<f64>() / k as f64;
    Ok(SubspaceComparison {
        k,
        cosines,
        overlap,
    })
}

/// Family of linear alignment maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    /// Orthogonal map minimizing ‖XT − Y‖_F (requires equal dims).
    Procrustes,
    /// Minimum-norm unconstrained least-squares map.
    LeastSquares,
    /// Canonical-correlation map through whitened coordinates.
    Cca,
}

impl std::fmt::Display for MapKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MapKind::Procrustes => "procrustes",
            MapKind::LeastSquares => "least_squares",
            MapKind::Cca => "cca",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for MapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "procrustes" => Ok(MapKind::Procrustes),
            "least_squares" => Ok(MapKind::LeastSquares),
            "cca" => Ok(MapKind::Cca),
            other => Err(Error::InvalidArgument(format!(
                "unknown map kind '{other}' (expected procrustes, least_squares, or cca)"
            ))),
        }
    }
}

/// Diagnostics specific to CCA maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcaInfo {
    /// Canonical correlations, non-increasing, each in [0,1].
    pub correlations: Vec<f64>,
    /// Ridge added to a rank-deficient whitening matrix, if any.
    pub ridge: Option<f64>,
}

/// A fitted linear map from one representation space to another.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentMap {
    pub kind: MapKind,
    /// d1×d2 matrix applied on the right: mapped = X · transform.
    pub transform: Matrix,
    /// ‖XT − Y‖_F / ‖Y‖_F on the fitting data (absolute when ‖Y‖ = 0).
    pub fit_residual: f64,
    /// Present iff `kind == Cca`.
    pub cca: Option<CcaInfo>,
}

/// Fit a linear map taking `x`'s features onto `y`'s. Samples must be
/// paired; Procrustes additionally needs equal dimensionality.
pub fn fit_alignment_map(
    x: &ActivationSet,
    y: &ActivationSet,
    kind: MapKind,
) -> Result<AlignmentMap> {
    fit_alignment_map_features(x.features(), y.features(), kind)
}

/// [`fit_alignment_map`] on raw matrices.
pub fn fit_alignment_map_features(x: &Matrix, y: &Matrix, kind: MapKind) -> Result<AlignmentMap> {
    if x.nrows() != y.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "map fitting needs paired samples, got {} vs {} rows",
            x.nrows(),
            y.nrows()
        )));
    }
    let (transform, cca) = match kind {
        MapKind::Procrustes => {
            if x.ncols() != y.ncols() {
                return Err(Error::ShapeMismatch(format!(
                    "procrustes needs equal dims, got {} vs {}",
                    x.ncols(),
                    y.ncols()
                )));
            }
            let svd = numerics::svd(&x.t().dot(y))?;
            (svd.u.dot(&svd.v.t()), None)
        }
        MapKind::LeastSquares => (numerics::least_squares(x, y)?, None),
        MapKind::Cca => {
            let (t, info) = fit_cca(x, y)?;
            (t, Some(info))
        }
    };
    let residual_num = numerics::frobenius_norm(&(x.dot(&transform) - y));
    let y_norm = numerics::frobenius_norm(y);
    let fit_residual = if y_norm == 0.0 {
        residual_num
    } else {
        residual_num / y_norm
    };
    Ok(AlignmentMap {
        kind,
        transform,
        fit_residual,
        cca,
    })
}

const CCA_RIDGE: f64 = 1e-6;

/// Symmetric PSD matrix raised to ±1/2 through its eigenbasis.
fn sym_pow(a: &Matrix, exponent: f64) -> Result<Matrix> {
    let svd = numerics::svd(a)?;
    let mut out = Matrix::zeros(a.dim());
    for (i, &s) in svd.sigma.iter().enumerate() {
        if s == 0.0 {
            continue; // only reachable for exponent +1/2; 0^{1/2} drops out
        }
        let scale = s.powf(exponent);
        let vi = svd.v.column(i);
        for r in 0..out.nrows() {
            for c in 0..out.ncols() {
                out[(r, c)] += scale * vi[r] * vi[c];
            }
        }
    }
    Ok(out)
}

/// CCA through whitening: with moment matrices Sxx = XᵀX, Syy = YᵀY,
/// Sxy = XᵀY, decompose K = Sxx^{-1/2}·Sxy·Syy^{-1/2} = U·diag(ρ)·Vᵀ and
/// return T = Sxx^{-1/2}·U·diag(ρ)·Vᵀ·Syy^{1/2}. Rank-deficient moments get
/// a ridge before inversion.
fn fit_cca(x: &Matrix, y: &Matrix) -> Result<(Matrix, CcaInfo)> {
    let mut sxx = x.t().dot(x);
    let mut syy = y.t().dot(y);
    let sxy = x.t().dot(y);

    let mut ridge = None;
    for s in [&mut sxx, &mut syy] {
        if needs_ridge(s)? {
            for i in 0..s.nrows() {
                s[(i, i)] += CCA_RIDGE;
            }
            ridge = Some(CCA_RIDGE);
        }
    }

    let sxx_inv_sqrt = sym_pow(&sxx, -0.5)?;
    let syy_inv_sqrt = sym_pow(&syy, -0.5)?;
    let syy_sqrt = sym_pow(&syy, 0.5)?;

    let k_mat = sxx_inv_sqrt.dot(&sxy).dot(&syy_inv_sqrt);
    let svd = numerics::svd(&k_mat)?;
    let correlations: Vec<f64> = svd.sigma.iter().map(|&s| s.clamp(0.0, 1.0)).collect();

    let mut rho = Matrix::zeros((svd.u.ncols(), svd.v.ncols()));
    for (i, &c) in correlations.iter().enumerate() {
        rho[(i, i)] = c;
    }
    let transform = sxx_inv_sqrt
        .dot(&svd.u)
        .dot(&rho)
        .dot(&svd.v.t())
        .dot(&syy_sqrt);
    Ok((
        transform,
        CcaInfo {
            correlations,
            ridge,
        },
    ))
}

fn needs_ridge(s: &Matrix) -> Result<bool> {
    let svd = numerics::svd(s)?;
    let max = svd.sigma.first().copied().unwrap_or(0.0);
    let min = svd.sigma.last().copied().unwrap_or(0.0);
    Ok(max == 0.0 || min <= 1e-10 * max)
}

/// Push an activation set through a fitted map. Labels are preserved; the
/// model id is annotated with the map kind.
pub fn apply_map(map: &AlignmentMap, x: &ActivationSet) -> Result<ActivationSet> {
    if x.dim() != map.transform.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "map expects {} input dims, activations have {}",
            map.transform.nrows(),
            x.dim()
        )));
    }
    let mapped = x.features().dot(&map.transform);
    let meta = ActivationMeta {
        model_id: format!("{}[{}]", x.meta().model_id, map.kind),
        ..x.meta().clone()
    };
    Ok(x.with_features(mapped).with_meta(meta))
}
