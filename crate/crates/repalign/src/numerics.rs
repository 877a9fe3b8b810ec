//! Dense real-matrix kernels used by every other module: SVD, orthonormal
//! bases, least squares, and a few small helpers.
//!
//! All computation is in `f64`, even where inputs originate as `f32`
//! (principal angles near zero lose too much precision in single precision).
//! The SVD uses one-sided Jacobi rotations: deterministic, accurate for the
//! desk-scale matrices this crate handles, and free of platform-dependent
//! branching. Singular values come back non-increasing and each left singular
//! vector is sign-fixed so that its largest-magnitude entry is positive,
//! making outputs reproducible across runs and platforms.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Row-major dense real matrix: samples are rows, features are columns.
pub type Matrix = Array2<f64>;

/// Thin singular value decomposition `A = U Σ Vᵀ`.
///
/// For an `m×n` input with `r = min(m, n)`: `u` is `m×r` with orthonormal
/// columns, `sigma` holds the `r` singular values in non-increasing order,
/// and `v` is `n×r` with orthonormal columns. Columns of `u` paired with
/// zero singular values are completed to an orthonormal set, so the
/// orthogonality invariants hold even for rank-deficient input.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

/// Largest absolute entry, `‖A‖_max`.
pub fn max_abs(a: &Matrix) -> f64 {
    a.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
}

/// Frobenius norm `‖A‖_F`.
pub fn frobenius_norm(a: &Matrix) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖UᵀU − I‖_max`, a cheap orthonormality defect measure.
pub fn orthonormality_defect(u: &Matrix) -> f64 {
    let gram = u.t().dot(u);
    let k = gram.nrows();
    let mut worst = 0.0_f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// Subtract each column's mean; returns the centered matrix.
pub fn center_columns(a: &Matrix) -> Matrix {
    let means = a.mean_axis(Axis(0)).expect("non-empty matrix");
    a - &means
}

pub(crate) fn ensure_nonempty(a: &Matrix, what: &str) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::InvalidInput(format!(
            "{what} must have at least one row and one column, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// Reject matrices containing NaN or infinities.
pub fn ensure_finite(a: &Matrix, what: &str) -> Result<()> {
    ensure_nonempty(a, what)?;
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{what} contains non-finite values"
        )));
    }
    Ok(())
}

/// Matrix of i.i.d. standard normal entries, drawn row-major from `rng`.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Matrix {
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    Matrix::from_shape_vec((rows, cols), data).expect("shape matches data length")
}

/// Seeded random orthogonal matrix (orthonormalized Gaussian).
pub fn random_orthogonal(dim: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gaussian_matrix(dim, dim, &mut rng);
    orthonormalize_columns(&g)
}

/// Orthonormalize the columns of `a` by modified Gram-Schmidt with one
/// re-orthogonalization pass. Columns that turn out linearly dependent are
/// replaced by deterministic completions from the standard basis.
pub fn orthonormalize_columns(a: &Matrix) -> Matrix {
    let (m, n) = (a.nrows(), a.ncols());
    let mut q = a.clone();
    let mut degenerate = Vec::new();
    for j in 0..n {
        for _pass in 0..2 {
            for i in 0..j {
                if degenerate.contains(&i) {
                    continue;
                }
                let proj: f64 = (0..m).map(|r| q[(r, i)] * q[(r, j)]).sum();
                for r in 0..m {
                    q[(r, j)] -= proj * q[(r, i)];
                }
            }
        }
        let norm: f64 = (0..m).map(|r| q[(r, j)] * q[(r, j)]).sum::<f64>().sqrt();
        if norm <= 1e-12 {
            degenerate.push(j);
        } else {
            for r in 0..m {
                q[(r, j)] /= norm;
            }
        }
    }
    if !degenerate.is_empty() {
        complete_orthonormal_columns(&mut q, &degenerate);
    }
    q
}

/// Fill the listed columns of `u` with vectors orthonormal to every other
/// column, chosen deterministically from the standard basis.
fn complete_orthonormal_columns(u: &mut Matrix, holes: &[usize]) {
    let (m, n) = (u.nrows(), u.ncols());
    let mut filled: Vec<bool> = (0..n).map(|j| !holes.contains(&j)).collect();
    for &j in holes {
        let accept = (1.0 / (2.0 * m as f64)).sqrt();
        'basis: for e in 0..m {
            let mut cand = vec![0.0; m];
            cand[e] = 1.0;
            for _pass in 0..2 {
                for k in 0..n {
                    if !filled[k] {
                        continue;
                    }
                    let proj: f64 = (0..m).map(|r| u[(r, k)] * cand[r]).sum();
                    for (r, c) in cand.iter_mut().enumerate() {
                        *c -= proj * u[(r, k)];
                    }
                }
            }
            let norm: f64 = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm >= accept {
                for (r, c) in cand.iter().enumerate() {
                    u[(r, j)] = c / norm;
                }
                filled[j] = true;
                continue 'basis;
            }
        }
        debug_assert!(filled[j], "basis completion must succeed for m >= n");
    }
}

/// Singular value decomposition, `A = U Σ Vᵀ`.
///
/// Deterministic for a fixed input. Errors with `InvalidInput` on non-finite
/// entries or an empty matrix.
pub fn svd(a: &Matrix) -> Result<SvdResult> {
    ensure_finite(a, "svd input")?;
    if a.nrows() >= a.ncols() {
        svd_tall(a)
    } else {
        // Factor the transpose and swap the roles of U and V.
        let at = a.t().to_owned();
        let r = svd_tall(&at)?;
        Ok(SvdResult {
            u: r.v,
            sigma: r.sigma,
            v: r.u,
        })
    }
}

/// Rotate rows `p` and `q` (p < q) of a flat row-major buffer in place.
fn rotate_rows(data: &mut [f64], cols: usize, p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = data.split_at_mut(q * cols);
    let rp = &mut head[p * cols..(p + 1) * cols];
    let rq = &mut tail[..cols];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let (xv, yv) = (*x, *y);
        *x = c * xv - s * yv;
        *y = s * xv + c * yv;
    }
}

fn row_dot(data: &[f64], cols: usize, i: usize, j: usize) -> f64 {
    let ri = &data[i * cols..(i + 1) * cols];
    let rj = &data[j * cols..(j + 1) * cols];
    ri.iter().zip(rj).map(|(a, b)| a * b).sum()
}

/// One-sided Jacobi SVD for `m >= n`. Works on the transposed copy so each
/// column of A is a contiguous row of the working buffer.
fn svd_tall(a: &Matrix) -> Result<SvdResult> {
    let (m, n) = (a.nrows(), a.ncols());
    debug_assert!(m >= n);

    // bt row j = column j of A; vt row j = column j of V.
    let mut bt = vec![0.0_f64; n * m];
    for i in 0..m {
        for j in 0..n {
            bt[j * m + i] = a[(i, j)];
        }
    }
    let mut vt = vec![0.0_f64; n * n];
    for j in 0..n {
        vt[j * n + j] = 1.0;
    }

    const MAX_SWEEPS: usize = 64;
    const CONV_TOL: f64 = 1e-15;
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let alpha = row_dot(&bt, m, p, p);
                let beta = row_dot(&bt, m, q, q);
                let gamma = row_dot(&bt, m, p, q);
                if gamma == 0.0 || alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= CONV_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut bt, m, p, q, c, s);
                rotate_rows(&mut vt, n, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n).map(|j| row_dot(&bt, m, j, j).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        norms[j]
            .partial_cmp(&norms[i])
            .expect("norms are finite")
            .then(i.cmp(&j))
    });

    let mut u = Matrix::zeros((m, n));
    let mut v = Matrix::zeros((n, n));
    let mut sigma = Vec::with_capacity(n);
    let mut holes = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        let s = norms[src];
        sigma.push(s);
        if s > 0.0 {
            for i in 0..m {
                u[(i, dst)] = bt[src * m + i] / s;
            }
        } else {
            holes.push(dst);
        }
        for i in 0..n {
            v[(i, dst)] = vt[src * n + i];
        }
    }
    if !holes.is_empty() {
        complete_orthonormal_columns(&mut u, &holes);
    }

    // Sign convention: largest-magnitude entry of each U column is positive.
    for j in 0..n {
        let mut best = 0usize;
        let mut best_abs = u[(0, j)].abs();
        for i in 1..m {
            let a = u[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if u[(best, j)] < 0.0 {
            for i in 0..m {
                u[(i, j)] = -u[(i, j)];
            }
            for i in 0..n {
                v[(i, j)] = -v[(i, j)];
            }
        }
    }

    Ok(SvdResult { u, sigma, v })
}

/// Orthonormal basis for the span of the top-`k` right singular vectors of
/// `a` (feature-space directions). Returns a `cols×k` matrix.
pub fn orthonormal_basis_topk(a: &Matrix, k: usize) -> Result<Matrix> {
    let limit = a.nrows().min(a.ncols());
    if k == 0 || k > limit {
        return Err(Error::InvalidArgument(format!(
            "k={k} out of range 1..={limit} for a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let dec = svd(a)?;
    Ok(dec.v.slice(ndarray::s![.., ..k]).to_owned())
}

/// Minimum-norm solution of `min_X ‖AX − B‖_F` via SVD pseudoinverse.
///
/// Singular values below `max(m, n)·eps·σ₁` are treated as zero, so
/// rank-deficient systems get the minimum-norm solution.
pub fn least_squares(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    ensure_finite(b, "least_squares rhs")?;
    if a.nrows() != b.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "least_squares: A has {} rows but B has {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let dec = svd(a)?;
    let tol =
        dec.sigma.first().copied().unwrap_or(0.0) * a.nrows().max(a.ncols()) as f64 * f64::EPSILON;
    let mut utb = dec.u.t().dot(b);
    for (i, &s) in dec.sigma.iter().enumerate() {
        let scale = if s > tol { 1.0 / s } else { 0.0 };
        utb.row_mut(i).mapv_inplace(|x| x * scale);
    }
    Ok(dec.v.dot(&utb))
}

/// Mean and sample standard deviation (n−1 denominator; 0 when n < 2).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[allow(dead_code)]
pub(crate) fn column_vector(v: &[f64]) -> Array1<f64> {
    Array1::from_vec(v.to_vec())
}
