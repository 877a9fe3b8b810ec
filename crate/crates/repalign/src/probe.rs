//! L2-regularized multinomial logistic probe and frozen-probe transfer
//! evaluation.
//!
//! The probe is a measuring instrument, so training is deterministic:
//! full-batch gradient descent with Armijo backtracking from a fixed
//! initialization, stopping at gradient norm ≤ 1e−6 or 10 000 iterations.

use ndarray::{Array1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::activations::ActivationSet;
use crate::error::{Error, Result};
use crate::numerics::{self, Matrix};

const GRAD_TOL: f64 = 1e-6;
const MAX_ITERS: usize = 10_000;
const ARMIJO_C: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Multiclass linear classifier with L2-penalized weights (bias free).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    /// d×C weight matrix.
    pub weights: Matrix,
    /// Per-class bias, length C.
    pub bias: Vec<f64>,
    pub lambda: f64,
    pub classes: usize,
}

/// Mean cross-entropy of the probe on a set, plus `(λ/2)‖W‖_F²`.
pub fn probe_objective(probe: &LinearProbe, x: &ActivationSet) -> Result<f64> {
    let logits = logits_of(probe, x)?;
    let mut loss = 0.0;
    for (row, &label) in logits.rows().into_iter().zip(x.labels()) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        loss += log_sum - row[label as usize];
    }
    loss /= x.n() as f64;
    let w_norm = numerics::frobenius_norm(&probe.weights);
    Ok(loss + 0.5 * probe.lambda * w_norm * w_norm)
}

/// Analytic gradient of [`probe_objective`] with respect to (weights, bias).
pub fn probe_gradient(probe: &LinearProbe, x: &ActivationSet) -> Result<(Matrix, Vec<f64>)> {
    let logits = logits_of(probe, x)?;
    let mut delta = softmax_rows(&logits);
    for (mut row, &label) in delta.rows_mut().into_iter().zip(x.labels()) {
        row[label as usize] -= 1.0;
    }
    let n = x.n() as f64;
    let grad_w = x.features().t().dot(&delta) / n + &(probe.lambda * &probe.weights);
    let grad_b = (delta.sum_axis(Axis(0)) / n).to_vec();
    Ok((grad_w, grad_b))
}

fn logits_of(probe: &LinearProbe, x: &ActivationSet) -> Result<Matrix> {
    if x.dim() != probe.weights.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "probe expects {} input dims, activations have {}",
            probe.weights.nrows(),
            x.dim()
        )));
    }
    let mut logits = x.features().dot(&probe.weights);
    let bias = Array1::from(probe.bias.clone());
    for mut row in logits.rows_mut() {
        row += &bias;
    }
    Ok(logits)
}

fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Train a probe on an activation set from the zero initialization.
pub fn train_probe(x: &ActivationSet, lambda: f64) -> Result<LinearProbe> {
    let init_w = Matrix::zeros((x.dim(), x.num_classes()));
    let init_b = vec![0.0; x.num_classes()];
    train_probe_with_init(x, lambda, init_w, init_b)
}

/// Train a probe from an explicit initialization. The objective is convex,
/// so any starting point reaches the same objective value; this entry point
/// exists to assert exactly that.
pub fn train_probe_with_init(
    x: &ActivationSet,
    lambda: f64,
    init_w: Matrix,
    init_b: Vec<f64>,
) -> Result<LinearProbe> {
    if lambda <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "probe lambda must be positive, got {lambda}"
        )));
    }
    let classes = x.num_classes();
    let mut present = vec![false; classes];
    for &l in x.labels() {
        present[l as usize] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::InvalidArgument(
            "probe training needs at least 2 classes present in the labels".into(),
        ));
    }
    if init_w.dim() != (x.dim(), classes) || init_b.len() != classes {
        return Err(Error::ShapeMismatch(format!(
            "probe init must be {}x{} weights and {} biases",
            x.dim(),
            classes,
            classes
        )));
    }

    let mut probe = LinearProbe {
        weights: init_w,
        bias: init_b,
        lambda,
        classes,
    };
    let mut obj = probe_objective(&probe, x)?;
    let mut step = 1.0;
    for _ in 0..MAX_ITERS {
        let (gw, gb) = probe_gradient(&probe, x)?;
        let grad_sq = numerics::frobenius_norm(&gw).powi(2) + gb.iter().map(|g| g * g).sum::<f64>();
        if grad_sq.sqrt() <= GRAD_TOL {
            break;
        }
        // Armijo backtracking from a step that grows after each success, so
        // the search adapts to local curvature in both directions.
        step *= 2.0;
        let mut accepted = false;
        for _ in 0..MAX_BACKTRACKS {
            let trial = LinearProbe {
                weights: &probe.weights - &(step * &gw),
                bias: probe
                    .bias
                    .iter()
                    .zip(&gb)
                    .map(|(b, g)| b - step * g)
                    .collect(),
                lambda,
                classes,
            };
            let trial_obj = probe_objective(&trial, x)?;
            if trial_obj <= obj - ARMIJO_C * step * grad_sq {
                probe = trial;
                obj = trial_obj;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break; // step underflow: no descent possible at noise level
        }
    }
    Ok(probe)
}

/// Fraction of samples the probe classifies correctly. Argmax ties break
/// toward the lowest class index.
pub fn probe_accuracy(probe: &LinearProbe, x: &ActivationSet) -> Result<f64> {
    let logits = logits_of(probe, x)?;
    let mut correct = 0usize;
    for (row, &label) in logits.rows().into_iter().zip(x.labels()) {
        let mut best = 0usize;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        if best == label as usize {
            correct += 1;
        }
    }
    Ok(correct as f64 / x.n() as f64)
}

/// Cross-model transfer summary over random splits.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TransferOutcome {
    /// Mean accuracy of source-trained probes evaluated on the target.
    pub mean: f64,
    /// Standard deviation across splits.
    pub std: f64,
    /// Mean accuracy of the same probes evaluated on the source (baseline).
    pub same_model_mean: f64,
}

/// Frozen-probe transfer: over `splits` random 50/50 partitions, fit a probe
/// on the source half and evaluate it on the target's held-out half; the
/// same probe evaluated on the source's held-out half is the same-model
/// baseline. Both sets must share labels and sample order, so identical
/// inputs give `mean == same_model_mean` exactly.
pub fn transfer_eval(
    source: &ActivationSet,
    target: &ActivationSet,
    lambda: f64,
    splits: usize,
) -> Result<TransferOutcome> {
    if source.labels() != target.labels() {
        return Err(Error::InvalidArgument(
            "transfer needs identical labels and sample order on source and target".into(),
        ));
    }
    if source.dim() != target.dim() {
        return Err(Error::ShapeMismatch(format!(
            "source has {} dims, target {}; project to a common width first",
            source.dim(),
            target.dim()
        )));
    }
    if splits < 2 {
        return Err(Error::InvalidArgument(format!(
            "transfer needs at least 2 splits, got {splits}"
        )));
    }
    let n = source.n();
    if n < 4 {
        return Err(Error::InvalidArgument(format!(
            "transfer needs at least 4 samples for 50/50 splits, got {n}"
        )));
    }

    let mut transfer_accs = Vec::with_capacity(splits);
    let mut same_accs = Vec::with_capacity(splits);
    for split in 0..splits {
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5EED_5711 ^ split as u64);
        idx.shuffle(&mut rng);
        let (fit_idx, eval_idx) = idx.split_at(n / 2);
        let fit = subset(source, fit_idx)?;
        let probe = train_probe(&fit, lambda)?;
        same_accs.push(probe_accuracy(&probe, &subset(source, eval_idx)?)?);
        transfer_accs.push(probe_accuracy(&probe, &subset(target, eval_idx)?)?);
    }
    let (mean, std) = numerics::mean_std(&transfer_accs);
    let (same_model_mean, _) = numerics::mean_std(&same_accs);
    Ok(TransferOutcome {
        mean,
        std,
        same_model_mean,
    })
}

fn subset(a: &ActivationSet, idx: &[usize]) -> Result<ActivationSet> {
    let features = a.features().select(Axis(0), idx);
    let labels = idx.iter().map(|&i| a.labels()[i]).collect();
    ActivationSet::new(features, labels, a.num_classes(), a.meta().clone())
}
