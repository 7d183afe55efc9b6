//! Loss heads. Each returns the scalar loss and the gradient with respect to
//! its first argument.

use crate::error::{shape_err, KernelError, Result};
use crate::layers::sigmoid;
use crate::tensor::Tensor;

/// Clamp applied to probabilities before taking logs.
pub const PROB_EPS: f32 = 1e-7;

pub fn softmax(logits: &[f32]) -> Vec<f32> {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f32> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f32 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f32]) -> Vec<f32> {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let lse = logits.iter().map(|&v| (v - max).exp()).sum::<f32>().ln() + max;
    logits.iter().map(|&v| v - lse).collect()
}

/// Mean cross-entropy over the rows whose target is `Some`; rows with `None`
/// are masked out and receive zero gradient.
pub fn softmax_cross_entropy(logits: &Tensor, targets: &[Option<usize>]) -> Result<(f32, Tensor)> {
    let classes = logits.cols();
    if logits.rows() != targets.len() {
        return Err(shape_err("softmax_cross_entropy", logits.shape(), &[targets.len()]));
    }
    let active = targets.iter().filter(|t| t.is_some()).count();
    let mut grad = Tensor::zeros(logits.shape());
    if active == 0 {
        return Ok((0.0, grad));
    }
    let inv = 1.0 / active as f32;
    let mut loss = 0.0f64;
    for (r, target) in targets.iter().enumerate() {
        let Some(t) = *target else { continue };
        if t >= classes {
            return Err(KernelError::TargetOutOfRange { index: t, classes });
        }
        let logp = log_softmax(logits.row(r));
        loss -= logp[t] as f64;
        let g = grad.row_mut(r);
        for (gv, lp) in g.iter_mut().zip(&logp) {
            *gv = lp.exp() * inv;
        }
        g[t] -= inv;
    }
    Ok(((loss / active as f64) as f32, grad))
}

/// Mean binary cross-entropy of probabilities against {0,1} targets.
/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]`.
pub fn binary_cross_entropy(probs: &[f32], targets: &[f32]) -> Result<(f32, Vec<f32>)> {
    if probs.len() != targets.len() || probs.is_empty() {
        return Err(shape_err("binary_cross_entropy", &[probs.len()], &[targets.len()]));
    }
    let n = probs.len() as f32;
    let mut loss = 0.0f64;
    let mut grad = Vec::with_capacity(probs.len());
    for (&p, &y) in probs.iter().zip(targets) {
        let pc = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
        loss -= (y * pc.ln() + (1.0 - y) * (1.0 - pc).ln()) as f64;
        grad.push((-(y / pc) + (1.0 - y) / (1.0 - pc)) / n);
    }
    Ok(((loss / n as f64) as f32, grad))
}

/// Numerically stable sigmoid + binary cross-entropy on raw logits.
pub fn sigmoid_binary_cross_entropy(logits: &[f32], targets: &[f32]) -> Result<(f32, Vec<f32>)> {
    if logits.len() != targets.len() || logits.is_empty() {
        return Err(shape_err("sigmoid_binary_cross_entropy", &[logits.len()], &[targets.len()]));
    }
    let n = logits.len() as f32;
    let mut loss = 0.0f64;
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &y) in logits.iter().zip(targets) {
        // max(z,0) - z*y + log(1 + exp(-|z|))
        loss += (z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()) as f64;
        grad.push((sigmoid(z) - y) / n);
    }
    Ok(((loss / n as f64) as f32, grad))
}

pub fn mse(pred: &[f32], target: &[f32]) -> Result<(f32, Vec<f32>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(shape_err("mse", &[pred.len()], &[target.len()]));
    }
    let n = pred.len() as f32;
    let loss: f64 = pred.iter().zip(target).map(|(p, t)| ((p - t) as f64).powi(2)).sum();
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Ok(((loss / n as f64) as f32, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_v() {
        for v in [2usize, 7, 132] {
            let logits = Tensor::zeros(&[3, v]);
            let (loss, _) = softmax_cross_entropy(&logits, &[Some(0), None, Some(v - 1)]).unwrap();
            assert!((loss - (v as f32).ln()).abs() < 1e-5);
        }
    }

    #[test]
    fn masked_rows_get_no_gradient() {
        let logits = Tensor::from_vec(&[2, 3], vec![0.1, 0.2, 0.3, 1.0, 2.0, 3.0]).unwrap();
        let (_, g) = softmax_cross_entropy(&logits, &[None, Some(2)]).unwrap();
        assert_eq!(g.row(0), &[0.0, 0.0, 0.0]);
        assert!(g.row(1).iter().sum::<f32>().abs() < 1e-6);
    }

    #[test]
    fn target_out_of_range() {
        let logits = Tensor::zeros(&[1, 3]);
        assert_eq!(
            softmax_cross_entropy(&logits, &[Some(3)]).unwrap_err(),
            KernelError::TargetOutOfRange { index: 3, classes: 3 }
        );
    }

    #[test]
    fn mse_of_identical_is_zero() {
        let x = [0.5, -1.0, 3.0];
        let (l, g) = mse(&x, &x).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bce_at_exact_targets_is_near_zero() {
        let t = [1.0, 0.0, 1.0, 0.0];
        let (l, _) = binary_cross_entropy(&t, &t).unwrap();
        assert!(l < 2.0 * PROB_EPS, "{l}");
    }

    #[test]
    fn logit_bce_matches_probability_bce() {
        let z = [-2.0f32, 0.0, 0.7, 3.0];
        let y = [0.0, 1.0, 1.0, 0.0];
        let p: Vec<f32> = z.iter().map(|&v| sigmoid(v)).collect();
        let (a, _) = sigmoid_binary_cross_entropy(&z, &y).unwrap();
        let (b, _) = binary_cross_entropy(&p, &y).unwrap();
        assert!((a - b).abs() < 1e-5);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let p = softmax(&[1000.0, -1000.0, 3.0, 3.0]);
        assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        assert!(p.iter().all(|&v| v >= 0.0));
    }
}
