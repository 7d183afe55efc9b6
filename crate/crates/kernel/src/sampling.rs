//! Top-k and nucleus sampling over explicit probability vectors.

use crate::error::{KernelError, Result};
use crate::rng::{uniform_f64, KernelRng};

pub const SUM_TOLERANCE: f64 = 1e-6;

fn validate(probs: &[f32]) -> Result<()> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(KernelError::InvalidArgument("probabilities must be finite and non-negative".into()));
    }
    let sum: f64 = probs.iter().map(|&p| p as f64).sum();
    if sum == 0.0 {
        return Err(KernelError::EmptyDistribution);
    }
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(KernelError::InvalidArgument(format!("distribution sums to {sum}")));
    }
    Ok(())
}

/// Token indices by descending probability; ties keep index order.
fn ranked(probs: &[f32]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    idx.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    idx
}

pub fn top_k_support(probs: &[f32], k: usize) -> Result<Vec<usize>> {
    validate(probs)?;
    if k == 0 {
        return Err(KernelError::InvalidArgument("k must be at least 1".into()));
    }
    let mut idx = ranked(probs);
    idx.truncate(k);
    idx.retain(|&i| probs[i] > 0.0);
    Ok(idx)
}

/// Smallest probability-sorted prefix whose mass reaches `p`.
pub fn nucleus_support(probs: &[f32], p: f32) -> Result<Vec<usize>> {
    validate(probs)?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(KernelError::InvalidArgument(format!("nucleus mass {p} outside (0, 1]")));
    }
    let mut support = Vec::new();
    let mut cum = 0.0f64;
    for i in ranked(probs) {
        if probs[i] == 0.0 {
            break;
        }
        support.push(i);
        cum += probs[i] as f64;
        if cum >= p as f64 {
            break;
        }
    }
    Ok(support)
}

fn draw(probs: &[f32], support: &[usize], rng: &mut KernelRng) -> usize {
    let mass: f64 = support.iter().map(|&i| probs[i] as f64).sum();
    let u = uniform_f64(rng) * mass;
    let mut cum = 0.0;
    for &i in support {
        cum += probs[i] as f64;
        if u < cum {
            return i;
        }
    }
    *support.last().expect("support is non-empty")
}

pub fn sample_top_k(probs: &[f32], k: usize, rng: &mut KernelRng) -> Result<usize> {
    let support = top_k_support(probs, k)?;
    Ok(draw(probs, &support, rng))
}

pub fn sample_nucleus(probs: &[f32], p: f32, rng: &mut KernelRng) -> Result<usize> {
    let support = nucleus_support(probs, p)?;
    Ok(draw(probs, &support, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn k_one_is_argmax() {
        let p = [0.1, 0.2, 0.4, 0.3];
        let mut r = seeded(0);
        for _ in 0..200 {
            assert_eq!(sample_top_k(&p, 1, &mut r).unwrap(), 2);
        }
    }

    #[test]
    fn nucleus_prefix_by_hand() {
        // 0.5 < 0.6 <= 0.8
        assert_eq!(nucleus_support(&[0.5, 0.3, 0.2], 0.6).unwrap(), vec![0, 1]);
        assert_eq!(nucleus_support(&[0.2, 0.3, 0.5], 0.5).unwrap(), vec![2]);
        assert_eq!(nucleus_support(&[0.5, 0.3, 0.2], 1.0).unwrap(), vec![0, 1, 2]);
        let mut r = seeded(4);
        for _ in 0..500 {
            assert_ne!(sample_nucleus(&[0.5, 0.3, 0.2], 0.6, &mut r).unwrap(), 2);
        }
    }

    #[test]
    fn zero_mass_is_an_error() {
        let mut r = seeded(0);
        assert_eq!(sample_top_k(&[0.0, 0.0], 1, &mut r), Err(KernelError::EmptyDistribution));
        assert!(sample_nucleus(&[0.5, 0.4], 0.5, &mut r).is_err());
        assert!(sample_nucleus(&[1.0], 0.0, &mut r).is_err());
        assert!(sample_top_k(&[1.0], 0, &mut r).is_err());
    }

    #[test]
    fn seeded_draws_repeat() {
        let p = [0.25, 0.25, 0.25, 0.25];
        let a: Vec<usize> = {
            let mut r = seeded(11);
            (0..50).map(|_| sample_nucleus(&p, 1.0, &mut r).unwrap()).collect()
        };
        let mut r = seeded(11);
        let b: Vec<usize> = (0..50).map(|_| sample_nucleus(&p, 1.0, &mut r).unwrap()).collect();
        assert_eq!(a, b);
    }
}
