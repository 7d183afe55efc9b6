use crate::error::{KernelError, Result};
use crate::layers::Linear;
use crate::params::{Grads, ParameterStore};
use crate::rng::KernelRng;
use crate::tensor::{dot, Tensor};

/// Multi-head scaled dot-product self-attention with a fused QKV projection.
#[derive(Debug, Clone, Copy)]
pub struct SelfAttention {
    pub qkv: Linear,
    pub out: Linear,
    pub heads: usize,
    pub width: usize,
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    input: Tensor,
    qkv: Tensor,
    /// `[heads][query][key]`, row-major.
    probs: Vec<f32>,
    context: Tensor,
    len: usize,
}

impl AttentionCache {
    /// Attention weights of `head` for query position `query`.
    pub fn weights(&self, head: usize, query: usize) -> &[f32] {
        let t = self.len;
        &self.probs[(head * t + query) * t..(head * t + query + 1) * t]
    }
}

impl SelfAttention {
    pub fn new(store: &mut ParameterStore, prefix: &str, width: usize, heads: usize, rng: &mut KernelRng) -> Result<Self> {
        check_heads(width, heads)?;
        Ok(Self {
            qkv: Linear::new(store, &format!("{prefix}.qkv"), width, 3 * width, rng)?,
            out: Linear::new(store, &format!("{prefix}.out"), width, width, rng)?,
            heads,
            width,
        })
    }

    pub fn load(store: &ParameterStore, prefix: &str, width: usize, heads: usize) -> Result<Self> {
        check_heads(width, heads)?;
        Ok(Self {
            qkv: Linear::load(store, &format!("{prefix}.qkv"), width, 3 * width)?,
            out: Linear::load(store, &format!("{prefix}.out"), width, width)?,
            heads,
            width,
        })
    }

    fn head_dim(&self) -> usize {
        self.width / self.heads
    }

    /// With `causal`, query `i` only sees keys `j <= i`.
    pub fn forward(&self, store: &ParameterStore, x: &Tensor, causal: bool) -> Result<(Tensor, AttentionCache)> {
        x.expect_matrix("attention", self.width)?;
        let t = x.rows();
        let d = self.width;
        let dh = self.head_dim();
        let scale = 1.0 / (dh as f32).sqrt();
        let qkv = self.qkv.forward(store, x)?;
        let mut probs = vec![0.0f32; self.heads * t * t];
        let mut context = Tensor::zeros(&[t, d]);
        for h in 0..self.heads {
            let (qo, ko, vo) = (h * dh, d + h * dh, 2 * d + h * dh);
            for i in 0..t {
                let q = &qkv.row(i)[qo..qo + dh];
                let visible = if causal { i + 1 } else { t };
                let row = &mut probs[(h * t + i) * t..(h * t + i + 1) * t];
                let mut max = f32::NEG_INFINITY;
                for (j, p) in row.iter_mut().enumerate().take(visible) {
                    *p = dot(q, &qkv.row(j)[ko..ko + dh]) * scale;
                    max = max.max(*p);
                }
                let mut sum = 0.0;
                for p in row.iter_mut().take(visible) {
                    *p = (*p - max).exp();
                    sum += *p;
                }
                for p in row.iter_mut().take(visible) {
                    *p /= sum;
                }
                let ctx = &mut context.row_mut(i)[qo..qo + dh];
                for (j, &p) in row.iter().enumerate().take(visible) {
                    let v = &qkv.row(j)[vo..vo + dh];
                    for (c, vv) in ctx.iter_mut().zip(v) {
                        *c += p * vv;
                    }
                }
            }
        }
        let y = self.out.forward(store, &context)?;
        Ok((
            y,
            AttentionCache {
                input: x.clone(),
                qkv,
                probs,
                context,
                len: t,
            },
        ))
    }

    pub fn backward(&self, store: &ParameterStore, grads: &mut Grads, cache: &AttentionCache, dy: &Tensor) -> Result<Tensor> {
        let t = cache.len;
        let d = self.width;
        let dh = self.head_dim();
        let scale = 1.0 / (dh as f32).sqrt();
        let dctx = self.out.backward(store, grads, &cache.context, dy)?;
        let qkv = &cache.qkv;
        let mut dqkv = Tensor::zeros(&[t, 3 * d]);
        let mut dprob = vec![0.0f32; t];
        for h in 0..self.heads {
            let (qo, ko, vo) = (h * dh, d + h * dh, 2 * d + h * dh);
            for i in 0..t {
                let p = &cache.probs[(h * t + i) * t..(h * t + i + 1) * t];
                let dc = &dctx.row(i)[qo..qo + dh];
                for j in 0..t {
                    if p[j] == 0.0 {
                        dprob[j] = 0.0;
                        continue;
                    }
                    dprob[j] = dot(dc, &qkv.row(j)[vo..vo + dh]);
                    let dv = &mut dqkv.row_mut(j)[vo..vo + dh];
                    for (a, b) in dv.iter_mut().zip(dc) {
                        *a += p[j] * b;
                    }
                }
                let inner: f32 = p.iter().zip(&dprob).map(|(a, b)| a * b).sum();
                for j in 0..t {
                    if p[j] == 0.0 {
                        continue;
                    }
                    let ds = p[j] * (dprob[j] - inner) * scale;
                    for c in 0..dh {
                        let kj = qkv.row(j)[ko + c];
                        let qi = qkv.row(i)[qo + c];
                        dqkv.row_mut(i)[qo + c] += ds * kj;
                        dqkv.row_mut(j)[ko + c] += ds * qi;
                    }
                }
            }
        }
        self.qkv.backward(store, grads, &cache.input, &dqkv)
    }
}

fn check_heads(width: usize, heads: usize) -> Result<()> {
    if heads == 0 || width % heads != 0 {
        return Err(KernelError::InvalidArgument(format!(
            "width {width} not divisible by {heads} heads"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal, seeded};

    fn random_input(t: usize, d: usize, seed: u64) -> Tensor {
        let mut r = seeded(seed);
        Tensor::from_vec(&[t, d], (0..t * d).map(|_| normal(&mut r, 0.0, 1.0)).collect()).unwrap()
    }

    #[test]
    fn rejects_indivisible_heads() {
        let mut s = ParameterStore::new();
        assert!(SelfAttention::new(&mut s, "a", 10, 4, &mut seeded(0)).is_err());
    }

    #[test]
    fn single_position_attends_to_itself() {
        let mut s = ParameterStore::new();
        let att = SelfAttention::new(&mut s, "a", 8, 2, &mut seeded(0)).unwrap();
        let x = random_input(1, 8, 1);
        let (y, cache) = att.forward(&s, &x, true).unwrap();
        assert_eq!(cache.weights(0, 0), &[1.0]);
        // With weight 1 the block is out(v(x)): two stacked affine maps.
        let v = att.qkv.forward(&s, &x).unwrap();
        let ctx = Tensor::from_vec(&[1, 8], v.row(0)[16..24].to_vec()).unwrap();
        let expect = att.out.forward(&s, &ctx).unwrap();
        for (a, b) in y.data().iter().zip(expect.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn weights_are_distributions() {
        let mut s = ParameterStore::new();
        let att = SelfAttention::new(&mut s, "a", 8, 4, &mut seeded(2)).unwrap();
        let x = random_input(6, 8, 3);
        for causal in [true, false] {
            let (_, cache) = att.forward(&s, &x, causal).unwrap();
            for h in 0..4 {
                for i in 0..6 {
                    let w = cache.weights(h, i);
                    let sum: f32 = w.iter().sum();
                    assert!((sum - 1.0).abs() < 1e-6);
                    assert!(w.iter().all(|&p| p >= 0.0));
                    if causal {
                        assert!(w[i + 1..].iter().all(|&p| p == 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn causal_rows_ignore_future() {
        let mut s = ParameterStore::new();
        let att = SelfAttention::new(&mut s, "a", 8, 2, &mut seeded(4)).unwrap();
        let x = random_input(5, 8, 5);
        let (y, _) = att.forward(&s, &x, true).unwrap();
        let mut x2 = x.clone();
        for v in x2.row_mut(3) {
            *v += 7.0;
        }
        let (y2, _) = att.forward(&s, &x2, true).unwrap();
        for i in 0..3 {
            assert_eq!(y.row(i), y2.row(i));
        }
        assert_ne!(y.row(3), y2.row(3));
    }
}
