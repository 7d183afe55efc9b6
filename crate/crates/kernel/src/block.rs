use crate::attention::{AttentionCache, SelfAttention};
use crate::error::Result;
use crate::layers::{gelu, gelu_backward, LayerNorm, LayerNormCache, Linear};
use crate::params::{Grads, ParameterStore};
use crate::rng::KernelRng;
use crate::tensor::Tensor;

/// Pre-norm transformer block:
/// `x + attn(ln1(x))`, then `h + ff_out(gelu(ff_in(ln2(h))))`.
#[derive(Debug, Clone, Copy)]
pub struct TransformerBlock {
    pub ln1: LayerNorm,
    pub attn: SelfAttention,
    pub ln2: LayerNorm,
    pub ff_in: Linear,
    pub ff_out: Linear,
    pub causal: bool,
}

#[derive(Debug, Clone)]
pub struct BlockCache {
    ln1: LayerNormCache,
    attn: AttentionCache,
    ln2: LayerNormCache,
    ln2_out: Tensor,
    ff_pre: Tensor,
    ff_act: Tensor,
}

impl BlockCache {
    pub fn attention(&self) -> &AttentionCache {
        &self.attn
    }
}

impl TransformerBlock {
    pub fn new(
        store: &mut ParameterStore,
        prefix: &str,
        width: usize,
        heads: usize,
        ff_width: usize,
        causal: bool,
        rng: &mut KernelRng,
    ) -> Result<Self> {
        Ok(Self {
            ln1: LayerNorm::new(store, &format!("{prefix}.ln1"), width)?,
            attn: SelfAttention::new(store, &format!("{prefix}.attn"), width, heads, rng)?,
            ln2: LayerNorm::new(store, &format!("{prefix}.ln2"), width)?,
            ff_in: Linear::new(store, &format!("{prefix}.ff_in"), width, ff_width, rng)?,
            ff_out: Linear::new(store, &format!("{prefix}.ff_out"), ff_width, width, rng)?,
            causal,
        })
    }

    pub fn load(store: &ParameterStore, prefix: &str, width: usize, heads: usize, ff_width: usize, causal: bool) -> Result<Self> {
        Ok(Self {
            ln1: LayerNorm::load(store, &format!("{prefix}.ln1"), width)?,
            attn: SelfAttention::load(store, &format!("{prefix}.attn"), width, heads)?,
            ln2: LayerNorm::load(store, &format!("{prefix}.ln2"), width)?,
            ff_in: Linear::load(store, &format!("{prefix}.ff_in"), width, ff_width)?,
            ff_out: Linear::load(store, &format!("{prefix}.ff_out"), ff_width, width)?,
            causal,
        })
    }

    pub fn forward(&self, store: &ParameterStore, x: &Tensor) -> Result<(Tensor, BlockCache)> {
        let (a, ln1) = self.ln1.forward(store, x)?;
        let (att, attn) = self.attn.forward(store, &a, self.causal)?;
        let mut h = x.clone();
        h.add_assign(&att)?;
        let (b, ln2) = self.ln2.forward(store, &h)?;
        let ff_pre = self.ff_in.forward(store, &b)?;
        let ff_act = gelu(&ff_pre);
        let ff = self.ff_out.forward(store, &ff_act)?;
        h.add_assign(&ff)?;
        Ok((
            h,
            BlockCache {
                ln1,
                attn,
                ln2,
                ln2_out: b,
                ff_pre,
                ff_act,
            },
        ))
    }

    pub fn backward(&self, store: &ParameterStore, grads: &mut Grads, cache: &BlockCache, dy: &Tensor) -> Result<Tensor> {
        let d_act = self.ff_out.backward(store, grads, &cache.ff_act, dy)?;
        let d_pre = gelu_backward(&cache.ff_pre, &d_act)?;
        let d_b = self.ff_in.backward(store, grads, &cache.ln2_out, &d_pre)?;
        let mut d_h = dy.clone();
        d_h.add_assign(&self.ln2.backward(store, grads, &cache.ln2, &d_b)?)?;
        let d_a = self.attn.backward(store, grads, &cache.attn, &d_h)?;
        let mut dx = d_h;
        dx.add_assign(&self.ln1.backward(store, grads, &cache.ln1, &d_a)?)?;
        Ok(dx)
    }
}
