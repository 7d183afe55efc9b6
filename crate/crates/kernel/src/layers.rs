use crate::error::{shape_err, KernelError, Result};
use crate::params::{Grads, ParamId, ParameterStore};
use crate::rng::KernelRng;
use crate::tensor::{matmul, matmul_at_b_into, matmul_a_bt, Tensor};

/// Affine map `y = x W + b` over the rows of `x`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(store: &mut ParameterStore, prefix: &str, in_dim: usize, out_dim: usize, rng: &mut KernelRng) -> Result<Self> {
        let weight = store.xavier(&format!("{prefix}.weight"), in_dim, out_dim, rng)?;
        let bias = store.zeros(&format!("{prefix}.bias"), &[out_dim])?;
        Ok(Self { weight, bias, in_dim, out_dim })
    }

    /// Zero weight and bias; used for output heads so an untrained model is
    /// exactly uniform.
    pub fn zeroed(store: &mut ParameterStore, prefix: &str, in_dim: usize, out_dim: usize) -> Result<Self> {
        let weight = store.zeros(&format!("{prefix}.weight"), &[in_dim, out_dim])?;
        let bias = store.zeros(&format!("{prefix}.bias"), &[out_dim])?;
        Ok(Self { weight, bias, in_dim, out_dim })
    }

    pub fn load(store: &ParameterStore, prefix: &str, in_dim: usize, out_dim: usize) -> Result<Self> {
        Ok(Self {
            weight: store.expect(&format!("{prefix}.weight"), &[in_dim, out_dim])?,
            bias: store.expect(&format!("{prefix}.bias"), &[out_dim])?,
            in_dim,
            out_dim,
        })
    }

    pub fn forward(&self, store: &ParameterStore, x: &Tensor) -> Result<Tensor> {
        x.expect_matrix("linear", self.in_dim)?;
        let mut y = matmul(x, store.value(self.weight))?;
        let b = store.value(self.bias).data();
        for r in 0..y.rows() {
            for (v, bv) in y.row_mut(r).iter_mut().zip(b) {
                *v += bv;
            }
        }
        Ok(y)
    }

    /// Accumulates weight/bias gradients and returns `dL/dx`.
    pub fn backward(&self, store: &ParameterStore, grads: &mut Grads, x: &Tensor, dy: &Tensor) -> Result<Tensor> {
        x.expect_matrix("linear backward", self.in_dim)?;
        dy.expect_matrix("linear backward", self.out_dim)?;
        if x.rows() != dy.rows() {
            return Err(shape_err("linear backward", x.shape(), dy.shape()));
        }
        matmul_at_b_into(x, dy, grads.slot_mut(self.weight))?;
        let db = grads.slot_mut(self.bias);
        for r in 0..dy.rows() {
            for (g, v) in db.iter_mut().zip(dy.row(r)) {
                *g += v;
            }
        }
        matmul_a_bt(dy, store.value(self.weight))
    }
}

/// Token lookup table `[vocab, width]`.
#[derive(Debug, Clone, Copy)]
pub struct Embedding {
    pub table: ParamId,
    pub vocab: usize,
    pub width: usize,
}

impl Embedding {
    pub fn new(store: &mut ParameterStore, name: &str, vocab: usize, width: usize, rng: &mut KernelRng) -> Result<Self> {
        let table = store.normal(name, &[vocab, width], 0.02, rng)?;
        Ok(Self { table, vocab, width })
    }

    pub fn load(store: &ParameterStore, name: &str, vocab: usize, width: usize) -> Result<Self> {
        Ok(Self {
            table: store.expect(name, &[vocab, width])?,
            vocab,
            width,
        })
    }

    pub fn forward(&self, store: &ParameterStore, ids: &[usize]) -> Result<Tensor> {
        let table = store.value(self.table);
        let mut out = Tensor::zeros(&[ids.len().max(1), self.width]);
        if ids.is_empty() {
            return Err(KernelError::InvalidArgument("embedding of empty sequence".into()));
        }
        for (r, &id) in ids.iter().enumerate() {
            if id >= self.vocab {
                return Err(KernelError::TargetOutOfRange { index: id, classes: self.vocab });
            }
            out.row_mut(r).copy_from_slice(table.row(id));
        }
        Ok(out)
    }

    /// Adds `dy` rows into the looked-up table rows; repeated ids accumulate.
    pub fn backward(&self, grads: &mut Grads, ids: &[usize], dy: &Tensor) -> Result<()> {
        dy.expect_matrix("embedding backward", self.width)?;
        if dy.rows() != ids.len() {
            return Err(shape_err("embedding backward", &[ids.len()], dy.shape()));
        }
        let g = grads.slot_mut(self.table);
        for (r, &id) in ids.iter().enumerate() {
            let dst = &mut g[id * self.width..(id + 1) * self.width];
            for (a, b) in dst.iter_mut().zip(dy.row(r)) {
                *a += b;
            }
        }
        Ok(())
    }
}

pub const LAYERNORM_EPS: f32 = 1e-5;

/// Per-row normalization followed by a learned scale and shift.
#[derive(Debug, Clone, Copy)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub shift: ParamId,
    pub width: usize,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    normalized: Tensor,
    inv_std: Vec<f32>,
}

impl LayerNormCache {
    /// Rows after normalization, before the affine part.
    pub fn normalized(&self) -> &Tensor {
        &self.normalized
    }
}

impl LayerNorm {
    pub fn new(store: &mut ParameterStore, prefix: &str, width: usize) -> Result<Self> {
        Ok(Self {
            gain: store.ones(&format!("{prefix}.gain"), &[width])?,
            shift: store.zeros(&format!("{prefix}.shift"), &[width])?,
            width,
        })
    }

    pub fn load(store: &ParameterStore, prefix: &str, width: usize) -> Result<Self> {
        Ok(Self {
            gain: store.expect(&format!("{prefix}.gain"), &[width])?,
            shift: store.expect(&format!("{prefix}.shift"), &[width])?,
            width,
        })
    }

    pub fn forward(&self, store: &ParameterStore, x: &Tensor) -> Result<(Tensor, LayerNormCache)> {
        x.expect_matrix("layernorm", self.width)?;
        let gain = store.value(self.gain).data();
        let shift = store.value(self.shift).data();
        let n = self.width as f32;
        let mut normalized = Tensor::zeros(x.shape());
        let mut y = Tensor::zeros(x.shape());
        let mut inv_std = Vec::with_capacity(x.rows());
        for r in 0..x.rows() {
            let row = x.row(r);
            let mean = row.iter().sum::<f32>() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / n;
            let is = 1.0 / (var + LAYERNORM_EPS).sqrt();
            inv_std.push(is);
            let nrow = normalized.row_mut(r);
            for (o, v) in nrow.iter_mut().zip(row) {
                *o = (v - mean) * is;
            }
            let yrow = y.row_mut(r);
            for j in 0..self.width {
                yrow[j] = normalized.row(r)[j] * gain[j] + shift[j];
            }
        }
        Ok((y, LayerNormCache { normalized, inv_std }))
    }

    pub fn backward(&self, store: &ParameterStore, grads: &mut Grads, cache: &LayerNormCache, dy: &Tensor) -> Result<Tensor> {
        dy.same_shape(&cache.normalized, "layernorm backward")?;
        let gain = store.value(self.gain).data();
        let n = self.width as f32;
        let mut dx = Tensor::zeros(dy.shape());
        let mut dgain = vec![0.0; self.width];
        let mut dshift = vec![0.0; self.width];
        let mut dxhat = vec![0.0; self.width];
        for r in 0..dy.rows() {
            let xhat = cache.normalized.row(r);
            let dyr = dy.row(r);
            for j in 0..self.width {
                dgain[j] += dyr[j] * xhat[j];
                dshift[j] += dyr[j];
                dxhat[j] = dyr[j] * gain[j];
            }
            let sum_d: f32 = dxhat.iter().sum();
            let sum_dx: f32 = dxhat.iter().zip(xhat).map(|(a, b)| a * b).sum();
            let is = cache.inv_std[r];
            let dxr = dx.row_mut(r);
            for j in 0..self.width {
                dxr[j] = is / n * (n * dxhat[j] - sum_d - xhat[j] * sum_dx);
            }
        }
        for (g, v) in grads.slot_mut(self.gain).iter_mut().zip(&dgain) {
            *g += v;
        }
        for (g, v) in grads.slot_mut(self.shift).iter_mut().zip(&dshift) {
            *g += v;
        }
        Ok(dx)
    }
}

const GELU_C: f32 = 0.797_884_6; // sqrt(2/pi)

/// Tanh approximation of GELU.
pub fn gelu(x: &Tensor) -> Tensor {
    x.map(|v| 0.5 * v * (1.0 + (GELU_C * (v + 0.044715 * v * v * v)).tanh()))
}

pub fn gelu_backward(x: &Tensor, dy: &Tensor) -> Result<Tensor> {
    x.same_shape(dy, "gelu backward")?;
    let mut dx = Tensor::zeros(x.shape());
    for ((o, &v), &g) in dx.data_mut().iter_mut().zip(x.data()).zip(dy.data()) {
        let inner = GELU_C * (v + 0.044715 * v * v * v);
        let t = inner.tanh();
        let dinner = GELU_C * (1.0 + 3.0 * 0.044715 * v * v);
        *o = g * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * dinner);
    }
    Ok(dx)
}

pub fn sigmoid(v: f32) -> f32 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn identity_linear_is_identity() {
        let mut s = ParameterStore::new();
        let lin = Linear::zeroed(&mut s, "l", 3, 3).unwrap();
        let w = s.value_mut(lin.weight).data_mut();
        w[0] = 1.0;
        w[4] = 1.0;
        w[8] = 1.0;
        let x = Tensor::from_vec(&[2, 3], vec![1.0, -2.0, 3.5, 0.0, 4.0, -1.0]).unwrap();
        assert_eq!(lin.forward(&s, &x).unwrap(), x);
    }

    #[test]
    fn linear_rejects_wrong_width() {
        let mut s = ParameterStore::new();
        let lin = Linear::new(&mut s, "l", 3, 2, &mut seeded(0)).unwrap();
        let err = lin.forward(&s, &Tensor::zeros(&[1, 4])).unwrap_err();
        assert!(matches!(err, KernelError::Shape { op: "linear", .. }));
    }

    #[test]
    fn embedding_returns_rows() {
        let mut s = ParameterStore::new();
        let e = Embedding::new(&mut s, "emb", 5, 4, &mut seeded(1)).unwrap();
        let out = e.forward(&s, &[3, 0, 3]).unwrap();
        let table = s.value(e.table);
        assert_eq!(out.row(0), table.row(3));
        assert_eq!(out.row(1), table.row(0));
        assert_eq!(out.row(2), table.row(3));
        assert!(e.forward(&s, &[5]).is_err());
    }

    #[test]
    fn embedding_grads_accumulate_for_repeats() {
        let mut s = ParameterStore::new();
        let e = Embedding::new(&mut s, "emb", 3, 2, &mut seeded(1)).unwrap();
        let mut g = s.new_grads();
        let dy = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        e.backward(&mut g, &[1, 1], &dy).unwrap();
        assert_eq!(g.slot(e.table), &[0.0, 0.0, 4.0, 6.0, 0.0, 0.0]);
    }

    #[test]
    fn layernorm_of_constant_row_is_zero() {
        let mut s = ParameterStore::new();
        let ln = LayerNorm::new(&mut s, "ln", 4).unwrap();
        let x = Tensor::filled(&[1, 4], 3.25);
        let (_, cache) = ln.forward(&s, &x).unwrap();
        assert!(cache.normalized().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gelu_fixed_points() {
        let x = Tensor::from_vec(&[3], vec![0.0, 10.0, -10.0]).unwrap();
        let y = gelu(&x);
        assert_eq!(y.data()[0], 0.0);
        assert!((y.data()[1] - 10.0).abs() < 1e-4);
        assert!(y.data()[2].abs() < 1e-4);
    }
}
