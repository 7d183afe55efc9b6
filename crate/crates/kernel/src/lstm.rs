use crate::error::{shape_err, Result};
use crate::layers::sigmoid;
use crate::params::{Grads, ParamId, ParameterStore};
use crate::rng::KernelRng;

/// Four-gate LSTM cell. Gate blocks are laid out `[input, forget, cell, output]`
/// along the `4 * hidden` axis of both weight matrices and the bias.
#[derive(Debug, Clone, Copy)]
pub struct LstmCell {
    pub input_weight: ParamId,
    pub hidden_weight: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone)]
pub struct LstmStepCache {
    x: Vec<f32>,
    h_prev: Vec<f32>,
    c_prev: Vec<f32>,
    gates: Vec<f32>,
    tanh_c: Vec<f32>,
}

impl LstmCell {
    pub fn new(store: &mut ParameterStore, prefix: &str, input: usize, hidden: usize, rng: &mut KernelRng) -> Result<Self> {
        Ok(Self {
            input_weight: store.xavier(&format!("{prefix}.w_input"), input, 4 * hidden, rng)?,
            hidden_weight: store.xavier(&format!("{prefix}.w_hidden"), hidden, 4 * hidden, rng)?,
            bias: store.zeros(&format!("{prefix}.bias"), &[4 * hidden])?,
            input,
            hidden,
        })
    }

    pub fn load(store: &ParameterStore, prefix: &str, input: usize, hidden: usize) -> Result<Self> {
        Ok(Self {
            input_weight: store.expect(&format!("{prefix}.w_input"), &[input, 4 * hidden])?,
            hidden_weight: store.expect(&format!("{prefix}.w_hidden"), &[hidden, 4 * hidden])?,
            bias: store.expect(&format!("{prefix}.bias"), &[4 * hidden])?,
            input,
            hidden,
        })
    }

    /// One recurrence step; returns `(h_t, c_t, cache)`.
    pub fn step(&self, store: &ParameterStore, x: &[f32], h_prev: &[f32], c_prev: &[f32]) -> Result<(Vec<f32>, Vec<f32>, LstmStepCache)> {
        let hd = self.hidden;
        if x.len() != self.input {
            return Err(shape_err("lstm input", &[x.len()], &[self.input]));
        }
        if h_prev.len() != hd || c_prev.len() != hd {
            return Err(shape_err("lstm state", &[h_prev.len(), c_prev.len()], &[hd, hd]));
        }
        let mut pre = store.value(self.bias).data().to_vec();
        let wx = store.value(self.input_weight).data();
        let wh = store.value(self.hidden_weight).data();
        for (k, &xv) in x.iter().enumerate() {
            for (p, w) in pre.iter_mut().zip(&wx[k * 4 * hd..(k + 1) * 4 * hd]) {
                *p += xv * w;
            }
        }
        for (k, &hv) in h_prev.iter().enumerate() {
            for (p, w) in pre.iter_mut().zip(&wh[k * 4 * hd..(k + 1) * 4 * hd]) {
                *p += hv * w;
            }
        }
        let mut gates = pre;
        for (idx, g) in gates.iter_mut().enumerate() {
            *g = if idx / hd == 2 { g.tanh() } else { sigmoid(*g) };
        }
        let mut c = vec![0.0; hd];
        let mut h = vec![0.0; hd];
        let mut tanh_c = vec![0.0; hd];
        for j in 0..hd {
            let (i, f, g, o) = (gates[j], gates[hd + j], gates[2 * hd + j], gates[3 * hd + j]);
            c[j] = f * c_prev[j] + i * g;
            tanh_c[j] = c[j].tanh();
            h[j] = o * tanh_c[j];
        }
        let cache = LstmStepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            gates,
            tanh_c,
        };
        Ok((h, c, cache))
    }

    /// Given `dL/dh_t` and `dL/dc_t`, accumulates parameter gradients and
    /// returns `(dL/dx, dL/dh_prev, dL/dc_prev)`.
    pub fn backward(
        &self,
        store: &ParameterStore,
        grads: &mut Grads,
        cache: &LstmStepCache,
        dh: &[f32],
        dc: &[f32],
    ) -> Result<(Vec<f32>, Vec<f32>, Vec<f32>)> {
        let hd = self.hidden;
        if dh.len() != hd || dc.len() != hd {
            return Err(shape_err("lstm backward", &[dh.len(), dc.len()], &[hd, hd]));
        }
        let gates = &cache.gates;
        let mut dpre = vec![0.0; 4 * hd];
        let mut dc_prev = vec![0.0; hd];
        for j in 0..hd {
            let (i, f, g, o) = (gates[j], gates[hd + j], gates[2 * hd + j], gates[3 * hd + j]);
            let tc = cache.tanh_c[j];
            let dct = dc[j] + dh[j] * o * (1.0 - tc * tc);
            let d_o = dh[j] * tc;
            let d_i = dct * g;
            let d_g = dct * i;
            let d_f = dct * cache.c_prev[j];
            dc_prev[j] = dct * f;
            dpre[j] = d_i * i * (1.0 - i);
            dpre[hd + j] = d_f * f * (1.0 - f);
            dpre[2 * hd + j] = d_g * (1.0 - g * g);
            dpre[3 * hd + j] = d_o * o * (1.0 - o);
        }
        for (b, d) in grads.slot_mut(self.bias).iter_mut().zip(&dpre) {
            *b += d;
        }
        let gx = grads.slot_mut(self.input_weight);
        for (k, &xv) in cache.x.iter().enumerate() {
            for (g, d) in gx[k * 4 * hd..(k + 1) * 4 * hd].iter_mut().zip(&dpre) {
                *g += xv * d;
            }
        }
        let gh = grads.slot_mut(self.hidden_weight);
        for (k, &hv) in cache.h_prev.iter().enumerate() {
            for (g, d) in gh[k * 4 * hd..(k + 1) * 4 * hd].iter_mut().zip(&dpre) {
                *g += hv * d;
            }
        }
        let wx = store.value(self.input_weight).data();
        let wh = store.value(self.hidden_weight).data();
        let dx = (0..self.input)
            .map(|k| wx[k * 4 * hd..(k + 1) * 4 * hd].iter().zip(&dpre).map(|(w, d)| w * d).sum())
            .collect();
        let dh_prev = (0..hd)
            .map(|k| wh[k * 4 * hd..(k + 1) * 4 * hd].iter().zip(&dpre).map(|(w, d)| w * d).sum())
            .collect();
        Ok((dx, dh_prev, dc_prev))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal, seeded};

    #[test]
    fn zero_parameters_give_zero_hidden() {
        let mut s = ParameterStore::new();
        let cell = LstmCell {
            input_weight: s.zeros("wi", &[3, 8]).unwrap(),
            hidden_weight: s.zeros("wh", &[2, 8]).unwrap(),
            bias: s.zeros("b", &[8]).unwrap(),
            input: 3,
            hidden: 2,
        };
        let (h, c, _) = cell.step(&s, &[1.0, -4.0, 2.0], &[0.3, 0.7], &[0.0, 0.0]).unwrap();
        assert_eq!(h, vec![0.0, 0.0]);
        assert_eq!(c, vec![0.0, 0.0]);
    }

    #[test]
    fn hidden_state_is_bounded() {
        let mut s = ParameterStore::new();
        let mut r = seeded(9);
        let cell = LstmCell::new(&mut s, "lstm", 4, 6, &mut r).unwrap();
        let (mut h, mut c) = (vec![0.0; 6], vec![0.0; 6]);
        for _ in 0..50 {
            let x: Vec<f32> = (0..4).map(|_| normal(&mut r, 0.0, 5.0)).collect();
            let (h2, c2, _) = cell.step(&s, &x, &h, &c).unwrap();
            h = h2;
            c = c2;
            assert!(h.iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn rejects_bad_widths() {
        let mut s = ParameterStore::new();
        let cell = LstmCell::new(&mut s, "lstm", 2, 3, &mut seeded(0)).unwrap();
        assert!(cell.step(&s, &[1.0], &[0.0; 3], &[0.0; 3]).is_err());
        assert!(cell.step(&s, &[1.0, 2.0], &[0.0; 2], &[0.0; 3]).is_err());
    }
}
