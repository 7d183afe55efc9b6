//! Finite-difference checks of every layer's backward pass on small random
//! shapes, for command-line and acceptance use.

use crate::error::Result;
use crate::gradcheck::{grad_check, GradCheckReport};
use crate::layers::{gelu, gelu_backward, Embedding, LayerNorm, Linear};
use crate::loss::{mse, sigmoid_binary_cross_entropy, softmax_cross_entropy};
use crate::lstm::LstmCell;
use crate::attention::SelfAttention;
use crate::params::{Grads, ParameterStore};
use crate::rng::{normal, seeded, uniform_range, KernelRng};
use crate::tensor::Tensor;

pub const SUITE_STEP: f32 = 1e-3;
pub const SUITE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub layer: String,
    pub input: String,
    pub report: GradCheckReport,
}

fn randn(rng: &mut KernelRng, shape: &[usize]) -> Result<Tensor> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| normal(rng, 0.0, 1.0)).collect())
}

fn project(y: &Tensor, w: &Tensor) -> f64 {
    y.data().iter().zip(w.data()).map(|(a, b)| *a as f64 * *b as f64).sum()
}

fn perturb(store: &mut ParameterStore, rng: &mut KernelRng) {
    for id in store.ids().collect::<Vec<_>>() {
        for v in store.value_mut(id).data_mut() {
            *v += normal(rng, 0.0, 0.1);
        }
    }
}

struct Suite {
    entries: Vec<SuiteEntry>,
}

impl Suite {
    fn push(&mut self, layer: &str, input: &str, report: GradCheckReport) {
        self.entries.push(SuiteEntry {
            layer: layer.to_string(),
            input: input.to_string(),
            report,
        });
    }

    fn params(&mut self, layer: &str, store: &ParameterStore, grads: &Grads, objective: &dyn Fn(&ParameterStore) -> f64) {
        for id in store.ids() {
            let report = grad_check(store.value(id).data(), grads.slot(id), SUITE_STEP, SUITE_TOLERANCE, |vals| {
                let mut s = store.clone();
                s.value_mut(id).data_mut().copy_from_slice(vals);
                objective(&s)
            });
            self.push(layer, store.name(id), report);
        }
    }

    fn input(&mut self, layer: &str, x: &Tensor, dx: &[f32], objective: &dyn Fn(&Tensor) -> f64) {
        let shape = x.shape().to_vec();
        let report = grad_check(x.data(), dx, SUITE_STEP, SUITE_TOLERANCE, |v| {
            objective(&Tensor::from_vec(&shape, v.to_vec()).expect("same shape"))
        });
        self.push(layer, "input", report);
    }
}

/// Runs every check with random data drawn from `seed`.
pub fn layer_suite(seed: u64) -> Result<Vec<SuiteEntry>> {
    let mut rng = seeded(seed);
    let mut suite = Suite { entries: Vec::new() };

    let mut store = ParameterStore::new();
    let lin = Linear::new(&mut store, "linear", 5, 4, &mut rng)?;
    perturb(&mut store, &mut rng);
    let (x, w) = (randn(&mut rng, &[3, 5])?, randn(&mut rng, &[3, 4])?);
    let mut grads = store.new_grads();
    let dx = lin.backward(&store, &mut grads, &x, &w)?;
    let obj = |s: &ParameterStore, x: &Tensor| project(&lin.forward(s, x).expect("valid"), &w);
    suite.params("linear", &store, &grads, &|s| obj(s, &x));
    suite.input("linear", &x, dx.data(), &|x| obj(&store, x));

    let mut store = ParameterStore::new();
    let emb = Embedding::new(&mut store, "embedding", 6, 4, &mut rng)?;
    let ids = [2usize, 5, 2, 0];
    let w = randn(&mut rng, &[4, 4])?;
    let mut grads = store.new_grads();
    emb.backward(&mut grads, &ids, &w)?;
    suite.params("embedding", &store, &grads, &|s| project(&emb.forward(s, &ids).expect("valid"), &w));

    let mut store = ParameterStore::new();
    let ln = LayerNorm::new(&mut store, "layernorm", 6)?;
    perturb(&mut store, &mut rng);
    let (x, w) = (randn(&mut rng, &[3, 6])?, randn(&mut rng, &[3, 6])?);
    let (_, cache) = ln.forward(&store, &x)?;
    let mut grads = store.new_grads();
    let dx = ln.backward(&store, &mut grads, &cache, &w)?;
    let obj = |s: &ParameterStore, x: &Tensor| project(&ln.forward(s, x).expect("valid").0, &w);
    suite.params("layernorm", &store, &grads, &|s| obj(s, &x));
    suite.input("layernorm", &x, dx.data(), &|x| obj(&store, x));

    let (x, w) = (randn(&mut rng, &[4, 5])?, randn(&mut rng, &[4, 5])?);
    let dx = gelu_backward(&x, &w)?;
    suite.input("gelu", &x, dx.data(), &|x| project(&gelu(x), &w));

    for (label, causal) in [("attention", false), ("causal-attention", true)] {
        let mut store = ParameterStore::new();
        let att = SelfAttention::new(&mut store, label, 8, 2, &mut rng)?;
        perturb(&mut store, &mut rng);
        let (x, w) = (randn(&mut rng, &[4, 8])?, randn(&mut rng, &[4, 8])?);
        let (_, cache) = att.forward(&store, &x, causal)?;
        let mut grads = store.new_grads();
        let dx = att.backward(&store, &mut grads, &cache, &w)?;
        let obj = |s: &ParameterStore, x: &Tensor| project(&att.forward(s, x, causal).expect("valid").0, &w);
        suite.params(label, &store, &grads, &|s| obj(s, &x));
        suite.input(label, &x, dx.data(), &|x| obj(&store, x));
    }

    let mut store = ParameterStore::new();
    let cell = LstmCell::new(&mut store, "lstm", 3, 4, &mut rng)?;
    perturb(&mut store, &mut rng);
    let x = randn(&mut rng, &[3])?;
    let h0: Vec<f32> = (0..4).map(|_| uniform_range(&mut rng, -0.9, 0.9)).collect();
    let c0 = randn(&mut rng, &[4])?.into_data();
    let wh = randn(&mut rng, &[4])?.into_data();
    let wc = randn(&mut rng, &[4])?.into_data();
    let obj = |s: &ParameterStore, x: &[f32]| {
        let (h1, c1, _) = cell.step(s, x, &h0, &c0).expect("valid");
        h1.iter().zip(&wh).chain(c1.iter().zip(&wc)).map(|(a, b)| *a as f64 * *b as f64).sum::<f64>()
    };
    let (_, _, cache) = cell.step(&store, x.data(), &h0, &c0)?;
    let mut grads = store.new_grads();
    let (dx, _, _) = cell.backward(&store, &mut grads, &cache, &wh, &wc)?;
    suite.params("lstm", &store, &grads, &|s| obj(s, x.data()));
    suite.input("lstm", &x, &dx, &|x| obj(&store, x.data()));

    let logits = randn(&mut rng, &[3, 5])?;
    let targets = [Some(1), None, Some(4)];
    let (_, g) = softmax_cross_entropy(&logits, &targets)?;
    suite.input("softmax-cross-entropy", &logits, g.data(), &|v| {
        softmax_cross_entropy(v, &targets).expect("valid").0 as f64
    });

    let z = randn(&mut rng, &[6])?;
    let y = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0];
    let (_, g) = sigmoid_binary_cross_entropy(z.data(), &y)?;
    suite.input("sigmoid-bce", &z, &g, &|v| sigmoid_binary_cross_entropy(v.data(), &y).expect("valid").0 as f64);

    let (p, t) = (randn(&mut rng, &[5])?, randn(&mut rng, &[5])?);
    let (_, g) = mse(p.data(), t.data())?;
    suite.input("mse", &p, &g, &|v| mse(v.data(), t.data()).expect("valid").0 as f64);

    Ok(suite.entries)
}
