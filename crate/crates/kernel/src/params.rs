use std::collections::HashMap;

use crate::error::{KernelError, Result};
use crate::rng::{self, KernelRng};
use crate::tensor::Tensor;

/// Index of a parameter inside its [`ParameterStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub(crate) struct OptimState {
    pub first: Vec<f32>,
    pub second: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    name: String,
    value: Tensor,
    state: OptimState,
}

/// Ordered, named model parameters with gradient buffers and optimizer slots.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterStore {
    entries: Vec<Entry>,
    index: HashMap<String, usize>,
    step: u64,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return Err(KernelError::DuplicateParameter(name.to_string()));
        }
        let id = self.entries.len();
        let n = value.len();
        self.entries.push(Entry {
            name: name.to_string(),
            value: value.with_grad(),
            state: OptimState {
                first: vec![0.0; n],
                second: vec![0.0; n],
            },
        });
        self.index.insert(name.to_string(), id);
        Ok(ParamId(id))
    }

    pub fn zeros(&mut self, name: &str, shape: &[usize]) -> Result<ParamId> {
        self.insert(name, Tensor::zeros(shape))
    }

    pub fn ones(&mut self, name: &str, shape: &[usize]) -> Result<ParamId> {
        self.insert(name, Tensor::filled(shape, 1.0))
    }

    /// Glorot-uniform matrix: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
    pub fn xavier(&mut self, name: &str, fan_in: usize, fan_out: usize, rng: &mut KernelRng) -> Result<ParamId> {
        let a = (6.0 / (fan_in + fan_out) as f32).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng::uniform_range(rng, -a, a))
            .collect();
        self.insert(name, Tensor::from_vec(&[fan_in, fan_out], data)?)
    }

    pub fn normal(&mut self, name: &str, shape: &[usize], std: f32, rng: &mut KernelRng) -> Result<ParamId> {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng::normal(rng, 0.0, std)).collect();
        self.insert(name, Tensor::from_vec(shape, data)?)
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.index
            .get(name)
            .copied()
            .map(ParamId)
            .ok_or_else(|| KernelError::UnknownParameter(name.to_string()))
    }

    /// Looks up `name` and checks its shape.
    pub fn expect(&self, name: &str, shape: &[usize]) -> Result<ParamId> {
        let id = self.id(name)?;
        if self.value(id).shape() != shape {
            return Err(KernelError::Shape {
                op: "load parameter",
                lhs: self.value(id).shape().to_vec(),
                rhs: shape.to_vec(),
            });
        }
        Ok(id)
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub(crate) fn advance_step(&mut self) {
        self.step += 1;
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|e| (e.name.as_str(), &e.value))
    }

    pub fn parameter_count(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    /// Fresh zeroed gradient accumulator matching this store's layout.
    pub fn new_grads(&self) -> Grads {
        Grads(self.entries.iter().map(|e| vec![0.0; e.value.len()]).collect())
    }

    /// Adds an accumulator into the stored gradient buffers.
    pub fn accumulate(&mut self, grads: &Grads) -> Result<()> {
        if grads.0.len() != self.entries.len() {
            return Err(KernelError::InvalidArgument("gradient layout does not match store".into()));
        }
        for (e, g) in self.entries.iter_mut().zip(&grads.0) {
            let buf = e.value.grad_mut().expect("parameters always carry gradients");
            for (b, v) in buf.iter_mut().zip(g) {
                *b += v;
            }
        }
        Ok(())
    }

    pub fn grad(&self, id: ParamId) -> &[f32] {
        self.entries[id.0].value.grad().expect("parameters always carry gradients")
    }

    pub fn zero_grad(&mut self) {
        for e in &mut self.entries {
            if let Some(g) = e.value.grad_mut() {
                g.fill(0.0);
            }
        }
    }

    pub(crate) fn entry_parts(&mut self, id: usize) -> (&mut [f32], &mut [f32], &mut OptimState) {
        let e = &mut self.entries[id];
        let (value, grad) = e.value.value_and_grad_mut();
        (value, grad.expect("parameters always carry gradients"), &mut e.state)
    }

    /// Parameter values only; gradients and optimizer state are dropped.
    pub fn snapshot(&self) -> Vec<(String, Tensor)> {
        self.entries
            .iter()
            .map(|e| {
                let t = Tensor::from_vec(e.value.shape(), e.value.data().to_vec()).expect("valid shape");
                (e.name.clone(), t)
            })
            .collect()
    }
}

/// Gradient accumulator laid out like a [`ParameterStore`].
///
/// Backward passes write here rather than into the store so forward state can
/// be read while gradients are written, and so per-example accumulators can
/// be summed in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads(Vec<Vec<f32>>);

impl Grads {
    pub fn slot(&self, id: ParamId) -> &[f32] {
        &self.0[id.0]
    }

    pub fn slot_mut(&mut self, id: ParamId) -> &mut [f32] {
        &mut self.0[id.0]
    }

    pub fn add(&mut self, other: &Grads) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f32) {
        for v in self.0.iter_mut().flatten() {
            *v *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    pub fn flat(&self) -> Vec<f32> {
        self.0.concat()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let mut s = ParameterStore::new();
        s.zeros("w", &[2, 2]).unwrap();
        assert_eq!(s.zeros("w", &[1]), Err(KernelError::DuplicateParameter("w".into())));
    }

    #[test]
    fn xavier_within_bound() {
        let mut s = ParameterStore::new();
        let mut r = rng::seeded(0);
        let id = s.xavier("w", 10, 14, &mut r).unwrap();
        let a = (6.0f32 / 24.0).sqrt();
        assert!(s.value(id).data().iter().all(|v| v.abs() <= a));
        assert_eq!(s.value(id).shape(), &[10, 14]);
    }

    #[test]
    fn accumulate_adds_into_store_grads() {
        let mut s = ParameterStore::new();
        let id = s.zeros("b", &[3]).unwrap();
        let mut g = s.new_grads();
        g.slot_mut(id).copy_from_slice(&[1.0, 2.0, 3.0]);
        s.accumulate(&g).unwrap();
        s.accumulate(&g).unwrap();
        assert_eq!(s.grad(id), &[2.0, 4.0, 6.0]);
        s.zero_grad();
        assert_eq!(s.grad(id), &[0.0; 3]);
    }

    #[test]
    fn expect_checks_shape() {
        let mut s = ParameterStore::new();
        s.zeros("w", &[2, 3]).unwrap();
        assert!(s.expect("w", &[2, 3]).is_ok());
        assert!(s.expect("w", &[3, 2]).is_err());
        assert!(s.expect("missing", &[1]).is_err());
    }
}
