use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};

use super::{Scalar, Tensor};

/// A named trainable tensor and its gradient accumulator.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Scalar> Parameter<T> {
    pub fn new(name: impl Into<String>, value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape().to_vec());
        Parameter {
            name: name.into(),
            value,
            grad,
        }
    }
}

/// How a parameter is initialised by [`ParameterSet::init`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Uniform on `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    FanIn(usize),
    Constant(f64),
}

/// Ordered collection of uniquely named parameters.
///
/// Order is significant: gradient vectors returned by the graph and by
/// optimisers are aligned with it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterSet<T> {
    params: Vec<Parameter<T>>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> ParameterSet<T> {
    pub fn new() -> Self {
        ParameterSet {
            params: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Appends a parameter and returns its slot.
    pub fn push(&mut self, name: impl Into<String>, value: Tensor<T>) -> Result<usize> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name `{name}`")));
        }
        let slot = self.params.len();
        self.index.insert(name.clone(), slot);
        self.params.push(Parameter::new(name, value));
        Ok(slot)
    }

    /// Appends a freshly initialised parameter.
    pub fn init<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        init: Init,
        rng: &mut R,
    ) -> Result<usize> {
        let value = match init {
            Init::FanIn(fan_in) => {
                let bound = 1.0 / (fan_in as f64).sqrt();
                Tensor::from_fn(shape.to_vec(), |_| T::from_f64(rng.random_range(-bound..=bound)))
            }
            Init::Constant(c) => Tensor::full(shape.to_vec(), T::from_f64(c)),
        };
        self.push(name, value)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub fn get(&self, slot: usize) -> &Parameter<T> {
        &self.params[slot]
    }

    pub fn get_mut(&mut self, slot: usize) -> &mut Parameter<T> {
        &mut self.params[slot]
    }

    pub fn slot(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter<T>> {
        self.slot(name).map(|s| &self.params[s])
    }

    pub fn values(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.params.iter().map(|p| &p.value)
    }

    /// Number of scalar values across every parameter.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    /// Number of scalar values in parameters whose name starts with `prefix`.
    pub fn numel_with_prefix(&self, prefix: &str) -> usize {
        self.params
            .iter()
            .filter(|p| p.name.starts_with(prefix))
            .map(|p| p.value.numel())
            .sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().fill(T::ZERO);
        }
    }

    /// Adds `grads` (aligned with slot order) into the accumulators.
    pub fn accumulate_grads(&mut self, grads: &[Tensor<T>]) {
        assert_eq!(grads.len(), self.params.len(), "gradient count");
        for (p, g) in self.params.iter_mut().zip(grads) {
            p.grad.axpy(T::ONE, g);
        }
    }

    pub fn grads(&self) -> Vec<Tensor<T>> {
        self.params.iter().map(|p| p.grad.clone()).collect()
    }

    /// `value += alpha * direction` for every parameter.
    pub fn axpy(&mut self, alpha: T, direction: &[Tensor<T>]) {
        assert_eq!(direction.len(), self.params.len(), "direction count");
        for (p, d) in self.params.iter_mut().zip(direction) {
            p.value.axpy(alpha, d);
        }
    }

    pub fn cast<U: Scalar>(&self) -> ParameterSet<U> {
        ParameterSet {
            params: self
                .params
                .iter()
                .map(|p| Parameter {
                    name: p.name.clone(),
                    value: p.value.cast(),
                    grad: p.grad.cast(),
                })
                .collect(),
            index: self.index.clone(),
        }
    }

    /// Zero tensors shaped like every parameter.
    pub fn zeros_like(&self) -> Vec<Tensor<T>> {
        self.params
            .iter()
            .map(|p| Tensor::zeros(p.value.shape().to_vec()))
            .collect()
    }

    /// True when values (not gradients) are bit-identical.
    pub fn same_values(&self, other: &ParameterSet<T>) -> bool {
        self.params.len() == other.params.len()
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|(a, b)| a.name == b.name && a.value == b.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn duplicate_names_rejected() {
        let mut ps = ParameterSet::<f32>::new();
        ps.push("a", Tensor::zeros([1])).unwrap();
        assert!(ps.push("a", Tensor::zeros([1])).is_err());
    }

    #[test]
    fn fan_in_bounds_and_zero_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut ps = ParameterSet::<f64>::new();
        let s = ps.init("w", &[4, 25], Init::FanIn(4), &mut rng).unwrap();
        assert!(ps.get(s).value.data().iter().all(|x| x.abs() <= 0.5));
        ps.accumulate_grads(&[Tensor::ones([4, 25])]);
        assert!(ps.get(s).grad.data().iter().all(|&g| g == 1.0));
        ps.zero_grad();
        assert!(ps.get(s).grad.data().iter().all(|&g| g == 0.0));
        assert_eq!(ps.get(s).grad.shape(), ps.get(s).value.shape());
    }
}
