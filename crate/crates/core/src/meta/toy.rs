//! Closed-form objectives for checking the meta-learning algebra.

use crate::error::Result;
use crate::tensor::{ParameterSet, Scalar, Tensor};

use super::Objective;

/// `scale · Σ (θ − target)²` over every parameter element; the batch is
/// the target.
#[derive(Clone, Copy, Debug)]
pub struct Quadratic {
    pub scale: f64,
}

impl<T: Scalar> Objective<T> for Quadratic {
    type Batch = f64;

    fn loss_and_grad(&self, params: &ParameterSet<T>, target: &f64, _: u64) -> Result<(f64, Vec<Tensor<T>>)> {
        let mut loss = 0.0;
        let grads = params
            .values()
            .map(|v| {
                loss += v.data().iter().map(|x| (x.as_f64() - target).powi(2)).sum::<f64>() * self.scale;
                v.map(|x| T::from_f64(2.0 * self.scale * (x.as_f64() - target)))
            })
            .collect();
        Ok((loss, grads))
    }

    fn hessian_vector(&self, _: &ParameterSet<T>, _: &f64, v: &[Tensor<T>], _: u64) -> Result<Vec<Tensor<T>>> {
        let c = T::from_f64(2.0 * self.scale);
        Ok(v.iter().map(|t| t.map(|x| c * x)).collect())
    }
}

/// `Σ a · θ` with one coefficient per parameter element; the batch is the
/// coefficient vector, flattened over slots.
#[derive(Clone, Copy, Debug)]
pub struct Linear;

impl<T: Scalar> Objective<T> for Linear {
    type Batch = Vec<f64>;

    fn loss_and_grad(&self, params: &ParameterSet<T>, coeffs: &Vec<f64>, _: u64) -> Result<(f64, Vec<Tensor<T>>)> {
        let mut it = coeffs.iter().copied();
        let mut loss = 0.0;
        let grads = params
            .values()
            .map(|v| {
                Tensor::from_fn(v.shape().to_vec(), |i| {
                    let a = it.next().expect("one coefficient per element");
                    loss += a * v.data()[i].as_f64();
                    T::from_f64(a)
                })
            })
            .collect();
        Ok((loss, grads))
    }

    fn hessian_vector(&self, params: &ParameterSet<T>, _: &Vec<f64>, _: &[Tensor<T>], _: u64) -> Result<Vec<Tensor<T>>> {
        Ok(params.zeros_like())
    }
}
