use crate::error::{Error, Result};
use crate::seed;
use crate::tensor::{ParameterSet, Scalar, Tensor};

use super::Objective;

/// How the outer gradient treats the inner loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetaOrder {
    /// Query gradient at `θ′` used as the gradient at `θ`.
    FirstOrder,
    /// Differentiates through the inner SGD steps with Hessian-vector
    /// products.
    SecondOrder,
}

/// Support/query pair of one task. `seed` fixes the channel noise of every
/// forward pass made for this task.
#[derive(Clone, Debug)]
pub struct MetaTask<B> {
    pub support: B,
    pub query: B,
    pub seed: u64,
}

const QUERY_PASS: u64 = u64::MAX;

pub(crate) fn inner_noise(task_seed: u64, step: usize) -> u64 {
    seed::derive(task_seed, &[step as u64])
}

pub(crate) fn query_noise(task_seed: u64) -> u64 {
    seed::derive(task_seed, &[QUERY_PASS])
}

fn all_finite<T: Scalar>(ts: &[Tensor<T>]) -> bool {
    ts.iter().all(Tensor::all_finite)
}

/// Plain SGD on the support loss; returns every iterate `θ_0 … θ_steps`.
fn adapt_trajectory<T: Scalar, O: Objective<T>>(
    obj: &O,
    params: &ParameterSet<T>,
    support: &O::Batch,
    lr: f64,
    steps: usize,
    task_seed: u64,
) -> Result<Vec<ParameterSet<T>>> {
    let mut path = vec![params.clone()];
    let mut last_finite = None;
    for k in 0..steps {
        let current = path.last().expect("non-empty");
        let (loss, grads) = obj.loss_and_grad(current, support, inner_noise(task_seed, k))?;
        if !loss.is_finite() || !all_finite(&grads) {
            return Err(Error::Divergence { iteration: k, last_finite_loss: last_finite });
        }
        last_finite = Some(loss);
        let mut next = current.clone();
        next.axpy(T::from_f64(-lr), &grads);
        path.push(next);
    }
    Ok(path)
}

/// `steps` gradient-descent steps of size `lr` on the support loss, starting
/// from a copy of `params`.
pub fn inner_adapt<T: Scalar, O: Objective<T>>(
    obj: &O,
    params: &ParameterSet<T>,
    support: &O::Batch,
    lr: f64,
    steps: usize,
    task_seed: u64,
) -> Result<ParameterSet<T>> {
    let mut path = adapt_trajectory(obj, params, support, lr, steps, task_seed)?;
    Ok(path.pop().expect("non-empty"))
}

/// Post-adaptation query loss of every task and the meta-gradient summed
/// over tasks in index order.
pub fn meta_gradient<T: Scalar, O: Objective<T>>(
    obj: &O,
    params: &ParameterSet<T>,
    tasks: &[MetaTask<O::Batch>],
    lr: f64,
    steps: usize,
    order: MetaOrder,
) -> Result<(Vec<f64>, Vec<Tensor<T>>)> {
    let mut total = params.zeros_like();
    let mut losses = Vec::with_capacity(tasks.len());
    for task in tasks {
        let path = adapt_trajectory(obj, params, &task.support, lr, steps, task.seed)?;
        let adapted = path.last().expect("non-empty");
        let (loss, mut v) = obj.loss_and_grad(adapted, &task.query, query_noise(task.seed))?;
        if order == MetaOrder::SecondOrder {
            for k in (0..steps).rev() {
                let hv = obj.hessian_vector(&path[k], &task.support, &v, inner_noise(task.seed, k))?;
                for (vi, hi) in v.iter_mut().zip(&hv) {
                    vi.axpy(T::from_f64(-lr), hi);
                }
            }
        }
        losses.push(loss);
        for (t, g) in total.iter_mut().zip(&v) {
            t.axpy(T::ONE, g);
        }
    }
    Ok((losses, total))
}
