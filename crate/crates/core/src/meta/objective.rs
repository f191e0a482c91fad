use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::Architecture;
use crate::psi::{realize_channel, ChannelConfig, ChannelMode};
use crate::tensor::{Graph, ParameterSet, Scalar, Tensor, Var};

/// A differentiable loss over a parameter set.
pub trait Objective<T: Scalar> {
    type Batch;

    /// Loss and its gradient, aligned with the parameter slots.
    /// `noise_seed` fixes any stochastic part of the forward pass.
    fn loss_and_grad(&self, params: &ParameterSet<T>, batch: &Self::Batch, noise_seed: u64)
        -> Result<(f64, Vec<Tensor<T>>)>;

    fn loss(&self, params: &ParameterSet<T>, batch: &Self::Batch, noise_seed: u64) -> Result<f64> {
        Ok(self.loss_and_grad(params, batch, noise_seed)?.0)
    }

    /// Hessian-vector product. The default is a central difference of
    /// gradients along `v`.
    fn hessian_vector(
        &self,
        params: &ParameterSet<T>,
        batch: &Self::Batch,
        v: &[Tensor<T>],
        noise_seed: u64,
    ) -> Result<Vec<Tensor<T>>> {
        let norm = |xs: &mut dyn Iterator<Item = &Tensor<T>>| {
            xs.flat_map(|t| t.data()).map(|x| x.as_f64() * x.as_f64()).sum::<f64>().sqrt()
        };
        let v_norm = norm(&mut v.iter());
        if v_norm == 0.0 {
            return Ok(params.zeros_like());
        }
        let theta_norm = norm(&mut params.values());
        let h = T::epsilon().as_f64().sqrt() * (1.0 + theta_norm) / v_norm;
        let mut plus = params.clone();
        plus.axpy(T::from_f64(h), v);
        let mut minus = params.clone();
        minus.axpy(T::from_f64(-h), v);
        let (_, gp) = self.loss_and_grad(&plus, batch, noise_seed)?;
        let (_, gm) = self.loss_and_grad(&minus, batch, noise_seed)?;
        let scale = T::from_f64(0.5 / h);
        Ok(gp
            .into_iter()
            .zip(gm)
            .map(|(mut a, b)| {
                a.axpy(-T::ONE, &b);
                a.map(|x| x * scale)
            })
            .collect())
    }
}

/// Mean squared reconstruction error of `decode(channel(encode(x)))`
/// against `x`. Batches are `[B, hw, 1]` tensors of normalised phases.
#[derive(Clone, Debug)]
pub struct ReconstructionObjective {
    pub arch: Architecture,
    pub channel: ChannelConfig,
}

impl ReconstructionObjective {
    pub fn new(arch: Architecture, channel: ChannelConfig) -> Self {
        ReconstructionObjective { arch, channel }
    }

    fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        p: &[Var],
        x: Var,
        noise_seed: u64,
    ) -> Result<Var> {
        let mut z = self.arch.encode_graph(g, p, x)?;
        if self.channel.mode != ChannelMode::Ideal {
            let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
            let draw = realize_channel(g.value(z), &self.channel, &mut rng);
            if let Some(h) = draw.gains {
                let h = g.constant(h);
                z = g.mul(z, h)?;
            }
            if let Some(w) = draw.noise {
                let w = g.constant(w);
                z = g.add(z, w)?;
            }
        }
        self.arch.decode_graph(g, p, z)
    }

    /// Reconstruction of `batch` without gradient tracking.
    pub fn reconstruct<T: Scalar>(&self, params: &ParameterSet<T>, batch: &Tensor<T>, noise_seed: u64) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let p = g.bind_constants(params);
        let x = g.constant(batch.clone());
        let y = self.forward(&mut g, &p, x, noise_seed)?;
        Ok(g.value(y).clone())
    }
}

impl<T: Scalar> Objective<T> for ReconstructionObjective {
    type Batch = Tensor<T>;

    fn loss_and_grad(&self, params: &ParameterSet<T>, batch: &Tensor<T>, noise_seed: u64) -> Result<(f64, Vec<Tensor<T>>)> {
        let mut g = Graph::new();
        let p = g.bind(params);
        let x = g.constant(batch.clone());
        let y = self.forward(&mut g, &p, x, noise_seed)?;
        let loss = g.mse_loss(y, x)?;
        let grads = g.backward(loss)?;
        Ok((g.value(loss).item().as_f64(), grads.for_params(&p)))
    }

    fn loss(&self, params: &ParameterSet<T>, batch: &Tensor<T>, noise_seed: u64) -> Result<f64> {
        let mut g = Graph::new();
        let p = g.bind_constants(params);
        let x = g.constant(batch.clone());
        let y = self.forward(&mut g, &p, x, noise_seed)?;
        let loss = g.mse_loss(y, x)?;
        Ok(g.value(loss).item().as_f64())
    }
}
