use crate::tensor::{ParameterSet, Scalar, Tensor};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Bias-corrected Adam moments, one pair per parameter slot.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParameterSet<T>) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// One update `θ ← θ − lr · m̂ / (√v̂ + ε)`.
    pub fn update(&mut self, params: &mut ParameterSet<T>, grads: &[Tensor<T>], lr: f64) {
        assert_eq!(grads.len(), params.len(), "one gradient per parameter");
        self.step += 1;
        let (b1, b2) = (T::from_f64(ADAM_BETA1), T::from_f64(ADAM_BETA2));
        let c1 = T::ONE - b1.powi(self.step as i32);
        let c2 = T::ONE - b2.powi(self.step as i32);
        let (lr, eps) = (T::from_f64(lr), T::from_f64(ADAM_EPS));
        for (slot, g) in grads.iter().enumerate() {
            let p = &mut params.get_mut(slot).value;
            assert_eq!(p.shape(), g.shape(), "gradient shape of slot {slot}");
            let m = self.m[slot].data_mut();
            let v = self.v[slot].data_mut();
            for (((theta, &g), m), v) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                *m = b1 * *m + (T::ONE - b1) * g;
                *v = b2 * *v + (T::ONE - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *theta -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
