use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// `Σ‖x̂ − x‖² / Σ‖x‖²` over the batch, accumulated in `f64`.
pub fn nmse<T: Scalar>(x_hat: &Tensor<T>, x: &Tensor<T>) -> Result<f64> {
    if x_hat.shape() != x.shape() {
        return Err(Error::dim("nmse", x_hat.shape(), x.shape()));
    }
    let (mut err, mut energy) = (0.0f64, 0.0f64);
    for (&a, &b) in x_hat.data().iter().zip(x.data()) {
        let (a, b) = (a.as_f64(), b.as_f64());
        err += (a - b) * (a - b);
        energy += b * b;
    }
    if energy == 0.0 {
        return Err(Error::UndefinedReference);
    }
    Ok(err / energy)
}

pub fn nmse_db(nmse: f64) -> f64 {
    10.0 * nmse.log10()
}
