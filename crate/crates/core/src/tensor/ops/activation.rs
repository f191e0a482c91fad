use crate::tensor::Scalar;

#[inline]
pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::ZERO {
        T::ONE / (T::ONE + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::ONE + e)
    }
}

/// Exact standard-normal CDF.
#[inline]
pub(crate) fn normal_cdf<T: Scalar>(x: T) -> T {
    T::from_f64(0.5) * (T::ONE + (x * T::from_f64(std::f64::consts::FRAC_1_SQRT_2)).erf())
}

#[inline]
fn normal_pdf<T: Scalar>(x: T) -> T {
    T::from_f64(1.0 / (2.0 * std::f64::consts::PI).sqrt()) * (T::from_f64(-0.5) * x * x).exp()
}

pub(crate) fn sigmoid_backward<T: Scalar>(y: &[T], dy: &[T]) -> Vec<T> {
    y.iter().zip(dy).map(|(&s, &g)| g * s * (T::ONE - s)).collect()
}

/// Returns the output and `σ(βx)` for the backward pass.
pub(crate) fn swish_forward<T: Scalar>(x: &[T], beta: T) -> (Vec<T>, Vec<T>) {
    let sig: Vec<T> = x.iter().map(|&v| sigmoid(beta * v)).collect();
    let y = x.iter().zip(&sig).map(|(&v, &s)| v * s).collect();
    (y, sig)
}

/// Returns `(dx, dbeta)`.
pub(crate) fn swish_backward<T: Scalar>(x: &[T], beta: T, sig: &[T], dy: &[T]) -> (Vec<T>, T) {
    let mut dbeta = T::ZERO;
    let dx = x
        .iter()
        .zip(sig)
        .zip(dy)
        .map(|((&v, &s), &g)| {
            let ds = s * (T::ONE - s);
            dbeta += g * v * v * ds;
            g * (s + beta * v * ds)
        })
        .collect();
    (dx, dbeta)
}

/// Returns the output and `Φ(x)` for the backward pass.
pub(crate) fn gelu_forward<T: Scalar>(x: &[T]) -> (Vec<T>, Vec<T>) {
    let cdf: Vec<T> = x.iter().map(|&v| normal_cdf(v)).collect();
    let y = x.iter().zip(&cdf).map(|(&v, &c)| v * c).collect();
    (y, cdf)
}

pub(crate) fn gelu_backward<T: Scalar>(x: &[T], cdf: &[T], dy: &[T]) -> Vec<T> {
    x.iter()
        .zip(cdf)
        .zip(dy)
        .map(|((&v, &c), &g)| g * (c + v * normal_pdf(v)))
        .collect()
}

pub(crate) fn relu_forward<T: Scalar>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| if v > T::ZERO { v } else { T::ZERO }).collect()
}

/// Subgradient at exactly zero is zero.
pub(crate) fn relu_backward<T: Scalar>(x: &[T], dy: &[T]) -> Vec<T> {
    x.iter()
        .zip(dy)
        .map(|(&v, &g)| if v > T::ZERO { g } else { T::ZERO })
        .collect()
}
