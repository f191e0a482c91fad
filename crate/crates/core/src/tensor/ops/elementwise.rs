use crate::tensor::Scalar;

pub(crate) fn mul<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x * y).collect()
}

pub(crate) fn add<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

/// Mean of squared differences, accumulated in f64.
pub(crate) fn mse<T: Scalar>(pred: &[T], target: &[T]) -> T {
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let d = (p - t).as_f64();
            d * d
        })
        .sum();
    T::from_f64(sum / pred.len() as f64)
}

/// Gradient of `g · mse(pred, target)` with respect to `pred`.
pub(crate) fn mse_backward<T: Scalar>(pred: &[T], target: &[T], g: T) -> Vec<T> {
    let scale = g * T::from_f64(2.0 / pred.len() as f64);
    pred.iter().zip(target).map(|(&p, &t)| scale * (p - t)).collect()
}
