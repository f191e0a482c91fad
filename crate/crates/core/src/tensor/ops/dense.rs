use crate::error::{Error, Result};
use crate::tensor::scalar::{gemm, MatMut, MatRef};
use crate::tensor::{Scalar, Tensor};

fn check<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<(usize, usize, usize)> {
    let [cin, cout] = *w.shape() else {
        return Err(Error::dim("dense", x.shape(), w.shape()));
    };
    if x.shape().last() != Some(&cin) {
        return Err(Error::dim("dense", x.shape(), w.shape()));
    }
    if b.shape() != [cout] {
        return Err(Error::dim("dense", w.shape(), b.shape()));
    }
    Ok((x.numel() / cin, cin, cout))
}

/// `y[.., j] = Σ_i x[.., i] W[i, j] + b[j]` over the last axis.
pub(crate) fn forward<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (rows, cin, cout) = check(x, w, b)?;
    let mut y = Vec::with_capacity(rows * cout);
    for _ in 0..rows {
        y.extend_from_slice(b.data());
    }
    gemm(
        MatRef::rm(x.data(), rows, cin),
        MatRef::rm(w.data(), cin, cout),
        MatMut::rm(&mut y, rows, cout),
        true,
    );
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = cout;
    Ok(Tensor::from_parts(shape, y))
}

pub(crate) struct DenseGrads<T> {
    pub dx: Option<Vec<T>>,
    pub dw: Vec<T>,
    pub db: Vec<T>,
}

pub(crate) fn backward<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, dy: &[T], need_dx: bool) -> DenseGrads<T> {
    let cin = w.shape()[0];
    let cout = w.shape()[1];
    let rows = x.numel() / cin;
    let dym = MatRef::rm(dy, rows, cout);
    let dx = need_dx.then(|| {
        let mut dx = vec![T::ZERO; rows * cin];
        gemm(dym, MatRef::rm(w.data(), cin, cout).t(), MatMut::rm(&mut dx, rows, cin), false);
        dx
    });
    let mut dw = vec![T::ZERO; cin * cout];
    gemm(MatRef::rm(x.data(), rows, cin).t(), dym, MatMut::rm(&mut dw, cin, cout), false);
    let mut db = vec![T::ZERO; cout];
    for row in dy.chunks_exact(cout) {
        for (acc, &g) in db.iter_mut().zip(row) {
            *acc += g;
        }
    }
    DenseGrads { dx, dw, db }
}
