//! Standard, transposed and depthwise 1-D convolutions on `[B, L, C]`
//! (channels-last) tensors. Kernels are stored `[k, Cin, Cout]`
//! (depthwise: `[k, C]`).

use crate::error::{Error, Result};
use crate::tensor::scalar::{gemm, MatMut, MatRef};
use crate::tensor::{Scalar, Tensor};

use super::{blc, same_rank};

/// Output length of a strided convolution, or `None` when the window does
/// not fit.
pub fn conv1d_out_len(len: usize, k: usize, stride: usize, pad: usize) -> Option<usize> {
    if k == 0 || stride == 0 || len + 2 * pad < k {
        return None;
    }
    Some((len + 2 * pad - k) / stride + 1)
}

/// Output length of a transposed convolution, or `None` for invalid
/// hyper-parameters (`output_pad >= stride`, or a non-positive result).
pub fn conv_transpose1d_out_len(
    len: usize,
    k: usize,
    stride: usize,
    pad: usize,
    output_pad: usize,
) -> Option<usize> {
    if k == 0 || stride == 0 || len == 0 || output_pad >= stride {
        return None;
    }
    let full = (len - 1) * stride + k + output_pad;
    (full > 2 * pad).then(|| full - 2 * pad)
}

struct ConvDims {
    batch: usize,
    len: usize,
    cin: usize,
    cout: usize,
    k: usize,
    out_len: usize,
}

fn kernel_dims<T: Scalar>(op: &'static str, x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<(usize, usize, usize, usize, usize)> {
    let (batch, len, cin) = blc(op, x.shape())?;
    let [k, wcin, cout] = *w.shape() else {
        return Err(Error::dim(op, x.shape(), w.shape()));
    };
    if wcin != cin {
        return Err(Error::dim(op, x.shape(), w.shape()));
    }
    if b.shape() != [cout] {
        return Err(Error::dim(op, w.shape(), b.shape()));
    }
    Ok((batch, len, cin, cout, k))
}

fn conv_dims<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>, stride: usize, pad: usize) -> Result<ConvDims> {
    let (batch, len, cin, cout, k) = kernel_dims("conv1d", x, w, b)?;
    let out_len = conv1d_out_len(len, k, stride, pad).ok_or_else(|| Error::InvalidGeometry {
        op: "conv1d",
        detail: format!("L={len}, k={k}, stride={stride}, pad={pad} gives no output"),
    })?;
    Ok(ConvDims { batch, len, cin, cout, k, out_len })
}

fn im2col<T: Scalar>(x: &[T], d: &ConvDims, stride: usize, pad: usize) -> Vec<T> {
    let width = d.k * d.cin;
    let mut cols = vec![T::ZERO; d.batch * d.out_len * width];
    for b in 0..d.batch {
        for o in 0..d.out_len {
            let row = &mut cols[(b * d.out_len + o) * width..][..width];
            for m in 0..d.k {
                let src = (o * stride + m) as isize - pad as isize;
                if src < 0 || src as usize >= d.len {
                    continue;
                }
                let from = (b * d.len + src as usize) * d.cin;
                row[m * d.cin..(m + 1) * d.cin].copy_from_slice(&x[from..from + d.cin]);
            }
        }
    }
    cols
}

pub(crate) fn conv1d_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    let d = conv_dims(x, w, b, stride, pad)?;
    let rows = d.batch * d.out_len;
    let cols = im2col(x.data(), &d, stride, pad);
    let mut y = Vec::with_capacity(rows * d.cout);
    for _ in 0..rows {
        y.extend_from_slice(b.data());
    }
    gemm(
        MatRef::rm(&cols, rows, d.k * d.cin),
        MatRef::rm(w.data(), d.k * d.cin, d.cout),
        MatMut::rm(&mut y, rows, d.cout),
        true,
    );
    Ok(Tensor::from_parts(same_rank(x.shape(), d.out_len, d.cout), y))
}

pub(crate) struct ConvGrads<T> {
    pub dx: Option<Vec<T>>,
    pub dw: Vec<T>,
    pub db: Vec<T>,
}

fn bias_grad<T: Scalar>(dy: &[T], cout: usize) -> Vec<T> {
    let mut db = vec![T::ZERO; cout];
    for row in dy.chunks_exact(cout) {
        for (acc, &g) in db.iter_mut().zip(row) {
            *acc += g;
        }
    }
    db
}

pub(crate) fn conv1d_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    dy: &[T],
    stride: usize,
    pad: usize,
    need_dx: bool,
) -> ConvGrads<T> {
    let d = conv_dims(x, w, b, stride, pad).expect("validated in forward");
    let rows = d.batch * d.out_len;
    let width = d.k * d.cin;
    let cols = im2col(x.data(), &d, stride, pad);
    let dym = MatRef::rm(dy, rows, d.cout);
    let mut dw = vec![T::ZERO; width * d.cout];
    gemm(MatRef::rm(&cols, rows, width).t(), dym, MatMut::rm(&mut dw, width, d.cout), false);
    let dx = need_dx.then(|| {
        let mut dcols = cols;
        gemm(dym, MatRef::rm(w.data(), width, d.cout).t(), MatMut::rm(&mut dcols, rows, width), false);
        conv1d_input_grad_from_cols(&dcols, &d, stride, pad)
    });
    ConvGrads { dx, dw, db: bias_grad(dy, d.cout) }
}

fn conv1d_input_grad_from_cols<T: Scalar>(dcols: &[T], d: &ConvDims, stride: usize, pad: usize) -> Vec<T> {
    let width = d.k * d.cin;
    let mut dx = vec![T::ZERO; d.batch * d.len * d.cin];
    for b in 0..d.batch {
        for o in 0..d.out_len {
            let row = &dcols[(b * d.out_len + o) * width..][..width];
            for m in 0..d.k {
                let src = (o * stride + m) as isize - pad as isize;
                if src < 0 || src as usize >= d.len {
                    continue;
                }
                let to = (b * d.len + src as usize) * d.cin;
                for (acc, &g) in dx[to..to + d.cin].iter_mut().zip(&row[m * d.cin..(m + 1) * d.cin]) {
                    *acc += g;
                }
            }
        }
    }
    dx
}

struct TransposeDims {
    batch: usize,
    len: usize,
    cin: usize,
    cout: usize,
    k: usize,
    out_len: usize,
}

fn transpose_dims<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    stride: usize,
    pad: usize,
    output_pad: usize,
) -> Result<TransposeDims> {
    let (batch, len, cin, cout, k) = kernel_dims("conv_transpose1d", x, w, b)?;
    let out_len = conv_transpose1d_out_len(len, k, stride, pad, output_pad).ok_or_else(|| {
        Error::InvalidGeometry {
            op: "conv_transpose1d",
            detail: format!(
                "L={len}, k={k}, stride={stride}, pad={pad}, output_pad={output_pad} \
                 (output_pad must be < stride and the output non-empty)"
            ),
        }
    })?;
    Ok(TransposeDims { batch, len, cin, cout, k, out_len })
}

/// `[k, Cin, Cout]` → `[Cin, k·Cout]`.
fn kernel_as_rows<T: Scalar>(w: &[T], k: usize, cin: usize, cout: usize) -> Vec<T> {
    let mut out = vec![T::ZERO; w.len()];
    for m in 0..k {
        for ci in 0..cin {
            let src = &w[(m * cin + ci) * cout..][..cout];
            out[ci * k * cout + m * cout..][..cout].copy_from_slice(src);
        }
    }
    out
}

pub(crate) fn conv_transpose1d_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    stride: usize,
    pad: usize,
    output_pad: usize,
) -> Result<Tensor<T>> {
    let d = transpose_dims(x, w, b, stride, pad, output_pad)?;
    let rows = d.batch * d.len;
    let wide = d.k * d.cout;
    let wrows = kernel_as_rows(w.data(), d.k, d.cin, d.cout);
    let mut p = vec![T::ZERO; rows * wide];
    gemm(
        MatRef::rm(x.data(), rows, d.cin),
        MatRef::rm(&wrows, d.cin, wide),
        MatMut::rm(&mut p, rows, wide),
        false,
    );
    let mut y = Vec::with_capacity(d.batch * d.out_len * d.cout);
    for _ in 0..d.batch * d.out_len {
        y.extend_from_slice(b.data());
    }
    for bi in 0..d.batch {
        for i in 0..d.len {
            let prow = &p[(bi * d.len + i) * wide..][..wide];
            for m in 0..d.k {
                let j = (i * stride + m) as isize - pad as isize;
                if j < 0 || j as usize >= d.out_len {
                    continue;
                }
                let to = (bi * d.out_len + j as usize) * d.cout;
                for (acc, &v) in y[to..to + d.cout].iter_mut().zip(&prow[m * d.cout..(m + 1) * d.cout]) {
                    *acc += v;
                }
            }
        }
    }
    Ok(Tensor::from_parts(same_rank(x.shape(), d.out_len, d.cout), y))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn conv_transpose1d_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    b: &Tensor<T>,
    dy: &[T],
    stride: usize,
    pad: usize,
    output_pad: usize,
    need_dx: bool,
) -> ConvGrads<T> {
    let d = transpose_dims(x, w, b, stride, pad, output_pad).expect("validated in forward");
    let rows = d.batch * d.len;
    let wide = d.k * d.cout;
    let mut dp = vec![T::ZERO; rows * wide];
    for bi in 0..d.batch {
        for i in 0..d.len {
            let prow = &mut dp[(bi * d.len + i) * wide..][..wide];
            for m in 0..d.k {
                let j = (i * stride + m) as isize - pad as isize;
                if j < 0 || j as usize >= d.out_len {
                    continue;
                }
                let from = (bi * d.out_len + j as usize) * d.cout;
                prow[m * d.cout..(m + 1) * d.cout].copy_from_slice(&dy[from..from + d.cout]);
            }
        }
    }
    let dpm = MatRef::rm(&dp, rows, wide);
    let mut dwrows = vec![T::ZERO; d.cin * wide];
    gemm(MatRef::rm(x.data(), rows, d.cin).t(), dpm, MatMut::rm(&mut dwrows, d.cin, wide), false);
    let mut dw = vec![T::ZERO; w.numel()];
    for m in 0..d.k {
        for ci in 0..d.cin {
            dw[(m * d.cin + ci) * d.cout..][..d.cout]
                .copy_from_slice(&dwrows[ci * wide + m * d.cout..][..d.cout]);
        }
    }
    let dx = need_dx.then(|| {
        let wrows = kernel_as_rows(w.data(), d.k, d.cin, d.cout);
        let mut dx = vec![T::ZERO; rows * d.cin];
        gemm(dpm, MatRef::rm(&wrows, d.cin, wide).t(), MatMut::rm(&mut dx, rows, d.cin), false);
        dx
    });
    ConvGrads { dx, dw, db: bias_grad(dy, d.cout) }
}

fn depthwise_dims<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<(usize, usize, usize, usize)> {
    let (batch, len, c) = blc("dwconv1d", x.shape())?;
    let [k, wc] = *w.shape() else {
        return Err(Error::dim("dwconv1d", x.shape(), w.shape()));
    };
    if wc != c || k == 0 {
        return Err(Error::dim("dwconv1d", x.shape(), w.shape()));
    }
    if b.shape() != [c] {
        return Err(Error::dim("dwconv1d", w.shape(), b.shape()));
    }
    Ok((batch, len, c, k))
}

/// Length-preserving depthwise convolution, stride 1, `pad = k / 2`.
pub(crate) fn dwconv1d_forward<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (batch, len, c, k) = depthwise_dims(x, w, b)?;
    let pad = k / 2;
    let xd = x.data();
    let wd = w.data();
    let mut y = Vec::with_capacity(x.numel());
    for _ in 0..batch * len {
        y.extend_from_slice(b.data());
    }
    for bi in 0..batch {
        for l in 0..len {
            let out = &mut y[(bi * len + l) * c..][..c];
            for m in 0..k {
                let src = (l + m) as isize - pad as isize;
                if src < 0 || src as usize >= len {
                    continue;
                }
                let xin = &xd[(bi * len + src as usize) * c..][..c];
                let wm = &wd[m * c..(m + 1) * c];
                for ((o, &xv), &wv) in out.iter_mut().zip(xin).zip(wm) {
                    *o += wv * xv;
                }
            }
        }
    }
    Ok(Tensor::from_parts(x.shape().to_vec(), y))
}

pub(crate) fn dwconv1d_backward<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, dy: &[T], need_dx: bool) -> ConvGrads<T> {
    let (batch, len, c) = blc("dwconv1d", x.shape()).expect("validated in forward");
    let k = w.shape()[0];
    let pad = k / 2;
    let xd = x.data();
    let wd = w.data();
    let mut dw = vec![T::ZERO; k * c];
    let mut dx = need_dx.then(|| vec![T::ZERO; x.numel()]);
    for bi in 0..batch {
        for l in 0..len {
            let g = &dy[(bi * len + l) * c..][..c];
            for m in 0..k {
                let src = (l + m) as isize - pad as isize;
                if src < 0 || src as usize >= len {
                    continue;
                }
                let at = (bi * len + src as usize) * c;
                let xin = &xd[at..at + c];
                for ((acc, &gv), &xv) in dw[m * c..(m + 1) * c].iter_mut().zip(g).zip(xin) {
                    *acc += gv * xv;
                }
                if let Some(dx) = dx.as_mut() {
                    let wm = &wd[m * c..(m + 1) * c];
                    for ((acc, &gv), &wv) in dx[at..at + c].iter_mut().zip(g).zip(wm) {
                        *acc += gv * wv;
                    }
                }
            }
        }
    }
    ConvGrads { dx, dw, db: bias_grad(dy, c) }
}
