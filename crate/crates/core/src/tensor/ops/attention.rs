//! Softmax, layer normalisation and fused multi-head self-attention.

use crate::error::{Error, Result};
use crate::tensor::scalar::{gemm, MatMut, MatRef};
use crate::tensor::{Scalar, Tensor};

use super::blc;

/// Row softmax over the last axis with max subtraction.
pub(crate) fn softmax_rows<T: Scalar>(x: &[T], n: usize) -> Vec<T> {
    let mut y = x.to_vec();
    softmax_in_place(&mut y, n);
    y
}

fn softmax_in_place<T: Scalar>(y: &mut [T], n: usize) {
    for row in y.chunks_exact_mut(n) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::ZERO;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        let inv = T::ONE / sum;
        for v in row.iter_mut() {
            *v *= inv;
        }
    }
}

/// `dx = y ⊙ (dy − Σ dy ⊙ y)` per row, written into `dy`.
fn softmax_backward_in_place<T: Scalar>(y: &[T], dy: &mut [T], n: usize) {
    for (yr, gr) in y.chunks_exact(n).zip(dy.chunks_exact_mut(n)) {
        let dot: T = yr.iter().zip(gr.iter()).map(|(&a, &b)| a * b).sum();
        for (g, &s) in gr.iter_mut().zip(yr) {
            *g = s * (*g - dot);
        }
    }
}

pub(crate) fn softmax_backward<T: Scalar>(y: &[T], dy: &[T], n: usize) -> Vec<T> {
    let mut dx = dy.to_vec();
    softmax_backward_in_place(y, &mut dx, n);
    dx
}

pub(crate) const LAYER_NORM_EPS: f64 = 1e-5;

pub(crate) struct LayerNormCache<T> {
    pub xhat: Vec<T>,
    pub rstd: Vec<T>,
}

pub(crate) fn layer_norm_forward<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
) -> Result<(Tensor<T>, LayerNormCache<T>)> {
    let c = *x.shape().last().unwrap();
    if gamma.shape() != [c] || beta.shape() != [c] {
        return Err(Error::dim("layer_norm", x.shape(), gamma.shape()));
    }
    let eps = T::from_f64(LAYER_NORM_EPS);
    let inv_c = T::from_f64(1.0 / c as f64);
    let rows = x.numel() / c;
    let mut xhat = Vec::with_capacity(x.numel());
    let mut rstd = Vec::with_capacity(rows);
    let mut y = Vec::with_capacity(x.numel());
    for row in x.data().chunks_exact(c) {
        let mean = row.iter().copied().sum::<T>() * inv_c;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_c;
        let r = T::ONE / (var + eps).sqrt();
        rstd.push(r);
        for ((&v, &g), &bt) in row.iter().zip(gamma.data()).zip(beta.data()) {
            let h = (v - mean) * r;
            xhat.push(h);
            y.push(h * g + bt);
        }
    }
    Ok((Tensor::from_parts(x.shape().to_vec(), y), LayerNormCache { xhat, rstd }))
}

/// Returns `(dx, dgamma, dbeta)`.
pub(crate) fn layer_norm_backward<T: Scalar>(
    cache: &LayerNormCache<T>,
    gamma: &[T],
    dy: &[T],
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let c = gamma.len();
    let inv_c = T::from_f64(1.0 / c as f64);
    let mut dgamma = vec![T::ZERO; c];
    let mut dbeta = vec![T::ZERO; c];
    let mut dx = Vec::with_capacity(dy.len());
    let mut dxhat = vec![T::ZERO; c];
    for ((g, h), &r) in dy.chunks_exact(c).zip(cache.xhat.chunks_exact(c)).zip(&cache.rstd) {
        let mut mean_d = T::ZERO;
        let mut mean_dh = T::ZERO;
        for i in 0..c {
            dgamma[i] += g[i] * h[i];
            dbeta[i] += g[i];
            dxhat[i] = g[i] * gamma[i];
            mean_d += dxhat[i];
            mean_dh += dxhat[i] * h[i];
        }
        mean_d *= inv_c;
        mean_dh *= inv_c;
        for i in 0..c {
            dx.push(r * (dxhat[i] - mean_d - h[i] * mean_dh));
        }
    }
    (dx, dgamma, dbeta)
}

/// Saved activations of one attention call.
pub(crate) struct MhsaCache<T> {
    pub q: Vec<T>,
    pub k: Vec<T>,
    pub v: Vec<T>,
    /// Attention probabilities, `[B, heads, L, L]`.
    pub attn: Vec<T>,
    /// Concatenated head outputs, `[B, L, C]`.
    pub concat: Vec<T>,
}

pub(crate) struct MhsaWeights<'a, T> {
    pub wq: &'a Tensor<T>,
    pub wk: &'a Tensor<T>,
    pub wv: &'a Tensor<T>,
    pub wo: &'a Tensor<T>,
}

fn check_mhsa<T: Scalar>(x: &Tensor<T>, w: &MhsaWeights<'_, T>, heads: usize) -> Result<(usize, usize, usize)> {
    let (b, l, c) = blc("mhsa", x.shape())?;
    if heads == 0 || c % heads != 0 {
        return Err(Error::Config(format!(
            "mhsa: channel width {c} is not divisible by {heads} heads"
        )));
    }
    for t in [w.wq, w.wk, w.wv, w.wo] {
        if t.shape() != [c, c] {
            return Err(Error::dim("mhsa", x.shape(), t.shape()));
        }
    }
    Ok((b, l, c))
}

fn project<T: Scalar>(x: &[T], w: &[T], rows: usize, c: usize) -> Vec<T> {
    let mut out = vec![T::ZERO; rows * c];
    gemm(MatRef::rm(x, rows, c), MatRef::rm(w, c, c), MatMut::rm(&mut out, rows, c), false);
    out
}

/// View of head `h` of batch item `b` inside a `[B, L, C]` buffer.
fn head<T>(buf: &[T], b: usize, h: usize, l: usize, c: usize, dk: usize) -> MatRef<'_, T> {
    MatRef {
        data: &buf[b * l * c + h * dk..],
        rows: l,
        cols: dk,
        rs: c,
        cs: 1,
    }
}

fn head_mut<T>(buf: &mut [T], b: usize, h: usize, l: usize, c: usize, dk: usize) -> MatMut<'_, T> {
    MatMut {
        data: &mut buf[b * l * c + h * dk..],
        rows: l,
        cols: dk,
        rs: c,
        cs: 1,
    }
}

/// `Concat(head_1..head_h) W^O` with scaled dot-product attention per head.
/// The per-head projections `W_i^{Q,K,V}` are the `d_k`-wide column blocks
/// of the `[C, C]` matrices.
pub(crate) fn mhsa_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &MhsaWeights<'_, T>,
    heads: usize,
) -> Result<(Tensor<T>, MhsaCache<T>)> {
    let (bn, l, c) = check_mhsa(x, w, heads)?;
    let dk = c / heads;
    let rows = bn * l;
    let q = project(x.data(), w.wq.data(), rows, c);
    let k = project(x.data(), w.wk.data(), rows, c);
    let v = project(x.data(), w.wv.data(), rows, c);
    let scale = T::from_f64(1.0 / (dk as f64).sqrt());
    let mut attn = vec![T::ZERO; bn * heads * l * l];
    let mut concat = vec![T::ZERO; rows * c];
    for b in 0..bn {
        for h in 0..heads {
            let scores = &mut attn[(b * heads + h) * l * l..][..l * l];
            gemm(
                head(&q, b, h, l, c, dk),
                head(&k, b, h, l, c, dk).t(),
                MatMut::rm(scores, l, l),
                false,
            );
            for s in scores.iter_mut() {
                *s *= scale;
            }
            softmax_in_place(scores, l);
            gemm(
                MatRef::rm(scores, l, l),
                head(&v, b, h, l, c, dk),
                head_mut(&mut concat, b, h, l, c, dk),
                false,
            );
        }
    }
    let y = project(&concat, w.wo.data(), rows, c);
    Ok((
        Tensor::from_parts(x.shape().to_vec(), y),
        MhsaCache { q, k, v, attn, concat },
    ))
}

pub(crate) struct MhsaGrads<T> {
    pub dx: Option<Vec<T>>,
    pub dwq: Vec<T>,
    pub dwk: Vec<T>,
    pub dwv: Vec<T>,
    pub dwo: Vec<T>,
}

pub(crate) fn mhsa_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &MhsaWeights<'_, T>,
    heads: usize,
    cache: &MhsaCache<T>,
    dy: &[T],
    need_dx: bool,
) -> MhsaGrads<T> {
    let (bn, l, c) = blc("mhsa", x.shape()).expect("validated in forward");
    let dk = c / heads;
    let rows = bn * l;
    let scale = T::from_f64(1.0 / (dk as f64).sqrt());
    let dym = MatRef::rm(dy, rows, c);

    let mut dwo = vec![T::ZERO; c * c];
    gemm(MatRef::rm(&cache.concat, rows, c).t(), dym, MatMut::rm(&mut dwo, c, c), false);
    let mut dconcat = vec![T::ZERO; rows * c];
    gemm(dym, MatRef::rm(w.wo.data(), c, c).t(), MatMut::rm(&mut dconcat, rows, c), false);

    let mut dq = vec![T::ZERO; rows * c];
    let mut dk_buf = vec![T::ZERO; rows * c];
    let mut dv = vec![T::ZERO; rows * c];
    let mut dattn = vec![T::ZERO; l * l];
    for b in 0..bn {
        for h in 0..heads {
            let a = &cache.attn[(b * heads + h) * l * l..][..l * l];
            let doh = head(&dconcat, b, h, l, c, dk);
            // dV_h = Aᵀ dO_h
            gemm(MatRef::rm(a, l, l).t(), doh, head_mut(&mut dv, b, h, l, c, dk), false);
            // dA = dO_h V_hᵀ
            gemm(doh, head(&cache.v, b, h, l, c, dk).t(), MatMut::rm(&mut dattn, l, l), false);
            softmax_backward_in_place(a, &mut dattn, l);
            for s in dattn.iter_mut() {
                *s *= scale;
            }
            gemm(
                MatRef::rm(&dattn, l, l),
                head(&cache.k, b, h, l, c, dk),
                head_mut(&mut dq, b, h, l, c, dk),
                false,
            );
            gemm(
                MatRef::rm(&dattn, l, l).t(),
                head(&cache.q, b, h, l, c, dk),
                head_mut(&mut dk_buf, b, h, l, c, dk),
                false,
            );
        }
    }

    let xt = MatRef::rm(x.data(), rows, c).t();
    let weight_grad = |d: &[T]| {
        let mut out = vec![T::ZERO; c * c];
        gemm(xt, MatRef::rm(d, rows, c), MatMut::rm(&mut out, c, c), false);
        out
    };
    let dwq = weight_grad(&dq);
    let dwk = weight_grad(&dk_buf);
    let dwv = weight_grad(&dv);
    let dx = need_dx.then(|| {
        let mut dx = vec![T::ZERO; rows * c];
        for (d, wt) in [(&dq, w.wq), (&dk_buf, w.wk), (&dv, w.wv)] {
            gemm(
                MatRef::rm(d, rows, c),
                MatRef::rm(wt.data(), c, c).t(),
                MatMut::rm(&mut dx, rows, c),
                true,
            );
        }
        dx
    });
    MhsaGrads { dx, dwq, dwk, dwv, dwo }
}
