//! Forward and backward kernels. Each kernel is a pure function of its
//! inputs; the graph owns bookkeeping.

pub(crate) mod activation;
pub(crate) mod attention;
pub(crate) mod conv;
pub(crate) mod dense;
pub(crate) mod elementwise;

use crate::error::{Error, Result};

/// Interprets `[L, C]` as `[1, L, C]`; `[B, L, C]` as is.
pub(crate) fn blc(op: &'static str, shape: &[usize]) -> Result<(usize, usize, usize)> {
    match *shape {
        [l, c] => Ok((1, l, c)),
        [b, l, c] => Ok((b, l, c)),
        _ => Err(Error::InvalidGeometry {
            op,
            detail: format!("expected [L, C] or [B, L, C], got {shape:?}"),
        }),
    }
}

/// Output shape with the same rank convention as the input.
pub(crate) fn same_rank(input: &[usize], l: usize, c: usize) -> Vec<usize> {
    if input.len() == 2 {
        vec![l, c]
    } else {
        vec![input[0], l, c]
    }
}
