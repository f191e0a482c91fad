//! Central finite-difference validation of analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

use super::{Graph, Tensor, Var};

/// Default perturbation for central differences.
pub const EPSILON: f64 = 1e-5;

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// `(input, flat index)` of the worst coordinate.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Coordinates to perturb.
#[derive(Clone, Debug)]
pub enum Coords {
    All,
    /// A uniform random subset with the given fraction of each input
    /// (at least one coordinate per input).
    Sample { fraction: f64, seed: u64 },
    Explicit(Vec<(usize, usize)>),
}

/// Compares the graph's analytic gradients with central differences.
///
/// `build` receives one differentiable leaf per input. A non-scalar output
/// is reduced with fixed pseudo-random weights so that no direction of the
/// output Jacobian is skipped (a plain sum would miss softmax entirely).
pub fn grad_check<F>(inputs: &[Tensor<f64>], eps: f64, build: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    grad_check_coords(inputs, eps, &Coords::All, build)
}

pub fn grad_check_coords<F>(inputs: &[Tensor<f64>], eps: f64, coords: &Coords, build: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    // Scalar objective f = <r, y>. The numeric side differences `y` element
    // by element before contracting with `r`, so unperturbed outputs cancel
    // exactly instead of contributing summation round-off.
    let output = |values: &[Tensor<f64>], differentiable: bool| -> Result<(Graph<f64>, Vec<Var>, Var)> {
        let mut g = Graph::new();
        let vars: Vec<Var> = values
            .iter()
            .map(|t| if differentiable { g.variable(t.clone()) } else { g.constant(t.clone()) })
            .collect();
        let out = build(&mut g, &vars)?;
        Ok((g, vars, out))
    };

    let (mut g, vars, out) = output(inputs, true)?;
    let shape = g.value(out).shape().to_vec();
    let weights = if g.value(out).numel() == 1 {
        Tensor::ones(shape)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0x9e37_79b9);
        Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
    };
    let w = g.constant(weights.clone());
    let prod = g.mul(out, w)?;
    let objective = g.sum(prod);
    let grads = g.backward(objective)?;
    let analytic: Vec<Tensor<f64>> = vars.iter().map(|&v| grads.get_or_zero(v)).collect();
    let eval = |values: &[Tensor<f64>]| -> Result<Tensor<f64>> {
        let (g, _, out) = output(values, false)?;
        Ok(g.value(out).clone())
    };

    let targets: Vec<(usize, usize)> = match coords {
        Coords::All => inputs
            .iter()
            .enumerate()
            .flat_map(|(i, t)| (0..t.numel()).map(move |j| (i, j)))
            .collect(),
        Coords::Sample { fraction, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut out = Vec::new();
            for (i, t) in inputs.iter().enumerate() {
                let n = t.numel();
                let take = ((n as f64 * fraction).ceil() as usize).clamp(1, n);
                let mut idx: Vec<usize> = (0..n).collect();
                for s in 0..take {
                    let j = rng.random_range(s..n);
                    idx.swap(s, j);
                }
                out.extend(idx[..take].iter().map(|&j| (i, j)));
            }
            out
        }
        Coords::Explicit(list) => list.clone(),
    };

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    let mut work = inputs.to_vec();
    for (i, j) in targets {
        let orig = work[i].data()[j];
        work[i].data_mut()[j] = orig + eps;
        let plus = eval(&work)?;
        work[i].data_mut()[j] = orig - eps;
        let minus = eval(&work)?;
        work[i].data_mut()[j] = orig;
        let numeric = plus
            .data()
            .iter()
            .zip(minus.data())
            .zip(weights.data())
            .map(|((p, m), r)| r * (p - m))
            .sum::<f64>()
            / (2.0 * eps);
        let a = analytic[i].data()[j];
        let err = relative_error(a, numeric);
        report.checked += 1;
        if err > report.max_rel_err || report.checked == 1 {
            report.max_rel_err = err;
            report.worst = (i, j);
            report.analytic = a;
            report.numeric = numeric;
        }
    }
    Ok(report)
}
