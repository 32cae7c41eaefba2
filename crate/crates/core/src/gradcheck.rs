//! Central-difference gradient verification.

use crate::autodiff::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Compares reverse-mode gradients of `f` at `inputs` against central
/// differences `(f(x+eps) − f(x−eps)) / (2·eps)`.
///
/// `f` builds a scalar from the graph leaves it is handed, one per input.
/// Returns the largest `|a − b| / max(1e-8, |a| + |b|)` over all input
/// components.
pub fn finite_diff_check<F>(f: F, inputs: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let all: Vec<(usize, usize)> = inputs
        .iter()
        .enumerate()
        .flat_map(|(ti, t)| (0..t.len()).map(move |ci| (ti, ci)))
        .collect();
    finite_diff_check_at(f, inputs, eps, &all)
}

/// [`finite_diff_check`] restricted to the listed `(input, component)`
/// pairs, for functions with too many inputs to probe exhaustively.
pub fn finite_diff_check_at<F>(f: F, inputs: &[Tensor], eps: f64, probes: &[(usize, usize)]) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let worst = finite_diff_compare(f, inputs, eps, probes)?
        .iter()
        .map(Comparison::relative_error)
        .fold(0.0, f64::max);
    Ok(worst)
}

/// One probed component: reverse-mode and central-difference derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Comparison {
    pub input: usize,
    pub component: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl Comparison {
    pub fn relative_error(&self) -> f64 {
        (self.analytic - self.numeric).abs() / (self.analytic.abs() + self.numeric.abs()).max(1e-8)
    }
}

/// Per-component comparison behind [`finite_diff_check_at`].
pub fn finite_diff_compare<F>(f: F, inputs: &[Tensor], eps: f64, probes: &[(usize, usize)]) -> Result<Vec<Comparison>>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = values.iter().map(|t| g.constant(t.clone())).collect();
        let out = f(&mut g, &vars)?;
        g.value(out)
            .item()
            .ok_or_else(|| Error::usage("gradient check needs a scalar function"))
    };

    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let out = f(&mut g, &vars)?;
    g.backward(out)?;
    let analytic: Vec<Tensor> = vars.iter().map(|&v| g.grad_or_zeros(v)).collect();

    let mut probe = inputs.to_vec();
    let mut out = Vec::with_capacity(probes.len());
    for &(ti, ci) in probes {
        let grad = analytic
            .get(ti)
            .filter(|g| ci < g.len())
            .ok_or_else(|| Error::usage(format!("probe ({ti}, {ci}) is out of range")))?;
        let orig = probe[ti].data()[ci];
        probe[ti].data_mut()[ci] = orig + eps;
        let up = eval(&probe)?;
        probe[ti].data_mut()[ci] = orig - eps;
        let down = eval(&probe)?;
        probe[ti].data_mut()[ci] = orig;
        out.push(Comparison {
            input: ti,
            component: ci,
            analytic: grad.data()[ci],
            numeric: (up - down) / (2.0 * eps),
        });
    }
    Ok(out)
}