//! Central finite-difference checks of the tape, in 64-bit.

use crate::error::Result;
use crate::tensor::{no_grad, Tensor};

/// Result of comparing analytic and numerical gradients.
#[derive(Debug, Clone)]
pub struct GradReport {
    pub checked: usize,
    pub max_rel_err: f64,
    /// `(input, element)` of the worst entry.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
}

/// Magnitudes below this are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// Evaluates `f` on tracked copies of `inputs`, backpropagates, and compares
/// every gradient entry (or only those in `subset`) with
/// `(f(x + h) - f(x - h)) / 2h`.
pub fn check_gradients<F>(inputs: &[Tensor<f64>], f: F, h: f64, subset: Option<&[(usize, usize)]>) -> Result<GradReport>
where
    F: Fn(&[Tensor<f64>]) -> Result<Tensor<f64>>,
{
    let leaves: Vec<Tensor<f64>> = inputs.iter().map(|t| t.detach().requires_grad()).collect();
    let loss = f(&leaves)?;
    loss.backward()?;
    let grads: Vec<Vec<f64>> = leaves.iter().map(|t| t.grad().unwrap_or_else(|| vec![0.0; t.numel()])).collect();

    let all: Vec<(usize, usize)>;
    let entries = match subset {
        Some(s) => s,
        None => {
            all = inputs
                .iter()
                .enumerate()
                .flat_map(|(i, t)| (0..t.numel()).map(move |e| (i, e)))
                .collect();
            &all
        }
    };

    let eval_at = |which: usize, elem: usize, delta: f64| -> Result<f64> {
        let mut xs: Vec<Tensor<f64>> = inputs.iter().map(|t| t.detach()).collect();
        let mut d = xs[which].to_vec();
        d[elem] += delta;
        xs[which] = Tensor::from_vec(inputs[which].shape(), d)?;
        no_grad(|| f(&xs)).map(|t| t.item())
    };

    let mut report = GradReport {
        checked: 0,
        max_rel_err: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
    };
    for &(which, elem) in entries {
        let numeric = (eval_at(which, elem, h)? - eval_at(which, elem, -h)?) / (2.0 * h);
        let analytic = grads[which][elem];
        let err = rel_err(analytic, numeric);
        report.checked += 1;
        if err > report.max_rel_err || report.checked == 1 {
            report.max_rel_err = err;
            report.worst = (which, elem);
            report.analytic = analytic;
            report.numeric = numeric;
        }
    }
    Ok(report)
}

/// Scalarizes a tensor as `sum(weights * t)`.
pub fn project(t: &Tensor<f64>, weights: &[f64]) -> Result<Tensor<f64>> {
    Ok(t.mul_const(weights)?.sum())
}
