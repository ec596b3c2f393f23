//! Central finite-difference gradient checking.

use super::tape::{Tape, Var};
use super::value::Tensor;
use crate::error::Result;

/// Largest disagreement found by [`check_gradients`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// `(input index, element index)` of the worst entry.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self, rel_tol: f64) -> bool {
        self.max_rel_err <= rel_tol
    }
}

/// `|a - n| / max(|a|, |n|, floor)`
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares tape gradients of the scalar `f(inputs)` against central
/// differences with step `h`, for every element of every input.
pub fn check_gradients<F>(
    f: F,
    inputs: &[Tensor<f64>],
    h: f64,
    abs_floor: f64,
) -> Result<GradCheckReport>
where
    F: for<'t> Fn(&'t Tape<f64>, &[Var<'t, f64>]) -> Result<Var<'t, f64>>,
{
    let eval = |values: &[Tensor<f64>]| -> Result<f64> {
        let tape = Tape::new();
        let vars: Vec<_> = values.iter().map(|t| tape.leaf(t.clone())).collect();
        Ok(f(&tape, &vars)?.item())
    };

    let tape = Tape::new();
    let vars: Vec<_> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = f(&tape, &vars)?;
    let grads = tape.backward(loss)?;
    let analytic: Vec<Tensor<f64>> = vars.iter().map(|&v| grads.wrt(v)).collect();

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    let mut probe = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        for j in 0..input.numel() {
            let orig = input.data()[j];
            probe[i].data_mut()[j] = orig + h;
            let plus = eval(&probe)?;
            probe[i].data_mut()[j] = orig - h;
            let minus = eval(&probe)?;
            probe[i].data_mut()[j] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[i].data()[j];
            let err = relative_error(a, numeric, abs_floor);
            report.checked += 1;
            if err > report.max_rel_err || report.checked == 1 {
                report.max_rel_err = err;
                report.worst = (i, j);
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
