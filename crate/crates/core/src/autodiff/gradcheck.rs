//! Central-difference verification of analytic gradients.

use super::graph::{Graph, Var};
use crate::error::Result;
use crate::tensor::Tensor;

/// Perturbation used for central differences.
pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Denominator floor of the relative error. Central differences at the
/// default step carry roundoff near `1e-16 * |f| / h`, about `1e-11` for
/// unit-scale losses, so derivatives below this floor are judged on an
/// absolute scale instead.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// (input index, element index) of the worst element.
    pub worst: Option<(usize, usize)>,
    /// (analytic, numeric) derivative at the worst element.
    pub worst_values: Option<(f64, f64)>,
    pub checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    pub tolerance: f64,
    pub step: f64,
    /// Check at most this many evenly spaced elements per input.
    pub max_elements_per_input: Option<usize>,
}

impl GradCheckOptions {
    pub fn new(tolerance: f64) -> Self {
        GradCheckOptions {
            tolerance,
            step: GRAD_CHECK_STEP,
            max_elements_per_input: None,
        }
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Compares reverse-mode gradients of the scalar function `f` against
/// central differences at `inputs`, in 64-bit arithmetic.
pub fn grad_check<F>(f: F, inputs: &[Tensor<f64>], tolerance: f64) -> Result<GradCheckReport>
where
    F: for<'g> Fn(&'g Graph<f64>, &[Var<'g, f64>]) -> Result<Var<'g, f64>>,
{
    grad_check_with(f, inputs, GradCheckOptions::new(tolerance))
}

pub fn grad_check_with<F>(
    f: F,
    inputs: &[Tensor<f64>],
    options: GradCheckOptions,
) -> Result<GradCheckReport>
where
    F: for<'g> Fn(&'g Graph<f64>, &[Var<'g, f64>]) -> Result<Var<'g, f64>>,
{
    let analytic: Vec<Tensor<f64>> = {
        let graph = Graph::new();
        let leaves: Vec<_> = inputs.iter().map(|t| graph.leaf(t.clone())).collect();
        let loss = f(&graph, &leaves)?;
        let grads = graph.backward(loss)?;
        leaves.iter().map(|&l| grads.get_or_zeros(l)).collect()
    };

    let eval = |point: &[Tensor<f64>]| -> Result<f64> {
        let graph = Graph::new();
        let vars: Vec<_> = point.iter().map(|t| graph.constant(t.clone())).collect();
        let loss = f(&graph, &vars)?;
        Ok(loss.value().data()[0])
    };

    let h = options.step;
    let mut point = inputs.to_vec();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        worst_values: None,
        checked: 0,
        tolerance: options.tolerance,
        passed: false,
    };
    for (i, input) in inputs.iter().enumerate() {
        let n = input.len();
        let stride = match options.max_elements_per_input {
            Some(cap) if cap > 0 && n > cap => n.div_ceil(cap),
            _ => 1,
        };
        for j in (0..n).step_by(stride) {
            let original = input.data()[j];
            point[i].data_mut()[j] = original + h;
            let plus = eval(&point)?;
            point[i].data_mut()[j] = original - h;
            let minus = eval(&point)?;
            point[i].data_mut()[j] = original;

            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(analytic[i].data()[j], numeric);
            report.checked += 1;
            if report.worst.is_none() || err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = Some((i, j));
                report.worst_values = Some((analytic[i].data()[j], numeric));
            }
        }
    }
    report.passed = report.max_relative_error < options.tolerance;
    Ok(report)
}
