//! Central finite-difference verification of analytic gradients.
//!
//! The checker only ever runs the forward pass of the function under test
//! on perturbed copies of its inputs; it never looks at the backward code
//! except to read the gradients it is validating.

use crate::tensor::{Graph, Tensor, TensorError, Var};

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;

/// Denominator floor for the relative error, so exact-zero gradients
/// compare on an absolute scale.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Largest `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_relative_error: f64,
    /// (input, element) location of the largest error.
    pub worst: (usize, usize),
    pub analytic: f64,
    pub numeric: f64,
    /// Distance of the nearest ReLU / smooth-L1 kink at the base point.
    pub nearest_kink: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_relative_error < tolerance
    }

    /// True when a perturbation of `step` could cross a non-smooth point.
    pub fn straddles_kink(&self, step: f64) -> bool {
        self.nearest_kink < 100.0 * step
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

fn evaluate<F>(f: &F, inputs: &[Tensor]) -> Result<f64, TensorError>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var, TensorError>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t)).collect();
    let out = f(&mut g, &vars)?;
    if g.value(out).len() != 1 {
        return Err(TensorError::NonScalarLoss(g.shape(out).to_vec()));
    }
    Ok(g.scalar(out))
}

/// Compares the backward pass of `f` against central differences with
/// the given `step`, over every element of every tracked input.
pub fn check_gradients<F>(f: F, inputs: &[Tensor], step: f64) -> Result<GradCheckReport, TensorError>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var, TensorError>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t)).collect();
    let out = f(&mut g, &vars)?;
    let grads = g.backward(out)?;
    let nearest_kink = g.nearest_kink();

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: (0, 0),
        analytic: 0.0,
        numeric: 0.0,
        nearest_kink,
        checked: 0,
    };
    let mut probe: Vec<Tensor> = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        if !input.is_tracked() {
            continue;
        }
        let zeros = vec![0.0; input.len()];
        let analytic = grads.get(vars[i]).unwrap_or(&zeros).to_vec();
        for j in 0..input.len() {
            let base = input.values()[j];
            probe[i].values_mut()[j] = base + step;
            let plus = evaluate(&f, &probe)?;
            probe[i].values_mut()[j] = base - step;
            let minus = evaluate(&f, &probe)?;
            probe[i].values_mut()[j] = base;

            let numeric = (plus - minus) / (2.0 * step);
            let err = relative_error(analytic[j], numeric);
            report.checked += 1;
            if err > report.max_relative_error || report.checked == 1 {
                report.max_relative_error = err;
                report.worst = (i, j);
                report.analytic = analytic[j];
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
