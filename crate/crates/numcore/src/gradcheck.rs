//! Central finite-difference gradient verification.
//!
//! The checker perturbs every scalar parameter by `±step`, re-runs the
//! forward pass, and compares the difference quotient against the analytic
//! gradient from [`Tape::backward`]. The finite-difference side never touches
//! the reverse pass, so it serves as an independent reference.

use crate::error::Result;
use crate::params::ParamSet;
use crate::tape::{NodeId, Tape};

/// Worst relative error seen across all parameter components.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub components: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_err < tolerance
    }
}

/// Compare analytic gradients of the scalar loss built by `forward` against
/// central finite differences with the given step.
///
/// Tiny components are compared on an absolute scale: the error is divided by
/// `max(|analytic|, |numeric|, 1e-3)` so that sub-noise gradients cannot blow
/// up the ratio.
pub fn check<F>(params: &mut ParamSet, forward: F, step: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape) -> Result<NodeId>,
{
    let analytic = {
        let mut tape = Tape::new(params);
        let loss = forward(&mut tape)?;
        tape.backward(loss)?
    };
    // Surface the gradients on the tensors as well, for inspection paths.
    params.store_grads(&analytic)?;

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        components: 0,
    };
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let len = params.get(id).len();
        for k in 0..len {
            let original = params.get(id).values()[k];
            params.get_mut(id).values_mut()[k] = original + step;
            let up = eval(params, &forward)?;
            params.get_mut(id).values_mut()[k] = original - step;
            let down = eval(params, &forward)?;
            params.get_mut(id).values_mut()[k] = original;

            let numeric = (up - down) / (2.0 * step);
            let exact = analytic.get(id)[k];
            let denom = exact.abs().max(numeric.abs()).max(1e-3);
            let rel = (exact - numeric).abs() / denom;
            report.components += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_param = params.name(id).to_string();
                report.worst_index = k;
            }
        }
    }
    Ok(report)
}

fn eval<F>(params: &ParamSet, forward: &F) -> Result<f64>
where
    F: Fn(&mut Tape) -> Result<NodeId>,
{
    let mut tape = Tape::new(params);
    let loss = forward(&mut tape)?;
    Ok(tape.value(loss)[0])
}
