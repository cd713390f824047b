//! One step of the relaxed-and-rounded controller.
//!
//! The rounded relaxed optimum competes against the previous selection
//! shifted by one block (zero tail). The shifted sequence wins ties since it
//! carries the cost-decrease argument from the previous step.

use super::{babai_round, relaxed_qp_solve, shift_sequence, DEFAULT_QP_MAX_ITER, DEFAULT_QP_TOL};
use crate::error::{Error, Result};
use crate::mpc::{stage_cost_ternary, IlsInstance, MpcProblem};
use crate::system::TernaryInput;

#[derive(Clone, Debug)]
pub struct SuboptimalChoice {
    pub selected: Vec<i8>,
    pub applied: TernaryInput,
    pub selected_cost: f64,
    pub rounded: Vec<i8>,
    pub rounded_cost: f64,
    pub shifted: Option<Vec<i8>>,
    pub shifted_cost: Option<f64>,
}

pub fn suboptimal_step(
    prob: &MpcProblem,
    ils: &IlsInstance,
    x: &[f64],
    xref: &[f64],
    prev_selected: Option<&[i8]>,
) -> Result<SuboptimalChoice> {
    let m = prob.plant().m();
    if ils.dim() != prob.stacked_len() {
        return Err(Error::DimensionMismatch {
            context: "suboptimal_step instance",
            expected: prob.stacked_len(),
            actual: ils.dim(),
        });
    }
    let relaxed = relaxed_qp_solve(ils, DEFAULT_QP_TOL, DEFAULT_QP_MAX_ITER);
    let rounded = babai_round(&relaxed.u);
    let rounded_cost = stage_cost_ternary(prob, x, xref, &rounded)?;

    let shifted = prev_selected.map(|p| shift_sequence(p, m));
    let shifted_cost = match &shifted {
        Some(s) => Some(stage_cost_ternary(prob, x, xref, s)?),
        None => None,
    };

    let (selected, selected_cost) = match (&shifted, shifted_cost) {
        (Some(s), Some(c)) if c <= rounded_cost => (s.clone(), c),
        _ => (rounded.clone(), rounded_cost),
    };
    let applied = TernaryInput::new(selected[..m].to_vec())?;
    Ok(SuboptimalChoice {
        selected,
        applied,
        selected_cost,
        rounded,
        rounded_cost,
        shifted,
        shifted_cost,
    })
}
