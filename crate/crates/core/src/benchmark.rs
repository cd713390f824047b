//! The damped-oscillator benchmark: a two-state reference driven by four
//! ternary actuators pushing along ±e₁ and ±e₂.

use std::f64::consts::TAU;
use std::sync::Arc;

use crate::emulator::{RunConfig, SolverKind};
use crate::error::Result;
use crate::mpc::MpcProblem;
use crate::numerics::Mat;
use crate::system::{LtiReference, QuantizedPlant};

pub const SAMPLE_TIME: f64 = 0.2;
pub const TERMINAL_WEIGHT: f64 = 50.0;
pub const STATE_WEIGHT: f64 = 0.1;
pub const INPUT_WEIGHT: f64 = 0.05;

pub fn state_matrix() -> Mat {
    Mat::from_rows(&[[0.0, 1.0], [-1.0, -2.0]]).expect("static matrix")
}

pub fn input_matrix() -> Mat {
    Mat::from_rows(&[[1.0, 0.0, -1.0, 0.0], [0.0, 1.0, 0.0, -1.0]]).expect("static matrix")
}

pub fn reference() -> LtiReference {
    LtiReference::new(state_matrix(), SAMPLE_TIME).expect("valid reference")
}

fn weighted(plant: QuantizedPlant, horizon: usize) -> Result<MpcProblem> {
    MpcProblem::new(
        plant,
        reference(),
        Mat::scaled_identity(2, TERMINAL_WEIGHT),
        Mat::scaled_identity(2, STATE_WEIGHT),
        Mat::scaled_identity(4, INPUT_WEIGHT),
        horizon,
    )
}

/// Plant whose drift is the exact discretization of the reference.
pub fn problem(horizon: usize) -> Result<MpcProblem> {
    weighted(QuantizedPlant::emulating(&reference(), input_matrix())?, horizon)
}

/// Same weights with a drift-free plant (`A_q = I`).
pub fn drift_free_problem(horizon: usize) -> Result<MpcProblem> {
    weighted(QuantizedPlant::new(Mat::identity(2), input_matrix(), SAMPLE_TIME)?, horizon)
}

/// `count` points `(r cos α, r sin α)` at `α = offset + 2πj/count`.
pub fn circle(radius: f64, count: usize, offset: f64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|j| {
            let a = offset + TAU * j as f64 / count as f64;
            vec![radius * a.cos(), radius * a.sin()]
        })
        .collect()
}

/// One run per angle, plant on the `plant_radius` circle and reference on
/// the `reference_radius` circle at the same angle.
pub fn circle_runs(
    problem: &Arc<MpcProblem>,
    solver: &SolverKind,
    plant_radius: f64,
    reference_radius: f64,
    count: usize,
    offset: f64,
    steps: usize,
) -> Vec<RunConfig> {
    circle(plant_radius, count, offset)
        .into_iter()
        .zip(circle(reference_radius, count, offset))
        .map(|(x_q0, x_ref0)| RunConfig {
            problem: Arc::clone(problem),
            solver: solver.clone(),
            x_q0,
            x_ref0,
            steps,
            seed: 0,
        })
        .collect()
}
