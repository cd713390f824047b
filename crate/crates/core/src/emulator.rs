//! Closed-loop receding-horizon driver.
//!
//! Each step builds the least-squares instance at the current plant state
//! and reference head, picks a stacked input sequence with the configured
//! solver, applies its first block, and advances both systems by one
//! sample. The reference head moves along the exact discrete flow.

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::classifier::{feature_vector, ClassifierModel, Dataset, DatasetRow, DirectionCodec};
use crate::error::{Error, Result};
use crate::mpc::{reference_horizon, stage_cost_ternary, ExtensiveForm, MpcProblem};
use crate::numerics::{norm2, sub_vec};
use crate::solvers::{
    babai_round, exhaustive_solve, initial_radius, shift_sequence, sphere_decode, suboptimal_step, EXHAUSTIVE_GUARD,
};
use crate::system::TernaryInput;

/// Cost increases above this count as monotonicity violations.
pub const MONOTONE_TOL: f64 = 1e-9;

/// Fraction of the trajectory tail used for the terminal-ball radius.
pub const TAIL_FRACTION: f64 = 0.2;

/// Environment variable capping the number of concurrent runs in [`batch_run`].
pub const THREADS_ENV: &str = "QSMPC_THREADS";

#[derive(Clone)]
pub enum SolverKind {
    SphereExact,
    Suboptimal,
    Exhaustive,
    Classifier(Arc<ClassifierModel>),
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::SphereExact => "sphere",
            SolverKind::Suboptimal => "suboptimal",
            SolverKind::Exhaustive => "exhaustive",
            SolverKind::Classifier(_) => "classifier",
        }
    }
}

impl fmt::Debug for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub problem: Arc<MpcProblem>,
    pub solver: SolverKind,
    pub x_q0: Vec<f64>,
    pub x_ref0: Vec<f64>,
    pub steps: usize,
    /// Carried into the log; none of the built-in solvers draw random numbers.
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.problem.plant().n();
        for (what, v) in [("x_q0", &self.x_q0), ("x_ref0", &self.x_ref0)] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    context: if what == "x_q0" { "RunConfig x_q0" } else { "RunConfig x_ref0" },
                    expected: n,
                    actual: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("RunConfig initial state"));
            }
        }
        if self.steps == 0 {
            return Err(Error::InvalidArgument("steps must be at least 1".into()));
        }
        match &self.solver {
            SolverKind::Exhaustive => {
                let d = self.problem.stacked_len() as u32;
                if 3usize.checked_pow(d).is_none_or(|t| t > EXHAUSTIVE_GUARD) {
                    return Err(Error::GuardExceeded(format!(
                        "exhaustive solver needs 3^{d} evaluations per step (limit {EXHAUSTIVE_GUARD}); \
                         shorten the horizon or use the sphere solver"
                    )));
                }
            }
            SolverKind::Classifier(model) => model.check_compatible(self.problem.plant())?,
            _ => {}
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    pub x_q: Vec<f64>,
    pub x_ref: Vec<f64>,
    pub u: TernaryInput,
    /// Horizon cost of the selected sequence.
    pub cost: f64,
    pub selected: Vec<i8>,
    /// Shifted previous selection offered to the solver, if any.
    pub warm_start: Option<Vec<i8>>,
    pub shifted_cost: Option<f64>,
    pub rounded_cost: Option<f64>,
    pub nodes_visited: Option<u64>,
    pub solver_error: Option<String>,
    pub solve_time: Duration,
}

#[derive(Clone, Debug)]
pub struct TrajectoryLog {
    pub solver: String,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub records: Vec<StepRecord>,
    /// States after the last applied input, `x_q(K)` and `x_ref(K)`.
    pub final_x_q: Vec<f64>,
    pub final_x_ref: Vec<f64>,
}

impl TrajectoryLog {
    pub fn total_solve_time(&self) -> Duration {
        self.records.iter().map(|r| r.solve_time).sum()
    }

    /// Plant states `x_q(0..=K)`.
    pub fn plant_states(&self) -> impl Iterator<Item = &[f64]> {
        self.records.iter().map(|r| r.x_q.as_slice()).chain(std::iter::once(self.final_x_q.as_slice()))
    }

    /// Reference states `x_ref(0..=K)`.
    pub fn reference_states(&self) -> impl Iterator<Item = &[f64]> {
        self.records.iter().map(|r| r.x_ref.as_slice()).chain(std::iter::once(self.final_x_ref.as_slice()))
    }

    pub fn costs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.cost).collect()
    }

    /// Equality on everything but wall-clock timings.
    pub fn same_trajectory(&self, other: &TrajectoryLog) -> bool {
        self.solver == other.solver
            && self.seed == other.seed
            && self.final_x_q == other.final_x_q
            && self.final_x_ref == other.final_x_ref
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                let mut b = b.clone();
                b.solve_time = a.solve_time;
                *a == b
            })
    }
}

struct Selection {
    sequence: Vec<i8>,
    cost: f64,
    shifted_cost: Option<f64>,
    rounded_cost: Option<f64>,
    nodes_visited: Option<u64>,
}

pub fn run_emulation(cfg: &RunConfig) -> Result<TrajectoryLog> {
    cfg.validate()?;
    let prob = cfg.problem.as_ref();
    let plant = prob.plant();
    let reference = prob.reference();
    let (n, m, horizon) = (plant.n(), plant.m(), prob.horizon());
    let ext = ExtensiveForm::build(prob)?;

    let mut x = cfg.x_q0.clone();
    let mut xr = cfg.x_ref0.clone();
    let mut prev: Option<Vec<i8>> = None;
    let mut records = Vec::with_capacity(cfg.steps);

    for k in 0..cfg.steps {
        let r_k = reference_horizon(reference, &xr, horizon)?;
        let ils = ext.ils_transform(&x, &r_k)?;
        let warm_start = prev.as_deref().map(|p| shift_sequence(p, m));

        let started = Instant::now();
        let outcome: Result<Selection> = match &cfg.solver {
            SolverKind::SphereExact => {
                let babai = babai_round(&ils.u_uncon);
                let radius = initial_radius(&ils, &babai, warm_start.as_deref());
                sphere_decode(&ils, radius).map(|res| Selection {
                    cost: res.cost + ils.constant,
                    sequence: res.u,
                    shifted_cost: None,
                    rounded_cost: None,
                    nodes_visited: Some(res.nodes_visited),
                })
            }
            SolverKind::Exhaustive => exhaustive_solve(&ils).map(|(u, c)| Selection {
                sequence: u,
                cost: c + ils.constant,
                shifted_cost: None,
                rounded_cost: None,
                nodes_visited: Some(3u64.pow(ils.dim() as u32)),
            }),
            SolverKind::Suboptimal => suboptimal_step(prob, &ils, &x, &xr, prev.as_deref()).map(|c| Selection {
                sequence: c.selected,
                cost: c.selected_cost,
                shifted_cost: c.shifted_cost,
                rounded_cost: Some(c.rounded_cost),
                nodes_visited: None,
            }),
            SolverKind::Classifier(model) => model.predict_input(&feature_vector(&x, &xr)).and_then(|u| {
                let mut sequence = u.entries().to_vec();
                sequence.resize(horizon * m, 0);
                let cost = stage_cost_ternary(prob, &x, &xr, &sequence)?;
                Ok(Selection {
                    sequence,
                    cost,
                    shifted_cost: None,
                    rounded_cost: None,
                    nodes_visited: None,
                })
            }),
        };
        let solve_time = started.elapsed();

        let (selection, solver_error) = match outcome {
            Ok(s) => (s, None),
            // Hold the input at zero for this step and keep the run going.
            Err(e) => {
                let sequence = vec![0; horizon * m];
                let cost = stage_cost_ternary(prob, &x, &xr, &sequence)?;
                (
                    Selection {
                        sequence,
                        cost,
                        shifted_cost: None,
                        rounded_cost: None,
                        nodes_visited: None,
                    },
                    Some(e.to_string()),
                )
            }
        };

        let u = TernaryInput::new(selection.sequence[..m].to_vec())?;
        let next_x = plant.step(&x, &u)?;
        let next_xr = reference.step(&xr)?;
        if next_x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("plant state"));
        }
        records.push(StepRecord {
            k,
            x_q: std::mem::replace(&mut x, next_x),
            x_ref: std::mem::replace(&mut xr, next_xr),
            u,
            cost: selection.cost,
            selected: selection.sequence.clone(),
            warm_start,
            shifted_cost: selection.shifted_cost,
            rounded_cost: selection.rounded_cost,
            nodes_visited: selection.nodes_visited,
            solver_error,
            solve_time,
        });
        prev = Some(selection.sequence);
    }

    Ok(TrajectoryLog {
        solver: cfg.solver.name().to_string(),
        seed: cfg.seed,
        n,
        m,
        records,
        final_x_q: x,
        final_x_ref: xr,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub max_error: f64,
    pub final_error: f64,
    pub cost_monotone_violations: usize,
    pub terminal_ball_radius: f64,
}

pub fn compute_metrics(log: &TrajectoryLog) -> Metrics {
    let errors: Vec<f64> = log
        .plant_states()
        .zip(log.reference_states())
        .map(|(a, b)| norm2(&sub_vec(a, b)))
        .collect();
    let max_error = errors.iter().copied().fold(0.0, f64::max);
    let final_error = *errors.last().expect("log holds at least the final state");
    let costs = log.costs();
    let cost_monotone_violations = costs.windows(2).filter(|w| w[1] > w[0] + MONOTONE_TOL).count();

    let states: Vec<&[f64]> = log.plant_states().collect();
    let tail = ((states.len() as f64 * TAIL_FRACTION).ceil() as usize).clamp(1, states.len());
    let terminal_ball_radius = states[states.len() - tail..].iter().map(|s| norm2(s)).fold(0.0, f64::max);
    Metrics {
        max_error,
        final_error,
        cost_monotone_violations,
        terminal_ball_radius,
    }
}

/// One dataset row per logged step: features from the plant and reference
/// states, label from the applied direction `B_q u`.
pub fn collect_dataset(logs: &[TrajectoryLog], codec: &DirectionCodec) -> Result<Dataset> {
    let mut rows = Vec::new();
    for log in logs {
        if log.n != codec.state_dim() || log.m != codec.input_dim() {
            return Err(Error::InvalidArgument(format!(
                "codec built for n={}, m={} cannot label a log with n={}, m={}",
                codec.state_dim(),
                codec.input_dim(),
                log.n,
                log.m
            )));
        }
        for r in &log.records {
            rows.push(DatasetRow {
                features: feature_vector(&r.x_q, &r.x_ref),
                label: codec.class_of_input(&r.u)?,
            });
        }
    }
    Dataset::new(rows, codec.len())
}

fn thread_cap() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every configuration; results keep the input order.
///
/// Up to `QSMPC_THREADS` runs (default: available parallelism) execute at
/// once. Runs share no mutable state.
pub fn batch_run(cfgs: &[RunConfig]) -> Vec<Result<TrajectoryLog>> {
    batch_run_with_threads(cfgs, thread_cap())
}

pub fn batch_run_with_threads(cfgs: &[RunConfig], threads: usize) -> Vec<Result<TrajectoryLog>> {
    let threads = threads.max(1).min(cfgs.len().max(1));
    if threads == 1 {
        return cfgs.iter().map(run_emulation).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<TrajectoryLog>>> = (0..cfgs.len()).map(|_| None).collect();
    let finished = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= cfgs.len() {
                    break;
                }
                let res = run_emulation(&cfgs[i]);
                finished.lock().expect("no panics while holding the lock")[i] = Some(res);
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every index is claimed once")).collect()
}
