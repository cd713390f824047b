//! Random problem generators shared by the integration tests.

#![allow(dead_code)]

use nalgebra::DMatrix;
use qsmpc::benchmark;
use qsmpc::mpc::MpcProblem;
use qsmpc::numerics::Mat;
use qsmpc::system::QuantizedPlant;
use rand::Rng;

pub fn to_na(m: &Mat) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn random_mat(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Mat {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    Mat::from_row_major(rows, cols, data).unwrap()
}

/// `G Gᵀ + floor·I` with uniform entries; always SPD.
pub fn random_spd(rng: &mut impl Rng, n: usize, floor: f64) -> Mat {
    let g = random_mat(rng, n, n, 1.0);
    g.matmul(&g.transpose()).unwrap().add(&Mat::scaled_identity(n, floor)).unwrap()
}

/// Random matrix rescaled to a spectral radius drawn from `[0.1, 0.95]`.
pub fn random_schur(rng: &mut impl Rng, n: usize) -> Mat {
    let a = random_mat(rng, n, n, 1.0);
    let rho = to_na(&a).complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let target = rng.gen_range(0.1..0.95);
    if rho == 0.0 {
        a
    } else {
        a.scale(target / rho)
    }
}

pub fn random_vec(rng: &mut impl Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Two-state problem with a random stable plant, random input matrix and
/// random SPD weights. The reference is the benchmark oscillator.
pub fn random_problem(rng: &mut impl Rng, m: usize, horizon: usize) -> MpcProblem {
    let n = 2;
    let plant = QuantizedPlant::new(random_schur(rng, n), random_mat(rng, n, m, 1.0), benchmark::SAMPLE_TIME).unwrap();
    MpcProblem::new(
        plant,
        benchmark::reference(),
        random_spd(rng, n, 0.1),
        random_spd(rng, n, 0.05),
        random_spd(rng, m, 0.05),
        horizon,
    )
    .unwrap()
}

/// Classifier trained on the exact controller's decisions.
pub struct Pipeline {
    pub problem: std::sync::Arc<MpcProblem>,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Share of training rows in the most common class.
    pub majority: f64,
    pub report: qsmpc::classifier::TrainReport,
    pub model: std::sync::Arc<qsmpc::classifier::ClassifierModel>,
    pub elapsed: std::time::Duration,
}

/// Training rows from 55 runs with the plant on the unit circle and the
/// reference on the radius-2 circle; test rows from 14 runs at angles
/// disjoint from the training ones. Horizon 5, 60 steps, default layer
/// sizes and training settings.
pub fn oscillator_pipeline() -> Pipeline {
    use qsmpc::classifier::{layer_dims, train, ClassifierModel, DirectionCodec, Mlp, TrainConfig, DEFAULT_HIDDEN};
    use qsmpc::emulator::{batch_run, collect_dataset, SolverKind};
    use std::sync::Arc;

    let started = std::time::Instant::now();
    let problem = Arc::new(benchmark::problem(5).unwrap());
    let codec = DirectionCodec::build(problem.plant()).unwrap();
    let collect = |count, offset| {
        let runs = benchmark::circle_runs(&problem, &SolverKind::SphereExact, 1.0, 2.0, count, offset, 60);
        let logs: Vec<_> = batch_run(&runs).into_iter().map(|r| r.unwrap()).collect();
        collect_dataset(&logs, &codec).unwrap()
    };
    let train_data = collect(55, 0.0);
    let test_data = collect(14, std::f64::consts::TAU / 28.0);

    let mut mlp = Mlp::new(&layer_dims(2, &DEFAULT_HIDDEN, codec.len()), 0).unwrap();
    let report = train(&mut mlp, &train_data, Some(&test_data), &TrainConfig::default()).unwrap();
    let elapsed = started.elapsed();
    let majority = *train_data.label_histogram().iter().max().unwrap() as f64 / train_data.len() as f64;
    Pipeline {
        train_rows: train_data.len(),
        test_rows: test_data.len(),
        majority,
        report,
        model: Arc::new(ClassifierModel::new(mlp, codec).unwrap()),
        elapsed,
        problem,
    }
}

/// Consecutive epoch pairs whose loss did not increase, and the pair count.
pub fn loss_decreases(losses: &[f64]) -> (usize, usize) {
    (losses.windows(2).filter(|w| w[1] <= w[0]).count(), losses.len().saturating_sub(1))
}
