mod config;
mod plot;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use qsmpc::classifier::{layer_dims, train, ClassifierModel, DirectionCodec, Mlp, TrainConfig, AdamParams, DEFAULT_HIDDEN};
use qsmpc::emulator::{batch_run, collect_dataset, compute_metrics, RunConfig, SolverKind, TrajectoryLog};
use qsmpc::io;
use qsmpc::mpc::{check_stability_conditions, MpcProblem};

use config::ConfigFile;

#[derive(Parser)]
#[command(name = "qsmpc", version, about = "Emulate LTI systems with ternary-input receding-horizon control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the stability conditions for a configuration.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run closed-loop emulations and write one trajectory CSV per initial point.
    Emulate {
        #[arg(long)]
        config: PathBuf,
        /// sphere, suboptimal, exhaustive or classifier; defaults to the config's solver.
        #[arg(long)]
        solver: Option<String>,
        /// Trained model, required by the classifier solver.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Record measured solve times instead of zeros.
        #[arg(long)]
        timing: bool,
    },
    /// Run emulations and write the classifier dataset.
    Collect {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        solver: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a classifier on a collected dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Separate test dataset; otherwise 20% of the data is held out.
        #[arg(long)]
        test: Option<PathBuf>,
        /// Configuration whose plant defines the classes.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        /// Comma-separated hidden layer widths.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_HIDDEN)]
        hidden: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw trajectory files in the phase plane as SVG.
    Plot {
        #[arg(long, num_args = 1.., required = true)]
        traj: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// x_min,x_max,y_min,y_max
        #[arg(long, value_delimiter = ',', num_args = 4)]
        bounds: Option<Vec<f64>>,
    },
}

/// Failure that maps to a specific exit status.
#[derive(Debug)]
struct Exit(u8, String);

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.1)
    }
}

impl std::error::Error for Exit {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Exit(2, msg.into()).into()
}

fn load_config(path: &Path) -> Result<ConfigFile> {
    ConfigFile::load(path).map_err(|e| usage(format!("{e:#}")))
}

fn load_problem(cfg: &ConfigFile) -> Result<MpcProblem> {
    cfg.problem().map_err(|e| usage(format!("{e:#}")))
}

fn solver_from(name: &str, model: Option<&Path>) -> Result<SolverKind> {
    Ok(match name {
        "sphere" => SolverKind::SphereExact,
        "suboptimal" => SolverKind::Suboptimal,
        "exhaustive" => SolverKind::Exhaustive,
        "classifier" => {
            let path = model.ok_or_else(|| usage("the classifier solver needs --model"))?;
            let m = ClassifierModel::load(path).with_context(|| format!("cannot load model {}", path.display()))?;
            SolverKind::Classifier(Arc::new(m))
        }
        other => return Err(usage(format!("unknown solver {other:?} (sphere, suboptimal, exhaustive, classifier)"))),
    })
}

fn run_all(cfg: &ConfigFile, problem: MpcProblem, solver: SolverKind) -> Result<Vec<TrajectoryLog>> {
    let problem = Arc::new(problem);
    let runs: Vec<RunConfig> = cfg
        .initial_points()
        .map_err(|e| usage(format!("{e:#}")))?
        .into_iter()
        .map(|p| RunConfig {
            problem: Arc::clone(&problem),
            solver: solver.clone(),
            x_q0: p.x_q,
            x_ref0: p.x_ref,
            steps: cfg.run.steps,
            seed: cfg.seed,
        })
        .collect();
    for r in &runs {
        r.validate().map_err(|e| usage(format!("refusing to run: {e}")))?;
    }
    batch_run(&runs)
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.with_context(|| format!("run {i} failed")))
        .collect()
}

fn cmd_check(config: &Path) -> Result<ExitCode> {
    let cfg = load_config(config)?;
    let report = check_stability_conditions(&load_problem(&cfg)?)?;
    let yes_no = |b: bool| if b { "satisfied" } else { "violated" };
    println!(
        "exact discretization (A_q = e^(Hh)): {} (error {:.3e})",
        yes_no(report.exact_discretization),
        report.discretization_error
    );
    println!(
        "terminal decrease (Q - P + A_q' P A_q negative definite): {}",
        yes_no(report.terminal_decrease)
    );
    let eig: Vec<String> = report.witness.iter().map(|z| format!("{:.6}{:+.6}i", z.re, z.im)).collect();
    println!("eigenvalues of Q - P + A_q' P A_q: [{}]", eig.join(", "));
    Ok(if report.holds() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_emulate(config: &Path, solver: Option<&str>, model: Option<&Path>, out: &Path, timing: bool) -> Result<ExitCode> {
    let cfg = load_config(config)?;
    let problem = load_problem(&cfg)?;
    let name = solver.or(cfg.solver.as_deref()).unwrap_or("sphere");
    let solver = solver_from(name, model)?;
    let logs = run_all(&cfg, problem, solver)?;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    println!("{:>4} {:>12} {:>12} {:>11} {:>12} {:>10}", "run", "max_error", "final_error", "violations", "ball_radius", "solve_s");
    for (i, log) in logs.iter().enumerate() {
        let path = out.join(format!("run_{i:03}.csv"));
        let f = BufWriter::new(File::create(&path).with_context(|| format!("cannot write {}", path.display()))?);
        io::write_trajectory(log, f, timing)?;
        let m = compute_metrics(log);
        println!(
            "{i:>4} {:>12.6} {:>12.6} {:>11} {:>12.6} {:>10.3}",
            m.max_error,
            m.final_error,
            m.cost_monotone_violations,
            m.terminal_ball_radius,
            log.total_solve_time().as_secs_f64()
        );
        let failures = log.records.iter().filter(|r| r.solver_error.is_some()).count();
        if failures > 0 {
            eprintln!("run {i}: {failures} step(s) fell back to zero input after a solver error");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_collect(config: &Path, solver: Option<&str>, out: &Path) -> Result<ExitCode> {
    let cfg = load_config(config)?;
    let problem = load_problem(&cfg)?;
    let name = solver.or(cfg.solver.as_deref()).unwrap_or("sphere");
    if name == "classifier" {
        return Err(usage("datasets are collected from the sphere, suboptimal or exhaustive solver"));
    }
    let codec = DirectionCodec::build(problem.plant())?;
    let logs = run_all(&cfg, problem, solver_from(name, None)?)?;
    let data = collect_dataset(&logs, &codec)?;
    io::write_dataset(&data, BufWriter::new(File::create(out).with_context(|| format!("cannot write {}", out.display()))?))?;
    println!("{} rows, {} classes, {} features", data.len(), codec.len(), data.feature_dim());
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    data: &Path,
    test: Option<&Path>,
    config: &Path,
    epochs: usize,
    seed: u64,
    batch_size: usize,
    lr: f64,
    hidden: &[usize],
    out: &Path,
) -> Result<ExitCode> {
    let cfg = load_config(config)?;
    let problem = load_problem(&cfg)?;
    let codec = DirectionCodec::build(problem.plant())?;
    let read = |p: &Path| -> Result<_> {
        let f = File::open(p).with_context(|| format!("cannot read {}", p.display()))?;
        io::read_dataset(BufReader::new(f), codec.len()).with_context(|| format!("invalid dataset {}", p.display()))
    };
    let train_data = read(data)?;
    let test_data = test.map(read).transpose()?;
    if train_data.feature_dim() != 3 * codec.state_dim() {
        return Err(usage(format!(
            "dataset has {} features but the plant needs {}",
            train_data.feature_dim(),
            3 * codec.state_dim()
        )));
    }
    let mut mlp = Mlp::new(&layer_dims(codec.state_dim(), hidden, codec.len()), seed)?;
    let tc = TrainConfig {
        epochs,
        batch_size,
        adam: AdamParams { lr, ..Default::default() },
        seed,
        ..Default::default()
    };
    let report = train(&mut mlp, &train_data, test_data.as_ref(), &tc)?;
    ClassifierModel::new(mlp, codec)?.save(out)?;
    for (e, l) in report.epoch_losses.iter().enumerate() {
        println!("epoch {:>3}  loss {l:.6}", e + 1);
    }
    println!("train accuracy {:.4} ({} rows)", report.train_accuracy, report.train_rows);
    match report.test_accuracy {
        Some(a) => println!("test accuracy  {a:.4} ({} rows)", report.test_rows),
        None => println!("test accuracy  n/a"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_plot(traj: &[PathBuf], out: &Path, bounds: Option<&[f64]>) -> Result<ExitCode> {
    let tables = traj
        .iter()
        .map(|p| {
            let f = File::open(p).with_context(|| format!("cannot read {}", p.display()))?;
            io::read_trajectory(BufReader::new(f)).with_context(|| format!("invalid trajectory {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let bounds = bounds.map(|b| plot::Bounds { x_min: b[0], x_max: b[1], y_min: b[2], y_max: b[3] });
    let svg = plot::render(&tables, bounds)?;
    fs::write(out, svg).with_context(|| format!("cannot write {}", out.display()))?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check { config } => cmd_check(config),
        Command::Emulate { config, solver, model, out, timing } => {
            cmd_emulate(config, solver.as_deref(), model.as_deref(), out, *timing)
        }
        Command::Collect { config, solver, out } => cmd_collect(config, solver.as_deref(), out),
        Command::Train { data, test, config, epochs, seed, batch_size, lr, hidden, out } => {
            if hidden.is_empty() {
                Err(usage("--hidden needs at least one width"))
            } else {
                cmd_train(data, test.as_deref(), config, *epochs, *seed, *batch_size, *lr, hidden, out)
            }
        }
        Command::Plot { traj, out, bounds } => cmd_plot(traj, out, bounds.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Exit>() {
                Some(Exit(code, _)) => ExitCode::from(*code),
                None => ExitCode::from(1),
            }
        }
    }
}
