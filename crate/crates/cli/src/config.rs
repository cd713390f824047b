//! TOML run configuration.
//!
//! ```toml
//! horizon = 5
//! solver = "sphere"
//! seed = 0
//!
//! [system]
//! H = [[0.0, 1.0], [-1.0, -2.0]]
//! h = 0.2
//!
//! [plant]
//! B_q = [[1, 0, -1, 0], [0, 1, 0, -1]]
//! A_q_mode = "exp"            # "identity", or an explicit matrix
//!
//! [weights]
//! P = 50.0                    # scalar means scalar × identity
//! Q = 0.1
//! R = 0.05
//!
//! [run]
//! steps = 60
//! circle = { plant_radius = 1.0, reference_radius = 2.0, count = 8 }
//! # or: initial_points = [{ x_q = [1.0, 0.0], x_ref = [2.0, 0.0] }]
//! ```

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use qsmpc::benchmark::circle;
use qsmpc::mpc::MpcProblem;
use qsmpc::numerics::Mat;
use qsmpc::system::{LtiReference, QuantizedPlant};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub system: SystemSection,
    pub plant: PlantSection,
    pub weights: WeightsSection,
    pub horizon: usize,
    pub run: RunSection,
    #[serde(default)]
    pub solver: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(rename = "H")]
    pub state_matrix: Vec<Vec<f64>>,
    pub h: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    #[serde(rename = "B_q")]
    pub input_matrix: Vec<Vec<f64>>,
    #[serde(rename = "A_q_mode", default)]
    pub drift: DriftSpec,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum DriftSpec {
    Mode(String),
    Explicit(Vec<Vec<f64>>),
}

impl Default for DriftSpec {
    fn default() -> Self {
        DriftSpec::Mode("exp".into())
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    #[serde(rename = "P")]
    pub terminal: WeightSpec,
    #[serde(rename = "Q")]
    pub state: WeightSpec,
    #[serde(rename = "R")]
    pub input: WeightSpec,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub steps: usize,
    #[serde(default)]
    pub initial_points: Vec<InitialPoint>,
    #[serde(default)]
    pub circle: Option<CircleSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialPoint {
    pub x_q: Vec<f64>,
    pub x_ref: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleSpec {
    pub plant_radius: f64,
    pub reference_radius: f64,
    pub count: usize,
    #[serde(default)]
    pub offset: f64,
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Mat> {
    Mat::from_rows(rows).with_context(|| format!("field `{what}` is not a valid matrix"))
}

fn weight(spec: &WeightSpec, dim: usize, what: &str) -> Result<Mat> {
    match spec {
        WeightSpec::Scalar(s) => Ok(Mat::scaled_identity(dim, *s)),
        WeightSpec::Matrix(rows) => {
            let m = matrix(rows, what)?;
            if m.rows() != dim || m.cols() != dim {
                bail!("field `{what}` must be {dim}×{dim}, got {}×{}", m.rows(), m.cols());
            }
            Ok(m)
        }
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn problem(&self) -> Result<MpcProblem> {
        let reference = LtiReference::new(matrix(&self.system.state_matrix, "system.H")?, self.system.h)
            .context("invalid [system] section")?;
        let b_q = matrix(&self.plant.input_matrix, "plant.B_q")?;
        let plant = match &self.plant.drift {
            DriftSpec::Mode(m) if m == "exp" => QuantizedPlant::emulating(&reference, b_q),
            DriftSpec::Mode(m) if m == "identity" => QuantizedPlant::new(Mat::identity(reference.dim()), b_q, reference.h()),
            DriftSpec::Mode(other) => bail!("field `plant.A_q_mode`: unknown mode {other:?} (expected \"exp\", \"identity\" or a matrix)"),
            DriftSpec::Explicit(rows) => QuantizedPlant::new(matrix(rows, "plant.A_q_mode")?, b_q, reference.h()),
        }
        .context("invalid [plant] section")?;
        let (n, m) = (plant.n(), plant.m());
        let p = weight(&self.weights.terminal, n, "weights.P")?;
        let q = weight(&self.weights.state, n, "weights.Q")?;
        let r = weight(&self.weights.input, m, "weights.R")?;
        MpcProblem::new(plant, reference, p, q, r, self.horizon).context("invalid weights or horizon")
    }

    /// Explicit points followed by the circle points.
    pub fn initial_points(&self) -> Result<Vec<InitialPoint>> {
        let mut pts = self.run.initial_points.clone();
        if let Some(c) = &self.run.circle {
            pts.extend(
                circle(c.plant_radius, c.count, c.offset)
                    .into_iter()
                    .zip(circle(c.reference_radius, c.count, c.offset))
                    .map(|(x_q, x_ref)| InitialPoint { x_q, x_ref }),
            );
        }
        if pts.is_empty() {
            bail!("[run] needs `initial_points` or `circle`");
        }
        Ok(pts)
    }
}
