//! Continuous LTI reference and the discrete plant with ternary inputs.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{eigenvalues, mat_exp_default, Mat};

/// Largest input count accepted by [`enumerate_alphabet`] (3^12 = 531441).
pub const ALPHABET_GUARD: usize = 12;

/// Exact discretization `e^{H h}`.
pub fn discretize(h_mat: &Mat, h: f64) -> Result<Mat> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("sampling interval must be positive, got {h}")));
    }
    mat_exp_default(&h_mat.scale(h))
}

/// The continuous closed-loop system `ẋ = H x`, sampled every `h` seconds.
#[derive(Clone, Debug)]
pub struct LtiReference {
    state_matrix: Mat,
    h: f64,
    transition: Mat,
}

impl LtiReference {
    pub fn new(state_matrix: Mat, h: f64) -> Result<Self> {
        if !state_matrix.is_square() {
            return Err(Error::NotSquare("LtiReference", state_matrix.rows(), state_matrix.cols()));
        }
        let transition = discretize(&state_matrix, h)?;
        Ok(Self {
            state_matrix,
            h,
            transition,
        })
    }

    pub fn state_matrix(&self) -> &Mat {
        &self.state_matrix
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Cached `e^{H h}`.
    pub fn transition(&self) -> &Mat {
        &self.transition
    }

    pub fn dim(&self) -> usize {
        self.state_matrix.rows()
    }

    /// All eigenvalues of `H` in the open left half-plane.
    pub fn is_hurwitz(&self) -> Result<bool> {
        Ok(eigenvalues(&self.state_matrix)?.iter().all(|l| l.re < 0.0))
    }

    pub fn step(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "lti_step",
                expected: self.dim(),
                actual: x.len(),
            });
        }
        self.transition.matvec(x)
    }
}

/// A single ternary input vector in {−1, 0, +1}^m.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct TernaryInput(Vec<i8>);

impl TernaryInput {
    pub fn new(entries: Vec<i8>) -> Result<Self> {
        if let Some(bad) = entries.iter().find(|v| !(-1..=1).contains(*v)) {
            return Err(Error::InvalidArgument(format!("ternary input entry {bad} not in {{-1, 0, 1}}")));
        }
        Ok(Self(entries))
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0; m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[i8] {
        &self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn l1_norm(&self) -> u32 {
        self.0.iter().map(|v| v.unsigned_abs() as u32).sum()
    }
}

impl TryFrom<Vec<i8>> for TernaryInput {
    type Error = Error;

    fn try_from(v: Vec<i8>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TernaryInput> for Vec<i8> {
    fn from(u: TernaryInput) -> Self {
        u.0
    }
}

impl fmt::Debug for TernaryInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// `x_q(k+1) = A_q x_q(k) + h B_q u(k)`.
#[derive(Clone, Debug)]
pub struct QuantizedPlant {
    a_q: Mat,
    b_q: Mat,
    h: f64,
}

impl QuantizedPlant {
    pub fn new(a_q: Mat, b_q: Mat, h: f64) -> Result<Self> {
        if !a_q.is_square() {
            return Err(Error::NotSquare("QuantizedPlant A_q", a_q.rows(), a_q.cols()));
        }
        if b_q.rows() != a_q.rows() {
            return Err(Error::DimensionMismatch {
                context: "QuantizedPlant B_q rows",
                expected: a_q.rows(),
                actual: b_q.rows(),
            });
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidArgument(format!("sampling interval must be positive, got {h}")));
        }
        Ok(Self { a_q, b_q, h })
    }

    /// Plant whose drift is the exact discretization of `reference`.
    pub fn emulating(reference: &LtiReference, b_q: Mat) -> Result<Self> {
        Self::new(reference.transition().clone(), b_q, reference.h())
    }

    pub fn a_q(&self) -> &Mat {
        &self.a_q
    }

    pub fn b_q(&self) -> &Mat {
        &self.b_q
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// State dimension n.
    pub fn n(&self) -> usize {
        self.a_q.rows()
    }

    /// Input count m.
    pub fn m(&self) -> usize {
        self.b_q.cols()
    }

    /// `B_q u` (without the `h` factor).
    pub fn direction(&self, u: &TernaryInput) -> Result<Vec<f64>> {
        self.b_q.matvec(&u.to_f64())
    }

    pub fn step(&self, x_q: &[f64], u: &TernaryInput) -> Result<Vec<f64>> {
        self.step_real(x_q, &u.to_f64())
    }

    /// Same recurrence with a real-valued input, used by relaxed evaluations.
    pub fn step_real(&self, x_q: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.m() {
            return Err(Error::DimensionMismatch {
                context: "plant_step input",
                expected: self.m(),
                actual: u.len(),
            });
        }
        if x_q.len() != self.n() {
            return Err(Error::DimensionMismatch {
                context: "plant_step state",
                expected: self.n(),
                actual: x_q.len(),
            });
        }
        let drift = self.a_q.matvec(x_q)?;
        let push = self.b_q.matvec(u)?;
        Ok(drift.iter().zip(&push).map(|(a, b)| a + self.h * b).collect())
    }
}

/// All 3^m ternary inputs in lexicographic order over (−1, 0, +1).
pub fn enumerate_alphabet(m: usize) -> Result<Vec<TernaryInput>> {
    if m > ALPHABET_GUARD {
        return Err(Error::GuardExceeded(format!(
            "alphabet enumeration limited to m <= {ALPHABET_GUARD}, got {m}"
        )));
    }
    let total = 3usize.pow(m as u32);
    Ok((0..total).map(|idx| TernaryInput(ternary_digits(idx, m))).collect())
}

/// Base-3 digits of `idx` (most significant first) mapped 0,1,2 → −1,0,+1.
pub(crate) fn ternary_digits(mut idx: usize, len: usize) -> Vec<i8> {
    let mut out = vec![0i8; len];
    for slot in out.iter_mut().rev() {
        *slot = (idx % 3) as i8 - 1;
        idx /= 3;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn oscillator_h() -> Mat {
        Mat::from_rows(&[[0.0, 1.0], [-1.0, -2.0]]).unwrap()
    }

    fn oscillator_bq() -> Mat {
        Mat::from_rows(&[[1.0, 0.0, -1.0, 0.0], [0.0, 1.0, 0.0, -1.0]]).unwrap()
    }

    #[test]
    fn discretize_cases() {
        assert_eq!(discretize(&Mat::zeros(2, 2), 0.7).unwrap(), Mat::identity(2));
        let d = discretize(&Mat::diag(&[-1.0, -2.0]), 1.0).unwrap();
        assert!((d[(0, 0)] - (-1.0f64).exp()).abs() < 1e-15);
        assert!((d[(1, 1)] - (-2.0f64).exp()).abs() < 1e-15);
        let a = discretize(&oscillator_h(), 0.2).unwrap();
        let oracle = Mat::identity(2)
            .add(&oscillator_h().add(&Mat::identity(2)).unwrap().scale(0.2))
            .unwrap()
            .scale((-0.2f64).exp());
        assert!(a.max_abs_diff(&oracle) < 1e-14);
        assert!(discretize(&oscillator_h(), 0.0).is_err());
    }

    #[test]
    fn lti_step_cases() {
        let r = LtiReference::new(oscillator_h(), 0.2).unwrap();
        assert!(r.is_hurwitz().unwrap());
        assert_eq!(r.step(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let col = r.step(&[1.0, 0.0]).unwrap();
        assert_eq!(col, vec![r.transition()[(0, 0)], r.transition()[(1, 0)]]);
        let x = [0.3, -1.2];
        let two = r.step(&r.step(&x).unwrap()).unwrap();
        let oracle = mat_exp_default(&oscillator_h().scale(0.4)).unwrap().matvec(&x).unwrap();
        assert!(two.iter().zip(&oracle).all(|(a, b)| (a - b).abs() < 1e-8));
        assert!(r.step(&[1.0]).is_err());
    }

    #[test]
    fn plant_step_cases() {
        let plant = QuantizedPlant::new(Mat::identity(2), oscillator_bq(), 0.2).unwrap();
        let x = [0.4, -0.1];
        assert_eq!(plant.step(&x, &TernaryInput::zeros(4)).unwrap(), x.to_vec());

        let r = LtiReference::new(oscillator_h(), 0.2).unwrap();
        let plant = QuantizedPlant::emulating(&r, oscillator_bq()).unwrap();
        let u = TernaryInput::new(vec![1, 0, 0, 0]).unwrap();
        assert_eq!(plant.step(&[0.0, 0.0], &u).unwrap(), vec![0.2, 0.0]);

        let u = TernaryInput::new(vec![1, -1, 0, 1]).unwrap();
        let neg = TernaryInput::new(vec![-1, 1, 0, -1]).unwrap();
        let a = plant.step(&[0.0, 0.0], &u).unwrap();
        let b = plant.step(&[0.0, 0.0], &neg).unwrap();
        assert_eq!(a, b.iter().map(|v| -v).collect::<Vec<_>>());
        assert!(plant.step(&[0.0], &u).is_err());
    }

    #[test]
    fn ternary_input_rejects_out_of_alphabet() {
        assert!(TernaryInput::new(vec![0, 2]).is_err());
        let parsed: std::result::Result<TernaryInput, _> = serde_json::from_str("[1,-1,0]");
        assert_eq!(parsed.unwrap().entries(), &[1, -1, 0]);
        assert!(serde_json::from_str::<TernaryInput>("[3]").is_err());
    }

    #[test]
    fn alphabet_enumeration() {
        let one: Vec<Vec<i8>> = enumerate_alphabet(1).unwrap().into_iter().map(Vec::from).collect();
        assert_eq!(one, vec![vec![-1], vec![0], vec![1]]);
        let two = enumerate_alphabet(2).unwrap();
        assert_eq!(two.len(), 9);
        assert_eq!(two[0].entries(), &[-1, -1]);
        assert_eq!(two[8].entries(), &[1, 1]);
        let four = enumerate_alphabet(4).unwrap();
        assert_eq!(four.len(), 81);
        assert_eq!(four.iter().collect::<HashSet<_>>().len(), 81);
        assert!(four.windows(2).all(|w| w[0] < w[1]));
        assert!(enumerate_alphabet(ALPHABET_GUARD + 1).is_err());
    }

    #[test]
    fn oscillator_plant_has_25_directions() {
        let plant = QuantizedPlant::new(Mat::identity(2), oscillator_bq(), 0.2).unwrap();
        let dirs: HashSet<(i64, i64)> = enumerate_alphabet(4)
            .unwrap()
            .iter()
            .map(|u| {
                let d = plant.direction(u).unwrap();
                (d[0] as i64, d[1] as i64)
            })
            .collect();
        assert_eq!(dirs.len(), 25);
        assert!(dirs.iter().all(|(a, b)| a.abs() <= 2 && b.abs() <= 2));
    }
}
