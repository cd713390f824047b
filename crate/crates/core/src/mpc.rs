//! Horizon-N tracking problem, its stacked ("extensive") form, and the
//! integer least-squares instance solved at every step.
//!
//! With `X = Ã x + B̃ U` the horizon cost is
//! `J(U) = (X − R)ᵀ Q̃ (X − R) + Uᵀ R̃ U = (U − U_unc)ᵀ H̃ (U − U_unc) + c`
//! where `H̃ = B̃ᵀ Q̃ B̃ + R̃ = WᵀW` and `U_unc = −H̃⁻¹ B̃ᵀ Q̃ (Ã x − R)`.
//! The constant `c` is kept so the least-squares objective reproduces the
//! horizon cost exactly.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{
    cholesky, dot, eigenvalues, is_negative_definite, is_positive_definite, largest_eigenvalue_sym, mat_exp_default, Mat,
};
use crate::system::{LtiReference, QuantizedPlant};

/// Tolerance for the `A_q = e^{Hh}` check.
pub const DISCRETIZATION_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct MpcProblem {
    plant: QuantizedPlant,
    reference: LtiReference,
    p: Mat,
    q: Mat,
    r: Mat,
    horizon: usize,
}

impl MpcProblem {
    /// Validates dimensions and positive definiteness of the weights.
    pub fn new(plant: QuantizedPlant, reference: LtiReference, p: Mat, q: Mat, r: Mat, horizon: usize) -> Result<Self> {
        let (n, m) = (plant.n(), plant.m());
        if reference.dim() != n {
            return Err(Error::DimensionMismatch {
                context: "MpcProblem reference dimension",
                expected: n,
                actual: reference.dim(),
            });
        }
        for (name, w, dim) in [("P", &p, n), ("Q", &q, n), ("R", &r, m)] {
            if w.rows() != dim || w.cols() != dim {
                return Err(Error::InvalidArgument(format!(
                    "weight {name} must be {dim}x{dim}, got {}x{}",
                    w.rows(),
                    w.cols()
                )));
            }
            if !is_positive_definite(w)? {
                return Err(Error::InvalidArgument(format!("weight {name} is not positive definite")));
            }
        }
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be at least 1".into()));
        }
        Ok(Self {
            plant,
            reference,
            p,
            q,
            r,
            horizon,
        })
    }

    pub fn plant(&self) -> &QuantizedPlant {
        &self.plant
    }

    pub fn reference(&self) -> &LtiReference {
        &self.reference
    }

    pub fn p(&self) -> &Mat {
        &self.p
    }

    pub fn q(&self) -> &Mat {
        &self.q
    }

    pub fn r(&self) -> &Mat {
        &self.r
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Length of a stacked input sequence, `N·m`.
    pub fn stacked_len(&self) -> usize {
        self.horizon * self.plant.m()
    }

    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        Self::new(
            self.plant.clone(),
            self.reference.clone(),
            self.p.clone(),
            self.q.clone(),
            self.r.clone(),
            horizon,
        )
    }
}

/// Stacked horizon matrices; `W` is the upper-triangular Cholesky factor of
/// `H̃`. All of it depends only on the plant, weights and horizon, so one
/// instance serves every step of a run.
#[derive(Clone, Debug)]
pub struct ExtensiveForm {
    pub a_tilde: Mat,
    pub b_tilde: Mat,
    pub q_tilde: Mat,
    pub r_tilde: Mat,
    pub h_tilde: Mat,
    pub w: Arc<Mat>,
    curvature: Arc<OnceLock<f64>>,
    n: usize,
    m: usize,
    horizon: usize,
}

impl ExtensiveForm {
    pub fn build(prob: &MpcProblem) -> Result<Self> {
        let plant = prob.plant();
        let (n, m, big_n) = (plant.n(), plant.m(), prob.horizon());
        let a_q = plant.a_q();
        let hb = plant.b_q().scale(plant.h());

        let mut powers = Vec::with_capacity(big_n + 1);
        powers.push(Mat::identity(n));
        for i in 1..=big_n {
            let next = powers[i - 1].matmul(a_q)?;
            powers.push(next);
        }

        let mut a_tilde = Mat::zeros((big_n + 1) * n, n);
        for (i, p) in powers.iter().enumerate() {
            a_tilde.set_block(i * n, 0, p);
        }

        // Block row i (state x_{i|k}) receives A_q^{i-1-j} h B_q from input j < i.
        let mut b_tilde = Mat::zeros((big_n + 1) * n, big_n * m);
        let blocks: Vec<Mat> = powers[..big_n]
            .iter()
            .map(|p| p.matmul(&hb))
            .collect::<Result<_>>()?;
        for i in 1..=big_n {
            for j in 0..i {
                b_tilde.set_block(i * n, j * m, &blocks[i - 1 - j]);
            }
        }

        let mut q_tilde = Mat::zeros((big_n + 1) * n, (big_n + 1) * n);
        for i in 0..big_n {
            q_tilde.set_block(i * n, i * n, prob.q());
        }
        q_tilde.set_block(big_n * n, big_n * n, prob.p());

        let mut r_tilde = Mat::zeros(big_n * m, big_n * m);
        for i in 0..big_n {
            r_tilde.set_block(i * m, i * m, prob.r());
        }

        let mut h_tilde = b_tilde.transpose().matmul(&q_tilde)?.matmul(&b_tilde)?.add(&r_tilde)?;
        symmetrize(&mut h_tilde);
        let w = cholesky(&h_tilde).map_err(|e| match e {
            Error::NotPositiveDefinite(_) => Error::NotPositiveDefinite("stacked Hessian H̃"),
            other => other,
        })?;

        Ok(Self {
            a_tilde,
            b_tilde,
            q_tilde,
            r_tilde,
            h_tilde,
            w: Arc::new(w),
            curvature: Arc::default(),
            n,
            m,
            horizon: big_n,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn stacked_len(&self) -> usize {
        self.horizon * self.m
    }

    /// `X = Ã x_q + B̃ U`.
    pub fn predict_states(&self, x_q: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let free = self.a_tilde.matvec(x_q)?;
        let forced = self.b_tilde.matvec(u)?;
        Ok(free.iter().zip(&forced).map(|(a, b)| a + b).collect())
    }

    /// Integer least-squares instance for state `x_q` and stacked reference `r_k`.
    pub fn ils_transform(&self, x_q: &[f64], r_k: &[f64]) -> Result<IlsInstance> {
        let stacked = (self.horizon + 1) * self.n;
        if r_k.len() != stacked {
            return Err(Error::DimensionMismatch {
                context: "ils_transform reference stack",
                expected: stacked,
                actual: r_k.len(),
            });
        }
        if x_q.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "ils_transform state",
                expected: self.n,
                actual: x_q.len(),
            });
        }
        let offset: Vec<f64> = self
            .a_tilde
            .matvec(x_q)?
            .iter()
            .zip(r_k)
            .map(|(a, r)| a - r)
            .collect();
        let weighted = self.q_tilde.matvec(&offset)?;
        let g = self.b_tilde.tr_matvec(&weighted)?;

        // H̃ u = −g via the cached factor: Wᵀ y = −g, then W u = y.
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let y = solve_lower_transposed(&self.w, &neg_g)?;
        let u_uncon = solve_upper(&self.w, &y)?;
        let u_bar = self.w.matvec(&u_uncon)?;
        let constant = dot(&offset, &weighted) - dot(&u_bar, &u_bar);
        Ok(IlsInstance {
            w: Arc::clone(&self.w),
            u_bar,
            constant,
            u_uncon,
            curvature: Arc::clone(&self.curvature),
        })
    }
}

fn symmetrize(m: &mut Mat) {
    let n = m.rows();
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Solves `Wᵀ y = b` for upper-triangular `W`.
fn solve_lower_transposed(w: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    let n = w.rows();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut v = b[i];
        for (k, yk) in y.iter().enumerate().take(i) {
            v -= w[(k, i)] * yk;
        }
        let d = w[(i, i)];
        if d == 0.0 {
            return Err(Error::Singular(0.0));
        }
        y[i] = v / d;
    }
    Ok(y)
}

/// Solves `W x = b` for upper-triangular `W`.
fn solve_upper(w: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    let n = w.rows();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let v = b[i] - dot(&w.row(i)[i + 1..], &x[i + 1..]);
        let d = w[(i, i)];
        if d == 0.0 {
            return Err(Error::Singular(0.0));
        }
        x[i] = v / d;
    }
    Ok(x)
}

/// `min ‖W U − ū‖²` over the ternary stacks, plus the constant that turns
/// the objective back into the horizon cost.
#[derive(Clone, Debug)]
pub struct IlsInstance {
    pub w: Arc<Mat>,
    pub u_bar: Vec<f64>,
    pub constant: f64,
    pub u_uncon: Vec<f64>,
    /// Largest eigenvalue of `WᵀW`, shared by every instance built on `w`.
    curvature: Arc<OnceLock<f64>>,
}

impl IlsInstance {
    pub fn new(w: Arc<Mat>, u_bar: Vec<f64>) -> Result<Self> {
        if !w.is_square() || w.rows() != u_bar.len() {
            return Err(Error::DimensionMismatch {
                context: "IlsInstance",
                expected: w.rows(),
                actual: u_bar.len(),
            });
        }
        let u_uncon = solve_upper(&w, &u_bar)?;
        Ok(Self {
            w,
            u_bar,
            constant: 0.0,
            u_uncon,
            curvature: Arc::default(),
        })
    }

    /// Largest eigenvalue of `WᵀW` by power iteration, computed once per
    /// factor.
    pub fn curvature(&self) -> f64 {
        *self.curvature.get_or_init(|| {
            let w = &self.w;
            largest_eigenvalue_sym(
                self.dim(),
                |v| w.tr_matvec(&w.matvec(v).expect("square W")).expect("square W"),
                10_000,
            )
        })
    }

    pub fn dim(&self) -> usize {
        self.u_bar.len()
    }

    /// `‖W U − ū‖²`.
    pub fn residual_sq(&self, u: &[f64]) -> f64 {
        let n = self.dim();
        debug_assert_eq!(u.len(), n);
        (0..n)
            .map(|i| {
                let r = dot(&self.w.row(i)[i..], &u[i..]) - self.u_bar[i];
                r * r
            })
            .sum()
    }

    pub fn residual_sq_ternary(&self, u: &[i8]) -> f64 {
        let n = self.dim();
        debug_assert_eq!(u.len(), n);
        (0..n)
            .map(|i| {
                let row = self.w.row(i);
                let wu: f64 = (i..n).map(|j| row[j] * f64::from(u[j])).sum();
                let r = wu - self.u_bar[i];
                r * r
            })
            .sum()
    }

    /// Horizon cost reconstructed from the least-squares form.
    pub fn cost(&self, u: &[f64]) -> f64 {
        self.residual_sq(u) + self.constant
    }
}

/// `[x_ref; A_d x_ref; …; A_d^N x_ref]`.
pub fn reference_horizon(reference: &LtiReference, xref0: &[f64], horizon: usize) -> Result<Vec<f64>> {
    if xref0.len() != reference.dim() {
        return Err(Error::DimensionMismatch {
            context: "reference_horizon",
            expected: reference.dim(),
            actual: xref0.len(),
        });
    }
    let mut out = Vec::with_capacity((horizon + 1) * xref0.len());
    let mut x = xref0.to_vec();
    out.extend_from_slice(&x);
    for _ in 0..horizon {
        x = reference.step(&x)?;
        out.extend_from_slice(&x);
    }
    Ok(out)
}

/// Horizon cost by direct roll-out of plant and reference.
///
/// Accepts real-valued inputs so the relaxed problem shares the evaluator.
pub fn stage_cost(prob: &MpcProblem, x0: &[f64], xref0: &[f64], u: &[f64]) -> Result<f64> {
    let plant = prob.plant();
    let (n, m) = (plant.n(), plant.m());
    if u.len() != prob.stacked_len() {
        return Err(Error::DimensionMismatch {
            context: "stage_cost input stack",
            expected: prob.stacked_len(),
            actual: u.len(),
        });
    }
    if x0.len() != n || xref0.len() != n {
        return Err(Error::DimensionMismatch {
            context: "stage_cost state",
            expected: n,
            actual: if x0.len() != n { x0.len() } else { xref0.len() },
        });
    }
    let mut x = x0.to_vec();
    let mut xr = xref0.to_vec();
    let mut total = 0.0;
    for block in u.chunks_exact(m) {
        let e: Vec<f64> = x.iter().zip(&xr).map(|(a, b)| a - b).collect();
        total += prob.q().quad_form(&e)? + prob.r().quad_form(block)?;
        x = plant.step_real(&x, block)?;
        xr = prob.reference().step(&xr)?;
    }
    let e: Vec<f64> = x.iter().zip(&xr).map(|(a, b)| a - b).collect();
    total += prob.p().quad_form(&e)?;
    Ok(total)
}

pub fn stage_cost_ternary(prob: &MpcProblem, x0: &[f64], xref0: &[f64], u: &[i8]) -> Result<f64> {
    let real: Vec<f64> = u.iter().map(|&v| f64::from(v)).collect();
    stage_cost(prob, x0, xref0, &real)
}

/// Outcome of the two sufficient conditions for asymptotic emulation.
#[derive(Clone, Debug)]
pub struct StabilityReport {
    /// `A_q` equals `e^{Hh}` within [`DISCRETIZATION_TOL`].
    pub exact_discretization: bool,
    /// `Q − P + A_qᵀ P A_q` is negative definite.
    pub terminal_decrease: bool,
    pub discretization_error: f64,
    /// Eigenvalues of `Q − P + A_qᵀ P A_q`.
    pub witness: Vec<Complex64>,
}

impl StabilityReport {
    pub fn holds(&self) -> bool {
        self.exact_discretization && self.terminal_decrease
    }
}

pub fn check_stability_conditions(prob: &MpcProblem) -> Result<StabilityReport> {
    let a_q = prob.plant().a_q();
    let exact = mat_exp_default(&prob.reference().state_matrix().scale(prob.reference().h()))?;
    let discretization_error = a_q.max_abs_diff(&exact);
    let mut test = prob
        .q()
        .sub(prob.p())?
        .add(&a_q.transpose().matmul(prob.p())?.matmul(a_q)?)?;
    symmetrize(&mut test);
    Ok(StabilityReport {
        exact_discretization: discretization_error <= DISCRETIZATION_TOL,
        terminal_decrease: is_negative_definite(&test)?,
        discretization_error,
        witness: eigenvalues(&test)?,
    })
}
