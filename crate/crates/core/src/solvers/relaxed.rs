//! Box-relaxed least squares, `min ‖W U − ū‖²` over `[−1, 1]^d`.
//!
//! Accelerated projected gradient (FISTA with function-value restart) on
//! `f(U) = ½‖W U − ū‖²` with fixed step `1/L`, `L = λ_max(WᵀW)` from power
//! iteration. Termination uses the gradient-mapping residual
//! `‖U − Π(U − ∇f(U)/L)‖`, which is zero exactly at the box-constrained
//! optimum.

use crate::mpc::IlsInstance;
use crate::numerics::{dot, norm2};

pub const DEFAULT_QP_TOL: f64 = 1e-8;
pub const DEFAULT_QP_MAX_ITER: usize = 50_000;

#[derive(Clone, Debug)]
pub struct RelaxedSolution {
    pub u: Vec<f64>,
    pub iterations: usize,
    /// Gradient-mapping residual at `u`.
    pub projected_gradient_norm: f64,
    /// `‖W U − ū‖²` at `u`.
    pub objective: f64,
    /// False when `max_iter` ran out before the residual met `tol`; `u` is
    /// then the iterate with the smallest residual seen.
    pub converged: bool,
}

fn project(u: &mut [f64]) {
    for v in u.iter_mut() {
        *v = v.clamp(-1.0, 1.0);
    }
}

struct Objective<'a> {
    ils: &'a IlsInstance,
}

impl Objective<'_> {
    fn residual(&self, u: &[f64]) -> Vec<f64> {
        let w = &self.ils.w;
        (0..u.len())
            .map(|i| dot(&w.row(i)[i..], &u[i..]) - self.ils.u_bar[i])
            .collect()
    }

    /// Value of ½‖r‖² and gradient Wᵀ r.
    fn value_grad(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let r = self.residual(u);
        let g = self.ils.w.tr_matvec(&r).expect("square W");
        (0.5 * dot(&r, &r), g)
    }

    fn mapping_residual(&self, u: &[f64], grad: &[f64], step: f64) -> f64 {
        let diff: Vec<f64> = u
            .iter()
            .zip(grad)
            .map(|(&x, &g)| x - (x - step * g).clamp(-1.0, 1.0))
            .collect();
        norm2(&diff)
    }
}

pub fn relaxed_qp_solve(ils: &IlsInstance, tol: f64, max_iter: usize) -> RelaxedSolution {
    let obj = Objective { ils };
    let lipschitz = ils.curvature();
    let step = if lipschitz > 0.0 { 1.0 / lipschitz } else { 1.0 };

    let mut x = ils.u_uncon.clone();
    project(&mut x);
    let (mut fx, mut gx) = obj.value_grad(&x);
    let mut best = (obj.mapping_residual(&x, &gx, step), x.clone());
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut iterations = 0;

    while best.0 > tol && iterations < max_iter {
        iterations += 1;
        let (_, gy) = obj.value_grad(&y);
        let mut next: Vec<f64> = y.iter().zip(&gy).map(|(v, g)| v - step * g).collect();
        project(&mut next);
        let (f_next, g_next) = obj.value_grad(&next);

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        // A plain step (t = 1, y = x) decreases f in exact arithmetic, so it is
        // always accepted; near the optimum the decrease is below f's rounding.
        if f_next > fx && t > 1.0 {
            // restart momentum from the last accepted point
            t = 1.0;
            y = x.clone();
            continue;
        }
        let beta = (t - 1.0) / t_next;
        y = next.iter().zip(&x).map(|(n, o)| n + beta * (n - o)).collect();
        x = next;
        fx = f_next;
        gx = g_next;
        t = t_next;

        let res = obj.mapping_residual(&x, &gx, step);
        if res < best.0 {
            best = (res, x.clone());
        }
    }

    let converged = best.0 <= tol;
    let u = best.1;
    let objective = ils.residual_sq(&u);
    RelaxedSolution {
        u,
        iterations,
        projected_gradient_norm: best.0,
        objective,
        converged,
    }
}
