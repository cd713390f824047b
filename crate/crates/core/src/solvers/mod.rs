//! Input-selection engines for the per-step integer least-squares problem.
//!
//! * [`exhaustive_solve`]: enumerates every ternary stack; the reference oracle.
//! * [`sphere_decode`]: depth-first branch-and-bound on the triangular factor.
//! * [`relaxed_qp_solve`] + [`babai_round`]: box relaxation, then rounding.
//! * [`suboptimal_step`]: one step of the relaxed/shifted selection rule.
//!
//! Stacked sequences are `Vec<i8>` of length `N·m`, block `i` holding the
//! input for prediction step `i`.

mod exhaustive;
mod relaxed;
mod sphere;
mod suboptimal;

pub use exhaustive::{exhaustive_solve, EXHAUSTIVE_GUARD};
pub use relaxed::{relaxed_qp_solve, RelaxedSolution, DEFAULT_QP_MAX_ITER, DEFAULT_QP_TOL};
pub use sphere::{sphere_decode, SphereResult};
pub use suboptimal::{suboptimal_step, SuboptimalChoice};

use crate::mpc::IlsInstance;

/// Componentwise nearest point of {−1, 0, 1}; magnitudes above one clamp,
/// halves round away from zero.
pub fn babai_round(u: &[f64]) -> Vec<i8> {
    u.iter()
        .map(|&v| if v.is_nan() { 0 } else { v.round().clamp(-1.0, 1.0) as i8 })
        .collect()
}

/// Squared radius that admits at least one candidate: the better of the
/// rounded unconstrained optimum and, when present, the shifted sequence.
pub fn initial_radius(ils: &IlsInstance, babai_u: &[i8], shifted_u: Option<&[i8]>) -> f64 {
    let rounded = ils.residual_sq_ternary(babai_u);
    match shifted_u {
        Some(s) => rounded.min(ils.residual_sq_ternary(s)),
        None => rounded,
    }
}

/// Drops the first `m` entries and appends an all-zero block.
pub fn shift_sequence(u: &[i8], m: usize) -> Vec<i8> {
    let mut out = Vec::with_capacity(u.len());
    out.extend_from_slice(&u[m.min(u.len())..]);
    out.resize(u.len(), 0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Mat;
    use std::sync::Arc;

    #[test]
    fn babai_rounding() {
        assert_eq!(babai_round(&[0.4, -0.7, 1.3]), vec![0, -1, 1]);
        assert_eq!(babai_round(&[0.0, 0.0, 0.0]), vec![0, 0, 0]);
        assert_eq!(babai_round(&[0.5, -0.5]), vec![1, -1]);
        assert_eq!(babai_round(&[-7.0, 0.49999]), vec![-1, 0]);
    }

    #[test]
    fn babai_idempotent_on_ternary() {
        let t = [1.0, 0.0, -1.0, 1.0];
        let once = babai_round(&t);
        let twice = babai_round(&once.iter().map(|&v| f64::from(v)).collect::<Vec<_>>());
        assert_eq!(once, twice);
        assert_eq!(once, vec![1, 0, -1, 1]);
    }

    #[test]
    fn radius_candidates() {
        let w = Arc::new(Mat::identity(2));
        let ils = IlsInstance::new(w, vec![1.0, -1.0]).unwrap();
        assert_eq!(initial_radius(&ils, &[1, -1], None), 0.0);

        let ils = IlsInstance::new(Arc::new(Mat::identity(2)), vec![0.4, -0.7]).unwrap();
        let babai = [0, -1];
        let only = initial_radius(&ils, &babai, None);
        assert!((only - (0.16 + 0.09)).abs() < 1e-15);
        let shifted = [1, 0];
        let both = initial_radius(&ils, &babai, Some(&shifted));
        let shifted_cost = 0.36 + 0.49;
        assert_eq!(both, only.min(shifted_cost));
    }

    #[test]
    fn shifting() {
        assert_eq!(shift_sequence(&[1, -1, 0, 1, 1, 1], 2), vec![0, 1, 1, 1, 0, 0]);
        assert_eq!(shift_sequence(&[1, 1], 2), vec![0, 0]);
    }
}
