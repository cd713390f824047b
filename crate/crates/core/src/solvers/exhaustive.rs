use crate::error::{Error, Result};
use crate::mpc::IlsInstance;

/// Largest number of candidates `exhaustive_solve` will enumerate.
pub const EXHAUSTIVE_GUARD: usize = 1 << 20;

/// Global minimizer of `‖W U − ū‖²` by full enumeration.
///
/// Candidates are visited in lexicographic order (−1 < 0 < 1) and only a
/// strictly smaller cost replaces the incumbent, so ties go to the
/// lexicographically smallest stack.
pub fn exhaustive_solve(ils: &IlsInstance) -> Result<(Vec<i8>, f64)> {
    let d = ils.dim();
    let total = 3usize
        .checked_pow(d as u32)
        .filter(|&t| t <= EXHAUSTIVE_GUARD)
        .ok_or_else(|| Error::GuardExceeded(format!("exhaustive search over 3^{d} candidates exceeds {EXHAUSTIVE_GUARD}")))?;
    let mut u = vec![-1i8; d];
    let mut best = u.clone();
    let mut best_cost = f64::INFINITY;
    for _ in 0..total {
        let cost = ils.residual_sq_ternary(&u);
        if cost < best_cost {
            best_cost = cost;
            best.copy_from_slice(&u);
        }
        // odometer increment, last coordinate fastest
        for slot in u.iter_mut().rev() {
            if *slot < 1 {
                *slot += 1;
                break;
            }
            *slot = -1;
        }
    }
    Ok((best, best_cost))
}
