//! Matrix exponential by scaling and squaring.
//!
//! The argument is scaled by 2^-s until its 1-norm is at most 1/2, the
//! exponential of the scaled matrix is summed as a Taylor series until the
//! next term drops below `tol` relative to the partial sum, and the result is
//! squared s times. At ‖A‖₁ ≤ 1/2 the series converges in a dozen or so terms
//! for the default tolerance, and the squaring phase amplifies the truncation
//! error by at most a factor of 2^s.

use super::Mat;
use crate::error::{Error, Result};

pub const DEFAULT_EXPM_TOL: f64 = 1e-12;

const SCALED_NORM: f64 = 0.5;
const MAX_TERMS: usize = 64;

pub fn mat_exp(m: &Mat, tol: f64) -> Result<Mat> {
    if !m.is_square() {
        return Err(Error::NotSquare("mat_exp", m.rows(), m.cols()));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("mat_exp"));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("mat_exp tolerance must be positive, got {tol}")));
    }
    let n = m.rows();
    let norm = m.norm_1();
    let squarings = if norm > SCALED_NORM {
        (norm / SCALED_NORM).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m.scale(0.5f64.powi(squarings));

    // Series tolerance is tightened so the squaring phase stays within `tol`.
    let series_tol = tol * 0.5f64.powi(squarings.min(40)) * 1e-2;
    let mut sum = Mat::identity(n);
    let mut term = Mat::identity(n);
    let mut converged = false;
    for k in 1..=MAX_TERMS {
        term = term.matmul(&scaled)?.scale(1.0 / k as f64);
        sum = sum.add(&term)?;
        if term.norm_1() <= series_tol.max(f64::EPSILON * 1e-3) * sum.norm_1() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence("mat_exp series", MAX_TERMS));
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum)?;
    }
    if !sum.is_finite() {
        return Err(Error::NonFinite("mat_exp result"));
    }
    Ok(sum)
}

pub fn mat_exp_default(m: &Mat) -> Result<Mat> {
    mat_exp(m, DEFAULT_EXPM_TOL)
}
