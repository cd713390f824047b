use super::{Mat, SYMMETRY_TOL};
use crate::error::{Error, Result};

const SINGULAR_PIVOT: f64 = 1e-12;

fn check_symmetric(s: &Mat, context: &'static str) -> Result<()> {
    match s.asymmetry() {
        None => Err(Error::NotSquare(context, s.rows(), s.cols())),
        Some(a) if a > SYMMETRY_TOL * s.norm_fro().max(1.0) => Err(Error::NotSymmetric(context, a)),
        Some(_) => Ok(()),
    }
}

/// Upper-triangular `W` with `WᵀW = S`.
///
/// Only the upper triangle of `S` is read once symmetry has been checked.
pub fn cholesky(s: &Mat) -> Result<Mat> {
    check_symmetric(s, "cholesky")?;
    if !s.is_finite() {
        return Err(Error::NonFinite("cholesky"));
    }
    let n = s.rows();
    let mut w = Mat::zeros(n, n);
    for j in 0..n {
        let mut diag = s[(j, j)];
        for k in 0..j {
            diag -= w[(k, j)] * w[(k, j)];
        }
        if !(diag > 0.0) {
            return Err(Error::NotPositiveDefinite("cholesky"));
        }
        let pivot = diag.sqrt();
        w[(j, j)] = pivot;
        for i in j + 1..n {
            let mut v = s[(j, i)];
            for k in 0..j {
                v -= w[(k, j)] * w[(k, i)];
            }
            w[(j, i)] = v / pivot;
        }
    }
    Ok(w)
}

pub fn is_positive_definite(s: &Mat) -> Result<bool> {
    match cholesky(s) {
        Ok(_) => Ok(true),
        Err(Error::NotPositiveDefinite(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

/// True iff `−S` has a Cholesky factorization.
pub fn is_negative_definite(s: &Mat) -> Result<bool> {
    check_symmetric(s, "is_negative_definite")?;
    is_positive_definite(&s.scale(-1.0))
}

/// Solves `A x = b` by LU with partial pivoting.
pub fn solve_linear(a: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::NotSquare("solve_linear", a.rows(), a.cols()));
    }
    let n = a.rows();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            context: "solve_linear",
            expected: n,
            actual: b.len(),
        });
    }
    let mut lu = a.clone();
    let mut x = b.to_vec();
    let scale = a.norm_1().max(f64::MIN_POSITIVE);
    for k in 0..n {
        let (p, pivot) = (k..n)
            .map(|i| (i, lu[(i, k)].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot <= SINGULAR_PIVOT * scale {
            return Err(Error::Singular(pivot));
        }
        if p != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
            x.swap(k, p);
        }
        for i in k + 1..n {
            let factor = lu[(i, k)] / lu[(k, k)];
            if factor == 0.0 {
                continue;
            }
            for j in k + 1..n {
                lu[(i, j)] -= factor * lu[(k, j)];
            }
            x[i] -= factor * x[k];
        }
    }
    for i in (0..n).rev() {
        let mut v = x[i];
        for j in i + 1..n {
            v -= lu[(i, j)] * x[j];
        }
        x[i] = v / lu[(i, i)];
    }
    Ok(x)
}
