//! Eigenvalues of small real matrices.
//!
//! Householder reduction to upper Hessenberg form followed by the implicit
//! double-shift (Francis) QR iteration. Complex eigenvalues come out in
//! conjugate pairs.

// Index loops mirror the textbook updates on `a[(i, j)]`.
#![allow(clippy::needless_range_loop)]

use num_complex::Complex64;

use super::{dot, norm2, Mat};
use crate::error::{Error, Result};

const MAX_DIM: usize = 64;
const MAX_ITERS_PER_EIGENVALUE: usize = 60;

pub fn eigenvalues(m: &Mat) -> Result<Vec<Complex64>> {
    if !m.is_square() {
        return Err(Error::NotSquare("eigenvalues", m.rows(), m.cols()));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("eigenvalues"));
    }
    let n = m.rows();
    if n > MAX_DIM {
        return Err(Error::GuardExceeded(format!("eigenvalues supports n <= {MAX_DIM}, got {n}")));
    }
    let mut a: Vec<Vec<f64>> = m.to_rows();
    hessenberg(&mut a);
    hqr(&mut a)
}

fn hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let mut v: Vec<f64> = (k + 1..n).map(|i| a[i][k]).collect();
        let alpha = norm2(&v);
        if alpha == 0.0 {
            continue;
        }
        let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
        v[0] += sign * alpha;
        let vnorm = norm2(&v);
        if vnorm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= vnorm);
        // A ← (I − 2vvᵀ) A on rows k+1..n
        for j in 0..n {
            let s: f64 = (k + 1..n).zip(&v).map(|(i, vi)| vi * a[i][j]).sum();
            for (i, vi) in (k + 1..n).zip(&v) {
                a[i][j] -= 2.0 * vi * s;
            }
        }
        // A ← A (I − 2vvᵀ) on columns k+1..n
        for row in a.iter_mut() {
            let s = dot(&row[k + 1..n], &v);
            for (x, vi) in row[k + 1..n].iter_mut().zip(&v) {
                *x -= 2.0 * vi * s;
            }
        }
        for row in a.iter_mut().skip(k + 2) {
            row[k] = 0.0;
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (destroys `a`).
#[allow(clippy::many_single_char_names, unused_assignments)]
fn hqr(a: &mut [Vec<f64>]) -> Result<Vec<Complex64>> {
    let n = a.len();
    let mut wr = vec![Complex64::new(0.0, 0.0); n];
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[i][j].abs();
        }
    }
    let eps = f64::EPSILON;
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    let (mut p, mut q, mut r) = (0.0f64, 0.0f64, 0.0f64);
    let (mut x, mut y, mut z, mut w, mut s);
    while nn >= 0 {
        let mut its = 0;
        loop {
            let nu = nn as usize;
            let mut l = nu;
            while l > 0 {
                s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() <= eps * s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a[nu][nu];
            if l == nu {
                wr[nu] = Complex64::new(x + t, 0.0);
                nn -= 1;
            } else {
                y = a[nu - 1][nu - 1];
                w = a[nu][nu - 1] * a[nu - 1][nu];
                if l == nu - 1 {
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    z = q.abs().sqrt();
                    x += t;
                    if q >= 0.0 {
                        z = p + sign(z, p);
                        wr[nu - 1] = Complex64::new(x + z, 0.0);
                        wr[nu] = Complex64::new(if z != 0.0 { x - w / z } else { x + z }, 0.0);
                    } else {
                        wr[nu] = Complex64::new(x + p, -z);
                        wr[nu - 1] = Complex64::new(x + p, z);
                    }
                    nn -= 2;
                } else {
                    if its == MAX_ITERS_PER_EIGENVALUE {
                        return Err(Error::NoConvergence("eigenvalues (QR)", its));
                    }
                    if its == 10 || its == 20 {
                        // exceptional shift
                        t += x;
                        for (i, row) in a.iter_mut().enumerate().take(nu + 1) {
                            row[i] -= x;
                        }
                        s = a[nu][nu - 1].abs() + a[nu - 1][nu - 2].abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    let mut m = nu - 2;
                    loop {
                        z = a[m][m];
                        r = x - z;
                        s = y - z;
                        p = (r * s - w) / a[m + 1][m] + a[m][m + 1];
                        q = a[m + 1][m + 1] - z - r - s;
                        r = a[m + 2][m + 1];
                        s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                        let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                        if u <= eps * v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in m..nu - 1 {
                        a[i + 2][i] = 0.0;
                        if i != m {
                            a[i + 2][i - 1] = 0.0;
                        }
                    }
                    let mut k = m;
                    while k < nu {
                        if k != m {
                            p = a[k][k - 1];
                            q = a[k + 1][k - 1];
                            r = 0.0;
                            if k + 1 != nu {
                                r = a[k + 2][k - 1];
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        s = sign((p * p + q * q + r * r).sqrt(), p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    a[k][k - 1] = -a[k][k - 1];
                                }
                            } else {
                                a[k][k - 1] = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nu {
                                p = a[k][j] + q * a[k + 1][j];
                                if k + 1 != nu {
                                    p += r * a[k + 2][j];
                                    a[k + 2][j] -= p * z;
                                }
                                a[k + 1][j] -= p * y;
                                a[k][j] -= p * x;
                            }
                            let mmin = if nu < k + 3 { nu } else { k + 3 };
                            for row in a.iter_mut().take(mmin + 1).skip(l) {
                                p = x * row[k] + y * row[k + 1];
                                if k + 1 != nu {
                                    p += z * row[k + 2];
                                    row[k + 2] -= p * r;
                                }
                                row[k + 1] -= p * q;
                                row[k] -= p;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if nn < 0 || l as isize >= nn - 1 {
                break;
            }
        }
    }
    Ok(wr)
}

/// Largest eigenvalue of a symmetric positive semidefinite operator by power
/// iteration. `apply` computes the operator-vector product.
pub fn largest_eigenvalue_sym(dim: usize, apply: impl Fn(&[f64]) -> Vec<f64>, max_iter: usize) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    // Deterministic start with components in every direction.
    let mut v: Vec<f64> = (0..dim).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
    let n0 = norm2(&v);
    v.iter_mut().for_each(|x| *x /= n0);
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = apply(&v);
        let next = dot(&v, &w);
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        v = w.into_iter().map(|x| x / nw).collect();
        if (next - lambda).abs() <= 1e-12 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_re(mut ev: Vec<Complex64>) -> Vec<f64> {
        ev.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        ev.iter().map(|c| c.re).collect()
    }

    #[test]
    fn small_known_spectra() {
        let ev = eigenvalues(&Mat::identity(2)).unwrap();
        assert!(ev.iter().all(|c| (c.re - 1.0).abs() < 1e-14 && c.im == 0.0));

        let h = Mat::from_rows(&[[0.0, 1.0], [-1.0, -2.0]]).unwrap();
        let ev = eigenvalues(&h).unwrap();
        // Defective double root: perturbation ~ sqrt(eps).
        assert!(ev.iter().all(|c| (*c - Complex64::new(-1.0, 0.0)).norm() < 1e-7));

        assert_eq!(sorted_re(eigenvalues(&Mat::diag(&[2.0, -3.0])).unwrap()), vec![-3.0, 2.0]);
    }

    #[test]
    fn complex_pair() {
        let m = Mat::from_rows(&[[0.0, -2.0], [2.0, 0.0]]).unwrap();
        let mut ev = eigenvalues(&m).unwrap();
        ev.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((ev[0] - Complex64::new(0.0, -2.0)).norm() < 1e-14);
        assert!((ev[1] - Complex64::new(0.0, 2.0)).norm() < 1e-14);
    }

    #[test]
    fn companion_matrix_roots() {
        // roots 1, 2, 3, 4: x⁴ − 10x³ + 35x² − 50x + 24
        let c = Mat::from_rows(&[
            [10.0, -35.0, 50.0, -24.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
        ])
        .unwrap();
        let re = sorted_re(eigenvalues(&c).unwrap());
        for (got, want) in re.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((got - want).abs() < 1e-9, "{re:?}");
        }
    }

    #[test]
    fn power_iteration_on_diagonal() {
        let d = Mat::diag(&[1.0, 5.0, 2.0]);
        let l = largest_eigenvalue_sym(3, |v| d.matvec(v).unwrap(), 10_000);
        assert!((l - 5.0).abs() < 1e-8);
    }

    #[test]
    fn rejects_non_square() {
        assert!(eigenvalues(&Mat::zeros(2, 3)).is_err());
    }
}
