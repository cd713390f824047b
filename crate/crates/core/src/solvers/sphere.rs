//! Sphere decoding over the ternary alphabet.
//!
//! `W` is upper triangular, so the residual of row `i` depends only on
//! `U_i..U_{d-1}`. The search fixes the last coordinate first and walks
//! towards the first, accumulating `Σ_{j≥i} (W_j·U − ū_j)²`; any partial sum
//! outside the current sphere is pruned. Children are visited closest first
//! (Schnorr–Euchner order) and every accepted leaf shrinks the sphere to its
//! own cost. A branch is also pruned when the rows still open cannot get
//! back inside the sphere even with the free coordinates ranging over the
//! whole box `[−1, 1]`.

use crate::error::{Error, Result};
use crate::mpc::IlsInstance;

/// Relative slack on the caller's radius, so a candidate whose cost *is* the
/// radius survives a different summation order.
const RADIUS_SLACK: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct SphereResult {
    pub u: Vec<i8>,
    /// `‖W U − ū‖²` of the returned stack.
    pub cost: f64,
    /// Complete candidates (leaves) evaluated; never exceeds 3^d.
    pub nodes_visited: u64,
    /// Squared radius after each incumbent update, strictly decreasing.
    pub incumbent_costs: Vec<f64>,
}

struct Search<'a> {
    ils: &'a IlsInstance,
    u: Vec<i8>,
    /// `centers[i][j] = ū_j − Σ_{l>i} W_jl U_l` for `j ≤ i`, valid while
    /// `U_{i+1..}` is fixed.
    centers: Vec<Vec<f64>>,
    /// `reach[i][j] = Σ_{j≤l<i} |W_jl|`: how far the free coordinates can
    /// move row `j` once `U_i..` is fixed.
    reach: Vec<Vec<f64>>,
    best: Option<Vec<i8>>,
    radius_sq: f64,
    nodes_visited: u64,
    incumbent_costs: Vec<f64>,
}

impl Search<'_> {
    fn descend(&mut self, level: usize, partial: f64) {
        let w = &self.ils.w;
        let center = self.centers[level][level];
        let diag = w[(level, level)];

        let mut children = [(-1i8, 0.0f64), (0, 0.0), (1, 0.0)];
        for c in children.iter_mut() {
            let r = diag * f64::from(c.0) - center;
            c.1 = partial + r * r;
        }
        // Stable sort keeps −1 < 0 < 1 among equal distances.
        children.sort_by(|a, b| a.1.total_cmp(&b.1));
        if level == 0 {
            self.nodes_visited += 3;
        }

        for (value, cost) in children {
            if !self.inside(cost) {
                break;
            }
            self.u[level] = value;
            if level == 0 {
                self.radius_sq = cost;
                self.incumbent_costs.push(cost);
                self.best = Some(self.u.clone());
                continue;
            }
            let (lower, upper) = self.centers.split_at_mut(level);
            let next = &mut lower[level - 1];
            let reach = &self.reach[level];
            let v = f64::from(value);
            // Rows above stay at least this far from zero over the box.
            let mut bound = 0.0;
            for j in 0..level {
                let c = upper[0][j] - w[(j, level)] * v;
                next[j] = c;
                let gap = c.abs() - reach[j];
                if gap > 0.0 {
                    bound += gap * gap;
                }
            }
            if self.inside(cost + bound) {
                self.descend(level - 1, cost);
            }
        }
        self.u[level] = 0;
    }

    fn inside(&self, cost: f64) -> bool {
        if self.best.is_some() {
            cost < self.radius_sq
        } else {
            cost <= self.radius_sq
        }
    }
}

/// Exact minimizer of `‖W U − ū‖²` over {−1, 0, 1}^d, searching inside the
/// sphere of squared radius `init_radius_sq`.
///
/// The radius must admit at least one lattice point; [`super::initial_radius`]
/// guarantees that by construction. An empty sphere is reported as
/// [`Error::Infeasible`].
pub fn sphere_decode(ils: &IlsInstance, init_radius_sq: f64) -> Result<SphereResult> {
    let d = ils.dim();
    if d == 0 {
        return Ok(SphereResult {
            u: Vec::new(),
            cost: 0.0,
            nodes_visited: 1,
            incumbent_costs: vec![0.0],
        });
    }
    for i in 0..d {
        if !(ils.w[(i, i)] > 0.0) {
            return Err(Error::InvalidArgument(format!("W diagonal entry {i} is not positive")));
        }
    }
    if init_radius_sq.is_nan() || init_radius_sq < 0.0 {
        return Err(Error::InvalidArgument(format!("invalid sphere radius {init_radius_sq}")));
    }
    let w = &ils.w;
    let reach = (0..d)
        .map(|i| (0..i).map(|j| (j..i).map(|l| w[(j, l)].abs()).sum()).collect())
        .collect();
    let mut centers: Vec<Vec<f64>> = (0..d).map(|i| vec![0.0; i + 1]).collect();
    centers[d - 1].copy_from_slice(&ils.u_bar);
    let mut search = Search {
        ils,
        u: vec![0; d],
        centers,
        reach,
        best: None,
        radius_sq: init_radius_sq * (1.0 + RADIUS_SLACK) + f64::MIN_POSITIVE,
        nodes_visited: 0,
        incumbent_costs: Vec::new(),
    };
    search.descend(d - 1, 0.0);
    let u = search.best.ok_or(Error::Infeasible)?;
    let cost = ils.residual_sq_ternary(&u);
    Ok(SphereResult {
        u,
        cost,
        nodes_visited: search.nodes_visited,
        incumbent_costs: search.incumbent_costs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Mat;
    use crate::solvers::{babai_round, exhaustive_solve, initial_radius};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn random_instance(rng: &mut ChaCha8Rng, d: usize) -> IlsInstance {
        let mut w = Mat::zeros(d, d);
        for i in 0..d {
            w[(i, i)] = rng.gen_range(0.3..2.0);
            for j in i + 1..d {
                w[(i, j)] = rng.gen_range(-1.0..1.0);
            }
        }
        let u_bar = (0..d).map(|_| rng.gen_range(-2.5..2.5)).collect();
        IlsInstance::new(Arc::new(w), u_bar).unwrap()
    }

    fn solve(ils: &IlsInstance) -> SphereResult {
        let babai = babai_round(&ils.u_uncon);
        sphere_decode(ils, initial_radius(ils, &babai, None)).unwrap()
    }

    #[test]
    fn identity_with_ternary_target() {
        let ils = IlsInstance::new(Arc::new(Mat::identity(3)), vec![1.0, 0.0, -1.0]).unwrap();
        let res = solve(&ils);
        assert_eq!(res.u, vec![1, 0, -1]);
        assert_eq!(res.cost, 0.0);
    }

    #[test]
    fn matches_exhaustive_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for trial in 0..200 {
            let d = 1 + trial % 8;
            let ils = random_instance(&mut rng, d);
            let (_, best) = exhaustive_solve(&ils).unwrap();
            let res = solve(&ils);
            assert!((res.cost - best).abs() <= 1e-9, "trial {trial}: {} vs {best}", res.cost);
            assert!(res.nodes_visited <= 3u64.pow(d as u32));
            assert!(res.incumbent_costs.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn prunes_at_dimension_eight() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let ils = random_instance(&mut rng, 8);
            let res = solve(&ils);
            assert!(res.nodes_visited < 3u64.pow(8));
        }
    }

    #[test]
    fn empty_sphere_is_signaled() {
        let ils = IlsInstance::new(Arc::new(Mat::identity(2)), vec![0.5, 0.5]).unwrap();
        assert!(matches!(sphere_decode(&ils, 0.1), Err(Error::Infeasible)));
    }

    #[test]
    fn huge_radius_still_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let ils = random_instance(&mut rng, 6);
        let (_, best) = exhaustive_solve(&ils).unwrap();
        let res = sphere_decode(&ils, f64::INFINITY).unwrap();
        assert!((res.cost - best).abs() <= 1e-9);
    }
}
