//! Order-condition constraint systems: residual evaluation, the n=2 exact
//! solution, the n=4 family sweep, and the (empty) search for sequences
//! canceling the full third order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::magnus::{second_order_coefficient, third_order_coefficients};
use crate::sequence::{
    exact_n2, family_n4, family_n4_feasible, feasibility_interval, Branch, PulseSequence,
};

/// Scalar residuals of all order conditions for a sequence with n <= 4.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConstraintResiduals {
    /// sum(delta) - 1
    pub sum_defect: f64,
    /// sum_even(delta) - 1/2
    pub parity_defect: f64,
    /// Second-order coefficient S.
    pub second_order: f64,
    /// C1 + C2 (cross-block third order).
    pub third_cross: f64,
    pub third_c1: f64,
    pub third_c2: f64,
}

impl ConstraintResiduals {
    pub fn max_family_residual(&self) -> f64 {
        self.sum_defect
            .abs()
            .max(self.parity_defect.abs())
            .max(self.second_order.abs())
            .max(self.third_cross.abs())
    }
}

pub fn residuals(seq: &PulseSequence) -> Result<ConstraintResiduals> {
    let (c1, c2) = third_order_coefficients(seq)?;
    let sum: f64 = seq.deltas().iter().sum();
    let even: f64 = seq.deltas().iter().step_by(2).sum();
    Ok(ConstraintResiduals {
        sum_defect: sum - 1.0,
        parity_defect: even - 0.5,
        second_order: second_order_coefficient(seq),
        third_cross: c1 + c2,
        third_c1: c1,
        third_c2: c2,
    })
}

/// Solves {sum = 1, parity = 1/2, S = 0} for n = 2 by elimination.
///
/// Parity forces delta_1 = 1/2; S = delta_1 (delta_0 - delta_2) with
/// delta_1 != 0 forces delta_0 = delta_2; the sum constraint then fixes both
/// at 1/4. The solution is unique in (0,1)^3.
pub fn solve_n2() -> PulseSequence {
    let delta1 = 0.5;
    let delta0 = (1.0 - delta1) / 2.0;
    let seq = PulseSequence::new(vec![delta0, delta1, delta0]).expect("closed-form solution");
    debug_assert!(second_order_coefficient(&seq).abs() <= 1e-12);
    debug_assert_eq!(seq.deltas(), exact_n2().deltas());
    seq
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub delta1: f64,
    pub branch: Branch,
    pub deltas: [f64; 5],
    pub residuals: ConstraintResiduals,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// (delta1, branch) pairs skipped because a fraction left (0, 1).
    pub infeasible_branches: usize,
}

/// Samples the n=4 family at equispaced interior delta_1 values and reports
/// every feasible branch with its residuals, ordered by delta1.
pub fn sweep_family_n4(points: usize) -> Result<SweepTable> {
    if points < 2 {
        return Err(Error::Config("sweep needs at least 2 points".into()));
    }
    let (lo, hi) = feasibility_interval();
    let mut rows = Vec::new();
    let mut infeasible = 0usize;
    for i in 0..points {
        // Interior points only: offset by half a step from each endpoint.
        let frac = (i as f64 + 0.5) / points as f64;
        let delta1 = lo + frac * (hi - lo);
        let feasible = family_n4_feasible(delta1)?;
        infeasible += 2 - feasible.len();
        for (branch, seq) in feasible {
            let res = residuals(&seq)?;
            let d = seq.deltas();
            rows.push(SweepRow {
                delta1,
                branch,
                deltas: [d[0], d[1], d[2], d[3], d[4]],
                residuals: res,
            });
        }
    }
    Ok(SweepTable {
        rows,
        infeasible_branches: infeasible,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Candidate {
    pub delta1: f64,
    pub branch: Branch,
    pub deltas: [f64; 5],
    pub c1: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchOutcome {
    pub candidates: Vec<Candidate>,
    /// Smallest |C1| seen along the feasible family and where it occurs.
    pub min_abs_c1: f64,
    pub argmin_delta1: f64,
    pub argmin_branch: Branch,
    pub grid: usize,
    pub refine_tol: f64,
    /// Scan data for inspection: (delta1, branch, C1) per feasible point.
    pub scan: Vec<(f64, Branch, f64)>,
}

/// Scans C1 along the one-parameter n=4 family (which already enforces the
/// sum, parity, S = 0, and C1 + C2 = 0 conditions) and root-refines any sign
/// change by bisection. A candidate would cancel the full third order.
pub fn search_full_third_order(grid: usize, refine_tol: f64) -> Result<SearchOutcome> {
    if grid < 100 {
        return Err(Error::Config("grid must be >= 100".into()));
    }
    let (lo, hi) = feasibility_interval();
    let c1_at = |delta1: f64, branch: Branch| -> Option<f64> {
        let seq = family_n4(delta1, branch).ok()?;
        let (c1, _) = third_order_coefficients(&seq).ok()?;
        Some(c1)
    };

    let mut candidates = Vec::new();
    let mut scan = Vec::new();
    let mut min_abs = f64::INFINITY;
    let mut argmin = (lo, Branch::Lower);

    for branch in [Branch::Upper, Branch::Lower] {
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..grid {
            let frac = (i as f64 + 0.5) / grid as f64;
            let delta1 = lo + frac * (hi - lo);
            let Some(c1) = c1_at(delta1, branch) else {
                prev = None;
                continue;
            };
            scan.push((delta1, branch, c1));
            if c1.abs() < min_abs {
                min_abs = c1.abs();
                argmin = (delta1, branch);
            }
            if c1.abs() <= refine_tol {
                if let Ok(seq) = family_n4(delta1, branch) {
                    let d = seq.deltas();
                    candidates.push(Candidate {
                        delta1,
                        branch,
                        deltas: [d[0], d[1], d[2], d[3], d[4]],
                        c1,
                    });
                }
            }
            if let Some((x_prev, c_prev)) = prev {
                if c_prev.signum() != c1.signum() {
                    // Bisection to 1e-12 in delta1.
                    let (mut a, mut b, mut fa) = (x_prev, delta1, c_prev);
                    while b - a > 1e-12 {
                        let mid = 0.5 * (a + b);
                        let Some(fm) = c1_at(mid, branch) else { break };
                        if fa.signum() == fm.signum() {
                            a = mid;
                            fa = fm;
                        } else {
                            b = mid;
                        }
                    }
                    let root = 0.5 * (a + b);
                    if let Some(croot) = c1_at(root, branch) {
                        if croot.abs() <= refine_tol {
                            if let Ok(seq) = family_n4(root, branch) {
                                let d = seq.deltas();
                                candidates.push(Candidate {
                                    delta1: root,
                                    branch,
                                    deltas: [d[0], d[1], d[2], d[3], d[4]],
                                    c1: croot,
                                });
                            }
                        }
                    }
                }
            }
            prev = Some((delta1, c1));
        }
    }

    Ok(SearchOutcome {
        candidates,
        min_abs_c1: min_abs,
        argmin_delta1: argmin.0,
        argmin_branch: argmin.1,
        grid,
        refine_tol,
        scan,
    })
}

/// Raw Newton search for the full 5-equation system
/// {sum - 1, parity - 1/2, S, C1, C2} over (delta_0..delta_4), from seeded
/// random starts in the simplex. Returns the physical roots found
/// (all fractions in (0, 1)); expected empty.
pub fn newton_search_raw(starts: usize, seed: u64, tol: f64) -> Vec<[f64; 5]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut roots: Vec<[f64; 5]> = Vec::new();

    let f = |d: &[f64; 5]| -> [f64; 5] {
        let sum: f64 = d.iter().sum();
        let even = d[0] + d[2] + d[4];
        let s = d[1] * d[0] + d[3] * (d[0] + d[2]) - d[2] * d[1] - d[4] * (d[1] + d[3]);
        let c1 = -0.5 * (d[1] + d[3]) * (d[2] * d[2] + d[4] * d[4] + d[0] * d[0] - 4.0 * d[4] * d[0])
            + d[1] * d[2] * (2.0 * d[0] - d[4])
            + d[2] * d[3] * (2.0 * d[4] - d[0]);
        let c2 = 0.5 * (d[1] + d[3]) * (d[1] + d[3]) * (d[0] + d[2] + d[4]) - 3.0 * d[1] * d[2] * d[3];
        [sum - 1.0, even - 0.5, s, c1, c2]
    };

    for _ in 0..starts {
        // Random point in the open simplex via normalized uniforms.
        let mut d = [0.0; 5];
        loop {
            let raw: [f64; 5] = std::array::from_fn(|_| rng.gen_range(0.01..1.0));
            let total: f64 = raw.iter().sum();
            for (slot, r) in d.iter_mut().zip(raw) {
                *slot = r / total;
            }
            if d.iter().all(|&x| x > 1e-3) {
                break;
            }
        }

        let mut converged = false;
        for _ in 0..80 {
            let fv = f(&d);
            let norm: f64 = fv.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm <= tol {
                converged = true;
                break;
            }
            // Forward-difference Jacobian.
            let eps = 1e-8;
            let mut jac = [[0.0f64; 5]; 5];
            for col in 0..5 {
                let mut dp = d;
                dp[col] += eps;
                let fp = f(&dp);
                for row in 0..5 {
                    jac[row][col] = (fp[row] - fv[row]) / eps;
                }
            }
            let Some(step) = solve_5x5(&jac, &fv) else {
                break;
            };
            let mut moved = false;
            for i in 0..5 {
                if step[i].is_finite() {
                    d[i] -= step[i];
                    moved = true;
                }
            }
            if !moved || d.iter().any(|x| !x.is_finite() || x.abs() > 1e3) {
                break;
            }
        }
        if converged && d.iter().all(|&x| x > 0.0 && x < 1.0) {
            let duplicate = roots
                .iter()
                .any(|r| r.iter().zip(&d).all(|(a, b)| (a - b).abs() < 1e-8));
            if !duplicate {
                roots.push(d);
            }
        }
    }
    roots
}

/// Gaussian elimination with partial pivoting for the Newton step.
fn solve_5x5(a: &[[f64; 5]; 5], b: &[f64; 5]) -> Option<[f64; 5]> {
    let mut m = *a;
    let mut rhs = *b;
    for col in 0..5 {
        let pivot = (col..5).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..5 {
            let factor = m[row][col] / m[col][col];
            for k in col..5 {
                m[row][k] -= factor * m[col][k];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    let mut x = [0.0; 5];
    for row in (0..5).rev() {
        let mut acc = rhs[row];
        for k in row + 1..5 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}
