//! Pulse-fraction sequences: validation, Uhrig construction, the exact n=2
//! solution, the closed-form n=4 family, and conversion to absolute times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fractions delta_0..delta_n of the total evolution time between n pulses.
/// n is even, every fraction lies in (0, 1), and the fractions sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    deltas: Vec<f64>,
}

pub const SUM_TOL: f64 = 1e-12;

impl PulseSequence {
    pub fn new(deltas: Vec<f64>) -> Result<Self> {
        if deltas.len() < 3 || deltas.len() % 2 == 0 {
            return Err(Error::OddPulseCount(deltas.len().saturating_sub(1)));
        }
        for (i, &d) in deltas.iter().enumerate() {
            if !(d > 0.0 && d < 1.0) || !d.is_finite() {
                return Err(Error::InvalidSequence(format!(
                    "delta{i} = {d} not in (0, 1)"
                )));
            }
        }
        let sum: f64 = deltas.iter().sum();
        let defect = (sum - 1.0).abs();
        if defect > SUM_TOL {
            return Err(Error::InvalidSequence(format!(
                "fractions sum to {sum}, defect {defect:.3e} exceeds {SUM_TOL:.0e}"
            )));
        }
        // Renormalize away sub-tolerance rounding so downstream sums are clean.
        let deltas = deltas.iter().map(|d| d / sum).collect();
        Ok(Self { deltas })
    }

    /// Number of pulses (one less than the number of intervals).
    pub fn n(&self) -> usize {
        self.deltas.len() - 1
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn delta(&self, i: usize) -> f64 {
        self.deltas[i]
    }

    pub fn is_palindromic(&self, tol: f64) -> bool {
        let n = self.deltas.len();
        (0..n / 2).all(|i| (self.deltas[i] - self.deltas[n - 1 - i]).abs() <= tol)
    }

    pub fn validate(&self, require_parity: bool) -> ValidationReport {
        let sum: f64 = self.deltas.iter().sum();
        let even: f64 = self.deltas.iter().step_by(2).sum();
        let odd: f64 = self.deltas.iter().skip(1).step_by(2).sum();
        ValidationReport {
            sum_defect: (sum - 1.0).abs(),
            even_defect: (even - 0.5).abs(),
            odd_defect: (odd - 0.5).abs(),
            parity_checked: require_parity,
        }
    }

    /// Absolute pulse times t_1..t_n for total evolution time `tf`.
    pub fn pulse_times(&self, tf: f64) -> Result<Vec<f64>> {
        if !(tf > 0.0) {
            return Err(Error::NonpositiveTime(tf));
        }
        let mut acc = 0.0;
        Ok(self.deltas[..self.deltas.len() - 1]
            .iter()
            .map(|d| {
                acc += d;
                acc * tf
            })
            .collect())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ValidationReport {
    pub sum_defect: f64,
    pub even_defect: f64,
    pub odd_defect: f64,
    pub parity_checked: bool,
}

impl ValidationReport {
    pub fn passes(&self) -> bool {
        self.sum_defect <= SUM_TOL
            && (!self.parity_checked
                || (self.even_defect <= SUM_TOL && self.odd_defect <= SUM_TOL))
    }
}

/// Uhrig fractions delta_i = sin^2((i+1)pi/(2n+2)) - sin^2(i pi/(2n+2)).
pub fn uhrig(n: usize) -> Result<PulseSequence> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::OddPulseCount(n));
    }
    let step = std::f64::consts::PI / (2.0 * n as f64 + 2.0);
    let s2 = |i: usize| (i as f64 * step).sin().powi(2);
    let deltas = (0..=n).map(|i| s2(i + 1) - s2(i)).collect();
    PulseSequence::new(deltas)
}

/// The unique n=2 sequence canceling the second Magnus order: (1/4, 1/2, 1/4).
pub fn exact_n2() -> PulseSequence {
    PulseSequence::new(vec![0.25, 0.5, 0.25]).expect("constant sequence is valid")
}

/// Sign choice in the n=4 family's closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `+` in delta_0 and `-` in the delta_2 denominator.
    Upper,
    /// `-` in delta_0 and `+` in the delta_2 denominator.
    Lower,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Upper => "upper",
            Branch::Lower => "lower",
        }
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upper" => Ok(Branch::Upper),
            "lower" => Ok(Branch::Lower),
            other => Err(Error::Config(format!(
                "unknown branch {other:?}; expected \"upper\" or \"lower\""
            ))),
        }
    }
}

/// Open interval of delta_1 values for which the n=4 family is physical:
/// (1/2 - 1/(2 sqrt 2), 1/(2 sqrt 2)).
pub fn feasibility_interval() -> (f64, f64) {
    let half_inv_sqrt2 = 0.5 / std::f64::consts::SQRT_2;
    (0.5 - half_inv_sqrt2, half_inv_sqrt2)
}

fn family_radical(delta1: f64) -> f64 {
    16.0 * delta1.powi(4) - 16.0 * delta1.powi(3) + 2.0 * delta1
}

/// One-parameter family of n=4 sequences canceling the second order and the
/// cross-block part of the third order.
///
/// delta_4 is fixed by the sum constraint; see [`paper_delta4_closed_form`]
/// for the standalone closed form kept as a diagnostic.
pub fn family_n4(delta1: f64, branch: Branch) -> Result<PulseSequence> {
    let (lo, hi) = feasibility_interval();
    if !(delta1 > lo && delta1 < hi) {
        return Err(Error::OutsideFeasibleInterval {
            value: delta1,
            lo,
            hi,
        });
    }
    let arg = family_radical(delta1);
    if arg <= 0.0 {
        return Err(Error::OutsideFeasibleInterval {
            value: delta1,
            lo,
            hi,
        });
    }
    let r = arg.sqrt();
    let sign = match branch {
        Branch::Upper => 1.0,
        Branch::Lower => -1.0,
    };
    let d0 = 0.5 + sign * r / (8.0 * delta1) - delta1 / 2.0;
    let d2 = 1.0 / (8.0 * (1.0 - 2.0 * delta1) * delta1 - sign * 4.0 * r);
    let d3 = 0.5 - delta1;
    let d4 = 1.0 - (d0 + delta1 + d2 + d3);
    let deltas = [d0, delta1, d2, d3, d4];
    for (index, &value) in deltas.iter().enumerate() {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::BranchInfeasible {
                branch: branch.name(),
                index,
                value,
            });
        }
    }
    PulseSequence::new(deltas.to_vec())
}

/// Tries both branches, returning the feasible ones.
pub fn family_n4_feasible(delta1: f64) -> Result<Vec<(Branch, PulseSequence)>> {
    // Propagate interval errors; keep branch-infeasibility as omission.
    let mut out = Vec::new();
    for branch in [Branch::Upper, Branch::Lower] {
        match family_n4(delta1, branch) {
            Ok(seq) => out.push((branch, seq)),
            Err(Error::BranchInfeasible { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Both sign readings of the delta_4 closed form as printed alongside the
/// family. Diagnostic only: neither sign matches the sum-constraint value on
/// the feasible branch (the `-` reading returns its negative), so the sum
/// constraint is authoritative in [`family_n4`].
pub fn paper_delta4_closed_form(delta1: f64) -> (f64, f64) {
    let r = family_radical(delta1).max(0.0).sqrt();
    let denom = 4.0 - 8.0 * delta1;
    (
        (r - (1.0 - 4.0 * delta1 * delta1)) / denom,
        (r + (1.0 - 4.0 * delta1 * delta1)) / denom,
    )
}
