//! Exact sequence propagation, effective-Hamiltonian extraction, residual
//! metrics, and evolution-time scaling studies. This is the ground-truth
//! check for everything the Magnus layer predicts.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{self, CMatrix};
use crate::sequence::PulseSequence;
use crate::system::PulsePlan;

/// Residuals fall below this multiple of ||H||_F are treated as floating
/// noise and excluded from scaling fits.
pub const NOISE_FLOOR: f64 = 1e-13;

/// Exact propagator: right-to-left product of free segments e^{-iH tau_i}
/// interleaved with the pulse R.
pub fn exact_propagator(
    h: &CMatrix,
    plan: &PulsePlan,
    seq: &PulseSequence,
    tf: f64,
) -> Result<CMatrix> {
    if !(tf > 0.0) {
        return Err(Error::NonpositiveTime(tf));
    }
    let r = plan.pulse();
    let mut u = matrix::identity(plan.dim());
    for (j, &d) in seq.deltas().iter().enumerate() {
        if j > 0 {
            u = r * u;
        }
        u = matrix::exp_hermitian_generator(h, d * tf)? * u;
    }
    Ok(u)
}

/// Same propagator built from rotated segments: e^{-iH tau_even} and
/// e^{-iH_R tau_odd} with no explicit pulses. Agrees with
/// [`exact_propagator`] because R^2 = I and R e^{-iH tau} R = e^{-iH_R tau}.
pub fn propagator_rotated_segments(
    h: &CMatrix,
    plan: &PulsePlan,
    seq: &PulseSequence,
    tf: f64,
) -> Result<CMatrix> {
    if !(tf > 0.0) {
        return Err(Error::NonpositiveTime(tf));
    }
    let hr = plan.rotated_hamiltonian(h)?;
    let mut u = matrix::identity(plan.dim());
    for (j, &d) in seq.deltas().iter().enumerate() {
        let seg = if j % 2 == 0 { h } else { &hr };
        u = matrix::exp_hermitian_generator(seg, d * tf)? * u;
    }
    Ok(u)
}

/// H_eff = G/T_f where e^{-iG} = U with eigenphases on the principal branch.
pub fn effective_hamiltonian(u: &CMatrix, tf: f64) -> Result<CMatrix> {
    if !(tf > 0.0) {
        return Err(Error::NonpositiveTime(tf));
    }
    let g = matrix::principal_log_unitary(u)?;
    Ok(g.map(|z| z / tf))
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualMetrics {
    /// Frobenius norm of the cross-block part of H_eff.
    pub unwanted_residual: f64,
    /// Frobenius norm of the block-diagonal part of H_eff - H_T.
    pub wanted_deviation: f64,
    /// |(H_eff)_ef - H_ef| for 3-level systems: the coupling that must survive.
    pub preserved_coupling_deviation: Option<f64>,
}

pub fn residual_metrics(h_eff: &CMatrix, h: &CMatrix, plan: &PulsePlan) -> Result<ResidualMetrics> {
    if h_eff.nrows() != h.nrows() {
        return Err(Error::DimensionMismatch(h_eff.nrows(), h.nrows()));
    }
    let partition = plan.partition();
    let ht = plan.target_hamiltonian(h)?;
    let (diag_eff, cross_eff) = matrix::block_split(h_eff, &partition)?;
    let unwanted_residual = matrix::frobenius_norm(&cross_eff);
    let wanted_deviation = matrix::frobenius_norm(&(diag_eff - ht));
    let preserved_coupling_deviation = if plan.dim() == 3 {
        Some((h_eff[(1, 2)] - h[(1, 2)]).norm())
    } else {
        None
    };
    Ok(ResidualMetrics {
        unwanted_residual,
        wanted_deviation,
        preserved_coupling_deviation,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub tf: f64,
    #[serde(skip)]
    pub propagator: CMatrix,
    #[serde(skip)]
    pub h_eff: CMatrix,
    pub unwanted_residual: f64,
    pub wanted_deviation: f64,
    pub preserved_coupling_deviation: Option<f64>,
}

fn check_branch_safe(h: &CMatrix, tf: f64) -> Result<()> {
    let norm = matrix::spectral_norm_hermitian(h)?;
    let max_tf = std::f64::consts::FRAC_PI_2 / norm;
    if tf >= max_tf {
        return Err(Error::TimeTooLarge { tf, max_tf });
    }
    Ok(())
}

/// Full pipeline: exact propagator, principal-log extraction, metrics.
/// Requires tf * ||H|| < pi/2 so the principal log is branch-safe.
pub fn evaluate(
    h: &CMatrix,
    plan: &PulsePlan,
    seq: &PulseSequence,
    tf: f64,
) -> Result<EvaluationReport> {
    check_branch_safe(h, tf)?;
    let u = exact_propagator(h, plan, seq, tf)?;
    let h_eff = effective_hamiltonian(&u, tf)?;
    let metrics = residual_metrics(&h_eff, h, plan)?;
    Ok(EvaluationReport {
        tf,
        propagator: u,
        h_eff,
        unwanted_residual: metrics.unwanted_residual,
        wanted_deviation: metrics.wanted_deviation,
        preserved_coupling_deviation: metrics.preserved_coupling_deviation,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingFit {
    /// (tf, unwanted_residual, wanted_deviation) per grid point, tf increasing.
    pub grid: Vec<(f64, f64, f64)>,
    pub slope_unwanted: f64,
    pub slope_wanted: f64,
    /// Points excluded from either fit as below the noise floor.
    pub excluded: usize,
}

fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Evaluates residual metrics on a log-spaced evolution-time grid and fits
/// log(residual) against log(tf) by least squares, excluding points below
/// the floating noise floor.
pub fn scaling_study(
    h: &CMatrix,
    plan: &PulsePlan,
    seq: &PulseSequence,
    tf_min: f64,
    tf_max: f64,
    points: usize,
) -> Result<ScalingFit> {
    if !(tf_min > 0.0) {
        return Err(Error::NonpositiveTime(tf_min));
    }
    if tf_max <= tf_min {
        return Err(Error::Config(format!(
            "tf_max = {tf_max} must exceed tf_min = {tf_min}"
        )));
    }
    if points < 5 {
        return Err(Error::Config("scaling grid needs at least 5 points".into()));
    }
    let floor = NOISE_FLOOR * matrix::frobenius_norm(h);
    let ratio = (tf_max / tf_min).ln() / (points as f64 - 1.0);
    let mut grid = Vec::with_capacity(points);
    for i in 0..points {
        let tf = tf_min * (ratio * i as f64).exp();
        let report = evaluate(h, plan, seq, tf)?;
        grid.push((tf, report.unwanted_residual, report.wanted_deviation));
    }

    let usable_unwanted: Vec<(f64, f64)> = grid
        .iter()
        .filter(|&&(_, r, _)| r > floor)
        .map(|&(tf, r, _)| (tf, r))
        .collect();
    let usable_wanted: Vec<(f64, f64)> = grid
        .iter()
        .filter(|&&(_, _, w)| w > floor)
        .map(|&(tf, _, w)| (tf, w))
        .collect();
    let excluded = 2 * grid.len() - usable_unwanted.len() - usable_wanted.len();
    if usable_unwanted.len() < 3 || usable_wanted.len() < 3 {
        return Err(Error::FitUnderdetermined {
            usable: usable_unwanted.len().min(usable_wanted.len()),
            total: grid.len(),
        });
    }
    Ok(ScalingFit {
        slope_unwanted: log_log_slope(&usable_unwanted),
        slope_wanted: log_log_slope(&usable_wanted),
        excluded,
        grid,
    })
}
