//! Exact Magnus terms for piecewise-constant generators and the closed-form
//! scalar order-condition coefficients, cross-validated against each other.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{self, CMatrix};
use crate::sequence::PulseSequence;
use crate::system::PulsePlan;

/// Global normalization relating the third-order scalar coefficients to the
/// ordered-sum value:
///
/// (i/T_f) Omega_3 = THIRD_ORDER_NORMALIZATION * T_f^2 *
///                   (C1 [H,[H_R,H]] + C2 [H_R,[H_R,H]])
///
/// Determined once by the oracle fit and pinned by a regression test.
pub const THIRD_ORDER_NORMALIZATION: f64 = -1.0 / 6.0;

/// Ordered segments (H_j, delta_j) of a piecewise-constant generator,
/// alternating H on even intervals and H_R on odd intervals.
#[derive(Debug, Clone)]
pub struct PiecewiseGenerator {
    segments: Vec<(CMatrix, f64)>,
}

impl PiecewiseGenerator {
    pub fn interleave(h: &CMatrix, plan: &PulsePlan, seq: &PulseSequence) -> Result<Self> {
        let hr = plan.rotated_hamiltonian(h)?;
        let segments = seq
            .deltas()
            .iter()
            .enumerate()
            .map(|(j, &d)| {
                let m = if j % 2 == 0 { h.clone() } else { hr.clone() };
                (m, d)
            })
            .collect();
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[(CMatrix, f64)] {
        &self.segments
    }
}

/// Exact iterated-integral Magnus term of the given order for the
/// piecewise-constant generator A(t) = -i H(t), evaluated at `tf`.
pub fn omega_sum(order: u32, gen: &PiecewiseGenerator, tf: f64) -> Result<CMatrix> {
    if !(tf > 0.0) {
        return Err(Error::NonpositiveTime(tf));
    }
    let segs = gen.segments();
    let dim = segs[0].0.nrows();
    match order {
        1 => {
            let mut acc = CMatrix::zeros(dim, dim);
            for (h, d) in segs {
                acc += h.map(|z| z * *d);
            }
            Ok(acc.map(|z| -C64::i() * tf * z))
        }
        2 => {
            let mut acc = CMatrix::zeros(dim, dim);
            for j in 1..segs.len() {
                for k in 0..j {
                    let comm = matrix::commutator(&segs[j].0, &segs[k].0)?;
                    acc += comm.map(|z| z * (segs[j].1 * segs[k].1));
                }
            }
            Ok(acc.map(|z| z * C64::new(-tf * tf / 2.0, 0.0)))
        }
        3 => {
            let mut acc = CMatrix::zeros(dim, dim);
            for j in 0..segs.len() {
                for k in 0..=j {
                    for l in 0..=k {
                        // Ordered-simplex volume of the (j, k, l) cell.
                        let (dj, dk, dl) = (segs[j].1, segs[k].1, segs[l].1);
                        let w = if j > k && k > l {
                            dj * dk * dl
                        } else if j == k && k > l {
                            dj * dj * dl / 2.0
                        } else if j > k && k == l {
                            dj * dk * dk / 2.0
                        } else {
                            dj * dj * dj / 6.0
                        };
                        let inner = matrix::commutator(&segs[k].0, &segs[l].0)?;
                        let term = matrix::commutator(&segs[j].0, &inner)?;
                        let inner_rev = matrix::commutator(&segs[k].0, &segs[j].0)?;
                        let term_rev = matrix::commutator(&segs[l].0, &inner_rev)?;
                        acc += (term + term_rev).map(|z| z * w);
                    }
                }
            }
            Ok(acc.map(|z| z * C64::i() * (tf * tf * tf / 6.0)))
        }
        other => Err(Error::UnsupportedOrder(other)),
    }
}

/// Effective-Hamiltonian contribution (i/T_f) Omega_k.
pub fn heff_term(order: u32, gen: &PiecewiseGenerator, tf: f64) -> Result<CMatrix> {
    let omega = omega_sum(order, gen, tf)?;
    Ok(omega.map(|z| z * C64::i() / tf))
}

/// Scalar coefficient S of the second-order term:
/// (i/T_f) Omega_2 = (i T_f / 2) S [H, H_R].
///
/// For n=2 this reduces to delta_1 (delta_0 - delta_2).
pub fn second_order_coefficient(seq: &PulseSequence) -> f64 {
    let d = seq.deltas();
    let n = seq.n();
    let mut s = 0.0;
    for j in 1..=n / 2 {
        let even_prefix: f64 = (0..j).map(|k| d[2 * k]).sum();
        let odd_prefix: f64 = (0..j).map(|k| d[2 * k + 1]).sum();
        s += d[2 * j - 1] * even_prefix - d[2 * j] * odd_prefix;
    }
    s
}

/// Scalar coefficients (C1, C2) of the third-order term, multiplying
/// [H,[H_R,H]] and [H_R,[H_R,H]] respectively. Supported for n in {2, 4};
/// for n=2 the trailing fractions are taken as zero.
pub fn third_order_coefficients(seq: &PulseSequence) -> Result<(f64, f64)> {
    let n = seq.n();
    if n != 2 && n != 4 {
        return Err(Error::UnsupportedPulseCount(n));
    }
    let g = |i: usize| if i < seq.deltas().len() { seq.delta(i) } else { 0.0 };
    let (d0, d1, d2, d3, d4) = (g(0), g(1), g(2), g(3), g(4));
    let c1 = -0.5 * (d1 + d3) * (d2 * d2 + d4 * d4 + d0 * d0 - 4.0 * d4 * d0)
        + d1 * d2 * (2.0 * d0 - d4)
        + d2 * d3 * (2.0 * d4 - d0);
    let c2 = 0.5 * (d1 + d3) * (d1 + d3) * (d0 + d2 + d4) - 3.0 * d1 * d2 * d3;
    Ok((c1, c2))
}

/// Comparison of the closed-form coefficients against the ordered-sum terms.
#[derive(Debug, Clone, Serialize)]
pub struct MagnusReport {
    pub s: f64,
    pub c1: f64,
    pub c2: f64,
    /// Fitted third-order normalization; pinned at [`THIRD_ORDER_NORMALIZATION`].
    pub fitted_alpha: f64,
    /// Max relative Frobenius deviation of (i T_f/2) S [H, H_R] from (i/T_f) Omega_2.
    pub max_dev_order2: f64,
    /// Max relative Frobenius deviation of the fitted closed form from (i/T_f) Omega_3.
    pub max_dev_order3: f64,
    /// Commutator ordering that matches the ordered-sum value at second order.
    pub second_order_convention: &'static str,
    pub trials: usize,
    pub seed: u64,
}

fn per_trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Cross-validates the closed-form second- and third-order expressions
/// against the ordered-sum terms over seeded random unit-norm Hermitian
/// Hamiltonians.
pub fn closed_form_vs_oracle(
    seq: &PulseSequence,
    plan: &PulsePlan,
    tf: f64,
    trials: usize,
    seed: u64,
) -> Result<MagnusReport> {
    if trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    let s = second_order_coefficient(seq);
    let (c1, c2) = third_order_coefficients(seq)?;
    let dim = plan.dim();

    let mut max_dev2: f64 = 0.0;
    let mut max_dev3: f64 = 0.0;
    let mut alpha_num = 0.0;
    let mut alpha_den = 0.0;
    let mut basis = Vec::with_capacity(trials);

    for trial in 0..trials {
        let mut rng = per_trial_rng(seed, trial as u64);
        let h = matrix::random_unit_hermitian(dim, &mut rng);
        let hr = plan.rotated_hamiltonian(&h)?;
        let gen = PiecewiseGenerator::interleave(&h, plan, seq)?;

        let heff2 = heff_term(2, &gen, tf)?;
        let comm = matrix::commutator(&h, &hr)?;
        let closed2 = comm.map(|z| z * C64::i() * (tf / 2.0) * s);
        let denom = matrix::frobenius_norm(&heff2).max(1e-300);
        let dev2 = matrix::frobenius_norm(&(heff2 - &closed2));
        max_dev2 = max_dev2.max(if s.abs() > 1e-14 { dev2 / denom } else { dev2 });

        let heff3 = heff_term(3, &gen, tf)?;
        let nested1 = matrix::commutator(&h, &matrix::commutator(&hr, &h)?)?;
        let nested2 = matrix::commutator(&hr, &matrix::commutator(&hr, &h)?)?;
        let b = (nested1.map(|z| z * c1) + nested2.map(|z| z * c2)).map(|z| z * tf * tf);
        alpha_num += matrix::frobenius_inner(&b, &heff3);
        alpha_den += matrix::frobenius_inner(&b, &b);
        basis.push((heff3, b));
    }

    let fitted_alpha = if alpha_den > 0.0 {
        alpha_num / alpha_den
    } else {
        0.0
    };
    for (heff3, b) in &basis {
        let resid = heff3 - b.map(|z| z * fitted_alpha);
        let denom = matrix::frobenius_norm(heff3).max(1e-300);
        max_dev3 = max_dev3.max(matrix::frobenius_norm(&resid) / denom);
    }

    Ok(MagnusReport {
        s,
        c1,
        c2,
        fitted_alpha,
        max_dev_order2: max_dev2,
        max_dev_order3: max_dev3,
        second_order_convention: "[H,H_R]",
        trials,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{block_split, commutator, frobenius_norm, random_unit_hermitian};
    use crate::sequence::{exact_n2, uhrig, PulseSequence};
    use crate::system::{pulse_operator, LevelSystem};

    fn plan3() -> crate::system::PulsePlan {
        pulse_operator(&LevelSystem::new(3).unwrap())
    }

    fn rand_h(seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_unit_hermitian(3, &mut rng)
    }

    #[test]
    fn block_diagonal_h_kills_higher_orders() {
        let plan = plan3();
        let mut h = CMatrix::zeros(3, 3);
        h[(0, 0)] = C64::new(1.0, 0.0);
        h[(1, 2)] = C64::new(0.5, 0.25);
        h[(2, 1)] = C64::new(0.5, -0.25);
        let seq = exact_n2();
        let gen = PiecewiseGenerator::interleave(&h, &plan, &seq).unwrap();
        let o2 = omega_sum(2, &gen, 1.0).unwrap();
        let o3 = omega_sum(3, &gen, 1.0).unwrap();
        assert!(frobenius_norm(&o2) < 1e-14);
        assert!(frobenius_norm(&o3) < 1e-14);
    }

    #[test]
    fn first_order_reproduces_target_for_parity_valid_sequences() {
        let plan = plan3();
        let h = rand_h(2);
        for seq in [exact_n2(), uhrig(4).unwrap()] {
            let gen = PiecewiseGenerator::interleave(&h, &plan, &seq).unwrap();
            let heff1 = heff_term(1, &gen, 0.37).unwrap();
            let ht = plan.target_hamiltonian(&h).unwrap();
            assert!(frobenius_norm(&(heff1 - ht)) < 1e-12);
        }
    }

    #[test]
    fn second_order_n2_closed_form() {
        let plan = plan3();
        let h = rand_h(4);
        let hr = plan.rotated_hamiltonian(&h).unwrap();
        let seq = PulseSequence::new(vec![0.3, 0.5, 0.2]).unwrap();
        let tf = 0.7;
        let gen = PiecewiseGenerator::interleave(&h, &plan, &seq).unwrap();
        let heff2 = heff_term(2, &gen, tf).unwrap();
        // delta_1 (delta_0 - delta_2) = 0.05
        let closed = commutator(&h, &hr)
            .unwrap()
            .map(|z| z * C64::i() * (tf / 2.0) * 0.05);
        let rel = frobenius_norm(&(heff2.clone() - closed)) / frobenius_norm(&heff2);
        assert!(rel < 1e-12);
    }

    #[test]
    fn single_segment_first_order() {
        // A lone segment is exercised through a generator built by hand.
        let h = rand_h(6);
        let gen = PiecewiseGenerator {
            segments: vec![(h.clone(), 1.0)],
        };
        let tf = 1.3;
        let o1 = omega_sum(1, &gen, tf).unwrap();
        let expected = h.map(|z| -C64::i() * tf * z);
        assert!(frobenius_norm(&(o1 - expected)) < 1e-14);
    }

    #[test]
    fn unsupported_order_rejected() {
        let plan = plan3();
        let gen = PiecewiseGenerator::interleave(&rand_h(1), &plan, &exact_n2()).unwrap();
        assert!(matches!(
            omega_sum(4, &gen, 1.0),
            Err(Error::UnsupportedOrder(4))
        ));
    }

    #[test]
    fn coefficient_examples() {
        assert!((second_order_coefficient(&exact_n2())).abs() < 1e-15);
        let seq = PulseSequence::new(vec![0.3, 0.5, 0.2]).unwrap();
        assert!((second_order_coefficient(&seq) - 0.05).abs() < 1e-15);
        assert!(second_order_coefficient(&uhrig(4).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn third_order_exact_n2() {
        let (c1, c2) = third_order_coefficients(&exact_n2()).unwrap();
        assert!((c1 - 1.0 / 32.0).abs() < 1e-15);
        assert!((c2 - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn third_order_uhrig4() {
        let (c1, c2) = third_order_coefficients(&uhrig(4).unwrap()).unwrap();
        let expected = (7.0 - 3.0 * 5f64.sqrt()) / 64.0;
        assert!((c2 - expected).abs() < 1e-12);
        assert!((c1 + c2).abs() < 1e-15);
    }

    #[test]
    fn third_order_unsupported_n() {
        let seq = uhrig(6).unwrap();
        assert!(matches!(
            third_order_coefficients(&seq),
            Err(Error::UnsupportedPulseCount(6))
        ));
    }

    #[test]
    fn heff_terms_are_hermitian() {
        let plan = plan3();
        let gen = PiecewiseGenerator::interleave(&rand_h(8), &plan, &exact_n2()).unwrap();
        for order in 1..=3 {
            let heff = heff_term(order, &gen, 0.5).unwrap();
            assert!(matrix::is_hermitian(&heff, 1e-10), "order {order}");
        }
    }

    #[test]
    fn heff_scaling_in_tf() {
        let plan = plan3();
        let seq = PulseSequence::new(vec![0.3, 0.5, 0.2]).unwrap();
        let gen = PiecewiseGenerator::interleave(&rand_h(12), &plan, &seq).unwrap();
        let (t1, t2) = (0.2, 0.4);
        let ratio2 = frobenius_norm(&heff_term(2, &gen, t2).unwrap())
            / frobenius_norm(&heff_term(2, &gen, t1).unwrap());
        assert!((ratio2 - 2.0).abs() < 1e-10);
        let ratio3 = frobenius_norm(&heff_term(3, &gen, t2).unwrap())
            / frobenius_norm(&heff_term(3, &gen, t1).unwrap());
        assert!((ratio3 - 4.0).abs() < 1e-10);
    }

    #[test]
    fn nested_commutators_share_cross_block_part() {
        let plan = plan3();
        let h = rand_h(21);
        let hr = plan.rotated_hamiltonian(&h).unwrap();
        let ht = plan.target_hamiltonian(&h).unwrap();
        let inner = commutator(&hr, &h).unwrap();
        let part = plan.partition();
        let (_, cross1) = block_split(&commutator(&h, &inner).unwrap(), &part).unwrap();
        let (_, cross2) = block_split(&commutator(&hr, &inner).unwrap(), &part).unwrap();
        let (_, cross_t) = block_split(&commutator(&ht, &inner).unwrap(), &part).unwrap();
        assert!(frobenius_norm(&(cross1.clone() - &cross_t)) < 1e-12);
        assert!(frobenius_norm(&(cross2 - cross_t)) < 1e-12);
        let _ = cross1;
    }

    #[test]
    fn oracle_second_order_agreement() {
        let plan = plan3();
        let seq = PulseSequence::new(vec![0.3, 0.5, 0.2]).unwrap();
        let report = closed_form_vs_oracle(&seq, &plan, 0.3, 20, 99).unwrap();
        assert!(report.max_dev_order2 <= 1e-10);
    }

    #[test]
    fn oracle_third_order_alpha() {
        let plan = plan3();
        let seq = exact_n2();
        let report = closed_form_vs_oracle(&seq, &plan, 0.3, 20, 123).unwrap();
        assert!((report.fitted_alpha - THIRD_ORDER_NORMALIZATION).abs() < 1e-10);
        assert!(report.max_dev_order3 <= 1e-10);
    }

    #[test]
    fn oracle_uhrig4_third_order_cross_block_vanishes() {
        let plan = plan3();
        let seq = uhrig(4).unwrap();
        let h = rand_h(31);
        let tf = 0.4;
        let gen = PiecewiseGenerator::interleave(&h, &plan, &seq).unwrap();
        let heff3 = heff_term(3, &gen, tf).unwrap();
        let (_, cross) = block_split(&heff3, &plan.partition()).unwrap();
        let bound = 1e-12 * tf * tf * frobenius_norm(&h).powi(3);
        assert!(frobenius_norm(&cross) <= bound);
    }

    #[test]
    fn oracle_block_diagonal_h_zero_deviation() {
        let plan = plan3();
        let mut h = CMatrix::zeros(3, 3);
        h[(1, 2)] = C64::new(1.0, 0.0);
        h[(2, 1)] = C64::new(1.0, 0.0);
        let seq = exact_n2();
        let gen = PiecewiseGenerator::interleave(&h, &plan, &seq).unwrap();
        // H_R = H: all segments commute.
        for order in 2..=3 {
            assert!(frobenius_norm(&omega_sum(order, &gen, 1.0).unwrap()) < 1e-14);
        }
    }
}
