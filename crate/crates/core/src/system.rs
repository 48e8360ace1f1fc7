//! Level system, decoupling bipartition, the ideal 2pi pulse operator, and the
//! decomposition of a Hamiltonian into target and unwanted-coupling parts.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::matrix::{self, Bipartition, CMatrix};

/// A d-level system with a chosen keep/flip bipartition of its logic basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelSystem {
    dim: usize,
    labels: Vec<String>,
    flip_set: Vec<usize>,
}

fn default_labels(dim: usize) -> Vec<String> {
    let base = ["g", "e", "f"];
    (0..dim)
        .map(|i| {
            if i < base.len() {
                base[i].to_string()
            } else {
                format!("l{i}")
            }
        })
        .collect()
}

impl LevelSystem {
    /// Default system: basis g, e, f, ... with the 2pi pulse acting on {e, f}.
    pub fn new(dim: usize) -> Result<Self> {
        Self::with_flip_set(dim, vec![1, 2])
    }

    pub fn with_flip_set(dim: usize, flip_set: Vec<usize>) -> Result<Self> {
        Self::with_labels(dim, default_labels(dim), flip_set)
    }

    pub fn with_labels(dim: usize, labels: Vec<String>, mut flip_set: Vec<usize>) -> Result<Self> {
        if dim < 3 {
            return Err(Error::InvalidSystem(format!(
                "dimension must be >= 3, got {dim}"
            )));
        }
        if labels.len() != dim {
            return Err(Error::InvalidSystem(format!(
                "{} labels for dimension {dim}",
                labels.len()
            )));
        }
        for (i, a) in labels.iter().enumerate() {
            if labels[..i].contains(a) {
                return Err(Error::InvalidSystem(format!("duplicate label {a:?}")));
            }
        }
        flip_set.sort_unstable();
        // Bipartition validates emptiness, range, and duplicates.
        Bipartition::new(dim, &flip_set).map_err(|e| Error::InvalidSystem(e.to_string()))?;
        Ok(Self {
            dim,
            labels,
            flip_set,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn flip_set(&self) -> &[usize] {
        &self.flip_set
    }

    pub fn partition(&self) -> Bipartition {
        Bipartition::new(self.dim, &self.flip_set).expect("validated at construction")
    }
}

/// The system together with its pulse unitary R = Pi_keep - Pi_flip.
///
/// R is diagonal +-1 in the logic basis: any SU(2) generator on the flip
/// subspace exponentiates to the same -1 phase, so no generator is stored.
#[derive(Debug, Clone)]
pub struct PulsePlan {
    system: LevelSystem,
    pulse: CMatrix,
}

/// Builds the ideal instantaneous 2pi pulse for the system's flip subspace.
pub fn pulse_operator(system: &LevelSystem) -> PulsePlan {
    let system = system.clone();
    let partition = system.partition();
    let dim = system.dim();
    let pulse = CMatrix::from_fn(dim, dim, |i, j| {
        if i != j {
            C64::new(0.0, 0.0)
        } else if partition.is_flipped(i) {
            C64::new(-1.0, 0.0)
        } else {
            C64::new(1.0, 0.0)
        }
    });
    PulsePlan { system, pulse }
}

impl PulsePlan {
    pub fn system(&self) -> &LevelSystem {
        &self.system
    }

    pub fn pulse(&self) -> &CMatrix {
        &self.pulse
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn partition(&self) -> Bipartition {
        self.system.partition()
    }

    fn check_input(&self, h: &CMatrix) -> Result<()> {
        if h.nrows() != self.dim() {
            return Err(Error::DimensionMismatch(h.nrows(), self.dim()));
        }
        let defect = matrix::hermiticity_defect(h);
        if defect > matrix::HERMITIAN_TOL {
            return Err(Error::NotHermitian {
                defect,
                tol: matrix::HERMITIAN_TOL,
            });
        }
        Ok(())
    }

    /// H_R = R H R: cross-block entries sign-flipped, block entries unchanged.
    pub fn rotated_hamiltonian(&self, h: &CMatrix) -> Result<CMatrix> {
        self.check_input(h)?;
        Ok(&self.pulse * h * &self.pulse)
    }

    /// H_T = (H + H_R)/2, the block-diagonal target.
    pub fn target_hamiltonian(&self, h: &CMatrix) -> Result<CMatrix> {
        let hr = self.rotated_hamiltonian(h)?;
        Ok((h + hr).map(|z| z * 0.5))
    }

    /// (H_T, H_V) with H_T + H_V = H; H_V = (H - H_R)/2 is the coupling to suppress.
    pub fn coupling_decomposition(&self, h: &CMatrix) -> Result<(CMatrix, CMatrix)> {
        let hr = self.rotated_hamiltonian(h)?;
        let ht = (h + &hr).map(|z| z * 0.5);
        let hv = (h - hr).map(|z| z * 0.5);
        Ok((ht, hv))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{
        block_split, commutator, exp_hermitian_generator, frobenius_norm, random_unit_hermitian,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// 3x3 example with H_ge = 1, H_gf = 2i, H_ef = 3, zero diagonal.
    fn example_h() -> CMatrix {
        let mut h = CMatrix::zeros(3, 3);
        h[(0, 1)] = c(1.0, 0.0);
        h[(1, 0)] = c(1.0, 0.0);
        h[(0, 2)] = c(0.0, 2.0);
        h[(2, 0)] = c(0.0, -2.0);
        h[(1, 2)] = c(3.0, 0.0);
        h[(2, 1)] = c(3.0, 0.0);
        h
    }

    #[test]
    fn pulse_is_diagonal_sign_pattern() {
        let sys = LevelSystem::new(3).unwrap();
        let plan = pulse_operator(&sys);
        let r = plan.pulse();
        for (i, expected) in [1.0, -1.0, -1.0].iter().enumerate() {
            assert_eq!(r[(i, i)], c(*expected, 0.0));
        }
    }

    #[test]
    fn pulse_d4_flip_23() {
        let sys = LevelSystem::with_flip_set(4, vec![2, 3]).unwrap();
        let plan = pulse_operator(&sys);
        for (i, expected) in [1.0, 1.0, -1.0, -1.0].iter().enumerate() {
            assert_eq!(plan.pulse()[(i, i)], c(*expected, 0.0));
        }
    }

    #[test]
    fn pulse_matches_exponentiated_su2_generator() {
        // sigma_x on span{e, f} embedded in 3x3, exponentiated at angle pi.
        let mut sx = CMatrix::zeros(3, 3);
        sx[(1, 2)] = c(1.0, 0.0);
        sx[(2, 1)] = c(1.0, 0.0);
        let u = exp_hermitian_generator(&sx, std::f64::consts::PI).unwrap();
        let sys = LevelSystem::new(3).unwrap();
        let plan = pulse_operator(&sys);
        assert!(frobenius_norm(&(u - plan.pulse())) < 1e-12);
    }

    #[test]
    fn pulse_is_hermitian_unitary_involutory() {
        let sys = LevelSystem::with_flip_set(5, vec![0, 3]).unwrap();
        let plan = pulse_operator(&sys);
        let r = plan.pulse();
        assert!(matrix::is_hermitian(r, 1e-12));
        assert!(matrix::is_unitary(r, 1e-12));
        let r2 = r * r;
        assert!(frobenius_norm(&(r2 - matrix::identity(5))) < 1e-12);
    }

    #[test]
    fn rotated_hamiltonian_sign_pattern() {
        let sys = LevelSystem::new(3).unwrap();
        let plan = pulse_operator(&sys);
        let hr = plan.rotated_hamiltonian(&example_h()).unwrap();
        assert_eq!(hr[(0, 1)], c(-1.0, 0.0));
        assert_eq!(hr[(0, 2)], c(0.0, -2.0));
        assert_eq!(hr[(1, 2)], c(3.0, 0.0));
    }

    #[test]
    fn rotation_fixes_diagonal_and_is_involutory() {
        let sys = LevelSystem::new(3).unwrap();
        let plan = pulse_operator(&sys);
        let h = CMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                c(i as f64, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let hr = plan.rotated_hamiltonian(&h).unwrap();
        assert!(frobenius_norm(&(hr - &h)) < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_unit_hermitian(3, &mut rng);
        let twice = plan
            .rotated_hamiltonian(&plan.rotated_hamiltonian(&h).unwrap())
            .unwrap();
        assert!(frobenius_norm(&(twice - h)) < 1e-14);
    }

    #[test]
    fn target_examples() {
        let sys = LevelSystem::new(3).unwrap();
        let plan = pulse_operator(&sys);

        // Block-diagonal H is fixed.
        let mut hb = CMatrix::zeros(3, 3);
        hb[(0, 0)] = c(1.0, 0.0);
        hb[(1, 2)] = c(0.5, 0.5);
        hb[(2, 1)] = c(0.5, -0.5);
        let ht = plan.target_hamiltonian(&hb).unwrap();
        assert!(frobenius_norm(&(ht - &hb)) < 1e-15);

        // Purely cross-block H averages to zero.
        let mut hv = CMatrix::zeros(3, 3);
        hv[(0, 1)] = c(1.0, 0.0);
        hv[(1, 0)] = c(1.0, 0.0);
        let ht = plan.target_hamiltonian(&hv).unwrap();
        assert!(frobenius_norm(&ht) < 1e-15);

        // The 3x3 example keeps only its e-f entry.
        let ht = plan.target_hamiltonian(&example_h()).unwrap();
        assert_eq!(ht[(1, 2)], c(3.0, 0.0));
        assert_eq!(ht[(0, 1)], c(0.0, 0.0));
        assert_eq!(ht[(0, 2)], c(0.0, 0.0));
    }

    #[test]
    fn target_matches_block_split_and_is_projection() {
        let sys = LevelSystem::new(3).unwrap();
        let plan = pulse_operator(&sys);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let h = random_unit_hermitian(3, &mut rng);
        let ht = plan.target_hamiltonian(&h).unwrap();
        let (diag, _) = block_split(&h, &plan.partition()).unwrap();
        assert!(frobenius_norm(&(ht.clone() - diag)) < 1e-15);
        let ht2 = plan.target_hamiltonian(&ht).unwrap();
        assert!(frobenius_norm(&(ht2 - ht)) < 1e-15);
    }

    #[test]
    fn decomposition_examples() {
        let sys = LevelSystem::new(3).unwrap();
        let plan = pulse_operator(&sys);

        let hd = CMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                c(1.0 + i as f64, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let (ht, hv) = plan.coupling_decomposition(&hd).unwrap();
        assert!(frobenius_norm(&(ht - &hd)) < 1e-15);
        assert!(frobenius_norm(&hv) < 1e-15);

        let (_, hv) = plan.coupling_decomposition(&example_h()).unwrap();
        assert_eq!(hv[(0, 1)], c(1.0, 0.0));
        assert_eq!(hv[(0, 2)], c(0.0, 2.0));
        assert_eq!(hv[(1, 2)], c(0.0, 0.0));
    }

    #[test]
    fn decomposition_pythagoras_and_exactness() {
        let sys = LevelSystem::new(3).unwrap();
        let plan = pulse_operator(&sys);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let h = random_unit_hermitian(3, &mut rng);
            let (ht, hv) = plan.coupling_decomposition(&h).unwrap();
            assert!(frobenius_norm(&(&ht + &hv - &h)) < 1e-15);
            let lhs = frobenius_norm(&ht).powi(2) + frobenius_norm(&hv).powi(2);
            let rhs = frobenius_norm(&h).powi(2);
            assert!((lhs - rhs).abs() / rhs < 1e-12);
        }
    }

    #[test]
    fn h_hr_commutator_is_cross_block() {
        let sys = LevelSystem::new(3).unwrap();
        let plan = pulse_operator(&sys);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let h = random_unit_hermitian(3, &mut rng);
            let hr = plan.rotated_hamiltonian(&h).unwrap();
            let comm = commutator(&h, &hr).unwrap();
            let (diag, _) = block_split(&comm, &plan.partition()).unwrap();
            assert!(frobenius_norm(&diag) <= 1e-12 * frobenius_norm(&h).powi(2));
        }
    }

    #[test]
    fn rotation_preserves_spectrum() {
        let sys = LevelSystem::new(3).unwrap();
        let plan = pulse_operator(&sys);
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let h = random_unit_hermitian(3, &mut rng);
        let hr = plan.rotated_hamiltonian(&h).unwrap();
        let mut ev_h: Vec<f64> = h.symmetric_eigen().eigenvalues.iter().copied().collect();
        let mut ev_hr: Vec<f64> = hr.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev_h.sort_by(f64::total_cmp);
        ev_hr.sort_by(f64::total_cmp);
        for (a, b) in ev_h.iter().zip(&ev_hr) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn invalid_systems_rejected() {
        assert!(LevelSystem::new(2).is_err());
        assert!(LevelSystem::with_flip_set(3, vec![]).is_err());
        assert!(LevelSystem::with_flip_set(3, vec![0, 1, 2]).is_err());
        assert!(LevelSystem::with_labels(
            3,
            vec!["a".into(), "a".into(), "b".into()],
            vec![1, 2]
        )
        .is_err());
    }
}
