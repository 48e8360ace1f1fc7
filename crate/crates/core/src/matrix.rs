//! Dense complex matrix helpers for small dimensions: commutators, Hermitian
//! exponentials, principal logarithms of unitaries, norms, and block splits.
//!
//! Everything operates on `nalgebra::DMatrix<Complex64>` and is exact to
//! floating precision for the dimensions this crate targets (d <= ~8).

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<C64>;

/// Default entrywise tolerance for Hermiticity/unitarity checks.
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const UNITARY_TOL: f64 = 1e-12;

/// Eigenphases closer than this to +-pi are refused by [`principal_log_unitary`].
pub const BRANCH_MARGIN: f64 = 0.1;

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Max entrywise |M - M^dagger|.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let adj = m.adjoint();
    (m - adj).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Max entrywise |M^dagger M - I|.
pub fn unitarity_defect(m: &CMatrix) -> f64 {
    let prod = m.adjoint() * m;
    let eye = identity(m.nrows());
    (prod - eye).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    hermiticity_defect(m) <= tol
}

pub fn is_unitary(m: &CMatrix, tol: f64) -> bool {
    unitarity_defect(m) <= tol
}

pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Real part of the Frobenius inner product <A, B> = tr(A^dagger B).
pub fn frobenius_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

fn check_same_dim(a: &CMatrix, b: &CMatrix) -> Result<()> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(a.nrows(), b.nrows()));
    }
    Ok(())
}

fn check_hermitian(m: &CMatrix, tol: f64) -> Result<()> {
    let defect = hermiticity_defect(m);
    if defect > tol {
        return Err(Error::NotHermitian { defect, tol });
    }
    Ok(())
}

/// AB - BA.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    check_same_dim(a, b)?;
    Ok(a * b - b * a)
}

/// e^{-i s H} for Hermitian H, via spectral decomposition.
pub fn exp_hermitian_generator(h: &CMatrix, s: f64) -> Result<CMatrix> {
    exp_hermitian_generator_tol(h, s, HERMITIAN_TOL)
}

pub fn exp_hermitian_generator_tol(h: &CMatrix, s: f64, tol: f64) -> Result<CMatrix> {
    check_hermitian(h, tol)?;
    let eig = h.clone().symmetric_eigen();
    let dim = h.nrows();
    let phases = CMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            (-C64::i() * s * eig.eigenvalues[i]).exp()
        } else {
            C64::default()
        }
    });
    Ok(&eig.eigenvectors * phases * eig.eigenvectors.adjoint())
}

/// Hermitian G with eigenvalues in (-pi, pi] such that e^{-iG} = U.
///
/// Refuses eigenphases within `BRANCH_MARGIN` of the +-pi branch cut so a
/// wrapped phase cannot silently corrupt the result.
pub fn principal_log_unitary(u: &CMatrix) -> Result<CMatrix> {
    principal_log_unitary_tol(u, UNITARY_TOL, BRANCH_MARGIN)
}

pub fn principal_log_unitary_tol(u: &CMatrix, tol: f64, branch_margin: f64) -> Result<CMatrix> {
    let defect = unitarity_defect(u);
    if defect > tol {
        return Err(Error::NotUnitary { defect, tol });
    }
    // A unitary matrix is normal, so its Schur form is diagonal up to rounding
    // and the Schur basis is orthonormal.
    let schur = u
        .clone()
        .try_schur(1e-15, 100_000)
        .ok_or(Error::SchurFailed)?;
    let (q, t) = schur.unpack();
    let dim = u.nrows();
    let mut g = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        let phase = -t[(i, i)].arg(); // U_ii = e^{-i theta}
        if phase.abs() > std::f64::consts::PI - branch_margin {
            return Err(Error::BranchCut {
                phase,
                margin: branch_margin,
            });
        }
        g[(i, i)] = C64::new(phase, 0.0);
    }
    let g = &q * g * q.adjoint();
    // Hermitize away the Schur rounding residue.
    Ok((&g + g.adjoint()).map(|z| z * 0.5))
}

/// Index bipartition of a d-dimensional basis into keep and flip subsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bipartition {
    /// flip[i] == true iff basis index i belongs to the flipped subspace.
    flip: Vec<bool>,
}

impl Bipartition {
    pub fn new(dim: usize, flip_indices: &[usize]) -> Result<Self> {
        let mut flip = vec![false; dim];
        for &i in flip_indices {
            if i >= dim {
                return Err(Error::InvalidPartition(format!(
                    "index {i} out of range for dimension {dim}"
                )));
            }
            if flip[i] {
                return Err(Error::InvalidPartition(format!("duplicate index {i}")));
            }
            flip[i] = true;
        }
        let count = flip.iter().filter(|&&b| b).count();
        if count == 0 || count == dim {
            return Err(Error::InvalidPartition(
                "flip set must be a nonempty proper subset".into(),
            ));
        }
        Ok(Self { flip })
    }

    pub fn dim(&self) -> usize {
        self.flip.len()
    }

    pub fn is_flipped(&self, i: usize) -> bool {
        self.flip[i]
    }

    /// True iff (i, j) couples the keep and flip subspaces.
    pub fn crosses(&self, i: usize, j: usize) -> bool {
        self.flip[i] != self.flip[j]
    }
}

/// Splits M into the block-preserving part and the cross-block part.
/// The two parts sum to M exactly.
pub fn block_split(m: &CMatrix, partition: &Bipartition) -> Result<(CMatrix, CMatrix)> {
    if m.nrows() != partition.dim() {
        return Err(Error::DimensionMismatch(m.nrows(), partition.dim()));
    }
    let dim = m.nrows();
    let mut diag = CMatrix::zeros(dim, dim);
    let mut off = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            if partition.crosses(i, j) {
                off[(i, j)] = m[(i, j)];
            } else {
                diag[(i, j)] = m[(i, j)];
            }
        }
    }
    Ok((diag, off))
}

/// Largest |eigenvalue| of a Hermitian matrix.
pub fn spectral_norm_hermitian(h: &CMatrix) -> Result<f64> {
    check_hermitian(h, HERMITIAN_TOL)?;
    let eig = h.clone().symmetric_eigen();
    Ok(eig.eigenvalues.iter().map(|x| x.abs()).fold(0.0, f64::max))
}

/// Random Hermitian matrix with unit spectral norm: complex Gaussian entries,
/// symmetrized, rescaled.
pub fn random_unit_hermitian<R: rand::Rng>(dim: usize, rng: &mut R) -> CMatrix {
    use rand::distributions::Distribution;
    let normal = rand::distributions::Uniform::new(0.0, 1.0);
    // Box-Muller from two uniforms keeps the dependency surface small.
    let gauss = |rng: &mut R| -> f64 {
        let u: f64 = f64::max(normal.sample(rng), f64::MIN_POSITIVE);
        let v: f64 = normal.sample(rng);
        (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
    };
    let m = CMatrix::from_fn(dim, dim, |_, _| C64::new(0.0, 0.0));
    let mut m = m;
    for i in 0..dim {
        for j in 0..dim {
            m[(i, j)] = C64::new(gauss(rng), gauss(rng));
        }
    }
    let h = (&m + m.adjoint()).map(|z| z * 0.5);
    let norm = spectral_norm_hermitian(&h).expect("symmetrized matrix is Hermitian");
    h.map(|z| z / norm)
}

/// Convenience constructor from row-major real/imaginary pairs.
pub fn from_rows(rows: &[Vec<C64>]) -> CMatrix {
    let dim = rows.len();
    CMatrix::from_fn(dim, dim, |i, j| rows[i][j])
}
