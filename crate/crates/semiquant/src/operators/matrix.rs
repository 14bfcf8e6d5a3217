//! Dense operator matrices and Hermitian spectral data.

use crate::{CMatrix, Error, Result, C64};
use nalgebra::SymmetricEigen;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Toeplitz,
    CovariantDerivative,
    KostantSouriau,
    Evolution,
    Pullback,
    Transport,
    Other,
}

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const UNITARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub matrix: CMatrix,
    pub hermitian: bool,
    pub unitary: bool,
    pub kind: OperatorKind,
}

impl OperatorMatrix {
    /// Wraps `matrix`, setting the flags from measured defects.
    pub fn new(matrix: CMatrix, kind: OperatorKind) -> Self {
        let hermitian = matrix.is_square() && hermitian_defect(&matrix) <= HERMITIAN_TOL;
        let unitary = matrix.is_square() && unitary_defect(&matrix) <= UNITARY_TOL;
        Self { matrix, hermitian, unitary, kind }
    }

    pub fn identity(dim: usize, kind: OperatorKind) -> Self {
        Self::new(CMatrix::identity(dim, dim), kind)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(&self.matrix)
    }

    pub fn unitary_defect(&self) -> f64 {
        unitary_defect(&self.matrix)
    }

    /// Eigendecomposition of the Hermitian part; refuses matrices whose
    /// anti-Hermitian part exceeds [`HERMITIAN_TOL`].
    pub fn spectral(&self) -> Result<SpectralData> {
        let d = self.hermitian_defect();
        if d > HERMITIAN_TOL {
            return Err(Error::InvalidInput(format!("matrix is not Hermitian (defect {d:.3e})")));
        }
        Ok(SpectralData::from_hermitian(&self.matrix))
    }
}

/// `‖M - M†‖₂`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    op_norm(&(m - m.adjoint()))
}

/// `‖M†M - Id‖₂`.
pub fn unitary_defect(m: &CMatrix) -> f64 {
    let n = m.ncols();
    op_norm(&(m.adjoint() * m - CMatrix::identity(n, n)))
}

/// Spectral norm.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Eigenvalues in ascending order with orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl SpectralData {
    pub fn from_hermitian(m: &CMatrix) -> Self {
        let n = m.nrows();
        if n == 0 {
            return Self { values: Vec::new(), vectors: CMatrix::zeros(0, 0) };
        }
        let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Self { values, vectors }
    }

    /// Already diagonal operator with the given (sorted on return) entries.
    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let vectors = CMatrix::from_fn(n, n, |r, c| if r == order[c] { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
        Self { values: order.iter().map(|&i| values[i]).collect(), vectors }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `V h(Λ) V†`.
    pub fn apply_fn<F: Fn(f64) -> C64>(&self, h: F) -> CMatrix {
        let mut left = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            let v = h(l);
            for x in left.column_mut(j).iter_mut() {
                *x *= v;
            }
        }
        left * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.apply_fn(C64::from)
    }

    pub fn reconstruction_error(&self, m: &CMatrix) -> f64 {
        op_norm(&(m - self.reconstruct()))
    }

    pub fn orthonormality_error(&self) -> f64 {
        unitary_defect(&self.vectors)
    }

    /// `Σ_k h(λ_k)`.
    pub fn trace_fn<F: Fn(f64) -> C64>(&self, h: F) -> C64 {
        self.values.iter().map(|&l| h(l)).sum()
    }
}

/// Eigenvalues of `A_1 ⊗ I ⊗ ... + ... + I ⊗ ... ⊗ A_s` from the factor
/// spectra, in flat (last factor fastest) order.
pub fn kronecker_sum_values(factors: &[&[f64]]) -> Vec<f64> {
    let mut out = vec![0.0];
    for vals in factors {
        let mut next = Vec::with_capacity(out.len() * vals.len());
        for a in &out {
            for b in vals.iter() {
                next.push(a + b);
            }
        }
        out = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = CMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    }

    #[test]
    fn spectral_reconstruction() {
        let m = random_hermitian(30, 1);
        let op = OperatorMatrix::new(m.clone(), OperatorKind::Other);
        assert!(op.hermitian);
        let s = op.spectral().unwrap();
        assert!(s.values.windows(2).all(|w| w[0] <= w[1]));
        assert!(s.reconstruction_error(&m) < 1e-10);
        assert!(s.orthonormality_error() < 1e-11);
    }

    #[test]
    fn non_hermitian_is_refused() {
        let mut m = random_hermitian(4, 2);
        m[(0, 1)] += C64::new(0.1, 0.0);
        let op = OperatorMatrix::new(m, OperatorKind::Other);
        assert!(!op.hermitian);
        assert!(op.spectral().is_err());
    }

    #[test]
    fn kronecker_sum_matches_dense() {
        let a = [0.0, 1.0, 3.0];
        let b = [-1.0, 0.5];
        let vals = kronecker_sum_values(&[&a, &b]);
        assert_eq!(vals, vec![-1.0, 0.5, 0.0, 1.5, 2.0, 3.5]);
    }

    #[test]
    fn diagonal_spectral_data() {
        let s = SpectralData::diagonal(&[2.0, -1.0, 0.5]);
        assert_eq!(s.values, vec![-1.0, 0.5, 2.0]);
        let m = s.reconstruct();
        assert!((m[(0, 0)] - 2.0).norm() < 1e-15 && (m[(1, 1)] + 1.0).norm() < 1e-15);
    }
}
