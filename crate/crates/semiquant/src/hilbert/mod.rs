//! Quantum state spaces: quadrature grids, monomial bases, sampled sections,
//! Bergman projection, Schwartz kernels and coherent states.
//!
//! Sections are sampled in the unitary frame of the affine chart (see
//! [`basis`]); the L² product is then the plain quadrature sum
//! `Σ w ŝ_1 conj(ŝ_2)`.

pub mod basis;
pub mod grid;

pub use basis::QuantumBasis;
pub use grid::{beta_moment, QuadratureGrid};

use crate::phase_space::{ChartPoint, ModelGeometry};
use crate::{CMatrix, CVector, Error, Result, C64};
use rayon::prelude::*;

pub fn build_grid(geom: &ModelGeometry, degree: usize) -> QuadratureGrid {
    QuadratureGrid::new(geom.factors(), degree)
}

pub fn build_basis(geom: &ModelGeometry, p: i64) -> QuantumBasis {
    QuantumBasis::new(geom, p)
}

/// Section of `O(p + m)` sampled at every node of a grid.
#[derive(Debug, Clone)]
pub struct SectionGrid {
    pub p: i64,
    pub twists: Vec<i32>,
    pub grid: QuadratureGrid,
    pub values: Vec<C64>,
}

impl SectionGrid {
    pub fn from_fn<F: Fn(&ChartPoint) -> C64 + Sync>(grid: &QuadratureGrid, p: i64, twists: &[i32], f: F) -> Self {
        let values = (0..grid.len()).into_par_iter().map(|i| f(&grid.node(i))).collect();
        Self { p, twists: twists.to_vec(), grid: grid.clone(), values }
    }

    /// Samples `Σ_k c_k ê_k`.
    pub fn from_coefficients(basis: &QuantumBasis, grid: &QuadratureGrid, coeffs: &CVector) -> Self {
        let tables = basis.tables(grid);
        let values = mode_apply_all(coeffs.as_slice(), &basis.factor_dims(), &tables);
        Self { p: basis.p(), twists: basis.twists().to_vec(), grid: grid.clone(), values }
    }

    pub fn zeros(grid: &QuadratureGrid, p: i64, twists: &[i32]) -> Self {
        Self { p, twists: twists.to_vec(), grid: grid.clone(), values: vec![C64::new(0.0, 0.0); grid.len()] }
    }

    /// Pointwise Hermitian norms.
    pub fn pointwise_norms(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    fn compatible(&self, other: &SectionGrid) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Mismatch("sections sampled on different grids".into()));
        }
        if self.p != other.p || self.twists != other.twists {
            return Err(Error::Mismatch("sections of different line bundles".into()));
        }
        Ok(())
    }
}

/// Applies one matrix per tensor mode: `out[n] = Σ_k in[k] Π_i m_i[n_i, k_i]`.
/// Tensors are flattened with the last mode fastest.
pub(crate) fn mode_apply_all(data: &[C64], shape: &[usize], mats: &[CMatrix]) -> Vec<C64> {
    let mut cur = data.to_vec();
    let mut shape = shape.to_vec();
    for (mode, m) in mats.iter().enumerate() {
        cur = mode_apply(&cur, &shape, mode, m);
        shape[mode] = m.nrows();
    }
    cur
}

pub(crate) fn mode_apply(data: &[C64], shape: &[usize], mode: usize, m: &CMatrix) -> Vec<C64> {
    let pre: usize = shape[..mode].iter().product();
    let post: usize = shape[mode + 1..].iter().product();
    let (n_out, n_in) = (m.nrows(), m.ncols());
    debug_assert_eq!(n_in, shape[mode]);
    let mut out = vec![C64::new(0.0, 0.0); pre * n_out * post];
    out.par_chunks_mut(n_out * post).enumerate().for_each(|(a, block)| {
        for i in 0..n_in {
            let src = &data[(a * n_in + i) * post..(a * n_in + i + 1) * post];
            for o in 0..n_out {
                let c = m[(o, i)];
                if c == C64::new(0.0, 0.0) {
                    continue;
                }
                let dst = &mut block[o * post..(o + 1) * post];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += c * s;
                }
            }
        }
    });
    out
}

/// `⟨s_1, s_2⟩ = ∫ h(s_1, s_2) dv`, linear in the first slot.
pub fn l2_inner(s1: &SectionGrid, s2: &SectionGrid) -> Result<C64> {
    s1.compatible(s2)?;
    let g = &s1.grid;
    Ok((0..g.len()).into_par_iter().map(|i| s1.values[i] * s2.values[i].conj() * g.weight(i)).sum())
}

/// Coefficients `⟨s, ê_k⟩` of the orthogonal projection onto `H_p`.
pub fn bergman_project(basis: &QuantumBasis, s: &SectionGrid) -> Result<CVector> {
    if s.p != basis.p() || s.twists != basis.twists() {
        return Err(Error::Mismatch("section and basis belong to different line bundles".into()));
    }
    let grid = &s.grid;
    let mats: Vec<CMatrix> = basis
        .tables(grid)
        .into_iter()
        .map(|t| {
            let mut a = t.adjoint();
            for j in 0..a.ncols() {
                let w = grid.factor_weight(j);
                a.column_mut(j).scale_mut(w);
            }
            a
        })
        .collect();
    let shape = vec![grid.nodes_per_factor(); grid.factors()];
    Ok(CVector::from_vec(mode_apply_all(&s.values, &shape, &mats)))
}

/// `K(x, y) = Σ_{jk} M_jk ê_j(x) conj(ê_k(y))` in the affine unitary frames.
pub fn kernel_eval(basis: &QuantumBasis, m: &CMatrix, x: &ChartPoint, y: &ChartPoint) -> C64 {
    let ex = basis.eval(x);
    let ey = basis.eval(y).map(|v| v.conj());
    (ex.transpose() * m * ey)[(0, 0)]
}

/// Kernel values on a list of point pairs.
#[derive(Debug, Clone)]
pub struct KernelSlice {
    pub pairs: Vec<(ChartPoint, ChartPoint)>,
    pub values: Vec<C64>,
}

impl KernelSlice {
    pub fn evaluate(basis: &QuantumBasis, m: &CMatrix, pairs: Vec<(ChartPoint, ChartPoint)>) -> Self {
        let values = pairs.par_iter().map(|(x, y)| kernel_eval(basis, m, x, y)).collect();
        Self { pairs, values }
    }
}

/// `Tr M` as the quadrature of the kernel diagonal.
pub fn kernel_trace(basis: &QuantumBasis, grid: &QuadratureGrid, m: &CMatrix) -> C64 {
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let e = basis.eval(&grid.node(i));
            let me = m * e.map(|v| v.conj());
            e.iter().zip(me.iter()).map(|(a, b)| a * b).sum::<C64>() * grid.weight(i)
        })
        .sum()
}

/// Coherent state `s_{x0}(x) = P(x, x0)`, with the unit vector at `x0` taken
/// as the affine unitary frame there; its coefficients are `conj(ê_k(x0))`.
pub fn coherent_state(basis: &QuantumBasis, x0: &ChartPoint) -> CVector {
    basis.eval(x0).map(|v| v.conj())
}

/// Pointwise Hermitian norm of `Σ c_k ê_k` at `x`.
pub fn pointwise_norm(basis: &QuantumBasis, coeffs: &CVector, x: &ChartPoint) -> f64 {
    basis.eval(x).iter().zip(coeffs.iter()).map(|(e, c)| e * c).sum::<C64>().norm()
}
