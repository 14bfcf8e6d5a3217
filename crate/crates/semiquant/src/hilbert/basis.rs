//! Orthonormal monomial bases of `H^0(O(p + m_1) ⊠ ... ⊠ O(p + m_s))`.
//!
//! Basis sections are stored through their unitary-frame values
//!
//! ```text
//! ê_k = Π_i sqrt((N_i+1) C(N_i, k_i)) z_i^{k_i} (1+|z_i|²)^{-N_i/2}
//!     = Π_i sqrt((N_i+1) C(N_i, k_i)) (1-u_i)^{k_i/2} u_i^{(N_i-k_i)/2} e^{i k_i θ_i},
//! ```
//!
//! `N_i = p + m_i`, relative to the affine chart. The modulus is the pointwise
//! Hermitian norm; phases are frame dependent.

use super::grid::QuadratureGrid;
use crate::phase_space::{ChartPoint, ModelGeometry};
use crate::{CMatrix, CVector, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumBasis {
    p: i64,
    twists: Vec<i32>,
    /// `N_i = p + m_i`, negative for an empty factor.
    degrees: Vec<i64>,
    ln_fact: Vec<f64>,
}

impl QuantumBasis {
    pub fn new(geom: &ModelGeometry, p: i64) -> Self {
        let twists = geom.twists().to_vec();
        let degrees: Vec<i64> = twists.iter().map(|&m| p + m as i64).collect();
        let top = degrees.iter().copied().max().unwrap_or(0).max(0) as usize + 1;
        let mut ln_fact = vec![0.0; top + 1];
        for n in 1..=top {
            ln_fact[n] = ln_fact[n - 1] + (n as f64).ln();
        }
        Self { p, twists, degrees, ln_fact }
    }

    pub fn p(&self) -> i64 {
        self.p
    }

    pub fn twists(&self) -> &[i32] {
        &self.twists
    }

    pub fn factors(&self) -> usize {
        self.degrees.len()
    }

    /// Line-bundle degrees `N_i = p + m_i`.
    pub fn degrees(&self) -> &[i64] {
        &self.degrees
    }

    pub fn factor_dim(&self, i: usize) -> usize {
        (self.degrees[i] + 1).max(0) as usize
    }

    pub fn factor_dims(&self) -> Vec<usize> {
        (0..self.factors()).map(|i| self.factor_dim(i)).collect()
    }

    pub fn dim(&self) -> usize {
        self.factor_dims().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.dim() == 0
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let dims = self.factor_dims();
        let mut k = vec![0; dims.len()];
        for i in (0..dims.len()).rev() {
            k[i] = flat % dims[i];
            flat /= dims[i];
        }
        k
    }

    pub fn flat_index(&self, k: &[usize]) -> usize {
        let dims = self.factor_dims();
        k.iter().zip(&dims).fold(0, |acc, (&ki, &d)| acc * d + ki)
    }

    /// `‖z^k‖² = Π k_i! (N_i - k_i)! / (N_i + 1)!`.
    pub fn monomial_norm_sq(&self, k: &[usize]) -> f64 {
        let mut ln = 0.0;
        for (i, &ki) in k.iter().enumerate() {
            let n = self.degrees[i] as usize;
            ln += self.ln_fact[ki] + self.ln_fact[n - ki] - self.ln_fact[n + 1];
        }
        ln.exp()
    }

    /// Radial profile `sqrt((N+1) C(N,k)) (1-u)^{k/2} u^{(N-k)/2}` of factor `i`.
    pub fn radial(&self, i: usize, k: usize, u: f64) -> f64 {
        let n = self.degrees[i] as usize;
        let mut ln = 0.5 * ((n as f64 + 1.0).ln() + self.ln_fact[n] - self.ln_fact[k] - self.ln_fact[n - k]);
        if k > 0 {
            if u >= 1.0 {
                return 0.0;
            }
            ln += 0.5 * k as f64 * (1.0 - u).ln();
        }
        if n > k {
            if u <= 0.0 {
                return 0.0;
            }
            ln += 0.5 * (n - k) as f64 * u.ln();
        }
        ln.exp()
    }

    /// `ê_k(u, θ)` of factor `i` for every `k`, affine unitary frame.
    pub fn factor_values(&self, i: usize, u: f64, theta: f64) -> Vec<C64> {
        (0..self.factor_dim(i)).map(|k| C64::from_polar(self.radial(i, k, u), k as f64 * theta)).collect()
    }

    /// Values of factor `i` at a point. The affine unitary frame is used unless
    /// the factor sits exactly at `z = ∞`, where the frame of the chart at
    /// infinity is used instead.
    pub fn factor_values_at(&self, i: usize, x: &ChartPoint) -> Vec<C64> {
        let n = self.degrees[i];
        match x.coordinate_in(i, 0) {
            Some(z) => {
                let u = 1.0 / (1.0 + z.norm_sqr());
                self.factor_values(i, u, z.arg())
            }
            None => {
                let mut v = vec![C64::new(0.0, 0.0); self.factor_dim(i)];
                if n >= 0 {
                    v[n as usize] = C64::from(((n + 1) as f64).sqrt());
                }
                v
            }
        }
    }

    /// All basis values at `x`, in flat order.
    pub fn eval(&self, x: &ChartPoint) -> CVector {
        let per: Vec<Vec<C64>> = (0..self.factors()).map(|i| self.factor_values_at(i, x)).collect();
        let dims = self.factor_dims();
        CVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|flat| {
                let mut rest = flat;
                let mut v = C64::new(1.0, 0.0);
                for i in (0..dims.len()).rev() {
                    v *= per[i][rest % dims[i]];
                    rest /= dims[i];
                }
                v
            }),
        )
    }

    /// Per-factor sample tables: entry `(j, k)` is `ê_k` of that factor at
    /// factor node `j`.
    pub fn tables(&self, grid: &QuadratureGrid) -> Vec<CMatrix> {
        let m = grid.nodes_per_factor();
        (0..self.factors())
            .map(|i| {
                let d = self.factor_dim(i);
                let mut t = CMatrix::zeros(m, d);
                for j in 0..m {
                    let (u, th) = grid.factor_node(j);
                    for (k, v) in self.factor_values(i, u, th).into_iter().enumerate() {
                        t[(j, k)] = v;
                    }
                }
                t
            })
            .collect()
    }

    /// Bergman density `Σ_k |ê_k(x)|²`, constant `Π (N_i + 1)` on these models.
    pub fn density(&self, x: &ChartPoint) -> f64 {
        self.eval(x).iter().map(|v| v.norm_sqr()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::ModelGeometry;

    #[test]
    fn riemann_roch_dimensions() {
        let s = ModelGeometry::sphere();
        let m = ModelGeometry::metaplectic_sphere();
        let pp = ModelGeometry::product(2, 0).unwrap();
        for p in 1..=64i64 {
            assert_eq!(QuantumBasis::new(&s, p).dim() as i64, p + 1);
            assert_eq!(QuantumBasis::new(&m, p).dim() as i64, p);
            assert_eq!(QuantumBasis::new(&pp, p).dim() as i64, (p + 1) * (p + 1));
            assert_eq!(QuantumBasis::new(&pp, p).dim() as u64, pp.riemann_roch(p));
        }
        assert!(QuantumBasis::new(&m, 0).is_empty());
        assert!(QuantumBasis::new(&s, -3).is_empty());
    }

    #[test]
    fn index_round_trip() {
        let b = QuantumBasis::new(&ModelGeometry::product(2, -1).unwrap(), 4);
        for flat in 0..b.dim() {
            assert_eq!(b.flat_index(&b.multi_index(flat)), flat);
        }
    }

    #[test]
    fn values_match_weighted_monomials() {
        let b = QuantumBasis::new(&ModelGeometry::sphere(), 7);
        let z = C64::new(0.3, -1.7);
        let x = ChartPoint::affine(&[z]);
        let e = b.eval(&x);
        let d = 1.0 + z.norm_sqr();
        for k in 0..=7usize {
            let want = z.powu(k as u32) * d.powf(-3.5) / b.monomial_norm_sq(&[k]).sqrt();
            assert!((e[k] - want).norm() < 1e-13, "{k}");
        }
    }

    #[test]
    fn bergman_density_is_dimension() {
        let b = QuantumBasis::new(&ModelGeometry::sphere(), 30);
        for z in [C64::new(0.0, 0.0), C64::new(0.2, 0.9), C64::new(-40.0, 3.0)] {
            assert!((b.density(&ChartPoint::affine(&[z])) - 31.0).abs() < 1e-10);
        }
        assert!((b.density(&ChartPoint::at_infinity(1)) - 31.0).abs() < 1e-10);
    }
}
