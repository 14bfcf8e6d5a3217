//! Toeplitz, covariant-derivative and Kostant-Souriau matrices.
//!
//! For a multiplier `F` the matrix `⟨F ê_k, ê_j⟩` only couples `j - k` to the
//! angular Fourier modes of `F`. Per radial node tuple the angular sum is a
//! short DFT, so the assembly costs `O(radial tuples × (angles + dim × band))`.
//!
//! On monomials the covariant derivative of `O(N)` acts as
//! `∇_ξ z^k = (k ξ/z - N z̄ ξ/(1+|z|²)) z^k`, so every operator here has the form
//! `T(A) + Σ_i T(B_i) diag(k_i)` for two multipliers `A`, `B_i`.

use super::matrix::{OperatorKind, OperatorMatrix};
use crate::hilbert::{QuadratureGrid, QuantumBasis};
use crate::phase_space::hamiltonian::xi_from_jet;
use crate::phase_space::{Hamiltonian, MAX_FACTORS};
use crate::{CMatrix, Error, Result, C64};
use rayon::prelude::*;
use std::f64::consts::PI;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Per-node multipliers `(A, [B_1, ..., B_s])` from affine coordinates.
type Multipliers<'a> = dyn Fn(&[C64]) -> (C64, [C64; MAX_FACTORS]) + Sync + 'a;

/// Matrix of `T(A) + Σ_i T(B_i) diag(k_i)`, `band[i]` bounding the angular
/// frequencies of the multipliers in factor `i`.
fn assemble(basis: &QuantumBasis, grid: &QuadratureGrid, band: &[usize], with_b: bool, mult: &Multipliers) -> CMatrix {
    let s = basis.factors();
    let dims = basis.factor_dims();
    let dim = basis.dim();
    if dim == 0 {
        return CMatrix::zeros(0, 0);
    }
    let nr = grid.radial_nodes();
    let na = grid.angular_nodes();
    let rule = grid.radial_rule();
    let pieces = if with_b { 1 + s } else { 1 };

    let radial: Vec<Vec<Vec<f64>>> =
        (0..s).map(|i| (0..nr).map(|r| (0..dims[i]).map(|k| basis.radial(i, k, rule.x[r])).collect()).collect()).collect();

    // Frequency box, flattened with the last factor fastest.
    let widths: Vec<usize> = band.iter().map(|b| 2 * b + 1).collect();
    let nbox: usize = widths.iter().product();
    let unflatten = |mut idx: usize, sizes: &[usize]| -> Vec<usize> {
        let mut out = vec![0; sizes.len()];
        for i in (0..sizes.len()).rev() {
            out[i] = idx % sizes[i];
            idx /= sizes[i];
        }
        out
    };
    let nu_of: Vec<Vec<i64>> =
        (0..nbox).map(|q| unflatten(q, &widths).iter().zip(band).map(|(&w, &b)| w as i64 - b as i64).collect()).collect();
    let phase: Vec<Vec<C64>> = (0..na)
        .map(|a| {
            let th = grid.angle(a);
            (-(band.iter().copied().max().unwrap_or(0) as i64)..=band.iter().copied().max().unwrap_or(0) as i64)
                .map(|nu| C64::from_polar(1.0, -(nu as f64) * th))
                .collect()
        })
        .collect();
    let bmax = band.iter().copied().max().unwrap_or(0) as i64;

    let rtuples = nr.pow(s as u32);
    let atuples = na.pow(s as u32);
    let nr_sizes = vec![nr; s];
    let na_sizes = vec![na; s];
    // hat[rt][q][piece]
    let hat: Vec<Vec<Vec<C64>>> = (0..rtuples)
        .into_par_iter()
        .map(|rt| {
            let rs = unflatten(rt, &nr_sizes);
            let mut acc = vec![vec![ZERO; pieces]; nbox];
            let mut z = vec![ZERO; s];
            for at in 0..atuples {
                let as_ = unflatten(at, &na_sizes);
                for i in 0..s {
                    let u = rule.x[rs[i]];
                    z[i] = C64::from_polar(((1.0 - u) / u).sqrt(), grid.angle(as_[i]));
                }
                let (a, b) = mult(&z);
                for (q, nu) in nu_of.iter().enumerate() {
                    let mut e = C64::new(1.0, 0.0);
                    for i in 0..s {
                        e *= phase[as_[i]][(nu[i] + bmax) as usize];
                    }
                    acc[q][0] += a * e;
                    if with_b {
                        for i in 0..s {
                            acc[q][1 + i] += b[i] * e;
                        }
                    }
                }
            }
            let w: f64 = rs.iter().map(|&r| rule.w[r]).product::<f64>() / atuples as f64;
            for v in acc.iter_mut().flatten() {
                *v *= w;
            }
            acc
        })
        .collect();

    let rows: Vec<Vec<(usize, C64)>> = (0..dim)
        .into_par_iter()
        .map(|jf| {
            let j = basis.multi_index(jf);
            let mut out = Vec::with_capacity(nbox);
            'nu: for (q, nu) in nu_of.iter().enumerate() {
                let mut k = vec![0usize; s];
                for i in 0..s {
                    let ki = j[i] as i64 - nu[i];
                    if ki < 0 || ki >= dims[i] as i64 {
                        continue 'nu;
                    }
                    k[i] = ki as usize;
                }
                let mut sum = ZERO;
                for (rt, h) in hat.iter().enumerate() {
                    let rs = unflatten(rt, &nr_sizes);
                    let mut rad = 1.0;
                    for i in 0..s {
                        rad *= radial[i][rs[i]][j[i]] * radial[i][rs[i]][k[i]];
                    }
                    let mut v = h[q][0];
                    if with_b {
                        for i in 0..s {
                            v += h[q][1 + i] * k[i] as f64;
                        }
                    }
                    sum += v * rad;
                }
                out.push((basis.flat_index(&k), sum));
            }
            out
        })
        .collect();
    let mut m = CMatrix::zeros(dim, dim);
    for (jf, row) in rows.into_iter().enumerate() {
        for (kf, v) in row {
            m[(jf, kf)] = v;
        }
    }
    m
}

fn check(basis: &QuantumBasis, grid: &QuadratureGrid, f: &Hamiltonian) -> Result<()> {
    if basis.factors() != grid.factors() || basis.factors() != f.factors() {
        return Err(Error::Mismatch("basis, grid and Hamiltonian disagree on the factor count".into()));
    }
    let required = basis
        .degrees()
        .iter()
        .zip(f.degrees())
        .map(|(&n, d)| (n.max(0) as usize) + d as usize)
        .max()
        .unwrap_or(0);
    if grid.degree() < required {
        return Err(Error::ExactnessShortfall { required, available: grid.degree() });
    }
    Ok(())
}

fn band_of(f: &Hamiltonian) -> Vec<usize> {
    f.angular_band().into_iter().map(|b| b as usize).collect()
}

/// `T_p(g)` for an arbitrary multiplier with angular frequencies within
/// `band`; exactness is the caller's responsibility.
pub fn toeplitz_fn<G: Fn(&[C64]) -> C64 + Sync>(basis: &QuantumBasis, grid: &QuadratureGrid, band: &[usize], g: G) -> CMatrix {
    assemble(basis, grid, band, false, &|z| (g(z), [ZERO; MAX_FACTORS]))
}

/// `T_p(f) = P f P`.
pub fn toeplitz(basis: &QuantumBasis, grid: &QuadratureGrid, f: &Hamiltonian) -> Result<OperatorMatrix> {
    check(basis, grid, f)?;
    let s = f.factors();
    let m = toeplitz_fn(basis, grid, &band_of(f), |z| C64::from(f.jet_in(&vec![0; s], z, false).f));
    Ok(OperatorMatrix::new(m, OperatorKind::Toeplitz))
}

/// `P ∇_{ξ_f} P` for the Chern connection of `O(p + m)`.
pub fn covariant_derivative(basis: &QuantumBasis, grid: &QuadratureGrid, f: &Hamiltonian) -> Result<OperatorMatrix> {
    check(basis, grid, f)?;
    let s = f.factors();
    let degs: Vec<f64> = basis.degrees().iter().map(|&n| n as f64).collect();
    let charts = vec![0u8; s];
    let m = assemble(basis, grid, &band_of(f), true, &|z| {
        let jet = f.jet_in(&charts, z, false);
        let xi = xi_from_jet(&jet, z);
        let mut a = ZERO;
        let mut b = [ZERO; MAX_FACTORS];
        for i in 0..s {
            a -= z[i].conj() * xi[i] * degs[i] / (1.0 + z[i].norm_sqr());
            b[i] = xi[i] / z[i];
        }
        (a, b)
    });
    Ok(OperatorMatrix::new(m, OperatorKind::CovariantDerivative))
}

/// `Q_p(f) = T_p(f) + (i/2πp) P (∇_{ξ_f} + iπ Σ m_i (1+|z_i|²)² ∂_{z_i}∂_{z̄_i} f) P`.
///
/// The bracket is the generator of the lifted flow on `O(m) ⊗ L^p` with the
/// `-2πipf` part split off; with this sign `exp(-2πitpQ_p)` is the quantum
/// evolution, and on `f_0` the spectrum is `{(k - m/2)/p}`.
pub fn kostant_souriau(basis: &QuantumBasis, grid: &QuadratureGrid, f: &Hamiltonian) -> Result<OperatorMatrix> {
    check(basis, grid, f)?;
    if basis.p() < 1 {
        return Err(Error::InvalidInput("Kostant-Souriau operators need p ≥ 1".into()));
    }
    let s = f.factors();
    let degs: Vec<f64> = basis.degrees().iter().map(|&n| n as f64).collect();
    let twists: Vec<f64> = basis.twists().iter().map(|&m| m as f64).collect();
    let pref = C64::new(0.0, 1.0 / (2.0 * PI * basis.p() as f64));
    let charts = vec![0u8; s];
    let m = assemble(basis, grid, &band_of(f), true, &|z| {
        let jet = f.jet_in(&charts, z, true);
        let xi = xi_from_jet(&jet, z);
        let mut cov = ZERO;
        let mut b = [ZERO; MAX_FACTORS];
        for i in 0..s {
            let d = 1.0 + z[i].norm_sqr();
            cov -= z[i].conj() * xi[i] * degs[i] / d;
            cov += C64::new(0.0, PI * twists[i] * d * d) * jet.fzzb[i][i];
            b[i] = pref * xi[i] / z[i];
        }
        (C64::from(jet.f) + pref * cov, b)
    });
    Ok(OperatorMatrix::new(m, OperatorKind::KostantSouriau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::matrix::{hermitian_defect, kronecker_sum_values, op_norm};
    use crate::phase_space::ModelGeometry;

    fn setup(geom: &ModelGeometry, p: i64, f: &Hamiltonian) -> (QuantumBasis, QuadratureGrid) {
        (QuantumBasis::new(geom, p), QuadratureGrid::for_level(geom.factors(), p, f.max_degree()))
    }

    #[test]
    fn toeplitz_of_one_is_identity() {
        let geom = ModelGeometry::sphere();
        let f = Hamiltonian::constant(1, 1.0);
        let (b, g) = setup(&geom, 7, &f);
        let t = toeplitz(&b, &g, &f).unwrap();
        assert!(op_norm(&(t.matrix - CMatrix::identity(8, 8))) < 1e-13);
    }

    #[test]
    fn toeplitz_of_rotation_generator() {
        let geom = ModelGeometry::sphere();
        let f = Hamiltonian::rotation(1);
        let p = 9;
        let (b, g) = setup(&geom, p, &f);
        let t = toeplitz(&b, &g, &f).unwrap();
        for j in 0..=p as usize {
            for k in 0..=p as usize {
                let want = if j == k { (k as f64 + 1.0) / (p as f64 + 2.0) } else { 0.0 };
                assert!((t.matrix[(j, k)] - want).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn toeplitz_trace_approaches_mean() {
        // Tr T_p(f)/dim - ∫f ω is O(1/p); here ∫ f ω = 1/2 + ε·0.
        let geom = ModelGeometry::sphere();
        let f = Hamiltonian::perturbed(&[0.2]).unwrap();
        let mut errs = Vec::new();
        for p in [10i64, 20, 40] {
            let (b, g) = setup(&geom, p, &f);
            let t = toeplitz(&b, &g, &f).unwrap();
            errs.push((t.matrix.trace().re / b.dim() as f64 - 0.5).abs() * p as f64);
        }
        assert!(errs.iter().all(|e| *e < 1.0));
    }

    #[test]
    fn exactness_shortfall_names_degree() {
        let geom = ModelGeometry::sphere();
        let f = Hamiltonian::rotation(1);
        let b = QuantumBasis::new(&geom, 10);
        let g = QuadratureGrid::new(1, 5);
        assert_eq!(toeplitz(&b, &g, &f).unwrap_err(), Error::ExactnessShortfall { required: 11, available: 5 });
    }

    #[test]
    fn rotation_spectra_are_exact() {
        for p in [8i64, 32, 128] {
            let f = Hamiltonian::rotation(1);
            let (b, g) = setup(&ModelGeometry::sphere(), p, &f);
            let q = kostant_souriau(&b, &g, &f).unwrap();
            assert!(q.hermitian);
            let s = q.spectral().unwrap();
            for (k, l) in s.values.iter().enumerate() {
                assert!((l - k as f64 / p as f64).abs() < 1e-10);
            }
            let (b, g) = setup(&ModelGeometry::metaplectic_sphere(), p, &f);
            let s = kostant_souriau(&b, &g, &f).unwrap().spectral().unwrap();
            assert_eq!(s.dim(), p as usize);
            for (k, l) in s.values.iter().enumerate() {
                assert!((l - (k as f64 + 0.5) / p as f64).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn covariant_derivative_of_rotation() {
        let geom = ModelGeometry::sphere();
        let f = Hamiltonian::rotation(1);
        let p = 6;
        let (b, g) = setup(&geom, p, &f);
        let c = covariant_derivative(&b, &g, &f).unwrap().matrix;
        let t = toeplitz(&b, &g, &f).unwrap().matrix;
        // ∇_ξ z^k = -2πi (k - p f_0) z^k before projection.
        let mut want = t * C64::new(0.0, 2.0 * PI * p as f64);
        for k in 0..=p as usize {
            want[(k, k)] -= C64::new(0.0, 2.0 * PI * k as f64);
        }
        assert!(op_norm(&(c - want)) < 1e-11);
    }

    #[test]
    fn constant_hamiltonian() {
        let geom = ModelGeometry::metaplectic_sphere();
        let f = Hamiltonian::constant(1, 0.7);
        let (b, g) = setup(&geom, 5, &f);
        assert!(op_norm(&covariant_derivative(&b, &g, &f).unwrap().matrix) < 1e-13);
        let q = kostant_souriau(&b, &g, &f).unwrap().matrix;
        assert!(op_norm(&(q - CMatrix::identity(5, 5) * C64::from(0.7))) < 1e-13);
    }

    #[test]
    fn generic_operators_are_hermitian_and_affine() {
        for geom in [ModelGeometry::sphere(), ModelGeometry::metaplectic_sphere()] {
            let f = Hamiltonian::perturbed(&[0.15, -0.05]).unwrap();
            let p = 11;
            let (b, g) = setup(&geom, p, &f);
            let q = kostant_souriau(&b, &g, &f).unwrap();
            assert!(q.hermitian_defect() < 1e-10);
            let c = covariant_derivative(&b, &g, &f).unwrap().matrix;
            let t = toeplitz(&b, &g, &f).unwrap().matrix;
            let gen = c - t * C64::new(0.0, 2.0 * PI * p as f64);
            assert!(hermitian_defect(&(gen * C64::new(0.0, 1.0))) < 1e-10);

            let fa = f.affine(-1.7, 0.4);
            let qa = kostant_souriau(&b, &g, &fa).unwrap().matrix;
            let want = &q.matrix * C64::from(-1.7) + CMatrix::identity(b.dim(), b.dim()) * C64::from(0.4);
            assert!(op_norm(&(qa - want)) < 1e-10);
        }
    }

    #[test]
    fn product_operator_is_a_kronecker_sum() {
        let geom = ModelGeometry::product(2, -1).unwrap();
        let w = [1.0, 2f64.sqrt()];
        let f = Hamiltonian::product(&w).unwrap();
        let p = 4;
        let (b, g) = setup(&geom, p, &f);
        let q = kostant_souriau(&b, &g, &f).unwrap().spectral().unwrap();
        let one: Vec<f64> = (0..p).map(|k| (k as f64 + 0.5) / p as f64).collect();
        let a: Vec<f64> = one.iter().map(|v| v * w[0]).collect();
        let c: Vec<f64> = one.iter().map(|v| v * w[1]).collect();
        let mut want = kronecker_sum_values(&[&a, &c]);
        want.sort_by(f64::total_cmp);
        for (x, y) in q.values.iter().zip(&want) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
