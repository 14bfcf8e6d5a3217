//! Quantum evolution, geometric pullback and discrete parallel transport.
//!
//! The pullback of a sampled section by the lifted flow is
//! `(φ_t^* s)^(x) = e^{iθ(t,x)} ŝ(φ_t x)`, see [`crate::phase_space::flow`].
//! With `H_{p,t} = φ_{-t}^* H_{p,0}` the sections `φ_{-t}^* ê_k` form an
//! orthonormal basis of `H_{p,t}`; transports are reported in that basis, in
//! which the matrix of `T̃` from `{ê_k}` coincides with the matrix of
//! `φ_t^* T̃` on `H_{p,0}`.

use super::matrix::{op_norm, OperatorKind, OperatorMatrix, SpectralData};
use crate::hilbert::{QuadratureGrid, QuantumBasis};
use crate::phase_space::{ChartPoint, FlowOptions, FlowTracker, Hamiltonian, ModelGeometry};
use crate::{CMatrix, Error, Result, C64};
use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use std::f64::consts::PI;

/// `U(t) = exp(-2πitpQ)`.
pub fn evolution(q: &SpectralData, t: f64, p: i64) -> OperatorMatrix {
    let w = -2.0 * PI * t * p as f64;
    OperatorMatrix::new(q.apply_fn(|l| C64::from_polar(1.0, w * l)), OperatorKind::Evolution)
}

/// Basis values of `φ_t^* ê_k` at each point, as rows.
pub fn pullback_samples(
    f: &Hamiltonian,
    basis: &QuantumBasis,
    points: &[ChartPoint],
    t: f64,
    opts: &FlowOptions,
) -> Result<CMatrix> {
    let rows: Vec<Result<Vec<C64>>> = points
        .par_iter()
        .map(|x| {
            let mut tr = FlowTracker::new(f, x, false);
            tr.advance(t, opts)?;
            let out = tr.snapshot();
            let ph = C64::from_polar(1.0, out.lift.phase(basis.p(), basis.twists()));
            Ok(basis.eval(&out.point).iter().map(|v| v * ph).collect())
        })
        .collect();
    let mut m = CMatrix::zeros(points.len(), basis.dim());
    for (r, row) in rows.into_iter().enumerate() {
        for (k, v) in row?.into_iter().enumerate() {
            m[(r, k)] = v;
        }
    }
    Ok(m)
}

fn samples_at_nodes(basis: &QuantumBasis, grid: &QuadratureGrid) -> CMatrix {
    let rows: Vec<Vec<C64>> =
        (0..grid.len()).into_par_iter().map(|i| basis.eval(&grid.node(i)).iter().copied().collect()).collect();
    CMatrix::from_fn(grid.len(), basis.dim(), |r, c| rows[r][c])
}

/// `B† W A` for sample matrices over the grid nodes.
fn weighted_overlap(b: &CMatrix, w: &[f64], a: &CMatrix) -> CMatrix {
    let mut wa = a.clone();
    for (r, &wr) in w.iter().enumerate() {
        for x in wa.row_mut(r).iter_mut() {
            *x *= wr;
        }
    }
    b.adjoint() * wa
}

/// Matrix `⟨φ_t^* ê_k, ê_j⟩` of the pullback compressed to `H_{p,0}`,
/// computed by quadrature on `grid` (which must resolve the non-polynomial
/// integrands).
pub fn pullback_operator(
    geom: &ModelGeometry,
    f: &Hamiltonian,
    t: f64,
    basis: &QuantumBasis,
    grid: &QuadratureGrid,
    opts: &FlowOptions,
) -> Result<OperatorMatrix> {
    if geom.factors() != f.factors() || grid.factors() != f.factors() {
        return Err(Error::Mismatch("geometry, grid and Hamiltonian disagree on the factor count".into()));
    }
    let nodes = grid.points();
    let pulled = pullback_samples(f, basis, &nodes, t, opts)?;
    let e = samples_at_nodes(basis, grid);
    Ok(OperatorMatrix::new(weighted_overlap(&e, &grid.weights(), &pulled), OperatorKind::Pullback))
}

#[derive(Debug, Clone, Copy)]
pub struct TransportOptions {
    /// Degree of the ambient grid; `None` picks `2(p + d) + 8`.
    pub grid_degree: Option<usize>,
    pub flow: FlowOptions,
    /// Largest accepted Gram condition number.
    pub max_condition: f64,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self { grid_degree: None, flow: FlowOptions::default(), max_condition: 1e8 }
    }
}

#[derive(Debug, Clone)]
pub struct TransportResult {
    pub steps: usize,
    /// `T̃` from `{ê_k}` to `{φ_{-t}^* ê_k}`; equivalently `φ_t^* T̃` on `H_{p,0}`.
    pub operator: OperatorMatrix,
    /// `⟨T̃ ê_k, ê_j⟩` in the ambient `L²`.
    pub overlap_with_initial: CMatrix,
    /// `‖T̃†T̃ - Id‖₂` measured with the ambient Gram matrix.
    pub unitarity_defect: f64,
    /// Largest Gram condition number met along the chain.
    pub worst_condition: f64,
}

/// Ordered projector products `P_{t_K} ⋯ P_{t_1}` on `H_{p,0}` for each
/// requested step count, sharing one set of trajectories. Every entry of
/// `steps` must divide the largest.
pub fn quantum_parallel_transport(
    geom: &ModelGeometry,
    f: &Hamiltonian,
    p: i64,
    t: f64,
    steps: &[usize],
    opts: &TransportOptions,
) -> Result<Vec<TransportResult>> {
    let kmax = steps.iter().copied().max().ok_or_else(|| Error::InvalidInput("no step counts given".into()))?;
    if steps.iter().any(|&k| k == 0 || kmax % k != 0) {
        return Err(Error::InvalidInput("step counts must be positive divisors of the largest".into()));
    }
    if geom.factors() != f.factors() {
        return Err(Error::Mismatch("geometry and Hamiltonian disagree on the factor count".into()));
    }
    let basis = QuantumBasis::new(geom, p);
    let degree = opts.grid_degree.unwrap_or(2 * (p.max(0) as usize + f.max_degree() as usize) + 8);
    let grid = QuadratureGrid::new(geom.factors(), degree);
    let weights = grid.weights();
    let nodes = grid.points();
    let dim = basis.dim();
    let b0 = samples_at_nodes(&basis, &grid);

    struct Chain {
        stride: usize,
        coeff: CMatrix,
        prev: CMatrix,
        cond: f64,
    }
    let mut chains: Vec<Chain> = steps
        .iter()
        .map(|&k| Chain { stride: kmax / k, coeff: CMatrix::identity(dim, dim), prev: b0.clone(), cond: 1.0 })
        .collect();

    let mut trackers: Vec<FlowTracker> = nodes.iter().map(|x| FlowTracker::new(f, x, false)).collect();
    const BLOCK: usize = 50;
    let mut j0 = 1;
    while j0 <= kmax {
        let j1 = (j0 + BLOCK - 1).min(kmax);
        // samples[node][j - j0][k]
        let samples: Vec<Result<Vec<Vec<C64>>>> = trackers
            .par_iter_mut()
            .map(|tr| {
                let mut out = Vec::with_capacity(j1 - j0 + 1);
                for j in j0..=j1 {
                    tr.advance(-t * j as f64 / kmax as f64, &opts.flow)?;
                    let snap = tr.snapshot();
                    let ph = C64::from_polar(1.0, snap.lift.phase(p, basis.twists()));
                    out.push(basis.eval(&snap.point).iter().map(|v| v * ph).collect());
                }
                Ok(out)
            })
            .collect();
        let samples: Vec<Vec<Vec<C64>>> = samples.into_iter().collect::<Result<_>>()?;
        for j in j0..=j1 {
            if !chains.iter().any(|c| j % c.stride == 0) {
                continue;
            }
            let bj = CMatrix::from_fn(nodes.len(), dim, |r, c| samples[r][j - j0][c]);
            let gram = weighted_overlap(&bj, &weights, &bj);
            let cond = condition(&gram);
            if cond > opts.max_condition {
                return Err(Error::IllConditioned {
                    cond,
                    limit: opts.max_condition,
                    hint: "; use a denser ambient grid",
                });
            }
            let ginv = gram
                .clone()
                .try_inverse()
                .ok_or(Error::IllConditioned { cond: f64::INFINITY, limit: opts.max_condition, hint: "" })?;
            for ch in chains.iter_mut().filter(|c| j % c.stride == 0) {
                let step = &ginv * weighted_overlap(&bj, &weights, &ch.prev);
                ch.coeff = step * &ch.coeff;
                ch.prev = bj.clone();
                ch.cond = ch.cond.max(cond);
            }
        }
        j0 = j1 + 1;
    }

    Ok(chains
        .into_iter()
        .zip(steps)
        .map(|(ch, &k)| {
            let gram = weighted_overlap(&ch.prev, &weights, &ch.prev);
            let unitarity_defect = op_norm(&(ch.coeff.adjoint() * &gram * &ch.coeff - CMatrix::identity(dim, dim)));
            let overlap_with_initial = weighted_overlap(&b0, &weights, &ch.prev) * &ch.coeff;
            TransportResult {
                steps: k,
                operator: OperatorMatrix::new(ch.coeff, OperatorKind::Transport),
                overlap_with_initial,
                unitarity_defect,
                worst_condition: ch.cond,
            }
        })
        .collect())
}

/// 2-norm condition number of a Hermitian positive matrix.
fn condition(g: &CMatrix) -> f64 {
    if g.is_empty() {
        return 1.0;
    }
    let ev = SymmetricEigen::new((g + g.adjoint()) * C64::new(0.5, 0.0)).eigenvalues;
    let hi = ev.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let lo = ev.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::assembly::kostant_souriau;
    use crate::operators::matrix::unitary_defect;

    fn ks(geom: &ModelGeometry, f: &Hamiltonian, p: i64) -> SpectralData {
        let b = QuantumBasis::new(geom, p);
        let g = QuadratureGrid::for_level(geom.factors(), p, f.max_degree());
        kostant_souriau(&b, &g, f).unwrap().spectral().unwrap()
    }

    #[test]
    fn evolution_identities() {
        let geom = ModelGeometry::sphere();
        let f = Hamiltonian::perturbed(&[0.1]).unwrap();
        let p = 10;
        let q = ks(&geom, &f, p);
        let n = q.dim();
        assert!(op_norm(&(evolution(&q, 0.0, p).matrix - CMatrix::identity(n, n))) < 1e-12);
        let (s, t) = (0.23, 0.61);
        let us = evolution(&q, s, p);
        let ut = evolution(&q, t, p);
        assert!(us.unitary && unitary_defect(&ut.matrix) < 1e-9);
        assert!(op_norm(&(evolution(&q, s + t, p).matrix - us.matrix * ut.matrix)) < 1e-9);

        let r = ks(&geom, &Hamiltonian::rotation(1), p);
        assert!(op_norm(&(evolution(&r, 1.0, p).matrix - CMatrix::identity(n + 0, n))) < 1e-10);
    }

    #[test]
    fn rotation_pullback_is_the_evolution() {
        for geom in [ModelGeometry::sphere(), ModelGeometry::metaplectic_sphere()] {
            let f = Hamiltonian::rotation(1);
            let p = 7;
            let b = QuantumBasis::new(&geom, p);
            let g = QuadratureGrid::new(1, p as usize + 4);
            let t = 0.37;
            let pb = pullback_operator(&geom, &f, t, &b, &g, &FlowOptions::default()).unwrap();
            let u = evolution(&ks(&geom, &f, p), t, p);
            assert!(op_norm(&(pb.matrix.clone() - u.matrix)) < 1e-9);
            assert!(pb.unitary);
            let id = pullback_operator(&geom, &f, 0.0, &b, &g, &FlowOptions::default()).unwrap();
            assert!(op_norm(&(id.matrix - CMatrix::identity(b.dim(), b.dim()))) < 1e-12);
        }
    }

    #[test]
    fn lift_cocycle_composes() {
        // φ_s^* φ_t^* = φ_{s+t}^* on sampled sections, generic f.
        let geom = ModelGeometry::metaplectic_sphere();
        let f = Hamiltonian::perturbed(&[0.2, 0.05]).unwrap();
        let b = QuantumBasis::new(&geom, 6);
        let opts = FlowOptions::default();
        let (s, t) = (0.21, 0.34);
        let pts: Vec<ChartPoint> =
            [C64::new(0.3, 0.1), C64::new(-1.2, 0.7), C64::new(0.0, 3.0)].iter().map(|z| ChartPoint::affine(&[*z])).collect();
        let direct = pullback_samples(&f, &b, &pts, s + t, &opts).unwrap();
        for (r, x) in pts.iter().enumerate() {
            let mut tr = FlowTracker::new(&f, x, false);
            tr.advance(s, &opts).unwrap();
            let snap = tr.snapshot();
            let inner = pullback_samples(&f, &b, &[snap.point.clone()], t, &opts).unwrap();
            let ph = C64::from_polar(1.0, snap.lift.phase(b.p(), b.twists()));
            for k in 0..b.dim() {
                assert!((inner[(0, k)] * ph - direct[(r, k)]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn rotation_transport_is_trivial() {
        let geom = ModelGeometry::sphere();
        let f = Hamiltonian::rotation(1);
        let p = 5;
        let t = 0.3;
        let opts = TransportOptions { grid_degree: Some(12), ..Default::default() };
        let res = quantum_parallel_transport(&geom, &f, p, t, &[1, 4], &opts).unwrap();
        let u = evolution(&ks(&geom, &f, p), t, p);
        for r in res {
            assert!(op_norm(&(r.operator.matrix.clone() - &u.matrix)) < 1e-9, "{}", r.steps);
            assert!(op_norm(&(r.overlap_with_initial - CMatrix::identity(6, 6))) < 1e-9);
            assert!(r.unitarity_defect < 1e-9);
        }
    }

    #[test]
    fn generic_transport_converges_to_the_evolution() {
        let geom = ModelGeometry::sphere();
        let f = Hamiltonian::perturbed(&[0.0, 0.1]).unwrap();
        let (p, t) = (3, 0.2);
        let res = quantum_parallel_transport(&geom, &f, p, t, &[20, 40, 80], &TransportOptions::default()).unwrap();
        let u = evolution(&ks(&geom, &f, p), t, p);
        let d: Vec<f64> = res.iter().map(|r| op_norm(&(r.operator.matrix.clone() - &u.matrix))).collect();
        assert!(d[0] > 1e-8, "flow should not be holomorphic");
        for w in d.windows(2) {
            assert!((w[0] / w[1]).log2() > 0.9, "{d:?}");
        }
    }

    #[test]
    fn transport_rejects_bad_step_lists() {
        let geom = ModelGeometry::sphere();
        let f = Hamiltonian::rotation(1);
        assert!(quantum_parallel_transport(&geom, &f, 3, 0.1, &[3, 4], &TransportOptions::default()).is_err());
        assert!(quantum_parallel_transport(&geom, &f, 3, 0.1, &[], &TransportOptions::default()).is_err());
    }
}
