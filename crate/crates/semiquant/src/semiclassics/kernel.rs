//! Pointwise kernel coefficients extracted by extrapolation in `p`, kernel
//! decay fits and coherent-state propagation.
//!
//! Kernels are evaluated in the affine unitary frames. `U(t)` concentrates on
//! pairs `(x, φ_t x)`, so the evolved coherent state at `x0` peaks at
//! `φ_{-t}(x0)`.

use super::window::Window;
use crate::extrapolate::{FitError, Richardson};
use crate::hilbert::{coherent_state, kernel_eval, QuadratureGrid, QuantumBasis, SectionGrid};
use crate::operators::{evolution, kostant_souriau, SpectralData};
use crate::phase_space::flow::field_real;
use crate::phase_space::tangent::hermitian;
use crate::phase_space::{
    a0_squared, flow_full, integrate_flow, oblique_projectors, ChartPoint, FlowOptions, Hamiltonian, ModelGeometry,
};
use crate::{Error, Result, C64};
use rayon::prelude::*;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    /// The extrapolation itself did not settle; nothing is claimed.
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// One row of the checks table.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub measured: f64,
    pub predicted: f64,
    pub rel_err: f64,
    pub verdict: Verdict,
}

impl CheckReport {
    /// Relative comparison against `tol`.
    pub fn relative(name: impl Into<String>, measured: f64, predicted: f64, tol: f64) -> Self {
        let rel_err = if predicted != 0.0 { (measured / predicted - 1.0).abs() } else { measured.abs() };
        let verdict = if rel_err <= tol { Verdict::Pass } else { Verdict::Fail };
        Self { name: name.into(), measured, predicted, rel_err, verdict }
    }

    /// `measured ≤ bound`.
    pub fn upper(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        let verdict = if measured <= bound { Verdict::Pass } else { Verdict::Fail };
        let rel_err = if bound != 0.0 { measured / bound } else { measured };
        Self { name: name.into(), measured, predicted: bound, rel_err, verdict }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Debug, Clone)]
pub struct KernelCheckOptions {
    pub rel_tol: f64,
    /// Largest Richardson residual, relative to the extrapolated value,
    /// before the result is declared inconclusive.
    pub max_residual: f64,
    pub order: usize,
    pub flow: FlowOptions,
}

impl Default for KernelCheckOptions {
    fn default() -> Self {
        Self { rel_tol: 0.02, max_residual: 1e-4, order: 3, flow: FlowOptions::default() }
    }
}

/// Basis and Kostant-Souriau spectral data at level `p`.
pub fn quantize(geom: &ModelGeometry, f: &Hamiltonian, p: i64) -> Result<(QuantumBasis, SpectralData)> {
    let basis = QuantumBasis::new(geom, p);
    let grid = QuadratureGrid::for_level(geom.factors(), p, f.max_degree());
    let q = kostant_souriau(&basis, &grid, f)?;
    Ok((basis, q.spectral()?))
}

fn sweep<T: Send, F: Fn(i64) -> Result<T> + Sync>(ps: &[i64], job: F) -> Result<Vec<T>> {
    ps.par_iter().map(|&p| job(p)).collect()
}

fn extrapolate(ps: &[i64], values: &[C64], order: usize) -> Result<(C64, f64)> {
    let pf: Vec<f64> = ps.iter().map(|&p| p as f64).collect();
    match Richardson::new(order).fit_complex(&pf, values) {
        Ok((c, res)) => Ok((c[0], res)),
        Err(FitError::TooFewSamples { samples, unknowns }) => {
            Err(Error::InvalidInput(format!("{samples} p values for a fit with {unknowns} unknowns")))
        }
        Err(FitError::IllConditioned { cond }) => {
            Err(Error::IllConditioned { cond, limit: 1e10, hint: "; spread the p grid" })
        }
    }
}

fn settle(mut report: CheckReport, residual: f64, scale: f64, max_residual: f64) -> CheckReport {
    if residual > max_residual * scale.max(1e-300) {
        report.verdict = Verdict::Inconclusive;
    }
    report
}

#[derive(Debug, Clone)]
pub struct A0Report {
    pub ps: Vec<i64>,
    /// `U(t)(x, φ_t x) p^{-n} e^{-iθ_p}` with `θ_p` the lift phase.
    pub samples: Vec<C64>,
    pub a0: C64,
    pub residual: f64,
    /// `(det(Π̄_t^0)^{-1} τ_t^{K_X})^{-1}`.
    pub predicted_sq: C64,
    pub check: CheckReport,
}

pub fn a0_check(
    geom: &ModelGeometry,
    f: &Hamiltonian,
    t: f64,
    x: &ChartPoint,
    ps: &[i64],
    opts: &KernelCheckOptions,
) -> Result<A0Report> {
    let n = geom.factors() as i32;
    let out = flow_full(f, x, t, false, &opts.flow)?;
    let y = out.point.clone();
    let samples = sweep(ps, |p| {
        let (basis, q) = quantize(geom, f, p)?;
        let u = evolution(&q, t, p);
        let k = kernel_eval(&basis, &u.matrix, x, &y);
        Ok(k * C64::from_polar(1.0, -out.lift.phase(p, geom.twists())) / (p as f64).powi(n))
    })?;
    let (a0, residual) = extrapolate(ps, &samples, opts.order)?;
    let predicted_sq = a0_squared(geom, f, t, x, &opts.flow)?;
    let ratio = a0 * a0 / predicted_sq;
    let mut check = CheckReport::relative("a0", (a0 * a0).norm(), predicted_sq.norm(), opts.rel_tol);
    check.rel_err = (ratio - 1.0).norm();
    check.verdict = if check.rel_err <= opts.rel_tol { Verdict::Pass } else { Verdict::Fail };
    let check = settle(check, residual, a0.norm(), opts.max_residual);
    Ok(A0Report { ps: ps.to_vec(), samples, a0, residual, predicted_sq, check })
}

#[derive(Debug, Clone)]
pub struct BKernelReport {
    pub ps: Vec<i64>,
    /// `|ĝ(pQ_p(f - c))(x, φ_{t0} x)| p^{1/2-n} / |g(t0)|`.
    pub samples: Vec<f64>,
    pub b0_abs: f64,
    pub residual: f64,
    /// `|b_{t0,0}|` from the geometric side.
    pub predicted: f64,
    pub check: CheckReport,
}

/// Geometric `|b_{t0,0}|² = |a_0(t0)²| / |⟨Π_0^{t0} ξ_f, ξ_f⟩|` at `x`.
pub fn b0_squared(geom: &ModelGeometry, f: &Hamiltonian, t0: f64, x: &ChartPoint, opts: &FlowOptions) -> Result<f64> {
    let x = x.canonical();
    let a0sq = if t0 == 0.0 { C64::new(1.0, 0.0) } else { a0_squared(geom, f, t0, &x, opts)? };
    let j0 = geom.j0();
    let jt = if t0 == 0.0 {
        j0.clone()
    } else {
        let back = flow_full(f, &x, -t0, true, opts)?;
        let a = back.dphi.expect("variational flow requested");
        let ai = a.clone().try_inverse().ok_or(Error::NotTransverse { pivot: 0.0 })?;
        ai * &j0 * a
    };
    let (pi, _) = oblique_projectors(&j0, &jt)?;
    let xi: Vec<C64> = field_real(f, &x).into_iter().map(|v| C64::new(v, 0.0)).collect();
    let pxi: Vec<C64> = (&pi * crate::CVector::from_column_slice(&xi)).iter().copied().collect();
    let h = hermitian(&geom.metric(&x), &pxi, &xi);
    Ok(a0sq.norm() / h.norm())
}

#[allow(clippy::too_many_arguments)]
pub fn b_kernel_check(
    geom: &ModelGeometry,
    f: &Hamiltonian,
    c: f64,
    g: &Window<f64>,
    x: &ChartPoint,
    t0: f64,
    ps: &[i64],
    opts: &KernelCheckOptions,
) -> Result<BKernelReport> {
    if (f.value(x) - c).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("f(x) = {} is not on the level {c}", f.value(x))));
    }
    let gt = g.value(t0);
    if gt == 0.0 {
        return Err(Error::InvalidInput(format!("g vanishes at t0 = {t0}")));
    }
    let n = geom.factors() as f64;
    let y = integrate_flow(f, x, t0, &opts.flow)?;
    let samples = sweep(ps, |p| {
        let (basis, q) = quantize(geom, f, p)?;
        let m = q.apply_fn(|l| g.fourier(p as f64 * (l - c)));
        Ok(kernel_eval(&basis, &m, x, &y).norm() * (p as f64).powf(0.5 - n) / gt.abs())
    })?;
    let as_c: Vec<C64> = samples.iter().map(|&v| C64::new(v, 0.0)).collect();
    let (b, residual) = extrapolate(ps, &as_c, opts.order)?;
    let predicted = b0_squared(geom, f, t0, x, &opts.flow)?.sqrt();
    let check = CheckReport::relative("b0", b.re, predicted, opts.rel_tol);
    let check = settle(check, residual, b.re.abs(), opts.max_residual);
    Ok(BKernelReport { ps: ps.to_vec(), samples, b0_abs: b.re, residual, predicted, check })
}

#[derive(Debug, Clone)]
pub struct DecayReport {
    pub ps: Vec<i64>,
    pub values: Vec<f64>,
    /// Least-squares slope of `log value` against `log p`.
    pub exponent: f64,
}

/// Values at or below this are treated as this (round-off floor).
const DECAY_FLOOR: f64 = 1e-300;

fn decay_fit(ps: &[i64], values: Vec<f64>) -> DecayReport {
    let lx: Vec<f64> = ps.iter().map(|&p| (p as f64).ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.max(DECAY_FLOOR).ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    DecayReport { ps: ps.to_vec(), values, exponent: sxy / sxx }
}

/// `|U(t)(x, y)| p^{-n}` over the p grid.
pub fn evolution_kernel_decay(
    geom: &ModelGeometry,
    f: &Hamiltonian,
    t: f64,
    x: &ChartPoint,
    y: &ChartPoint,
    ps: &[i64],
) -> Result<DecayReport> {
    if ps.len() < 2 {
        return Err(Error::InvalidInput("a decay fit needs at least two p values".into()));
    }
    let n = geom.factors() as i32;
    let values = sweep(ps, |p| {
        let (basis, q) = quantize(geom, f, p)?;
        let u = evolution(&q, t, p);
        Ok(kernel_eval(&basis, &u.matrix, x, y).norm() / (p as f64).powi(n))
    })?;
    Ok(decay_fit(ps, values))
}

/// `|ĝ(pQ_p(f - c))(x, y)|` over the p grid.
pub fn window_kernel_decay(
    geom: &ModelGeometry,
    f: &Hamiltonian,
    c: f64,
    g: &Window<f64>,
    x: &ChartPoint,
    y: &ChartPoint,
    ps: &[i64],
) -> Result<DecayReport> {
    if ps.len() < 2 {
        return Err(Error::InvalidInput("a decay fit needs at least two p values".into()));
    }
    let values = sweep(ps, |p| {
        let (basis, q) = quantize(geom, f, p)?;
        let m = q.apply_fn(|l| g.fourier(p as f64 * (l - c)));
        Ok(kernel_eval(&basis, &m, x, y).norm())
    })?;
    Ok(decay_fit(ps, values))
}

#[derive(Debug, Clone)]
pub struct CoherentSample {
    pub p: i64,
    pub peak: ChartPoint,
    /// Distance from the peak to `φ_{-t}(x0)`.
    pub distance: f64,
    pub tolerance: f64,
    /// Fraction of `|U s_{x0}|²` outside the ball of radius `p^{-1/2} log p`.
    pub mass_outside: f64,
}

#[derive(Debug, Clone)]
pub struct CoherentReport {
    pub target: ChartPoint,
    pub samples: Vec<CoherentSample>,
    pub check: CheckReport,
}

/// Largest fraction of mass allowed outside the localization ball.
pub const COHERENT_MASS_MAX: f64 = 0.01;

pub fn coherent_propagation_check(
    geom: &ModelGeometry,
    f: &Hamiltonian,
    x0: &ChartPoint,
    t: f64,
    ps: &[i64],
    opts: &FlowOptions,
) -> Result<CoherentReport> {
    if ps.is_empty() {
        return Err(Error::InvalidInput("empty p grid".into()));
    }
    let target = integrate_flow(f, x0, -t, opts)?;
    let samples = sweep(ps, |p| {
        let (basis, q) = quantize(geom, f, p)?;
        let u = evolution(&q, t, p);
        let v = &u.matrix * coherent_state(&basis, x0);
        let grid = QuadratureGrid::for_level(geom.factors(), p, 0);
        let values = SectionGrid::from_coefficients(&basis, &grid, &v).values;
        let radius = (p as f64).powf(-0.5) * (p as f64).ln();
        let (mut total, mut outside) = (0.0, 0.0);
        let (mut best, mut best_i) = (-1.0, 0);
        for (i, s) in values.iter().enumerate() {
            let d2 = s.norm_sqr();
            let w = grid.weight(i);
            total += w * d2;
            if d2 > best {
                best = d2;
                best_i = i;
            }
            if grid.node(i).distance(&target) > radius {
                outside += w * d2;
            }
        }
        let peak = grid.node(best_i);
        Ok(CoherentSample {
            p,
            distance: peak.distance(&target),
            peak,
            tolerance: 3.0 / (p as f64).sqrt(),
            mass_outside: outside / total,
        })
    })?;
    let worst = samples.iter().map(|s| s.distance / s.tolerance).fold(0.0, f64::max);
    let last = samples.iter().max_by_key(|s| s.p).expect("nonempty");
    let mut check = CheckReport::upper("coherent_peak", worst, 1.0);
    if last.mass_outside > COHERENT_MASS_MAX {
        check.verdict = Verdict::Fail;
    }
    Ok(CoherentReport { target, samples, check })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn on_level_rotation(c: f64) -> ChartPoint {
        ChartPoint::affine(&[C64::new((c / (1.0 - c)).sqrt(), 0.0)])
    }

    #[test]
    fn rotation_a0_is_one() {
        let geom = ModelGeometry::sphere();
        let f = Hamiltonian::rotation(1);
        let x = ChartPoint::affine(&[C64::new(0.4, -0.3)]);
        let ps: Vec<i64> = (0..7).map(|k| 100 + 50 * k).collect();
        for t in [0.0, 0.3] {
            let r = a0_check(&geom, &f, t, &x, &ps, &KernelCheckOptions::default()).unwrap();
            assert!((r.a0 - 1.0).norm() < 1e-6, "t={t}: {}", r.a0);
            assert!(r.check.passed());
        }
    }

    #[test]
    fn b0_at_time_zero() {
        let geom = ModelGeometry::sphere();
        let f = Hamiltonian::rotation(1);
        let c = 0.3;
        let x = on_level_rotation(c);
        let g = Window::new(0.0, 0.5, 1.0);
        let ps: Vec<i64> = (0..7).map(|k| 100 + 50 * k).collect();
        let r = b_kernel_check(&geom, &f, c, &g, &x, 0.0, &ps, &KernelCheckOptions::default()).unwrap();
        let xi = crate::phase_space::field_norm(&geom, &f, &x);
        assert!((r.predicted - (2.0f64).sqrt() / xi).abs() < 1e-12);
        assert!((r.b0_abs / r.predicted - 1.0).abs() < 0.05, "{} vs {}", r.b0_abs, r.predicted);
        assert!(r.check.passed());
    }

    #[test]
    fn b0_after_one_period() {
        let geom = ModelGeometry::sphere();
        let f = Hamiltonian::rotation(1);
        let c = 0.3;
        let x = on_level_rotation(c);
        let g = Window::new(1.0, 0.5, 1.0);
        let ps: Vec<i64> = (0..7).map(|k| 100 + 50 * k).collect();
        let r = b_kernel_check(&geom, &f, c, &g, &x, 1.0, &ps, &KernelCheckOptions::default()).unwrap();
        assert!(r.check.passed(), "{r:?}");
    }

    #[test]
    fn decay_off_level_and_off_orbit() {
        let geom = ModelGeometry::sphere();
        let f = Hamiltonian::rotation(1);
        let g = Window::new(0.0, 0.5, 1.0);
        let ps = [20i64, 40, 80, 160];
        let x = on_level_rotation(0.6);
        let r = window_kernel_decay(&geom, &f, 0.3, &g, &x, &x, &ps).unwrap();
        assert!(r.exponent < -3.0, "{r:?}");
        let a = ChartPoint::affine(&[C64::new(0.5, 0.0)]);
        let b = ChartPoint::affine(&[C64::new(-2.0, 0.5)]);
        assert!(a.distance(&integrate_flow(&f, &b, 0.2, &FlowOptions::default()).unwrap()) > 0.5);
        let r = evolution_kernel_decay(&geom, &f, 0.2, &b, &a, &ps).unwrap();
        assert!(r.exponent < -3.0, "{r:?}");
    }

    #[test]
    fn coherent_state_follows_the_backward_flow() {
        let geom = ModelGeometry::sphere();
        let f = Hamiltonian::rotation(1);
        let x0 = ChartPoint::affine(&[C64::new(1.0, 0.0)]);
        let r = coherent_propagation_check(&geom, &f, &x0, 0.25, &[50, 100], &FlowOptions::default()).unwrap();
        let want = C64::new(0.0, 1.0);
        assert!((r.target.coordinate_in(0, 0).unwrap() - want).norm() < 1e-9);
        assert!(r.check.passed(), "{:?}", r.samples);
        let r0 = coherent_propagation_check(&geom, &f, &x0, 0.0, &[50], &FlowOptions::default()).unwrap();
        assert!(r0.samples[0].distance < 3.0 / 50f64.sqrt());
    }
}
