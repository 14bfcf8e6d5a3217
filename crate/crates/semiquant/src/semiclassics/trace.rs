//! Smoothed traces `Tr ĝ(pQ_p(f - c))` and their orbit-sum predictions.
//!
//! With `ĝ(E) = ∫ g(t) e^{-2πitE} dt` the trace is
//! `∫ g(t) e^{2πitpc} Tr U(t) dt`, so an orbit with action `λ_j` enters with
//! `e^{+2πipλ_j}`.

use super::window::Window;
use crate::operators::SpectralData;
use crate::phase_space::{holomorphic_root, liouville_volume, Hamiltonian, LevelOptions, ModelGeometry, OrbitRecord};
use crate::{Error, Result, C64};
use std::f64::consts::PI;

type WindowFunction = Window<f64>;

/// Below this `|g(t_j)|` a resonance is dropped.
pub const RESONANCE_WEIGHT_MIN: f64 = 1e-12;

/// `Σ_k ĝ(p(λ_k - c))` over the spectrum of `Q_p`.
pub fn smoothed_trace(q: &SpectralData, g: &WindowFunction, c: f64, p: i64) -> C64 {
    smoothed_trace_values(&q.values, g, c, p)
}

pub fn smoothed_trace_values(values: &[f64], g: &WindowFunction, c: f64, p: i64) -> C64 {
    let pf = p as f64;
    values.iter().map(|&l| g.fourier(pf * (l - c))).sum()
}

/// `p^{n-1} g(0) rk(E) Vol_ω(f^{-1}(c))`.
pub fn weyl_term(
    geom: &ModelGeometry,
    f: &Hamiltonian,
    c: f64,
    g: &WindowFunction,
    p: i64,
    rk_e: usize,
) -> Result<f64> {
    let g0 = g.value(0.0);
    if g0 == 0.0 {
        return Ok(0.0);
    }
    let vol = liouville_volume(geom, f, c, &LevelOptions::default())?;
    Ok((p as f64).powi(geom.factors() as i32 - 1) * g0 * rk_e as f64 * vol)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitTerm {
    pub resonant_time: f64,
    pub action: f64,
    pub dim: usize,
    pub weight: f64,
    pub stability_det: f64,
    /// Square root of the stability determinant used in `b0`.
    pub root: C64,
    /// Whether `root` is the holomorphic determinant rather than the
    /// branch-times-modulus fallback.
    pub holomorphic: bool,
    pub b0: C64,
}

impl OrbitTerm {
    /// `p^{(dim-1)/2} g(t_j) e^{2πipλ_j} b_{j,0}`.
    pub fn value(&self, p: i64) -> C64 {
        let pf = p as f64;
        let osc = C64::from_polar(1.0, 2.0 * PI * (pf * self.action).rem_euclid(1.0));
        pf.powf((self.dim as f64 - 1.0) / 2.0) * self.weight * osc * self.b0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TracePrediction {
    pub p: i64,
    pub factors: usize,
    pub level: f64,
    pub terms: Vec<OrbitTerm>,
    /// Present iff `0 ∈ supp g`.
    pub weyl: Option<f64>,
    /// Resonant times dropped as degenerate.
    pub excluded: Vec<f64>,
    /// Value of `(-1)^{(n-1)/2}` used by the modulus fallback.
    pub branch: C64,
}

impl TracePrediction {
    pub fn total(&self) -> C64 {
        self.at(self.p)
    }

    /// Leading-order model evaluated at another `p`; the Weyl term is
    /// rescaled by `p^{n-1}`.
    pub fn at(&self, p: i64) -> C64 {
        let weyl = self.weyl.unwrap_or(0.0) * (p as f64 / self.p as f64).powi(self.factors as i32 - 1);
        self.terms.iter().map(|t| t.value(p)).sum::<C64>() + weyl
    }
}

/// Branch of `(-1)^{(n-1)/2}` used for even `n`.
pub const EVEN_BRANCH: C64 = C64::new(0.0, -1.0);

/// Leading-order Gutzwiller sum for the given orbits, with
/// `b_{j,0} = e^{iΛ_j} t(Y_j) / δ_j`, `Λ_j` the twist holonomy of the orbit
/// and `δ_j` the holomorphic square root of `det_N(Id - dφ_{t_j}|_N)` (see
/// [`holomorphic_root`]). When the return map is not complex linear,
/// `δ_j = |det_N|^{1/2} / branch` with `branch` the fixed value of
/// `(-1)^{(n-1)/2}`.
pub fn gutzwiller_predict(
    geom: &ModelGeometry,
    f: &Hamiltonian,
    c: f64,
    g: &WindowFunction,
    orbits: &[OrbitRecord],
    p: i64,
    metaplectic: bool,
) -> Result<TracePrediction> {
    let n = geom.factors();
    if metaplectic && geom.twists().iter().any(|&m| m != -1) {
        return Err(Error::InvalidInput("metaplectic mode needs twist -1 on every factor".into()));
    }
    let branch = if n % 2 == 1 {
        C64::new(if (n - 1) % 4 == 0 { 1.0 } else { -1.0 }, 0.0)
    } else {
        EVEN_BRANCH * if (n - 2) % 4 == 0 { 1.0 } else { -1.0 }
    };
    let mut terms = Vec::new();
    let mut excluded = Vec::new();
    for o in orbits {
        if (o.level - c).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("orbit at level {} used for level {c}", o.level)));
        }
        let weight = g.value(o.resonant_time);
        if weight.abs() <= RESONANCE_WEIGHT_MIN {
            continue;
        }
        if !o.nondegenerate {
            excluded.push(o.resonant_time);
            continue;
        }
        let (root, holomorphic) = match holomorphic_root(o) {
            Some(r) => (r, true),
            None => (branch.inv() * o.stability_det.sqrt(), false),
        };
        let b0 = C64::from_polar(1.0, o.twist_holonomy) * o.primitive_period / root;
        terms.push(OrbitTerm {
            resonant_time: o.resonant_time,
            action: o.action,
            dim: o.dim(),
            weight,
            stability_det: o.stability_det,
            root,
            holomorphic,
            b0,
        });
    }
    let weyl = if g.contains(0.0) { Some(weyl_term(geom, f, c, g, p, 1)?) } else { None };
    Ok(TracePrediction { p, factors: n, level: c, terms, weyl, excluded, branch })
}
