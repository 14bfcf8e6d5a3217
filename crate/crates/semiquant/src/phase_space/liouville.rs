//! Liouville measure of regular level sets.
//!
//! Each factor is parametrized by `u = 1/(1+|z|²) ∈ (0, 1)` and the angle
//! `θ`, in which `ω = du dθ / 2π`. The Liouville measure of `f = c` is the
//! Gelfand-Leray residue `δ(f - c) ω^n/n!`, integrated along rays of the last
//! factor as `Σ_roots 1/|∂_u f|`.

use super::geometry::{ChartPoint, ModelGeometry};
use super::hamiltonian::Hamiltonian;
use crate::quadrature::adaptive;
use crate::{Error, Result, C64};
use std::f64::consts::PI;

/// Options for level-set integrals.
#[derive(Debug, Clone, Copy)]
pub struct LevelOptions {
    /// Regular-value threshold on `|ξ_f|_g` along the level.
    pub regular_min: f64,
    /// Angles per factor for non-invariant Hamiltonians.
    pub angles: usize,
    /// Bracketing samples per ray.
    pub ray_samples: usize,
    pub tol: f64,
}

impl Default for LevelOptions {
    fn default() -> Self {
        Self { regular_min: 1e-3, angles: 256, ray_samples: 400, tol: 1e-12 }
    }
}

/// Point with `u = 1/(1+|z|²)` and angle `θ` on one factor, in the chart
/// that keeps the coordinate bounded, plus `dζ/du` there.
pub(crate) fn ray_coordinate(u: f64, theta: f64) -> (u8, C64, C64) {
    let e = C64::from_polar(1.0, theta);
    if u >= 0.5 {
        let r = ((1.0 - u) / u).sqrt();
        let drdu = if r > 0.0 { -1.0 / (2.0 * r * u * u) } else { f64::NEG_INFINITY };
        (0, e * r, e * drdu)
    } else {
        let rho = (u / (1.0 - u)).sqrt();
        let drdu = if rho > 0.0 { 1.0 / (2.0 * rho * (1.0 - u) * (1.0 - u)) } else { f64::INFINITY };
        (1, e.conj() * rho, e.conj() * drdu)
    }
}

/// `f` and `∂_u f` with factor `k` placed at `(u, θ)` in `base`.
pub(crate) fn ray_value(f: &Hamiltonian, base: &ChartPoint, k: usize, u: f64, theta: f64, deriv: bool) -> (f64, f64) {
    let (chart, z, dz) = ray_coordinate(u, theta);
    let mut x = base.clone();
    x.chart[k] = chart;
    x.z[k] = z;
    let jet = f.jet_in(&x.chart, &x.z, false);
    if !deriv {
        return (jet.f, 0.0);
    }
    let d = if dz.re.is_finite() && dz.im.is_finite() { 2.0 * (jet.fz[k] * dz).re } else { f64::INFINITY };
    (jet.f, d)
}

/// Roots in `u ∈ [0, 1]` of `f - c` along the ray of factor `k` at angle `θ`.
pub(crate) fn ray_roots(f: &Hamiltonian, base: &ChartPoint, k: usize, theta: f64, c: f64, samples: usize) -> Vec<f64> {
    let g = |u: f64| ray_value(f, base, k, u, theta, false).0 - c;
    let n = samples.max(8);
    let mut roots = Vec::new();
    let mut u0 = 0.0;
    let mut g0 = g(u0);
    if g0 == 0.0 {
        roots.push(0.0);
    }
    for i in 1..=n {
        let u1 = i as f64 / n as f64;
        let g1 = g(u1);
        if g1 == 0.0 {
            roots.push(u1);
        } else if g0 != 0.0 && g0.signum() != g1.signum() {
            let (mut a, mut b, mut ga) = (u0, u1, g0);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                let gm = g(m);
                if gm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if gm.signum() == ga.signum() {
                    a = m;
                    ga = gm;
                } else {
                    b = m;
                }
            }
            roots.push(0.5 * (a + b));
        }
        u0 = u1;
        g0 = g1;
    }
    roots
}

/// `|ξ_f|_g` at `x`, from the round metric.
pub fn field_norm(geom: &ModelGeometry, f: &Hamiltonian, x: &ChartPoint) -> f64 {
    let xi = f.vector_field_unchecked(&x.chart, &x.z);
    let g = geom.metric(x);
    let mut acc = 0.0;
    for (i, v) in xi.iter().enumerate() {
        acc += g[(2 * i, 2 * i)] * v.norm_sqr();
    }
    acc.sqrt()
}

/// `Vol_ω(f^{-1}(c))`, the Liouville measure of a regular level.
pub fn liouville_volume(geom: &ModelGeometry, f: &Hamiltonian, c: f64, opts: &LevelOptions) -> Result<f64> {
    let s = geom.factors();
    if f.factors() != s {
        return Err(Error::InvalidInput("geometry and Hamiltonian disagree on the factor count".into()));
    }
    let invariant = f.is_rotation_invariant();
    let nang = if invariant { 1 } else { opts.angles.max(4) };
    let mut critical: Vec<(f64, f64)> = Vec::new();
    let mut hits = 0usize;

    // Integrand over the last factor's rays for a fixed base point.
    let ray_sum = |base: &ChartPoint, theta: f64, critical: &mut Vec<(f64, f64)>, hits: &mut usize| -> f64 {
        let k = s - 1;
        let mut acc = 0.0;
        for u in ray_roots(f, base, k, theta, c, opts.ray_samples) {
            *hits += 1;
            let (chart, z, _) = ray_coordinate(u, theta);
            let mut x = base.clone();
            x.chart[k] = chart;
            x.z[k] = z;
            if field_norm(geom, f, &x) < opts.regular_min {
                if critical.len() < 16 {
                    let za = x.coordinate_in(k, 0).unwrap_or(C64::new(f64::INFINITY, 0.0));
                    critical.push((za.re, za.im));
                }
                continue;
            }
            let (_, d) = ray_value(f, base, k, u, theta, true);
            if d.is_finite() && d != 0.0 {
                acc += 1.0 / d.abs();
            }
        }
        acc
    };

    let total = match s {
        1 => {
            let base = ChartPoint::affine(&[C64::new(0.0, 0.0)]);
            let mut acc = 0.0;
            for a in 0..nang {
                let th = 2.0 * PI * a as f64 / nang as f64;
                acc += ray_sum(&base, th, &mut critical, &mut hits);
            }
            acc / nang as f64
        }
        2 => {
            let mut acc = 0.0;
            for a in 0..nang {
                let th1 = 2.0 * PI * a as f64 / nang as f64;
                for b in 0..nang {
                    let th2 = 2.0 * PI * b as f64 / nang as f64;
                    let inner = |u1: f64| {
                        let (ch, z, _) = ray_coordinate(u1, th1);
                        let base = ChartPoint { chart: vec![ch, 0], z: vec![z, C64::new(0.0, 0.0)] };
                        let mut crit = Vec::new();
                        let mut h = 0;
                        let v = ray_sum(&base, th2, &mut crit, &mut h);
                        (v, crit, h)
                    };
                    let mut crit_acc: Vec<(f64, f64)> = Vec::new();
                    let (v, _) = adaptive(
                        |u1| {
                            let (v, crit, h) = inner(u1);
                            hits += h;
                            if crit_acc.len() < 16 {
                                crit_acc.extend(crit);
                            }
                            v
                        },
                        0.0,
                        1.0,
                        opts.tol,
                        40,
                    );
                    critical.extend(crit_acc);
                    acc += v;
                }
            }
            acc / (nang * nang) as f64
        }
        _ => {
            return Err(Error::InvalidInput("level volumes are implemented for one or two factors".into()));
        }
    };
    if !critical.is_empty() {
        critical.truncate(16);
        return Err(Error::NearCritical { level: c, points: critical });
    }
    if hits == 0 {
        return Err(Error::EmptyLevel { level: c });
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_levels_have_unit_volume() {
        let geom = ModelGeometry::sphere();
        let f = Hamiltonian::rotation(1);
        for c in [0.1, 0.3, 0.77] {
            let v = liouville_volume(&geom, &f, c, &LevelOptions::default()).unwrap();
            assert!((v - 1.0).abs() < 1e-12, "{c}: {v}");
        }
    }

    #[test]
    fn scaled_rotation() {
        let geom = ModelGeometry::sphere();
        let f = Hamiltonian::rotation(1).affine(2.5, 0.0);
        let v = liouville_volume(&geom, &f, 2.5 * 0.4, &LevelOptions::default()).unwrap();
        assert!((v - 0.4).abs() < 1e-12);
    }

    #[test]
    fn critical_and_empty_levels_refuse() {
        let geom = ModelGeometry::sphere();
        let f = Hamiltonian::rotation(1);
        let r = liouville_volume(&geom, &f, 1e-9, &LevelOptions::default());
        assert!(matches!(r, Err(Error::NearCritical { .. })), "{r:?}");
        let r = liouville_volume(&geom, &f, 1.5, &LevelOptions::default());
        assert!(matches!(r, Err(Error::EmptyLevel { .. })));
    }

    #[test]
    fn product_rotation_closed_form() {
        // Level {u1' + √2 u2' = c} in the unit square of f0 values: the
        // segment has Liouville measure c/√2 for c ≤ 1.
        let geom = ModelGeometry::product(2, 0).unwrap();
        let f = Hamiltonian::product(&[1.0, 2f64.sqrt()]).unwrap();
        let v = liouville_volume(&geom, &f, 0.5, &LevelOptions::default()).unwrap();
        assert!((v - 0.5 / 2f64.sqrt()).abs() < 1e-8, "{v}");
    }
}
