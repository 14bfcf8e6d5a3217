//! Periodic orbits on a level set, their actions and linearized return maps.
//!
//! Candidates come from seeds on the level: every factor but one is pinned
//! at a pole or on a ray and the free factor is solved along rays. A seed is
//! flowed until its distance to the start has a clear local minimum, and the
//! pair (point, period) is then refined by Gauss-Newton on
//! `φ_T(x) - x = 0`, `f(x) = c`, `⟨ξ_f(x₀), δx⟩ = 0`.

use super::flow::{closure_defect, field_real, flow_full, FlowOptions, FlowTracker};
use super::geometry::{complex_as_real, ChartPoint, ModelGeometry};
use super::hamiltonian::Hamiltonian;
use super::liouville::{field_norm, ray_coordinate, ray_roots};
use crate::{Error, RMatrix, Result, C64};
use rayon::prelude::*;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct OrbitOptions {
    pub flow: FlowOptions,
    /// Closure defect accepted after refinement (chart coordinates).
    pub newton_tol: f64,
    pub max_iter: usize,
    /// Orbits with `|det(Id - P)|` below this are flagged degenerate.
    pub nondeg_min: f64,
    /// Regular-value threshold on `|ξ_f|_g`.
    pub regular_min: f64,
    /// Rays per factor used for seeding.
    pub rays: usize,
    /// Sampling stride of the return search.
    pub stride: f64,
    /// Longest primitive period searched.
    pub max_period: f64,
    /// Additional seeds on the level.
    pub extra_seeds: Vec<ChartPoint>,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        Self {
            flow: FlowOptions::default(),
            newton_tol: 1e-10,
            max_iter: 30,
            nondeg_min: 1e-8,
            regular_min: 1e-3,
            rays: 4,
            stride: 2e-3,
            max_period: 10.0,
            extra_seeds: Vec::new(),
        }
    }
}

/// A closed orbit `Y` with a resonant time `t_j = k·t(Y)`.
#[derive(Debug, Clone)]
pub struct OrbitRecord {
    pub level: f64,
    pub point: ChartPoint,
    pub primitive_period: f64,
    pub resonant_time: f64,
    /// `k` in `t_j = k·t(Y)`; negative for backward times.
    pub repetition: i64,
    /// Action mod 1, see [`prequantum_action`].
    pub action: f64,
    /// `dφ_{t_j}` at `point` in chart coordinates.
    pub monodromy: RMatrix,
    /// Return map on the normal bundle, in a `g`-orthonormal basis.
    pub return_map: RMatrix,
    /// `J_0` restricted to the normal bundle, same basis.
    pub normal_j: RMatrix,
    pub stability_det: f64,
    pub nondegenerate: bool,
    /// Phase of the lifted flow on the twist bundle around the loop.
    pub twist_holonomy: f64,
    pub closure_defect: f64,
    /// `|ξ_f|_g` at `point`.
    pub field_norm: f64,
}

impl OrbitRecord {
    /// Real dimension of the orbit; always 1 for isolated orbits.
    pub fn dim(&self) -> usize {
        1
    }
}

/// Square root of `det_N(Id - P)`, `P` the return map, given by the complex
/// determinant of `Id - P` on the `+i` eigenspace of `J_0` when `P` is
/// complex linear. `None` when it is not; 1 for an empty normal bundle.
pub fn holomorphic_root(orbit: &OrbitRecord) -> Option<C64> {
    let n = orbit.return_map.nrows();
    if n == 0 {
        return Some(C64::new(1.0, 0.0));
    }
    let (p, j) = (&orbit.return_map, &orbit.normal_j);
    let scale = p.norm().max(1.0);
    if (p * j - j * p).norm() > 1e-8 * scale {
        return None;
    }
    // Basis of the +i eigenspace: columns v - iJv over real v.
    let jc = j.map(|v| C64::new(v, 0.0));
    let mut cols: Vec<nalgebra::DVector<C64>> = Vec::new();
    for k in 0..n {
        let mut e = nalgebra::DVector::<C64>::zeros(n);
        e[k] = C64::new(1.0, 0.0);
        let mut v = &e - &jc * &e * C64::new(0.0, 1.0);
        for b in &cols {
            let proj = b.dotc(&v);
            v -= b * proj;
        }
        let nv = v.norm();
        if nv > 1e-8 {
            cols.push(v / C64::new(nv, 0.0));
        }
        if cols.len() == n / 2 {
            break;
        }
    }
    let v = crate::CMatrix::from_columns(&cols);
    let a = crate::CMatrix::identity(n, n) - p.map(|x| C64::new(x, 0.0));
    Some((v.adjoint() * a * &v).determinant())
}

/// `|det_N(Id - dφ_{t_j}|_N)|`; 1 for an empty normal bundle.
pub fn stability_determinant(orbit: &OrbitRecord) -> f64 {
    let n = orbit.return_map.nrows();
    if n == 0 {
        return 1.0;
    }
    (RMatrix::identity(n, n) - &orbit.return_map).determinant().abs()
}

/// Action `λ` of the closed loop `t ↦ φ_t(x)`, `t ∈ [0, t_j]`: the lift of
/// `f - f(x)` to `L` acts on the fibre at `x` by `e^{2πiλ}`. For a rotation
/// orbit at level `c` this is `t_j·c`.
pub fn prequantum_action(f: &Hamiltonian, x: &ChartPoint, t: f64, opts: &OrbitOptions) -> Result<f64> {
    let out = flow_full(f, x, t, false, &opts.flow)?;
    let defect = closure_defect(&out.point, x);
    if defect > opts.newton_tol.max(1e-9) {
        return Err(Error::NotClosed { defect });
    }
    Ok(level_action(&out.lift))
}

fn level_action(lift: &super::flow::LiftPhase) -> f64 {
    let zeros = vec![0; lift.connection.len()];
    ((lift.phase(1, &zeros) + 2.0 * PI * lift.time * lift.energy) / (2.0 * PI)).rem_euclid(1.0)
}

/// Real gradient of `f` in chart coordinates.
fn gradient(f: &Hamiltonian, x: &ChartPoint) -> Vec<f64> {
    let jet = f.jet_in(&x.chart, &x.z, false);
    (0..x.factors()).flat_map(|i| [2.0 * jet.fz[i].re, -2.0 * jet.fz[i].im]).collect()
}

/// Expresses `y` and the rows of `m` (tangent vectors at `y`) in the charts of
/// `reference`.
fn rechart_like(y: &ChartPoint, m: &mut RMatrix, reference: &ChartPoint) -> Option<ChartPoint> {
    let mut out = y.clone();
    for i in 0..y.factors() {
        if y.chart[i] != reference.chart[i] {
            let zeta = y.coordinate_in(i, reference.chart[i])?;
            let t = complex_as_real(-(zeta * zeta));
            for col in 0..m.ncols() {
                let r0 = m[(2 * i, col)];
                let r1 = m[(2 * i + 1, col)];
                m[(2 * i, col)] = t[0][0] * r0 + t[0][1] * r1;
                m[(2 * i + 1, col)] = t[1][0] * r0 + t[1][1] * r1;
            }
            out.chart[i] = reference.chart[i];
            out.z[i] = zeta;
        }
    }
    Some(out)
}

/// Gauss-Newton refinement of a closed orbit through `x` with period near `t`.
fn refine(f: &Hamiltonian, c: f64, x: &ChartPoint, t: f64, opts: &OrbitOptions) -> Result<(ChartPoint, f64, f64)> {
    let s = x.factors();
    let n = 2 * s;
    let mut x = x.canonical();
    let t_guess = t;
    let mut t = t;
    let xi0 = field_real(f, &x);
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iter {
        let out = flow_full(f, &x, t, true, &opts.flow)?;
        let mut m = out.dphi.expect("variational");
        let xi_y = {
            let v = field_real(f, &out.point);
            RMatrix::from_column_slice(n, 1, &v)
        };
        let mut aug = RMatrix::zeros(n, n + 1);
        aug.view_mut((0, 0), (n, n)).copy_from(&m);
        aug.view_mut((0, n), (n, 1)).copy_from(&xi_y);
        let Some(y) = rechart_like(&out.point, &mut aug, &x) else {
            return Err(Error::NewtonFailed { residual, iterations: 0 });
        };
        m = aug.view((0, 0), (n, n)).into_owned();
        let xi_col = aug.column(n).into_owned();
        let rx: Vec<f64> = (0..s).flat_map(|i| [y.z[i].re - x.z[i].re, y.z[i].im - x.z[i].im]).collect();
        let fe = f.value(&x) - c;
        residual = rx.iter().map(|v| v * v).sum::<f64>().sqrt().max(fe.abs());
        if residual < opts.newton_tol {
            return Ok((x, t, residual));
        }
        let grad = gradient(f, &x);
        let mut a = RMatrix::zeros(n + 2, n + 1);
        let mut b = nalgebra::DVector::zeros(n + 2);
        for r in 0..n {
            for col in 0..n {
                a[(r, col)] = m[(r, col)] - if r == col { 1.0 } else { 0.0 };
            }
            a[(r, n)] = xi_col[r];
            b[r] = -rx[r];
        }
        for col in 0..n {
            a[(n, col)] = grad[col];
            a[(n + 1, col)] = xi0[col];
        }
        b[n] = -fe;
        let svd = a.svd(true, true);
        let delta = svd.solve(&b, 1e-12).map_err(|_| Error::NewtonFailed { residual, iterations: 0 })?;
        for i in 0..s {
            x.z[i] += C64::new(delta[2 * i], delta[2 * i + 1]);
        }
        t += delta[n];
        x = x.canonical();
        // The trivial solution T = 0 attracts poor guesses.
        if !(0.5 * t_guess..=2.0 * t_guess).contains(&t) {
            break;
        }
    }
    Err(Error::NewtonFailed { residual, iterations: opts.max_iter })
}

/// First clear local minimum of `t ↦ |φ_t(x) - x|` after the trajectory has
/// left a neighbourhood of `x`.
fn first_return_guess(f: &Hamiltonian, x: &ChartPoint, opts: &OrbitOptions) -> Result<Option<f64>> {
    let mut tr = FlowTracker::new(f, x, false);
    let mut far = 0.0f64;
    let mut prev = (0.0, 0.0);
    let mut prev2 = (0.0, f64::INFINITY);
    let mut t = 0.0;
    while t < opts.max_period * (1.0 + 1e-9) {
        t += opts.stride;
        tr.advance(t, &opts.flow)?;
        let d = closure_defect(&tr.snapshot().point, x);
        far = far.max(d);
        if prev.0 > 0.0 && prev.1 < prev2.1 && prev.1 <= d && prev.1 < 0.25 * far {
            return Ok(Some(prev.0));
        }
        prev2 = prev;
        prev = (t, d);
    }
    Ok(None)
}

/// Seeds on the level `f = c`.
fn seeds(f: &Hamiltonian, c: f64, opts: &OrbitOptions) -> Vec<ChartPoint> {
    let s = f.factors();
    let rays: Vec<f64> = (0..opts.rays.max(1)).map(|k| 2.0 * PI * k as f64 / opts.rays.max(1) as f64).collect();
    let mut out = Vec::new();
    let samples = 400;
    if s == 1 {
        let base = ChartPoint::affine(&[C64::new(0.0, 0.0)]);
        for &th in &rays {
            for u in ray_roots(f, &base, 0, th, c, samples) {
                let (ch, z, _) = ray_coordinate(u, th);
                out.push(ChartPoint { chart: vec![ch], z: vec![z] });
            }
        }
    } else {
        // All but one factor at a pole or on a ray; the free factor solves.
        let mut anchors: Vec<(u8, C64)> = vec![(0, C64::new(0.0, 0.0)), (1, C64::new(0.0, 0.0))];
        for &th in &rays {
            anchors.push((0, C64::from_polar(1.0, th)));
        }
        for free in 0..s {
            let others: Vec<usize> = (0..s).filter(|&i| i != free).collect();
            let combos = anchors.len().pow(others.len() as u32);
            for code in 0..combos {
                let mut base = ChartPoint::affine(&vec![C64::new(0.0, 0.0); s]);
                let mut k = code;
                for &i in &others {
                    let (ch, z) = anchors[k % anchors.len()];
                    k /= anchors.len();
                    base.chart[i] = ch;
                    base.z[i] = z;
                }
                for &th in &rays {
                    for u in ray_roots(f, &base, free, th, c, samples) {
                        let (ch, z, _) = ray_coordinate(u, th);
                        let mut x = base.clone();
                        x.chart[free] = ch;
                        x.z[free] = z;
                        out.push(x);
                    }
                }
            }
        }
    }
    out.extend(opts.extra_seeds.iter().cloned());
    out
}

/// Whether `y` lies on the closed orbit through `x` of period `t`.
fn on_orbit(f: &Hamiltonian, x: &ChartPoint, t: f64, y: &ChartPoint, opts: &OrbitOptions) -> Result<bool> {
    let n = 400usize;
    let mut tr = FlowTracker::new(f, x, false);
    let mut best = (0.0, closure_defect(x, y));
    for k in 1..=n {
        let tk = t * k as f64 / n as f64;
        tr.advance(tk, &opts.flow)?;
        let d = closure_defect(&tr.snapshot().point, y);
        if d < best.1 {
            best = (tk, d);
        }
    }
    // Golden-section polish around the best sample.
    let h = t / n as f64;
    let (mut a, mut b) = (best.0 - h, best.0 + h);
    let dist = |s: f64| -> Result<f64> {
        let p = flow_full(f, x, s, false, &opts.flow)?.point;
        Ok(closure_defect(&p, y))
    };
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..40 {
        let m1 = b - gr * (b - a);
        let m2 = a + gr * (b - a);
        if dist(m1)? < dist(m2)? {
            b = m2;
        } else {
            a = m1;
        }
    }
    Ok(dist(0.5 * (a + b))?.min(best.1) < 1e-7)
}

/// Primitive closed orbits `(point, period)` on the level `c`, sorted by
/// period.
pub fn primitive_orbits(
    geom: &ModelGeometry,
    f: &Hamiltonian,
    c: f64,
    opts: &OrbitOptions,
) -> Result<Vec<(ChartPoint, f64)>> {
    let (candidates, critical): (Vec<ChartPoint>, Vec<ChartPoint>) =
        seeds(f, c, opts).into_iter().partition(|x| field_norm(geom, f, x) >= opts.regular_min);
    if candidates.is_empty() {
        if !critical.is_empty() {
            let pts = critical.iter().map(|x| (x.z[0].re, x.z[0].im)).take(16).collect();
            return Err(Error::NearCritical { level: c, points: pts });
        }
        return Ok(Vec::new());
    }
    let refined: Vec<Option<(ChartPoint, f64)>> = candidates
        .par_iter()
        .map(|x| -> Option<(ChartPoint, f64)> {
            let guess = first_return_guess(f, x, opts).ok()??;
            let (y, t, _) = refine(f, c, x, guess, opts).ok()?;
            // Reduce to the primitive period.
            for k in (2..=6).rev() {
                let tk = t / k as f64;
                if let Ok(p) = flow_full(f, &y, tk, false, &opts.flow) {
                    if closure_defect(&p.point, &y) < 1e-8 {
                        if let Ok((y2, t2, _)) = refine(f, c, &y, tk, opts) {
                            return Some((y2, t2));
                        }
                    }
                }
            }
            Some((y, t))
        })
        .collect();
    let mut found: Vec<(ChartPoint, f64)> = refined.into_iter().flatten().collect();
    found.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut unique: Vec<(ChartPoint, f64)> = Vec::new();
    for (y, t) in found {
        let mut dup = false;
        for (u, tu) in &unique {
            if (t - tu).abs() < 1e-6 * tu.max(1.0) && on_orbit(f, u, *tu, &y, opts)? {
                dup = true;
                break;
            }
        }
        if !dup {
            unique.push((y, t));
        }
    }
    Ok(unique)
}

/// `g`-orthonormal basis of the normal bundle `N = ξ^⊥ ∩ ker df` at `x`.
fn normal_basis(geom: &ModelGeometry, f: &Hamiltonian, x: &ChartPoint) -> RMatrix {
    let n = 2 * x.factors();
    let g = geom.metric(x);
    let xi = RMatrix::from_column_slice(n, 1, &field_real(f, x));
    // ∇_g f = -J ξ / ... is g-orthogonal to ker df; use J_0 ξ.
    let jxi = geom.j0() * &xi;
    let mut basis: Vec<nalgebra::DVector<f64>> = Vec::new();
    let ip = |a: &nalgebra::DVector<f64>, b: &nalgebra::DVector<f64>| (a.transpose() * &g * b)[(0, 0)];
    let mut excluded = vec![xi.column(0).into_owned(), jxi.column(0).into_owned()];
    for v in excluded.iter_mut() {
        let nv = ip(v, v).sqrt();
        *v /= nv;
    }
    // Orthonormalize xi, Jxi (they are g-orthogonal already), then fill.
    for k in 0..n {
        let mut v = nalgebra::DVector::zeros(n);
        v[k] = 1.0;
        for e in excluded.iter().chain(basis.iter()) {
            let proj = ip(e, &v);
            v -= e * proj;
        }
        let nv = ip(&v, &v).sqrt();
        if nv > 1e-8 {
            basis.push(v / nv);
        }
        if basis.len() == n - 2 {
            break;
        }
    }
    if basis.is_empty() {
        return RMatrix::zeros(n, 0);
    }
    RMatrix::from_columns(&basis)
}

/// Closed orbits on `f = c` with resonant times `t_j` in the open window
/// `(t_min, t_max)`, sorted by resonant time.
pub fn find_periodic_orbits(
    geom: &ModelGeometry,
    f: &Hamiltonian,
    c: f64,
    window: (f64, f64),
    opts: &OrbitOptions,
) -> Result<Vec<OrbitRecord>> {
    let (lo, hi) = window;
    if hi <= lo {
        return Ok(Vec::new());
    }
    let mut o = opts.clone();
    o.max_period = o.max_period.min(lo.abs().max(hi.abs()));
    let orbits = primitive_orbits(geom, f, c, &o)?;
    let mut out = Vec::new();
    for (x, period) in orbits {
        if period < 1e-6 {
            continue;
        }
        let kmin = (lo / period).floor() as i64;
        let kmax = (hi / period).ceil() as i64;
        for k in kmin..=kmax {
            let tj = k as f64 * period;
            if k == 0 || tj <= lo || tj >= hi {
                continue;
            }
            out.push(resonance_record(geom, f, c, &x, period, k, opts)?);
        }
    }
    out.sort_by(|a, b| a.resonant_time.total_cmp(&b.resonant_time).then(a.level.total_cmp(&b.level)));
    Ok(out)
}

/// Record for the `k`-th repetition of the closed orbit through `x`.
pub fn resonance_record(
    geom: &ModelGeometry,
    f: &Hamiltonian,
    c: f64,
    x: &ChartPoint,
    period: f64,
    k: i64,
    opts: &OrbitOptions,
) -> Result<OrbitRecord> {
    let tj = k as f64 * period;
    let out = flow_full(f, x, tj, true, &opts.flow)?;
    let mut dphi = out.dphi.clone().expect("variational");
    let y = rechart_like(&out.point, &mut dphi, x).ok_or(Error::NotClosed { defect: f64::INFINITY })?;
    let defect = closure_defect(&y, x);
    let nb = normal_basis(geom, f, x);
    let g = geom.metric(x);
    let ret = nb.transpose() * &g * &dphi * &nb;
    let normal_j = nb.transpose() * &g * geom.j0() * &nb;
    let mut rec = OrbitRecord {
        level: c,
        point: x.clone(),
        primitive_period: period,
        resonant_time: tj,
        repetition: k,
        action: level_action(&out.lift),
        monodromy: dphi,
        return_map: ret,
        normal_j,
        stability_det: 0.0,
        nondegenerate: false,
        twist_holonomy: out.lift.twist_phase(geom.twists()),
        closure_defect: defect,
        field_norm: field_norm(geom, f, x),
    };
    rec.stability_det = stability_determinant(&rec);
    rec.nondegenerate = rec.stability_det >= opts.nondeg_min;
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_orbits_in_window() {
        let geom = ModelGeometry::sphere();
        let f = Hamiltonian::rotation(1);
        let recs = find_periodic_orbits(&geom, &f, 0.3, (0.0, 2.5), &OrbitOptions::default()).unwrap();
        let times: Vec<f64> = recs.iter().map(|r| r.resonant_time).collect();
        assert_eq!(times.len(), 2, "{times:?}");
        assert!((times[0] - 1.0).abs() < 1e-9 && (times[1] - 2.0).abs() < 1e-9);
        for r in &recs {
            assert!((r.primitive_period - 1.0).abs() < 1e-10);
            assert_eq!(r.stability_det, 1.0);
            assert!(r.closure_defect < 1e-10);
            let expect = (r.resonant_time * 0.3).rem_euclid(1.0);
            assert!((r.action - expect).abs() < 1e-9, "{} vs {expect}", r.action);
        }
    }

    #[test]
    fn empty_window() {
        let geom = ModelGeometry::sphere();
        let f = Hamiltonian::rotation(1);
        let recs = find_periodic_orbits(&geom, &f, 0.3, (0.2, 0.8), &OrbitOptions::default()).unwrap();
        assert!(recs.is_empty());
    }

    #[test]
    fn fixed_point_action_is_zero() {
        let f = Hamiltonian::rotation(1);
        let x = ChartPoint::affine(&[C64::new(0.0, 0.0)]);
        let lam = prequantum_action(&f, &x, 3.0, &OrbitOptions::default()).unwrap();
        assert!(lam.abs() < 1e-12 || (lam - 1.0).abs() < 1e-12);
    }

    #[test]
    fn open_loop_is_refused() {
        let f = Hamiltonian::rotation(1);
        let x = ChartPoint::affine(&[C64::new(0.5, 0.0)]);
        assert!(matches!(prequantum_action(&f, &x, 0.5, &OrbitOptions::default()), Err(Error::NotClosed { .. })));
    }

    #[test]
    fn product_orbit_at_pole() {
        let geom = ModelGeometry::product(2, -1).unwrap();
        let w2 = 2f64.sqrt();
        let f = Hamiltonian::product(&[1.0, w2]).unwrap();
        let recs = find_periodic_orbits(&geom, &f, 0.5, (0.5, 0.9), &OrbitOptions::default()).unwrap();
        assert_eq!(recs.len(), 1, "{recs:?}");
        let r = &recs[0];
        assert!((r.primitive_period - 1.0 / w2).abs() < 1e-9);
        let theta = 2.0 * PI / w2;
        let expect = 4.0 * (theta / 2.0).sin().powi(2);
        assert!((r.stability_det - expect).abs() < 1e-8, "{} vs {expect}", r.stability_det);
        assert!((r.monodromy.determinant() - 1.0).abs() < 1e-8);
    }
}
