//! Complex-structure paths `J_t = dφ_t J_0 dφ_t^{-1}` and the pointwise
//! coefficients built from them.
//!
//! # Canonical transport
//!
//! Fix `x` and follow `J_s(x) = A_s^{-1} J_0 A_s` with `A_s = dφ_{-s}(x)`, so
//! that `d/ds A_s = -M A_s` with `M` the Jacobian of the Hamiltonian field at
//! `φ_{-s}(x)` and `J̇_s = A_s^{-1} [M, J_0] A_s`. The metric along the path is
//! `g_s = Ω J_s` with `Ω` frozen at `x`.
//!
//! The vertical Levi-Civita connection of the family of metrics on the fixed
//! tangent space is, for the product metric `ds² + g_s`,
//! `∇_{∂s} V = ∂_s V + ½ g_s^{-1} ġ_s V`; compressing to `T^{(1,0)}_s` with
//! `P_s = (1 - iJ_s)/2` gives the transport of a frame `W` of `T^{(1,0)}_s`:
//!
//! ```text
//! dW/ds = -P_s(½ g_s^{-1} ġ_s W) - (i/2) J̇_s W.
//! ```
//!
//! The second term is `Ṗ_s W` for `W` in the range of `P_s`; it keeps `W`
//! inside `T^{(1,0)}_s`. The induced map on `K_X = det T^{(1,0)*}` is
//! reported in unit frames, referring `W_T` to `E_T = P_T V_0` where `V_0`
//! is the standard frame at `s = 0`.

use super::flow::field_jacobian_at;
use super::geometry::{ChartPoint, ModelGeometry};
use super::hamiltonian::Hamiltonian;
use super::flow::{flow_full, FlowOptions};
use crate::ode::{integrate, OdeError, OdeSystem};
use crate::{CMatrix, Error, RMatrix, Result, C64};
use std::f64::consts::PI;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone)]
pub struct TangentData {
    /// Point where `J_t` lives, `φ_t(source)`.
    pub base: ChartPoint,
    pub source: ChartPoint,
    pub j0: RMatrix,
    pub jt: RMatrix,
    /// `dφ_t` at `source`.
    pub dphi: RMatrix,
    pub pi_0t: CMatrix,
    pub pibar_t0: CMatrix,
}

fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|v| C64::new(v, 0.0))
}

/// `J_t` at `φ_t(x)` with the oblique projectors relative to `J_0`.
pub fn pushforward_complex_structure(
    geom: &ModelGeometry,
    f: &Hamiltonian,
    t: f64,
    x: &ChartPoint,
    opts: &FlowOptions,
) -> Result<TangentData> {
    let out = flow_full(f, x, t, true, opts)?;
    let dphi = out.dphi.expect("variational flow requested");
    let inv = dphi.clone().try_inverse().ok_or(Error::NotTransverse { pivot: 0.0 })?;
    let j0 = geom.j0();
    let jt = &dphi * &j0 * inv;
    let (pi_0t, pibar_t0) = oblique_projectors(&j0, &jt)?;
    Ok(TangentData { base: out.point, source: x.clone(), j0, jt, dphi, pi_0t, pibar_t0 })
}

/// Basis of the `-i` eigenspace of `J`: independent columns of `1 + iJ`.
fn antiholomorphic_frame(j: &RMatrix) -> Result<CMatrix> {
    let n = j.nrows();
    let s = n / 2;
    let m = CMatrix::identity(n, n) + to_complex(j) * I;
    let mut cols: Vec<nalgebra::DVector<C64>> = Vec::new();
    let mut avail: Vec<nalgebra::DVector<C64>> = (0..n).map(|c| m.column(c).into_owned()).collect();
    for _ in 0..s {
        // Column-pivoted Gram-Schmidt.
        let (k, norm) = avail
            .iter()
            .enumerate()
            .map(|(k, v)| (k, v.norm()))
            .fold((0, -1.0), |b, c| if c.1 > b.1 { c } else { b });
        if norm < 1e-12 {
            return Err(Error::NotTransverse { pivot: norm });
        }
        let v = avail.remove(k) / C64::new(norm, 0.0);
        for w in avail.iter_mut() {
            let proj = v.dotc(w);
            *w -= &v * proj;
        }
        cols.push(v);
    }
    Ok(CMatrix::from_columns(&cols))
}

/// Standard frame of `T^{(1,0)}` for `J_0`: `∂x_i - i ∂y_i` per factor.
fn holomorphic_frame0(s: usize) -> CMatrix {
    let mut v = CMatrix::zeros(2 * s, s);
    for i in 0..s {
        v[(2 * i, i)] = C64::new(1.0, 0.0);
        v[(2 * i + 1, i)] = C64::new(0.0, -1.0);
    }
    v
}

/// `(Π_0^t, Π̄_t^0)`: projection onto `T^{(1,0)}` of `J_0` along `T^{(0,1)}`
/// of `J_t`, and its complement.
pub fn oblique_projectors(j0: &RMatrix, jt: &RMatrix) -> Result<(CMatrix, CMatrix)> {
    let n = j0.nrows();
    if n % 2 != 0 || j0.shape() != jt.shape() || jt.nrows() != jt.ncols() {
        return Err(Error::InvalidInput("complex structures must be square of even size".into()));
    }
    let s = n / 2;
    let id = CMatrix::identity(n, n);
    let vplus = (&id - to_complex(j0) * I) * holomorphic_frame0(s);
    let vminus = antiholomorphic_frame(jt)?;
    let mut basis = CMatrix::zeros(n, n);
    for c in 0..s {
        let a = vplus.column(c).normalize();
        basis.set_column(c, &a);
        basis.set_column(s + c, &vminus.column(c));
    }
    let sv = basis.clone().singular_values();
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if smin < 1e-10 {
        return Err(Error::NotTransverse { pivot: smin });
    }
    let inv = basis.clone().try_inverse().ok_or(Error::NotTransverse { pivot: smin })?;
    let mut sel = CMatrix::zeros(n, n);
    for c in 0..s {
        sel[(c, c)] = C64::new(1.0, 0.0);
    }
    let pi = &basis * sel * inv;
    let pibar = &id - &pi;
    Ok((pi, pibar))
}

/// Hermitian extension `⟨u, v⟩ = uᵀ g v̄` of a real metric.
pub fn hermitian(g: &RMatrix, u: &[C64], v: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for a in 0..u.len() {
        for b in 0..v.len() {
            acc += u[a] * g[(a, b)] * v[b].conj();
        }
    }
    acc
}

/// Local model `exp(-π[⟨Π_0^t(Z - Z'), Z - Z'⟩ + i ω(Z, Z')])` with the inner
/// product of `g_0 = ω(·, J_0·)`.
pub fn local_model(omega: &RMatrix, j0: &RMatrix, jt: &RMatrix, z: &[f64], zp: &[f64]) -> Result<C64> {
    let (pi, _) = oblique_projectors(j0, jt)?;
    let g0 = omega * j0;
    let n = z.len();
    let dz: Vec<C64> = (0..n).map(|k| C64::new(z[k] - zp[k], 0.0)).collect();
    let pdz: Vec<C64> = (0..n).map(|r| (0..n).map(|c| pi[(r, c)] * dz[c]).sum()).collect();
    let q = hermitian(&g0, &pdz, &dz);
    let mut w = 0.0;
    for a in 0..n {
        for b in 0..n {
            w += z[a] * omega[(a, b)] * zp[b];
        }
    }
    Ok((-(q + I * w) * PI).exp())
}

/// ODE for `(y, A, W)` along `s ↦ φ_{-s}(x)`.
struct TransportSystem<'a> {
    f: &'a Hamiltonian,
    omega: RMatrix,
    j0: RMatrix,
    chart: Vec<u8>,
    s: usize,
}

impl TransportSystem<'_> {
    fn n(&self) -> usize {
        2 * self.s
    }
    fn unpack(&self, y: &[f64]) -> (ChartPoint, RMatrix, CMatrix) {
        let n = self.n();
        let s = self.s;
        let z = (0..s).map(|i| C64::new(y[2 * i], y[2 * i + 1])).collect();
        let pt = ChartPoint { chart: self.chart.clone(), z };
        let a = RMatrix::from_row_slice(n, n, &y[n..n + n * n]);
        let off = n + n * n;
        let w = CMatrix::from_fn(n, s, |r, c| C64::new(y[off + 2 * (r * s + c)], y[off + 2 * (r * s + c) + 1]));
        (pt, a, w)
    }
}

fn commutator_path(a: &RMatrix, m: &RMatrix, j0: &RMatrix) -> Option<(RMatrix, RMatrix)> {
    let ai = a.clone().try_inverse()?;
    let js = &ai * j0 * a;
    let jd = &ai * (m * j0 - j0 * m) * a;
    Some((js, jd))
}

impl OdeSystem<f64> for TransportSystem<'_> {
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.n();
        let s = self.s;
        let (pt, a, w) = self.unpack(y);
        let xi = self.f.vector_field_unchecked(&pt.chart, &pt.z);
        for i in 0..s {
            dy[2 * i] = -xi[i].re;
            dy[2 * i + 1] = -xi[i].im;
        }
        let m = field_jacobian_at(self.f, &pt);
        let da = -(&m * &a);
        dy[n..n + n * n].copy_from_slice(da.transpose().as_slice());
        let Some((js, jd)) = commutator_path(&a, &m, &self.j0) else {
            dy[n + n * n..].iter_mut().for_each(|v| *v = f64::NAN);
            return;
        };
        let g = &self.omega * &js;
        let gd = &self.omega * &jd;
        let ginv = g.try_inverse().unwrap_or_else(|| RMatrix::from_element(n, n, f64::NAN));
        let half = (ginv * gd) * 0.5;
        let p10 = (CMatrix::identity(n, n) - to_complex(&js) * I) * C64::new(0.5, 0.0);
        let dw = -(p10 * to_complex(&half) * &w) - to_complex(&jd) * &w * (I * 0.5);
        let off = n + n * n;
        for r in 0..n {
            for c in 0..s {
                dy[off + 2 * (r * s + c)] = dw[(r, c)].re;
                dy[off + 2 * (r * s + c) + 1] = dw[(r, c)].im;
            }
        }
    }

    fn after_step(&mut self, _t: f64, y: &mut [f64]) -> bool {
        let n = self.n();
        let mut changed = false;
        for i in 0..self.s {
            let zeta = C64::new(y[2 * i], y[2 * i + 1]);
            if zeta.norm() > 1.25 {
                let eta = zeta.inv();
                y[2 * i] = eta.re;
                y[2 * i + 1] = eta.im;
                let m = super::geometry::complex_as_real(-(eta * eta));
                for col in 0..n {
                    let r0 = y[n + (2 * i) * n + col];
                    let r1 = y[n + (2 * i + 1) * n + col];
                    y[n + (2 * i) * n + col] = m[0][0] * r0 + m[0][1] * r1;
                    y[n + (2 * i + 1) * n + col] = m[1][0] * r0 + m[1][1] * r1;
                }
                self.chart[i] = 1 - self.chart[i];
                changed = true;
            }
        }
        changed
    }
}

/// Geometric data of the path `s ↦ J_s(x)`, `s ∈ [0, t]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalData {
    /// Transport on `K_X` in unit frames.
    pub tau: C64,
    /// `det Π̄_t^0` between unit frames of `T^{(0,1)}`.
    pub det_pibar: C64,
}

impl CanonicalData {
    /// `det(Π̄_t^0)^{-1} τ_t^{K_X}`, the square of `μ̄_t`.
    pub fn mu_bar_squared(&self) -> C64 {
        self.tau / self.det_pibar
    }
}

/// Integrates the frame transport at `x` for times `ts` (monotone from 0)
/// and returns the data at each.
pub fn canonical_path(
    geom: &ModelGeometry,
    f: &Hamiltonian,
    ts: &[f64],
    x: &ChartPoint,
    opts: &FlowOptions,
) -> Result<Vec<CanonicalData>> {
    let s = geom.factors();
    let n = 2 * s;
    let x = x.canonical();
    let mut sys = TransportSystem { f, omega: geom.omega_matrix(&x), j0: geom.j0(), chart: x.chart.clone(), s };
    let mut y = vec![0.0; n + n * n + 2 * n * s];
    for i in 0..s {
        y[2 * i] = x.z[i].re;
        y[2 * i + 1] = x.z[i].im;
    }
    for i in 0..n {
        y[n + i * n + i] = 1.0;
    }
    let v0 = holomorphic_frame0(s);
    let off = n + n * n;
    for r in 0..n {
        for c in 0..s {
            y[off + 2 * (r * s + c)] = v0[(r, c)].re;
            y[off + 2 * (r * s + c) + 1] = v0[(r, c)].im;
        }
    }
    let g0 = geom.metric(&x);
    let gram = |g: &RMatrix, u: &CMatrix| -> C64 {
        let gc = to_complex(g);
        (u.transpose() * gc * u.map(|v| v.conj())).determinant()
    };
    let det_gv = gram(&g0, &v0);
    let mut out = Vec::with_capacity(ts.len());
    let mut t_now = 0.0;
    let mut ode = opts.ode;
    for &t in ts {
        let stats = integrate(&mut sys, t_now, &mut y, t, &ode).map_err(|e| match e {
            OdeError::StepUnderflow { t_last } => Error::StepUnderflow { t_last },
            OdeError::TooManySteps { t_last } => Error::TooManySteps { max_steps: ode.max_steps, t_last },
        })?;
        if stats.next_step > 0.0 {
            ode.h_init = stats.next_step;
        }
        t_now = t;
        let (_, a, w) = sys.unpack(&y);
        let ai = a.clone().try_inverse().ok_or(Error::NotTransverse { pivot: 0.0 })?;
        let jt = &ai * &sys.j0 * &a;
        let gt = &sys.omega * &jt;
        let p10 = (CMatrix::identity(n, n) - to_complex(&jt) * I) * C64::new(0.5, 0.0);
        let e = &p10 * &v0;
        // W = E C
        let eh = e.adjoint();
        let c = (&eh * &e).try_inverse().ok_or(Error::NotTransverse { pivot: 0.0 })? * &eh * &w;
        // conj(V0) = V0 C0 + conj(E) A_e
        let mut basis = CMatrix::zeros(n, n);
        for col in 0..s {
            basis.set_column(col, &v0.column(col));
            basis.set_column(s + col, &e.column(col).map(|v| v.conj()));
        }
        let sol = basis
            .clone()
            .lu()
            .solve(&v0.map(|v| v.conj()))
            .ok_or(Error::NotTransverse { pivot: 0.0 })?;
        let a_e = sol.rows(s, s).into_owned();
        let ratio = (gram(&gt, &e) / det_gv).sqrt();
        let det_pibar = a_e.determinant() * ratio;
        let kappa = c.determinant() * ratio;
        out.push(CanonicalData { tau: kappa.inv(), det_pibar });
    }
    Ok(out)
}

/// `τ_t^{K_X}` at `x`.
pub fn canonical_transport(
    geom: &ModelGeometry,
    f: &Hamiltonian,
    t: f64,
    x: &ChartPoint,
    opts: &FlowOptions,
) -> Result<C64> {
    Ok(canonical_path(geom, f, &[t], x, opts)?[0].tau)
}

/// `μ_t(x)` with `μ̄_t² = det(Π̄_t^0)^{-1} τ_t^{K_X}`, the square root followed
/// continuously from `μ_0 = 1`. `samples` intermediate times are used and
/// doubled while the phase jumps by more than π/2 between samples.
pub fn mu_coefficient(
    geom: &ModelGeometry,
    f: &Hamiltonian,
    t: f64,
    x: &ChartPoint,
    samples: usize,
    opts: &FlowOptions,
) -> Result<C64> {
    let mut k = samples.max(1);
    for _ in 0..6 {
        let ts: Vec<f64> = (1..=k).map(|j| t * j as f64 / k as f64).collect();
        let data = canonical_path(geom, f, &ts, x, opts)?;
        let mut prev = C64::new(1.0, 0.0);
        let mut worst = 0.0f64;
        let mut worst_t = 0.0;
        for (d, &tt) in data.iter().zip(&ts) {
            let mut r = d.mu_bar_squared().sqrt();
            if (r / prev).arg().abs() > PI / 2.0 {
                r = -r;
            }
            let jump = (r / prev).arg().abs();
            if jump > worst {
                worst = jump;
                worst_t = tt;
            }
            prev = r;
        }
        if worst <= PI / 2.0 * 0.999 {
            return Ok(prev.conj());
        }
        if k >= 1 << 14 {
            return Err(Error::BranchJump { t: worst_t, jump: worst });
        }
        k *= 2;
    }
    Err(Error::BranchJump { t, jump: PI })
}

/// Right-hand side of the leading kernel coefficient: `a_0(t, x)² =
/// (det(Π̄_t^0)^{-1} τ_t^{K_X})^{-1}` for the evolution `e^{-2πitpQ_p}` as
/// normalized in this crate (kernel taken at `(x, φ_t x)`).
pub fn a0_squared(geom: &ModelGeometry, f: &Hamiltonian, t: f64, x: &ChartPoint, opts: &FlowOptions) -> Result<C64> {
    let d = canonical_path(geom, f, &[t], x, opts)?[0];
    Ok(d.mu_bar_squared().inv())
}
