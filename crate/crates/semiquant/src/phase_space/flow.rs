//! Hamiltonian flow with chart switching, variational matrix and the
//! prequantum lift phase.
//!
//! The lift is tracked in unitary frames. For a section of `O(N)` written as
//! `s = h e` with `|e|² = (1+|z|²)^{-N}`, its unitary coefficient is
//! `ŝ = h (1+|z|²)^{-N/2}` and the Chern connection reads
//! `∇ê = -i N Im(z̄ dz)/(1+|z|²) ê`. Across the transition `w = 1/z` the unitary
//! coefficients differ by `ŝ_1 = (w/|w|)^N ŝ_0`.
//!
//! Pullback by the lifted flow is then
//! `(φ_t^* s)^(x) = e^{iθ(t,x)} ŝ(φ_t x)` with both coefficients taken in the
//! affine unitary frame and
//!
//! ```text
//! θ = Σ_i N_i C_i + m_i M_i - 2π p t f(x),
//! C_i = ∫ -Im(ζ̄_i ξ^{ζ_i})/(1+|ζ_i|²) dt  (+ chart corrections),
//! M_i = ∫ π (1+|ζ_i|²)² ∂_ζ∂_ζ̄ f dt,
//! ```
//!
//! where `N_i = p + m_i`. The `M_i` term is the lift of `dφ_t` to the twist
//! factor `O(m_i)`, `m_i = -1` being `K^{1/2}`; it vanishes for untwisted
//! models.

use super::geometry::{complex_as_real, ChartPoint, MAX_FACTORS};
use super::hamiltonian::{field_jacobian, xi_from_jet, Hamiltonian};
use crate::ode::{integrate, OdeError, OdeSystem};
use crate::{Error, OdeOptions, RMatrix, Result, C64};
use std::f64::consts::PI;

/// A factor switches chart once its coordinate leaves this radius, leaving a
/// hysteresis band around the unit circle.
const SWITCH_RADIUS: f64 = 1.25;

#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    pub ode: OdeOptions,
    /// Largest accepted drift `|f(φ_t x) - f(x)|`.
    pub energy_tol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { ode: OdeOptions::default(), energy_tol: 1e-9 }
    }
}

/// Per-factor phase integrals of the lifted flow; see the module docs.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftPhase {
    pub connection: Vec<f64>,
    pub moment: Vec<f64>,
    pub energy: f64,
    pub time: f64,
}

impl LiftPhase {
    /// Phase `θ` of the pullback on `O(m) ⊗ L^p`.
    pub fn phase(&self, p: i64, twists: &[i32]) -> f64 {
        let mut th = -2.0 * PI * p as f64 * self.time * self.energy;
        for (i, &m) in twists.iter().enumerate() {
            th += (p + m as i64) as f64 * self.connection[i] + m as f64 * self.moment[i];
        }
        th
    }

    /// Phase of the pullback on the twist factor alone.
    pub fn twist_phase(&self, twists: &[i32]) -> f64 {
        twists.iter().enumerate().map(|(i, &m)| m as f64 * (self.connection[i] + self.moment[i])).sum()
    }

    /// Prequantum action `λ = t f(x) - (holonomy)/2π mod 1`, so that the lift
    /// on `L` acts on a closed orbit by `e^{-2πiλ}`.
    pub fn action(&self) -> f64 {
        let zeros = vec![0; self.connection.len()];
        (-self.phase(1, &zeros) / (2.0 * PI)).rem_euclid(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct FlowOutcome {
    pub point: ChartPoint,
    /// `dφ_t` from chart coordinates at the start to those at `point`.
    pub dphi: Option<RMatrix>,
    pub lift: LiftPhase,
    pub energy_drift: f64,
    pub steps: usize,
}

struct FlowSystem<'a> {
    f: &'a Hamiltonian,
    s: usize,
    chart: [u8; MAX_FACTORS],
    variational: bool,
}

impl FlowSystem<'_> {
    fn n(&self) -> usize {
        2 * self.s
    }
    fn a_offset(&self) -> usize {
        self.n()
    }
    fn acc_offset(&self) -> usize {
        if self.variational {
            self.n() + self.n() * self.n()
        } else {
            self.n()
        }
    }
    fn len(&self) -> usize {
        self.acc_offset() + 2 * self.s
    }
    fn coords(&self, y: &[f64]) -> [C64; MAX_FACTORS] {
        let mut z = [C64::new(0.0, 0.0); MAX_FACTORS];
        for i in 0..self.s {
            z[i] = C64::new(y[2 * i], y[2 * i + 1]);
        }
        z
    }

    /// Moves factor `i` to the other chart, updating the variational rows
    /// and the connection integral.
    fn switch(&mut self, i: usize, y: &mut [f64]) {
        let zeta = C64::new(y[2 * i], y[2 * i + 1]);
        let eta = zeta.inv();
        let acc = self.acc_offset();
        if self.chart[i] == 0 {
            y[acc + i] -= eta.arg();
        } else {
            y[acc + i] += zeta.arg();
        }
        y[2 * i] = eta.re;
        y[2 * i + 1] = eta.im;
        if self.variational {
            let n = self.n();
            let m = complex_as_real(-(eta * eta));
            let off = self.a_offset();
            for col in 0..n {
                let r0 = y[off + (2 * i) * n + col];
                let r1 = y[off + (2 * i + 1) * n + col];
                y[off + (2 * i) * n + col] = m[0][0] * r0 + m[0][1] * r1;
                y[off + (2 * i + 1) * n + col] = m[1][0] * r0 + m[1][1] * r1;
            }
        }
        self.chart[i] = 1 - self.chart[i];
    }
}

impl OdeSystem<f64> for FlowSystem<'_> {
    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let s = self.s;
        let n = self.n();
        let z = self.coords(y);
        let jet = self.f.jet_in(&self.chart[..s], &z[..s], true);
        let xi = xi_from_jet(&jet, &z[..s]);
        for i in 0..s {
            dy[2 * i] = xi[i].re;
            dy[2 * i + 1] = xi[i].im;
        }
        if self.variational {
            let mut jac = [0.0; 4 * MAX_FACTORS * MAX_FACTORS];
            field_jacobian(&jet, &z[..s], &mut jac[..n * n]);
            let off = self.a_offset();
            for r in 0..n {
                for c in 0..n {
                    let mut acc = 0.0;
                    for k in 0..n {
                        acc += jac[r * n + k] * y[off + k * n + c];
                    }
                    dy[off + r * n + c] = acc;
                }
            }
        }
        let acc = self.acc_offset();
        for i in 0..s {
            let d = 1.0 + z[i].norm_sqr();
            dy[acc + i] = -(z[i].conj() * xi[i]).im / d;
            dy[acc + s + i] = PI * d * d * jet.fzzb[i][i].re;
        }
    }

    fn after_step(&mut self, _t: f64, y: &mut [f64]) -> bool {
        let mut changed = false;
        for i in 0..self.s {
            if y[2 * i].hypot(y[2 * i + 1]) > SWITCH_RADIUS {
                self.switch(i, y);
                changed = true;
            }
        }
        changed
    }
}

/// Integrates a single trajectory in stages, keeping the step size between
/// calls. Used when many intermediate times are needed.
pub struct FlowTracker<'a> {
    sys: FlowSystem<'a>,
    y: Vec<f64>,
    t: f64,
    start: ChartPoint,
    energy: f64,
    h: f64,
    steps: usize,
}

impl<'a> FlowTracker<'a> {
    pub fn new(f: &'a Hamiltonian, x0: &ChartPoint, variational: bool) -> Self {
        let s = f.factors();
        let mut chart = [0u8; MAX_FACTORS];
        chart[..s].copy_from_slice(&x0.chart);
        let sys = FlowSystem { f, s, chart, variational };
        let mut y = vec![0.0; sys.len()];
        for i in 0..s {
            y[2 * i] = x0.z[i].re;
            y[2 * i + 1] = x0.z[i].im;
        }
        if variational {
            let n = sys.n();
            for i in 0..n {
                y[sys.a_offset() + i * n + i] = 1.0;
            }
        }
        // Express the phase relative to the affine unitary frame at the start.
        let acc = sys.acc_offset();
        for i in 0..s {
            if x0.chart[i] == 1 {
                y[acc + i] -= x0.z[i].arg();
            }
        }
        let energy = f.value(x0);
        Self { sys, y, t: 0.0, start: x0.clone(), energy, h: 0.0, steps: 0 }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn advance(&mut self, t: f64, opts: &FlowOptions) -> Result<()> {
        let mut ode = opts.ode;
        if self.h > 0.0 {
            ode.h_init = self.h;
        }
        let stats = integrate(&mut self.sys, self.t, &mut self.y, t, &ode).map_err(|e| match e {
            OdeError::StepUnderflow { t_last } => Error::StepUnderflow { t_last },
            OdeError::TooManySteps { t_last } => Error::TooManySteps { max_steps: ode.max_steps, t_last },
        })?;
        self.h = stats.next_step;
        self.steps += stats.accepted;
        self.t = t;
        let drift = (self.current_value() - self.energy).abs();
        if drift > opts.energy_tol {
            return Err(Error::EnergyDrift { drift, limit: opts.energy_tol });
        }
        Ok(())
    }

    fn current_value(&self) -> f64 {
        let z = self.sys.coords(&self.y);
        self.sys.f.jet_in(&self.sys.chart[..self.sys.s], &z[..self.sys.s], false).f
    }

    /// Current state with canonical charts and the phase referred to the
    /// affine unitary frame.
    pub fn snapshot(&self) -> FlowOutcome {
        let mut sys = FlowSystem { f: self.sys.f, s: self.sys.s, chart: self.sys.chart, variational: self.sys.variational };
        let mut y = self.y.clone();
        let s = sys.s;
        for i in 0..s {
            if y[2 * i].hypot(y[2 * i + 1]) > 1.0 {
                sys.switch(i, &mut y);
            }
        }
        let acc = sys.acc_offset();
        let z = sys.coords(&y);
        for i in 0..s {
            if sys.chart[i] == 1 {
                y[acc + i] += z[i].arg();
            }
        }
        let point = ChartPoint { chart: sys.chart[..s].to_vec(), z: z[..s].to_vec() };
        let dphi = sys.variational.then(|| {
            let n = sys.n();
            RMatrix::from_row_slice(n, n, &y[sys.a_offset()..sys.a_offset() + n * n])
        });
        let lift = LiftPhase {
            connection: y[acc..acc + s].to_vec(),
            moment: y[acc + s..acc + 2 * s].to_vec(),
            energy: self.energy,
            time: self.t,
        };
        let energy_drift = (self.sys.f.value(&point) - self.energy).abs();
        FlowOutcome { point, dphi, lift, energy_drift, steps: self.steps }
    }

    pub fn start(&self) -> &ChartPoint {
        &self.start
    }
}

/// `φ_t(x0)`.
pub fn integrate_flow(f: &Hamiltonian, x0: &ChartPoint, t: f64, opts: &FlowOptions) -> Result<ChartPoint> {
    Ok(flow_full(f, x0, t, false, opts)?.point)
}

/// Flow with optional variational matrix; the lift phase is always tracked.
pub fn flow_full(f: &Hamiltonian, x0: &ChartPoint, t: f64, variational: bool, opts: &FlowOptions) -> Result<FlowOutcome> {
    if x0.factors() != f.factors() {
        return Err(Error::InvalidInput("point and Hamiltonian have different factor counts".into()));
    }
    let mut tr = FlowTracker::new(f, x0, variational);
    tr.advance(t, opts)?;
    Ok(tr.snapshot())
}

/// Real Jacobian of the Hamiltonian field at `x` (chart coordinates).
pub fn field_jacobian_at(f: &Hamiltonian, x: &ChartPoint) -> RMatrix {
    let n = 2 * f.factors();
    let jet = f.jet(x);
    let mut buf = vec![0.0; n * n];
    field_jacobian(&jet, &x.z, &mut buf);
    RMatrix::from_row_slice(n, n, &buf)
}

/// Hamiltonian field as a real vector `(Re ξ_1, Im ξ_1, ...)`.
pub fn field_real(f: &Hamiltonian, x: &ChartPoint) -> Vec<f64> {
    f.vector_field_unchecked(&x.chart, &x.z).iter().flat_map(|v| [v.re, v.im]).collect()
}

/// Distance in the round metric between two points, used for closure tests.
pub fn closure_defect(a: &ChartPoint, b: &ChartPoint) -> f64 {
    let mut acc: f64 = 0.0;
    for i in 0..a.factors() {
        let za = a.coordinate_in(i, 0);
        let zb = b.coordinate_in(i, 0);
        let d = match (za, zb) {
            (Some(x), Some(y)) if x.norm() <= 1.0 || y.norm() <= 1.0 => (x - y).norm(),
            _ => match (a.coordinate_in(i, 1), b.coordinate_in(i, 1)) {
                (Some(x), Some(y)) => (x - y).norm(),
                _ => f64::INFINITY,
            },
        };
        acc = acc.max(d);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(z: C64) -> ChartPoint {
        ChartPoint::affine(&[z])
    }

    #[test]
    fn rotation_quarter_turn() {
        let f = Hamiltonian::rotation(1);
        let y = integrate_flow(&f, &pt(C64::new(1.0, 0.0)), 0.25, &FlowOptions::default()).unwrap();
        let z = y.coordinate_in(0, 0).unwrap();
        assert!((z - C64::new(0.0, -1.0)).norm() < 1e-10, "{z}");
    }

    #[test]
    fn zero_time_is_identity() {
        let f = Hamiltonian::perturbed(&[0.1, 0.2]).unwrap();
        let x = pt(C64::new(0.3, 0.4));
        let out = flow_full(&f, &x, 0.0, true, &FlowOptions::default()).unwrap();
        assert_eq!(out.point, x);
        assert!((out.dphi.unwrap() - RMatrix::identity(2, 2)).norm() < 1e-15);
    }

    #[test]
    fn rotation_lift_is_trivial_untwisted() {
        let f = Hamiltonian::rotation(1);
        let x = pt(C64::new(0.6, -0.2));
        let out = flow_full(&f, &x, 0.37, false, &FlowOptions::default()).unwrap();
        assert!(out.lift.phase(7, &[0]).abs() < 1e-9);
        // Metaplectic lift turns by -π per unit time.
        assert!((out.lift.phase(7, &[-1]) + PI * 0.37).abs() < 1e-9);
    }

    #[test]
    fn orbit_through_both_charts_closes_with_consistent_phase() {
        // |z| = 1.5 starts in the chart at infinity and stays there.
        let f = Hamiltonian::radial(&[1.0, 0.5]).unwrap();
        let x = pt(C64::new(0.9, 1.2));
        let out = flow_full(&f, &x, 0.31, true, &FlowOptions::default()).unwrap();
        let x2 = pt(C64::new(0.9, 1.2) * 0.5);
        let out2 = flow_full(&f, &x2, 0.31, true, &FlowOptions::default()).unwrap();
        assert!(out.energy_drift < 1e-11 && out2.energy_drift < 1e-11);
        // Radial flows keep |z|.
        let r = out.point.coordinate_in(0, 0).unwrap().norm();
        assert!((r - 1.5).abs() < 1e-10);
    }
}
