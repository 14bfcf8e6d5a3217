//! Adaptive Dormand-Prince 5(4) integration.
//!
//! Systems may carry discrete state (chart indices, accumulated phases) and
//! rewrite the continuous state between accepted steps through
//! [`OdeSystem::after_step`].

use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions<T> {
    pub rtol: T,
    pub atol: T,
    /// Initial step; zero lets the integrator choose.
    pub h_init: T,
    pub h_min: T,
    pub max_steps: usize,
}

impl<T: Real> Default for OdeOptions<T> {
    fn default() -> Self {
        Self {
            rtol: T::lit(1e-12),
            atol: T::lit(1e-13),
            h_init: T::zero(),
            h_min: T::lit(1e-14),
            max_steps: 2_000_000,
        }
    }
}

pub trait OdeSystem<T> {
    fn rhs(&self, t: T, y: &[T], dy: &mut [T]);

    /// Called after each accepted step. Returning `true` signals that `y`
    /// was rewritten, so the cached derivative is discarded.
    fn after_step(&mut self, _t: T, _y: &mut [T]) -> bool {
        false
    }

    /// Components excluded from the error norm (auxiliary accumulators).
    fn error_weight(&self, _i: usize) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OdeError<T> {
    StepUnderflow { t_last: T },
    TooManySteps { t_last: T },
}

#[derive(Debug, Clone, Copy)]
pub struct OdeStats<T> {
    pub accepted: usize,
    pub rejected: usize,
    /// Step size the controller would try next; useful to resume.
    pub next_step: T,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `sys` from `t0` to `t1` in place. `t1 < t0` integrates
/// backwards.
pub fn integrate<T: Real, S: OdeSystem<T>>(
    sys: &mut S,
    t0: T,
    y: &mut [T],
    t1: T,
    opts: &OdeOptions<T>,
) -> Result<OdeStats<T>, OdeError<T>> {
    let n = y.len();
    let mut stats = OdeStats { accepted: 0, rejected: 0, next_step: opts.h_init };
    if t1 == t0 {
        return Ok(stats);
    }
    let dir = if t1 > t0 { T::one() } else { -T::one() };
    let span = (t1 - t0).abs();
    let mut t = t0;
    let mut k1 = vec![T::zero(); n];
    let mut k2 = vec![T::zero(); n];
    let mut k3 = vec![T::zero(); n];
    let mut k4 = vec![T::zero(); n];
    let mut k5 = vec![T::zero(); n];
    let mut k6 = vec![T::zero(); n];
    let mut k7 = vec![T::zero(); n];
    let mut ytmp = vec![T::zero(); n];
    let mut ynew = vec![T::zero(); n];
    sys.rhs(t, y, &mut k1);

    let mut h = if opts.h_init > T::zero() {
        opts.h_init.min(span)
    } else {
        let scale: T = norm_weighted(sys, y, y, &k1, opts);
        let h0 = if scale > T::lit(1e-10) { T::lit(0.01) / scale } else { T::lit(1e-3) };
        h0.min(span).max(opts.h_min)
    };
    let safety = T::lit(0.9);
    let fmin = T::lit(0.2);
    let fmax = T::lit(5.0);
    let expo = T::lit(0.2);

    loop {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(OdeError::TooManySteps { t_last: t });
        }
        let remaining = (t1 - t).abs();
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        let hs = h * dir;
        for i in 0..n {
            ytmp[i] = y[i] + hs * T::lit(A21) * k1[i];
        }
        sys.rhs(t + hs * T::lit(C2), &ytmp, &mut k2);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (T::lit(A31) * k1[i] + T::lit(A32) * k2[i]);
        }
        sys.rhs(t + hs * T::lit(C3), &ytmp, &mut k3);
        for i in 0..n {
            ytmp[i] = y[i] + hs * (T::lit(A41) * k1[i] + T::lit(A42) * k2[i] + T::lit(A43) * k3[i]);
        }
        sys.rhs(t + hs * T::lit(C4), &ytmp, &mut k4);
        for i in 0..n {
            ytmp[i] = y[i]
                + hs * (T::lit(A51) * k1[i] + T::lit(A52) * k2[i] + T::lit(A53) * k3[i] + T::lit(A54) * k4[i]);
        }
        sys.rhs(t + hs * T::lit(C5), &ytmp, &mut k5);
        for i in 0..n {
            ytmp[i] = y[i]
                + hs * (T::lit(A61) * k1[i]
                    + T::lit(A62) * k2[i]
                    + T::lit(A63) * k3[i]
                    + T::lit(A64) * k4[i]
                    + T::lit(A65) * k5[i]);
        }
        sys.rhs(t + hs, &ytmp, &mut k6);
        for i in 0..n {
            ynew[i] = y[i]
                + hs * (T::lit(B1) * k1[i]
                    + T::lit(B3) * k3[i]
                    + T::lit(B4) * k4[i]
                    + T::lit(B5) * k5[i]
                    + T::lit(B6) * k6[i]);
        }
        sys.rhs(t + hs, &ynew, &mut k7);
        let mut err = T::zero();
        let mut count = 0usize;
        for i in 0..n {
            if !sys.error_weight(i) {
                continue;
            }
            let e = hs
                * (T::lit(E1) * k1[i]
                    + T::lit(E3) * k3[i]
                    + T::lit(E4) * k4[i]
                    + T::lit(E5) * k5[i]
                    + T::lit(E6) * k6[i]
                    + T::lit(E7) * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            let r = e / sc;
            err = err + r * r;
            count += 1;
        }
        let err = if count > 0 { (err / T::from_usize_lossy(count)).sqrt() } else { T::zero() };
        if !err.is_finite() || err > T::one() {
            stats.rejected += 1;
            let fac = if err.is_finite() { (safety * err.powf(-expo)).max(fmin) } else { fmin };
            h = h * fac;
            if h < opts.h_min {
                return Err(OdeError::StepUnderflow { t_last: t });
            }
            continue;
        }
        stats.accepted += 1;
        t = if last { t1 } else { t + hs };
        y.copy_from_slice(&ynew);
        std::mem::swap(&mut k1, &mut k7);
        if sys.after_step(t, y) {
            sys.rhs(t, y, &mut k1);
        }
        let fac = if err > T::zero() { (safety * err.powf(-expo)).min(fmax).max(fmin) } else { fmax };
        if last {
            // A clipped final step says little about the natural step size.
            stats.next_step = if fac >= T::one() { stats.next_step.max(h) } else { h * fac };
            return Ok(stats);
        }
        h = (h * fac).max(opts.h_min);
        stats.next_step = h;
    }
}

fn norm_weighted<T: Real, S: OdeSystem<T>>(sys: &S, y: &[T], _y2: &[T], f: &[T], opts: &OdeOptions<T>) -> T {
    let mut acc = T::zero();
    let mut count = 0usize;
    for i in 0..y.len() {
        if !sys.error_weight(i) {
            continue;
        }
        let sc = opts.atol + opts.rtol * y[i].abs();
        let r = f[i] * opts.rtol / sc;
        acc = acc + r * r;
        count += 1;
    }
    if count == 0 {
        return T::zero();
    }
    (acc / T::from_usize_lossy(count)).sqrt()
}
