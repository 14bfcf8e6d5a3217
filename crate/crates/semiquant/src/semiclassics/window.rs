//! Compactly supported smooth windows and their Fourier transforms
//! `ĝ(E) = ∫ g(t) e^{-2πitE} dt`.
//!
//! The bump is `g(t) = exp(-q x²/(1-x²))` with `x = (t - center)/half_width`,
//! normalized to `g(center) = 1`. It is even about its center, so
//! `ĝ(E) = e^{-2πi center E} h(E)` with the real, even
//! `h(E) = 2w ∫_0^1 g(x) cos(2π w E x) dx`. `h` is tabulated once, from
//! composite Gauss-Legendre sums, as a piecewise Chebyshev interpolant on
//! `|E| ≤ E_max`, beyond which it is below `1e-15`. [`Window::fourier_direct`]
//! evaluates the same integral adaptively and serves as the reference.

use crate::quadrature::{adaptive, GaussLegendre};
use crate::scalar::Real;
use num_complex::Complex;
use std::sync::OnceLock;

#[derive(Debug)]
pub struct Window<T> {
    pub center: T,
    pub half_width: T,
    /// Shape parameter `q`; larger values give a narrower bump with slower
    /// transform decay.
    pub order: T,
    table: OnceLock<ChebTable<T>>,
}

impl<T: Real> Clone for Window<T> {
    fn clone(&self) -> Self {
        Self { center: self.center, half_width: self.half_width, order: self.order, table: self.table.clone() }
    }
}

impl<T: Real> PartialEq for Window<T> {
    fn eq(&self, other: &Self) -> bool {
        self.center == other.center && self.half_width == other.half_width && self.order == other.order
    }
}

/// Piecewise Chebyshev interpolant on `[0, panels·len]`.
#[derive(Debug, Clone)]
struct ChebTable<T> {
    len: T,
    coeffs: Vec<Vec<T>>,
}

impl<T: Real> Window<T> {
    pub fn new(center: T, half_width: T, order: T) -> Self {
        assert!(half_width > T::zero() && order > T::zero(), "window needs positive width and order");
        Self { center, half_width, order, table: OnceLock::new() }
    }

    /// Support `(center - w, center + w)`.
    pub fn support(&self) -> (T, T) {
        (self.center - self.half_width, self.center + self.half_width)
    }

    pub fn contains(&self, t: T) -> bool {
        let (a, b) = self.support();
        t > a && t < b
    }

    fn shape(&self, x: T) -> T {
        let x2 = x * x;
        if x2 >= T::one() {
            T::zero()
        } else {
            (-self.order * x2 / (T::one() - x2)).exp()
        }
    }

    pub fn value(&self, t: T) -> T {
        self.shape((t - self.center) / self.half_width)
    }

    /// `∫ g = ĝ(0)`.
    pub fn integral(&self) -> T {
        self.h_direct(T::zero())
    }

    fn h_direct(&self, e: T) -> T {
        let w = self.half_width;
        let two_pi = T::lit(2.0) * T::PI();
        let tol = T::lit(1e-15).max(T::epsilon() * T::lit(8.0));
        let (v, _) = adaptive(|x: T| self.shape(x) * (two_pi * w * e * x).cos(), T::zero(), T::one(), tol, 30);
        T::lit(2.0) * w * v
    }

    fn table(&self) -> &ChebTable<T> {
        self.table.get_or_init(|| {
            let len = T::one() / self.half_width.max(T::lit(0.25));
            let n = 40;
            // Panels are dropped once ĝ is below what the quadrature resolves.
            let h0 = self.h_direct(T::zero()).abs();
            let floor = h0.max(T::one()) * T::lit(1e-15).max(T::epsilon() * T::lit(8.0));
            let mut rules: Vec<(usize, Vec<(T, T)>)> = Vec::new();
            let mut coeffs = Vec::new();
            let mut quiet = 0;
            loop {
                let a = T::from_usize_lossy(coeffs.len()) * len;
                let b = a + len;
                // At least two panels per oscillation of cos(2πwEx) on [0, 1].
                let need = (T::lit(2.0) * self.half_width * b).to_usize().unwrap_or(usize::MAX / 2) + 64;
                let panels = need.next_power_of_two();
                if rules.last().is_none_or(|r| r.0 < panels) {
                    rules.push((panels, self.composite(panels)));
                }
                let rule = &rules.last().expect("rule").1;
                let c = cheb_fit(|e| self.h_sum(rule, e), a, b, n);
                let big = c.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
                coeffs.push(c);
                quiet = if big < floor { quiet + 1 } else { 0 };
                if quiet >= 4 || coeffs.len() > 20_000 {
                    break;
                }
            }
            ChebTable { len, coeffs }
        })
    }

    /// Nodes `x` and weights `w·g(x)` of a composite 20-point rule on `[0, 1]`.
    fn composite(&self, panels: usize) -> Vec<(T, T)> {
        let gl = GaussLegendre::<T>::new(20);
        let hp = T::one() / T::from_usize_lossy(panels);
        let half = T::lit(0.5);
        let mut out = Vec::with_capacity(panels * 20);
        for k in 0..panels {
            let a = T::from_usize_lossy(k) * hp;
            for (&x, &w) in gl.x.iter().zip(&gl.w) {
                let t = a + (x + T::one()) * half * hp;
                let v = self.shape(t);
                if v != T::zero() {
                    out.push((t, w * half * hp * v));
                }
            }
        }
        out
    }

    fn h_sum(&self, rule: &[(T, T)], e: T) -> T {
        let k = T::lit(2.0) * T::PI() * self.half_width * e;
        let s = rule.iter().fold(T::zero(), |acc, &(x, wg)| acc + wg * (k * x).cos());
        T::lit(2.0) * self.half_width * s
    }

    /// `|E|` beyond which `ĝ` is treated as zero.
    pub fn cutoff(&self) -> T {
        let t = self.table();
        T::from_usize_lossy(t.coeffs.len()) * t.len
    }

    /// `h(E) = |ĝ(E)|` up to sign.
    pub fn envelope(&self, e: T) -> T {
        let t = self.table();
        let x = e.abs();
        let k = (x / t.len).floor();
        let idx = k.to_usize().unwrap_or(usize::MAX);
        if idx >= t.coeffs.len() {
            return T::zero();
        }
        let a = k * t.len;
        cheb_eval(&t.coeffs[idx], a, a + t.len, x)
    }

    pub fn fourier(&self, e: T) -> Complex<T> {
        let ph = -T::lit(2.0) * T::PI() * self.center * e;
        Complex::from_polar(self.envelope(e), ph)
    }

    /// Direct adaptive evaluation of `ĝ`, bypassing the table.
    pub fn fourier_direct(&self, e: T) -> Complex<T> {
        let ph = -T::lit(2.0) * T::PI() * self.center * e;
        Complex::from_polar(self.h_direct(e), ph)
    }
}

fn cheb_fit<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, n: usize) -> Vec<T> {
    let half = T::lit(0.5);
    let mid = (a + b) * half;
    let rad = (b - a) * half;
    let nf = T::from_usize_lossy(n);
    let vals: Vec<T> = (0..n)
        .map(|j| {
            let th = T::PI() * (T::from_usize_lossy(j) + half) / nf;
            f(mid + rad * th.cos())
        })
        .collect();
    (0..n)
        .map(|k| {
            let kf = T::from_usize_lossy(k);
            let s = vals.iter().enumerate().fold(T::zero(), |acc, (j, &v)| {
                let th = T::PI() * (T::from_usize_lossy(j) + half) / nf;
                acc + v * (kf * th).cos()
            });
            let scale = if k == 0 { T::one() } else { T::lit(2.0) };
            s * scale / nf
        })
        .collect()
}

fn cheb_eval<T: Real>(c: &[T], a: T, b: T, x: T) -> T {
    let two = T::lit(2.0);
    let y = (two * x - a - b) / (b - a);
    let (mut b1, mut b2) = (T::zero(), T::zero());
    for &ck in c.iter().skip(1).rev() {
        let b0 = two * y * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    y * b1 - b2 + c[0]
}
