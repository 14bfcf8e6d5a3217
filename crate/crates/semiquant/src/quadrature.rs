//! One-dimensional quadrature: Gauss-Legendre rules and adaptive
//! Gauss-Kronrod integration.

use crate::scalar::Real;

/// Gauss-Legendre rule on `[a, b]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre<T> {
    pub x: Vec<T>,
    pub w: Vec<T>,
    pub a: T,
    pub b: T,
}

impl<T: Real> GaussLegendre<T> {
    /// `n`-point rule on `[-1, 1]`, exact for polynomials of degree `2n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a quadrature rule needs at least one node");
        let mut x = vec![T::zero(); n];
        let mut w = vec![T::zero(); n];
        let one = T::one();
        let two = T::lit(2.0);
        let nf = T::from_usize_lossy(n);
        let eps = T::epsilon() * T::lit(4.0);
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let k = T::from_usize_lossy(i + 1);
            let mut z = (T::PI() * (k - T::lit(0.25)) / (nf + T::lit(0.5))).cos();
            let mut dp = T::zero();
            for _ in 0..100 {
                let (p, d) = legendre(n, z);
                dp = d;
                let dz = p / d;
                z = z - dz;
                if dz.abs() <= eps {
                    let (_, d) = legendre(n, z);
                    dp = d;
                    break;
                }
            }
            let wi = two / ((one - z * z) * dp * dp);
            x[i] = -z;
            x[n - 1 - i] = z;
            w[i] = wi;
            w[n - 1 - i] = wi;
        }
        if n % 2 == 1 {
            x[n / 2] = T::zero();
        }
        Self { x, w, a: -one, b: one }
    }

    /// `n`-point rule on `[a, b]`.
    pub fn on(n: usize, a: T, b: T) -> Self {
        let mut rule = Self::new(n);
        rule.reseat(a, b);
        rule
    }

    /// Maps the rule affinely onto `[a, b]`.
    pub fn reseat(&mut self, a: T, b: T) {
        let scale = (b - a) / (self.b - self.a);
        for (x, w) in self.x.iter_mut().zip(self.w.iter_mut()) {
            *x = a + (*x - self.a) * scale;
            *w = *w * scale;
        }
        self.a = a;
        self.b = b;
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn integrate<F: FnMut(T) -> T>(&self, mut f: F) -> T {
        self.x
            .iter()
            .zip(&self.w)
            .fold(T::zero(), |acc, (&x, &w)| acc + w * f(x))
    }
}

/// Legendre polynomial `P_n(z)` and its derivative.
fn legendre<T: Real>(n: usize, z: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = z;
    if n == 0 {
        return (p0, T::zero());
    }
    for k in 2..=n {
        let kf = T::from_usize_lossy(k);
        let p2 = ((T::lit(2.0) * kf - T::one()) * z * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = T::from_usize_lossy(n);
    let d = nf * (z * p1 - p0) / (z * z - T::one());
    (p1, d)
}

// Kronrod 15-point extension of the 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Kronrod value, error estimate and `∫|f|` on `[a, b]`.
fn gk15<T: Real, F: FnMut(T) -> T>(f: &mut F, a: T, b: T) -> (T, T, T) {
    let half = T::lit(0.5);
    let c = (a + b) * half;
    let h = (b - a) * half;
    let fc = f(c);
    let mut rk = fc * T::lit(WGK[7]);
    let mut rg = fc * T::lit(WG[3]);
    let mut ra = fc.abs() * T::lit(WGK[7]);
    for j in 0..7 {
        let dx = h * T::lit(XGK[j]);
        let (f1, f2) = (f(c - dx), f(c + dx));
        let s = f1 + f2;
        rk = rk + T::lit(WGK[j]) * s;
        ra = ra + T::lit(WGK[j]) * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            rg = rg + T::lit(WG[j / 2]) * s;
        }
    }
    (rk * h, ((rk - rg) * h).abs(), ra * h.abs())
}

/// Adaptive Gauss-Kronrod integration to absolute tolerance `tol`.
/// Subintervals whose error estimate is at the rounding level of `∫|f|`
/// are accepted as they are.
///
/// Returns the integral and the accumulated error estimate.
pub fn adaptive<T: Real, F: FnMut(T) -> T>(mut f: F, a: T, b: T, tol: T, max_depth: usize) -> (T, T) {
    let mut stack = vec![(a, b, tol, 0usize)];
    let mut total = T::zero();
    let mut err = T::zero();
    while let Some((lo, hi, tl, depth)) = stack.pop() {
        let (v, e, va) = gk15(&mut f, lo, hi);
        if e <= tl || e <= T::epsilon() * T::lit(50.0) * va || depth >= max_depth {
            total = total + v;
            err = err + e;
        } else {
            let mid = (lo + hi) * T::lit(0.5);
            let t2 = tl * T::lit(0.5);
            stack.push((mid, hi, t2, depth + 1));
            stack.push((lo, mid, t2, depth + 1));
        }
    }
    (total, err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_to_degree_2n_minus_1() {
        for n in [1usize, 2, 5, 17, 64] {
            let rule = GaussLegendre::<f64>::on(n, 0.0, 1.0);
            for deg in 0..(2 * n) {
                let got = rule.integrate(|x| x.powi(deg as i32));
                let want = 1.0 / (deg as f64 + 1.0);
                assert!((got - want).abs() < 1e-14, "n={n} deg={deg}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn weights_sum_to_interval_length() {
        let rule = GaussLegendre::<f64>::on(300, 0.0, 1.0);
        let s: f64 = rule.w.iter().sum();
        assert!((s - 1.0).abs() < 1e-13);
        assert!(rule.x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn f32_rule_is_usable() {
        let rule = GaussLegendre::<f32>::on(8, -1.0, 1.0);
        let got = rule.integrate(|x| x * x);
        assert!((got - 2.0 / 3.0).abs() < 1e-5);
    }

    #[test]
    fn adaptive_handles_a_bump() {
        let bump = |x: f64| if x.abs() < 1.0 { (-1.0 / (1.0 - x * x)).exp() } else { 0.0 };
        let (v, e) = adaptive(bump, -1.0, 1.0, 1e-14, 40);
        // Reference value of the standard bump integral.
        assert!((v - 0.443_993_816_168_079_4).abs() < 1e-13, "{v}");
        assert!(e < 1e-12);
    }
}
