//! Polynomial extrapolation in `1/p` and a small Householder least-squares
//! solver.

use crate::scalar::Real;
use num_complex::Complex;

/// Least-squares fit of `v(p) = a_0 + a_1/p + ... + a_order/p^order`.
#[derive(Debug, Clone, Copy)]
pub struct Richardson<T> {
    pub order: usize,
    /// Largest accepted condition estimate of the scaled design matrix.
    pub max_cond: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RichardsonFit<T> {
    /// Coefficients `a_0, a_1, ...` of the powers of `1/p`.
    pub coeffs: Vec<T>,
    /// Root-mean-square residual of the fit.
    pub residual: T,
    pub cond: T,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitError<T> {
    TooFewSamples { samples: usize, unknowns: usize },
    IllConditioned { cond: T },
}

impl<T: Real> Default for Richardson<T> {
    fn default() -> Self {
        Self { order: 3, max_cond: T::lit(1e10) }
    }
}

impl<T: Real> Richardson<T> {
    pub fn new(order: usize) -> Self {
        Self { order, ..Self::default() }
    }

    pub fn fit(&self, ps: &[T], values: &[T]) -> Result<RichardsonFit<T>, FitError<T>> {
        let m = ps.len();
        let k = self.order + 1;
        if m < k || values.len() != m {
            return Err(FitError::TooFewSamples { samples: m.min(values.len()), unknowns: k });
        }
        // Scale the abscissa to (0, 1] so the columns stay comparable.
        let pmin = ps.iter().copied().fold(T::infinity(), T::min);
        let mut a = vec![T::zero(); m * k];
        for (i, &p) in ps.iter().enumerate() {
            let x = pmin / p;
            let mut xr = T::one();
            for r in 0..k {
                a[r * m + i] = xr;
                xr = xr * x;
            }
        }
        let sol = lstsq(&mut a, m, k, values)?;
        if sol.cond > self.max_cond {
            return Err(FitError::IllConditioned { cond: sol.cond });
        }
        let mut scale = T::one();
        let coeffs = sol
            .x
            .iter()
            .map(|&c| {
                let out = c * scale;
                scale = scale * pmin;
                out
            })
            .collect();
        Ok(RichardsonFit { coeffs, residual: sol.residual, cond: sol.cond })
    }

    /// Fits real and imaginary parts independently with the same design.
    pub fn fit_complex(
        &self,
        ps: &[T],
        values: &[Complex<T>],
    ) -> Result<(Vec<Complex<T>>, T), FitError<T>> {
        let re: Vec<T> = values.iter().map(|v| v.re).collect();
        let im: Vec<T> = values.iter().map(|v| v.im).collect();
        let fr = self.fit(ps, &re)?;
        let fi = self.fit(ps, &im)?;
        let coeffs = fr.coeffs.iter().zip(&fi.coeffs).map(|(&a, &b)| Complex::new(a, b)).collect();
        Ok((coeffs, (fr.residual * fr.residual + fi.residual * fi.residual).sqrt()))
    }
}

#[derive(Debug, Clone)]
pub struct LstsqSolution<T> {
    pub x: Vec<T>,
    pub residual: T,
    pub cond: T,
}

/// Solves `min |A x - b|` for a column-major `m x k` matrix by Householder
/// QR. `a` is overwritten. The condition figure is the ratio of the extreme
/// diagonal entries of `R`, a cheap lower bound on the 2-norm condition.
pub fn lstsq<T: Real>(a: &mut [T], m: usize, k: usize, b: &[T]) -> Result<LstsqSolution<T>, FitError<T>> {
    if m < k {
        return Err(FitError::TooFewSamples { samples: m, unknowns: k });
    }
    let mut rhs = b.to_vec();
    for j in 0..k {
        let col = &mut a[j * m..(j + 1) * m];
        let norm = col[j..].iter().fold(T::zero(), |s, &v| s + v * v).sqrt();
        if norm == T::zero() {
            continue;
        }
        let alpha = if col[j] > T::zero() { -norm } else { norm };
        col[j] = col[j] - alpha;
        let vnorm2 = col[j..].iter().fold(T::zero(), |s, &v| s + v * v);
        let v: Vec<T> = col[j..].to_vec();
        col[j] = alpha;
        for c in col[j + 1..].iter_mut() {
            *c = T::zero();
        }
        let two = T::lit(2.0);
        for jj in (j + 1)..k {
            let other = &mut a[jj * m + j..(jj + 1) * m];
            let dot = v.iter().zip(other.iter()).fold(T::zero(), |s, (&x, &y)| s + x * y);
            let f = two * dot / vnorm2;
            for (o, &vi) in other.iter_mut().zip(&v) {
                *o = *o - f * vi;
            }
        }
        let dot = v.iter().zip(&rhs[j..]).fold(T::zero(), |s, (&x, &y)| s + x * y);
        let f = two * dot / vnorm2;
        for (r, &vi) in rhs[j..].iter_mut().zip(&v) {
            *r = *r - f * vi;
        }
    }
    let mut dmax = T::zero();
    let mut dmin = T::infinity();
    for j in 0..k {
        let d = a[j * m + j].abs();
        dmax = dmax.max(d);
        dmin = dmin.min(d);
    }
    let cond = if dmin > T::zero() { dmax / dmin } else { T::infinity() };
    if !cond.is_finite() || cond * T::epsilon() > T::lit(0.01) {
        return Err(FitError::IllConditioned { cond });
    }
    let mut x = vec![T::zero(); k];
    for j in (0..k).rev() {
        let mut s = rhs[j];
        for jj in (j + 1)..k {
            s = s - a[jj * m + j] * x[jj];
        }
        x[j] = s / a[j * m + j];
    }
    let tail = rhs[k..].iter().fold(T::zero(), |s, &v| s + v * v);
    let residual = (tail / T::from_usize_lossy(m)).sqrt();
    Ok(LstsqSolution { x, residual, cond })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_polynomial_in_inverse_p() {
        let ps: Vec<f64> = (100..=400).step_by(10).map(|p| p as f64).collect();
        let vals: Vec<f64> = ps.iter().map(|p| 0.75 - 2.0 / p + 30.0 / (p * p) - 100.0 / (p * p * p)).collect();
        let fit = Richardson::new(3).fit(&ps, &vals).unwrap();
        assert!((fit.coeffs[0] - 0.75).abs() < 1e-12);
        assert!((fit.coeffs[1] + 2.0).abs() < 1e-8);
        assert!(fit.residual < 1e-13);
    }

    #[test]
    fn complex_fit_splits_parts() {
        let ps: Vec<f64> = (10..=40).map(|p| p as f64).collect();
        let vals: Vec<Complex<f64>> = ps.iter().map(|p| Complex::new(1.0 + 1.0 / p, -0.5 + 0.25 / p)).collect();
        let (c, res) = Richardson::new(2).fit_complex(&ps, &vals).unwrap();
        assert!((c[0] - Complex::new(1.0, -0.5)).norm() < 1e-12);
        assert!(res < 1e-13);
    }

    #[test]
    fn rank_deficiency_is_refused() {
        let mut a = vec![1.0, 1.0, 1.0, 2.0, 2.0, 2.0];
        let r = lstsq(&mut a, 3, 2, &[1.0, 2.0, 3.0]);
        assert!(matches!(r, Err(FitError::IllConditioned { .. })));
    }

    #[test]
    fn too_few_samples() {
        let r = Richardson::<f64>::new(3).fit(&[1.0, 2.0], &[1.0, 1.0]);
        assert!(matches!(r, Err(FitError::TooFewSamples { .. })));
    }
}
