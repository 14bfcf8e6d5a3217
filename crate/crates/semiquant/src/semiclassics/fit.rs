//! Least-squares extraction of oscillatory expansion coefficients.

use crate::{CMatrix, CVector, Error, Result, C64};
use std::f64::consts::PI;

/// Largest accepted condition number of the column-scaled design matrix.
pub const FIT_MAX_COND: f64 = 1e10;

/// Basis function `p^α e^{2πipλ} p^{-r}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTerm {
    pub id: String,
    pub alpha: f64,
    pub lambda: f64,
    pub r: u32,
}

impl FitTerm {
    pub fn new(id: impl Into<String>, alpha: f64, lambda: f64, r: u32) -> Self {
        Self { id: id.into(), alpha, lambda, r }
    }

    pub fn eval(&self, p: f64) -> C64 {
        let ph = 2.0 * PI * (p * self.lambda).rem_euclid(1.0);
        C64::from_polar(p.powf(self.alpha - self.r as f64), ph)
    }
}

#[derive(Debug, Clone)]
pub struct ExpansionFit {
    pub ps: Vec<f64>,
    pub traces: Vec<C64>,
    pub terms: Vec<FitTerm>,
    pub coeffs: Vec<C64>,
    /// Euclidean norm of the residual vector.
    pub residual: f64,
    pub cond: f64,
}

impl ExpansionFit {
    pub fn model(&self, p: f64) -> C64 {
        self.terms.iter().zip(&self.coeffs).map(|(t, c)| t.eval(p) * c).sum()
    }

    pub fn coeff(&self, id: &str) -> Option<C64> {
        self.terms.iter().position(|t| t.id == id).map(|i| self.coeffs[i])
    }
}

pub fn fit_expansion(ps: &[f64], traces: &[C64], terms: &[FitTerm]) -> Result<ExpansionFit> {
    let (m, k) = (ps.len(), terms.len());
    if traces.len() != m {
        return Err(Error::InvalidInput(format!("{m} sample points but {} traces", traces.len())));
    }
    if k == 0 || m < 2 * k {
        return Err(Error::InvalidInput(format!("{m} samples for {k} coefficients; need at least {}", 2 * k)));
    }
    let mut a = CMatrix::from_fn(m, k, |i, j| terms[j].eval(ps[i]));
    let scale: Vec<f64> = (0..k).map(|j| a.column(j).norm()).collect();
    for (j, &s) in scale.iter().enumerate() {
        if s == 0.0 {
            return Err(Error::IllConditioned { cond: f64::INFINITY, limit: FIT_MAX_COND, hint: "; zero column" });
        }
        a.column_mut(j).unscale_mut(s);
    }
    let b = CVector::from_column_slice(traces);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if cond > FIT_MAX_COND {
        return Err(Error::IllConditioned {
            cond,
            limit: FIT_MAX_COND,
            hint: "; terms with equal phase and power cannot be separated",
        });
    }
    let x = svd.solve(&b, 0.0).map_err(|e| Error::InvalidInput(e.into()))?;
    let residual = (&a * &x - &b).norm();
    let coeffs = x.iter().zip(&scale).map(|(c, s)| c / s).collect();
    Ok(ExpansionFit { ps: ps.to_vec(), traces: traces.to_vec(), terms: terms.to_vec(), coeffs, residual, cond })
}
