//! Real rational Hamiltonians `Σ c · Π z_i^{a_i} z̄_i^{b_i} / (1+|z_i|²)^{d_i}`.
//!
//! With `a_i, b_i ≤ d_i` every term is smooth on the sphere: in the chart at
//! infinity the exponents become `(d_i - a_i, d_i - b_i)`.

use super::geometry::{ChartPoint, MAX_FACTORS};
use crate::{Error, Result, C64};
use std::collections::BTreeMap;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coef: C64,
    pub a: Vec<u32>,
    pub b: Vec<u32>,
    pub d: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    factors: usize,
    terms: Vec<Monomial>,
    label: String,
}

/// Value and chart derivatives up to second order. Matrices are indexed
/// `[i][j]` for `∂_{z_i}∂_{z_j}`, `∂_{z_i}∂_{z̄_j}` and `∂_{z̄_i}∂_{z̄_j}`.
#[derive(Debug, Clone, Copy)]
pub struct Jet {
    pub factors: usize,
    pub f: f64,
    pub fz: [C64; MAX_FACTORS],
    pub fzb: [C64; MAX_FACTORS],
    pub fzz: [[C64; MAX_FACTORS]; MAX_FACTORS],
    pub fzzb: [[C64; MAX_FACTORS]; MAX_FACTORS],
    pub fzbzb: [[C64; MAX_FACTORS]; MAX_FACTORS],
}

const ZERO: C64 = C64::new(0.0, 0.0);

impl Jet {
    fn zero(factors: usize) -> Self {
        Self {
            factors,
            f: 0.0,
            fz: [ZERO; MAX_FACTORS],
            fzb: [ZERO; MAX_FACTORS],
            fzz: [[ZERO; MAX_FACTORS]; MAX_FACTORS],
            fzzb: [[ZERO; MAX_FACTORS]; MAX_FACTORS],
            fzbzb: [[ZERO; MAX_FACTORS]; MAX_FACTORS],
        }
    }
}

/// Derivatives of one factor `z^a z̄^b (1+|z|²)^{-d}`:
/// `[h, h_z, h_z̄, h_zz, h_zz̄, h_z̄z̄]`.
fn factor_jet(z: C64, a: u32, b: u32, d: u32, second: bool) -> [C64; 6] {
    let zb = z.conj();
    let mono = |p: i64, q: i64| -> C64 {
        if p < 0 || q < 0 {
            ZERO
        } else {
            z.powu(p as u32) * zb.powu(q as u32)
        }
    };
    let (ai, bi) = (a as i64, b as i64);
    let af = a as f64;
    let bf = b as f64;
    let df = d as f64;
    let dd = 1.0 + z.norm_sqr();
    let v = dd.powi(-(d as i32));
    let v1 = v / dd;
    let u = mono(ai, bi);
    let uz = mono(ai - 1, bi) * af;
    let uzb = mono(ai, bi - 1) * bf;
    let vz = zb * (-df * v1);
    let vzb = z * (-df * v1);
    let h = u * v;
    let hz = uz * v + u * vz;
    let hzb = uzb * v + u * vzb;
    if !second {
        return [h, hz, hzb, ZERO, ZERO, ZERO];
    }
    let v2 = v1 / dd;
    let k = df * (df + 1.0);
    let uzz = mono(ai - 2, bi) * (af * (af - 1.0));
    let uzzb = mono(ai - 1, bi - 1) * (af * bf);
    let uzbzb = mono(ai, bi - 2) * (bf * (bf - 1.0));
    let vzz = zb * zb * (k * v2);
    let vzbzb = z * z * (k * v2);
    let vzzb = C64::new(-df * v1 + k * z.norm_sqr() * v2, 0.0);
    let hzz = uzz * v + uz * vz * 2.0 + u * vzz;
    let hzbzb = uzbzb * v + uzb * vzb * 2.0 + u * vzbzb;
    let hzzb = uzzb * v + uz * vzb + uzb * vz + u * vzzb;
    [h, hz, hzb, hzz, hzzb, hzbzb]
}

impl Hamiltonian {
    /// Builds a Hamiltonian from terms, merging duplicates and checking that
    /// the total is real and globally smooth.
    pub fn from_terms(factors: usize, terms: Vec<Monomial>, label: impl Into<String>) -> Result<Self> {
        if factors == 0 || factors > MAX_FACTORS {
            return Err(Error::InvalidInput(format!("unsupported factor count {factors}")));
        }
        let mut merged: BTreeMap<(Vec<u32>, Vec<u32>, Vec<u32>), C64> = BTreeMap::new();
        for t in terms {
            if t.a.len() != factors || t.b.len() != factors || t.d.len() != factors {
                return Err(Error::InvalidInput("term exponent length differs from factor count".into()));
            }
            if (0..factors).any(|i| t.a[i] > t.d[i] || t.b[i] > t.d[i]) {
                return Err(Error::InvalidInput(
                    "term is singular at infinity: need a_i, b_i <= d_i".into(),
                ));
            }
            *merged.entry((t.a, t.b, t.d)).or_insert(ZERO) += t.coef;
        }
        for ((a, b, d), c) in &merged {
            let partner = merged.get(&(b.clone(), a.clone(), d.clone())).copied().unwrap_or(ZERO);
            let scale = c.norm().max(partner.norm()).max(1.0);
            if (partner - c.conj()).norm() > 1e-14 * scale {
                return Err(Error::InvalidInput(format!(
                    "Hamiltonian is not real: term {a:?},{b:?} has no conjugate partner"
                )));
            }
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| c.norm() > 0.0)
            .map(|((a, b, d), coef)| Monomial { coef, a, b, d })
            .collect();
        Ok(Self { factors, terms, label: label.into() })
    }

    fn single(factors: usize, i: usize, coef: f64, a: u32, b: u32, d: u32) -> Monomial {
        let mut m = Monomial { coef: C64::new(coef, 0.0), a: vec![0; factors], b: vec![0; factors], d: vec![0; factors] };
        m.a[i] = a;
        m.b[i] = b;
        m.d[i] = d;
        m
    }

    pub fn constant(factors: usize, c: f64) -> Self {
        Self::from_terms(factors, vec![Self::single(factors, 0, c, 0, 0, 0)], format!("constant:{c}"))
            .expect("constant is a valid Hamiltonian")
    }

    /// `f_0 = |z|²/(1+|z|²)` summed over all factors: rigid rotation with
    /// period 1 in each factor.
    pub fn rotation(factors: usize) -> Self {
        let terms = (0..factors).map(|i| Self::single(factors, i, 1.0, 1, 1, 1)).collect();
        Self::from_terms(factors, terms, "rotation").expect("valid")
    }

    /// `Σ_k c_k f_0^k` on a single sphere (`coeffs[0]` multiplies `f_0`).
    pub fn radial(coeffs: &[f64]) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidInput("radial preset needs at least one coefficient".into()));
        }
        let terms = coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| Self::single(1, 0, c, k as u32 + 1, k as u32 + 1, k as u32 + 1))
            .collect();
        Self::from_terms(1, terms, format!("radial:{}", join(coeffs)))
    }

    /// `f_0 + Σ_k ε_k (z^k + z̄^k)/(1+|z|²)^k` on a single sphere
    /// (`eps[0]` is `ε_1`).
    pub fn perturbed(eps: &[f64]) -> Result<Self> {
        let mut terms = vec![Self::single(1, 0, 1.0, 1, 1, 1)];
        for (k, &e) in eps.iter().enumerate() {
            let k = k as u32 + 1;
            terms.push(Self::single(1, 0, e, k, 0, k));
            terms.push(Self::single(1, 0, e, 0, k, k));
        }
        Self::from_terms(1, terms, format!("perturbed:{}", join(eps)))
    }

    /// `ω_1 f_0(z_1) + ω_2 f_0(z_2) + ...`.
    pub fn product(weights: &[f64]) -> Result<Self> {
        let s = weights.len();
        if s == 0 || s > MAX_FACTORS {
            return Err(Error::InvalidInput("product preset needs 1..=4 weights".into()));
        }
        let terms = weights.iter().enumerate().map(|(i, &w)| Self::single(s, i, w, 1, 1, 1)).collect();
        Self::from_terms(s, terms, format!("product:{}", join(weights)))
    }

    /// Parses a preset name such as `rotation`, `radial:1,0.5`,
    /// `perturbed:0,0.1` or `product:1,1.4142135623730951`.
    pub fn preset(spec: &str, factors: usize) -> Result<Self> {
        let (name, args) = match spec.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a)),
            None => (spec.trim(), None),
        };
        let nums = |a: Option<&str>| -> Result<Vec<f64>> {
            a.unwrap_or("")
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::InvalidInput(format!("bad preset coefficient {s:?}: {e}")))
                })
                .collect()
        };
        let h = match name {
            "rotation" => Self::rotation(factors),
            "radial" => Self::radial(&nums(args)?)?,
            "perturbed" => Self::perturbed(&nums(args)?)?,
            "product" => Self::product(&nums(args)?)?,
            "constant" => {
                let v = nums(args)?;
                Self::constant(factors, v.first().copied().unwrap_or(0.0))
            }
            other => return Err(Error::InvalidInput(format!("unknown Hamiltonian preset {other:?}"))),
        };
        if h.factors != factors {
            return Err(Error::InvalidInput(format!(
                "preset {spec:?} acts on {} factor(s) but the geometry has {factors}",
                h.factors
            )));
        }
        Ok(h)
    }

    pub fn factors(&self) -> usize {
        self.factors
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Largest denominator power per factor.
    pub fn degrees(&self) -> Vec<u32> {
        (0..self.factors).map(|i| self.terms.iter().map(|t| t.d[i]).max().unwrap_or(0)).collect()
    }

    /// Largest angular frequency `|a_i - b_i|` per factor.
    pub fn angular_band(&self) -> Vec<u32> {
        (0..self.factors).map(|i| self.terms.iter().map(|t| t.a[i].abs_diff(t.b[i])).max().unwrap_or(0)).collect()
    }

    pub fn max_degree(&self) -> u32 {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    /// `a f + b`.
    pub fn affine(&self, a: f64, b: f64) -> Self {
        let mut terms: Vec<Monomial> =
            self.terms.iter().map(|t| Monomial { coef: t.coef * a, ..t.clone() }).collect();
        terms.push(Self::single(self.factors, 0, b, 0, 0, 0));
        Self::from_terms(self.factors, terms, format!("{}*({})+{}", a, self.label, b)).expect("affine image stays real")
    }

    /// Whether every term is a function of `|z_i|²` alone.
    pub fn is_rotation_invariant(&self) -> bool {
        self.terms.iter().all(|t| t.a == t.b)
    }

    /// Value at a point.
    pub fn value(&self, x: &ChartPoint) -> f64 {
        self.jet_in(&x.chart, &x.z, false).f
    }

    pub fn jet(&self, x: &ChartPoint) -> Jet {
        self.jet_in(&x.chart, &x.z, true)
    }

    /// Jet in explicit chart coordinates; second derivatives only when asked.
    pub fn jet_in(&self, chart: &[u8], z: &[C64], second: bool) -> Jet {
        let s = self.factors;
        let mut jet = Jet::zero(s);
        let mut acc = ZERO;
        let mut fac = [[ZERO; 6]; MAX_FACTORS];
        for t in &self.terms {
            for i in 0..s {
                let (a, b) = if chart[i] == 0 { (t.a[i], t.b[i]) } else { (t.d[i] - t.a[i], t.d[i] - t.b[i]) };
                fac[i] = factor_jet(z[i], a, b, t.d[i], second);
            }
            let others = |skip: &[usize]| -> C64 {
                (0..s).filter(|j| !skip.contains(j)).fold(t.coef, |p, j| p * fac[j][0])
            };
            acc += others(&[]);
            for i in 0..s {
                let rest = others(&[i]);
                jet.fz[i] += fac[i][1] * rest;
                jet.fzb[i] += fac[i][2] * rest;
                if second {
                    jet.fzz[i][i] += fac[i][3] * rest;
                    jet.fzzb[i][i] += fac[i][4] * rest;
                    jet.fzbzb[i][i] += fac[i][5] * rest;
                    for j in 0..s {
                        if j == i {
                            continue;
                        }
                        let rest2 = others(&[i, j]);
                        jet.fzz[i][j] += fac[i][1] * fac[j][1] * rest2;
                        jet.fzzb[i][j] += fac[i][1] * fac[j][2] * rest2;
                        jet.fzbzb[i][j] += fac[i][2] * fac[j][2] * rest2;
                    }
                }
            }
        }
        jet.f = acc.re;
        jet
    }

    /// Imaginary residue of the term sum at a point; zero up to rounding.
    pub fn imaginary_residue(&self, x: &ChartPoint) -> f64 {
        let mut acc = ZERO;
        for t in &self.terms {
            let mut v = t.coef;
            for i in 0..self.factors {
                let (a, b) = if x.chart[i] == 0 { (t.a[i], t.b[i]) } else { (t.d[i] - t.a[i], t.d[i] - t.b[i]) };
                v *= factor_jet(x.z[i], a, b, t.d[i], false)[0];
            }
            acc += v;
        }
        acc.im
    }

    /// Hamiltonian vector field `ξ^{z_i} = -2πi (1+|z_i|²)² ∂f/∂z̄_i` in the
    /// charts of `x`, solving `ι_ξ ω = df`. Refuses coordinates beyond
    /// modulus 10, where the caller should switch chart.
    pub fn vector_field(&self, x: &ChartPoint) -> Result<Vec<C64>> {
        for (i, z) in x.z.iter().enumerate() {
            if z.norm() > 10.0 {
                return Err(Error::Recharting { factor: i, modulus: z.norm() });
            }
        }
        Ok(self.vector_field_unchecked(&x.chart, &x.z))
    }

    pub(crate) fn vector_field_unchecked(&self, chart: &[u8], z: &[C64]) -> Vec<C64> {
        let jet = self.jet_in(chart, z, false);
        xi_from_jet(&jet, z)[..z.len()].to_vec()
    }
}

pub(crate) fn xi_from_jet(jet: &Jet, z: &[C64]) -> [C64; MAX_FACTORS] {
    let mut xi = [ZERO; MAX_FACTORS];
    for i in 0..jet.factors {
        let d = 1.0 + z[i].norm_sqr();
        xi[i] = C64::new(0.0, -2.0 * PI * d * d) * jet.fzb[i];
    }
    xi
}

/// Real Jacobian of the Hamiltonian field in chart coordinates, row-major
/// `2s × 2s` with rows `(Re ξ^{z_i}, Im ξ^{z_i})` and columns `(∂x_j, ∂y_j)`.
pub(crate) fn field_jacobian(jet: &Jet, z: &[C64], out: &mut [f64]) {
    let s = jet.factors;
    let n = 2 * s;
    let m2pi = C64::new(0.0, -2.0 * PI);
    for i in 0..s {
        let d = 1.0 + z[i].norm_sqr();
        for j in 0..s {
            // ∂_{z_j} ξ^{z_i} and ∂_{z̄_j} ξ^{z_i}
            let mut dz = jet.fzzb[j][i] * (d * d);
            let mut dzb = jet.fzbzb[i][j] * (d * d);
            if i == j {
                dz += z[i].conj() * jet.fzb[i] * (2.0 * d);
                dzb += z[i] * jet.fzb[i] * (2.0 * d);
            }
            let dz = m2pi * dz;
            let dzb = m2pi * dzb;
            let dx = dz + dzb;
            let dy = (dz - dzb) * C64::new(0.0, 1.0);
            out[(2 * i) * n + 2 * j] = dx.re;
            out[(2 * i + 1) * n + 2 * j] = dx.im;
            out[(2 * i) * n + 2 * j + 1] = dy.re;
            out[(2 * i + 1) * n + 2 * j + 1] = dy.im;
        }
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
}
