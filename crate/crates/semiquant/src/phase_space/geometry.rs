//! Products of Riemann spheres with the normalized Fubini-Study form.
//!
//! Each factor carries `ω = (i/2π) dz∧dz̄ / (1+|z|²)²` in both the affine chart
//! `z` and the chart `w = 1/z` at infinity, so every factor has area 1. Real
//! tangent coordinates are ordered `(x_1, y_1, x_2, y_2, ...)` with
//! `z_i = x_i + i y_i` in the factor's current chart.

use crate::{Error, RMatrix, Result, C64};
use std::f64::consts::PI;

pub const MAX_FACTORS: usize = 4;

/// A product of `s` spheres; factor `i` carries the line bundle `O(m_i)` as a
/// twist. The metaplectic twist is `m_i = -1` (the square root of `K_X`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelGeometry {
    twists: Vec<i32>,
}

impl ModelGeometry {
    pub fn new(twists: Vec<i32>) -> Result<Self> {
        if twists.is_empty() || twists.len() > MAX_FACTORS {
            return Err(Error::InvalidInput(format!(
                "a model needs between 1 and {MAX_FACTORS} factors, got {}",
                twists.len()
            )));
        }
        Ok(Self { twists })
    }

    pub fn sphere() -> Self {
        Self { twists: vec![0] }
    }

    pub fn metaplectic_sphere() -> Self {
        Self { twists: vec![-1] }
    }

    /// `S² × ... × S²` with the same twist on every factor.
    pub fn product(factors: usize, twist: i32) -> Result<Self> {
        Self::new(vec![twist; factors])
    }

    pub fn factors(&self) -> usize {
        self.twists.len()
    }

    pub fn twists(&self) -> &[i32] {
        &self.twists
    }

    pub fn is_metaplectic(&self) -> bool {
        self.twists.iter().all(|&m| m == -1)
    }

    pub fn real_dim(&self) -> usize {
        2 * self.factors()
    }

    /// Rank of the twist bundle `E`; always 1 for these models.
    pub fn rank_e(&self) -> usize {
        1
    }

    /// Holomorphic Euler characteristic of `E ⊗ L^p` from the Todd class:
    /// on each factor `∫ ch(O(N)) Td(S²) = N + 1`. Negative degrees give the
    /// zero space, matching `H_p = {0}` below the threshold.
    pub fn riemann_roch(&self, p: i64) -> u64 {
        self.twists
            .iter()
            .map(|&m| {
                let n = p + m as i64;
                if n < 0 {
                    0
                } else {
                    (n + 1) as u64
                }
            })
            .product()
    }

    /// Standard complex structure in holomorphic chart coordinates.
    pub fn j0(&self) -> RMatrix {
        let n = self.real_dim();
        let mut j = RMatrix::zeros(n, n);
        for i in 0..self.factors() {
            j[(2 * i + 1, 2 * i)] = 1.0;
            j[(2 * i, 2 * i + 1)] = -1.0;
        }
        j
    }

    /// Coordinate matrix of `ω` at `x`: `ω(u, v) = uᵀ Ω v`.
    pub fn omega_matrix(&self, x: &ChartPoint) -> RMatrix {
        let n = self.real_dim();
        let mut om = RMatrix::zeros(n, n);
        for i in 0..self.factors() {
            let d = 1.0 + x.z[i].norm_sqr();
            let rho = 1.0 / (PI * d * d);
            om[(2 * i, 2 * i + 1)] = rho;
            om[(2 * i + 1, 2 * i)] = -rho;
        }
        om
    }

    /// Round metric `g = ω(·, J_0 ·)` in chart coordinates.
    pub fn metric(&self, x: &ChartPoint) -> RMatrix {
        self.omega_matrix(x) * self.j0()
    }
}

/// A point of the model: per factor a chart index (0 affine, 1 at infinity)
/// and the coordinate in that chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub chart: Vec<u8>,
    pub z: Vec<C64>,
}

impl ChartPoint {
    /// Point given by affine coordinates, stored canonically.
    pub fn affine(z: &[C64]) -> Self {
        Self { chart: vec![0; z.len()], z: z.to_vec() }.canonical()
    }

    /// The point with every factor at the north pole `z = ∞`.
    pub fn at_infinity(factors: usize) -> Self {
        Self { chart: vec![1; factors], z: vec![C64::new(0.0, 0.0); factors] }
    }

    pub fn new(chart: Vec<u8>, z: Vec<C64>) -> Result<Self> {
        if chart.len() != z.len() || chart.iter().any(|&c| c > 1) {
            return Err(Error::InvalidInput("chart indices must be 0 or 1, one per factor".into()));
        }
        Ok(Self { chart, z })
    }

    pub fn factors(&self) -> usize {
        self.z.len()
    }

    /// Representative with `|z| ≤ 1` in every factor.
    pub fn canonical(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.factors() {
            if out.z[i].norm_sqr() > 1.0 {
                out.z[i] = out.z[i].inv();
                out.chart[i] = 1 - out.chart[i];
            }
        }
        out
    }

    /// Coordinate of factor `i` in the requested chart; `None` when the point
    /// is the pole that chart misses.
    pub fn coordinate_in(&self, i: usize, chart: u8) -> Option<C64> {
        if self.chart[i] == chart {
            Some(self.z[i])
        } else if self.z[i] == C64::new(0.0, 0.0) {
            None
        } else {
            Some(self.z[i].inv())
        }
    }

    /// Unit vector in R³ of factor `i` (stereographic from the south pole
    /// `z = 0` at `(0, 0, -1)`).
    pub fn unit_vector(&self, i: usize) -> [f64; 3] {
        let z = self.z[i];
        let d = 1.0 + z.norm_sqr();
        if self.chart[i] == 0 {
            [2.0 * z.re / d, 2.0 * z.im / d, (z.norm_sqr() - 1.0) / d]
        } else {
            [2.0 * z.re / d, -2.0 * z.im / d, (1.0 - z.norm_sqr()) / d]
        }
    }

    /// Product round distance, each factor a sphere of area 1.
    pub fn distance(&self, other: &ChartPoint) -> f64 {
        let radius = 0.5 / PI.sqrt();
        let mut acc = 0.0;
        for i in 0..self.factors() {
            let a = self.unit_vector(i);
            let b = other.unit_vector(i);
            let dot = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0);
            let cross = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
            let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
            let ang = sin.atan2(dot);
            acc += (radius * ang).powi(2);
        }
        acc.sqrt()
    }

    /// Real coordinate vector `(x_1, y_1, ...)` in the current charts.
    pub fn real_coords(&self) -> Vec<f64> {
        self.z.iter().flat_map(|z| [z.re, z.im]).collect()
    }
}

/// Real 2×2 matrix of multiplication by a complex number.
pub(crate) fn complex_as_real(c: C64) -> [[f64; 2]; 2] {
    [[c.re, -c.im], [c.im, c.re]]
}
