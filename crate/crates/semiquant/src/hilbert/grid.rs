//! Tensor-product quadrature on products of spheres.
//!
//! Each factor is parametrized by `u = 1/(1+|z|²) ∈ (0, 1)` and `θ = arg z`,
//! in which `ω = du dθ / 2π`. A grid of degree `D` uses `D + 2` Gauss-Legendre
//! nodes in `u` and `2D + 1` equispaced angles, so it integrates
//! `z^a z̄^b (1+|z|²)^{-c}` exactly whenever `c ≤ 2D + 3` and `|a - b| ≤ 2D`.

use crate::phase_space::liouville::ray_coordinate;
use crate::phase_space::ChartPoint;
use crate::{GaussLegendre, C64};
use rayon::prelude::*;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    factors: usize,
    degree: usize,
    radial: GaussLegendre,
    angles: usize,
}

impl PartialEq for QuadratureGrid {
    fn eq(&self, other: &Self) -> bool {
        self.factors == other.factors && self.degree == other.degree
    }
}

impl QuadratureGrid {
    pub fn new(factors: usize, degree: usize) -> Self {
        assert!(factors >= 1, "a grid needs at least one factor");
        Self { factors, degree, radial: GaussLegendre::on(degree + 2, 0.0, 1.0), angles: 2 * degree + 1 }
    }

    /// Default grid for sections of `O(p + m)` against a Hamiltonian of
    /// bidegree `d`: `p + d + 4` radial and `2(p + d) + 5` angular nodes.
    pub fn for_level(factors: usize, p: i64, d: u32) -> Self {
        Self::new(factors, (p.max(0) as usize) + d as usize + 2)
    }

    pub fn factors(&self) -> usize {
        self.factors
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn radial_nodes(&self) -> usize {
        self.radial.len()
    }

    pub fn angular_nodes(&self) -> usize {
        self.angles
    }

    pub fn nodes_per_factor(&self) -> usize {
        self.radial.len() * self.angles
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.nodes_per_factor().pow(self.factors as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn radial_rule(&self) -> &GaussLegendre {
        &self.radial
    }

    pub fn angle(&self, a: usize) -> f64 {
        2.0 * PI * a as f64 / self.angles as f64
    }

    /// `(u, θ)` of node `j` within one factor.
    pub fn factor_node(&self, j: usize) -> (f64, f64) {
        let (r, a) = (j / self.angles, j % self.angles);
        (self.radial.x[r], self.angle(a))
    }

    pub fn factor_weight(&self, j: usize) -> f64 {
        self.radial.w[j / self.angles] / self.angles as f64
    }

    /// Per-factor node indices of flat node `idx` (last factor fastest).
    pub fn split(&self, mut idx: usize) -> Vec<usize> {
        let m = self.nodes_per_factor();
        let mut out = vec![0; self.factors];
        for i in (0..self.factors).rev() {
            out[i] = idx % m;
            idx /= m;
        }
        out
    }

    pub fn weight(&self, idx: usize) -> f64 {
        self.split(idx).into_iter().map(|j| self.factor_weight(j)).product()
    }

    /// Node `idx` in the chart that keeps each coordinate bounded.
    pub fn node(&self, idx: usize) -> ChartPoint {
        let mut chart = Vec::with_capacity(self.factors);
        let mut z = Vec::with_capacity(self.factors);
        for j in self.split(idx) {
            let (u, th) = self.factor_node(j);
            let (c, zz, _) = ray_coordinate(u, th);
            chart.push(c);
            z.push(zz);
        }
        ChartPoint { chart, z }
    }

    /// Affine coordinates of node `idx`; finite since `u > 0` at every node.
    pub fn affine_node(&self, idx: usize) -> Vec<C64> {
        self.split(idx)
            .into_iter()
            .map(|j| {
                let (u, th) = self.factor_node(j);
                C64::from_polar(((1.0 - u) / u).sqrt(), th)
            })
            .collect()
    }

    pub fn points(&self) -> Vec<ChartPoint> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    pub fn integrate<F: Fn(&ChartPoint) -> C64 + Sync>(&self, f: F) -> C64 {
        (0..self.len()).into_par_iter().map(|i| f(&self.node(i)) * self.weight(i)).sum()
    }
}

/// `∫ |z|^{2a} (1+|z|²)^{-c} ω = a! (c-a)! / (c+1)!` for `c ≥ a`.
pub fn beta_moment(a: u32, c: u32) -> f64 {
    assert!(c >= a);
    let lf = |n: u32| (1..=n).map(|k| (k as f64).ln()).sum::<f64>();
    (lf(a) + lf(c - a) - lf(c + 1)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_weight_is_one_per_factor() {
        for d in [0, 3, 17] {
            let g = QuadratureGrid::new(1, d);
            let s: f64 = g.weights().iter().sum();
            assert!((s - 1.0).abs() < 1e-13);
        }
        let g = QuadratureGrid::new(2, 2);
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn beta_moments_are_exact() {
        let d = 6;
        let g = QuadratureGrid::new(1, d);
        for a in 0..=d as u32 {
            for b in 0..=d as u32 {
                let c = a + b + 2;
                let v = g.integrate(|x| {
                    let z = x.coordinate_in(0, 0).unwrap();
                    z.powu(a) * z.conj().powu(b) / (1.0 + z.norm_sqr()).powi(c as i32)
                });
                let want = if a == b { beta_moment(a, 2 * a + 2) } else { 0.0 };
                assert!((v - want).norm() < 1e-12, "{a} {b}: {v} vs {want}");
            }
        }
    }

    #[test]
    fn monomial_norm_example() {
        // ‖z^2‖² in O(6): 2!4!/7!.
        let g = QuadratureGrid::new(1, 14);
        let v = g.integrate(|x| {
            let z = x.coordinate_in(0, 0).unwrap();
            C64::from(z.norm_sqr().powi(2) / (1.0 + z.norm_sqr()).powi(6))
        });
        assert!((v.re - 48.0 / 5040.0).abs() < 1e-15);
        assert!((beta_moment(2, 6) - 48.0 / 5040.0).abs() < 1e-16);
    }

    #[test]
    fn odd_moment_vanishes() {
        let g = QuadratureGrid::new(1, 4);
        let v = g.integrate(|x| {
            let z = x.coordinate_in(0, 0).unwrap();
            z / (1.0 + z.norm_sqr()).powi(3)
        });
        assert!(v.norm() < 1e-15);
    }

    #[test]
    fn split_round_trip() {
        let g = QuadratureGrid::new(2, 1);
        let m = g.nodes_per_factor();
        for idx in [0, 5, m + 3, m * m - 1] {
            let s = g.split(idx);
            assert_eq!(s[0] * m + s[1], idx);
        }
    }
}
