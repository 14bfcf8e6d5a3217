use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semiquant::phase_space::flow::field_real;
use semiquant::phase_space::tangent::hermitian;
use semiquant::phase_space::{
    closure_defect, find_periodic_orbits, flow_full, integrate_flow, liouville_volume, primitive_orbits,
    pushforward_complex_structure, FlowOptions, LevelOptions, OrbitOptions,
};
use semiquant::{ChartPoint, Hamiltonian, ModelGeometry, RMatrix, C64};
use std::f64::consts::PI;

fn model(spec: &str) -> (ModelGeometry, Hamiltonian) {
    let factors = if spec.starts_with("product") { 2 } else { 1 };
    let geom = ModelGeometry::product(factors, 0).unwrap();
    (geom, Hamiltonian::preset(spec, factors).unwrap())
}

const SPECS: [&str; 5] = ["rotation", "radial:1,0.5", "perturbed:0,0.1", "perturbed:0.2,0.1,0.05", "product:1,1.4142135623730951"];

fn point(factors: usize, coords: &[(f64, f64, u8)]) -> ChartPoint {
    let (chart, z) = coords[..factors].iter().map(|&(r, th, c)| (c, C64::from_polar(r, th))).unzip();
    ChartPoint::new(chart, z).unwrap().canonical()
}

fn coords() -> impl Strategy<Value = Vec<(f64, f64, u8)>> {
    prop::collection::vec((0.02f64..2.5, 0.0f64..2.0 * PI, 0u8..2), 2)
}

/// `df` in real chart coordinates from the complex derivatives.
fn real_differential(f: &Hamiltonian, x: &ChartPoint) -> Vec<f64> {
    let jet = f.jet(x);
    (0..x.factors()).flat_map(|i| [2.0 * jet.fz[i].re, -2.0 * jet.fz[i].im]).collect()
}

#[test]
fn interior_product_of_the_field_is_df() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for spec in SPECS {
        let (geom, f) = model(spec);
        let s = geom.factors();
        for _ in 0..1000 {
            let c: Vec<(f64, f64, u8)> =
                (0..2).map(|_| (rng.random_range(0.0..1.3), rng.random_range(0.0..2.0 * PI), rng.random_range(0..2))).collect();
            let x = point(s, &c);
            let xi = field_real(&f, &x);
            let om = geom.omega_matrix(&x);
            let df = real_differential(&f, &x);
            let scale = df.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for j in 0..2 * s {
                let lhs: f64 = (0..2 * s).map(|k| xi[k] * om[(k, j)]).sum();
                assert!((lhs - df[j]).abs() <= 1e-12 * scale, "{spec} at {x:?}: {lhs} vs {}", df[j]);
            }
        }
    }
}

#[test]
fn liouville_volume_is_the_period_for_surfaces() {
    let opts = OrbitOptions::default();
    for (spec, levels) in [("rotation", vec![0.2, 0.5, 0.9]), ("radial:1,0.5", vec![0.3, 0.8, 1.2]), ("perturbed:0,0.1", vec![0.3, 0.5, 0.7])] {
        let (geom, f) = model(spec);
        for c in levels {
            let vol = liouville_volume(&geom, &f, c, &LevelOptions::default()).unwrap();
            let orbits = primitive_orbits(&geom, &f, c, &opts).unwrap();
            assert_eq!(orbits.len(), 1, "{spec} at {c}");
            let period = orbits[0].1;
            assert!((vol - period).abs() < 1e-8, "{spec} at {c}: volume {vol} vs period {period}");
        }
    }
}

#[test]
fn action_is_additive_over_repetitions() {
    let opts = OrbitOptions::default();
    for (spec, c) in [("radial:1,0.5", 0.8), ("perturbed:0,0.1", 0.4), ("perturbed:0.2,0.1,0.05", 0.6), ("product:1,1.4142135623730951", 0.5)] {
        let (geom, f) = model(spec);
        let orbits = find_periodic_orbits(&geom, &f, c, (0.05, 3.2), &opts).unwrap();
        assert!(!orbits.is_empty(), "{spec}");
        for o in &orbits {
            let base = orbits
                .iter()
                .find(|b| b.repetition == 1 && closure_defect(&b.point, &o.point) < 1e-8)
                .expect("primitive record for every repetition");
            let d = (o.action - o.repetition as f64 * base.action).rem_euclid(1.0);
            assert!(d.min(1.0 - d) < 1e-8, "{spec}: k={} λ={} λ1={}", o.repetition, o.action, base.action);
        }
    }
}

fn spec_strategy() -> impl Strategy<Value = &'static str> {
    prop::sample::select(SPECS.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn flow_conserves_energy_and_transports_the_field(spec in spec_strategy(), c in coords(), t in -1.2f64..1.2) {
        let (geom, f) = model(spec);
        let x = point(geom.factors(), &c);
        let out = flow_full(&f, &x, t, true, &FlowOptions::default()).unwrap();
        prop_assert!((f.value(&out.point) - f.value(&x)).abs() <= 1e-9);
        let dphi = out.dphi.unwrap();
        let pushed = &dphi * RMatrix::from_column_slice(2 * geom.factors(), 1, &field_real(&f, &x));
        let there = field_real(&f, &out.point);
        let scale = there.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in pushed.iter().zip(&there) {
            prop_assert!((a - b).abs() <= 1e-8 * scale, "{} vs {}", a, b);
        }
    }

    #[test]
    fn flow_map_is_symplectic(spec in spec_strategy(), c in coords(), t in -1.2f64..1.2) {
        let (geom, f) = model(spec);
        let x = point(geom.factors(), &c);
        let out = flow_full(&f, &x, t, true, &FlowOptions::default()).unwrap();
        let dphi = out.dphi.unwrap();
        let om0 = geom.omega_matrix(&x);
        let pulled = dphi.transpose() * geom.omega_matrix(&out.point) * &dphi;
        let err = (&pulled - &om0).abs().max() / om0.abs().max();
        prop_assert!(err <= 1e-8, "relative defect {}", err);
    }

    #[test]
    fn flow_group_law(spec in spec_strategy(), c in coords(), s in -0.8f64..0.8, t in -0.8f64..0.8) {
        let (geom, f) = model(spec);
        let opts = FlowOptions::default();
        let x = point(geom.factors(), &c);
        let direct = integrate_flow(&f, &x, s + t, &opts).unwrap();
        let composed = integrate_flow(&f, &integrate_flow(&f, &x, t, &opts).unwrap(), s, &opts).unwrap();
        prop_assert!(closure_defect(&direct, &composed) <= 2e-10);
    }

    #[test]
    fn oblique_projectors_split_the_identity(spec in spec_strategy(), c in coords(), t in -1.0f64..1.0, v in prop::collection::vec(-1.0f64..1.0, 4)) {
        let (geom, f) = model(spec);
        let x = point(geom.factors(), &c);
        let td = pushforward_complex_structure(&geom, &f, t, &x, &FlowOptions::default()).unwrap();
        let n = 2 * geom.factors();
        let id = semiquant::CMatrix::identity(n, n);
        prop_assert!((&td.pi_0t * &td.pi_0t - &td.pi_0t).norm() < 1e-9);
        prop_assert!((&td.pi_0t + &td.pibar_t0 - &id).norm() < 1e-12);
        let xi: Vec<C64> = v[..n].iter().map(|&a| C64::new(a, 0.0)).collect();
        prop_assume!(xi.iter().map(|z| z.norm_sqr()).sum::<f64>() > 1e-4);
        let proj: Vec<C64> = (0..n).map(|r| (0..n).map(|k| td.pi_0t[(r, k)] * xi[k]).sum()).collect();
        let g = geom.metric(&td.base);
        prop_assert!(hermitian(&g, &proj, &xi).re > 0.0);
    }
}
