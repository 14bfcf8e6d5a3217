//! Finite-difference oracle for the transport `τ^{K_X}` along `s ↦ J_s(x)`.
//!
//! The path is `J_s = dφ_{-s}^{-1} J_0 dφ_{-s}`. A frame of `T^{(1,0)}_{J_s}` is
//! stepped with
//! `V_{k+1} = P_{k+1}(V_k - ½ g_m^{-1}(g_{k+1} - g_k) V_k)` where `P` is the
//! `J_{k+1}` projector and `g_m` the midpoint metric, then compared in unit
//! frames with the ODE transport.

use semiquant::phase_space::{canonical_transport, FlowOptions, FlowTracker, Monomial};
use semiquant::{CMatrix, ChartPoint, Hamiltonian, ModelGeometry, RMatrix, C64};

const I: C64 = C64::new(0.0, 1.0);

fn cplx(m: &RMatrix) -> CMatrix {
    m.map(|v| C64::new(v, 0.0))
}

fn gram_det(g: &RMatrix, u: &CMatrix) -> C64 {
    (u.transpose() * cplx(g) * u.map(|v| v.conj())).determinant()
}

fn discrete_tau(geom: &ModelGeometry, f: &Hamiltonian, x: &ChartPoint, t: f64, steps: usize) -> C64 {
    let s = geom.factors();
    let n = 2 * s;
    let opts = FlowOptions::default();
    let omega = geom.omega_matrix(x);
    let j0 = geom.j0();
    let mut tracker = FlowTracker::new(f, x, true);
    let structure = |a: &RMatrix| -> (RMatrix, RMatrix) {
        let jt = a.clone().try_inverse().unwrap() * &j0 * a;
        let g = &omega * &jt;
        (jt, g)
    };
    let mut v0 = CMatrix::zeros(n, s);
    for i in 0..s {
        v0[(2 * i, i)] = C64::new(1.0, 0.0);
        v0[(2 * i + 1, i)] = -I;
    }
    let (_, g_start) = structure(&RMatrix::identity(n, n));
    let mut g_prev = g_start.clone();
    let mut v = v0.clone();
    let mut jt = j0.clone();
    for k in 1..=steps {
        tracker.advance(-t * k as f64 / steps as f64, &opts).unwrap();
        let a = tracker.snapshot().dphi.unwrap();
        let (j_next, g_next) = structure(&a);
        let gm = (&g_prev + &g_next) * 0.5;
        let corr = gm.try_inverse().unwrap() * (&g_next - &g_prev) * 0.5;
        let proj = (CMatrix::identity(n, n) - cplx(&j_next) * I) * C64::new(0.5, 0.0);
        v = &proj * (&v - cplx(&corr) * &v);
        g_prev = g_next;
        jt = j_next;
    }
    let proj = (CMatrix::identity(n, n) - cplx(&jt) * I) * C64::new(0.5, 0.0);
    let e = &proj * &v0;
    let eh = e.adjoint();
    let c = (&eh * &e).try_inverse().unwrap() * &eh * &v;
    let ratio = (gram_det(&g_prev, &e) / gram_det(&g_start, &v0)).sqrt();
    (c.determinant() * ratio).inv()
}

/// `f_0(z_1) + √2 f_0(z_2) + ε Re(z_1 z̄_2)/((1+|z_1|²)(1+|z_2|²))`.
fn coupled(eps: f64) -> Hamiltonian {
    let m = |coef: f64, a: [u32; 2], b: [u32; 2]| Monomial { coef: C64::new(coef, 0.0), a: a.to_vec(), b: b.to_vec(), d: vec![1, 1] };
    let terms = vec![
        Monomial { coef: C64::new(1.0, 0.0), a: vec![1, 0], b: vec![1, 0], d: vec![1, 0] },
        Monomial { coef: C64::new(2f64.sqrt(), 0.0), a: vec![0, 1], b: vec![0, 1], d: vec![0, 1] },
        m(eps, [1, 0], [0, 1]),
        m(eps, [0, 1], [1, 0]),
    ];
    Hamiltonian::from_terms(2, terms, "coupled").unwrap()
}

#[test]
fn canonical_transport_matches_finite_differences() {
    let cases = [
        ("perturbed:0,0.1", 1, vec![C64::new(0.6, 0.3)], 0.3),
        ("perturbed:0.2,0.1,0.05", 1, vec![C64::new(-0.4, 1.1)], 0.45),
        ("radial:1,0.5", 1, vec![C64::new(0.8, 0.0)], 0.7),
        ("coupled", 2, vec![C64::new(0.3, 0.2), C64::new(1.5, -0.5)], 0.4),
    ];
    for (spec, s, z, t) in cases {
        let geom = ModelGeometry::product(s, 0).unwrap();
        let f = if spec == "coupled" { coupled(0.3) } else { Hamiltonian::preset(spec, s).unwrap() };
        let x = ChartPoint::affine(&z);
        let ode = canonical_transport(&geom, &f, t, &x, &FlowOptions::default()).unwrap();
        let levels: Vec<C64> = [200, 400, 800].iter().map(|&k| discrete_tau(&geom, &f, &x, t, k)).collect();
        // Richardson for errors in h and h².
        let extrapolated = (levels[2] * 8.0 - levels[1] * 6.0 + levels[0]) / 3.0;
        println!("{spec}: ode {ode:.12} fd {:.12} extrapolated {extrapolated:.12}", levels[2]);
        assert!((ode.norm() - 1.0).abs() < 1e-9, "{spec}: |τ| = {}", ode.norm());
        assert!((extrapolated - ode).norm() < 1e-7, "{spec}: {extrapolated} vs {ode}");
    }
}
