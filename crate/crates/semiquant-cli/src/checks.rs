//! Named checks. Each returns rows; library errors become skipped or error
//! rows so that the remaining checks and reports still run.

use crate::config::{point, CheckName};
use crate::report::{num, write_csv, Row};
use crate::run::Context;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semiquant::hilbert::kernel_trace;
use semiquant::operators::matrix::{kronecker_sum_values, op_norm};
use semiquant::operators::{bochner_laplacian, evolution, kostant_souriau, quantum_parallel_transport, BochnerOptions, TransportOptions};
use semiquant::phase_space::flow::field_real;
use semiquant::phase_space::{
    closure_defect, find_periodic_orbits, flow_full, integrate_flow, liouville_volume, primitive_orbits, resonance_record,
    FlowOptions, LevelOptions, OrbitOptions,
};
use semiquant::semiclassics::{
    a0_check, coherent_propagation_check, evolution_kernel_decay, fit_expansion, gutzwiller_predict, smoothed_trace,
    smoothed_trace_values, window_kernel_decay, FitTerm, KernelCheckOptions,
};
use semiquant::{CMatrix, ChartPoint, Error, Hamiltonian, ModelGeometry, QuadratureGrid, QuantumBasis, RMatrix, Result, SpectralData, C64};
use std::f64::consts::PI;

pub fn run_check(ctx: &Context, check: CheckName) -> Vec<Row> {
    let name = check.as_str();
    let out = match check {
        CheckName::Rrh => rrh(ctx),
        CheckName::Spectrum => spectrum(ctx),
        CheckName::Hermitian => hermitian(ctx),
        CheckName::Unitary => unitary(ctx),
        CheckName::GroupLaw => group_law(ctx),
        CheckName::TraceFormula => trace_formula(ctx),
        CheckName::Classical => classical(ctx),
        CheckName::Liouville => liouville(ctx),
        CheckName::Transport => transport(ctx),
        CheckName::Poisson => poisson(ctx),
        CheckName::Weyl => weyl(ctx),
        CheckName::OrbitCoefficient => orbit_coefficient(ctx),
        CheckName::A0 => a0(ctx),
        CheckName::EvolutionDecay => evolution_decay(ctx),
        CheckName::WindowDecay => window_decay(ctx),
        CheckName::Coherent => coherent(ctx),
        CheckName::Bochner => bochner(ctx),
    };
    match out {
        Ok(rows) => rows,
        Err(e) => vec![failure_row(name, &e)],
    }
}

fn failure_row(name: &str, e: &Error) -> Row {
    match e {
        Error::NearCritical { .. } => Row::skipped(name, "critical level"),
        Error::EmptyLevel { .. } => Row::skipped(name, "empty level"),
        other => Row::error(name, other),
    }
}

fn twists_label(t: &[i32]) -> String {
    t.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(",")
}

fn twist_family(ctx: &Context) -> Vec<Vec<i32>> {
    let mut all = vec![ctx.cfg.twists()];
    all.extend(ctx.cfg.experiment.variants.iter().cloned());
    all
}

fn io_err(e: std::io::Error) -> Error {
    Error::InvalidInput(format!("cannot write report: {e}"))
}

fn level(ctx: &Context) -> f64 {
    ctx.cfg.experiment.level.expect("validated: level present")
}

fn window(ctx: &Context) -> semiquant::WindowFunction {
    ctx.cfg.window().expect("validated: window present")
}

fn rng(ctx: &Context, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(ctx.cfg.experiment.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn rrh(ctx: &Context) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for tw in twist_family(ctx) {
        let geom = ModelGeometry::new(tw.clone())?;
        let mut worst = 0i64;
        for &p in &ctx.ps {
            let dim = QuantumBasis::new(&geom, p).dim() as i64;
            let rr: i64 = tw.iter().map(|&m| (p + 1 + m as i64).max(0)).product();
            worst = worst.max((dim - rr).abs());
            table.push(vec![twists_label(&tw), p.to_string(), dim.to_string(), rr.to_string()]);
        }
        rows.push(Row::exact(format!("rrh[twists={}]", twists_label(&tw)), worst as f64, 0.0));
    }
    write_csv(ctx.out.join("dimensions.csv"), &["twists", "p", "dim", "riemann_roch"], table).map_err(io_err)?;
    Ok(rows)
}

/// Factor weights of a rotation or product preset.
fn rotation_weights(ctx: &Context) -> Option<Vec<f64>> {
    let preset = ctx.cfg.hamiltonian.preset.trim();
    if preset == "rotation" {
        return Some(vec![1.0; ctx.cfg.geometry.factors]);
    }
    let args = preset.strip_prefix("product:")?;
    args.split(',').map(|s| s.trim().parse().ok()).collect()
}

fn spectrum(ctx: &Context) -> Result<Vec<Row>> {
    let Some(weights) = rotation_weights(ctx) else {
        return Ok(vec![Row::skipped("spectrum", "exact spectrum known only for rotation and product presets")]);
    };
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for tw in twist_family(ctx).into_iter().filter(|tw| tw.len() == weights.len()) {
        let geom = ModelGeometry::new(tw.clone())?;
        let results = ctx.sweep(|p| {
            let (_, q) = ctx.spectral(&geom, &ctx.f, p)?;
            let lists: Vec<Vec<f64>> = tw
                .iter()
                .zip(&weights)
                .map(|(&m, &w)| (0..=(p + m as i64)).map(|k| w * (k as f64 - m as f64 / 2.0) / p as f64).collect())
                .collect();
            let refs: Vec<&[f64]> = lists.iter().map(|v| v.as_slice()).collect();
            let mut exact = kronecker_sum_values(&refs);
            exact.sort_by(f64::total_cmp);
            Ok((q.values, exact))
        })?;
        for (&p, (vals, exact)) in ctx.ps.iter().zip(results) {
            let name = format!("spectrum[twists={},p={p}]", twists_label(&tw));
            if vals.len() != exact.len() {
                rows.push(Row::exact(name, vals.len() as f64, exact.len() as f64));
                continue;
            }
            let dev = vals.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            rows.push(Row::upper(name, dev, ctx.cfg.tolerances.spectrum));
            for (k, v) in vals.iter().enumerate() {
                table.push(vec![twists_label(&tw), p.to_string(), k.to_string(), num(*v), num(exact[k])]);
            }
        }
    }
    write_csv(ctx.out.join("spectrum_check.csv"), &["twists", "p", "index", "value", "exact"], table).map_err(io_err)?;
    Ok(rows)
}

fn hermitian(ctx: &Context) -> Result<Vec<Row>> {
    let defects = ctx.sweep(|p| {
        let basis = QuantumBasis::new(&ctx.geom, p);
        let grid = QuadratureGrid::for_level(ctx.geom.factors(), p, ctx.f.max_degree());
        Ok(kostant_souriau(&basis, &grid, &ctx.f)?.hermitian_defect())
    })?;
    Ok(ctx.ps.iter().zip(defects).map(|(p, d)| Row::upper(format!("hermitian[p={p}]"), d, ctx.cfg.tolerances.hermitian)).collect())
}

fn unitary(ctx: &Context) -> Result<Vec<Row>> {
    let t = ctx.cfg.experiment.time;
    let defects = ctx.sweep(|p| {
        let (_, q) = ctx.spectral(&ctx.geom, &ctx.f, p)?;
        Ok(evolution(&q, t, p).unitary_defect())
    })?;
    Ok(ctx.ps.iter().zip(defects).map(|(p, d)| Row::upper(format!("unitary[p={p}]"), d, ctx.cfg.tolerances.unitary)).collect())
}

fn group_law(ctx: &Context) -> Result<Vec<Row>> {
    let defects = ctx.sweep(|p| {
        let mut r = rng(ctx, p as u64 + 101);
        let (s, t) = (r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
        let (_, q) = ctx.spectral(&ctx.geom, &ctx.f, p)?;
        let lhs = &evolution(&q, s, p).matrix * &evolution(&q, t, p).matrix;
        Ok(op_norm(&(lhs - evolution(&q, s + t, p).matrix)))
    })?;
    Ok(ctx.ps.iter().zip(defects).map(|(p, d)| Row::upper(format!("group_law[p={p}]"), d, ctx.cfg.tolerances.group_law)).collect())
}

fn trace_formula(ctx: &Context) -> Result<Vec<Row>> {
    let worst = ctx.sweep(|p| {
        let basis = QuantumBasis::new(&ctx.geom, p);
        let grid = QuadratureGrid::for_level(ctx.geom.factors(), p, 0);
        let n = basis.dim();
        let mut r = rng(ctx, p as u64 + 202);
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let a = CMatrix::from_fn(n, n, |_, _| C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)));
            let h = (&a + a.adjoint()) * C64::new(0.5, 0.0);
            let spectral: f64 = SpectralData::from_hermitian(&h).values.iter().sum();
            let quad = kernel_trace(&basis, &grid, &h);
            worst = worst.max((quad - spectral).norm() / (1.0 + spectral.abs()));
        }
        Ok(worst)
    })?;
    Ok(ctx.ps.iter().zip(worst).map(|(p, d)| Row::upper(format!("trace_formula[p={p}]"), d, ctx.cfg.tolerances.trace_formula)).collect())
}

fn random_point(r: &mut ChaCha8Rng, factors: usize) -> ChartPoint {
    let chart = (0..factors).map(|_| r.random_range(0..2u8)).collect();
    let z = (0..factors).map(|_| C64::from_polar(r.random_range(0.0..1.3), r.random_range(0.0..2.0 * PI))).collect();
    ChartPoint::new(chart, z).expect("valid chart indices").canonical()
}

fn classical(ctx: &Context) -> Result<Vec<Row>> {
    let tol = &ctx.cfg.tolerances;
    let s = ctx.geom.factors();
    let opts = FlowOptions::default();
    let mut r = rng(ctx, 303);
    let (mut symp, mut energy, mut field, mut group, mut iota) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..ctx.cfg.experiment.samples {
        let x = random_point(&mut r, s);
        let t = ctx.cfg.experiment.time * r.random_range(-1.0..1.0);
        let out = flow_full(&ctx.f, &x, t, true, &opts)?;
        let dphi = out.dphi.expect("variational flow");
        let om0 = ctx.geom.omega_matrix(&x);
        let pulled = dphi.transpose() * ctx.geom.omega_matrix(&out.point) * &dphi;
        symp = symp.max((&pulled - &om0).abs().max() / om0.abs().max());
        energy = energy.max((ctx.f.value(&out.point) - ctx.f.value(&x)).abs());
        let pushed = &dphi * RMatrix::from_column_slice(2 * s, 1, &field_real(&ctx.f, &x));
        let there = field_real(&ctx.f, &out.point);
        let scale = there.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        field = field.max(pushed.iter().zip(&there).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale);
        let s1 = ctx.cfg.experiment.time * r.random_range(-1.0..1.0);
        let direct = integrate_flow(&ctx.f, &x, s1 + t, &opts)?;
        let composed = integrate_flow(&ctx.f, &out.point, s1, &opts)?;
        group = group.max(closure_defect(&direct, &composed));
        let xi = field_real(&ctx.f, &x);
        let jet = ctx.f.jet(&x);
        for j in 0..2 * s {
            let df = if j % 2 == 0 { 2.0 * jet.fz[j / 2].re } else { -2.0 * jet.fz[j / 2].im };
            let lhs: f64 = (0..2 * s).map(|k| xi[k] * om0[(k, j)]).sum();
            iota = iota.max((lhs - df).abs() / df.abs().max(1.0));
        }
    }
    let mut rows = vec![
        Row::upper("hamiltonian_field", iota, tol.hamiltonian_field),
        Row::upper("symplecticity", symp, tol.symplectic),
        Row::upper("energy_conservation", energy, tol.energy),
        Row::upper("field_transport", field, tol.field_transport),
        Row::upper("flow_group_law", group, tol.flow_group_law),
    ];
    match ctx.cfg.experiment.level {
        Some(c) => rows.push(match action_additivity(ctx, c) {
            Ok(d) => Row::upper("action_additivity", d, tol.action),
            Err(e) => failure_row("action_additivity", &e),
        }),
        None => rows.push(Row::skipped("action_additivity", "no level configured")),
    }
    Ok(rows)
}

fn action_additivity(ctx: &Context, c: f64) -> Result<f64> {
    let opts = OrbitOptions::default();
    let orbits = primitive_orbits(&ctx.geom, &ctx.f, c, &opts)?;
    if orbits.is_empty() {
        return Err(Error::EmptyLevel { level: c });
    }
    let mut worst = 0.0f64;
    for (x, period) in orbits {
        let base = resonance_record(&ctx.geom, &ctx.f, c, &x, period, 1, &opts)?.action;
        for k in [2i64, 3, -1] {
            let lk = resonance_record(&ctx.geom, &ctx.f, c, &x, period, k, &opts)?.action;
            let d = (lk - k as f64 * base).rem_euclid(1.0);
            worst = worst.max(d.min(1.0 - d));
        }
    }
    Ok(worst)
}

fn liouville(ctx: &Context) -> Result<Vec<Row>> {
    let c = level(ctx);
    let vol = liouville_volume(&ctx.geom, &ctx.f, c, &LevelOptions::default())?;
    let name = format!("liouville[c={c}]");
    if ctx.geom.factors() != 1 {
        return Ok(vec![Row::recorded(name, vol, f64::NAN)]);
    }
    let period: f64 = primitive_orbits(&ctx.geom, &ctx.f, c, &OrbitOptions::default())?.iter().map(|o| o.1).sum();
    Ok(vec![Row::absolute(name, vol, period, ctx.cfg.tolerances.liouville)])
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.max(1e-300).ln()).collect();
    let m = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / m, ly.iter().sum::<f64>() / m);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn transport(ctx: &Context) -> Result<Vec<Row>> {
    let t = ctx.cfg.experiment.time;
    let mut steps = ctx.cfg.experiment.steps.clone();
    steps.sort_unstable();
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for &p in &ctx.ps {
        let (_, q) = ctx.spectral(&ctx.geom, &ctx.f, p)?;
        let u = evolution(&q, t, p);
        let res = quantum_parallel_transport(&ctx.geom, &ctx.f, p, t, &steps, &TransportOptions::default())?;
        let defects: Vec<f64> = res.iter().map(|r| op_norm(&(&r.operator.matrix - &u.matrix))).collect();
        for (k, d) in steps.iter().zip(&defects) {
            table.push(vec![p.to_string(), k.to_string(), num(*d)]);
        }
        let ks: Vec<f64> = steps.iter().map(|&k| k as f64).collect();
        let order = -log_slope(&ks, &defects);
        rows.push(Row::lower(format!("transport_order[p={p}]"), order, ctx.cfg.tolerances.transport_order));
        rows.push(Row::upper(
            format!("transport_defect[p={p},steps={}]", steps.last().unwrap()),
            *defects.last().unwrap(),
            ctx.cfg.tolerances.transport_defect,
        ));
    }
    write_csv(ctx.out.join("transport.csv"), &["p", "steps", "defect"], table).map_err(io_err)?;
    Ok(rows)
}

pub fn write_traces(ctx: &Context, name: &str, traces: &[C64]) -> Result<()> {
    write_csv(
        ctx.out.join(name),
        &["p", "re", "im"],
        ctx.ps.iter().zip(traces).map(|(p, t)| vec![p.to_string(), num(t.re), num(t.im)]),
    )
    .map_err(io_err)
}

/// `Tr ĝ(pQ_p(f - c))` over the p grid.
pub fn traces(ctx: &Context) -> Result<Vec<C64>> {
    let (g, c) = (window(ctx), level(ctx));
    ctx.sweep(|p| Ok(smoothed_trace(&ctx.spectral(&ctx.geom, &ctx.f, p)?.1, &g, c, p)))
}

fn poisson(ctx: &Context) -> Result<Vec<Row>> {
    if ctx.geom.factors() != 1 || ctx.cfg.hamiltonian.preset.trim() != "rotation" {
        return Ok(vec![Row::skipped("poisson", "needs the rotation model on one sphere")]);
    }
    let (g, c) = (window(ctx), level(ctx));
    let shift = -(ctx.geom.twists()[0] as f64) / 2.0;
    let tr = traces(ctx)?;
    write_traces(ctx, "traces.csv", &tr)?;
    let (lo, hi) = g.support();
    let ms: Vec<i64> = ((lo.ceil() as i64)..=(hi.floor() as i64)).collect();
    Ok(ctx
        .ps
        .iter()
        .zip(tr)
        .map(|(&p, t)| {
            let exact: C64 = ms.iter().map(|&m| g.value(m as f64) * C64::from_polar(1.0, 2.0 * PI * (m as f64 * (p as f64 * c - shift)).rem_euclid(1.0))).sum();
            Row::upper(format!("poisson[p={p}]"), (t - exact).norm(), ctx.cfg.tolerances.poisson)
        })
        .collect())
}

fn weyl(ctx: &Context) -> Result<Vec<Row>> {
    if ctx.geom.factors() != 1 {
        return Ok(vec![Row::skipped("weyl", "the O(1/p) form is checked on one sphere")]);
    }
    let (g, c) = (window(ctx), level(ctx));
    let opts = OrbitOptions::default();
    let period: f64 = primitive_orbits(&ctx.geom, &ctx.f, c, &opts)?.iter().map(|o| o.1).sum();
    let vol = liouville_volume(&ctx.geom, &ctx.f, c, &LevelOptions::default())?;
    let resonances = find_periodic_orbits(&ctx.geom, &ctx.f, c, g.support(), &opts)?
        .iter()
        .filter(|o| g.value(o.resonant_time).abs() > 1e-12)
        .count();
    let w = g.value(0.0) * period;
    let tr = traces(ctx)?;
    write_traces(ctx, "traces.csv", &tr)?;
    let errs: Vec<f64> = tr.iter().map(|t| (t - w).norm()).collect();
    let num_c: f64 = ctx.ps.iter().zip(&errs).map(|(&p, e)| e / p as f64).sum();
    let den: f64 = ctx.ps.iter().map(|&p| 1.0 / (p as f64 * p as f64)).sum();
    let fitted = num_c / den;
    let spread = ctx.ps.iter().zip(&errs).map(|(&p, e)| (p as f64 * e / fitted - 1.0).abs()).fold(0.0, f64::max);
    write_csv(
        ctx.out.join("weyl.csv"),
        &["p", "trace_re", "trace_im", "weyl", "p_times_error"],
        ctx.ps.iter().zip(&tr).zip(&errs).map(|((p, t), e)| vec![p.to_string(), num(t.re), num(t.im), num(w), num(*p as f64 * e)]),
    )
    .map_err(io_err)?;
    Ok(vec![
        Row::exact("weyl_isolation", resonances as f64, 0.0),
        Row::absolute("weyl_volume", vol, period, ctx.cfg.tolerances.liouville),
        Row::recorded("weyl_constant", fitted, f64::NAN),
        Row::upper("weyl_stability", spread, ctx.cfg.tolerances.weyl_stability),
    ])
}

/// Eigenvalues of `Q_p(f)`, through factor spectra when `f` is a product of
/// rotations.
fn trace_values(ctx: &Context, p: i64) -> Result<Vec<f64>> {
    if let (Some(weights), true) = (rotation_weights(ctx), ctx.geom.factors() > 1) {
        let mut lists = Vec::new();
        for (&m, &w) in ctx.geom.twists().iter().zip(&weights) {
            let g1 = ModelGeometry::new(vec![m])?;
            let f1 = Hamiltonian::rotation(1).affine(w, 0.0);
            lists.push(ctx.spectral(&g1, &f1, p)?.1.values);
        }
        let refs: Vec<&[f64]> = lists.iter().map(|v| v.as_slice()).collect();
        return Ok(kronecker_sum_values(&refs));
    }
    if ctx.geom.factors() > 1 {
        return Err(Error::InvalidInput("orbit fits on products need a rotation or product preset".into()));
    }
    Ok(ctx.spectral(&ctx.geom, &ctx.f, p)?.1.values)
}

pub struct OrbitFit {
    pub rows: Vec<Row>,
    pub traces: Vec<C64>,
}

pub fn orbit_fit(ctx: &Context) -> Result<OrbitFit> {
    let (g, c) = (window(ctx), level(ctx));
    let tol = ctx.cfg.tolerances.orbit_coefficient;
    let orbits = find_periodic_orbits(&ctx.geom, &ctx.f, c, g.support(), &OrbitOptions::default())?;
    write_csv(
        ctx.out.join("orbits.csv"),
        &["level", "period", "resonant_time", "action_mod1", "stab_det", "nondeg_flag"],
        orbits.iter().map(|o| {
            vec![num(o.level), num(o.primitive_period), num(o.resonant_time), num(o.action), num(o.stability_det), (o.nondegenerate as u8).to_string()]
        }),
    )
    .map_err(io_err)?;
    let p0 = ctx.ps[0];
    let pred = gutzwiller_predict(&ctx.geom, &ctx.f, c, &g, &orbits, p0, ctx.geom.is_metaplectic())?;
    let traces = ctx.sweep(|p| Ok(smoothed_trace_values(&trace_values(ctx, p)?, &g, c, p)))?;
    write_traces(ctx, "traces.csv", &traces)?;
    write_csv(
        ctx.out.join("prediction.csv"),
        &["p", "re", "im"],
        ctx.ps.iter().map(|&p| {
            let v = pred.at(p);
            vec![p.to_string(), num(v.re), num(v.im)]
        }),
    )
    .map_err(io_err)?;
    let mut terms = Vec::new();
    for (j, o) in pred.terms.iter().enumerate() {
        let alpha = (o.dim as f64 - 1.0) / 2.0;
        terms.push(FitTerm::new(format!("orbit{j}"), alpha, o.action, 0));
        terms.push(FitTerm::new(format!("orbit{j}/p"), alpha, o.action, 1));
    }
    if pred.weyl.is_some() {
        let alpha = ctx.geom.factors() as f64 - 1.0;
        terms.push(FitTerm::new("weyl", alpha, 0.0, 0));
        terms.push(FitTerm::new("weyl/p", alpha, 0.0, 1));
    }
    let mut rows: Vec<Row> = pred.excluded.iter().map(|t| Row::skipped(format!("b0[t={t:.6}]"), "degenerate orbit")).collect();
    if terms.is_empty() {
        rows.push(Row::skipped("orbit_coefficient", "no resonance in the window support"));
        return Ok(OrbitFit { rows, traces });
    }
    let ps: Vec<f64> = ctx.ps.iter().map(|&p| p as f64).collect();
    let fit = fit_expansion(&ps, &traces, &terms)?;
    write_csv(
        ctx.out.join("fits.csv"),
        &["term_id", "alpha", "lambda", "coeff_re", "coeff_im", "residual"],
        fit.terms.iter().zip(&fit.coeffs).map(|(t, cf)| {
            vec![t.id.clone(), num(t.alpha), num(t.lambda), num(cf.re), num(cf.im), num(fit.residual)]
        }),
    )
    .map_err(io_err)?;
    for (j, o) in pred.terms.iter().enumerate() {
        let b = fit.coeff(&format!("orbit{j}")).expect("term present");
        let t = o.resonant_time;
        rows.push(Row::relative(format!("b0_modulus[t={t:.6}]"), b.norm(), o.b0.norm(), tol));
        rows.push(Row::recorded(format!("b0_phase[t={t:.6}]"), (b / o.b0).arg(), 0.0));
    }
    rows.push(Row::recorded("branch_phase", pred.branch.arg(), f64::NAN));
    Ok(OrbitFit { rows, traces })
}

fn orbit_coefficient(ctx: &Context) -> Result<Vec<Row>> {
    Ok(orbit_fit(ctx)?.rows)
}

fn kernel_options(ctx: &Context) -> KernelCheckOptions {
    KernelCheckOptions {
        rel_tol: ctx.cfg.tolerances.a0_ratio,
        max_residual: ctx.cfg.tolerances.extrapolation_residual,
        ..KernelCheckOptions::default()
    }
}

fn a0(ctx: &Context) -> Result<Vec<Row>> {
    let t = ctx.cfg.experiment.time;
    let opts = kernel_options(ctx);
    let exact = ctx.cfg.hamiltonian.preset.trim() == "rotation";
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for (i, coords) in ctx.cfg.experiment.points.iter().enumerate() {
        let x = point(coords);
        let rep = match a0_check(&ctx.geom, &ctx.f, t, &x, &ctx.ps, &opts) {
            Ok(r) => r,
            Err(e) => {
                rows.push(failure_row(&format!("a0[x={i}]"), &e));
                continue;
            }
        };
        for (p, s) in rep.ps.iter().zip(&rep.samples) {
            table.push(vec![i.to_string(), p.to_string(), num(s.re), num(s.im)]);
        }
        rows.push(Row::from_check(format!("a0_ratio[x={i}]"), &rep.check, opts.rel_tol));
        if exact {
            let mut row = Row::upper(format!("a0_exact[x={i}]"), (rep.a0 - 1.0).norm(), ctx.cfg.tolerances.a0_exact);
            row.predicted = 1.0;
            rows.push(row);
        }
    }
    write_csv(ctx.out.join("a0.csv"), &["point", "p", "re", "im"], table).map_err(io_err)?;
    Ok(rows)
}

fn decay_row(name: String, exponent: f64, rate: f64) -> Row {
    let mut row = Row::upper(name, exponent, -rate);
    row.rel_err = exponent / -rate;
    row
}

fn evolution_decay(ctx: &Context) -> Result<Vec<Row>> {
    let t = ctx.cfg.experiment.time;
    let rate = ctx.cfg.tolerances.decay_rate;
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for (i, (a, b)) in ctx.cfg.experiment.points.iter().zip(&ctx.cfg.experiment.partners).enumerate() {
        let (x, y) = (point(a), point(b));
        let name = format!("evolution_decay[pair={i}]");
        let image = integrate_flow(&ctx.f, &x, t, &FlowOptions::default())?;
        let sep = y.distance(&image);
        if sep < 0.5 {
            rows.push(Row::skipped(name, format!("partner at distance {sep:.3} < 0.5 from the flow image")));
            continue;
        }
        let rep = evolution_kernel_decay(&ctx.geom, &ctx.f, t, &x, &y, &ctx.ps)?;
        for (p, v) in rep.ps.iter().zip(&rep.values) {
            table.push(vec!["evolution".into(), i.to_string(), p.to_string(), num(*v)]);
        }
        rows.push(Row::recorded(format!("evolution_separation[pair={i}]"), sep, 0.5));
        rows.push(decay_row(name, rep.exponent, rate));
    }
    write_csv(ctx.out.join("evolution_decay.csv"), &["kind", "pair", "p", "value"], table).map_err(io_err)?;
    Ok(rows)
}

fn window_decay(ctx: &Context) -> Result<Vec<Row>> {
    let (g, c) = (window(ctx), level(ctx));
    let rate = ctx.cfg.tolerances.decay_rate;
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for (i, a) in ctx.cfg.experiment.points.iter().enumerate() {
        let x = point(a);
        let rep = window_kernel_decay(&ctx.geom, &ctx.f, c, &g, &x, &x, &ctx.ps)?;
        for (p, v) in rep.ps.iter().zip(&rep.values) {
            table.push(vec!["window".into(), i.to_string(), p.to_string(), num(*v)]);
        }
        rows.push(Row::recorded(format!("window_offset[pair={i}]"), (ctx.f.value(&x) - c).abs(), f64::NAN));
        rows.push(decay_row(format!("window_decay[pair={i}]"), rep.exponent, rate));
    }
    write_csv(ctx.out.join("window_decay.csv"), &["kind", "pair", "p", "value"], table).map_err(io_err)?;
    Ok(rows)
}

fn coherent(ctx: &Context) -> Result<Vec<Row>> {
    let t = ctx.cfg.experiment.time;
    let mut rows = Vec::new();
    for (i, coords) in ctx.cfg.experiment.points.iter().enumerate() {
        let rep = coherent_propagation_check(&ctx.geom, &ctx.f, &point(coords), t, &ctx.ps, &FlowOptions::default())?;
        let worst = rep.samples.iter().map(|s| s.mass_outside).fold(0.0, f64::max);
        let far = rep.samples.iter().filter(|s| s.distance > s.tolerance).count();
        rows.push(Row::exact(format!("coherent_peak[x={i}]"), far as f64, 0.0));
        rows.push(Row::upper(format!("coherent_mass[x={i}]"), worst, ctx.cfg.tolerances.coherent_mass));
    }
    Ok(rows)
}

fn bochner(ctx: &Context) -> Result<Vec<Row>> {
    if ctx.geom.factors() != 1 || ctx.geom.twists()[0] != 0 {
        return Ok(vec![Row::skipped("bochner", "untwisted sphere only")]);
    }
    let n = ctx.geom.factors() as f64;
    let spectra = ctx.sweep(|p| bochner_laplacian(&ctx.geom, p, &BochnerOptions::default()))?;
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for (&p, spec) in ctx.ps.iter().zip(&spectra) {
        let bound = 2.0 * PI * n * p as f64;
        let dim = QuantumBasis::new(&ctx.geom, p).dim();
        let small = spec.count_below(bound / 2.0);
        rows.push(Row::exact(format!("bochner_kernel[p={p}]"), small as f64, dim as f64));
        let next = spec.values.get(small).map(|v| v.0).unwrap_or(f64::NAN);
        rows.push(Row::lower(format!("bochner_gap[p={p}]"), next, bound));
        for (k, (v, nu)) in spec.values.iter().enumerate().take(dim + 8) {
            table.push(vec![p.to_string(), k.to_string(), num(*v), nu.to_string()]);
        }
    }
    write_csv(ctx.out.join("bochner.csv"), &["p", "index", "value", "mode"], table).map_err(io_err)?;
    Ok(rows)
}
