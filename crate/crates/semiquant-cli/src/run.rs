//! Experiment context and the verbs that write reports.

use crate::cache::{CacheKey, EigenCache};
use crate::checks::{self, orbit_fit, run_check, write_traces};
use crate::config::{point, ExperimentConfig};
use crate::report::{num, write_checks, write_csv, write_summary, Row, RowVerdict};
use rayon::prelude::*;
use semiquant::hilbert::coherent_state;
use semiquant::operators::{evolution, kostant_souriau};
use semiquant::semiclassics::quantize;
use semiquant::{Error, Hamiltonian, ModelGeometry, QuadratureGrid, QuantumBasis, Result, SpectralData};
use std::fmt;
use std::io;
use std::path::PathBuf;

pub struct Context {
    pub cfg: ExperimentConfig,
    pub geom: ModelGeometry,
    pub f: Hamiltonian,
    pub ps: Vec<i64>,
    pub out: PathBuf,
    pub cache: Option<EigenCache>,
}

impl Context {
    pub fn new(cfg: ExperimentConfig, out: PathBuf, cache_dir: Option<PathBuf>) -> io::Result<Self> {
        std::fs::create_dir_all(&out)?;
        let cache = cache_dir.map(|d| EigenCache::open(&d)).transpose()?;
        Ok(Self { geom: cfg.geometry(), f: cfg.hamiltonian(), ps: cfg.ps(), cfg, out, cache })
    }

    /// Runs `job` for every p of the grid in parallel, in grid order.
    pub fn sweep<T: Send>(&self, job: impl Fn(i64) -> Result<T> + Sync) -> Result<Vec<T>> {
        self.ps.par_iter().map(|&p| job(p)).collect()
    }

    /// Kostant-Souriau spectral data, through the cache when one is open.
    pub fn spectral(&self, geom: &ModelGeometry, f: &Hamiltonian, p: i64) -> Result<(QuantumBasis, SpectralData)> {
        let Some(cache) = &self.cache else {
            return quantize(geom, f, p);
        };
        let key = CacheKey::new(geom.twists(), f, p, f.max_degree() as usize);
        let q = cache.get_or_compute(&key, || quantize(geom, f, p).map(|r| r.1))?;
        Ok((QuantumBasis::new(geom, p), q))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    Quantize,
    Spectrum,
    Evolve,
    Trace,
    Gutzwiller,
    Check,
}

#[derive(Debug)]
pub enum RunError {
    /// The config lacks something the verb needs.
    Config(String),
    Numerical(Error),
    Io(io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "config: {m}"),
            RunError::Numerical(e) => write!(f, "numerical error: {e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Numerical(e)
    }
}

impl From<io::Error> for RunError {
    fn from(e: io::Error) -> Self {
        RunError::Io(e)
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub rows: Vec<Row>,
}

impl Outcome {
    pub fn numerical_error(&self) -> bool {
        self.rows.iter().any(|r| matches!(r.verdict, RowVerdict::Error(_)))
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(Row::passed)
    }

    /// 0 when every row passes, 1 on a failed check, 3 on a numerical error.
    pub fn exit_code(&self) -> i32 {
        if self.numerical_error() {
            3
        } else if self.passed() {
            0
        } else {
            1
        }
    }
}

pub fn run(ctx: &Context, verb: Verb) -> std::result::Result<Outcome, RunError> {
    match verb {
        Verb::Quantize => quantize_verb(ctx),
        Verb::Spectrum => spectrum_verb(ctx),
        Verb::Evolve => evolve_verb(ctx),
        Verb::Trace => trace_verb(ctx),
        Verb::Gutzwiller => gutzwiller_verb(ctx),
        Verb::Check => check_verb(ctx),
    }
}

fn quantize_verb(ctx: &Context) -> std::result::Result<Outcome, RunError> {
    let ops = ctx.sweep(|p| {
        let basis = QuantumBasis::new(&ctx.geom, p);
        let grid = QuadratureGrid::for_level(ctx.geom.factors(), p, ctx.f.max_degree());
        kostant_souriau(&basis, &grid, &ctx.f)
    })?;
    let mut summary = Vec::new();
    for (&p, op) in ctx.ps.iter().zip(&ops) {
        let m = &op.matrix;
        write_csv(
            ctx.out.join(format!("operator_p{p}.csv")),
            &["row", "col", "re", "im"],
            (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| vec![i.to_string(), j.to_string(), num(m[(i, j)].re), num(m[(i, j)].im)])),
        )?;
        summary.push(vec![p.to_string(), op.dim().to_string(), ctx.geom.riemann_roch(p).to_string(), num(op.hermitian_defect())]);
    }
    write_csv(ctx.out.join("quantize.csv"), &["p", "dim", "riemann_roch", "hermitian_defect"], summary)?;
    Ok(Outcome::default())
}

fn spectrum_verb(ctx: &Context) -> std::result::Result<Outcome, RunError> {
    let spectra = ctx.sweep(|p| Ok(ctx.spectral(&ctx.geom, &ctx.f, p)?.1.values))?;
    write_csv(
        ctx.out.join("spectrum.csv"),
        &["p", "index", "value"],
        ctx.ps.iter().zip(&spectra).flat_map(|(p, vals)| vals.iter().enumerate().map(move |(k, v)| vec![p.to_string(), k.to_string(), num(*v)])),
    )?;
    Ok(Outcome::default())
}

/// Nodes per factor of the sampling grid for coherent-state profiles.
const PROFILE_DEGREE: usize = 24;

fn evolve_verb(ctx: &Context) -> std::result::Result<Outcome, RunError> {
    let e = &ctx.cfg.experiment;
    if e.points.is_empty() {
        return Err(RunError::Config("evolve needs experiment.points".into()));
    }
    let n = ctx.geom.factors();
    let grid = QuadratureGrid::new(n, PROFILE_DEGREE);
    let nodes = grid.points();
    let mut header = vec!["point".to_string(), "p".to_string()];
    let suffix = |name: &str, i: usize| if n == 1 { name.to_string() } else { format!("{name}_{}", i + 1) };
    for i in 0..n {
        header.extend([suffix("x_re", i), suffix("x_im", i), suffix("chart", i)]);
    }
    header.extend(["value_re".into(), "value_im".into(), "pointwise_norm".into()]);
    let mut rows = Vec::new();
    for (k, coords) in e.points.iter().enumerate() {
        let x0 = point(coords);
        let profiles = ctx.sweep(|p| {
            let (basis, q) = ctx.spectral(&ctx.geom, &ctx.f, p)?;
            let v = &evolution(&q, e.time, p).matrix * coherent_state(&basis, &x0).normalize();
            Ok(nodes.iter().map(|y| (basis.eval(y).transpose() * &v)[(0, 0)]).collect::<Vec<_>>())
        })?;
        for (&p, values) in ctx.ps.iter().zip(profiles) {
            for (y, v) in nodes.iter().zip(values) {
                let mut r = vec![k.to_string(), p.to_string()];
                for i in 0..n {
                    r.extend([num(y.z[i].re), num(y.z[i].im), y.chart[i].to_string()]);
                }
                r.extend([num(v.re), num(v.im), num(v.norm())]);
                rows.push(r);
            }
        }
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(ctx.out.join("evolve.csv"), &header, rows)?;
    Ok(Outcome::default())
}

fn require_trace_inputs(ctx: &Context, verb: &str) -> std::result::Result<(), RunError> {
    if ctx.cfg.experiment.level.is_none() {
        return Err(RunError::Config(format!("{verb} needs experiment.level")));
    }
    if ctx.cfg.window.is_none() {
        return Err(RunError::Config(format!("{verb} needs a [window] section")));
    }
    Ok(())
}

fn trace_verb(ctx: &Context) -> std::result::Result<Outcome, RunError> {
    require_trace_inputs(ctx, "trace")?;
    let tr = checks::traces(ctx)?;
    write_traces(ctx, "traces.csv", &tr)?;
    Ok(Outcome::default())
}

fn gutzwiller_verb(ctx: &Context) -> std::result::Result<Outcome, RunError> {
    require_trace_inputs(ctx, "gutzwiller")?;
    let fit = orbit_fit(ctx)?;
    write_checks(&ctx.out.join("checks.csv"), &fit.rows)?;
    Ok(Outcome { rows: fit.rows })
}

fn check_verb(ctx: &Context) -> std::result::Result<Outcome, RunError> {
    let mut rows = Vec::new();
    for &c in &ctx.cfg.experiment.checks {
        rows.extend(run_check(ctx, c));
    }
    write_checks(&ctx.out.join("checks.csv"), &rows)?;
    write_summary(&ctx.out.join("summary.csv"), &rows)?;
    Ok(Outcome { rows })
}
