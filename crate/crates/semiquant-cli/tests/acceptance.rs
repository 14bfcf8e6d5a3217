//! Acceptance suite: one line `criterion N: PASS|FAIL` per criterion.
//! Criterion 10 is reported but does not fail the run.

use semiquant_cli::config::ExperimentConfig;
use semiquant_cli::report::Row;
use semiquant_cli::run::{run, Context, Verb};
use std::f64::consts::{PI, SQRT_2};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

struct Run {
    rows: Vec<Row>,
    out: PathBuf,
}

fn check(name: &str, scratch: &Path) -> Run {
    let cfg = ExperimentConfig::load(&config_path(name)).unwrap_or_else(|e| panic!("{e}"));
    let out = scratch.join(name.trim_end_matches(".toml"));
    let ctx = Context::new(cfg, out.clone(), None).expect("output dir");
    let outcome = run(&ctx, Verb::Check).unwrap_or_else(|e| panic!("{name}: {e}"));
    Run { rows: outcome.rows, out }
}

fn rows_pass(rows: &[Row]) -> bool {
    !rows.is_empty() && rows.iter().all(|r| r.passed())
}

fn show(rows: &[Row]) {
    for r in rows {
        println!("    {:<44} measured {:>12.5e}  bound {:>12.5e}  {}", r.name, r.measured, r.tolerance, r.verdict);
    }
}

/// Modulus of the fitted leading orbit coefficient from `fits.csv`.
fn fitted_orbit_modulus(out: &Path) -> Option<f64> {
    let mut rd = csv::Reader::from_path(out.join("fits.csv")).ok()?;
    for rec in rd.records() {
        let rec = rec.ok()?;
        if &rec[0] == "orbit0" {
            let re: f64 = rec[3].parse().ok()?;
            let im: f64 = rec[4].parse().ok()?;
            return Some(re.hypot(im));
        }
    }
    None
}

fn criterion(n: u32, files: &[&str], scratch: &Path, extra: impl FnOnce(&[Run]) -> bool) -> bool {
    let start = Instant::now();
    let runs: Vec<Run> = files.iter().map(|f| check(f, scratch)).collect();
    for r in &runs {
        show(&r.rows);
    }
    let ok = runs.iter().all(|r| rows_pass(&r.rows)) && extra(&runs);
    println!("criterion {n}: {} ({:.1}s)", if ok { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64());
    ok
}

fn main() -> ExitCode {
    let scratch = tempfile::tempdir().expect("tempdir");
    let dir = scratch.path();
    let mut blocking = true;

    blocking &= criterion(1, &["c01_riemann_roch.toml"], dir, |runs| {
        // sphere, metaplectic sphere, S2 x S2
        let names: Vec<&str> = runs[0].rows.iter().map(|r| r.name.as_str()).collect();
        names == ["rrh[twists=0]", "rrh[twists=-1]", "rrh[twists=0,0]"]
    });
    blocking &= criterion(2, &["c02_spectrum.toml"], dir, |runs| runs[0].rows.len() == 6);
    blocking &= criterion(3, &["c03_transport.toml"], dir, |_| true);
    blocking &= criterion(4, &["c04_poisson.toml"], dir, |_| true);
    blocking &= criterion(5, &["c05_weyl.toml"], dir, |_| true);
    blocking &= criterion(6, &["c06_orbit_coefficient.toml"], dir, |runs| {
        let period = 1.0 / SQRT_2;
        let closed = period / (2.0 * (PI / SQRT_2).sin().abs());
        match fitted_orbit_modulus(&runs[0].out) {
            Some(b) => {
                println!("    |b0| fitted {b:.6e}, closed form {closed:.6e}");
                (b / closed - 1.0).abs() <= 0.05
            }
            None => false,
        }
    });
    blocking &= criterion(7, &["c07a_a0_rotation.toml", "c07b_a0_radial.toml"], dir, |runs| {
        runs[0].rows.iter().any(|r| r.name.starts_with("a0_exact")) && runs[1].rows.iter().filter(|r| r.name.starts_with("a0_ratio")).count() == 2
    });
    blocking &= criterion(8, &["c08_localization.toml"], dir, |runs| {
        ["evolution_decay", "window_decay"].iter().all(|k| runs[0].rows.iter().any(|r| r.name.starts_with(k)))
    });
    blocking &= criterion(9, &["c09_invariants.toml"], dir, |_| true);
    let stretch = criterion(10, &["c10_bochner.toml"], dir, |_| true);
    if !stretch {
        println!("criterion 10 is non-blocking");
    }

    if blocking {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
