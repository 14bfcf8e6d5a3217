//! Command-line entry point.

use crate::cache::gc;
use crate::config::ExperimentConfig;
use crate::run::{run, Context, RunError, Verb};
use clap::{Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable naming the eigendecomposition cache directory.
pub const CACHE_ENV: &str = "SEMIQUANT_CACHE";

#[derive(Debug, Parser)]
#[command(name = "semiquant", version, about = "Quantization and trace-formula experiments on products of spheres")]
struct Cli {
    #[command(subcommand)]
    verb: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Eigendecomposition cache directory; overrides $SEMIQUANT_CACHE and `output.cache`.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Worker threads for p sweeps.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Kostant-Souriau matrices for each p.
    Quantize,
    /// Eigenvalues for each p.
    Spectrum,
    /// Propagated coherent-state profiles.
    Evolve,
    /// Smoothed traces over the p grid.
    Trace,
    /// Periodic orbits, leading-order prediction and expansion fit.
    Gutzwiller,
    /// Run the checks listed in the config.
    Check,
    /// Evict least-recently-used cache entries down to a size limit.
    CacheGc {
        #[arg(long)]
        max_bytes: u64,
    },
}

fn cache_dir(flag: Option<PathBuf>, cfg: Option<&ExperimentConfig>) -> Option<PathBuf> {
    flag.or_else(|| std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| cfg.and_then(|c| c.output.cache.clone()))
}

/// Parses `args` (program name first) and runs; returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    if let Some(j) = cli.jobs {
        // Only the first call in a process can size the global pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global();
    }
    let cfg = match &cli.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(c) => Some(c),
            Err(e) => {
                eprintln!("{e}");
                return EXIT_CONFIG;
            }
        },
        None => None,
    };
    let verb = match cli.verb {
        Command::CacheGc { max_bytes } => {
            let Some(dir) = cache_dir(cli.cache, cfg.as_ref()) else {
                eprintln!("cache-gc: no cache directory (use --cache or ${CACHE_ENV})");
                return EXIT_CONFIG;
            };
            return match gc(&dir, max_bytes) {
                Ok(r) => {
                    println!(
                        "entries {} bytes {} -> {} evicted {} quarantined {} in use {}",
                        r.entries,
                        r.bytes_before,
                        r.bytes_after,
                        r.evicted.len(),
                        r.quarantined.len(),
                        r.in_use.len()
                    );
                    EXIT_PASS
                }
                Err(e) => {
                    eprintln!("cache-gc: {e}");
                    EXIT_NUMERICAL
                }
            };
        }
        Command::Quantize => Verb::Quantize,
        Command::Spectrum => Verb::Spectrum,
        Command::Evolve => Verb::Evolve,
        Command::Trace => Verb::Trace,
        Command::Gutzwiller => Verb::Gutzwiller,
        Command::Check => Verb::Check,
    };
    let Some(cfg) = cfg else {
        eprintln!("--config is required");
        return EXIT_CONFIG;
    };
    let out = cli.out.or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let cache = cache_dir(cli.cache, Some(&cfg));
    let ctx = match Context::new(cfg, out, cache) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("cannot prepare output: {e}");
            return EXIT_NUMERICAL;
        }
    };
    match run(&ctx, verb) {
        Ok(outcome) => {
            for r in &outcome.rows {
                println!("{}: {}", r.name, r.verdict);
            }
            outcome.exit_code()
        }
        Err(RunError::Config(m)) => {
            eprintln!("{m}");
            EXIT_CONFIG
        }
        Err(e) => {
            eprintln!("{e}");
            EXIT_NUMERICAL
        }
    }
}
