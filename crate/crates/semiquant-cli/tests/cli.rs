use semiquant::Hamiltonian;
use semiquant_cli::cache::{gc, CacheKey, EigenCache};
use semiquant_cli::config::ExperimentConfig;
use semiquant_cli::run::{run, Context, Verb};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_semiquant"));
    c.env_remove("SEMIQUANT_CACHE");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run_bin(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn semiquant")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

const SMALL: &str = r#"
[geometry]
factors = 1

[hamiltonian]
preset = "perturbed:0,0.1"

[window]
center = 0.0
width = 0.5

[experiment]
level = 0.4
p = [6, 9, 14]
checks = ["hermitian", "unitary", "group_law"]
"#;

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("exp.toml");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn rotation_rrh_and_spectrum_pass() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = configs().join("rotation_basic.toml");
    let o = run_bin(&["check", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("name,measured,predicted,tolerance,verdict\n"));
    assert_eq!(summary.lines().count(), 1 + 1 + 41);
    assert!(summary.lines().skip(1).all(|l| l.ends_with(",pass")), "{summary}");
}

#[test]
fn critical_level_is_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = configs().join("critical_level.toml");
    let o = run_bin(&["check", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains("liouville,,,,skipped: critical level"), "{summary}");
}

#[test]
fn config_errors_exit_2_with_line_and_field() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = SMALL.replace("p = [6, 9, 14]", "p = [6, 9, 14]\nspeed = 3");
    let path = write_config(tmp.path(), &bad);
    let o = run_bin(&["check", "--config", path.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = text(&o.stderr);
    assert!(err.contains(":15:") && err.contains("speed"), "{err}");

    let neg = format!("{SMALL}\n[tolerances]\nunitary = -1e-9\n");
    let path = write_config(tmp.path(), &neg);
    let o = run_bin(&["check", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o.stderr).contains("tolerances.unitary"), "{}", text(&o.stderr));

    let o = run_bin(&["check", "--config", tmp.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_check_exits_1_and_still_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let strict = format!("{SMALL}\n[tolerances]\nunitary = 1e-30\n");
    let path = write_config(tmp.path(), &strict);
    let out = tmp.path().join("out");
    let o = run_bin(&["check", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", text(&o.stdout));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains(",fail"));
    assert!(summary.lines().any(|l| l.starts_with("group_law[p=14]") && l.ends_with(",pass")));
    assert!(out.join("checks.csv").exists());
}

fn all_csv(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn outputs_are_bit_identical_with_a_warm_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), &SMALL.replace("checks = [\"hermitian\", \"unitary\", \"group_law\"]", "checks = [\"unitary\", \"group_law\"]"));
    let cache = tmp.path().join("cache");
    let mut outputs = Vec::new();
    for (i, verb) in ["check", "check", "spectrum", "spectrum", "trace", "trace"].iter().enumerate() {
        let out = tmp.path().join(format!("out{i}"));
        let o = run_bin(&[verb, "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--cache", cache.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{verb}: {}", text(&o.stderr));
        outputs.push(all_csv(&out));
    }
    let entries = fs::read_dir(&cache).unwrap().filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("eig-")).count();
    assert_eq!(entries, 3);
    for pair in outputs.chunks(2) {
        assert!(!pair[0].is_empty());
        assert_eq!(pair[0], pair[1]);
    }
    // A cold run without the cache gives the same bytes.
    let out = tmp.path().join("cold");
    let o = run_bin(&["spectrum", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(all_csv(&out), outputs[2]);
}

#[test]
fn cache_directory_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let path = write_config(tmp.path(), SMALL);
    let cache = tmp.path().join("envcache");
    let o = bin()
        .args(["spectrum", "--config", path.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()])
        .env("SEMIQUANT_CACHE", &cache)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_dir(&cache).unwrap().filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("eig-")).count(), 3);
}

fn populate(cache: &Path, ps: &[i64]) {
    let cfg = ExperimentConfig::parse(SMALL).unwrap();
    let ctx = Context::new(cfg, cache.parent().unwrap().join("pop"), Some(cache.to_path_buf())).unwrap();
    for &p in ps {
        ctx.spectral(&ctx.geom, &ctx.f, p).unwrap();
    }
}

fn entry_bytes(cache: &Path) -> u64 {
    fs::read_dir(cache)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name().to_string_lossy().starts_with("eig-"))
        .map(|e| e.metadata().unwrap().len())
        .sum()
}

#[test]
fn gc_on_missing_or_empty_cache_is_a_no_op() {
    let tmp = tempfile::tempdir().unwrap();
    let r = gc(&tmp.path().join("nothing"), 0).unwrap();
    assert_eq!(r.entries, 0);
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let r = gc(&empty, 0).unwrap();
    assert_eq!((r.entries, r.bytes_before, r.bytes_after), (0, 0, 0));
    let o = run_bin(&["cache-gc", "--cache", empty.to_str().unwrap(), "--max-bytes", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(text(&o.stdout).contains("entries 0"));
}

#[test]
fn gc_evicts_least_recently_used_below_the_limit() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("cache");
    populate(&cache, &[4, 8, 12, 16]);
    let total = entry_bytes(&cache);
    let f = Hamiltonian::preset("perturbed:0,0.1", 1).unwrap();
    let key = |p: i64| CacheKey::new(&[0], &f, p, f.max_degree() as usize);
    // Distinct ages: p = 8 oldest, then 12 and 16.
    let base = std::time::SystemTime::now() - std::time::Duration::from_secs(3600);
    for (i, p) in [8i64, 12, 16, 4].into_iter().enumerate() {
        let file = fs::File::options().write(true).open(cache.join(format!("eig-{}.bin", key(p).hex()))).unwrap();
        file.set_modified(base + std::time::Duration::from_secs(60 * i as u64)).unwrap();
    }
    // Loading p = 4 marks it as used now.
    {
        let c = EigenCache::open(&cache).unwrap();
        assert!(c.load(&key(4)).is_some());
    }
    let limit = total / 2;
    let o = run_bin(&["cache-gc", "--cache", cache.to_str().unwrap(), "--max-bytes", &limit.to_string()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o.stderr));
    assert!(entry_bytes(&cache) <= limit);
    assert!(cache.join(format!("eig-{}.bin", key(4).hex())).exists(), "most recent entry evicted");
    assert!(!cache.join(format!("eig-{}.bin", key(8).hex())).exists());
}

#[test]
fn gc_skips_entries_held_by_a_reader() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("cache");
    populate(&cache, &[5, 7]);
    let f = Hamiltonian::preset("perturbed:0,0.1", 1).unwrap();
    let key = CacheKey::new(&[0], &f, 7, f.max_degree() as usize);
    let reader = EigenCache::open(&cache).unwrap();
    assert!(reader.load(&key).is_some());
    let r = gc(&cache, 0).unwrap();
    assert_eq!(r.evicted.len(), 1);
    assert_eq!(r.in_use, vec![format!("eig-{}.bin", key.hex())]);
    drop(reader);
    let r = gc(&cache, 0).unwrap();
    assert_eq!((r.evicted.len(), r.bytes_after), (1, 0));
}

#[test]
fn corrupted_entries_are_quarantined_and_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("cache");
    populate(&cache, &[5, 7]);
    let f = Hamiltonian::preset("perturbed:0,0.1", 1).unwrap();
    let key = CacheKey::new(&[0], &f, 5, f.max_degree() as usize);
    let path = cache.join(format!("eig-{}.bin", key.hex()));
    let mut bytes = fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    fs::write(&path, &bytes).unwrap();

    let o = run_bin(&["cache-gc", "--cache", cache.to_str().unwrap(), "--max-bytes", "1000000000"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(text(&o.stdout).contains("quarantined 1"), "{}", text(&o.stdout));
    assert!(!path.exists());
    assert_eq!(fs::read(cache.join("quarantine").join(path.file_name().unwrap())).unwrap(), bytes);

    // A reader hitting a corrupt entry also quarantines it and recomputes.
    fs::write(&path, &bytes[..100]).unwrap();
    let cfg = ExperimentConfig::parse(SMALL).unwrap();
    let ctx = Context::new(cfg, tmp.path().join("o"), Some(cache.clone())).unwrap();
    let (_, q) = ctx.spectral(&ctx.geom, &ctx.f, 5).unwrap();
    assert_eq!(q.values.len(), 6);
    assert_eq!(ctx.cache.as_ref().unwrap().quarantined().len(), 1);
    let outcome = run(&ctx, Verb::Spectrum).unwrap();
    assert!(outcome.passed());
}
