//! Check rows and CSV output. Floats are written with 17 significant digits.

use semiquant::semiclassics::{CheckReport, Verdict};
use std::fmt;
use std::io;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub enum RowVerdict {
    Pass,
    Fail,
    Inconclusive,
    /// Precondition not met; nothing was measured.
    Skipped(String),
    /// Reported for reference, not asserted.
    Recorded,
    /// Numerical failure while computing the check.
    Error(String),
}

impl fmt::Display for RowVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowVerdict::Pass => f.write_str("pass"),
            RowVerdict::Fail => f.write_str("fail"),
            RowVerdict::Inconclusive => f.write_str("inconclusive"),
            RowVerdict::Skipped(why) => write!(f, "skipped: {why}"),
            RowVerdict::Recorded => f.write_str("recorded"),
            RowVerdict::Error(e) => write!(f, "error: {e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub measured: f64,
    pub predicted: f64,
    pub tolerance: f64,
    pub rel_err: f64,
    pub verdict: RowVerdict,
}

fn pass_if(ok: bool) -> RowVerdict {
    if ok {
        RowVerdict::Pass
    } else {
        RowVerdict::Fail
    }
}

impl Row {
    /// `measured ≤ bound`.
    pub fn upper(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self { name: name.into(), measured, predicted: bound, tolerance: bound, rel_err: measured / bound, verdict: pass_if(measured <= bound) }
    }

    /// `measured ≥ bound`.
    pub fn lower(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        let rel_err = if bound != 0.0 { measured / bound } else { measured };
        Self { name: name.into(), measured, predicted: bound, tolerance: bound, rel_err, verdict: pass_if(measured >= bound) }
    }

    /// `|measured / predicted - 1| ≤ tol`.
    pub fn relative(name: impl Into<String>, measured: f64, predicted: f64, tol: f64) -> Self {
        let rel_err = if predicted != 0.0 { (measured / predicted - 1.0).abs() } else { measured.abs() };
        Self { name: name.into(), measured, predicted, tolerance: tol, rel_err, verdict: pass_if(rel_err <= tol) }
    }

    /// `|measured - predicted| ≤ tol`.
    pub fn absolute(name: impl Into<String>, measured: f64, predicted: f64, tol: f64) -> Self {
        let err = (measured - predicted).abs();
        let rel_err = if predicted != 0.0 { err / predicted.abs() } else { err };
        Self { name: name.into(), measured, predicted, tolerance: tol, rel_err, verdict: pass_if(err <= tol) }
    }

    pub fn exact(name: impl Into<String>, measured: f64, predicted: f64) -> Self {
        Self::absolute(name, measured, predicted, 0.0)
    }

    pub fn recorded(name: impl Into<String>, measured: f64, predicted: f64) -> Self {
        let rel_err = if predicted != 0.0 { (measured / predicted - 1.0).abs() } else { measured.abs() };
        Self { name: name.into(), measured, predicted, tolerance: f64::NAN, rel_err, verdict: RowVerdict::Recorded }
    }

    pub fn skipped(name: impl Into<String>, why: impl Into<String>) -> Self {
        Self::blank(name, RowVerdict::Skipped(why.into()))
    }

    pub fn error(name: impl Into<String>, e: impl fmt::Display) -> Self {
        Self::blank(name, RowVerdict::Error(e.to_string()))
    }

    fn blank(name: impl Into<String>, verdict: RowVerdict) -> Self {
        Self { name: name.into(), measured: f64::NAN, predicted: f64::NAN, tolerance: f64::NAN, rel_err: f64::NAN, verdict }
    }

    pub fn from_check(name: impl Into<String>, c: &CheckReport, tol: f64) -> Self {
        let verdict = match c.verdict {
            Verdict::Pass => RowVerdict::Pass,
            Verdict::Fail => RowVerdict::Fail,
            Verdict::Inconclusive => RowVerdict::Inconclusive,
        };
        Self { name: name.into(), measured: c.measured, predicted: c.predicted, tolerance: tol, rel_err: c.rel_err, verdict }
    }

    pub fn passed(&self) -> bool {
        matches!(self.verdict, RowVerdict::Pass | RowVerdict::Skipped(_) | RowVerdict::Recorded)
    }
}

pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.16e}")
    }
}

pub fn write_csv<P: AsRef<Path>>(path: P, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()
}

/// `checks.csv`: name, measured, predicted, rel_err, verdict.
pub fn write_checks(path: &Path, rows: &[Row]) -> io::Result<()> {
    write_csv(
        path,
        &["name", "measured", "predicted", "rel_err", "verdict"],
        rows.iter().map(|r| vec![r.name.clone(), num(r.measured), num(r.predicted), num(r.rel_err), r.verdict.to_string()]),
    )
}

/// `summary.csv`: name, measured, predicted, tolerance, verdict.
pub fn write_summary(path: &Path, rows: &[Row]) -> io::Result<()> {
    write_csv(
        path,
        &["name", "measured", "predicted", "tolerance", "verdict"],
        rows.iter().map(|r| vec![r.name.clone(), num(r.measured), num(r.predicted), num(r.tolerance), r.verdict.to_string()]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-3.0), "-3.0000000000000000e0");
        assert_eq!(num(f64::NAN), "");
        let x = 0.1f64 + 0.2;
        assert_eq!(num(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn verdicts() {
        assert!(Row::upper("a", 1e-9, 1e-8).passed());
        assert!(!Row::upper("a", 1e-7, 1e-8).passed());
        assert!(Row::lower("o", 1.0, 0.9).passed());
        assert!(Row::relative("r", 1.01, 1.0, 0.02).passed());
        assert!(Row::exact("e", 3.0, 3.0).passed());
        assert!(!Row::exact("e", 3.0, 4.0).passed());
        assert!(Row::skipped("s", "critical level").passed());
        assert_eq!(Row::skipped("s", "critical level").verdict.to_string(), "skipped: critical level");
        assert!(!Row::error("x", "boom").passed());
    }
}
