//! Experiment configuration.
//!
//! A config is a TOML document with the sections `[geometry]`,
//! `[hamiltonian]`, `[window]` (optional), `[experiment]`, `[output]`
//! (optional) and `[tolerances]` (optional). Unknown keys are errors.
//!
//! ```toml
//! [geometry]
//! factors = 1
//! twists = [0]
//!
//! [hamiltonian]
//! preset = "rotation"
//!
//! [window]
//! center = 0.0
//! width = 2.5
//!
//! [experiment]
//! level = 0.3
//! p = [50, 100, 200]           # or { from = 100, to = 400, step = 10 }
//! checks = ["poisson"]
//! ```
//!
//! Points are written as flat arrays `[re_1, im_1, re_2, im_2, ...]` of
//! affine coordinates, one pair per factor.

use semiquant::{ChartPoint, Hamiltonian, ModelGeometry, WindowFunction, C64};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub geometry: GeometrySpec,
    pub hamiltonian: HamiltonianSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowSpec>,
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub factors: usize,
    /// Twist `m_i` per factor; empty means untwisted.
    #[serde(default)]
    pub twists: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSpec {
    pub preset: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub center: f64,
    /// Half-width of the support.
    pub width: f64,
    #[serde(default = "one")]
    pub order: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PGrid {
    List(Vec<i64>),
    Range(PRange),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PRange {
    pub from: i64,
    pub to: i64,
    #[serde(default = "one_i64")]
    pub step: i64,
}

fn one_i64() -> i64 {
    1
}

impl PGrid {
    pub fn values(&self) -> Vec<i64> {
        match self {
            PGrid::List(v) => v.clone(),
            PGrid::Range(r) if r.step > 0 => (r.from..=r.to).step_by(r.step as usize).collect(),
            PGrid::Range(_) => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckName {
    Rrh,
    Spectrum,
    Hermitian,
    Unitary,
    GroupLaw,
    TraceFormula,
    Classical,
    Liouville,
    Transport,
    Poisson,
    Weyl,
    OrbitCoefficient,
    A0,
    EvolutionDecay,
    WindowDecay,
    Coherent,
    Bochner,
}

impl CheckName {
    pub fn as_str(&self) -> &'static str {
        match self {
            CheckName::Rrh => "rrh",
            CheckName::Spectrum => "spectrum",
            CheckName::Hermitian => "hermitian",
            CheckName::Unitary => "unitary",
            CheckName::GroupLaw => "group_law",
            CheckName::TraceFormula => "trace_formula",
            CheckName::Classical => "classical",
            CheckName::Liouville => "liouville",
            CheckName::Transport => "transport",
            CheckName::Poisson => "poisson",
            CheckName::Weyl => "weyl",
            CheckName::OrbitCoefficient => "orbit_coefficient",
            CheckName::A0 => "a0",
            CheckName::EvolutionDecay => "evolution_decay",
            CheckName::WindowDecay => "window_decay",
            CheckName::Coherent => "coherent",
            CheckName::Bochner => "bochner",
        }
    }

    fn needs_level(&self) -> bool {
        matches!(self, CheckName::Liouville | CheckName::Poisson | CheckName::Weyl | CheckName::OrbitCoefficient | CheckName::WindowDecay)
    }

    fn needs_window(&self) -> bool {
        matches!(self, CheckName::Poisson | CheckName::Weyl | CheckName::OrbitCoefficient | CheckName::WindowDecay)
    }

    fn needs_points(&self) -> bool {
        matches!(self, CheckName::A0 | CheckName::EvolutionDecay | CheckName::WindowDecay | CheckName::Coherent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    pub p: PGrid,
    #[serde(default)]
    pub checks: Vec<CheckName>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Evolution time for `evolve`, `transport`, `a0`, the decay checks and
    /// the classical invariants.
    #[serde(default = "default_time")]
    pub time: f64,
    /// Step counts for the transport check.
    #[serde(default)]
    pub steps: Vec<usize>,
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    /// Second points of kernel pairs, matched with `points` by index.
    #[serde(default)]
    pub partners: Vec<Vec<f64>>,
    /// Further twist vectors swept by `rrh` and `spectrum`.
    #[serde(default)]
    pub variants: Vec<Vec<i32>>,
    /// Random sample count for invariant checks.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_seed() -> u64 {
    1
}

fn default_time() -> f64 {
    0.3
}

fn default_samples() -> usize {
    32
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<PathBuf>,
}

macro_rules! tolerances {
    ($($(#[$doc:meta])* $name:ident = $default:expr;)*) => {
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct Tolerances {
            $($(#[$doc])* pub $name: f64,)*
        }

        impl Default for Tolerances {
            fn default() -> Self {
                Self { $($name: $default,)* }
            }
        }

        impl Tolerances {
            pub fn entries(&self) -> Vec<(&'static str, f64)> {
                vec![$((stringify!($name), self.$name),)*]
            }
        }
    };
}

tolerances! {
    spectrum = 1e-10;
    hermitian = 1e-10;
    unitary = 1e-9;
    group_law = 1e-9;
    trace_formula = 1e-9;
    /// Relative defect of `dφᵀΩdφ = Ω`.
    symplectic = 1e-8;
    energy = 1e-9;
    flow_group_law = 2e-10;
    /// Relative defect of `ι_ξω = df`.
    hamiltonian_field = 1e-12;
    field_transport = 1e-8;
    action = 1e-8;
    liouville = 1e-8;
    /// Lower bound on the observed convergence order.
    transport_order = 0.9;
    transport_defect = 5e-3;
    poisson = 1e-8;
    /// Largest relative spread of `p·|Tr - Weyl|` around its fit.
    weyl_stability = 0.2;
    orbit_coefficient = 0.05;
    a0_exact = 1e-6;
    a0_ratio = 0.02;
    /// Largest Richardson residual relative to the extrapolated value.
    extrapolation_residual = 1e-4;
    /// Decay exponents must lie below minus this value.
    decay_rate = 3.0;
    coherent_mass = 0.01;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: Option<PathBuf>,
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = &self.path {
            write!(f, "{}", p.display())?;
            if let Some(l) = self.line {
                write!(f, ":{l}")?;
            }
            write!(f, ": ")?;
        }
        if let Some(field) = &self.field {
            write!(f, "{field}: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Line of `key` inside `[section]`, if written there.
fn locate(src: &str, field: &str) -> Option<usize> {
    let (section, key) = field.split_once('.')?;
    let key = key.split(['.', '[']).next()?;
    let mut current = String::new();
    for (i, line) in src.lines().enumerate() {
        let l = line.trim();
        if let Some(h) = l.strip_prefix('[').and_then(|h| h.strip_suffix(']')) {
            current = h.trim().to_string();
            continue;
        }
        if current == section && l.split('=').next().map(str::trim) == Some(key) {
            return Some(i + 1);
        }
    }
    None
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { path: None, line: None, field: Some(field.into()), message: message.into() }
}

impl ExperimentConfig {
    pub fn parse(src: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(src).map_err(|e| {
            let line = e.span().map(|s| src[..s.start.min(src.len())].matches('\n').count() + 1);
            ConfigError { path: None, line, field: None, message: e.message().trim().to_string() }
        })?;
        cfg.validate().map_err(|mut e| {
            e.line = e.field.as_deref().and_then(|f| locate(src, f));
            e
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: Some(path.to_path_buf()),
            line: None,
            field: None,
            message: format!("cannot read config: {e}"),
        })?;
        Self::parse(&src).map_err(|mut e| {
            e.path = Some(path.to_path_buf());
            e
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let s = self.geometry.factors;
        if s == 0 || s > semiquant::phase_space::MAX_FACTORS {
            return Err(invalid("geometry.factors", format!("must be in 1..={}", semiquant::phase_space::MAX_FACTORS)));
        }
        if !self.geometry.twists.is_empty() && self.geometry.twists.len() != s {
            return Err(invalid("geometry.twists", format!("{} twists for {s} factor(s)", self.geometry.twists.len())));
        }
        Hamiltonian::preset(&self.hamiltonian.preset, s).map_err(|e| invalid("hamiltonian.preset", e.to_string()))?;
        if let Some(w) = &self.window {
            if !(w.width > 0.0 && w.width.is_finite()) {
                return Err(invalid("window.width", "must be positive"));
            }
            if !(w.order > 0.0 && w.order.is_finite()) {
                return Err(invalid("window.order", "must be positive"));
            }
            if !w.center.is_finite() {
                return Err(invalid("window.center", "must be finite"));
            }
        }
        let e = &self.experiment;
        let ps = e.p.values();
        if ps.is_empty() {
            return Err(invalid("experiment.p", "p grid is empty"));
        }
        if let Some(bad) = ps.iter().find(|&&p| p < 1) {
            return Err(invalid("experiment.p", format!("p = {bad} is not positive")));
        }
        if let Some(c) = e.level {
            if !c.is_finite() {
                return Err(invalid("experiment.level", "must be finite"));
            }
        }
        if !e.time.is_finite() {
            return Err(invalid("experiment.time", "must be finite"));
        }
        for (field, pts) in [("experiment.points", &e.points), ("experiment.partners", &e.partners)] {
            if let Some(p) = pts.iter().find(|p| p.len() != 2 * s) {
                return Err(invalid(field, format!("point {p:?} needs {} coordinates", 2 * s)));
            }
        }
        if !e.partners.is_empty() && e.partners.len() != e.points.len() {
            return Err(invalid("experiment.partners", "needs one partner per point"));
        }
        // Variants may change the factor count; checks that need the
        // Hamiltonian only use variants of matching length.
        if let Some(v) = e.variants.iter().find(|v| v.is_empty() || v.len() > semiquant::phase_space::MAX_FACTORS) {
            return Err(invalid("experiment.variants", format!("twist vector {v:?} has the wrong length")));
        }
        if let Some(&kmax) = e.steps.iter().max() {
            if e.steps.iter().any(|&k| k == 0 || kmax % k != 0) {
                return Err(invalid("experiment.steps", "step counts must be positive divisors of the largest"));
            }
        }
        for c in &e.checks {
            if c.needs_level() && e.level.is_none() {
                return Err(invalid("experiment.level", format!("check {} needs a level", c.as_str())));
            }
            if c.needs_window() && self.window.is_none() {
                return Err(invalid("experiment.checks", format!("check {} needs a [window] section", c.as_str())));
            }
            if c.needs_points() && e.points.is_empty() {
                return Err(invalid("experiment.points", format!("check {} needs points", c.as_str())));
            }
            if *c == CheckName::EvolutionDecay && e.partners.is_empty() {
                return Err(invalid("experiment.partners", format!("check {} needs partner points", c.as_str())));
            }
            if *c == CheckName::Transport && e.steps.len() < 2 {
                return Err(invalid("experiment.steps", "transport needs at least two step counts"));
            }
        }
        for (name, v) in self.tolerances.entries() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(&format!("tolerances.{name}"), "must be positive"));
            }
        }
        Ok(())
    }

    pub fn twists(&self) -> Vec<i32> {
        if self.geometry.twists.is_empty() {
            vec![0; self.geometry.factors]
        } else {
            self.geometry.twists.clone()
        }
    }

    pub fn geometry(&self) -> ModelGeometry {
        ModelGeometry::new(self.twists()).expect("validated geometry")
    }

    pub fn hamiltonian(&self) -> Hamiltonian {
        Hamiltonian::preset(&self.hamiltonian.preset, self.geometry.factors).expect("validated preset")
    }

    pub fn window(&self) -> Option<WindowFunction> {
        self.window.as_ref().map(|w| WindowFunction::new(w.center, w.width, w.order))
    }

    pub fn ps(&self) -> Vec<i64> {
        self.experiment.p.values()
    }
}

pub fn point(coords: &[f64]) -> ChartPoint {
    let z: Vec<C64> = coords.chunks(2).map(|c| C64::new(c[0], c[1])).collect();
    ChartPoint::affine(&z)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[geometry]
factors = 1

[hamiltonian]
preset = "rotation"

[window]
center = 0.0
width = 2.5

[experiment]
level = 0.3
p = { from = 10, to = 50, step = 10 }
checks = ["rrh", "spectrum", "poisson"]
"#;

    #[test]
    fn round_trip_is_lossless() {
        let cfg = ExperimentConfig::parse(BASIC).unwrap();
        assert_eq!(cfg.ps(), vec![10, 20, 30, 40, 50]);
        let again = ExperimentConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        let mut listed = cfg.clone();
        listed.experiment.p = PGrid::List(vec![3, 5]);
        listed.experiment.points = vec![vec![0.5, 0.25]];
        listed.tolerances.poisson = 1e-7;
        assert_eq!(ExperimentConfig::parse(&listed.to_toml()).unwrap(), listed);
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_line() {
        let src = BASIC.replace("level = 0.3", "level = 0.3\nlevle = 0.4");
        let err = ExperimentConfig::parse(&src).unwrap_err();
        assert!(err.message.contains("levle"), "{err}");
        assert_eq!(err.line, Some(14));
    }

    #[test]
    fn validation_names_the_field() {
        let src = BASIC.replace("p = { from = 10, to = 50, step = 10 }", "p = []");
        let err = ExperimentConfig::parse(&src).unwrap_err();
        assert_eq!(err.field.as_deref(), Some("experiment.p"));
        assert_eq!(err.line, Some(14));
        let src = format!("{BASIC}\n[tolerances]\npoisson = -1e-8\n");
        let err = ExperimentConfig::parse(&src).unwrap_err();
        assert_eq!(err.field.as_deref(), Some("tolerances.poisson"));
        let src = BASIC.replace("factors = 1", "factors = 2").replace("\"rotation\"", "\"radial:1\"");
        let err = ExperimentConfig::parse(&src).unwrap_err();
        assert!(err.to_string().contains("hamiltonian.preset") || err.to_string().contains("factor"), "{err}");
        let src = BASIC.replace("[window]\ncenter = 0.0\nwidth = 2.5\n", "");
        let err = ExperimentConfig::parse(&src).unwrap_err();
        assert_eq!(err.field.as_deref(), Some("experiment.checks"));
    }
}
