use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("chart coordinate of factor {factor} has modulus {modulus:.3e}; switch chart")]
    Recharting { factor: usize, modulus: f64 },

    #[error("step size underflow at t = {t_last}")]
    StepUnderflow { t_last: f64 },

    #[error("integration exceeded {max_steps} steps at t = {t_last}")]
    TooManySteps { max_steps: usize, t_last: f64 },

    #[error("energy drift {drift:.3e} exceeds limit {limit:.3e}")]
    EnergyDrift { drift: f64, limit: f64 },

    #[error("loop is not closed: defect {defect:.3e}")]
    NotClosed { defect: f64 },

    #[error("level {level} is near-critical at {} point(s), first at z = {:?}", .points.len(), .points.first())]
    NearCritical { level: f64, points: Vec<(f64, f64)> },

    #[error("level {level} does not meet the model")]
    EmptyLevel { level: f64 },

    #[error("eigenspaces are not transverse (pivot {pivot:.3e})")]
    NotTransverse { pivot: f64 },

    #[error("square-root branch jumped by {jump:.3} rad near t = {t}; refine steps")]
    BranchJump { t: f64, jump: f64 },

    #[error("grid exactness degree {available} is below the required {required}")]
    ExactnessShortfall { required: usize, available: usize },

    #[error("condition number {cond:.3e} exceeds {limit:.1e}{hint}")]
    IllConditioned { cond: f64, limit: f64, hint: &'static str },

    #[error("grids or bases do not match: {0}")]
    Mismatch(String),

    #[error("Newton iteration did not converge: residual {residual:.3e} after {iterations} iterations")]
    NewtonFailed { residual: f64, iterations: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
