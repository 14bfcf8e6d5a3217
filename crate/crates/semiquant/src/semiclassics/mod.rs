//! Trace-formula layer: smoothed traces, Weyl and Gutzwiller predictions,
//! oscillatory fits and pointwise kernel coefficients.

pub mod fit;
pub mod kernel;
pub mod trace;
pub mod window;

pub use fit::{fit_expansion, ExpansionFit, FitTerm, FIT_MAX_COND};
pub use kernel::{
    a0_check, b0_squared, b_kernel_check, coherent_propagation_check, evolution_kernel_decay, quantize,
    window_kernel_decay, A0Report, BKernelReport, CheckReport, CoherentReport, CoherentSample, DecayReport,
    KernelCheckOptions, Verdict,
};
pub use trace::{
    gutzwiller_predict, smoothed_trace, smoothed_trace_values, weyl_term, OrbitTerm, TracePrediction, EVEN_BRANCH,
};
pub use window::Window;
