//! Operators on `H_p`: Toeplitz and Kostant-Souriau matrices, functional
//! calculus, the geometric pullback and discrete parallel transport.

pub mod assembly;
pub mod bochner;
pub mod evolution;
pub mod matrix;

pub use bochner::{bochner_laplacian, BochnerOptions, BochnerSpectrum};
pub use assembly::{covariant_derivative, kostant_souriau, toeplitz, toeplitz_fn};
pub use evolution::{
    evolution, pullback_operator, pullback_samples, quantum_parallel_transport, TransportOptions, TransportResult,
};
pub use matrix::{
    hermitian_defect, kronecker_sum_values, op_norm, unitary_defect, OperatorKind, OperatorMatrix, SpectralData,
};
