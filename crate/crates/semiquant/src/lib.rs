//! Geometric quantization workbench on products of Riemann spheres.
//!
//! The crate is organised in four layers:
//!
//! * [`phase_space`]: model geometries, rational Hamiltonians, flows,
//!   prequantum actions, periodic orbits and the pointwise coefficients
//!   built from complex-structure paths.
//! * [`hilbert`]: quadrature grids, orthonormal monomial bases of
//!   holomorphic sections, Bergman kernels and coherent states.
//! * [`operators`]: Toeplitz and Kostant-Souriau matrices, evolution,
//!   geometric pullback and discrete parallel transport.
//! * [`semiclassics`]: smoothed traces, Weyl and Gutzwiller predictions,
//!   oscillatory fits and kernel coefficient checks.
//!
//! Low-level numerics ([`quadrature`], [`ode`], [`extrapolate`]) are generic
//! over [`Real`]; everything above them works in `f64`.

pub mod error;
pub mod extrapolate;
pub mod hilbert;
pub mod ode;
pub mod operators;
pub mod phase_space;
pub mod quadrature;
pub mod scalar;
pub mod semiclassics;

pub use error::{Error, Result};
pub use scalar::Real;

pub type C64 = num_complex::Complex64;
pub type CMatrix = nalgebra::DMatrix<C64>;
pub type CVector = nalgebra::DVector<C64>;
pub type RMatrix = nalgebra::DMatrix<f64>;

pub type GaussLegendre = quadrature::GaussLegendre<f64>;
pub type OdeOptions = ode::OdeOptions<f64>;
pub type Richardson = extrapolate::Richardson<f64>;
pub type WindowFunction = semiclassics::window::Window<f64>;

pub use hilbert::{QuadratureGrid, QuantumBasis, SectionGrid};
pub use operators::{OperatorMatrix, SpectralData};
pub use phase_space::{ChartPoint, Hamiltonian, ModelGeometry, OrbitRecord, TangentData};
