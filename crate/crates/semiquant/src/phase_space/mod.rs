//! Classical side: model geometries, Hamiltonians, flows and the pointwise
//! coefficients attached to complex-structure paths.

pub mod flow;
pub mod geometry;
pub mod hamiltonian;
pub mod liouville;
pub mod orbits;
pub mod tangent;

pub use flow::{closure_defect, flow_full, integrate_flow, FlowOptions, FlowOutcome, FlowTracker, LiftPhase};
pub use geometry::{ChartPoint, ModelGeometry, MAX_FACTORS};
pub use hamiltonian::{Hamiltonian, Jet, Monomial};
pub use liouville::{field_norm, liouville_volume, LevelOptions};
pub use orbits::{
    find_periodic_orbits, holomorphic_root, prequantum_action, primitive_orbits, resonance_record, stability_determinant, OrbitOptions,
    OrbitRecord,
};
pub use tangent::{
    a0_squared, canonical_path, canonical_transport, local_model, mu_coefficient, oblique_projectors,
    pushforward_complex_structure, CanonicalData, TangentData,
};

use crate::{Error, Result, C64};

/// `ξ_f` at `x` with `ι_ξ ω = df`; components per factor in the charts of `x`.
pub fn hamiltonian_vector_field(geom: &ModelGeometry, f: &Hamiltonian, x: &ChartPoint) -> Result<Vec<C64>> {
    if geom.factors() != f.factors() || x.factors() != f.factors() {
        return Err(Error::InvalidInput("geometry, Hamiltonian and point disagree on the factor count".into()));
    }
    f.vector_field(x)
}
