//! The hybrid-excited multi-tooth switched reluctance motor: geometry,
//! phase network, printed closed forms and regime checks.

pub mod circuit;
pub mod closed_form;
pub mod flux;
pub mod geometry;
pub mod regime;

use thiserror::Error;

use crate::network::NetworkError;

pub use circuit::{
    build_network, ElementKind, HemtsrmCircuit, GAP_REFERENCE, MESH_COUNT, POLE_REFERENCE, YOKE_REFERENCE,
};
pub use closed_form::{
    closed_form_branch_fluxes, closed_form_mesh_fluxes, composite_reluctances, CompositeReluctances,
};
pub use flux::{branch_fluxes, solve_linear_model, BranchFluxes, ElementState, FluxSolution};
pub use geometry::{
    airgap_reluctance, reluctances_from_geometry, sources, MaterialSet, MotorGeometry,
    OperatingPoint, ReluctanceSet, SourceSet, MU0,
};
pub use regime::{regime_check, regime_check_with, RegimeRatio, RegimeReport, DEFAULT_DOMINANCE_THRESHOLD};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid geometry `{field}`: {reason}")]
    InvalidGeometry {
        field: &'static str,
        reason: &'static str,
    },
    #[error("invalid material `{field}`: {reason}")]
    InvalidMaterial {
        field: &'static str,
        reason: &'static str,
    },
    #[error("invalid operating point: {0}")]
    InvalidOperatingPoint(String),
    #[error("reluctance `{name}` must be positive and finite, got {value}")]
    InvalidReluctance { name: &'static str, value: f64 },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

impl ModelError {
    pub(crate) fn invalid_geometry(field: &'static str, reason: &'static str) -> Self {
        Self::InvalidGeometry { field, reason }
    }

    pub(crate) fn invalid_material(field: &'static str, reason: &'static str) -> Self {
        Self::InvalidMaterial { field, reason }
    }
}
