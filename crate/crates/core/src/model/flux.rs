//! Flux solutions of the phase network and their coil/magnet decomposition.

use crate::network::{kirchhoff_residual, solve_linear_bounded, MeshFluxes, DEFAULT_CONDITION_BOUND};

use super::circuit::{ElementKind, HemtsrmCircuit, GAP_REFERENCE, POLE_REFERENCE, YOKE_REFERENCE};
use super::geometry::{
    reluctances_from_geometry, sources, MaterialSet, MotorGeometry, OperatingPoint, PathSet,
    ReluctanceSet, SourceSet,
};
use super::ModelError;

/// Stator yoke, stator pole and air-gap fluxes in Wb.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BranchFluxes {
    pub yoke: f64,
    pub pole: f64,
    pub gap: f64,
}

impl std::ops::Sub for BranchFluxes {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self {
            yoke: self.yoke - rhs.yoke,
            pole: self.pole - rhs.pole,
            gap: self.gap - rhs.gap,
        }
    }
}

/// Branch fluxes from mesh fluxes. Exact: only subtractions.
pub fn branch_fluxes(mesh: &[f64; 5]) -> BranchFluxes {
    BranchFluxes {
        yoke: -mesh[0],
        pole: mesh[1] - mesh[0],
        gap: mesh[3] - mesh[0],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementState {
    pub id: &'static str,
    pub kind: ElementKind,
    pub reluctance: f64,
    pub flux: f64,
    /// Flux density in T. `None` for air gaps, whose area varies with angle.
    pub flux_density: Option<f64>,
}

/// A solved operating point.
///
/// `coil` holds the fluxes with the magnet MMF zeroed and `magnet` those with
/// the coil MMF zeroed, both using the same element reluctances as the total.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxSolution {
    pub mesh: [f64; 5],
    pub branch: BranchFluxes,
    pub coil: BranchFluxes,
    pub magnet: BranchFluxes,
    pub sources: SourceSet,
    pub elements: Vec<ElementState>,
    pub iterations: usize,
    pub residual: f64,
}

impl FluxSolution {
    /// Solves the network for fixed per-element reluctances.
    pub fn from_reluctances(
        reluctances: &[f64],
        sources: SourceSet,
        paths: Option<&PathSet>,
        iterations: usize,
        condition_bound: f64,
    ) -> Result<Self, ModelError> {
        let circuit = HemtsrmCircuit::get();
        let solve = |s: &SourceSet| -> Result<(MeshFluxes, f64), ModelError> {
            let system = circuit.assemble(reluctances, s)?;
            let phi = solve_linear_bounded(&system, condition_bound)?;
            let residual = kirchhoff_residual(&system, &phi);
            Ok((phi, residual))
        };
        let (total, residual) = solve(&sources)?;
        let (coil, _) = solve(&sources.coil_only())?;
        let (magnet, _) = solve(&sources.magnet_only())?;

        let fluxes = circuit.element_fluxes(&total);
        let elements = circuit
            .element_ids()
            .zip(circuit.element_kinds())
            .zip(reluctances.iter().zip(&fluxes))
            .map(|((id, kind), (&reluctance, &flux))| ElementState {
                id,
                kind,
                reluctance,
                flux,
                flux_density: paths.and_then(|p| path_area(p, kind)).map(|a| flux / a),
            })
            .collect();

        let mesh = to_array(&total);
        Ok(Self {
            mesh,
            branch: branch_fluxes(&mesh),
            coil: branch_fluxes(&to_array(&coil)),
            magnet: branch_fluxes(&to_array(&magnet)),
            sources,
            elements,
            iterations,
            residual,
        })
    }

    /// Lumped reluctances read from the reference element of each kind.
    pub fn lumped_reluctances(&self) -> ReluctanceSet {
        let find = |id: &str| {
            self.elements
                .iter()
                .find(|e| e.id == id)
                .map(|e| e.reluctance)
                .unwrap_or(f64::NAN)
        };
        ReluctanceSet {
            stator_yoke: find(YOKE_REFERENCE),
            stator_pole: find(POLE_REFERENCE),
            rotor_yoke: find("rotor"),
            airgap: find(GAP_REFERENCE),
            magnet: find("magnet_a"),
        }
    }

    /// Share of the air-gap flux driven by the magnets.
    pub fn magnet_gap_share(&self) -> f64 {
        if self.branch.gap == 0.0 {
            0.0
        } else {
            self.magnet.gap / self.branch.gap
        }
    }
}

pub(crate) fn path_area(paths: &PathSet, kind: ElementKind) -> Option<f64> {
    match kind {
        ElementKind::StatorYoke => Some(paths.stator_yoke.area),
        ElementKind::StatorPole => Some(paths.stator_pole.area),
        ElementKind::RotorYoke => Some(paths.rotor_yoke.area),
        ElementKind::Magnet => Some(paths.magnet.area),
        ElementKind::Airgap => None,
    }
}

fn to_array(phi: &MeshFluxes) -> [f64; 5] {
    let mut out = [0.0; 5];
    out.copy_from_slice(phi.as_slice());
    out
}

/// Linear-iron solve at an operating point.
pub fn solve_linear_model(
    geometry: &MotorGeometry,
    materials: &MaterialSet,
    op: &OperatingPoint,
) -> Result<FluxSolution, ModelError> {
    let r = reluctances_from_geometry(geometry, materials, op.rotor_angle)?;
    let s = sources(geometry, materials, op.phase_current);
    let circuit = HemtsrmCircuit::get();
    FluxSolution::from_reluctances(
        &circuit.uniform_reluctances(&r),
        s,
        Some(&geometry.paths()),
        0,
        DEFAULT_CONDITION_BOUND,
    )
}
