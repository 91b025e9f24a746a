//! Mesh topology of one excited phase of the hybrid-excited motor.
//!
//! Five meshes, all traversed counterclockwise:
//!
//! 1. the main coil loop: stator yoke, both excited poles, both air gaps and
//!    the rotor path;
//! 2. and 3. the left and right magnet loops, each closing through one pole
//!    and a yoke segment;
//! 4. the central loop shared by the three magnets, the air gaps and the rotor;
//! 5. the outer magnet loop closing through the yoke.
//!
//! Every element carries a reference direction. A mesh that runs along that
//! direction contributes `+1`, against it `-1`, and the matrix follows from
//! `A[i][j] = Σ s_i·s_j·R`. Shared elements therefore enter with opposite
//! signs automatically.

use std::sync::OnceLock;

use crate::network::{
    MagneticNetwork, MeshFluxes, MeshSpec, MeshSystem, MmfSource, NetworkError, Orientation,
    ReluctanceElement,
};

use super::geometry::{ReluctanceSet, SourceSet};
use super::ModelError;

use Orientation::{Against, Along};

pub const MESH_COUNT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    StatorYoke,
    StatorPole,
    RotorYoke,
    Airgap,
    Magnet,
}

impl ElementKind {
    pub fn is_iron(self) -> bool {
        matches!(self, Self::StatorYoke | Self::StatorPole | Self::RotorYoke)
    }

    pub fn pick(self, r: &ReluctanceSet) -> f64 {
        match self {
            Self::StatorYoke => r.stator_yoke,
            Self::StatorPole => r.stator_pole,
            Self::RotorYoke => r.rotor_yoke,
            Self::Airgap => r.airgap,
            Self::Magnet => r.magnet,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Coil,
    Magnet,
}

struct ElementDef {
    id: &'static str,
    kind: ElementKind,
    meshes: &'static [(usize, Orientation)],
}

struct SourceDef {
    id: &'static str,
    kind: SourceKind,
    meshes: &'static [(usize, Orientation)],
}

const ELEMENTS: [ElementDef; 14] = [
    ElementDef { id: "yoke_1", kind: ElementKind::StatorYoke, meshes: &[(0, Against)] },
    ElementDef { id: "yoke_2", kind: ElementKind::StatorYoke, meshes: &[(1, Along)] },
    ElementDef { id: "yoke_3", kind: ElementKind::StatorYoke, meshes: &[(2, Along)] },
    ElementDef { id: "yoke_4a", kind: ElementKind::StatorYoke, meshes: &[(3, Along)] },
    ElementDef { id: "yoke_4b", kind: ElementKind::StatorYoke, meshes: &[(3, Along)] },
    ElementDef { id: "yoke_5", kind: ElementKind::StatorYoke, meshes: &[(4, Along)] },
    ElementDef { id: "pole_a", kind: ElementKind::StatorPole, meshes: &[(0, Against), (1, Along)] },
    ElementDef { id: "pole_b", kind: ElementKind::StatorPole, meshes: &[(0, Against), (2, Along)] },
    ElementDef { id: "gap_a", kind: ElementKind::Airgap, meshes: &[(0, Against), (3, Along)] },
    ElementDef { id: "gap_b", kind: ElementKind::Airgap, meshes: &[(0, Against), (3, Along)] },
    ElementDef { id: "rotor", kind: ElementKind::RotorYoke, meshes: &[(0, Against), (3, Along)] },
    ElementDef { id: "magnet_a", kind: ElementKind::Magnet, meshes: &[(1, Along), (3, Against)] },
    ElementDef { id: "magnet_b", kind: ElementKind::Magnet, meshes: &[(2, Along), (3, Against)] },
    ElementDef { id: "magnet_c", kind: ElementKind::Magnet, meshes: &[(3, Along), (4, Against)] },
];

const SOURCES: [SourceDef; 5] = [
    SourceDef { id: "coil_a", kind: SourceKind::Coil, meshes: &[(0, Against), (1, Along)] },
    SourceDef { id: "coil_b", kind: SourceKind::Coil, meshes: &[(0, Against), (2, Along)] },
    SourceDef { id: "magnet_a", kind: SourceKind::Magnet, meshes: &[(1, Against), (3, Along)] },
    SourceDef { id: "magnet_b", kind: SourceKind::Magnet, meshes: &[(2, Against), (3, Along)] },
    SourceDef { id: "magnet_c", kind: SourceKind::Magnet, meshes: &[(3, Along), (4, Against)] },
];

/// Element ids whose fluxes define the branch fluxes.
pub const YOKE_REFERENCE: &str = "yoke_1";
pub const POLE_REFERENCE: &str = "pole_a";
pub const GAP_REFERENCE: &str = "gap_a";

/// The resolved phase network. Element values are supplied per assembly.
#[derive(Debug, Clone)]
pub struct HemtsrmCircuit {
    network: MagneticNetwork,
}

impl HemtsrmCircuit {
    fn build() -> Result<Self, NetworkError> {
        let elements = ELEMENTS
            .iter()
            .map(|e| ReluctanceElement::new(e.id, 1.0))
            .collect::<Result<Vec<_>, _>>()?;
        let sources = SOURCES
            .iter()
            .map(|s| MmfSource::new(s.id, 0.0))
            .collect::<Result<Vec<_>, _>>()?;
        let mut meshes = vec![MeshSpec::new(); MESH_COUNT];
        for e in &ELEMENTS {
            for &(m, o) in e.meshes {
                meshes[m] = std::mem::take(&mut meshes[m]).element(e.id, o);
            }
        }
        for s in &SOURCES {
            for &(m, o) in s.meshes {
                meshes[m] = std::mem::take(&mut meshes[m]).source(s.id, o);
            }
        }
        Ok(Self {
            network: MagneticNetwork::new(elements, sources, &meshes)?,
        })
    }

    /// Shared instance; the topology is fixed.
    pub fn get() -> &'static Self {
        static CIRCUIT: OnceLock<HemtsrmCircuit> = OnceLock::new();
        CIRCUIT.get_or_init(|| Self::build().expect("built-in topology is consistent"))
    }

    pub fn element_count(&self) -> usize {
        ELEMENTS.len()
    }

    pub fn element_ids(&self) -> impl Iterator<Item = &'static str> {
        ELEMENTS.iter().map(|e| e.id)
    }

    pub fn element_kinds(&self) -> impl Iterator<Item = ElementKind> {
        ELEMENTS.iter().map(|e| e.kind)
    }

    pub fn element_position(&self, id: &str) -> Option<usize> {
        self.network.element_position(id)
    }

    /// Per-element reluctances with every instance of a kind set alike.
    pub fn uniform_reluctances(&self, r: &ReluctanceSet) -> Vec<f64> {
        ELEMENTS.iter().map(|e| e.kind.pick(r)).collect()
    }

    pub fn mmfs(&self, s: &SourceSet) -> Vec<f64> {
        SOURCES
            .iter()
            .map(|d| match d.kind {
                SourceKind::Coil => s.coil,
                SourceKind::Magnet => s.magnet,
            })
            .collect()
    }

    /// Assembles the mesh equations from per-element reluctances.
    pub fn assemble(&self, reluctances: &[f64], s: &SourceSet) -> Result<MeshSystem, NetworkError> {
        Ok(self
            .network
            .assemble_with(reluctances, &self.mmfs(s))?
            .with_label("hybrid-excited phase network"))
    }

    pub fn element_fluxes(&self, fluxes: &MeshFluxes) -> Vec<f64> {
        self.network.element_fluxes(fluxes)
    }
}

/// The five-mesh system for lumped reluctances and sources.
pub fn build_network(r: &ReluctanceSet, s: &SourceSet) -> Result<MeshSystem, ModelError> {
    r.validate()?;
    let circuit = HemtsrmCircuit::get();
    Ok(circuit.assemble(&circuit.uniform_reluctances(r), s)?)
}
