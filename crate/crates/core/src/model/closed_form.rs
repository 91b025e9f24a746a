//! Printed closed-form flux expressions, kept for auditing only.
//!
//! These are transcriptions, not derivations: the numeric mesh solve is the
//! reference and the fidelity report measures how far each expression is
//! from it. Nothing on the torque path calls into this module.

use super::flux::BranchFluxes;
use super::geometry::{ReluctanceSet, SourceSet};

/// Composite reluctances. `r1` is in A/Wb, the others in (A/Wb)².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeReluctances {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
}

pub fn composite_reluctances(r: &ReluctanceSet) -> CompositeReluctances {
    let (g, ry, sp) = (r.airgap, r.rotor_yoke, r.stator_pole);
    CompositeReluctances {
        r1: g + ry + 2.0 * sp,
        r2: 2.0 * g * g + 3.0 * g * ry + 6.0 * g * sp + ry * ry + 4.0 * ry * sp + 4.0 * sp * sp,
        r3: 2.0 * g * g + 3.0 * g * ry + 4.0 * g * sp + ry * ry + 2.0 * ry * sp,
        r4: g * sp + 2.0 * ry * sp + 4.0 * sp * sp,
    }
}

/// Mesh fluxes φ1..φ5 from the printed expressions. The second, third and
/// fifth are printed identically and are reproduced that way.
pub fn closed_form_mesh_fluxes(r: &ReluctanceSet, s: &SourceSet) -> [f64; 5] {
    let c = composite_reluctances(r);
    let coil = -2.0 * (r.airgap + r.stator_yoke) / c.r2 * s.coil;
    let phi1 = -2.0 / c.r1 * s.coil;
    let side = coil - c.r3 / (c.r2 * r.magnet) * s.magnet;
    let centre = coil - c.r4 / (c.r2 * r.magnet) * s.magnet;
    [phi1, side, side, centre, side]
}

/// Branch fluxes from the printed expressions.
pub fn closed_form_branch_fluxes(r: &ReluctanceSet, s: &SourceSet) -> BranchFluxes {
    let c = composite_reluctances(r);
    let coil = 2.0 * (c.r2 - c.r1 * (r.airgap + r.stator_yoke)) / (c.r1 * c.r2) * s.coil;
    BranchFluxes {
        yoke: 2.0 / c.r1 * s.coil,
        pole: coil - c.r3 / (c.r2 * r.magnet) * s.magnet,
        gap: coil + c.r4 / (c.r2 * r.magnet) * s.magnet,
    }
}
