//! Motor dimensions, materials and the mapping from geometry to the lumped
//! reluctances of the equivalent circuit.
//!
//! Path conventions (each reluctance is `l / (μ·A)`):
//!
//! * stator yoke: mean yoke arc spanning one stator tooth pitch, cross-section
//!   `yoke_thickness × stack_length`;
//! * stator pole: `stator_pole_height` long, cross-section of one tooth chord
//!   at the bore times the stack length;
//! * rotor: down one rotor pole, one rotor pole pitch along the rotor back
//!   iron, and up the next pole; cross-section of one rotor pole chord;
//! * magnet: `pm_length` long, cross-section `pm_width × stack_length`;
//! * air gap: `airgap_length` long, cross-section equal to the angular
//!   overlap of stator tooth and rotor pole at the mid-gap radius, with the
//!   permeance floored at [`FRINGING_PERMEANCE_FRACTION`] of its aligned value.
//!
//! Rotor angles are mechanical degrees measured from the unaligned position
//! of the excited phase; alignment is half a rotor pole pitch later.

use std::f64::consts::PI;

use super::ModelError;

/// Vacuum permeability in H/m.
pub const MU0: f64 = 4.0e-7 * PI;

/// Air-gap permeance floor as a fraction of the fully aligned permeance.
pub const FRINGING_PERMEANCE_FRACTION: f64 = 0.05;

/// Ratio of air-gap length to stator diameter above which a warning is logged.
pub const AIRGAP_RATIO_WARNING: f64 = 0.01;

const MM: f64 = 1e-3;

/// Motor dimensions. Lengths in mm, arcs in mechanical degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct MotorGeometry {
    pub stator_outer_diameter: f64,
    pub stator_yoke_thickness: f64,
    pub stator_pole_height: f64,
    pub airgap_length: f64,
    pub rotor_pole_height: f64,
    pub stator_tooth_arc: f64,
    pub rotor_pole_arc: f64,
    pub stack_length: f64,
    pub pm_width: f64,
    pub pm_length: f64,
    pub turns_per_pole: u32,
    pub stator_teeth_count: u32,
    pub rotor_poles_count: u32,
}

impl Default for MotorGeometry {
    /// The 16/18 prototype.
    fn default() -> Self {
        Self {
            stator_outer_diameter: 140.0,
            stator_yoke_thickness: 4.72,
            stator_pole_height: 16.12,
            airgap_length: 0.3,
            rotor_pole_height: 7.64,
            stator_tooth_arc: 4.87,
            rotor_pole_arc: 5.06,
            stack_length: 20.0,
            pm_width: 5.0,
            pm_length: 5.0,
            turns_per_pole: 140,
            stator_teeth_count: 16,
            rotor_poles_count: 18,
        }
    }
}

impl MotorGeometry {
    pub fn validate(&self) -> Result<(), ModelError> {
        let lengths = [
            ("stator_outer_diameter", self.stator_outer_diameter),
            ("stator_yoke_thickness", self.stator_yoke_thickness),
            ("stator_pole_height", self.stator_pole_height),
            ("airgap_length", self.airgap_length),
            ("rotor_pole_height", self.rotor_pole_height),
            ("stack_length", self.stack_length),
            ("pm_width", self.pm_width),
            ("pm_length", self.pm_length),
        ];
        for (field, value) in lengths {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::invalid_geometry(field, "must be positive and finite"));
            }
        }
        if self.turns_per_pole == 0 {
            return Err(ModelError::invalid_geometry("turns_per_pole", "must be at least 1"));
        }
        if self.stator_teeth_count == 0 {
            return Err(ModelError::invalid_geometry("stator_teeth_count", "must be at least 1"));
        }
        if self.rotor_poles_count == 0 {
            return Err(ModelError::invalid_geometry("rotor_poles_count", "must be at least 1"));
        }
        let stator_pitch = 360.0 / f64::from(self.stator_teeth_count);
        if !(self.stator_tooth_arc > 0.0 && self.stator_tooth_arc < stator_pitch) {
            return Err(ModelError::invalid_geometry(
                "stator_tooth_arc",
                "must lie in (0, 360/stator_teeth_count) degrees",
            ));
        }
        if !(self.rotor_pole_arc > 0.0 && self.rotor_pole_arc < self.rotor_pole_pitch()) {
            return Err(ModelError::invalid_geometry(
                "rotor_pole_arc",
                "must lie in (0, 360/rotor_poles_count) degrees",
            ));
        }
        if self.bore_radius() <= 0.0 {
            return Err(ModelError::invalid_geometry(
                "stator_outer_diameter",
                "yoke and pole heights leave no bore",
            ));
        }
        if self.rotor_root_radius() <= 0.0 {
            return Err(ModelError::invalid_geometry(
                "rotor_pole_height",
                "rotor poles reach past the shaft axis",
            ));
        }
        let ratio = self.airgap_length / self.stator_outer_diameter;
        if ratio >= AIRGAP_RATIO_WARNING {
            log::warn!(
                "air gap is {:.4} of the stator diameter; lumped gap model assumes a thin gap",
                ratio
            );
        }
        Ok(())
    }

    /// Rotor pole pitch in degrees; the electrical period of one phase.
    pub fn rotor_pole_pitch(&self) -> f64 {
        360.0 / f64::from(self.rotor_poles_count)
    }

    pub fn unaligned_angle(&self) -> f64 {
        0.0
    }

    pub fn aligned_angle(&self) -> f64 {
        0.5 * self.rotor_pole_pitch()
    }

    /// Stator bore radius in mm.
    pub fn bore_radius(&self) -> f64 {
        0.5 * self.stator_outer_diameter - self.stator_yoke_thickness - self.stator_pole_height
    }

    /// Radius at the root of the rotor poles in mm.
    pub fn rotor_root_radius(&self) -> f64 {
        self.bore_radius() - self.airgap_length - self.rotor_pole_height
    }

    /// Chord width of one stator tooth at the bore, mm.
    pub fn tooth_width(&self) -> f64 {
        2.0 * self.bore_radius() * (0.5 * self.stator_tooth_arc).to_radians().sin()
    }

    /// Chord width of one rotor pole at its tip, mm.
    pub fn rotor_pole_width(&self) -> f64 {
        2.0 * (self.bore_radius() - self.airgap_length) * (0.5 * self.rotor_pole_arc).to_radians().sin()
    }

    /// Angular overlap of stator tooth and rotor pole in degrees, before the
    /// fringing floor is applied.
    pub fn overlap_angle(&self, angle_deg: f64) -> f64 {
        let pitch = self.rotor_pole_pitch();
        let theta = angle_deg.rem_euclid(pitch);
        let offset = (theta - self.aligned_angle()).abs();
        let full = self.stator_tooth_arc.min(self.rotor_pole_arc);
        let half_sum = 0.5 * (self.stator_tooth_arc + self.rotor_pole_arc);
        (half_sum - offset).clamp(0.0, full)
    }

    /// Angles in `[0, pitch)` where the air-gap permeance has a corner: the
    /// edges of full overlap and the edges of the fringing floor. Torque
    /// is discontinuous there.
    pub fn overlap_corners(&self) -> Vec<f64> {
        let pitch = self.rotor_pole_pitch();
        let full = self.stator_tooth_arc.min(self.rotor_pole_arc);
        let half_sum = 0.5 * (self.stator_tooth_arc + self.rotor_pole_arc);
        let mut corners = Vec::with_capacity(4);
        for reach in [half_sum - full, half_sum - FRINGING_PERMEANCE_FRACTION * full] {
            for sign in [-1.0, 1.0] {
                corners.push((self.aligned_angle() + sign * reach).rem_euclid(pitch));
            }
        }
        corners.sort_by(f64::total_cmp);
        corners
    }

    /// True when no permeance corner lies strictly inside `(lo, hi)`.
    pub fn overlap_smooth_between(&self, lo: f64, hi: f64) -> bool {
        let pitch = self.rotor_pole_pitch();
        self.overlap_corners().iter().all(|&c| {
            // nearest periodic copy of the corner above lo
            let shifted = c + ((lo - c) / pitch).floor() * pitch + pitch;
            let copies = [shifted - pitch, shifted];
            copies.iter().all(|&x| !(x > lo && x < hi))
        })
    }

    /// Iron and magnet flux paths implied by the dimensions.
    pub fn paths(&self) -> PathSet {
        let stack = self.stack_length * MM;
        let yoke_mean_radius = 0.5 * self.stator_outer_diameter - 0.5 * self.stator_yoke_thickness;
        let stator_pitch = 2.0 * PI / f64::from(self.stator_teeth_count);
        let rotor_pitch = 2.0 * PI / f64::from(self.rotor_poles_count);
        PathSet {
            stator_yoke: FluxPath {
                length: yoke_mean_radius * stator_pitch * MM,
                area: self.stator_yoke_thickness * MM * stack,
            },
            stator_pole: FluxPath {
                length: self.stator_pole_height * MM,
                area: self.tooth_width() * MM * stack,
            },
            rotor_yoke: FluxPath {
                length: (2.0 * self.rotor_pole_height + self.rotor_root_radius() * rotor_pitch) * MM,
                area: self.rotor_pole_width() * MM * stack,
            },
            magnet: FluxPath {
                length: self.pm_length * MM,
                area: self.pm_width * MM * stack,
            },
        }
    }
}

/// Mean length (m) and cross-section (m²) of a flux path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxPath {
    pub length: f64,
    pub area: f64,
}

impl FluxPath {
    pub fn reluctance(&self, permeability: f64) -> f64 {
        self.length / (permeability * self.area)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSet {
    pub stator_yoke: FluxPath,
    pub stator_pole: FluxPath,
    pub rotor_yoke: FluxPath,
    pub magnet: FluxPath,
}

/// Material constants.
///
/// The magnet defaults are datasheet-typical values for sintered N35 and the
/// iron permeability is a typical linear-region value for silicon steel.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialSet {
    pub vacuum_permeability: f64,
    pub iron_relative_permeability: f64,
    /// Remanence in T.
    pub pm_remanence: f64,
    pub pm_relative_permeability: f64,
    /// Coercivity override in A/m; derived from remanence when `None`.
    pub pm_coercivity: Option<f64>,
}

impl Default for MaterialSet {
    fn default() -> Self {
        Self {
            vacuum_permeability: MU0,
            iron_relative_permeability: 4000.0,
            pm_remanence: 1.2,
            pm_relative_permeability: 1.05,
            pm_coercivity: None,
        }
    }
}

impl MaterialSet {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.vacuum_permeability.is_finite() && self.vacuum_permeability > 0.0) {
            return Err(ModelError::invalid_material("vacuum_permeability", "must be positive"));
        }
        if !(self.iron_relative_permeability >= 1.0 && self.iron_relative_permeability.is_finite()) {
            return Err(ModelError::invalid_material("iron_relative_permeability", "must be at least 1"));
        }
        if !(self.pm_relative_permeability >= 1.0 && self.pm_relative_permeability.is_finite()) {
            return Err(ModelError::invalid_material("pm_relative_permeability", "must be at least 1"));
        }
        // Zero remanence is accepted: it switches the magnets off for
        // coil-only comparisons.
        if !(self.pm_remanence >= 0.0 && self.pm_remanence.is_finite()) {
            return Err(ModelError::invalid_material("pm_remanence", "must be non-negative"));
        }
        if let Some(hc) = self.pm_coercivity {
            if !(hc >= 0.0 && hc.is_finite()) {
                return Err(ModelError::invalid_material("pm_coercivity", "must be non-negative"));
            }
        }
        Ok(())
    }

    /// Coercivity in A/m: the override if given, else `B_r / (μ0·μr_pm)`.
    pub fn coercivity(&self) -> f64 {
        self.pm_coercivity.unwrap_or_else(|| {
            self.pm_remanence / (self.vacuum_permeability * self.pm_relative_permeability)
        })
    }

    /// Same materials with the magnets demagnetised.
    pub fn without_magnets(&self) -> Self {
        Self {
            pm_remanence: 0.0,
            pm_coercivity: Some(0.0),
            ..self.clone()
        }
    }
}

/// Phase current (A) and rotor angle (deg from unaligned).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub phase_current: f64,
    pub rotor_angle: f64,
}

impl OperatingPoint {
    pub fn new(geometry: &MotorGeometry, phase_current: f64, rotor_angle: f64) -> Result<Self, ModelError> {
        if !(phase_current >= 0.0 && phase_current.is_finite()) {
            return Err(ModelError::InvalidOperatingPoint(format!(
                "phase current must be non-negative, got {phase_current}"
            )));
        }
        let period = geometry.rotor_pole_pitch();
        if !(rotor_angle >= 0.0 && rotor_angle < period) {
            return Err(ModelError::InvalidOperatingPoint(format!(
                "rotor angle {rotor_angle} outside [0, {period})"
            )));
        }
        Ok(Self {
            phase_current,
            rotor_angle,
        })
    }
}

/// The five lumped reluctances in A/Wb.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReluctanceSet {
    pub stator_yoke: f64,
    pub stator_pole: f64,
    pub rotor_yoke: f64,
    pub airgap: f64,
    pub magnet: f64,
}

impl ReluctanceSet {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in self.named() {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::InvalidReluctance { name, value: v });
            }
        }
        if self.magnet <= self.stator_pole || self.magnet <= self.stator_yoke {
            log::warn!("magnet reluctance does not dominate the iron reluctances: {self:?}");
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("stator_yoke", self.stator_yoke),
            ("stator_pole", self.stator_pole),
            ("rotor_yoke", self.rotor_yoke),
            ("airgap", self.airgap),
            ("magnet", self.magnet),
        ]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            stator_yoke: self.stator_yoke * factor,
            stator_pole: self.stator_pole * factor,
            rotor_yoke: self.rotor_yoke * factor,
            airgap: self.airgap * factor,
            magnet: self.magnet * factor,
        }
    }
}

/// Coil and magnet MMFs in ampere-turns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSet {
    pub coil: f64,
    pub magnet: f64,
}

impl SourceSet {
    pub fn coil_only(&self) -> Self {
        Self { magnet: 0.0, ..*self }
    }

    pub fn magnet_only(&self) -> Self {
        Self { coil: 0.0, ..*self }
    }
}

/// MMFs at a given phase current. Both coils of a phase are series-aiding,
/// each contributing `turns_per_pole × current`.
pub fn sources(geometry: &MotorGeometry, materials: &MaterialSet, phase_current: f64) -> SourceSet {
    SourceSet {
        coil: f64::from(geometry.turns_per_pole) * phase_current,
        magnet: materials.coercivity() * geometry.pm_length * MM,
    }
}

/// Air-gap reluctance at a rotor angle (deg from unaligned).
pub fn airgap_reluctance(geometry: &MotorGeometry, materials: &MaterialSet, angle_deg: f64) -> f64 {
    let gap = geometry.airgap_length * MM;
    let radius = (geometry.bore_radius() - 0.5 * geometry.airgap_length) * MM;
    let stack = geometry.stack_length * MM;
    let permeance_of = |overlap_deg: f64| {
        materials.vacuum_permeability * radius * overlap_deg.to_radians() * stack / gap
    };
    let full = geometry.stator_tooth_arc.min(geometry.rotor_pole_arc);
    let floor = FRINGING_PERMEANCE_FRACTION * permeance_of(full);
    1.0 / permeance_of(geometry.overlap_angle(angle_deg)).max(floor)
}

/// Linear-iron reluctances at a rotor angle.
pub fn reluctances_from_geometry(
    geometry: &MotorGeometry,
    materials: &MaterialSet,
    angle_deg: f64,
) -> Result<ReluctanceSet, ModelError> {
    geometry.validate()?;
    materials.validate()?;
    let paths = geometry.paths();
    let mu_iron = materials.vacuum_permeability * materials.iron_relative_permeability;
    let mu_pm = materials.vacuum_permeability * materials.pm_relative_permeability;
    let set = ReluctanceSet {
        stator_yoke: paths.stator_yoke.reluctance(mu_iron),
        stator_pole: paths.stator_pole.reluctance(mu_iron),
        rotor_yoke: paths.rotor_yoke.reluctance(mu_iron),
        airgap: airgap_reluctance(geometry, materials, angle_deg),
        magnet: paths.magnet.reluctance(mu_pm),
    };
    set.validate()?;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs()
    }

    #[test]
    fn default_geometry_is_valid() {
        let g = MotorGeometry::default();
        g.validate().unwrap();
        assert_eq!(g.rotor_pole_pitch(), 20.0);
        assert_eq!(g.aligned_angle(), 10.0);
        assert!(rel_close(g.bore_radius(), 49.16, 1e-12));
    }

    #[test]
    fn aligned_airgap_reluctance_regression() {
        // r = 49.16 - 0.15 mm, overlap 4.87°, stack 20 mm, gap 0.3 mm:
        // R = 0.3e-3 / (4π·1e-7 · 49.01e-3 · 0.0849975 · 0.02)
        let g = MotorGeometry::default();
        let r = airgap_reluctance(&g, &MaterialSet::default(), g.aligned_angle());
        assert!(rel_close(r, 2.865_433_696_37e6, 1e-9), "{r}");
    }

    #[test]
    fn airgap_extremes_and_ramp() {
        let g = MotorGeometry::default();
        let m = MaterialSet::default();
        let samples: Vec<f64> = (0..=800)
            .map(|k| airgap_reluctance(&g, &m, k as f64 * 0.025))
            .collect();
        let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = samples.iter().cloned().fold(0.0, f64::max);
        assert_eq!(airgap_reluctance(&g, &m, g.aligned_angle()), min);
        assert_eq!(airgap_reluctance(&g, &m, g.unaligned_angle()), max);
        // floor: unaligned reluctance is 1/0.05 of the aligned value
        assert!(rel_close(max / min, 20.0, 1e-12));

        // Middle of the overlap ramp: overlap = half of the full overlap.
        let half_sum = 0.5 * (g.stator_tooth_arc + g.rotor_pole_arc);
        let mid = g.aligned_angle() - half_sum + 0.5 * g.stator_tooth_arc;
        let r_mid = airgap_reluctance(&g, &m, mid);
        assert!(r_mid > min && r_mid < max);
        assert!(rel_close(r_mid, 2.0 * min, 1e-12));
    }

    #[test]
    fn airgap_periodic_and_symmetric() {
        let g = MotorGeometry::default();
        let m = MaterialSet::default();
        for k in 0..80 {
            let th = k as f64 * 0.25;
            let a = airgap_reluctance(&g, &m, th);
            assert_eq!(a, airgap_reluctance(&g, &m, th + 20.0));
            assert!(rel_close(a, airgap_reluctance(&g, &m, 20.0 - th), 1e-12));
        }
    }

    #[test]
    fn airgap_permeance_is_lipschitz() {
        // Permeance is piecewise linear in angle with slope bounded by the
        // aligned permeance per degree of full overlap.
        let g = MotorGeometry::default();
        let m = MaterialSet::default();
        let full = g.stator_tooth_arc.min(g.rotor_pole_arc);
        let slope = 1.0 / airgap_reluctance(&g, &m, g.aligned_angle()) / full;
        let h = 1e-3;
        for k in 0..20_000 {
            let th = k as f64 * h;
            let a = 1.0 / airgap_reluctance(&g, &m, th);
            let b = 1.0 / airgap_reluctance(&g, &m, th + h);
            assert!((a - b).abs() <= slope * h * (1.0 + 1e-9), "jump at {th}");
        }
    }

    #[test]
    fn overlap_corners_bracket_the_ramps() {
        let g = MotorGeometry::default();
        let c = g.overlap_corners();
        let expect = [10.0 - 4.7215, 10.0 - 0.095, 10.0 + 0.095, 10.0 + 4.7215];
        for (a, b) in c.iter().zip(expect) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        assert!(!g.overlap_smooth_between(9.75, 10.25));
        assert!(g.overlap_smooth_between(6.0, 6.5));
        assert!(!g.overlap_smooth_between(25.0, 25.5));
        assert!(g.overlap_smooth_between(-0.25, 0.25));
    }

    #[test]
    fn doubling_stack_halves_reluctances() {
        let g = MotorGeometry::default();
        let m = MaterialSet::default();
        let double = MotorGeometry {
            stack_length: 40.0,
            ..g.clone()
        };
        for angle in [0.0, 7.0, 10.0] {
            let a = reluctances_from_geometry(&g, &m, angle).unwrap();
            let b = reluctances_from_geometry(&double, &m, angle).unwrap();
            for ((_, x), (_, y)) in a.named().iter().zip(b.named().iter()) {
                assert!(rel_close(*y, 0.5 * x, 1e-12));
            }
        }
    }

    #[test]
    fn magnet_dominates_pole() {
        let g = MotorGeometry::default();
        let r = reluctances_from_geometry(&g, &MaterialSet::default(), g.aligned_angle()).unwrap();
        assert!(r.magnet / (2.0 * r.stator_pole) > 100.0);
    }

    #[test]
    fn coercivity_derivation() {
        let m = MaterialSet::default();
        assert!(rel_close(m.coercivity(), 1.2 / (MU0 * 1.05), 1e-15));
        assert!((m.coercivity() - 9.09e5).abs() < 5e2);
        let o = MaterialSet {
            pm_coercivity: Some(8.5e5),
            ..m.clone()
        };
        assert_eq!(o.coercivity(), 8.5e5);
        assert_eq!(m.without_magnets().coercivity(), 0.0);
    }

    #[test]
    fn coil_mmf_uses_turns_per_pole() {
        let g = MotorGeometry::default();
        let s = sources(&g, &MaterialSet::default(), 8.0);
        assert_eq!(s.coil, 1120.0);
        assert!(s.magnet > 0.0);
    }

    #[test]
    fn invalid_geometry_rejected() {
        let g = MotorGeometry {
            airgap_length: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            g.validate(),
            Err(ModelError::InvalidGeometry { field: "airgap_length", .. })
        ));
        let g = MotorGeometry {
            rotor_pole_arc: 25.0,
            ..Default::default()
        };
        assert!(g.validate().is_err());
        let g = MotorGeometry {
            stator_pole_height: 80.0,
            ..Default::default()
        };
        assert!(g.validate().is_err());
    }

    #[test]
    fn operating_point_range() {
        let g = MotorGeometry::default();
        assert!(OperatingPoint::new(&g, 1.0, 19.99).is_ok());
        assert!(OperatingPoint::new(&g, 1.0, 20.0).is_err());
        assert!(OperatingPoint::new(&g, -1.0, 0.0).is_err());
    }
}
