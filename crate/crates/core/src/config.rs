//! Run configuration: a TOML file with `[geometry]`, `[materials]`,
//! `[solver]` and `[sweep]` tables. Every key is optional and falls back to
//! the prototype value; unknown keys are rejected.
//!
//! ```toml
//! [geometry]
//! stator_outer_diameter = 140.0   # mm
//! stator_yoke_thickness = 4.72    # mm
//! stator_pole_height = 16.12      # mm
//! airgap_length = 0.3             # mm
//! rotor_pole_height = 7.64        # mm
//! stator_tooth_arc = 4.87         # deg
//! rotor_pole_arc = 5.06           # deg
//! stack_length = 20.0             # mm
//! pm_width = 5.0                  # mm
//! pm_length = 5.0                 # mm
//! turns_per_pole = 140
//! stator_teeth_count = 16
//! rotor_poles_count = 18
//! series_coils = 4                # pole coils in series per phase
//!
//! [materials]
//! vacuum_permeability = 1.25663706212e-6
//! iron_relative_permeability = 4000.0
//! pm_remanence = 1.2              # T
//! pm_relative_permeability = 1.05
//! # pm_coercivity = 909456.0      # A/m, derived from remanence if absent
//! # bh_curve = "steel.csv"        # H (A/m), B (T); relative to this file
//!
//! [solver]
//! tolerance = 1e-8
//! max_iterations = 200
//! relaxation = 0.5
//! condition_bound = 1e12
//!
//! [sweep]
//! currents = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]   # A
//! angle_step = 0.25               # deg
//! angle_start = 0.0               # deg from unaligned
//! current_points = 33
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{MaterialSet, ModelError, MotorGeometry};
use crate::saturation::{BhCurve, NonlinearConfig, SaturationError};
use crate::torque::{SweepSettings, Winding, DEFAULT_SERIES_COILS};

pub const DEFAULT_CURRENTS: [f64; 8] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config [{section}] {key}: {reason}")]
    Invalid {
        section: &'static str,
        key: &'static str,
        reason: String,
    },
    #[error("config: {0}")]
    Model(#[from] ModelError),
    #[error("config: {0}")]
    Curve(#[from] SaturationError),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    geometry: RawGeometry,
    #[serde(default)]
    materials: RawMaterials,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    sweep: RawSweep,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    stator_outer_diameter: Option<f64>,
    stator_yoke_thickness: Option<f64>,
    stator_pole_height: Option<f64>,
    airgap_length: Option<f64>,
    rotor_pole_height: Option<f64>,
    stator_tooth_arc: Option<f64>,
    rotor_pole_arc: Option<f64>,
    stack_length: Option<f64>,
    pm_width: Option<f64>,
    pm_length: Option<f64>,
    turns_per_pole: Option<u32>,
    stator_teeth_count: Option<u32>,
    rotor_poles_count: Option<u32>,
    series_coils: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMaterials {
    vacuum_permeability: Option<f64>,
    iron_relative_permeability: Option<f64>,
    pm_remanence: Option<f64>,
    pm_relative_permeability: Option<f64>,
    pm_coercivity: Option<f64>,
    bh_curve: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    tolerance: Option<f64>,
    max_iterations: Option<usize>,
    relaxation: Option<f64>,
    condition_bound: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    currents: Option<Vec<f64>>,
    angle_step: Option<f64>,
    angle_start: Option<f64>,
    current_points: Option<usize>,
}

/// Fully resolved configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub geometry: MotorGeometry,
    pub winding: Winding,
    pub materials: MaterialSet,
    /// Source file of the B-H curve; `None` for the bundled steel.
    pub bh_curve_path: Option<PathBuf>,
    pub curve: BhCurve,
    pub solver: NonlinearConfig,
    pub currents: Vec<f64>,
    pub sweep: SweepSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        let geometry = MotorGeometry::default();
        Self {
            winding: Winding::from_geometry(&geometry),
            geometry,
            materials: MaterialSet::default(),
            bh_curve_path: None,
            curve: BhCurve::default_steel(),
            solver: NonlinearConfig::default(),
            currents: DEFAULT_CURRENTS.to_vec(),
            sweep: SweepSettings::default(),
        }
    }
}

/// Takes a value from the raw section or logs the default it keeps.
macro_rules! fill {
    ($section:literal, $raw:expr, $target:expr, $($key:ident),+) => {
        $(
            match $raw.$key {
                Some(v) => $target.$key = v,
                None => info!("[{}] {} not set, using default {:?}", $section, stringify!($key), $target.$key),
            }
        )+
    };
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text, path.parent())
    }

    /// Parses config text. A relative `bh_curve` path resolves against `base`.
    pub fn from_toml_str(text: &str, base: Option<&Path>) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text)?;
        let mut cfg = Self::default();

        let g = raw.geometry;
        fill!(
            "geometry", g, cfg.geometry,
            stator_outer_diameter, stator_yoke_thickness, stator_pole_height, airgap_length,
            rotor_pole_height, stator_tooth_arc, rotor_pole_arc, stack_length, pm_width, pm_length,
            turns_per_pole, stator_teeth_count, rotor_poles_count
        );
        cfg.geometry.validate()?;
        cfg.winding = Winding::from_geometry(&cfg.geometry);
        match g.series_coils {
            Some(0) => {
                return Err(ConfigError::Invalid {
                    section: "geometry",
                    key: "series_coils",
                    reason: "must be at least 1".into(),
                })
            }
            Some(n) => cfg.winding.series_coils = n,
            None => info!("[geometry] series_coils not set, using default {DEFAULT_SERIES_COILS}"),
        }

        let m = raw.materials;
        fill!(
            "materials", m, cfg.materials,
            vacuum_permeability, iron_relative_permeability, pm_remanence, pm_relative_permeability
        );
        if m.pm_coercivity.is_some() {
            cfg.materials.pm_coercivity = m.pm_coercivity;
        } else {
            info!("[materials] pm_coercivity not set, deriving {:.6e} A/m from remanence", cfg.materials.coercivity());
        }
        cfg.materials.validate()?;
        match m.bh_curve {
            Some(p) => {
                let p = match base {
                    Some(dir) if p.is_relative() => dir.join(p),
                    _ => p,
                };
                cfg.curve = BhCurve::from_path(&p)?;
                cfg.bh_curve_path = Some(p);
            }
            None => info!("[materials] bh_curve not set, using the bundled steel curve"),
        }

        let s = raw.solver;
        fill!("solver", s, cfg.solver, tolerance, max_iterations, relaxation, condition_bound);
        cfg.solver.validate()?;

        let w = raw.sweep;
        fill!("sweep", w, cfg.sweep, angle_step, angle_start, current_points);
        match w.currents {
            Some(c) => cfg.currents = c,
            None => info!("[sweep] currents not set, using default {:?}", cfg.currents),
        }
        cfg.validate_sweep()?;
        Ok(cfg)
    }

    fn validate_sweep(&self) -> Result<(), ConfigError> {
        let invalid = |key, reason: &str| ConfigError::Invalid {
            section: "sweep",
            key,
            reason: reason.into(),
        };
        if self.currents.is_empty() {
            return Err(invalid("currents", "list is empty"));
        }
        if self.currents.iter().any(|i| !(i.is_finite() && *i >= 0.0)) {
            return Err(invalid("currents", "values must be finite and non-negative"));
        }
        self.sweep
            .samples_per_period(self.geometry.rotor_pole_pitch())
            .map_err(|e| invalid("angle_step", &e.to_string()))?;
        Ok(())
    }

    /// Every resolved value in a fixed order, one `section.key = value`
    /// per line. Floats print in shortest round-trip form.
    pub fn canonical(&self) -> String {
        let g = &self.geometry;
        let m = &self.materials;
        let s = &self.solver;
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("geometry.stator_outer_diameter", g.stator_outer_diameter.to_string());
        line("geometry.stator_yoke_thickness", g.stator_yoke_thickness.to_string());
        line("geometry.stator_pole_height", g.stator_pole_height.to_string());
        line("geometry.airgap_length", g.airgap_length.to_string());
        line("geometry.rotor_pole_height", g.rotor_pole_height.to_string());
        line("geometry.stator_tooth_arc", g.stator_tooth_arc.to_string());
        line("geometry.rotor_pole_arc", g.rotor_pole_arc.to_string());
        line("geometry.stack_length", g.stack_length.to_string());
        line("geometry.pm_width", g.pm_width.to_string());
        line("geometry.pm_length", g.pm_length.to_string());
        line("geometry.turns_per_pole", g.turns_per_pole.to_string());
        line("geometry.stator_teeth_count", g.stator_teeth_count.to_string());
        line("geometry.rotor_poles_count", g.rotor_poles_count.to_string());
        line("geometry.series_coils", self.winding.series_coils.to_string());
        line("materials.vacuum_permeability", m.vacuum_permeability.to_string());
        line("materials.iron_relative_permeability", m.iron_relative_permeability.to_string());
        line("materials.pm_remanence", m.pm_remanence.to_string());
        line("materials.pm_relative_permeability", m.pm_relative_permeability.to_string());
        line("materials.pm_coercivity", m.coercivity().to_string());
        let curve: Vec<String> = self.curve.samples().map(|(h, b)| format!("{h}:{b}")).collect();
        line("materials.bh_curve", curve.join(","));
        line("solver.tolerance", s.tolerance.to_string());
        line("solver.max_iterations", s.max_iterations.to_string());
        line("solver.relaxation", s.relaxation.to_string());
        line("solver.condition_bound", s.condition_bound.to_string());
        let currents: Vec<String> = self.currents.iter().map(f64::to_string).collect();
        line("sweep.currents", currents.join(","));
        line("sweep.angle_step", self.sweep.angle_step.to_string());
        line("sweep.angle_start", self.sweep.angle_start.to_string());
        line("sweep.current_points", self.sweep.current_points.to_string());
        out
    }

    /// SHA-256 of the canonical form, as lowercase hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
