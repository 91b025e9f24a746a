//! Iron saturation: B-H curves and the fixed-point solve of the phase network
//! with flux-dependent iron reluctances.
//!
//! Each iron element gets its own permeability from its own flux density, so
//! the yoke segment that carries magnet flux alone can saturate independently
//! of the poles. Magnets and air gaps stay linear.

use std::io::Read;
use std::path::Path;

use thiserror::Error;

use crate::model::circuit::HemtsrmCircuit;
use crate::model::flux::path_area;
use crate::model::geometry::{FluxPath, PathSet};
use crate::model::{
    airgap_reluctance, sources, ElementKind, FluxSolution, MaterialSet, ModelError, MotorGeometry,
    OperatingPoint, SourceSet, MU0,
};
use crate::network::{solve_linear_bounded, MeshFluxes, DEFAULT_CONDITION_BOUND};

const DEFAULT_CURVE_CSV: &str = include_str!("../data/m19_bh.csv");

/// Step halvings tried by the line search.
const MAX_BACKTRACKS: usize = 40;

/// Iteration changes kept for non-convergence diagnostics.
const HISTORY_LEN: usize = 8;

#[derive(Debug, Error)]
pub enum SaturationError {
    #[error("invalid B-H curve: {0}")]
    InvalidCurve(String),
    #[error("cannot read B-H curve {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed B-H curve: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid solver setting `{field}`: {reason}")]
    InvalidConfig {
        field: &'static str,
        reason: &'static str,
    },
    #[error(
        "no convergence at {current} A, {angle} deg after {iterations} iterations \
         (last relative change {last_change:.3e}, relaxation {relaxation}, recent changes {history:?})"
    )]
    NotConverged {
        current: f64,
        angle: f64,
        iterations: usize,
        last_change: f64,
        relaxation: f64,
        history: Vec<f64>,
        last_mesh: [f64; 5],
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<crate::network::NetworkError> for SaturationError {
    fn from(e: crate::network::NetworkError) -> Self {
        Self::Model(ModelError::Network(e))
    }
}

/// Monotone B-H samples, interpolated piecewise-linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct BhCurve {
    h: Vec<f64>,
    b: Vec<f64>,
    /// Incremental permeability past the last sample.
    tail_permeability: f64,
}

impl BhCurve {
    /// Builds a curve from samples, prepending the origin when absent. Past
    /// the last sample the curve continues with slope μ0.
    pub fn new(h: Vec<f64>, b: Vec<f64>) -> Result<Self, SaturationError> {
        Self::with_tail(h, b, MU0)
    }

    fn with_tail(mut h: Vec<f64>, mut b: Vec<f64>, tail: f64) -> Result<Self, SaturationError> {
        if h.len() != b.len() {
            return Err(SaturationError::InvalidCurve(format!(
                "{} H values but {} B values",
                h.len(),
                b.len()
            )));
        }
        if h.iter().chain(&b).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(SaturationError::InvalidCurve("samples must be finite and non-negative".into()));
        }
        if h.first() != Some(&0.0) || b.first() != Some(&0.0) {
            h.insert(0, 0.0);
            b.insert(0, 0.0);
        }
        if h.len() < 2 {
            return Err(SaturationError::InvalidCurve("need at least one sample besides the origin".into()));
        }
        for k in 1..h.len() {
            if !(h[k] > h[k - 1] && b[k] > b[k - 1]) {
                return Err(SaturationError::InvalidCurve(format!(
                    "samples must be strictly increasing in H and B (row {k})"
                )));
            }
        }
        Ok(Self {
            h,
            b,
            tail_permeability: tail,
        })
    }

    /// A non-saturating material of constant relative permeability.
    pub fn linear(relative_permeability: f64) -> Result<Self, SaturationError> {
        if !(relative_permeability >= 1.0 && relative_permeability.is_finite()) {
            return Err(SaturationError::InvalidCurve("relative permeability must be at least 1".into()));
        }
        let mu = MU0 * relative_permeability;
        Self::with_tail(vec![0.0, 1.0], vec![0.0, mu], mu)
    }

    /// The bundled M-19-class silicon steel curve.
    pub fn default_steel() -> Self {
        Self::from_reader(DEFAULT_CURVE_CSV.as_bytes()).expect("bundled curve is valid")
    }

    /// Two-column CSV (H in A/m, B in T) with a header row.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, SaturationError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 {
            return Err(SaturationError::InvalidCurve(format!(
                "expected 2 columns, header has {}",
                headers.len()
            )));
        }
        if headers.iter().any(|f| f.parse::<f64>().is_ok()) {
            return Err(SaturationError::InvalidCurve("header row is required".into()));
        }
        let (mut h, mut b) = (Vec::new(), Vec::new());
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let parse = |i: usize| {
                record.get(i).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| {
                    SaturationError::InvalidCurve(format!("row {}: column {} is not a number", row + 2, i + 1))
                })
            };
            h.push(parse(0)?);
            b.push(parse(1)?);
        }
        Self::new(h, b)
    }

    pub fn from_path(path: &Path) -> Result<Self, SaturationError> {
        let file = std::fs::File::open(path).map_err(|source| SaturationError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_reader(file)
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.h.iter().copied().zip(self.b.iter().copied())
    }

    /// Slope of the first segment.
    pub fn initial_permeability(&self) -> f64 {
        self.b[1] / self.h[1]
    }

    /// H(B) by inverse interpolation, extended linearly past the last sample.
    pub fn field_strength(&self, flux_density: f64) -> f64 {
        let b = flux_density.abs();
        let last = self.b.len() - 1;
        if b >= self.b[last] {
            return self.h[last] + (b - self.b[last]) / self.tail_permeability;
        }
        // first index with self.b[k] > b
        let k = self.b.partition_point(|&x| x <= b);
        let (b0, b1, h0, h1) = (self.b[k - 1], self.b[k], self.h[k - 1], self.h[k]);
        h0 + (b - b0) * (h1 - h0) / (b1 - b0)
    }

    /// Stored energy density ∫₀^B H dB in J/m³.
    pub fn energy_density(&self, flux_density: f64) -> f64 {
        let b = flux_density.abs();
        let mut w = 0.0;
        for k in 1..self.b.len() {
            if b <= self.b[k] {
                let h = self.field_strength(b);
                return w + 0.5 * (self.h[k - 1] + h) * (b - self.b[k - 1]);
            }
            w += 0.5 * (self.h[k - 1] + self.h[k]) * (self.b[k] - self.b[k - 1]);
        }
        let last = self.b.len() - 1;
        let db = b - self.b[last];
        w + self.h[last] * db + 0.5 * db * db / self.tail_permeability
    }

    /// Secant permeability B/H(B) in H/m.
    pub fn chord_permeability(&self, flux_density: f64) -> f64 {
        let b = flux_density.abs();
        if b == 0.0 {
            return self.initial_permeability();
        }
        b / self.field_strength(b)
    }
}

/// Secant permeability of `curve` at flux density `b` (T).
pub fn chord_permeability(curve: &BhCurve, b: f64) -> f64 {
    curve.chord_permeability(b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearConfig {
    /// Relative change of mesh fluxes between iterations that counts as converged.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Initial under-relaxation factor in (0, 1].
    pub relaxation: f64,
    pub condition_bound: f64,
}

impl Default for NonlinearConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 200,
            relaxation: 0.5,
            condition_bound: DEFAULT_CONDITION_BOUND,
        }
    }
}

impl NonlinearConfig {
    pub fn validate(&self) -> Result<(), SaturationError> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(SaturationError::InvalidConfig {
                field: "tolerance",
                reason: "must be positive",
            });
        }
        if self.max_iterations == 0 {
            return Err(SaturationError::InvalidConfig {
                field: "max_iterations",
                reason: "must be at least 1",
            });
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(SaturationError::InvalidConfig {
                field: "relaxation",
                reason: "must lie in (0, 1]",
            });
        }
        if !(self.condition_bound >= 1.0) {
            return Err(SaturationError::InvalidConfig {
                field: "condition_bound",
                reason: "must be at least 1",
            });
        }
        Ok(())
    }
}

/// Converged per-element reluctances and mesh fluxes.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearState {
    pub reluctances: Vec<f64>,
    pub mesh: [f64; 5],
    pub sources: SourceSet,
    pub iterations: usize,
}

impl NonlinearState {
    /// Flux through one excited stator pole.
    pub fn pole_flux(&self) -> f64 {
        self.mesh[1] - self.mesh[0]
    }
}

/// Reusable solver for one motor, curve and configuration.
#[derive(Debug, Clone)]
pub struct NonlinearSolver {
    geometry: MotorGeometry,
    materials: MaterialSet,
    curve: BhCurve,
    config: NonlinearConfig,
    paths: PathSet,
    kinds: Vec<ElementKind>,
    /// Iron path of each element, `None` for linear elements.
    iron: Vec<Option<FluxPath>>,
    magnet_reluctance: f64,
}

impl NonlinearSolver {
    pub fn new(
        geometry: &MotorGeometry,
        materials: &MaterialSet,
        curve: &BhCurve,
        config: &NonlinearConfig,
    ) -> Result<Self, SaturationError> {
        geometry.validate()?;
        materials.validate()?;
        config.validate()?;
        let paths = geometry.paths();
        let circuit = HemtsrmCircuit::get();
        let kinds: Vec<ElementKind> = circuit.element_kinds().collect();
        let iron = kinds
            .iter()
            .map(|&k| match k {
                ElementKind::StatorYoke => Some(paths.stator_yoke),
                ElementKind::StatorPole => Some(paths.stator_pole),
                ElementKind::RotorYoke => Some(paths.rotor_yoke),
                ElementKind::Airgap | ElementKind::Magnet => None,
            })
            .collect();
        let magnet_reluctance = paths
            .magnet
            .reluctance(materials.vacuum_permeability * materials.pm_relative_permeability);
        Ok(Self {
            geometry: geometry.clone(),
            materials: materials.clone(),
            curve: curve.clone(),
            config: *config,
            paths,
            kinds,
            iron,
            magnet_reluctance,
        })
    }

    pub fn geometry(&self) -> &MotorGeometry {
        &self.geometry
    }

    pub fn materials(&self) -> &MaterialSet {
        &self.materials
    }

    pub fn config(&self) -> &NonlinearConfig {
        &self.config
    }

    /// Starting reluctances: iron at the initial permeability of the curve.
    pub fn initial_reluctances(&self, angle_deg: f64) -> Vec<f64> {
        let mu_iron = self.curve.initial_permeability();
        let gap = airgap_reluctance(&self.geometry, &self.materials, angle_deg);
        self.kinds
            .iter()
            .zip(&self.iron)
            .map(|(&k, path)| match (k, path) {
                (_, Some(p)) => p.reluctance(mu_iron),
                (ElementKind::Airgap, None) => gap,
                _ => self.magnet_reluctance,
            })
            .collect()
    }

    /// Reluctances implied by the element fluxes through the B-H curve.
    fn target_reluctances(&self, current: &[f64], element_flux: &[f64]) -> Vec<f64> {
        self.iron
            .iter()
            .zip(current.iter().zip(element_flux))
            .map(|(path, (&r, &flux))| match path {
                Some(p) => p.reluctance(self.curve.chord_permeability(flux / p.area)),
                None => r,
            })
            .collect()
    }

    /// Fixed-point solve at a current and angle, optionally warm-started
    /// from earlier reluctances. The angle is taken modulo the pole pitch.
    pub fn solve_state(
        &self,
        phase_current: f64,
        angle_deg: f64,
        warm: Option<&[f64]>,
    ) -> Result<NonlinearState, SaturationError> {
        let circuit = HemtsrmCircuit::get();
        let s = sources(&self.geometry, &self.materials, phase_current);
        let mut reluctances = match warm {
            Some(w) if w.len() == self.kinds.len() => {
                // Air gap follows the angle, not the warm start.
                let gap = airgap_reluctance(&self.geometry, &self.materials, angle_deg);
                w.iter()
                    .zip(&self.kinds)
                    .map(|(&r, &k)| if k == ElementKind::Airgap { gap } else { r })
                    .collect()
            }
            _ => self.initial_reluctances(angle_deg),
        };
        let bound = self.config.condition_bound;
        let solve = |r: &[f64]| -> Result<Vec<f64>, SaturationError> {
            Ok(solve_linear_bounded(&circuit.assemble(r, &s)?, bound)?.0)
        };

        let mut phi = solve(&reluctances)?;
        let mut relaxation = self.config.relaxation;
        let mut history = Vec::with_capacity(HISTORY_LEN);
        let mut performed = 0;

        for iteration in 1..=self.config.max_iterations {
            performed = iteration;
            let flux = circuit.element_fluxes(&MeshFluxes(phi.clone()));
            reluctances = self.target_reluctances(&reluctances, &flux);
            let full = solve(&reluctances)?;

            let scale = full.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let delta = full.iter().zip(&phi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let change = if scale == 0.0 { 0.0 } else { delta / scale };
            if history.len() == HISTORY_LEN {
                history.remove(0);
            }
            history.push(change);

            if change <= self.config.tolerance {
                // The undamped solve is exact for the reluctances just set.
                let mut mesh = [0.0; 5];
                mesh.copy_from_slice(&full);
                return Ok(NonlinearState {
                    reluctances,
                    mesh,
                    sources: s,
                    iterations: iteration,
                });
            }

            // The mesh equations are the stationarity condition of a convex
            // magnetic energy and the chord step points downhill on it. The
            // step is shortened from the configured relaxation until the
            // energy is still falling at its end, so the energy decreases on
            // every iteration.
            let direction: Vec<f64> = full.iter().zip(&phi).map(|(a, b)| a - b).collect();
            let rhs = circuit.assemble(&reluctances, &s)?.rhs().to_vec();
            relaxation = self.config.relaxation;
            for _ in 0..MAX_BACKTRACKS {
                let trial: Vec<f64> = phi.iter().zip(&direction).map(|(p, d)| p + relaxation * d).collect();
                if self.energy_slope(&trial, &direction, &reluctances, &rhs) <= 0.0 {
                    break;
                }
                relaxation *= 0.5;
            }
            for (p, d) in phi.iter_mut().zip(&direction) {
                *p += relaxation * d;
            }
        }

        let mut last_mesh = [0.0; 5];
        last_mesh.copy_from_slice(&phi);
        Err(SaturationError::NotConverged {
            current: phase_current,
            angle: angle_deg,
            iterations: performed,
            last_change: history.last().copied().unwrap_or(f64::NAN),
            relaxation,
            history,
            last_mesh,
        })
    }

    /// Derivative of the magnetic energy at `mesh` along `direction`: the
    /// MMF drops of all elements weighted by their flux change, minus the
    /// source work.
    fn energy_slope(&self, mesh: &[f64], direction: &[f64], reluctances: &[f64], rhs: &[f64]) -> f64 {
        let circuit = HemtsrmCircuit::get();
        let flux = circuit.element_fluxes(&MeshFluxes(mesh.to_vec()));
        let step = circuit.element_fluxes(&MeshFluxes(direction.to_vec()));
        let mut drop = 0.0;
        for (((path, &r), &f), &d) in self.iron.iter().zip(reluctances).zip(&flux).zip(&step) {
            let mmf = match path {
                Some(p) => p.length * self.curve.field_strength(f / p.area).copysign(f),
                None => r * f,
            };
            drop += mmf * d;
        }
        drop - dot(rhs, direction)
    }

    /// Coenergy of the whole network at fixed sources: source work minus
    /// stored energy, which equals `½·b·φ` for linear iron.
    pub fn network_coenergy(&self, state: &NonlinearState) -> f64 {
        let circuit = HemtsrmCircuit::get();
        let flux = circuit.element_fluxes(&MeshFluxes(state.mesh.to_vec()));
        let system = match circuit.assemble(&state.reluctances, &state.sources) {
            Ok(sys) => sys,
            Err(_) => return f64::NAN,
        };
        let mut stored = 0.0;
        for ((path, &r), &f) in self.iron.iter().zip(&state.reluctances).zip(&flux) {
            stored += match path {
                Some(p) => p.length * p.area * self.curve.energy_density(f / p.area),
                None => 0.5 * r * f * f,
            };
        }
        dot(system.rhs(), &state.mesh) - stored
    }

    /// Full solution with coil/magnet decomposition at frozen permeability.
    pub fn solve(&self, op: &OperatingPoint, warm: Option<&[f64]>) -> Result<FluxSolution, SaturationError> {
        let state = self.solve_state(op.phase_current, op.rotor_angle, warm)?;
        Ok(self.expand(&state)?)
    }

    /// Recomputes the decomposed solution for converged reluctances.
    pub fn expand(&self, state: &NonlinearState) -> Result<FluxSolution, ModelError> {
        FluxSolution::from_reluctances(
            &state.reluctances,
            state.sources,
            Some(&self.paths),
            state.iterations,
            self.config.condition_bound,
        )
    }

    /// Flux density in every element with a fixed cross-section.
    pub fn flux_densities(&self, state: &NonlinearState) -> Vec<Option<f64>> {
        let circuit = HemtsrmCircuit::get();
        let flux = circuit.element_fluxes(&MeshFluxes(state.mesh.to_vec()));
        self.kinds
            .iter()
            .zip(flux)
            .map(|(&k, f)| path_area(&self.paths, k).map(|a| f / a))
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Saturating solve at one operating point.
pub fn solve_nonlinear(
    geometry: &MotorGeometry,
    materials: &MaterialSet,
    curve: &BhCurve,
    op: &OperatingPoint,
    config: &NonlinearConfig,
) -> Result<FluxSolution, SaturationError> {
    NonlinearSolver::new(geometry, materials, curve, config)?.solve(op, None)
}
