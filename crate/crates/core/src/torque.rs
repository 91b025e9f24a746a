//! Flux linkage, coenergy and static torque.
//!
//! Torque at constant current is the angle derivative of the coenergy
//! `W′(i, θ) = ∫₀^i λ(i′, θ) di′`, taken by central differences over a grid
//! of saturating network solves. Coenergy is measured from the zero-current
//! state at each angle, so the magnet-only state contributes to torque only
//! through its interaction with the coil current. Cogging at zero current is
//! computed separately from the network coenergy.

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{FluxSolution, MaterialSet, MotorGeometry};
use crate::saturation::{BhCurve, NonlinearConfig, NonlinearSolver, SaturationError};

/// Pole coils in series per phase: two C-cores with two excited poles each.
pub const DEFAULT_SERIES_COILS: u32 = 4;
pub const DEFAULT_CURRENT_POINTS: usize = 33;
pub const DEFAULT_ANGLE_STEP: f64 = 0.25;

/// Relative slack when matching angles to grid points or periods to steps.
const GRID_MATCH: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TorqueError {
    #[error("solve failed at {current} A, {angle} deg: {source}")]
    Solve {
        current: f64,
        angle: f64,
        #[source]
        source: SaturationError,
    },
    #[error(transparent)]
    Setup(#[from] SaturationError),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("current {current} A outside the grid [0, {max}] A")]
    CurrentOutOfRange { current: f64, max: f64 },
    #[error("angle {0} deg is not a grid angle")]
    AngleNotOnGrid(f64),
    #[error("invalid sweep setting: {0}")]
    Settings(String),
}

/// Series turns linking the pole flux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Winding {
    pub turns_per_pole: u32,
    pub series_coils: u32,
}

impl Winding {
    pub fn from_geometry(geometry: &MotorGeometry) -> Self {
        Self {
            turns_per_pole: geometry.turns_per_pole,
            series_coils: DEFAULT_SERIES_COILS,
        }
    }

    /// Flux linkage per unit pole flux.
    pub fn coefficient(&self) -> f64 {
        f64::from(self.turns_per_pole) * f64::from(self.series_coils)
    }
}

/// Flux linkage of the phase in Wb-turns.
pub fn flux_linkage(solution: &FluxSolution, winding: &Winding) -> f64 {
    winding.coefficient() * solution.branch.pole
}

/// λ sampled on a current × angle grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxLinkageGrid {
    currents: Vec<f64>,
    angles: Vec<f64>,
    /// Row-major by angle: `lambda[a * currents.len() + c]`.
    lambda: Vec<f64>,
}

impl FluxLinkageGrid {
    pub fn new(currents: Vec<f64>, angles: Vec<f64>, lambda: Vec<f64>) -> Result<Self, TorqueError> {
        if currents.first() != Some(&0.0) {
            return Err(TorqueError::Grid("current grid must start at 0 A".into()));
        }
        if currents.windows(2).any(|w| !(w[1] > w[0])) && currents.len() > 1 {
            return Err(TorqueError::Grid("currents must be strictly ascending".into()));
        }
        if angles.is_empty() || angles.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(TorqueError::Grid("angles must be non-empty and strictly ascending".into()));
        }
        if lambda.len() != currents.len() * angles.len() {
            return Err(TorqueError::Grid(format!(
                "expected {} flux linkage values, got {}",
                currents.len() * angles.len(),
                lambda.len()
            )));
        }
        Ok(Self {
            currents,
            angles,
            lambda,
        })
    }

    /// Samples `f(current, angle)` on the grid.
    pub fn from_fn(
        currents: Vec<f64>,
        angles: Vec<f64>,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self, TorqueError> {
        let lambda = angles
            .iter()
            .flat_map(|&a| currents.iter().map(move |&c| (c, a)))
            .map(|(c, a)| f(c, a))
            .collect();
        Self::new(currents, angles, lambda)
    }

    pub fn currents(&self) -> &[f64] {
        &self.currents
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn lambda(&self, current_index: usize, angle_index: usize) -> f64 {
        self.lambda[angle_index * self.currents.len() + current_index]
    }

    fn row(&self, angle_index: usize) -> &[f64] {
        let n = self.currents.len();
        &self.lambda[angle_index * n..(angle_index + 1) * n]
    }

    pub fn angle_index(&self, angle: f64) -> Option<usize> {
        let span = (self.angles[self.angles.len() - 1] - self.angles[0]).abs().max(1.0);
        self.angles
            .iter()
            .position(|&a| (a - angle).abs() <= GRID_MATCH * span)
    }

    /// Trapezoidal coenergy at a grid angle, J.
    fn coenergy_at(&self, current: f64, angle_index: usize) -> Result<f64, TorqueError> {
        let max = self.currents[self.currents.len() - 1];
        if !(current >= 0.0 && current <= max) {
            return Err(TorqueError::CurrentOutOfRange { current, max });
        }
        let row = self.row(angle_index);
        let mut w = 0.0;
        for k in 1..self.currents.len() {
            let (i0, i1) = (self.currents[k - 1], self.currents[k]);
            if current <= i0 {
                break;
            }
            let (l0, l1) = (row[k - 1], row[k]);
            if current >= i1 {
                w += 0.5 * (l0 + l1) * (i1 - i0);
            } else {
                let l = l0 + (l1 - l0) * (current - i0) / (i1 - i0);
                w += 0.5 * (l0 + l) * (current - i0);
            }
        }
        Ok(w)
    }
}

/// Coenergy `∫₀^i λ di` at a grid angle, J. Zero at zero current.
pub fn coenergy(grid: &FluxLinkageGrid, current: f64, angle: f64) -> Result<f64, TorqueError> {
    let a = grid.angle_index(angle).ok_or(TorqueError::AngleNotOnGrid(angle))?;
    grid.coenergy_at(current, a)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorqueSample {
    pub torque: f64,
    /// Set when the angle sits on the grid edge and a one-sided difference was used.
    pub one_sided: bool,
}

/// Torque at constant current from neighbouring grid angles, N·m.
pub fn static_torque(grid: &FluxLinkageGrid, current: f64, angle: f64) -> Result<TorqueSample, TorqueError> {
    let a = grid.angle_index(angle).ok_or(TorqueError::AngleNotOnGrid(angle))?;
    let n = grid.angles.len();
    if n < 2 {
        return Err(TorqueError::Grid("need at least two angles".into()));
    }
    let (lo, hi) = (a.saturating_sub(1), (a + 1).min(n - 1));
    let dw = grid.coenergy_at(current, hi)? - grid.coenergy_at(current, lo)?;
    let dtheta = (grid.angles[hi] - grid.angles[lo]).to_radians();
    Ok(TorqueSample {
        torque: dw / dtheta,
        one_sided: hi - lo == 1,
    })
}

/// Angle and current grids of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSettings {
    pub current_points: usize,
    /// Angle step in degrees; must divide the rotor pole pitch.
    pub angle_step: f64,
    /// First angle of the window, degrees from unaligned.
    pub angle_start: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            current_points: DEFAULT_CURRENT_POINTS,
            angle_step: DEFAULT_ANGLE_STEP,
            angle_start: 0.0,
        }
    }
}

impl SweepSettings {
    /// Number of torque samples in one period.
    pub fn samples_per_period(&self, period: f64) -> Result<usize, TorqueError> {
        if self.current_points < 2 {
            return Err(TorqueError::Settings("need at least two current points".into()));
        }
        if !(self.angle_step > 0.0 && self.angle_step.is_finite()) {
            return Err(TorqueError::Settings("angle step must be positive".into()));
        }
        if !self.angle_start.is_finite() {
            return Err(TorqueError::Settings("angle start must be finite".into()));
        }
        let n = (period / self.angle_step).round();
        if n < 2.0 || (n * self.angle_step - period).abs() > GRID_MATCH * period {
            return Err(TorqueError::Settings(format!(
                "angle step {} does not divide the period {period}",
                self.angle_step
            )));
        }
        Ok(n as usize)
    }

    /// One period of sample angles.
    pub fn sample_angles(&self, period: f64) -> Result<Vec<f64>, TorqueError> {
        let n = self.samples_per_period(period)?;
        Ok((0..n).map(|k| self.angle_start + k as f64 * self.angle_step).collect())
    }
}

/// Torque against angle over one period at fixed current.
#[derive(Debug, Clone, PartialEq)]
pub struct TorqueCurve {
    pub current: f64,
    pub angles: Vec<f64>,
    pub torque: Vec<f64>,
    /// Mean of |T| over the period.
    pub mean_torque: f64,
    /// Largest |T|.
    pub peak_torque: f64,
}

impl TorqueCurve {
    /// The signed torque of a full period averages to zero, so the mean is
    /// taken over its magnitude, i.e. the average motoring torque when the
    /// phase is switched over its positive half.
    pub fn new(current: f64, angles: Vec<f64>, torque: Vec<f64>) -> Self {
        let mean_torque = if torque.is_empty() {
            0.0
        } else {
            torque.iter().map(|t| t.abs()).sum::<f64>() / torque.len() as f64
        };
        let peak_torque = torque.iter().map(|t| t.abs()).fold(0.0, f64::max);
        Self {
            current,
            angles,
            torque,
            mean_torque,
            peak_torque,
        }
    }

    /// Signed arithmetic mean, zero for an exact period up to rounding.
    pub fn signed_mean(&self) -> f64 {
        self.torque.iter().sum::<f64>() / self.torque.len().max(1) as f64
    }
}

/// Mean torque split into coil and magnet parts. `pm_contribution` is
/// `total - coil_only`, so the parts sum to the total exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorqueComponents {
    pub total: f64,
    pub coil_only: f64,
    pub pm_contribution: f64,
}

impl TorqueComponents {
    pub fn from_means(total: f64, coil_only: f64) -> Self {
        Self {
            total,
            coil_only,
            pm_contribution: total - coil_only,
        }
    }

    pub fn pm_share(&self) -> f64 {
        if self.total == 0.0 {
            0.0
        } else {
            self.pm_contribution / self.total
        }
    }
}

/// Total and coil-only torque curves on the same grids.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub total: TorqueCurve,
    pub coil_only: TorqueCurve,
}

impl SweepResult {
    pub fn magnet_torque(&self) -> Vec<f64> {
        self.total
            .torque
            .iter()
            .zip(&self.coil_only.torque)
            .map(|(t, c)| t - c)
            .collect()
    }

    pub fn components(&self) -> TorqueComponents {
        TorqueComponents::from_means(self.total.mean_torque, self.coil_only.mean_torque)
    }
}

/// A motor ready for torque sweeps: one saturating solver with magnets and
/// one with the magnets removed.
#[derive(Debug, Clone)]
pub struct TorqueModel {
    hybrid: NonlinearSolver,
    coil_only: NonlinearSolver,
    winding: Winding,
    period: f64,
}

impl TorqueModel {
    pub fn new(
        geometry: &MotorGeometry,
        materials: &MaterialSet,
        curve: &BhCurve,
        config: &NonlinearConfig,
    ) -> Result<Self, TorqueError> {
        Ok(Self {
            hybrid: NonlinearSolver::new(geometry, materials, curve, config)?,
            coil_only: NonlinearSolver::new(geometry, &materials.without_magnets(), curve, config)?,
            winding: Winding::from_geometry(geometry),
            period: geometry.rotor_pole_pitch(),
        })
    }

    pub fn with_winding(mut self, winding: Winding) -> Self {
        self.winding = winding;
        self
    }

    pub fn winding(&self) -> &Winding {
        &self.winding
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn solver(&self) -> &NonlinearSolver {
        &self.hybrid
    }

    /// Flux linkage on `[0, current] × angles`, solved in parallel across
    /// angles and warm-started along the current axis.
    fn grid(
        solver: &NonlinearSolver,
        winding: &Winding,
        current: f64,
        points: usize,
        angles: Vec<f64>,
    ) -> Result<FluxLinkageGrid, TorqueError> {
        let currents: Vec<f64> = if current == 0.0 {
            vec![0.0]
        } else {
            (0..points)
                .map(|k| current * k as f64 / (points - 1) as f64)
                .collect()
        };
        let coefficient = winding.coefficient();
        let rows: Vec<Vec<f64>> = angles
            .par_iter()
            .map(|&angle| {
                let mut warm: Option<Vec<f64>> = None;
                let mut row = Vec::with_capacity(currents.len());
                for &i in &currents {
                    let state = solver
                        .solve_state(i, angle, warm.as_deref())
                        .map_err(|source| TorqueError::Solve {
                            current: i,
                            angle,
                            source,
                        })?;
                    row.push(coefficient * state.pole_flux());
                    warm = Some(state.reluctances);
                }
                Ok(row)
            })
            .collect::<Result<_, TorqueError>>()?;
        FluxLinkageGrid::new(currents, angles, rows.concat())
    }

    /// The padded angle grid: one step either side of the sample window so
    /// every sample has a central difference.
    fn padded_angles(&self, settings: &SweepSettings) -> Result<Vec<f64>, TorqueError> {
        let n = settings.samples_per_period(self.period)?;
        Ok((0..n + 2)
            .map(|k| settings.angle_start + (k as f64 - 1.0) * settings.angle_step)
            .collect())
    }

    pub fn flux_linkage_grid(&self, current: f64, settings: &SweepSettings) -> Result<FluxLinkageGrid, TorqueError> {
        check_current(current)?;
        let angles = self.padded_angles(settings)?;
        Self::grid(&self.hybrid, &self.winding, current, settings.current_points, angles)
    }

    fn curve_with(
        &self,
        solver: &NonlinearSolver,
        current: f64,
        settings: &SweepSettings,
    ) -> Result<TorqueCurve, TorqueError> {
        check_current(current)?;
        let angles = self.padded_angles(settings)?;
        let grid = Self::grid(solver, &self.winding, current, settings.current_points, angles)?;
        let n = grid.angles.len();
        let mut torque = Vec::with_capacity(n - 2);
        for a in 1..n - 1 {
            let dw = grid.coenergy_at(current, a + 1)? - grid.coenergy_at(current, a - 1)?;
            torque.push(dw / (grid.angles[a + 1] - grid.angles[a - 1]).to_radians());
        }
        Ok(TorqueCurve::new(current, grid.angles[1..n - 1].to_vec(), torque))
    }

    pub fn torque_curve(&self, current: f64, settings: &SweepSettings) -> Result<TorqueCurve, TorqueError> {
        self.curve_with(&self.hybrid, current, settings)
    }

    pub fn coil_only_curve(&self, current: f64, settings: &SweepSettings) -> Result<TorqueCurve, TorqueError> {
        self.curve_with(&self.coil_only, current, settings)
    }

    pub fn sweep(&self, current: f64, settings: &SweepSettings) -> Result<SweepResult, TorqueError> {
        Ok(SweepResult {
            total: self.torque_curve(current, settings)?,
            coil_only: self.coil_only_curve(current, settings)?,
        })
    }

    /// Zero-current torque from the angle derivative of the network
    /// coenergy with the magnets as the only source.
    pub fn cogging_curve(&self, settings: &SweepSettings) -> Result<TorqueCurve, TorqueError> {
        let angles = self.padded_angles(settings)?;
        let energy: Vec<f64> = angles
            .par_iter()
            .map(|&angle| {
                self.hybrid
                    .solve_state(0.0, angle, None)
                    .map(|s| self.hybrid.network_coenergy(&s))
                    .map_err(|source| TorqueError::Solve {
                        current: 0.0,
                        angle,
                        source,
                    })
            })
            .collect::<Result<_, _>>()?;
        let n = angles.len();
        let torque = (1..n - 1)
            .map(|a| (energy[a + 1] - energy[a - 1]) / (angles[a + 1] - angles[a - 1]).to_radians())
            .collect();
        Ok(TorqueCurve::new(0.0, angles[1..n - 1].to_vec(), torque))
    }
}

fn check_current(current: f64) -> Result<(), TorqueError> {
    if current >= 0.0 && current.is_finite() {
        Ok(())
    } else {
        Err(TorqueError::Settings(format!("current must be non-negative, got {current}")))
    }
}

/// Torque curve of the saturating motor at one current.
pub fn torque_angle_sweep(
    geometry: &MotorGeometry,
    materials: &MaterialSet,
    curve: &BhCurve,
    config: &NonlinearConfig,
    current: f64,
    settings: &SweepSettings,
) -> Result<TorqueCurve, TorqueError> {
    TorqueModel::new(geometry, materials, curve, config)?.torque_curve(current, settings)
}

/// Mean torque with and without magnets at one current.
pub fn torque_components(
    geometry: &MotorGeometry,
    materials: &MaterialSet,
    curve: &BhCurve,
    config: &NonlinearConfig,
    current: f64,
    settings: &SweepSettings,
) -> Result<TorqueComponents, TorqueError> {
    Ok(TorqueModel::new(geometry, materials, curve, config)?
        .sweep(current, settings)?
        .components())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{solve_linear_model, OperatingPoint};

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn flux_linkage_arithmetic() {
        let g = MotorGeometry::default();
        let op = OperatingPoint::new(&g, 3.0, 10.0).unwrap();
        let mut sol = solve_linear_model(&g, &MaterialSet::default(), &op).unwrap();
        sol.branch.pole = 1e-4;
        let w = Winding::from_geometry(&g);
        assert!((flux_linkage(&sol, &w) - 0.056).abs() < 1e-15);
        let doubled = Winding {
            turns_per_pole: 280,
            ..w
        };
        assert_eq!(flux_linkage(&sol, &doubled), 2.0 * flux_linkage(&sol, &w));
        sol.branch.pole = 0.0;
        assert_eq!(flux_linkage(&sol, &w), 0.0);
    }

    #[test]
    fn linear_lambda_coenergy_exact() {
        let l = 0.03;
        let grid = FluxLinkageGrid::from_fn(linspace(0.0, 8.0, 5), vec![0.0, 1.0], |i, _| l * i).unwrap();
        for i in [0.0, 1.3, 4.0, 8.0] {
            let w = coenergy(&grid, i, 1.0).unwrap();
            assert!((w - 0.5 * l * i * i).abs() <= 1e-15, "{i}");
        }
    }

    #[test]
    fn coenergy_range_and_grid_errors() {
        let grid = FluxLinkageGrid::from_fn(linspace(0.0, 2.0, 3), vec![0.0, 1.0], |i, _| i).unwrap();
        assert!(matches!(coenergy(&grid, 2.5, 0.0), Err(TorqueError::CurrentOutOfRange { .. })));
        assert!(matches!(coenergy(&grid, 1.0, 0.5), Err(TorqueError::AngleNotOnGrid(_))));
        assert!(FluxLinkageGrid::new(vec![1.0, 2.0], vec![0.0], vec![0.0, 0.0]).is_err());
        assert!(FluxLinkageGrid::new(vec![0.0, 2.0], vec![0.0], vec![0.0]).is_err());
    }

    #[test]
    fn coenergy_error_is_second_order() {
        // λ = tanh(i): W′(2) = ln cosh 2.
        let exact = 2.0f64.cosh().ln();
        let err = |n: usize| {
            let grid = FluxLinkageGrid::from_fn(linspace(0.0, 2.0, n), vec![0.0], |i, _| i.tanh()).unwrap();
            (coenergy(&grid, 2.0, 0.0).unwrap() - exact).abs()
        };
        let (e1, e2, e3) = (err(17), err(33), err(65));
        assert!((e1 / e2 - 4.0).abs() < 0.1, "{}", e1 / e2);
        assert!((e2 / e3 - 4.0).abs() < 0.1, "{}", e2 / e3);
    }

    #[test]
    fn synthetic_inductance_torque() {
        // λ = L(θ)·i with L(θ) = L0 + L1·cos(kθ), θ in radians.
        let (l0, l1, k, i) = (0.05, 0.02, 18.0, 6.0);
        let angles: Vec<f64> = (0..=80).map(|n| n as f64 * 0.25).collect();
        let grid = FluxLinkageGrid::from_fn(linspace(0.0, i, 33), angles.clone(), |c, a| {
            (l0 + l1 * (k * a.to_radians()).cos()) * c
        })
        .unwrap();
        let peak = 0.5 * i * i * l1 * k;
        for &a in &angles[1..angles.len() - 1] {
            let t = static_torque(&grid, i, a).unwrap();
            assert!(!t.one_sided);
            let exact = -0.5 * i * i * l1 * k * (k * a.to_radians()).sin();
            assert!((t.torque - exact).abs() <= 0.01 * peak, "{a}: {} vs {exact}", t.torque);
        }
        assert!(static_torque(&grid, i, 0.0).unwrap().one_sided);
    }

    #[test]
    fn curve_statistics() {
        let c = TorqueCurve::new(1.0, vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 3.0, -1.0, -3.0]);
        assert_eq!(c.mean_torque, 2.0);
        assert_eq!(c.peak_torque, 3.0);
        assert_eq!(c.signed_mean(), 0.0);
    }

    #[test]
    fn components_sum_exactly() {
        let c = TorqueComponents::from_means(1.0387, 0.9607);
        assert_eq!(c.coil_only + c.pm_contribution, c.total);
    }

    #[test]
    fn settings_validation() {
        let s = SweepSettings::default();
        assert_eq!(s.samples_per_period(20.0).unwrap(), 80);
        let bad = SweepSettings {
            angle_step: 0.3,
            ..s
        };
        assert!(bad.samples_per_period(20.0).is_err());
        let bad = SweepSettings {
            current_points: 1,
            ..s
        };
        assert!(bad.samples_per_period(20.0).is_err());
    }

    #[test]
    fn sweep_torque_vanishes_at_extremes_and_reverses() {
        let g = MotorGeometry::default();
        let model = TorqueModel::new(&g, &MaterialSet::default(), &BhCurve::default_steel(), &NonlinearConfig::default()).unwrap();
        let settings = SweepSettings {
            angle_step: 0.5,
            current_points: 9,
            ..Default::default()
        };
        let curve = model.torque_curve(4.0, &settings).unwrap();
        let at = |deg: f64| curve.torque[curve.angles.iter().position(|&a| (a - deg).abs() < 1e-9).unwrap()];
        let scale = curve.peak_torque;
        assert!(at(0.0).abs() <= 1e-9 * scale);
        assert!(at(10.0).abs() <= 1e-9 * scale);
        assert!(at(8.0) > 0.0 && at(12.0) < 0.0);
        assert!(curve.signed_mean().abs() <= 1e-9 * scale);
    }

    #[test]
    fn zero_current_curve_is_zero() {
        let g = MotorGeometry::default();
        let model = TorqueModel::new(&g, &MaterialSet::default(), &BhCurve::default_steel(), &NonlinearConfig::default()).unwrap();
        let settings = SweepSettings {
            angle_step: 1.0,
            ..Default::default()
        };
        let curve = model.torque_curve(0.0, &settings).unwrap();
        assert!(curve.torque.iter().all(|&t| t == 0.0));
    }
}
