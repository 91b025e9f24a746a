//! Seeded audit of the printed closed-form fluxes against exact elimination.
//!
//! Reluctances are drawn log-uniformly and redrawn as a set until every
//! magnet-dominance ratio clears the threshold. Each sample is solved with
//! rational arithmetic, so the reference carries no rounding beyond the
//! final conversion to `f64`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exact::solve_mesh_exact;
use crate::model::{
    branch_fluxes, build_network, closed_form_branch_fluxes, closed_form_mesh_fluxes, regime_check_with,
    BranchFluxes, HemtsrmCircuit, ModelError, ReluctanceSet, SourceSet, DEFAULT_DOMINANCE_THRESHOLD,
    GAP_REFERENCE, POLE_REFERENCE, YOKE_REFERENCE,
};
use crate::network::MeshFluxes;

pub const DEFAULT_SAMPLES: usize = 1000;
pub const DEFAULT_SEED: u64 = 20240607;

/// Scale applied to push the yoke reluctance to zero and the magnet
/// reluctance to infinity when probing limits.
const LIMIT_SCALE: f64 = 1e20;

#[derive(Debug, Error)]
pub enum FidelityError {
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("invalid sampling range: {0}")]
    Range(&'static str),
    #[error("exact solve found a singular system at sample {0}")]
    Singular(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityConfig {
    pub samples: usize,
    pub seed: u64,
    /// A/Wb
    pub reluctance_range: (f64, f64),
    /// A·turns
    pub source_range: (f64, f64),
    pub dominance_threshold: f64,
}

impl Default for FidelityConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            reluctance_range: (1e2, 1e8),
            source_range: (1.0, 1e4),
            dominance_threshold: DEFAULT_DOMINANCE_THRESHOLD,
        }
    }
}

impl FidelityConfig {
    pub fn validate(&self) -> Result<(), FidelityError> {
        if self.samples == 0 {
            return Err(FidelityError::NoSamples);
        }
        let ok = |(lo, hi): (f64, f64)| lo > 0.0 && hi > lo && hi.is_finite();
        if !ok(self.reluctance_range) {
            return Err(FidelityError::Range("reluctance bounds must satisfy 0 < low < high"));
        }
        if !ok(self.source_range) {
            return Err(FidelityError::Range("source bounds must satisfy 0 < low < high"));
        }
        if !(self.dominance_threshold > 0.0) {
            return Err(FidelityError::Range("dominance threshold must be positive"));
        }
        // the magnet can be at most high/low times the largest iron term
        let spread = self.reluctance_range.1 / self.reluctance_range.0;
        if spread <= 2.0 * self.dominance_threshold {
            return Err(FidelityError::Range("reluctance range too narrow for the dominance threshold"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub reluctances: ReluctanceSet,
    pub sources: SourceSet,
}

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    10f64.powf(rng.random_range(lo.log10()..hi.log10()))
}

/// Regime-valid samples, reproducible from the seed.
pub fn draw_samples(cfg: &FidelityConfig) -> Result<Vec<Sample>, FidelityError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.samples);
    while out.len() < cfg.samples {
        let mut draw = || log_uniform(&mut rng, cfg.reluctance_range);
        let reluctances = ReluctanceSet {
            stator_yoke: draw(),
            stator_pole: draw(),
            rotor_yoke: draw(),
            airgap: draw(),
            magnet: draw(),
        };
        if !regime_check_with(&reluctances, cfg.dominance_threshold).all_pass() {
            continue;
        }
        let sources = SourceSet {
            coil: log_uniform(&mut rng, cfg.source_range),
            magnet: log_uniform(&mut rng, cfg.source_range),
        };
        out.push(Sample { reluctances, sources });
    }
    Ok(out)
}

/// Deviation of `value` from `reference`, relative where the reference is nonzero.
pub fn relative_deviation(value: f64, reference: f64) -> f64 {
    let diff = (value - reference).abs();
    if reference == 0.0 {
        diff
    } else {
        diff / reference.abs()
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityRow {
    pub equation: &'static str,
    pub max_rel_dev: f64,
    pub median_rel_dev: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityReport {
    pub rows: Vec<FidelityRow>,
    pub n_samples: usize,
    pub seed: u64,
}

impl FidelityReport {
    pub fn row(&self, equation: &str) -> Option<&FidelityRow> {
        self.rows.iter().find(|r| r.equation == equation)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("equation,max_rel_dev,median_rel_dev,n_samples,seed\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{:.6e},{:.6e},{},{}\n",
                r.equation, r.max_rel_dev, r.median_rel_dev, self.n_samples, self.seed
            ));
        }
        s
    }
}

/// Row names, in report order.
pub const ROWS: [&str; 14] = [
    "mesh_flux_1",
    "mesh_flux_2",
    "mesh_flux_3",
    "mesh_flux_4",
    "mesh_flux_5",
    "branch_flux_gap",
    "branch_flux_yoke",
    "branch_flux_pole",
    "branch_relations",
    "mesh_symmetry_2_3",
    "mesh_flux_5_vs_2",
    "yoke_flux_limit",
    "gap_pole_flux_limit",
    "gap_pole_flux_yoke_retained",
];

fn exact_mesh(r: &ReluctanceSet, s: &SourceSet, index: usize) -> Result<[f64; 5], FidelityError> {
    let system = build_network(r, s)?;
    let x = solve_mesh_exact(&system).ok_or(FidelityError::Singular(index))?;
    Ok([x[0], x[1], x[2], x[3], x[4]])
}

fn gap_pole_deviation(closed: &BranchFluxes, exact: &BranchFluxes) -> f64 {
    relative_deviation(closed.gap, exact.gap).max(relative_deviation(closed.pole, exact.pole))
}

/// Runs the audit. Rows:
///
/// * `mesh_flux_k`, `branch_flux_*`: printed expression against the exact solve.
/// * `branch_relations`: branch map on mesh fluxes against the element fluxes
///   of the assembled network; definitional, so rounding level.
/// * `mesh_symmetry_2_3`, `mesh_flux_5_vs_2`: exact φ3 and φ5 against exact φ2.
/// * `yoke_flux_limit`: printed yoke flux with yoke reluctance driven to zero
///   and magnet reluctance to infinity.
/// * `gap_pole_flux_limit`: printed gap and pole fluxes in that same limit.
/// * `gap_pole_flux_yoke_retained`: the same with only the magnet reluctance
///   driven to infinity, isolating the yoke term the composites leave out.
pub fn run_fidelity(cfg: &FidelityConfig) -> Result<FidelityReport, FidelityError> {
    let samples = draw_samples(cfg)?;
    let circuit = HemtsrmCircuit::get();
    let yoke = circuit.element_position(YOKE_REFERENCE).expect("reference element");
    let pole = circuit.element_position(POLE_REFERENCE).expect("reference element");
    let gap = circuit.element_position(GAP_REFERENCE).expect("reference element");

    let mut devs: Vec<Vec<f64>> = vec![Vec::with_capacity(samples.len()); ROWS.len()];
    for (k, smp) in samples.iter().enumerate() {
        let (r, s) = (&smp.reluctances, &smp.sources);
        let exact = exact_mesh(r, s, k)?;
        let closed = closed_form_mesh_fluxes(r, s);
        for m in 0..5 {
            devs[m].push(relative_deviation(closed[m], exact[m]));
        }
        let exact_branch = branch_fluxes(&exact);
        let closed_branch = closed_form_branch_fluxes(r, s);
        devs[5].push(relative_deviation(closed_branch.gap, exact_branch.gap));
        devs[6].push(relative_deviation(closed_branch.yoke, exact_branch.yoke));
        devs[7].push(relative_deviation(closed_branch.pole, exact_branch.pole));

        let elements = circuit.element_fluxes(&MeshFluxes(exact.to_vec()));
        devs[8].push(
            relative_deviation(exact_branch.yoke, elements[yoke])
                .max(relative_deviation(exact_branch.pole, elements[pole]))
                .max(relative_deviation(exact_branch.gap, elements[gap])),
        );
        devs[9].push(relative_deviation(exact[2], exact[1]));
        devs[10].push(relative_deviation(exact[4], exact[1]));

        let limit = ReluctanceSet {
            stator_yoke: r.stator_yoke / LIMIT_SCALE,
            magnet: r.magnet * LIMIT_SCALE,
            ..*r
        };
        let limit_branch = branch_fluxes(&exact_mesh(&limit, s, k)?);
        let limit_closed = closed_form_branch_fluxes(&limit, s);
        devs[11].push(relative_deviation(limit_closed.yoke, limit_branch.yoke));
        devs[12].push(gap_pole_deviation(&limit_closed, &limit_branch));

        let retained = ReluctanceSet {
            magnet: r.magnet * LIMIT_SCALE,
            ..*r
        };
        let retained_branch = branch_fluxes(&exact_mesh(&retained, s, k)?);
        devs[13].push(gap_pole_deviation(&closed_form_branch_fluxes(&retained, s), &retained_branch));
    }

    let rows = ROWS
        .iter()
        .zip(devs.iter_mut())
        .map(|(&equation, d)| FidelityRow {
            equation,
            max_rel_dev: d.iter().copied().fold(0.0, f64::max),
            median_rel_dev: median(d),
        })
        .collect();
    Ok(FidelityReport {
        rows,
        n_samples: samples.len(),
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(samples: usize, seed: u64) -> FidelityConfig {
        FidelityConfig {
            samples,
            seed,
            ..FidelityConfig::default()
        }
    }

    #[test]
    fn samples_are_regime_valid_and_in_range() {
        for s in draw_samples(&small(200, 1)).unwrap() {
            assert!(regime_check_with(&s.reluctances, 10.0).all_pass());
            for (_, v) in s.reluctances.named() {
                assert!((1e2..=1e8).contains(&v));
            }
            assert!((1.0..=1e4).contains(&s.sources.coil));
        }
    }

    #[test]
    fn same_seed_same_report() {
        let a = run_fidelity(&small(50, 9)).unwrap().to_csv();
        let b = run_fidelity(&small(50, 9)).unwrap().to_csv();
        assert_eq!(a, b);
        assert_ne!(a, run_fidelity(&small(50, 10)).unwrap().to_csv());
    }

    #[test]
    fn definitional_rows_are_exact() {
        let rep = run_fidelity(&small(100, 3)).unwrap();
        assert!(rep.row("branch_relations").unwrap().max_rel_dev <= 1e-12);
        assert!(rep.row("mesh_symmetry_2_3").unwrap().max_rel_dev <= 1e-12);
    }

    #[test]
    fn csv_schema() {
        let csv = run_fidelity(&small(1, 0)).unwrap().to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "equation,max_rel_dev,median_rel_dev,n_samples,seed");
        assert_eq!(lines.count(), ROWS.len());
        assert!(csv.ends_with('\n') && !csv.contains('\r'));
    }

    #[test]
    fn rejects_zero_samples() {
        assert!(matches!(run_fidelity(&small(0, 0)), Err(FidelityError::NoSamples)));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
