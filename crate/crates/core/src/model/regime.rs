//! Magnet-dominance ratios under which the lumped model is meant to hold.

use std::fmt;

use super::geometry::ReluctanceSet;

pub const DEFAULT_DOMINANCE_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeRatio {
    pub name: &'static str,
    pub value: f64,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub threshold: f64,
    pub ratios: [RegimeRatio; 4],
}

impl RegimeReport {
    pub fn all_pass(&self) -> bool {
        self.ratios.iter().all(|r| r.passes)
    }

    /// Smallest of the four ratios.
    pub fn weakest(&self) -> f64 {
        self.ratios.iter().map(|r| r.value).fold(f64::INFINITY, f64::min)
    }
}

impl fmt::Display for RegimeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.ratios {
            writeln!(
                f,
                "{:<28} {:>12.4e}  {}",
                r.name,
                r.value,
                if r.passes { "ok" } else { "below threshold" }
            )?;
        }
        Ok(())
    }
}

pub fn regime_check(r: &ReluctanceSet) -> RegimeReport {
    regime_check_with(r, DEFAULT_DOMINANCE_THRESHOLD)
}

pub fn regime_check_with(r: &ReluctanceSet, threshold: f64) -> RegimeReport {
    let ratio = |name, value: f64| RegimeRatio {
        name,
        value,
        passes: value >= threshold,
    };
    RegimeReport {
        threshold,
        ratios: [
            ratio("magnet_over_pole_pair", r.magnet / (2.0 * r.stator_pole)),
            ratio("magnet_over_pole_and_yoke", r.magnet / (r.stator_pole + r.stator_yoke)),
            ratio(
                "magnets_over_central_loop",
                3.0 * r.magnet / (2.0 * r.stator_yoke + 2.0 * r.airgap + r.rotor_yoke),
            ),
            ratio("magnet_over_yoke", r.magnet / r.stator_yoke),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::geometry::{reluctances_from_geometry, MaterialSet, MotorGeometry};

    fn set(others: f64, magnet: f64) -> ReluctanceSet {
        ReluctanceSet {
            stator_yoke: others,
            stator_pole: others,
            rotor_yoke: others,
            airgap: others,
            magnet,
        }
    }

    #[test]
    fn dominant_magnet_passes() {
        let rep = regime_check(&set(1e3, 1e6));
        assert!(rep.all_pass());
        assert!(rep.weakest() >= 100.0);
    }

    #[test]
    fn equal_magnet_and_pole_fails_first_ratio() {
        let rep = regime_check(&set(1e3, 1e3));
        assert_eq!(rep.ratios[0].value, 0.5);
        assert!(!rep.ratios[0].passes);
    }

    #[test]
    fn default_motor_at_alignment() {
        let g = MotorGeometry::default();
        let r = reluctances_from_geometry(&g, &MaterialSet::default(), g.aligned_angle()).unwrap();
        let rep = regime_check(&r);
        assert!(rep.all_pass(), "{rep}");
    }

    #[test]
    fn threshold_is_configurable() {
        let rep = regime_check_with(&set(1e3, 1e6), 1e4);
        assert!(!rep.all_pass());
    }
}
