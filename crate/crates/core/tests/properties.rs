use proptest::prelude::*;

use srm_mec::metrics::{derive_metrics, improvement_percent, read_motors, MotorRecord};
use srm_mec::model::{
    branch_fluxes, build_network, closed_form_branch_fluxes, composite_reluctances, regime_check, MaterialSet,
    MotorGeometry, OperatingPoint, ReluctanceSet, SourceSet,
};
use srm_mec::network::{condition_number, kirchhoff_residual, solve_linear};
use srm_mec::saturation::{BhCurve, NonlinearConfig, NonlinearSolver};

fn reluctance() -> impl Strategy<Value = f64> {
    (2.0f64..8.0).prop_map(|e| 10f64.powf(e))
}

fn reluctance_set() -> impl Strategy<Value = ReluctanceSet> {
    (reluctance(), reluctance(), reluctance(), reluctance(), reluctance()).prop_map(|(a, p, r, g, m)| {
        ReluctanceSet {
            stator_yoke: a,
            stator_pole: p,
            rotor_yoke: r,
            airgap: g,
            magnet: m,
        }
    })
}

fn source_set() -> impl Strategy<Value = SourceSet> {
    (0.0f64..1e4, 0.0f64..1e4).prop_map(|(coil, magnet)| SourceSet { coil, magnet })
}

fn solve(r: &ReluctanceSet, s: &SourceSet) -> Vec<f64> {
    solve_linear(&build_network(r, s).unwrap()).unwrap().as_slice().to_vec()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn regime_set() -> impl Strategy<Value = ReluctanceSet> {
    reluctance_set().prop_filter("magnet-dominant", |r| regime_check(r).all_pass())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn residual_small_for_well_conditioned(r in reluctance_set(), s in source_set()) {
        let sys = build_network(&r, &s).unwrap();
        let phi = solve_linear(&sys).unwrap();
        if condition_number(&sys).unwrap() <= 1e8 {
            prop_assert!(kirchhoff_residual(&sys, &phi) <= 1e-12);
        }
    }

    #[test]
    fn meshes_two_and_three_agree(r in reluctance_set(), s in source_set()) {
        let phi = solve(&r, &s);
        prop_assert!((phi[1] - phi[2]).abs() <= 1e-12 * phi[1].abs().max(f64::MIN_POSITIVE));
    }

    #[test]
    fn superposition(r in reluctance_set(), s in source_set()) {
        let total = solve(&r, &s);
        let coil = solve(&r, &s.coil_only());
        let magnet = solve(&r, &s.magnet_only());
        let scale = max_abs(&total).max(max_abs(&coil)).max(max_abs(&magnet));
        for k in 0..5 {
            prop_assert!((total[k] - coil[k] - magnet[k]).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn magnet_gap_part_is_total_minus_coil(r in reluctance_set(), s in source_set()) {
        let gap = |s: &SourceSet| {
            let phi = solve(&r, s);
            branch_fluxes(&[phi[0], phi[1], phi[2], phi[3], phi[4]]).gap
        };
        let (total, coil, magnet) = (gap(&s), gap(&s.coil_only()), gap(&s.magnet_only()));
        prop_assert!((magnet - (total - coil)).abs() <= 1e-10 * total.abs().max(coil.abs()).max(magnet.abs()));
    }

    #[test]
    fn common_scaling_leaves_fluxes(r in reluctance_set(), s in source_set(), k in 0.01f64..100.0) {
        let base = solve(&r, &s);
        let scaled = solve(
            &r.scaled(k),
            &SourceSet { coil: s.coil * k, magnet: s.magnet * k },
        );
        let scale = max_abs(&base);
        for j in 0..5 {
            prop_assert!((base[j] - scaled[j]).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn branch_map_is_exact(m in prop::array::uniform5(-1.0f64..1.0)) {
        let b = branch_fluxes(&m);
        prop_assert_eq!(b.yoke, -m[0]);
        prop_assert_eq!(b.pole, m[1] - m[0]);
        prop_assert_eq!(b.gap, m[3] - m[0]);
    }

    #[test]
    fn composites_without_pole_reluctance(r in reluctance_set()) {
        let c = composite_reluctances(&ReluctanceSet { stator_pole: 0.0, ..r });
        prop_assert_eq!(c.r4, 0.0);
        prop_assert_eq!(c.r2, c.r3);
    }

    #[test]
    fn printed_branch_signs(r in regime_set(), fe in 1.0f64..1e4, fpm in 1.0f64..1e4, dfpm in 1.0f64..1e3) {
        let lo = closed_form_branch_fluxes(&r, &SourceSet { coil: fe, magnet: fpm });
        let hi = closed_form_branch_fluxes(&r, &SourceSet { coil: fe, magnet: fpm + dfpm });
        prop_assert!(hi.gap > lo.gap);
        prop_assert!(hi.pole < lo.pole);
        let no_pm = closed_form_branch_fluxes(&r, &SourceSet { coil: fe, magnet: 0.0 });
        prop_assert_eq!(no_pm.gap, no_pm.pole);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn field_strength_increasing(b1 in 0.0f64..3.0, db in 1e-6f64..1.0) {
        let c = BhCurve::default_steel();
        prop_assert!(c.field_strength(b1 + db) > c.field_strength(b1));
        prop_assert!(c.chord_permeability(b1) > 0.0);
        prop_assert!(c.energy_density(b1 + db) > c.energy_density(b1));
    }

    #[test]
    fn nonlinear_solutions_satisfy_kirchhoff(i in 0.0f64..10.0, angle in 0.0f64..20.0) {
        let g = MotorGeometry::default();
        let solver = NonlinearSolver::new(
            &g, &MaterialSet::default(), &BhCurve::default_steel(), &NonlinearConfig::default(),
        ).unwrap();
        let op = OperatingPoint::new(&g, i, angle).unwrap();
        let sol = solver.solve(&op, None).unwrap();
        prop_assert!(sol.residual <= 1e-10);
    }
}

fn motor() -> impl Strategy<Value = MotorRecord> {
    (1.0f64..1000.0, prop::option::of(0.0f64..20.0), 0.1f64..50.0, 0.0f64..20.0).prop_map(|(v, pm, i, t)| {
        MotorRecord {
            name: "m".into(),
            motor_volume: v,
            pm_volume: pm,
            current: i,
            mean_torque: t,
        }
    })
}

proptest! {
    #[test]
    fn metric_round_trip(rec in motor()) {
        let m = derive_metrics(&rec);
        let back = m.torque_density_per_ampere * rec.current * (rec.motor_volume / 1000.0);
        prop_assert!((back - rec.mean_torque).abs() <= 1e-12 * rec.mean_torque.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn csv_round_trip(recs in prop::collection::vec(motor(), 1..6)) {
        let mut text = String::from("name,volume_ml,pm_volume_ml,current_a,mean_torque_nm\n");
        for r in &recs {
            let pm = r.pm_volume.map(|v| v.to_string()).unwrap_or_default();
            text.push_str(&format!("{},{},{},{},{}\n", r.name, r.motor_volume, pm, r.current, r.mean_torque));
        }
        prop_assert_eq!(read_motors(text.as_bytes()).unwrap(), recs);
    }

    #[test]
    fn ranking_follows_torque(a in motor(), b in motor(), k in 0.1f64..10.0) {
        // same volume and current: ranking by the headline metric is ranking by torque,
        // and scaling every torque by a common factor keeps the order
        let b = MotorRecord { motor_volume: a.motor_volume, current: a.current, ..b };
        let (ma, mb) = (derive_metrics(&a), derive_metrics(&b));
        prop_assert_eq!(
            ma.torque_density_per_ampere.partial_cmp(&mb.torque_density_per_ampere),
            a.mean_torque.partial_cmp(&b.mean_torque)
        );
        let scale = |r: &MotorRecord| MotorRecord { mean_torque: r.mean_torque * k, ..r.clone() };
        let (sa, sb) = (derive_metrics(&scale(&a)), derive_metrics(&scale(&b)));
        prop_assert_eq!(
            sa.torque_density_per_ampere > sb.torque_density_per_ampere,
            ma.torque_density_per_ampere > mb.torque_density_per_ampere
        );
        if mb.torque_density_per_ampere > 0.0 {
            let imp = improvement_percent(&ma, &mb).unwrap();
            prop_assert_eq!(imp > 0.0, ma.torque_density_per_ampere > mb.torque_density_per_ampere);
        }
    }
}
