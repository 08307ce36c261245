use skewlab_core::criterion::*;
use skewlab_core::lyapunov::{exponent_pair, integrated_exponent, orbit_start};
use skewlab_core::*;

fn cat() -> FiberMap {
    FiberMap::toral(2, 1, 1, 1).unwrap()
}

fn cat_pair(angle: f64) -> SkewSystem {
    let sp = ShiftSpace::full(2).unwrap();
    let m = BaseMeasure::bernoulli(vec![0.5, 0.5]).unwrap();
    let twist = LocalizedTwist::new(TorusPoint::new(0.25, 0.25), 0.2, angle).unwrap();
    SkewSystem::random_product(sp, m, vec![cat(), cat()])
        .unwrap()
        .with_twisted_generator(1, twist)
        .unwrap()
}

fn small() -> SweepParams {
    SweepParams {
        pinching_grid: 16,
        pinching_steps: 300,
        twist: TwistParams {
            n_k: 64,
            ..TwistParams::default()
        },
        n_orbits: 16,
        n_steps: 500,
        ..SweepParams::default()
    }
}

#[test]
fn twisted_generator_keeps_fixed_fiber_dynamics() {
    let sys = cat_pair(0.7);
    let p = PeriodicPoint::new(sys.space(), &[0]).unwrap();
    let r = check_pinching(&sys, &p, 16, 500).unwrap();
    assert!(r.positive && (r.integral - 0.9624236501).abs() < 1e-2);
}

#[test]
fn loop_matches_finite_differences() {
    let sys = cat_pair(0.5);
    let p = PeriodicPoint::new(sys.space(), &[0]).unwrap();
    let z = sys.space().homoclinic_point(&p, 1, 1).unwrap();
    let hl = build_holonomy_loop(&sys, &p, &z, 2).unwrap();
    let h = hl.exact_map().expect("locally constant loop");
    for i in 0..32 {
        let t = TorusPoint::new((i as f64 + 0.5) / 32.0, (i * 7 % 32) as f64 / 32.0 + 0.01);
        let fd = skewlab_core::fiber::finite_difference_jacobian(h, t, 1e-6);
        assert!((fd - hl.linear_part(t).unwrap()).max_abs() < 1e-4);
    }
    assert!(hl.area_defect(32).unwrap() < 1e-8);
}

#[test]
fn untwisted_system_has_positive_exponent_without_twisting() {
    let out = run_criterion(&cat_pair(0.0), &small()).unwrap();
    assert!(out.pinching.positive);
    assert!(!out.twisting_flag());
    let est = integrated_exponent(&cat_pair(0.0), 16, 500, 9, 16).unwrap();
    assert!(est.mean > 0.9);
}

#[test]
fn sweep_rows_are_independent_of_order() {
    let sys = cat_pair(0.0);
    let params = small();
    let angles = [0.0, 0.3, 0.6];
    let rows = perturbation_sweep(&sys, &params, &angles, 11);
    for (i, a) in angles.iter().enumerate() {
        assert_eq!(rows[i], sweep_row(&sys, &params, *a, i, 11));
    }
    assert!(rows.iter().all(|r| r.error.is_none()));
}

#[test]
fn inverse_cocycle_mirrors_forward_exponent() {
    let sp = ShiftSpace::full(2).unwrap();
    let m = BaseMeasure::bernoulli(vec![0.5, 0.5]).unwrap();
    let sys = SkewSystem::random_product(sp, m, vec![FiberMap::StandardMap(3.0), cat()]).unwrap();
    for k in 0..20 {
        let (x, t) = orbit_start(sys.measure(), 2, k);
        let (lp, lm) = exponent_pair(&sys, &x, t, 1000, 16).unwrap();
        assert!((lp + lm).abs() < 1e-2);
    }
}
