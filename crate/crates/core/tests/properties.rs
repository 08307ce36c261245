use proptest::prelude::*;
use skewlab_core::criterion::projective_distance;
use skewlab_core::fiber::{area_preservation_defect, finite_difference_jacobian};
use skewlab_core::holonomy::{holonomy_point, linear_holonomy, HolonomyQuery};
use skewlab_core::*;

fn bernoulli() -> (ShiftSpace, BaseMeasure) {
    (
        ShiftSpace::full(3).unwrap(),
        BaseMeasure::bernoulli(vec![0.2, 0.3, 0.5]).unwrap(),
    )
}

fn maps() -> Vec<FiberMap> {
    vec![
        FiberMap::toral(2, 1, 1, 1).unwrap(),
        FiberMap::StandardMap(1.7),
        FiberMap::StandardMapInverse(0.4),
        FiberMap::twist(TorusPoint::new(0.3, 0.6), 0.25, 2.0).unwrap(),
        FiberMap::compose(
            FiberMap::StandardMap(0.9),
            FiberMap::toral(1, 1, 0, 1).unwrap(),
        ),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_is_a_symmetric_ultrametric(seed in any::<u64>(), r1 in 0usize..12, r2 in 0usize..12) {
        let (sp, m) = bernoulli();
        let x = m.sample_sequence(seed, 0);
        let y = m.resample_beyond(&x, r1, seed, 1);
        let z = m.resample_beyond(&y, r2, seed, 2);
        let dxy = sp.distance(&x, &y).unwrap();
        prop_assert_eq!(dxy, sp.distance(&y, &x).unwrap());
        prop_assert!(sp.distance(&x, &z).unwrap() <= dxy.max(sp.distance(&y, &z).unwrap()));
        prop_assert!(dxy <= 0.5f64.powi(r1 as i32));
    }

    #[test]
    fn shifting_reindexes(seed in any::<u64>(), k in -300i64..300, j in -300i64..300) {
        let (_, m) = bernoulli();
        let x = m.sample_sequence(seed, 3);
        prop_assert_eq!(x.shift(k).symbol(j), x.symbol(j + k));
        prop_assert_eq!(x.shift(k).shift(-k).symbol(j), x.symbol(j));
    }

    #[test]
    fn bracket_takes_past_and_future(seed in any::<u64>(), j in -200i64..200) {
        let (sp, m) = bernoulli();
        let x = m.sample_sequence(seed, 0);
        let y = m.resample_beyond(&x, 1, seed, 1);
        let b = sp.bracket(&x, &y).unwrap();
        prop_assert_eq!(b.symbol(j), if j <= 0 { x.symbol(j) } else { y.symbol(j) });
    }

    #[test]
    fn fiber_maps_invert_and_preserve_area(i in 0usize..5, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let f = &maps()[i];
        let t = TorusPoint::new(u, v);
        let (ft, d) = f.apply(t);
        let (back, di) = f.inverse().apply(ft);
        prop_assert!(back.distance(&t) < 1e-10);
        prop_assert!((d.det() - 1.0).abs() < 1e-10);
        prop_assert!((di * d - Mat2::IDENTITY).max_abs() < 1e-9);
        prop_assert!((finite_difference_jacobian(f, t, 1e-6) - d).max_abs() < 1e-4);
    }

    #[test]
    fn projective_distance_is_symmetric_and_bounded(a in 0.0f64..7.0, b in 0.0f64..7.0, s in 0.1f64..10.0) {
        let u = [a.cos(), a.sin()];
        let v = [s * b.cos(), s * b.sin()];
        let d = projective_distance(u, v).unwrap();
        prop_assert!((d - projective_distance(v, u).unwrap()).abs() < 1e-15);
        prop_assert!((0.0..=std::f64::consts::FRAC_PI_2 + 1e-15).contains(&d));
        prop_assert!(projective_distance(u, [-u[0], -u[1]]).unwrap() < 1e-12);
    }

    #[test]
    fn locally_constant_holonomies_fix_points(seed in any::<u64>(), u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let (sp, m) = bernoulli();
        let sys = SkewSystem::random_product(sp, m.clone(), maps()[..3].to_vec()).unwrap();
        let x = m.sample_sequence(seed, 0);
        let y = m.resample_past(&x, 0, seed, 1);
        let t = TorusPoint::new(u, v);
        let q = HolonomyQuery::stable(x, y);
        prop_assert_eq!(holonomy_point(&sys, &q, t).unwrap().0, t);
        prop_assert_eq!(linear_holonomy(&sys, &q, t).unwrap().matrix, Mat2::IDENTITY);
    }

    #[test]
    fn cocycle_products_have_unit_determinant(seed in any::<u64>(), n in 1i64..400) {
        let (sp, m) = bernoulli();
        let sys = SkewSystem::random_product(sp, m.clone(), maps()[..3].to_vec()).unwrap();
        let x = m.sample_sequence(seed, 0);
        let r = sys.iterate_cocycle(&x, TorusPoint::new(0.1, 0.9), n, 8).unwrap();
        prop_assert!(r.det_defect_max < 1e-6);
        prop_assert_eq!(r.steps, n);
    }
}

#[test]
fn composed_generators_preserve_area() {
    for f in maps() {
        assert!(area_preservation_defect(&f, 500, 3).unwrap() < 1e-10);
    }
}
