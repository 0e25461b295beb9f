use mpcrange::geometry::{mpc_pair_from_virtual_source, projection_residual, relpos_from_single_mpc, s_vector};
use mpcrange::{ProjectionMode, Vec3, C_M_PER_NS};
use nalgebra::{Rotation3, Unit};
use proptest::prelude::*;

fn point(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn unit() -> impl Strategy<Value = Vec3> {
    point(1.0).prop_filter_map("non-zero", |v| (v.norm() > 1e-3).then(|| v.normalize()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn triangle_invariants(source in point(30.0), a in point(5.0), b in point(5.0)) {
        let Ok(m) = mpc_pair_from_virtual_source(&source, &a, &b) else { return Ok(()) };
        let d = b - a;
        prop_assert!((relpos_from_single_mpc(&m).unwrap() - d).norm() <= 1e-9);
        prop_assert!(C_M_PER_NS * (m.tau_b_ns - m.tau_a_ns).abs() <= d.norm() + 1e-12);
        prop_assert!(projection_residual(&m, &d, ProjectionMode::Exact).unwrap().abs() <= 1e-9);
        let s = s_vector(&m.dir_a, &m.dir_b).unwrap();
        prop_assert!((s.dot(&d) - C_M_PER_NS * (m.tau_b_ns - m.tau_a_ns)).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn s_vector_of_equal_directions(e in unit()) {
        prop_assert!((s_vector(&e, &e).unwrap() - e).norm() <= 1e-12);
    }

    #[test]
    fn s_vector_is_symmetric(a in unit(), b in unit()) {
        prop_assume!(1.0 + a.dot(&b) > 1e-6);
        prop_assert_eq!(s_vector(&a, &b).unwrap(), s_vector(&b, &a).unwrap());
    }

    #[test]
    fn rotation_equivariance(
        source in point(30.0), a in point(5.0), b in point(5.0),
        axis in unit(), angle in -3.1..3.1f64,
    ) {
        let r = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
        let (Ok(m), Ok(mr)) = (
            mpc_pair_from_virtual_source(&source, &a, &b),
            mpc_pair_from_virtual_source(&(r * source), &(r * a), &(r * b)),
        ) else { return Ok(()) };
        let d = relpos_from_single_mpc(&m).unwrap();
        let dr = relpos_from_single_mpc(&mr).unwrap();
        prop_assert!((r * d - dr).norm() <= 1e-9);
    }
}

#[test]
fn plane_wave_residual_shrinks_with_path_length() {
    let a = Vec3::zeros();
    let b = Vec3::new(1.0, 0.0, 0.0);
    let dir = Vec3::new(1.0, 1.0, 0.3).normalize();
    let residual = |r: f64| {
        let m = mpc_pair_from_virtual_source(&(r * dir), &a, &b).unwrap();
        projection_residual(&m, &(b - a), ProjectionMode::PlaneWave).unwrap().abs()
    };
    assert!(residual(5.0) > residual(50.0));
    assert!(residual(50.0) > residual(500.0));
}
