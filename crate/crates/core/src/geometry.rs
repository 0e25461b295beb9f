//! Single-bounce multipath geometry between two nodes A and B.
//!
//! Delays are in nanoseconds and lengths in meters throughout. A multipath
//! component (MPC) is described on each side by its delay and its unit
//! direction, pointing from the virtual source towards the node.

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Speed of light in meters per nanosecond.
pub const C_M_PER_NS: f64 = 0.299_792_458;

const MIN_PATH_LENGTH_M: f64 = 1e-9;
const UNIT_TOLERANCE: f64 = 1e-6;
const ANTIPODAL_TOLERANCE: f64 = 1e-9;

/// Ground-truth geometry of one MPC seen at both nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcGeometry {
    pub tau_a_ns: f64,
    pub tau_b_ns: f64,
    pub dir_a: Vec3,
    pub dir_b: Vec3,
    pub virtual_source: Option<Vec3>,
}

/// How the projection of the relative position onto an MPC is modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionMode {
    /// Exact relation through the s-vector built from both directions.
    #[default]
    Exact,
    /// Plane-wave approximation: the delay difference is the projection onto `dir_a`.
    PlaneWave,
}

/// Returns an error unless `v` has unit norm within 1e-6.
pub fn check_unit(v: &Vec3) -> Result<()> {
    let norm = v.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::NonUnitDirection { norm });
    }
    Ok(())
}

/// Builds the MPC that a virtual source at `source` produces at `pos_a` and `pos_b`.
pub fn mpc_pair_from_virtual_source(source: &Vec3, pos_a: &Vec3, pos_b: &Vec3) -> Result<MpcGeometry> {
    let ra = pos_a - source;
    let rb = pos_b - source;
    let la = ra.norm();
    let lb = rb.norm();
    if la < MIN_PATH_LENGTH_M || lb < MIN_PATH_LENGTH_M {
        return Err(Error::DegenerateGeometry("virtual source coincides with a node"));
    }
    Ok(MpcGeometry {
        tau_a_ns: la / C_M_PER_NS,
        tau_b_ns: lb / C_M_PER_NS,
        dir_a: ra / la,
        dir_b: rb / lb,
        virtual_source: Some(*source),
    })
}

/// Relative position `pos_b - pos_a` recovered from one error-free MPC.
pub fn relpos_from_single_mpc(m: &MpcGeometry) -> Result<Vec3> {
    check_unit(&m.dir_a)?;
    check_unit(&m.dir_b)?;
    Ok(C_M_PER_NS * m.tau_b_ns * m.dir_b - C_M_PER_NS * m.tau_a_ns * m.dir_a)
}

/// s-vector `(e_a + e_b) / (1 + e_a . e_b)`; its projection of `d` equals `c * delta`.
pub fn s_vector(dir_a: &Vec3, dir_b: &Vec3) -> Result<Vec3> {
    check_unit(dir_a)?;
    check_unit(dir_b)?;
    let denom = 1.0 + dir_a.dot(dir_b);
    if denom <= ANTIPODAL_TOLERANCE {
        return Err(Error::AntipodalDirections);
    }
    Ok((dir_a + dir_b) / denom)
}

/// Projection vector used by the delay-difference estimators for one MPC.
pub fn projection_vector(dir_a: &Vec3, dir_b: &Vec3, mode: ProjectionMode) -> Result<Vec3> {
    match mode {
        ProjectionMode::Exact => s_vector(dir_a, dir_b),
        ProjectionMode::PlaneWave => {
            check_unit(dir_a)?;
            Ok(*dir_a)
        }
    }
}

/// Residual of the projection relation for a candidate relative position `d`.
///
/// In exact mode this is `(e_a + e_b).d - c*delta*(1 + e_a.e_b)`, which vanishes
/// identically for a consistent MPC. In plane-wave mode it is `e_a.d - c*delta`.
pub fn projection_residual(m: &MpcGeometry, d: &Vec3, mode: ProjectionMode) -> Result<f64> {
    check_unit(&m.dir_a)?;
    check_unit(&m.dir_b)?;
    let c_delta = C_M_PER_NS * (m.tau_b_ns - m.tau_a_ns);
    Ok(match mode {
        ProjectionMode::Exact => (m.dir_a + m.dir_b).dot(d) - c_delta * (1.0 + m.dir_a.dot(&m.dir_b)),
        ProjectionMode::PlaneWave => m.dir_a.dot(d) - c_delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn source_on_the_axis_behind_a() {
        let m = mpc_pair_from_virtual_source(
            &Vec3::new(-1.0, 0.0, 0.0),
            &Vec3::zeros(),
            &Vec3::new(2.0, 0.0, 0.0),
        )
        .unwrap();
        assert!((m.tau_a_ns - 3.33564095).abs() < 1e-8);
        assert!((m.tau_b_ns - 10.00692285).abs() < 1e-8);
        assert_eq!(m.dir_a, Vec3::x());
        assert_eq!(m.dir_b, Vec3::x());
        let d = relpos_from_single_mpc(&m).unwrap();
        assert!((d - Vec3::new(2.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn source_at_node_is_degenerate() {
        let r = mpc_pair_from_virtual_source(&Vec3::zeros(), &Vec3::zeros(), &Vec3::x());
        assert!(matches!(r, Err(Error::DegenerateGeometry(_))));
    }

    #[test]
    fn s_vector_examples() {
        let s = s_vector(&Vec3::x(), &Vec3::x()).unwrap();
        assert!((s - Vec3::x()).norm() < 1e-15);
        let s = s_vector(&Vec3::x(), &Vec3::y()).unwrap();
        assert!((s - Vec3::new(1.0, 1.0, 0.0)).norm() < 1e-15);
        assert_eq!(s_vector(&Vec3::x(), &(-Vec3::x())), Err(Error::AntipodalDirections));
    }

    #[test]
    fn non_unit_direction_rejected() {
        let m = MpcGeometry {
            tau_a_ns: 1.0,
            tau_b_ns: 2.0,
            dir_a: Vec3::new(1.1, 0.0, 0.0),
            dir_b: Vec3::x(),
            virtual_source: None,
        };
        assert!(matches!(relpos_from_single_mpc(&m), Err(Error::NonUnitDirection { .. })));
    }

    #[test]
    fn plane_wave_residual_for_broadside_source() {
        let m = mpc_pair_from_virtual_source(
            &Vec3::new(0.0, -1.0, 0.0),
            &Vec3::zeros(),
            &Vec3::new(0.1, 0.0, 0.0),
        )
        .unwrap();
        let d = Vec3::new(0.1, 0.0, 0.0);
        let pwa = projection_residual(&m, &d, ProjectionMode::PlaneWave).unwrap();
        let expected = -(1.01f64.sqrt() - 1.0);
        assert!((pwa - expected).abs() < 1e-12);
        let exact = projection_residual(&m, &d, ProjectionMode::Exact).unwrap();
        assert!(exact.abs() < 1e-12);
    }
}
