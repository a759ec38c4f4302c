//! A minimal Lie-group abstraction so the interpolation chain is generic over
//! `SO(3)` (local state dimension 3) and `SE(3)` (dimension 6).
//!
//! Only what the kinematic chain consumes: group ops, adjoints, the right
//! Jacobian pair, and its first/second derivative maps. `rot_angle` exposes
//! the rotation magnitude of a tangent vector, which drives the switch from
//! closed-form to approximated kinematics near zero rotation.

use nalgebra::{SMatrix, SVector};

use crate::se3::{self, Pose};
use crate::so3;
use crate::{M3, M6, V3, V6};

pub trait LieGroup<const D: usize> {
    /// Group element representation.
    type G: Copy + Send + Sync + std::fmt::Debug;

    fn identity() -> Self::G;
    fn exp(x: &SVector<f64, D>) -> Self::G;
    fn log(g: &Self::G) -> SVector<f64, D>;
    fn comp(a: &Self::G, b: &Self::G) -> Self::G;
    fn inv(g: &Self::G) -> Self::G;
    fn adj(g: &Self::G) -> SMatrix<f64, D, D>;
    fn ad(x: &SVector<f64, D>) -> SMatrix<f64, D, D>;
    fn jr(x: &SVector<f64, D>) -> SMatrix<f64, D, D>;
    fn jr_inv(x: &SVector<f64, D>) -> SMatrix<f64, D, D>;
    fn h1(x: &SVector<f64, D>, v: &SVector<f64, D>) -> SMatrix<f64, D, D>;
    fn h1p(x: &SVector<f64, D>, v: &SVector<f64, D>) -> SMatrix<f64, D, D>;
    fn l11(x: &SVector<f64, D>, v: &SVector<f64, D>, w: &SVector<f64, D>) -> SMatrix<f64, D, D>;
    fn l12(x: &SVector<f64, D>, v: &SVector<f64, D>, w: &SVector<f64, D>) -> SMatrix<f64, D, D>;
    fn l11p(x: &SVector<f64, D>, v: &SVector<f64, D>, w: &SVector<f64, D>) -> SMatrix<f64, D, D>;
    fn l12p(x: &SVector<f64, D>, v: &SVector<f64, D>, w: &SVector<f64, D>) -> SMatrix<f64, D, D>;
    /// Magnitude of the rotation part of a tangent vector.
    fn rot_angle(x: &SVector<f64, D>) -> f64;
}

/// Marker for the rotation group.
pub struct So3;

impl LieGroup<3> for So3 {
    type G = M3;

    fn identity() -> M3 {
        M3::identity()
    }
    fn exp(x: &V3) -> M3 {
        so3::exp(x)
    }
    fn log(g: &M3) -> V3 {
        so3::log(g)
    }
    fn comp(a: &M3, b: &M3) -> M3 {
        a * b
    }
    fn inv(g: &M3) -> M3 {
        g.transpose()
    }
    fn adj(g: &M3) -> M3 {
        *g
    }
    fn ad(x: &V3) -> M3 {
        so3::wedge(x)
    }
    fn jr(x: &V3) -> M3 {
        so3::jr(x)
    }
    fn jr_inv(x: &V3) -> M3 {
        so3::jr_inv(x)
    }
    fn h1(x: &V3, v: &V3) -> M3 {
        so3::h1(x, v)
    }
    fn h1p(x: &V3, v: &V3) -> M3 {
        so3::h1p(x, v)
    }
    fn l11(x: &V3, v: &V3, w: &V3) -> M3 {
        so3::l11(x, v, w)
    }
    fn l12(x: &V3, v: &V3, w: &V3) -> M3 {
        so3::l12(x, v, w)
    }
    fn l11p(x: &V3, v: &V3, w: &V3) -> M3 {
        so3::l11p(x, v, w)
    }
    fn l12p(x: &V3, v: &V3, w: &V3) -> M3 {
        so3::l12p(x, v, w)
    }
    fn rot_angle(x: &V3) -> f64 {
        x.norm()
    }
}

/// Marker for the rigid-motion group.
pub struct Se3;

impl LieGroup<6> for Se3 {
    type G = Pose;

    fn identity() -> Pose {
        Pose::identity()
    }
    fn exp(x: &V6) -> Pose {
        se3::exp(x)
    }
    fn log(g: &Pose) -> V6 {
        se3::log(g)
    }
    fn comp(a: &Pose, b: &Pose) -> Pose {
        a.compose(b)
    }
    fn inv(g: &Pose) -> Pose {
        g.inverse()
    }
    fn adj(g: &Pose) -> M6 {
        se3::adj(g)
    }
    fn ad(x: &V6) -> M6 {
        se3::ad(x)
    }
    fn jr(x: &V6) -> M6 {
        se3::jr6(x)
    }
    fn jr_inv(x: &V6) -> M6 {
        se3::jr6_inv(x)
    }
    fn h1(x: &V6, v: &V6) -> M6 {
        se3::h1_6(x, v)
    }
    fn h1p(x: &V6, v: &V6) -> M6 {
        se3::h1p_6(x, v)
    }
    fn l11(x: &V6, v: &V6, w: &V6) -> M6 {
        se3::l11_6(x, v, w)
    }
    fn l12(x: &V6, v: &V6, w: &V6) -> M6 {
        se3::l12_6(x, v, w)
    }
    fn l11p(x: &V6, v: &V6, w: &V6) -> M6 {
        se3::l11p_6(x, v, w)
    }
    fn l12p(x: &V6, v: &V6, w: &V6) -> M6 {
        se3::l12p_6(x, v, w)
    }
    fn rot_angle(x: &V6) -> f64 {
        x.fixed_rows::<3>(0).norm()
    }
}
