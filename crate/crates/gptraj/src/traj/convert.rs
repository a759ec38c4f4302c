//! Conversions between the unified support-state layout and the coupled
//! rigid-motion representation used by the interpolation chain.
//!
//! The unified layout stores rotation, body rates `w`/`dw`, and world-frame
//! `p`/`v`/`a`; the chain over the rigid-motion group wants a pose plus a
//! body twist `tau = (w, R^T v)` and its body derivative
//! `dtau = (dw, R^T a - w x R^T v)`.  Both directions carry analytic
//! Jacobians in the 18-dimensional support-state tangent ordering
//! `(dtheta, dw, ddw, dp, dv, da)` documented in the parent module.

use crate::se3::Pose;
use crate::so3;
use crate::traj::SupportState;
use crate::{M18, M3, V3, V6};

/// Support state mapped into chain inputs: pose, twist, twist derivative.
pub struct ChainInput {
    pub g: Pose,
    pub tau: V6,
    pub dtau: V6,
    /// Maps a support-state tangent to the stacked chain-input tangent
    /// `(dxi, dtau, ddtau)`, where `dxi` is the right pose tangent.
    pub jac: M18,
}

/// Map a support state to chain inputs for the rigid-motion representation.
pub fn to_chain_input(s: &SupportState) -> ChainInput {
    let rt = s.r.transpose();
    let nu = rt * s.v;
    let beta = rt * s.a - s.w.cross(&nu);
    let tau = V6::new(s.w[0], s.w[1], s.w[2], nu[0], nu[1], nu[2]);
    let dtau = V6::new(s.dw[0], s.dw[1], s.dw[2], beta[0], beta[1], beta[2]);

    let mut jac = M18::zeros();
    let set = |jac: &mut M18, r: usize, c: usize, m: &M3| {
        jac.fixed_view_mut::<3, 3>(r, c).copy_from(m);
    };
    let eye = M3::identity();
    // Pose tangent: rotation follows the support rotation directly; the
    // translation part sees the world position through the body frame.
    set(&mut jac, 0, 0, &eye);
    set(&mut jac, 3, 9, &rt);
    // Twist: angular part is the body rate; linear part couples rotation
    // and world velocity.
    set(&mut jac, 6, 3, &eye);
    set(&mut jac, 9, 0, &so3::wedge(&nu));
    set(&mut jac, 9, 12, &rt);
    // Twist derivative: angular part is the body angular acceleration; the
    // linear part couples everything that feeds the body acceleration.
    set(&mut jac, 12, 6, &eye);
    set(
        &mut jac,
        15,
        0,
        &(so3::wedge(&(rt * s.a)) - so3::wedge(&s.w) * so3::wedge(&nu)),
    );
    set(&mut jac, 15, 3, &so3::wedge(&nu));
    set(&mut jac, 15, 12, &(-so3::wedge(&s.w) * rt));
    set(&mut jac, 15, 15, &rt);

    ChainInput {
        g: Pose::new(s.r, s.p),
        tau,
        dtau,
        jac,
    }
}

/// Chain output mapped back to a unified support state.
pub struct ChainOutput {
    pub state: SupportState,
    /// Maps the stacked chain-output tangent `(dxi, dtau, ddtau)` to the
    /// support-state tangent.
    pub jac: M18,
}

/// Map an interpolated pose/twist triple back to the unified layout.
pub fn from_chain_output(g: &Pose, tau: &V6, dtau: &V6) -> ChainOutput {
    let w: V3 = tau.fixed_rows::<3>(0).into_owned();
    let nu: V3 = tau.fixed_rows::<3>(3).into_owned();
    let dw: V3 = dtau.fixed_rows::<3>(0).into_owned();
    let beta: V3 = dtau.fixed_rows::<3>(3).into_owned();
    let v = g.r * nu;
    let a = g.r * (beta + w.cross(&nu));

    let state = SupportState {
        r: g.r,
        w,
        dw,
        p: g.p,
        v,
        a,
    };

    let mut jac = M18::zeros();
    let set = |jac: &mut M18, r: usize, c: usize, m: &M3| {
        jac.fixed_view_mut::<3, 3>(r, c).copy_from(m);
    };
    let eye = M3::identity();
    // Rotation and body rates pass through.
    set(&mut jac, 0, 0, &eye);
    set(&mut jac, 3, 6, &eye);
    set(&mut jac, 6, 12, &eye);
    // World position moves with the pose translation tangent.
    set(&mut jac, 9, 3, &g.r);
    // World velocity: v = R nu.
    set(&mut jac, 12, 0, &(-g.r * so3::wedge(&nu)));
    set(&mut jac, 12, 9, &g.r);
    // World acceleration: a = R (beta + w x nu).
    set(
        &mut jac,
        15,
        0,
        &(-g.r * so3::wedge(&(beta + w.cross(&nu)))),
    );
    set(&mut jac, 15, 6, &(-g.r * so3::wedge(&nu)));
    set(&mut jac, 15, 9, &(g.r * so3::wedge(&w)));
    set(&mut jac, 15, 15, &g.r);

    ChainOutput { state, jac }
}
