//! `SO(3)` operations and the derivative maps of its right Jacobian.
//!
//! Conventions:
//!
//! * `Exp`/`Log` use the right-perturbation convention; rotations act as
//!   world-from-body matrices.
//! * `jr` is the right Jacobian of `Exp`, `jr_inv` its inverse.
//! * The `h`/`l` maps are the directional derivatives the kinematic chain
//!   needs: `h1(u, v) = d(jr(u) v)/du`, `h1p(u, v) = d(jr_inv(u) v)/du`, and
//!   the `l` maps differentiate those once more:
//!   `l11 = d(h1(u, v) w)/du`, `l12 = d(h1(u, v) w)/dv`, with `l11p`/`l12p`
//!   the analogues for `h1p`.
//!
//! Every map is a total function of its arguments: all coefficients that
//! classically divide by the angle are rewritten through the smooth ratios of
//! [`crate::gfun`], so evaluation at exactly zero rotation is well defined
//! (interpolation queries at knot times land there).

use crate::gfun::{self, sinc, Scalars};
use crate::{M3, V3};

/// Skew-symmetric (cross-product) matrix of `v`.
#[rustfmt::skip]
pub fn wedge(v: &V3) -> M3 {
    M3::new(
        0.0, -v.z, v.y,
        v.z, 0.0, -v.x,
        -v.y, v.x, 0.0,
    )
}

/// Inverse of [`wedge`] for skew-symmetric input (uses the lower triangle).
pub fn vee(m: &M3) -> V3 {
    V3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

/// Exponential map (Rodrigues form).
pub fn exp(theta: &V3) -> M3 {
    let u = theta.norm();
    let (g_c, _) = gfun::entire_pair(u);
    let w = wedge(theta);
    M3::identity() + sinc(u) * w + g_c * (w * w)
}

/// Logarithm map. Total on `SO(3)`; at angle `pi` the axis sign follows a
/// deterministic rule (largest-magnitude component positive) since both signs
/// represent the same rotation.
pub fn log(r: &M3) -> V3 {
    // sin(u) * axis, from the antisymmetric part.
    let w = vee(&(r - r.transpose())) * 0.5;
    let sn = w.norm();
    let cs = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let u = sn.atan2(cs);

    if u < 2.0 {
        // theta = u/sin(u) * w; switch to the series ratio once sin(u) is too
        // small to divide by accurately.
        let factor = if u < 1e-4 { 1.0 / sinc(u) } else { u / sn };
        return w * factor;
    }

    // Large angles: the antisymmetric part degrades as sin(u) -> 0, but the
    // symmetric part gives axis*axis^T with denominator 1 - cos(u) ~ 2.
    let omc = 1.0 - cs;
    let sym = (r + r.transpose()) * 0.5;
    let aat = (sym - M3::identity() * cs) / omc;
    let k = aat.diagonal().imax();
    let mut axis = aat.column(k).into_owned() / aat[(k, k)].sqrt();
    axis.normalize_mut();
    // Orient along the antisymmetric part while it still carries sign
    // information; at (numerically exact) pi fall back to a fixed convention.
    let dir = w.dot(&axis);
    if dir.abs() > 1e-14 {
        axis *= dir.signum();
    } else if axis[axis.iamax()] < 0.0 {
        axis = -axis;
    }
    axis * u
}

/// Right Jacobian of the exponential map.
pub fn jr(theta: &V3) -> M3 {
    let (g_c, g_s) = gfun::entire_pair(theta.norm());
    let w = wedge(theta);
    M3::identity() - g_c * w + g_s * (w * w)
}

/// Inverse right Jacobian. Domain `|theta| < 2 pi`.
pub fn jr_inv(theta: &V3) -> M3 {
    let s = Scalars::eval(theta.norm());
    let w = wedge(theta);
    M3::identity() + 0.5 * w + s.g3.f * (w * w)
}

// ---------------------------------------------------------------------------
// Quadratic form f(u) = wedge(u)^2 and its directional derivatives.
// ---------------------------------------------------------------------------

/// `f(u) = wedge(u)^2`.
pub fn fmat(u: &V3) -> M3 {
    let w = wedge(u);
    w * w
}

/// `d(f(u) v)/du`.
pub fn f_u(u: &V3, v: &V3) -> M3 {
    -wedge(u) * wedge(v) - wedge(&u.cross(v))
}

/// `d(f_u(u, v) w)/du`.
pub fn f_uu(_u: &V3, v: &V3, w: &V3) -> M3 {
    wedge(&v.cross(w)) - wedge(w) * wedge(v)
}

/// `d(f_u(u, v) w)/dv`.
pub fn f_uv(u: &V3, _v: &V3, w: &V3) -> M3 {
    wedge(u) * wedge(w) + wedge(w) * wedge(u)
}

// ---------------------------------------------------------------------------
// Derivative maps of jr and jr_inv.
// ---------------------------------------------------------------------------

fn outer(a: &V3, b: &V3) -> M3 {
    a * b.transpose()
}

/// `h1(u, v) = d(jr(u) v)/du`.
pub fn h1(u: &V3, v: &V3) -> M3 {
    let s = Scalars::eval(u.norm());
    s.g1.f * wedge(v)
        + s.g1.d1u * outer(&v.cross(u), u)
        + s.g2.f * f_u(u, v)
        + s.g2.d1u * outer(&(fmat(u) * v), u)
}

/// `h1p(u, v) = d(jr_inv(u) v)/du`.
pub fn h1p(u: &V3, v: &V3) -> M3 {
    let s = Scalars::eval(u.norm());
    -0.5 * wedge(v) + s.g3.f * f_u(u, v) + s.g3.d1u * outer(&(fmat(u) * v), u)
}

/// `l11(u, v, w) = d(h1(u, v) w)/du`.
pub fn l11(u: &V3, v: &V3, w: &V3) -> M3 {
    let s = Scalars::eval(u.norm());
    let uw = u.dot(w);
    // Chain rule through the scalar coefficients: each term with a g'(|u|)
    // factor contributes g'/u * w^T + (u.w) * (g''/u^2 - g'/u^3) * u^T, which
    // stays finite at u = 0.
    s.g1.d1u * outer(&v.cross(w), u)
        + (s.g1.d1u * uw) * wedge(v)
        + outer(&v.cross(u), &(s.g1.d1u * w + (uw * s.g1.dd) * u))
        + s.g2.d1u * outer(&(f_u(u, v) * w), u)
        + s.g2.f * f_uu(u, v, w)
        + (s.g2.d1u * uw) * f_u(u, v)
        + outer(&(fmat(u) * v), &(s.g2.d1u * w + (uw * s.g2.dd) * u))
}

/// `l12(u, v, w) = d(h1(u, v) w)/dv`.
pub fn l12(u: &V3, v: &V3, w: &V3) -> M3 {
    let s = Scalars::eval(u.norm());
    let uw = u.dot(w);
    -s.g1.f * wedge(w) - (s.g1.d1u * uw) * wedge(u)
        + s.g2.f * f_uv(u, v, w)
        + (s.g2.d1u * uw) * fmat(u)
}

/// `l11p(u, v, w) = d(h1p(u, v) w)/du`.
pub fn l11p(u: &V3, v: &V3, w: &V3) -> M3 {
    let s = Scalars::eval(u.norm());
    let uw = u.dot(w);
    s.g3.f * f_uu(u, v, w)
        + s.g3.d1u * outer(&(f_u(u, v) * w), u)
        + (s.g3.d1u * uw) * f_u(u, v)
        + outer(&(fmat(u) * v), &(s.g3.d1u * w + (uw * s.g3.dd) * u))
}

/// `l12p(u, v, w) = d(h1p(u, v) w)/dv`.
pub fn l12p(u: &V3, v: &V3, w: &V3) -> M3 {
    let s = Scalars::eval(u.norm());
    let uw = u.dot(w);
    0.5 * wedge(w) + s.g3.f * f_uv(u, v, w) + (s.g3.d1u * uw) * fmat(u)
}
