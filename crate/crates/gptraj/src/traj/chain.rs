//! Kinematic interpolation chain, generic over the Lie group.
//!
//! A segment is bracketed by two support states: group elements `g_a`, `g_b`
//! with body-frame velocities `u` and accelerations `du` at each end.  The
//! chain maps them through three stages:
//!
//! 1. Express the far support state in the local tangent frame anchored at
//!    `g_a`: `x_b = Log(g_a^-1 g_b)` with tangent derivatives `dx_b`, `ddx_b`.
//! 2. Blend the local states with the scalar interpolation weights from
//!    [`crate::kernel::lambda_psi3`], applied blockwise.
//! 3. Map the blended local state back to the group and to body-frame
//!    velocities at the query time.
//!
//! Every stage carries analytic Jacobians with respect to right
//! perturbations of the poses and plain perturbations of the velocities, so
//! the composed chain is differentiable end to end.
//!
//! Two kinematic models are supported.  The closed-form model keeps the
//! exact derivative of the inverse right Jacobian; the approximated model
//! truncates it at the leading commutator term.  Both agree at zero local
//! rotation, so below [`EPS_ANGLE`] the cheaper approximated maps are used
//! regardless of the requested model, with Jacobians following the same
//! branch as the value.

use nalgebra::{SMatrix, SVector};

use crate::group::LieGroup;
use crate::M3;

/// Below this local rotation angle the closed-form and approximated
/// kinematics agree to square-of-angle order, so the approximated maps are
/// used unconditionally.  Keeping the threshold well above machine precision
/// avoids evaluating the higher derivative maps in a regime where they add
/// nothing.
pub const EPS_ANGLE: f64 = 1e-4;

/// Largest blended local rotation the interpolation will evaluate.  The
/// closed-form scalar kernels lose accuracy approaching `2 pi`, where the
/// relative rotation becomes ambiguous anyway; interpolation reports such
/// states instead of producing garbage.
pub const BLEND_ANGLE_MAX: f64 = core::f64::consts::TAU - 0.01;

/// Kinematic model for the acceleration-level maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Closed-form acceleration kinematics.
    Cf,
    /// First-order (commutator) approximation of the acceleration kinematics.
    Ap,
}

/// Input slots for the local-state Jacobians.
pub const IN_GA: usize = 0;
pub const IN_GB: usize = 1;
pub const IN_UB: usize = 2;
pub const IN_DUB: usize = 3;

/// Input slots for the interpolated-state Jacobians.
pub const JIN_GA: usize = 0;
pub const JIN_UA: usize = 1;
pub const JIN_DUA: usize = 2;
pub const JIN_GB: usize = 3;
pub const JIN_UB: usize = 4;
pub const JIN_DUB: usize = 5;

/// Output slots for the interpolated-state Jacobians.
pub const JOUT_G: usize = 0;
pub const JOUT_U: usize = 1;
pub const JOUT_DU: usize = 2;

/// Far support state expressed in the tangent frame of the near one.
pub struct Local<const D: usize> {
    pub x: SVector<f64, D>,
    pub dx: SVector<f64, D>,
    pub ddx: SVector<f64, D>,
    /// `jac[row][slot]`: row 0/1/2 is `x`/`dx`/`ddx`, slot indexed by the
    /// `IN_*` constants.
    pub jac: [[SMatrix<f64, D, D>; 4]; 3],
}

/// Interpolated state and its Jacobians with respect to both support states.
pub struct Interpolated<G: LieGroup<D>, const D: usize> {
    pub g: G::G,
    pub u: SVector<f64, D>,
    pub du: SVector<f64, D>,
    /// `jac[out][slot]`: out indexed by `JOUT_*`, slot by `JIN_*`.
    pub jac: [[SMatrix<f64, D, D>; 6]; 3],
}

fn use_closed_form<G: LieGroup<D>, const D: usize>(mode: Mode, x: &SVector<f64, D>) -> bool {
    mode == Mode::Cf && G::rot_angle(x) >= EPS_ANGLE
}

/// Stage 1: local state of `g_b` relative to `g_a` with Jacobians.
pub fn local_state<G: LieGroup<D>, const D: usize>(
    g_a: &G::G,
    g_b: &G::G,
    u_b: &SVector<f64, D>,
    du_b: &SVector<f64, D>,
    mode: Mode,
) -> Local<D> {
    let rel = G::comp(&G::inv(g_a), g_b);
    let x = G::log(&rel);
    let ji = G::jr_inv(&x);
    let dx = ji * u_b;

    let jx_ga = -G::jr_inv(&-x);
    let jx_gb = ji;

    // dx = jr_inv(x) u_b.
    let jdx_x = G::h1p(&x, u_b);
    let jdx_ub = ji;

    let cf = use_closed_form::<G, D>(mode, &x);
    let (ddx, jddx_x, jddx_ub, jddx_dub) = if cf {
        let h = G::h1p(&x, u_b);
        let ddx = ji * du_b + h * dx;
        let jddx_x = G::h1p(&x, du_b) + G::l11p(&x, u_b, &dx) + h * jdx_x;
        let jddx_ub = G::l12p(&x, u_b, &dx) + h * ji;
        (ddx, jddx_x, jddx_ub, ji)
    } else {
        let ad_u = G::ad(u_b);
        let ddx = ji * du_b - 0.5 * ad_u * dx;
        let jddx_x = G::h1p(&x, du_b) - 0.5 * ad_u * jdx_x;
        let jddx_ub = 0.5 * G::ad(&dx) - 0.5 * ad_u * ji;
        (ddx, jddx_x, jddx_ub, ji)
    };

    let zero = SMatrix::<f64, D, D>::zeros();
    Local {
        x,
        dx,
        ddx,
        jac: [
            [jx_ga, jx_gb, zero, zero],
            [jdx_x * jx_ga, jdx_x * jx_gb, jdx_ub, zero],
            [jddx_x * jx_ga, jddx_x * jx_gb, jddx_ub, jddx_dub],
        ],
    }
}

/// Stages 2 and 3: blend the local states with the given scalar weights and
/// recover the global state at the query time.
#[allow(clippy::too_many_arguments)]
pub fn interpolate<G: LieGroup<D>, const D: usize>(
    g_a: &G::G,
    u_a: &SVector<f64, D>,
    du_a: &SVector<f64, D>,
    g_b: &G::G,
    u_b: &SVector<f64, D>,
    du_b: &SVector<f64, D>,
    lambda: &M3,
    psi: &M3,
    mode: Mode,
) -> Option<Interpolated<G, D>> {
    let local = local_state::<G, D>(g_a, g_b, u_b, du_b, mode);

    // Stage 2: blockwise blend.  The near state in local coordinates is
    // exactly (0, u_a, du_a).
    let gamma_a = [SVector::<f64, D>::zeros(), *u_a, *du_a];
    let gamma_b = [local.x, local.dx, local.ddx];
    let blend = |i: usize| -> SVector<f64, D> {
        let mut out = SVector::<f64, D>::zeros();
        for j in 0..3 {
            out += lambda[(i, j)] * gamma_a[j] + psi[(i, j)] * gamma_b[j];
        }
        out
    };
    let x_t = blend(0);
    let dx_t = blend(1);
    let ddx_t = blend(2);

    // Oversized blended rotations (possible on wild optimizer trial states)
    // would leave the scalar-kernel domain; report them instead of
    // evaluating kernels there.
    if G::rot_angle(&x_t) >= BLEND_ANGLE_MAX {
        return None;
    }

    // Jacobians of the blended local rows with respect to the six inputs.
    // Row-major: jt[i][slot] for i in {x_t, dx_t, ddx_t}.
    let zero = SMatrix::<f64, D, D>::zeros();
    let eye = SMatrix::<f64, D, D>::identity();
    let mut jt = [[zero; 6]; 3];
    for i in 0..3 {
        jt[i][JIN_UA] = lambda[(i, 1)] * eye;
        jt[i][JIN_DUA] = lambda[(i, 2)] * eye;
        for j in 0..3 {
            let w = psi[(i, j)];
            if w != 0.0 {
                jt[i][JIN_GA] += w * local.jac[j][IN_GA];
                jt[i][JIN_GB] += w * local.jac[j][IN_GB];
                jt[i][JIN_UB] += w * local.jac[j][IN_UB];
                jt[i][JIN_DUB] += w * local.jac[j][IN_DUB];
            }
        }
    }

    // Stage 3: back to the group.
    let g_t = G::comp(g_a, &G::exp(&x_t));
    let jr_t = G::jr(&x_t);
    let u_t = jr_t * dx_t;

    let cf = use_closed_form::<G, D>(mode, &x_t);
    let (du_t, jdu_x, jdu_dx) = if cf {
        let h = G::h1(&x_t, &dx_t);
        let du_t = jr_t * ddx_t + h * dx_t;
        let jdu_x = G::h1(&x_t, &ddx_t) + G::l11(&x_t, &dx_t, &dx_t);
        let jdu_dx = G::l12(&x_t, &dx_t, &dx_t) + h;
        (du_t, jdu_x, jdu_dx)
    } else {
        let ad_dx = G::ad(&dx_t);
        let bracket = ddx_t - 0.5 * ad_dx * u_t;
        let du_t = jr_t * bracket;
        let jdu_x = G::h1(&x_t, &bracket) - 0.5 * jr_t * ad_dx * G::h1(&x_t, &dx_t);
        let jdu_dx = 0.5 * jr_t * (G::ad(&u_t) - ad_dx * jr_t);
        (du_t, jdu_x, jdu_dx)
    };

    let ju_x = G::h1(&x_t, &dx_t);
    let adj_back = G::adj(&G::exp(&-x_t));

    let mut jac = [[zero; 6]; 3];
    for slot in 0..6 {
        jac[JOUT_G][slot] = jr_t * jt[0][slot];
        jac[JOUT_U][slot] = ju_x * jt[0][slot] + jr_t * jt[1][slot];
        jac[JOUT_DU][slot] = jdu_x * jt[0][slot] + jdu_dx * jt[1][slot] + jr_t * jt[2][slot];
    }
    jac[JOUT_G][JIN_GA] += adj_back;

    Some(Interpolated {
        g: g_t,
        u: u_t,
        du: du_t,
        jac,
    })
}
