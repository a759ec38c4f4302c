//! Continuous-time trajectory over uniformly spaced support states.
//!
//! A trajectory stores support states ("knots") at times `t0 + k dt` and
//! interpolates between them under a white-noise-on-jerk prior using the
//! kinematic chain in [`chain`].  Two representations are available:
//!
//! - [`Repr::So3R3`]: rotation interpolated on the rotation group,
//!   translation interpolated independently as a vector chain.
//! - [`Repr::Se3`]: rotation and translation interpolated jointly on the
//!   rigid-motion group, which couples them through the pose twist.
//!
//! Conventions:
//! - Rotations are world-from-body; `w`/`dw` are body-frame angular rate and
//!   acceleration in rad/s and rad/s^2; `p`/`v`/`a` are world-frame position,
//!   velocity, and acceleration in SI units.
//! - A support-state tangent is the 18-vector
//!   `(dtheta, dw, ddw, dp, dv, da)`: the rotation moves by a right
//!   perturbation `R Exp(dtheta)` and every other component additively.
//! - Interpolation Jacobians are with respect to the tangents of the two
//!   bracketing knots, in the same ordering.

pub mod chain;
pub mod convert;

use std::io::{BufRead, Write};

use nalgebra::{Quaternion, Rotation3, UnitQuaternion};
use thiserror::Error;

use crate::group::{Se3, So3};
use crate::kernel;
use crate::so3;
use crate::{M18, M3, V18, V3};

pub use chain::Mode;

/// Tolerance for accepting a query time on the boundary of the trajectory
/// domain despite floating-point time arithmetic.
const TIME_SLACK: f64 = 1e-9;

/// Maximum relative deviation of sample spacing accepted as uniform.
const SPACING_TOL: f64 = 1e-6;

/// Trajectory representation: which manifold the interpolation runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Repr {
    /// Split interpolation: rotation group x linear translation chain.
    So3R3,
    /// Coupled interpolation on the rigid-motion group.
    Se3,
}

/// One support state: pose plus body-frame rate/acceleration and world-frame
/// linear derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportState {
    /// World-from-body rotation.
    pub r: M3,
    /// Body-frame angular rate.
    pub w: V3,
    /// Body-frame angular acceleration.
    pub dw: V3,
    /// World-frame position.
    pub p: V3,
    /// World-frame velocity.
    pub v: V3,
    /// World-frame acceleration.
    pub a: V3,
}

impl Default for SupportState {
    fn default() -> Self {
        Self::identity()
    }
}

impl SupportState {
    /// State at the origin with all derivatives zero.
    pub fn identity() -> Self {
        Self {
            r: M3::identity(),
            w: V3::zeros(),
            dw: V3::zeros(),
            p: V3::zeros(),
            v: V3::zeros(),
            a: V3::zeros(),
        }
    }

    /// Apply an 18-dimensional tangent step: right perturbation on the
    /// rotation, additive everywhere else.
    pub fn apply_tangent(&mut self, delta: &V18) {
        let dth: V3 = delta.fixed_rows::<3>(0).into_owned();
        self.r *= so3::exp(&dth);
        self.w += delta.fixed_rows::<3>(3);
        self.dw += delta.fixed_rows::<3>(6);
        self.p += delta.fixed_rows::<3>(9);
        self.v += delta.fixed_rows::<3>(12);
        self.a += delta.fixed_rows::<3>(15);
    }

    /// Tangent that carries `base` onto `self` (inverse of
    /// [`SupportState::apply_tangent`] up to linearization of the rotation).
    pub fn tangent_from(&self, base: &SupportState) -> V18 {
        let mut d = V18::zeros();
        d.fixed_rows_mut::<3>(0)
            .copy_from(&so3::log(&(base.r.transpose() * self.r)));
        d.fixed_rows_mut::<3>(3).copy_from(&(self.w - base.w));
        d.fixed_rows_mut::<3>(6).copy_from(&(self.dw - base.dw));
        d.fixed_rows_mut::<3>(9).copy_from(&(self.p - base.p));
        d.fixed_rows_mut::<3>(12).copy_from(&(self.v - base.v));
        d.fixed_rows_mut::<3>(15).copy_from(&(self.a - base.a));
        d
    }
}

/// Errors from trajectory construction, queries, and serialization.
#[derive(Debug, Error)]
pub enum TrajError {
    #[error("query time {t} outside trajectory domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },
    #[error("trajectory needs at least {needed} support states, has {got}")]
    TooFewKnots { needed: usize, got: usize },
    #[error("support spacing must be positive, got {0}")]
    BadSpacing(f64),
    #[error(
        "samples are not uniformly spaced: spacing {got} at index {index}, expected {expected}"
    )]
    NonUniform {
        index: usize,
        got: f64,
        expected: f64,
    },
    #[error("blended rotation at t = {t} left the interpolation kernel domain")]
    BlendDomain { t: f64 },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Interpolated state with Jacobians against the bracketing support states.
#[derive(Debug, Clone)]
pub struct InterpolatedState {
    pub state: SupportState,
    /// Index of the left bracketing knot.
    pub seg: usize,
    /// Offset into the segment, in seconds from the left knot.
    pub offset: f64,
    /// Jacobian of the output tangent against the left knot's tangent.
    pub jac_a: M18,
    /// Jacobian of the output tangent against the right knot's tangent.
    pub jac_b: M18,
}

/// Uniformly spaced support states with on-manifold interpolation.
#[derive(Debug, Clone)]
pub struct GpTrajectory {
    repr: Repr,
    mode: Mode,
    t0: f64,
    dt: f64,
    knots: Vec<SupportState>,
}

impl GpTrajectory {
    pub fn new(
        repr: Repr,
        mode: Mode,
        t0: f64,
        dt: f64,
        knots: Vec<SupportState>,
    ) -> Result<Self, TrajError> {
        if dt.is_nan() || dt <= 0.0 {
            return Err(TrajError::BadSpacing(dt));
        }
        if knots.is_empty() {
            return Err(TrajError::TooFewKnots { needed: 1, got: 0 });
        }
        Ok(Self {
            repr,
            mode,
            t0,
            dt,
            knots,
        })
    }

    /// Build from `(time, state)` samples, validating uniform spacing.
    pub fn from_samples(
        repr: Repr,
        mode: Mode,
        samples: &[(f64, SupportState)],
    ) -> Result<Self, TrajError> {
        if samples.len() < 2 {
            return Err(TrajError::TooFewKnots {
                needed: 2,
                got: samples.len(),
            });
        }
        let t0 = samples[0].0;
        let dt = samples[1].0 - samples[0].0;
        if dt.is_nan() || dt <= 0.0 {
            return Err(TrajError::BadSpacing(dt));
        }
        for (i, pair) in samples.iter().enumerate().skip(1) {
            let got = pair.0 - samples[i - 1].0;
            if (got - dt).abs() > SPACING_TOL * dt {
                return Err(TrajError::NonUniform {
                    index: i,
                    got,
                    expected: dt,
                });
            }
        }
        Self::new(repr, mode, t0, dt, samples.iter().map(|s| s.1).collect())
    }

    pub fn repr(&self) -> Repr {
        self.repr
    }
    pub fn mode(&self) -> Mode {
        self.mode
    }
    pub fn t0(&self) -> f64 {
        self.t0
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn t_end(&self) -> f64 {
        self.t0 + (self.knots.len() - 1) as f64 * self.dt
    }
    pub fn n_knots(&self) -> usize {
        self.knots.len()
    }
    pub fn knot(&self, k: usize) -> &SupportState {
        &self.knots[k]
    }
    pub fn knot_mut(&mut self, k: usize) -> &mut SupportState {
        &mut self.knots[k]
    }
    pub fn knot_time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }
    pub fn knots(&self) -> &[SupportState] {
        &self.knots
    }

    /// Apply a tangent step to knot `k`.
    pub fn apply_step(&mut self, k: usize, delta: &V18) {
        self.knots[k].apply_tangent(delta);
    }

    /// Grow the trajectory until its domain covers `t`, propagating the last
    /// support state forward: constant body rate on the rotation (angular
    /// acceleration reset to zero) and constant-acceleration integration on
    /// the translation.
    pub fn extend_to(&mut self, t: f64) {
        while self.t_end() < t - TIME_SLACK {
            let last = *self.knots.last().expect("trajectory is never empty");
            let dt = self.dt;
            let mut next = last;
            next.r = last.r * so3::exp(&(last.w * dt));
            next.dw = V3::zeros();
            next.p = last.p + last.v * dt + 0.5 * dt * dt * last.a;
            next.v = last.v + last.a * dt;
            self.knots.push(next);
        }
    }

    /// Locate the segment containing `t` and the offset into it.
    fn locate(&self, t: f64) -> Result<(usize, f64), TrajError> {
        if self.knots.len() < 2 {
            return Err(TrajError::TooFewKnots {
                needed: 2,
                got: self.knots.len(),
            });
        }
        let lo = self.t0;
        let hi = self.t_end();
        if t < lo - TIME_SLACK || t > hi + TIME_SLACK {
            return Err(TrajError::OutOfDomain { t, lo, hi });
        }
        let rel = (t - self.t0) / self.dt;
        let seg = (rel.floor().max(0.0) as usize).min(self.knots.len() - 2);
        let offset = (t - self.knot_time(seg)).clamp(0.0, self.dt);
        Ok((seg, offset))
    }

    /// Interpolate the state at time `t` with Jacobians against the two
    /// bracketing support states.
    pub fn interpolate(&self, t: f64) -> Result<InterpolatedState, TrajError> {
        let (seg, offset) = self.locate(t)?;
        let (lambda, psi) = kernel::lambda_psi3(self.dt, offset);
        let a = &self.knots[seg];
        let b = &self.knots[seg + 1];

        let (state, jac_a, jac_b) = match self.repr {
            Repr::So3R3 => interp_split(a, b, &lambda, &psi, self.mode),
            Repr::Se3 => interp_coupled(a, b, &lambda, &psi, self.mode),
        }
        .ok_or(TrajError::BlendDomain { t })?;

        Ok(InterpolatedState {
            state,
            seg,
            offset,
            jac_a,
            jac_b,
        })
    }

    /// Write one line per support state: time, unit quaternion (w x y z),
    /// body rate, body angular acceleration, world position, velocity,
    /// acceleration.
    pub fn write_knots<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "# t, qw, qx, qy, qz, wx, wy, wz, ax, ay, az, px, py, pz, vx, vy, vz, aax, aay, aaz"
        )?;
        for (k, s) in self.knots.iter().enumerate() {
            let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(s.r));
            writeln!(
                out,
                "{}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {}",
                self.knot_time(k),
                q.w,
                q.i,
                q.j,
                q.k,
                s.w[0],
                s.w[1],
                s.w[2],
                s.dw[0],
                s.dw[1],
                s.dw[2],
                s.p[0],
                s.p[1],
                s.p[2],
                s.v[0],
                s.v[1],
                s.v[2],
                s.a[0],
                s.a[1],
                s.a[2]
            )?;
        }
        Ok(())
    }

    /// Read `(time, state)` samples written by [`GpTrajectory::write_knots`].
    pub fn read_knots<R: BufRead>(input: R) -> Result<Vec<(f64, SupportState)>, TrajError> {
        let mut samples = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<f64> = trimmed
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| TrajError::Parse {
                    line: idx + 1,
                    msg: e.to_string(),
                })?;
            if fields.len() != 20 {
                return Err(TrajError::Parse {
                    line: idx + 1,
                    msg: format!("expected 20 fields, got {}", fields.len()),
                });
            }
            let q = UnitQuaternion::from_quaternion(Quaternion::new(
                fields[1], fields[2], fields[3], fields[4],
            ));
            let state = SupportState {
                r: *q.to_rotation_matrix().matrix(),
                w: V3::new(fields[5], fields[6], fields[7]),
                dw: V3::new(fields[8], fields[9], fields[10]),
                p: V3::new(fields[11], fields[12], fields[13]),
                v: V3::new(fields[14], fields[15], fields[16]),
                a: V3::new(fields[17], fields[18], fields[19]),
            };
            samples.push((fields[0], state));
        }
        Ok(samples)
    }
}

/// Split interpolation: rotation chain on the rotation group, translation
/// blended linearly.  Cross-coupling blocks are identically zero.
fn interp_split(
    a: &SupportState,
    b: &SupportState,
    lambda: &M3,
    psi: &M3,
    mode: Mode,
) -> Option<(SupportState, M18, M18)> {
    let rot =
        chain::interpolate::<So3, 3>(&a.r, &a.w, &a.dw, &b.r, &b.w, &b.dw, lambda, psi, mode)?;

    let pa = [a.p, a.v, a.a];
    let pb = [b.p, b.v, b.a];
    let blend = |i: usize| -> V3 {
        let mut out = V3::zeros();
        for j in 0..3 {
            out += lambda[(i, j)] * pa[j] + psi[(i, j)] * pb[j];
        }
        out
    };

    let state = SupportState {
        r: rot.g,
        w: rot.u,
        dw: rot.du,
        p: blend(0),
        v: blend(1),
        a: blend(2),
    };

    let fill = |weights: &M3, rot_jac: &dyn Fn(usize, usize) -> M3| -> M18 {
        let mut j = M18::zeros();
        for (out_row, out_slot) in [(0, chain::JOUT_G), (1, chain::JOUT_U), (2, chain::JOUT_DU)] {
            for (in_col, in_slot) in [(0, chain::JIN_GA), (1, chain::JIN_UA), (2, chain::JIN_DUA)] {
                j.fixed_view_mut::<3, 3>(3 * out_row, 3 * in_col)
                    .copy_from(&rot_jac(out_slot, in_slot));
            }
        }
        for i in 0..3 {
            for k in 0..3 {
                let w = weights[(i, k)];
                if w != 0.0 {
                    j.fixed_view_mut::<3, 3>(9 + 3 * i, 9 + 3 * k)
                        .copy_from(&(w * M3::identity()));
                }
            }
        }
        j
    };

    let jac_a = fill(lambda, &|out, _in| rot.jac[out][_in]);
    // The right-knot slots sit three positions later in the chain layout.
    let jac_b = fill(psi, &|out, in_slot| rot.jac[out][in_slot + 3]);
    Some((state, jac_a, jac_b))
}

/// Coupled interpolation on the rigid-motion group: convert the support
/// states to pose/twist form, run the chain, convert back.  The Jacobians
/// are the sandwich of the three stages.
fn interp_coupled(
    a: &SupportState,
    b: &SupportState,
    lambda: &M3,
    psi: &M3,
    mode: Mode,
) -> Option<(SupportState, M18, M18)> {
    let in_a = convert::to_chain_input(a);
    let in_b = convert::to_chain_input(b);

    let it = chain::interpolate::<Se3, 6>(
        &in_a.g, &in_a.tau, &in_a.dtau, &in_b.g, &in_b.tau, &in_b.dtau, lambda, psi, mode,
    )?;

    let out = convert::from_chain_output(&it.g, &it.u, &it.du);

    let stack = |slots: [usize; 3]| -> M18 {
        let mut m = M18::zeros();
        for (row, out_slot) in [chain::JOUT_G, chain::JOUT_U, chain::JOUT_DU]
            .into_iter()
            .enumerate()
        {
            for (col, in_slot) in slots.into_iter().enumerate() {
                m.fixed_view_mut::<6, 6>(6 * row, 6 * col)
                    .copy_from(&it.jac[out_slot][in_slot]);
            }
        }
        m
    };
    let chain_a = stack([chain::JIN_GA, chain::JIN_UA, chain::JIN_DUA]);
    let chain_b = stack([chain::JIN_GB, chain::JIN_UB, chain::JIN_DUB]);

    let jac_a = out.jac * chain_a * in_a.jac;
    let jac_b = out.jac * chain_b * in_b.jac;
    Some((out.state, jac_a, jac_b))
}
