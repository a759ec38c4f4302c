//! Factor-graph estimation over continuous-time trajectories.
//!
//! A [`Problem`] owns one or more trajectories on a shared support grid, an
//! optional rigid extrinsic between the first two trajectories, and a list
//! of [`Factor`]s.  Each factor evaluates to a whitened residual plus
//! whitened Jacobian blocks against the 18-dimensional tangents of the
//! support states it touches (and the 6-dimensional extrinsic tangent), in
//! the ordering documented in [`crate::traj`].
//!
//! Residuals are whitened at evaluation time: every factor carries the
//! transpose Cholesky factor of its information matrix (or a scalar inverse
//! standard deviation), so the total cost is simply the sum of squared
//! residuals and the normal equations follow from plain inner products.
//!
//! Evaluation is data-parallel when the `parallel` feature is enabled;
//! results are collected in factor order and accumulated sequentially, so
//! the assembled system is bitwise identical regardless of thread count.

pub mod linalg;
pub mod solver;

use nalgebra::{Cholesky, DMatrix, DVector, RowVector3};
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::kernel;
use crate::se3::{self, Pose};
use crate::so3;
use crate::traj::{chain, convert, GpTrajectory, Repr, TrajError};
use crate::{M18, M3, M6, V3};

/// Predicted ranges shorter than this would make the range direction
/// numerically meaningless; such measurements are skipped.
pub const MIN_RANGE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EstimError {
    #[error(transparent)]
    Traj(#[from] TrajError),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
    #[error("factor requires an extrinsic but the problem has none")]
    MissingExtrinsic,
    #[error("invalid problem configuration: {0}")]
    Config(String),
    #[error("{0} is not finite")]
    NonFinite(&'static str),
}

/// Optimization block a factor Jacobian refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    /// Support state `k` of trajectory `traj`; 18-dimensional tangent.
    Knot { traj: usize, k: usize },
    /// Shared extrinsic pose; 6-dimensional right tangent.
    Extrinsic,
}

/// Whitened residual and Jacobian blocks of one factor.
#[derive(Debug, Clone)]
pub struct FactorBlocks {
    pub r: DVector<f64>,
    pub entries: Vec<(Block, DMatrix<f64>)>,
}

impl FactorBlocks {
    fn empty() -> Self {
        Self {
            r: DVector::zeros(0),
            entries: Vec::new(),
        }
    }
}

/// How a sensor is mounted relative to the trajectory body frame.
#[derive(Debug, Clone, Copy)]
pub enum Mount {
    /// Known fixed mount.
    Fixed(Pose),
    /// The shared estimated extrinsic.
    Estimated,
}

/// One measurement or prior term.
#[derive(Debug, Clone)]
pub enum Factor {
    /// Process prior between support states `seg` and `seg + 1`.
    MotionPrior {
        traj: usize,
        seg: usize,
        sqrt_w: Box<M18>,
    },
    /// Range from a body-mounted tag to a fixed anchor.
    Range {
        traj: usize,
        t: f64,
        tag: V3,
        anchor: V3,
        meas: f64,
        inv_sigma: f64,
    },
    /// Signed point-to-plane distance of a sensor-frame point against a
    /// known plane `n . x + c = 0` with unit normal `n`.
    PointToPlane {
        traj: usize,
        t: f64,
        point: V3,
        normal: V3,
        offset: f64,
        inv_sigma: f64,
        mount: Mount,
    },
    /// Prior on the shared extrinsic.
    ExtrinsicPrior { prior: Pose, sqrt_w: Box<M6> },
    /// The pose of trajectory 1 equals the pose of trajectory 0 composed
    /// with the shared extrinsic, evaluated at time `t`.
    ExtrinsicConsistency { t: f64, sqrt_w: Box<M6> },
    /// Direct prior on one support state.
    KnotPrior {
        traj: usize,
        k: usize,
        mean: Box<crate::traj::SupportState>,
        sqrt_w: Box<M18>,
    },
}

/// Estimation problem: trajectories, optional extrinsic, factors.
#[derive(Debug, Clone)]
pub struct Problem {
    pub trajs: Vec<GpTrajectory>,
    pub extrinsic: Option<Pose>,
    pub factors: Vec<Factor>,
    /// Index of the first support state still being optimized; earlier
    /// states are held fixed (used by the fixed-lag smoother).
    pub active_start: usize,
    prior_whiteners: Vec<M18>,
    priors_added: Vec<usize>,
}

impl Problem {
    /// Create a problem over `trajs` with process-noise densities
    /// `sigma_gamma` (rotation) and `sigma_nu` (translation).  The densities
    /// define the motion-prior weights; smaller values bind the estimate
    /// more tightly to the prior kinematics.
    pub fn new(
        trajs: Vec<GpTrajectory>,
        sigma_gamma: &M3,
        sigma_nu: &M3,
    ) -> Result<Self, EstimError> {
        if trajs.is_empty() {
            return Err(EstimError::Config(
                "problem needs at least one trajectory".into(),
            ));
        }
        let prior_whiteners = trajs
            .iter()
            .map(|t| prior_whitener(t.repr(), t.dt(), sigma_gamma, sigma_nu))
            .collect::<Result<Vec<_>, _>>()?;
        let n = trajs.len();
        Ok(Self {
            trajs,
            extrinsic: None,
            factors: Vec::new(),
            active_start: 0,
            prior_whiteners,
            priors_added: vec![0; n],
        })
    }

    /// Append motion-prior factors for any segments not yet covered (call
    /// after extending the trajectories).
    pub fn sync_motion_priors(&mut self) {
        for ti in 0..self.trajs.len() {
            let segs = self.trajs[ti].n_knots().saturating_sub(1);
            for seg in self.priors_added[ti]..segs {
                self.factors.push(Factor::MotionPrior {
                    traj: ti,
                    seg,
                    sqrt_w: Box::new(self.prior_whiteners[ti]),
                });
            }
            self.priors_added[ti] = segs;
        }
    }
}

/// Whitening transform (transpose Cholesky factor of the information
/// matrix) for one motion-prior residual.
fn prior_whitener(repr: Repr, dt: f64, sigma_gamma: &M3, sigma_nu: &M3) -> Result<M18, EstimError> {
    let q_inv = kernel::qbar3_inv(dt);
    let sg_inv = sigma_gamma
        .try_inverse()
        .ok_or_else(|| EstimError::Config("rotation noise density is singular".into()))?;
    let sn_inv = sigma_nu
        .try_inverse()
        .ok_or_else(|| EstimError::Config("translation noise density is singular".into()))?;
    let w = match repr {
        Repr::So3R3 => {
            let mut w = M18::zeros();
            w.fixed_view_mut::<9, 9>(0, 0)
                .copy_from(&kernel::kron_m3(&q_inv, &sg_inv));
            w.fixed_view_mut::<9, 9>(9, 9)
                .copy_from(&kernel::kron_m3(&q_inv, &sn_inv));
            w
        }
        Repr::Se3 => {
            let mut s_inv = M6::zeros();
            s_inv.fixed_view_mut::<3, 3>(0, 0).copy_from(&sg_inv);
            s_inv.fixed_view_mut::<3, 3>(3, 3).copy_from(&sn_inv);
            kernel::kron_m6(&q_inv, &s_inv)
        }
    };
    let chol = Cholesky::new(w).ok_or_else(|| {
        EstimError::Config("motion-prior information is not positive definite".into())
    })?;
    Ok(chol.l().transpose())
}

/// Evaluate every factor.  With the `parallel` feature the evaluations run
/// data-parallel; the output order always matches the factor order, so both
/// paths feed the (sequential) normal-equation accumulation identically.
pub fn eval_all(problem: &Problem) -> Result<Vec<FactorBlocks>, EstimError> {
    #[cfg(feature = "parallel")]
    {
        problem
            .factors
            .par_iter()
            .map(|f| eval_factor(f, problem))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        eval_all_sequential(problem)
    }
}

/// Evaluate every factor on the calling thread, in factor order.
///
/// This is the fallback body of [`eval_all`] in builds without the
/// `parallel` feature; it is always compiled so the comparison benchmark
/// can measure both paths in one binary.
pub fn eval_all_sequential(problem: &Problem) -> Result<Vec<FactorBlocks>, EstimError> {
    problem
        .factors
        .iter()
        .map(|f| eval_factor(f, problem))
        .collect()
}

/// Evaluate one factor against the current problem state.
pub fn eval_factor(factor: &Factor, problem: &Problem) -> Result<FactorBlocks, EstimError> {
    match factor {
        Factor::MotionPrior { traj, seg, sqrt_w } => {
            motion_prior(&problem.trajs[*traj], *traj, *seg, sqrt_w)
        }
        Factor::Range {
            traj,
            t,
            tag,
            anchor,
            meas,
            inv_sigma,
        } => range(
            &problem.trajs[*traj],
            *traj,
            *t,
            tag,
            anchor,
            *meas,
            *inv_sigma,
        ),
        Factor::PointToPlane {
            traj,
            t,
            point,
            normal,
            offset,
            inv_sigma,
            mount,
        } => point_to_plane(
            problem, *traj, *t, point, normal, *offset, *inv_sigma, mount,
        ),
        Factor::ExtrinsicPrior { prior, sqrt_w } => {
            let e = problem
                .extrinsic
                .as_ref()
                .ok_or(EstimError::MissingExtrinsic)?;
            let r = se3::log(&prior.inverse().compose(e));
            let jac = se3::jr6_inv(&r);
            let r_w = **sqrt_w * r;
            let j_w = **sqrt_w * jac;
            Ok(FactorBlocks {
                r: DVector::from_column_slice(r_w.as_slice()),
                entries: vec![(Block::Extrinsic, dmat(&j_w))],
            })
        }
        Factor::ExtrinsicConsistency { t, sqrt_w } => consistency(problem, *t, sqrt_w),
        Factor::KnotPrior {
            traj,
            k,
            mean,
            sqrt_w,
        } => {
            let state = problem.trajs[*traj].knot(*k);
            let r = state.tangent_from(mean);
            let r_th: V3 = r.fixed_rows::<3>(0).into_owned();
            let mut jac = M18::identity();
            jac.fixed_view_mut::<3, 3>(0, 0)
                .copy_from(&so3::jr_inv(&r_th));
            let r_w = **sqrt_w * r;
            let j_w = **sqrt_w * jac;
            Ok(FactorBlocks {
                r: DVector::from_column_slice(r_w.as_slice()),
                entries: vec![(Block::Knot { traj: *traj, k: *k }, dmat(&j_w))],
            })
        }
    }
}

fn dmat<const R: usize, const C: usize>(m: &nalgebra::SMatrix<f64, R, C>) -> DMatrix<f64> {
    DMatrix::from_fn(R, C, |i, j| m[(i, j)])
}

/// Process prior between two adjacent support states.
fn motion_prior(
    traj: &GpTrajectory,
    ti: usize,
    seg: usize,
    sqrt_w: &M18,
) -> Result<FactorBlocks, EstimError> {
    let dt = traj.dt();
    let (f01, f02, f12) = (dt, 0.5 * dt * dt, dt);
    let a = traj.knot(seg);
    let b = traj.knot(seg + 1);
    let mode = traj.mode();

    let mut r = nalgebra::SVector::<f64, 18>::zeros();
    let mut ja = M18::zeros();
    let mut jb = M18::zeros();

    match traj.repr() {
        Repr::So3R3 => {
            let local = chain::local_state::<crate::group::So3, 3>(&a.r, &b.r, &b.w, &b.dw, mode);
            // Rotational rows: local chain state against its propagation.
            r.fixed_rows_mut::<3>(0)
                .copy_from(&(local.x - f01 * a.w - f02 * a.dw));
            r.fixed_rows_mut::<3>(3)
                .copy_from(&(local.dx - a.w - f12 * a.dw));
            r.fixed_rows_mut::<3>(6).copy_from(&(local.ddx - a.dw));
            // Translation rows: linear propagation in world coordinates.
            r.fixed_rows_mut::<3>(9)
                .copy_from(&(b.p - a.p - f01 * a.v - f02 * a.a));
            r.fixed_rows_mut::<3>(12)
                .copy_from(&(b.v - a.v - f12 * a.a));
            r.fixed_rows_mut::<3>(15).copy_from(&(b.a - a.a));

            let eye = M3::identity();
            for row in 0..3 {
                ja.fixed_view_mut::<3, 3>(3 * row, 0)
                    .copy_from(&local.jac[row][chain::IN_GA]);
                jb.fixed_view_mut::<3, 3>(3 * row, 0)
                    .copy_from(&local.jac[row][chain::IN_GB]);
                jb.fixed_view_mut::<3, 3>(3 * row, 3)
                    .copy_from(&local.jac[row][chain::IN_UB]);
                jb.fixed_view_mut::<3, 3>(3 * row, 6)
                    .copy_from(&local.jac[row][chain::IN_DUB]);
            }
            ja.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-f01 * eye));
            ja.fixed_view_mut::<3, 3>(0, 6).copy_from(&(-f02 * eye));
            ja.fixed_view_mut::<3, 3>(3, 3).copy_from(&(-eye));
            ja.fixed_view_mut::<3, 3>(3, 6).copy_from(&(-f12 * eye));
            ja.fixed_view_mut::<3, 3>(6, 6).copy_from(&(-eye));
            // Translation: identical propagation structure on (p, v, a).
            ja.fixed_view_mut::<3, 3>(9, 9).copy_from(&(-eye));
            ja.fixed_view_mut::<3, 3>(9, 12).copy_from(&(-f01 * eye));
            ja.fixed_view_mut::<3, 3>(9, 15).copy_from(&(-f02 * eye));
            ja.fixed_view_mut::<3, 3>(12, 12).copy_from(&(-eye));
            ja.fixed_view_mut::<3, 3>(12, 15).copy_from(&(-f12 * eye));
            ja.fixed_view_mut::<3, 3>(15, 15).copy_from(&(-eye));
            jb.fixed_view_mut::<3, 3>(9, 9).copy_from(&eye);
            jb.fixed_view_mut::<3, 3>(12, 12).copy_from(&eye);
            jb.fixed_view_mut::<3, 3>(15, 15).copy_from(&eye);
        }
        Repr::Se3 => {
            let in_a = convert::to_chain_input(a);
            let in_b = convert::to_chain_input(b);
            let local = chain::local_state::<crate::group::Se3, 6>(
                &in_a.g, &in_b.g, &in_b.tau, &in_b.dtau, mode,
            );
            r.fixed_rows_mut::<6>(0)
                .copy_from(&(local.x - f01 * in_a.tau - f02 * in_a.dtau));
            r.fixed_rows_mut::<6>(6)
                .copy_from(&(local.dx - in_a.tau - f12 * in_a.dtau));
            r.fixed_rows_mut::<6>(12)
                .copy_from(&(local.ddx - in_a.dtau));

            // Jacobians against the chain-input tangents, then through the
            // support-state conversion.
            let eye = M6::identity();
            let mut ja_chain = M18::zeros();
            let mut jb_chain = M18::zeros();
            for row in 0..3 {
                ja_chain
                    .fixed_view_mut::<6, 6>(6 * row, 0)
                    .copy_from(&local.jac[row][chain::IN_GA]);
                jb_chain
                    .fixed_view_mut::<6, 6>(6 * row, 0)
                    .copy_from(&local.jac[row][chain::IN_GB]);
                jb_chain
                    .fixed_view_mut::<6, 6>(6 * row, 6)
                    .copy_from(&local.jac[row][chain::IN_UB]);
                jb_chain
                    .fixed_view_mut::<6, 6>(6 * row, 12)
                    .copy_from(&local.jac[row][chain::IN_DUB]);
            }
            ja_chain
                .fixed_view_mut::<6, 6>(0, 6)
                .copy_from(&(-f01 * eye));
            ja_chain
                .fixed_view_mut::<6, 6>(0, 12)
                .copy_from(&(-f02 * eye));
            ja_chain.fixed_view_mut::<6, 6>(6, 6).copy_from(&(-eye));
            ja_chain
                .fixed_view_mut::<6, 6>(6, 12)
                .copy_from(&(-f12 * eye));
            ja_chain.fixed_view_mut::<6, 6>(12, 12).copy_from(&(-eye));
            ja = ja_chain * in_a.jac;
            jb = jb_chain * in_b.jac;
        }
    }

    let r_w = sqrt_w * r;
    let ja_w = sqrt_w * ja;
    let jb_w = sqrt_w * jb;
    Ok(FactorBlocks {
        r: DVector::from_column_slice(r_w.as_slice()),
        entries: vec![
            (Block::Knot { traj: ti, k: seg }, dmat(&ja_w)),
            (
                Block::Knot {
                    traj: ti,
                    k: seg + 1,
                },
                dmat(&jb_w),
            ),
        ],
    })
}

/// Range between a body-mounted tag and a fixed world anchor.
fn range(
    traj: &GpTrajectory,
    ti: usize,
    t: f64,
    tag: &V3,
    anchor: &V3,
    meas: f64,
    inv_sigma: f64,
) -> Result<FactorBlocks, EstimError> {
    let it = traj.interpolate(t)?;
    let y = it.state.r * tag + it.state.p;
    let diff = y - anchor;
    let dist = diff.norm();
    if dist < MIN_RANGE {
        return Ok(FactorBlocks::empty());
    }
    let n_hat = diff / dist;
    let r = (dist - meas) * inv_sigma;

    // Residual row against the interpolated-state tangent.
    let mut row = nalgebra::SMatrix::<f64, 1, 18>::zeros();
    let nr: RowVector3<f64> = (n_hat.transpose() * it.state.r) * (-so3::wedge(tag));
    row.fixed_view_mut::<1, 3>(0, 0).copy_from(&nr);
    row.fixed_view_mut::<1, 3>(0, 9)
        .copy_from(&n_hat.transpose());

    let ja = inv_sigma * row * it.jac_a;
    let jb = inv_sigma * row * it.jac_b;
    Ok(FactorBlocks {
        r: DVector::from_element(1, r),
        entries: vec![
            (
                Block::Knot {
                    traj: ti,
                    k: it.seg,
                },
                dmat(&ja),
            ),
            (
                Block::Knot {
                    traj: ti,
                    k: it.seg + 1,
                },
                dmat(&jb),
            ),
        ],
    })
}

/// Signed distance of a transformed sensor point against a world plane.
#[allow(clippy::too_many_arguments)]
fn point_to_plane(
    problem: &Problem,
    ti: usize,
    t: f64,
    point: &V3,
    normal: &V3,
    offset: f64,
    inv_sigma: f64,
    mount: &Mount,
) -> Result<FactorBlocks, EstimError> {
    let traj = &problem.trajs[ti];
    let it = traj.interpolate(t)?;
    let (mount_pose, estimated) = match mount {
        Mount::Fixed(p) => (*p, false),
        Mount::Estimated => (
            *problem
                .extrinsic
                .as_ref()
                .ok_or(EstimError::MissingExtrinsic)?,
            true,
        ),
    };
    let body_pt = mount_pose.r * point + mount_pose.p;
    let y = it.state.r * body_pt + it.state.p;
    let r = (normal.dot(&y) + offset) * inv_sigma;

    let mut row = nalgebra::SMatrix::<f64, 1, 18>::zeros();
    let nr: RowVector3<f64> = (normal.transpose() * it.state.r) * (-so3::wedge(&body_pt));
    row.fixed_view_mut::<1, 3>(0, 0).copy_from(&nr);
    row.fixed_view_mut::<1, 3>(0, 9)
        .copy_from(&normal.transpose());

    let ja = inv_sigma * row * it.jac_a;
    let jb = inv_sigma * row * it.jac_b;
    let mut entries = vec![
        (
            Block::Knot {
                traj: ti,
                k: it.seg,
            },
            dmat(&ja),
        ),
        (
            Block::Knot {
                traj: ti,
                k: it.seg + 1,
            },
            dmat(&jb),
        ),
    ];
    if estimated {
        let nrt = normal.transpose() * it.state.r * mount_pose.r;
        let mut je = nalgebra::SMatrix::<f64, 1, 6>::zeros();
        je.fixed_view_mut::<1, 3>(0, 0)
            .copy_from(&(nrt * (-so3::wedge(point))));
        je.fixed_view_mut::<1, 3>(0, 3).copy_from(&nrt);
        entries.push((Block::Extrinsic, dmat(&(inv_sigma * je))));
    }
    Ok(FactorBlocks {
        r: DVector::from_element(1, r),
        entries,
    })
}

/// Selector from the interpolated support-state tangent to the pose's
/// rigid-motion right tangent.
fn pose_selector(r_t: &M3) -> nalgebra::SMatrix<f64, 6, 18> {
    let mut s = nalgebra::SMatrix::<f64, 6, 18>::zeros();
    s.fixed_view_mut::<3, 3>(0, 0).copy_from(&M3::identity());
    s.fixed_view_mut::<3, 3>(3, 9).copy_from(&r_t.transpose());
    s
}

/// Pose of trajectory 1 against the pose of trajectory 0 composed with the
/// shared extrinsic.
fn consistency(problem: &Problem, t: f64, sqrt_w: &M6) -> Result<FactorBlocks, EstimError> {
    if problem.trajs.len() < 2 {
        return Err(EstimError::Config(
            "extrinsic consistency needs two trajectories".into(),
        ));
    }
    let e = problem
        .extrinsic
        .as_ref()
        .ok_or(EstimError::MissingExtrinsic)?;
    let it0 = problem.trajs[0].interpolate(t)?;
    let it1 = problem.trajs[1].interpolate(t)?;
    let t0 = Pose::new(it0.state.r, it0.state.p);
    let t1 = Pose::new(it1.state.r, it1.state.p);

    let r = se3::log(&t0.compose(e).inverse().compose(&t1));
    let jr_inv_r = se3::jr6_inv(&r);
    let jl_inv_r = se3::jr6_inv(&(-r));

    let d_t1 = jr_inv_r;
    let d_t0 = -jl_inv_r * se3::adj(&e.inverse());
    let d_e = -jl_inv_r;

    let s0 = pose_selector(&it0.state.r);
    let s1 = pose_selector(&it1.state.r);

    let j0 = d_t0 * s0;
    let j1 = d_t1 * s1;
    let r_w = sqrt_w * r;
    let entries = vec![
        (
            Block::Knot {
                traj: 0,
                k: it0.seg,
            },
            dmat(&(sqrt_w * j0 * it0.jac_a)),
        ),
        (
            Block::Knot {
                traj: 0,
                k: it0.seg + 1,
            },
            dmat(&(sqrt_w * j0 * it0.jac_b)),
        ),
        (
            Block::Knot {
                traj: 1,
                k: it1.seg,
            },
            dmat(&(sqrt_w * j1 * it1.jac_a)),
        ),
        (
            Block::Knot {
                traj: 1,
                k: it1.seg + 1,
            },
            dmat(&(sqrt_w * j1 * it1.jac_b)),
        ),
        (Block::Extrinsic, dmat(&(sqrt_w * d_e))),
    ];
    Ok(FactorBlocks {
        r: DVector::from_column_slice(r_w.as_slice()),
        entries,
    })
}
