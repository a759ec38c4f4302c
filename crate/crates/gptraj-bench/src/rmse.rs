//! Trajectory accuracy metrics.
//!
//! Estimates are compared against the analytic ground truth on a fixed
//! dense time grid with no alignment step: the world frame is already
//! anchored by the fixed anchors or the known room, so any offset is
//! genuine estimation error. Position error is the Euclidean distance of
//! the interpolated position; rotation error is the norm of the rotation
//! logarithm of the relative orientation, in radians.

use anyhow::{bail, Result};
use gptraj::se3::Pose;
use gptraj::so3;
use gptraj::traj::GpTrajectory;

/// Evaluation sampling period in seconds: dense enough to expose the error
/// between support times, not just at them.
pub const EVAL_PERIOD: f64 = 0.01;

/// Root-mean-square position and rotation errors of `traj` against the
/// ground-truth pose function, sampled every [`EVAL_PERIOD`] over
/// `[0, horizon]` inclusive.
pub fn rmse_vs_gt<F: Fn(f64) -> Pose>(
    traj: &GpTrajectory,
    gt_pose: F,
    horizon: f64,
) -> Result<(f64, f64)> {
    let t0 = traj.t0();
    if horizon < t0 || traj.t_end() + 1e-9 < horizon {
        bail!(
            "trajectory domain [{}, {}] does not cover the evaluation span [{}, {}]",
            t0,
            traj.t_end(),
            t0,
            horizon
        );
    }
    let n = ((horizon - t0) / EVAL_PERIOD + 0.5).floor() as usize;
    if n == 0 {
        bail!("evaluation span is shorter than one sampling period");
    }
    let mut pos_sq = 0.0;
    let mut rot_sq = 0.0;
    for i in 0..=n {
        let t = (t0 + i as f64 * EVAL_PERIOD).min(traj.t_end());
        let est = traj.interpolate(t)?.state;
        let truth = gt_pose(t);
        pos_sq += (est.p - truth.p).norm_squared();
        rot_sq += so3::log(&(truth.r.transpose() * est.r)).norm_squared();
    }
    let m = (n + 1) as f64;
    Ok(((pos_sq / m).sqrt(), (rot_sq / m).sqrt()))
}
