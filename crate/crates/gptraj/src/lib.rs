//! Continuous-time trajectory estimation with third-order (white-noise-on-jerk)
//! Gaussian-process priors on `SO(3)xR3` and `SE(3)`.
//!
//! The crate is layered bottom-up:
//!
//! * [`gfun`]: scalar trigonometric kernels shared by every rotation map.
//! * [`so3`] / [`se3`]: Lie-group operations and the analytic derivative maps
//!   of the right Jacobian and its inverse.
//! * [`group`]: a small trait unifying both groups so the interpolation chain
//!   is written once.
//! * [`kernel`]: state-transition and process-noise matrices of the jerk-driven
//!   integrator chain, plus the interpolation weights.
//! * [`traj`]: support-state trajectories, continuous-time interpolation with
//!   analytic Jacobians, closed-form and approximated kinematics.
//! * [`estim`]: factors, the sparse damped Gauss-Newton solver, and a
//!   fixed-lag driver.
//! * [`sim`]: synthetic ground-truth trajectories and range/lidar simulators.
//!
//! Conventions used throughout:
//!
//! * Rotations are world-from-body; `Exp`/`Log` follow the right-perturbation
//!   convention, so `R ~ R_hat * Exp(dtheta)`.
//! * Angular velocity and acceleration are body-frame; position, velocity and
//!   linear acceleration are world-frame. Units are SI (rad, m, s).
//! * All small fixed-size linear algebra is `nalgebra` statically sized.

pub mod estim;
pub mod gfun;
pub mod group;
pub mod kernel;
pub mod numdiff;
pub mod se3;
pub mod sim;
pub mod so3;
pub mod traj;

/// 3-vector of `f64`.
pub type V3 = nalgebra::Vector3<f64>;
/// 3x3 matrix of `f64`.
pub type M3 = nalgebra::Matrix3<f64>;
/// 6-vector of `f64`.
pub type V6 = nalgebra::Vector6<f64>;
/// 6x6 matrix of `f64`.
pub type M6 = nalgebra::Matrix6<f64>;
/// 9-vector (stacked third-order scalar-block state).
pub type V9 = nalgebra::SVector<f64, 9>;
/// 9x9 matrix.
pub type M9 = nalgebra::SMatrix<f64, 9, 9>;
/// 18-vector (full support-knot tangent).
pub type V18 = nalgebra::SVector<f64, 18>;
/// 18x18 matrix (knot-to-knot Jacobians).
pub type M18 = nalgebra::SMatrix<f64, 18, 18>;
