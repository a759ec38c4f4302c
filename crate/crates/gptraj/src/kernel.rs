//! Scalar kernel matrices for a white-noise-on-jerk Gauss process prior.
//!
//! The prior treats each local coordinate as an order-`N` integrator chain
//! driven by white noise on the highest derivative.  For the third-order
//! trajectory used throughout this crate (`N = 3`: value, rate, acceleration)
//! the matrices are 3x3 and act blockwise on stacked 3- or 6-vectors via
//! Kronecker products.
//!
//! Conventions:
//! - State ordering is value first, highest derivative last.
//! - `fbar(dt)` maps the state at `t` to the mean state at `t + dt`.
//! - `qbar(dt)` is the accumulated process-noise covariance over `dt` for a
//!   unit spectral density; callers scale it by their actual density.
//! - `lambda_psi3(dt, s)` returns the pair of interpolation weight matrices
//!   that blend the bracketing support states at offset `s` into `[0, dt]`.
//!
//! Generic orders 2 through 6 are available for the dense helpers; the
//! statically sized fast path is fixed at order 3.

use nalgebra::DMatrix;

use crate::{M18, M3, M6, M9};

/// Factorials 0! through 5!, enough for orders up to 6.
const FACT: [f64; 6] = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0];

/// Interpolation offsets are clamped into `[0, dt]`; anything farther out of
/// range than this is a caller bug rather than accumulated rounding.
const OFFSET_SLACK: f64 = 1e-9;

/// Below this support spacing the raw noise covariance is so ill-conditioned
/// that naive inversion would lose all precision; the scaled inverse used
/// here stays accurate, but the spacing is almost certainly a configuration
/// mistake, so warn.
const DT_CONDITION_WARN: f64 = 1e-3;

fn check_order(n: usize) {
    assert!(
        (2..=6).contains(&n),
        "kernel order must be between 2 and 6, got {n}"
    );
}

/// State-transition matrix for an order-`n` integrator chain over `dt`.
///
/// Entry `(i, j)` is `dt^(j - i) / (j - i)!` for `j >= i`, zero below the
/// diagonal.
pub fn fbar(n: usize, dt: f64) -> DMatrix<f64> {
    check_order(n);
    DMatrix::from_fn(n, n, |i, j| {
        if j >= i {
            dt.powi((j - i) as i32) / FACT[j - i]
        } else {
            0.0
        }
    })
}

/// Process-noise covariance for an order-`n` chain over `dt` at unit spectral
/// density.
///
/// Entry `(i, j)` is `dt^(2d + 1 - i - j) / ((2d + 1 - i - j) (d - i)! (d - j)!)`
/// with `d = n - 1`.
pub fn qbar(n: usize, dt: f64) -> DMatrix<f64> {
    check_order(n);
    let d = n - 1;
    DMatrix::from_fn(n, n, |i, j| {
        let pow = 2 * d + 1 - i - j;
        dt.powi(pow as i32) / (pow as f64 * FACT[d - i] * FACT[d - j])
    })
}

/// Order-3 state transition, statically sized.
pub fn fbar3(dt: f64) -> M3 {
    M3::new(1.0, dt, 0.5 * dt * dt, 0.0, 1.0, dt, 0.0, 0.0, 1.0)
}

/// Order-3 process-noise covariance, statically sized.
pub fn qbar3(dt: f64) -> M3 {
    let d2 = dt * dt;
    let d3 = d2 * dt;
    let d4 = d2 * d2;
    let d5 = d4 * dt;
    M3::new(
        d5 / 20.0,
        d4 / 8.0,
        d3 / 6.0,
        d4 / 8.0,
        d3 / 3.0,
        d2 / 2.0,
        d3 / 6.0,
        d2 / 2.0,
        dt,
    )
}

/// Inverse of [`qbar3`].
///
/// The covariance is scale-similar: `qbar3(dt) = S qbar3(1) S` with
/// `S = diag(dt^2.5, dt^1.5, dt^0.5)`, so the inverse is computed from the
/// well-conditioned unit-spacing matrix and rescaled.  This keeps full
/// precision even for tiny spacings where the raw matrix has condition
/// numbers beyond 1/eps.
pub fn qbar3_inv(dt: f64) -> M3 {
    assert!(dt > 0.0, "support spacing must be positive, got {dt}");
    if dt < DT_CONDITION_WARN {
        log::warn!(
            "support spacing {dt:.3e} is extremely small; the noise covariance \
             has condition number on the order of {:.1e}",
            20.0 / (dt * dt * dt * dt)
        );
    }
    let unit_inv = nalgebra::Cholesky::new(qbar3(1.0))
        .expect("unit-spacing noise covariance is positive definite")
        .inverse();
    let rdt = dt.sqrt();
    // Inverse scaling S^-1 = diag(dt^-2.5, dt^-1.5, dt^-0.5).
    let s_inv = [1.0 / (d2(dt) * rdt), 1.0 / (dt * rdt), 1.0 / rdt];
    M3::from_fn(|i, j| s_inv[i] * unit_inv[(i, j)] * s_inv[j])
}

fn d2(dt: f64) -> f64 {
    dt * dt
}

/// Interpolation weight matrices at offset `s` into a segment of length `dt`.
///
/// Returns `(lambda, psi)` such that the interpolated local state is
/// `lambda * gamma_a + psi * gamma_b` (applied blockwise per coordinate).
/// The limits `(I, 0)` at `s = 0` and `(0, I)` at `s = dt` are mathematical
/// identities and are returned exactly, so support states are reproduced to
/// the last bit instead of through inversion rounding.
pub fn lambda_psi3(dt: f64, s: f64) -> (M3, M3) {
    assert!(dt > 0.0, "segment length must be positive, got {dt}");
    assert!(
        (-OFFSET_SLACK..=dt + OFFSET_SLACK).contains(&s),
        "interpolation offset {s} outside segment [0, {dt}]"
    );
    let s = s.clamp(0.0, dt);
    if s == 0.0 {
        return (M3::identity(), M3::zeros());
    }
    if s == dt {
        return (M3::zeros(), M3::identity());
    }
    let psi = qbar3(s) * fbar3(dt - s).transpose() * qbar3_inv(dt);
    let lambda = fbar3(s) - psi * fbar3(dt);
    (lambda, psi)
}

/// Kronecker product of a 3x3 weight matrix with a 3x3 block.
pub fn kron_m3(a: &M3, b: &M3) -> M9 {
    let mut out = M9::zeros();
    for i in 0..3 {
        for j in 0..3 {
            out.fixed_view_mut::<3, 3>(3 * i, 3 * j)
                .copy_from(&(a[(i, j)] * b));
        }
    }
    out
}

/// Kronecker product of a 3x3 weight matrix with a 6x6 block.
pub fn kron_m6(a: &M3, b: &M6) -> M18 {
    let mut out = M18::zeros();
    for i in 0..3 {
        for j in 0..3 {
            out.fixed_view_mut::<6, 6>(6 * i, 6 * j)
                .copy_from(&(a[(i, j)] * b));
        }
    }
    out
}
