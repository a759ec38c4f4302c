//! Central finite-difference oracles for validating analytic derivatives.
//!
//! Test support, exposed publicly so every test target (and downstream
//! acceptance suites) can difference the same way. Central differences have
//! truncation error `O(h^2)`; with the default step the total error is well
//! below the `1e-5` relative tolerance the derivative tests assert.

use nalgebra::{SMatrix, SVector};

/// Default step for central differences: balances `O(h^2)` truncation against
/// `O(eps/h)` rounding for functions with order-one curvature.
pub const DEFAULT_STEP: f64 = 5e-6;

/// Central difference of a scalar function.
pub fn diff_scalar<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Richardson-extrapolated central difference, `O(h^4)` truncation. Lets the
/// step stay large enough that value rounding is not amplified, which matters
/// when the differenced function itself carries a few ulps of noise.
pub fn diff_scalar_rich<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
    let d2 = (f(x + 0.5 * h) - f(x - 0.5 * h)) / h;
    (4.0 * d2 - d1) / 3.0
}

/// Jacobian of `f: R^N -> R^M` by central differences, column by column.
pub fn jacobian<const N: usize, const M: usize, F>(
    f: F,
    x: &SVector<f64, N>,
    h: f64,
) -> SMatrix<f64, M, N>
where
    F: Fn(&SVector<f64, N>) -> SVector<f64, M>,
{
    let mut jac = SMatrix::<f64, M, N>::zeros();
    for c in 0..N {
        let mut xp = *x;
        let mut xm = *x;
        xp[c] += h;
        xm[c] -= h;
        jac.set_column(c, &((f(&xp) - f(&xm)) / (2.0 * h)));
    }
    jac
}

/// Relative difference between two matrices, normalized by the larger norm.
/// Falls back to the absolute difference when both are near zero, so checks
/// on structurally zero blocks stay meaningful.
pub fn rel_diff<const R: usize, const C: usize>(
    a: &SMatrix<f64, R, C>,
    b: &SMatrix<f64, R, C>,
) -> f64 {
    let scale = a.norm().max(b.norm());
    let diff = (a - b).norm();
    if scale < 1.0 {
        diff
    } else {
        diff / scale
    }
}
