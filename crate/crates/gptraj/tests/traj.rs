//! Trajectory-level behavior: support states are reproduced exactly at knot
//! times, interpolation Jacobians match central finite differences for both
//! representations and both kinematic models, the approximated model
//! converges to the closed form as motion shrinks, and extension plus
//! serialization round-trip support states faithfully.

use std::io::BufReader;

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use gptraj::numdiff::rel_diff;
use gptraj::so3;
use gptraj::traj::{GpTrajectory, Mode, Repr, SupportState, TrajError};
use gptraj::{M18, V18, V3};

/// Pose reproduction at knot times: the chain passes support states through
/// exact identity weights, so only Log/Exp rounding remains.
const TOL_KNOT_POSE: f64 = 1e-12;
/// Velocity/acceleration reproduction passes through a Jacobian/inverse pair.
const TOL_KNOT_DERIV: f64 = 1e-10;
/// Analytic Jacobians against central finite differences.
const TOL_FD: f64 = 1e-5;
/// Finite-difference step for trajectory probes.
const FD_STEP: f64 = 5e-6;
/// Split and coupled representations coincide on pure-translation motion.
const TOL_REPR_AGREE: f64 = 1e-10;

const ALL_COMBOS: [(Repr, Mode); 4] = [
    (Repr::So3R3, Mode::Cf),
    (Repr::So3R3, Mode::Ap),
    (Repr::Se3, Mode::Cf),
    (Repr::Se3, Mode::Ap),
];

fn rand_v3(rng: &mut ChaCha12Rng, scale: f64) -> V3 {
    V3::from_fn(|_, _| rng.random_range(-scale..scale))
}

/// Smooth-ish random support states with adjustable motion scale.
fn make_knots(
    rng: &mut ChaCha12Rng,
    n: usize,
    rot_scale: f64,
    trans_scale: f64,
) -> Vec<SupportState> {
    let mut r = so3::exp(&rand_v3(rng, 1.0));
    let mut p = rand_v3(rng, 2.0);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(SupportState {
            r,
            w: rand_v3(rng, rot_scale),
            dw: rand_v3(rng, rot_scale),
            p,
            v: rand_v3(rng, trans_scale),
            a: rand_v3(rng, trans_scale),
        });
        r *= so3::exp(&rand_v3(rng, 0.6 * rot_scale));
        p += rand_v3(rng, trans_scale);
    }
    out
}

fn state_gap(a: &SupportState, b: &SupportState) -> (f64, f64) {
    let pose = (a.r - b.r).abs().max().max((a.p - b.p).abs().max());
    let deriv = (a.w - b.w)
        .abs()
        .max()
        .max((a.dw - b.dw).abs().max())
        .max((a.v - b.v).abs().max())
        .max((a.a - b.a).abs().max());
    (pose, deriv)
}

#[test]
fn support_states_are_reproduced_at_knot_times() {
    let mut rng = ChaCha12Rng::seed_from_u64(101);
    for (repr, mode) in ALL_COMBOS {
        let knots = make_knots(&mut rng, 8, 1.0, 1.0);
        let traj = GpTrajectory::new(repr, mode, 0.7, 0.4, knots).unwrap();
        for k in 0..traj.n_knots() {
            let t = traj.knot_time(k);
            let it = traj.interpolate(t).unwrap();
            let (pose, deriv) = state_gap(&it.state, traj.knot(k));
            assert!(
                pose < TOL_KNOT_POSE,
                "{repr:?} {mode:?} knot {k}: pose gap {pose:.3e}"
            );
            assert!(
                deriv < TOL_KNOT_DERIV,
                "{repr:?} {mode:?} knot {k}: derivative gap {deriv:.3e}"
            );
        }
    }
}

/// Central finite difference of the interpolated state against one knot's
/// 18-dimensional tangent.
fn fd_jacobian(traj: &GpTrajectory, t: f64, knot: usize, reference: &SupportState) -> M18 {
    let mut jac = M18::zeros();
    for dim in 0..18 {
        let probe = |sign: f64| -> V18 {
            let mut tp = traj.clone();
            let mut delta = V18::zeros();
            delta[dim] = sign * FD_STEP;
            tp.apply_step(knot, &delta);
            tp.interpolate(t).unwrap().state.tangent_from(reference)
        };
        let col = (probe(1.0) - probe(-1.0)) / (2.0 * FD_STEP);
        jac.column_mut(dim).copy_from(&col);
    }
    jac
}

#[test]
fn interpolation_jacobians_match_finite_differences() {
    let mut rng = ChaCha12Rng::seed_from_u64(103);
    for (repr, mode) in ALL_COMBOS {
        for trial in 0..6 {
            let knots = make_knots(&mut rng, 3, 1.0, 1.0);
            let traj = GpTrajectory::new(repr, mode, 0.0, 0.5, knots).unwrap();
            for frac in [0.3, 0.72] {
                let t = 0.5 * frac;
                let it = traj.interpolate(t).unwrap();
                let fd_a = fd_jacobian(&traj, t, 0, &it.state);
                let fd_b = fd_jacobian(&traj, t, 1, &it.state);
                let da = rel_diff(&it.jac_a, &fd_a);
                let db = rel_diff(&it.jac_b, &fd_b);
                assert!(
                    da < TOL_FD,
                    "{repr:?} {mode:?} trial {trial} frac {frac}: left diff {da:.3e}"
                );
                assert!(
                    db < TOL_FD,
                    "{repr:?} {mode:?} trial {trial} frac {frac}: right diff {db:.3e}"
                );
            }
        }
    }
}

#[test]
fn interpolation_jacobians_match_finite_differences_at_zero_rotation() {
    // Identical support rotations put the whole segment below the
    // closed-form/approximated switching threshold; the Jacobians must
    // follow the same branch as the value.
    let mut rng = ChaCha12Rng::seed_from_u64(104);
    for (repr, mode) in ALL_COMBOS {
        let r = so3::exp(&rand_v3(&mut rng, 1.0));
        let knots: Vec<SupportState> = (0..2)
            .map(|_| SupportState {
                r,
                w: V3::zeros(),
                dw: V3::zeros(),
                p: rand_v3(&mut rng, 1.0),
                v: rand_v3(&mut rng, 1.0),
                a: rand_v3(&mut rng, 1.0),
            })
            .collect();
        let traj = GpTrajectory::new(repr, mode, 0.0, 0.5, knots).unwrap();
        let t = 0.21;
        let it = traj.interpolate(t).unwrap();
        let fd_a = fd_jacobian(&traj, t, 0, &it.state);
        let fd_b = fd_jacobian(&traj, t, 1, &it.state);
        assert!(
            rel_diff(&it.jac_a, &fd_a) < TOL_FD,
            "{repr:?} {mode:?} left"
        );
        assert!(
            rel_diff(&it.jac_b, &fd_b) < TOL_FD,
            "{repr:?} {mode:?} right"
        );
    }
}

#[test]
fn approximated_model_converges_to_closed_form() {
    for repr in [Repr::So3R3, Repr::Se3] {
        let mut gaps = Vec::new();
        for &scale in &[1.0, 0.1, 0.01] {
            // Same nominal motion shrunk by `scale`: regenerate with a fixed
            // seed so the only difference is the amplitude.
            let mut rng = ChaCha12Rng::seed_from_u64(105);
            let knots = make_knots(&mut rng, 3, scale, 1.0);
            let cf = GpTrajectory::new(repr, Mode::Cf, 0.0, 0.5, knots.clone()).unwrap();
            let ap = GpTrajectory::new(repr, Mode::Ap, 0.0, 0.5, knots).unwrap();
            let mut worst = 0.0f64;
            for &t in &[0.2, 0.5, 0.8] {
                let sc = cf.interpolate(t).unwrap().state;
                let sa = ap.interpolate(t).unwrap().state;
                worst = worst.max(sa.tangent_from(&sc).norm());
            }
            gaps.push(worst);
        }
        assert!(
            gaps[0] > gaps[1] && gaps[1] > gaps[2],
            "{repr:?}: model gap not monotone in motion scale: {gaps:?}"
        );
        assert!(gaps[0] > 0.0, "{repr:?}: models never differ");
        assert!(
            gaps[1] < 0.5 * gaps[0] && gaps[2] < 0.5 * gaps[1],
            "{repr:?}: model gap shrinks too slowly: {gaps:?}"
        );
    }
}

#[test]
fn representations_agree_on_pure_translation() {
    let mut rng = ChaCha12Rng::seed_from_u64(106);
    let knots: Vec<SupportState> = (0..4)
        .map(|_| SupportState {
            r: gptraj::M3::identity(),
            w: V3::zeros(),
            dw: V3::zeros(),
            p: rand_v3(&mut rng, 2.0),
            v: rand_v3(&mut rng, 1.0),
            a: rand_v3(&mut rng, 1.0),
        })
        .collect();
    let split = GpTrajectory::new(Repr::So3R3, Mode::Cf, 0.0, 0.5, knots.clone()).unwrap();
    let coupled = GpTrajectory::new(Repr::Se3, Mode::Cf, 0.0, 0.5, knots).unwrap();
    for i in 0..=30 {
        let t = 1.5 * i as f64 / 30.0;
        let a = split.interpolate(t).unwrap().state;
        let b = coupled.interpolate(t).unwrap().state;
        let gap = a.tangent_from(&b).norm();
        assert!(
            gap < TOL_REPR_AGREE,
            "t={t}: representations differ by {gap:.3e}"
        );
    }
}

#[test]
fn extension_pads_with_propagated_states() {
    let start = SupportState {
        r: so3::exp(&V3::new(0.1, -0.2, 0.3)),
        w: V3::new(0.0, 0.0, 0.4),
        dw: V3::zeros(),
        p: V3::new(1.0, 2.0, 3.0),
        v: V3::new(0.5, 0.0, -0.25),
        a: V3::zeros(),
    };
    let mut traj = GpTrajectory::new(Repr::So3R3, Mode::Cf, 2.0, 0.5, vec![start]).unwrap();
    traj.extend_to(2.0 + 10.2 * 0.5);
    assert_eq!(traj.n_knots(), 12);

    // Constant body rate and constant velocity integrate forward exactly.
    let k = 11;
    let expect_r = start.r * so3::exp(&(start.w * (k as f64 * 0.5)));
    let expect_p = start.p + start.v * (k as f64 * 0.5);
    assert!((traj.knot(k).r - expect_r).abs().max() < 1e-12);
    assert!((traj.knot(k).p - expect_p).abs().max() < 1e-12);

    // Already covered: no growth.
    traj.extend_to(3.0);
    assert_eq!(traj.n_knots(), 12);

    // A stationary seed stays put.
    let mut still = GpTrajectory::new(
        Repr::Se3,
        Mode::Ap,
        0.0,
        0.1,
        vec![SupportState::identity()],
    )
    .unwrap();
    still.extend_to(0.55);
    assert_eq!(still.n_knots(), 7);
    for k in 0..still.n_knots() {
        assert_eq!(still.knot(k), &SupportState::identity());
    }
}

#[test]
fn rejects_queries_outside_domain() {
    let mut rng = ChaCha12Rng::seed_from_u64(107);
    let knots = make_knots(&mut rng, 3, 0.5, 0.5);
    let traj = GpTrajectory::new(Repr::So3R3, Mode::Cf, 1.0, 0.5, knots).unwrap();
    assert!(matches!(
        traj.interpolate(0.5),
        Err(TrajError::OutOfDomain { .. })
    ));
    assert!(matches!(
        traj.interpolate(2.1),
        Err(TrajError::OutOfDomain { .. })
    ));
    // Boundary times are accepted.
    assert!(traj.interpolate(1.0).is_ok());
    assert!(traj.interpolate(2.0).is_ok());

    let single = GpTrajectory::new(
        Repr::So3R3,
        Mode::Cf,
        0.0,
        0.5,
        vec![SupportState::identity()],
    )
    .unwrap();
    assert!(matches!(
        single.interpolate(0.0),
        Err(TrajError::TooFewKnots { .. })
    ));
}

#[test]
fn interpolation_is_continuous_across_segment_boundaries() {
    let mut rng = ChaCha12Rng::seed_from_u64(108);
    for (repr, mode) in ALL_COMBOS {
        let knots = make_knots(&mut rng, 4, 0.8, 1.0);
        let traj = GpTrajectory::new(repr, mode, 0.0, 0.5, knots).unwrap();
        for k in 1..3 {
            let t = traj.knot_time(k);
            let before = traj.interpolate(t - 1e-9).unwrap().state;
            let after = traj.interpolate(t + 1e-9).unwrap().state;
            let d = after.tangent_from(&before);
            // Over a 2e-9 s window the pose moves at most at rate |v|, |w|;
            // the derivative components additionally feel the interpolation
            // weight rates (up to ~1/dt^2), so they get a looser bound.
            // Either bound is far below what a branch discontinuity would
            // produce.
            let pose_gap = d.fixed_rows::<3>(0).norm().max(d.fixed_rows::<3>(9).norm());
            assert!(
                pose_gap < 2e-8,
                "{repr:?} {mode:?} boundary {k}: pose jump {pose_gap:.3e}"
            );
            assert!(
                d.norm() < 1e-5,
                "{repr:?} {mode:?} boundary {k}: jump {:.3e}",
                d.norm()
            );
        }
    }
}

#[test]
fn knot_serialization_round_trips() {
    let mut rng = ChaCha12Rng::seed_from_u64(109);
    let knots = make_knots(&mut rng, 5, 1.0, 1.0);
    let traj = GpTrajectory::new(Repr::Se3, Mode::Cf, 0.25, 0.2, knots).unwrap();

    let mut buf = Vec::new();
    traj.write_knots(&mut buf).unwrap();
    let samples = GpTrajectory::read_knots(BufReader::new(buf.as_slice())).unwrap();
    let back = GpTrajectory::from_samples(Repr::Se3, Mode::Cf, &samples).unwrap();

    assert_eq!(back.n_knots(), traj.n_knots());
    assert!((back.t0() - traj.t0()).abs() < 1e-12);
    assert!((back.dt() - traj.dt()).abs() < 1e-12);
    for k in 0..traj.n_knots() {
        let (pose, deriv) = state_gap(back.knot(k), traj.knot(k));
        assert!(pose < 1e-12, "knot {k} pose gap {pose:.3e}");
        assert!(deriv < 1e-12, "knot {k} derivative gap {deriv:.3e}");
    }
}

#[test]
fn tangent_step_round_trips() {
    let mut rng = ChaCha12Rng::seed_from_u64(110);
    for _ in 0..20 {
        let base = make_knots(&mut rng, 1, 1.0, 1.0)[0];
        let delta = V18::from_fn(|_, _| rng.random_range(-0.5..0.5));
        let mut stepped = base;
        stepped.apply_tangent(&delta);
        let recovered = stepped.tangent_from(&base);
        assert!((recovered - delta).abs().max() < 1e-12);
    }
}
