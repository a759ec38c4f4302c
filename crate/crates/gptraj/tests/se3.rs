//! `SE(3)` tests: pinned reference matrices, group identities, and
//! finite-difference validation of the coupling-block derivative stack.

// Pinned values carry full 20-digit precision on purpose: rounding them to
// f64's shortest representation would hide how close each branch lands.
#![allow(clippy::excessive_precision)]

use gptraj::numdiff::{jacobian, rel_diff, DEFAULT_STEP};
use gptraj::{se3, so3, M3, V3, V6};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const TOL_PIN: f64 = 1e-13;
const TOL_FD: f64 = 1e-6;

fn th() -> V3 {
    V3::new(0.3, -0.4, 0.5)
}
fn rho() -> V3 {
    V3::new(-0.2, 0.7, 0.1)
}
fn vv() -> V3 {
    V3::new(0.6, 0.1, -0.3)
}
fn ww() -> V3 {
    V3::new(-0.5, 0.2, 0.4)
}
fn xi() -> V6 {
    se3::join(&th(), &rho())
}

#[rustfmt::skip]
fn m3(r: [f64; 9]) -> M3 {
    M3::new(r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8])
}

#[test]
fn matches_pinned_matrices() {
    let cases: [(&str, M3, M3); 5] = [
        (
            "q",
            se3::q(&xi()),
            m3([
                7.28376870787003916e-02,
                1.06209942737032104e-01,
                -3.36979367386601891e-01,
                -1.30640386952241942e-02,
                1.64637374368928661e-03,
                -3.94442335027583579e-02,
                3.15638304591626895e-01,
                1.38336996679232438e-01,
                1.09353635613938724e-01,
            ]),
        ),
        (
            "s1",
            se3::s1(&xi(), &vv()),
            m3([
                -3.31306339686104337e-03,
                -1.13901373375189907e-01,
                -2.09546812850460243e-02,
                5.98773591033936875e-02,
                -1.67238733673737042e-03,
                -4.81503774671019694e-02,
                -2.30589157587346889e-02,
                1.09074836094548405e-01,
                -2.11168198189307342e-02,
            ]),
        ),
        (
            "s2",
            se3::s2(&xi(), &vv()),
            m3([
                -2.77126152468066614e-02,
                2.22524372219372324e-01,
                -5.89216686601793591e-02,
                -1.82964118737777015e-01,
                -7.99539032193919211e-03,
                -2.68365663141360178e-01,
                3.58926386996169730e-02,
                2.49062024917577646e-01,
                3.24570203633685953e-02,
            ]),
        ),
        (
            "c11",
            se3::c11(&xi(), &vv(), &ww()),
            m3([
                1.39401780484538513e-02,
                -2.12217593499105829e-02,
                -9.04072904468939710e-03,
                9.89876127514315723e-03,
                -8.08144472983689005e-04,
                1.54157239243824570e-02,
                1.64814151239179238e-02,
                -2.37436801855817996e-02,
                -1.68948412845181563e-02,
            ]),
        ),
        (
            "c23",
            se3::c23(&xi(), &vv(), &ww()),
            m3([
                -3.92119920484902476e-02,
                2.35217431044661140e-01,
                -1.15993222426113624e-01,
                -1.50808988144245315e-01,
                -1.64209203160264501e-02,
                -2.48880669887021511e-01,
                7.38768803054505180e-02,
                2.29179471255769429e-01,
                7.46506050993093057e-02,
            ]),
        ),
    ];
    for (name, got, want) in cases {
        let d = rel_diff(&got, &want);
        assert!(d < TOL_PIN, "{name} drifted from pin by {d:.3e}");
    }

    // Exponential: rotation block matches the SO(3) pin, translation pinned.
    let t = se3::exp(&xi());
    assert!(rel_diff(&t.r, &so3::exp(&th())) < 1e-16);
    let p_want = V3::new(
        -3.84896073897513236e-01,
        5.99627068336749836e-01,
        1.30639299007907828e-01,
    );
    assert!((t.p - p_want).norm() < 1e-15);
    // Log inverts it.
    assert!((se3::log(&t) - xi()).norm() < 1e-14);
}

#[test]
fn group_and_jacobian_identities() {
    let mut rng = StdRng::seed_from_u64(73);
    let mut sample = |s: f64| {
        V3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ) * s
    };
    for _ in 0..200 {
        let a = se3::join(&sample(1.4), &sample(2.0));
        let b = se3::join(&sample(1.4), &sample(2.0));
        let ta = se3::exp(&a);
        let tb = se3::exp(&b);
        // exp/log roundtrip and inverse.
        assert!((se3::log(&ta) - a).norm() < 1e-10);
        let id = ta.compose(&ta.inverse());
        assert!(rel_diff(&id.r, &M3::identity()) < 1e-13 && id.p.norm() < 1e-13);
        // Adjoint is a homomorphism.
        let lhs = se3::adj(&ta.compose(&tb));
        let rhs = se3::adj(&ta) * se3::adj(&tb);
        assert!(rel_diff(&lhs, &rhs) < 1e-12);
        // jr6 and jr6_inv invert each other; top-right block exactly zero.
        let prod = se3::jr6(&a) * se3::jr6_inv(&a);
        assert!(rel_diff(&prod, &nalgebra::Matrix6::identity()) < 1e-11);
        assert_eq!(se3::jr6(&a).fixed_view::<3, 3>(0, 3).norm(), 0.0);
    }
    // Zero rotation: Q(0, rho) = -wedge(rho)/2 exactly.
    let z = se3::join(&V3::zeros(), &rho());
    assert_eq!(se3::q(&z), -0.5 * so3::wedge(&rho()));
    // Pure translation exponential.
    let t = se3::exp(&z);
    assert_eq!(t.r, M3::identity());
    assert_eq!(t.p, rho());
}

#[test]
fn coupling_block_derivatives_match_finite_differences() {
    let mut rng = StdRng::seed_from_u64(74);
    let mut sample = |s: f64| {
        V3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ) * s
    };
    for trial in 0..60 {
        let theta = match trial % 4 {
            0 => V3::zeros(),
            1 => sample(1e-5),
            2 => sample(0.4),
            _ => sample(1.5),
        };
        let rho = sample(1.5);
        let xi = se3::join(&theta, &rho);
        let v = sample(1.2);
        let w = sample(1.2);

        let h = DEFAULT_STEP;
        let sb = se3::s_blocks(&xi, &v);
        let cb = se3::c_blocks(&xi, &v, &w);
        let cases: [(&str, M3, M3); 16] = [
            (
                "s1",
                sb.s1,
                jacobian(|x| se3::q(&se3::join(x, &rho)) * v, &theta, h),
            ),
            (
                "s2",
                sb.s2,
                jacobian(|x| se3::q(&se3::join(&theta, x)) * v, &rho, h),
            ),
            (
                "s1p",
                sb.s1p,
                jacobian(|x| se3::qp(&se3::join(x, &rho)) * v, &theta, h),
            ),
            (
                "s2p",
                sb.s2p,
                jacobian(|x| se3::qp(&se3::join(&theta, x)) * v, &rho, h),
            ),
            (
                "c11",
                cb.c11,
                jacobian(|x| se3::s1(&se3::join(x, &rho), &v) * w, &theta, h),
            ),
            (
                "c12",
                cb.c12,
                jacobian(|x| se3::s1(&se3::join(&theta, x), &v) * w, &rho, h),
            ),
            ("c13", cb.c13, jacobian(|x| se3::s1(&xi, x) * w, &v, h)),
            (
                "c21",
                cb.c21,
                jacobian(|x| se3::s2(&se3::join(x, &rho), &v) * w, &theta, h),
            ),
            (
                "c22",
                cb.c22,
                jacobian(|x| se3::s2(&se3::join(&theta, x), &v) * w, &rho, h),
            ),
            ("c23", cb.c23, jacobian(|x| se3::s2(&xi, x) * w, &v, h)),
            (
                "c11p",
                cb.c11p,
                jacobian(|x| se3::s1p(&se3::join(x, &rho), &v) * w, &theta, h),
            ),
            (
                "c12p",
                cb.c12p,
                jacobian(|x| se3::s1p(&se3::join(&theta, x), &v) * w, &rho, h),
            ),
            ("c13p", cb.c13p, jacobian(|x| se3::s1p(&xi, x) * w, &v, h)),
            (
                "c21p",
                cb.c21p,
                jacobian(|x| se3::s2p(&se3::join(x, &rho), &v) * w, &theta, h),
            ),
            (
                "c22p",
                cb.c22p,
                jacobian(|x| se3::s2p(&se3::join(&theta, x), &v) * w, &rho, h),
            ),
            ("c23p", cb.c23p, jacobian(|x| se3::s2p(&xi, x) * w, &v, h)),
        ];
        for (name, analytic, fd) in cases {
            let d = rel_diff(&analytic, &fd);
            assert!(
                d < TOL_FD,
                "{name} vs FD at |theta|={}: {d:.3e}",
                theta.norm()
            );
        }
    }
}

#[test]
fn assembled_maps_match_finite_differences() {
    let mut rng = StdRng::seed_from_u64(75);
    let mut sample6 = |s: f64| {
        let mut x = V6::zeros();
        for i in 0..6 {
            x[i] = rng.random_range(-1.0..1.0) * s;
        }
        x
    };
    for trial in 0..40 {
        let mut xi = sample6(1.2);
        if trial % 4 == 0 {
            // Zero rotation part, translation kept.
            for i in 0..3 {
                xi[i] = 0.0;
            }
        }
        let v = sample6(1.0);
        let w = sample6(1.0);
        let h = DEFAULT_STEP;
        let cases = [
            (
                "h1_6",
                se3::h1_6(&xi, &v),
                jacobian(|x| se3::jr6(x) * v, &xi, h),
            ),
            (
                "h1p_6",
                se3::h1p_6(&xi, &v),
                jacobian(|x| se3::jr6_inv(x) * v, &xi, h),
            ),
            (
                "l11_6",
                se3::l11_6(&xi, &v, &w),
                jacobian(|x| se3::h1_6(x, &v) * w, &xi, h),
            ),
            (
                "l12_6",
                se3::l12_6(&xi, &v, &w),
                jacobian(|x| se3::h1_6(&xi, x) * w, &v, h),
            ),
            (
                "l11p_6",
                se3::l11p_6(&xi, &v, &w),
                jacobian(|x| se3::h1p_6(x, &v) * w, &xi, h),
            ),
            (
                "l12p_6",
                se3::l12p_6(&xi, &v, &w),
                jacobian(|x| se3::h1p_6(&xi, x) * w, &v, h),
            ),
        ];
        for (name, analytic, fd) in cases {
            let d = rel_diff(&analytic, &fd);
            assert!(d < TOL_FD, "{name} vs FD: {d:.3e}");
        }
    }
}
