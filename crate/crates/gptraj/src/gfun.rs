//! Scalar trigonometric kernels behind the rotation derivative maps.
//!
//! Five families, each a smooth even function of the rotation angle `u`:
//!
//! * `g1 = (1 - cos u) / u^2`
//! * `g2 = (u - sin u) / u^3`
//! * `g3 = 1/u^2 - (1 + cos u) / (2 u sin u)`
//! * `q3 = (1 - u^2/2 - cos u) / u^4`
//! * `q4 = -((q3 - 3 (u - sin u - u^3/6) / u^5)) / 2`
//!
//! `g1`/`g2` build the right Jacobian, `g3` its inverse, `q3`/`q4` the
//! translation-rotation coupling block on `SE(3)`. The derivative maps also
//! need, for each family `c`, the smooth ratios `c'(u)/u` and
//! `c''(u)/u^2 - c'(u)/u^3`; both extend analytically through `u = 0`, which
//! keeps every downstream map finite at zero rotation without special cases.
//!
//! Below [`SERIES_CUT`] all quantities use Taylor series in `u^2` (truncation
//! error below 2e-14 at the cut). Above it, closed forms with
//! cancellation-safe rearrangements: `1 - cos u` as `2 sin^2(u/2)`, and the
//! `g3` quotient in half-angle form `cot(u/2)/(2u)` so its derivatives stay
//! conditioned at `u = pi`. Relative error of the closed forms is below 6e-11
//! over `[SERIES_CUT, 2 pi - 0.01]`.
//!
//! Domain: `0 <= u < 2 pi` (the `g3` family diverges at `2 pi`).

/// Angle below which all scalar kernels switch to their Taylor series.
///
/// Chosen so the closed forms (worst conditioned near zero) keep at least ten
/// significant digits on the far side while the truncated series is still at
/// full precision on the near side.
pub const SERIES_CUT: f64 = 0.5;

const TWO_PI: f64 = core::f64::consts::TAU;

#[inline]
fn horner(x: f64, coeffs: &[f64]) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

// ---------------------------------------------------------------------------
// Series tables: coefficients in u^2, constant term first. `_1` tables are
// odd series (multiply the Horner sum by u); all others are even.
// ---------------------------------------------------------------------------

const G1_0: &[f64] = &[
    1.0 / 2.0,
    -1.0 / 24.0,
    1.0 / 720.0,
    -1.0 / 40320.0,
    1.0 / 3628800.0,
    -1.0 / 479001600.0,
    1.0 / 87178291200.0,
    -1.0 / 20922789888000.0,
    1.0 / 6402373705728000.0,
];
const G1_1: &[f64] = &[
    -1.0 / 12.0,
    1.0 / 180.0,
    -1.0 / 6720.0,
    1.0 / 453600.0,
    -1.0 / 47900160.0,
    1.0 / 7264857600.0,
    -1.0 / 1494484992000.0,
    1.0 / 400148356608000.0,
    -1.0 / 135161222676480000.0,
];
const G1_2: &[f64] = &[
    -1.0 / 12.0,
    1.0 / 60.0,
    -1.0 / 1344.0,
    1.0 / 64800.0,
    -1.0 / 5322240.0,
    1.0 / 660441600.0,
    -1.0 / 114960384000.0,
    1.0 / 26676557107200.0,
    -1.0 / 7950660157440000.0,
];
const G1_1U: &[f64] = &[
    -1.0 / 12.0,
    1.0 / 180.0,
    -1.0 / 6720.0,
    1.0 / 453600.0,
    -1.0 / 47900160.0,
    1.0 / 7264857600.0,
    -1.0 / 1494484992000.0,
    1.0 / 400148356608000.0,
];
const G1_DD: &[f64] = &[
    1.0 / 90.0,
    -1.0 / 1680.0,
    1.0 / 75600.0,
    -1.0 / 5987520.0,
    1.0 / 726485760.0,
    -1.0 / 124540416000.0,
    1.0 / 28582025472000.0,
];

const G2_0: &[f64] = &[
    1.0 / 6.0,
    -1.0 / 120.0,
    1.0 / 5040.0,
    -1.0 / 362880.0,
    1.0 / 39916800.0,
    -1.0 / 6227020800.0,
    1.0 / 1307674368000.0,
    -1.0 / 355687428096000.0,
    1.0 / 121645100408832000.0,
];
const G2_1: &[f64] = &[
    -1.0 / 60.0,
    1.0 / 1260.0,
    -1.0 / 60480.0,
    1.0 / 4989600.0,
    -1.0 / 622702080.0,
    1.0 / 108972864000.0,
    -1.0 / 25406244864000.0,
    1.0 / 7602818775552000.0,
    -1.0 / 2838385676206080000.0,
];
const G2_2: &[f64] = &[
    -1.0 / 60.0,
    1.0 / 420.0,
    -1.0 / 12096.0,
    1.0 / 712800.0,
    -1.0 / 69189120.0,
    1.0 / 9906624000.0,
    -1.0 / 1954326528000.0,
    1.0 / 506854585036800.0,
    -1.0 / 166963863306240000.0,
];
const G2_1U: &[f64] = &[
    -1.0 / 60.0,
    1.0 / 1260.0,
    -1.0 / 60480.0,
    1.0 / 4989600.0,
    -1.0 / 622702080.0,
    1.0 / 108972864000.0,
    -1.0 / 25406244864000.0,
    1.0 / 7602818775552000.0,
];
const G2_DD: &[f64] = &[
    1.0 / 630.0,
    -1.0 / 15120.0,
    1.0 / 831600.0,
    -1.0 / 77837760.0,
    1.0 / 10897286400.0,
    -1.0 / 2117187072000.0,
    1.0 / 543058483968000.0,
];

const G3_0: &[f64] = &[
    1.0 / 12.0,
    1.0 / 720.0,
    1.0 / 30240.0,
    1.0 / 1209600.0,
    1.0 / 47900160.0,
    691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    3617.0 / 10670622842880000.0,
    43867.0 / 5109094217170944000.0,
];
const G3_1: &[f64] = &[
    1.0 / 360.0,
    1.0 / 7560.0,
    1.0 / 201600.0,
    1.0 / 5987520.0,
    691.0 / 130767436800.0,
    1.0 / 6227020800.0,
    3617.0 / 762187345920000.0,
    43867.0 / 319318388573184000.0,
    174611.0 / 44603203483238400000.0,
];
const G3_2: &[f64] = &[
    1.0 / 360.0,
    1.0 / 2520.0,
    1.0 / 40320.0,
    1.0 / 855360.0,
    691.0 / 14529715200.0,
    1.0 / 566092800.0,
    3617.0 / 58629795840000.0,
    43867.0 / 21287892571545600.0,
    174611.0 / 2623717851955200000.0,
];
const G3_1U: &[f64] = &[
    1.0 / 360.0,
    1.0 / 7560.0,
    1.0 / 201600.0,
    1.0 / 5987520.0,
    691.0 / 130767436800.0,
    1.0 / 6227020800.0,
    3617.0 / 762187345920000.0,
    43867.0 / 319318388573184000.0,
];
const G3_DD: &[f64] = &[
    1.0 / 3780.0,
    1.0 / 50400.0,
    1.0 / 997920.0,
    691.0 / 16345929600.0,
    1.0 / 622702080.0,
    3617.0 / 63515612160000.0,
    43867.0 / 22808456326656000.0,
];

const Q3_0: &[f64] = &[
    -1.0 / 24.0,
    1.0 / 720.0,
    -1.0 / 40320.0,
    1.0 / 3628800.0,
    -1.0 / 479001600.0,
    1.0 / 87178291200.0,
    -1.0 / 20922789888000.0,
    1.0 / 6402373705728000.0,
    -1.0 / 2432902008176640000.0,
];
const Q3_1: &[f64] = &[
    1.0 / 360.0,
    -1.0 / 10080.0,
    1.0 / 604800.0,
    -1.0 / 59875200.0,
    1.0 / 8717829120.0,
    -1.0 / 1743565824000.0,
    1.0 / 457312407552000.0,
    -1.0 / 152056375511040000.0,
    1.0 / 62444484876533760000.0,
];
const Q3_2: &[f64] = &[
    1.0 / 360.0,
    -1.0 / 3360.0,
    1.0 / 120960.0,
    -1.0 / 8553600.0,
    1.0 / 968647680.0,
    -1.0 / 158505984000.0,
    1.0 / 35177877504000.0,
    -1.0 / 10137091700736000.0,
    1.0 / 3673204992737280000.0,
];
const Q3_1U: &[f64] = &[
    1.0 / 360.0,
    -1.0 / 10080.0,
    1.0 / 604800.0,
    -1.0 / 59875200.0,
    1.0 / 8717829120.0,
    -1.0 / 1743565824000.0,
    1.0 / 457312407552000.0,
    -1.0 / 152056375511040000.0,
];
const Q3_DD: &[f64] = &[
    -1.0 / 5040.0,
    1.0 / 151200.0,
    -1.0 / 9979200.0,
    1.0 / 1089728640.0,
    -1.0 / 174356582400.0,
    1.0 / 38109367296000.0,
    -1.0 / 10861169679360000.0,
];

const Q4_0: &[f64] = &[
    1.0 / 120.0,
    -1.0 / 2520.0,
    1.0 / 120960.0,
    -1.0 / 9979200.0,
    1.0 / 1245404160.0,
    -1.0 / 217945728000.0,
    1.0 / 50812489728000.0,
    -1.0 / 15205637551104000.0,
    1.0 / 5676771352412160000.0,
];
const Q4_1: &[f64] = &[
    -1.0 / 1260.0,
    1.0 / 30240.0,
    -1.0 / 1663200.0,
    1.0 / 155675520.0,
    -1.0 / 21794572800.0,
    1.0 / 4234374144000.0,
    -1.0 / 1086116967936000.0,
    1.0 / 354798209525760000.0,
    -1.0 / 143622315216027648000.0,
];
const Q4_2: &[f64] = &[
    -1.0 / 1260.0,
    1.0 / 10080.0,
    -1.0 / 332640.0,
    1.0 / 22239360.0,
    -1.0 / 2421619200.0,
    1.0 / 384943104000.0,
    -1.0 / 83547459072000.0,
    1.0 / 23653213968384000.0,
    -1.0 / 8448371483295744000.0,
];
const Q4_1U: &[f64] = &[
    -1.0 / 1260.0,
    1.0 / 30240.0,
    -1.0 / 1663200.0,
    1.0 / 155675520.0,
    -1.0 / 21794572800.0,
    1.0 / 4234374144000.0,
    -1.0 / 1086116967936000.0,
    1.0 / 354798209525760000.0,
];
const Q4_DD: &[f64] = &[
    1.0 / 15120.0,
    -1.0 / 415800.0,
    1.0 / 25945920.0,
    -1.0 / 2724321600.0,
    1.0 / 423437414400.0,
    -1.0 / 90509747328000.0,
    1.0 / 25342729251840000.0,
];

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// One scalar family evaluated at a fixed angle: value, first and second
/// derivatives, and the smooth ratios used by the derivative maps.
#[derive(Debug, Clone, Copy)]
pub struct GSet {
    /// `c(u)`
    pub f: f64,
    /// `c'(u)`
    pub d1: f64,
    /// `c''(u)`
    pub d2: f64,
    /// `c'(u) / u`, analytic through zero
    pub d1u: f64,
    /// `c''(u)/u^2 - c'(u)/u^3`, analytic through zero
    pub dd: f64,
}

impl GSet {
    #[inline]
    fn series(
        u: f64,
        u2: f64,
        t0: &[f64],
        t1: &[f64],
        t2: &[f64],
        t1u: &[f64],
        tdd: &[f64],
    ) -> Self {
        GSet {
            f: horner(u2, t0),
            d1: u * horner(u2, t1),
            d2: horner(u2, t2),
            d1u: horner(u2, t1u),
            dd: horner(u2, tdd),
        }
    }

    #[inline]
    fn closed(u: f64, f: f64, d1: f64, d2: f64) -> Self {
        GSet {
            f,
            d1,
            d2,
            d1u: d1 / u,
            dd: d2 / (u * u) - d1 / (u * u * u),
        }
    }
}

/// All five scalar families at one angle.
#[derive(Debug, Clone, Copy)]
pub struct Scalars {
    pub g1: GSet,
    pub g2: GSet,
    pub g3: GSet,
    pub q3: GSet,
    pub q4: GSet,
}

impl Scalars {
    /// Evaluates every family at `u = |theta|`. Panics outside `[0, 2 pi)`.
    pub fn eval(u: f64) -> Self {
        assert!(
            (0.0..TWO_PI - 1e-9).contains(&u),
            "rotation angle {u} outside the scalar-kernel domain [0, 2 pi)"
        );
        if u < SERIES_CUT {
            let u2 = u * u;
            Scalars {
                g1: GSet::series(u, u2, G1_0, G1_1, G1_2, G1_1U, G1_DD),
                g2: GSet::series(u, u2, G2_0, G2_1, G2_2, G2_1U, G2_DD),
                g3: GSet::series(u, u2, G3_0, G3_1, G3_2, G3_1U, G3_DD),
                q3: GSet::series(u, u2, Q3_0, Q3_1, Q3_2, Q3_1U, Q3_DD),
                q4: GSet::series(u, u2, Q4_0, Q4_1, Q4_2, Q4_1U, Q4_DD),
            }
        } else {
            Self::closed_forms(u)
        }
    }

    fn closed_forms(u: f64) -> Self {
        let (s, c) = u.sin_cos();
        let sh = (0.5 * u).sin();
        let ch = (0.5 * u).cos();
        // 1 - cos u without cancellation near u = 0 and u = 2 pi.
        let omc = 2.0 * sh * sh;
        let (u2, u3, u4, u5) = (u * u, u * u * u, u * u * u * u, u * u * u * u * u);

        let g1 = omc / u2;
        let g1d = s / u2 - 2.0 * omc / u3;
        let g1dd = c / u2 - 4.0 * s / u3 + 6.0 * omc / u4;

        let g2 = (u - s) / u3;
        let g2d = omc / u3 - 3.0 * (u - s) / u4;
        let g2dd = s / u3 - 6.0 * omc / u4 + 12.0 * (u - s) / u5;

        // g3 = 1/u^2 - r with r = cot(u/2)/(2u); the half-angle denominator
        // 2 u sin(u/2) stays away from zero at u = pi, so the quotient-rule
        // derivatives remain conditioned across the whole domain.
        let n0 = ch;
        let n1 = -0.5 * sh;
        let n2 = -0.25 * ch;
        let dn0 = 2.0 * u * sh;
        let dn1 = 2.0 * sh + u * ch;
        let dn2 = 2.0 * ch - 0.5 * u * sh;
        let r = n0 / dn0;
        let rp = (n1 - r * dn1) / dn0;
        let rpp = (n2 - 2.0 * rp * dn1 - r * dn2) / dn0;
        let g3 = 1.0 / u2 - r;
        let g3d = -2.0 / u3 - rp;
        let g3dd = 6.0 / u4 - rpp;

        let q3 = (omc - 0.5 * u2) / u4;
        let q3d = -g2 / u - 4.0 * q3 / u;
        let q3dd = (-g2d - 4.0 * q3d) / u + (g2 + 4.0 * q3) / u2;

        // w5 = (u - sin u - u^3/6)/u^5 feeds q4 = -(q3 - 3 w5)/2.
        let w5 = (u - s - u3 / 6.0) / u5;
        let w5d = q3 / u - 5.0 * w5 / u;
        let w5dd = q3d / u - q3 / u2 - 5.0 * w5d / u + 5.0 * w5 / u2;
        let q4 = -0.5 * (q3 - 3.0 * w5);
        let q4d = -0.5 * (q3d - 3.0 * w5d);
        let q4dd = -0.5 * (q3dd - 3.0 * w5dd);

        Scalars {
            g1: GSet::closed(u, g1, g1d, g1dd),
            g2: GSet::closed(u, g2, g2d, g2dd),
            g3: GSet::closed(u, g3, g3d, g3dd),
            q3: GSet::closed(u, q3, q3d, q3dd),
            q4: GSet::closed(u, q4, q4d, q4dd),
        }
    }
}

/// The two entire rotation coefficients `(1 - cos u)/u^2` and
/// `(u - sin u)/u^3`, valid for any finite angle.  The exponential map and
/// the right Jacobian are built from these alone, so they stay defined even
/// for the oversized tangents an optimizer may probe on a rejected trial
/// step; the `[0, 2 pi)` domain restriction applies only to the
/// cotangent-based inverse kernels.
pub fn entire_pair(u: f64) -> (f64, f64) {
    if u < SERIES_CUT {
        let u2 = u * u;
        let c = horner(
            u2,
            &[
                1.0 / 2.0,
                -1.0 / 24.0,
                1.0 / 720.0,
                -1.0 / 40320.0,
                1.0 / 3628800.0,
                -1.0 / 479001600.0,
            ],
        );
        let s = horner(
            u2,
            &[
                1.0 / 6.0,
                -1.0 / 120.0,
                1.0 / 5040.0,
                -1.0 / 362880.0,
                1.0 / 39916800.0,
                -1.0 / 6227020800.0,
            ],
        );
        (c, s)
    } else {
        let (sn, cs) = u.sin_cos();
        ((1.0 - cs) / (u * u), (u - sn) / (u * u * u))
    }
}

/// `sin(u)/u`, extended analytically through zero.
pub fn sinc(u: f64) -> f64 {
    if u < SERIES_CUT {
        horner(
            u * u,
            &[
                1.0,
                -1.0 / 6.0,
                1.0 / 120.0,
                -1.0 / 5040.0,
                1.0 / 362880.0,
                -1.0 / 39916800.0,
                1.0 / 6227020800.0,
            ],
        )
    } else {
        u.sin() / u
    }
}

/// `j`-th `g` family (`j` in `1..=3`), `n`-th derivative (`n` in `0..=2`),
/// evaluated at `u`. Panics on out-of-range indices or angles.
pub fn g_eval(j: usize, n: usize, u: f64) -> f64 {
    let s = Scalars::eval(u);
    let set = match j {
        1 => s.g1,
        2 => s.g2,
        3 => s.g3,
        _ => panic!("g_eval: family index {j} not in 1..=3"),
    };
    pick(set, n)
}

/// `j`-th `q` family (`j` in `3..=4`), `n`-th derivative (`n` in `0..=2`),
/// evaluated at `u`. Panics on out-of-range indices or angles.
pub fn q_eval(j: usize, n: usize, u: f64) -> f64 {
    let s = Scalars::eval(u);
    let set = match j {
        3 => s.q3,
        4 => s.q4,
        _ => panic!("q_eval: family index {j} not in 3..=4"),
    };
    pick(set, n)
}

fn pick(set: GSet, n: usize) -> f64 {
    match n {
        0 => set.f,
        1 => set.d1,
        2 => set.d2,
        _ => panic!("derivative order {n} not in 0..=2"),
    }
}
