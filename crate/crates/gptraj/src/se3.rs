//! `SE(3)` operations and the derivative maps of its right Jacobian.
//!
//! Tangent layout is rotation-first: `xi = (theta, rho)`, with
//! `Exp(xi) = (Exp(theta), Jl(theta) rho)` where `Jl(theta) = jr(-theta)`.
//!
//! The right Jacobian is lower block triangular,
//! `jr6(xi) = [[jr(theta), 0], [Q(xi), jr(theta)]]`, and its inverse uses
//! `Q'(xi) = -jr_inv(theta) Q(xi) jr_inv(theta)`. The `s*`/`c*` functions are
//! the first and second directional derivatives of the coupling blocks:
//!
//! * `s1(xi, w) = d(Q(xi) w)/dtheta`, `s2(xi, w) = d(Q(xi) w)/drho`, and the
//!   primed versions differentiate `Q'` instead.
//! * `c{ij}` differentiate `s{i}` once more: second index 1 -> `theta`,
//!   2 -> `rho`, 3 -> the direction argument.
//!
//! `Q` is evaluated from its polynomial form
//! `Q = -P/2 + g2 (AP + PA - APA) + q3 (AAP + PAA - 3 APA) + q4 (APAA + AAPA)`
//! with `A = wedge(theta)`, `P = wedge(rho)`; the `s`/`c` maps differentiate
//! that term list directly (word algebra over the atoms), with every scalar
//! chain term routed through the smooth ratios of [`crate::gfun`] so the maps
//! are total at zero rotation. The primed maps come from differentiating the
//! composition `Q' = -jr_inv Q jr_inv`.

use crate::gfun::{GSet, Scalars};
use crate::so3;
use crate::{M3, M6, V3, V6};

/// Rigid transform: rotation `r` (world-from-body) and translation `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub r: M3,
    pub p: V3,
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            r: M3::identity(),
            p: V3::zeros(),
        }
    }

    pub fn new(r: M3, p: V3) -> Self {
        Pose { r, p }
    }

    /// `self * other` as homogeneous transforms.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            r: self.r * other.r,
            p: self.r * other.p + self.p,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.r.transpose();
        Pose {
            r: rt,
            p: -(rt * self.p),
        }
    }

    /// Applies the transform to a point.
    pub fn act(&self, x: &V3) -> V3 {
        self.r * x + self.p
    }
}

#[inline]
fn split(xi: &V6) -> (V3, V3) {
    (
        xi.fixed_rows::<3>(0).into_owned(),
        xi.fixed_rows::<3>(3).into_owned(),
    )
}

/// Stacks two 3-vectors into a tangent vector.
pub fn join(top: &V3, bottom: &V3) -> V6 {
    let mut out = V6::zeros();
    out.fixed_rows_mut::<3>(0).copy_from(top);
    out.fixed_rows_mut::<3>(3).copy_from(bottom);
    out
}

/// Assembles a 6x6 from 3x3 blocks, row-major.
pub fn blocks(b00: &M3, b01: &M3, b10: &M3, b11: &M3) -> M6 {
    let mut out = M6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(b00);
    out.fixed_view_mut::<3, 3>(0, 3).copy_from(b01);
    out.fixed_view_mut::<3, 3>(3, 0).copy_from(b10);
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(b11);
    out
}

/// Exponential map.
pub fn exp(xi: &V6) -> Pose {
    let (theta, rho) = split(xi);
    Pose {
        r: so3::exp(&theta),
        p: so3::jr(&-theta) * rho,
    }
}

/// Logarithm map.
pub fn log(t: &Pose) -> V6 {
    let theta = so3::log(&t.r);
    let rho = so3::jr_inv(&-theta) * t.p;
    join(&theta, &rho)
}

/// Group adjoint.
pub fn adj(t: &Pose) -> M6 {
    blocks(&t.r, &M3::zeros(), &(so3::wedge(&t.p) * t.r), &t.r)
}

/// Algebra adjoint (`ad(xi) y = [xi, y]`).
pub fn ad(xi: &V6) -> M6 {
    let (theta, rho) = split(xi);
    let a = so3::wedge(&theta);
    blocks(&a, &M3::zeros(), &so3::wedge(&rho), &a)
}

// ---------------------------------------------------------------------------
// Word algebra over the Q term list.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
enum Sym {
    /// `wedge(theta)`
    A,
    /// `wedge(rho)`
    P,
    /// the constant `wedge(w)` slot used when differentiating twice
    K,
}

#[derive(Debug, Clone, Copy)]
enum Coef {
    One,
    G2,
    Q3,
    Q4,
}

/// `Q(xi) = sum of m * coef(|theta|) * product(word)`.
static TERMS: &[(Coef, f64, &[Sym])] = &[
    (Coef::One, -0.5, &[Sym::P]),
    (Coef::G2, 1.0, &[Sym::A, Sym::P]),
    (Coef::G2, 1.0, &[Sym::P, Sym::A]),
    (Coef::G2, -1.0, &[Sym::A, Sym::P, Sym::A]),
    (Coef::Q3, 1.0, &[Sym::A, Sym::A, Sym::P]),
    (Coef::Q3, 1.0, &[Sym::P, Sym::A, Sym::A]),
    (Coef::Q3, -3.0, &[Sym::A, Sym::P, Sym::A]),
    (Coef::Q4, 1.0, &[Sym::A, Sym::P, Sym::A, Sym::A]),
    (Coef::Q4, 1.0, &[Sym::A, Sym::A, Sym::P, Sym::A]),
];

const ONE: GSet = GSet {
    f: 1.0,
    d1: 0.0,
    d2: 0.0,
    d1u: 0.0,
    dd: 0.0,
};

fn csel(s: &Scalars, id: Coef) -> GSet {
    match id {
        Coef::One => ONE,
        Coef::G2 => s.g2,
        Coef::Q3 => s.q3,
        Coef::Q4 => s.q4,
    }
}

/// Atom matrices for one evaluation point.
struct Ctx {
    a: M3,
    p: M3,
    k: M3,
}

impl Ctx {
    fn new(theta: &V3, rho: &V3, w: &V3) -> Self {
        Ctx {
            a: so3::wedge(theta),
            p: so3::wedge(rho),
            k: so3::wedge(w),
        }
    }

    fn atom(&self, s: Sym) -> &M3 {
        match s {
            Sym::A => &self.a,
            Sym::P => &self.p,
            Sym::K => &self.k,
        }
    }

    fn mat(&self, word: &[Sym]) -> M3 {
        word.iter().fold(M3::identity(), |m, &s| m * self.atom(s))
    }

    fn app(&self, word: &[Sym], x: &V3) -> V3 {
        word.iter().rev().fold(*x, |v, &s| self.atom(s) * v)
    }

    /// `d(product(word) x)/d(slot vector)`: each differentiated atom
    /// `wedge(q)` contributes `prefix * (-wedge(suffix x))`.
    fn wd(&self, word: &[Sym], x: &V3, slot: Sym) -> M3 {
        let mut out = M3::zeros();
        for (j, &s) in word.iter().enumerate() {
            if s != slot {
                continue;
            }
            let suf = self.app(&word[j + 1..], x);
            out += self.mat(&word[..j]) * (-so3::wedge(&suf));
        }
        out
    }

    /// `d(wd(word, x, slot1) w)/d(slot2)`: replace each `slot1` atom by the
    /// constant `K = wedge(w)` and differentiate the augmented word. Uses
    /// `wedge(m) w = -wedge(w) m` to move the constant into atom position.
    fn wdd(&self, word: &[Sym], x: &V3, slot1: Sym, slot2: Sym) -> M3 {
        let mut out = M3::zeros();
        let mut aug = [Sym::A; 4];
        aug[..word.len()].copy_from_slice(word);
        for (j, &s) in word.iter().enumerate() {
            if s != slot1 {
                continue;
            }
            aug[j] = Sym::K;
            out += self.wd(&aug[..word.len()], x, slot2);
            aug[j] = s;
        }
        out
    }

    /// `d(wd(word, v, slot) w)/dv` (linear in `v`).
    fn wdv(&self, word: &[Sym], slot: Sym) -> M3 {
        let mut out = M3::zeros();
        for (j, &s) in word.iter().enumerate() {
            if s != slot {
                continue;
            }
            out += self.mat(&word[..j]) * self.k * self.mat(&word[j + 1..]);
        }
        out
    }
}

/// Translation-rotation coupling block of `jr6`.
pub fn q(xi: &V6) -> M3 {
    let (theta, rho) = split(xi);
    let s = Scalars::eval(theta.norm());
    let ctx = Ctx::new(&theta, &rho, &V3::zeros());
    let mut out = M3::zeros();
    for &(id, m, word) in TERMS {
        out += (m * csel(&s, id).f) * ctx.mat(word);
    }
    out
}

/// Coupling block of `jr6_inv`: `Q' = -jr_inv(theta) Q(xi) jr_inv(theta)`.
pub fn qp(xi: &V6) -> M3 {
    let (theta, _) = split(xi);
    let ji = so3::jr_inv(&theta);
    -ji * q(xi) * ji
}

/// Right Jacobian.
pub fn jr6(xi: &V6) -> M6 {
    let (theta, _) = split(xi);
    let j = so3::jr(&theta);
    blocks(&j, &M3::zeros(), &q(xi), &j)
}

/// Inverse right Jacobian. Domain `|theta| < 2 pi`.
pub fn jr6_inv(xi: &V6) -> M6 {
    let (theta, _) = split(xi);
    let ji = so3::jr_inv(&theta);
    blocks(&ji, &M3::zeros(), &qp(xi), &ji)
}

// ---------------------------------------------------------------------------
// First derivatives of Q and Q'.
// ---------------------------------------------------------------------------

fn s_block(xi: &V6, w: &V3, slot: Sym) -> M3 {
    let (theta, rho) = split(xi);
    let s = Scalars::eval(theta.norm());
    let ctx = Ctx::new(&theta, &rho, &V3::zeros());
    let mut out = M3::zeros();
    for &(id, m, word) in TERMS {
        let c = csel(&s, id);
        out += (m * c.f) * ctx.wd(word, w, slot);
        if slot == Sym::A {
            // Chain rule through the coefficient: c'(u) ubar^T = c.d1u * u^T.
            out += (m * c.d1u) * (ctx.app(word, w) * theta.transpose());
        }
    }
    out
}

/// `s1(xi, w) = d(Q(xi) w)/dtheta`.
pub fn s1(xi: &V6, w: &V3) -> M3 {
    s_block(xi, w, Sym::A)
}

/// `s2(xi, w) = d(Q(xi) w)/drho`.
pub fn s2(xi: &V6, w: &V3) -> M3 {
    s_block(xi, w, Sym::P)
}

/// `s1p(xi, w) = d(Q'(xi) w)/dtheta`, by differentiating the composition.
pub fn s1p(xi: &V6, w: &V3) -> M3 {
    let (theta, _) = split(xi);
    let ji = so3::jr_inv(&theta);
    let z = ji * w;
    let y = q(xi) * z;
    -so3::h1p(&theta, &y) - ji * s1(xi, &z) - ji * q(xi) * so3::h1p(&theta, w)
}

/// `s2p(xi, w) = d(Q'(xi) w)/drho`.
pub fn s2p(xi: &V6, w: &V3) -> M3 {
    let (theta, _) = split(xi);
    let ji = so3::jr_inv(&theta);
    -ji * s2(xi, &(ji * w))
}

/// The four first-derivative blocks at one point.
#[derive(Debug, Clone, Copy)]
pub struct SBlocks {
    pub s1: M3,
    pub s2: M3,
    pub s1p: M3,
    pub s2p: M3,
}

/// Evaluates all first-derivative blocks of `Q` and `Q'` in direction `w`.
pub fn s_blocks(xi: &V6, w: &V3) -> SBlocks {
    SBlocks {
        s1: s1(xi, w),
        s2: s2(xi, w),
        s1p: s1p(xi, w),
        s2p: s2p(xi, w),
    }
}

// ---------------------------------------------------------------------------
// Second derivatives: c{ij}(xi, v, w) differentiates s{i}(xi, v) w.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
enum CWhich {
    Theta,
    Rho,
    Dir,
}

fn c_block(xi: &V6, v: &V3, w: &V3, first: Sym, second: CWhich) -> M3 {
    let (theta, rho) = split(xi);
    let s = Scalars::eval(theta.norm());
    let ctx = Ctx::new(&theta, &rho, w);
    let uw = theta.dot(w);
    let mut out = M3::zeros();
    for &(id, m, word) in TERMS {
        let c = csel(&s, id);
        match second {
            CWhich::Theta => {
                out += m
                    * (c.f * ctx.wdd(word, v, first, Sym::A)
                        + (ctx.wd(word, v, first) * w) * (c.d1u * theta.transpose()));
                if first == Sym::A {
                    out += m
                        * ((c.d1u * uw) * ctx.wd(word, v, Sym::A)
                            + ctx.app(word, v) * (c.d1u * w + (uw * c.dd) * theta).transpose());
                }
            }
            CWhich::Rho => {
                out += (m * c.f) * ctx.wdd(word, v, first, Sym::P);
                if first == Sym::A {
                    out += (m * c.d1u * uw) * ctx.wd(word, v, Sym::P);
                }
            }
            CWhich::Dir => {
                out += (m * c.f) * ctx.wdv(word, first);
                if first == Sym::A {
                    out += (m * c.d1u * uw) * ctx.mat(word);
                }
            }
        }
    }
    out
}

/// `d(s1(xi, v) w)/dtheta`.
pub fn c11(xi: &V6, v: &V3, w: &V3) -> M3 {
    c_block(xi, v, w, Sym::A, CWhich::Theta)
}

/// `d(s1(xi, v) w)/drho`.
pub fn c12(xi: &V6, v: &V3, w: &V3) -> M3 {
    c_block(xi, v, w, Sym::A, CWhich::Rho)
}

/// `d(s1(xi, v) w)/dv`.
pub fn c13(xi: &V6, v: &V3, w: &V3) -> M3 {
    c_block(xi, v, w, Sym::A, CWhich::Dir)
}

/// `d(s2(xi, v) w)/dtheta`.
pub fn c21(xi: &V6, v: &V3, w: &V3) -> M3 {
    c_block(xi, v, w, Sym::P, CWhich::Theta)
}

/// `d(s2(xi, v) w)/drho`.
pub fn c22(xi: &V6, v: &V3, w: &V3) -> M3 {
    c_block(xi, v, w, Sym::P, CWhich::Rho)
}

/// `d(s2(xi, v) w)/dv`.
pub fn c23(xi: &V6, v: &V3, w: &V3) -> M3 {
    c_block(xi, v, w, Sym::P, CWhich::Dir)
}

/// `d(s1p(xi, v) w)/dtheta`, via the composition `Q' = -jr_inv Q jr_inv`.
pub fn c11p(xi: &V6, v: &V3, w: &V3) -> M3 {
    let (theta, _) = split(xi);
    let ji = so3::jr_inv(&theta);
    let qm = q(xi);
    let z = ji * v;
    let y = qm * z;
    let n = so3::h1p(&theta, v) * w;
    -(so3::l11p(&theta, &y, w) + so3::l12p(&theta, &y, w) * (s1(xi, &z) + qm * so3::h1p(&theta, v)))
        - (so3::h1p(&theta, &(s1(xi, &z) * w))
            + ji * (c11(xi, &z, w) + c13(xi, &z, w) * so3::h1p(&theta, v)))
        - (so3::h1p(&theta, &(qm * n)) + ji * (s1(xi, &n) + qm * so3::l11p(&theta, v, w)))
}

/// `d(s1p(xi, v) w)/drho`.
pub fn c12p(xi: &V6, v: &V3, w: &V3) -> M3 {
    let (theta, _) = split(xi);
    let ji = so3::jr_inv(&theta);
    let z = ji * v;
    let n = so3::h1p(&theta, v) * w;
    -so3::l12p(&theta, &(q(xi) * z), w) * s2(xi, &z) - ji * c12(xi, &z, w) - ji * s2(xi, &n)
}

/// `d(s1p(xi, v) w)/dv`.
pub fn c13p(xi: &V6, v: &V3, w: &V3) -> M3 {
    let (theta, _) = split(xi);
    let ji = so3::jr_inv(&theta);
    let qm = q(xi);
    let z = ji * v;
    -so3::l12p(&theta, &(qm * z), w) * qm * ji
        - ji * c13(xi, &z, w) * ji
        - ji * qm * so3::l12p(&theta, v, w)
}

/// `d(s2p(xi, v) w)/dtheta`.
pub fn c21p(xi: &V6, v: &V3, w: &V3) -> M3 {
    let (theta, _) = split(xi);
    let ji = so3::jr_inv(&theta);
    let z = ji * v;
    -so3::h1p(&theta, &(s2(xi, &z) * w))
        - ji * (c21(xi, &z, w) + c23(xi, &z, w) * so3::h1p(&theta, v))
}

/// `d(s2p(xi, v) w)/drho`.
pub fn c22p(xi: &V6, v: &V3, w: &V3) -> M3 {
    let (theta, _) = split(xi);
    let ji = so3::jr_inv(&theta);
    -ji * c22(xi, &(ji * v), w)
}

/// `d(s2p(xi, v) w)/dv`.
pub fn c23p(xi: &V6, v: &V3, w: &V3) -> M3 {
    let (theta, _) = split(xi);
    let ji = so3::jr_inv(&theta);
    -ji * c23(xi, &(ji * v), w) * ji
}

/// The twelve second-derivative blocks at one point.
#[derive(Debug, Clone, Copy)]
pub struct CBlocks {
    pub c11: M3,
    pub c12: M3,
    pub c13: M3,
    pub c21: M3,
    pub c22: M3,
    pub c23: M3,
    pub c11p: M3,
    pub c12p: M3,
    pub c13p: M3,
    pub c21p: M3,
    pub c22p: M3,
    pub c23p: M3,
}

/// Evaluates every second-derivative block of `Q` and `Q'`: `v` is the
/// direction held inside the first derivative, `w` the post-multiplied vector.
pub fn c_blocks(xi: &V6, v: &V3, w: &V3) -> CBlocks {
    CBlocks {
        c11: c11(xi, v, w),
        c12: c12(xi, v, w),
        c13: c13(xi, v, w),
        c21: c21(xi, v, w),
        c22: c22(xi, v, w),
        c23: c23(xi, v, w),
        c11p: c11p(xi, v, w),
        c12p: c12p(xi, v, w),
        c13p: c13p(xi, v, w),
        c21p: c21p(xi, v, w),
        c22p: c22p(xi, v, w),
        c23p: c23p(xi, v, w),
    }
}

// ---------------------------------------------------------------------------
// Assembled 6x6 derivative maps, mirroring the SO(3) h/l family.
// ---------------------------------------------------------------------------

/// `h1_6(xi, v) = d(jr6(xi) v)/dxi`.
pub fn h1_6(xi: &V6, v: &V6) -> M6 {
    let (theta, _) = split(xi);
    let (v1, v2) = split(v);
    blocks(
        &so3::h1(&theta, &v1),
        &M3::zeros(),
        &(s1(xi, &v1) + so3::h1(&theta, &v2)),
        &s2(xi, &v1),
    )
}

/// `h1p_6(xi, v) = d(jr6_inv(xi) v)/dxi`.
pub fn h1p_6(xi: &V6, v: &V6) -> M6 {
    let (theta, _) = split(xi);
    let (v1, v2) = split(v);
    blocks(
        &so3::h1p(&theta, &v1),
        &M3::zeros(),
        &(s1p(xi, &v1) + so3::h1p(&theta, &v2)),
        &s2p(xi, &v1),
    )
}

/// `l11_6(xi, v, w) = d(h1_6(xi, v) w)/dxi`.
pub fn l11_6(xi: &V6, v: &V6, w: &V6) -> M6 {
    let (theta, _) = split(xi);
    let (v1, v2) = split(v);
    let (w1, w2) = split(w);
    blocks(
        &so3::l11(&theta, &v1, &w1),
        &M3::zeros(),
        &(c11(xi, &v1, &w1) + so3::l11(&theta, &v2, &w1) + c21(xi, &v1, &w2)),
        &(c12(xi, &v1, &w1) + c22(xi, &v1, &w2)),
    )
}

/// `l12_6(xi, v, w) = d(h1_6(xi, v) w)/dv`.
pub fn l12_6(xi: &V6, v: &V6, w: &V6) -> M6 {
    let (theta, _) = split(xi);
    let (v1, v2) = split(v);
    let (w1, w2) = split(w);
    blocks(
        &so3::l12(&theta, &v1, &w1),
        &M3::zeros(),
        &(c13(xi, &v1, &w1) + c23(xi, &v1, &w2)),
        &so3::l12(&theta, &v2, &w1),
    )
}

/// `l11p_6(xi, v, w) = d(h1p_6(xi, v) w)/dxi`.
pub fn l11p_6(xi: &V6, v: &V6, w: &V6) -> M6 {
    let (theta, _) = split(xi);
    let (v1, v2) = split(v);
    let (w1, w2) = split(w);
    blocks(
        &so3::l11p(&theta, &v1, &w1),
        &M3::zeros(),
        &(c11p(xi, &v1, &w1) + so3::l11p(&theta, &v2, &w1) + c21p(xi, &v1, &w2)),
        &(c12p(xi, &v1, &w1) + c22p(xi, &v1, &w2)),
    )
}

/// `l12p_6(xi, v, w) = d(h1p_6(xi, v) w)/dv`.
pub fn l12p_6(xi: &V6, v: &V6, w: &V6) -> M6 {
    let (theta, _) = split(xi);
    let (v1, v2) = split(v);
    let (w1, w2) = split(w);
    blocks(
        &so3::l12p(&theta, &v1, &w1),
        &M3::zeros(),
        &(c13p(xi, &v1, &w1) + c23p(xi, &v1, &w2)),
        &so3::l12p(&theta, &v2, &w1),
    )
}
