//! Möbius maps in the upper half-plane and in the unit disc.
//!
//! Real maps act on `H`, disc maps have the form `w -> (αw + β̄)/(βw + ᾱ)` with
//! `|α|² − |β|² = 1`. The Cayley map `φ(z) = (z − i)/(z + i)` links the two.

use std::ops::Mul;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// How many compositions a product chain may go through before it is rescaled
/// back to unit determinant.
pub const RENORM_EVERY: usize = 16;

/// A point of the half-plane model (finite or ∞) or of the disc model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtPoint {
    Upper(C64),
    Infinity,
    Disc(C64),
}

impl ExtPoint {
    pub fn real(x: f64) -> Self {
        ExtPoint::Upper(C64::new(x, 0.0))
    }

    pub fn is_disc(&self) -> bool {
        matches!(self, ExtPoint::Disc(_))
    }

    /// A boundary point on the unit circle, rescaled to modulus one.
    pub fn boundary(w: C64) -> Self {
        ExtPoint::Disc(unit(w))
    }

    pub fn disc_value(&self) -> Option<C64> {
        match *self {
            ExtPoint::Disc(w) => Some(w),
            _ => None,
        }
    }

    /// Distance in the same model; ∞ is only close to ∞.
    pub fn distance(&self, other: &ExtPoint) -> f64 {
        match (self, other) {
            (ExtPoint::Infinity, ExtPoint::Infinity) => 0.0,
            (ExtPoint::Upper(a), ExtPoint::Upper(b)) | (ExtPoint::Disc(a), ExtPoint::Disc(b)) => {
                (a - b).norm()
            }
            _ => f64::INFINITY,
        }
    }
}

/// `Σ xᵢyᵢ` with error-free products and sums, as accurate as if computed in
/// twice the working precision.
fn dot2(terms: &[(f64, f64)]) -> f64 {
    let (mut s, mut err) = (0.0f64, 0.0f64);
    for &(x, y) in terms {
        let p = x * y;
        let pe = x.mul_add(y, -p);
        let t = s + p;
        let z = t - s;
        err += (s - (t - z)) + (p - z) + pe;
        s = t;
    }
    s + err
}

pub fn unit(w: C64) -> C64 {
    w / w.norm()
}

/// `φ(z) = (z − i)/(z + i)`, sending `∞` to `1`.
pub fn cayley(z: ExtPoint) -> Result<C64> {
    match z {
        ExtPoint::Infinity => Ok(C64::new(1.0, 0.0)),
        ExtPoint::Upper(z) => Ok((z - I) / (z + I)),
        ExtPoint::Disc(_) => Err(Error::ModelMismatch),
    }
}

/// Inverse Cayley map; boundary points within `1e-14` of `1` go to ∞.
pub fn cayley_inv(w: C64) -> ExtPoint {
    let den = C64::new(1.0, 0.0) - w;
    if den.norm() < 1e-14 {
        ExtPoint::Infinity
    } else {
        let z = I * (C64::new(1.0, 0.0) + w) / den;
        if (w.norm() - 1.0).abs() < 1e-10 {
            ExtPoint::real(z.re)
        } else {
            ExtPoint::Upper(z)
        }
    }
}

/// Boundary point of the disc seen as an extended real number.
pub fn disc_to_real(w: C64) -> Option<f64> {
    match cayley_inv(w) {
        ExtPoint::Upper(z) => Some(z.re),
        _ => None,
    }
}

pub fn real_to_disc(x: Option<f64>) -> C64 {
    match x {
        Some(x) => {
            let z = C64::new(x, 0.0);
            unit((z - I) / (z + I))
        }
        None => C64::new(1.0, 0.0),
    }
}

/// `[[a, b], [c, d]]` acting by `z -> (az + b)/(cz + d)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealMoebius {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl RealMoebius {
    pub const IDENTITY: RealMoebius = RealMoebius { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        RealMoebius { a, b, c, d }
    }

    pub fn from_slice(m: &[f64; 4]) -> Self {
        RealMoebius::new(m[0], m[1], m[2], m[3])
    }

    pub fn det(&self) -> f64 {
        dot2(&[(self.a, self.d), (-self.b, self.c)])
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn inverse(&self) -> Self {
        RealMoebius::new(self.d, -self.b, -self.c, self.a)
    }

    /// Rescaled by `1/√det`.
    pub fn normalized(&self) -> Self {
        let k = 1.0 / self.det().abs().sqrt();
        RealMoebius::new(self.a * k, self.b * k, self.c * k, self.d * k)
    }

    pub fn is_unimodular(&self, tol: f64) -> bool {
        (self.det() - 1.0).abs() <= tol
    }

    /// Translation `z -> z + t`.
    pub fn translation(t: f64) -> Self {
        RealMoebius::new(1.0, t, 0.0, 1.0)
    }

    pub fn apply(&self, z: ExtPoint) -> Result<ExtPoint> {
        match z {
            ExtPoint::Disc(_) => Err(Error::ModelMismatch),
            ExtPoint::Infinity => {
                if self.c == 0.0 {
                    Ok(ExtPoint::Infinity)
                } else {
                    Ok(ExtPoint::Upper(C64::new(self.a / self.c, 0.0)))
                }
            }
            ExtPoint::Upper(z) => {
                let den = z * self.c + self.d;
                if den.norm() == 0.0 {
                    Ok(ExtPoint::Infinity)
                } else {
                    Ok(ExtPoint::Upper((z * self.a + self.b) / den))
                }
            }
        }
    }

    /// Action on the extended real line, `None` standing for ∞.
    pub fn apply_real(&self, x: Option<f64>) -> Option<f64> {
        match x {
            None => (self.c != 0.0).then(|| self.a / self.c),
            Some(x) => {
                let den = self.c * x + self.d;
                (den != 0.0).then(|| (self.a * x + self.b) / den)
            }
        }
    }

    pub fn approx_eq_pm(&self, other: &RealMoebius, tol: f64) -> bool {
        let close = |s: f64| {
            (self.a - s * other.a).abs() < tol
                && (self.b - s * other.b).abs() < tol
                && (self.c - s * other.c).abs() < tol
                && (self.d - s * other.d).abs() < tol
        };
        close(1.0) || close(-1.0)
    }
}

impl Mul for RealMoebius {
    type Output = RealMoebius;
    fn mul(self, o: RealMoebius) -> RealMoebius {
        RealMoebius::new(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )
    }
}

/// Product of a chain, rescaled every [`RENORM_EVERY`] factors.
pub fn real_product<'a, I: IntoIterator<Item = &'a RealMoebius>>(chain: I) -> RealMoebius {
    let mut acc = RealMoebius::IDENTITY;
    for (i, m) in chain.into_iter().enumerate() {
        acc = acc * *m;
        if (i + 1) % RENORM_EVERY == 0 {
            acc = acc.normalized();
        }
    }
    acc
}

/// Element of SU(1,1): `[[α, β̄], [β, ᾱ]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscMoebius {
    pub alpha: C64,
    pub beta: C64,
}

impl DiscMoebius {
    pub const IDENTITY: DiscMoebius = DiscMoebius {
        alpha: C64 { re: 1.0, im: 0.0 },
        beta: C64 { re: 0.0, im: 0.0 },
    };

    pub fn new(alpha: C64, beta: C64) -> Self {
        DiscMoebius { alpha, beta }
    }

    pub fn det(&self) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        dot2(&[(a.re, a.re), (a.im, a.im), (-b.re, b.re), (-b.im, b.im)])
    }

    pub fn normalized(&self) -> Self {
        let k = 1.0 / self.det().sqrt();
        DiscMoebius::new(self.alpha * k, self.beta * k)
    }

    pub fn inverse(&self) -> Self {
        DiscMoebius::new(self.alpha.conj(), -self.beta)
    }

    pub fn trace(&self) -> f64 {
        2.0 * self.alpha.re
    }

    /// Action on a disc point; boundary points come back on the unit circle.
    pub fn apply_c(&self, w: C64) -> C64 {
        (self.alpha * w + self.beta.conj()) / (self.beta * w + self.alpha.conj())
    }

    pub fn apply_boundary(&self, w: C64) -> C64 {
        unit(self.apply_c(w))
    }

    pub fn apply(&self, z: ExtPoint) -> Result<ExtPoint> {
        match z {
            ExtPoint::Disc(w) => {
                let v = self.apply_c(w);
                if (w.norm() - 1.0).abs() < 1e-10 {
                    Ok(ExtPoint::Disc(unit(v)))
                } else {
                    Ok(ExtPoint::Disc(v))
                }
            }
            _ => Err(Error::ModelMismatch),
        }
    }

    /// `|D_ξ F| = 1/|βξ + ᾱ|²` on the unit circle.
    pub fn derivative(&self, xi: C64) -> f64 {
        1.0 / (self.beta * xi + self.alpha.conj()).norm_sqr()
    }

    pub fn derivative_modulus(&self, xi: ExtPoint) -> Result<f64> {
        let w = xi.disc_value().ok_or(Error::ModelMismatch)?;
        let den = (self.beta * w + self.alpha.conj()).norm_sqr();
        if den == 0.0 {
            return Err(Error::Pole);
        }
        Ok(1.0 / den)
    }

    /// The pole `ω = −ᾱ/β`.
    pub fn pole(&self) -> Option<C64> {
        (self.beta.norm() > 0.0).then(|| -self.alpha.conj() / self.beta)
    }

    /// Centre and radius of the isometric circle.
    pub fn isometric_circle(&self) -> Result<(C64, f64)> {
        if self.beta.norm() == 0.0 {
            return Err(Error::NoIsometricCircle);
        }
        Ok((-self.alpha.conj() / self.beta, 1.0 / self.beta.norm()))
    }

    pub fn approx_eq_pm(&self, other: &DiscMoebius, tol: f64) -> bool {
        let close = |s: f64| {
            (self.alpha - other.alpha * s).norm() < tol && (self.beta - other.beta * s).norm() < tol
        };
        close(1.0) || close(-1.0)
    }

    pub fn to_real(&self) -> RealMoebius {
        let (sa, da) = (self.alpha.re, self.alpha.im);
        let (sb, db) = (self.beta.re, self.beta.im);
        // a + d = 2 Re α, b − c = 2 Im α, a − d = 2 Re β, b + c = 2 Im β
        RealMoebius::new(sa + sb, da + db, db - da, sa - sb)
    }

    /// `k`-th power of a parabolic element, `k` real. The element is first
    /// scaled so that `Re α = 1`; then `F^k = I + k·N` with `N` nilpotent.
    pub fn parabolic_power(&self, k: f64) -> DiscMoebius {
        let s = if self.alpha.re < 0.0 { -1.0 } else { 1.0 };
        let y = s * self.alpha.im;
        DiscMoebius::new(C64::new(1.0, k * y), self.beta * (s * k))
    }
}

impl Mul for DiscMoebius {
    type Output = DiscMoebius;
    fn mul(self, o: DiscMoebius) -> DiscMoebius {
        DiscMoebius::new(
            self.alpha * o.alpha + self.beta.conj() * o.beta,
            self.beta * o.alpha + self.alpha.conj() * o.beta,
        )
    }
}

pub fn disc_product<'a, I: IntoIterator<Item = &'a DiscMoebius>>(chain: I) -> DiscMoebius {
    let mut acc = DiscMoebius::IDENTITY;
    for (i, m) in chain.into_iter().enumerate() {
        acc = acc * *m;
        if (i + 1) % RENORM_EVERY == 0 {
            acc = acc.normalized();
        }
    }
    acc
}

/// Conjugate `φ∘G∘φ⁻¹` as an element of SU(1,1).
pub fn to_disc(g: &RealMoebius) -> DiscMoebius {
    DiscMoebius::new(
        C64::new(0.5 * (g.a + g.d), 0.5 * (g.b - g.c)),
        C64::new(0.5 * (g.a - g.d), 0.5 * (g.b + g.c)),
    )
}

/// Denominator `|c(G·A_k)|` of the point `G·A_k·∞`.
pub fn denominator(g: &RealMoebius, k: usize, reps: &[RealMoebius]) -> Result<f64> {
    let a = reps.get(k).ok_or(Error::UnknownCusp(k))?;
    Ok((*g * *a).c.abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Horoball {
    pub point: f64,
    pub diameter: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HoroballImage {
    Ball(Horoball),
    /// `G(H_T)` is again a half-plane `{Im z > height}`.
    HalfPlane(f64),
}

/// Image of `H_T = {Im z > T}` under `G`.
pub fn horoball_image(g: &RealMoebius, t: f64) -> HoroballImage {
    if g.c == 0.0 {
        HoroballImage::HalfPlane(t * g.a * g.a)
    } else {
        HoroballImage::Ball(Horoball { point: g.a / g.c, diameter: 1.0 / (t * g.c * g.c) })
    }
}
