use std::fmt;
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use super::point::{BoundaryPoint, Point};
use crate::error::{Error, Result};

/// Entries smaller than this are skipped when choosing the canonical sign.
const SIGN_EPS: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;

/// An orientation-preserving isometry `z ↦ (az + b)/(cz + d)` with
/// `ad − bc = 1`, stored modulo sign.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Isometry {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Identity,
    Elliptic,
    Parabolic,
    Hyperbolic,
}

/// Things an isometry can move around.
pub trait Action: Sized {
    fn act(&self, g: &Isometry) -> Self;
}

impl Isometry {
    /// Builds the isometry for a matrix of positive determinant, rescaling it
    /// to determinant one.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det > 0.0) || !det.is_finite() {
            return Err(Error::Degenerate(format!(
                "matrix [[{a}, {b}], [{c}, {d}]] has non-positive determinant {det}"
            )));
        }
        Ok(Self::from_positive_det(a, b, c, d))
    }

    /// Renormalizes and canonicalizes; `det` must already be positive.
    pub(crate) fn from_positive_det(a: f64, b: f64, c: f64, d: f64) -> Self {
        let s = (a * d - b * c).sqrt().recip();
        Isometry {
            a: a * s,
            b: b * s,
            c: c * s,
            d: d * s,
        }
        .canonical()
    }

    pub const fn identity() -> Self {
        Isometry {
            a: 1.0,
            b: 0.0,
            c: 0.0,
            d: 1.0,
        }
    }

    /// `z ↦ z + t`.
    pub fn translation(t: f64) -> Self {
        Isometry {
            a: 1.0,
            b: t,
            c: 0.0,
            d: 1.0,
        }
    }

    /// `z ↦ e^ℓ z`, translation by `ℓ` along the imaginary axis.
    pub fn axial(ell: f64) -> Self {
        let h = 0.5 * ell;
        Isometry {
            a: h.exp(),
            b: 0.0,
            c: 0.0,
            d: (-h).exp(),
        }
    }

    /// Rotation about `i` by the matrix `[[cos α, −sin α], [sin α, cos α]]`.
    pub fn rotation(alpha: f64) -> Self {
        let (s, c) = alpha.sin_cos();
        Isometry {
            a: c,
            b: -s,
            c: s,
            d: c,
        }
        .canonical()
    }

    /// The affine map `z ↦ y z + x` taking `i` to `p`.
    pub fn standardize_at(p: &Point) -> Self {
        let r = p.y.sqrt();
        Isometry {
            a: r,
            b: p.x / r,
            c: 0.0,
            d: 1.0 / r,
        }
    }

    pub fn entries(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    /// Flips the overall sign so the first entry that is not (numerically)
    /// zero is positive.
    pub fn canonical(self) -> Self {
        let lead = [self.a, self.b, self.c, self.d]
            .into_iter()
            .find(|x| x.abs() > SIGN_EPS)
            .unwrap_or(1.0);
        if lead < 0.0 {
            Isometry {
                a: -self.a,
                b: -self.b,
                c: -self.c,
                d: -self.d,
            }
        } else {
            self
        }
    }

    pub fn inverse(&self) -> Self {
        Isometry {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
        .canonical()
    }

    /// Matrix product `self · other`, i.e. `other` is applied first.
    pub fn compose(&self, other: &Isometry) -> Self {
        Self::from_positive_det(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )
    }

    pub fn classify(&self) -> Classification {
        let t = self.trace().abs();
        if (self.a - 1.0).abs() < TRACE_TOL
            && (self.d - 1.0).abs() < TRACE_TOL
            && self.b.abs() < TRACE_TOL
            && self.c.abs() < TRACE_TOL
        {
            Classification::Identity
        } else if t > 2.0 + TRACE_TOL {
            Classification::Hyperbolic
        } else if (t - 2.0).abs() <= TRACE_TOL {
            Classification::Parabolic
        } else {
            Classification::Elliptic
        }
    }

    /// Translation length `2 arcosh(|tr|/2)`; zero unless hyperbolic.
    pub fn translation_length(&self) -> f64 {
        let t = 0.5 * self.trace().abs();
        if t > 1.0 {
            2.0 * t.acosh()
        } else {
            0.0
        }
    }

    /// Fixed points on the boundary. For a hyperbolic element the attracting
    /// point comes first; a parabolic element has one.
    pub fn fixed_points(&self) -> Vec<BoundaryPoint> {
        let tr = self.trace();
        let disc = tr * tr - 4.0;
        let eigvec = |lambda: f64| {
            // (b, λ − a) and (λ − d, c) both solve (g − λ)v = 0; keep the larger.
            let v1 = (self.b, lambda - self.a);
            let v2 = (lambda - self.d, self.c);
            if v1.0.hypot(v1.1) >= v2.0.hypot(v2.1) {
                BoundaryPoint::from_homogeneous(v1.0, v1.1)
            } else {
                BoundaryPoint::from_homogeneous(v2.0, v2.1)
            }
        };
        match self.classify() {
            Classification::Hyperbolic => {
                let r = disc.sqrt();
                let (big, small) = if tr > 0.0 {
                    (0.5 * (tr + r), 0.5 * (tr - r))
                } else {
                    (0.5 * (tr - r), 0.5 * (tr + r))
                };
                vec![eigvec(big), eigvec(small)]
            }
            Classification::Parabolic => vec![eigvec(0.5 * tr)],
            _ => Vec::new(),
        }
    }

    pub fn apply<T: Action>(&self, x: &T) -> T {
        x.act(self)
    }

    pub(crate) fn apply_point(&self, p: &Point) -> Point {
        let re = self.c * p.x + self.d;
        let im = self.c * p.y;
        let den = re * re + im * im;
        let num_re = self.a * p.x + self.b;
        Point {
            x: (num_re * re + self.a * self.c * p.y * p.y) / den,
            y: p.y / den,
        }
    }

    pub(crate) fn apply_homogeneous(&self, u: f64, v: f64) -> (f64, f64) {
        (self.a * u + self.b * v, self.c * u + self.d * v)
    }

    /// Integer-quantized entries for deduplication at resolution `quantum`.
    pub fn quantized_key(&self, quantum: f64) -> [i64; 4] {
        let q = |x: f64| (x / quantum).round() as i64;
        [q(self.a), q(self.b), q(self.c), q(self.d)]
    }

    pub fn max_abs_diff(&self, other: &Isometry) -> f64 {
        let p = self.entries();
        let q = other.entries();
        let same = (0..4).map(|k| (p[k] - q[k]).abs()).fold(0.0, f64::max);
        let flipped = (0..4).map(|k| (p[k] + q[k]).abs()).fold(0.0, f64::max);
        same.min(flipped)
    }
}

impl Mul for Isometry {
    type Output = Isometry;
    fn mul(self, rhs: Isometry) -> Isometry {
        self.compose(&rhs)
    }
}

impl Mul for &Isometry {
    type Output = Isometry;
    fn mul(self, rhs: &Isometry) -> Isometry {
        self.compose(rhs)
    }
}

impl fmt::Display for Isometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

impl Action for Point {
    fn act(&self, g: &Isometry) -> Self {
        g.apply_point(self)
    }
}

impl Action for BoundaryPoint {
    fn act(&self, g: &Isometry) -> Self {
        let (u, v) = self.homogeneous();
        let (u2, v2) = g.apply_homogeneous(u, v);
        BoundaryPoint::from_homogeneous(u2, v2)
    }
}
