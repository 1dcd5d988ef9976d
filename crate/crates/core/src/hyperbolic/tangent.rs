use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use super::isometry::{Action, Isometry};
use super::metric::dist;
use super::point::{BoundaryPoint, Point};
use super::quadrature::t1_rule;
use crate::error::{Error, Result};

/// Tolerance for "lies on the strong stable leaf" checks.
pub const LEAF_TOL: f64 = 1e-8;

/// A unit tangent vector, stored as the frame `g` with `v = g·(i, ↑)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitTangent {
    frame: Isometry,
}

/// Hopf coordinates `(ξ₋, ξ₊, t)` relative to a basepoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopfCoords {
    pub minus: BoundaryPoint,
    pub plus: BoundaryPoint,
    pub t: f64,
}

impl UnitTangent {
    pub fn from_frame(frame: Isometry) -> Self {
        UnitTangent { frame }
    }

    /// The vector at `base` making angle `dir` with the positive real axis.
    pub fn new(base: Point, dir: f64) -> Self {
        let alpha = 0.5 * (FRAC_PI_2 - dir);
        UnitTangent {
            frame: Isometry::standardize_at(&base) * Isometry::rotation(alpha),
        }
    }

    /// Upward vector at `i`.
    pub fn reference() -> Self {
        UnitTangent {
            frame: Isometry::identity(),
        }
    }

    /// The vector at `base` pointing at the boundary point `xi`.
    pub fn toward_boundary(base: Point, xi: &BoundaryPoint) -> Self {
        let std = Isometry::standardize_at(&base);
        let (u, v) = xi.act(&std.inverse()).homogeneous();
        UnitTangent {
            frame: std * Isometry::rotation(v.atan2(u)),
        }
    }

    /// The vector at `base` pointing at the interior point `target`.
    pub fn toward_point(base: Point, target: &Point) -> Result<Self> {
        let std = Isometry::standardize_at(&base);
        let z = target.act(&std.inverse());
        // Disc coordinate of z in the chart centred at base.
        let den = z.x * z.x + (z.y + 1.0) * (z.y + 1.0);
        let re = z.x * z.x + z.y * z.y - 1.0;
        let im = -2.0 * z.x;
        if re.hypot(im) <= 1e-15 * den {
            return Err(Error::Degenerate(
                "direction toward a coincident point".into(),
            ));
        }
        let (u, v) = BoundaryPoint::from_angle(im.atan2(re)).homogeneous();
        Ok(UnitTangent {
            frame: std * Isometry::rotation(v.atan2(u)),
        })
    }

    /// Some vector on the oriented geodesic from `minus` to `plus`.
    pub fn on_geodesic(minus: &BoundaryPoint, plus: &BoundaryPoint) -> Result<Self> {
        if minus.approx_eq(plus) {
            return Err(Error::Degenerate(
                "geodesic with coincident endpoints".into(),
            ));
        }
        let (u1, v1) = plus.homogeneous();
        let (mut u2, mut v2) = minus.homogeneous();
        if u1 * v2 - u2 * v1 < 0.0 {
            u2 = -u2;
            v2 = -v2;
        }
        Ok(UnitTangent {
            frame: Isometry::from_positive_det(u1, u2, v1, v2),
        })
    }

    /// Inverse of [`hopf`](Self::hopf).
    pub fn from_hopf(h: &HopfCoords, x0: &Point) -> Result<Self> {
        let v = Self::on_geodesic(&h.minus, &h.plus)?;
        let t0 = v.hopf_time(x0);
        Ok(v.flow(h.t - t0))
    }

    pub fn frame(&self) -> &Isometry {
        &self.frame
    }

    pub fn base(&self) -> Point {
        let [a, b, c, d] = self.frame.entries();
        let den = c * c + d * d;
        Point {
            x: (a * c + b * d) / den,
            y: 1.0 / den,
        }
    }

    /// Angle of the vector with the positive real axis, in `[0, 2π)`.
    pub fn dir(&self) -> f64 {
        let [_, _, c, d] = self.frame.entries();
        (FRAC_PI_2 - 2.0 * c.atan2(d)).rem_euclid(TAU)
    }

    pub fn forward(&self) -> BoundaryPoint {
        let [a, _, c, _] = self.frame.entries();
        BoundaryPoint::from_homogeneous(a, c)
    }

    pub fn backward(&self) -> BoundaryPoint {
        let [_, b, _, d] = self.frame.entries();
        BoundaryPoint::from_homogeneous(b, d)
    }

    /// Geodesic flow for time `s`.
    pub fn flow(&self, s: f64) -> Self {
        let [a, b, c, d] = self.frame.entries();
        let e = (0.5 * s).exp();
        let f = (-0.5 * s).exp();
        UnitTangent {
            frame: Isometry::from_positive_det(a * e, b * f, c * e, d * f),
        }
    }

    /// The antipodal flip `v ↦ −v`.
    pub fn flip(&self) -> Self {
        let [a, b, c, d] = self.frame.entries();
        UnitTangent {
            frame: Isometry::from_positive_det(b, -a, d, -c),
        }
    }

    /// Basepoint of `flow(t)`.
    pub fn point_at(&self, t: f64) -> Point {
        self.frame.apply_point(&Point { x: 0.0, y: t.exp() })
    }

    /// Signed distance from the closest point to `x0` on the geodesic.
    pub fn hopf_time(&self, x0: &Point) -> f64 {
        let z = self.frame.inverse().apply_point(x0);
        -z.x.hypot(z.y).ln()
    }

    pub fn hopf(&self, x0: &Point) -> HopfCoords {
        HopfCoords {
            minus: self.backward(),
            plus: self.forward(),
            t: self.hopf_time(x0),
        }
    }

    /// Basepoint distance plus circular direction difference; zero iff equal.
    pub fn separation(&self, other: &UnitTangent) -> f64 {
        let da = (self.dir() - other.dir()).abs();
        dist(&self.base(), &other.base()) + da.min(TAU - da)
    }

    /// Coordinates of `other`'s basepoint in the chart where `self` is the
    /// upward vector at `i`.
    pub(crate) fn chart_point(&self, p: &Point) -> Point {
        self.frame.inverse().apply_point(p)
    }
}

impl Action for UnitTangent {
    fn act(&self, g: &Isometry) -> Self {
        UnitTangent {
            frame: g.compose(&self.frame),
        }
    }
}

/// Distance on T¹H²: the Gaussian average of `d(v(t), v′(t))`, evaluated with
/// a [`T1_QUADRATURE_NODES`](super::T1_QUADRATURE_NODES)-point Gauss–Hermite
/// rule.
pub fn t1_dist(v: &UnitTangent, w: &UnitTangent) -> f64 {
    let (x, wt) = t1_rule();
    let sum: f64 = x
        .iter()
        .zip(wt)
        .map(|(t, k)| k * dist(&v.point_at(*t), &w.point_at(*t)))
        .sum();
    sum / PI.sqrt()
}

/// Hamenstädt distance between two vectors of the strong stable leaf of `w`.
///
/// In the chart where `w` is the upward vector at `i`, the leaf consists of
/// upward vectors based on `Im z = 1` and the distance is `|Δx|/√(y y′)`.
pub fn hamenstadt_dist(w: &UnitTangent, v: &UnitTangent, v2: &UnitTangent) -> Result<f64> {
    let plus = w.forward();
    for (name, u) in [("v", v), ("v'", v2)] {
        if u.forward().angle_dist(&plus) > LEAF_TOL {
            return Err(Error::Domain(format!(
                "{name} is not forward asymptotic to w"
            )));
        }
    }
    let z = w.chart_point(&v.base());
    let z2 = w.chart_point(&v2.base());
    if z.y.ln().abs() > LEAF_TOL || z2.y.ln().abs() > LEAF_TOL {
        return Err(Error::Domain(
            "basepoint is off the stable horocycle of w".into(),
        ));
    }
    Ok((z.x - z2.x).abs() / (z.y * z2.y).sqrt())
}

/// Membership in the dynamical thickening `V_{w,η,R}`. On success returns the
/// flow time `s` and the leaf vector `v′ = flow(v, −s)`.
pub fn in_thickening(
    w: &UnitTangent,
    eta: f64,
    r: f64,
    v: &UnitTangent,
) -> Option<(f64, UnitTangent)> {
    if v.forward().angle_dist(&w.forward()) > LEAF_TOL {
        return None;
    }
    let z = w.chart_point(&v.base());
    let s = z.y.ln();
    if s.abs() < eta && z.x.abs() < r {
        Some((s, v.flow(-s)))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> UnitTangent {
        UnitTangent::new(Point::new(0.3, 1.7).unwrap(), 2.1)
    }

    #[test]
    fn base_and_direction_round_trip() {
        for k in 0..16 {
            let dir = k as f64 * TAU / 16.0 + 0.01;
            let p = Point::new(-1.2, 0.4).unwrap();
            let v = UnitTangent::new(p, dir);
            assert!(dist(&v.base(), &p) < 1e-14);
            let dd = (v.dir() - dir).rem_euclid(TAU);
            assert!(dd.min(TAU - dd) < 1e-12);
        }
    }

    #[test]
    fn reference_vector_points_up() {
        let v = UnitTangent::reference();
        assert!(v.forward().is_infinity());
        assert!(v.backward().approx_eq(&BoundaryPoint::from_real(0.0)));
        assert!((v.dir() - FRAC_PI_2).abs() < 1e-15);
        let p = v.point_at(1.0);
        assert!((p.y - 1f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn flow_moves_along_geodesic() {
        let v = sample();
        let w = v.flow(0.75);
        assert!((dist(&v.base(), &w.base()) - 0.75).abs() < 1e-13);
        assert!(v.forward().approx_eq(&w.forward()));
        assert!(v.backward().approx_eq(&w.backward()));
        assert!(v.flow(0.3).flow(-1.1).separation(&v.flow(-0.8)) < 1e-12);
    }

    #[test]
    fn flip_swaps_endpoints() {
        let v = sample();
        let f = v.flip();
        assert!(f.forward().approx_eq(&v.backward()));
        assert!(f.backward().approx_eq(&v.forward()));
        assert!(dist(&f.base(), &v.base()) < 1e-14);
        assert!(f.flip().separation(&v) < 1e-12);
    }

    #[test]
    fn hopf_round_trip() {
        let x0 = Point::new(0.1, 0.9).unwrap();
        let v = sample();
        let h = v.hopf(&x0);
        let back = UnitTangent::from_hopf(&h, &x0).unwrap();
        assert!(back.separation(&v) < 1e-12);
        let h2 = v.flow(2.5).hopf(&x0);
        assert!((h2.t - h.t - 2.5).abs() < 1e-12);
    }

    #[test]
    fn toward_boundary_hits_target() {
        let p = Point::new(1.0, 0.5).unwrap();
        for &x in &[-4.0, 0.0, 1.0, 3.0] {
            let xi = BoundaryPoint::from_real(x);
            let v = UnitTangent::toward_boundary(p, &xi);
            assert!(v.forward().angle_dist(&xi) < 1e-13);
            assert!(dist(&v.base(), &p) < 1e-14);
        }
        let v = UnitTangent::toward_boundary(p, &BoundaryPoint::infinity());
        assert!((v.dir() - FRAC_PI_2).abs() < 1e-13);
    }

    #[test]
    fn toward_point_passes_through_target() {
        let p = Point::new(1.0, 0.5).unwrap();
        let q = Point::new(-2.0, 3.0).unwrap();
        let v = UnitTangent::toward_point(p, &q).unwrap();
        let d = dist(&p, &q);
        assert!(dist(&v.point_at(d), &q) < 1e-12);
        assert!(UnitTangent::toward_point(p, &p).is_err());
    }

    #[test]
    fn thickening_examples() {
        let w = sample();
        let eta = 0.1;
        let (s, wit) = in_thickening(&w, eta, 2.0, &w).unwrap();
        assert!(s.abs() < 1e-14 && wit.separation(&w) < 1e-12);
        assert!(in_thickening(&w, eta, 2.0, &w.flow(0.05)).is_some());
        assert!(in_thickening(&w, eta, 2.0, &w.flow(0.2)).is_none());
        assert!(in_thickening(&w, eta, 2.0, &w.flip()).is_none());
    }
}
