use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary points closer than this in angle are treated as equal.
pub const BOUNDARY_EQ_TOL: f64 = 1e-12;

const MIN_IMAG: f64 = 1e-300;

/// A point `x + iy` of the upper half-plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !(y > MIN_IMAG) || !x.is_finite() || !y.is_finite() {
            return Err(Error::InvalidPoint(y));
        }
        Ok(Point { x, y })
    }

    /// The default basepoint `i`.
    pub const fn i() -> Self {
        Point { x: 0.0, y: 1.0 }
    }

    /// Coordinates in the Poincaré disc, via `z ↦ (z − i)/(z + i)`.
    pub fn to_disc(&self) -> (f64, f64) {
        let den = self.x * self.x + (self.y + 1.0) * (self.y + 1.0);
        let re = (self.x * self.x + self.y * self.y - 1.0) / den;
        let im = -2.0 * self.x / den;
        (re, im)
    }
}

/// A point of the circle at infinity, stored as its disc-model angle.
///
/// The angle `0` is the point `∞` of the half-plane chart and `π` is `0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    theta: f64,
}

fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

impl BoundaryPoint {
    pub fn from_angle(theta: f64) -> Self {
        BoundaryPoint {
            theta: wrap_angle(theta),
        }
    }

    pub fn infinity() -> Self {
        BoundaryPoint { theta: 0.0 }
    }

    /// The boundary point with half-plane coordinate `x`.
    pub fn from_real(x: f64) -> Self {
        Self::from_angle(2.0 * f64::atan2(1.0, -x))
    }

    /// The boundary point with homogeneous coordinates `[u : v]`, i.e. `u/v`.
    pub fn from_homogeneous(u: f64, v: f64) -> Self {
        Self::from_angle(2.0 * f64::atan2(v, -u))
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Unit homogeneous coordinates `(u, v)` with `x = u/v`.
    pub fn homogeneous(&self) -> (f64, f64) {
        let h = 0.5 * self.theta;
        (-h.cos(), h.sin())
    }

    /// Half-plane coordinate, or `None` for the point at infinity.
    pub fn to_real(&self) -> Option<f64> {
        if self.is_infinity() {
            return None;
        }
        let (u, v) = self.homogeneous();
        Some(u / v)
    }

    pub fn is_infinity(&self) -> bool {
        self.angle_dist(&Self::infinity()) <= BOUNDARY_EQ_TOL
    }

    pub fn to_disc(&self) -> (f64, f64) {
        (self.theta.cos(), self.theta.sin())
    }

    /// Circular distance between the two angles, in `[0, π]`.
    pub fn angle_dist(&self, other: &BoundaryPoint) -> f64 {
        let d = (self.theta - other.theta).abs();
        if d > PI {
            TAU - d
        } else {
            d
        }
    }

    pub fn approx_eq(&self, other: &BoundaryPoint) -> bool {
        self.angle_dist(other) <= BOUNDARY_EQ_TOL
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_round_trip() {
        for &x in &[-1e6, -3.0, -1.0, -1e-3, 0.0, 0.5, 2.0, 7e5] {
            let p = BoundaryPoint::from_real(x);
            let back = p.to_real().unwrap();
            // Angles near ∞ resolve x only to about ulp(2π)·x²/2.
            let tol = (1e-12 * x.abs().max(1.0)).max(1e-15 * x * x);
            assert!((back - x).abs() <= tol, "{x} -> {back}");
        }
        for k in 1..64 {
            let t = k as f64 * TAU / 64.0;
            let p = BoundaryPoint::from_angle(t);
            let q = BoundaryPoint::from_real(p.to_real().unwrap());
            assert!(p.angle_dist(&q) < 1e-12);
        }
        assert!(BoundaryPoint::from_real(1e20).angle_dist(&BoundaryPoint::infinity()) < 1e-12);
        assert_eq!(BoundaryPoint::infinity().to_real(), None);
        assert!((BoundaryPoint::from_real(0.0).theta() - PI).abs() < 1e-15);
    }

    #[test]
    fn homogeneous_scaling_is_ignored() {
        let p = BoundaryPoint::from_homogeneous(3.0, -2.0);
        let q = BoundaryPoint::from_homogeneous(-6.0, 4.0);
        assert!(p.approx_eq(&q));
        assert!((p.to_real().unwrap() + 1.5).abs() < 1e-14);
    }

    #[test]
    fn disc_image_of_boundary_limit() {
        let z = Point::new(2.0, 1e-9).unwrap();
        let (re, im) = z.to_disc();
        let b = BoundaryPoint::from_real(2.0).to_disc();
        assert!((re - b.0).abs() < 1e-8 && (im - b.1).abs() < 1e-8);
    }

    #[test]
    fn rejects_non_positive_imaginary_part() {
        assert!(Point::new(0.0, 0.0).is_err());
        assert!(Point::new(0.0, -1.0).is_err());
        assert!(Point::new(0.0, 1e-301).is_err());
    }
}
