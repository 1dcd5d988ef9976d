use serde::{Deserialize, Serialize};

use super::isometry::{Action, Isometry};
use super::metric::dist;
use super::point::{BoundaryPoint, Point};
use super::tangent::UnitTangent;
use crate::error::{Error, Result};

/// A closed convex subset of H².
///
/// Lines and segments carry a neighbourhood radius (zero for the bare set);
/// a ball of radius zero is a single point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexBody {
    GeodesicLine {
        from: BoundaryPoint,
        to: BoundaryPoint,
        radius: f64,
    },
    SegmentNbhd {
        start: Point,
        end: Point,
        radius: f64,
    },
    Horoball {
        center: BoundaryPoint,
        through: Point,
    },
    Ball {
        center: Point,
        radius: f64,
    },
}

/// Where a boundary point's closest-point projection lands on the core of a
/// line or segment, as a frame `F` and parameter `s` with foot `F(i e^s)`.
struct CoreFoot {
    frame: UnitTangent,
    s: f64,
}

impl ConvexBody {
    pub fn geodesic(from: BoundaryPoint, to: BoundaryPoint) -> Result<Self> {
        Self::geodesic_nbhd(from, to, 0.0)
    }

    pub fn geodesic_nbhd(from: BoundaryPoint, to: BoundaryPoint, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        if from.approx_eq(&to) {
            return Err(Error::Degenerate("geodesic with coincident endpoints".into()));
        }
        Ok(ConvexBody::GeodesicLine { from, to, radius })
    }

    pub fn segment_nbhd(start: Point, end: Point, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        Ok(ConvexBody::SegmentNbhd { start, end, radius })
    }

    pub fn horoball(center: BoundaryPoint, through: Point) -> Self {
        ConvexBody::Horoball { center, through }
    }

    pub fn ball(center: Point, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        Ok(ConvexBody::Ball { center, radius })
    }

    /// Boundary points at infinity of the body.
    pub fn ideal_boundary(&self) -> Vec<BoundaryPoint> {
        match self {
            ConvexBody::GeodesicLine { from, to, .. } => vec![*from, *to],
            ConvexBody::Horoball { center, .. } => vec![*center],
            _ => Vec::new(),
        }
    }

    pub fn touches_at_infinity(&self, xi: &BoundaryPoint) -> bool {
        self.ideal_boundary().iter().any(|p| p.approx_eq(xi))
    }

    /// Closed `s`-neighbourhood.
    pub fn neighbourhood(&self, s: f64) -> Result<Self> {
        check_radius(s)?;
        Ok(match *self {
            ConvexBody::GeodesicLine { from, to, radius } => ConvexBody::GeodesicLine {
                from,
                to,
                radius: radius + s,
            },
            ConvexBody::SegmentNbhd { start, end, radius } => ConvexBody::SegmentNbhd {
                start,
                end,
                radius: radius + s,
            },
            ConvexBody::Ball { center, radius } => ConvexBody::Ball {
                center,
                radius: radius + s,
            },
            ConvexBody::Horoball { center, through } => ConvexBody::Horoball {
                center,
                through: horoball_frame(&center, &through).point_at(-s),
            },
        })
    }

    /// Distance from `p` to the body (zero inside).
    pub fn distance_to(&self, p: &Point) -> f64 {
        match self {
            ConvexBody::GeodesicLine { radius, .. } | ConvexBody::SegmentNbhd { radius, .. } => {
                let foot = self.core_foot_of_point(p);
                (dist(p, &foot) - radius).max(0.0)
            }
            ConvexBody::Ball { center, radius } => (dist(p, center) - radius).max(0.0),
            ConvexBody::Horoball { center, through } => {
                let z = horoball_frame(center, through).chart_point(p);
                (-z.y.ln()).max(0.0)
            }
        }
    }

    pub fn contains(&self, p: &Point, tol: f64) -> bool {
        self.distance_to(p) <= tol
    }

    /// Closest point of the body to an interior point.
    pub fn closest_point(&self, p: &Point) -> Point {
        match self {
            ConvexBody::Horoball { center, through } => {
                let f = horoball_frame(center, through);
                let z = f.chart_point(p);
                if z.y >= 1.0 {
                    *p
                } else {
                    f.frame().apply(&Point { x: z.x, y: 1.0 })
                }
            }
            ConvexBody::Ball { center, radius } => push_toward_point(center, p, *radius),
            ConvexBody::GeodesicLine { radius, .. } | ConvexBody::SegmentNbhd { radius, .. } => {
                let foot = self.core_foot_of_point(p);
                push_toward_point(&foot, p, *radius)
            }
        }
    }

    /// Closest-point projection `P_C(ξ)` of a boundary point: the point of
    /// the body minimising `x ↦ β_ξ(x, x₀)`.
    pub fn closest_point_to_boundary(&self, xi: &BoundaryPoint) -> Result<Point> {
        Ok(self.normal_lift(xi)?.base())
    }

    /// The outer unit normal at `P_C(ξ)` pointing at `ξ`.
    pub fn normal_lift(&self, xi: &BoundaryPoint) -> Result<UnitTangent> {
        if self.touches_at_infinity(xi) {
            return Err(Error::Domain(
                "boundary point lies in the ideal boundary of the body".into(),
            ));
        }
        Ok(match self {
            ConvexBody::Ball { center, radius } => {
                UnitTangent::toward_boundary(*center, xi).flow(*radius)
            }
            ConvexBody::Horoball { center, through } => {
                let f = horoball_frame(center, through);
                let (u, v) = xi.act(&f.frame().inverse()).homogeneous();
                let foot = Point { x: u / v, y: 1.0 };
                UnitTangent::toward_boundary(f.frame().apply(&foot), xi)
            }
            ConvexBody::GeodesicLine { radius, .. } | ConvexBody::SegmentNbhd { radius, .. } => {
                let foot = self.core_foot_of_boundary(xi);
                let base = foot.frame.point_at(foot.s);
                UnitTangent::toward_boundary(base, xi).flow(*radius)
            }
        })
    }

    /// The stable fibration `f_C(v) = normal_lift(C, v₊)`.
    pub fn stable_fibration(&self, v: &UnitTangent) -> Result<UnitTangent> {
        self.normal_lift(&v.forward())
    }

    fn core_frame(&self) -> (UnitTangent, Option<f64>) {
        match self {
            ConvexBody::GeodesicLine { from, to, .. } => (
                UnitTangent::on_geodesic(from, to).expect("endpoints checked at construction"),
                None,
            ),
            ConvexBody::SegmentNbhd { start, end, .. } => match UnitTangent::toward_point(*start, end) {
                Ok(f) => (f, Some(dist(start, end))),
                Err(_) => (UnitTangent::new(*start, 0.0), Some(0.0)),
            },
            _ => unreachable!("core frames exist only for lines and segments"),
        }
    }

    fn core_foot_of_boundary(&self, xi: &BoundaryPoint) -> CoreFoot {
        let (frame, len) = self.core_frame();
        let (u, v) = xi.act(&frame.frame().inverse()).homogeneous();
        let s = (u.abs() / v.abs()).ln();
        CoreFoot {
            frame,
            s: clamp_param(s, len),
        }
    }

    fn core_foot_of_point(&self, p: &Point) -> Point {
        let (frame, len) = self.core_frame();
        let z = frame.chart_point(p);
        let s = clamp_param(z.x.hypot(z.y).ln(), len);
        frame.point_at(s)
    }
}

impl Action for ConvexBody {
    fn act(&self, g: &Isometry) -> Self {
        match *self {
            ConvexBody::GeodesicLine { from, to, radius } => ConvexBody::GeodesicLine {
                from: g.apply(&from),
                to: g.apply(&to),
                radius,
            },
            ConvexBody::SegmentNbhd { start, end, radius } => ConvexBody::SegmentNbhd {
                start: g.apply(&start),
                end: g.apply(&end),
                radius,
            },
            ConvexBody::Horoball { center, through } => ConvexBody::Horoball {
                center: g.apply(&center),
                through: g.apply(&through),
            },
            ConvexBody::Ball { center, radius } => ConvexBody::Ball {
                center: g.apply(&center),
                radius,
            },
        }
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r >= 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Degenerate(format!("radius {r} must be finite and non-negative")))
    }
}

fn clamp_param(s: f64, len: Option<f64>) -> f64 {
    match len {
        Some(l) => s.clamp(0.0, l),
        None => s,
    }
}

/// Frame at `through` pointing at the horoball centre; in its chart the
/// horoball is `{Im z ≥ 1}`.
fn horoball_frame(center: &BoundaryPoint, through: &Point) -> UnitTangent {
    UnitTangent::toward_boundary(*through, center)
}

/// The point at distance `r` from `from` toward `target`, or `target` itself
/// if it is already within `r`.
fn push_toward_point(from: &Point, target: &Point, r: f64) -> Point {
    let d = dist(from, target);
    if d <= r {
        return *target;
    }
    match UnitTangent::toward_point(*from, target) {
        Ok(v) => v.point_at(r),
        Err(_) => *target,
    }
}
