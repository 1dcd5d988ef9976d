use super::isometry::{Action, Isometry};
use super::point::{BoundaryPoint, Point};

/// Hyperbolic distance, `2 asinh(|z − w| / (2 √(Im z Im w)))`.
pub fn dist(p: &Point, q: &Point) -> f64 {
    let chord = (p.x - q.x).hypot(p.y - q.y);
    2.0 * (chord / (2.0 * (p.y * q.y).sqrt())).asinh()
}

/// Busemann cocycle `β_ξ(x, y)`: how much closer `y` is to `ξ` than `x`.
///
/// With `ξ = [u : v]` this is `log(Im y |vx − u|² / (Im x |vy − u|²))`, which
/// has no singularity at `ξ = ∞`.
pub fn busemann(xi: &BoundaryPoint, x: &Point, y: &Point) -> f64 {
    let (u, v) = xi.homogeneous();
    let f = |z: &Point| {
        let re = v * z.x - u;
        let im = v * z.y;
        re * re + im * im
    };
    (y.y / x.y).ln() + f(x).ln() - f(y).ln()
}

/// Visual distance on the boundary seen from `x0`: half the chord length
/// once `x0` has been moved to the centre of the disc.
pub fn visual_dist(x0: &Point, xi: &BoundaryPoint, eta: &BoundaryPoint) -> f64 {
    let back = Isometry::standardize_at(x0).inverse();
    let a = xi.act(&back).theta();
    let b = eta.act(&back).theta();
    (0.5 * (a - b)).sin().abs()
}
