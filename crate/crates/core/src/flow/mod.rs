//! Quotient dynamics: Dirichlet domains, folding into `Γ\T¹H²`, transport of
//! atomic measures by the geodesic flow, and the test functions `φ_η`.

mod test_function;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::group::OrbitTable;
use crate::hyperbolic::{dist, Action, Isometry, Point, UnitTangent};
use crate::measure::AtomicMeasure;

pub use test_function::{phi_eta_eval, phi_integral_check, PhiIntegral, TestFunction};

/// Fold cap is the orbit radius minus this margin.
pub const FOLD_CAP_MARGIN: f64 = 2.0;
const MAX_FOLD_STEPS: usize = 1000;
const WALL_MARGIN: f64 = 1e-9;

#[derive(Clone, Debug)]
struct Wall {
    g: Isometry,
    g_inv: Isometry,
    image: Point,
}

/// Dirichlet domain `{z : d(z, x₀) ≤ d(z, γx₀)}` cut out by the orbit points
/// within the wall radius.
#[derive(Clone, Debug)]
pub struct DirichletDomain {
    pub center: Point,
    pub wall_radius: f64,
    pub fold_cap: f64,
    orbit_radius: f64,
    walls: Vec<Wall>,
}

/// Result of folding a vector into the domain.
#[derive(Clone, Copy, Debug)]
pub struct Folded {
    pub vector: UnitTangent,
    /// `vector = gamma · v`.
    pub gamma: Isometry,
    pub steps: usize,
    /// Set when the folded basepoint is within the wall margin of a wall.
    pub on_wall: bool,
}

impl DirichletDomain {
    pub fn build(t: &OrbitTable, wall_radius: f64) -> Result<Self> {
        if wall_radius > t.radius {
            return Err(Error::Degenerate(format!(
                "wall radius {wall_radius} exceeds the orbit radius {}",
                t.radius
            )));
        }
        let walls: Vec<Wall> = t
            .entries
            .iter()
            .filter(|e| e.d > 0.0 && e.d <= wall_radius)
            .map(|e| Wall {
                g: e.g,
                g_inv: e.g.inverse(),
                image: e.g.apply(&t.basepoint),
            })
            .collect();
        if walls.is_empty() {
            return Err(Error::Insufficient(format!("no orbit points within wall radius {wall_radius}")));
        }
        Ok(DirichletDomain {
            center: t.basepoint,
            wall_radius,
            fold_cap: t.radius - FOLD_CAP_MARGIN,
            orbit_radius: t.radius,
            walls,
        })
    }

    pub fn wall_count(&self) -> usize {
        self.walls.len()
    }

    /// Orbit points `γx₀` defining the walls.
    pub fn wall_points(&self) -> Vec<Point> {
        self.walls.iter().map(|w| w.image).collect()
    }

    /// Signed distance from `p` to the nearest wall (positive inside).
    pub fn wall_clearance(&self, p: &Point) -> f64 {
        let d0 = dist(p, &self.center);
        self.walls
            .iter()
            .map(|w| 0.5 * (dist(p, &w.image) - d0))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.wall_clearance(p) >= -WALL_MARGIN
    }

    /// Greedy folding: repeatedly apply `γ⁻¹` for the wall `γ` with the
    /// largest violation `d(p, x₀) − d(p, γx₀)` (lowest index on ties).
    /// Each step strictly decreases `d(x₀, p)`.
    pub fn fold(&self, v: &UnitTangent) -> Result<Folded> {
        let d = dist(&self.center, &v.base());
        if d > self.fold_cap {
            return Err(self.cap_error(d, 1));
        }
        let mut cur = *v;
        let mut gamma = Isometry::identity();
        for steps in 0..MAX_FOLD_STEPS {
            let p = cur.base();
            let d0 = dist(&p, &self.center);
            let mut best: Option<(usize, f64)> = None;
            let mut min_gap = f64::INFINITY;
            for (k, w) in self.walls.iter().enumerate() {
                let gap = dist(&p, &w.image) - d0;
                min_gap = min_gap.min(gap);
                if gap < -WALL_MARGIN && best.is_none_or(|(_, b)| gap < b) {
                    best = Some((k, gap));
                }
            }
            match best {
                None => {
                    return Ok(Folded {
                        vector: cur,
                        gamma,
                        steps,
                        on_wall: min_gap.abs() <= WALL_MARGIN,
                    })
                }
                Some((k, _)) => {
                    let w = &self.walls[k];
                    cur = cur.act(&w.g_inv);
                    gamma = w.g_inv * gamma;
                }
            }
        }
        Err(Error::Degenerate(format!("folding did not terminate within {MAX_FOLD_STEPS} steps")))
    }

    fn cap_error(&self, d: f64, lost: usize) -> Error {
        Error::FoldCap {
            dist: d,
            cap: self.fold_cap,
            required: d + FOLD_CAP_MARGIN,
            lost,
        }
    }

    /// Orbit radius the domain was built from.
    pub fn orbit_radius(&self) -> f64 {
        self.orbit_radius
    }

    /// Wall elements (used by tests and diagnostics).
    pub fn wall_elements(&self) -> Vec<Isometry> {
        self.walls.iter().map(|w| w.g).collect()
    }
}

/// Flow every atom for time `t` and fold it into the domain. With
/// `mass_scaling = Some(δ)` weights are multiplied by `e^{δt}`.
pub fn transport_measure(
    sigma: &AtomicMeasure<UnitTangent>,
    t: f64,
    domain: &DirichletDomain,
    mass_scaling: Option<f64>,
) -> Result<AtomicMeasure<UnitTangent>> {
    if !(t >= 0.0) {
        return Err(Error::Degenerate(format!("transport time {t} must be non-negative")));
    }
    let folded: Vec<std::result::Result<UnitTangent, f64>> = sigma
        .atoms()
        .par_iter()
        .map(|v| {
            let moved = v.flow(t);
            domain
                .fold(&moved)
                .map(|f| f.vector)
                .map_err(|_| dist(&domain.center, &moved.base()))
        })
        .collect();
    let lost: Vec<f64> = folded.iter().filter_map(|r| r.as_ref().err().copied()).collect();
    if !lost.is_empty() {
        let worst = lost.iter().copied().fold(0.0, f64::max);
        return Err(domain.cap_error(worst, lost.len()));
    }
    let factor = mass_scaling.map_or(1.0, |delta| (delta * t).exp());
    let atoms = folded.into_iter().map(|r| r.expect("errors handled above")).collect();
    let weights = sigma.weights().iter().map(|w| w * factor).collect();
    AtomicMeasure::new(atoms, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{enumerate_orbit, GroupSpec};

    fn domain() -> (GroupSpec, OrbitTable, DirichletDomain) {
        let g = GroupSpec::symmetric_schottky(2.5).unwrap();
        let t = enumerate_orbit(&g, &Point::i(), 14.0).unwrap();
        let d = DirichletDomain::build(&t, 6.0).unwrap();
        (g, t, d)
    }

    #[test]
    fn interior_vector_is_untouched() {
        let (_, _, d) = domain();
        let v = UnitTangent::new(Point::new(0.1, 1.2).unwrap(), 0.4);
        let f = d.fold(&v).unwrap();
        assert_eq!(f.steps, 0);
        assert_eq!(f.gamma, Isometry::identity());
    }

    #[test]
    fn fold_matches_nearest_orbit_point() {
        let (_, t, d) = domain();
        let v = UnitTangent::new(Point::new(0.3, 0.8).unwrap(), 1.1).flow(10.0);
        let f = d.fold(&v).unwrap();
        let p = v.base();
        let nearest = t
            .entries
            .iter()
            .min_by(|a, b| dist(&p, &a.g.apply(&t.basepoint)).total_cmp(&dist(&p, &b.g.apply(&t.basepoint))))
            .unwrap();
        let expect = v.act(&nearest.g.inverse());
        assert!(f.vector.separation(&expect) < 1e-8);
        assert!(d.contains(&f.vector.base()));
    }

    #[test]
    fn fold_is_orbit_invariant() {
        let (g, _, d) = domain();
        let v = UnitTangent::new(Point::new(-0.2, 2.0).unwrap(), 5.0).flow(4.0);
        let f = d.fold(&v).unwrap();
        for k in 0..g.letter_count() {
            let moved = v.act(&g.letter(k));
            assert!(d.fold(&moved).unwrap().vector.separation(&f.vector) < 1e-8);
        }
        let back = f.vector.act(&f.gamma.inverse());
        assert!(d.fold(&back).unwrap().vector.separation(&f.vector) < 1e-8);
    }

    #[test]
    fn cap_is_enforced() {
        let (_, _, d) = domain();
        let v = UnitTangent::reference().flow(13.0);
        assert!(matches!(d.fold(&v), Err(Error::FoldCap { .. })));
    }
}
