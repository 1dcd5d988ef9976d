use serde::{Deserialize, Serialize};

use super::{binned_tv, AtomicMeasure, TV_BINS};
use crate::error::{Error, Result};
use crate::group::{CriticalExponent, OrbitTable};
use crate::hyperbolic::{busemann, Action, BoundaryPoint, Isometry, Point, UnitTangent, BOUNDARY_EQ_TOL};

/// Default horizon is the orbit radius minus this gap.
pub const DEFAULT_HORIZON_GAP: f64 = 4.0;

/// Default exponent offset: `s = δ̂ + max(0.1, 2·stderr)`.
pub fn default_s_offset(ce: &CriticalExponent) -> f64 {
    (2.0 * ce.stderr).max(0.1)
}

/// Atomic approximation of the Patterson density at its basepoint.
///
/// Atoms are the radial projections, seen from the basepoint, of the orbit
/// points `γx₀` beyond the horizon, with weights `e^{−s d(x₀, γx₀)}`
/// normalized to total mass one.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PattersonDensity {
    pub measure: AtomicMeasure<BoundaryPoint>,
    pub delta: f64,
    pub s_used: f64,
    pub orbit_radius: f64,
    pub horizon: f64,
    pub basepoint: Point,
    /// `d(x₀, γx₀)` of the orbit point behind each atom.
    pub source_displacement: Vec<f64>,
    /// Atom indices sorted by angle.
    order: Vec<u32>,
    /// Atom angles in sorted order.
    sorted_theta: Vec<f64>,
    /// Homogeneous coordinates of each atom.
    homog: Vec<(f64, f64)>,
}

pub fn patterson_approx(t: &OrbitTable, delta: f64, s: f64, horizon: f64) -> Result<PattersonDensity> {
    if !(s >= delta) {
        return Err(Error::Degenerate(format!("exponent s = {s} is below δ = {delta}")));
    }
    if !(horizon < t.radius) {
        return Err(Error::Degenerate(format!(
            "horizon {horizon} must be below the orbit radius {}",
            t.radius
        )));
    }
    let x0 = t.basepoint;
    let mut atoms = Vec::new();
    let mut disp = Vec::new();
    for e in t.entries.iter().filter(|e| e.d >= horizon) {
        let gx = e.g.apply(&x0);
        let v = UnitTangent::toward_point(x0, &gx)?;
        atoms.push(v.forward());
        disp.push(e.d);
    }
    if atoms.is_empty() {
        return Err(Error::EmptyMeasure(format!(
            "no orbit points between horizon {horizon} and radius {}",
            t.radius
        )));
    }
    // Shift exponents by the horizon so the weights do not underflow.
    let raw: Vec<f64> = disp.iter().map(|d| (-s * (d - horizon)).exp()).collect();
    let z: f64 = raw.iter().sum();
    let weights = raw.into_iter().map(|w| w / z).collect();
    Ok(PattersonDensity::assemble(
        AtomicMeasure::new(atoms, weights)?,
        delta,
        s,
        t.radius,
        horizon,
        x0,
        disp,
    ))
}

impl PattersonDensity {
    /// Rebuilds a density from stored parts (used when importing a measure).
    pub fn from_parts(
        measure: AtomicMeasure<BoundaryPoint>,
        delta: f64,
        s_used: f64,
        orbit_radius: f64,
        horizon: f64,
        basepoint: Point,
        source_displacement: Vec<f64>,
    ) -> Result<Self> {
        if source_displacement.len() != measure.len() {
            return Err(Error::Degenerate(format!(
                "{} displacements for {} atoms",
                source_displacement.len(),
                measure.len()
            )));
        }
        Ok(Self::assemble(
            measure,
            delta,
            s_used,
            orbit_radius,
            horizon,
            basepoint,
            source_displacement,
        ))
    }

    fn assemble(
        measure: AtomicMeasure<BoundaryPoint>,
        delta: f64,
        s_used: f64,
        orbit_radius: f64,
        horizon: f64,
        basepoint: Point,
        source_displacement: Vec<f64>,
    ) -> Self {
        let mut order: Vec<u32> = (0..measure.len() as u32).collect();
        let atoms = measure.atoms();
        order.sort_by(|&a, &b| atoms[a as usize].theta().total_cmp(&atoms[b as usize].theta()));
        let sorted_theta = order.iter().map(|&k| atoms[k as usize].theta()).collect();
        let homog = atoms.iter().map(BoundaryPoint::homogeneous).collect();
        PattersonDensity {
            measure,
            delta,
            s_used,
            orbit_radius,
            horizon,
            basepoint,
            source_displacement,
            order,
            sorted_theta,
            homog,
        }
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn atoms(&self) -> &[BoundaryPoint] {
        self.measure.atoms()
    }

    pub(crate) fn homogeneous(&self, k: usize) -> (f64, f64) {
        self.homog[k]
    }

    pub fn weights(&self) -> &[f64] {
        self.measure.weights()
    }

    /// The density at `x`: weights multiplied by `e^{−δ β_ξ(x, x₀)}`.
    pub fn at(&self, x: &Point) -> AtomicMeasure<BoundaryPoint> {
        let w = self
            .measure
            .iter()
            .map(|(xi, w)| w * (-self.delta * busemann(xi, x, &self.basepoint)).exp())
            .collect();
        AtomicMeasure::new(self.atoms().to_vec(), w).expect("reweighting keeps weights valid")
    }

    /// Same family, with the stored measure taken at `y`.
    pub fn rebase(&self, y: &Point) -> PattersonDensity {
        PattersonDensity {
            measure: self.at(y),
            basepoint: *y,
            ..self.clone()
        }
    }

    /// Image under `γ`: atoms `γξ`, basepoint `γx₀`, weights unchanged.
    pub fn push_forward(&self, g: &Isometry) -> PattersonDensity {
        Self::assemble(
            self.measure.map_atoms(|xi| xi.act(g)),
            self.delta,
            self.s_used,
            self.orbit_radius,
            self.horizon,
            g.apply(&self.basepoint),
            self.source_displacement.clone(),
        )
    }

    /// Binned total-variation residual of `γ_*μ̂_{x₀} = μ̂_{γx₀}` for each
    /// generator: the pushed measure, reweighted back to `x₀` by
    /// `e^{−δ β(x₀, γx₀)}`, against `μ̂_{x₀}`.
    pub fn equivariance_residuals(&self, generators: &[Isometry]) -> Vec<f64> {
        generators
            .iter()
            .map(|g| {
                let gx0 = g.apply(&self.basepoint);
                let pushed = self.measure.map_atoms(|xi| xi.act(g));
                let w = pushed
                    .iter()
                    .map(|(xi, w)| w * (-self.delta * busemann(xi, &self.basepoint, &gx0)).exp())
                    .collect();
                let back = AtomicMeasure::new(pushed.atoms().to_vec(), w).expect("valid weights");
                binned_tv(&back, &self.measure, TV_BINS)
            })
            .collect()
    }

    /// Indices of atoms in the closed counter-clockwise arc from `from` to
    /// `to` (angles), in angular order.
    pub fn indices_in_arc(&self, from: f64, to: f64) -> Vec<usize> {
        let th = &self.sorted_theta;
        let lo = th.partition_point(|t| *t < from - BOUNDARY_EQ_TOL);
        let hi = th.partition_point(|t| *t <= to + BOUNDARY_EQ_TOL);
        let pick = |r: std::ops::Range<usize>| r.map(|k| self.order[k] as usize);
        if from <= to {
            pick(lo..hi).collect()
        } else {
            pick(lo..th.len()).chain(pick(0..hi)).collect()
        }
    }

    /// Atom indices grouped by coincident angle (within the boundary
    /// tolerance), in angular order.
    pub fn coincidence_groups(&self) -> Vec<Vec<usize>> {
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut prev = f64::NEG_INFINITY;
        for (k, &t) in self.sorted_theta.iter().enumerate() {
            let idx = self.order[k] as usize;
            if t - prev <= BOUNDARY_EQ_TOL {
                groups.last_mut().expect("a previous group exists").push(idx);
            } else {
                groups.push(vec![idx]);
            }
            prev = t;
        }
        // The circle wraps: merge the last group into the first if they touch.
        if groups.len() > 1 {
            let first = self.sorted_theta[0];
            let last = *self.sorted_theta.last().expect("non-empty");
            if first + std::f64::consts::TAU - last <= BOUNDARY_EQ_TOL {
                let tail = groups.pop().expect("len > 1");
                groups[0].extend(tail);
            }
        }
        groups
    }
}
