use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AtomicMeasure, PattersonDensity};
use crate::error::{Error, Result};
use crate::hyperbolic::{busemann, BoundaryPoint, ConvexBody, Isometry, Point, UnitTangent};

/// Warn when atoms dropped on the ideal boundary of a body carry more than
/// this fraction of the mass.
const DROPPED_MASS_WARN: f64 = 0.01;

/// Skinning measure of a convex body, one atom per Patterson atom outside
/// the ideal boundary of the body.
#[derive(Clone, Debug)]
pub struct SkinningMeasure {
    pub body: ConvexBody,
    pub measure: AtomicMeasure<UnitTangent>,
    /// Patterson atom index behind each skinning atom.
    pub source: Vec<usize>,
    pub dropped: usize,
    pub dropped_mass: f64,
}

impl SkinningMeasure {
    pub fn total(&self) -> f64 {
        self.measure.total()
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }
}

/// Atoms `w = ν P_C(ξ)` with weights `μ̂(ξ) e^{−δ β_ξ(P_C(ξ), x₀)}`.
pub fn skinning_measure(c: &ConvexBody, p: &PattersonDensity) -> Result<SkinningMeasure> {
    let per_atom: Vec<Option<(UnitTangent, f64)>> = p
        .atoms()
        .par_iter()
        .zip(p.weights().par_iter())
        .map(|(xi, w)| {
            let lift = c.normal_lift(xi).ok()?;
            let b = busemann(xi, &lift.base(), &p.basepoint);
            Some((lift, w * (-p.delta * b).exp()))
        })
        .collect();
    let mut atoms = Vec::with_capacity(per_atom.len());
    let mut weights = Vec::with_capacity(per_atom.len());
    let mut source = Vec::with_capacity(per_atom.len());
    let mut dropped = 0;
    let mut dropped_mass = 0.0;
    for (k, item) in per_atom.into_iter().enumerate() {
        match item {
            Some((v, w)) => {
                atoms.push(v);
                weights.push(w);
                source.push(k);
            }
            None => {
                dropped += 1;
                dropped_mass += p.weights()[k];
            }
        }
    }
    if dropped > 0 {
        log::info!("skinning: dropped {dropped} atoms on the ideal boundary of the body");
        if dropped_mass > DROPPED_MASS_WARN * p.measure.total() {
            log::warn!(
                "skinning: dropped atoms carry {:.2}% of the Patterson mass",
                100.0 * dropped_mass / p.measure.total()
            );
        }
    }
    if atoms.is_empty() {
        return Err(Error::EmptyMeasure(
            "every Patterson atom lies on the ideal boundary of the body".into(),
        ));
    }
    Ok(SkinningMeasure {
        body: *c,
        measure: AtomicMeasure::new(atoms, weights)?,
        source,
        dropped,
        dropped_mass,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowScaling {
    /// Largest relative weight error between `g^s_* σ̃_C` and `e^{−δs} σ̃_{N_s C}`.
    pub max_rel_err: f64,
    /// Largest separation between corresponding atoms.
    pub max_atom_separation: f64,
    /// `|‖σ̃_{N_s C}‖ / ‖σ̃_C‖ − e^{δs}|`, relative.
    pub mass_ratio_err: f64,
}

/// Compares `(g^s)_* σ̃_C` with `e^{−δs} σ̃_{N_s C}` atom by atom.
pub fn flow_scaling_check(c: &ConvexBody, p: &PattersonDensity, s: f64) -> Result<FlowScaling> {
    if !(s >= 0.0) {
        return Err(Error::Degenerate(format!("flow time {s} must be non-negative")));
    }
    let a = skinning_measure(c, p)?;
    let b = skinning_measure(&c.neighbourhood(s)?, p)?;
    if a.source != b.source {
        return Err(Error::Degenerate("bodies see different boundary atoms".into()));
    }
    let f = (-p.delta * s).exp();
    let mut max_rel_err: f64 = 0.0;
    let mut max_sep: f64 = 0.0;
    for k in 0..a.len() {
        let lhs = a.measure.weights()[k];
        let rhs = f * b.measure.weights()[k];
        max_rel_err = max_rel_err.max((lhs - rhs).abs() / lhs.abs().max(f64::MIN_POSITIVE));
        let moved = a.measure.atoms()[k].flow(s);
        max_sep = max_sep.max(moved.separation(&b.measure.atoms()[k]));
    }
    let mass_ratio_err = ((b.total() / a.total()) / (p.delta * s).exp() - 1.0).abs();
    Ok(FlowScaling {
        max_rel_err,
        max_atom_separation: max_sep,
        mass_ratio_err,
    })
}

/// Maximal relative error of `d h_* σ̃_C / d σ̃_{C′}(w′) = e^{−δ β_{w₊}(π(w), π(w′))}`
/// over the boundary atoms seen by both bodies, where `h` matches normals
/// with the same forward endpoint.
pub fn rn_between_skinnings(c: &ConvexBody, c2: &ConvexBody, p: &PattersonDensity) -> Result<f64> {
    let a = skinning_measure(c, p)?;
    let b = skinning_measure(c2, p)?;
    let mut j = 0;
    let mut shared = 0usize;
    let mut worst: f64 = 0.0;
    for (i, &src) in a.source.iter().enumerate() {
        while j < b.source.len() && b.source[j] < src {
            j += 1;
        }
        if j == b.source.len() || b.source[j] != src {
            continue;
        }
        shared += 1;
        let w = &a.measure.atoms()[i];
        let w2 = &b.measure.atoms()[j];
        let xi = p.atoms()[src];
        let predicted = (-p.delta * busemann(&xi, &w.base(), &w2.base())).exp();
        let ratio = a.measure.weights()[i] / b.measure.weights()[j];
        worst = worst.max((ratio / predicted - 1.0).abs());
    }
    if shared == 0 {
        return Err(Error::EmptyMeasure("the two bodies share no boundary atoms".into()));
    }
    Ok(worst)
}

/// The strong stable conditional `μ̂^{ss}_w`: one atom per Patterson atom
/// `ξ ≠ w₊`, the vector of `W^{ss}(w)` with backward endpoint `ξ`.
#[derive(Clone, Debug)]
pub struct SsConditional {
    pub measure: AtomicMeasure<UnitTangent>,
    pub source: Vec<usize>,
}

/// Chart of `w`: `w` is the upward vector at `i`, `w₊ = ∞`, the leaf is the
/// set of upward vectors on `Im z = 1`. Returns `(x, factor)` for an atom,
/// where `x` is the chart abscissa of `ξ` and `factor = (|y₀ − x|²/Im y₀)^δ`
/// with `y₀` the basepoint in the chart.
fn leaf_coordinates(inv: &Isometry, y0: &Point, delta: f64, (u0, v0): (f64, f64)) -> Option<(f64, f64)> {
    let (u, v) = inv.apply_homogeneous(u0, v0);
    if v.abs() <= 1e-15 * u.abs() {
        return None;
    }
    let x = u / v;
    let q = ((y0.x - x).powi(2) + y0.y * y0.y) / y0.y;
    Some((x, q.powf(delta)))
}

/// `μ̂^{ss}_w` computed directly in the chart of `w` (weights
/// `μ̂(ξ) e^{−δ β_ξ(P_{HB₊(w)}(ξ), x₀)}`).
pub fn ss_conditional(w: &UnitTangent, p: &PattersonDensity) -> SsConditional {
    let inv = w.frame().inverse();
    let y0 = inv.apply(&p.basepoint);
    let mut atoms = Vec::with_capacity(p.len());
    let mut weights = Vec::with_capacity(p.len());
    let mut source = Vec::with_capacity(p.len());
    let plus = w.forward();
    for (k, (xi, mw)) in p.measure.iter().enumerate() {
        if xi.approx_eq(&plus) {
            continue;
        }
        if let Some((x, f)) = leaf_coordinates(&inv, &y0, p.delta, p.homogeneous(k)) {
            atoms.push(UnitTangent::from_frame(w.frame().compose(&Isometry::translation(x))));
            weights.push(mw * f);
            source.push(k);
        }
    }
    SsConditional {
        measure: AtomicMeasure::new(atoms, weights).expect("weights are non-negative"),
        source,
    }
}

/// `μ̂^{ss}_w` mass of the leaf vectors whose backward endpoint is a
/// Patterson atom selected by `keep` (by atom index).
pub fn ss_mass_where(w: &UnitTangent, p: &PattersonDensity, keep: impl Fn(usize) -> bool) -> f64 {
    let inv = w.frame().inverse();
    let y0 = inv.apply(&p.basepoint);
    let plus = w.forward();
    (0..p.len())
        .filter(|&k| keep(k) && !p.atoms()[k].approx_eq(&plus))
        .filter_map(|k| leaf_coordinates(&inv, &y0, p.delta, p.homogeneous(k)).map(|(_, f)| p.weights()[k] * f))
        .sum()
}

/// `μ̂^{ss}_w` mass split by a class label per Patterson atom; atoms with
/// label `None` are ignored. One pass over the atoms for every class.
pub fn ss_mass_by_class(w: &UnitTangent, p: &PattersonDensity, class: &[Option<usize>], classes: usize) -> Vec<f64> {
    let inv = w.frame().inverse();
    let y0 = inv.apply(&p.basepoint);
    let plus = w.forward();
    let mut out = vec![0.0; classes];
    for (k, c) in class.iter().enumerate() {
        let Some(c) = *c else { continue };
        if p.atoms()[k].approx_eq(&plus) {
            continue;
        }
        if let Some((_, f)) = leaf_coordinates(&inv, &y0, p.delta, p.homogeneous(k)) {
            out[c] += p.weights()[k] * f;
        }
    }
    out
}

/// `μ̂^{ss}_w(V_{w,R})`: conditional mass of the Hamenstädt ball of radius
/// `R` around `w`. Only the atoms in the boundary arc `w-chart(−R, R)` are
/// visited.
pub fn ss_ball_mass(w: &UnitTangent, r: f64, p: &PattersonDensity) -> f64 {
    if !(r > 0.0) {
        return 0.0;
    }
    let inv = w.frame().inverse();
    let y0 = inv.apply(&p.basepoint);
    let plus = w.forward();
    let candidates = if r.is_finite() {
        let from = w.frame().apply(&BoundaryPoint::from_real(-r)).theta();
        let to = w.frame().apply(&BoundaryPoint::from_real(r)).theta();
        p.indices_in_arc(from, to)
    } else {
        (0..p.len()).collect()
    };
    candidates
        .into_iter()
        .filter_map(|k| {
            let xi = &p.atoms()[k];
            if xi.approx_eq(&plus) {
                return None;
            }
            let (x, f) = leaf_coordinates(&inv, &y0, p.delta, p.homogeneous(k))?;
            (x.abs() < r).then(|| p.weights()[k] * f)
        })
        .sum()
}
