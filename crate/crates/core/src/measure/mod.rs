//! Atomic approximations of Patterson densities and of the Bowen–Margulis,
//! skinning and strong-stable conditional measures built from them.

mod bowen_margulis;
mod patterson;
mod skinning;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::BoundaryPoint;

pub use bowen_margulis::{bm_density, bm_sample, BmSample};
pub use patterson::{default_s_offset, patterson_approx, PattersonDensity, DEFAULT_HORIZON_GAP};
pub use skinning::{
    flow_scaling_check, rn_between_skinnings, skinning_measure, ss_ball_mass, ss_conditional, ss_mass_by_class, ss_mass_where,
    FlowScaling,
    SkinningMeasure, SsConditional,
};

/// Angular bins used by [`binned_tv`] unless stated otherwise.
pub const TV_BINS: usize = 256;

/// A finite weighted sum of Dirac masses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure<A> {
    atoms: Vec<A>,
    weights: Vec<f64>,
    total: f64,
}

impl<A> AtomicMeasure<A> {
    pub fn new(atoms: Vec<A>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::Degenerate(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::Degenerate(format!("invalid atom weight {w}")));
        }
        let total = weights.iter().sum();
        Ok(AtomicMeasure { atoms, weights, total })
    }

    pub fn empty() -> Self {
        AtomicMeasure {
            atoms: Vec::new(),
            weights: Vec::new(),
            total: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn atoms(&self) -> &[A] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&A, f64)> {
        self.atoms.iter().zip(self.weights.iter().copied())
    }

    /// Weights divided by the total mass; `None` for the zero measure.
    pub fn normalized_weights(&self) -> Option<Vec<f64>> {
        (self.total > 0.0).then(|| self.weights.iter().map(|w| w / self.total).collect())
    }

    pub fn scaled(&self, factor: f64) -> Self
    where
        A: Clone,
    {
        AtomicMeasure {
            atoms: self.atoms.clone(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
            total: self.total * factor,
        }
    }

    pub fn map_atoms<B>(&self, f: impl Fn(&A) -> B) -> AtomicMeasure<B> {
        AtomicMeasure {
            atoms: self.atoms.iter().map(f).collect(),
            weights: self.weights.clone(),
            total: self.total,
        }
    }

    /// Sub-measure on the atoms with the given indices.
    pub fn select(&self, idx: &[usize]) -> Self
    where
        A: Clone,
    {
        let atoms = idx.iter().map(|&i| self.atoms[i].clone()).collect();
        let weights: Vec<f64> = idx.iter().map(|&i| self.weights[i]).collect();
        let total = weights.iter().sum();
        AtomicMeasure { atoms, weights, total }
    }

    /// `∫ f dμ`.
    pub fn integrate(&self, f: impl Fn(&A) -> f64) -> f64 {
        self.iter().map(|(a, w)| w * f(a)).sum()
    }
}

/// Normalized angular histogram of a boundary measure.
pub fn angular_histogram(m: &AtomicMeasure<BoundaryPoint>, bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    if m.total() <= 0.0 {
        return h;
    }
    for (p, w) in m.iter() {
        let k = ((p.theta() / TAU) * bins as f64) as usize;
        h[k.min(bins - 1)] += w / m.total();
    }
    h
}

/// Total-variation distance between the normalized angular histograms.
pub fn binned_tv(a: &AtomicMeasure<BoundaryPoint>, b: &AtomicMeasure<BoundaryPoint>, bins: usize) -> f64 {
    let ha = angular_histogram(a, bins);
    let hb = angular_histogram(b, bins);
    0.5 * ha.iter().zip(&hb).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
