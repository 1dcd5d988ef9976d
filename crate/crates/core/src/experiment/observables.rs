use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::DirichletDomain;
use crate::hyperbolic::{dist, t1_dist, Point, UnitTangent};
use crate::io::ObservableConfig;

/// Candidates considered by the farthest-point selection.
const MAX_CANDIDATES: usize = 20_000;

/// `exp(1 − 1/(1 − u²))` on `|u| < 1`: smooth, peak value 1 at `u = 0`.
fn bump(u: f64) -> f64 {
    let q = 1.0 - u * u;
    if q > 0.0 {
        (1.0 - 1.0 / q).exp()
    } else {
        0.0
    }
}

fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Tensor bump in (basepoint, direction angle).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Point,
    pub dir: f64,
    pub radius: f64,
    pub angle_width: f64,
}

impl Bump {
    pub fn eval(&self, v: &UnitTangent) -> f64 {
        let b = v.base();
        let r = dist(&b, &self.center) / self.radius;
        if r >= 1.0 {
            return 0.0;
        }
        bump(r) * bump(angle_diff(v.dir(), self.dir) / self.angle_width)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableFamily {
    pub bumps: Vec<Bump>,
    pub alpha: f64,
    /// Sampled estimate of `‖ψ‖_∞ + sup |ψ(v) − ψ(w)| / d(v, w)^α`, with
    /// `d` the distance on `T¹H²`. A lower bound for the true norm.
    pub holder_norms: Vec<f64>,
}

impl ObservableFamily {
    pub fn len(&self) -> usize {
        self.bumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bumps.is_empty()
    }

    /// `ψ_j(v)` for every observable.
    pub fn eval(&self, v: &UnitTangent) -> Vec<f64> {
        self.bumps.iter().map(|b| b.eval(v)).collect()
    }
}

fn separation(a: &UnitTangent, b: &UnitTangent) -> f64 {
    dist(&a.base(), &b.base()) + angle_diff(a.dir(), b.dir())
}

/// Picks bump centres by farthest-point selection among `samples`, keeping
/// only centres whose position bump stays `margin` inside the domain. The
/// first centre is the candidate deepest inside the domain.
pub fn select_observables(
    samples: &[UnitTangent],
    domain: &DirichletDomain,
    cfg: &ObservableConfig,
    seed: u64,
) -> Result<ObservableFamily> {
    let need = cfg.radius + cfg.margin;
    let mut cands: Vec<(UnitTangent, f64)> = Vec::new();
    for v in samples {
        let c = domain.wall_clearance(&v.base());
        if c >= need {
            cands.push((*v, c));
            if cands.len() == MAX_CANDIDATES {
                break;
            }
        }
    }
    if cands.len() < cfg.count {
        return Err(Error::Insufficient(format!(
            "{} candidate centres with wall clearance {need}, need {}",
            cands.len(),
            cfg.count
        )));
    }
    let first = cands
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.0.cmp(&a.0)))
        .map(|(k, _)| k)
        .expect("candidates exist");
    let mut chosen = vec![first];
    let mut gap: Vec<f64> = cands.iter().map(|(v, _)| separation(v, &cands[first].0)).collect();
    while chosen.len() < cfg.count {
        let next = gap
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(k, _)| k)
            .expect("candidates exist");
        chosen.push(next);
        for (k, (v, _)) in cands.iter().enumerate() {
            gap[k] = gap[k].min(separation(v, &cands[next].0));
        }
    }
    let bumps: Vec<Bump> = chosen
        .iter()
        .map(|&k| Bump {
            center: cands[k].0.base(),
            dir: cands[k].0.dir(),
            radius: cfg.radius,
            angle_width: cfg.angle_width.min(PI),
        })
        .collect();
    let holder_norms = bumps
        .iter()
        .map(|b| holder_estimate(b, cfg.holder_alpha, cfg.holder_pairs, seed))
        .collect();
    Ok(ObservableFamily {
        bumps,
        alpha: cfg.holder_alpha,
        holder_norms,
    })
}

/// Random pairs near the bump: a vector in the support and a small
/// perturbation of it in position, direction and flow time.
fn holder_estimate(b: &Bump, alpha: f64, pairs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..pairs {
        let r = b.radius * rng.gen::<f64>();
        let phi = TAU * rng.gen::<f64>();
        let base = UnitTangent::new(b.center, phi).point_at(r);
        let dir = b.dir + b.angle_width * (2.0 * rng.gen::<f64>() - 1.0);
        let v = UnitTangent::new(base, dir);
        let eps = 0.05 * rng.gen::<f64>() + 1e-3;
        let w = UnitTangent::new(v.flow(eps * (rng.gen::<f64>() - 0.5)).base(), dir + eps * (rng.gen::<f64>() - 0.5));
        let d = t1_dist(&v, &w);
        if d > 1e-9 {
            best = best.max((b.eval(&v) - b.eval(&w)).abs() / d.powf(alpha));
        }
    }
    1.0 + best
}
