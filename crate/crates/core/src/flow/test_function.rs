use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::Arc;
use crate::hyperbolic::{dist, in_thickening, BoundaryPoint, ConvexBody, UnitTangent};
use crate::measure::{bm_sample, ss_ball_mass, PattersonDensity, SkinningMeasure};
use crate::stats::bootstrap_mean_stderr;

/// Skinning atoms closer than this in `w₊` angle reuse the cached ball mass.
const ATOM_MATCH_TOL: f64 = 1e-9;
const BOOTSTRAP_RESAMPLES: usize = 200;

/// The test function `φ_η = h_{η,R}∘f_C · χ_{V_{η,R}(Ω)}` attached to a
/// convex body and a piece `Ω` of its outer normal bundle.
#[derive(Clone, Debug)]
pub struct TestFunction {
    pub body: ConvexBody,
    /// `Ω`, as half-open arcs of forward endpoints `w₊`.
    pub omega: Vec<Arc>,
    pub eta: f64,
    pub r: f64,
    /// `‖σ̂_Ω‖`.
    pub omega_mass: f64,
    /// Largest `d(x₀, π(w))` over the atoms of `σ̂_Ω`.
    pub max_base_dist: f64,
    /// Forward-endpoint angles of the `Ω` atoms, sorted.
    theta: Vec<f64>,
    /// `h_{η,R}` of the atom with angle `theta[k]`.
    h: Vec<f64>,
    /// Skinning atom index of `theta[k]`.
    atom: Vec<usize>,
}

/// `[start, start + len)` membership.
fn in_half_open(a: &Arc, xi: &BoundaryPoint) -> bool {
    let off = (xi.theta() - a.start).rem_euclid(std::f64::consts::TAU);
    off < a.len
}

impl TestFunction {
    /// Caches `h_{η,R}(w) = 1/(2η μ̂^{ss}_w(V_{w,R}))` on every skinning atom
    /// with `w₊ ∈ Ω`; every such ball mass must be positive.
    pub fn new(
        skinning: &SkinningMeasure,
        omega: Vec<Arc>,
        eta: f64,
        r: f64,
        p: &PattersonDensity,
    ) -> Result<Self> {
        if !(eta > 0.0) || !(r > 0.0) {
            return Err(Error::Degenerate(format!("η = {eta} and R = {r} must be positive")));
        }
        let mut entries: Vec<(f64, f64, usize)> = Vec::new();
        let mut omega_mass = 0.0;
        let mut max_base_dist: f64 = 0.0;
        for (k, (w, wt)) in skinning.measure.iter().enumerate() {
            let plus = w.forward();
            if !omega.iter().any(|a| in_half_open(a, &plus)) {
                continue;
            }
            let m = ss_ball_mass(w, r, p);
            if !(m > 0.0) {
                return Err(Error::Domain(format!(
                    "strong stable ball of radius {r} has zero mass at skinning atom {k}; increase R"
                )));
            }
            entries.push((plus.theta(), 1.0 / (2.0 * eta * m), k));
            omega_mass += wt;
            max_base_dist = max_base_dist.max(dist(&p.basepoint, &w.base()));
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(TestFunction {
            body: skinning.body,
            omega,
            eta,
            r,
            omega_mass,
            max_base_dist,
            theta: entries.iter().map(|e| e.0).collect(),
            h: entries.iter().map(|e| e.1).collect(),
            atom: entries.iter().map(|e| e.2).collect(),
        })
    }

    pub fn atom_count(&self) -> usize {
        self.theta.len()
    }

    /// Skinning atom indices of `σ̂_Ω`.
    pub fn omega_atoms(&self) -> &[usize] {
        &self.atom
    }

    /// Cached `h_{η,R}` values, aligned with [`omega_atoms`](Self::omega_atoms).
    pub fn h_values(&self) -> &[f64] {
        &self.h
    }

    /// Hopf-time window containing the support of `φ_η`: basepoints of
    /// supported vectors lie within `max d(x₀, π(w)) + 2 asinh(R/2) + η` of
    /// `x₀`.
    pub fn support_window(&self) -> (f64, f64) {
        let t = self.max_base_dist + 2.0 * (0.5 * self.r).asinh() + self.eta + 0.1;
        (-t, t)
    }

    fn cached_h(&self, xi: &BoundaryPoint) -> Option<f64> {
        if self.theta.is_empty() {
            return None;
        }
        let t = xi.theta();
        let k = self.theta.partition_point(|x| *x < t);
        let cands = [k.checked_sub(1), (k < self.theta.len()).then_some(k), Some(0), Some(self.theta.len() - 1)];
        cands
            .into_iter()
            .flatten()
            .filter(|&j| BoundaryPoint::from_angle(self.theta[j]).angle_dist(xi) <= ATOM_MATCH_TOL)
            .map(|j| self.h[j])
            .next()
    }
}

/// `φ_η(v)`: `h_{η,R}(f_C(v))` when `f_C(v)₊ ∈ Ω` and `v ∈ V_{f_C(v),η,R}`,
/// else zero. Vectors whose endpoint matches no cached atom get their ball
/// mass computed on the spot.
pub fn phi_eta_eval(f: &TestFunction, p: &PattersonDensity, v: &UnitTangent) -> f64 {
    let plus = v.forward();
    if !f.omega.iter().any(|a| in_half_open(a, &plus)) {
        return 0.0;
    }
    let Ok(w) = f.body.stable_fibration(v) else {
        return 0.0;
    };
    if in_thickening(&w, f.eta, f.r, v).is_none() {
        return 0.0;
    }
    match f.cached_h(&plus) {
        Some(h) => h,
        None => {
            log::debug!("phi_eta: no cached atom at angle {}", plus.theta());
            let m = ss_ball_mass(&w, f.r, p);
            if m > 0.0 {
                1.0 / (2.0 * f.eta * m)
            } else {
                0.0
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiIntegral {
    /// Monte-Carlo estimate of `∫ φ_η dm̂_BM`.
    pub lhs: f64,
    /// `‖σ̂_Ω‖`.
    pub rhs: f64,
    /// Bootstrap standard error of `lhs`.
    pub mc_stderr: f64,
    pub n: usize,
    /// Samples where `φ_η ≠ 0`.
    pub hits: usize,
    pub window: (f64, f64),
}

impl PhiIntegral {
    /// `|lhs − rhs|` in units of the Monte-Carlo standard error.
    pub fn z_score(&self) -> f64 {
        if self.mc_stderr > 0.0 {
            (self.lhs - self.rhs).abs() / self.mc_stderr
        } else if self.lhs == self.rhs {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Monte-Carlo check of `∫ φ_η dm̂_BM = ‖σ̂_Ω‖`. The integral is taken over
/// all of `T¹H²` (the unfolded form of the identity): `Ω` must be a
/// fundamental piece for the stabiliser of the body.
pub fn phi_integral_check(f: &TestFunction, p: &PattersonDensity, n: usize, seed: u64) -> Result<PhiIntegral> {
    let window = f.support_window();
    if f.atom_count() == 0 {
        return Ok(PhiIntegral {
            lhs: 0.0,
            rhs: 0.0,
            mc_stderr: 0.0,
            n,
            hits: 0,
            window,
        });
    }
    let sample = bm_sample(p, n, window, seed)?;
    let mut terms = Vec::new();
    let mut lhs = 0.0;
    for (v, w) in sample.measure.iter() {
        let phi = phi_eta_eval(f, p, v);
        if phi != 0.0 {
            let term = w * phi;
            lhs += term;
            terms.push(term * n as f64);
        }
    }
    let mc_stderr = bootstrap_mean_stderr(&terms, n, BOOTSTRAP_RESAMPLES, seed ^ 0x5eed_b007);
    Ok(PhiIntegral {
        lhs,
        rhs: f.omega_mass,
        mc_stderr,
        n,
        hits: terms.len(),
        window,
    })
}
