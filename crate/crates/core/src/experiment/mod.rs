//! Orchestrated experiments. Each `run_*` takes a [`RunConfig`], optionally
//! writes artifacts under an output directory, and returns a deterministic
//! [`ExperimentReport`].

mod checks;
mod cusp;
mod equidistribution;
mod observables;
mod selftest;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use checks::{run_delta, run_disintegration_check, run_orbit, run_patterson, run_phi_integral, run_skinning};
pub use cusp::{check_finiteness_criterion, run_cusp_decay, shadow_bin};
pub use equidistribution::run_equidistribution;
pub use observables::{select_observables, Bump, ObservableFamily};
pub use selftest::selftest;

use crate::error::{Error, Result};
use crate::group::{critical_exponent, enumerate_orbit, Arc, CriticalExponent, GroupSpec, OrbitTable};
use crate::hyperbolic::{BoundaryPoint, ConvexBody, Point, UnitTangent};
use crate::io::RunConfig;
use crate::measure::{default_s_offset, patterson_approx, skinning_measure, AtomicMeasure, PattersonDensity, SkinningMeasure};
use crate::stats::linear_fit;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Inconclusive => "INCONCLUSIVE",
        })
    }
}

/// A single quantitative check: `measured <relation> threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub measured: f64,
    pub relation: String,
    pub threshold: f64,
    pub status: Status,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Verdict {
    /// `relation` is one of `<`, `<=`, `>`, `>=`.
    pub fn check(name: impl Into<String>, measured: f64, relation: &str, threshold: f64) -> Self {
        let ok = match relation {
            "<" => measured < threshold,
            "<=" => measured <= threshold,
            ">" => measured > threshold,
            ">=" => measured >= threshold,
            _ => panic!("unknown relation {relation}"),
        };
        Verdict {
            name: name.into(),
            measured,
            relation: relation.into(),
            threshold,
            status: if ok { Status::Pass } else { Status::Fail },
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn inconclusive(mut self) -> Self {
        self.status = Status::Inconclusive;
        self
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {:.6e} {} {:.6e}",
            self.status, self.name, self.measured, self.relation, self.threshold
        )?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

/// One time step of a series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    /// Discrepancy `E_t`.
    pub e: f64,
    pub stderr: f64,
    /// Total mass of the transported measure.
    pub mass: f64,
    /// Secondary binned total-variation diagnostic.
    pub tv: f64,
    /// Signed per-observable differences of averages.
    pub values: Vec<f64>,
}

/// Mass in one shadow bin `A_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinRecord {
    pub n: usize,
    pub atoms: usize,
    pub patterson_mass: f64,
    pub skinning_mass: f64,
}

/// One disintegration box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub stderr: f64,
    pub hits: usize,
    pub skipped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub name: String,
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    /// The configuration with every default filled in.
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub records: Vec<Record>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bins: Vec<BinRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boxes: Vec<BoxRecord>,
    #[serde(default)]
    pub fits: Vec<FitSummary>,
    #[serde(default)]
    pub quantities: BTreeMap<String, f64>,
    #[serde(default)]
    pub verdicts: Vec<Verdict>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, config: RunConfig) -> Self {
        ExperimentReport {
            experiment: experiment.into(),
            config,
            records: Vec::new(),
            bins: Vec::new(),
            boxes: Vec::new(),
            fits: Vec::new(),
            quantities: BTreeMap::new(),
            verdicts: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Records a named scalar; non-finite values go to the notes instead,
    /// since JSON has no NaN.
    pub fn quantity(&mut self, name: &str, value: f64) {
        if value.is_finite() {
            self.quantities.insert(name.into(), value);
        } else {
            self.notes.push(format!("{name} = {value}"));
        }
    }

    pub fn verdict(&mut self, v: Verdict) {
        log::info!("{v}");
        self.verdicts.push(v);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        let s = s.into();
        log::info!("{s}");
        self.notes.push(s);
    }

    /// Fails if any verdict fails; inconclusive verdicts do not fail a run.
    pub fn status(&self) -> Status {
        if self.verdicts.iter().any(|v| v.status == Status::Fail) {
            Status::Fail
        } else {
            Status::Pass
        }
    }

    pub fn passed(&self) -> bool {
        self.status() == Status::Pass
    }

    pub fn summary_line(&self) -> String {
        let parts: Vec<String> = self.verdicts.iter().map(|v| v.to_string()).collect();
        format!("{}: {} [{}]", self.experiment, self.status(), parts.join("; "))
    }
}

/// Everything most experiments need: the group, its orbit, `δ̂`, the
/// Patterson density and the convex body.
#[derive(Clone, Debug)]
pub struct Setup {
    /// The configuration with horizon, boxes and `s_offset` filled in.
    pub config: RunConfig,
    pub group: GroupSpec,
    pub basepoint: Point,
    pub table: OrbitTable,
    pub exponent: CriticalExponent,
    pub patterson: PattersonDensity,
    pub body: ConvexBody,
}

impl Setup {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        Self::build_at_radius(cfg, cfg.orbit_radius)
    }

    /// Same run with another orbit radius; the horizon keeps its gap below
    /// the radius.
    pub fn build_at_radius(cfg: &RunConfig, radius: f64) -> Result<Self> {
        let mut config = cfg.clone();
        let gap = cfg.orbit_radius - cfg.horizon();
        config.orbit_radius = radius;
        config.horizon = Some((radius - gap).max(0.0));
        config.materialize()?;
        let group = config.group.build()?;
        let basepoint = config.basepoint();
        let table = enumerate_orbit(&group, &basepoint, radius)?;
        let exponent = critical_exponent(&table)?;
        let offset = config.s_offset.unwrap_or_else(|| default_s_offset(&exponent));
        config.s_offset = Some(offset);
        let delta = exponent.delta;
        let patterson = patterson_approx(&table, delta, delta + offset, config.horizon())?;
        let body = config.body.build()?;
        log::info!(
            "{}: {} orbit points within {radius}, δ̂ = {:.4} ± {:.4}, {} Patterson atoms",
            group.name,
            table.len(),
            delta,
            exponent.stderr,
            patterson.len()
        );
        Ok(Setup {
            config,
            group,
            basepoint,
            table,
            exponent,
            patterson,
            body,
        })
    }

    pub fn delta(&self) -> f64 {
        self.exponent.delta
    }

    pub fn skinning(&self) -> Result<SkinningMeasure> {
        skinning_measure(&self.body, &self.patterson)
    }

    pub fn omega(&self) -> Result<Vec<Arc>> {
        self.config.omega.arcs(&self.group)
    }

    pub fn report(&self, experiment: &str) -> ExperimentReport {
        let mut r = ExperimentReport::new(experiment, self.config.clone());
        r.quantity("delta", self.exponent.delta);
        r.quantity("delta_stderr", self.exponent.stderr);
        r.quantity("orbit_points", self.table.len() as f64);
        r.quantity("patterson_atoms", self.patterson.len() as f64);
        r
    }
}

/// `[start, start + len)` membership.
pub(crate) fn in_arc(a: &Arc, xi: &BoundaryPoint) -> bool {
    (xi.theta() - a.start).rem_euclid(std::f64::consts::TAU) < a.len
}

pub(crate) fn in_any_arc(arcs: &[Arc], xi: &BoundaryPoint) -> bool {
    arcs.iter().any(|a| in_arc(a, xi))
}

/// `σ̂_Ω`: the skinning atoms whose forward endpoint lies in `Ω`.
pub fn restrict_to_omega(s: &SkinningMeasure, omega: &[Arc]) -> AtomicMeasure<UnitTangent> {
    let idx: Vec<usize> = (0..s.len())
        .filter(|&k| in_any_arc(omega, &s.measure.atoms()[k].forward()))
        .collect();
    s.measure.select(&idx)
}

/// Empirical decay exponent of a discrepancy series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub kappa: f64,
    pub stderr: f64,
    /// `log E` at `t = 0` on the fitted line.
    pub intercept: f64,
    pub r2: f64,
    pub n: usize,
}

/// Least-squares fit of `log E_t` against `t` on the later half of the
/// steps; `κ″` is minus the slope. This is an empirical exponent only: the
/// hypotheses behind exponential rates (compactness, exponential mixing) are
/// not certified here.
pub fn fit_rate(report: &ExperimentReport) -> Result<RateFit> {
    let recs = &report.records;
    if recs.len() < 5 {
        return Err(Error::Fit(format!("{} time steps, need at least 5", recs.len())));
    }
    if let Some(r) = recs.iter().find(|r| !(r.e > 0.0)) {
        return Err(Error::Fit(format!(
            "discrepancy {} at t = {} is not positive (noise floor reached)",
            r.e, r.t
        )));
    }
    let tail = &recs[recs.len() / 2..];
    let x: Vec<f64> = tail.iter().map(|r| r.t).collect();
    let y: Vec<f64> = tail.iter().map(|r| r.e.ln()).collect();
    let fit = linear_fit(&x, &y)?;
    if !(fit.slope < -1e-12) {
        return Err(Error::Fit(format!("no decay: fitted log-slope {:.3e} is not negative", fit.slope)));
    }
    Ok(RateFit {
        kappa: -fit.slope,
        stderr: fit.slope_stderr,
        intercept: fit.intercept,
        r2: fit.r2,
        n: fit.n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f: impl Fn(f64) -> f64) -> ExperimentReport {
        let cfg = RunConfig::from_json(r#"{"group": {"kind": "gamma2"}, "seed": 1}"#).unwrap();
        let mut r = ExperimentReport::new("synthetic", cfg);
        for k in 0..=8 {
            let t = k as f64;
            r.records.push(Record {
                t,
                e: f(t),
                stderr: 0.0,
                mass: 1.0,
                tv: 0.0,
                values: vec![],
            });
        }
        r
    }

    #[test]
    fn rate_of_exact_exponential() {
        let fit = fit_rate(&series(|t| (-0.3 * t).exp())).unwrap();
        assert!((fit.kappa - 0.3).abs() < 1e-6, "{fit:?}");
        assert!(fit.r2 > 0.999_999);
    }

    #[test]
    fn rate_refuses_constant_and_zero_series() {
        assert!(matches!(fit_rate(&series(|_| 0.2)), Err(Error::Fit(_))));
        assert!(matches!(fit_rate(&series(|t| if t > 6.0 { 0.0 } else { 1.0 })), Err(Error::Fit(_))));
    }

    #[test]
    fn verdict_relations() {
        assert_eq!(Verdict::check("a", 1.0, "<", 2.0).status, Status::Pass);
        assert_eq!(Verdict::check("a", 2.0, "<", 2.0).status, Status::Fail);
        assert_eq!(Verdict::check("a", 2.0, "<=", 2.0).status, Status::Pass);
        assert_eq!(Verdict::check("a", 2.0, ">=", 3.0).status, Status::Fail);
        let line = Verdict::check("z", 1.5, "<=", 3.0).to_string();
        assert!(line.starts_with("PASS z:"), "{line}");
    }
}
