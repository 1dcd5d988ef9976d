use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fit_rate, restrict_to_omega, select_observables, ExperimentReport, FitSummary, ObservableFamily, Record, Setup, Verdict};
use crate::error::{Error, Result};
use crate::flow::{transport_measure, DirichletDomain};
use crate::hyperbolic::{dist, Point, UnitTangent};
use crate::io::{write_json, write_series, RunConfig};
use crate::measure::{bm_sample, AtomicMeasure};
use crate::stats::std_dev;

/// Groups below this critical exponent count as elementary.
const MIN_DELTA: f64 = 0.05;
/// Hopf bins `(ξ₋, ξ₊, t)` of the secondary total-variation diagnostic.
const HOPF_BINS: (usize, usize, usize) = (32, 32, 16);

/// Normalized `ψ_j` averages of a measure.
fn averages(m: &AtomicMeasure<UnitTangent>, obs: &ObservableFamily) -> Vec<f64> {
    let mut acc = vec![0.0; obs.len()];
    for (v, w) in m.iter() {
        for (a, b) in acc.iter_mut().zip(&obs.bumps) {
            *a += w * b.eval(v);
        }
    }
    let total = m.total();
    acc.iter().map(|a| a / total).collect()
}

/// Binned total variation between two normalized measures on `T¹H²` in Hopf
/// coordinates; times outside the window go to the edge slots.
fn hopf_tv(a: &AtomicMeasure<UnitTangent>, b: &AtomicMeasure<UnitTangent>, x0: &Point, window: f64) -> f64 {
    let (na, nb, nt) = HOPF_BINS;
    let hist = |m: &AtomicMeasure<UnitTangent>| {
        let mut h = vec![0.0; na * nb * nt];
        let total = m.total();
        for (v, w) in m.iter() {
            let c = v.hopf(x0);
            let i = ((c.minus.theta() / TAU * na as f64) as usize).min(na - 1);
            let j = ((c.plus.theta() / TAU * nb as f64) as usize).min(nb - 1);
            let s = ((c.t + window) / (2.0 * window) * nt as f64).floor().clamp(0.0, (nt - 1) as f64) as usize;
            h[(i * nb + j) * nt + s] += w / total;
        }
        h
    };
    let (ha, hb) = (hist(a), hist(b));
    0.5 * ha.iter().zip(&hb).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn bootstrap_averages(weights: &[f64], psi: &[Vec<f64>], resamples: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = weights.len();
    let width = psi.first().map_or(0, Vec::len);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..resamples)
        .map(|_| {
            let mut num = vec![0.0; width];
            let mut den = 0.0;
            for _ in 0..n {
                let k = rng.gen_range(0..n);
                den += weights[k];
                for (a, p) in num.iter_mut().zip(&psi[k]) {
                    *a += weights[k] * p;
                }
            }
            num.iter().map(|a| a / den).collect()
        })
        .collect()
}

/// Weak-star equidistribution of `σ̂_{g^tΩ}` towards `m̂_BM` in the quotient:
/// `E_t = max_j |σ̂-average(ψ_j) − m̂-average(ψ_j)|` on the configured time
/// grid.
///
/// Error bars come from bootstrapping the Monte-Carlo reference; `σ̂_Ω`
/// itself is a fixed atomic measure.
pub fn run_equidistribution(cfg: &RunConfig, out: Option<&Path>) -> Result<ExperimentReport> {
    let setup = Setup::build(cfg)?;
    let delta = setup.delta();
    if !(delta > MIN_DELTA) {
        return Err(Error::Degenerate(format!(
            "δ̂ = {delta:.4} ≤ {MIN_DELTA}: the group looks elementary"
        )));
    }
    let cfg = &setup.config;
    let mut report = setup.report("equidistribute");
    let x0 = setup.basepoint;
    let skin = setup.skinning()?;
    let omega = setup.omega()?;
    let sigma = restrict_to_omega(&skin, &omega);
    if sigma.is_empty() || !(sigma.total() > 0.0) {
        return Err(Error::EmptyMeasure("zero skinning measure on Ω".into()));
    }
    report.quantity("omega_atoms", sigma.len() as f64);
    report.quantity("omega_mass", sigma.total());
    let domain = DirichletDomain::build(&setup.table, cfg.wall_radius)?;
    report.quantity("walls", domain.wall_count() as f64);

    let w = cfg.bm_window;
    let sample = bm_sample(&setup.patterson, cfg.samples.equidistribution, (-w, w), cfg.seed)?;
    let keep: Vec<usize> = (0..sample.len())
        .filter(|&k| domain.contains(&sample.measure.atoms()[k].base()))
        .collect();
    if keep.len() < cfg.thresholds.min_effective_samples {
        return Err(Error::Insufficient(format!(
            "{} reference samples fall in the domain",
            keep.len()
        )));
    }
    let ref_measure = sample.measure.select(&keep);
    let max_t = keep.iter().map(|&k| sample.t[k].abs()).fold(0.0, f64::max);
    let max_r = ref_measure
        .atoms()
        .iter()
        .map(|v| dist(&x0, &v.base()))
        .fold(0.0, f64::max);
    report.quantity("reference_samples", keep.len() as f64);
    report.quantity("reference_max_abs_t", max_t);
    report.quantity("reference_max_dist", max_r);
    if max_t > 0.95 * w {
        report.note(format!(
            "reference samples reach |t| = {max_t:.3} near the window edge {w}; bm_window may truncate the reference"
        ));
    }

    let obs = select_observables(ref_measure.atoms(), &domain, &cfg.observables, cfg.seed ^ 0x0b5e_7ab1)?;
    let psi: Vec<Vec<f64>> = ref_measure.atoms().iter().map(|v| obs.eval(v)).collect();
    // Bootstrap replicates of the normalized reference averages.
    let boot = bootstrap_averages(ref_measure.weights(), &psi, cfg.samples.bootstrap, cfg.seed ^ 0xb007_57a9);
    let ref_mean = averages(&ref_measure, &obs);
    for (j, m) in ref_mean.iter().enumerate() {
        report.quantity(&format!("reference_avg_{j}"), *m);
        report.quantity(&format!("holder_norm_{j}"), obs.holder_norms[j]);
    }
    if ref_mean.iter().any(|m| !(*m > 0.0)) {
        report.note("an observable has zero reference mass; its discrepancy only measures σ̂");
    }

    let mass0 = sigma.total();
    let mut mass_err: f64 = 0.0;
    for &t in &cfg.t_grid {
        let moved = transport_measure(&sigma, t, &domain, Some(delta))?;
        let mass = moved.total();
        mass_err = mass_err.max((mass / (mass0 * (delta * t).exp()) - 1.0).abs());
        let a = averages(&moved, &obs);
        let values: Vec<f64> = a.iter().zip(&ref_mean).map(|(x, y)| x - y).collect();
        let e = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let reps: Vec<f64> = boot
            .iter()
            .map(|b| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
            .collect();
        let tv = hopf_tv(&moved, &ref_measure, &x0, w);
        log::info!("t = {t}: E = {e:.4e} ± {:.2e}, TV = {tv:.3}", std_dev(&reps));
        report.records.push(Record {
            t,
            e,
            stderr: std_dev(&reps),
            mass,
            tv,
            values,
        });
    }

    let th = &cfg.thresholds;
    let recs = &report.records;
    let last = recs.last().expect("non-empty grid");
    let at_ref = recs
        .iter()
        .find(|r| (r.t - th.equidist_ref_t).abs() < 1e-12)
        .ok_or_else(|| Error::config("thresholds.equidist_ref_t", "time is not on the grid"))?;
    let decay = Verdict::check(
        format!("E_{} < E_{} / {}", last.t, at_ref.t, th.equidist_ratio),
        last.e,
        "<",
        at_ref.e / th.equidist_ratio,
    );
    let worst_step = recs
        .windows(2)
        .map(|p| {
            let se = p[0].stderr.max(p[1].stderr);
            let rise = p[1].e - p[0].e;
            if rise <= 0.0 {
                f64::NEG_INFINITY
            } else if se > 0.0 {
                rise / se
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let noise = Verdict::check("largest step increase of E (stderr units)", worst_step.max(0.0), "<=", th.noise_sigma);
    let mass = Verdict::check("mass scaling e^(δt) relative error", mass_err, "<=", th.exact);
    report.verdict(decay);
    report.verdict(noise);
    report.verdict(mass);

    match fit_rate(&report) {
        Ok(f) => {
            report.fits.push(FitSummary {
                name: "kappa".into(),
                slope: -f.kappa,
                stderr: f.stderr,
                intercept: f.intercept,
                r2: f.r2,
                n: f.n,
            });
            report.quantity("kappa", f.kappa);
            report.quantity("kappa_stderr", f.stderr);
            report.quantity("kappa_r2", f.r2);
            report.note("κ″ is an empirical decay exponent; compactness and exponential mixing are not certified");
        }
        Err(e) => report.note(format!("rate fit: {e}")),
    }

    if let Some(dir) = out {
        write_series(&dir.join("series.csv"), &report)?;
        write_json(&dir.join("observables.json"), &obs)?;
        write_json(&dir.join("report.json"), &report)?;
    }
    Ok(report)
}
