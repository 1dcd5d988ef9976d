use std::collections::HashMap;
use std::path::Path;

use super::{in_any_arc, in_arc, restrict_to_omega, BoxRecord, ExperimentReport, Setup, Verdict};
use crate::error::{Error, Result};
use crate::flow::{phi_integral_check, TestFunction};
use crate::group::{
    critical_exponent, enumerate_orbit, invert_word, poincare_series, regular_growth_check, Arc, GroupKind,
    DEFAULT_RADIUS_CAP,
};
use crate::hyperbolic::{busemann, dist, visual_dist, Action, BoundaryPoint, ConvexBody, Isometry, Point};
use crate::io::{write_json, write_orbit_csv, write_patterson, write_tangent_measure, RunConfig};
use crate::measure::{
    bm_sample, flow_scaling_check, rn_between_skinnings, skinning_measure, ss_mass_by_class, SkinningMeasure,
};
use crate::stats::bootstrap_mean_stderr;

/// Points per arc when bounding visual distances between two arcs.
const ARC_PROBES: usize = 257;

fn finish(report: ExperimentReport, out: Option<&Path>) -> Result<ExperimentReport> {
    if let Some(dir) = out {
        write_json(&dir.join("report.json"), &report)?;
    }
    Ok(report)
}

/// Orbit enumeration with its closure checks; writes `orbit.csv`.
pub fn run_orbit(cfg: &RunConfig, out: Option<&Path>) -> Result<ExperimentReport> {
    let mut cfg = cfg.clone();
    cfg.materialize()?;
    let g = cfg.group.build()?;
    let t = enumerate_orbit(&g, &cfg.basepoint(), cfg.orbit_radius)?;
    let mut report = ExperimentReport::new("orbit", cfg.clone());
    report.quantity("orbit_points", t.len() as f64);
    report.quantity("duplicates_dropped", t.duplicates_dropped as f64);
    report.quantity("nodes_visited", t.nodes_visited as f64);
    // The inverse is looked up by its reduced word, then confirmed on the
    // matrices: products of large entries lose ~1e-16·‖g‖² absolutely.
    let by_word: HashMap<&str, &Isometry> = t.entries.iter().map(|e| (e.word.as_str(), &e.g)).collect();
    let missing = t
        .entries
        .iter()
        .filter(|e| {
            let scale = e.g.entries().iter().fold(1.0f64, |m, x| m.max(x.abs()));
            !by_word
                .get(invert_word(&e.word).as_str())
                .is_some_and(|h| e.g.compose(h).max_abs_diff(&Isometry::identity()) <= 1e-12 * scale * scale)
        })
        .count();
    report.verdict(Verdict::check("elements whose inverse is missing", missing as f64, "<=", 0.0));
    let identity = t.entries.first().is_some_and(|e| e.d == 0.0);
    report.verdict(Verdict::check("identity present", if identity { 1.0 } else { 0.0 }, ">=", 1.0));
    if let Some(dir) = out {
        write_orbit_csv(&dir.join("orbit.csv"), &t)?;
    }
    finish(report, out)
}

/// Critical exponent at the configured radius and a neighbouring one
/// (`R + 2`, or `R − 2` at the radius cap), regular growth and the Poincaré
/// series just above `δ̂`.
pub fn run_delta(cfg: &RunConfig, out: Option<&Path>) -> Result<ExperimentReport> {
    let mut cfg = cfg.clone();
    cfg.materialize()?;
    let th = cfg.thresholds.clone();
    let g = cfg.group.build()?;
    let x0 = cfg.basepoint();
    let r = cfg.orbit_radius;
    let r2 = if r + 2.0 <= DEFAULT_RADIUS_CAP { r + 2.0 } else { r - 2.0 };
    let (t, t2) = if r2 > r {
        let big = enumerate_orbit(&g, &x0, r2)?;
        (truncate(&big, r), big)
    } else {
        let big = enumerate_orbit(&g, &x0, r)?;
        (big.clone(), truncate(&big, r2))
    };
    let ce = critical_exponent(&t)?;
    let ce2 = critical_exponent(&t2)?;
    let mut report = ExperimentReport::new("delta", cfg);
    report.quantity("orbit_points", t.len() as f64);
    report.quantity("delta", ce.delta);
    report.quantity("delta_stderr", ce.stderr);
    report.quantity("delta_r2", ce.r2);
    report.quantity("second_radius", r2);
    report.quantity("delta_second", ce2.delta);
    report.quantity("delta_second_stderr", ce2.stderr);
    let se = ce.stderr.max(ce2.stderr);
    report.verdict(
        Verdict::check(
            "δ̂ change between radii (stderr units)",
            if se > 0.0 { (ce.delta - ce2.delta).abs() / se } else { 0.0 },
            "<=",
            th.delta_stability_sigma,
        )
        .with_detail(format!("radius {r}: {:.4}, radius {r2}: {:.4}", ce.delta, ce2.delta)),
    );
    if let Some([lo, hi]) = th.delta_range {
        report.verdict(Verdict::check("δ̂ above range start", ce.delta, ">=", lo));
        report.verdict(Verdict::check("δ̂ below range end", ce.delta, "<=", hi));
    }
    let reg = regular_growth_check(&t, ce.delta, th.regular_growth_cap);
    if reg.degenerate {
        report.note("regular growth not evaluated: δ̂ is too small");
    } else {
        report.quantity("regular_growth_c", reg.c);
        report.verdict(Verdict::check("regular growth constant", reg.c, "<", th.regular_growth_cap));
    }
    if ce.delta + 0.2 > 0.0 {
        let ps = poincare_series(&t, ce.delta + 0.2)?;
        report.quantity("poincare_at_delta_plus_0.2", ps.value);
        report.quantity("poincare_tail_bound", ps.tail_bound);
    }
    finish(report, out)
}

fn truncate(t: &crate::group::OrbitTable, radius: f64) -> crate::group::OrbitTable {
    let mut s = t.clone();
    s.entries.retain(|e| e.d <= radius);
    s.radius = radius;
    s
}

/// Patterson density at the basepoint: equivariance residuals and, for
/// Schottky groups, the mass outside the ping-pong arcs. Writes
/// `patterson.csv` with its sidecar.
pub fn run_patterson(cfg: &RunConfig, out: Option<&Path>) -> Result<ExperimentReport> {
    let setup = Setup::build(cfg)?;
    let th = setup.config.thresholds.clone();
    let mut report = setup.report("patterson");
    let p = &setup.patterson;
    report.quantity("s_used", p.s_used);
    report.quantity("horizon", p.horizon);
    let res = p.equivariance_residuals(&setup.group.generators);
    let worst = res.iter().copied().fold(0.0, f64::max);
    report.quantity("equivariance_tv_max", worst);
    report.verdict(Verdict::check("equivariance binned TV", worst, "<=", th.equivariance_tv));
    if setup.group.kind == GroupKind::Schottky {
        let arcs = setup.group.ping_pong_arcs(&setup.basepoint)?;
        let outside: f64 = p
            .measure
            .iter()
            .filter(|(xi, _)| !arcs.iter().any(|a| a.contains(xi, 0.0)))
            .map(|(_, w)| w)
            .sum();
        report.quantity("mass_outside_ping_pong_arcs", outside);
        report.verdict(Verdict::check("mass outside ping-pong arcs", outside, "<", 1e-6));
    }
    if let Some(dir) = out {
        write_patterson(&dir.join("patterson.csv"), p)?;
    }
    finish(report, out)
}

fn max_rel_weight_err(a: &SkinningMeasure, b: &SkinningMeasure) -> Result<f64> {
    if a.source != b.source {
        return Err(Error::Degenerate("skinning measures see different boundary atoms".into()));
    }
    Ok(a
        .measure
        .weights()
        .iter()
        .zip(b.measure.weights())
        .map(|(x, y)| (x - y).abs() / x.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max))
}

/// Exact atomic identities of the skinning measure: flow scaling, the
/// Radon–Nikodym derivative between bodies, basepoint independence,
/// equivariance and the mass growth of `σ̂_{g^tΩ}`. Writes `skinning.csv`.
pub fn run_skinning(cfg: &RunConfig, out: Option<&Path>) -> Result<ExperimentReport> {
    let setup = Setup::build(cfg)?;
    let tol = setup.config.thresholds.exact;
    let mut report = setup.report("skinning");
    let p = &setup.patterson;
    let c = setup.body;
    let delta = p.delta;
    let s = setup.skinning()?;
    report.quantity("skinning_atoms", s.len() as f64);
    report.quantity("skinning_mass", s.total());
    report.quantity("dropped_atoms", s.dropped as f64);
    report.quantity("dropped_mass", s.dropped_mass);

    let fs = flow_scaling_check(&c, p, 1.0)?;
    report.quantity("flow_scaling_atom_separation", fs.max_atom_separation);
    report.verdict(Verdict::check("flow scaling (s = 1) max relative error", fs.max_rel_err, "<", tol));
    report.verdict(Verdict::check("flow scaling total-mass ratio error", fs.mass_ratio_err, "<", tol));

    let others = [("N_1(C)", c.neighbourhood(1.0)?), ("ball(x0, 1)", ConvexBody::ball(setup.basepoint, 1.0)?)];
    for (name, other) in others {
        let e = rn_between_skinnings(&c, &other, p)?;
        report.verdict(Verdict::check(format!("Radon–Nikodym C vs {name} max relative error"), e, "<", tol));
    }

    let x0 = setup.basepoint;
    let y = Point::new(x0.x, 2.0 * x0.y)?;
    let moved = skinning_measure(&c, &p.rebase(&y))?;
    let e = max_rel_weight_err(&s, &moved)?;
    report.verdict(Verdict::check("basepoint independence max relative error", e, "<", tol));

    let mut worst_w: f64 = 0.0;
    let mut worst_sep: f64 = 0.0;
    for g in &setup.group.generators {
        let image = skinning_measure(&c.act(g), &p.push_forward(g))?;
        if image.source != s.source {
            return Err(Error::Degenerate("pushed body sees different boundary atoms".into()));
        }
        for (k, (w, wt)) in s.measure.iter().enumerate() {
            let other = image.measure.weights()[k];
            worst_w = worst_w.max((wt - other).abs() / wt.max(f64::MIN_POSITIVE));
            worst_sep = worst_sep.max(w.act(g).separation(&image.measure.atoms()[k]));
        }
    }
    report.quantity("equivariance_atom_separation", worst_sep);
    report.verdict(Verdict::check("γ-equivariance max relative weight error", worst_w, "<", tol));

    let omega = setup.omega()?;
    let base = restrict_to_omega(&s, &omega).total();
    if base > 0.0 {
        let mut worst: f64 = 0.0;
        for t in [1.0, 2.0, 4.0] {
            let grown = restrict_to_omega(&skinning_measure(&c.neighbourhood(t)?, p)?, &omega).total();
            worst = worst.max((grown / (base * (delta * t).exp()) - 1.0).abs());
        }
        report.verdict(Verdict::check("‖σ̂_(g^t Ω)‖ = e^(δt)‖σ̂_Ω‖ relative error", worst, "<", tol));
    } else {
        report.note("σ̂_Ω is zero; mass growth not evaluated");
    }
    if setup.group.kind == GroupKind::Schottky {
        let arcs = setup.group.ping_pong_arcs(&x0)?;
        let outside = s
            .measure
            .atoms()
            .iter()
            .filter(|w| !arcs.iter().any(|a| a.contains(&w.forward(), 0.0)))
            .count();
        report.verdict(Verdict::check("skinning atoms outside the limit-set arcs", outside as f64, "<=", 0.0));
    }
    if let Some(dir) = out {
        write_tangent_measure(&dir.join("skinning.csv"), &s.measure)?;
    }
    finish(report, out)
}

/// Monte-Carlo check of `∫φ_η dm̂_BM = ‖σ̂_Ω‖`.
pub fn run_phi_integral(cfg: &RunConfig, out: Option<&Path>) -> Result<ExperimentReport> {
    let setup = Setup::build(cfg)?;
    let cfg = &setup.config;
    let mut report = setup.report("phi-integral");
    let s = setup.skinning()?;
    let f = TestFunction::new(&s, setup.omega()?, cfg.eta, cfg.r, &setup.patterson)?;
    let min_h = f.h_values().iter().copied().fold(f64::INFINITY, f64::min);
    report.quantity("omega_atoms", f.atom_count() as f64);
    if min_h.is_finite() {
        report.quantity("max_ball_mass_inverse", 1.0 / (2.0 * cfg.eta * min_h));
    }
    let res = phi_integral_check(&f, &setup.patterson, cfg.samples.phi, cfg.seed)?;
    report.quantity("lhs", res.lhs);
    report.quantity("rhs", res.rhs);
    report.quantity("mc_stderr", res.mc_stderr);
    report.quantity("hits", res.hits as f64);
    report.quantity("samples", res.n as f64);
    report.verdict(
        Verdict::check("|∫φ dm_BM − ‖σ_Ω‖| (stderr units)", res.z_score(), "<=", cfg.thresholds.z_max)
            .with_detail(format!("lhs {:.6e}, rhs {:.6e}, stderr {:.2e}", res.lhs, res.rhs, res.mc_stderr)),
    );
    finish(report, out)
}

/// Smallest visual distance between points of two arcs, probing each arc at
/// evenly spaced points including both ends.
fn min_visual_dist(x0: &Point, a: &Arc, b: &Arc) -> f64 {
    let probe = |arc: &Arc, k: usize| BoundaryPoint::from_angle(arc.start + arc.len * k as f64 / (ARC_PROBES - 1) as f64);
    let mut best = f64::INFINITY;
    for i in 0..ARC_PROBES {
        let xi = probe(a, i);
        for j in 0..ARC_PROBES {
            best = best.min(visual_dist(x0, &xi, &probe(b, j)));
        }
    }
    best
}

/// Box-by-box comparison of `m̂_BM(B)` (Monte Carlo) with the disintegration
/// over the skinning measure, `(t₁ − t₀) Σ_{w₊ ∈ I₊} σ̂(w) μ̂^{ss}_w(v₋ ∈ I₋)`,
/// in the coordinates `(v₋, v₊, τ)` with `τ = β_{v₊}(π(f_C v), π(v))`.
pub fn run_disintegration_check(cfg: &RunConfig, out: Option<&Path>) -> Result<ExperimentReport> {
    let setup = Setup::build(cfg)?;
    let cfg = &setup.config;
    let th = &cfg.thresholds;
    let mut report = setup.report("disintegration");
    let p = &setup.patterson;
    let x0 = setup.basepoint;
    let c = setup.body;
    let s = setup.skinning()?;
    let boxes = cfg.boxes.clone().unwrap_or_default();
    if boxes.is_empty() {
        return Err(Error::config("boxes", "no disintegration boxes"));
    }
    let arcs: Vec<(Arc, Arc)> = boxes.iter().map(|b| (b.minus.arc(), b.plus.arc())).collect();
    for (k, (_, plus)) in arcs.iter().enumerate() {
        if c.ideal_boundary().iter().any(|e| in_arc(plus, e)) {
            return Err(Error::config(format!("boxes[{k}].plus"), "the v₊ arc meets the ideal boundary of the body"));
        }
    }

    // Hopf-time window covering every box.
    let mut half = 0.0f64;
    for (b, (minus, plus)) in boxes.iter().zip(&arcs) {
        let reach = s
            .measure
            .atoms()
            .iter()
            .filter(|w| in_arc(plus, &w.forward()))
            .map(|w| dist(&x0, &w.base()))
            .fold(0.0, f64::max);
        let vd = min_visual_dist(&x0, minus, plus);
        if !(vd > 0.0) {
            return Err(Error::config("boxes", "a box has overlapping v₋ and v₊ arcs"));
        }
        half = half.max(b.t[0].abs().max(b.t[1].abs()) + reach + (1.0 / vd.min(1.0)).acosh());
    }
    let half = half + 0.5;
    report.quantity("sample_window", half);
    let n = cfg.samples.disintegration;
    let sample = bm_sample(p, n, (-half, half), cfg.seed)?;

    // Box coordinates of every sample that lands in some v₊ arc.
    let plus_arcs: Vec<Arc> = arcs.iter().map(|a| a.1).collect();
    let tau: Vec<Option<f64>> = sample
        .measure
        .atoms()
        .iter()
        .map(|v| {
            let plus = v.forward();
            if !in_any_arc(&plus_arcs, &plus) {
                return None;
            }
            let w = c.stable_fibration(v).ok()?;
            Some(busemann(&plus, &w.base(), &v.base()))
        })
        .collect();

    let in_minus = |a: &Arc, k: usize| in_arc(a, &p.atoms()[k]);
    // Patterson atoms grouped by which distinct v₋ arcs contain them, so each
    // skinning atom needs a single pass over the atoms.
    let mut minus_arcs: Vec<Arc> = Vec::new();
    let minus_idx: Vec<usize> = arcs
        .iter()
        .map(|(m, _)| match minus_arcs.iter().position(|a| a == m) {
            Some(i) => i,
            None => {
                minus_arcs.push(*m);
                minus_arcs.len() - 1
            }
        })
        .collect();
    if minus_arcs.len() > 64 {
        return Err(Error::config("boxes", "more than 64 distinct v₋ arcs"));
    }
    let mut signatures: Vec<u64> = Vec::new();
    let class: Vec<Option<usize>> = (0..p.len())
        .map(|k| {
            let sig = minus_arcs
                .iter()
                .enumerate()
                .filter(|(_, a)| in_minus(a, k))
                .fold(0u64, |m, (i, _)| m | 1 << i);
            if sig == 0 {
                return None;
            }
            Some(signatures.iter().position(|&x| x == sig).unwrap_or_else(|| {
                signatures.push(sig);
                signatures.len() - 1
            }))
        })
        .collect();
    let ss: Vec<Option<Vec<f64>>> = s
        .measure
        .atoms()
        .iter()
        .map(|w| in_any_arc(&plus_arcs, &w.forward()).then(|| ss_mass_by_class(w, p, &class, signatures.len())))
        .collect();
    let mut worst_z: f64 = 0.0;
    for (k, (b, (minus, plus))) in boxes.iter().zip(&arcs).enumerate() {
        let mut terms = Vec::new();
        let mut lhs = 0.0;
        for (i, (_, w)) in sample.measure.iter().enumerate() {
            let Some(t) = tau[i] else { continue };
            if t < b.t[0] || t >= b.t[1] {
                continue;
            }
            if !in_arc(plus, &sample.measure.atoms()[i].forward()) || !in_minus(minus, sample.minus[i] as usize) {
                continue;
            }
            lhs += w;
            terms.push(w * n as f64);
        }
        let bit = 1u64 << minus_idx[k];
        let rhs: f64 = (b.t[1] - b.t[0])
            * s.measure
                .iter()
                .zip(&ss)
                .filter(|((w, _), _)| in_arc(plus, &w.forward()))
                .map(|((_, sw), m)| {
                    let m = m.as_ref().expect("computed for every v₊ arc");
                    let inside: f64 = signatures.iter().zip(m).filter(|(sig, _)| *sig & bit != 0).map(|(_, x)| x).sum();
                    sw * inside
                })
                .sum::<f64>();
        let se = bootstrap_mean_stderr(&terms, n, cfg.samples.bootstrap, cfg.seed ^ (0xd15e_0000 + k as u64));
        let skipped = terms.len() < th.min_effective_samples;
        if skipped {
            report.note(format!("box {k}: {} effective samples, skipped", terms.len()));
        } else {
            let z = if se > 0.0 { (lhs - rhs).abs() / se } else { f64::INFINITY };
            worst_z = worst_z.max(z);
        }
        report.boxes.push(BoxRecord {
            index: k,
            lhs,
            rhs,
            stderr: se,
            hits: terms.len(),
            skipped,
        });
    }
    let evaluated = report.boxes.iter().filter(|b| !b.skipped).count();
    report.quantity("boxes_evaluated", evaluated as f64);
    if evaluated == 0 {
        return Err(Error::Insufficient("every disintegration box was skipped".into()));
    }
    report.verdict(Verdict::check("worst box |lhs − rhs| (stderr units)", worst_z, "<=", th.z_max));
    finish(report, out)
}
