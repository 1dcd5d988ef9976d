use std::path::Path;

use super::{fit_rate, ExperimentReport, Record, Verdict};
use crate::error::Result;
use crate::flow::{phi_integral_check, TestFunction};
use crate::group::{enumerate_orbit, poincare_series, GroupSpec};
use crate::hyperbolic::{
    busemann, dist, hamenstadt_dist, in_thickening, t1_dist, visual_dist, BoundaryPoint, ConvexBody,
    HopfCoords, Isometry, Point, UnitTangent,
};
use crate::io::{write_json, RunConfig};
use crate::measure::{bm_density, patterson_approx, skinning_measure};

const SELFTEST_CONFIG: &str = r#"{"group": {"kind": "symmetric_schottky", "ell": 2.5}, "seed": 1, "orbit_radius": 9}"#;

/// Quick checks of the identity and degenerate cases: each must hold
/// exactly or to rounding.
pub fn selftest(out: Option<&Path>) -> Result<ExperimentReport> {
    let cfg = RunConfig::from_json(SELFTEST_CONFIG)?;
    let mut r = ExperimentReport::new("selftest", cfg);
    let mut check = |name: &str, err: f64, tol: f64| r.verdict(Verdict::check(name, err, "<=", tol));

    let i = Point::new(0.0, 1.0)?;
    let x = Point::new(0.3, 0.7)?;
    let y = Point::new(-1.2, 2.5)?;
    let g = Isometry::new(2.0, 1.0, 3.0, 2.0)?;
    let xi = BoundaryPoint::from_real(0.4);
    check("dist(x, x)", dist(&x, &x), 0.0);
    check("identity action", dist(&Isometry::identity().apply(&x), &x), 0.0);
    check("inverse law", dist(&g.apply(&g.inverse().apply(&x)), &x), 1e-10);
    check("busemann(ξ, x, x)", busemann(&xi, &x, &x).abs(), 0.0);
    check(
        "visual_dist(i, 0, ∞) − 1",
        (visual_dist(&i, &BoundaryPoint::from_real(0.0), &BoundaryPoint::infinity()) - 1.0).abs(),
        1e-12,
    );
    check("visual_dist(x, ξ, ξ)", visual_dist(&x, &xi, &xi), 0.0);

    let v = UnitTangent::new(x, 0.8);
    let foot = v.flow(-v.hopf_time(&x));
    check("hopf time at the closest point", foot.hopf_time(&x).abs(), 1e-10);
    check("flow(v, 0) = v", v.flow(0.0).separation(&v), 1e-12);
    let back = UnitTangent::from_hopf(&v.hopf(&y), &y)?;
    check("Hopf round trip", back.separation(&v), 1e-9);
    check("t1_dist(v, v)", t1_dist(&v, &v), 0.0);
    let w = UnitTangent::reference();
    check("hamenstadt(w, v, v)", hamenstadt_dist(&w, &w, &w)?, 0.0);
    let eta = 0.1;
    check(
        "w in its own thickening",
        if in_thickening(&w, eta, 1.0, &w).is_some() { 0.0 } else { 1.0 },
        0.0,
    );
    check(
        "flow(w, 2η) outside the thickening",
        if in_thickening(&w, eta, 1.0, &w.flow(2.0 * eta)).is_some() { 1.0 } else { 0.0 },
        0.0,
    );
    let line = ConvexBody::geodesic(BoundaryPoint::from_real(0.0), BoundaryPoint::infinity())?;
    check("closest point of a body point", dist(&line.closest_point(&i), &i), 1e-12);

    let h = Isometry::axial(1.0);
    let cyc = GroupSpec::cyclic("h", h)?;
    let t = enumerate_orbit(&cyc, &i, 5.0 + 1e-9)?;
    check("cyclic orbit of radius 5ℓ has 11 elements", (t.len() as f64 - 11.0).abs(), 0.0);
    check("identity has displacement 0", t.entries[0].d, 0.0);
    let ps = poincare_series(&t, 60.0)?;
    check("Poincaré series at large s", (ps.value - 1.0).abs(), 1e-12);

    let sch = GroupSpec::symmetric_schottky(2.5)?;
    let table = enumerate_orbit(&sch, &i, 9.0)?;
    let p = patterson_approx(&table, 0.5, 0.6, 5.0)?;
    let same = p.at(&i);
    let moved: f64 = same.weights().iter().zip(p.weights()).map(|(a, b)| (a - b).abs()).sum();
    check("Patterson density at its basepoint", moved, 0.0);
    let unit = HopfCoords {
        minus: BoundaryPoint::from_real(0.0),
        plus: BoundaryPoint::infinity(),
        t: 0.0,
    };
    check("Bowen–Margulis factor at visual distance 1", (bm_density(&p, &unit)? - 1.0).abs(), 1e-12);
    let skin = skinning_measure(&line, &p)?;
    let empty = TestFunction::new(&skin, Vec::new(), 0.1, 2.0, &p)?;
    let pi = phi_integral_check(&empty, &p, 10, 1)?;
    check("Ω = ∅ gives a zero integral", pi.lhs.abs() + pi.rhs.abs(), 0.0);

    let mut synthetic = ExperimentReport::new("synthetic", r.config.clone());
    for k in 0..=8 {
        let t = k as f64;
        synthetic.records.push(Record {
            t,
            e: (-0.3 * t).exp(),
            stderr: 0.0,
            mass: 1.0,
            tv: 0.0,
            values: Vec::new(),
        });
    }
    let kappa = fit_rate(&synthetic)?.kappa;
    r.verdict(Verdict::check("κ″ of an exact exponential − 0.3", (kappa - 0.3).abs(), "<=", 1e-6));
    r.verdict(Verdict::check(
        "canonical form is idempotent",
        g.canonical().canonical().max_abs_diff(&g.canonical()),
        "<=",
        0.0,
    ));

    if let Some(dir) = out {
        write_json(&dir.join("report.json"), &r)?;
    }
    Ok(r)
}
