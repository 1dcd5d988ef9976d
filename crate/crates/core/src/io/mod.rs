//! Configuration and data interchange: JSON configs and reports, CSV tables.
//!
//! CSV files use `,` separators, `.` decimals, LF line endings and a header
//! row. Floats are written in shortest round-trip form.

mod config;

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{
    stabilizer_piece, ArcConfig, BodyConfig, BoxConfig, Coord, CuspConfig, GroupConfig, ObservableConfig,
    OmegaConfig, RunConfig, SampleConfig, Thresholds,
};

use crate::error::{Error, Result};
use crate::experiment::ExperimentReport;
use crate::group::OrbitTable;
use crate::hyperbolic::{BoundaryPoint, Point, UnitTangent};
use crate::measure::{AtomicMeasure, PattersonDensity};

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// `word,a,b,c,d,displacement`; the identity has an empty word.
pub fn write_orbit_csv(path: &Path, t: &OrbitTable) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["word", "a", "b", "c", "d", "displacement"])?;
    for e in &t.entries {
        let [a, b, c, d] = e.g.entries();
        w.write_record([e.word.clone(), num(a), num(b), num(c), num(d), num(e.d)])?;
    }
    w.flush()?;
    Ok(())
}

/// Metadata written next to a boundary-measure CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureSidecar {
    pub delta: f64,
    pub s_used: f64,
    pub basepoint: [f64; 2],
    pub radius: f64,
    pub horizon: f64,
    pub atoms: usize,
    pub total: f64,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// `theta,x,weight,displacement` (`x` is the half-plane coordinate or `inf`)
/// plus a JSON sidecar with the density parameters.
pub fn write_patterson(path: &Path, p: &PattersonDensity) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["theta", "x", "weight", "displacement"])?;
    for ((xi, wt), d) in p.measure.iter().zip(&p.source_displacement) {
        let x = xi.to_real().map_or_else(|| "inf".to_string(), num);
        w.write_record([num(xi.theta()), x, num(wt), num(*d)])?;
    }
    w.flush()?;
    let side = MeasureSidecar {
        delta: p.delta,
        s_used: p.s_used,
        basepoint: [p.basepoint.x, p.basepoint.y],
        radius: p.orbit_radius,
        horizon: p.horizon,
        atoms: p.len(),
        total: p.measure.total(),
    };
    write_json(&sidecar_path(path), &side)
}

pub fn read_patterson(path: &Path) -> Result<PattersonDensity> {
    let side: MeasureSidecar = serde_json::from_reader(File::open(sidecar_path(path))?)?;
    let mut r = csv::Reader::from_path(path)?;
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    let mut disp = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |i: usize, name: &str| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::config(format!("{}:{}:{name}", path.display(), k + 2), "not a number"))
        };
        atoms.push(BoundaryPoint::from_angle(field(0, "theta")?));
        weights.push(field(2, "weight")?);
        disp.push(field(3, "displacement")?);
    }
    if atoms.len() != side.atoms {
        return Err(Error::config(
            sidecar_path(path).display().to_string(),
            format!("sidecar lists {} atoms, CSV has {}", side.atoms, atoms.len()),
        ));
    }
    let basepoint = Point::new(side.basepoint[0], side.basepoint[1])?;
    PattersonDensity::from_parts(
        AtomicMeasure::new(atoms, weights)?,
        side.delta,
        side.s_used,
        side.radius,
        side.horizon,
        basepoint,
        disp,
    )
}

/// `base_x,base_y,dir,minus,plus,weight` with endpoint angles.
pub fn write_tangent_measure(path: &Path, m: &AtomicMeasure<UnitTangent>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["base_x", "base_y", "dir", "minus", "plus", "weight"])?;
    for (v, wt) in m.iter() {
        let b = v.base();
        w.write_record([
            num(b.x),
            num(b.y),
            num(v.dir()),
            num(v.backward().theta()),
            num(v.forward().theta()),
            num(wt),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Discrepancy series: `t,E,stderr,mass,obs_0,…` with the signed
/// per-observable differences.
pub fn write_series(path: &Path, report: &ExperimentReport) -> Result<()> {
    let mut w = writer(path)?;
    let width = report.records.iter().map(|r| r.values.len()).max().unwrap_or(0);
    let mut header = vec!["t".to_string(), "E".into(), "stderr".into(), "mass".into()];
    header.extend((0..width).map(|j| format!("obs_{j}")));
    w.write_record(&header)?;
    for r in &report.records {
        let mut row = vec![num(r.t), num(r.e), num(r.stderr), num(r.mass)];
        row.extend(r.values.iter().map(|v| num(*v)));
        row.resize(header.len(), String::new());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{enumerate_orbit, GroupSpec};
    use crate::measure::patterson_approx;

    #[test]
    fn patterson_csv_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let g = GroupSpec::symmetric_schottky(2.5).unwrap();
        let t = enumerate_orbit(&g, &Point::i(), 9.0).unwrap();
        let p = patterson_approx(&t, 0.5, 0.6, 5.0).unwrap();
        let path = dir.path().join("mu.csv");
        write_patterson(&path, &p).unwrap();
        let q = read_patterson(&path).unwrap();
        assert_eq!(q.weights(), p.weights());
        assert_eq!(q.source_displacement, p.source_displacement);
        for (a, b) in q.atoms().iter().zip(p.atoms()) {
            assert_eq!(a.theta(), b.theta());
        }
        assert_eq!(q.delta, p.delta);
    }

    #[test]
    fn orbit_csv_has_one_row_per_element() {
        let dir = tempfile::tempdir().unwrap();
        let g = GroupSpec::gamma2();
        let t = enumerate_orbit(&g, &Point::i(), 5.0).unwrap();
        let path = dir.path().join("sub/orbit.csv");
        write_orbit_csv(&path, &t).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("word,a,b,c,d,displacement"));
        assert_eq!(lines.count(), t.len());
        assert!(!text.contains('\r'));
    }
}
