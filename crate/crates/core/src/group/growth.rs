use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::orbit::{OrbitEntry, OrbitTable, DEDUP_QUANTUM};
use super::{invert_word, reduce_word, GroupSpec};
use crate::error::{Error, Result};
use crate::hyperbolic::{dist, Isometry, Point};
use crate::stats::{linear_fit, LinearFit};

const MIN_FIT_RADIUS: f64 = 8.0;
const MIN_COSET_REPS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalExponent {
    pub delta: f64,
    pub stderr: f64,
    /// `log C` in `Card(n) ≈ C e^{δn}`.
    pub intercept: f64,
    pub r2: f64,
    pub shell_width: f64,
    /// `(n, Card{d ≤ n})` for every shell used in the fit.
    pub shells: Vec<(f64, usize)>,
}

/// Shell-slope estimate of the critical exponent with unit shells.
pub fn critical_exponent(t: &OrbitTable) -> Result<CriticalExponent> {
    critical_exponent_with_width(t, 1.0)
}

/// Least-squares slope of `log Card{d ≤ n}` against `n` over the last half
/// of the radius range, with `n` on a grid of step `width`.
pub fn critical_exponent_with_width(t: &OrbitTable, width: f64) -> Result<CriticalExponent> {
    if t.radius < MIN_FIT_RADIUS {
        return Err(Error::TooFewShells(t.radius));
    }
    growth_fit(&t.displacements(), t.radius, width).map(|(fit, shells)| CriticalExponent {
        delta: fit.slope,
        stderr: fit.slope_stderr,
        intercept: fit.intercept,
        r2: fit.r2,
        shell_width: width,
        shells,
    })
}

/// Fits `log Card{d ≤ n}` on the upper half of `[0, radius]`; `ds` sorted.
fn growth_fit(ds: &[f64], radius: f64, width: f64) -> Result<(LinearFit, Vec<(f64, usize)>)> {
    if !(width > 0.0) {
        return Err(Error::Insufficient(format!("shell width {width} must be positive")));
    }
    let kmax = (radius / width + 1e-9).floor() as usize;
    let kmin = (0.5 * radius / width - 1e-9).ceil().max(1.0) as usize;
    let shells: Vec<(f64, usize)> = (kmin..=kmax)
        .map(|k| {
            let n = k as f64 * width;
            (n, ds.partition_point(|d| *d <= n + 1e-9))
        })
        .collect();
    if shells.len() < 3 {
        return Err(Error::TooFewShells(radius));
    }
    let x: Vec<f64> = shells.iter().map(|s| s.0).collect();
    let y: Vec<f64> = shells.iter().map(|s| (s.1.max(1) as f64).ln()).collect();
    Ok((linear_fit(&x, &y)?, shells))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareValue {
    pub value: f64,
    pub tail_bound: f64,
}

/// Truncated Poincaré series `Σ e^{−s d(x₀, γx₀)}` plus the tail estimate
/// `C δ e^{(δ−s)R}/(s − δ)` from the fitted growth `C e^{δn}`.
pub fn poincare_series(t: &OrbitTable, s: f64) -> Result<PoincareValue> {
    if !(s > 0.0) {
        return Err(Error::Degenerate(format!("Poincaré exponent {s} must be positive")));
    }
    let value: f64 = t.entries.iter().map(|e| (-s * e.d).exp()).sum();
    let tail_bound = match critical_exponent(t) {
        Ok(ce) if s > ce.delta => {
            ce.intercept.exp() * ce.delta.max(0.0) * ((ce.delta - s) * t.radius).exp() / (s - ce.delta)
        }
        _ => f64::INFINITY,
    };
    Ok(PoincareValue { value, tail_bound })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularGrowth {
    /// Smallest `c` with `e^{δN}/c ≤ Card(N) ≤ c e^{δN}` on the integer shells.
    pub c: f64,
    pub pass: bool,
    /// Set when `δ` is too small for the test to say anything.
    pub degenerate: bool,
    pub worst_shell: f64,
}

pub fn regular_growth_check(t: &OrbitTable, delta: f64, cap: f64) -> RegularGrowth {
    if delta < 0.05 {
        return RegularGrowth {
            c: f64::NAN,
            pass: false,
            degenerate: true,
            worst_shell: f64::NAN,
        };
    }
    let (c, worst_shell) = two_sided_constant(&t.displacements(), t.radius, delta, 0);
    RegularGrowth {
        c,
        pass: c < cap,
        degenerate: false,
        worst_shell,
    }
}

/// `max_N max(Card(N) e^{−κN}, e^{κN}/Card(N))` over integer `N ≥ from`.
fn two_sided_constant(ds: &[f64], radius: f64, kappa: f64, from: usize) -> (f64, f64) {
    let mut c: f64 = 1.0;
    let mut worst = 0.0;
    for n in from..=(radius + 1e-9).floor() as usize {
        let nf = n as f64;
        let card = ds.partition_point(|d| *d <= nf + 1e-9).max(1) as f64;
        let r = (card * (-kappa * nf).exp()).max((kappa * nf).exp() / card);
        if r > c {
            c = r;
            worst = nf;
        }
    }
    (c, worst)
}

/// A subgroup recognisable inside an orbit table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Subgroup {
    Trivial,
    Whole,
    Cyclic { word: String },
}

/// One representative of minimal displacement for every coset `Hγ` meeting
/// the table, sorted by `(d, word)`.
///
/// For cyclic `H = ⟨h⟩` the minimum over `h^k γ` is exhaustive: the search in
/// each direction stops once `d(x₀, h^k x₀) − d(x₀, γx₀)` exceeds the best
/// displacement found, since that difference bounds `d(x₀, h^k γ x₀)` below.
pub fn coset_reps_min_displacement(g: &GroupSpec, h: &Subgroup, t: &OrbitTable) -> Result<Vec<OrbitEntry>> {
    match h {
        Subgroup::Trivial => Ok(t.entries.clone()),
        Subgroup::Whole => Ok(vec![identity_entry()]),
        Subgroup::Cyclic { word } => cyclic_coset_reps(g, word, &t.entries, &t.basepoint),
    }
}

fn identity_entry() -> OrbitEntry {
    OrbitEntry {
        word: String::new(),
        g: Isometry::identity(),
        d: 0.0,
    }
}

fn cyclic_coset_reps(g: &GroupSpec, word: &str, elements: &[OrbitEntry], x0: &Point) -> Result<Vec<OrbitEntry>> {
    let word = reduce_word(word);
    let h = g.element(&word)?;
    if matches!(
        h.classify(),
        crate::hyperbolic::Classification::Identity | crate::hyperbolic::Classification::Elliptic
    ) {
        return Err(Error::Group(format!("`{word}` does not generate an infinite cyclic subgroup")));
    }
    let dirs = [(h, word.clone()), (h.inverse(), invert_word(&word))];
    let mut reps: HashMap<[i64; 4], OrbitEntry> = HashMap::new();
    for e in elements {
        let mut best = e.clone();
        for (step, step_word) in &dirs {
            let mut cur = e.g;
            let mut power = Isometry::identity();
            let mut prefix = String::new();
            loop {
                cur = *step * cur;
                power = *step * power;
                prefix.push_str(step_word);
                let lower = dist(x0, &power.apply(x0)) - e.d;
                if lower > best.d + 1e-12 {
                    break;
                }
                let d = dist(x0, &cur.apply(x0));
                let w = reduce_word(&format!("{prefix}{}", e.word));
                if d < best.d - 1e-12 || ((d - best.d).abs() <= 1e-12 && w < best.word) {
                    best = OrbitEntry { word: w, g: cur, d };
                }
            }
        }
        let key = best.g.quantized_key(DEDUP_QUANTUM);
        reps.entry(key).or_insert(best);
    }
    let mut out: Vec<OrbitEntry> = reps.into_values().collect();
    out.sort_by(|a, b| a.d.total_cmp(&b.d).then_with(|| a.word.cmp(&b.word)));
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeGrowth {
    pub exponent: f64,
    pub stderr: f64,
    /// Smallest constant realising both exponential bounds on integer shells.
    pub c2: f64,
    pub reps: usize,
}

/// Growth of the coset representatives of `small` inside `big`.
pub fn relative_growth(g: &GroupSpec, small: &Subgroup, big: &Subgroup, t: &OrbitTable) -> Result<RelativeGrowth> {
    if small == big {
        return Ok(RelativeGrowth {
            exponent: 0.0,
            stderr: 0.0,
            c2: 1.0,
            reps: 1,
        });
    }
    let big_elements: Vec<OrbitEntry> = match big {
        Subgroup::Whole => t.entries.clone(),
        Subgroup::Trivial => vec![identity_entry()],
        Subgroup::Cyclic { word } => cyclic_elements(g, word, t)?,
    };
    let reps = match small {
        Subgroup::Trivial => big_elements,
        Subgroup::Whole => {
            return Err(Error::Group("the whole group is not contained in a proper subgroup".into()))
        }
        Subgroup::Cyclic { word } => cyclic_coset_reps(g, word, &big_elements, &t.basepoint)?,
    };
    if reps.len() < MIN_COSET_REPS {
        return Err(Error::Insufficient(format!(
            "{} coset representatives (need at least {MIN_COSET_REPS})",
            reps.len()
        )));
    }
    let ds: Vec<f64> = reps.iter().map(|e| e.d).collect();
    let (fit, _) = growth_fit(&ds, t.radius, 1.0)?;
    let (c2, _) = two_sided_constant(&ds, t.radius, fit.slope, 1);
    Ok(RelativeGrowth {
        exponent: fit.slope,
        stderr: fit.slope_stderr,
        c2,
        reps: reps.len(),
    })
}

/// Powers of `h` within the table radius.
fn cyclic_elements(g: &GroupSpec, word: &str, t: &OrbitTable) -> Result<Vec<OrbitEntry>> {
    let word = reduce_word(word);
    let h = g.element(&word)?;
    let x0 = t.basepoint;
    let mut out = vec![identity_entry()];
    for (step, step_word) in [(h, word.clone()), (h.inverse(), invert_word(&word))] {
        let mut cur = Isometry::identity();
        let mut w = String::new();
        loop {
            cur = step * cur;
            w.push_str(&step_word);
            let d = dist(&x0, &cur.apply(&x0));
            if d > t.radius + 1e-9 {
                break;
            }
            out.push(OrbitEntry {
                word: w.clone(),
                g: cur,
                d,
            });
        }
    }
    out.sort_by(|a, b| a.d.total_cmp(&b.d).then_with(|| a.word.cmp(&b.word)));
    Ok(out)
}
