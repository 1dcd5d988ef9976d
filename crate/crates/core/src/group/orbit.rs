use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{word_string, GroupSpec, HalfPlane};
use crate::error::{Error, Result};
use crate::hyperbolic::{dist, Isometry, Point};

pub const DEFAULT_RADIUS_CAP: f64 = 20.0;

/// Matrices closer than this (entrywise, canonical form) are the same element.
pub const DEDUP_QUANTUM: f64 = 1e-9;

const RADIUS_FUZZ: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitEntry {
    pub word: String,
    pub g: Isometry,
    pub d: f64,
}

/// All group elements moving the basepoint by at most `radius`, sorted by
/// `(d, word)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitTable {
    pub group: String,
    pub entries: Vec<OrbitEntry>,
    pub radius: f64,
    pub basepoint: Point,
    pub duplicates_dropped: usize,
    pub nodes_visited: usize,
}

impl OrbitTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `Card{γ : d(x₀, γx₀) ≤ r}`.
    pub fn count_within(&self, r: f64) -> usize {
        self.entries.partition_point(|e| e.d <= r)
    }

    pub fn displacements(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.d).collect()
    }
}

pub fn enumerate_orbit(g: &GroupSpec, x0: &Point, radius: f64) -> Result<OrbitTable> {
    enumerate_orbit_with_cap(g, x0, radius, DEFAULT_RADIUS_CAP)
}

/// Depth-first enumeration of reduced words.
///
/// A word `w·s` and all its extensions move `x₀` into the region
/// `w·D(s)`, where `D(s)` is the Dirichlet half-plane of the letter `s`.
/// Branches whose region lies farther than `radius` from `x₀` are pruned,
/// which is exact: no element within the radius is lost.
pub fn enumerate_orbit_with_cap(g: &GroupSpec, x0: &Point, radius: f64, cap: f64) -> Result<OrbitTable> {
    if !(radius >= 0.0) {
        return Err(Error::Degenerate(format!("orbit radius {radius} is negative")));
    }
    if radius > cap {
        return Err(Error::RadiusCap { radius, cap });
    }
    let planes = g.check_basepoint(x0)?;
    for (l, hp) in planes.iter().enumerate() {
        if hp.contains(x0) {
            return Err(Error::Group(format!(
                "basepoint lies inside the ping-pong half-plane of letter {}",
                super::letter_char(l)
            )));
        }
    }
    let letters: Vec<Isometry> = (0..g.letter_count()).map(|l| g.letter(l)).collect();
    let limit = radius + RADIUS_FUZZ;

    let shards: Vec<(Vec<OrbitEntry>, usize)> = (0..letters.len())
        .into_par_iter()
        .map(|first| explore(&letters, &planes, x0, limit, first))
        .collect();

    let mut nodes_visited = 1;
    let mut entries = vec![OrbitEntry {
        word: String::new(),
        g: Isometry::identity(),
        d: 0.0,
    }];
    for (mut e, n) in shards {
        nodes_visited += n;
        entries.append(&mut e);
    }
    entries.par_sort_by(|a, b| a.d.total_cmp(&b.d).then_with(|| a.word.cmp(&b.word)));

    let mut seen = HashSet::with_capacity(entries.len());
    let before = entries.len();
    entries.retain(|e| seen.insert(e.g.quantized_key(DEDUP_QUANTUM)));
    let duplicates_dropped = before - entries.len();
    if duplicates_dropped > 0 {
        log::warn!(
            "{}: dropped {duplicates_dropped} duplicate elements during orbit enumeration",
            g.name
        );
    }
    for e in &entries {
        if e.g.classify() == crate::hyperbolic::Classification::Elliptic {
            return Err(Error::Group(format!("elliptic element {} found in orbit", e.word)));
        }
    }
    log::debug!(
        "{}: {} elements within radius {radius} ({nodes_visited} nodes visited)",
        g.name,
        entries.len()
    );
    Ok(OrbitTable {
        group: g.name.clone(),
        entries,
        radius,
        basepoint: *x0,
        duplicates_dropped,
        nodes_visited,
    })
}

fn explore(
    letters: &[Isometry],
    planes: &[HalfPlane],
    x0: &Point,
    limit: f64,
    first: usize,
) -> (Vec<OrbitEntry>, usize) {
    let mut out = Vec::new();
    let mut visited = 0usize;
    // Stack of (depth, last letter, element); `word[..depth]` is the current
    // prefix. Parabolic chains get long, so the word is shared, not cloned.
    let mut word: Vec<usize> = Vec::new();
    let mut stack: Vec<(usize, usize, Isometry)> = Vec::new();
    if planes[first].dist_from_image(&Isometry::identity(), x0) <= limit {
        stack.push((0, first, letters[first]));
    }
    while let Some((depth, last, g)) = stack.pop() {
        visited += 1;
        word.truncate(depth);
        word.push(last);
        let d = dist(x0, &g.apply(x0));
        if d <= limit {
            out.push(OrbitEntry {
                word: word_string(&word),
                g,
                d,
            });
        }
        for (l, s) in letters.iter().enumerate() {
            if l == last ^ 1 {
                continue;
            }
            if planes[l].dist_from_image(&g, x0) > limit {
                continue;
            }
            stack.push((depth + 1, l, g * *s));
        }
    }
    (out, visited)
}
