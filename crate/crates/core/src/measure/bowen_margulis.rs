use rand::distributions::{Distribution, WeightedIndex};
use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{AtomicMeasure, PattersonDensity};
use crate::error::{Error, Result};
use crate::hyperbolic::{visual_dist, BoundaryPoint, HopfCoords, Isometry, UnitTangent, BOUNDARY_EQ_TOL};

/// Samples per independent random stream; fixes the work split so results do
/// not depend on the number of threads.
const CHUNK: usize = 4096;

/// Radon–Nikodym factor `d_{x₀}(ξ₋, ξ₊)^{−2δ}` of the Bowen–Margulis measure
/// against `μ̂ ⊗ μ̂ ⊗ dt`.
pub fn bm_density(p: &PattersonDensity, h: &HopfCoords) -> Result<f64> {
    if h.minus.approx_eq(&h.plus) {
        return Err(Error::Degenerate("coincident endpoints".into()));
    }
    Ok(visual_dist(&p.basepoint, &h.minus, &h.plus).powf(-2.0 * p.delta))
}

/// Importance sample of the Bowen–Margulis measure restricted to Hopf times
/// in a window.
#[derive(Clone, Debug)]
pub struct BmSample {
    /// Weighted tangents; `Σ weight·f` estimates `∫ f dm̂_BM` over the window.
    pub measure: AtomicMeasure<UnitTangent>,
    /// Patterson atom index of each sample's backward endpoint.
    pub minus: Vec<u32>,
    /// Patterson atom index of each sample's forward endpoint.
    pub plus: Vec<u32>,
    pub t: Vec<f64>,
    pub window: (f64, f64),
}

impl BmSample {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Separation shells around an atom, as angular offsets in `[0, 2π)` seen
/// from the basepoint. Shell `j` covers offsets `[lo_j, hi_j)` and carries
/// the bound `sin(min |Δθ| / 2)^{−2δ}` of the kernel `d^{−2δ}` on it; the
/// bound is within a factor `2^{2δ}` of the kernel. Offsets closer than the
/// boundary tolerance to zero (coincident atoms) are in no shell.
struct Shells {
    lo: Vec<f64>,
    hi: Vec<f64>,
    bound: Vec<f64>,
}

/// Shells with at most this many atoms are summed directly rather than by
/// prefix differences, which lose the small weights next to a heavy prefix.
const DIRECT_SUM_MAX: usize = 64;

impl Shells {
    fn new(delta: f64) -> Self {
        let m = (PI / BOUNDARY_EQ_TOL).log2().ceil() as i32;
        let mut edges: Vec<f64> = (1..=m).map(|i| PI * 2f64.powi(i - m)).collect();
        edges.insert(0, BOUNDARY_EQ_TOL);
        let (mut lo, mut hi, mut bound) = (Vec::new(), Vec::new(), Vec::new());
        for e in edges.windows(2) {
            let b = (0.5 * e[0]).sin().powf(-2.0 * delta);
            lo.extend([e[0], TAU - e[1]]);
            hi.extend([e[1], TAU - e[0]]);
            bound.extend([b, b]);
        }
        Shells { lo, hi, bound }
    }
}

/// Atoms in angular order as seen from the basepoint, doubled once around
/// the circle so every shell is a contiguous index range.
struct Ring {
    theta: Vec<f64>,
    weight: Vec<f64>,
    index: Vec<u32>,
    prefix: Vec<f64>,
}

impl Ring {
    fn new(p: &PattersonDensity) -> Self {
        let x0 = p.basepoint;
        let to_i = Isometry::axial(-x0.y.ln()) * Isometry::translation(-x0.x);
        let mut order: Vec<(f64, u32)> = (0..p.len())
            .map(|k| {
                let (u, v) = p.homogeneous(k);
                let (u, v) = to_i.apply_homogeneous(u, v);
                (BoundaryPoint::from_homogeneous(u, v).theta(), k as u32)
            })
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = order.len();
        let mut theta = Vec::with_capacity(2 * n);
        let mut index = Vec::with_capacity(2 * n);
        for lap in [0.0, TAU] {
            for (t, k) in &order {
                theta.push(t + lap);
                index.push(*k);
            }
        }
        let weight: Vec<f64> = index.iter().map(|&k| p.weights()[k as usize]).collect();
        let mut prefix = Vec::with_capacity(2 * n + 1);
        let mut acc = 0.0;
        prefix.push(acc);
        for w in &weight {
            acc += w;
            prefix.push(acc);
        }
        Ring {
            theta,
            weight,
            index,
            prefix,
        }
    }

    fn range(&self, from: f64, to: f64) -> (usize, usize) {
        (
            self.theta.partition_point(|t| *t < from),
            self.theta.partition_point(|t| *t < to),
        )
    }

    fn mass(&self, (a, b): (usize, usize)) -> f64 {
        if b - a <= DIRECT_SUM_MAX {
            self.weight[a..b].iter().sum()
        } else {
            (self.prefix[b] - self.prefix[a]).max(0.0)
        }
    }

    /// Position in `[a, b)` drawn proportionally to the weights.
    fn pick(&self, (a, b): (usize, usize), rng: &mut ChaCha8Rng) -> usize {
        if b - a <= DIRECT_SUM_MAX {
            let total: f64 = self.weight[a..b].iter().sum();
            let mut u = rng.gen::<f64>() * total;
            for k in a..b {
                u -= self.weight[k];
                if u < 0.0 {
                    return k;
                }
            }
            b - 1
        } else {
            let u = self.prefix[a] + rng.gen::<f64>() * (self.prefix[b] - self.prefix[a]);
            (self.prefix[a + 1..=b].partition_point(|s| *s <= u) + a).min(b - 1)
        }
    }
}

/// Non-empty shells of one atom: shell index and running total of
/// `mass × bound`.
type Row = Vec<(u16, f64)>;

/// Share of draws taken from the plain product proposal `μ̂ ⊗ μ̂`.
const PRODUCT_SHARE: f64 = 0.5;

/// Draws `(ξ₋, ξ₊, t)` from a defensive mixture of two proposals on pairs of
/// distinct atoms, with `t` uniform in the window:
///
/// * the product `μ̂ ⊗ μ̂`, which covers geodesics passing near `x₀`;
/// * a shell proposal following `μ̂ ⊗ μ̂ · d^{−2δ}` up to the shell bound:
///   `ξ₋ = a` with probability `∝ μ̂(a) M(a)`, where `M(a)` sums shell mass
///   times shell bound, then a shell around `a`, then `ξ₊` within the shell
///   `∝ μ̂`. It covers the nearly-coincident pairs that carry most of the
///   mass of a time window.
///
/// Each sample is weighted against the mixture density, so weights stay
/// bounded by both `(t₁ − t₀) Z² d^{−2δ} / (nα)` and a constant times the
/// shell weight. Coincident atoms are never paired.
///
/// Streams are ChaCha8 with the stream id set to the chunk index, so the
/// output is a function of `seed` alone.
pub fn bm_sample(p: &PattersonDensity, n: usize, window: (f64, f64), seed: u64) -> Result<BmSample> {
    let (t0, t1) = window;
    if n == 0 {
        return Err(Error::Degenerate("sample size must be positive".into()));
    }
    if !(t1 > t0) {
        return Err(Error::Degenerate(format!("empty time window [{t0}, {t1}]")));
    }
    let shells = Shells::new(p.delta);
    let ring = Ring::new(p);
    let count = p.len();
    // Row and plain shell mass of the atom at ring position `r < count`.
    let rows: Vec<(Row, f64)> = (0..count)
        .into_par_iter()
        .map(|r| {
            let th = ring.theta[r];
            let (mut acc, mut plain) = (0.0, 0.0);
            let mut row = Row::new();
            for j in 0..shells.lo.len() {
                let m = ring.mass(ring.range(th + shells.lo[j], th + shells.hi[j]));
                if m > 0.0 {
                    acc += m * shells.bound[j];
                    plain += m;
                    row.push((j as u16, acc));
                }
            }
            (row, plain)
        })
        .collect();
    let outer: Vec<f64> = (0..count)
        .map(|r| ring.weight[r] * rows[r].0.last().map_or(0.0, |e| e.1))
        .collect();
    let shell_total: f64 = outer.iter().sum();
    let pair_total: f64 = (0..count).map(|r| ring.weight[r] * rows[r].1).sum();
    if !(shell_total > 0.0) || !shell_total.is_finite() || !(pair_total > 0.0) {
        return Err(Error::EmptyMeasure(
            "Patterson measure is a single point mass; no pairs of distinct endpoints".into(),
        ));
    }
    let by_shell = WeightedIndex::new(&outer)
        .map_err(|e| Error::EmptyMeasure(format!("cannot sample Patterson weights: {e}")))?;
    let by_mass = WeightedIndex::new(&ring.weight[..count])
        .map_err(|e| Error::EmptyMeasure(format!("cannot sample Patterson weights: {e}")))?;
    let mut position = vec![0usize; count];
    for r in 0..count {
        position[ring.index[r] as usize] = r;
    }
    let mut by_offset: Vec<usize> = (0..shells.lo.len()).collect();
    by_offset.sort_by(|a, b| shells.lo[*a].total_cmp(&shells.lo[*b]));
    // Shell of the pair at ring positions `(r, q)`, with the same float
    // expressions as the shell ranges.
    let shell_of = |r: usize, q: usize| -> Option<usize> {
        let (th, tq) = (ring.theta[r], ring.theta[q]);
        let k = by_offset.partition_point(|&j| th + shells.lo[j] <= tq);
        let j = by_offset[k.checked_sub(1)?];
        (tq < th + shells.hi[j]).then_some(j)
    };
    let scale = (t1 - t0) / n as f64;

    let chunks: Vec<Vec<(u32, u32, f64, UnitTangent, f64)>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            let mut out = Vec::with_capacity(len);
            while out.len() < len {
                let (r, q, j) = if rng.gen::<f64>() < PRODUCT_SHARE {
                    let r = by_mass.sample(&mut rng);
                    let mut q = position[ring.index[by_mass.sample(&mut rng)] as usize];
                    if ring.theta[q] < ring.theta[r] {
                        q += count;
                    }
                    match shell_of(r, q) {
                        Some(j) => (r, q, j),
                        None => continue,
                    }
                } else {
                    let r = by_shell.sample(&mut rng);
                    let row = &rows[r].0;
                    let u = rng.gen::<f64>() * row.last().expect("sampled rows are non-empty").1;
                    let j = row[row.partition_point(|e| e.1 <= u).min(row.len() - 1)].0 as usize;
                    let th = ring.theta[r];
                    (r, ring.pick(ring.range(th + shells.lo[j], th + shells.hi[j]), &mut rng), j)
                };
                let (i, k) = (ring.index[r] as usize, ring.index[q] as usize);
                let h = HopfCoords {
                    minus: p.atoms()[i],
                    plus: p.atoms()[k],
                    t: t0 + rng.gen::<f64>() * (t1 - t0),
                };
                let v = UnitTangent::from_hopf(&h, &p.basepoint).expect("shells exclude coincident atoms");
                let density = PRODUCT_SHARE / pair_total + (1.0 - PRODUCT_SHARE) * shells.bound[j] / shell_total;
                let w = scale * bm_density(p, &h).expect("shells exclude coincident atoms") / density;
                out.push((i as u32, k as u32, h.t, v, w));
            }
            out
        })
        .collect();

    let mut atoms = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut minus = Vec::with_capacity(n);
    let mut plus = Vec::with_capacity(n);
    let mut ts = Vec::with_capacity(n);
    for (i, j, t, v, w) in chunks.into_iter().flatten() {
        minus.push(i);
        plus.push(j);
        ts.push(t);
        atoms.push(v);
        weights.push(w);
    }
    Ok(BmSample {
        measure: AtomicMeasure::new(atoms, weights)?,
        minus,
        plus,
        t: ts,
        window,
    })
}
