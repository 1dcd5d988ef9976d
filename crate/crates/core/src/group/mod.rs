//! Discrete groups: specifications, ping-pong validation, orbit enumeration
//! and growth statistics.

mod growth;
mod orbit;

use std::f64::consts::{FRAC_PI_4, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::{dist, BoundaryPoint, Classification, Isometry, Point, UnitTangent};

pub use growth::{
    coset_reps_min_displacement, critical_exponent, critical_exponent_with_width, poincare_series,
    regular_growth_check, relative_growth, CriticalExponent, PoincareValue, RegularGrowth,
    RelativeGrowth, Subgroup,
};
pub use orbit::{enumerate_orbit, enumerate_orbit_with_cap, OrbitEntry, OrbitTable, DEDUP_QUANTUM, DEFAULT_RADIUS_CAP};

const TORSION_TRACE_TOL: f64 = 1e-10;
const SCHOTTKY_SEPARATION: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    /// Free group of hyperbolic generators in strict ping-pong position.
    Schottky,
    /// Torsion-free finite-index subgroup of PSL(2, Z) given by generators.
    ModularLike,
    /// A single hyperbolic or parabolic generator.
    Cyclic,
}

/// Dirichlet half-plane `{z : d(z, g·x₀) < d(z, x₀)}`, stored as a frame `M`
/// with the half-plane equal to `{Re(M⁻¹ z) > 0}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfPlane {
    pub frame: Isometry,
}

/// Closed counter-clockwise arc of the boundary circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub start: f64,
    pub len: f64,
}

impl Arc {
    pub fn contains(&self, xi: &BoundaryPoint, tol: f64) -> bool {
        let off = (xi.theta() - self.start).rem_euclid(TAU);
        off <= self.len + tol || off >= TAU - tol
    }

    /// Signed gap between two arcs; negative when they overlap.
    pub fn separation(&self, other: &Arc) -> f64 {
        let ab = (other.start - self.start).rem_euclid(TAU) - self.len;
        let ba = (self.start - other.start).rem_euclid(TAU) - other.len;
        ab.min(ba)
    }
}

impl HalfPlane {
    /// The Dirichlet half-plane of `g` at `x0`.
    pub fn dirichlet(g: &Isometry, x0: &Point) -> Result<Self> {
        let gx = g.apply(x0);
        let d = dist(x0, &gx);
        let mid = UnitTangent::toward_point(*x0, &gx)
            .map_err(|_| Error::Group(format!("element {g} fixes the basepoint")))?
            .flow(0.5 * d);
        for alpha in [FRAC_PI_4, -FRAC_PI_4] {
            let frame = mid.frame().compose(&Isometry::rotation(alpha));
            if frame.inverse().apply(&gx).x > 0.0 {
                return Ok(HalfPlane { frame });
            }
        }
        unreachable!("one of the two orientations contains g·x0")
    }

    pub fn boundary_arc(&self) -> Arc {
        let a = self.frame.apply(&BoundaryPoint::from_real(0.0)).theta();
        let b = self.frame.apply(&BoundaryPoint::infinity()).theta();
        Arc {
            start: a,
            len: (b - a).rem_euclid(TAU),
        }
    }

    /// Signed chart abscissa test; positive inside.
    pub fn contains(&self, p: &Point) -> bool {
        self.frame.inverse().apply(p).x > 0.0
    }

    /// Distance from `p` to the closed half-plane `g·H`.
    pub fn dist_from_image(&self, g: &Isometry, p: &Point) -> f64 {
        let y = g.compose(&self.frame).inverse().apply(p);
        if y.x >= 0.0 {
            0.0
        } else {
            (-y.x / y.y).asinh()
        }
    }
}

/// A concrete discrete group given by generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    pub kind: GroupKind,
    pub generators: Vec<Isometry>,
}

impl GroupSpec {
    pub fn new(name: impl Into<String>, kind: GroupKind, generators: Vec<Isometry>) -> Result<Self> {
        let g = GroupSpec {
            name: name.into(),
            kind,
            generators,
        };
        g.validate()?;
        Ok(g)
    }

    /// Rank-2 Schottky group whose generators translate by `ell` along two
    /// perpendicular axes through `i`: `(0, ∞)` and `(−1, 1)`.
    pub fn symmetric_schottky(ell: f64) -> Result<Self> {
        let a = Isometry::axial(ell);
        let k = Isometry::rotation(FRAC_PI_4);
        let b = k * a * k.inverse();
        Self::new(format!("schottky(l={ell})"), GroupKind::Schottky, vec![a, b])
    }

    /// The principal congruence subgroup Γ(2), generated by `z ↦ z + 2` and
    /// `z ↦ z/(2z + 1)`.
    pub fn gamma2() -> Self {
        Self::new(
            "gamma2",
            GroupKind::ModularLike,
            vec![
                Isometry::new(1.0, 2.0, 0.0, 1.0).expect("unimodular"),
                Isometry::new(1.0, 0.0, 2.0, 1.0).expect("unimodular"),
            ],
        )
        .expect("Γ(2) is a valid ping-pong group")
    }

    pub fn cyclic(name: impl Into<String>, g: Isometry) -> Result<Self> {
        Self::new(name, GroupKind::Cyclic, vec![g])
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    /// Generator or inverse for a letter index (`2k` is generator `k`,
    /// `2k + 1` its inverse).
    pub fn letter(&self, l: usize) -> Isometry {
        let g = self.generators[l / 2];
        if l % 2 == 0 {
            g
        } else {
            g.inverse()
        }
    }

    pub fn letter_count(&self) -> usize {
        2 * self.generators.len()
    }

    /// The group element spelled by `word` (`a`, `b`, … generators,
    /// upper case inverses; `e` or the empty string is the identity).
    pub fn element(&self, word: &str) -> Result<Isometry> {
        let mut g = Isometry::identity();
        for ch in word.chars().filter(|c| *c != 'e') {
            g = g * self.letter(letter_index(ch, self.rank())?);
        }
        Ok(g)
    }

    /// Dirichlet half-planes at `x0` for every letter, indexed like
    /// [`letter`](Self::letter).
    pub fn half_planes(&self, x0: &Point) -> Result<Vec<HalfPlane>> {
        (0..self.letter_count())
            .map(|l| HalfPlane::dirichlet(&self.letter(l), x0))
            .collect()
    }

    /// Boundary arcs of the ping-pong half-planes at `x0`.
    pub fn ping_pong_arcs(&self, x0: &Point) -> Result<Vec<Arc>> {
        Ok(self.half_planes(x0)?.iter().map(HalfPlane::boundary_arc).collect())
    }

    /// Checks that `x0` lies in the closed ping-pong region, outside every
    /// Dirichlet half-plane of the generators.
    pub fn check_basepoint(&self, x0: &Point) -> Result<Vec<HalfPlane>> {
        let hp = self.half_planes(x0)?;
        let arcs: Vec<Arc> = hp.iter().map(HalfPlane::boundary_arc).collect();
        self.check_arcs(&arcs)?;
        Ok(hp)
    }

    fn check_arcs(&self, arcs: &[Arc]) -> Result<()> {
        let min_sep = match self.kind {
            GroupKind::Schottky => SCHOTTKY_SEPARATION,
            GroupKind::ModularLike | GroupKind::Cyclic => -SCHOTTKY_SEPARATION,
        };
        for i in 0..arcs.len() {
            for j in i + 1..arcs.len() {
                let sep = arcs[i].separation(&arcs[j]);
                if sep <= min_sep {
                    return Err(Error::Group(format!(
                        "{}: ping-pong arcs of letters {} and {} are not disjoint (gap {sep:.3e})",
                        self.name,
                        letter_char(i),
                        letter_char(j)
                    )));
                }
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if self.generators.is_empty() {
            return Err(Error::Group(format!("{}: no generators", self.name)));
        }
        if self.generators.len() > 26 {
            return Err(Error::Group(format!("{}: at most 26 generators", self.name)));
        }
        for (k, g) in self.generators.iter().enumerate() {
            let class = g.classify();
            let ok = match self.kind {
                GroupKind::Schottky => class == Classification::Hyperbolic,
                GroupKind::Cyclic => {
                    matches!(class, Classification::Hyperbolic | Classification::Parabolic)
                }
                GroupKind::ModularLike => {
                    matches!(class, Classification::Hyperbolic | Classification::Parabolic)
                        && g.entries().iter().all(|x| (x - x.round()).abs() < 1e-9)
                }
            };
            if !ok {
                return Err(Error::Group(format!(
                    "{}: generator {} = {g} is not admissible ({class:?})",
                    self.name,
                    letter_char(2 * k)
                )));
            }
        }
        if self.kind == GroupKind::Cyclic && self.generators.len() != 1 {
            return Err(Error::Group(format!("{}: cyclic group needs one generator", self.name)));
        }
        self.check_torsion()?;
        self.check_arcs(&self.ping_pong_arcs(&Point::i())?)
    }

    /// Every reduced word of length at most 4 must be non-elliptic.
    fn check_torsion(&self) -> Result<()> {
        let n = self.letter_count();
        let mut frontier: Vec<(Vec<usize>, Isometry)> = vec![(Vec::new(), Isometry::identity())];
        for _ in 0..4 {
            let mut next = Vec::new();
            for (w, g) in &frontier {
                for l in 0..n {
                    if w.last().is_some_and(|&p| p ^ 1 == l) {
                        continue;
                    }
                    let h = *g * self.letter(l);
                    let mut w2 = w.clone();
                    w2.push(l);
                    if h.trace().abs() < 2.0 - TORSION_TRACE_TOL {
                        return Err(Error::Group(format!(
                            "{}: elliptic element {} (trace {:.6})",
                            self.name,
                            word_string(&w2),
                            h.trace()
                        )));
                    }
                    next.push((w2, h));
                }
            }
            frontier = next;
        }
        Ok(())
    }
}

pub(crate) fn letter_char(l: usize) -> char {
    let base = if l % 2 == 0 { b'a' } else { b'A' };
    (base + (l / 2) as u8) as char
}

pub(crate) fn letter_index(ch: char, rank: usize) -> Result<usize> {
    let (k, inv) = if ch.is_ascii_lowercase() {
        (ch as usize - 'a' as usize, 0)
    } else if ch.is_ascii_uppercase() {
        (ch as usize - 'A' as usize, 1)
    } else {
        return Err(Error::Group(format!("invalid letter `{ch}` in word")));
    };
    if k >= rank {
        return Err(Error::Group(format!("letter `{ch}` exceeds the rank {rank}")));
    }
    Ok(2 * k + inv)
}

pub(crate) fn word_string(w: &[usize]) -> String {
    w.iter().map(|&l| letter_char(l)).collect()
}

/// Free reduction of a word over `a..z` / `A..Z`.
pub fn reduce_word(word: &str) -> String {
    let mut out: Vec<char> = Vec::with_capacity(word.len());
    for ch in word.chars().filter(|c| *c != 'e') {
        match out.last() {
            Some(&p) if p != ch && p.eq_ignore_ascii_case(&ch) => {
                out.pop();
            }
            _ => out.push(ch),
        }
    }
    out.into_iter().collect()
}

/// Formal inverse of a word.
pub fn invert_word(word: &str) -> String {
    word.chars()
        .rev()
        .filter(|c| *c != 'e')
        .map(|c| {
            if c.is_ascii_lowercase() {
                c.to_ascii_uppercase()
            } else {
                c.to_ascii_lowercase()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_schottky_threshold() {
        assert!(GroupSpec::symmetric_schottky(1.7).is_err());
        let g = GroupSpec::symmetric_schottky(1.8).unwrap();
        assert_eq!(g.rank(), 2);
    }

    #[test]
    fn gamma2_arcs_are_tangent() {
        let g = GroupSpec::gamma2();
        let arcs = g.ping_pong_arcs(&Point::i()).unwrap();
        let mut seps: Vec<f64> = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                seps.push(arcs[i].separation(&arcs[j]));
            }
        }
        assert!(seps.iter().all(|s| *s > -1e-9));
        assert!(seps.iter().filter(|s| s.abs() < 1e-9).count() >= 4);
        // The arc of z ↦ z + 2 is the half-line (1, ∞).
        assert!(arcs[0].contains(&BoundaryPoint::from_real(1.5), 0.0));
        assert!(!arcs[0].contains(&BoundaryPoint::from_real(0.5), 0.0));
    }

    #[test]
    fn elliptic_products_are_rejected() {
        // Order-3 element of PSL(2, Z).
        let t = Isometry::new(0.0, -1.0, 1.0, 1.0).unwrap();
        let err = GroupSpec::new("bad", GroupKind::ModularLike, vec![t]).unwrap_err();
        assert!(err.to_string().contains("not admissible"));
        // Generators fine on their own, product ab elliptic.
        let a = Isometry::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let b = Isometry::new(1.0, 0.0, -1.0, 1.0).unwrap();
        let err = GroupSpec::new("bad", GroupKind::ModularLike, vec![a, b]).unwrap_err();
        assert!(err.to_string().contains("elliptic"));
    }

    #[test]
    fn words_and_reduction() {
        assert_eq!(reduce_word("abBAa"), "a");
        assert_eq!(reduce_word("aAbB"), "");
        assert_eq!(invert_word("abC"), "cBA");
        let g = GroupSpec::symmetric_schottky(2.0).unwrap();
        let w = g.element("abA").unwrap();
        let v = g.element(&invert_word("abA")).unwrap();
        assert_eq!((w * v).classify(), Classification::Identity);
        assert!(g.element("c").is_err());
    }

    #[test]
    fn dirichlet_half_plane_of_axial_map() {
        let hp = HalfPlane::dirichlet(&Isometry::axial(2.0), &Point::i()).unwrap();
        assert!(hp.contains(&Point::new(0.0, 3.0).unwrap()));
        assert!(!hp.contains(&Point::new(0.0, 2.5).unwrap()));
        let d = hp.dist_from_image(&Isometry::identity(), &Point::i());
        assert!((d - 1.0).abs() < 1e-12);
    }
}
