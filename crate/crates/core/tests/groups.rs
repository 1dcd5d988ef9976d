//! Orbit enumeration and growth statistics against brute-force oracles.

use std::collections::HashSet;

use skinlab::group::{
    coset_reps_min_displacement, critical_exponent, enumerate_orbit, invert_word, poincare_series,
    reduce_word, regular_growth_check, relative_growth, GroupSpec, Subgroup, DEDUP_QUANTUM,
};
use skinlab::hyperbolic::{dist, Isometry, Point};
use skinlab::measure::{default_s_offset, patterson_approx};

fn i() -> Point {
    Point::new(0.0, 1.0).unwrap()
}

/// Same group element up to rounding. Quantized keys are unsuitable as an
/// oracle: two products of the same word in a different order can straddle a
/// quantum boundary.
fn same(a: &Isometry, b: &Isometry) -> bool {
    let scale = 1.0 + a.entries().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    a.canonical().max_abs_diff(&b.canonical()) < 1e-9 * scale
}

/// All reduced words up to `len` letters over `a, b, A, B`.
fn reduced_words(len: usize) -> Vec<String> {
    let letters = ['a', 'b', 'A', 'B'];
    let inverse = |c: char| if c.is_lowercase() { c.to_ascii_uppercase() } else { c.to_ascii_lowercase() };
    let mut out = vec![String::new()];
    let mut frontier = vec![String::new()];
    for _ in 0..len {
        let mut next = Vec::new();
        for w in &frontier {
            for &c in &letters {
                if w.chars().last().is_some_and(|l| l == inverse(c)) {
                    continue;
                }
                let mut v = w.clone();
                v.push(c);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

#[test]
fn schottky_table_contains_every_short_word_in_range() {
    let g = GroupSpec::symmetric_schottky(2.2).unwrap();
    let radius = 9.0;
    let t = enumerate_orbit(&g, &i(), radius).unwrap();
    let keys: HashSet<[i64; 4]> = t.entries.iter().map(|e| e.g.canonical().quantized_key(DEDUP_QUANTUM)).collect();
    assert_eq!(keys.len(), t.len(), "duplicate elements");
    let mut expected = 0;
    for w in reduced_words(7) {
        let m = g.element(&w).unwrap();
        let d = dist(&i(), &m.apply(&i()));
        if d <= radius {
            expected += 1;
            let hit = t.entries.iter().any(|e| (e.d - d).abs() < 1e-8 && same(&e.g, &m));
            assert!(hit, "missing {w}");
        }
    }
    // Words of eight letters already move i beyond the radius, so the brute
    // force count is complete.
    assert!(reduced_words(8)
        .iter()
        .filter(|w| w.len() == 8)
        .all(|w| dist(&i(), &g.element(w).unwrap().apply(&i())) > radius));
    assert_eq!(t.len(), expected);
}

#[test]
fn table_is_sorted_closed_under_inverse_and_counts_monotone() {
    let g = GroupSpec::gamma2();
    let t = enumerate_orbit(&g, &i(), 8.0).unwrap();
    assert!(t.entries.windows(2).all(|p| p[0].d <= p[1].d));
    assert_eq!(t.entries[0].d, 0.0);
    let keys: HashSet<[i64; 4]> = t.entries.iter().map(|e| e.g.canonical().quantized_key(DEDUP_QUANTUM)).collect();
    for e in &t.entries {
        assert!(keys.contains(&e.g.inverse().canonical().quantized_key(DEDUP_QUANTUM)));
        assert_eq!(reduce_word(&e.word), e.word);
        assert_eq!(invert_word(&invert_word(&e.word)), e.word);
    }
    let counts: Vec<usize> = (0..=8).map(|n| t.count_within(n as f64)).collect();
    assert!(counts.windows(2).all(|p| p[0] <= p[1]));
}

#[test]
fn schottky_exponent_is_stable_under_radius_increase() {
    let g = GroupSpec::symmetric_schottky(2.2).unwrap();
    let a = critical_exponent(&enumerate_orbit(&g, &i(), 14.0).unwrap()).unwrap();
    let b = critical_exponent(&enumerate_orbit(&g, &i(), 16.0).unwrap()).unwrap();
    let se = a.stderr.max(b.stderr);
    assert!((a.delta - b.delta).abs() <= 3.0 * se, "{a:?} {b:?}");
    // Frozen after the first run at radius 14.
    assert!((a.delta - 0.6574).abs() < 5e-4, "δ̂ = {}", a.delta);
}

#[test]
fn parabolic_cyclic_group_has_exponent_one_half_and_regular_growth() {
    let g = GroupSpec::cyclic("p", Isometry::new(1.0, 2.0, 0.0, 1.0).unwrap()).unwrap();
    let t = enumerate_orbit(&g, &i(), 16.0).unwrap();
    let ce = critical_exponent(&t).unwrap();
    assert!((ce.delta - 0.5).abs() < 0.05, "δ̂ = {}", ce.delta);
    let rg = regular_growth_check(&t, ce.delta, 50.0);
    assert!(rg.pass && !rg.degenerate, "{rg:?}");
}

#[test]
fn schottky_has_regular_growth() {
    let g = GroupSpec::symmetric_schottky(2.2).unwrap();
    let t = enumerate_orbit(&g, &i(), 14.0).unwrap();
    let ce = critical_exponent(&t).unwrap();
    assert!(regular_growth_check(&t, ce.delta, 50.0).pass);
}

#[test]
fn poincare_series_decreases_and_is_stable_under_refinement() {
    let g = GroupSpec::symmetric_schottky(2.2).unwrap();
    let small = enumerate_orbit(&g, &i(), 12.0).unwrap();
    let big = enumerate_orbit(&g, &i(), 14.0).unwrap();
    let delta = critical_exponent(&big).unwrap().delta;
    let s = delta + 0.2;
    let (a, b) = (poincare_series(&small, s).unwrap(), poincare_series(&big, s).unwrap());
    assert!(poincare_series(&big, s + 0.1).unwrap().value < b.value);
    assert!((a.value - b.value).abs() <= a.tail_bound.max(b.tail_bound), "{a:?} {b:?}");
}

#[test]
fn coset_representatives_minimise_displacement_exhaustively() {
    let g = GroupSpec::symmetric_schottky(2.2).unwrap();
    let t = enumerate_orbit(&g, &i(), 11.0).unwrap();
    let h = Subgroup::Cyclic { word: "a".into() };
    let reps = coset_reps_min_displacement(&g, &h, &t).unwrap();
    let a = g.element("a").unwrap();

    // Oracle: every table element is a^k·rep for one representative, and no
    // a^k·rep in a wide window beats the representative.
    let mut covered = 0;
    for e in &t.entries {
        let mut found = false;
        let mut p = Isometry::identity();
        for _ in 0..=12 {
            for m in [p, p.inverse()] {
                let x = m.inverse().compose(&e.g);
                let d = dist(&i(), &x.apply(&i()));
                found |= reps.iter().any(|r| (r.d - d).abs() < 1e-8 && same(&r.g, &x));
            }
            p = p.compose(&a);
        }
        covered += usize::from(found);
    }
    assert_eq!(covered, t.len());
    for r in &reps {
        let mut p = Isometry::identity();
        for _ in 0..=12 {
            for m in [p, p.inverse()] {
                let d = dist(&i(), &m.compose(&r.g).apply(&i()));
                assert!(d >= r.d - 1e-9, "{} beaten by a power of a", r.word);
            }
            p = p.compose(&a);
        }
    }
    let b = reps.iter().find(|r| r.word == "b").expect("H·b is represented by b");
    assert!((b.d - dist(&i(), &g.element("b").unwrap().apply(&i()))).abs() < 1e-12);
}

#[test]
fn relative_growth_of_the_cusp_stabiliser() {
    let g = GroupSpec::gamma2();
    let t = enumerate_orbit(&g, &i(), 12.0).unwrap();
    let p = Subgroup::Cyclic { word: "a".into() };
    let rel = relative_growth(&g, &Subgroup::Trivial, &p, &t).unwrap();
    // Oracle: the exponent of the parabolic subgroup on its own.
    let alone = enumerate_orbit(&GroupSpec::cyclic("a", g.element("a").unwrap()).unwrap(), &i(), 12.0).unwrap();
    let direct = critical_exponent(&alone).unwrap();
    assert!((rel.exponent - direct.delta).abs() < 3.0 * (rel.stderr + direct.stderr).max(0.01), "{rel:?} {direct:?}");
    let same = relative_growth(&g, &p, &p, &t).unwrap();
    assert_eq!(same.exponent, 0.0);
}

#[test]
fn schottky_patterson_mass_lies_in_the_ping_pong_arcs() {
    let g = GroupSpec::symmetric_schottky(2.2).unwrap();
    let t = enumerate_orbit(&g, &i(), 14.0).unwrap();
    let ce = critical_exponent(&t).unwrap();
    let p = patterson_approx(&t, ce.delta, ce.delta + default_s_offset(&ce), 10.0).unwrap();
    let arcs = g.ping_pong_arcs(&i()).unwrap();
    assert_eq!(arcs.len(), 4);
    let outside: f64 = p
        .measure
        .iter()
        .filter(|(xi, _)| !arcs.iter().any(|a| a.contains(xi, 0.0)))
        .map(|(_, w)| w)
        .sum();
    assert!(outside < 1e-6 * p.measure.total());
}
