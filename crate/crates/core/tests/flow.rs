//! Folding into the Dirichlet domain, transport of the skinning measure and
//! the test function `φ_η`.

use std::f64::consts::TAU;
use std::sync::OnceLock;

use proptest::prelude::*;
use skinlab::flow::{phi_eta_eval, phi_integral_check, transport_measure, DirichletDomain, TestFunction};
use skinlab::group::{critical_exponent, enumerate_orbit, Arc, GroupSpec};
use skinlab::hyperbolic::{dist, Action, ConvexBody, Isometry, Point, UnitTangent};
use skinlab::measure::{default_s_offset, patterson_approx, skinning_measure, PattersonDensity, SkinningMeasure};

fn i() -> Point {
    Point::new(0.0, 1.0).unwrap()
}

struct Fixture {
    group: GroupSpec,
    patterson: PattersonDensity,
    domain: DirichletDomain,
    skinning: SkinningMeasure,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let group = GroupSpec::symmetric_schottky(2.2).unwrap();
        let table = enumerate_orbit(&group, &i(), 13.0).unwrap();
        let ce = critical_exponent(&table).unwrap();
        let patterson = patterson_approx(&table, ce.delta, ce.delta + default_s_offset(&ce), 8.0).unwrap();
        let domain = DirichletDomain::build(&table, 6.0).unwrap();
        let skinning = skinning_measure(&ConvexBody::ball(i(), 0.5).unwrap(), &patterson).unwrap();
        Fixture {
            group,
            patterson,
            domain,
            skinning,
        }
    })
}

fn everything() -> Vec<Arc> {
    vec![Arc { start: 0.0, len: TAU }]
}

fn near_tangent() -> impl Strategy<Value = UnitTangent> {
    (-0.5..0.5f64, -0.5..0.5f64, 0.0..TAU, 0.0..4.0f64)
        .prop_map(|(x, ly, a, s)| UnitTangent::new(Point::new(x, ly.exp()).unwrap(), a).flow(s))
}

const ETA: f64 = 0.1;
const R: f64 = 2.0;
const WIDE_ETA: f64 = 0.25;
const WIDE_R: f64 = 3.0;

/// `φ_η` with `η = 0.1`, `R = 2` and `Ω` everything.
fn base() -> &'static TestFunction {
    static F: OnceLock<TestFunction> = OnceLock::new();
    F.get_or_init(|| {
        let fx = fixture();
        TestFunction::new(&fx.skinning, everything(), ETA, R, &fx.patterson).unwrap()
    })
}

/// The base function with a wider flow window, then with a wider radius.
fn variants() -> &'static [TestFunction; 2] {
    static F: OnceLock<[TestFunction; 2]> = OnceLock::new();
    F.get_or_init(|| {
        let fx = fixture();
        let mk = |eta, r| TestFunction::new(&fx.skinning, everything(), eta, r, &fx.patterson).unwrap();
        [mk(WIDE_ETA, R), mk(ETA, WIDE_R)]
    })
}

/// Test functions of the pushed bodies `N_t C` with radius `e^{−t}R`.
fn pushed() -> &'static [(f64, TestFunction)] {
    static F: OnceLock<Vec<(f64, TestFunction)>> = OnceLock::new();
    F.get_or_init(|| {
        let fx = fixture();
        let p = &fx.patterson;
        [0.3, 0.9]
            .into_iter()
            .map(|t| {
                let sk = skinning_measure(&fx.skinning.body.neighbourhood(t).unwrap(), p).unwrap();
                (t, TestFunction::new(&sk, everything(), ETA, (-t).exp() * R, p).unwrap())
            })
            .collect()
    })
}

/// A vector of `V_{w,η,R}` for the `k`-th atom `w` of the base function:
/// leaf abscissa `x`, flow time `s`.
fn probe(k: usize, x: f64, s: f64) -> UnitTangent {
    let atoms = base().omega_atoms();
    let w = fixture().skinning.measure.atoms()[atoms[k % atoms.len()]];
    UnitTangent::from_frame(w.frame().compose(&Isometry::translation(x))).flow(s)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn folding_lands_in_the_domain_and_is_a_group_translate(v in near_tangent()) {
        let d = &fixture().domain;
        let f = d.fold(&v).unwrap();
        prop_assert!(d.contains(&f.vector.base()) || f.on_wall);
        prop_assert!(v.act(&f.gamma).separation(&f.vector) < 1e-9);
        // Folding only ever shortens the distance to the centre.
        prop_assert!(dist(&d.center, &f.vector.base()) <= dist(&d.center, &v.base()) + 1e-12);
    }

    #[test]
    fn folding_forgets_a_wall_translation(v in near_tangent(), k in 0usize..1000) {
        let d = &fixture().domain;
        let walls = d.wall_elements();
        let g = walls[k % walls.len()];
        let a = d.fold(&v).unwrap();
        let b = d.fold(&v.act(&g)).unwrap();
        prop_assume!(!a.on_wall && !b.on_wall);
        prop_assert!(a.vector.separation(&b.vector) < 1e-8, "{:?} vs {:?}", a.vector, b.vector);
    }

    /// `φ_{N_t C, η, e^{−t}R}(g^t v) = e^{δt} φ_{C,η,R}(v)`.
    #[test]
    fn phi_scales_under_the_flow(k in 0usize..10_000, x in -2.5..2.5f64, s in -0.15..0.15f64, which in 0usize..2) {
        let p = &fixture().patterson;
        let (t, ft) = &pushed()[which];
        let v = probe(k, x, s);
        let a = phi_eta_eval(base(), p, &v);
        let b = phi_eta_eval(ft, p, &v.flow(*t));
        prop_assert!((b - (p.delta * t).exp() * a).abs() <= 1e-9 * b.abs().max(1e-300), "{a} {b}");
    }

    /// Widening the flow window keeps the support and rescales by `η/η′`.
    #[test]
    fn phi_rescales_with_eta(k in 0usize..10_000, x in -2.5..2.5f64, s in -0.15..0.15f64) {
        let p = &fixture().patterson;
        let v = probe(k, x, s);
        let (a, b) = (phi_eta_eval(base(), p, &v), phi_eta_eval(&variants()[0], p, &v));
        if a > 0.0 {
            prop_assert!((b * WIDE_ETA - a * ETA).abs() <= 1e-12 * a);
        }
        if s.abs() < ETA && x.abs() < R {
            prop_assert!(a > 0.0);
        }
    }

    /// A larger strong stable radius only adds support.
    #[test]
    fn phi_support_grows_with_r(k in 0usize..10_000, x in -3.0..3.0f64, s in -0.09..0.09f64) {
        let p = &fixture().patterson;
        let v = probe(k, x, s);
        prop_assert_eq!(phi_eta_eval(base(), p, &v) > 0.0, x.abs() < R);
        if x.abs() < R {
            prop_assert!(phi_eta_eval(&variants()[1], p, &v) > 0.0);
        }
    }
}

#[test]
fn transport_is_a_flow_on_the_quotient() {
    let fx = fixture();
    let sigma = &fx.skinning.measure;
    let (s, t) = (1.3, 1.7);
    let once = transport_measure(sigma, s + t, &fx.domain, None).unwrap();
    let twice = transport_measure(&transport_measure(sigma, s, &fx.domain, None).unwrap(), t, &fx.domain, None).unwrap();
    assert_eq!(once.len(), sigma.len());
    let mut agree = 0;
    for (a, b) in once.atoms().iter().zip(twice.atoms()) {
        // The two paths may reach the same vector through different walls;
        // compare their folds of the other path's result.
        let fa = fx.domain.fold(a).unwrap().vector;
        let fb = fx.domain.fold(b).unwrap().vector;
        agree += usize::from(fa.separation(&fb) < 1e-7);
    }
    assert_eq!(agree, once.len(), "{} of {} atoms disagree", once.len() - agree, once.len());
}

#[test]
fn transport_scales_the_mass() {
    let fx = fixture();
    let sigma = &fx.skinning.measure;
    for t in [0.0, 0.5, 2.0, 3.5] {
        let m = transport_measure(sigma, t, &fx.domain, Some(fx.patterson.delta)).unwrap();
        assert_eq!(m.len(), sigma.len());
        let expected = (fx.patterson.delta * t).exp() * sigma.total();
        assert!((m.total() / expected - 1.0).abs() < 1e-12);
        let plain = transport_measure(sigma, t, &fx.domain, None).unwrap();
        assert_eq!(plain.weights(), sigma.weights());
        assert!(plain.atoms().iter().all(|v| fx.domain.contains(&v.base()) || fx.domain.fold(v).unwrap().on_wall));
    }
    assert!(transport_measure(sigma, -1.0, &fx.domain, None).is_err());
}

#[test]
fn transport_past_the_fold_cap_is_refused() {
    let fx = fixture();
    let t = fx.domain.fold_cap + 5.0;
    assert!(transport_measure(&fx.skinning.measure, t, &fx.domain, None).is_err());
}

/// The symmetric group and a ball centred at `i` share the quarter-turn
/// symmetry about `i`, so opposite ping-pong arcs carry half the mass.
#[test]
fn omega_mass_is_additive_and_symmetric() {
    let fx = fixture();
    let p = &fx.patterson;
    let arcs = fx.group.ping_pong_arcs(&i()).unwrap();
    let mass = |omega: Vec<Arc>| TestFunction::new(&fx.skinning, omega, 0.1, 2.0, p).unwrap().omega_mass;
    let all = mass(everything());
    assert!((all - fx.skinning.total()).abs() < 1e-12 * all);
    let each: Vec<f64> = arcs.iter().map(|a| mass(vec![*a])).collect();
    assert!((each.iter().sum::<f64>() - all).abs() < 1e-12 * all);
    let half = mass(vec![arcs[0], arcs[2]]);
    assert!((half - 0.5 * all).abs() < 1e-9 * all, "{half} vs {all}");
    for m in &each {
        assert!((m - 0.25 * all).abs() < 1e-9 * all);
    }
}

#[test]
fn empty_omega_gives_a_zero_test_function() {
    let fx = fixture();
    let p = &fx.patterson;
    let f = TestFunction::new(&fx.skinning, Vec::new(), 0.1, 2.0, p).unwrap();
    assert_eq!(f.atom_count(), 0);
    assert_eq!(f.omega_mass, 0.0);
    let r = phi_integral_check(&f, p, 1000, 1).unwrap();
    assert_eq!((r.lhs, r.rhs, r.z_score()), (0.0, 0.0, 0.0));
    let v = fx.skinning.measure.atoms()[0];
    assert_eq!(phi_eta_eval(&f, p, &v), 0.0);
}

#[test]
fn test_function_rejects_bad_parameters() {
    let fx = fixture();
    let p = &fx.patterson;
    assert!(TestFunction::new(&fx.skinning, everything(), 0.0, 2.0, p).is_err());
    assert!(TestFunction::new(&fx.skinning, everything(), 0.1, -1.0, p).is_err());
}

/// On the normal itself `φ_η = h_{η,R} = 1/(2η μ^{ss}(V_R))`.
#[test]
fn phi_on_the_normals_is_the_cached_height() {
    let fx = fixture();
    let p = &fx.patterson;
    let f = base();
    assert!(f.support_window().1 > ETA);
    for (k, &a) in f.omega_atoms().iter().enumerate().step_by(97) {
        let w = fx.skinning.measure.atoms()[a];
        let h = phi_eta_eval(f, p, &w);
        assert!((h - f.h_values()[k]).abs() <= 1e-12 * h);
        let m = skinlab::measure::ss_ball_mass(&w, 2.0, p);
        assert!((h - 1.0 / (0.2 * m)).abs() <= 1e-9 * h);
    }
}
