use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::group::{Arc, GroupKind, GroupSpec, Subgroup, DEFAULT_RADIUS_CAP};
use crate::hyperbolic::{BoundaryPoint, ConvexBody, Isometry, Point, UnitTangent};
use crate::measure::DEFAULT_HORIZON_GAP;

/// A boundary point of the upper half-plane written as a real number or the
/// string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coord(pub Option<f64>);

impl Coord {
    pub const INF: Coord = Coord(None);

    pub fn point(&self) -> BoundaryPoint {
        match self.0 {
            Some(x) => BoundaryPoint::from_real(x),
            None => BoundaryPoint::infinity(),
        }
    }
}

impl From<f64> for Coord {
    fn from(x: f64) -> Self {
        Coord(Some(x))
    }
}

impl Serialize for Coord {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Some(x) => s.serialize_f64(x),
            None => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Coord {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Coord;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a finite real number or \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, x: f64) -> std::result::Result<Coord, E> {
                if x.is_finite() {
                    Ok(Coord(Some(x)))
                } else {
                    Err(E::custom("boundary coordinate must be finite or \"inf\""))
                }
            }

            fn visit_i64<E: de::Error>(self, x: i64) -> std::result::Result<Coord, E> {
                Ok(Coord(Some(x as f64)))
            }

            fn visit_u64<E: de::Error>(self, x: u64) -> std::result::Result<Coord, E> {
                Ok(Coord(Some(x as f64)))
            }

            fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<Coord, E> {
                match s {
                    "inf" | "infinity" | "∞" => Ok(Coord::INF),
                    _ => Err(E::invalid_value(de::Unexpected::Str(s), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroupConfig {
    /// Two generators of translation length `ell` on perpendicular axes
    /// through `i`.
    SymmetricSchottky { ell: f64 },
    Gamma2,
    Cyclic {
        /// Matrix entries `[a, b, c, d]`.
        generator: [f64; 4],
    },
    Custom {
        name: String,
        group_kind: GroupKind,
        generators: Vec<[f64; 4]>,
    },
}

impl GroupConfig {
    pub fn build(&self) -> Result<GroupSpec> {
        let matrix = |m: &[f64; 4], key: String| {
            Isometry::new(m[0], m[1], m[2], m[3]).map_err(|e| Error::config(key, e.to_string()))
        };
        let wrap = |e: Error| Error::config("group", e.to_string());
        match self {
            GroupConfig::SymmetricSchottky { ell } => GroupSpec::symmetric_schottky(*ell).map_err(wrap),
            GroupConfig::Gamma2 => Ok(GroupSpec::gamma2()),
            GroupConfig::Cyclic { generator } => {
                GroupSpec::cyclic("cyclic", matrix(generator, "group.generator".into())?).map_err(wrap)
            }
            GroupConfig::Custom {
                name,
                group_kind,
                generators,
            } => {
                let gens = generators
                    .iter()
                    .enumerate()
                    .map(|(k, m)| matrix(m, format!("group.generators[{k}]")))
                    .collect::<Result<Vec<_>>>()?;
                GroupSpec::new(name.clone(), *group_kind, gens).map_err(wrap)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodyConfig {
    Geodesic {
        from: Coord,
        to: Coord,
        #[serde(default)]
        radius: f64,
    },
    Segment {
        start: [f64; 2],
        end: [f64; 2],
        #[serde(default)]
        radius: f64,
    },
    Horoball {
        center: Coord,
        through: [f64; 2],
    },
    Ball {
        center: [f64; 2],
        #[serde(default)]
        radius: f64,
    },
}

fn point(p: &[f64; 2], key: &str) -> Result<Point> {
    Point::new(p[0], p[1]).map_err(|e| Error::config(key, e.to_string()))
}

impl BodyConfig {
    pub fn build(&self) -> Result<ConvexBody> {
        let wrap = |e: Error| Error::config("body", e.to_string());
        match self {
            BodyConfig::Geodesic { from, to, radius } => {
                ConvexBody::geodesic_nbhd(from.point(), to.point(), *radius).map_err(wrap)
            }
            BodyConfig::Segment { start, end, radius } => {
                ConvexBody::segment_nbhd(point(start, "body.start")?, point(end, "body.end")?, *radius).map_err(wrap)
            }
            BodyConfig::Horoball { center, through } => {
                Ok(ConvexBody::horoball(center.point(), point(through, "body.through")?))
            }
            BodyConfig::Ball { center, radius } => {
                ConvexBody::ball(point(center, "body.center")?, *radius).map_err(wrap)
            }
        }
    }
}

/// Half-open boundary arc from `from` counter-clockwise to `to`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcConfig {
    pub from: Coord,
    pub to: Coord,
}

impl ArcConfig {
    pub fn arc(&self) -> Arc {
        let a = self.from.point().theta();
        let b = self.to.point().theta();
        Arc {
            start: a,
            len: (b - a).rem_euclid(std::f64::consts::TAU),
        }
    }
}

/// The piece `Ω` of the outer normal bundle, described by forward endpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OmegaConfig {
    /// Every skinning atom.
    All,
    Arcs(Vec<ArcConfig>),
    /// A fundamental piece for the cyclic stabiliser `⟨h⟩` of a geodesic
    /// body whose axis is the axis of `h`: the two arcs `[F(1), F(e^ℓ))` and
    /// `[F(−e^ℓ), F(−1))` in the frame `F` of the axis.
    StabilizerPiece { word: String },
}

impl OmegaConfig {
    pub fn arcs(&self, g: &GroupSpec) -> Result<Vec<Arc>> {
        match self {
            OmegaConfig::All => Ok(vec![Arc {
                start: 0.0,
                len: std::f64::consts::TAU,
            }]),
            OmegaConfig::Arcs(a) => Ok(a.iter().map(ArcConfig::arc).collect()),
            OmegaConfig::StabilizerPiece { word } => {
                let h = g.element(word).map_err(|e| Error::config("omega.stabilizer_piece.word", e.to_string()))?;
                stabilizer_piece(&h).map_err(|e| Error::config("omega.stabilizer_piece.word", e.to_string()))
            }
        }
    }
}

pub fn stabilizer_piece(h: &Isometry) -> Result<Vec<Arc>> {
    let ell = h.translation_length();
    let fixed = h.fixed_points();
    if fixed.len() != 2 || !(ell > 1e-9) {
        return Err(Error::Group(format!("{h} is not hyperbolic")));
    }
    let (plus, minus) = (fixed[0], fixed[1]);
    let f = UnitTangent::on_geodesic(&minus, &plus)?;
    let theta = |x: f64| f.frame().apply(&BoundaryPoint::from_real(x)).theta();
    let arc = |a: f64, b: f64| Arc {
        start: theta(a),
        len: (theta(b) - theta(a)).rem_euclid(std::f64::consts::TAU),
    };
    let e = ell.exp();
    Ok(vec![arc(1.0, e), arc(-e, -1.0)])
}

/// A box in the coordinates `(v₋, v₊, τ)` relative to the body, where `τ`
/// is the flow time from the stable horosphere through `π(f_C(v))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub minus: ArcConfig,
    pub plus: ArcConfig,
    pub t: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleConfig {
    /// Bowen–Margulis samples for the `∫φ_η dm_BM` check.
    pub phi: usize,
    /// Bowen–Margulis samples for the equidistribution reference.
    pub equidistribution: usize,
    pub disintegration: usize,
    pub bootstrap: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            phi: 1_000_000,
            equidistribution: 1_000_000,
            disintegration: 1_000_000,
            bootstrap: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservableConfig {
    pub count: usize,
    /// Hyperbolic radius of the position bump.
    pub radius: f64,
    /// Half-width of the direction bump, in radians.
    pub angle_width: f64,
    /// Clearance between a bump's support and the walls of the domain.
    pub margin: f64,
    pub holder_alpha: f64,
    pub holder_pairs: usize,
}

impl Default for ObservableConfig {
    fn default() -> Self {
        ObservableConfig {
            count: 8,
            radius: 0.5,
            angle_width: 1.5,
            margin: 0.05,
            holder_alpha: 1.0,
            holder_pairs: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CuspConfig {
    /// Word of the parabolic generator of `Γ_p`.
    pub parabolic: String,
    /// `Γ_{D_i} ∩ Γ_p` as a subgroup of `Γ_p`.
    pub intersection: Subgroup,
    /// Radius increment for the refinement oracle.
    pub refine_step: f64,
    pub min_atoms: usize,
}

impl Default for CuspConfig {
    fn default() -> Self {
        CuspConfig {
            parabolic: "a".into(),
            intersection: Subgroup::Trivial,
            refine_step: 2.0,
            min_atoms: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Per-atom tolerance of the exact measure identities.
    pub exact: f64,
    /// Monte-Carlo agreement, in standard errors.
    pub z_max: f64,
    /// `E_{t_max} < E_{t_ref} / equidist_ratio`.
    pub equidist_ratio: f64,
    pub equidist_ref_t: f64,
    /// Noise allowance for step-to-step increases, in standard errors.
    pub noise_sigma: f64,
    pub cusp_rel_tol: f64,
    pub delta_p_expected: f64,
    pub delta_p_tol: f64,
    pub delta_stability_sigma: f64,
    pub refinement_sigma: f64,
    pub regular_growth_cap: f64,
    pub equivariance_tv: f64,
    /// Tolerance on `2(δ_p − δ_{p,i}) ≤ 1`.
    pub codim_tol: f64,
    pub min_effective_samples: usize,
    /// Relative growth of `‖σ̂_C‖` allowed between orbit radii `R − 2` and `R`.
    pub mass_trend_tol: f64,
    /// Optional expected interval for `δ̂` in the `delta` experiment.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_range: Option<[f64; 2]>,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            exact: 1e-9,
            z_max: 3.0,
            equidist_ratio: 3.0,
            equidist_ref_t: 2.0,
            noise_sigma: 3.0,
            cusp_rel_tol: 0.2,
            delta_p_expected: 0.5,
            delta_p_tol: 0.05,
            delta_stability_sigma: 3.0,
            refinement_sigma: 2.0,
            regular_growth_cap: 50.0,
            equivariance_tv: 0.1,
            codim_tol: 0.1,
            min_effective_samples: 10,
            mass_trend_tol: 0.25,
            delta_range: None,
        }
    }
}

fn default_basepoint() -> [f64; 2] {
    [0.0, 1.0]
}
fn default_orbit_radius() -> f64 {
    14.0
}
fn default_body() -> BodyConfig {
    BodyConfig::Geodesic {
        from: Coord(Some(0.0)),
        to: Coord::INF,
        radius: 0.0,
    }
}
fn default_omega() -> OmegaConfig {
    OmegaConfig::All
}
fn default_eta() -> f64 {
    0.1
}
fn default_r() -> f64 {
    2.0
}
fn default_t_grid() -> Vec<f64> {
    (0..=8).map(f64::from).collect()
}
fn default_wall_radius() -> f64 {
    8.0
}
fn default_bm_window() -> f64 {
    4.0
}

/// One experiment run. Every field except `group` and `seed` has a default;
/// [`RunConfig::materialize`] writes the defaults that depend on other fields
/// back into the struct so the echoed config is self-describing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub group: GroupConfig,
    #[serde(default = "default_basepoint")]
    pub basepoint: [f64; 2],
    #[serde(default = "default_orbit_radius")]
    pub orbit_radius: f64,
    /// Default: `orbit_radius − 4`.
    #[serde(default)]
    pub horizon: Option<f64>,
    /// Default: `max(0.1, 2·stderr(δ̂))`, filled in once `δ̂` is known.
    #[serde(default)]
    pub s_offset: Option<f64>,
    #[serde(default = "default_body")]
    pub body: BodyConfig,
    #[serde(default = "default_omega")]
    pub omega: OmegaConfig,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    /// Orbit points within this distance define the Dirichlet walls.
    #[serde(default = "default_wall_radius")]
    pub wall_radius: f64,
    /// Half-width of the Hopf-time window of the equidistribution reference.
    #[serde(default = "default_bm_window")]
    pub bm_window: f64,
    /// Default: every ordered pair of distinct ping-pong arcs whose `v₊` arc
    /// avoids `∂∞C`, times `[−1, 0]` and `[0, 1]`.
    #[serde(default)]
    pub boxes: Option<Vec<BoxConfig>>,
    #[serde(default)]
    pub samples: SampleConfig,
    #[serde(default)]
    pub observables: ObservableConfig,
    #[serde(default)]
    pub cusp: CuspConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            let key = if e.to_string().contains("seed") { "seed" } else { "<root>" };
            Error::config(key, e.to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(path.display().to_string(), format!("cannot read config: {e}")))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config { key, msg } => Error::config(format!("{}:{key}", path.display()), msg),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, key: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive, got {v}")))
            }
        };
        positive(self.orbit_radius, "orbit_radius")?;
        if self.orbit_radius > DEFAULT_RADIUS_CAP {
            return Err(Error::config(
                "orbit_radius",
                format!("{} exceeds the cap {DEFAULT_RADIUS_CAP}", self.orbit_radius),
            ));
        }
        point(&self.basepoint, "basepoint")?;
        if let Some(h) = self.horizon {
            if !(h >= 0.0 && h < self.orbit_radius) {
                return Err(Error::config("horizon", format!("{h} must lie in [0, orbit_radius)")));
            }
        }
        if let Some(s) = self.s_offset {
            if !(s >= 0.0) {
                return Err(Error::config("s_offset", format!("{s} must be non-negative")));
            }
        }
        positive(self.eta, "eta")?;
        positive(self.r, "r")?;
        positive(self.wall_radius, "wall_radius")?;
        positive(self.bm_window, "bm_window")?;
        if self.t_grid.is_empty() || self.t_grid.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::config("t_grid", "needs at least one non-negative time"));
        }
        if self.t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("t_grid", "times must be strictly increasing"));
        }
        if self.samples.bootstrap < 2 {
            return Err(Error::config("samples.bootstrap", "needs at least 2 resamples"));
        }
        if self.observables.count == 0 {
            return Err(Error::config("observables.count", "needs at least one observable"));
        }
        positive(self.observables.radius, "observables.radius")?;
        positive(self.observables.angle_width, "observables.angle_width")?;
        if !(self.observables.holder_alpha > 0.0 && self.observables.holder_alpha <= 1.0) {
            return Err(Error::config("observables.holder_alpha", "must lie in (0, 1]"));
        }
        positive(self.cusp.refine_step, "cusp.refine_step")?;
        if let Some(boxes) = &self.boxes {
            for (k, b) in boxes.iter().enumerate() {
                if !(b.t[1] > b.t[0]) {
                    return Err(Error::config(format!("boxes[{k}].t"), "empty time interval"));
                }
            }
        }
        self.body.build()?;
        self.group.build()?;
        Ok(())
    }

    pub fn basepoint(&self) -> Point {
        Point {
            x: self.basepoint[0],
            y: self.basepoint[1],
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon.unwrap_or(self.orbit_radius - DEFAULT_HORIZON_GAP).max(0.0)
    }

    /// Fills in the defaults that depend on other fields (horizon, boxes).
    pub fn materialize(&mut self) -> Result<()> {
        self.horizon = Some(self.horizon());
        if self.boxes.is_none() {
            let g = self.group.build()?;
            let c = self.body.build()?;
            self.boxes = Some(default_boxes(&g, &c, &self.basepoint())?);
        }
        Ok(())
    }
}

fn default_boxes(g: &GroupSpec, c: &ConvexBody, x0: &Point) -> Result<Vec<BoxConfig>> {
    let arcs = g.ping_pong_arcs(x0)?;
    let ends = c.ideal_boundary();
    let coord = |theta: f64| {
        let p = BoundaryPoint::from_angle(theta);
        Coord(p.to_real())
    };
    let as_config = |a: &Arc| ArcConfig {
        from: coord(a.start),
        to: coord(a.start + a.len),
    };
    let mut out = Vec::new();
    for plus in &arcs {
        if ends.iter().any(|e| plus.contains(e, 0.0)) {
            continue;
        }
        for minus in &arcs {
            if std::ptr::eq(minus, plus) {
                continue;
            }
            for t in [[-1.0, 0.0], [0.0, 1.0]] {
                out.push(BoxConfig {
                    minus: as_config(minus),
                    plus: as_config(plus),
                    t,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolic::Action;

    #[test]
    fn minimal_config_round_trips_after_materialization() {
        let mut cfg = RunConfig::from_json(r#"{"group": {"kind": "symmetric_schottky", "ell": 2.2}, "seed": 7}"#).unwrap();
        cfg.materialize().unwrap();
        assert_eq!(cfg.horizon, Some(10.0));
        assert_eq!(cfg.boxes.as_ref().unwrap().len(), 12);
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn seed_is_mandatory_and_unknown_keys_rejected() {
        let e = RunConfig::from_json(r#"{"group": {"kind": "gamma2"}}"#).unwrap_err();
        assert!(matches!(e, Error::Config { ref key, .. } if key == "seed"), "{e}");
        let e = RunConfig::from_json(r#"{"group": {"kind": "gamma2"}, "seed": 1, "colour": 3}"#).unwrap_err();
        assert!(e.to_string().contains("colour"), "{e}");
        let e = RunConfig::from_json(r#"{"group": {"kind": "gamma2"}, "seed": 1, "samples": {"phi": 5, "bm": 3}}"#)
            .unwrap_err();
        assert!(e.to_string().contains("bm"), "{e}");
    }

    #[test]
    fn coordinates_accept_inf() {
        let a: ArcConfig = serde_json::from_str(r#"{"from": 1, "to": "inf"}"#).unwrap();
        assert_eq!(a.to, Coord::INF);
        assert_eq!(serde_json::to_string(&a).unwrap(), r#"{"from":1.0,"to":"inf"}"#);
        assert!(serde_json::from_str::<Coord>(r#""nan""#).is_err());
    }

    #[test]
    fn stabilizer_piece_is_fundamental_for_the_axis() {
        let g = GroupSpec::symmetric_schottky(2.2).unwrap();
        let arcs = OmegaConfig::StabilizerPiece { word: "a".into() }.arcs(&g).unwrap();
        let a = g.element("a").unwrap();
        // x and a·x = e^ℓ x: exactly one of them is in the piece.
        for x in [0.5f64, 0.9, 1.3, 2.0, -0.4, -1.1, -2.5] {
            let count = |p: BoundaryPoint| {
                arcs.iter()
                    .filter(|arc| (p.theta() - arc.start).rem_euclid(std::f64::consts::TAU) < arc.len)
                    .count()
            };
            let orbit: usize = (-4i32..=4)
                .map(|k| {
                    let mut p = BoundaryPoint::from_real(x);
                    for _ in 0..k.abs() {
                        p = p.act(&if k > 0 { a } else { a.inverse() });
                    }
                    count(p)
                })
                .sum();
            assert_eq!(orbit, 1, "x = {x}");
        }
    }

    #[test]
    fn bad_values_name_their_key() {
        let e = RunConfig::from_json(r#"{"group": {"kind": "gamma2"}, "seed": 1, "eta": -1}"#).unwrap_err();
        assert!(matches!(e, Error::Config { ref key, .. } if key == "eta"));
        let e = RunConfig::from_json(r#"{"group": {"kind": "gamma2"}, "seed": 1, "orbit_radius": 40}"#).unwrap_err();
        assert!(matches!(e, Error::Config { ref key, .. } if key == "orbit_radius"));
    }
}
