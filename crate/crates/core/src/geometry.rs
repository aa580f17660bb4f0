//! Intersection layout, clearance validation and candidate path construction.
//!
//! The frame is sphere-centered with x pointing East, y North and z to the
//! zenith. Four horizontal flows use eight equatorial tube nodes; the two
//! vertical flows use four nodes offset from the poles in the x–z plane, with
//! each vertical flow's entry and exit vertically aligned.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Travel direction of a UAV stream. Nodes are labelled by flow, not by the
/// side of the sphere they sit on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FlowDirection {
    #[serde(rename = "x+")]
    XPos,
    #[serde(rename = "x-")]
    XNeg,
    #[serde(rename = "y+")]
    YPos,
    #[serde(rename = "y-")]
    YNeg,
    #[serde(rename = "z+")]
    ZPos,
    #[serde(rename = "z-")]
    ZNeg,
}

impl FlowDirection {
    /// Canonical order used for enumeration and indexing.
    pub const ALL: [FlowDirection; 6] = [
        FlowDirection::XPos,
        FlowDirection::XNeg,
        FlowDirection::YPos,
        FlowDirection::YNeg,
        FlowDirection::ZPos,
        FlowDirection::ZNeg,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn opposite(self) -> FlowDirection {
        use FlowDirection::*;
        match self {
            XPos => XNeg,
            XNeg => XPos,
            YPos => YNeg,
            YNeg => YPos,
            ZPos => ZNeg,
            ZNeg => ZPos,
        }
    }

    pub fn is_horizontal(self) -> bool {
        !matches!(self, FlowDirection::ZPos | FlowDirection::ZNeg)
    }

    /// Compass heading of a horizontal flow, degrees counterclockwise from East.
    fn heading_deg(self) -> Option<f64> {
        use FlowDirection::*;
        match self {
            XPos => Some(0.0),
            YPos => Some(90.0),
            XNeg => Some(180.0),
            YNeg => Some(270.0),
            ZPos | ZNeg => None,
        }
    }

    pub fn label(self) -> &'static str {
        use FlowDirection::*;
        match self {
            XPos => "x+",
            XNeg => "x-",
            YPos => "y+",
            YNeg => "y-",
            ZPos => "z+",
            ZNeg => "z-",
        }
    }
}

impl fmt::Display for FlowDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for FlowDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FlowDirection::ALL
            .into_iter()
            .find(|d| d.label() == s)
            .ok_or_else(|| Error::Input(format!("unknown flow direction `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    In,
    Out,
}

/// A tube node on the sphere surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId {
    pub flow: FlowDirection,
    pub side: Side,
}

impl NodeId {
    pub const fn entry(flow: FlowDirection) -> Self {
        NodeId {
            flow,
            side: Side::In,
        }
    }

    pub const fn exit(flow: FlowDirection) -> Self {
        NodeId {
            flow,
            side: Side::Out,
        }
    }

    fn slot(self) -> usize {
        self.flow.index() * 2 + usize::from(self.side == Side::Out)
    }

    /// All 12 nodes, entries and exits interleaved in canonical flow order.
    pub fn all() -> impl Iterator<Item = NodeId> {
        FlowDirection::ALL
            .into_iter()
            .flat_map(|f| [NodeId::entry(f), NodeId::exit(f)])
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = match self.side {
            Side::In => "in",
            Side::Out => "out",
        };
        write!(f, "{}_{}", self.flow, side)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Circulation {
    #[default]
    Counterclockwise,
    Clockwise,
}

/// Downwash-driven spacing requirements for one airframe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearanceSpec {
    pub rotor_diameter_m: f64,
    pub cruise_speed_mps: f64,
    pub lateral_clearance_m: f64,
    pub vertical_clearance_m: f64,
    pub tube_inner_radius_m: f64,
    pub tube_buffer_m: f64,
}

impl ClearanceSpec {
    pub const LATERAL_ROTOR_FACTOR: f64 = 4.0;
    pub const VERTICAL_ROTOR_FACTOR: f64 = 1.5;

    /// Clearances at exactly the rotor-diameter minima.
    pub fn from_rotor(
        rotor_diameter_m: f64,
        cruise_speed_mps: f64,
        tube_inner_radius_m: f64,
        tube_buffer_m: f64,
    ) -> Result<Self> {
        Self::new(
            rotor_diameter_m,
            cruise_speed_mps,
            Self::LATERAL_ROTOR_FACTOR * rotor_diameter_m,
            Self::VERTICAL_ROTOR_FACTOR * rotor_diameter_m,
            tube_inner_radius_m,
            tube_buffer_m,
        )
    }

    pub fn new(
        rotor_diameter_m: f64,
        cruise_speed_mps: f64,
        lateral_clearance_m: f64,
        vertical_clearance_m: f64,
        tube_inner_radius_m: f64,
        tube_buffer_m: f64,
    ) -> Result<Self> {
        if !(rotor_diameter_m > 0.0) {
            return Err(Error::config("rotor_diameter_m", "must be positive"));
        }
        if !(cruise_speed_mps > 0.0) {
            return Err(Error::config("cruise_speed_mps", "must be positive"));
        }
        let lateral_min = Self::LATERAL_ROTOR_FACTOR * rotor_diameter_m;
        if !(lateral_clearance_m >= lateral_min) {
            return Err(Error::config(
                "lateral_clearance_m",
                format!("must be at least 4 rotor diameters ({lateral_min} m)"),
            ));
        }
        let vertical_min = Self::VERTICAL_ROTOR_FACTOR * rotor_diameter_m;
        if !(vertical_clearance_m >= vertical_min) {
            return Err(Error::config(
                "vertical_clearance_m",
                format!("must be at least 1.5 rotor diameters ({vertical_min} m)"),
            ));
        }
        if !(tube_inner_radius_m > 0.0) {
            return Err(Error::config("tube_inner_radius_m", "must be positive"));
        }
        if !(tube_buffer_m >= 0.0) {
            return Err(Error::config("tube_buffer_m", "must be non-negative"));
        }
        Ok(ClearanceSpec {
            rotor_diameter_m,
            cruise_speed_mps,
            lateral_clearance_m,
            vertical_clearance_m,
            tube_inner_radius_m,
            tube_buffer_m,
        })
    }
}

/// The built intersection: radius, placement angles and the 12 node positions.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereLayout {
    radius_m: f64,
    equatorial_offset_deg: f64,
    polar_offset_deg: f64,
    circulation: Circulation,
    nodes: [Vec3; 12],
}

/// Builds the layout.
///
/// Horizontal flow with heading `h` gets its entry at azimuth `h + 180° + off`
/// and its exit at `h - off` under counterclockwise circulation (mirrored for
/// clockwise). The z+ flow rises at `x = +R sin(polar)`, the z- flow descends
/// at `x = -R sin(polar)`.
pub fn build_layout(
    radius_m: f64,
    equatorial_offset_deg: f64,
    polar_offset_deg: f64,
    circulation: Circulation,
) -> Result<SphereLayout> {
    if !(radius_m > 0.0) || !radius_m.is_finite() {
        return Err(Error::config(
            "radius_m",
            "must be a positive finite length",
        ));
    }
    if !(equatorial_offset_deg > 0.0 && equatorial_offset_deg < 45.0) {
        return Err(Error::config(
            "equatorial_offset_deg",
            "must lie strictly between 0 and 45 degrees",
        ));
    }
    if !(polar_offset_deg > 0.0 && polar_offset_deg < 45.0) {
        return Err(Error::config(
            "polar_offset_deg",
            "must lie strictly between 0 and 45 degrees",
        ));
    }

    let mut nodes = [Vec3::ZERO; 12];
    let on_equator = |az_deg: f64| {
        let a = az_deg.to_radians();
        Vec3::new(radius_m * a.cos(), radius_m * a.sin(), 0.0)
    };
    let sign = match circulation {
        Circulation::Counterclockwise => 1.0,
        Circulation::Clockwise => -1.0,
    };
    for flow in FlowDirection::ALL {
        if let Some(h) = flow.heading_deg() {
            let entry_az = h + 180.0 + sign * equatorial_offset_deg;
            let exit_az = h - sign * equatorial_offset_deg;
            nodes[NodeId::entry(flow).slot()] = on_equator(entry_az);
            nodes[NodeId::exit(flow).slot()] = on_equator(exit_az);
        }
    }
    let p = polar_offset_deg.to_radians();
    let (s, c) = (radius_m * p.sin(), radius_m * p.cos());
    use FlowDirection::{ZNeg, ZPos};
    nodes[NodeId::entry(ZPos).slot()] = Vec3::new(s, 0.0, -c);
    nodes[NodeId::exit(ZPos).slot()] = Vec3::new(s, 0.0, c);
    nodes[NodeId::entry(ZNeg).slot()] = Vec3::new(-s, 0.0, c);
    nodes[NodeId::exit(ZNeg).slot()] = Vec3::new(-s, 0.0, -c);

    Ok(SphereLayout {
        radius_m,
        equatorial_offset_deg,
        polar_offset_deg,
        circulation,
        nodes,
    })
}

impl SphereLayout {
    pub fn radius_m(&self) -> f64 {
        self.radius_m
    }

    pub fn equatorial_offset_deg(&self) -> f64 {
        self.equatorial_offset_deg
    }

    pub fn polar_offset_deg(&self) -> f64 {
        self.polar_offset_deg
    }

    pub fn circulation(&self) -> Circulation {
        self.circulation
    }

    pub fn position(&self, node: NodeId) -> Vec3 {
        self.nodes[node.slot()]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, Vec3)> + '_ {
        NodeId::all().map(move |n| (n, self.position(n)))
    }

    /// Smallest chord between azimuthally adjacent equatorial nodes.
    pub fn adjacent_equatorial_chord_m(&self) -> f64 {
        let mut az: Vec<f64> = self
            .nodes()
            .filter(|(n, _)| n.flow.is_horizontal())
            .map(|(_, p)| p.y.atan2(p.x).rem_euclid(TAU))
            .collect();
        az.sort_by(f64::total_cmp);
        let mut min_gap = TAU - (az[az.len() - 1] - az[0]);
        for w in az.windows(2) {
            min_gap = min_gap.min(w[1] - w[0]);
        }
        2.0 * self.radius_m * (min_gap / 2.0).sin()
    }

    pub fn min_node_chord_m(&self) -> f64 {
        let pts: Vec<Vec3> = self.nodes().map(|(_, p)| p).collect();
        let mut best = f64::INFINITY;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                best = best.min(pts[i].distance(pts[j]));
            }
        }
        best
    }

    /// Serializable node listing.
    pub fn export(&self) -> LayoutExport {
        LayoutExport {
            radius_m: self.radius_m,
            equatorial_offset_deg: self.equatorial_offset_deg,
            polar_offset_deg: self.polar_offset_deg,
            circulation: self.circulation,
            nodes: self
                .nodes()
                .map(|(id, p)| NodeExport {
                    id: id.to_string(),
                    flow: id.flow,
                    side: id.side,
                    x_m: p.x,
                    y_m: p.y,
                    z_m: p.z,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayoutExport {
    pub radius_m: f64,
    pub equatorial_offset_deg: f64,
    pub polar_offset_deg: f64,
    pub circulation: Circulation,
    pub nodes: Vec<NodeExport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeExport {
    pub id: String,
    pub flow: FlowDirection,
    pub side: Side,
    pub x_m: f64,
    pub y_m: f64,
    pub z_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClearanceCheck {
    pub name: String,
    pub measured: f64,
    pub required: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<ClearanceCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ClearanceCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&ClearanceCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Checks the layout against the clearance requirements. Failures are
/// reported, not returned as errors.
pub fn validate_clearances(
    layout: &SphereLayout,
    clearance: &ClearanceSpec,
    d_min_m: f64,
) -> ValidationReport {
    let mut checks = Vec::with_capacity(4);
    let mut push = |name: &str, measured: f64, required: f64| {
        checks.push(ClearanceCheck {
            name: name.to_string(),
            measured,
            required,
            passed: measured >= required,
        });
    };

    push(
        "lateral_clearance",
        layout.adjacent_equatorial_chord_m(),
        clearance.lateral_clearance_m,
    );
    // vertical gap between the polar tube nodes and the equatorial tube plane
    let vertical_gap = layout
        .nodes()
        .filter(|(n, _)| !n.flow.is_horizontal())
        .map(|(_, p)| p.z.abs())
        .fold(f64::INFINITY, f64::min);
    push(
        "vertical_clearance",
        vertical_gap,
        clearance.vertical_clearance_m,
    );
    push("d_min_buffer", d_min_m, 2.0 * clearance.tube_buffer_m);
    push("node_separation", layout.min_node_chord_m(), d_min_m);

    ValidationReport { checks }
}

/// Entry–exit pairs without U-turns: 6 entries × 5 exits, in canonical order.
pub fn feasible_pairs(_layout: &SphereLayout) -> Vec<(NodeId, NodeId)> {
    FlowDirection::ALL
        .into_iter()
        .flat_map(|e| {
            FlowDirection::ALL
                .into_iter()
                .filter(move |x| *x != e.opposite())
                .map(move |x| (NodeId::entry(e), NodeId::exit(x)))
        })
        .collect()
}

pub fn is_feasible(entry: NodeId, exit: NodeId) -> bool {
    entry.side == Side::In && exit.side == Side::Out && exit.flow != entry.flow.opposite()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Direct = 1,
    ShortArc = 2,
    LongArc = 3,
}

impl PathKind {
    pub const ALL: [PathKind; 3] = [PathKind::Direct, PathKind::ShortArc, PathKind::LongArc];

    /// Zero-based offset (0, 1, 2).
    pub fn offset(self) -> usize {
        self as usize - 1
    }

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn label(self) -> &'static str {
        match self {
            PathKind::Direct => "direct",
            PathKind::ShortArc => "short_arc",
            PathKind::LongArc => "long_arc",
        }
    }
}

impl fmt::Display for PathKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One candidate route with its analytic arc-length parameterization.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    pub entry: NodeId,
    pub exit: NodeId,
    pub kind: PathKind,
    pub length_m: f64,
    /// Central angle Ω between the endpoints (same for all three kinds).
    pub central_angle_rad: f64,
    start: Vec3,
    end: Vec3,
    radius_m: f64,
    /// Unit tangent at the start for arcs, unit chord direction for direct.
    tangent: Vec3,
}

/// Builds one candidate path from `entry` to `exit`.
pub fn make_path(
    layout: &SphereLayout,
    entry: NodeId,
    exit: NodeId,
    kind: PathKind,
) -> Result<PathSpec> {
    if !is_feasible(entry, exit) {
        return Err(Error::Input(format!(
            "({entry}, {exit}) is not a feasible entry-exit pair"
        )));
    }
    let r = layout.radius_m;
    let start = layout.position(entry);
    let end = layout.position(exit);
    let ua = start * (1.0 / r);
    let ub = end * (1.0 / r);
    let sin_om = ua.cross(ub).norm();
    let cos_om = ua.dot(ub);
    let omega = sin_om.atan2(cos_om);

    let (length_m, tangent) = match kind {
        PathKind::Direct => {
            let chord = end - start;
            (chord.norm(), chord.normalized())
        }
        PathKind::ShortArc | PathKind::LongArc => {
            if sin_om < 1e-9 {
                return Err(Error::DegenerateGreatCircle { entry, exit });
            }
            let t = (ub - ua * cos_om).normalized();
            if kind == PathKind::ShortArc {
                (r * omega, t)
            } else {
                (r * (TAU - omega), -t)
            }
        }
    };

    Ok(PathSpec {
        entry,
        exit,
        kind,
        length_m,
        central_angle_rad: omega,
        start,
        end,
        radius_m: r,
        tangent,
    })
}

impl PathSpec {
    pub fn start(&self) -> Vec3 {
        self.start
    }

    pub fn end(&self) -> Vec3 {
        self.end
    }

    pub fn radius_m(&self) -> f64 {
        self.radius_m
    }

    pub fn is_arc(&self) -> bool {
        self.kind != PathKind::Direct
    }

    /// Position after travelling `s` meters from the entry, clamped to the path.
    pub fn position_at(&self, s: f64) -> Vec3 {
        let s = s.clamp(0.0, self.length_m);
        if s == self.length_m {
            return self.end;
        }
        match self.kind {
            PathKind::Direct => self.start + self.tangent * s,
            _ => {
                let th = s / self.radius_m;
                let u = self.start * (1.0 / self.radius_m);
                (u * th.cos() + self.tangent * th.sin()) * self.radius_m
            }
        }
    }

    /// Arc length of the stretch of path lying within Euclidean distance `r`
    /// of either endpoint (the same at both ends).
    pub fn mask_length_from(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let s = match self.kind {
            PathKind::Direct => r,
            _ => {
                let x = r / (2.0 * self.radius_m);
                if x >= 1.0 {
                    PI * self.radius_m
                } else {
                    2.0 * self.radius_m * x.asin()
                }
            }
        };
        s.min(self.length_m)
    }

    /// Arc-length parameter of the point on this path closest to `p`,
    /// restricted to `[s_lo, s_hi]`.
    pub(crate) fn closest_param(&self, p: Vec3, s_lo: f64, s_hi: f64) -> f64 {
        match self.kind {
            PathKind::Direct => (p - self.start).dot(self.tangent).clamp(s_lo, s_hi),
            _ => {
                let r = self.radius_m;
                let u = self.start * (1.0 / r);
                let a = p.dot(u);
                let b = p.dot(self.tangent);
                if a == 0.0 && b == 0.0 {
                    return s_lo;
                }
                let th = b.atan2(a).rem_euclid(TAU);
                let s = th * r;
                if s >= s_lo && s <= s_hi {
                    return s;
                }
                // outside the window: the nearer window end wins
                let d_lo = p.distance(self.position_at(s_lo));
                let d_hi = p.distance(self.position_at(s_hi));
                if d_lo <= d_hi {
                    s_lo
                } else {
                    s_hi
                }
            }
        }
    }
}

/// A path discretized into a polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    pub spec: PathSpec,
    pub points: Vec<Vec3>,
    pub spacing_m: f64,
}

/// Uniform arc-length sampling with `ceil(length / max_spacing) + 1` points.
pub fn sample_path(spec: &PathSpec, max_spacing_m: f64) -> Result<SampledPath> {
    if !(max_spacing_m > 0.0) {
        return Err(Error::Input("max_spacing_m must be positive".into()));
    }
    let segments = (spec.length_m / max_spacing_m).ceil().max(1.0) as usize;
    let step = spec.length_m / segments as f64;
    let mut points = Vec::with_capacity(segments + 1);
    points.push(spec.start);
    for k in 1..segments {
        points.push(spec.position_at(step * k as f64));
    }
    points.push(spec.end);
    Ok(SampledPath {
        spec: spec.clone(),
        points,
        spacing_m: step,
    })
}

/// All 90 candidate paths: feasible pairs in canonical order, three kinds each.
pub fn candidate_paths(layout: &SphereLayout) -> Result<Vec<PathSpec>> {
    let mut out = Vec::with_capacity(90);
    for (entry, exit) in feasible_pairs(layout) {
        for kind in PathKind::ALL {
            out.push(make_path(layout, entry, exit, kind)?);
        }
    }
    Ok(out)
}

/// Index of `(entry flow, exit flow, kind)` into [`candidate_paths`] order.
pub fn path_index(entry: FlowDirection, exit: FlowDirection, kind: PathKind) -> Option<usize> {
    if exit == entry.opposite() {
        return None;
    }
    let exits_before = FlowDirection::ALL
        .iter()
        .filter(|x| **x != entry.opposite() && x.index() < exit.index())
        .count();
    Some((entry.index() * 5 + exits_before) * 3 + kind.offset())
}
