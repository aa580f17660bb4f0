//! Pairwise conflict relation over candidate paths, plus time-resolved
//! conflict checks for UAVs moving at constant speed.
//!
//! Two readings of the separation test are supported, selected by
//! [`ConflictTiming`]:
//!
//! * `Geometric` – minimum distance between the two curves over independent
//!   parameters, i.e. whether the tubes swept by the paths ever come within
//!   `d_min` of each other.
//! * `Synchronized` – both UAVs enter at the same instant and fly at the same
//!   speed, so the minimum is over a common arc-length parameter. The result
//!   does not depend on the common speed.

use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    candidate_paths, path_index, FlowDirection, PathKind, PathSpec, SampledPath,
};
use crate::geometry::{sample_path, SphereLayout};
use crate::output::sig6;
use crate::segment::{min_norm_on_segment, segment_segment};
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharedNodeRule {
    /// Ignore the stretch of both paths within the mask radius of a node they share.
    #[default]
    MaskNearSharedNode,
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictTiming {
    #[default]
    Synchronized,
    Geometric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictPolicy {
    pub d_min_m: f64,
    pub max_spacing_m: f64,
    pub shared_node_mask_radius_m: f64,
    pub shared_node_rule: SharedNodeRule,
    pub timing: ConflictTiming,
}

impl Default for ConflictPolicy {
    fn default() -> Self {
        ConflictPolicy {
            d_min_m: 3.0,
            max_spacing_m: 0.1,
            shared_node_mask_radius_m: 4.0,
            shared_node_rule: SharedNodeRule::MaskNearSharedNode,
            timing: ConflictTiming::Synchronized,
        }
    }
}

impl ConflictPolicy {
    pub fn validate(&self) -> Result<()> {
        // d_min = 0 is admitted so that touching geometry can be studied
        if !(self.d_min_m >= 0.0) || !self.d_min_m.is_finite() {
            return Err(Error::config("d_min_m", "must be a non-negative length"));
        }
        if !(self.max_spacing_m > 0.0) {
            return Err(Error::config("max_spacing_m", "must be positive"));
        }
        if !(self.shared_node_mask_radius_m >= 0.0) {
            return Err(Error::config(
                "shared_node_mask_radius_m",
                "must be non-negative",
            ));
        }
        Ok(())
    }

    pub fn strict(&self) -> Self {
        ConflictPolicy {
            shared_node_rule: SharedNodeRule::Strict,
            ..self.clone()
        }
    }

    pub fn with_d_min(&self, d_min_m: f64) -> Self {
        ConflictPolicy {
            d_min_m,
            ..self.clone()
        }
    }

    fn mask_radius(&self) -> f64 {
        match self.shared_node_rule {
            SharedNodeRule::MaskNearSharedNode => self.shared_node_mask_radius_m,
            SharedNodeRule::Strict => 0.0,
        }
    }
}

/// Arc-length rectangles `[s_lo, s_hi] × [t_lo, t_hi]` whose union is the
/// set of point pairs left after masking: a pair is dropped only when both
/// points lie inside the mask ball of a node the paths share.
fn geometric_windows(a: &PathSpec, b: &PathSpec, policy: &ConflictPolicy) -> Vec<[(f64, f64); 2]> {
    let r = policy.mask_radius();
    let (la, lb) = (a.length_m, b.length_m);
    let (mut ea, mut eb, mut xa, mut xb) = (0.0, 0.0, la, lb);
    if r > 0.0 {
        if a.entry == b.entry {
            ea = a.mask_length_from(r);
            eb = b.mask_length_from(r);
        }
        if a.exit == b.exit {
            xa = la - a.mask_length_from(r);
            xb = lb - b.mask_length_from(r);
        }
    }
    let mut out: Vec<[(f64, f64); 2]> = Vec::with_capacity(4);
    for rect in [
        [(ea, xa), (0.0, lb)],
        [(0.0, la), (eb, xb)],
        [(ea, la), (0.0, xb)],
        [(0.0, xa), (eb, lb)],
    ] {
        if rect[0].0 < rect[0].1 && rect[1].0 < rect[1].1 && !out.contains(&rect) {
            out.push(rect);
        }
    }
    out
}

struct Piece {
    p0: Vec3,
    p1: Vec3,
    s0: f64,
    s1: f64,
}

/// Polyline segments restricted to the arc-length window `[lo, hi]`.
fn clipped_pieces(path: &SampledPath, lo: f64, hi: f64) -> Vec<Piece> {
    let n = path.points.len();
    let total = path.spec.length_m;
    let step = total / (n - 1) as f64;
    let param = |i: usize| if i == n - 1 { total } else { step * i as f64 };
    let mut out = Vec::with_capacity(n);
    for i in 0..n - 1 {
        let (s0, s1) = (param(i), param(i + 1));
        if s1 <= lo || s0 >= hi {
            continue;
        }
        let (a, b) = (path.points[i], path.points[i + 1]);
        let c0 = s0.max(lo);
        let c1 = s1.min(hi);
        let len = s1 - s0;
        out.push(Piece {
            p0: a.lerp(b, (c0 - s0) / len),
            p1: a.lerp(b, (c1 - s0) / len),
            s0: c0,
            s1: c1,
        });
    }
    out
}

const CHUNK: usize = 24;

struct Chunk {
    center: Vec3,
    radius: f64,
    range: std::ops::Range<usize>,
}

fn chunks(pieces: &[Piece]) -> Vec<Chunk> {
    (0..pieces.len())
        .step_by(CHUNK)
        .map(|start| {
            let range = start..(start + CHUNK).min(pieces.len());
            let mut lo = pieces[start].p0;
            let mut hi = lo;
            for p in &pieces[range.clone()] {
                for q in [p.p0, p.p1] {
                    lo = Vec3::new(lo.x.min(q.x), lo.y.min(q.y), lo.z.min(q.z));
                    hi = Vec3::new(hi.x.max(q.x), hi.y.max(q.y), hi.z.max(q.z));
                }
            }
            let center = lo.lerp(hi, 0.5);
            let radius = pieces[range.clone()]
                .iter()
                .flat_map(|p| [p.p0, p.p1])
                .map(|q| q.distance(center))
                .fold(0.0, f64::max);
            Chunk {
                center,
                radius,
                range,
            }
        })
        .collect()
}

/// Time-free minimum distance between two sampled paths.
///
/// Exact segment–segment distance over both polylines, then a local descent
/// on the analytic curves from the best segment pair. Under
/// [`SharedNodeRule::MaskNearSharedNode`], point pairs with both points
/// inside the mask radius of a node the paths share are ignored, which can
/// leave nothing to compare (`+inf`).
pub fn min_pair_distance(a: &SampledPath, b: &SampledPath, policy: &ConflictPolicy) -> Result<f64> {
    if a.points.len() < 2 || b.points.len() < 2 {
        return Err(Error::Input(
            "sampled path needs at least two points".into(),
        ));
    }
    let mut best = f64::INFINITY;
    for [wa, wb] in geometric_windows(&a.spec, &b.spec, policy) {
        best = best.min(window_distance(a, b, wa, wb));
    }
    Ok(best)
}

fn window_distance(a: &SampledPath, b: &SampledPath, wa: (f64, f64), wb: (f64, f64)) -> f64 {
    let pa = clipped_pieces(a, wa.0, wa.1);
    let pb = clipped_pieces(b, wb.0, wb.1);
    let ca = chunks(&pa);
    let cb = chunks(&pb);

    let mut order: Vec<(f64, usize, usize)> = Vec::with_capacity(ca.len() * cb.len());
    for (i, x) in ca.iter().enumerate() {
        for (j, y) in cb.iter().enumerate() {
            let lb = (x.center.distance(y.center) - x.radius - y.radius).max(0.0);
            order.push((lb, i, j));
        }
    }
    order.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)).then(p.2.cmp(&q.2)));

    let mut best = f64::INFINITY;
    let mut at = (0.0, 0.0);
    for (lb, i, j) in order {
        if lb >= best {
            break;
        }
        for x in &pa[ca[i].range.clone()] {
            for y in &pb[cb[j].range.clone()] {
                let (d, s, t) = segment_segment(x.p0, x.p1, y.p0, y.p1);
                if d < best {
                    best = d;
                    at = (x.s0 + s * (x.s1 - x.s0), y.s0 + t * (y.s1 - y.s0));
                }
            }
        }
    }
    best.min(refine(&a.spec, &b.spec, at, wa, wb))
}

/// Alternating closest-point descent on the analytic curves.
fn refine(a: &PathSpec, b: &PathSpec, start: (f64, f64), wa: (f64, f64), wb: (f64, f64)) -> f64 {
    let (mut s, mut t) = start;
    let mut d = a.position_at(s).distance(b.position_at(t));
    for _ in 0..64 {
        t = b.closest_param(a.position_at(s), wb.0, wb.1);
        s = a.closest_param(b.position_at(t), wa.0, wa.1);
        let nd = a.position_at(s).distance(b.position_at(t));
        if nd >= d - 1e-13 {
            d = d.min(nd);
            break;
        }
        d = nd;
    }
    d
}

/// Minimum distance between two UAVs that enter simultaneously and fly at a
/// common speed, i.e. over a shared arc-length parameter up to the first
/// arrival. Instants at which both UAVs are inside the mask radius of a node
/// they share are ignored under the masking rule.
pub fn synchronized_min_distance(a: &PathSpec, b: &PathSpec, policy: &ConflictPolicy) -> f64 {
    let horizon = a.length_m.min(b.length_m);
    let r = policy.mask_radius();
    let mut lo = 0.0;
    let mut hi = horizon;
    if r > 0.0 {
        if a.entry == b.entry {
            lo = a.mask_length_from(r).min(b.mask_length_from(r));
        }
        if a.exit == b.exit {
            let both_inside_from =
                (a.length_m - a.mask_length_from(r)).max(b.length_m - b.mask_length_from(r));
            hi = hi.min(both_inside_from);
        }
    }
    if lo >= hi {
        return f64::INFINITY;
    }
    let steps = ((hi - lo) / policy.max_spacing_m).ceil().max(1.0) as usize;
    let h = (hi - lo) / steps as f64;
    let gap = |s: f64| a.position_at(s) - b.position_at(s);
    let mut prev = gap(lo);
    let mut best = prev.norm();
    for k in 1..=steps {
        let s = if k == steps { hi } else { lo + h * k as f64 };
        let cur = gap(s);
        best = best.min(min_norm_on_segment(prev, cur));
        prev = cur;
    }
    best
}

/// Symmetric conflict relation over the 90 candidate paths.
#[derive(Debug, Clone)]
pub struct ConflictGraph {
    paths: Vec<PathSpec>,
    policy: ConflictPolicy,
    min_dist: Vec<f64>,
    rows: Vec<u128>,
}

impl ConflictGraph {
    /// Assembles a graph from a full symmetric distance matrix (row-major).
    pub fn from_distances(
        paths: Vec<PathSpec>,
        policy: ConflictPolicy,
        min_dist: Vec<f64>,
    ) -> Result<Self> {
        let n = paths.len();
        if n > 128 {
            return Err(Error::Input("at most 128 paths are supported".into()));
        }
        if min_dist.len() != n * n {
            return Err(Error::Input(format!(
                "distance matrix has {} entries, expected {}",
                min_dist.len(),
                n * n
            )));
        }
        let mut rows = vec![0u128; n];
        for m in 0..n {
            for k in 0..n {
                if m != k && min_dist[m * n + k] <= policy.d_min_m {
                    rows[m] |= 1u128 << k;
                }
            }
        }
        Ok(ConflictGraph {
            paths,
            policy,
            min_dist,
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn paths(&self) -> &[PathSpec] {
        &self.paths
    }

    pub fn path(&self, index: usize) -> &PathSpec {
        &self.paths[index]
    }

    pub fn policy(&self) -> &ConflictPolicy {
        &self.policy
    }

    pub fn index_of(
        &self,
        entry: FlowDirection,
        exit: FlowDirection,
        kind: PathKind,
    ) -> Option<usize> {
        path_index(entry, exit, kind).filter(|i| *i < self.paths.len())
    }

    pub fn conflicts(&self, m: usize, n: usize) -> bool {
        self.rows[m] >> n & 1 == 1
    }

    pub fn min_dist(&self, m: usize, n: usize) -> f64 {
        self.min_dist[m * self.paths.len() + n]
    }

    /// Bitset of paths conflicting with `m`.
    pub fn row(&self, m: usize) -> u128 {
        self.rows[m]
    }

    /// Overrides one edge (both directions).
    pub fn set_conflict(&mut self, m: usize, n: usize, conflict: bool) {
        if conflict {
            self.rows[m] |= 1 << n;
            self.rows[n] |= 1 << m;
        } else {
            self.rows[m] &= !(1 << n);
            self.rows[n] &= !(1 << m);
        }
    }

    pub fn conflict_count(&self) -> usize {
        self.rows
            .iter()
            .map(|r| r.count_ones() as usize)
            .sum::<usize>()
            / 2
    }

    /// Unordered `(m, n)` with `m < n` in row-major order.
    pub fn index_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.paths.len();
        (0..n).flat_map(move |m| (m + 1..n).map(move |k| (m, k)))
    }

    pub fn conflict_set(&self) -> BTreeSet<(usize, usize)> {
        self.index_pairs()
            .filter(|&(m, n)| self.conflicts(m, n))
            .collect()
    }

    /// CSV export, one row per unordered pair.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "entry_a,exit_a,kind_a,entry_b,exit_b,kind_b,min_dist_m,conflict_flag"
        )?;
        for (m, n) in self.index_pairs() {
            let (a, b) = (&self.paths[m], &self.paths[n]);
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                a.entry,
                a.exit,
                a.kind,
                b.entry,
                b.exit,
                b.kind,
                sig6(self.min_dist(m, n)),
                u8::from(self.conflicts(m, n))
            )?;
        }
        Ok(())
    }
}

/// Computes the minimum distance for every unordered pair of candidate paths
/// under `policy` and thresholds it at `d_min`.
pub fn build_conflict_graph(
    layout: &SphereLayout,
    policy: &ConflictPolicy,
) -> Result<ConflictGraph> {
    policy.validate()?;
    let paths = candidate_paths(layout)?;
    let n = paths.len();
    let samples: Vec<SampledPath> = match policy.timing {
        ConflictTiming::Geometric => paths
            .iter()
            .map(|p| sample_path(p, policy.max_spacing_m))
            .collect::<Result<_>>()?,
        ConflictTiming::Synchronized => Vec::new(),
    };

    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|m| (m + 1..n).map(move |k| (m, k)))
        .collect();
    let dists: Vec<f64> = pairs
        .par_iter()
        .map(|&(m, k)| match policy.timing {
            ConflictTiming::Geometric => min_pair_distance(&samples[m], &samples[k], policy),
            ConflictTiming::Synchronized => {
                Ok(synchronized_min_distance(&paths[m], &paths[k], policy))
            }
        })
        .collect::<Result<_>>()?;

    let mut matrix = vec![0.0; n * n];
    for (&(m, k), d) in pairs.iter().zip(dists) {
        matrix[m * n + k] = d;
        matrix[k * n + m] = d;
    }
    ConflictGraph::from_distances(paths, policy.clone(), matrix)
}

/// A UAV flying one path at constant speed, entering at `entry_time_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionProfile {
    pub path: PathSpec,
    pub speed_mps: f64,
    pub entry_time_s: f64,
}

impl MotionProfile {
    pub fn new(path: PathSpec, speed_mps: f64, entry_time_s: f64) -> Result<Self> {
        if !(speed_mps > 0.0) {
            return Err(Error::Input("speed must be positive".into()));
        }
        Ok(MotionProfile {
            path,
            speed_mps,
            entry_time_s,
        })
    }

    pub fn exit_time_s(&self) -> f64 {
        self.entry_time_s + self.path.length_m / self.speed_mps
    }

    pub fn position(&self, t: f64) -> Vec3 {
        if t >= self.exit_time_s() {
            return self.path.end();
        }
        self.path
            .position_at((t - self.entry_time_s) * self.speed_mps)
    }
}

fn temporal_min(p: &MotionProfile, q: &MotionProfile, dt_s: f64, mask_radius: f64) -> f64 {
    let t0 = p.entry_time_s.max(q.entry_time_s);
    let t1 = p.exit_time_s().min(q.exit_time_s());
    if t0 > t1 {
        return f64::INFINITY;
    }
    let mut shared = Vec::new();
    if mask_radius > 0.0 {
        if p.path.entry == q.path.entry {
            shared.push(p.path.start());
        }
        if p.path.exit == q.path.exit {
            shared.push(p.path.end());
        }
    }
    let masked = |a: Vec3, b: Vec3| {
        shared
            .iter()
            .any(|n| a.distance(*n) < mask_radius && b.distance(*n) < mask_radius)
    };
    let steps = ((t1 - t0) / dt_s).ceil() as usize;
    let mut best = f64::INFINITY;
    for k in 0..=steps {
        let t = if k == steps { t1 } else { t0 + dt_s * k as f64 };
        let (a, b) = (p.position(t), q.position(t));
        if !masked(a, b) {
            best = best.min(a.distance(b));
        }
    }
    best
}

/// Minimum separation over synchronized sample instants (step `dt_s`) within
/// the overlap of both transit windows. `+inf` without overlap.
pub fn temporal_min_distance(p: &MotionProfile, q: &MotionProfile, dt_s: f64) -> Result<f64> {
    if !(dt_s > 0.0) {
        return Err(Error::Input("dt_s must be positive".into()));
    }
    Ok(temporal_min(p, q, dt_s, 0.0))
}

/// Like [`temporal_min_distance`], skipping instants at which both UAVs are
/// inside the policy's mask radius of a node their paths share.
pub fn temporal_min_distance_masked(
    p: &MotionProfile,
    q: &MotionProfile,
    policy: &ConflictPolicy,
    dt_s: f64,
) -> Result<f64> {
    if !(dt_s > 0.0) {
        return Err(Error::Input("dt_s must be positive".into()));
    }
    Ok(temporal_min(p, q, dt_s, policy.mask_radius()))
}

/// Index pairs `(k, l)`, `k < l`, whose time-resolved separation drops to `d_min`.
pub fn temporal_conflicts(
    profiles: &[MotionProfile],
    policy: &ConflictPolicy,
    dt_s: f64,
) -> Result<BTreeSet<(usize, usize)>> {
    if !(dt_s > 0.0) {
        return Err(Error::Input("dt_s must be positive".into()));
    }
    let mut out = BTreeSet::new();
    for k in 0..profiles.len() {
        for l in k + 1..profiles.len() {
            if temporal_min(&profiles[k], &profiles[l], dt_s, policy.mask_radius())
                <= policy.d_min_m
            {
                out.insert((k, l));
            }
        }
    }
    Ok(out)
}
