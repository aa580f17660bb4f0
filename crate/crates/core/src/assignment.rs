//! Maximum-throughput conflict-free path assignment.
//!
//! The integer program being solved, for one demand scenario:
//!
//! ```text
//! max  Σ w_ij f_ij
//! s.t. Σ_p x_ij^p = f_ij                    one path per served UAV
//!      x_ij^p + x_i'j'^p' ≤ 1               whenever the two paths conflict
//!      x, f ∈ {0, 1}
//! ```
//!
//! With at most six UAVs and three path kinds the search space is at most
//! 4^6 leaves, so it is solved exactly by depth-first enumeration with
//! conflict and bound pruning. Among optimal assignments the one with the
//! smallest total path length wins, then the lexicographically smallest
//! kind vector in UAV order (direct < short arc < long arc < unserved).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::conflict::ConflictGraph;
use crate::error::{Error, Result};
use crate::geometry::{FlowDirection, PathKind};

const LEN_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Demand {
    pub uav: usize,
    pub entry: FlowDirection,
    pub exit: FlowDirection,
}

impl Demand {
    pub fn new(uav: usize, entry: FlowDirection, exit: FlowDirection) -> Self {
        Demand { uav, entry, exit }
    }
}

/// One UAV per occupied entry corridor, each with a feasible exit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scenario {
    demands: Vec<Demand>,
}

impl Scenario {
    /// Demands are kept sorted by UAV id.
    pub fn new(mut demands: Vec<Demand>) -> Result<Self> {
        demands.sort_by_key(|d| d.uav);
        let mut entries = BTreeSet::new();
        for (i, d) in demands.iter().enumerate() {
            if d.exit == d.entry.opposite() {
                return Err(Error::Input(format!(
                    "demand of UAV {} ({} -> {}) is a U-turn",
                    d.uav, d.entry, d.exit
                )));
            }
            if !entries.insert(d.entry) {
                return Err(Error::Input(format!("entry {} is occupied twice", d.entry)));
            }
            if i > 0 && demands[i - 1].uav == d.uav {
                return Err(Error::Input(format!("duplicate UAV id {}", d.uav)));
            }
        }
        Ok(Scenario { demands })
    }

    pub fn demands(&self) -> &[Demand] {
        &self.demands
    }

    pub fn len(&self) -> usize {
        self.demands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.demands.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioClass {
    /// Every UAV on its direct path is already conflict-free.
    NoConflict,
    /// All UAVs served after rerouting some onto arcs.
    Resolved,
    /// The optimum leaves at least one UAV unserved.
    Collision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub served: BTreeMap<usize, PathKind>,
    pub unserved: BTreeSet<usize>,
    /// Weighted served count.
    pub objective: f64,
    pub total_length_m: f64,
}

impl Assignment {
    pub fn served_count(&self) -> usize {
        self.served.len()
    }

    pub fn kind_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for k in self.served.values() {
            c[k.offset()] += 1;
        }
        c
    }

    /// Pairs of served UAVs whose chosen paths conflict in `graph`; empty for
    /// any assignment returned by the solvers.
    pub fn violations(
        &self,
        scenario: &Scenario,
        graph: &ConflictGraph,
    ) -> Result<Vec<(usize, usize)>> {
        let idx = self.served_indices(scenario, graph)?;
        let mut out = Vec::new();
        for (a, &(ua, pa)) in idx.iter().enumerate() {
            for &(ub, pb) in &idx[a + 1..] {
                if graph.conflicts(pa, pb) {
                    out.push((ua, ub));
                }
            }
        }
        Ok(out)
    }

    fn served_indices(
        &self,
        scenario: &Scenario,
        graph: &ConflictGraph,
    ) -> Result<Vec<(usize, usize)>> {
        self.served
            .iter()
            .map(|(&uav, &kind)| {
                let d = scenario
                    .demands
                    .iter()
                    .find(|d| d.uav == uav)
                    .ok_or_else(|| Error::Input(format!("UAV {uav} not in scenario")))?;
                let i = graph
                    .index_of(d.entry, d.exit, kind)
                    .ok_or_else(|| Error::Input(format!("no path for UAV {uav}")))?;
                Ok((uav, i))
            })
            .collect()
    }
}

/// Serializable per-scenario result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub demands: Vec<Demand>,
    pub served: Vec<(usize, PathKind)>,
    pub unserved: Vec<usize>,
    pub objective: f64,
    pub class: ScenarioClass,
    pub total_length_m: f64,
}

impl AssignmentRecord {
    pub fn new(scenario: &Scenario, assignment: &Assignment, class: ScenarioClass) -> Self {
        AssignmentRecord {
            demands: scenario.demands.clone(),
            served: assignment.served.iter().map(|(u, k)| (*u, *k)).collect(),
            unserved: assignment.unserved.iter().copied().collect(),
            objective: assignment.objective,
            class,
            total_length_m: assignment.total_length_m,
        }
    }
}

/// Candidate path indices and lengths for each demand, in demand order.
fn candidates(scenario: &Scenario, graph: &ConflictGraph) -> Result<Vec<[(usize, f64); 3]>> {
    scenario
        .demands
        .iter()
        .map(|d| {
            let mut out = [(0, 0.0); 3];
            for kind in PathKind::ALL {
                let i = graph.index_of(d.entry, d.exit, kind).ok_or_else(|| {
                    Error::Input(format!(
                        "({} -> {}) has no candidate paths",
                        d.entry, d.exit
                    ))
                })?;
                out[kind.offset()] = (i, graph.path(i).length_m);
            }
            Ok(out)
        })
        .collect()
}

/// Choice vector entry: 0..3 = path kind offset, 3 = unserved.
const UNSERVED: u8 = 3;

fn build_assignment(
    scenario: &Scenario,
    cands: &[[(usize, f64); 3]],
    weights: &[f64],
    choice: &[u8],
) -> Assignment {
    let mut served = BTreeMap::new();
    let mut unserved = BTreeSet::new();
    let mut objective = 0.0;
    let mut total = 0.0;
    for (k, d) in scenario.demands.iter().enumerate() {
        if choice[k] == UNSERVED {
            unserved.insert(d.uav);
        } else {
            let kind = PathKind::ALL[choice[k] as usize];
            served.insert(d.uav, kind);
            objective += weights[k];
            total += cands[k][choice[k] as usize].1;
        }
    }
    Assignment {
        served,
        unserved,
        objective,
        total_length_m: total,
    }
}

struct Best {
    weight: f64,
    length: f64,
    choice: Vec<u8>,
}

struct Search<'a> {
    graph: &'a ConflictGraph,
    cands: &'a [[(usize, f64); 3]],
    weights: &'a [f64],
    suffix_weight: Vec<f64>,
    suffix_min_len: Vec<f64>,
    weight_eps: f64,
    choice: Vec<u8>,
    best: Option<Best>,
}

impl Search<'_> {
    fn dfs(&mut self, k: usize, used: u128, weight: f64, length: f64) {
        let n = self.cands.len();
        if let Some(b) = &self.best {
            let ub = weight + self.suffix_weight[k];
            if ub < b.weight - self.weight_eps {
                return;
            }
            if ub <= b.weight + self.weight_eps
                && length + self.suffix_min_len[k] >= b.length - LEN_EPS
            {
                return;
            }
        }
        if k == n {
            let better = match &self.best {
                None => true,
                Some(b) => {
                    weight > b.weight + self.weight_eps
                        || (weight >= b.weight - self.weight_eps && length < b.length - LEN_EPS)
                }
            };
            if better {
                self.best = Some(Best {
                    weight,
                    length,
                    choice: self.choice.clone(),
                });
            }
            return;
        }
        for kind in 0..3u8 {
            let (idx, len) = self.cands[k][kind as usize];
            if self.graph.row(idx) & used == 0 {
                self.choice[k] = kind;
                self.dfs(
                    k + 1,
                    used | 1u128 << idx,
                    weight + self.weights[k],
                    length + len,
                );
            }
        }
        self.choice[k] = UNSERVED;
        self.dfs(k + 1, used, weight, length);
    }
}

/// Optimal assignment with unit weights.
pub fn solve_max_flow(scenario: &Scenario, graph: &ConflictGraph) -> Result<Assignment> {
    solve_max_flow_weighted(scenario, graph, &vec![1.0; scenario.len()])
}

/// Optimal assignment with per-demand weights `w_ij` (in demand order).
pub fn solve_max_flow_weighted(
    scenario: &Scenario,
    graph: &ConflictGraph,
    weights: &[f64],
) -> Result<Assignment> {
    if weights.len() != scenario.len() {
        return Err(Error::Input(format!(
            "{} weights for {} demands",
            weights.len(),
            scenario.len()
        )));
    }
    if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::Input("weights must be positive and finite".into()));
    }
    let cands = candidates(scenario, graph)?;
    let n = cands.len();
    let mut suffix_weight = vec![0.0; n + 1];
    let mut suffix_min_len = vec![0.0; n + 1];
    for k in (0..n).rev() {
        suffix_weight[k] = suffix_weight[k + 1] + weights[k];
        let shortest = cands[k].iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
        suffix_min_len[k] = suffix_min_len[k + 1] + shortest;
    }
    let mut search = Search {
        graph,
        cands: &cands,
        weights,
        weight_eps: 1e-9 * suffix_weight[0].max(f64::MIN_POSITIVE),
        suffix_weight,
        suffix_min_len,
        choice: vec![UNSERVED; n],
        best: None,
    };
    search.dfs(0, 0, 0.0, 0.0);
    let best = search
        .best
        .expect("the all-unserved leaf is always reachable");
    Ok(build_assignment(scenario, &cands, weights, &best.choice))
}

/// Literal subset enumeration: for `K = N` down to 1, every `K`-subset of the
/// UAVs and every kind choice for it; the first `K` with a pairwise
/// conflict-free choice wins, ties resolved by the same ordering as the solver.
pub fn assign_paths_oracle(scenario: &Scenario, graph: &ConflictGraph) -> Result<Assignment> {
    let cands = candidates(scenario, graph)?;
    let n = cands.len();
    let weights = vec![1.0; n];
    for k in (1..=n).rev() {
        let mut best: Option<(f64, Vec<u8>)> = None;
        for subset in combinations(n, k) {
            let mut kinds = vec![0u8; k];
            loop {
                let ok = (0..k).all(|a| {
                    (a + 1..k).all(|b| {
                        !graph.conflicts(
                            cands[subset[a]][kinds[a] as usize].0,
                            cands[subset[b]][kinds[b] as usize].0,
                        )
                    })
                });
                if ok {
                    let mut choice = vec![UNSERVED; n];
                    let mut len = 0.0;
                    for (a, &u) in subset.iter().enumerate() {
                        choice[u] = kinds[a];
                        len += cands[u][kinds[a] as usize].1;
                    }
                    let replace = match &best {
                        None => true,
                        Some((bl, bc)) => {
                            len < bl - LEN_EPS || (len <= bl + LEN_EPS && choice < *bc)
                        }
                    };
                    if replace {
                        best = Some((len, choice));
                    }
                }
                if !next_kinds(&mut kinds) {
                    break;
                }
            }
        }
        if let Some((_, choice)) = best {
            return Ok(build_assignment(scenario, &cands, &weights, &choice));
        }
    }
    Ok(build_assignment(
        scenario,
        &cands,
        &weights,
        &vec![UNSERVED; n],
    ))
}

fn next_kinds(kinds: &mut [u8]) -> bool {
    for k in kinds.iter_mut().rev() {
        if *k < 2 {
            *k += 1;
            return true;
        }
        *k = 0;
    }
    false
}

/// `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        while i > 0 && cur[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        cur[i - 1] += 1;
        for j in i..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

fn all_direct_conflict_free(scenario: &Scenario, graph: &ConflictGraph) -> Result<bool> {
    let direct: Vec<usize> = candidates(scenario, graph)?
        .iter()
        .map(|c| c[0].0)
        .collect();
    Ok((0..direct.len())
        .all(|a| (a + 1..direct.len()).all(|b| !graph.conflicts(direct[a], direct[b]))))
}

/// Classification given an already computed optimal assignment.
pub fn classify_with(
    scenario: &Scenario,
    graph: &ConflictGraph,
    optimum: &Assignment,
) -> Result<ScenarioClass> {
    Ok(if all_direct_conflict_free(scenario, graph)? {
        ScenarioClass::NoConflict
    } else if optimum.served_count() == scenario.len() {
        ScenarioClass::Resolved
    } else {
        ScenarioClass::Collision
    })
}

pub fn classify_scenario(scenario: &Scenario, graph: &ConflictGraph) -> Result<ScenarioClass> {
    let optimum = solve_max_flow(scenario, graph)?;
    classify_with(scenario, graph, &optimum)
}

/// Every UAV with a path: the served ones as assigned, each unserved UAV (in
/// id order) on the kind with the fewest conflicts against UAVs already
/// placed, lowest kind on ties.
#[derive(Debug, Clone, PartialEq)]
pub struct FlightPlan {
    pub legs: Vec<(Demand, PathKind, usize)>,
}

impl FlightPlan {
    pub fn complete(
        scenario: &Scenario,
        assignment: &Assignment,
        graph: &ConflictGraph,
    ) -> Result<Self> {
        let cands = candidates(scenario, graph)?;
        let mut placed: Vec<Option<(PathKind, usize)>> = scenario
            .demands
            .iter()
            .enumerate()
            .map(|(k, d)| {
                assignment
                    .served
                    .get(&d.uav)
                    .map(|kind| (*kind, cands[k][kind.offset()].0))
            })
            .collect();
        for k in 0..placed.len() {
            if placed[k].is_some() {
                continue;
            }
            let mut best: Option<(usize, PathKind, usize)> = None;
            for kind in PathKind::ALL {
                let idx = cands[k][kind.offset()].0;
                let hits = placed
                    .iter()
                    .flatten()
                    .filter(|(_, other)| graph.conflicts(idx, *other))
                    .count();
                if best.is_none_or(|(h, _, _)| hits < h) {
                    best = Some((hits, kind, idx));
                }
            }
            let (_, kind, idx) = best.expect("three kinds per demand");
            placed[k] = Some((kind, idx));
        }
        Ok(FlightPlan {
            legs: scenario
                .demands
                .iter()
                .zip(placed)
                .map(|(d, p)| {
                    let (kind, idx) = p.expect("all placed");
                    (*d, kind, idx)
                })
                .collect(),
        })
    }

    /// Positions `(a, b)` into `legs` whose paths conflict.
    pub fn residual_conflicts(&self, graph: &ConflictGraph) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.legs.len() {
            for b in a + 1..self.legs.len() {
                if graph.conflicts(self.legs[a].2, self.legs[b].2) {
                    out.push((a, b));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conflict::{build_conflict_graph, ConflictPolicy};
    use crate::geometry::{build_layout, candidate_paths, Circulation};
    use FlowDirection::*;

    fn graph() -> ConflictGraph {
        let l = build_layout(13.0, 22.5, 22.5, Circulation::Counterclockwise).unwrap();
        build_conflict_graph(&l, &ConflictPolicy::default()).unwrap()
    }

    /// Graph with no conflicts at all over the default candidate paths.
    fn empty_graph() -> ConflictGraph {
        let l = build_layout(13.0, 22.5, 22.5, Circulation::Counterclockwise).unwrap();
        let paths = candidate_paths(&l).unwrap();
        let n = paths.len();
        ConflictGraph::from_distances(paths, ConflictPolicy::default(), vec![100.0; n * n]).unwrap()
    }

    fn scenario(d: &[(FlowDirection, FlowDirection)]) -> Scenario {
        Scenario::new(
            d.iter()
                .enumerate()
                .map(|(k, (e, x))| Demand::new(k, *e, *x))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn scenario_validation() {
        assert!(Scenario::new(vec![Demand::new(0, XPos, XNeg)]).is_err());
        assert!(
            Scenario::new(vec![Demand::new(0, XPos, YPos), Demand::new(1, XPos, ZPos)]).is_err()
        );
        assert!(
            Scenario::new(vec![Demand::new(0, XPos, YPos), Demand::new(0, YPos, ZPos)]).is_err()
        );
    }

    #[test]
    fn single_uav_flies_direct() {
        let g = graph();
        for e in FlowDirection::ALL {
            for x in FlowDirection::ALL
                .into_iter()
                .filter(|x| *x != e.opposite())
            {
                let a = solve_max_flow(&scenario(&[(e, x)]), &g).unwrap();
                assert_eq!(a.objective, 1.0);
                assert_eq!(a.served[&0], PathKind::Direct);
            }
        }
    }

    #[test]
    fn rerouting_resolves_a_direct_conflict() {
        let g = graph();
        let mut checked = 0;
        for (m, n) in g.conflict_set() {
            let (a, b) = (g.path(m), g.path(n));
            if a.kind != PathKind::Direct || b.kind != PathKind::Direct || a.entry == b.entry {
                continue;
            }
            let s = scenario(&[(a.entry.flow, a.exit.flow), (b.entry.flow, b.exit.flow)]);
            let one_arc = [(0, 1), (0, 2), (1, 0), (2, 0)].iter().any(|&(ka, kb)| {
                let i = g
                    .index_of(a.entry.flow, a.exit.flow, PathKind::ALL[ka])
                    .unwrap();
                let j = g
                    .index_of(b.entry.flow, b.exit.flow, PathKind::ALL[kb])
                    .unwrap();
                !g.conflicts(i, j)
            });
            if !one_arc {
                continue;
            }
            let res = solve_max_flow(&s, &g).unwrap();
            assert_eq!(res.served_count(), 2);
            let arcs = res
                .served
                .values()
                .filter(|k| **k != PathKind::Direct)
                .count();
            assert_eq!(arcs, 1);
            assert_eq!(classify_scenario(&s, &g).unwrap(), ScenarioClass::Resolved);
            checked += 1;
        }
        assert!(checked > 0);
    }

    #[test]
    fn forced_collision_serves_n_minus_one() {
        let mut g = empty_graph();
        let s = scenario(&[(XPos, YPos), (YPos, XPos)]);
        for ka in PathKind::ALL {
            for kb in PathKind::ALL {
                let i = g.index_of(XPos, YPos, ka).unwrap();
                let j = g.index_of(YPos, XPos, kb).unwrap();
                g.set_conflict(i, j, true);
            }
        }
        let a = solve_max_flow(&s, &g).unwrap();
        assert_eq!(a.served_count(), 1);
        // the shorter direct path wins the length tie-break
        assert_eq!(a.served.get(&1), Some(&PathKind::Direct));
        assert_eq!(a.unserved.iter().copied().collect::<Vec<_>>(), [0]);
        assert_eq!(classify_scenario(&s, &g).unwrap(), ScenarioClass::Collision);
        assert_eq!(assign_paths_oracle(&s, &g).unwrap(), a);

        let plan = FlightPlan::complete(&s, &a, &g).unwrap();
        assert_eq!(plan.residual_conflicts(&g), vec![(0, 1)]);
    }

    #[test]
    fn no_conflict_class() {
        let g = empty_graph();
        let s = scenario(&[(XPos, YPos), (ZPos, ZPos)]);
        assert_eq!(
            classify_scenario(&s, &g).unwrap(),
            ScenarioClass::NoConflict
        );
    }

    #[test]
    fn weights_shift_the_objective() {
        let mut g = empty_graph();
        let s = scenario(&[(XPos, YPos), (YPos, XPos)]);
        for ka in PathKind::ALL {
            for kb in PathKind::ALL {
                let i = g.index_of(XPos, YPos, ka).unwrap();
                let j = g.index_of(YPos, XPos, kb).unwrap();
                g.set_conflict(i, j, true);
            }
        }
        let a = solve_max_flow_weighted(&s, &g, &[1.0, 2.0]).unwrap();
        assert_eq!(a.served.keys().copied().collect::<Vec<_>>(), [1]);
        assert_eq!(a.objective, 2.0);
        assert!(solve_max_flow_weighted(&s, &g, &[1.0]).is_err());
        assert!(solve_max_flow_weighted(&s, &g, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn combinations_are_lexicographic() {
        assert_eq!(
            combinations(4, 2),
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        assert_eq!(combinations(6, 6).len(), 1);
        assert_eq!(combinations(6, 3).len(), 20);
    }

    #[test]
    fn six_uav_worst_case_terminates() {
        let g = graph();
        let s = scenario(&[
            (XPos, YPos),
            (XNeg, YNeg),
            (YPos, XNeg),
            (YNeg, XPos),
            (ZPos, XPos),
            (ZNeg, YPos),
        ]);
        let a = solve_max_flow(&s, &g).unwrap();
        let o = assign_paths_oracle(&s, &g).unwrap();
        assert_eq!(a.served_count(), o.served_count());
        assert!(a.violations(&s, &g).unwrap().is_empty());
        assert!(a.objective >= 1.0);
    }
}
