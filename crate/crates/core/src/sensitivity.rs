//! Seeded timing Monte Carlos and travel-time statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{FlightPlan, Scenario, ScenarioClass};
use crate::conflict::{
    temporal_conflicts, ConflictGraph, ConflictPolicy, ConflictTiming, MotionProfile,
};
use crate::error::{Error, Result};
use crate::experiments::{evaluate_all, ExperimentConfig};
use crate::geometry::{candidate_paths, SphereLayout};

/// Which scenarios the Monte Carlos draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSet {
    /// Scenarios whose optimum leaves a UAV unserved.
    #[default]
    CollisionScenarios,
    AllScenarios,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_experiments: usize,
    pub seed: u64,
    pub velocity_min_mps: f64,
    pub velocity_max_mps: f64,
    /// Speed in the fixed-lag study.
    pub reference_speed_mps: f64,
    pub dt_s: f64,
    pub target_set: TargetSet,
    /// Conflict relation that decides which scenarios are collisions when
    /// building the target pool. Flights are always checked in time.
    pub pool_timing: ConflictTiming,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_experiments: 3000,
            seed: 20_250_101,
            velocity_min_mps: 1.0,
            velocity_max_mps: 5.0,
            reference_speed_mps: 5.0,
            dt_s: 0.02,
            target_set: TargetSet::CollisionScenarios,
            pool_timing: ConflictTiming::Geometric,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_experiments == 0 {
            return Err(Error::config("n_experiments", "must be at least 1"));
        }
        if !(self.velocity_min_mps > 0.0) {
            return Err(Error::config("velocity_min_mps", "must be positive"));
        }
        if !(self.velocity_max_mps >= self.velocity_min_mps) {
            return Err(Error::config(
                "velocity_max_mps",
                "must be at least velocity_min_mps",
            ));
        }
        if !(self.reference_speed_mps > 0.0) {
            return Err(Error::config("reference_speed_mps", "must be positive"));
        }
        if !(self.dt_s > 0.0) {
            return Err(Error::config("dt_s", "must be positive"));
        }
        Ok(())
    }

    /// Generator for one experiment: the master seed picks the key, the
    /// experiment index picks the stream, so results do not depend on
    /// scheduling.
    pub fn rng(&self, experiment: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(experiment as u64);
        rng
    }

    /// Conflict graph used to classify the target pool.
    pub fn pool_graph(&self, experiment: &ExperimentConfig) -> Result<ConflictGraph> {
        let mut e = experiment.clone();
        e.policy.timing = self.pool_timing;
        e.graph()
    }

    pub fn targets(&self, experiment: &ExperimentConfig) -> Result<(ConflictGraph, Vec<McTarget>)> {
        let graph = self.pool_graph(experiment)?;
        let targets = mc_targets(experiment, &graph, self.target_set)?;
        Ok((graph, targets))
    }
}

/// Counts of experiments by number of conflicting UAV pairs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictHistogram {
    pub counts: BTreeMap<usize, usize>,
    pub n_experiments: usize,
}

impl ConflictHistogram {
    pub fn from_samples(samples: &[usize]) -> Self {
        let mut counts = BTreeMap::new();
        for &s in samples {
            *counts.entry(s).or_default() += 1;
        }
        ConflictHistogram {
            counts,
            n_experiments: samples.len(),
        }
    }

    pub fn total_conflicts(&self) -> usize {
        self.counts.iter().map(|(k, c)| k * c).sum()
    }

    pub fn mean(&self) -> f64 {
        self.total_conflicts() as f64 / self.n_experiments.max(1) as f64
    }

    pub fn fraction_conflict_free(&self) -> f64 {
        self.counts.get(&0).copied().unwrap_or(0) as f64 / self.n_experiments.max(1) as f64
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "conflicting_pairs,experiments")?;
        for (k, c) in &self.counts {
            writeln!(w, "{k},{c}")?;
        }
        Ok(())
    }
}

/// A scenario with every UAV on a path, ready to fly.
#[derive(Debug, Clone, PartialEq)]
pub struct McTarget {
    pub scenario: Scenario,
    pub plan: FlightPlan,
}

/// Target pool over the configured UAV counts, in sweep order.
pub fn mc_targets(
    experiment: &ExperimentConfig,
    graph: &ConflictGraph,
    set: TargetSet,
) -> Result<Vec<McTarget>> {
    let mut out = Vec::new();
    for &n in &experiment.n_uavs {
        for o in evaluate_all(n, graph)? {
            if set == TargetSet::CollisionScenarios && o.class != ScenarioClass::Collision {
                continue;
            }
            let plan = FlightPlan::complete(&o.scenario, &o.assignment, graph)?;
            out.push(McTarget {
                scenario: o.scenario,
                plan,
            });
        }
    }
    Ok(out)
}

fn profiles(
    target: &McTarget,
    graph: &ConflictGraph,
    speeds: &[f64],
    entry_times: &[f64],
) -> Result<Vec<MotionProfile>> {
    target
        .plan
        .legs
        .iter()
        .enumerate()
        .map(|(k, (_, _, idx))| {
            MotionProfile::new(graph.path(*idx).clone(), speeds[k], entry_times[k])
        })
        .collect()
}

/// Baseline (simultaneous entry) and lagged conflict histograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagStudy {
    pub baseline: ConflictHistogram,
    pub lagged: ConflictHistogram,
}

/// One fixed-lag draw: the target drawn, its simultaneous-entry conflicts
/// and its conflicts after lagging.
#[derive(Debug, Clone, PartialEq)]
pub struct LagDraw {
    pub target: usize,
    pub entry_times_s: Vec<f64>,
    pub baseline: BTreeSet<(usize, usize)>,
    pub lagged: BTreeSet<(usize, usize)>,
}

/// Experiment `e` of the fixed-lag study. The drawn target is flown at the
/// reference speed with simultaneous entry; for every conflicting pair (in
/// index order) the UAV with the longer path is held back by
/// `max(|La - Lb| / v, d_min / v)` relative to its partner, equal lengths
/// split by a coin flip. The lagged flights are then re-checked.
pub fn fixed_lag_draw(
    targets: &[McTarget],
    graph: &ConflictGraph,
    policy: &ConflictPolicy,
    config: &McConfig,
    e: usize,
) -> Result<LagDraw> {
    if targets.is_empty() {
        return Err(Error::Input("Monte Carlo target set is empty".into()));
    }
    let v = config.reference_speed_mps;
    let mut rng = config.rng(e);
    let pick = rng.random_range(0..targets.len());
    let target = &targets[pick];
    let n = target.plan.legs.len();
    let speeds = vec![v; n];
    let mut entry = vec![0.0; n];
    let baseline = temporal_conflicts(
        &profiles(target, graph, &speeds, &entry)?,
        policy,
        config.dt_s,
    )?;
    let lengths: Vec<f64> = target
        .plan
        .legs
        .iter()
        .map(|l| graph.path(l.2).length_m)
        .collect();
    for &(a, b) in &baseline {
        let diff = lengths[a] - lengths[b];
        let later_a = if diff.abs() <= 1e-9 {
            rng.random_bool(0.5)
        } else {
            diff > 0.0
        };
        let (slow, other) = if later_a { (a, b) } else { (b, a) };
        let lag = (diff.abs() / v).max(policy.d_min_m / v);
        entry[slow] = entry[slow].max(entry[other] + lag);
    }
    let lagged = temporal_conflicts(
        &profiles(target, graph, &speeds, &entry)?,
        policy,
        config.dt_s,
    )?;
    Ok(LagDraw {
        target: pick,
        entry_times_s: entry,
        baseline,
        lagged,
    })
}

/// Fixed-lag study over `n_experiments` draws (see [`fixed_lag_draw`]).
pub fn fixed_lag_on(
    targets: &[McTarget],
    graph: &ConflictGraph,
    policy: &ConflictPolicy,
    config: &McConfig,
) -> Result<LagStudy> {
    config.validate()?;
    if targets.is_empty() {
        return Ok(LagStudy {
            baseline: ConflictHistogram::from_samples(&[]),
            lagged: ConflictHistogram::from_samples(&[]),
        });
    }
    let runs: Vec<(usize, usize)> = (0..config.n_experiments)
        .into_par_iter()
        .map(|e| {
            let d = fixed_lag_draw(targets, graph, policy, config, e)?;
            Ok((d.baseline.len(), d.lagged.len()))
        })
        .collect::<Result<_>>()?;
    let base: Vec<usize> = runs.iter().map(|r| r.0).collect();
    let lagged: Vec<usize> = runs.iter().map(|r| r.1).collect();
    Ok(LagStudy {
        baseline: ConflictHistogram::from_samples(&base),
        lagged: ConflictHistogram::from_samples(&lagged),
    })
}

/// [`fixed_lag_on`] over the experiment's target pool. An empty pool gives
/// empty histograms.
pub fn fixed_lag_study(config: &McConfig, experiment: &ExperimentConfig) -> Result<LagStudy> {
    let (graph, targets) = config.targets(experiment)?;
    fixed_lag_on(&targets, &graph, &experiment.policy, config)
}

pub fn fixed_lag_mc(config: &McConfig, experiment: &ExperimentConfig) -> Result<ConflictHistogram> {
    Ok(fixed_lag_study(config, experiment)?.lagged)
}

/// Experiment `e` of the random-velocity study: the drawn target's
/// conflicting pairs when every UAV enters at `t = 0` with a speed drawn
/// uniformly from the configured range.
pub fn random_velocity_draw(
    targets: &[McTarget],
    graph: &ConflictGraph,
    policy: &ConflictPolicy,
    config: &McConfig,
    e: usize,
) -> Result<BTreeSet<(usize, usize)>> {
    if targets.is_empty() {
        return Err(Error::Input("Monte Carlo target set is empty".into()));
    }
    let mut rng = config.rng(e);
    let target = &targets[rng.random_range(0..targets.len())];
    let n = target.plan.legs.len();
    let speeds: Vec<f64> = (0..n)
        .map(|_| rng.random_range(config.velocity_min_mps..=config.velocity_max_mps))
        .collect();
    let entry = vec![0.0; n];
    temporal_conflicts(
        &profiles(target, graph, &speeds, &entry)?,
        policy,
        config.dt_s,
    )
}

pub fn random_velocity_on(
    targets: &[McTarget],
    graph: &ConflictGraph,
    policy: &ConflictPolicy,
    config: &McConfig,
) -> Result<ConflictHistogram> {
    config.validate()?;
    if targets.is_empty() {
        return Ok(ConflictHistogram::from_samples(&[]));
    }
    let samples: Vec<usize> = (0..config.n_experiments)
        .into_par_iter()
        .map(|e| Ok(random_velocity_draw(targets, graph, policy, config, e)?.len()))
        .collect::<Result<_>>()?;
    Ok(ConflictHistogram::from_samples(&samples))
}

/// [`random_velocity_on`] over the experiment's target pool.
pub fn random_velocity_mc(
    config: &McConfig,
    experiment: &ExperimentConfig,
) -> Result<ConflictHistogram> {
    let (graph, targets) = config.targets(experiment)?;
    random_velocity_on(&targets, &graph, &experiment.policy, config)
}

/// Path population for travel-time statistics.
#[derive(Debug, Clone, PartialEq)]
pub enum TravelTimeSource {
    /// Each of the 90 candidate paths once.
    CandidatePaths,
    /// Every served path over an exhaustive sweep.
    Sweep {
        n_uavs: Vec<usize>,
        policy: ConflictPolicy,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelTimeSummary {
    pub radius_m: f64,
    pub speed_mps: f64,
    pub count: usize,
    pub min_s: f64,
    pub mean_s: f64,
    pub max_s: f64,
    /// `(bin start in s, count)` for bins of `bin_width_s`.
    pub histogram: Vec<(f64, usize)>,
    pub bin_width_s: f64,
}

/// Transit time `L / v` for every path of the source at every speed.
pub fn travel_time_stats(
    layout: &SphereLayout,
    speeds_mps: &[f64],
    source: &TravelTimeSource,
    bin_width_s: f64,
) -> Result<Vec<TravelTimeSummary>> {
    if !(bin_width_s > 0.0) {
        return Err(Error::config("travel_time_bin_s", "must be positive"));
    }
    if let Some(v) = speeds_mps.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Input(format!("speed must be positive, got {v}")));
    }
    let lengths: Vec<f64> = match source {
        TravelTimeSource::CandidatePaths => candidate_paths(layout)?
            .iter()
            .map(|p| p.length_m)
            .collect(),
        TravelTimeSource::Sweep { n_uavs, policy } => {
            let experiment = ExperimentConfig {
                radius_m: layout.radius_m(),
                equatorial_offset_deg: layout.equatorial_offset_deg(),
                polar_offset_deg: layout.polar_offset_deg(),
                circulation: layout.circulation(),
                n_uavs: n_uavs.clone(),
                policy: policy.clone(),
            };
            let graph = experiment.graph()?;
            let mut out = Vec::new();
            for &n in n_uavs {
                for o in evaluate_all(n, &graph)? {
                    for d in o.scenario.demands() {
                        if let Some(kind) = o.assignment.served.get(&d.uav) {
                            let idx = graph
                                .index_of(d.entry, d.exit, *kind)
                                .expect("feasible demand");
                            out.push(graph.path(idx).length_m);
                        }
                    }
                }
            }
            out
        }
    };
    if lengths.is_empty() {
        return Err(Error::Input("no paths to time".into()));
    }
    Ok(speeds_mps
        .iter()
        .map(|&v| {
            let times: Vec<f64> = lengths.iter().map(|l| l / v).collect();
            let min_s = times.iter().copied().fold(f64::INFINITY, f64::min);
            let max_s = times.iter().copied().fold(0.0, f64::max);
            let mut bins: BTreeMap<usize, usize> = BTreeMap::new();
            for t in &times {
                *bins.entry((t / bin_width_s).floor() as usize).or_default() += 1;
            }
            TravelTimeSummary {
                radius_m: layout.radius_m(),
                speed_mps: v,
                count: times.len(),
                min_s,
                mean_s: times.iter().sum::<f64>() / times.len() as f64,
                max_s,
                histogram: bins
                    .into_iter()
                    .map(|(b, c)| (b as f64 * bin_width_s, c))
                    .collect(),
                bin_width_s,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_layout, Circulation};

    fn setup(n: Vec<usize>) -> (ExperimentConfig, ConflictGraph) {
        let mut cfg = ExperimentConfig::standard(13.0, 3.0);
        cfg.n_uavs = n;
        let g = cfg.graph().unwrap();
        (cfg, g)
    }

    #[test]
    fn streams_are_independent_of_order() {
        let c = McConfig::default();
        let a: u64 = c.rng(7).random();
        let _: u64 = c.rng(3).random();
        let b: u64 = c.rng(7).random();
        assert_eq!(a, b);
        assert_ne!(a, c.rng(8).random::<u64>());
    }

    #[test]
    fn histogram_statistics() {
        let h = ConflictHistogram::from_samples(&[0, 0, 1, 3]);
        assert_eq!(h.total_conflicts(), 4);
        assert_eq!(h.mean(), 1.0);
        assert_eq!(h.fraction_conflict_free(), 0.5);
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "conflicting_pairs,experiments\n0,2\n1,1\n3,1\n"
        );
    }

    #[test]
    fn empty_pool_gives_empty_histograms() {
        let (_, g) = setup(vec![2]);
        let h = random_velocity_on(&[], &g, g.policy(), &McConfig::default()).unwrap();
        assert_eq!(h.n_experiments, 0);
        assert!(h.counts.is_empty());
        let s = fixed_lag_on(&[], &g, g.policy(), &McConfig::default()).unwrap();
        assert_eq!(s.lagged.n_experiments, 0);
    }

    #[test]
    fn mc_is_reproducible() {
        let (cfg, g) = setup(vec![3]);
        let targets = mc_targets(&cfg, &g, TargetSet::AllScenarios).unwrap();
        let mc = McConfig {
            n_experiments: 40,
            ..McConfig::default()
        };
        let a = random_velocity_on(&targets, &g, g.policy(), &mc).unwrap();
        let b = random_velocity_on(&targets, &g, g.policy(), &mc).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_experiments, 40);
        let s = fixed_lag_on(&targets, &g, g.policy(), &mc).unwrap();
        assert_eq!(s, fixed_lag_on(&targets, &g, g.policy(), &mc).unwrap());
    }

    #[test]
    fn travel_time_extremes_follow_path_lengths() {
        let l = build_layout(26.0, 22.5, 22.5, Circulation::Counterclockwise).unwrap();
        let s = travel_time_stats(&l, &[1.0, 5.0], &TravelTimeSource::CandidatePaths, 5.0).unwrap();
        let longest = candidate_paths(&l)
            .unwrap()
            .iter()
            .map(|p| p.length_m)
            .fold(0.0, f64::max);
        assert_eq!(s[0].count, 90);
        assert!((s[0].max_s - longest).abs() < 1e-9);
        assert!((s[1].max_s - longest / 5.0).abs() < 1e-9);
        assert!(s[0].max_s > 60.0);
        assert_eq!(s[0].histogram.iter().map(|b| b.1).sum::<usize>(), 90);
    }
}
