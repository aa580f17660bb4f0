//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the verdict lines are always printed.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sphereabout_core::experiments::{reference_row, run_table_with, TableReport};
use sphereabout_core::geometry::candidate_paths;
use sphereabout_core::sensitivity::{fixed_lag_on, random_velocity_on, LagStudy};
use sphereabout_core::*;

struct Verdict {
    id: u32,
    name: &'static str,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Verdict {
    fn new(id: u32, name: &'static str) -> Self {
        Verdict {
            id,
            name,
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

fn layout(r: f64) -> SphereLayout {
    build_layout(r, 22.5, 22.5, Circulation::Counterclockwise).unwrap()
}

const BLOCKS: [(f64, f64); 4] = [(13.0, 3.0), (13.0, 4.0), (26.0, 3.0), (26.0, 5.0)];

fn random_scenario(rng: &mut ChaCha8Rng, n: usize) -> Scenario {
    let mut entries = FlowDirection::ALL.to_vec();
    entries.shuffle(rng);
    entries.truncate(n);
    entries.sort();
    let demands = entries
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let exits: Vec<FlowDirection> = FlowDirection::ALL
                .into_iter()
                .filter(|x| *x != e.opposite())
                .collect();
            Demand::new(k, *e, exits[rng.random_range(0..exits.len())])
        })
        .collect();
    Scenario::new(demands).unwrap()
}

fn c1() -> Verdict {
    let mut v = Verdict::new(1, "scenario-count exactness");
    let t = Instant::now();
    let counts: Vec<usize> = (2..=6)
        .map(|n| enumerate_scenarios(n).unwrap().len())
        .collect();
    let took = t.elapsed();
    v.check(counts == [375, 2500, 9375, 18750, 15625], || {
        format!("counts {counts:?}")
    });
    v.check(took < Duration::from_secs(1), || {
        format!("enumeration took {took:?}")
    });
    v.note(format!("{counts:?} in {took:.2?}"));
    v
}

fn c2(tables: &[(f64, f64, Vec<MetricsRow>)], took: Duration) -> Verdict {
    let mut v = Verdict::new(2, "partition identity");
    for (r, d, rows) in tables {
        v.check(rows.len() == 5, || {
            format!("({r},{d}) has {} rows", rows.len())
        });
        for row in rows {
            v.check(
                row.collisions + row.no_conflict + row.resolved == row.scenarios,
                || format!("({r},{d}) N={} partition {row:?}", row.n_uavs),
            );
        }
    }
    v.check(took < Duration::from_secs(600), || {
        format!("sweep took {took:?}")
    });
    v.note(format!("4 blocks x N=2..6 in {took:.2?}"));
    v
}

fn c3() -> Verdict {
    let mut v = Verdict::new(3, "geometry identities");
    let chord = layout(13.0).adjacent_equatorial_chord_m();
    v.check((chord - 9.9497).abs() < 1e-3, || {
        format!("adjacent chord {chord}")
    });
    for r in [13.0, 26.0] {
        let paths = candidate_paths(&layout(r)).unwrap();
        for pair in paths.chunks(3) {
            let sum = pair[1].length_m + pair[2].length_m;
            let rel = (sum - 2.0 * PI * r).abs() / (2.0 * PI * r);
            v.check(rel < 1e-9, || {
                format!(
                    "R={r} {} -> {}: short+long rel err {rel:e}",
                    pair[0].entry, pair[0].exit
                )
            });
        }
    }
    v.note(format!(
        "adjacent chord {chord:.4} m; 60 short+long sums checked"
    ));
    v
}

fn c4() -> Verdict {
    let mut v = Verdict::new(4, "solver-oracle equivalence");
    let graph = ExperimentConfig::standard(13.0, 3.0).graph().unwrap();
    let mut checked = 0;
    let mut compare = |s: &Scenario, v: &mut Verdict| {
        let a = solve_max_flow(s, &graph).unwrap();
        let b = assign_paths_oracle(s, &graph).unwrap();
        checked += 1;
        v.check(a.served_count() == b.served_count(), || {
            format!(
                "{s:?}: solver {} oracle {}",
                a.served_count(),
                b.served_count()
            )
        });
    };
    for n in [2, 3] {
        for s in enumerate_scenarios(n).unwrap() {
            compare(&s, &mut v);
        }
    }
    for n in 4..=6 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + n as u64);
        for _ in 0..200 {
            let s = random_scenario(&mut rng, n);
            compare(&s, &mut v);
        }
    }
    v.note(format!("{checked} scenarios compared"));
    v
}

fn c5(tables: &[(f64, f64, Vec<MetricsRow>)]) -> Verdict {
    let mut v = Verdict::new(5, "reference-row reproduction at (13, 3)");
    let rows = &tables[0].2;
    for row in rows {
        let n = row.n_uavs;
        if n <= 3 {
            v.check(row.collisions == 0, || {
                format!("N={n} collisions {}", row.collisions)
            });
            v.check(row.avg_flow == n as f64, || {
                format!("N={n} avg_flow {}", row.avg_flow)
            });
        } else {
            let reference = reference_row(13.0, 3.0, n).unwrap();
            let delta = row.avg_flow - reference.avg_flow;
            let share = row.path_load[0] / row.avg_flow;
            v.check(delta.abs() <= 0.10, || {
                format!(
                    "N={n} avg_flow {:.3} vs {:.3}",
                    row.avg_flow, reference.avg_flow
                )
            });
            v.check(share >= 0.70, || {
                format!("N={n} path-load-1 share {share:.3}")
            });
            v.note(format!(
                "N={n} avg_flow {:.3} (ref {:.3}), direct share {share:.3}",
                row.avg_flow, reference.avg_flow
            ));
        }
    }
    if !v.failures.is_empty() {
        let cfg = ExperimentConfig::standard(13.0, 3.0);
        let report = TableReport::new(&cfg, rows.clone(), Vec::new());
        v.note(serde_json::to_string(&report).unwrap());
    }
    v
}

fn c6(tables: &[(f64, f64, Vec<MetricsRow>)]) -> Verdict {
    let mut v = Verdict::new(6, "monotonicity");
    let g3 = ExperimentConfig::standard(13.0, 3.0).graph().unwrap();
    let g4 = ExperimentConfig::standard(13.0, 4.0).graph().unwrap();
    let (s3, s4) = (g3.conflict_set(), g4.conflict_set());
    v.check(s3.is_subset(&s4), || {
        format!(
            "{} d=3 conflicts missing at d=4",
            s3.difference(&s4).count()
        )
    });
    let find = |r: f64, d: f64| &tables.iter().find(|t| t.0 == r && t.1 == d).unwrap().2;
    for (a, b, c) in find(13.0, 3.0)
        .iter()
        .zip(find(13.0, 4.0))
        .zip(find(26.0, 3.0))
        .map(|((a, b), c)| (a, b, c))
    {
        let n = a.n_uavs;
        v.check(a.collisions <= b.collisions, || {
            format!(
                "N={n} collisions d=3 {} > d=4 {}",
                a.collisions, b.collisions
            )
        });
        v.check(c.collisions <= a.collisions, || {
            format!(
                "N={n} collisions R=26 {} > R=13 {}",
                c.collisions, a.collisions
            )
        });
    }
    v.note(format!(
        "conflict pairs {} (d=3) within {} (d=4)",
        s3.len(),
        s4.len()
    ));
    v
}

fn c7() -> Verdict {
    let mut v = Verdict::new(7, "conflict-distance convergence");
    let mut worst: f64 = 0.0;
    for timing in [ConflictTiming::Synchronized, ConflictTiming::Geometric] {
        for r in [13.0, 26.0] {
            let coarse = ConflictPolicy {
                timing,
                ..ConflictPolicy::default()
            };
            let fine = ConflictPolicy {
                max_spacing_m: 0.05,
                ..coarse.clone()
            };
            let l = layout(r);
            let a = build_conflict_graph(&l, &coarse).unwrap();
            let b = build_conflict_graph(&l, &fine).unwrap();
            for (m, n) in a.index_pairs().collect::<Vec<_>>() {
                let (x, y) = (a.min_dist(m, n), b.min_dist(m, n));
                if x.is_infinite() || y.is_infinite() {
                    v.check(x == y, || {
                        format!("{timing:?} R={r} pair ({m},{n}): {x} vs {y}")
                    });
                    continue;
                }
                worst = worst.max((x - y).abs());
                v.check((x - y).abs() < 0.05, || {
                    format!("{timing:?} R={r} pair ({m},{n}): {x} vs {y}")
                });
                for d in [3.0, 4.0, 5.0] {
                    v.check((x <= d) == (y <= d), || {
                        format!("{timing:?} R={r} pair ({m},{n}) flips at d_min={d}")
                    });
                }
            }
        }
    }
    v.note(format!("largest change {worst:.2e} m over 4 x 4005 pairs"));
    v
}

fn c8() -> Verdict {
    let mut v = Verdict::new(8, "temporal dominance");
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let strict = ConflictPolicy::default().strict();
    let masked = ConflictPolicy::default();
    let all: Vec<(f64, Vec<PathSpec>)> = [13.0, 26.0]
        .map(|r| (r, candidate_paths(&layout(r)).unwrap()))
        .into();
    let mut tightest = f64::INFINITY;
    for _ in 0..1000 {
        let (_, paths) = &all[rng.random_range(0..2)];
        let a = paths[rng.random_range(0..paths.len())].clone();
        let b = paths[rng.random_range(0..paths.len())].clone();
        let speed = rng.random_range(1.0..=5.0);
        let t0 = rng.random_range(0.0..10.0);
        let p = MotionProfile::new(a.clone(), speed, t0).unwrap();
        let q = MotionProfile::new(b.clone(), speed, t0).unwrap();
        let sa = sample_path(&a, strict.max_spacing_m).unwrap();
        let sb = sample_path(&b, strict.max_spacing_m).unwrap();
        let geo = min_pair_distance(&sa, &sb, &strict).unwrap();
        let temporal = temporal_min_distance(&p, &q, 0.02).unwrap();
        tightest = tightest.min(temporal - geo);
        v.check(temporal >= geo - 1e-9, || {
            format!("{a:?} / {b:?}: temporal {temporal} < geometric {geo}")
        });
        let geo_m = min_pair_distance(&sa, &sb, &masked).unwrap();
        let temporal_m = conflict::temporal_min_distance_masked(&p, &q, &masked, 0.02).unwrap();
        v.check(temporal_m >= geo_m - 1e-9, || {
            format!("{a:?} / {b:?}: masked temporal {temporal_m} < masked geometric {geo_m}")
        });
    }
    v.note(format!(
        "1000 pairs, smallest temporal - geometric margin {tightest:.3e} m"
    ));
    v
}

fn mc_targets_13_3() -> (ExperimentConfig, ConflictGraph, Vec<sensitivity::McTarget>) {
    let exp = ExperimentConfig::standard(13.0, 3.0);
    let (graph, targets) = McConfig::default().targets(&exp).unwrap();
    (exp, graph, targets)
}

fn c9() -> Verdict {
    let mut v = Verdict::new(9, "Monte-Carlo properties");
    let (exp, graph, targets) = mc_targets_13_3();
    let mc = McConfig::default();
    v.check(!targets.is_empty(), || "empty (13,3) collision set".into());
    if targets.is_empty() {
        return v;
    }
    let run = || -> (ConflictHistogram, LagStudy) {
        (
            random_velocity_on(&targets, &graph, &exp.policy, &mc).unwrap(),
            fixed_lag_on(&targets, &graph, &exp.policy, &mc).unwrap(),
        )
    };
    let (rv, lag) = run();
    v.check(rv.n_experiments == 3000, || {
        format!("{} experiments", rv.n_experiments)
    });
    let zero = rv.fraction_conflict_free();
    v.check(zero > 0.0, || {
        "no zero-conflict random-velocity experiment".into()
    });
    v.check(lag.lagged.mean() < lag.baseline.mean(), || {
        format!(
            "lagged mean {} not below baseline {}",
            lag.lagged.mean(),
            lag.baseline.mean()
        )
    });

    let bytes = |h: &(ConflictHistogram, LagStudy)| serde_json::to_vec(h).unwrap();
    let reference = bytes(&(rv.clone(), lag.clone()));
    v.check(bytes(&run()) == reference, || "rerun differs".into());
    for threads in [1, 3] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let again = pool.install(run);
        v.check(bytes(&again) == reference, || {
            format!("output differs with {threads} threads")
        });
    }
    v.note(format!(
        "pool {} scenarios; random-velocity zero share {zero:.3}; fixed-lag mean {:.4} vs baseline {:.4}",
        targets.len(),
        lag.lagged.mean(),
        lag.baseline.mean()
    ));
    v
}

fn c10() -> Verdict {
    let mut v = Verdict::new(10, "travel-time sanity");
    let speeds: Vec<f64> = (0..=8).map(|k| 1.0 + 0.5 * k as f64).collect();
    for r in [13.0, 26.0] {
        let l = layout(r);
        // longest long arc from node positions alone
        let longest = l
            .nodes()
            .filter(|(n, _)| n.side == Side::In)
            .flat_map(|(n, p)| {
                l.nodes()
                    .filter(move |(m, _)| m.side == Side::Out && m.flow != n.flow.opposite())
                    .map(move |(_, q)| {
                        r * (2.0 * PI - (p.dot(q) / (r * r)).clamp(-1.0, 1.0).acos())
                    })
            })
            .fold(0.0, f64::max);
        let stats = travel_time_stats(&l, &speeds, &TravelTimeSource::CandidatePaths, 5.0).unwrap();
        let max = stats.iter().map(|s| s.max_s).fold(0.0, f64::max);
        v.check((max - longest / 1.0).abs() < 1e-6, || {
            format!("R={r}: max {max} vs {}", longest)
        });
        if r == 26.0 {
            v.check(max > 60.0, || format!("R=26 max travel time {max}"));
        }
        v.note(format!("R={r}: max {max:.3} s"));
    }
    v
}

fn main() {
    let t = Instant::now();
    let tables: Vec<(f64, f64, Vec<MetricsRow>)> = BLOCKS
        .iter()
        .map(|&(r, d)| {
            let cfg = ExperimentConfig::standard(r, d);
            let graph = cfg.graph().unwrap();
            (r, d, run_table_with(&cfg, &graph).unwrap())
        })
        .collect();
    let sweep = t.elapsed();

    let verdicts = [
        c1(),
        c2(&tables, sweep),
        c3(),
        c4(),
        c5(&tables),
        c6(&tables),
        c7(),
        c8(),
        c9(),
        c10(),
    ];
    let mut failed = 0;
    for v in &verdicts {
        let status = if v.failures.is_empty() {
            "PASS"
        } else {
            "FAIL"
        };
        println!(
            "{status} criterion {:>2} ({}): {}",
            v.id,
            v.name,
            v.notes.join("; ")
        );
        for f in v.failures.iter().take(5) {
            println!("       {f}");
        }
        if v.failures.len() > 5 {
            println!("       ... {} more", v.failures.len() - 5);
        }
        failed += usize::from(!v.failures.is_empty());
    }
    println!(
        "acceptance: {} of {} criteria passed",
        verdicts.len() - failed,
        verdicts.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
