use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use sphereabout_core::{
    build_conflict_graph, candidate_paths, enumerate_scenarios, fixed_lag_study, min_pair_distance,
    run_table, sample_path, solve_max_flow, ConflictTiming, ExperimentConfig, McConfig,
};

fn conflict_graph(c: &mut Criterion) {
    let mut g = c.benchmark_group("conflict_graph");
    g.sample_size(10);
    for timing in [ConflictTiming::Synchronized, ConflictTiming::Geometric] {
        let mut exp = ExperimentConfig::standard(13.0, 3.0);
        exp.policy.timing = timing;
        let layout = exp.layout().unwrap();
        g.bench_function(format!("{timing:?}"), |b| {
            b.iter(|| build_conflict_graph(black_box(&layout), &exp.policy).unwrap())
        });
    }
    g.finish();
}

fn pair_distance(c: &mut Criterion) {
    let mut exp = ExperimentConfig::standard(13.0, 3.0);
    exp.policy.timing = ConflictTiming::Geometric;
    let paths = candidate_paths(&exp.layout().unwrap()).unwrap();
    let a = sample_path(&paths[0], 0.1).unwrap();
    let b = sample_path(&paths[47], 0.1).unwrap();
    c.bench_function("min_pair_distance", |bench| {
        bench.iter(|| min_pair_distance(black_box(&a), black_box(&b), &exp.policy).unwrap())
    });
}

fn solver(c: &mut Criterion) {
    let graph = ExperimentConfig::standard(13.0, 3.0).graph().unwrap();
    let mut g = c.benchmark_group("solve_max_flow");
    for n in [2, 4, 6] {
        let scenarios = enumerate_scenarios(n).unwrap();
        let step = (scenarios.len() / 64).max(1);
        let picks: Vec<_> = scenarios.into_iter().step_by(step).collect();
        g.bench_function(format!("n{n}"), |b| {
            b.iter_batched(
                || picks.clone(),
                |ps| {
                    ps.iter()
                        .map(|s| solve_max_flow(s, &graph).unwrap().served_count())
                        .sum::<usize>()
                },
                BatchSize::SmallInput,
            )
        });
    }
    g.finish();
}

fn table(c: &mut Criterion) {
    let mut g = c.benchmark_group("table");
    g.sample_size(10);
    let exp = ExperimentConfig::standard(13.0, 3.0);
    g.bench_function("r13_d3", |b| b.iter(|| run_table(black_box(&exp)).unwrap()));
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let mut g = c.benchmark_group("monte_carlo");
    g.sample_size(10);
    let exp = ExperimentConfig::standard(13.0, 3.0);
    let mc = McConfig {
        n_experiments: 100,
        ..McConfig::default()
    };
    g.bench_function("fixed_lag_100", |b| {
        b.iter(|| fixed_lag_study(&mc, black_box(&exp)).unwrap())
    });
    g.finish();
}

criterion_group!(
    benches,
    conflict_graph,
    pair_distance,
    solver,
    table,
    monte_carlo
);
criterion_main!(benches);
