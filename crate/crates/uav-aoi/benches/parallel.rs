//! Rayon-vs-sequential benchmarks for the data-parallel sections: Monte
//! Carlo channel statistics, batch evaluation, and experiment cells.
//!
//! `exec::map_collect` fans out on rayon under the default `parallel`
//! feature; the `*_seq` reference paths are always sequential, so one build
//! compares both.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use uav_aoi::experiments::{desk_scenario, tiny_scenario};
use uav_aoi::marl::{self, TrainMode};
use uav_aoi::ppo::PpoConfig;
use uav_aoi::{env::channel, exec};

fn bench_channel_monte_carlo(c: &mut Criterion) {
    let mut cfg = desk_scenario();
    cfg.pure_los = false;
    let distances: Vec<f64> = (1..=64).map(|i| 50.0 * i as f64).collect();
    let draws = 4096usize;
    let mut group = c.benchmark_group("channel_monte_carlo");
    group.bench_function(BenchmarkId::new("parallel", distances.len()), |b| {
        b.iter(|| {
            let means = exec::map_collect(&distances, |&d| {
                channel::mean_gain_distance_sq(&cfg, d, draws, 7)
            });
            black_box(means)
        })
    });
    group.bench_function(BenchmarkId::new("sequential", distances.len()), |b| {
        b.iter(|| {
            let means = exec::map_collect_seq(&distances, |&d| {
                channel::mean_gain_distance_sq(&cfg, d, draws, 7)
            });
            black_box(means)
        })
    });
    group.finish();
}

fn bench_batch_evaluation(c: &mut Criterion) {
    let cfg = desk_scenario();
    let spec = uav_aoi::experiments::default_obs_spec();
    let ppo = PpoConfig::default();
    let bundles = marl::init_bundles(TrainMode::Dec, &cfg, &spec, &ppo, 3);
    let seeds: Vec<u64> = (0..16).collect();
    let mut group = c.benchmark_group("batch_evaluation");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| {
            let out = exec::map_collect(&seeds, |&s| {
                marl::evaluate(&bundles, &cfg, &spec, 1, s).expect("evaluation runs")
            });
            black_box(out)
        })
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let out = exec::map_collect_seq(&seeds, |&s| {
                marl::evaluate(&bundles, &cfg, &spec, 1, s).expect("evaluation runs")
            });
            black_box(out)
        })
    });
    group.finish();
}

fn bench_training_cells(c: &mut Criterion) {
    let cfg = tiny_scenario();
    let spec = uav_aoi::experiments::default_obs_spec();
    let ppo = uav_aoi::experiments::default_ppo();
    let cells: Vec<(TrainMode, u64)> = TrainMode::ALL
        .iter()
        .flat_map(|&m| (0..2u64).map(move |s| (m, s)))
        .collect();
    let mut group = c.benchmark_group("training_cells");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| {
            let out = exec::map_collect(&cells, |&(mode, seed)| {
                marl::train(mode, &cfg, &spec, &ppo, 20, seed)
                    .expect("training runs")
                    .metrics
                    .len()
            });
            black_box(out)
        })
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let out = exec::map_collect_seq(&cells, |&(mode, seed)| {
                marl::train(mode, &cfg, &spec, &ppo, 20, seed)
                    .expect("training runs")
                    .metrics
                    .len()
            });
            black_box(out)
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_channel_monte_carlo,
    bench_batch_evaluation,
    bench_training_cells
);
criterion_main!(benches);
