//! Scratch harness for the desk-scale scenario: checks the learning-effect,
//! scheme-parity, coverage, and frequency-effect behaviors across seeds.
//!
//! Usage: `cargo run --release --example tune_desk -- <episodes> <lr> <entropy> <rollout> [lambda] [discount]`

use uav_aoi::exec;
use uav_aoi::experiments::{default_obs_spec, desk_scenario, final_window_mean};
use uav_aoi::marl::{self, TrainMode};
use uav_aoi::oracle;
use uav_aoi::ppo::PpoConfig;
use uav_aoi::problem;

fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let rank = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut ranks = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                ranks[k] = avg;
            }
            i = j + 1;
        }
        ranks
    };
    let rx = rank(xs);
    let ry = rank(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>().sqrt();
    let sy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum::<f64>().sqrt();
    cov / (sx * sy)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let episodes: usize = args.get(1).map_or(400, |s| s.parse().unwrap());
    let lr: f64 = args.get(2).map_or(1e-3, |s| s.parse().unwrap());
    let entropy: f64 = args.get(3).map_or(0.01, |s| s.parse().unwrap());
    let rollout: usize = args.get(4).map_or(0, |s| s.parse().unwrap());
    let lambda: f64 = args.get(5).map_or(0.95, |s| s.parse().unwrap());
    let discount: f64 = args.get(6).map_or(0.99, |s| s.parse().unwrap());

    let cfg = desk_scenario();
    let spec = default_obs_spec();
    let ppo = PpoConfig {
        learning_rate: lr,
        entropy_coef: entropy,
        rollout_length: rollout,
        gae_lambda: lambda,
        discount,
        ..PpoConfig::default()
    };

    // Uniform-random policy baseline for the learning-effect check.
    let rand_seeds: Vec<u64> = (0..30).collect();
    let rand_obj1: Vec<f64> = exec::map_collect(&rand_seeds, |&s| {
        let traj = oracle::random_baseline(&cfg, s).unwrap();
        problem::objective1(&traj, &cfg).unwrap()
    });
    let rand_mean = rand_obj1.iter().sum::<f64>() / rand_obj1.len() as f64;
    println!("random-policy objective1 baseline = {rand_mean:.3}");

    let t0 = std::time::Instant::now();
    let cells: Vec<(TrainMode, u64)> = TrainMode::ALL
        .iter()
        .flat_map(|&m| (0..3u64).map(move |s| (m, s)))
        .collect();
    let results = exec::map_collect(&cells, |&(mode, seed)| {
        let out = marl::train(mode, &cfg, &spec, &ppo, episodes, seed).unwrap();
        let final_obj1 = final_window_mean(&out.metrics, |m| m.objective1);
        let final_obj2 = final_window_mean(&out.metrics, |m| m.objective2);
        let evals = marl::evaluate(&out.bundles, &cfg, &spec, 3, seed).unwrap();
        let eval_obj1 =
            evals.iter().map(|e| e.objective1).sum::<f64>() / evals.len() as f64;
        let distinct = evals
            .iter()
            .fold(vec![0u64; cfg.num_devices], |mut acc, e| {
                for (i, &c) in e.per_device_comms.iter().enumerate() {
                    acc[i] += c;
                }
                acc
            });
        let union_distinct = distinct.iter().filter(|&&c| c > 0).count();
        let ks: Vec<f64> = cfg.devices.iter().map(|d| d.gen_period_k as f64).collect();
        let comms: Vec<f64> = distinct.iter().map(|&c| c as f64).collect();
        let rho = spearman(&ks, &comms);
        (mode, seed, final_obj1, union_distinct, rho, comms, final_obj2, eval_obj1)
    });
    for (mode, seed, obj1, distinct, rho, comms, obj2, eval_obj1) in &results {
        println!(
            "{mode} seed {seed}: train obj1 = {obj1:8.2} ({:5.1}%R) obj2 = {obj2:7.2} | eval obj1 = {eval_obj1:8.2} ({:5.1}%R) distinct = {distinct}/8 rho = {rho:+.3} comms = {comms:?}",
            100.0 * obj1 / rand_mean,
            100.0 * eval_obj1 / rand_mean
        );
    }
    println!("elapsed {:.1}s", t0.elapsed().as_secs_f64());

    // Criterion-style summaries.
    for &mode in &TrainMode::ALL {
        let learn_pass = results
            .iter()
            .filter(|(m, _, o1, ..)| *m == mode && o1 / rand_mean <= 0.6)
            .count();
        println!("criterion 8 ({mode}): {learn_pass}/3 seeds at <= 60% of random");
    }
    let mode_mean = |mode: TrainMode| {
        let v: Vec<f64> = results
            .iter()
            .filter(|(m, ..)| *m == mode)
            .map(|(_, _, o1, ..)| *o1)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let greedy_traj = oracle::greedy_baseline(&cfg).unwrap();
    println!(
        "greedy baseline: obj1 = {:.2}, obj2 = {:.2}",
        problem::objective1(&greedy_traj, &cfg).unwrap(),
        problem::objective2(&greedy_traj, &cfg).unwrap()
    );
    let dec = mode_mean(TrainMode::Dec);
    let c1 = mode_mean(TrainMode::CentrObj1);
    println!(
        "criterion 9: dec {dec:.3} vs centr-obj1 {c1:.3} -> |diff|/c1 = {:.3}",
        (dec - c1).abs() / c1
    );
    let cov_pass = results
        .iter()
        .filter(|(m, _, _, d, ..)| *m == TrainMode::Dec && *d == cfg.num_devices)
        .count();
    println!("criterion 10 (dec): {cov_pass}/3 seeds with full coverage");
    let rho_pass = results
        .iter()
        .filter(|(m, _, _, _, rho, ..)| *m == TrainMode::Dec && *rho < 0.0)
        .count();
    println!("criterion 11 (dec): {rho_pass}/3 seeds with negative spearman");
}
