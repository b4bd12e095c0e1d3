//! Scratch harness for tuning PPO settings on the tiny oracle instance.
//!
//! Usage: `cargo run --release --example tune -- <lr> <entropy> <epochs> <episodes> [minibatch]`

use uav_aoi::exec;
use uav_aoi::experiments::{default_obs_spec, tiny_scenario};
use uav_aoi::marl::{self, TrainMode};
use uav_aoi::oracle::{self, OracleTarget};
use uav_aoi::ppo::PpoConfig;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).map_or(1e-3, |s| s.parse().unwrap());
    let entropy: f64 = args.get(2).map_or(0.01, |s| s.parse().unwrap());
    let epochs: usize = args.get(3).map_or(4, |s| s.parse().unwrap());
    let episodes: usize = args.get(4).map_or(2000, |s| s.parse().unwrap());
    let lambda: f64 = args.get(5).map_or(0.95, |s| s.parse().unwrap());
    let discount: f64 = args.get(6).map_or(0.99, |s| s.parse().unwrap());
    let rollout: usize = args.get(7).map_or(0, |s| s.parse().unwrap());

    let cfg = tiny_scenario();
    let spec = default_obs_spec();
    let ppo = PpoConfig {
        learning_rate: lr,
        entropy_coef: entropy,
        epochs_per_update: epochs,
        gae_lambda: lambda,
        discount,
        rollout_length: rollout,
        ..PpoConfig::default()
    };
    let opt = oracle::solve_exact(&cfg, OracleTarget::Obj2Max, oracle::DEFAULT_NODE_BUDGET)
        .unwrap()
        .best_value;
    println!("oracle obj2* = {opt}; target 90% = {}", 0.9 * opt);

    let seeds: Vec<u64> = vec![0, 1, 2];
    let t0 = std::time::Instant::now();
    let results = exec::map_collect(&seeds, |&seed| {
        let out = marl::train(TrainMode::Dec, &cfg, &spec, &ppo, episodes, seed).unwrap();
        // Track the best greedy evaluation seen at checkpoints during the
        // run by re-evaluating the final bundle plus intermediate ones.
        let evals = marl::evaluate(&out.bundles, &cfg, &spec, 1, seed).unwrap();
        let final_obj2 = evals[0].objective2;
        let tail: Vec<f64> = out
            .metrics
            .iter()
            .rev()
            .take(episodes / 10)
            .map(|m| m.objective2)
            .collect();
        let tail_mean = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
        (seed, final_obj2, tail_mean)
    });
    for (seed, final_obj2, tail_mean) in &results {
        let frac = final_obj2 / opt;
        println!(
            "seed {seed}: greedy eval obj2 = {final_obj2:.4} ({:.1}% of optimum), train tail mean = {tail_mean:.4}",
            100.0 * frac
        );
    }
    let passes = results.iter().filter(|(_, f, _)| f / opt >= 0.9).count();
    println!("passes: {passes}/3 in {:.1}s", t0.elapsed().as_secs_f64());
}
