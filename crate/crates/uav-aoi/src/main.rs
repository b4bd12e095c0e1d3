//! Command-line front end: training, evaluation, the exhaustive oracle,
//! the full experiment pipeline, and trajectory rendering.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use uav_aoi::config::EnvConfig;
use uav_aoi::experiments::{
    self, default_obs_spec, default_ppo, desk_scenario, ExperimentConfig,
};
use uav_aoi::marl::{self, TrainMode};
use uav_aoi::oracle::{self, OracleTarget};
use uav_aoi::problem::TrajectoryRecord;

#[derive(Parser)]
#[command(
    name = "uav-aoi",
    about = "Multi-UAV IoT data collection: weighted age-of-information simulator and MARL trainer",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Use the built-in desk-scale scenario instead of a file.
    #[arg(long, default_value_t = false)]
    desk_scale: bool,
}

impl ScenarioArgs {
    fn load(&self) -> Result<EnvConfig> {
        if self.desk_scale {
            return Ok(desk_scenario());
        }
        let path = self
            .scenario
            .as_ref()
            .context("either --scenario <path> or --desk-scale is required")?;
        Ok(EnvConfig::load(path)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one scheme on a scenario and write metrics plus checkpoints.
    Train {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Training scheme: dec | centr-obj1 | centr-obj2.
        #[arg(long, default_value = "dec")]
        mode: String,
        #[arg(long, default_value_t = 400)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long, default_value = "runs/train")]
        out: PathBuf,
        /// Final-policy evaluation episodes.
        #[arg(long, default_value_t = 3)]
        eval_episodes: usize,
    },
    /// Evaluate checkpointed (or freshly initialized) agents greedily.
    Eval {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Directory holding agent_<u>.json checkpoints; fresh nets if absent.
        #[arg(long)]
        checkpoints: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "runs/eval")]
        out: PathBuf,
    },
    /// Exhaustively solve a tiny deterministic instance.
    Oracle {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Target: obj1-min | obj2-max | both.
        #[arg(long, default_value = "both")]
        target: String,
        #[arg(long, default_value_t = oracle::DEFAULT_NODE_BUDGET)]
        node_budget: u64,
        #[arg(long, default_value = "runs/oracle")]
        out: PathBuf,
    },
    /// Train every (mode, seed) cell and emit figure-data files.
    Experiment {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Scheme to include (repeatable); defaults to all three.
        #[arg(long = "mode")]
        modes: Vec<String>,
        #[arg(long, default_value_t = 400)]
        episodes: usize,
        /// Seed to include (repeatable); defaults to 0 1 2.
        #[arg(long = "seed")]
        seeds: Vec<u64>,
        #[arg(long, default_value = "runs/experiment")]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        eval_episodes: usize,
    },
    /// Render a recorded trajectory to SVG.
    Render {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Trajectory JSON produced by train/eval/experiment.
        #[arg(long)]
        traj: PathBuf,
        /// Output SVG path.
        #[arg(long, default_value = "trajectory.svg")]
        out: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<TrainMode> {
    s.parse::<TrainMode>().map_err(|e| anyhow::anyhow!(e))
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Train {
            scenario,
            mode,
            episodes,
            seed,
            out,
            eval_episodes,
        } => {
            let env_cfg = scenario.load()?;
            let mode = parse_mode(&mode)?;
            let cell = experiments::run_training_cell(
                &env_cfg,
                mode,
                seed,
                episodes,
                eval_episodes,
                &default_obs_spec(),
                &default_ppo(),
                &out,
            )?;
            let final_obj1 = experiments::final_window_mean(&cell.metrics, |m| m.objective1);
            println!(
                "trained {mode} for {episodes} episodes (seed {seed}); final-window objective1 = {final_obj1}"
            );
            println!("metrics and checkpoints under {}", out.display());
        }
        Command::Eval {
            scenario,
            checkpoints,
            episodes,
            seed,
            out,
        } => {
            let env_cfg = scenario.load()?;
            let spec = default_obs_spec();
            let bundles = match &checkpoints {
                Some(dir) => marl::load_checkpoints(dir, &env_cfg, seed)?,
                None => marl::init_bundles(
                    TrainMode::Dec,
                    &env_cfg,
                    &spec,
                    &default_ppo(),
                    seed,
                ),
            };
            let outcomes = marl::evaluate(&bundles, &env_cfg, &spec, episodes, seed)?;
            std::fs::create_dir_all(out.join("traj"))?;
            for (e, o) in outcomes.iter().enumerate() {
                o.trajectory.save_json(&out.join(format!("traj/eval_{e}.json")))?;
                println!(
                    "episode {e}: objective1 = {}, objective2 = {}, communications = {}, distinct devices = {}",
                    o.objective1, o.objective2, o.communications, o.distinct_devices
                );
            }
            let summaries: Vec<serde_json::Value> = outcomes
                .iter()
                .map(|o| {
                    serde_json::json!({
                        "objective1": o.objective1,
                        "objective2": o.objective2,
                        "communications": o.communications,
                        "distinct_devices": o.distinct_devices,
                        "violations": o.violations,
                        "per_device_comms": o.per_device_comms,
                    })
                })
                .collect();
            std::fs::write(
                out.join("eval_report.json"),
                serde_json::to_string_pretty(&summaries)?,
            )?;
        }
        Command::Oracle {
            scenario,
            target,
            node_budget,
            out,
        } => {
            let env_cfg = scenario.load()?;
            let targets = match target.as_str() {
                "obj1-min" => vec![OracleTarget::Obj1Min],
                "obj2-max" => vec![OracleTarget::Obj2Max],
                "both" => vec![OracleTarget::Obj1Min, OracleTarget::Obj2Max],
                other => bail!("unknown target '{other}' (obj1-min|obj2-max|both)"),
            };
            std::fs::create_dir_all(&out)?;
            let mut solutions = serde_json::Map::new();
            for t in targets {
                let sol = oracle::solve_exact(&env_cfg, t, node_budget)?;
                let key = match t {
                    OracleTarget::Obj1Min => "obj1_min",
                    OracleTarget::Obj2Max => "obj2_max",
                };
                println!(
                    "{key}: optimum = {} ({} nodes explored)",
                    sol.best_value, sol.nodes_explored
                );
                solutions.insert(key.to_string(), serde_json::to_value(&sol)?);
            }
            let path = out.join("oracle_solution.json");
            std::fs::write(&path, serde_json::to_string_pretty(&solutions)?)?;
            println!("wrote {}", path.display());
        }
        Command::Experiment {
            scenario,
            modes,
            episodes,
            seeds,
            out,
            eval_episodes,
        } => {
            let mut cfg = ExperimentConfig::new(out.clone());
            cfg.desk_scale = scenario.desk_scale;
            cfg.scenario = scenario.scenario.clone();
            if !scenario.desk_scale && scenario.scenario.is_none() {
                bail!("either --scenario <path> or --desk-scale is required");
            }
            if !modes.is_empty() {
                cfg.modes = modes
                    .iter()
                    .map(|m| parse_mode(m))
                    .collect::<Result<Vec<_>>>()?;
            }
            if !seeds.is_empty() {
                cfg.seeds = seeds;
            }
            cfg.episodes = episodes;
            cfg.eval_episodes = eval_episodes;
            let run = experiments::run_experiment(&cfg)?;
            println!("mode,final_objective1_mean,final_objective2_mean");
            for row in &run.summary {
                println!(
                    "{},{},{}",
                    row.mode, row.objective1_mean, row.objective2_mean
                );
            }
            if let Some(ok) = run.ordering_ok {
                println!("objective1 ordering centr-obj1 <= centr-obj2 <= dec: {ok}");
            }
            println!("figure data under {}", out.display());
        }
        Command::Render { scenario, traj, out } => {
            let env_cfg = scenario.load()?;
            let record = TrajectoryRecord::load_json(&traj)?;
            let svg = experiments::trajectory_svg(&record, &env_cfg);
            std::fs::write(&out, svg)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
