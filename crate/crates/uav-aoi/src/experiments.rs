//! Experiment runner: trains every (mode, seed) cell, evaluates the final
//! policies, and aggregates per-episode metrics into figure-data CSVs plus a
//! vector-graphics trajectory render.
//!
//! Figure outputs are data files, not styled plots; every value in them is
//! reproducible from the per-episode CSVs (or the per-cell evaluation
//! reports) by the stated aggregation. Cells run in parallel and all
//! randomness is derived from the listed seeds, so rerunning a configuration
//! yields byte-identical output files.

use crate::config::{DeviceConfig, EnvConfig, UavConfig, WeightMode};
use crate::marl::{
    self, EvalOutcome, MetricsRecord, ObservationSpec, TrainMode, TrainOutput,
};
use crate::ppo::{PpoConfig, UpdateDiagnostics};
use crate::problem::TrajectoryRecord;
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Desk-scale scenario: two UAVs on a 10x10 grid over eight devices, sized so
/// that a three-mode, three-seed run finishes in minutes on one CPU. The
/// minimum rate is set high enough that collection requires flying near a
/// device, which keeps movement relevant under Rician fading. Weights decay
/// with packet age (`generation_time` mode), so device value is stationary
/// over the episode and a patrol loop remains worth learning throughout.
pub fn desk_scenario() -> EnvConfig {
    let positions: [(f64, f64, u32); 8] = [
        (100.0, 100.0, 1),
        (800.0, 800.0, 1),
        (100.0, 800.0, 2),
        (800.0, 100.0, 2),
        (450.0, 150.0, 3),
        (450.0, 750.0, 3),
        (150.0, 450.0, 4),
        (750.0, 450.0, 5),
    ];
    EnvConfig {
        num_devices: positions.len(),
        num_uavs: 2,
        area_x: 900.0,
        area_y: 900.0,
        grid_step: 100.0,
        horizon: 50,
        interval_len: 1.0,
        rician_factor: 10.0,
        pure_los: false,
        noise_power: 1e-15,
        min_rate: 3.3e10,
        aoi_weight_gamma: 0.8,
        weight_mode: WeightMode::GenerationTime,
        devices: positions
            .iter()
            .enumerate()
            .map(|(id, &(pos_x, pos_y, gen_period_k))| DeviceConfig {
                id,
                pos_x,
                pos_y,
                gen_period_k,
                bandwidth: 1.5e9,
                tx_power: 5e-4,
            })
            .collect(),
        uavs: vec![
            UavConfig {
                id: 0,
                altitude: 80.0,
                speed: 15.0,
                max_flight_time: 350.0,
                start_cell: [0, 0],
            },
            UavConfig {
                id: 1,
                altitude: 100.0,
                speed: 15.0,
                max_flight_time: 350.0,
                start_cell: [9, 9],
            },
        ],
        rng_seed: 0,
    }
}

/// Tiny deterministic instance within the exhaustive solver's limits: one
/// UAV on a 3x3 grid, two devices, four intervals, pure LoS.
pub fn tiny_scenario() -> EnvConfig {
    EnvConfig {
        num_devices: 2,
        num_uavs: 1,
        area_x: 200.0,
        area_y: 200.0,
        grid_step: 100.0,
        horizon: 4,
        interval_len: 1.0,
        rician_factor: 10.0,
        pure_los: true,
        noise_power: 1e-15,
        min_rate: 3.5e10,
        aoi_weight_gamma: 0.8,
        weight_mode: WeightMode::PaperLiteral,
        devices: vec![
            DeviceConfig {
                id: 0,
                pos_x: 25.0,
                pos_y: 25.0,
                gen_period_k: 1,
                bandwidth: 1.5e9,
                tx_power: 5e-4,
            },
            DeviceConfig {
                id: 1,
                pos_x: 175.0,
                pos_y: 175.0,
                gen_period_k: 2,
                bandwidth: 1.5e9,
                tx_power: 5e-4,
            },
        ],
        uavs: vec![UavConfig {
            id: 0,
            altitude: 90.0,
            speed: 15.0,
            max_flight_time: 100.0,
            start_cell: [1, 1],
        }],
        rng_seed: 0,
    }
}

/// PPO settings used by the experiment runner.
pub fn default_ppo() -> PpoConfig {
    PpoConfig {
        learning_rate: 1e-3,
        ..PpoConfig::default()
    }
}

/// Observation settings used by the experiment runner: local one-hot cell
/// plus normalized time and remaining budget. Position-only observations
/// cannot express collection schedules (a stationary agent sees a constant
/// input), so the runner defaults to the augmented local observation.
pub fn default_obs_spec() -> ObservationSpec {
    ObservationSpec::augmented_one_hot()
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Scenario file; ignored when `desk_scale` is set.
    pub scenario: Option<PathBuf>,
    pub modes: Vec<TrainMode>,
    pub episodes: usize,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Use the built-in desk-scale scenario.
    pub desk_scale: bool,
    /// Final-policy evaluation episodes per cell.
    pub eval_episodes: usize,
    pub obs_spec: ObservationSpec,
    pub ppo: PpoConfig,
}

impl ExperimentConfig {
    pub fn new(out_dir: PathBuf) -> Self {
        ExperimentConfig {
            scenario: None,
            modes: TrainMode::ALL.to_vec(),
            episodes: 400,
            seeds: vec![0, 1, 2],
            out_dir,
            desk_scale: true,
            eval_episodes: 3,
            obs_spec: default_obs_spec(),
            ppo: default_ppo(),
        }
    }

    pub fn resolve_scenario(&self) -> Result<EnvConfig> {
        if self.desk_scale {
            return Ok(desk_scenario());
        }
        let path = self
            .scenario
            .as_ref()
            .context("either --scenario or --desk-scale is required")?;
        Ok(EnvConfig::load(path)?)
    }
}

/// Condensed evaluation record written to `eval_report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummary {
    pub objective1: f64,
    pub objective2: f64,
    pub communications: u64,
    pub distinct_devices: usize,
    pub violations: u64,
    pub per_device_comms: Vec<u64>,
    /// Cumulative granted collections after each interval.
    pub cumulative_comms: Vec<u64>,
}

impl EvalSummary {
    fn from_outcome(outcome: &EvalOutcome) -> EvalSummary {
        let mut cumulative = Vec::with_capacity(outcome.trajectory.num_steps());
        let mut acc = 0u64;
        for granted in &outcome.trajectory.granted {
            acc += granted
                .iter()
                .map(|row| row.iter().filter(|&&g| g).count() as u64)
                .sum::<u64>();
            cumulative.push(acc);
        }
        EvalSummary {
            objective1: outcome.objective1,
            objective2: outcome.objective2,
            communications: outcome.communications,
            distinct_devices: outcome.distinct_devices,
            violations: outcome.violations,
            per_device_comms: outcome.per_device_comms.clone(),
            cumulative_comms: cumulative,
        }
    }
}

/// Everything produced by one (mode, seed) training cell.
#[derive(Debug, Clone)]
pub struct CellOutput {
    pub mode: TrainMode,
    pub seed: u64,
    pub metrics: Vec<MetricsRecord>,
    pub evals: Vec<EvalSummary>,
    pub eval_trajectory: TrajectoryRecord,
}

/// Aggregate row of [`compare_schemes`].
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub mode: TrainMode,
    pub objective1_mean: f64,
    pub objective1_std: f64,
    pub objective2_mean: f64,
    pub objective2_std: f64,
    pub communications_mean: f64,
    pub communications_std: f64,
    pub distinct_devices_mean: f64,
    pub distinct_devices_std: f64,
    pub scalars_exchanged_mean: f64,
    pub scalars_exchanged_std: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub cells: Vec<CellOutput>,
    pub summary: Vec<SummaryRow>,
    /// Whether centr-obj1 <= centr-obj2 <= dec held on final objective1;
    /// present only when all three modes ran.
    pub ordering_ok: Option<bool>,
}

/// Mean of a metric over the last tenth (at least one) of the episodes.
pub fn final_window_mean(metrics: &[MetricsRecord], of: impl Fn(&MetricsRecord) -> f64) -> f64 {
    let window = (metrics.len() / 10).max(1).min(metrics.len().max(1));
    if metrics.is_empty() {
        return 0.0;
    }
    let tail = &metrics[metrics.len() - window..];
    tail.iter().map(&of).sum::<f64>() / tail.len() as f64
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Trains one cell, writes its per-episode CSV, PPO diagnostics, checkpoints,
/// evaluation trajectories, and evaluation report under
/// `<out>/<mode>_seed<seed>/`.
pub fn run_training_cell(
    env_cfg: &EnvConfig,
    mode: TrainMode,
    seed: u64,
    episodes: usize,
    eval_episodes: usize,
    obs_spec: &ObservationSpec,
    ppo: &PpoConfig,
    cell_dir: &Path,
) -> Result<CellOutput> {
    std::fs::create_dir_all(cell_dir.join("metrics"))?;
    std::fs::create_dir_all(cell_dir.join("traj"))?;
    let TrainOutput {
        bundles,
        metrics,
        diagnostics,
    } = marl::train(mode, env_cfg, obs_spec, ppo, episodes, seed)?;

    write_episodes_csv(&cell_dir.join("metrics/episodes.csv"), &metrics)?;
    for (u, diags) in diagnostics.iter().enumerate() {
        write_ppo_csv(&cell_dir.join(format!("metrics/ppo_{u}.csv")), diags)?;
    }
    marl::save_checkpoints(&bundles, &cell_dir.join("checkpoints"))?;

    let outcomes = marl::evaluate(&bundles, env_cfg, obs_spec, eval_episodes, seed)?;
    let evals: Vec<EvalSummary> = outcomes.iter().map(EvalSummary::from_outcome).collect();
    for (e, outcome) in outcomes.iter().enumerate() {
        outcome
            .trajectory
            .save_json(&cell_dir.join(format!("traj/eval_{e}.json")))?;
    }
    std::fs::write(
        cell_dir.join("eval_report.json"),
        serde_json::to_string_pretty(&evals)?,
    )?;
    let eval_trajectory = outcomes
        .into_iter()
        .next()
        .map(|o| o.trajectory)
        .context("eval_episodes must be at least 1")?;
    Ok(CellOutput {
        mode,
        seed,
        metrics,
        evals,
        eval_trajectory,
    })
}

/// Runs the full grid of (mode, seed) cells in parallel, then aggregates.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRun> {
    if cfg.modes.is_empty() || cfg.seeds.is_empty() {
        bail!("at least one mode and one seed are required");
    }
    if cfg.eval_episodes == 0 {
        bail!("eval_episodes must be at least 1");
    }
    let env_cfg = cfg.resolve_scenario()?;
    std::fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("cannot create output dir {}", cfg.out_dir.display()))?;
    env_cfg.save(&cfg.out_dir.join("scenario.json"))?;

    let cells: Vec<(TrainMode, u64)> = cfg
        .modes
        .iter()
        .flat_map(|&m| cfg.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let results = crate::exec::map_collect(&cells, |&(mode, seed)| {
        let cell_dir = cfg.out_dir.join(format!("{mode}_seed{seed}"));
        run_training_cell(
            &env_cfg,
            mode,
            seed,
            cfg.episodes,
            cfg.eval_episodes,
            &cfg.obs_spec,
            &cfg.ppo,
            &cell_dir,
        )
    });
    let mut outputs = Vec::with_capacity(results.len());
    for r in results {
        outputs.push(r?);
    }

    write_figure_data(&outputs, &env_cfg, &cfg.out_dir, &cfg.modes, &cfg.seeds)?;
    let (summary, ordering_ok) = compare_schemes(&outputs, &cfg.modes)?;
    write_summary_csv(&cfg.out_dir.join("summary.csv"), &summary)?;
    if let Some(ok) = ordering_ok {
        std::fs::write(
            cfg.out_dir.join("ordering_check.txt"),
            format!("centr-obj1 <= centr-obj2 <= dec on final objective1: {ok}\n"),
        )?;
    }
    Ok(ExperimentRun {
        cells: outputs,
        summary,
        ordering_ok,
    })
}

/// Final-window comparison table across modes, plus the objective-1 ordering
/// flag when all three schemes are present. Errors if the modes ran
/// different episode counts.
pub fn compare_schemes(
    cells: &[CellOutput],
    modes: &[TrainMode],
) -> Result<(Vec<SummaryRow>, Option<bool>)> {
    let counts: Vec<usize> = cells.iter().map(|c| c.metrics.len()).collect();
    if counts.windows(2).any(|w| w[0] != w[1]) {
        bail!("mismatched episode counts across cells: {counts:?}");
    }
    let mut rows = Vec::with_capacity(modes.len());
    for &mode in modes {
        let of_mode: Vec<&CellOutput> = cells.iter().filter(|c| c.mode == mode).collect();
        let collect = |f: &dyn Fn(&MetricsRecord) -> f64| -> Vec<f64> {
            of_mode
                .iter()
                .map(|c| final_window_mean(&c.metrics, f))
                .collect()
        };
        let (o1m, o1s) = mean_std(&collect(&|m| m.objective1));
        let (o2m, o2s) = mean_std(&collect(&|m| m.objective2));
        let (cm, cs) = mean_std(&collect(&|m| m.communications as f64));
        let (dm, ds) = mean_std(&collect(&|m| m.distinct_devices as f64));
        let totals: Vec<f64> = of_mode
            .iter()
            .map(|c| c.metrics.iter().map(|m| m.scalars_exchanged as f64).sum())
            .collect();
        let (sm, ss) = mean_std(&totals);
        rows.push(SummaryRow {
            mode,
            objective1_mean: o1m,
            objective1_std: o1s,
            objective2_mean: o2m,
            objective2_std: o2s,
            communications_mean: cm,
            communications_std: cs,
            distinct_devices_mean: dm,
            distinct_devices_std: ds,
            scalars_exchanged_mean: sm,
            scalars_exchanged_std: ss,
        });
    }
    let ordering_ok = if TrainMode::ALL.iter().all(|m| modes.contains(m)) {
        let of = |m: TrainMode| {
            rows.iter()
                .find(|r| r.mode == m)
                .map(|r| r.objective1_mean)
                .unwrap_or(f64::NAN)
        };
        Some(
            of(TrainMode::CentrObj1) <= of(TrainMode::CentrObj2)
                && of(TrainMode::CentrObj2) <= of(TrainMode::Dec),
        )
    } else {
        None
    };
    Ok((rows, ordering_ok))
}

fn write_episodes_csv(path: &Path, metrics: &[MetricsRecord]) -> Result<()> {
    let mut text = String::from(
        "episode,mode,objective1,objective2,communications,distinct_devices,violations,scalars_exchanged\n",
    );
    for m in metrics {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{}",
            m.episode,
            m.mode,
            m.objective1,
            m.objective2,
            m.communications,
            m.distinct_devices,
            m.violations,
            m.scalars_exchanged
        )?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn write_ppo_csv(path: &Path, diags: &[UpdateDiagnostics]) -> Result<()> {
    let mut text = String::from("update,policy_loss,value_loss,entropy,clip_fraction,mean_ratio\n");
    for (update, d) in diags.iter().enumerate() {
        writeln!(
            text,
            "{},{},{},{},{},{}",
            update, d.policy_loss, d.value_loss, d.entropy, d.clip_fraction, d.mean_ratio
        )?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut text = String::from(
        "mode,objective1_mean,objective1_std,objective2_mean,objective2_std,communications_mean,communications_std,distinct_devices_mean,distinct_devices_std,scalars_exchanged_mean,scalars_exchanged_std\n",
    );
    for r in rows {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.mode,
            r.objective1_mean,
            r.objective1_std,
            r.objective2_mean,
            r.objective2_std,
            r.communications_mean,
            r.communications_std,
            r.distinct_devices_mean,
            r.distinct_devices_std,
            r.scalars_exchanged_mean,
            r.scalars_exchanged_std
        )?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Long-format series file: one `(series, x, mean, std)` row per point.
fn write_series_csv(path: &Path, rows: &[(String, f64, f64, f64)]) -> Result<()> {
    let mut text = String::from("series,x,mean,std\n");
    for (series, x, mean, std) in rows {
        writeln!(text, "{series},{x},{mean},{std}")?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn per_episode_series(
    cells: &[CellOutput],
    modes: &[TrainMode],
    episodes: usize,
    of: impl Fn(&MetricsRecord) -> f64,
) -> Vec<(String, f64, f64, f64)> {
    let mut rows = Vec::new();
    for &mode in modes {
        let of_mode: Vec<&CellOutput> = cells.iter().filter(|c| c.mode == mode).collect();
        for e in 0..episodes {
            let values: Vec<f64> = of_mode.iter().map(|c| of(&c.metrics[e])).collect();
            let (mean, std) = mean_std(&values);
            rows.push((mode.to_string(), e as f64, mean, std));
        }
    }
    rows
}

fn write_figure_data(
    cells: &[CellOutput],
    env_cfg: &EnvConfig,
    out_dir: &Path,
    modes: &[TrainMode],
    _seeds: &[u64],
) -> Result<()> {
    let episodes = cells.first().map_or(0, |c| c.metrics.len());

    write_series_csv(
        &out_dir.join("fig2_aoi_over_episodes.csv"),
        &per_episode_series(cells, modes, episodes, |m| m.objective1),
    )?;
    write_series_csv(
        &out_dir.join("fig3_communications.csv"),
        &per_episode_series(cells, modes, episodes, |m| m.communications as f64),
    )?;
    write_series_csv(
        &out_dir.join("fig4_distinct_served.csv"),
        &per_episode_series(cells, modes, episodes, |m| m.distinct_devices as f64),
    )?;

    // Within-episode cumulative communications of the final policies.
    let mut within = Vec::new();
    for &mode in modes {
        let of_mode: Vec<&CellOutput> = cells.iter().filter(|c| c.mode == mode).collect();
        for t in 0..env_cfg.horizon as usize {
            let values: Vec<f64> = of_mode
                .iter()
                .map(|c| {
                    let per_seed: Vec<f64> = c
                        .evals
                        .iter()
                        .map(|e| e.cumulative_comms[t] as f64)
                        .collect();
                    per_seed.iter().sum::<f64>() / per_seed.len() as f64
                })
                .collect();
            let (mean, std) = mean_std(&values);
            within.push((mode.to_string(), (t + 1) as f64, mean, std));
        }
    }
    write_series_csv(
        &out_dir.join("fig3_communications_within_episode.csv"),
        &within,
    )?;

    // Per-device communications of the final policies, devices sorted by
    // generation period (ties by id).
    let mut device_order: Vec<usize> = (0..env_cfg.num_devices).collect();
    device_order.sort_by_key(|&i| (env_cfg.devices[i].gen_period_k, i));
    let mut fig5 = Vec::new();
    for &mode in modes {
        let of_mode: Vec<&CellOutput> = cells.iter().filter(|c| c.mode == mode).collect();
        for &i in &device_order {
            let values: Vec<f64> = of_mode
                .iter()
                .map(|c| {
                    c.evals
                        .iter()
                        .map(|e| e.per_device_comms[i] as f64)
                        .sum::<f64>()
                })
                .collect();
            let (mean, std) = mean_std(&values);
            fig5.push((
                mode.to_string(),
                env_cfg.devices[i].gen_period_k as f64,
                mean,
                std,
            ));
        }
    }
    write_series_csv(&out_dir.join("fig5_comms_vs_gen_period.csv"), &fig5)?;

    // Trajectory polylines of the lowest-seed cell per mode.
    let mut fig6 = String::from("mode,uav,t,x,y\n");
    for &mode in modes {
        if let Some(cell) = cells.iter().find(|c| c.mode == mode) {
            let traj = &cell.eval_trajectory;
            for u in 0..env_cfg.num_uavs {
                for (t, state) in traj.states.iter().enumerate() {
                    let [cx, cy] = state.uav_cells[u];
                    writeln!(
                        fig6,
                        "{},{},{},{},{}",
                        mode,
                        u,
                        t,
                        cx as f64 * env_cfg.grid_step,
                        cy as f64 * env_cfg.grid_step
                    )?;
                }
            }
            std::fs::write(
                out_dir.join(format!("fig6_trajectories_{mode}.svg")),
                trajectory_svg(traj, env_cfg),
            )?;
        }
    }
    std::fs::write(out_dir.join("fig6_trajectories.csv"), fig6)?;
    Ok(())
}

/// Renders an overhead view of one trajectory as an SVG document: device
/// markers, one polyline per UAV with a distinct stroke, and a start marker.
pub fn trajectory_svg(traj: &TrajectoryRecord, cfg: &EnvConfig) -> String {
    const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
    let pad = cfg.grid_step;
    let w = cfg.area_x + 2.0 * pad;
    let h = cfg.area_y + 2.0 * pad;
    // SVG y grows downward; flip so the render matches the area coordinates.
    let flip = |y: f64| cfg.area_y - y + pad;
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {h}\" width=\"{w}\" height=\"{h}\">\n"
    );
    let _ = write!(
        svg,
        "<rect x=\"{pad}\" y=\"{pad}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999\"/>\n",
        cfg.area_x, cfg.area_y
    );
    for d in &cfg.devices {
        let _ = write!(
            svg,
            "<circle cx=\"{}\" cy=\"{}\" r=\"8\" fill=\"#444\"/>\n<text x=\"{}\" y=\"{}\" font-size=\"24\">d{} k={}</text>\n",
            d.pos_x + pad,
            flip(d.pos_y),
            d.pos_x + pad + 10.0,
            flip(d.pos_y) - 10.0,
            d.id,
            d.gen_period_k
        );
    }
    for u in 0..cfg.num_uavs {
        let color = PALETTE[u % PALETTE.len()];
        let points: Vec<String> = traj
            .states
            .iter()
            .map(|s| {
                let [cx, cy] = s.uav_cells[u];
                format!(
                    "{},{}",
                    cx as f64 * cfg.grid_step + pad,
                    flip(cy as f64 * cfg.grid_step)
                )
            })
            .collect();
        let _ = write!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"4\" stroke-dasharray=\"{}\"/>\n",
            points.join(" "),
            if u % 2 == 0 { "none" } else { "12,6" }
        );
        let start = &points[0];
        let (sx, sy) = start.split_once(',').expect("point format");
        let _ = write!(
            svg,
            "<rect x=\"{}\" y=\"{}\" width=\"16\" height=\"16\" fill=\"{color}\"/>\n",
            sx.parse::<f64>().expect("x") - 8.0,
            sy.parse::<f64>().expect("y") - 8.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Env, JointAction};

    fn mini_experiment(dir: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(dir.to_path_buf());
        cfg.desk_scale = false;
        cfg.scenario = None;
        cfg.episodes = 10;
        cfg.seeds = vec![0];
        cfg.eval_episodes = 2;
        cfg
    }

    fn tiny_file(dir: &Path) -> PathBuf {
        let path = dir.join("tiny.json");
        tiny_scenario().save(&path).unwrap();
        path
    }

    #[test]
    fn experiment_emits_all_figure_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = mini_experiment(dir.path());
        cfg.scenario = Some(tiny_file(dir.path()));
        let run = run_experiment(&cfg).unwrap();
        assert_eq!(run.cells.len(), 3);
        for name in [
            "fig2_aoi_over_episodes.csv",
            "fig3_communications.csv",
            "fig4_distinct_served.csv",
            "fig5_comms_vs_gen_period.csv",
            "fig6_trajectories.csv",
        ] {
            assert!(dir.path().join(name).exists(), "{name} missing");
        }
        // 10-row series per mode in the per-episode figures.
        let fig2 = std::fs::read_to_string(dir.path().join("fig2_aoi_over_episodes.csv")).unwrap();
        let dec_rows = fig2.lines().filter(|l| l.starts_with("dec,")).count();
        assert_eq!(dec_rows, 10);
        assert!(dir.path().join("summary.csv").exists());
        assert!(dir.path().join("ordering_check.txt").exists());
        assert!(dir.path().join("dec_seed0/metrics/episodes.csv").exists());
        assert!(dir.path().join("dec_seed0/metrics/ppo_0.csv").exists());
        assert!(dir.path().join("dec_seed0/checkpoints/agent_0.json").exists());
        assert!(dir.path().join("dec_seed0/traj/eval_0.json").exists());
    }

    #[test]
    fn rerun_is_byte_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        for (dir, other) in [(&dir_a, ()), (&dir_b, ())] {
            let _ = other;
            let mut cfg = mini_experiment(dir.path());
            cfg.scenario = Some(tiny_file(dir.path()));
            cfg.modes = vec![TrainMode::Dec, TrainMode::CentrObj2];
            cfg.episodes = 6;
            run_experiment(&cfg).unwrap();
        }
        for name in [
            "fig2_aoi_over_episodes.csv",
            "fig3_communications.csv",
            "fig3_communications_within_episode.csv",
            "fig4_distinct_served.csv",
            "fig5_comms_vs_gen_period.csv",
            "fig6_trajectories.csv",
            "summary.csv",
            "dec_seed0/metrics/episodes.csv",
            "dec_seed0/metrics/ppo_0.csv",
        ] {
            let a = std::fs::read(dir_a.path().join(name)).unwrap();
            let b = std::fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between reruns");
        }
    }

    #[test]
    fn figure_values_reproducible_from_episode_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = mini_experiment(dir.path());
        cfg.scenario = Some(tiny_file(dir.path()));
        cfg.modes = vec![TrainMode::Dec];
        run_experiment(&cfg).unwrap();
        let episodes = std::fs::read_to_string(dir.path().join("dec_seed0/metrics/episodes.csv")).unwrap();
        let obj1: Vec<f64> = episodes
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
            .collect();
        let fig2 = std::fs::read_to_string(dir.path().join("fig2_aoi_over_episodes.csv")).unwrap();
        for (e, line) in fig2.lines().skip(1).enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields[0], "dec");
            let mean: f64 = fields[2].parse().unwrap();
            // Single seed: the mean is the recorded value, exactly.
            assert_eq!(mean, obj1[e]);
            assert_eq!(fields[3].parse::<f64>().unwrap(), 0.0);
        }
    }

    #[test]
    fn fig5_rows_are_sorted_by_generation_period() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = mini_experiment(dir.path());
        cfg.scenario = Some(tiny_file(dir.path()));
        cfg.modes = vec![TrainMode::Dec];
        run_experiment(&cfg).unwrap();
        let fig5 = std::fs::read_to_string(dir.path().join("fig5_comms_vs_gen_period.csv")).unwrap();
        let ks: Vec<f64> = fig5
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert!(ks.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn compare_schemes_single_mode_and_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = mini_experiment(dir.path());
        cfg.scenario = Some(tiny_file(dir.path()));
        cfg.modes = vec![TrainMode::Dec];
        cfg.episodes = 5;
        let run = run_experiment(&cfg).unwrap();
        assert_eq!(run.summary.len(), 1);
        assert!(run.ordering_ok.is_none());
        // Truncating one cell's metrics must be rejected.
        let mut cells = run.cells.clone();
        cells.push(CellOutput {
            metrics: cells[0].metrics[..3].to_vec(),
            ..cells[0].clone()
        });
        assert!(compare_schemes(&cells, &[TrainMode::Dec]).is_err());
    }

    #[test]
    fn summary_scalar_exchange_matches_closed_form() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = mini_experiment(dir.path());
        cfg.scenario = Some(tiny_file(dir.path()));
        cfg.modes = vec![TrainMode::Dec, TrainMode::CentrObj2];
        cfg.episodes = 4;
        let run = run_experiment(&cfg).unwrap();
        let env_cfg = tiny_scenario();
        let state_dim = cfg.obs_spec.global_dim(&env_cfg) as f64;
        let expected =
            env_cfg.num_uavs as f64 * env_cfg.horizon as f64 * state_dim * cfg.episodes as f64;
        for row in &run.summary {
            match row.mode {
                TrainMode::Dec => assert_eq!(row.scalars_exchanged_mean, 0.0),
                _ => assert_eq!(row.scalars_exchanged_mean, expected),
            }
        }
    }

    #[test]
    fn svg_render_contains_all_vertices_within_bounds() {
        let cfg = tiny_scenario();
        let mut env = Env::new(cfg.clone()).unwrap();
        let mut traj = TrajectoryRecord::new(env.state().clone());
        for _ in 0..cfg.horizon {
            let out = env.step(&JointAction::all_stay(1, 2)).unwrap();
            traj.push_step(&out, env.state().clone());
        }
        let svg = trajectory_svg(&traj, &cfg);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<polyline"));
        // All-stay: the polyline degenerates to one repeated point, K+1 times.
        let poly = svg
            .lines()
            .find(|l| l.starts_with("<polyline"))
            .unwrap()
            .to_string();
        let points = poly.split('"').nth(1).unwrap();
        assert_eq!(points.split(' ').count(), cfg.horizon as usize + 1);
        for pair in points.split(' ') {
            let (x, y) = pair.split_once(',').unwrap();
            let x: f64 = x.parse().unwrap();
            let y: f64 = y.parse().unwrap();
            assert!(x >= 0.0 && x <= cfg.area_x + 2.0 * cfg.grid_step);
            assert!(y >= 0.0 && y <= cfg.area_y + 2.0 * cfg.grid_step);
        }
    }

    #[test]
    fn desk_scenario_validates() {
        desk_scenario().validate().unwrap();
        tiny_scenario().validate().unwrap();
        // The tiny instance is within the exhaustive solver's limits.
        assert!(tiny_scenario().num_cells() <= crate::oracle::MAX_CELLS);
        assert!(tiny_scenario().horizon <= crate::oracle::MAX_HORIZON);
    }
}
