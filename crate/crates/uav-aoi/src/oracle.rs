//! Exhaustive ground-truth solver for tiny deterministic instances, plus the
//! greedy and uniform-random comparison baselines.
//!
//! The solver enumerates every feasible joint action sequence depth-first,
//! pruning infeasible branches (grid bounds, flight budget, and the
//! minimum-rate gate restrict the per-step choices). Instances must use the
//! pure line-of-sight channel: with stochastic fading a single optimal value
//! is not well defined, and determinism keeps the ground truth exact.

use crate::config::EnvConfig;
use crate::env::{los_rate, Env, JointAction, Move};
use crate::problem::{self, TrajectoryRecord};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
}

/// Hard instance limits for exhaustive search.
pub const MAX_UAVS: usize = 2;
pub const MAX_DEVICES: usize = 3;
pub const MAX_CELLS: u32 = 9;
pub const MAX_HORIZON: u32 = 5;
pub const DEFAULT_NODE_BUDGET: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleTarget {
    /// Minimize the total weighted age.
    Obj1Min,
    /// Maximize the collection surrogate.
    Obj2Max,
}

/// Globally optimal value plus one trajectory attaining it. Multiple optima
/// are common on grids; the value, not the trajectory, is the contract.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleSolution {
    pub target: OracleTarget,
    pub best_value: f64,
    pub objective1: f64,
    pub objective2: f64,
    /// `moves[t][u]` of the best trajectory found.
    pub moves: Vec<Vec<Move>>,
    /// `assoc[t][u][i]` of the best trajectory found.
    pub assoc: Vec<Vec<Vec<bool>>>,
    pub nodes_explored: u64,
}

fn validate_instance(cfg: &EnvConfig) -> Result<(), OracleError> {
    if cfg.num_uavs > MAX_UAVS {
        return Err(OracleError::TooLarge(format!("{} UAVs > {MAX_UAVS}", cfg.num_uavs)));
    }
    if cfg.num_devices > MAX_DEVICES {
        return Err(OracleError::TooLarge(format!(
            "{} devices > {MAX_DEVICES}",
            cfg.num_devices
        )));
    }
    if cfg.num_cells() > MAX_CELLS {
        return Err(OracleError::TooLarge(format!(
            "{} grid cells > {MAX_CELLS}",
            cfg.num_cells()
        )));
    }
    if cfg.horizon > MAX_HORIZON {
        return Err(OracleError::TooLarge(format!(
            "horizon {} > {MAX_HORIZON}",
            cfg.horizon
        )));
    }
    if !cfg.pure_los {
        return Err(OracleError::TooLarge(
            "oracle instances require the pure-LoS channel".into(),
        ));
    }
    Ok(())
}

struct Search<'a> {
    cfg: &'a EnvConfig,
    target: OracleTarget,
    node_budget: u64,
    nodes: u64,
    best_value: f64,
    best_actions: Vec<JointAction>,
    stack: Vec<JointAction>,
}

impl Search<'_> {
    /// Candidate actions for one UAV: every feasible move crossed with every
    /// subset of the devices reachable (rate gate) from the post-move cell.
    fn uav_candidates(&self, env: &Env, u: usize) -> Vec<(Move, Vec<bool>)> {
        let mask = env.move_mask(u);
        let state = env.state();
        let mut candidates = Vec::new();
        for mv in Move::ALL {
            if !mask[mv.index()] {
                continue;
            }
            let (dx, dy) = mv.delta();
            let cell = [
                (state.uav_cells[u][0] as i64 + dx) as u32,
                (state.uav_cells[u][1] as i64 + dy) as u32,
            ];
            let in_range: Vec<usize> = self
                .cfg
                .devices
                .iter()
                .enumerate()
                .filter(|(_, d)| {
                    let dist = crate::env::distance(
                        cell,
                        self.cfg.uavs[u].altitude,
                        [d.pos_x, d.pos_y],
                        self.cfg.grid_step,
                    );
                    los_rate(dist, d, self.cfg) >= self.cfg.min_rate
                })
                .map(|(i, _)| i)
                .collect();
            for code in 0..(1u32 << in_range.len()) {
                let mut bits = vec![false; self.cfg.num_devices];
                for (pos, &i) in in_range.iter().enumerate() {
                    bits[i] = code >> pos & 1 == 1;
                }
                candidates.push((mv, bits));
            }
        }
        candidates
    }

    fn dfs(
        &mut self,
        env: &Env,
        obj1_acc: f64,
        obj2_acc: f64,
    ) -> Result<(), OracleError> {
        if env.state().t >= self.cfg.horizon {
            let value = match self.target {
                OracleTarget::Obj1Min => obj1_acc,
                OracleTarget::Obj2Max => obj2_acc,
            };
            let better = match self.target {
                OracleTarget::Obj1Min => value < self.best_value,
                OracleTarget::Obj2Max => value > self.best_value,
            };
            if better {
                self.best_value = value;
                self.best_actions = self.stack.clone();
            }
            return Ok(());
        }
        let per_uav: Vec<Vec<(Move, Vec<bool>)>> = (0..self.cfg.num_uavs)
            .map(|u| self.uav_candidates(env, u))
            .collect();
        let mut joint_index = vec![0usize; self.cfg.num_uavs];
        loop {
            let action = JointAction {
                moves: joint_index
                    .iter()
                    .enumerate()
                    .map(|(u, &c)| per_uav[u][c].0)
                    .collect(),
                assoc: joint_index
                    .iter()
                    .enumerate()
                    .map(|(u, &c)| per_uav[u][c].1.clone())
                    .collect(),
            };
            self.nodes += 1;
            if self.nodes > self.node_budget {
                return Err(OracleError::TooLarge(format!(
                    "node budget {} exhausted at t = {}",
                    self.node_budget,
                    env.state().t
                )));
            }
            let mut child = env.clone();
            let outcome = child.step(&action)?;
            self.stack.push(action);
            let step_reward: f64 = outcome.per_uav_reward.iter().sum();
            self.dfs(&child, obj1_acc + outcome.aoi_snapshot, obj2_acc + step_reward)?;
            self.stack.pop();

            // Advance the mixed-radix joint counter.
            let mut u = 0;
            loop {
                if u == self.cfg.num_uavs {
                    return Ok(());
                }
                joint_index[u] += 1;
                if joint_index[u] < per_uav[u].len() {
                    break;
                }
                joint_index[u] = 0;
                u += 1;
            }
        }
    }
}

/// Exhaustively solves a tiny instance for the given target.
pub fn solve_exact(
    cfg: &EnvConfig,
    target: OracleTarget,
    node_budget: u64,
) -> Result<OracleSolution, OracleError> {
    cfg.validate()?;
    validate_instance(cfg)?;
    let env = Env::new(cfg.clone())?;
    let mut search = Search {
        cfg,
        target,
        node_budget,
        nodes: 0,
        best_value: match target {
            OracleTarget::Obj1Min => f64::INFINITY,
            OracleTarget::Obj2Max => f64::NEG_INFINITY,
        },
        best_actions: Vec::new(),
        stack: Vec::new(),
    };
    search.dfs(&env, 0.0, 0.0)?;

    // Replay the argmax action sequence to report both objectives and to
    // assert the returned trajectory is feasible.
    let mut replay = Env::new(cfg.clone())?;
    let mut traj = TrajectoryRecord::new(replay.state().clone());
    for action in &search.best_actions {
        let outcome = replay.step(action)?;
        traj.push_step(&outcome, replay.state().clone());
    }
    debug_assert!(problem::check_feasibility(&traj, cfg).is_empty());
    let report = problem::objective_report(&traj, cfg)
        .map_err(|e| OracleError::TooLarge(e.to_string()))?;
    Ok(OracleSolution {
        target,
        best_value: search.best_value,
        objective1: report.objective1,
        objective2: report.objective2,
        moves: search.best_actions.iter().map(|a| a.moves.clone()).collect(),
        assoc: search.best_actions.iter().map(|a| a.assoc.clone()).collect(),
        nodes_explored: search.nodes,
    })
}

/// Greedy baseline: each UAV heads for the device with the highest current
/// weighted age (ties to the lowest id) and claims it once the fading-free
/// rate clears the gate. Works on any scenario size.
pub fn greedy_baseline(cfg: &EnvConfig) -> Result<TrajectoryRecord, OracleError> {
    let mut env = Env::new(cfg.clone())?;
    let mut traj = TrajectoryRecord::new(env.state().clone());
    for _ in 0..cfg.horizon {
        let state = env.state().clone();
        let t_next = state.t + 1;
        let mut moves = Vec::with_capacity(cfg.num_uavs);
        let mut assoc = Vec::with_capacity(cfg.num_uavs);
        for u in 0..cfg.num_uavs {
            let mut bits = vec![false; cfg.num_devices];
            let target = (0..cfg.num_devices)
                .map(|i| {
                    (
                        i,
                        problem::weighted_device_age(
                            &state.device_buffers[i],
                            cfg.devices[i].gen_period_k,
                            t_next,
                            cfg,
                        ),
                    )
                })
                .filter(|&(_, wa)| wa > 0.0)
                .max_by(|a, b| a.1.partial_cmp(&b.1).expect("finite ages").then(b.0.cmp(&a.0)));
            let Some((i, _)) = target else {
                moves.push(Move::Stay);
                assoc.push(bits);
                continue;
            };
            let device = &cfg.devices[i];
            let mask = env.move_mask(u);
            let dist_after = |mv: Move| {
                let (dx, dy) = mv.delta();
                let cell = [
                    (state.uav_cells[u][0] as i64 + dx) as u32,
                    (state.uav_cells[u][1] as i64 + dy) as u32,
                ];
                crate::env::distance(
                    cell,
                    cfg.uavs[u].altitude,
                    [device.pos_x, device.pos_y],
                    cfg.grid_step,
                )
            };
            let mut best = (Move::Stay, dist_after(Move::Stay));
            for mv in &Move::ALL[1..] {
                if mask[mv.index()] {
                    let d = dist_after(*mv);
                    if d < best.1 - 1e-9 {
                        best = (*mv, d);
                    }
                }
            }
            if los_rate(best.1, device, cfg) >= cfg.min_rate {
                bits[i] = true;
            }
            moves.push(best.0);
            assoc.push(bits);
        }
        let outcome = env.step(&JointAction { moves, assoc })?;
        traj.push_step(&outcome, env.state().clone());
    }
    Ok(traj)
}

/// Uniform-random policy rollout: random feasible-or-not moves and fair-coin
/// association bits, fed through the arbitrating environment.
pub fn random_baseline(cfg: &EnvConfig, seed: u64) -> Result<TrajectoryRecord, OracleError> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut env = Env::new(cfg.clone())?;
    env.reset_with_seed(crate::derive_seed(seed, 0x4a4d));
    let mut traj = TrajectoryRecord::new(env.state().clone());
    for _ in 0..cfg.horizon {
        let action = JointAction {
            moves: (0..cfg.num_uavs)
                .map(|_| Move::from_index(rng.gen_range(0..5)))
                .collect(),
            assoc: (0..cfg.num_uavs)
                .map(|_| (0..cfg.num_devices).map(|_| rng.gen_bool(0.5)).collect())
                .collect(),
        };
        let outcome = env.step(&action)?;
        traj.push_step(&outcome, env.state().clone());
    }
    Ok(traj)
}
