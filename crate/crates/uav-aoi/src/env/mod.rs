//! Discrete-time environment: grid movement, channel realization, constraint
//! arbitration, and age dynamics.
//!
//! One `Env` instance is confined to one worker at a time; all randomness
//! flows through its own seeded RNG, so identical seeds and action sequences
//! reproduce bit-identical trajectories.

pub mod aoi;
pub mod channel;

use crate::config::EnvConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use aoi::{aoi_advance, packet_weight, total_weighted_aoi, DeviceBuffers, PacketAge};
pub use channel::{achievable_rate, distance, los_rate, sample_channel, ChannelSample};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("episode already terminal (t = horizon); reset before stepping")]
    Terminal,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("action shape mismatch: {0}")]
    Shape(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

/// Movement component of an action; unit grid steps or staying put.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum Move {
    Stay = 0,
    Up = 1,
    Down = 2,
    Right = 3,
    Left = 4,
}

impl Move {
    pub const ALL: [Move; 5] = [Move::Stay, Move::Up, Move::Down, Move::Right, Move::Left];

    pub fn from_index(idx: usize) -> Move {
        Move::ALL[idx]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Displacement in cells (dx, dy).
    pub fn delta(self) -> (i64, i64) {
        match self {
            Move::Stay => (0, 0),
            Move::Up => (0, 1),
            Move::Down => (0, -1),
            Move::Right => (1, 0),
            Move::Left => (-1, 0),
        }
    }
}

/// Flight time charged against the budget for one movement decision.
pub fn flight_cost(mv: Move, grid_step: f64, speed: f64) -> f64 {
    match mv {
        Move::Stay => 0.0,
        _ => grid_step / speed,
    }
}

/// Joint proposal: one move and one association bit-vector per UAV
/// (`assoc[u][i]` claims device `i` for UAV `u`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointAction {
    pub moves: Vec<Move>,
    pub assoc: Vec<Vec<bool>>,
}

impl JointAction {
    pub fn all_stay(num_uavs: usize, num_devices: usize) -> Self {
        JointAction {
            moves: vec![Move::Stay; num_uavs],
            assoc: vec![vec![false; num_devices]; num_uavs],
        }
    }
}

/// Full simulation state at one interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    /// Interval index in `[0, horizon]`.
    pub t: u32,
    /// Per-device packet buffers.
    pub device_buffers: DeviceBuffers,
    /// Per-UAV grid cell.
    pub uav_cells: Vec<[u32; 2]>,
    /// Unit moves taken so far, per UAV.
    pub moves_made: Vec<u32>,
    /// Seconds of the flight budget spent, per UAV.
    pub spent_flight: Vec<f64>,
}

impl EnvState {
    fn initial(cfg: &EnvConfig) -> Self {
        EnvState {
            t: 0,
            device_buffers: aoi::initial_buffers(cfg),
            uav_cells: cfg.uavs.iter().map(|u| u.start_cell).collect(),
            moves_made: vec![0; cfg.num_uavs],
            spent_flight: vec![0.0; cfg.num_uavs],
        }
    }
}

/// Result of arbitrating a proposal: the executed moves, the granted
/// association matrix, and the rejected-component counts.
#[derive(Debug, Clone)]
pub struct Arbitration {
    pub final_moves: Vec<Move>,
    /// `granted[i][u]`, at most one true entry per device row.
    pub granted: Vec<Vec<bool>>,
    pub move_violations: u32,
    pub assoc_violations: u32,
}

/// Outcome of one environment step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepOutcome {
    /// Final association matrix `granted[i][u]` after arbitration.
    pub granted: Vec<Vec<bool>>,
    /// Realized rate in bits/second for every (device, UAV) pair this step.
    pub rates: Vec<Vec<f64>>,
    pub per_uav_reward: Vec<f64>,
    /// Total weighted age at the new interval.
    pub aoi_snapshot: f64,
    /// Rejected action components, split by cause.
    pub move_violations: u32,
    pub assoc_violations: u32,
}

impl StepOutcome {
    pub fn violations(&self) -> u32 {
        self.move_violations + self.assoc_violations
    }
}

/// Replaces out-of-grid and over-budget moves with `Stay`, counting each
/// replacement as one violation.
pub fn resolve_moves(state: &EnvState, proposed: &[Move], cfg: &EnvConfig) -> (Vec<Move>, u32) {
    let mut violations = 0;
    let final_moves = proposed
        .iter()
        .enumerate()
        .map(|(u, &mv)| {
            if mv == Move::Stay {
                return Move::Stay;
            }
            let (dx, dy) = mv.delta();
            let nx = state.uav_cells[u][0] as i64 + dx;
            let ny = state.uav_cells[u][1] as i64 + dy;
            let in_bounds =
                nx >= 0 && ny >= 0 && nx < cfg.grid_nx() as i64 && ny < cfg.grid_ny() as i64;
            let within_budget = state.moves_made[u] + 1 <= cfg.max_moves(u);
            if in_bounds && within_budget {
                mv
            } else {
                violations += 1;
                Move::Stay
            }
        })
        .collect();
    (final_moves, violations)
}

/// Arbitrates a joint proposal against realized channel samples taken at the
/// post-move positions.
///
/// An association bit is granted iff the realized rate clears `min_rate` and
/// no competing claim on the same device has a higher rate (ties broken by
/// lower UAV id). Every cleared bit counts as one rejected component.
pub fn arbitrate(
    proposed: &JointAction,
    samples: &[Vec<ChannelSample>],
    state: &EnvState,
    cfg: &EnvConfig,
) -> Arbitration {
    let (final_moves, move_violations) = resolve_moves(state, &proposed.moves, cfg);
    let num_devices = cfg.num_devices;
    let num_uavs = cfg.num_uavs;
    let mut granted = vec![vec![false; num_uavs]; num_devices];
    let mut assoc_violations = 0;
    for i in 0..num_devices {
        let mut winner: Option<(usize, f64)> = None;
        let mut feasible_claims = 0;
        for u in 0..num_uavs {
            if !proposed.assoc[u][i] {
                continue;
            }
            let rate = samples[i][u].rate;
            if rate < cfg.min_rate {
                assoc_violations += 1;
                continue;
            }
            feasible_claims += 1;
            let better = match winner {
                None => true,
                Some((_, best)) => rate > best,
            };
            if better {
                winner = Some((u, rate));
            }
        }
        if let Some((u, _)) = winner {
            granted[i][u] = true;
            // Feasible claims that lost the contention are rejected too.
            assoc_violations += feasible_claims - 1;
        }
    }
    Arbitration {
        final_moves,
        granted,
        move_violations,
        assoc_violations,
    }
}

/// The environment proper: configuration, current state, and its RNG.
#[derive(Debug, Clone)]
pub struct Env {
    cfg: EnvConfig,
    state: EnvState,
    rng: ChaCha8Rng,
}

impl Env {
    pub fn new(cfg: EnvConfig) -> Result<Env, crate::config::ConfigError> {
        cfg.validate()?;
        let state = EnvState::initial(&cfg);
        let rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        Ok(Env { cfg, state, rng })
    }

    pub fn cfg(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn is_terminal(&self) -> bool {
        self.state.t >= self.cfg.horizon
    }

    /// Restores the initial state and reseeds the RNG.
    pub fn reset(&mut self) {
        self.reset_with_seed(self.cfg.rng_seed);
    }

    pub fn reset_with_seed(&mut self, seed: u64) {
        self.state = EnvState::initial(&self.cfg);
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    /// Feasibility mask over the five moves for UAV `u` in the current
    /// state; staying is always feasible.
    pub fn move_mask(&self, u: usize) -> [bool; 5] {
        let mut mask = [true; 5];
        for mv in &Move::ALL[1..] {
            let (dx, dy) = mv.delta();
            let nx = self.state.uav_cells[u][0] as i64 + dx;
            let ny = self.state.uav_cells[u][1] as i64 + dy;
            let in_bounds = nx >= 0
                && ny >= 0
                && nx < self.cfg.grid_nx() as i64
                && ny < self.cfg.grid_ny() as i64;
            let within_budget = self.state.moves_made[u] + 1 <= self.cfg.max_moves(u);
            mask[mv.index()] = in_bounds && within_budget;
        }
        mask
    }

    /// Executes one interval: resolves moves, samples the channel at the
    /// post-move positions, arbitrates associations, pays rewards from the
    /// previous interval's ages, and advances every packet age.
    pub fn step(&mut self, proposed: &JointAction) -> Result<StepOutcome, EnvError> {
        if self.is_terminal() {
            return Err(EnvError::Terminal);
        }
        if proposed.moves.len() != self.cfg.num_uavs
            || proposed.assoc.len() != self.cfg.num_uavs
            || proposed.assoc.iter().any(|a| a.len() != self.cfg.num_devices)
        {
            return Err(EnvError::Shape(format!(
                "expected {} moves and {}x{} association bits",
                self.cfg.num_uavs, self.cfg.num_uavs, self.cfg.num_devices
            )));
        }

        let (final_moves, move_violations) = resolve_moves(&self.state, &proposed.moves, &self.cfg);
        let mut new_cells = self.state.uav_cells.clone();
        for (u, mv) in final_moves.iter().enumerate() {
            let (dx, dy) = mv.delta();
            new_cells[u][0] = (new_cells[u][0] as i64 + dx) as u32;
            new_cells[u][1] = (new_cells[u][1] as i64 + dy) as u32;
        }

        // Block fading: one realization per (device, UAV) pair per interval,
        // drawn at the realized positions in a fixed order.
        let mut samples = Vec::with_capacity(self.cfg.num_devices);
        let mut rates = Vec::with_capacity(self.cfg.num_devices);
        for device in &self.cfg.devices {
            let mut row = Vec::with_capacity(self.cfg.num_uavs);
            let mut rate_row = Vec::with_capacity(self.cfg.num_uavs);
            for (u, uav) in self.cfg.uavs.iter().enumerate() {
                let d = distance(
                    new_cells[u],
                    uav.altitude,
                    [device.pos_x, device.pos_y],
                    self.cfg.grid_step,
                );
                let mut sample = sample_channel(&mut self.rng, d, &self.cfg)
                    .map_err(|e| EnvError::Domain(e.to_string()))?;
                sample.rate = achievable_rate(&sample, device, &self.cfg);
                rate_row.push(sample.rate);
                row.push(sample);
            }
            samples.push(row);
            rates.push(rate_row);
        }

        let arb = arbitrate(proposed, &samples, &self.state, &self.cfg);
        debug_assert_eq!(arb.move_violations, move_violations);
        debug_assert_eq!(arb.final_moves, final_moves);

        let new_t = self.state.t + 1;
        let prior_buffers = self.state.device_buffers.clone();
        let per_uav_reward: Vec<f64> = (0..self.cfg.num_uavs)
            .map(|u| {
                let granted_row: Vec<bool> =
                    (0..self.cfg.num_devices).map(|i| arb.granted[i][u]).collect();
                crate::problem::per_uav_reward(&granted_row, &prior_buffers, new_t, &self.cfg)
            })
            .collect();

        for (u, mv) in final_moves.iter().enumerate() {
            let cost = flight_cost(*mv, self.cfg.grid_step, self.cfg.uavs[u].speed);
            if *mv != Move::Stay {
                self.state.moves_made[u] += 1;
            }
            self.state.spent_flight[u] += cost;
        }
        self.state.uav_cells = new_cells;
        aoi_advance(&mut self.state.device_buffers, &arb.granted, new_t, &self.cfg)?;
        self.state.t = new_t;

        Ok(StepOutcome {
            granted: arb.granted,
            rates,
            per_uav_reward,
            aoi_snapshot: total_weighted_aoi(&self.state.device_buffers, new_t, &self.cfg),
            move_violations: arb.move_violations,
            assoc_violations: arb.assoc_violations,
        })
    }
}
