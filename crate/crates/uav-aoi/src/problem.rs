//! The two objective functions, the per-UAV reward decomposition, and
//! whole-trajectory feasibility checking.
//!
//! Objective 1 (minimized) is the total weighted age summed over the episode;
//! objective 2 (maximized) is the collection-triggered surrogate that
//! decomposes exactly into per-UAV rewards. Both are computed from recorded
//! trajectories, never incrementally inside the environment, so they double
//! as cross-checks on the environment's own accounting.

use crate::config::EnvConfig;
use crate::env::{packet_weight, DeviceBuffers, EnvState, StepOutcome};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("incomplete trajectory: {0}")]
    Incomplete(String),
}

/// Recorded episode: `horizon + 1` state snapshots plus the per-step granted
/// matrices, realized rates, and environment-paid rewards.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    /// States `0..=K`.
    pub states: Vec<EnvState>,
    /// `granted[t][i][u]` for steps `t = 0..K` (reward interval `t + 1`).
    pub granted: Vec<Vec<Vec<bool>>>,
    /// Realized rates `rates[t][i][u]`.
    pub rates: Vec<Vec<Vec<f64>>>,
    /// Environment-paid rewards `rewards[t][u]`.
    pub rewards: Vec<Vec<f64>>,
}

impl TrajectoryRecord {
    pub fn new(initial_state: EnvState) -> Self {
        TrajectoryRecord {
            states: vec![initial_state],
            granted: Vec::new(),
            rates: Vec::new(),
            rewards: Vec::new(),
        }
    }

    /// Appends one step's outcome and the post-step state.
    pub fn push_step(&mut self, outcome: &StepOutcome, new_state: EnvState) {
        self.granted.push(outcome.granted.clone());
        self.rates.push(outcome.rates.clone());
        self.rewards.push(outcome.per_uav_reward.clone());
        self.states.push(new_state);
    }

    pub fn num_steps(&self) -> usize {
        self.granted.len()
    }

    fn check_complete(&self, cfg: &EnvConfig) -> Result<(), ProblemError> {
        let k = cfg.horizon as usize;
        if self.states.len() != k + 1 || self.granted.len() != k || self.rewards.len() != k {
            return Err(ProblemError::Incomplete(format!(
                "expected {} states and {} action records, got {} and {}",
                k + 1,
                k,
                self.states.len(),
                self.granted.len()
            )));
        }
        Ok(())
    }

    pub fn save_json(&self, path: &std::path::Path) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string(self).expect("trajectory serializes"))
    }

    pub fn load_json(path: &std::path::Path) -> anyhow::Result<TrajectoryRecord> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Objective values and their decompositions for one trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectiveReport {
    /// Total weighted age (to minimize).
    pub objective1: f64,
    /// Collection surrogate (to maximize).
    pub objective2: f64,
    pub per_device_f: Vec<f64>,
    pub per_uav_return: Vec<f64>,
}

/// Reward of UAV `u` collecting `granted_row` at interval `t_new`, paid from
/// the ages held at the previous interval:
/// `r_u[t] = sum_i alpha_iu[t] * sum_n w^n[t] * A_i^n[t-1]`.
pub fn per_uav_reward(
    granted_row: &[bool],
    prior_buffers: &DeviceBuffers,
    t_new: u32,
    cfg: &EnvConfig,
) -> f64 {
    granted_row
        .iter()
        .enumerate()
        .filter(|(_, &g)| g)
        .map(|(i, _)| weighted_device_age(&prior_buffers[i], cfg.devices[i].gen_period_k, t_new, cfg))
        .sum()
}

/// `sum_n w^n[t] * age_n` over one device's buffer.
pub fn weighted_device_age(buffer: &[crate::env::PacketAge], k: u32, t: u32, cfg: &EnvConfig) -> f64 {
    buffer
        .iter()
        .map(|p| packet_weight(p.gen_index, t, k, cfg) * p.age_seconds(cfg.interval_len))
        .sum()
}

/// Weighted age of device `i` summed over the whole episode:
/// `f_i = sum_{t=1..K} sum_n w^n[t] * A_i^n[t]`.
pub fn weighted_aoi_device(traj: &TrajectoryRecord, i: usize, cfg: &EnvConfig) -> f64 {
    let k = cfg.devices[i].gen_period_k;
    traj.states[1..]
        .iter()
        .map(|s| weighted_device_age(&s.device_buffers[i], k, s.t, cfg))
        .sum()
}

/// Objective (1): `sum_i f_i`, the total weighted age to be minimized.
pub fn objective1(traj: &TrajectoryRecord, cfg: &EnvConfig) -> Result<f64, ProblemError> {
    traj.check_complete(cfg)?;
    Ok((0..cfg.num_devices)
        .map(|i| weighted_aoi_device(traj, i, cfg))
        .sum())
}

/// Objective (2): the collection surrogate
/// `sum_u sum_t sum_i alpha_iu[t] * sum_n w^n[t] * A_i^n[t-1]`,
/// recomputed from the recorded grants and prior-state ages.
pub fn objective2(traj: &TrajectoryRecord, cfg: &EnvConfig) -> Result<f64, ProblemError> {
    traj.check_complete(cfg)?;
    let mut total = 0.0;
    for (step, granted) in traj.granted.iter().enumerate() {
        let prior = &traj.states[step].device_buffers;
        let t_new = traj.states[step].t + 1;
        for u in 0..cfg.num_uavs {
            let row: Vec<bool> = (0..cfg.num_devices).map(|i| granted[i][u]).collect();
            total += per_uav_reward(&row, prior, t_new, cfg);
        }
    }
    Ok(total)
}

/// Full report with per-device and per-UAV decompositions.
pub fn objective_report(
    traj: &TrajectoryRecord,
    cfg: &EnvConfig,
) -> Result<ObjectiveReport, ProblemError> {
    traj.check_complete(cfg)?;
    let per_device_f: Vec<f64> = (0..cfg.num_devices)
        .map(|i| weighted_aoi_device(traj, i, cfg))
        .collect();
    let mut per_uav_return = vec![0.0; cfg.num_uavs];
    for (step, granted) in traj.granted.iter().enumerate() {
        let prior = &traj.states[step].device_buffers;
        let t_new = traj.states[step].t + 1;
        for (u, ret) in per_uav_return.iter_mut().enumerate() {
            let row: Vec<bool> = (0..cfg.num_devices).map(|i| granted[i][u]).collect();
            *ret += per_uav_reward(&row, prior, t_new, cfg);
        }
    }
    Ok(ObjectiveReport {
        objective1: per_device_f.iter().sum(),
        objective2: per_uav_return.iter().sum(),
        per_device_f,
        per_uav_return,
    })
}

/// Which constraint family a violation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintId {
    /// (2b) granted collections must clear the minimum rate.
    MinRate,
    /// (2c) each device transmits to at most one UAV per interval.
    SingleUav,
    /// (2d) total flight time within budget.
    FlightTime,
    /// (2e) x position within the area.
    BoundX,
    /// (2f) y position within the area.
    BoundY,
    /// (2g) association matrices must be well-formed binary matrices.
    Binary,
}

/// One detected constraint violation: which constraint, at which interval,
/// and for which device or UAV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: ConstraintId,
    pub t: u32,
    pub entity: String,
}

/// Audits a recorded trajectory against all six constraint families.
/// Returns an empty list iff the trajectory is feasible.
pub fn check_feasibility(traj: &TrajectoryRecord, cfg: &EnvConfig) -> Vec<Violation> {
    let mut violations = Vec::new();
    for (step, granted) in traj.granted.iter().enumerate() {
        let t = traj.states[step].t + 1;
        if granted.len() != cfg.num_devices
            || granted.iter().any(|row| row.len() != cfg.num_uavs)
        {
            violations.push(Violation {
                constraint: ConstraintId::Binary,
                t,
                entity: "granted matrix shape".into(),
            });
            continue;
        }
        for (i, row) in granted.iter().enumerate() {
            let claims = row.iter().filter(|&&g| g).count();
            if claims > 1 {
                violations.push(Violation {
                    constraint: ConstraintId::SingleUav,
                    t,
                    entity: format!("device {i}"),
                });
            }
            for (u, &g) in row.iter().enumerate() {
                if g && traj.rates[step][i][u] < cfg.min_rate {
                    violations.push(Violation {
                        constraint: ConstraintId::MinRate,
                        t,
                        entity: format!("device {i} uav {u}"),
                    });
                }
            }
        }
    }
    for (si, state) in traj.states.iter().enumerate() {
        for u in 0..cfg.num_uavs {
            let [cx, cy] = state.uav_cells[u];
            if cx >= cfg.grid_nx() {
                violations.push(Violation {
                    constraint: ConstraintId::BoundX,
                    t: si as u32,
                    entity: format!("uav {u}"),
                });
            }
            if cy >= cfg.grid_ny() {
                violations.push(Violation {
                    constraint: ConstraintId::BoundY,
                    t: si as u32,
                    entity: format!("uav {u}"),
                });
            }
        }
    }
    // Flight budget from realized path length.
    for u in 0..cfg.num_uavs {
        let mut path = 0.0;
        for w in traj.states.windows(2) {
            let a = w[0].uav_cells[u];
            let b = w[1].uav_cells[u];
            let dx = a[0] as f64 - b[0] as f64;
            let dy = a[1] as f64 - b[1] as f64;
            path += (dx * dx + dy * dy).sqrt() * cfg.grid_step;
        }
        if path / cfg.uavs[u].speed > cfg.uavs[u].max_flight_time + 1e-9 {
            violations.push(Violation {
                constraint: ConstraintId::FlightTime,
                t: cfg.horizon,
                entity: format!("uav {u}"),
            });
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{DeviceConfig, UavConfig, WeightMode};
    use crate::env::{Env, JointAction, Move};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_cfg(gamma: f64, k: u32, horizon: u32) -> EnvConfig {
        EnvConfig {
            num_devices: 1,
            num_uavs: 1,
            area_x: 200.0,
            area_y: 200.0,
            grid_step: 100.0,
            horizon,
            interval_len: 1.0,
            rician_factor: 10.0,
            pure_los: true,
            noise_power: 1e-15,
            min_rate: 1e3,
            aoi_weight_gamma: gamma,
            weight_mode: WeightMode::PaperLiteral,
            devices: vec![DeviceConfig {
                id: 0,
                pos_x: 100.0,
                pos_y: 100.0,
                gen_period_k: k,
                bandwidth: 1.5e9,
                tx_power: 5e-4,
            }],
            uavs: vec![UavConfig {
                id: 0,
                altitude: 90.0,
                speed: 15.0,
                max_flight_time: 1e4,
                start_cell: [1, 1],
            }],
            rng_seed: 1,
        }
    }

    fn rollout(cfg: &EnvConfig, mut pick: impl FnMut(u32) -> JointAction) -> TrajectoryRecord {
        let mut env = Env::new(cfg.clone()).unwrap();
        let mut traj = TrajectoryRecord::new(env.state().clone());
        for t in 0..cfg.horizon {
            let out = env.step(&pick(t)).unwrap();
            traj.push_step(&out, env.state().clone());
        }
        traj
    }

    #[test]
    fn objective1_hand_enumeration() {
        // K = 2, k = 1, gamma = 1, tau = 1, nothing collected:
        // packet 1 ages 1 then 2, packet 2 ages 1 -> objective1 = 4.
        let cfg = small_cfg(1.0, 1, 2);
        let traj = rollout(&cfg, |_| JointAction::all_stay(1, 1));
        assert_eq!(objective1(&traj, &cfg).unwrap(), 4.0);
        assert_eq!(weighted_aoi_device(&traj, 0, &cfg), 4.0);
        assert_eq!(objective2(&traj, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn device_generating_after_horizon_contributes_nothing() {
        let cfg = small_cfg(1.0, 4, 3);
        let traj = rollout(&cfg, |_| JointAction::all_stay(1, 1));
        assert_eq!(weighted_aoi_device(&traj, 0, &cfg), 0.0);
    }

    #[test]
    fn collecting_every_interval_zeroes_objective1() {
        let cfg = small_cfg(1.0, 1, 3);
        let traj = rollout(&cfg, |_| JointAction {
            moves: vec![Move::Stay],
            assoc: vec![vec![true]],
        });
        assert_eq!(objective1(&traj, &cfg).unwrap(), 0.0);
        // Packets are killed at birth with zero prior age, so the surrogate
        // collects nothing either.
        assert_eq!(objective2(&traj, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn objective2_single_collection_expansion() {
        // k = 1, gamma = 0.8, collect only at t = 3. Prior ages at t = 2:
        // packet 1 -> 2, packet 2 -> 1. Expected w^1[3]*2 + w^2[3]*1.
        let cfg = small_cfg(0.8, 1, 3);
        let traj = rollout(&cfg, |t| JointAction {
            moves: vec![Move::Stay],
            assoc: vec![vec![t == 2]],
        });
        let expected = 0.8f64.powi(2) * 2.0 + 0.8 * 1.0;
        let got = objective2(&traj, &cfg).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn per_uav_reward_additivity() {
        let mut cfg = small_cfg(1.0, 1, 4);
        cfg.num_devices = 2;
        cfg.devices.push(DeviceConfig {
            id: 1,
            pos_x: 50.0,
            pos_y: 50.0,
            gen_period_k: 1,
            bandwidth: 1.5e9,
            tx_power: 5e-4,
        });
        let mut env = Env::new(cfg.clone()).unwrap();
        let idle = JointAction::all_stay(1, 2);
        // Let ages diverge: collect device 1 at step 3 so its age resets.
        for t in 0..4u32 {
            let action = if t == 2 {
                JointAction {
                    moves: vec![Move::Stay],
                    assoc: vec![vec![false, true]],
                }
            } else {
                idle.clone()
            };
            if t < 4 {
                env.step(&action).unwrap();
            }
        }
        // At t = 4: device 0 packets have ages {4, 3, 2, 1}; device 1 has
        // {1, 1} alive (born 3 and 4... n=4 newly born handled inside).
        let buffers = env.state().device_buffers.clone();
        let a0 = weighted_device_age(&buffers[0], 1, 5, &cfg);
        let a1 = weighted_device_age(&buffers[1], 1, 5, &cfg);
        let both = per_uav_reward(&[true, true], &buffers, 5, &cfg);
        assert!((both - (a0 + a1)).abs() < 1e-12);
        assert_eq!(per_uav_reward(&[false, false], &buffers, 5, &cfg), 0.0);
    }

    #[test]
    fn reward_is_zero_on_fresh_devices() {
        let cfg = small_cfg(0.8, 1, 2);
        let env = Env::new(cfg.clone()).unwrap();
        let reward = per_uav_reward(&[true], &env.state().device_buffers, 1, &cfg);
        assert_eq!(reward, 0.0);
    }

    #[test]
    fn decomposition_identity_on_random_rollouts() {
        for seed in 0..100u64 {
            let mut cfg = small_cfg(0.8, 1, 5);
            cfg.pure_los = false;
            cfg.rng_seed = seed;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let traj = rollout(&cfg, |_| JointAction {
                moves: vec![Move::from_index(rng.gen_range(0..5))],
                assoc: vec![vec![rng.gen_bool(0.4)]],
            });
            let report = objective_report(&traj, &cfg).unwrap();
            let reward_sum: f64 = traj.rewards.iter().flatten().sum();
            let rel = (report.objective2 - reward_sum).abs() / reward_sum.abs().max(1.0);
            assert!(rel < 1e-9);
            assert!((report.objective2 - report.per_uav_return.iter().sum::<f64>()).abs() < 1e-12);
            assert!(report.objective1 >= 0.0);
            assert!(report.objective2 >= 0.0);
        }
    }

    #[test]
    fn more_collection_never_increases_objective1() {
        // Superset grants, identical movement: ages can only shrink.
        for seed in 0..30u64 {
            let mut cfg = small_cfg(0.8, 2, 6);
            cfg.rng_seed = seed;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let base_claims: Vec<bool> = (0..6).map(|_| rng.gen_bool(0.3)).collect();
            let extra_claims: Vec<bool> = base_claims.iter().map(|&b| b || rng.gen_bool(0.3)).collect();
            let base = rollout(&cfg, |t| JointAction {
                moves: vec![Move::Stay],
                assoc: vec![vec![base_claims[t as usize]]],
            });
            let superset = rollout(&cfg, |t| JointAction {
                moves: vec![Move::Stay],
                assoc: vec![vec![extra_claims[t as usize]]],
            });
            let o1_base = objective1(&base, &cfg).unwrap();
            let o1_super = objective1(&superset, &cfg).unwrap();
            assert!(o1_super <= o1_base + 1e-12);
        }
    }

    #[test]
    fn collecting_earlier_can_lower_objective2() {
        // The surrogate is not monotone in the grant set: harvesting a young
        // packet destroys the larger value a later collection would have
        // paid. gamma = 1, k = 1, K = 2: collecting only at t = 2 yields 1;
        // also collecting at t = 1 kills the newborn packet and yields 0.
        let cfg = small_cfg(1.0, 1, 2);
        let late_only = rollout(&cfg, |t| JointAction {
            moves: vec![Move::Stay],
            assoc: vec![vec![t == 1]],
        });
        let both = rollout(&cfg, |_| JointAction {
            moves: vec![Move::Stay],
            assoc: vec![vec![true]],
        });
        assert_eq!(objective2(&late_only, &cfg).unwrap(), 1.0);
        assert_eq!(objective2(&both, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn feasibility_clean_rollout_is_empty() {
        let mut cfg = small_cfg(0.8, 1, 5);
        cfg.pure_los = false;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let traj = rollout(&cfg, |_| JointAction {
            moves: vec![Move::from_index(rng.gen_range(0..5))],
            assoc: vec![vec![rng.gen_bool(0.5)]],
        });
        assert!(check_feasibility(&traj, &cfg).is_empty());
    }

    #[test]
    fn feasibility_flags_double_grant() {
        let mut cfg = small_cfg(1.0, 1, 1);
        cfg.num_uavs = 2;
        cfg.uavs.push(UavConfig {
            id: 1,
            altitude: 80.0,
            speed: 15.0,
            max_flight_time: 1e4,
            start_cell: [0, 0],
        });
        let mut traj = rollout(&cfg, |_| JointAction::all_stay(2, 1));
        traj.granted[0][0] = vec![true, true];
        let violations = check_feasibility(&traj, &cfg);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].constraint, ConstraintId::SingleUav);
    }

    #[test]
    fn feasibility_flags_flight_budget_overrun() {
        let cfg = small_cfg(1.0, 1, 4);
        let mut traj = rollout(&cfg, |_| JointAction::all_stay(1, 1));
        // Fake a long path: teleporting between corners every interval.
        for (si, state) in traj.states.iter_mut().enumerate() {
            state.uav_cells[0] = if si % 2 == 0 { [0, 0] } else { [2, 2] };
        }
        let mut cfg_tight = cfg.clone();
        cfg_tight.uavs[0].max_flight_time = 10.0;
        let violations = check_feasibility(&traj, &cfg_tight);
        assert!(violations
            .iter()
            .any(|v| v.constraint == ConstraintId::FlightTime));
    }

    #[test]
    fn incomplete_trajectory_is_a_usage_error() {
        let cfg = small_cfg(1.0, 1, 3);
        let env = Env::new(cfg.clone()).unwrap();
        let traj = TrajectoryRecord::new(env.state().clone());
        assert!(objective1(&traj, &cfg).is_err());
        assert!(objective2(&traj, &cfg).is_err());
    }

    #[test]
    fn trajectory_json_roundtrip() {
        let cfg = small_cfg(0.8, 2, 3);
        let traj = rollout(&cfg, |t| JointAction {
            moves: vec![Move::Right],
            assoc: vec![vec![t == 2]],
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.json");
        traj.save_json(&path).unwrap();
        let back = TrajectoryRecord::load_json(&path).unwrap();
        assert_eq!(back.states, traj.states);
        assert_eq!(back.granted, traj.granted);
        assert_eq!(
            objective2(&back, &cfg).unwrap(),
            objective2(&traj, &cfg).unwrap()
        );
    }
}
