//! Multi-agent orchestration: observation construction, per-agent PPO
//! training under the three schemes, and greedy evaluation.
//!
//! `dec` trains each agent on its own reward with a critic that sees only the
//! agent's local observation; no inter-agent scalars are exchanged.
//! `centr-obj2` keeps the per-UAV rewards but feeds every critic the
//! concatenated global state. `centr-obj1` additionally replaces rewards
//! with a shared signal, the negative per-interval total weighted age, whose
//! episode return is exactly the negated minimization objective.

use crate::config::EnvConfig;
use crate::env::{Env, EnvState, JointAction, Move};
use crate::nn::{Mlp, OptimizerState};
use crate::policy::{self, PolicyHead};
use crate::ppo::{ppo_update, PpoConfig, RolloutBuffer, Transition, UpdateDiagnostics};
use crate::problem::{self, TrajectoryRecord};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarlError {
    #[error("configuration mismatch: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
    #[error(transparent)]
    EnvConfig(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Ppo(#[from] crate::ppo::PpoError),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
}

/// Training scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    Dec,
    CentrObj1,
    CentrObj2,
}

impl TrainMode {
    pub const ALL: [TrainMode; 3] = [TrainMode::Dec, TrainMode::CentrObj1, TrainMode::CentrObj2];

    pub fn is_centralized(self) -> bool {
        !matches!(self, TrainMode::Dec)
    }
}

impl std::fmt::Display for TrainMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TrainMode::Dec => write!(f, "dec"),
            TrainMode::CentrObj1 => write!(f, "centr-obj1"),
            TrainMode::CentrObj2 => write!(f, "centr-obj2"),
        }
    }
}

impl std::str::FromStr for TrainMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('_', "-").as_str() {
            "dec" => Ok(TrainMode::Dec),
            "centr-obj1" => Ok(TrainMode::CentrObj1),
            "centr-obj2" => Ok(TrainMode::CentrObj2),
            other => Err(format!("unknown mode '{other}' (dec|centr-obj1|centr-obj2)")),
        }
    }
}

/// What each agent observes about its own situation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObsMode {
    /// Own grid cell only.
    #[default]
    PaperLiteral,
    /// Own cell plus normalized time and remaining flight budget.
    Augmented,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CellEncoding {
    #[default]
    OneHotCell,
    NormalizedXy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ObservationSpec {
    pub mode: ObsMode,
    pub encoding: CellEncoding,
}

impl ObservationSpec {
    pub fn augmented_one_hot() -> Self {
        ObservationSpec {
            mode: ObsMode::Augmented,
            encoding: CellEncoding::OneHotCell,
        }
    }

    /// Length of one agent's observation vector.
    pub fn obs_dim(&self, cfg: &EnvConfig) -> usize {
        let base = match self.encoding {
            CellEncoding::OneHotCell => cfg.num_cells() as usize,
            CellEncoding::NormalizedXy => 2,
        };
        match self.mode {
            ObsMode::PaperLiteral => base,
            ObsMode::Augmented => base + 2,
        }
    }

    /// Length of the concatenated global state vector.
    pub fn global_dim(&self, cfg: &EnvConfig) -> usize {
        self.obs_dim(cfg) * cfg.num_uavs
    }
}

/// Deterministic encoding of agent `u`'s local state.
pub fn build_observation(
    state: &EnvState,
    u: usize,
    spec: &ObservationSpec,
    cfg: &EnvConfig,
) -> Vec<f64> {
    let [cx, cy] = state.uav_cells[u];
    let mut obs = match spec.encoding {
        CellEncoding::OneHotCell => {
            let mut v = vec![0.0; cfg.num_cells() as usize];
            v[(cy * cfg.grid_nx() + cx) as usize] = 1.0;
            v
        }
        CellEncoding::NormalizedXy => {
            let nx = (cfg.grid_nx() - 1).max(1) as f64;
            let ny = (cfg.grid_ny() - 1).max(1) as f64;
            vec![cx as f64 / nx, cy as f64 / ny]
        }
    };
    if spec.mode == ObsMode::Augmented {
        obs.push(state.t as f64 / cfg.horizon as f64);
        let uav = &cfg.uavs[u];
        let per_move = cfg.grid_step / uav.speed;
        let remaining =
            1.0 - (state.moves_made[u] as f64 * per_move / uav.max_flight_time).min(1.0);
        obs.push(remaining);
    }
    obs
}

/// Concatenated observations of all agents, in agent order.
pub fn build_global_observation(
    state: &EnvState,
    spec: &ObservationSpec,
    cfg: &EnvConfig,
) -> Vec<f64> {
    let mut global = Vec::with_capacity(spec.global_dim(cfg));
    for u in 0..cfg.num_uavs {
        global.extend(build_observation(state, u, spec, cfg));
    }
    global
}

/// One agent's networks, optimizer states, rollout buffer, and RNG stream.
///
/// Under `dec` no field ever references another agent's state or parameters;
/// the environment step is the only cross-agent coupling.
#[derive(Debug, Clone)]
pub struct AgentBundle {
    pub id: usize,
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_opt: OptimizerState,
    pub critic_opt: OptimizerState,
    pub buffer: RolloutBuffer,
    pub rng: ChaCha8Rng,
}

/// Per-episode scalars appended to the training metrics CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub episode: usize,
    pub mode: TrainMode,
    pub objective1: f64,
    pub objective2: f64,
    /// Granted collections over the episode.
    pub communications: u64,
    /// Devices collected at least once.
    pub distinct_devices: usize,
    /// Rejected action components (moves and associations).
    pub violations: u64,
    /// Move rejections alone; zero whenever policy-side masking is on.
    pub move_violations: u64,
    /// Inter-agent scalars consumed by critics this episode: zero under
    /// `dec`, `U * K * global_dim` under the centralized modes.
    pub scalars_exchanged: u64,
}

pub struct TrainOutput {
    pub bundles: Vec<AgentBundle>,
    pub metrics: Vec<MetricsRecord>,
    /// One diagnostics row per update, per agent.
    pub diagnostics: Vec<Vec<UpdateDiagnostics>>,
}

/// Evaluation of one episode under greedy decoding.
#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub objective1: f64,
    pub objective2: f64,
    pub communications: u64,
    pub distinct_devices: usize,
    pub per_device_comms: Vec<u64>,
    pub violations: u64,
    pub trajectory: TrajectoryRecord,
}

/// Hidden width of both actor and critic trunks.
pub const HIDDEN: usize = 64;
const N_MOVES: usize = 5;

/// On-disk form of one agent: both networks with their optimizer moments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub id: usize,
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_opt: OptimizerState,
    pub critic_opt: OptimizerState,
}

/// Writes `checkpoints/agent_<u>.json` for every agent.
pub fn save_checkpoints(bundles: &[AgentBundle], dir: &std::path::Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for b in bundles {
        let ckpt = AgentCheckpoint {
            id: b.id,
            actor: b.actor.clone(),
            critic: b.critic.clone(),
            actor_opt: b.actor_opt.clone(),
            critic_opt: b.critic_opt.clone(),
        };
        let path = dir.join(format!("agent_{}.json", b.id));
        std::fs::write(path, serde_json::to_string(&ckpt).expect("checkpoint serializes"))?;
    }
    Ok(())
}

/// Loads `num_uavs` agent checkpoints back into bundles; RNG streams are
/// re-derived from `seed`.
pub fn load_checkpoints(
    dir: &std::path::Path,
    cfg: &EnvConfig,
    seed: u64,
) -> Result<Vec<AgentBundle>, MarlError> {
    use rand::SeedableRng;
    (0..cfg.num_uavs)
        .map(|u| {
            let path = dir.join(format!("agent_{u}.json"));
            let text = std::fs::read_to_string(&path)
                .map_err(|e| MarlError::Config(format!("{}: {e}", path.display())))?;
            let ckpt: AgentCheckpoint = serde_json::from_str(&text)
                .map_err(|e| MarlError::Config(format!("{}: {e}", path.display())))?;
            Ok(AgentBundle {
                id: ckpt.id,
                actor: ckpt.actor,
                critic: ckpt.critic,
                actor_opt: ckpt.actor_opt,
                critic_opt: ckpt.critic_opt,
                buffer: RolloutBuffer::default(),
                rng: ChaCha8Rng::seed_from_u64(crate::derive_seed(seed, 0x5a3 + u as u64)),
            })
        })
        .collect()
}

/// Freshly initialized agents for the given mode and scenario.
pub fn init_bundles(
    mode: TrainMode,
    cfg: &EnvConfig,
    spec: &ObservationSpec,
    ppo: &PpoConfig,
    seed: u64,
) -> Vec<AgentBundle> {
    use rand::SeedableRng;
    let obs_dim = spec.obs_dim(cfg);
    let critic_dim = if mode.is_centralized() {
        spec.global_dim(cfg)
    } else {
        obs_dim
    };
    (0..cfg.num_uavs)
        .map(|u| {
            let mut init_rng =
                ChaCha8Rng::seed_from_u64(crate::derive_seed(seed, 0xa6e0 + u as u64));
            let actor = Mlp::with_head(obs_dim, HIDDEN, N_MOVES + cfg.num_devices, &mut init_rng);
            let critic = Mlp::with_head(critic_dim, HIDDEN, 1, &mut init_rng);
            let actor_opt = OptimizerState::new(&actor, ppo.learning_rate);
            let critic_opt = OptimizerState::new(&critic, ppo.learning_rate);
            AgentBundle {
                id: u,
                actor,
                critic,
                actor_opt,
                critic_opt,
                buffer: RolloutBuffer::default(),
                rng: ChaCha8Rng::seed_from_u64(crate::derive_seed(seed, 0x5a3 + u as u64)),
            }
        })
        .collect()
}

fn validate_bundles(
    mode: TrainMode,
    bundles: &[AgentBundle],
    cfg: &EnvConfig,
    spec: &ObservationSpec,
) -> Result<(), MarlError> {
    if bundles.len() != cfg.num_uavs {
        return Err(MarlError::Config(format!(
            "{} agent bundles for {} UAVs",
            bundles.len(),
            cfg.num_uavs
        )));
    }
    let obs_dim = spec.obs_dim(cfg);
    let critic_dim = if mode.is_centralized() {
        spec.global_dim(cfg)
    } else {
        obs_dim
    };
    for b in bundles {
        if b.actor.input_dim() != obs_dim {
            return Err(MarlError::Config(format!(
                "agent {} actor input {} != observation length {}",
                b.id,
                b.actor.input_dim(),
                obs_dim
            )));
        }
        if b.actor.output_dim() != N_MOVES + cfg.num_devices {
            return Err(MarlError::Config(format!(
                "agent {} actor output {} != {} moves + {} devices",
                b.id,
                b.actor.output_dim(),
                N_MOVES,
                cfg.num_devices
            )));
        }
        if b.critic.input_dim() != critic_dim {
            return Err(MarlError::Config(format!(
                "agent {} critic input {} != expected {} for mode {}",
                b.id,
                b.critic.input_dim(),
                critic_dim,
                mode
            )));
        }
    }
    Ok(())
}

/// Trains fresh agents for `episodes` full-horizon episodes.
pub fn train(
    mode: TrainMode,
    cfg: &EnvConfig,
    spec: &ObservationSpec,
    ppo: &PpoConfig,
    episodes: usize,
    seed: u64,
) -> Result<TrainOutput, MarlError> {
    let bundles = init_bundles(mode, cfg, spec, ppo, seed);
    train_with_bundles(mode, cfg, spec, ppo, episodes, seed, bundles)
}

/// Training loop over caller-supplied agent bundles.
///
/// Each episode: collect `horizon` transitions per agent (the environment
/// step is the only synchronization point), finalize buffers, then run one
/// PPO update per agent. Agents update independently and in parallel.
pub fn train_with_bundles(
    mode: TrainMode,
    cfg: &EnvConfig,
    spec: &ObservationSpec,
    ppo: &PpoConfig,
    episodes: usize,
    seed: u64,
    mut bundles: Vec<AgentBundle>,
) -> Result<TrainOutput, MarlError> {
    cfg.validate()?;
    validate_bundles(mode, &bundles, cfg, spec)?;
    let mut metrics = Vec::with_capacity(episodes);
    let mut diagnostics: Vec<Vec<UpdateDiagnostics>> = vec![Vec::new(); bundles.len()];
    let mut env = Env::new(cfg.clone())?;
    // Updates fire once every agent holds at least `rollout_length`
    // transitions (whole episodes only; 0 means one episode per update).
    let rollout = ppo.rollout_length.max(cfg.horizon as usize);

    for episode in 0..episodes {
        env.reset_with_seed(crate::derive_seed(seed, 0xe91 + episode as u64));
        let record = run_episode(mode, &mut env, &mut bundles, spec, cfg, true)?;

        if bundles[0].buffer.len() >= rollout || episode + 1 == episodes {
            for bundle in bundles.iter_mut() {
                bundle.buffer.finalize(0.0, ppo)?;
            }
            let updates: Vec<Result<UpdateDiagnostics, crate::ppo::PpoError>> =
                crate::exec::map_collect_mut(&mut bundles, |b| {
                    let diag = ppo_update(
                        &mut b.actor,
                        &mut b.critic,
                        &b.buffer,
                        ppo,
                        &mut b.actor_opt,
                        &mut b.critic_opt,
                        N_MOVES,
                        &mut b.rng,
                    );
                    b.buffer.clear();
                    diag
                });
            for (u, d) in updates.into_iter().enumerate() {
                diagnostics[u].push(d?);
            }
        }

        let report = problem::objective_report(&record.trajectory, cfg)
            .map_err(|e| MarlError::Config(e.to_string()))?;
        metrics.push(MetricsRecord {
            episode,
            mode,
            objective1: report.objective1,
            objective2: report.objective2,
            communications: record.communications,
            distinct_devices: record.distinct_devices,
            violations: record.violations,
            move_violations: record.move_violations,
            scalars_exchanged: record.scalars_exchanged,
        });
    }
    Ok(TrainOutput {
        bundles,
        metrics,
        diagnostics,
    })
}

struct EpisodeRecord {
    trajectory: TrajectoryRecord,
    communications: u64,
    distinct_devices: usize,
    violations: u64,
    move_violations: u64,
    scalars_exchanged: u64,
    per_device_comms: Vec<u64>,
}

/// Rolls one episode, filling agent buffers when `learn` is set (stochastic
/// sampling) and decoding greedily otherwise.
fn run_episode(
    mode: TrainMode,
    env: &mut Env,
    bundles: &mut [AgentBundle],
    spec: &ObservationSpec,
    cfg: &EnvConfig,
    learn: bool,
) -> Result<EpisodeRecord, MarlError> {
    let horizon = cfg.horizon;
    let global_dim = spec.global_dim(cfg) as u64;
    let mut trajectory = TrajectoryRecord::new(env.state().clone());
    let mut communications = 0u64;
    let mut violations = 0u64;
    let mut move_violations = 0u64;
    let mut scalars_exchanged = 0u64;
    let mut per_device_comms = vec![0u64; cfg.num_devices];

    for step in 0..horizon {
        let state = env.state().clone();
        // Execution is decentralized in every mode: actors read local
        // observations only. The global state exists during training, where
        // centralized critics consume (and are charged for) it.
        let global = if learn && mode.is_centralized() {
            Some(build_global_observation(&state, spec, cfg))
        } else {
            None
        };

        let mut moves = Vec::with_capacity(bundles.len());
        let mut assoc = Vec::with_capacity(bundles.len());
        let mut staged: Vec<(Vec<f64>, Vec<f64>, Vec<bool>, usize, Vec<bool>, f64, f64)> =
            Vec::with_capacity(bundles.len());

        for bundle in bundles.iter_mut() {
            let obs = build_observation(&state, bundle.id, spec, cfg);
            let mask = env.move_mask(bundle.id).to_vec();
            let (logits, _) = bundle.actor.forward(&obs)?;
            let head = PolicyHead::split(&logits, N_MOVES);
            let (move_idx, bits, log_prob) = if learn {
                let sampled = policy::sample_action(&head, &mask, &mut bundle.rng);
                (sampled.move_idx, sampled.bits, sampled.log_prob)
            } else {
                let (m, b) = policy::greedy_action(&head, &mask);
                let lp = policy::log_prob(&head, &mask, m, &b);
                (m, b, lp)
            };
            moves.push(Move::from_index(move_idx));
            assoc.push(bits.clone());
            if learn {
                let critic_obs = match &global {
                    Some(g) => {
                        scalars_exchanged += global_dim;
                        g.clone()
                    }
                    None => obs.clone(),
                };
                let value = bundle.critic.infer(&critic_obs)?[0];
                staged.push((obs, critic_obs, mask, move_idx, bits, log_prob, value));
            }
        }

        let outcome = env.step(&JointAction { moves, assoc })?;
        violations += outcome.violations() as u64;
        move_violations += outcome.move_violations as u64;
        for (i, row) in outcome.granted.iter().enumerate() {
            let granted = row.iter().filter(|&&g| g).count() as u64;
            communications += granted;
            per_device_comms[i] += granted;
        }

        let done = step + 1 == horizon;
        if learn {
            for (bundle, (obs, critic_obs, mask, move_idx, bits, log_prob, value)) in
                bundles.iter_mut().zip(staged.into_iter())
            {
                let reward = match mode {
                    TrainMode::CentrObj1 => -outcome.aoi_snapshot,
                    _ => outcome.per_uav_reward[bundle.id],
                };
                bundle.buffer.push(Transition {
                    obs,
                    critic_obs,
                    move_idx,
                    bits,
                    move_mask: mask,
                    log_prob,
                    reward,
                    value,
                    done,
                });
            }
        }
        trajectory.push_step(&outcome, env.state().clone());
    }

    let distinct_devices = per_device_comms.iter().filter(|&&c| c > 0).count();
    Ok(EpisodeRecord {
        trajectory,
        communications,
        distinct_devices,
        violations,
        move_violations,
        scalars_exchanged,
        per_device_comms,
    })
}

/// Greedy-mode evaluation over `episodes` seeded episodes. Never mutates the
/// agents: parameters are borrowed immutably and cloned for the rollout.
pub fn evaluate(
    bundles: &[AgentBundle],
    cfg: &EnvConfig,
    spec: &ObservationSpec,
    episodes: usize,
    seed: u64,
) -> Result<Vec<EvalOutcome>, MarlError> {
    cfg.validate()?;
    let indices: Vec<usize> = (0..episodes).collect();
    let results = crate::exec::map_collect(&indices, |&ep| -> Result<EvalOutcome, MarlError> {
        let mut env = Env::new(cfg.clone())?;
        env.reset_with_seed(crate::derive_seed(seed, 0xea1 + ep as u64));
        let mut local: Vec<AgentBundle> = bundles.to_vec();
        let record = run_episode(TrainMode::Dec, &mut env, &mut local, spec, cfg, false)?;
        let report = problem::objective_report(&record.trajectory, cfg)
            .map_err(|e| MarlError::Config(e.to_string()))?;
        Ok(EvalOutcome {
            objective1: report.objective1,
            objective2: report.objective2,
            communications: record.communications,
            distinct_devices: record.distinct_devices,
            per_device_comms: record.per_device_comms,
            violations: record.violations,
            trajectory: record.trajectory,
        })
    });
    results.into_iter().collect()
}
