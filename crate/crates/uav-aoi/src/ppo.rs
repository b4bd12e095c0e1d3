//! Single-agent PPO machinery: rollout storage, generalized advantage
//! estimation, the clipped surrogate loss, and the epoch/minibatch update.

use crate::nn::{adam_step, Gradients, Mlp, OptimizerState};
use crate::policy::{self, PolicyHead};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PpoError {
    #[error("empty rollout buffer")]
    EmptyBuffer,
    #[error("buffer not finalized before update")]
    NotFinalized,
    #[error("non-finite loss: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
}

/// PPO hyperparameters. The discount is the RL discount, unrelated to the
/// age-weight decay in the environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PpoConfig {
    pub clip_epsilon: f64,
    pub discount: f64,
    pub gae_lambda: f64,
    pub epochs_per_update: usize,
    pub minibatch_size: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub learning_rate: f64,
    /// Transitions per update; 0 means one full episode.
    pub rollout_length: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip_epsilon: 0.2,
            discount: 0.99,
            gae_lambda: 0.95,
            epochs_per_update: 4,
            minibatch_size: 64,
            value_coef: 0.5,
            entropy_coef: 0.01,
            learning_rate: 3e-4,
            rollout_length: 0,
        }
    }
}

/// One stored step of experience.
#[derive(Debug, Clone)]
pub struct Transition {
    /// Actor input.
    pub obs: Vec<f64>,
    /// Critic input; equals `obs` under decentralized training and the
    /// global state under centralized training.
    pub critic_obs: Vec<f64>,
    pub move_idx: usize,
    pub bits: Vec<bool>,
    /// Feasibility mask active when the action was sampled.
    pub move_mask: Vec<bool>,
    /// Joint log-probability under the behavior policy.
    pub log_prob: f64,
    pub reward: f64,
    /// Value estimate at the observed state.
    pub value: f64,
    pub done: bool,
}

/// Ordered transitions plus post-finalization advantages and return targets.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub transitions: Vec<Transition>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    finalized: bool,
}

impl RolloutBuffer {
    pub fn push(&mut self, t: Transition) {
        debug_assert!(!self.finalized);
        self.transitions.push(t);
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn clear(&mut self) {
        self.transitions.clear();
        self.advantages.clear();
        self.returns.clear();
        self.finalized = false;
    }

    /// Computes GAE targets and normalizes advantages for the update batch.
    pub fn finalize(&mut self, bootstrap_value: f64, cfg: &PpoConfig) -> Result<(), PpoError> {
        let (raw, returns) = compute_gae(self, bootstrap_value, cfg)?;
        self.returns = returns;
        self.advantages = normalize_advantages(&raw);
        self.finalized = true;
        Ok(())
    }
}

/// Generalized advantage estimation over the buffer:
/// `delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)`,
/// `A_t = sum_l (gamma * lambda)^l delta_{t+l}` (truncated at dones),
/// and `returns = A + V`. Returns raw (unnormalized) advantages.
pub fn compute_gae(
    buffer: &RolloutBuffer,
    bootstrap_value: f64,
    cfg: &PpoConfig,
) -> Result<(Vec<f64>, Vec<f64>), PpoError> {
    let n = buffer.transitions.len();
    if n == 0 {
        return Err(PpoError::EmptyBuffer);
    }
    let mut advantages = vec![0.0; n];
    let mut carry = 0.0;
    for t in (0..n).rev() {
        let tr = &buffer.transitions[t];
        let not_done = if tr.done { 0.0 } else { 1.0 };
        let next_value = if t + 1 < n {
            buffer.transitions[t + 1].value
        } else {
            bootstrap_value
        };
        let delta = tr.reward + cfg.discount * next_value * not_done - tr.value;
        carry = delta + cfg.discount * cfg.gae_lambda * not_done * carry;
        advantages[t] = carry;
    }
    let returns = advantages
        .iter()
        .zip(buffer.transitions.iter())
        .map(|(a, tr)| a + tr.value)
        .collect();
    Ok((advantages, returns))
}

/// Batch-normalizes advantages to mean zero and unit standard deviation.
/// Batches of one are returned unchanged (nothing to normalize against).
pub fn normalize_advantages(raw: &[f64]) -> Vec<f64> {
    if raw.len() < 2 {
        return raw.to_vec();
    }
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let var = raw.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    raw.iter().map(|a| (a - mean) / (std + 1e-8)).collect()
}

/// Clipped surrogate policy loss:
/// `-mean(min(rho * A, clip(rho, 1-eps, 1+eps) * A))` with
/// `rho = exp(new - old)`.
pub fn clipped_policy_loss(
    new_log_probs: &[f64],
    old_log_probs: &[f64],
    advantages: &[f64],
    clip_epsilon: f64,
) -> f64 {
    debug_assert_eq!(new_log_probs.len(), old_log_probs.len());
    debug_assert_eq!(new_log_probs.len(), advantages.len());
    let n = new_log_probs.len() as f64;
    -new_log_probs
        .iter()
        .zip(old_log_probs.iter())
        .zip(advantages.iter())
        .map(|((&new, &old), &adv)| {
            let rho = (new - old).exp();
            let clipped = rho.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon);
            (rho * adv).min(clipped * adv)
        })
        .sum::<f64>()
        / n
}

/// Mean squared error between predictions and return targets.
pub fn value_loss(predicted: &[f64], return_targets: &[f64]) -> f64 {
    debug_assert_eq!(predicted.len(), return_targets.len());
    let n = predicted.len() as f64;
    predicted
        .iter()
        .zip(return_targets.iter())
        .map(|(&p, &r)| (p - r) * (p - r))
        .sum::<f64>()
        / n
}

/// Per-update training diagnostics, averaged over all minibatch passes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct UpdateDiagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub mean_ratio: f64,
}

/// Runs `epochs_per_update` passes of shuffled minibatches over the buffer,
/// alternating actor and critic Adam steps.
///
/// The total objective per sample is
/// `policy_loss + value_coef * value_loss - entropy_coef * entropy`;
/// the two networks own disjoint parameters, so the actor sees the policy
/// and entropy terms and the critic the value term.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update(
    actor: &mut Mlp,
    critic: &mut Mlp,
    buffer: &RolloutBuffer,
    cfg: &PpoConfig,
    actor_opt: &mut OptimizerState,
    critic_opt: &mut OptimizerState,
    n_moves: usize,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateDiagnostics, PpoError> {
    if buffer.is_empty() {
        return Err(PpoError::EmptyBuffer);
    }
    if !buffer.finalized {
        return Err(PpoError::NotFinalized);
    }
    let n = buffer.len();
    let minibatch = cfg.minibatch_size.max(1).min(n);
    let mut indices: Vec<usize> = (0..n).collect();
    let mut stats = UpdateDiagnostics {
        policy_loss: 0.0,
        value_loss: 0.0,
        entropy: 0.0,
        clip_fraction: 0.0,
        mean_ratio: 0.0,
    };
    let mut passes = 0usize;

    for _epoch in 0..cfg.epochs_per_update {
        indices.shuffle(rng);
        for chunk in indices.chunks(minibatch) {
            let mb = chunk.len() as f64;
            let mut actor_grads = Gradients::zeros_like(actor);
            let mut critic_grads = Gradients::zeros_like(critic);
            let mut pol_loss = 0.0;
            let mut v_loss = 0.0;
            let mut ent = 0.0;
            let mut clipped = 0usize;
            let mut ratio_sum = 0.0;

            for &i in chunk {
                let tr = &buffer.transitions[i];
                let adv = buffer.advantages[i];

                let (logits, tape) = actor.forward(&tr.obs)?;
                let head = PolicyHead::split(&logits, n_moves);
                let new_lp = policy::log_prob(&head, &tr.move_mask, tr.move_idx, &tr.bits);
                let rho = (new_lp - tr.log_prob).exp();
                let clip_lo = 1.0 - cfg.clip_epsilon;
                let clip_hi = 1.0 + cfg.clip_epsilon;
                let unclipped = rho * adv;
                let clipped_obj = rho.clamp(clip_lo, clip_hi) * adv;
                let surrogate = unclipped.min(clipped_obj);
                pol_loss -= surrogate / mb;
                ratio_sum += rho;
                if (rho - 1.0).abs() > cfg.clip_epsilon {
                    clipped += 1;
                }
                // d(-surrogate)/d(new_lp): zero when the clipped branch is
                // strictly active (its value is constant in rho).
                let dsur_dlp = if unclipped <= clipped_obj { adv * rho } else { 0.0 };

                let h = policy::entropy(&head, &tr.move_mask);
                ent += h / mb;

                let lp_grad = policy::log_prob_grad(&head, &tr.move_mask, tr.move_idx, &tr.bits);
                let h_grad = policy::entropy_grad(&head, &tr.move_mask);
                let dlogits: Vec<f64> = lp_grad
                    .iter()
                    .zip(h_grad.iter())
                    .map(|(&glp, &gh)| (-dsur_dlp * glp - cfg.entropy_coef * gh) / mb)
                    .collect();
                actor_grads.add(&actor.backward(&tape, &dlogits)?);

                let (v_out, v_tape) = critic.forward(&tr.critic_obs)?;
                let v = v_out[0];
                let target = buffer.returns[i];
                v_loss += (v - target) * (v - target) / mb;
                let dv = cfg.value_coef * 2.0 * (v - target) / mb;
                critic_grads.add(&critic.backward(&v_tape, &[dv])?);
            }

            let total = pol_loss + cfg.value_coef * v_loss - cfg.entropy_coef * ent;
            if !total.is_finite() {
                return Err(PpoError::NonFinite(format!("total loss {total}")));
            }
            adam_step(actor, &actor_grads, actor_opt)?;
            adam_step(critic, &critic_grads, critic_opt)?;

            stats.policy_loss += pol_loss;
            stats.value_loss += v_loss;
            stats.entropy += ent;
            stats.clip_fraction += clipped as f64 / mb;
            stats.mean_ratio += ratio_sum / mb;
            passes += 1;
        }
    }

    let p = passes as f64;
    stats.policy_loss /= p;
    stats.value_loss /= p;
    stats.entropy /= p;
    stats.clip_fraction /= p;
    stats.mean_ratio /= p;
    Ok(stats)
}
