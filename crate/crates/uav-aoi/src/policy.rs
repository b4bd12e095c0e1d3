//! Factorized action head: a masked categorical over moves plus independent
//! Bernoulli bits over device associations.
//!
//! The joint log-probability of `(move, bits)` is the categorical term plus
//! the sum of per-bit Bernoulli terms; factorizing keeps the head linear in
//! the device count instead of exponential. Infeasible moves are suppressed
//! with an additive `-1e9` before the softmax; staying is never masked, so at
//! least one move always remains feasible.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const MASK_PENALTY: f64 = -1e9;

/// Raw head output split into its two factors.
#[derive(Debug, Clone)]
pub struct PolicyHead<'a> {
    pub move_logits: &'a [f64],
    pub assoc_logits: &'a [f64],
}

impl<'a> PolicyHead<'a> {
    pub fn split(output: &'a [f64], n_moves: usize) -> PolicyHead<'a> {
        PolicyHead {
            move_logits: &output[..n_moves],
            assoc_logits: &output[n_moves..],
        }
    }
}

/// Numerically stable `ln(1 + e^x)`.
fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Log-probabilities of the masked categorical.
pub fn masked_log_softmax(logits: &[f64], mask: &[bool]) -> Vec<f64> {
    debug_assert_eq!(logits.len(), mask.len());
    debug_assert!(mask.iter().any(|&m| m), "at least one move must be feasible");
    let masked: Vec<f64> = logits
        .iter()
        .zip(mask.iter())
        .map(|(&z, &m)| if m { z } else { z + MASK_PENALTY })
        .collect();
    let max = masked.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + masked.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    masked.iter().map(|&z| z - lse).collect()
}

/// A sampled `(move, bits)` pair with its joint log-probability.
#[derive(Debug, Clone)]
pub struct SampledAction {
    pub move_idx: usize,
    pub bits: Vec<bool>,
    pub log_prob: f64,
}

/// Samples the factorized head; consumes one uniform draw for the move and
/// one per association bit, in index order.
pub fn sample_action(head: &PolicyHead, mask: &[bool], rng: &mut ChaCha8Rng) -> SampledAction {
    let log_probs = masked_log_softmax(head.move_logits, mask);
    let draw: f64 = rng.gen();
    let mut acc = 0.0;
    let mut move_idx = 0;
    let mut picked = false;
    for (j, &lp) in log_probs.iter().enumerate() {
        acc += lp.exp();
        if draw < acc && !picked {
            move_idx = j;
            picked = true;
        }
    }
    if !picked {
        // Numerical remainder: fall back to the last feasible move.
        move_idx = mask.iter().rposition(|&m| m).expect("feasible move exists");
    }
    let mut log_prob = log_probs[move_idx];
    let bits: Vec<bool> = head
        .assoc_logits
        .iter()
        .map(|&l| {
            let p = sigmoid(l);
            let b = rng.gen::<f64>() < p;
            log_prob += if b { -softplus(-l) } else { -softplus(l) };
            b
        })
        .collect();
    SampledAction {
        move_idx,
        bits,
        log_prob,
    }
}

/// Greedy decode: argmax feasible move, bit set iff its logit is positive.
pub fn greedy_action(head: &PolicyHead, mask: &[bool]) -> (usize, Vec<bool>) {
    let log_probs = masked_log_softmax(head.move_logits, mask);
    let move_idx = log_probs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite log-probs"))
        .map(|(j, _)| j)
        .unwrap_or(0);
    let bits = head.assoc_logits.iter().map(|&l| l > 0.0).collect();
    (move_idx, bits)
}

/// Joint log-probability of a given `(move, bits)` under the head.
pub fn log_prob(head: &PolicyHead, mask: &[bool], move_idx: usize, bits: &[bool]) -> f64 {
    let log_probs = masked_log_softmax(head.move_logits, mask);
    let mut lp = log_probs[move_idx];
    for (&l, &b) in head.assoc_logits.iter().zip(bits.iter()) {
        lp += if b { -softplus(-l) } else { -softplus(l) };
    }
    lp
}

/// Entropy of the joint distribution: categorical entropy plus the sum of
/// Bernoulli entropies.
pub fn entropy(head: &PolicyHead, mask: &[bool]) -> f64 {
    let log_probs = masked_log_softmax(head.move_logits, mask);
    let mut h: f64 = log_probs
        .iter()
        .map(|&lp| {
            let p = lp.exp();
            if p > 0.0 {
                -p * lp
            } else {
                0.0
            }
        })
        .sum();
    for &l in head.assoc_logits {
        let p = sigmoid(l);
        h += p * softplus(-l) + (1.0 - p) * softplus(l);
    }
    h
}

/// Gradient of [`log_prob`] with respect to all `n_moves + I` logits.
pub fn log_prob_grad(
    head: &PolicyHead,
    mask: &[bool],
    move_idx: usize,
    bits: &[bool],
) -> Vec<f64> {
    let log_probs = masked_log_softmax(head.move_logits, mask);
    let mut grad = Vec::with_capacity(head.move_logits.len() + head.assoc_logits.len());
    for (j, &lp) in log_probs.iter().enumerate() {
        let p = lp.exp();
        grad.push(if j == move_idx { 1.0 - p } else { -p });
    }
    for (&l, &b) in head.assoc_logits.iter().zip(bits.iter()) {
        let p = sigmoid(l);
        grad.push(if b { 1.0 - p } else { -p });
    }
    grad
}

/// Gradient of [`entropy`] with respect to all logits.
pub fn entropy_grad(head: &PolicyHead, mask: &[bool]) -> Vec<f64> {
    let log_probs = masked_log_softmax(head.move_logits, mask);
    let h_cat: f64 = log_probs
        .iter()
        .map(|&lp| {
            let p = lp.exp();
            if p > 0.0 {
                -p * lp
            } else {
                0.0
            }
        })
        .sum();
    let mut grad = Vec::with_capacity(head.move_logits.len() + head.assoc_logits.len());
    for &lp in &log_probs {
        let p = lp.exp();
        grad.push(if p > 0.0 { -p * (lp + h_cat) } else { 0.0 });
    }
    for &l in head.assoc_logits {
        let p = sigmoid(l);
        grad.push(-l * p * (1.0 - p));
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn equal_logits_give_uniform_moves() {
        let output = vec![0.3; 5];
        let head = PolicyHead::split(&output, 5);
        let lps = masked_log_softmax(head.move_logits, &[true; 5]);
        for lp in lps {
            assert!((lp.exp() - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn masked_move_is_never_sampled() {
        let output = vec![5.0, 5.0, 5.0, 5.0, 5.0];
        let head = PolicyHead::split(&output, 5);
        let mask = [true, false, true, false, true];
        let mut r = rng(2);
        for _ in 0..500 {
            let a = sample_action(&head, &mask, &mut r);
            assert!(mask[a.move_idx]);
        }
    }

    #[test]
    fn saturated_association_logit_forces_zero_bit() {
        let output = vec![0.0, 0.0, 0.0, 0.0, 0.0, MASK_PENALTY];
        let head = PolicyHead::split(&output, 5);
        let mut r = rng(3);
        for _ in 0..200 {
            let a = sample_action(&head, &[true; 5], &mut r);
            assert!(!a.bits[0]);
            assert!(a.log_prob.is_finite());
        }
    }

    #[test]
    fn log_prob_matches_exhaustive_enumeration() {
        // 5 moves x 3 bits: probabilities over the 40-point support must sum
        // to one and match the categorical x Bernoulli product directly.
        let output = vec![0.4, -0.2, 1.1, 0.0, -0.7, 0.3, -1.2, 0.8];
        let head = PolicyHead::split(&output, 5);
        let mask = [true, true, false, true, true];
        let lps = masked_log_softmax(head.move_logits, &mask);
        let mut total = 0.0;
        for m in 0..5 {
            for code in 0..8u32 {
                let bits: Vec<bool> = (0..3).map(|i| code >> i & 1 == 1).collect();
                let lp = log_prob(&head, &mask, m, &bits);
                let mut direct = lps[m].exp();
                for (i, &b) in bits.iter().enumerate() {
                    let p = sigmoid(head.assoc_logits[i]);
                    direct *= if b { p } else { 1.0 - p };
                }
                assert!((lp.exp() - direct).abs() < 1e-12);
                total += lp.exp();
            }
        }
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn log_prob_is_nonpositive() {
        let output = vec![2.0, -1.0, 0.0, 0.5, -0.5, 3.0, -3.0];
        let head = PolicyHead::split(&output, 5);
        let mut r = rng(4);
        for _ in 0..100 {
            let a = sample_action(&head, &[true; 5], &mut r);
            assert!(a.log_prob <= 0.0);
        }
    }

    #[test]
    fn entropy_matches_enumeration() {
        let output = vec![0.4, -0.2, 1.1, 0.0, -0.7, 0.3, -1.2];
        let head = PolicyHead::split(&output, 5);
        let mask = [true; 5];
        let mut h_direct = 0.0;
        for m in 0..5 {
            for code in 0..4u32 {
                let bits: Vec<bool> = (0..2).map(|i| code >> i & 1 == 1).collect();
                let lp = log_prob(&head, &mask, m, &bits);
                h_direct -= lp.exp() * lp;
            }
        }
        assert!((entropy(&head, &mask) - h_direct).abs() < 1e-9);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let output = vec![0.4, -0.2, 1.1, 0.0, -0.7, 0.3, -1.2];
        let mask = [true, true, true, false, true];
        let bits = [true, false];
        let h = 1e-6;
        let head = PolicyHead::split(&output, 5);
        let lp_grad = log_prob_grad(&head, &mask, 2, &bits);
        let h_grad = entropy_grad(&head, &mask);
        for j in 0..output.len() {
            let mut plus = output.clone();
            plus[j] += h;
            let mut minus = output.clone();
            minus[j] -= h;
            let hp = PolicyHead::split(&plus, 5);
            let hm = PolicyHead::split(&minus, 5);
            let num_lp = (log_prob(&hp, &mask, 2, &bits) - log_prob(&hm, &mask, 2, &bits)) / (2.0 * h);
            let num_h = (entropy(&hp, &mask) - entropy(&hm, &mask)) / (2.0 * h);
            assert!((lp_grad[j] - num_lp).abs() < 1e-6, "logit {j}");
            assert!((h_grad[j] - num_h).abs() < 1e-6, "logit {j}");
        }
    }

    #[test]
    fn masked_logits_get_zero_gradient() {
        let output = vec![0.4, -0.2, 1.1, 0.0, -0.7];
        let head = PolicyHead::split(&output, 5);
        let mask = [true, false, true, true, true];
        let g = log_prob_grad(&head, &mask, 0, &[]);
        assert_eq!(g[1], 0.0);
        let eg = entropy_grad(&head, &mask);
        assert_eq!(eg[1], 0.0);
    }

    #[test]
    fn greedy_decode_is_deterministic() {
        let output = vec![0.1, 0.9, 0.3, -0.2, 0.0, 0.4, -0.4];
        let head = PolicyHead::split(&output, 5);
        let (m, bits) = greedy_action(&head, &[true; 5]);
        assert_eq!(m, 1);
        assert_eq!(bits, vec![true, false]);
        let (m2, _) = greedy_action(&head, &[true, false, true, true, true]);
        assert_eq!(m2, 2);
    }
}
