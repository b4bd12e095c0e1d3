//! Air-to-ground channel: block Rician fading, SNR, and achievable rate.

use crate::config::{DeviceConfig, EnvConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use super::EnvError;

/// One realized fading draw for a (device, UAV, interval) triple.
///
/// The channel coefficient is
/// `h = d^-1 * (sqrt(Phi/(Phi+1)) * xi_los + sqrt(1/(Phi+1)) * xi_nlos)`
/// with `|xi_los| = 1` at a uniformly random phase and `xi_nlos` a
/// circularly-symmetric complex Gaussian of unit total variance.
#[derive(Debug, Clone, Copy)]
pub struct ChannelSample {
    /// Phase of the unit-magnitude LoS component, radians.
    pub los_phase: f64,
    /// Real and imaginary parts of the NLoS component.
    pub nlos_re: f64,
    pub nlos_im: f64,
    /// Device-UAV distance in meters.
    pub distance: f64,
    /// Squared channel gain `|h|^2`.
    pub gain_sq: f64,
    /// Achievable rate in bits/second; filled by [`achievable_rate`].
    pub rate: f64,
}

/// 3D distance between a UAV at grid cell `(cx, cy)` and altitude `h`, and a
/// device at ground position `(px, py)`.
pub fn distance(uav_cell: [u32; 2], altitude: f64, device_pos: [f64; 2], grid_step: f64) -> f64 {
    let dx = uav_cell[0] as f64 * grid_step - device_pos[0];
    let dy = uav_cell[1] as f64 * grid_step - device_pos[1];
    (dx * dx + dy * dy + altitude * altitude).sqrt()
}

/// Draws one block-fading realization at distance `d`.
///
/// In pure-LoS mode the NLoS term vanishes, no randomness is consumed, and
/// `|h| = 1/d` exactly.
pub fn sample_channel(
    rng: &mut ChaCha8Rng,
    d: f64,
    cfg: &EnvConfig,
) -> Result<ChannelSample, EnvError> {
    if d <= 0.0 {
        return Err(EnvError::Domain(format!("distance must be positive, got {d}")));
    }
    if cfg.pure_los {
        return Ok(ChannelSample {
            los_phase: 0.0,
            nlos_re: 0.0,
            nlos_im: 0.0,
            distance: d,
            gain_sq: 1.0 / (d * d),
            rate: 0.0,
        });
    }
    let phi = cfg.rician_factor;
    let los_phase = rng.gen_range(0.0..2.0 * PI);
    // Box-Muller; each component has variance 1/2 so E[|xi_nlos|^2] = 1.
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * PI * u2;
    let nlos_re = r * theta.cos() / 2f64.sqrt();
    let nlos_im = r * theta.sin() / 2f64.sqrt();

    let los_scale = (phi / (phi + 1.0)).sqrt();
    let nlos_scale = (1.0 / (phi + 1.0)).sqrt();
    let h_re = (los_scale * los_phase.cos() + nlos_scale * nlos_re) / d;
    let h_im = (los_scale * los_phase.sin() + nlos_scale * nlos_im) / d;
    Ok(ChannelSample {
        los_phase,
        nlos_re,
        nlos_im,
        distance: d,
        gain_sq: h_re * h_re + h_im * h_im,
        rate: 0.0,
    })
}

/// Shannon rate `B * log2(1 + P * |h|^2 / sigma^2)` in bits/second.
pub fn achievable_rate(sample: &ChannelSample, device: &DeviceConfig, cfg: &EnvConfig) -> f64 {
    let snr = device.tx_power * sample.gain_sq / cfg.noise_power;
    device.bandwidth * (1.0 + snr).log2()
}

/// Deterministic pure-LoS rate at distance `d`; range checks in the greedy
/// baseline and the oracle use this as the fading-free reference.
pub fn los_rate(d: f64, device: &DeviceConfig, cfg: &EnvConfig) -> f64 {
    let gain_sq = 1.0 / (d * d);
    let snr = device.tx_power * gain_sq / cfg.noise_power;
    device.bandwidth * (1.0 + snr).log2()
}

/// Empirical mean of `|h|^2 * d^2` over `n` draws, chunked so the parallel
/// and sequential paths produce identical sums.
pub fn mean_gain_distance_sq(cfg: &EnvConfig, d: f64, n: usize, seed: u64) -> f64 {
    let chunk = 4096usize;
    let chunks: Vec<(u64, usize)> = (0..n.div_ceil(chunk))
        .map(|c| (c as u64, chunk.min(n - c * chunk)))
        .collect();
    let sums = crate::exec::map_collect(&chunks, |&(c, len)| {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(seed, 0xc4a + c));
        let mut s = 0.0;
        for _ in 0..len {
            let sample = sample_channel(&mut rng, d, cfg).expect("d > 0");
            s += sample.gain_sq * d * d;
        }
        s
    });
    sums.iter().sum::<f64>() / n as f64
}
