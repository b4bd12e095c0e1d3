//! Per-packet age bookkeeping and the geometric weight function.
//!
//! Ages are stored as integer multiples of the interval length so the
//! recursion matches its closed form exactly. Packet `n` of a device with
//! period `k` enters the buffer at interval `n*k` and, while uncollected,
//! gains one tick per interval starting at its entry interval: an uncollected
//! packet holds age `(t - n*k + 1) * tau` at every `t >= n*k`. Collection is
//! sticky: once any UAV collects the device, every packet then in the buffer
//! drops to age zero permanently. The index-0 packet is born at interval 0
//! already collected, so only packets with `n >= 1` ever age.

use crate::config::{EnvConfig, WeightMode};
use serde::{Deserialize, Serialize};

use super::EnvError;

/// Age record for one generated packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketAge {
    /// Generation index `n`; the packet was generated at interval `n * k`.
    pub gen_index: u32,
    /// Age in ticks of the interval length.
    pub age_ticks: u32,
    pub collected: bool,
}

impl PacketAge {
    pub fn age_seconds(&self, interval_len: f64) -> f64 {
        self.age_ticks as f64 * interval_len
    }
}

/// Weight of packet `n` at interval `t` for a device with period `k`.
///
/// Later-generated packets always weigh at least as much as earlier ones at
/// the same interval, strictly so when `gamma < 1`.
pub fn packet_weight(n: u32, t: u32, k: u32, cfg: &EnvConfig) -> f64 {
    let exponent = match cfg.weight_mode {
        WeightMode::PaperLiteral => t - n,
        WeightMode::GenerationTime => t - n * k,
    };
    cfg.aoi_weight_gamma.powi(exponent as i32)
}

/// Buffers for all devices at one interval.
pub type DeviceBuffers = Vec<Vec<PacketAge>>;

/// Fresh buffers at `t = 0`: every device holds exactly its index-0 packet.
pub fn initial_buffers(cfg: &EnvConfig) -> DeviceBuffers {
    cfg.devices
        .iter()
        .map(|_| {
            vec![PacketAge {
                gen_index: 0,
                age_ticks: 0,
                collected: true,
            }]
        })
        .collect()
}

/// Advances all buffers from interval `new_t - 1` to `new_t` given the
/// arbitrated association matrix (`granted[i][u]`).
///
/// Newly due packets (`n * k == new_t`) enter with age zero and then take the
/// regular increment, so they end the advance one tick old unless the device
/// is collected this very interval. Returns the association count per device
/// or an error if arbitration let two UAVs claim one device.
pub fn aoi_advance(
    buffers: &mut DeviceBuffers,
    granted: &[Vec<bool>],
    new_t: u32,
    cfg: &EnvConfig,
) -> Result<(), EnvError> {
    for (i, device) in cfg.devices.iter().enumerate() {
        let claims = granted[i].iter().filter(|&&g| g).count();
        if claims > 1 {
            return Err(EnvError::Internal(format!(
                "device {i} granted to {claims} UAVs at t = {new_t}"
            )));
        }
        let buffer = &mut buffers[i];
        if new_t % device.gen_period_k == 0 {
            buffer.push(PacketAge {
                gen_index: new_t / device.gen_period_k,
                age_ticks: 0,
                collected: false,
            });
        }
        let collected_now = claims == 1;
        for packet in buffer.iter_mut() {
            if collected_now {
                packet.collected = true;
                packet.age_ticks = 0;
            } else if !packet.collected {
                packet.age_ticks += 1;
            }
        }
    }
    Ok(())
}

/// Total weighted age across all devices at interval `t`:
/// `sum_i sum_n w^n[t] * A_i^n[t]`.
pub fn total_weighted_aoi(buffers: &DeviceBuffers, t: u32, cfg: &EnvConfig) -> f64 {
    buffers
        .iter()
        .zip(cfg.devices.iter())
        .map(|(buffer, device)| {
            buffer
                .iter()
                .map(|p| {
                    packet_weight(p.gen_index, t, device.gen_period_k, cfg)
                        * p.age_seconds(cfg.interval_len)
                })
                .sum::<f64>()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{DeviceConfig, UavConfig};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg_with_period(k: u32, tau: f64, gamma: f64) -> EnvConfig {
        EnvConfig {
            num_devices: 1,
            num_uavs: 1,
            area_x: 100.0,
            area_y: 100.0,
            grid_step: 100.0,
            horizon: 20,
            interval_len: tau,
            rician_factor: 10.0,
            pure_los: true,
            noise_power: 1e-15,
            min_rate: 0.0,
            aoi_weight_gamma: gamma,
            weight_mode: WeightMode::PaperLiteral,
            devices: vec![DeviceConfig {
                id: 0,
                pos_x: 0.0,
                pos_y: 0.0,
                gen_period_k: k,
                bandwidth: 1.5e9,
                tx_power: 1e-3,
            }],
            uavs: vec![UavConfig {
                id: 0,
                altitude: 100.0,
                speed: 15.0,
                max_flight_time: 1e6,
                start_cell: [0, 0],
            }],
            rng_seed: 0,
        }
    }

    fn advance_many(cfg: &EnvConfig, steps: u32, collect_at: &[u32]) -> DeviceBuffers {
        let mut buffers = initial_buffers(cfg);
        for t in 1..=steps {
            let grant = vec![vec![collect_at.contains(&t)]];
            aoi_advance(&mut buffers, &grant, t, cfg).unwrap();
        }
        buffers
    }

    #[test]
    fn ages_start_at_zero() {
        let cfg = cfg_with_period(2, 3e-3, 0.8);
        let buffers = initial_buffers(&cfg);
        assert!(buffers[0].iter().all(|p| p.age_ticks == 0));
    }

    #[test]
    fn uncollected_packet_unrolls_recursion() {
        // k = 2, tau = 3 ms, packet n = 1 never collected:
        // A[2] = 3 ms, A[3] = 6 ms, A[4] = 9 ms.
        let cfg = cfg_with_period(2, 3e-3, 0.8);
        for (t, expect_ms) in [(2u32, 3.0), (3, 6.0), (4, 9.0)] {
            let buffers = advance_many(&cfg, t, &[]);
            let p = buffers[0].iter().find(|p| p.gen_index == 1).unwrap();
            let age_ms = p.age_seconds(cfg.interval_len) * 1e3;
            assert!((age_ms - expect_ms).abs() < 1e-12, "t {t}: {age_ms}");
            assert_eq!(p.age_ticks, t - 2 + 1);
        }
    }

    #[test]
    fn collection_resets_and_stays_zero() {
        // k = 1, packet n = 2 collected at t = 3: zero at t = 3 and t = 5.
        let cfg = cfg_with_period(1, 1.0, 0.8);
        let buffers = advance_many(&cfg, 5, &[3]);
        let p = buffers[0].iter().find(|p| p.gen_index == 2).unwrap();
        assert!(p.collected);
        assert_eq!(p.age_ticks, 0);
    }

    #[test]
    fn double_grant_is_rejected() {
        let mut cfg = cfg_with_period(1, 1.0, 0.8);
        cfg.num_uavs = 2;
        cfg.uavs.push(UavConfig {
            id: 1,
            altitude: 80.0,
            speed: 15.0,
            max_flight_time: 1e6,
            start_cell: [0, 0],
        });
        let mut buffers = initial_buffers(&cfg);
        let err = aoi_advance(&mut buffers, &[vec![true, true]], 1, &cfg);
        assert!(err.is_err());
    }

    #[test]
    fn buffer_count_matches_floor_formula() {
        let cfg = cfg_with_period(3, 1.0, 0.8);
        for t in 0..=12u32 {
            let buffers = advance_many(&cfg, t, &[]);
            assert_eq!(buffers[0].len() as u32, t / 3 + 1, "t = {t}");
        }
    }

    #[test]
    fn weight_examples() {
        let cfg = cfg_with_period(1, 1.0, 0.8);
        assert_eq!(packet_weight(5, 5, 1, &cfg), 1.0);
        assert!((packet_weight(3, 5, 1, &cfg) - 0.64).abs() < 1e-12);
        let unweighted = cfg_with_period(1, 1.0, 1.0);
        assert_eq!(packet_weight(2, 9, 1, &unweighted), 1.0);
    }

    #[test]
    fn generation_time_mode_uses_birth_interval() {
        let mut cfg = cfg_with_period(3, 1.0, 0.5);
        cfg.weight_mode = WeightMode::GenerationTime;
        // n = 2 born at t = 6; at t = 8 the exponent is 2.
        assert_eq!(packet_weight(2, 8, 3, &cfg), 0.25);
        cfg.weight_mode = WeightMode::PaperLiteral;
        assert_eq!(packet_weight(2, 8, 3, &cfg), 0.5f64.powi(6));
    }

    proptest! {
        #[test]
        fn weights_increase_in_generation_index(
            gamma in 0.05f64..0.999,
            t in 1u32..40,
        ) {
            let mut cfg = cfg_with_period(1, 1.0, gamma);
            cfg.aoi_weight_gamma = gamma;
            for n in 0..t {
                prop_assert!(
                    packet_weight(n + 1, t, 1, &cfg) > packet_weight(n, t, 1, &cfg)
                );
            }
        }

        #[test]
        fn closed_form_matches_recursion(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = rng.gen_range(1u32..=6);
            let steps = rng.gen_range(1u32..=15);
            let collect_at: Vec<u32> =
                (1..=steps).filter(|_| rng.gen_bool(0.3)).collect();
            let cfg = cfg_with_period(k, 1.0, 0.8);
            let mut buffers = initial_buffers(&cfg);
            let mut first_collection: Option<u32> = None;
            for t in 1..=steps {
                let g = collect_at.contains(&t);
                if g && first_collection.is_none() {
                    first_collection = Some(t);
                }
                aoi_advance(&mut buffers, &[vec![g]], t, &cfg).unwrap();
                for p in &buffers[0] {
                    let born = p.gen_index * k;
                    if p.gen_index == 0 {
                        prop_assert_eq!(p.age_ticks, 0);
                        continue;
                    }
                    let collected_since_birth =
                        collect_at.iter().any(|&c| c >= born && c <= t);
                    if collected_since_birth {
                        prop_assert_eq!(p.age_ticks, 0);
                        prop_assert!(p.collected);
                    } else {
                        prop_assert_eq!(p.age_ticks, t - born + 1);
                    }
                }
            }
        }
    }
}
