//! Per-user demands and the SINR targets they imply.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ScenarioConfig, SinrTargetFormula};

/// Demand of one user over the window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserQos {
    /// Total volume `xi_k` in Mb.
    pub demand_mb: f64,
    /// Slot budget `T_k`.
    pub slots: usize,
    /// SINR `nu_k` needed to deliver `xi_k / T_k` in one slot.
    pub sinr_target: f64,
}

impl UserQos {
    pub fn new(demand_mb: f64, slots: usize, bandwidth_mhz: f64, formula: SinrTargetFormula) -> Self {
        Self {
            demand_mb,
            slots,
            sinr_target: sinr_target(demand_mb, slots, bandwidth_mhz, formula),
        }
    }

    /// Per-slot rate target `xi_k / T_k` in Mbps; zero for idle users.
    pub fn rate_target(&self) -> f64 {
        if self.slots == 0 {
            0.0
        } else {
            self.demand_mb / self.slots as f64
        }
    }

    /// Users with no demand are never scheduled.
    pub fn is_active(&self) -> bool {
        self.slots > 0 && self.demand_mb > 0.0
    }
}

/// SINR needed for `B log2(1 + SINR) >= xi / T`.
///
/// `Literal` drops the bandwidth from the exponent and is only useful for
/// reproducing the unscaled formula; at realistic rates it overflows to
/// infinity.
pub fn sinr_target(demand_mb: f64, slots: usize, bandwidth_mhz: f64, formula: SinrTargetFormula) -> f64 {
    if slots == 0 || demand_mb <= 0.0 {
        return 0.0;
    }
    let per_slot = demand_mb / slots as f64;
    match formula {
        SinrTargetFormula::BandwidthScaled => (per_slot / bandwidth_mhz).exp2() - 1.0,
        SinrTargetFormula::Literal => per_slot.exp2() - 1.0,
    }
}

/// Draws `T_k` uniformly on the configured range and sets `xi_k = T_k * rate`.
pub fn generate_qos<R: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Vec<UserQos> {
    let [lo, hi] = config.qos_slots_range;
    (0..config.num_users())
        .map(|_| {
            let slots = rng.gen_range(lo..=hi);
            UserQos::new(
                slots as f64 * config.qos_rate_per_slot_mbps,
                slots,
                config.bandwidth_mhz,
                config.sinr_target_formula,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn largest_demand_is_6500_mb() {
        let q = UserQos::new(13.0 * 500.0, 13, 500.0, SinrTargetFormula::BandwidthScaled);
        assert_eq!(q.demand_mb, 6500.0);
        assert_eq!(q.rate_target(), 500.0);
        assert!((q.sinr_target - 1.0).abs() < 1e-15);
    }

    #[test]
    fn idle_user_has_no_target() {
        let q = UserQos::new(0.0, 0, 500.0, SinrTargetFormula::BandwidthScaled);
        assert!(!q.is_active());
        assert_eq!(q.rate_target(), 0.0);
        assert_eq!(q.sinr_target, 0.0);
    }

    #[test]
    fn target_rate_is_exactly_reachable() {
        let nu = sinr_target(1234.0, 3, 500.0, SinrTargetFormula::BandwidthScaled);
        let rate = 500.0 * (1.0 + nu).log2();
        assert!((rate - 1234.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn literal_formula_ignores_bandwidth() {
        let nu = sinr_target(6.0, 2, 500.0, SinrTargetFormula::Literal);
        assert_eq!(nu, 7.0);
        assert!(sinr_target(6500.0, 13, 500.0, SinrTargetFormula::Literal) > 1e100);
    }

    #[test]
    fn slot_budget_mean_matches_uniform() {
        let mut config = ScenarioConfig::desk();
        config.users_per_beam = 100_000 / config.num_beams + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let q = generate_qos(&config, &mut rng);
        let n = 100_000;
        let mean = q[..n].iter().map(|u| u.slots as f64).sum::<f64>() / n as f64;
        assert!((mean - 6.5).abs() < 0.1, "{mean}");
        assert!(q.iter().all(|u| u.slots <= 13 && u.demand_mb == u.slots as f64 * 500.0));
    }

    #[test]
    fn deterministic_given_seed() {
        let config = ScenarioConfig::desk();
        let a = generate_qos(&config, &mut ChaCha8Rng::seed_from_u64(4));
        let b = generate_qos(&config, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(a, b);
    }
}
