//! Experiment runs, metrics and reports.

pub mod compare;
pub mod export;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::scheduler::{run_window, Method, Network, PowerMode, ScheduleState, SlotResult, RATE_TOL};

pub use compare::{compare_methods, gain_ratios, Comparison, MethodColumn, MetricStats, METRICS};
pub use export::{export_report, ExportFormat, SummaryDocument};

/// Outcome for one user over the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: usize,
    pub beam_id: usize,
    pub xi_mb: f64,
    pub served_mb: f64,
    /// `served / xi`; absent for users without demand.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Mean over all slots of the slot sum rate, Mbps.
    pub mean_sum_mbps: f64,
    /// Delivered volume per scheduled (user, slot) pair, Mbps.
    pub mean_per_user_mbps: f64,
    /// Mean of `served / xi` over users with demand.
    pub satisfaction_ratio: f64,
    /// Share of scheduled (user, slot) pairs below the per-slot target.
    pub qos_violation_fraction: f64,
    pub scheduled_events: usize,
    /// Users with demand still short at the end of the window.
    pub unmet_users: usize,
    pub total_served_mb: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub method: Method,
    pub power: PowerMode,
    pub seed: u64,
    pub slot_sums: Vec<f64>,
    pub users: Vec<UserRecord>,
    pub slots: Vec<SlotResult>,
    pub summary: Summary,
    pub wall_clock_s: f64,
    pub config: ScenarioConfig,
}

/// `served / demand`; users without demand are excluded.
pub fn satisfaction_ratio(served_mb: f64, demand_mb: f64) -> Result<f64> {
    if demand_mb > 0.0 {
        Ok(served_mb / demand_mb)
    } else {
        Err(Error::ZeroDemand)
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Builds the report of a finished window.
pub fn build_report(net: &Network, method: Method, power: PowerMode, state: &ScheduleState, wall_clock_s: f64) -> RunReport {
    let users: Vec<UserRecord> = net
        .users
        .iter()
        .map(|u| {
            let xi = net.qos[u.id].demand_mb;
            UserRecord {
                user_id: u.id,
                beam_id: u.beam_id,
                xi_mb: xi,
                served_mb: state.served[u.id],
                ratio: satisfaction_ratio(state.served[u.id], xi).ok(),
            }
        })
        .collect();
    let mut events = 0usize;
    let mut violations = 0usize;
    for slot in &state.log {
        for (&u, &r) in slot.allocation.users.iter().zip(&slot.rates) {
            events += 1;
            if r < net.qos[u].rate_target() - RATE_TOL {
                violations += 1;
            }
        }
    }
    let total_served_mb: f64 = state.log.iter().map(|s| s.sum_mbps).sum();
    let slot_sums: Vec<f64> = state.log.iter().map(|s| s.sum_mbps).collect();
    let summary = Summary {
        mean_sum_mbps: mean(slot_sums.iter().copied()),
        mean_per_user_mbps: if events == 0 { 0.0 } else { total_served_mb / events as f64 },
        satisfaction_ratio: mean(users.iter().filter_map(|u| u.ratio)),
        qos_violation_fraction: if events == 0 { 0.0 } else { violations as f64 / events as f64 },
        scheduled_events: events,
        unmet_users: users.iter().filter(|u| u.ratio.is_some_and(|r| r < 1.0)).count(),
        total_served_mb,
    };
    RunReport {
        method,
        power,
        seed: net.config.rng_seed,
        slot_sums,
        users,
        slots: state.log.clone(),
        summary,
        wall_clock_s,
        config: net.config.clone(),
    }
}

/// Generates the scenario, runs the window and summarises it.
pub fn run_benchmark(config: &ScenarioConfig, method: Method, power: PowerMode) -> Result<RunReport> {
    let net = Network::generate(config)?;
    run_on_network(&net, method, power)
}

/// Same as [`run_benchmark`] on an existing scenario.
pub fn run_on_network(net: &Network, method: Method, power: PowerMode) -> Result<RunReport> {
    let start = Instant::now();
    let state = run_window(net, method, power)?;
    let elapsed = start.elapsed().as_secs_f64();
    log::info!(
        "{method}/{power} seed {}: {} slots in {elapsed:.2}s",
        net.config.rng_seed,
        state.log.len()
    );
    Ok(build_report(net, method, power, &state, elapsed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_examples() {
        assert_eq!(satisfaction_ratio(600.0, 500.0).unwrap(), 1.2);
        assert_eq!(satisfaction_ratio(500.0, 500.0).unwrap(), 1.0);
        assert!(matches!(satisfaction_ratio(1.0, 0.0), Err(Error::ZeroDemand)));
    }

    #[test]
    fn one_user_one_slot() {
        let mut c = ScenarioConfig::desk();
        c.num_beams = 1;
        c.users_per_beam = 1;
        c.window_slots = 1;
        c.qos_slots_range = [1, 1];
        let r = run_benchmark(&c, Method::Alg1Strict, PowerMode::Fixed).unwrap();
        assert_eq!(r.slot_sums.len(), 1);
        assert_eq!(r.users.len(), 1);
        assert_eq!(r.summary.scheduled_events, 1);
    }

    #[test]
    fn strict_run_has_no_violations() {
        let mut c = ScenarioConfig::desk();
        c.window_slots = 15;
        let r = run_benchmark(&c, Method::Alg1Strict, PowerMode::Fixed).unwrap();
        assert_eq!(r.summary.qos_violation_fraction, 0.0);
        assert!(r.summary.scheduled_events > 0);
    }

    #[test]
    fn ratios_match_elementwise_division() {
        let mut c = ScenarioConfig::desk();
        c.window_slots = 15;
        let r = run_benchmark(&c, Method::Sus, PowerMode::Fixed).unwrap();
        for u in &r.users {
            match u.ratio {
                Some(v) => assert_eq!(v, u.served_mb / u.xi_mb),
                None => assert_eq!(u.xi_mb, 0.0),
            }
        }
        let total: f64 = r.users.iter().map(|u| u.served_mb).sum();
        assert!((total - r.summary.total_served_mb).abs() <= 1e-9 * total);
    }
}
