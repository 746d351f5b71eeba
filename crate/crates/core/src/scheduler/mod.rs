//! QoS-aware block scheduling over a window of slots.
//!
//! Each slot keeps the still-unsatisfied users of the previous slot and then
//! greedily tries to add, one beam at a time, the available user that
//! maximises the RZF sum rate. A candidate is admitted when the sum rate does
//! not drop and, in strict mode, every member of the trial set still reaches
//! its per-slot target `xi_k / T_k`.

pub mod qos;
pub mod sus;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{generate_users, ChannelBank, UserTerminal};
use crate::config::{PowerRule, ScenarioConfig};
use crate::error::{Error, Result};
use crate::poweralloc::{allocate_power, ScaOptions};
use crate::precoding::{rzf_precoder, LinkGains, SlotAllocation};

pub use qos::{generate_qos, sinr_target, UserQos};
pub use sus::{random_schedule, sus_schedule};

/// Random streams drawn from the scenario seed.
pub const USER_STREAM: u64 = 0;
pub const QOS_STREAM: u64 = 1;
pub const RANDOM_SCHEDULER_STREAM: u64 = 2;

/// Absolute slack on per-slot rate targets, Mbps.
pub const RATE_TOL: f64 = 1e-6;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "alg1-strict")]
    Alg1Strict,
    #[serde(rename = "alg1-relax")]
    Alg1Relax,
    #[serde(rename = "alg2-strict")]
    Alg2Strict,
    #[serde(rename = "alg2-relax")]
    Alg2Relax,
    #[serde(rename = "sus")]
    Sus,
    #[serde(rename = "random")]
    Random,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Alg1Strict,
        Method::Alg1Relax,
        Method::Alg2Strict,
        Method::Alg2Relax,
        Method::Sus,
        Method::Random,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::Alg1Strict => "alg1-strict",
            Method::Alg1Relax => "alg1-relax",
            Method::Alg2Strict => "alg2-strict",
            Method::Alg2Relax => "alg2-relax",
            Method::Sus => "sus",
            Method::Random => "random",
        }
    }

    pub fn admission(self) -> Option<AdmissionMode> {
        match self {
            Method::Alg1Strict | Method::Alg2Strict => Some(AdmissionMode::Strict),
            Method::Alg1Relax | Method::Alg2Relax => Some(AdmissionMode::Relax),
            Method::Sus | Method::Random => None,
        }
    }

    pub fn requires_allocation(self) -> bool {
        matches!(self, Method::Alg2Strict | Method::Alg2Relax)
    }

    /// The same scheduler with fixed power.
    pub fn fixed_power_counterpart(self) -> Method {
        match self {
            Method::Alg2Strict => Method::Alg1Strict,
            Method::Alg2Relax => Method::Alg1Relax,
            m => m,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::config("method", format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdmissionMode {
    Strict,
    Relax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerMode {
    Fixed,
    #[serde(rename = "alloc")]
    Allocated,
}

impl PowerMode {
    pub fn id(self) -> &'static str {
        match self {
            PowerMode::Fixed => "fixed",
            PowerMode::Allocated => "alloc",
        }
    }
}

impl fmt::Display for PowerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for PowerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(PowerMode::Fixed),
            "alloc" | "allocated" => Ok(PowerMode::Allocated),
            _ => Err(Error::config("power", format!("unknown power mode `{s}`"))),
        }
    }
}

/// Users, channels and demands of one seeded scenario.
#[derive(Debug, Clone)]
pub struct Network {
    pub config: ScenarioConfig,
    pub users: Vec<UserTerminal>,
    pub bank: ChannelBank,
    pub qos: Vec<UserQos>,
}

impl Network {
    pub fn generate(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let users = generate_users(config, &mut stream_rng(config.rng_seed, USER_STREAM))?;
        let qos = generate_qos(config, &mut stream_rng(config.rng_seed, QOS_STREAM));
        let bank = ChannelBank::new(&users, config);
        Ok(Self {
            config: config.clone(),
            users,
            bank,
            qos,
        })
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn gains(&self) -> Vec<f64> {
        (0..self.num_users()).map(|k| self.bank.gain(k)).collect()
    }

    pub fn sinr_targets(&self, users: &[usize]) -> Vec<f64> {
        users.iter().map(|&u| self.qos[u].sinr_target).collect()
    }

    /// Fixed power per user for a set of `k` users.
    pub fn fixed_power(&self, k: usize) -> f64 {
        match self.config.power_rule {
            PowerRule::EqualSplit => self.config.max_power_w / k as f64,
            PowerRule::PerBeam => self.config.max_power_w / self.config.num_beams as f64,
        }
    }

    pub fn link_gains(&self, users: &[usize]) -> Result<LinkGains> {
        let h = self.bank.matrix(users)?;
        let w = rzf_precoder(&h, self.config.max_power_w, self.config.noise_variance_w)?;
        LinkGains::new(&h, &w, self.config.noise_variance_w)
    }

    /// RZF rates of `users` at the configured fixed power.
    pub fn evaluate_fixed(&self, users: &[usize]) -> Result<SetEvaluation> {
        if users.is_empty() {
            return Ok(SetEvaluation::default());
        }
        let gains = self.link_gains(users)?;
        let powers = vec![self.fixed_power(users.len()); users.len()];
        Ok(SetEvaluation::new(users.to_vec(), powers, &gains, self.config.bandwidth_mhz))
    }

    pub fn sca_options(&self) -> ScaOptions {
        ScaOptions {
            epsilon_rel: self.config.sca_epsilon_rel,
            max_iter: self.config.sca_max_iter,
            ..ScaOptions::default()
        }
    }

    /// Users whose rate in `eval` falls short of their per-slot target.
    pub fn shortfalls(&self, eval: &SetEvaluation) -> Vec<(usize, f64)> {
        eval.users
            .iter()
            .zip(&eval.rates)
            .map(|(&u, &r)| (u, self.qos[u].rate_target() - r))
            .filter(|(_, d)| *d > RATE_TOL)
            .collect()
    }
}

/// Rates of an ordered user set under given powers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SetEvaluation {
    pub users: Vec<usize>,
    pub powers: Vec<f64>,
    pub rates: Vec<f64>,
    pub sum: f64,
}

impl SetEvaluation {
    pub fn new(users: Vec<usize>, powers: Vec<f64>, gains: &LinkGains, bandwidth_mhz: f64) -> Self {
        let rates = gains.rates(&powers, bandwidth_mhz);
        let sum = rates.iter().sum();
        Self {
            users,
            powers,
            rates,
            sum,
        }
    }
}

/// Outcome of one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotResult {
    /// One-based slot index.
    pub t: usize,
    pub allocation: SlotAllocation,
    /// Mbps, aligned with `allocation.users`.
    pub rates: Vec<f64>,
    pub sum_mbps: f64,
    /// Sum rate after initialisation and after every admitted candidate.
    pub inner_sums: Vec<f64>,
    /// Users removed because no power vector met their target.
    pub dropped: Vec<usize>,
    /// Successive-GP iterations spent, zero with fixed power.
    pub sca_iterations: usize,
}

impl SlotResult {
    pub fn empty(t: usize) -> Self {
        Self {
            t,
            allocation: SlotAllocation::empty(),
            rates: Vec::new(),
            sum_mbps: 0.0,
            inner_sums: Vec::new(),
            dropped: Vec::new(),
            sca_iterations: 0,
        }
    }

    pub fn rate_of(&self, user: usize) -> Option<f64> {
        self.allocation.users.iter().position(|&u| u == user).map(|i| self.rates[i])
    }
}

/// Evolving window state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleState {
    /// Index of the next slot, one-based.
    pub t: usize,
    /// Unsatisfied users not currently scheduled.
    pub available: BTreeSet<usize>,
    /// Users carried into the next slot, in scheduling order.
    pub scheduled: Vec<usize>,
    /// Mb delivered so far, per user.
    pub served: Vec<f64>,
    pub satisfied: BTreeSet<usize>,
    pub log: Vec<SlotResult>,
}

impl ScheduleState {
    /// Every user with demand starts available.
    pub fn new(net: &Network) -> Self {
        Self {
            t: 1,
            available: (0..net.num_users()).filter(|&k| net.qos[k].is_active()).collect(),
            scheduled: Vec::new(),
            served: vec![0.0; net.num_users()],
            satisfied: BTreeSet::new(),
            log: Vec::new(),
        }
    }

    /// Books the slot's rates and retires users whose demand is met.
    pub fn commit(&mut self, net: &Network, result: SlotResult, carry: bool) {
        for (&u, &r) in result.allocation.users.iter().zip(&result.rates) {
            self.served[u] += r;
        }
        let mut carried = Vec::new();
        for &u in &result.allocation.users {
            if self.served[u] >= net.qos[u].demand_mb {
                self.satisfied.insert(u);
                self.available.remove(&u);
            } else if carry {
                carried.push(u);
                self.available.remove(&u);
            } else {
                self.available.insert(u);
            }
        }
        for &u in &result.dropped {
            if !self.satisfied.contains(&u) {
                self.available.insert(u);
            }
        }
        self.scheduled = carried;
        self.log.push(result);
        self.t += 1;
    }
}

/// Indices sorted by descending gain, lowest index first on ties.
pub fn sort_by_channel_gain(gains: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    order
}

/// `sum_{k=1..M} C(N, k)`, the number of non-empty sets of at most `M` users.
pub fn search_space_size(n: u64, m: u64) -> BigUint {
    let mut total = BigUint::from(0u32);
    let mut binom = BigUint::from(1u32);
    for k in 1..=m.min(n) {
        binom = binom * BigUint::from(n - k + 1) / BigUint::from(k);
        total += &binom;
    }
    total
}

/// Best single addition to `current`.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub user: usize,
    pub trial: SetEvaluation,
}

/// Evaluates `current + {k}` for every available `k` and returns the best sum
/// rate, lowest user id on ties; `None` when nothing is available.
pub fn greedy_candidate(net: &Network, current: &[usize], available: &BTreeSet<usize>) -> Result<Option<Candidate>> {
    let pool: Vec<usize> = available.iter().copied().collect();
    let evaluated: Vec<Result<Candidate>> = pool
        .par_iter()
        .map(|&k| {
            let mut users = current.to_vec();
            users.push(k);
            Ok(Candidate {
                user: k,
                trial: net.evaluate_fixed(&users)?,
            })
        })
        .collect();
    let mut best: Option<Candidate> = None;
    for c in evaluated {
        let c = c?;
        if best.as_ref().is_none_or(|b| c.trial.sum > b.trial.sum) {
            best = Some(c);
        }
    }
    Ok(best)
}

/// Sum rate must not drop; strict mode also needs every trial member on target.
pub fn admission_test(trial: &SetEvaluation, previous_sum: f64, qos: &[UserQos], mode: AdmissionMode) -> bool {
    if trial.sum < previous_sum {
        return false;
    }
    match mode {
        AdmissionMode::Relax => true,
        AdmissionMode::Strict => trial
            .users
            .iter()
            .zip(&trial.rates)
            .all(|(&u, &r)| r >= qos[u].rate_target() - RATE_TOL),
    }
}

/// Scheduling decision before any power optimisation.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub eval: SetEvaluation,
    pub inner_sums: Vec<f64>,
    /// Carried users pushed back to the pool in strict mode.
    pub released: Vec<usize>,
}

/// Runs the inner admission loop of one slot on a copy of the pools.
pub fn select_users(net: &Network, state: &ScheduleState, mode: AdmissionMode) -> Result<Selection> {
    let m = net.config.num_beams;
    let mut current = state.scheduled.clone();
    let mut available = state.available.clone();
    let mut released = Vec::new();
    let mut eval = net.evaluate_fixed(&current)?;
    if mode == AdmissionMode::Strict {
        // drop carried users that fell short, worst first
        while let Some(&(worst, _)) = net
            .shortfalls(&eval)
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        {
            current.retain(|&u| u != worst);
            available.insert(worst);
            released.push(worst);
            eval = net.evaluate_fixed(&current)?;
        }
    }
    let mut inner_sums = vec![eval.sum];
    let mut index = current.len();
    while index < m && current.len() < m {
        let Some(cand) = greedy_candidate(net, &current, &available)? else {
            break;
        };
        if admission_test(&cand.trial, eval.sum, &net.qos, mode) {
            current.push(cand.user);
            available.remove(&cand.user);
            eval = cand.trial;
            inner_sums.push(eval.sum);
        }
        index += 1;
    }
    Ok(Selection {
        eval,
        inner_sums,
        released,
    })
}

/// Powers and rates for a selected set, dropping users in relax mode until
/// every remaining target is reachable.
fn allocate_slot(net: &Network, mut users: Vec<usize>, mode: AdmissionMode) -> Result<(SetEvaluation, Vec<usize>, usize)> {
    let mut dropped = Vec::new();
    let opts = net.sca_options();
    while !users.is_empty() {
        let gains = net.link_gains(&users)?;
        match allocate_power(&gains, &net.sinr_targets(&users), net.config.max_power_w, &opts) {
            Ok((alloc, sca)) => {
                let eval = SetEvaluation::new(users, alloc.powers, &gains, net.config.bandwidth_mhz);
                return Ok((eval, dropped, sca.iteration));
            }
            Err(Error::Infeasible { users: bad }) if mode == AdmissionMode::Relax => {
                let worst = bad[0];
                log::debug!("dropping user {worst}: target unreachable with {} users", users.len());
                users.retain(|&u| u != worst);
                dropped.push(worst);
            }
            Err(e) => return Err(e),
        }
    }
    Ok((SetEvaluation::default(), dropped, 0))
}

fn finish_slot(
    net: &Network,
    t: usize,
    eval: SetEvaluation,
    inner_sums: Vec<f64>,
    power: PowerMode,
    mode: AdmissionMode,
) -> Result<SlotResult> {
    let (eval, dropped, iterations) = match power {
        PowerMode::Allocated if !eval.users.is_empty() => allocate_slot(net, eval.users, mode)?,
        _ => (eval, Vec::new(), 0),
    };
    Ok(SlotResult {
        t,
        allocation: SlotAllocation::new(eval.users, eval.powers),
        rates: eval.rates,
        sum_mbps: eval.sum,
        inner_sums,
        dropped,
        sca_iterations: iterations,
    })
}

/// One slot of the greedy scheduler, optionally followed by power allocation.
pub fn schedule_slot(net: &Network, state: &mut ScheduleState, mode: AdmissionMode, power: PowerMode) -> Result<SlotResult> {
    let sel = select_users(net, state, mode)?;
    for u in &sel.released {
        state.available.insert(*u);
    }
    let result = finish_slot(net, state.t, sel.eval, sel.inner_sums, power, mode)?;
    state.commit(net, result.clone(), true);
    Ok(result)
}

/// Runs a method over the whole window.
pub fn run_window(net: &Network, method: Method, power: PowerMode) -> Result<ScheduleState> {
    if method.requires_allocation() && power == PowerMode::Fixed {
        return Err(Error::config("power", format!("{method} requires allocated power")));
    }
    let mut state = ScheduleState::new(net);
    let slots = net.config.window_slots;
    if slots == 0 {
        return Ok(state);
    }
    match method.admission() {
        Some(mode) => {
            let gains = net.gains();
            if let Some(&first) = sort_by_channel_gain(&gains).iter().find(|k| state.available.contains(k)) {
                state.available.remove(&first);
                state.scheduled.push(first);
            }
            for _ in 0..slots {
                schedule_slot(net, &mut state, mode, power)?;
            }
        }
        None => {
            let mut rng = stream_rng(net.config.rng_seed, RANDOM_SCHEDULER_STREAM);
            for _ in 0..slots {
                let users = if method == Method::Sus {
                    sus_schedule(net, &state.available)
                } else {
                    random_schedule(&state.available, net.config.num_beams, &mut rng)
                };
                let eval = net.evaluate_fixed(&users)?;
                let inner = vec![eval.sum];
                let result = finish_slot(net, state.t, eval, inner, power, AdmissionMode::Relax)?;
                state.commit(net, result, false);
            }
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::C64;
    use nalgebra::DVector;

    fn tiny_config(m: usize, per_beam: usize, t: usize) -> ScenarioConfig {
        let mut c = ScenarioConfig::desk();
        c.num_beams = m;
        c.users_per_beam = per_beam;
        c.window_slots = t;
        c.qos_slots_range = [1, t.min(3)];
        c
    }

    #[test]
    fn sort_examples() {
        assert_eq!(sort_by_channel_gain(&[1.0, 3.0, 2.0]), vec![1, 2, 0]);
        assert_eq!(sort_by_channel_gain(&[5.0; 4]), vec![0, 1, 2, 3]);
    }

    #[test]
    fn sort_matches_reference_on_population() {
        let mut config = ScenarioConfig::desk();
        config.users_per_beam = 110;
        let net = Network::generate(&config).unwrap();
        let gains = net.gains();
        let order = sort_by_channel_gain(&gains);
        let mut reference: Vec<(f64, usize)> = gains.iter().map(|g| -g).zip(0..).collect();
        reference.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(order, reference.into_iter().map(|(_, i)| i).collect::<Vec<_>>());
    }

    #[test]
    fn search_space_examples() {
        assert_eq!(search_space_size(1, 1), BigUint::from(1u32));
        assert_eq!(search_space_size(5, 2), BigUint::from(15u32));
        assert_eq!(search_space_size(100, 7), BigUint::from(17_278_988_695u64));
    }

    #[test]
    fn method_ids_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.id().parse::<Method>().unwrap(), m);
        }
        assert!(matches!("alg3".parse::<Method>(), Err(Error::Config { .. })));
    }

    #[test]
    fn admission_semantics() {
        let qos = vec![UserQos::new(1000.0, 2, 500.0, crate::config::SinrTargetFormula::BandwidthScaled); 2];
        let lower = SetEvaluation {
            users: vec![0, 1],
            powers: vec![1.0, 1.0],
            rates: vec![100.0, 100.0],
            sum: 200.0,
        };
        assert!(!admission_test(&lower, 300.0, &qos, AdmissionMode::Relax));
        assert!(!admission_test(&lower, 300.0, &qos, AdmissionMode::Strict));
        let dragged = SetEvaluation {
            rates: vec![900.0, 400.0],
            sum: 1300.0,
            ..lower
        };
        assert!(!admission_test(&dragged, 1000.0, &qos, AdmissionMode::Strict));
        assert!(admission_test(&dragged, 1000.0, &qos, AdmissionMode::Relax));
    }

    fn custom_network(vectors: Vec<Vec<f64>>, demand_slots: Vec<usize>) -> Network {
        let m = vectors[0].len();
        let mut config = tiny_config(m, 1, 3);
        config.users_per_beam = 1;
        let mut net = Network::generate(&config).unwrap();
        let n = vectors.len();
        net.users.truncate(n.min(net.users.len()));
        net.bank = ChannelBank::from_vectors(
            vectors
                .into_iter()
                .map(|v| DVector::from_iterator(m, v.into_iter().map(|x| C64::new(x, 0.0))))
                .collect(),
        );
        net.qos = demand_slots
            .into_iter()
            .map(|s| UserQos::new(s as f64 * 500.0, s, 500.0, crate::config::SinrTargetFormula::BandwidthScaled))
            .collect();
        net
    }

    #[test]
    fn orthogonal_candidate_beats_parallel() {
        let s = 1e-5;
        let net = custom_network(
            vec![vec![s, 0.0], vec![0.0, s * 0.9], vec![s * 1.1, 0.0]],
            vec![1, 1, 1],
        );
        let available: BTreeSet<usize> = [1, 2].into_iter().collect();
        let c = greedy_candidate(&net, &[0], &available).unwrap().unwrap();
        assert_eq!(c.user, 1);
    }

    #[test]
    fn greedy_matches_brute_force() {
        let mut config = tiny_config(3, 2, 1);
        config.rng_seed = 11;
        let net = Network::generate(&config).unwrap();
        let available: BTreeSet<usize> = (1..6).collect();
        let c = greedy_candidate(&net, &[0], &available).unwrap().unwrap();
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for k in 1..6 {
            let h = net.bank.matrix(&[0, k]).unwrap();
            let w = rzf_precoder(&h, config.max_power_w, config.noise_variance_w).unwrap();
            let g = LinkGains::new(&h, &w, config.noise_variance_w).unwrap();
            let p = config.max_power_w / 2.0;
            let sum: f64 = g.sinrs(&[p, p]).iter().map(|s| config.bandwidth_mhz * (1.0 + s).log2()).sum();
            if sum > best.0 {
                best = (sum, k);
            }
        }
        assert_eq!(c.user, best.1);
        assert!((c.trial.sum - best.0).abs() <= 1e-9 * best.0);
    }

    #[test]
    fn single_user_single_slot() {
        let mut config = tiny_config(1, 1, 1);
        config.qos_slots_range = [1, 1];
        let net = Network::generate(&config).unwrap();
        let state = run_window(&net, Method::Alg1Strict, PowerMode::Fixed).unwrap();
        assert_eq!(state.log.len(), 1);
        assert_eq!(state.log[0].allocation.users, vec![0]);
        assert!(state.satisfied.contains(&0));
    }

    #[test]
    fn full_carry_over_admits_nobody() {
        let net = Network::generate(&tiny_config(2, 3, 5)).unwrap();
        let mut state = ScheduleState::new(&net);
        let active: Vec<usize> = state.available.iter().copied().take(2).collect();
        for u in &active {
            state.available.remove(u);
        }
        state.scheduled = active.clone();
        let sel = select_users(&net, &state, AdmissionMode::Relax).unwrap();
        assert_eq!(sel.eval.users, active);
        assert_eq!(sel.inner_sums.len(), 1);
    }

    #[test]
    fn zero_slots_gives_empty_run() {
        let mut net = Network::generate(&ScenarioConfig::desk()).unwrap();
        net.config.window_slots = 0;
        for m in Method::ALL {
            let power = if m.requires_allocation() { PowerMode::Allocated } else { PowerMode::Fixed };
            assert!(run_window(&net, m, power).unwrap().log.is_empty());
        }
    }

    #[test]
    fn alg2_with_fixed_power_is_rejected() {
        let net = Network::generate(&tiny_config(2, 2, 2)).unwrap();
        assert!(matches!(
            run_window(&net, Method::Alg2Relax, PowerMode::Fixed),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn strict_window_invariants() {
        let mut config = ScenarioConfig::desk();
        config.window_slots = 20;
        let net = Network::generate(&config).unwrap();
        let state = run_window(&net, Method::Alg1Strict, PowerMode::Fixed).unwrap();
        let mut served = vec![0.0; net.num_users()];
        for slot in &state.log {
            assert!(slot.allocation.users.len() <= config.num_beams);
            for (&u, &r) in slot.allocation.users.iter().zip(&slot.rates) {
                assert!(r >= net.qos[u].rate_target() - RATE_TOL);
                served[u] += r;
            }
            for w in slot.inner_sums.windows(2) {
                assert!(w[1] >= w[0] * (1.0 - 1e-8));
            }
            assert!((slot.rates.iter().sum::<f64>() - slot.sum_mbps).abs() <= 1e-6);
        }
        assert_eq!(served, state.served);
        for &u in &state.satisfied {
            assert!(state.served[u] >= net.qos[u].demand_mb);
            assert!(!state.available.contains(&u));
        }
    }

    #[test]
    fn deterministic_runs() {
        let mut config = ScenarioConfig::desk();
        config.window_slots = 8;
        config.qos_slots_range = [0, 8];
        let net = Network::generate(&config).unwrap();
        for m in [Method::Alg1Relax, Method::Sus, Method::Random] {
            let a = run_window(&net, m, PowerMode::Fixed).unwrap();
            let b = run_window(&net, m, PowerMode::Fixed).unwrap();
            assert_eq!(a.log, b.log);
        }
    }
}
