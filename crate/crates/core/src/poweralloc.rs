//! Per-slot power allocation by successive geometric programming.
//!
//! The sum-rate problem is written in epigraph form with auxiliaries
//! `gamma_k <= 1 + SINR_k`. That constraint is a ratio of posynomials, so
//! each iteration replaces the received-power posynomial `g_k` by its AM-GM
//! monomial lower bound around the current powers, solves the resulting GP
//! and re-expands at the new point.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpcore::{
    solve_gp_from, GpProblem, GpStatus, GpTolerances, Monomial, Objective, Posynomial, Signomial,
};
use crate::precoding::{LinkGains, SlotAllocation};

/// Relative slack used when checking iterates against the original constraints.
const FEAS_SLACK: f64 = 1e-9;

/// Signomial epigraph of the per-slot sum-rate problem.
///
/// Variables are `p_1..p_K` followed by `gamma_1..gamma_K`.
#[derive(Debug, Clone)]
pub struct EpigraphProblem {
    pub gains: LinkGains,
    pub sinr_targets: Vec<f64>,
    pub max_power: f64,
}

impl EpigraphProblem {
    pub fn num_users(&self) -> usize {
        self.gains.len()
    }

    pub fn num_vars(&self) -> usize {
        2 * self.num_users()
    }

    /// Linking constraints, SINR targets and the power budget.
    pub fn constraint_count(&self) -> usize {
        2 * self.num_users() + 1
    }

    pub fn variables(&self) -> Vec<String> {
        let k = self.num_users();
        (0..k)
            .map(|i| format!("p{i}"))
            .chain((0..k).map(|i| format!("gamma{i}")))
            .collect()
    }

    fn p_term(&self, coeff: f64, j: usize) -> Monomial {
        Monomial::variable(j, self.num_vars()).scale(coeff)
    }

    fn interference_terms(&self, k: usize) -> Vec<Monomial> {
        let z = &self.gains.z;
        let mut terms: Vec<Monomial> = (0..self.num_users())
            .filter(|&j| j != k && z[(k, j)] > 0.0)
            .map(|j| self.p_term(z[(k, j)], j))
            .collect();
        terms.push(Monomial::constant(self.gains.noise, self.num_vars()));
        terms
    }

    /// `sum_{k' != k} z_kk' p_k' + sigma^2`.
    pub fn interference_plus_noise(&self, k: usize) -> Posynomial {
        Posynomial::new(self.interference_terms(k)).expect("noise term keeps the posynomial non-empty")
    }

    /// `g_k = sum_k' z_kk' p_k' + sigma^2`, own signal included.
    pub fn received(&self, k: usize) -> Posynomial {
        let mut terms = self.interference_terms(k);
        if self.gains.z[(k, k)] > 0.0 {
            terms.push(self.p_term(self.gains.z[(k, k)], k));
        }
        Posynomial::new(terms).expect("noise term keeps the posynomial non-empty")
    }

    /// `gamma_k (I_k + sigma^2) - g_k <= 0`.
    pub fn linking_signomial(&self, k: usize) -> Signomial {
        let gamma = Monomial::variable(self.num_users() + k, self.num_vars());
        let mut terms: Vec<Monomial> = self
            .interference_plus_noise(k)
            .terms()
            .iter()
            .map(|t| t.mul(&gamma))
            .collect();
        terms.extend(self.received(k).terms().iter().map(|t| t.scale(-1.0)));
        Signomial::new(terms)
    }

    /// `nu_k (I_k + sigma^2) / (p_k z_kk) <= 1`; `None` when the target is zero.
    pub fn qos_constraint(&self, k: usize) -> Option<Posynomial> {
        let nu = self.sinr_targets[k];
        if nu <= 0.0 {
            return None;
        }
        let own = self.p_term(self.gains.z[(k, k)] / nu, k);
        Some(self.interference_plus_noise(k).div_monomial(&own))
    }

    /// `sum_k p_k / P_max <= 1`.
    pub fn power_constraint(&self) -> Posynomial {
        let terms = (0..self.num_users()).map(|j| self.p_term(1.0 / self.max_power, j)).collect();
        Posynomial::new(terms).expect("at least one user")
    }

    /// Checks `gamma <= 1 + SINR(p)`, `SINR >= nu` and the power budget.
    pub fn is_feasible(&self, powers: &[f64], gammas: &[f64]) -> bool {
        let sinrs = self.gains.sinrs(powers);
        let total: f64 = powers.iter().sum();
        powers.iter().all(|&p| p > 0.0)
            && total <= self.max_power * (1.0 + FEAS_SLACK)
            && sinrs.iter().zip(gammas).all(|(s, g)| *g <= (1.0 + s) * (1.0 + FEAS_SLACK))
            && sinrs
                .iter()
                .zip(&self.sinr_targets)
                .all(|(s, nu)| *s >= nu * (1.0 - FEAS_SLACK))
    }
}

pub fn build_epigraph(gains: &LinkGains, sinr_targets: &[f64], max_power: f64) -> Result<EpigraphProblem> {
    if gains.is_empty() {
        return Err(Error::EmptySet);
    }
    if sinr_targets.len() != gains.len() {
        return Err(Error::Dimension(format!(
            "{} SINR targets for {} users",
            sinr_targets.len(),
            gains.len()
        )));
    }
    if let Some(bad) = sinr_targets.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Domain(format!("SINR target must be finite and non-negative, got {bad}")));
    }
    if !(max_power > 0.0) {
        return Err(Error::Domain(format!("power budget must be positive, got {max_power}")));
    }
    Ok(EpigraphProblem {
        gains: gains.clone(),
        sinr_targets: sinr_targets.to_vec(),
        max_power,
    })
}

/// AM-GM weights of each `g_k` at the current powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    /// `mu_0k`, the share of noise.
    pub noise: Vec<f64>,
    /// `mu_kk'`, row `k` holds the shares of every transmitted signal.
    pub link: DMatrix<f64>,
}

impl Weights {
    /// Largest `|mu_0k + sum_k' mu_kk' - 1|`.
    pub fn normalization_error(&self) -> f64 {
        (0..self.noise.len())
            .map(|k| (self.noise[k] + self.link.row(k).sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

pub fn update_weights(powers: &[f64], gains: &LinkGains) -> Weights {
    let k = gains.len();
    let mut noise = vec![0.0; k];
    let mut link = DMatrix::zeros(k, k);
    for i in 0..k {
        let denom = gains.total_received(i, powers);
        noise[i] = gains.noise / denom;
        for j in 0..k {
            link[(i, j)] = powers[j] * gains.z[(i, j)] / denom;
        }
    }
    Weights { noise, link }
}

/// `g~_k = (sigma^2/mu_0k)^mu_0k prod_k' (z_kk' p_k' / mu_kk')^mu_kk'`.
pub fn condensed_received(problem: &EpigraphProblem, weights: &Weights, k: usize) -> Monomial {
    let n = problem.num_vars();
    let mut log_coeff = 0.0;
    let mut exponents = vec![0.0; n];
    let mu0 = weights.noise[k];
    if mu0 > 0.0 {
        log_coeff += mu0 * (problem.gains.noise / mu0).ln();
    }
    for j in 0..problem.num_users() {
        let mu = weights.link[(k, j)];
        if mu > 0.0 {
            log_coeff += mu * (problem.gains.z[(k, j)] / mu).ln();
            exponents[j] = mu;
        }
    }
    Monomial::new(log_coeff.exp(), exponents)
}

/// Where each constraint of the condensed GP came from.
#[derive(Debug, Clone, PartialEq)]
pub struct GpLayout {
    pub link: Vec<usize>,
    pub qos: Vec<Option<usize>>,
    pub power: usize,
}

/// Standard-form GP obtained by condensing every linking constraint.
pub fn condense_to_gp(problem: &EpigraphProblem, weights: &Weights) -> (GpProblem, GpLayout) {
    let k = problem.num_users();
    let n = problem.num_vars();
    let mut inequalities = Vec::with_capacity(problem.constraint_count());
    let mut link = Vec::with_capacity(k);
    for i in 0..k {
        let gamma = Monomial::variable(k + i, n);
        let g_tilde = condensed_received(problem, weights, i);
        let numerator = Posynomial::new(
            problem
                .interference_plus_noise(i)
                .terms()
                .iter()
                .map(|t| t.mul(&gamma))
                .collect(),
        )
        .expect("non-empty");
        link.push(inequalities.len());
        inequalities.push(numerator.div_monomial(&g_tilde));
    }
    let mut qos = Vec::with_capacity(k);
    for i in 0..k {
        qos.push(problem.qos_constraint(i).map(|c| {
            inequalities.push(c);
            inequalities.len() - 1
        }));
    }
    let power = inequalities.len();
    inequalities.push(problem.power_constraint());
    let objective = Monomial::new(1.0, (0..n).map(|j| if j >= k { 1.0 } else { 0.0 }).collect());
    let gp = GpProblem {
        variables: problem.variables(),
        objective: Objective::Maximize(objective),
        inequalities,
        equalities: Vec::new(),
    };
    (gp, GpLayout { link, qos, power })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaOptions {
    /// Stop once the sum rate moves by at most this fraction of itself.
    pub epsilon_rel: f64,
    /// ... and the stationarity residual of the original problem is this small.
    pub kkt_tol: f64,
    pub max_iter: usize,
    pub gp: GpTolerances,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self {
            epsilon_rel: 1e-3,
            kkt_tol: 5e-5,
            max_iter: 50,
            gp: GpTolerances::default(),
        }
    }
}

/// Trace of one successive-GP run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaState {
    pub iteration: usize,
    pub powers: Vec<f64>,
    pub gammas: Vec<f64>,
    pub weights: Weights,
    /// `sum_k log gamma_k*` per iteration.
    pub objective_trace: Vec<f64>,
    /// `sum_k log2(1 + SINR_k)` at the start point and after every iteration.
    pub rate_trace: Vec<f64>,
    /// Powers after every iteration.
    pub power_trace: Vec<Vec<f64>>,
    pub converged: bool,
    /// Stationarity residual of the original problem in log-power coordinates.
    pub kkt_residual: f64,
    pub gp_statuses: Vec<GpStatus>,
}

/// `sum_k log2(1 + SINR_k)`, bits/s/Hz.
pub fn sum_spectral_efficiency(gains: &LinkGains, powers: &[f64]) -> f64 {
    gains.sinrs(powers).iter().map(|s| (1.0 + s).log2()).sum()
}

/// Stationarity of `max sum log(1 + SINR_k)` s.t. `SINR_k >= nu_k`,
/// `sum p <= P_max` in `y = log p`, using the given multipliers.
pub fn kkt_residual(problem: &EpigraphProblem, powers: &[f64], qos_duals: &[f64], power_dual: f64) -> f64 {
    let k = problem.num_users();
    let z = &problem.gains.z;
    let mut r = vec![0.0; k];
    for i in 0..k {
        let g = problem.gains.total_received(i, powers);
        let inr = g - powers[i] * z[(i, i)];
        for (j, rj) in r.iter_mut().enumerate() {
            let share_g = powers[j] * z[(i, j)] / g;
            let share_i = if j == i { 0.0 } else { powers[j] * z[(i, j)] / inr };
            // objective: minimise -log(1 + SINR_i) = log(I + sigma^2) - log g
            *rj += share_i - share_g;
            if qos_duals[i] > 0.0 {
                *rj += qos_duals[i] * (share_i - if j == i { 1.0 } else { 0.0 });
            }
        }
    }
    let total: f64 = powers.iter().sum();
    for (j, rj) in r.iter_mut().enumerate() {
        *rj += power_dual * powers[j] / total;
    }
    r.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Users ordered by how far equal-split powers leave them below target, worst first.
fn violators(problem: &EpigraphProblem, powers: &[f64]) -> Vec<usize> {
    let sinrs = problem.gains.sinrs(powers);
    let mut v: Vec<(usize, f64)> = sinrs
        .iter()
        .zip(&problem.sinr_targets)
        .enumerate()
        .filter(|(_, (s, nu))| *s < *nu)
        .map(|(k, (s, nu))| (k, (1.0 + nu).log2() - (1.0 + s).log2()))
        .collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    v.into_iter().map(|(k, _)| problem.gains.user_ids[k]).collect()
}

fn warm_gammas(problem: &EpigraphProblem, powers: &[f64]) -> Vec<f64> {
    problem.gains.sinrs(powers).iter().map(|s| 0.99 * (1.0 + s)).collect()
}

/// Successive GP power allocation for a fixed scheduled set.
///
/// Returns [`Error::Infeasible`] listing the users that miss their target at
/// equal split, worst first, when no power vector meets every target.
pub fn allocate_power(
    gains: &LinkGains,
    sinr_targets: &[f64],
    max_power: f64,
    opts: &ScaOptions,
) -> Result<(SlotAllocation, ScaState)> {
    if gains.is_empty() {
        return Err(Error::EmptySet);
    }
    let k = gains.len();
    let infinite: Vec<usize> = sinr_targets
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_infinite())
        .map(|(i, _)| gains.user_ids[i])
        .collect();
    if !infinite.is_empty() {
        return Err(Error::Infeasible { users: infinite });
    }
    let problem = build_epigraph(gains, sinr_targets, max_power)?;
    let p0 = vec![max_power / k as f64; k];
    let mut state = ScaState {
        iteration: 0,
        powers: p0.clone(),
        gammas: warm_gammas(&problem, &p0),
        weights: update_weights(&p0, gains),
        objective_trace: Vec::new(),
        rate_trace: vec![sum_spectral_efficiency(gains, &p0)],
        power_trace: Vec::new(),
        converged: false,
        kkt_residual: f64::INFINITY,
        gp_statuses: Vec::new(),
    };
    for i in 1..=opts.max_iter {
        let weights = update_weights(&state.powers, gains);
        let (gp, layout) = condense_to_gp(&problem, &weights);
        let start: Vec<f64> = if i == 1 {
            let p: Vec<f64> = state.powers.iter().map(|p| p * 0.999).collect();
            let g = warm_gammas(&problem, &p);
            p.into_iter().chain(g).collect()
        } else {
            state.powers.iter().copied().chain(warm_gammas(&problem, &state.powers)).collect()
        };
        let sol = solve_gp_from(&gp, &opts.gp, Some(&start))?;
        state.gp_statuses.push(sol.status);
        if sol.status == GpStatus::Infeasible {
            if i == 1 {
                let bad = violators(&problem, &p0);
                if bad.is_empty() {
                    // equal split already meets every target
                    state.converged = true;
                    break;
                }
                return Err(Error::Infeasible { users: bad });
            }
            log::warn!("condensed GP lost feasibility at iteration {i}; keeping previous powers");
            break;
        }
        let powers = sol.x[..k].to_vec();
        let gammas = sol.x[k..].to_vec();
        if !problem.is_feasible(&powers, &gammas) {
            log::warn!("iteration {i} left the feasible set; keeping previous powers");
            break;
        }
        state.weights = weights;
        let rate = sum_spectral_efficiency(gains, &powers);
        let prev_rate = *state.rate_trace.last().unwrap();
        state.objective_trace.push(gammas.iter().map(|g| g.ln()).sum());
        state.rate_trace.push(rate);
        state.power_trace.push(powers.clone());
        state.iteration = i;
        state.powers = powers;
        state.gammas = gammas;
        let qos_duals: Vec<f64> = layout
            .qos
            .iter()
            .map(|c| c.map_or(0.0, |c| sol.inequality_duals[c]))
            .collect();
        state.kkt_residual = kkt_residual(&problem, &state.powers, &qos_duals, sol.inequality_duals[layout.power]);
        if (rate - prev_rate).abs() <= opts.epsilon_rel * rate && state.kkt_residual <= opts.kkt_tol {
            state.converged = true;
            break;
        }
    }
    Ok((SlotAllocation::new(gains.user_ids.clone(), state.powers.clone()), state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gpcore::{amgm_condense, classify, Classification};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gains(z: &[&[f64]], noise: f64) -> LinkGains {
        let k = z.len();
        LinkGains {
            z: DMatrix::from_fn(k, k, |i, j| z[i][j]),
            noise,
            user_ids: (0..k).collect(),
        }
    }

    fn random_gains(k: usize, rng: &mut ChaCha8Rng) -> LinkGains {
        let z = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                rng.gen_range(0.5..2.0)
            } else {
                rng.gen_range(0.0..0.05)
            }
        });
        LinkGains {
            z,
            noise: 1.0,
            user_ids: (0..k).collect(),
        }
    }

    #[test]
    fn constraint_count() {
        let g = gains(&[&[1.0, 0.1, 0.2], &[0.1, 1.0, 0.0], &[0.3, 0.1, 2.0]], 1.0);
        let p = build_epigraph(&g, &[0.5, 0.0, 1.0], 3.0).unwrap();
        assert_eq!(p.constraint_count(), 7);
        assert!(p.qos_constraint(1).is_none());
        let (gp, layout) = condense_to_gp(&p, &update_weights(&[1.0, 1.0, 1.0], &g));
        assert_eq!(gp.inequalities.len(), 6);
        assert_eq!(layout.power, 5);
        gp.validate().unwrap();
    }

    #[test]
    fn linking_constraint_is_signomial() {
        let g = gains(&[&[1.0, 0.2], &[0.1, 1.0]], 1.0);
        let p = build_epigraph(&g, &[0.0, 0.0], 2.0).unwrap();
        assert_eq!(classify(&p.linking_signomial(0)), Classification::Signomial);
    }

    #[test]
    fn weights_for_zero_power_and_balanced_user() {
        let g = gains(&[&[1.0, 0.5], &[0.5, 1.0]], 2.0);
        let w = update_weights(&[0.0, 0.0], &g);
        assert_eq!(w.noise, vec![1.0, 1.0]);
        assert!(w.link.iter().all(|&v| v == 0.0));
        let single = gains(&[&[4.0]], 2.0);
        let w = update_weights(&[0.5], &single);
        assert_eq!(w.noise[0], 0.5);
        assert_eq!(w.link[(0, 0)], 0.5);
    }

    #[test]
    fn weights_are_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let k = rng.gen_range(1..=7);
            let g = random_gains(k, &mut rng);
            let p: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..10.0)).collect();
            assert!(update_weights(&p, &g).normalization_error() <= 1e-12);
        }
    }

    #[test]
    fn condensed_received_matches_generic_condensation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let k = rng.gen_range(1..=5);
            let g = random_gains(k, &mut rng);
            let prob = build_epigraph(&g, &vec![0.1; k], 10.0).unwrap();
            let p: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..3.0)).collect();
            let x0: Vec<f64> = p.iter().copied().chain(std::iter::repeat_n(1.0, k)).collect();
            let w = update_weights(&p, &g);
            for i in 0..k {
                let ours = condensed_received(&prob, &w, i);
                let generic = amgm_condense(&prob.received(i), &x0).unwrap();
                assert!((ours.coeff - generic.coeff).abs() <= 1e-10 * generic.coeff);
                for (a, b) in ours.exponents.iter().zip(&generic.exponents) {
                    assert!((a - b).abs() <= 1e-12);
                }
                let exact = prob.received(i).eval(&x0).unwrap();
                assert!((ours.eval(&x0).unwrap() - exact).abs() <= 1e-12 * exact);
            }
        }
    }

    #[test]
    fn gp_feasible_points_are_signomial_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = random_gains(3, &mut rng);
        let prob = build_epigraph(&g, &[0.2, 0.3, 0.1], 6.0).unwrap();
        let (gp, _) = condense_to_gp(&prob, &update_weights(&[2.0, 2.0, 2.0], &g));
        let mut hits = 0;
        for _ in 0..5000 {
            let p: Vec<f64> = (0..3).map(|_| rng.gen_range(0.01..3.0)).collect();
            let gam: Vec<f64> = (0..3).map(|_| rng.gen_range(1.0..4.0)).collect();
            let x: Vec<f64> = p.iter().chain(&gam).copied().collect();
            if gp.max_violation(&x).unwrap() <= 0.0 {
                hits += 1;
                assert!(prob.is_feasible(&p, &gam));
            }
        }
        assert!(hits > 50, "{hits}");
    }

    #[test]
    fn single_user_takes_full_power() {
        let g = gains(&[&[3.0]], 1.0);
        let (alloc, state) = allocate_power(&g, &[0.5], 7.0, &ScaOptions::default()).unwrap();
        assert!((alloc.powers[0] - 7.0).abs() <= 1e-6 * 7.0, "{:?}", alloc.powers);
        assert!(state.converged);
    }

    #[test]
    fn symmetric_users_share_equally() {
        let g = gains(&[&[1.0, 0.05], &[0.05, 1.0]], 0.1);
        let (alloc, _) = allocate_power(&g, &[1.0, 1.0], 10.0, &ScaOptions::default()).unwrap();
        assert!((alloc.powers[0] - alloc.powers[1]).abs() <= 1e-6 * alloc.powers[0]);
        assert!(alloc.total_power() <= 10.0 * (1.0 + 1e-9));
    }

    #[test]
    fn unreachable_targets_report_worst_first() {
        let g = gains(&[&[1.0, 0.5], &[0.5, 1.0]], 1.0);
        let err = allocate_power(&g, &[100.0, 500.0], 1.0, &ScaOptions::default()).unwrap_err();
        match err {
            Error::Infeasible { users } => assert_eq!(users, vec![1, 0]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn trace_is_monotone_and_meets_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let k = rng.gen_range(2..=5);
            let g = random_gains(k, &mut rng);
            let targets = vec![0.5; k];
            let (alloc, state) = allocate_power(&g, &targets, 10.0, &ScaOptions::default()).unwrap();
            for w in state.objective_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-8 * w[0].abs().max(1.0));
            }
            let sinrs = g.sinrs(&alloc.powers);
            assert!(sinrs.iter().all(|s| *s >= 0.5 * (1.0 - 1e-9)));
            assert!(*state.rate_trace.last().unwrap() >= state.rate_trace[0] - 1e-9);
        }
    }
}
