//! QoS-blind baselines: semiorthogonal user selection and uniform sampling.

use std::collections::BTreeSet;

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::Rng;

use super::Network;
use crate::channel::C64;

/// Greedy semiorthogonal selection of at most `m` users.
///
/// Each round picks the candidate with the largest component orthogonal to
/// the users already picked, then keeps only candidates whose normalised
/// correlation with that component is below `alpha`.
pub fn semiorthogonal_select(candidates: &[(usize, &DVector<C64>)], m: usize, alpha: f64) -> Vec<usize> {
    let mut pool: Vec<(usize, &DVector<C64>)> = candidates.to_vec();
    pool.sort_by_key(|(id, _)| *id);
    let mut picked = Vec::new();
    let mut basis: Vec<DVector<C64>> = Vec::new();
    while picked.len() < m && !pool.is_empty() {
        let mut best: Option<(usize, DVector<C64>, f64)> = None;
        for (i, (_, h)) in pool.iter().enumerate() {
            let mut g = (*h).clone();
            for b in &basis {
                let proj = b.dotc(h) / C64::new(b.norm_squared(), 0.0);
                g -= b * proj;
            }
            let norm = g.norm();
            if best.as_ref().is_none_or(|(_, _, n)| norm > *n) {
                best = Some((i, g, norm));
            }
        }
        let (i, g, norm) = best.expect("pool is non-empty");
        let (id, _) = pool.remove(i);
        picked.push(id);
        if norm == 0.0 {
            break;
        }
        pool.retain(|(_, h)| g.dotc(h).norm() / (h.norm() * norm) < alpha);
        basis.push(g);
    }
    picked
}

/// Semiorthogonal selection over the available users, in pick order.
pub fn sus_schedule(net: &Network, available: &BTreeSet<usize>) -> Vec<usize> {
    let candidates: Vec<(usize, &DVector<C64>)> = available.iter().map(|&k| (k, net.bank.vector(k))).collect();
    semiorthogonal_select(&candidates, net.config.num_beams, net.config.sus_alpha)
}

/// `m` distinct users drawn uniformly from the pool, ascending; the whole
/// pool when it is smaller.
pub fn random_schedule<R: Rng + ?Sized>(available: &BTreeSet<usize>, m: usize, rng: &mut R) -> Vec<usize> {
    let pool: Vec<usize> = available.iter().copied().collect();
    if pool.len() <= m {
        return pool;
    }
    let mut chosen: Vec<usize> = sample(rng, pool.len(), m).into_iter().map(|i| pool[i]).collect();
    chosen.sort_unstable();
    chosen
}
