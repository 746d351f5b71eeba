//! Linear precoders and per-slot throughput.
//!
//! Every precoder returns unit-norm columns, so the transmit power of user
//! `k` is exactly its coefficient `p_k` and the sum-power budget is
//! `sum p_k <= P_max`. The RZF trace normaliser `omega` is kept for
//! diagnostics only.

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelMatrix, C64};
use crate::error::{Error, Result};
use crate::scheduler::SlotResult;

/// Above this the regularised Gram matrix is reported as ill-conditioned.
pub const CONDITION_WARN: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct PrecodingMatrix {
    pub w: DMatrix<C64>,
    /// `tr(H G^-2 H^H)` for RZF; 1 for the other precoders.
    pub omega: f64,
    pub column_user_ids: Vec<usize>,
}

/// Regularised Gram matrix `H^H H + delta I` and its inverse via Cholesky.
pub fn regularized_gram_inverse(h: &DMatrix<C64>, delta: f64) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let k = h.ncols();
    let mut gram = h.adjoint() * h;
    for i in 0..k {
        gram[(i, i)] += C64::new(delta, 0.0);
    }
    let chol = Cholesky::new(gram.clone())
        .ok_or_else(|| Error::Singular(format!("{k}x{k} Gram matrix is not positive definite")))?;
    let cond = condition_number(&chol);
    if cond > CONDITION_WARN {
        log::warn!("Gram matrix condition number {cond:.3e} exceeds {CONDITION_WARN:.0e}");
    }
    Ok((gram, chol.inverse()))
}

/// Squared ratio of extreme Cholesky pivots; a cheap lower bound on cond(G).
fn condition_number(chol: &Cholesky<C64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)].re).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    (max / min).powi(2)
}

fn normalize_columns(mut w: DMatrix<C64>) -> Result<DMatrix<C64>> {
    for mut col in w.column_iter_mut() {
        let n = col.norm();
        if n <= 0.0 || !n.is_finite() {
            return Err(Error::Singular("precoder column has zero norm".into()));
        }
        col /= C64::new(n, 0.0);
    }
    Ok(w)
}

fn check_dims(h: &ChannelMatrix) -> Result<()> {
    if h.num_users() == 0 {
        return Err(Error::EmptySet);
    }
    if h.num_users() > h.num_beams() {
        return Err(Error::Dimension(format!(
            "{} users exceed {} beams",
            h.num_users(),
            h.num_beams()
        )));
    }
    Ok(())
}

/// `W = H (H^H H + sigma^2 K / P_max I)^-1`, columns scaled to unit norm.
pub fn rzf_precoder(h: &ChannelMatrix, max_power: f64, noise: f64) -> Result<PrecodingMatrix> {
    check_dims(h)?;
    let delta = noise * h.num_users() as f64 / max_power;
    let (_, inv) = regularized_gram_inverse(&h.h, delta)?;
    let raw = &h.h * inv;
    let omega = raw.norm_squared();
    Ok(PrecodingMatrix {
        w: normalize_columns(raw)?,
        omega,
        column_user_ids: h.column_user_ids.clone(),
    })
}

/// Matched filter `h_k / ||h_k||`.
pub fn mrt_precoder(h: &ChannelMatrix) -> Result<PrecodingMatrix> {
    check_dims(h)?;
    Ok(PrecodingMatrix {
        w: normalize_columns(h.h.clone())?,
        omega: 1.0,
        column_user_ids: h.column_user_ids.clone(),
    })
}

/// `H (H^H H)^-1`, columns scaled to unit norm. Fails on (near) rank-deficient `H`.
pub fn zf_precoder(h: &ChannelMatrix) -> Result<PrecodingMatrix> {
    check_dims(h)?;
    let gram = h.h.adjoint() * &h.h;
    let chol = Cholesky::new(gram)
        .ok_or_else(|| Error::Singular("channel matrix is rank deficient".into()))?;
    let cond = condition_number(&chol);
    if cond > CONDITION_WARN {
        return Err(Error::Singular(format!("Gram condition number {cond:.3e}")));
    }
    Ok(PrecodingMatrix {
        w: normalize_columns(&h.h * chol.inverse())?,
        omega: 1.0,
        column_user_ids: h.column_user_ids.clone(),
    })
}

/// `z[k][k'] = |h_k^H w_k'|^2` plus the noise power.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkGains {
    pub z: DMatrix<f64>,
    pub noise: f64,
    pub user_ids: Vec<usize>,
}

impl LinkGains {
    pub fn new(h: &ChannelMatrix, w: &PrecodingMatrix, noise: f64) -> Result<Self> {
        if h.column_user_ids != w.column_user_ids {
            return Err(Error::Dimension("channel and precoder user orders differ".into()));
        }
        let cross = h.h.adjoint() * &w.w;
        Ok(Self {
            z: cross.map(|c| c.norm_sqr()),
            noise,
            user_ids: h.column_user_ids.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.user_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.user_ids.is_empty()
    }

    pub fn position(&self, user: usize) -> Option<usize> {
        self.user_ids.iter().position(|&u| u == user)
    }

    /// Received desired-plus-interference-plus-noise power `sum_k' p_k' z_kk' + sigma^2`.
    pub fn total_received(&self, k: usize, powers: &[f64]) -> f64 {
        (0..self.len()).map(|j| powers[j] * self.z[(k, j)]).sum::<f64>() + self.noise
    }

    /// SINR of the user at column `k`.
    pub fn sinr_at(&self, k: usize, powers: &[f64]) -> f64 {
        let interference: f64 = (0..self.len())
            .filter(|&j| j != k)
            .map(|j| powers[j] * self.z[(k, j)])
            .sum();
        powers[k] * self.z[(k, k)] / (interference + self.noise)
    }

    pub fn sinrs(&self, powers: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|k| self.sinr_at(k, powers)).collect()
    }

    /// Per-user rates in Mbps.
    pub fn rates(&self, powers: &[f64], bandwidth_mhz: f64) -> Vec<f64> {
        self.sinrs(powers)
            .into_iter()
            .map(|s| bandwidth_mhz * (1.0 + s).log2())
            .collect()
    }
}

/// The scheduled set of one slot together with its power coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotAllocation {
    pub users: Vec<usize>,
    pub powers: Vec<f64>,
}

impl SlotAllocation {
    pub fn new(users: Vec<usize>, powers: Vec<f64>) -> Self {
        debug_assert_eq!(users.len(), powers.len());
        Self { users, powers }
    }

    pub fn empty() -> Self {
        Self {
            users: Vec::new(),
            powers: Vec::new(),
        }
    }

    pub fn equal_split(users: Vec<usize>, max_power: f64) -> Self {
        let p = if users.is_empty() { 0.0 } else { max_power / users.len() as f64 };
        let powers = vec![p; users.len()];
        Self { users, powers }
    }

    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }

    pub fn power_of(&self, user: usize) -> Option<f64> {
        self.users.iter().position(|&u| u == user).map(|i| self.powers[i])
    }
}

fn aligned_powers(gains: &LinkGains, alloc: &SlotAllocation) -> Result<Vec<f64>> {
    gains
        .user_ids
        .iter()
        .map(|&u| alloc.power_of(u).ok_or(Error::NotScheduled(u)))
        .collect()
}

/// `p_k z_kk / (sum_{k' != k} p_k' z_kk' + sigma^2)`.
pub fn sinr(user: usize, gains: &LinkGains, alloc: &SlotAllocation) -> Result<f64> {
    let k = gains.position(user).ok_or(Error::NotScheduled(user))?;
    alloc.power_of(user).ok_or(Error::NotScheduled(user))?;
    let powers = aligned_powers(gains, alloc)?;
    Ok(gains.sinr_at(k, &powers))
}

/// `B log2(1 + SINR)` in Mbps.
pub fn instantaneous_throughput(
    user: usize,
    gains: &LinkGains,
    alloc: &SlotAllocation,
    bandwidth_mhz: f64,
) -> Result<f64> {
    Ok(bandwidth_mhz * (1.0 + sinr(user, gains, alloc)?).log2())
}

/// Megabits delivered to `user` over the logged slots (slots last one second).
pub fn aggregated_throughput(user: usize, slots: &[SlotResult]) -> f64 {
    slots
        .iter()
        .filter_map(|s| s.rate_of(user))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_h(m: usize, k: usize, seed: u64) -> ChannelMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = DMatrix::from_fn(m, k, |_, _| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 1e-6
        });
        ChannelMatrix::from_complex(h, (0..k).collect()).unwrap()
    }

    fn orthogonal_h() -> ChannelMatrix {
        let mut h = DMatrix::zeros(4, 3);
        h[(0, 0)] = C64::new(2e-6, 0.0);
        h[(1, 1)] = C64::new(0.0, 1e-6);
        h[(2, 2)] = C64::new(-3e-6, 0.0);
        h[(3, 2)] = C64::new(1e-6, 0.0);
        ChannelMatrix::from_complex(h, vec![10, 11, 12]).unwrap()
    }

    const P: f64 = 70.0;
    const N0: f64 = 1.5e-12;

    #[test]
    fn single_user_directions_coincide() {
        let h = random_h(7, 1, 1);
        let col = h.h.column(0).into_owned();
        let mf = &col / C64::new(col.norm(), 0.0);
        for w in [
            rzf_precoder(&h, P, N0).unwrap(),
            mrt_precoder(&h).unwrap(),
            zf_precoder(&h).unwrap(),
        ] {
            assert!((w.w.column(0) - &mf).norm() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_columns_have_no_leakage() {
        let h = orthogonal_h();
        let rzf = rzf_precoder(&h, P, N0).unwrap();
        let mrt = mrt_precoder(&h).unwrap();
        let zf = zf_precoder(&h).unwrap();
        let g = LinkGains::new(&h, &rzf, N0).unwrap();
        for k in 0..3 {
            for j in 0..3 {
                if j != k {
                    let leak = (h.h.column(k).adjoint() * rzf.w.column(j))[(0, 0)].norm();
                    assert!(leak < 1e-18, "{leak}");
                    assert!(g.z[(k, j)] < 1e-30);
                }
            }
        }
        assert!((mrt.w.clone() - zf.w).norm() < 1e-12);
    }

    #[test]
    fn regularized_inverse_matches_identity() {
        for seed in 0..10 {
            let h = random_h(7, 4, seed);
            let delta = N0 * 4.0 / P;
            let (g, inv) = regularized_gram_inverse(&h.h, delta).unwrap();
            let eye = DMatrix::<C64>::identity(4, 4);
            assert!((&g * &inv - &eye).norm() < 1e-9);
            // compare with nalgebra's LU-based inverse
            let direct = g.clone().try_inverse().unwrap();
            assert!((&inv - &direct).norm() <= 1e-9 * direct.norm());
        }
    }

    #[test]
    fn unit_norm_columns() {
        for seed in 0..20 {
            let h = random_h(7, 1 + (seed as usize % 7), seed);
            for w in [rzf_precoder(&h, P, N0).unwrap(), mrt_precoder(&h).unwrap()] {
                for c in w.w.column_iter() {
                    assert!((c.norm() - 1.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn too_many_users_rejected() {
        let h = random_h(3, 4, 0);
        assert!(matches!(rzf_precoder(&h, P, N0), Err(Error::Dimension(_))));
    }

    #[test]
    fn zf_on_parallel_columns_fails() {
        let v = DVector::from_vec(vec![C64::new(1e-6, 0.0), C64::new(2e-6, 0.0), C64::new(0.5e-6, 0.0)]);
        let mut h = DMatrix::zeros(3, 2);
        h.set_column(0, &v);
        h.set_column(1, &(v.clone() * C64::new(0.0, 1.0)));
        let h = ChannelMatrix::from_complex(h, vec![0, 1]).unwrap();
        assert!(matches!(zf_precoder(&h), Err(Error::Singular(_))));
        // RZF stays well defined
        assert!(rzf_precoder(&h, P, N0).is_ok());
    }

    #[test]
    fn zf_nulls_interference() {
        let h = random_h(7, 5, 3);
        let zf = zf_precoder(&h).unwrap();
        let g = LinkGains::new(&h, &zf, N0).unwrap();
        let diag_scale = (0..5).map(|k| g.z[(k, k)]).fold(0.0, f64::max);
        for k in 0..5 {
            for j in 0..5 {
                if j != k {
                    assert!(g.z[(k, j)] <= 1e-9 * diag_scale);
                }
            }
        }
        let powers = vec![3.0; 5];
        let alloc = SlotAllocation::new((0..5).collect(), powers.clone());
        for k in 0..5 {
            let r = instantaneous_throughput(k, &g, &alloc, 500.0).unwrap();
            let ideal = 500.0 * (1.0 + 3.0 * g.z[(k, k)] / N0).log2();
            assert!((r - ideal).abs() <= 1e-6 * ideal);
        }
    }

    fn gains_2x2(z: [[f64; 2]; 2], noise: f64) -> LinkGains {
        LinkGains {
            z: DMatrix::from_row_slice(2, 2, &[z[0][0], z[0][1], z[1][0], z[1][1]]),
            noise,
            user_ids: vec![1, 2],
        }
    }

    #[test]
    fn sinr_examples() {
        let single = LinkGains {
            z: DMatrix::from_element(1, 1, 2.0),
            noise: 1.0,
            user_ids: vec![7],
        };
        let a = SlotAllocation::new(vec![7], vec![0.5]);
        assert!((sinr(7, &single, &a).unwrap() - 1.0).abs() < 1e-15);
        let zero = SlotAllocation::new(vec![7], vec![0.0]);
        assert_eq!(sinr(7, &single, &zero).unwrap(), 0.0);
        assert!(matches!(sinr(8, &single, &a), Err(Error::NotScheduled(8))));

        // p1 z11 = 4, p2 z12 = 1, sigma^2 = 1 -> 4 / (1 + 1) = 2
        let g = gains_2x2([[2.0, 0.5], [0.3, 1.0]], 1.0);
        let a = SlotAllocation::new(vec![1, 2], vec![2.0, 2.0]);
        assert!((sinr(1, &g, &a).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn throughput_examples() {
        let single = LinkGains {
            z: DMatrix::from_element(1, 1, 1.0),
            noise: 1.0,
            user_ids: vec![0],
        };
        let rate = |p: f64| {
            instantaneous_throughput(0, &single, &SlotAllocation::new(vec![0], vec![p]), 500.0).unwrap()
        };
        assert!((rate(1.0) - 500.0).abs() < 1e-12);
        assert_eq!(rate(0.0), 0.0);
        assert!((rate(3.0) - 1000.0).abs() < 1e-12);
    }

    #[test]
    fn sinr_scale_invariance_and_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let z = [[rng.gen::<f64>(), rng.gen::<f64>()], [rng.gen::<f64>(), rng.gen::<f64>()]];
            let p = [rng.gen::<f64>() + 0.01, rng.gen::<f64>() + 0.01];
            let noise = rng.gen::<f64>() + 0.01;
            let c = 10f64.powf(rng.gen::<f64>() * 6.0 - 3.0);
            let g = gains_2x2(z, noise);
            let gc = gains_2x2([[z[0][0] * c, z[0][1] * c], [z[1][0] * c, z[1][1] * c]], noise * c);
            let a = SlotAllocation::new(vec![1, 2], p.to_vec());
            for u in [1, 2] {
                let s1 = sinr(u, &g, &a).unwrap();
                let s2 = sinr(u, &gc, &a).unwrap();
                assert!((s1 - s2).abs() <= 1e-12 * s1.max(1.0));
            }
            let more_own = SlotAllocation::new(vec![1, 2], vec![p[0] * 1.5, p[1]]);
            let more_int = SlotAllocation::new(vec![1, 2], vec![p[0], p[1] * 1.5]);
            let r0 = instantaneous_throughput(1, &g, &a, 500.0).unwrap();
            assert!(instantaneous_throughput(1, &g, &more_own, 500.0).unwrap() > r0);
            assert!(instantaneous_throughput(1, &g, &more_int, 500.0).unwrap() <= r0);
        }
    }
}
