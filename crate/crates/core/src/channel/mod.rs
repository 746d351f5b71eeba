//! User geometry, beam gains and the downlink channel `H = B * Phi`.
//!
//! Users sit on a flat-earth plane below a GEO satellite. Every user sees the
//! satellite at the same slant distance, so the amplitude of the channel from
//! beam `m` to user `k` is
//!
//! ```text
//! b_mk = lambda * sqrt(G_Rk * G_mk) / (4 pi d)
//! ```
//!
//! and the whole column shares one phase `psi_k`, drawn once per window.

pub mod pattern;

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{db_to_linear, ScenarioConfig};
use crate::error::{Error, Result};

pub use pattern::{BeamPattern, BesselPattern, GridPattern};

pub type C64 = Complex<f64>;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub fn wavelength(carrier_freq_ghz: f64) -> f64 {
    SPEED_OF_LIGHT / (carrier_freq_ghz * 1e9)
}

/// Parabolic receive antenna gain `eta * (pi D / lambda)^2` (linear).
pub fn rx_antenna_gain(diameter_m: f64, efficiency: f64, carrier_freq_ghz: f64) -> f64 {
    let lambda = wavelength(carrier_freq_ghz);
    efficiency * (PI * diameter_m / lambda).powi(2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTerminal {
    pub id: usize,
    pub beam_id: usize,
    /// Planar offset from the sub-satellite point, km.
    pub position_km: [f64; 2],
    /// Receive antenna gain, linear.
    pub rx_gain: f64,
    /// Gain of every satellite beam toward this user, linear.
    pub beam_gains: Vec<f64>,
    pub distance_m: f64,
    pub phase: f64,
}

/// Beam centres on a hexagonal lattice, spaced two 3 dB radii apart,
/// taken ring by ring outward from the sub-satellite point.
pub fn beam_centers(config: &ScenarioConfig) -> Vec<[f64; 2]> {
    let spacing = 2.0 * config.beam_radius_km;
    let m = config.num_beams;
    let mut rings = 0i64;
    while 1 + 3 * rings * (rings + 1) < m as i64 {
        rings += 1;
    }
    let mut pts: Vec<(i64, f64, [f64; 2])> = Vec::new();
    for q in -rings..=rings {
        for r in -rings..=rings {
            let s = -q - r;
            let ring = q.abs().max(r.abs()).max(s.abs());
            if ring > rings {
                continue;
            }
            let x = spacing * (q as f64 + r as f64 / 2.0);
            let y = spacing * (r as f64 * 3f64.sqrt() / 2.0);
            let mut angle = y.atan2(x);
            if angle < -1e-9 {
                angle += 2.0 * PI;
            }
            pts.push((ring, angle.max(0.0), [x, y]));
        }
    }
    pts.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.into_iter().take(m).map(|p| p.2).collect()
}

/// Angle at the satellite between the boresight of a beam and a ground point.
pub fn off_axis_angle(user_km: [f64; 2], center_km: [f64; 2], orbit_distance_m: f64) -> f64 {
    let a = [center_km[0] * 1e3, center_km[1] * 1e3, -orbit_distance_m];
    let b = [user_km[0] * 1e3, user_km[1] * 1e3, -orbit_distance_m];
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let cross_norm = (cross[0].powi(2) + cross[1].powi(2) + cross[2].powi(2)).sqrt();
    cross_norm.atan2(dot)
}

/// Linear gain of beam `beam_id` (centred at `beam_center`) toward `user_position`.
pub fn beam_gain(
    user_position: [f64; 2],
    beam_center: [f64; 2],
    beam_id: usize,
    pattern: &BeamPattern,
    config: &ScenarioConfig,
) -> Result<f64> {
    match pattern {
        BeamPattern::Parametric(p) => {
            Ok(p.gain(off_axis_angle(user_position, beam_center, config.orbit_distance_m)))
        }
        BeamPattern::Grid(g) => {
            let dbi = g.gain_dbi(beam_id, user_position[0], user_position[1])?;
            Ok(db_to_linear(dbi))
        }
    }
}

/// Drops `users_per_beam` users uniformly over each beam's 3 dB disc.
pub fn generate_users<R: Rng + ?Sized>(
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<Vec<UserTerminal>> {
    config.validate()?;
    let pattern = BeamPattern::from_config(config)?;
    let centers = beam_centers(config);
    let rx_gain = rx_antenna_gain(
        config.rx_antenna_diameter_m,
        config.rx_antenna_efficiency,
        config.carrier_freq_ghz,
    );
    let mut users = Vec::with_capacity(config.num_users());
    for (beam_id, center) in centers.iter().enumerate() {
        for _ in 0..config.users_per_beam {
            let r = config.beam_radius_km * rng.gen::<f64>().sqrt();
            let a = 2.0 * PI * rng.gen::<f64>();
            let phase = 2.0 * PI * rng.gen::<f64>();
            let position_km = [center[0] + r * a.cos(), center[1] + r * a.sin()];
            let beam_gains = centers
                .iter()
                .enumerate()
                .map(|(m, c)| beam_gain(position_km, *c, m, &pattern, config))
                .collect::<Result<Vec<_>>>()?;
            users.push(UserTerminal {
                id: users.len(),
                beam_id,
                position_km,
                rx_gain,
                beam_gains,
                distance_m: config.orbit_distance_m,
                phase,
            });
        }
    }
    Ok(users)
}

/// Real amplitudes `b_mk` of one user's channel.
pub fn channel_amplitudes(user: &UserTerminal, config: &ScenarioConfig) -> DVector<f64> {
    let lambda = config.wavelength_m();
    DVector::from_iterator(
        user.beam_gains.len(),
        user.beam_gains
            .iter()
            .map(|g| lambda * (user.rx_gain * g).sqrt() / (4.0 * PI * user.distance_m)),
    )
}

/// `h_k`: amplitudes times the common phase `e^{i psi_k}`.
pub fn channel_vector(user: &UserTerminal, config: &ScenarioConfig) -> DVector<C64> {
    let rot = C64::from_polar(1.0, user.phase);
    channel_amplitudes(user, config).map(|b| rot * b)
}

/// Per-user channels computed once per window.
#[derive(Debug, Clone)]
pub struct ChannelBank {
    amplitudes: Vec<DVector<f64>>,
    phases: Vec<f64>,
    vectors: Vec<DVector<C64>>,
}

impl ChannelBank {
    pub fn new(users: &[UserTerminal], config: &ScenarioConfig) -> Self {
        let amplitudes: Vec<_> = users.iter().map(|u| channel_amplitudes(u, config)).collect();
        let phases: Vec<_> = users.iter().map(|u| u.phase).collect();
        let vectors = amplitudes
            .iter()
            .zip(&phases)
            .map(|(b, &p)| {
                let rot = C64::from_polar(1.0, p);
                b.map(|x| rot * x)
            })
            .collect();
        Self {
            amplitudes,
            phases,
            vectors,
        }
    }

    /// Bank from raw channel vectors, each with a common per-user phase.
    pub fn from_vectors(vectors: Vec<DVector<C64>>) -> Self {
        let amplitudes = vectors.iter().map(|v| v.map(|z| z.norm())).collect();
        let phases = vectors
            .iter()
            .map(|v| v.iter().find(|z| z.norm() > 0.0).map_or(0.0, |z| z.arg()))
            .collect();
        Self {
            amplitudes,
            phases,
            vectors,
        }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, id: usize) -> &DVector<C64> {
        &self.vectors[id]
    }

    /// `||h_k||^2`.
    pub fn gain(&self, id: usize) -> f64 {
        self.amplitudes[id].norm_squared()
    }

    /// Columns in the given order.
    pub fn matrix(&self, ids: &[usize]) -> Result<ChannelMatrix> {
        if ids.is_empty() {
            return Err(Error::EmptySet);
        }
        let m = self.amplitudes[ids[0]].len();
        let amplitude = DMatrix::from_fn(m, ids.len(), |r, c| self.amplitudes[ids[c]][r]);
        let phases: Vec<C64> = ids.iter().map(|&i| C64::from_polar(1.0, self.phases[i])).collect();
        let h = DMatrix::from_fn(m, ids.len(), |r, c| self.vectors[ids[c]][r]);
        Ok(ChannelMatrix {
            amplitude,
            phases,
            h,
            column_user_ids: ids.to_vec(),
        })
    }
}

/// `H = B * Phi` for an ordered user subset.
#[derive(Debug, Clone)]
pub struct ChannelMatrix {
    pub amplitude: DMatrix<f64>,
    /// Diagonal of `Phi`.
    pub phases: Vec<C64>,
    pub h: DMatrix<C64>,
    pub column_user_ids: Vec<usize>,
}

impl ChannelMatrix {
    pub fn num_beams(&self) -> usize {
        self.h.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.h.ncols()
    }

    /// Dense `Phi`.
    pub fn phase_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.phases))
    }

    /// Wraps a raw complex matrix; amplitudes and phases are recovered per column
    /// from the first non-zero entry, so `H = B Phi` only when each column has a
    /// common phase.
    pub fn from_complex(h: DMatrix<C64>, column_user_ids: Vec<usize>) -> Result<Self> {
        if h.ncols() == 0 {
            return Err(Error::EmptySet);
        }
        if column_user_ids.len() != h.ncols() {
            return Err(Error::Dimension(format!(
                "{} ids for {} columns",
                column_user_ids.len(),
                h.ncols()
            )));
        }
        let phases: Vec<C64> = h
            .column_iter()
            .map(|col| {
                col.iter()
                    .find(|z| z.norm() > 0.0)
                    .map(|z| z / z.norm())
                    .unwrap_or(C64::new(1.0, 0.0))
            })
            .collect();
        let amplitude = h.map(|z| z.norm());
        Ok(Self {
            amplitude,
            phases,
            h,
            column_user_ids,
        })
    }
}

/// Builds `H` for the given users, in order.
pub fn channel_matrix(users: &[&UserTerminal], config: &ScenarioConfig) -> Result<ChannelMatrix> {
    if users.is_empty() {
        return Err(Error::EmptySet);
    }
    let m = users[0].beam_gains.len();
    let cols: Vec<DVector<f64>> = users.iter().map(|u| channel_amplitudes(u, config)).collect();
    let amplitude = DMatrix::from_fn(m, users.len(), |r, c| cols[c][r]);
    let phases: Vec<C64> = users.iter().map(|u| C64::from_polar(1.0, u.phase)).collect();
    let h = DMatrix::from_fn(m, users.len(), |r, c| phases[c] * cols[c][r]);
    Ok(ChannelMatrix {
        amplitude,
        phases,
        h,
        column_user_ids: users.iter().map(|u| u.id).collect(),
    })
}
