//! Satellite beam radiation patterns.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::Deserialize;

use crate::config::{db_to_linear, BeamPatternSource, ScenarioConfig};
use crate::error::{Error, Result};

/// Scale of the Bessel-pattern argument that places the half-power point at `theta_3db`.
pub const BESSEL_U_SCALE: f64 = 2.07123;

/// Bessel function of the first kind `J_n(x)` for integer order.
///
/// Uses the integral `J_n(x) = (1/pi) * int_0^pi cos(n tau - x sin tau) dtau`.
/// The integrand is smooth and periodic, so the trapezoidal rule converges
/// geometrically once the node count exceeds `|x| + n`.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    let nodes = (2.0 * (x.abs() + n as f64)).ceil() as usize + 64;
    let h = PI / nodes as f64;
    let nf = n as f64;
    let f = |tau: f64| (nf * tau - x * tau.sin()).cos();
    let mut acc = 0.5 * (f(0.0) + f(PI));
    for i in 1..nodes {
        acc += f(i as f64 * h);
    }
    acc * h / PI
}

/// Normalised tapered-aperture pattern `[J1(u)/(2u) + 36 J3(u)/u^3]^2`, equal to 1 at `u = 0`.
pub fn bessel_pattern_shape(u: f64) -> f64 {
    if u.abs() < 1e-6 {
        // series limits: J1(u)/(2u) -> 1/4, 36 J3(u)/u^3 -> 3/4
        return 1.0;
    }
    let amp = bessel_j(1, u) / (2.0 * u) + 36.0 * bessel_j(3, u) / u.powi(3);
    amp * amp
}

/// Parametric beam pattern.
#[derive(Debug, Clone)]
pub struct BesselPattern {
    pub peak_gain: f64,
    pub theta_3db: f64,
    pub floor: f64,
}

impl BesselPattern {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        Self {
            peak_gain: db_to_linear(config.peak_beam_gain_dbi),
            theta_3db: config.theta_3db(),
            floor: db_to_linear(config.pattern_floor_db),
        }
    }

    /// Linear gain at off-axis angle `theta` (radians).
    pub fn gain(&self, theta: f64) -> f64 {
        let u = BESSEL_U_SCALE * theta.sin() / self.theta_3db.sin();
        self.peak_gain * bessel_pattern_shape(u).max(self.floor)
    }
}

#[derive(Debug, Deserialize)]
struct PatternRow {
    x_km: f64,
    y_km: f64,
    beam_id: usize,
    gain_dbi: f64,
}

/// Gain samples of one beam on a rectilinear grid.
#[derive(Debug, Clone)]
pub struct BeamGrid {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Row-major: `gains_dbi[iy * xs.len() + ix]`.
    gains_dbi: Vec<f64>,
}

impl BeamGrid {
    fn interpolate_dbi(&self, x: f64, y: f64) -> Option<f64> {
        let (ix, fx) = bracket(&self.xs, x)?;
        let (iy, fy) = bracket(&self.ys, y)?;
        let nx = self.xs.len();
        let at = |i: usize, j: usize| self.gains_dbi[j * nx + i];
        let (i1, j1) = ((ix + 1).min(nx - 1), (iy + 1).min(self.ys.len() - 1));
        let top = at(ix, iy) * (1.0 - fx) + at(i1, iy) * fx;
        let bottom = at(ix, j1) * (1.0 - fx) + at(i1, j1) * fx;
        Some(top * (1.0 - fy) + bottom * fy)
    }
}

/// Index of the cell containing `v` and the fractional offset within it.
fn bracket(axis: &[f64], v: f64) -> Option<(usize, f64)> {
    let (first, last) = (*axis.first()?, *axis.last()?);
    if !(v >= first && v <= last) {
        return None;
    }
    if axis.len() == 1 {
        return Some((0, 0.0));
    }
    let i = match axis.partition_point(|&a| a <= v) {
        0 => 0,
        p => (p - 1).min(axis.len() - 2),
    };
    let span = axis[i + 1] - axis[i];
    Some((i, ((v - axis[i]) / span).clamp(0.0, 1.0)))
}

/// Gridded pattern imported from CSV, one grid per beam.
#[derive(Debug, Clone)]
pub struct GridPattern {
    beams: BTreeMap<usize, BeamGrid>,
}

impl GridPattern {
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    /// Reads `x_km,y_km,beam_id,gain_dbi` rows; each beam must form a full grid.
    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut samples: BTreeMap<usize, Vec<PatternRow>> = BTreeMap::new();
        for row in rdr.deserialize() {
            let row: PatternRow = row?;
            samples.entry(row.beam_id).or_default().push(row);
        }
        let mut beams = BTreeMap::new();
        for (beam, rows) in samples {
            beams.insert(beam, build_grid(beam, rows)?);
        }
        if beams.is_empty() {
            return Err(Error::config("beam_pattern_source", "pattern CSV has no rows"));
        }
        Ok(Self { beams })
    }

    pub fn gain_dbi(&self, beam: usize, x_km: f64, y_km: f64) -> Result<f64> {
        self.beams
            .get(&beam)
            .and_then(|g| g.interpolate_dbi(x_km, y_km))
            .ok_or(Error::OutOfGrid { beam, x_km, y_km })
    }

    pub fn num_beams(&self) -> usize {
        self.beams.len()
    }
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn build_grid(beam: usize, rows: Vec<PatternRow>) -> Result<BeamGrid> {
    let bad = |reason: String| Error::config("beam_pattern_source", format!("beam {beam}: {reason}"));
    let xs = sorted_unique(rows.iter().map(|r| r.x_km).collect());
    let ys = sorted_unique(rows.iter().map(|r| r.y_km).collect());
    if xs.len() * ys.len() != rows.len() {
        return Err(bad(format!(
            "{} rows do not form a {}x{} grid",
            rows.len(),
            xs.len(),
            ys.len()
        )));
    }
    let mut gains = vec![f64::NAN; rows.len()];
    for r in &rows {
        let ix = xs.binary_search_by(|a| a.total_cmp(&r.x_km)).expect("x present");
        let iy = ys.binary_search_by(|a| a.total_cmp(&r.y_km)).expect("y present");
        let slot = &mut gains[iy * xs.len() + ix];
        if !slot.is_nan() {
            return Err(bad(format!("duplicate sample at ({}, {})", r.x_km, r.y_km)));
        }
        *slot = r.gain_dbi;
    }
    Ok(BeamGrid {
        xs,
        ys,
        gains_dbi: gains,
    })
}

/// A resolved beam pattern.
#[derive(Debug, Clone)]
pub enum BeamPattern {
    Parametric(BesselPattern),
    Grid(GridPattern),
}

impl BeamPattern {
    pub fn from_config(config: &ScenarioConfig) -> Result<Self> {
        match &config.beam_pattern_source {
            BeamPatternSource::Parametric => Ok(Self::Parametric(BesselPattern::from_config(config))),
            BeamPatternSource::Csv(path) => {
                let grid = GridPattern::from_csv_path(path)?;
                if grid.num_beams() < config.num_beams {
                    return Err(Error::config(
                        "beam_pattern_source",
                        format!(
                            "pattern CSV covers {} beams, config needs {}",
                            grid.num_beams(),
                            config.num_beams
                        ),
                    ));
                }
                Ok(Self::Grid(grid))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Power series, independent of the quadrature used in `bessel_j`.
    fn bessel_series(n: u32, x: f64) -> f64 {
        let half = x / 2.0;
        let mut term = half.powi(n as i32) / (1..=n).map(f64::from).product::<f64>();
        let mut sum = term;
        for k in 1..80 {
            let k = k as f64;
            term *= -half * half / (k * (k + n as f64));
            sum += term;
        }
        sum
    }

    #[test]
    fn bessel_matches_series() {
        for &x in &[0.0, 0.3, 1.0, 2.07123, 4.5, 8.0, 12.0] {
            for n in [0, 1, 3] {
                let a = bessel_j(n, x);
                let b = bessel_series(n, x);
                assert!((a - b).abs() < 1e-12, "J{n}({x}): {a} vs {b}");
            }
        }
        // tabulated J1(1) and J0(2.404825557695773) ~ 0
        assert!((bessel_j(1, 1.0) - 0.440_050_585_744_933_5).abs() < 1e-14);
        assert!(bessel_j(0, 2.404_825_557_695_773).abs() < 1e-13);
    }

    #[test]
    fn pattern_half_power_at_3db_angle() {
        let shape = bessel_pattern_shape(BESSEL_U_SCALE);
        assert!((shape - 0.5).abs() < 1e-4, "{shape}");
    }

    #[test]
    fn pattern_midpoint_matches_series_evaluation() {
        // theta = theta_3db / 2, evaluated with the power series in place of quadrature
        let p = BesselPattern {
            peak_gain: 1.0,
            theta_3db: (150.0f64 / 35786.0).atan(),
            floor: 1e-4,
        };
        let theta = p.theta_3db / 2.0;
        let u = BESSEL_U_SCALE * theta.sin() / p.theta_3db.sin();
        let amp = bessel_series(1, u) / (2.0 * u) + 36.0 * bessel_series(3, u) / u.powi(3);
        assert!((p.gain(theta) - amp * amp).abs() < 1e-12);
        // scipy.special.jv: 0.8445674078585336
        assert!((p.gain(theta) - 0.844_567_407_858_533_6).abs() < 1e-9, "{}", p.gain(theta));
    }

    #[test]
    fn pattern_is_monotone_in_main_lobe_and_bounded() {
        let p = BesselPattern {
            peak_gain: 27542.0,
            theta_3db: 0.004,
            floor: 1e-4,
        };
        assert_eq!(p.gain(0.0), p.peak_gain);
        let mut prev = p.gain(0.0);
        for i in 1..=200 {
            let g = p.gain(p.theta_3db * i as f64 / 200.0);
            assert!(g <= prev + 1e-12);
            prev = g;
        }
        for i in 1..2000 {
            let g = p.gain(p.theta_3db * i as f64 / 100.0);
            assert!(g < p.peak_gain);
            assert!(g >= p.peak_gain * 1e-4 * (1.0 - 1e-12));
        }
    }

    const GRID: &str = "x_km,y_km,beam_id,gain_dbi\n\
        0,0,0,40\n10,0,0,30\n0,10,0,20\n10,10,0,10\n";

    #[test]
    fn grid_bilinear() {
        let g = GridPattern::from_reader(GRID.as_bytes()).unwrap();
        assert_eq!(g.gain_dbi(0, 0.0, 0.0).unwrap(), 40.0);
        assert_eq!(g.gain_dbi(0, 10.0, 10.0).unwrap(), 10.0);
        assert!((g.gain_dbi(0, 5.0, 5.0).unwrap() - 25.0).abs() < 1e-12);
        assert!((g.gain_dbi(0, 5.0, 0.0).unwrap() - 35.0).abs() < 1e-12);
    }

    #[test]
    fn grid_out_of_range() {
        let g = GridPattern::from_reader(GRID.as_bytes()).unwrap();
        assert!(matches!(g.gain_dbi(0, 11.0, 0.0), Err(Error::OutOfGrid { .. })));
        assert!(matches!(g.gain_dbi(1, 1.0, 1.0), Err(Error::OutOfGrid { .. })));
    }

    #[test]
    fn ragged_grid_rejected() {
        let text = "x_km,y_km,beam_id,gain_dbi\n0,0,0,1\n1,0,0,1\n0,1,0,1\n";
        assert!(GridPattern::from_reader(text.as_bytes()).is_err());
    }
}
