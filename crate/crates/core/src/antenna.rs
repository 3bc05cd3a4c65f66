//! Base-station antenna: parabolic sector element plus a uniform planar
//! array with electrical downtilt.
//!
//! Angles follow the usual convention: `theta` is the zenith angle (90° is
//! the horizon, larger values point below it) and `phi` the azimuth relative
//! to the sector boresight.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaArrayConfig {
    /// Rows (vertical elements).
    pub m_rows: usize,
    /// Columns (horizontal elements).
    pub n_cols: usize,
    /// Polarizations. Both ports carry identical power patterns.
    pub polarizations: usize,
    /// Vertical element spacing in wavelengths.
    pub vertical_spacing: f64,
    /// Horizontal element spacing in wavelengths (unused when `n_cols == 1`).
    pub horizontal_spacing: f64,
    /// Phase steering below the horizon, degrees.
    pub electrical_downtilt: f64,
    /// Vertical boresight offset of each element below the horizon, degrees.
    pub element_downtilt: f64,
    pub element_max_gain: f64,
    pub element_hpbw_v: f64,
    pub element_hpbw_h: f64,
    pub element_sla_v: f64,
    /// Front-to-back ratio `A_m`, dB.
    pub element_fbr: f64,
}

impl Default for AntennaArrayConfig {
    fn default() -> Self {
        Self {
            m_rows: 8,
            n_cols: 1,
            polarizations: 2,
            vertical_spacing: 0.8,
            horizontal_spacing: 0.5,
            electrical_downtilt: 6.0,
            element_downtilt: 6.0,
            element_max_gain: 8.0,
            element_hpbw_v: 65.0,
            element_hpbw_h: 65.0,
            element_sla_v: 30.0,
            element_fbr: 30.0,
        }
    }
}

impl AntennaArrayConfig {
    pub fn validate(&self) -> Result<()> {
        let key = |k: &str| format!("antenna.{k}");
        if self.m_rows == 0 || self.n_cols == 0 || self.polarizations == 0 {
            return Err(SimError::config(key("m_rows"), "array dimensions must be >= 1"));
        }
        for (name, bw) in [
            ("element_hpbw_v", self.element_hpbw_v),
            ("element_hpbw_h", self.element_hpbw_h),
        ] {
            if !(bw > 0.0 && bw < 180.0) {
                return Err(SimError::config(key(name), "beamwidth must lie in (0, 180) degrees"));
            }
        }
        for (name, v) in [
            ("element_max_gain", self.element_max_gain),
            ("element_sla_v", self.element_sla_v),
            ("element_fbr", self.element_fbr),
            ("electrical_downtilt", self.electrical_downtilt),
            ("element_downtilt", self.element_downtilt),
            ("vertical_spacing", self.vertical_spacing),
            ("horizontal_spacing", self.horizontal_spacing),
        ] {
            if !v.is_finite() {
                return Err(SimError::config(key(name), "must be finite"));
            }
        }
        if self.vertical_spacing <= 0.0 || self.horizontal_spacing <= 0.0 {
            return Err(SimError::config(key("vertical_spacing"), "spacing must be > 0"));
        }
        Ok(())
    }
}

/// Wraps an azimuth into `[-180, 180)`.
pub fn wrap_azimuth(phi: f64) -> f64 {
    (phi + 180.0).rem_euclid(360.0) - 180.0
}

/// Parabolic element gain in dBi, element frame (boresight at theta = 90°).
pub fn element_gain(theta: f64, phi: f64, cfg: &AntennaArrayConfig) -> f64 {
    let theta = theta.clamp(0.0, 180.0);
    let phi = wrap_azimuth(phi);
    let a_v = -(12.0 * ((theta - 90.0) / cfg.element_hpbw_v).powi(2)).min(cfg.element_sla_v);
    let a_h = -(12.0 * (phi / cfg.element_hpbw_h).powi(2)).min(cfg.element_fbr);
    cfg.element_max_gain - (-(a_v + a_h)).min(cfg.element_fbr)
}

/// Array factor power gain in dB with unit-norm weights.
fn array_factor_db(theta: f64, phi: f64, cfg: &AntennaArrayConfig) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let (st, ct) = theta.to_radians().sin_cos();
    let sp = phi.to_radians().sin();
    let steer = (90.0 + cfg.electrical_downtilt).to_radians().cos();
    let norm = 1.0 / ((cfg.m_rows * cfg.n_cols) as f64).sqrt();
    let mut sum = Complex64::new(0.0, 0.0);
    for m in 0..cfg.m_rows {
        let pv = two_pi * m as f64 * cfg.vertical_spacing * (ct - steer);
        for n in 0..cfg.n_cols {
            let ph = two_pi * n as f64 * cfg.horizontal_spacing * st * sp;
            sum += Complex64::from_polar(norm, pv + ph);
        }
    }
    10.0 * sum.norm_sqr().max(1e-30).log10()
}

/// Composite array gain in dBi.
pub fn array_gain(theta: f64, phi: f64, cfg: &AntennaArrayConfig) -> f64 {
    let theta = theta.clamp(0.0, 180.0);
    let phi = wrap_azimuth(phi);
    let elem = element_gain(theta - cfg.element_downtilt, phi, cfg);
    if cfg.m_rows * cfg.n_cols == 1 {
        return elem;
    }
    elem + array_factor_db(theta, phi, cfg)
}

const THETA_POINTS: usize = 181;
const PHI_POINTS: usize = 361;

/// Array gain sampled on a 1° grid with bilinear interpolation in dB.
#[derive(Debug, Clone)]
pub struct AntennaPattern {
    config: AntennaArrayConfig,
    /// Row-major `[theta][phi]`, theta 0..=180, phi -180..=180.
    table: Vec<f64>,
}

impl AntennaPattern {
    pub fn synthesize(config: &AntennaArrayConfig) -> Result<Self> {
        config.validate()?;
        let mut table = Vec::with_capacity(THETA_POINTS * PHI_POINTS);
        for t in 0..THETA_POINTS {
            for p in 0..PHI_POINTS {
                table.push(array_gain(t as f64, p as f64 - 180.0, config));
            }
        }
        Ok(Self {
            config: config.clone(),
            table,
        })
    }

    pub fn config(&self) -> &AntennaArrayConfig {
        &self.config
    }

    fn at(&self, t: usize, p: usize) -> f64 {
        self.table[t * PHI_POINTS + p]
    }

    pub fn gain(&self, theta: f64, phi: f64) -> f64 {
        let theta = theta.clamp(0.0, 180.0);
        let phi = wrap_azimuth(phi) + 180.0;
        let t0 = (theta.floor() as usize).min(THETA_POINTS - 2);
        let p0 = (phi.floor() as usize).min(PHI_POINTS - 2);
        let ft = theta - t0 as f64;
        let fp = phi - p0 as f64;
        let g00 = self.at(t0, p0);
        let g01 = self.at(t0, p0 + 1);
        let g10 = self.at(t0 + 1, p0);
        let g11 = self.at(t0 + 1, p0 + 1);
        (g00 * (1.0 - fp) + g01 * fp) * (1.0 - ft) + (g10 * (1.0 - fp) + g11 * fp) * ft
    }

    pub fn max_gain(&self) -> f64 {
        self.table.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Grid samples as `(theta_deg, phi_deg, gain_dbi)`.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..THETA_POINTS).flat_map(move |t| {
            (0..PHI_POINTS).map(move |p| (t as f64, p as f64 - 180.0, self.at(t, p)))
        })
    }
}
