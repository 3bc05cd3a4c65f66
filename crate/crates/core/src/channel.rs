//! Large-scale channel: LOS probability, pathloss, shadow fading and
//! coupling gain per (cell, UE) link.
//!
//! Below the BS antenna height the rural-macro statistical model applies;
//! above it propagation is free space. Small-scale fading is not modelled.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::antenna::{wrap_azimuth, AntennaPattern};
use crate::deployment::{NetworkLayout, Point2, UserTerminal};
use crate::error::{Result, SimError};
use crate::ledger::ModelLedger;
use crate::rng::{self, Domain, SimRng};
use crate::terrain::LosCurveTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LosModel {
    /// Ground rural-macro LOS probability; rejected above its height limit.
    RmaBaseline,
    /// Ground model extended by log-linear interpolation in altitude.
    RmaAerial,
    /// Curve table derived from terrain ray tracing.
    TerrainEmpirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkState {
    pub cell: usize,
    pub ue: usize,
    pub d2d: f64,
    pub d3d: f64,
    pub los: bool,
    pub pathloss: f64,
    pub shadowing: f64,
    pub antenna_gain: f64,
    pub coupling_gain: f64,
}

/// Free-space pathloss in dB, `d3d` in metres and `fc_ghz` in GHz.
pub fn fspl_db(d3d: f64, fc_ghz: f64) -> f64 {
    32.45 + 20.0 * fc_ghz.log10() + 20.0 * d3d.log10()
}

#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub ledger: ModelLedger,
    pub los_model: LosModel,
    pub carrier_ghz: f64,
    pub terrain: Option<Arc<LosCurveTable>>,
}

impl ChannelModel {
    pub fn new(ledger: ModelLedger, los_model: LosModel, carrier_ghz: f64) -> Result<Self> {
        let lim = &ledger.pathloss;
        if !(lim.min_fc_ghz..=lim.max_fc_ghz).contains(&carrier_ghz) {
            return Err(SimError::config(
                "channel.carrier_ghz",
                format!(
                    "{carrier_ghz} GHz outside [{}, {}] GHz",
                    lim.min_fc_ghz, lim.max_fc_ghz
                ),
            ));
        }
        if los_model == LosModel::TerrainEmpirical {
            return Err(SimError::config(
                "channel.los_model",
                "terrain_empirical requires a curve table; use with_terrain",
            ));
        }
        Ok(Self {
            ledger,
            los_model,
            carrier_ghz,
            terrain: None,
        })
    }

    pub fn with_terrain(ledger: ModelLedger, table: Arc<LosCurveTable>, carrier_ghz: f64) -> Result<Self> {
        let mut m = Self::new(ledger, LosModel::RmaAerial, carrier_ghz)?;
        m.los_model = LosModel::TerrainEmpirical;
        m.terrain = Some(table);
        Ok(m)
    }

    fn ground_los_probability(&self, d2d: f64) -> f64 {
        let r = &self.ledger.rma;
        if d2d <= r.los_near_m {
            1.0
        } else {
            (-(d2d - r.los_near_m) / r.los_decay_m).exp()
        }
    }

    pub fn los_probability(&self, d2d: f64, h_ut: f64) -> Result<f64> {
        self.los_probability_with(self.los_model, d2d, h_ut)
    }

    pub fn los_probability_with(&self, model: LosModel, d2d: f64, h_ut: f64) -> Result<f64> {
        if !(d2d >= 0.0) {
            return Err(SimError::domain(format!("negative 2-D distance {d2d}")));
        }
        match model {
            LosModel::RmaBaseline => {
                let max_h = self.ledger.rma.baseline_max_ue_height;
                if h_ut > max_h {
                    return Err(SimError::domain(format!(
                        "rma_baseline LOS probability is not defined for UE height {h_ut} m (max {max_h} m)"
                    )));
                }
                Ok(self.ground_los_probability(d2d))
            }
            LosModel::RmaAerial => {
                let a = &self.ledger.aerial;
                let ground = self.ground_los_probability(d2d);
                if h_ut <= a.interp_floor_altitude {
                    Ok(ground)
                } else if h_ut >= a.los_cutoff_altitude {
                    Ok(1.0)
                } else {
                    let t = (h_ut - a.interp_floor_altitude)
                        / (a.los_cutoff_altitude - a.interp_floor_altitude);
                    Ok(ground.powf(1.0 - t))
                }
            }
            LosModel::TerrainEmpirical => {
                let table = self.terrain.as_ref().ok_or_else(|| {
                    SimError::domain("terrain_empirical LOS model has no curve table")
                })?;
                Ok(table.lookup(d2d, h_ut))
            }
        }
    }

    fn check_domain(&self, d2d: f64, fc: f64) -> Result<()> {
        let lim = &self.ledger.pathloss;
        if !(lim.min_d2d..=lim.max_d2d).contains(&d2d) {
            return Err(SimError::domain(format!(
                "2-D distance {d2d} m outside [{}, {}] m",
                lim.min_d2d, lim.max_d2d
            )));
        }
        if !(lim.min_fc_ghz..=lim.max_fc_ghz).contains(&fc) {
            return Err(SimError::domain(format!(
                "carrier {fc} GHz outside [{}, {}] GHz",
                lim.min_fc_ghz, lim.max_fc_ghz
            )));
        }
        Ok(())
    }

    fn rma_los(&self, d2d: f64, d3d_of: impl Fn(f64) -> f64, h_bs: f64, h_ut: f64, fc: f64) -> f64 {
        let r = &self.ledger.rma;
        let h = r.avg_building_height;
        let pl1 = |d: f64| {
            20.0 * (40.0 * std::f64::consts::PI * d * fc / 3.0).log10()
                + (0.03 * h.powf(1.72)).min(10.0) * d.log10()
                - (0.044 * h.powf(1.72)).min(14.77)
                + 0.002 * h.log10() * d
        };
        let d_bp = std::f64::consts::TAU * h_bs * h_ut * fc * 1e9 / r.speed_of_light;
        if d2d <= d_bp {
            pl1(d3d_of(d2d))
        } else {
            pl1(d3d_of(d_bp)) + 40.0 * (d3d_of(d2d) / d3d_of(d_bp)).log10()
        }
    }

    fn rma_nlos_raw(&self, d3d: f64, h_bs: f64, h_ut: f64, fc: f64) -> f64 {
        let r = &self.ledger.rma;
        let (h, w) = (r.avg_building_height, r.street_width);
        161.04 - 7.1 * w.log10() + 7.5 * h.log10()
            - (24.37 - 3.7 * (h / h_bs).powi(2)) * h_bs.log10()
            + (43.42 - 3.1 * h_bs.log10()) * (d3d.log10() - 3.0)
            + 20.0 * fc.log10()
            - (3.2 * (11.75 * h_ut).log10().powi(2) - 4.97)
    }

    /// Pathloss in dB at carrier `fc_ghz`.
    ///
    /// Free space when the UE is above the BS antenna; rural macro otherwise,
    /// with NLOS clamped from below by LOS.
    pub fn pathloss(&self, d2d: f64, h_bs: f64, h_ut: f64, fc_ghz: f64, los: bool) -> Result<f64> {
        self.check_domain(d2d, fc_ghz)?;
        let dh = h_bs - h_ut;
        let d3d_of = |d: f64| (d * d + dh * dh).sqrt();
        let d3d = d3d_of(d2d);
        if h_ut > h_bs {
            return Ok(fspl_db(d3d, fc_ghz));
        }
        let pl_los = self.rma_los(d2d, d3d_of, h_bs, h_ut, fc_ghz);
        if los {
            Ok(pl_los)
        } else {
            Ok(pl_los.max(self.rma_nlos_raw(d3d, h_bs, h_ut, fc_ghz)))
        }
    }

    /// Pathloss at this model's carrier.
    pub fn pathloss_at(&self, d2d: f64, h_bs: f64, h_ut: f64, los: bool) -> Result<f64> {
        self.pathloss(d2d, h_bs, h_ut, self.carrier_ghz, los)
    }

    /// Jump between the rural-macro and free-space branches at `h_ut = h_bs`.
    pub fn altitude_seam_db(&self, d2d: f64, h_bs: f64, fc_ghz: f64, los: bool) -> Result<f64> {
        let below = self.pathloss(d2d, h_bs, h_bs, fc_ghz, los)?;
        let above = self.pathloss(d2d, h_bs, h_bs * (1.0 + 1e-9), fc_ghz, los)?;
        Ok((below - above).abs())
    }

    /// Shadow-fading standard deviation. Tapers linearly to zero between the BS
    /// height and the LOS cutoff altitude.
    pub fn shadowing_sigma(&self, los: bool, h_ut: f64, h_bs: f64) -> f64 {
        let s = &self.ledger.shadowing;
        let base = if los { s.sigma_los_db } else { s.sigma_nlos_db };
        let cutoff = self.ledger.aerial.los_cutoff_altitude;
        if h_ut <= h_bs {
            base
        } else if h_ut >= cutoff || cutoff <= h_bs {
            0.0
        } else {
            base * (cutoff - h_ut) / (cutoff - h_bs)
        }
    }

    /// One zero-mean log-normal shadowing sample in dB.
    pub fn shadowing_draw(&self, los: bool, h_ut: f64, h_bs: f64, rng: &mut impl Rng) -> f64 {
        let sigma = self.shadowing_sigma(los, h_ut, h_bs);
        let z: f64 = rng.sample(StandardNormal);
        if sigma == 0.0 {
            0.0
        } else {
            sigma * z
        }
    }
}

/// Cell-to-UE geometry under wraparound.
#[derive(Debug, Clone, Copy)]
pub struct LinkGeometry {
    pub d2d: f64,
    pub d3d: f64,
    pub theta: f64,
    pub phi: f64,
}

pub fn link_geometry(layout: &NetworkLayout, cell: usize, ue_xy: Point2, h_ut: f64) -> LinkGeometry {
    let c = &layout.cells[cell];
    let site = &layout.sites[c.site];
    let v = layout.wrap_vector(site.position, ue_xy);
    let d2d = v.norm();
    let dh = site.antenna_height - h_ut;
    let d3d = (d2d * d2d + dh * dh).sqrt();
    let theta = 90.0 + dh.atan2(d2d).to_degrees();
    let phi = if d2d > 0.0 {
        wrap_azimuth(v.y.atan2(v.x).to_degrees() - c.azimuth)
    } else {
        0.0
    };
    LinkGeometry { d2d, d3d, theta, phi }
}

/// Per-link random stream keyed by (seed, drop, cell, ue).
pub fn link_rng(seed: u64, drop: u64, cell: usize, ue: usize) -> SimRng {
    rng::stream(Domain::Link, &[seed, drop, cell as u64, ue as u64])
}

/// Full link state with LOS and shadowing drawn from the link's own stream.
///
/// Distances below the pathloss domain floor are evaluated at the floor.
pub fn coupling_gain(
    layout: &NetworkLayout,
    pattern: &AntennaPattern,
    channel: &ChannelModel,
    ue: &UserTerminal,
    cell: usize,
    seed: u64,
    drop: u64,
) -> Result<LinkState> {
    let mut rng = link_rng(seed, drop, cell, ue.id);
    let g = link_geometry(layout, cell, ue.position.xy(), ue.height_agl);
    let h_bs = layout.site_of(cell).antenna_height;
    let d_eval = g.d2d.max(channel.ledger.pathloss.min_d2d);
    let p_los = channel.los_probability(g.d2d, ue.height_agl)?;
    let u: f64 = rng.random();
    let los = u < p_los;
    let pathloss = channel.pathloss_at(d_eval, h_bs, ue.height_agl, los)?;
    let shadowing = channel.shadowing_draw(los, ue.height_agl, h_bs, &mut rng);
    let antenna_gain = pattern.gain(g.theta, g.phi);
    Ok(LinkState {
        cell,
        ue: ue.id,
        d2d: g.d2d,
        d3d: g.d3d,
        los,
        pathloss,
        shadowing,
        antenna_gain,
        coupling_gain: antenna_gain - pathloss - shadowing,
    })
}

/// Links from every cell to one UE, in cell order.
pub fn ue_links(
    layout: &NetworkLayout,
    pattern: &AntennaPattern,
    channel: &ChannelModel,
    ue: &UserTerminal,
    seed: u64,
    drop: u64,
) -> Result<Vec<LinkState>> {
    (0..layout.n_cells())
        .map(|c| coupling_gain(layout, pattern, channel, ue, c, seed, drop))
        .collect()
}

/// Shadowing-free coupling gain, averaging LOS and NLOS path gains by the
/// LOS probability in the linear domain. Used where a deterministic
/// association map is needed.
pub fn expected_coupling_gain(
    layout: &NetworkLayout,
    pattern: &AntennaPattern,
    channel: &ChannelModel,
    cell: usize,
    ue_xy: Point2,
    h_ut: f64,
) -> Result<f64> {
    let g = link_geometry(layout, cell, ue_xy, h_ut);
    let h_bs = layout.site_of(cell).antenna_height;
    let d = g.d2d.max(channel.ledger.pathloss.min_d2d);
    let p = channel.los_probability(g.d2d, h_ut)?;
    let gl = 10f64.powf(-channel.pathloss_at(d, h_bs, h_ut, true)? / 10.0);
    let gn = 10f64.powf(-channel.pathloss_at(d, h_bs, h_ut, false)? / 10.0);
    let pl = -10.0 * (p * gl + (1.0 - p) * gn).log10();
    Ok(pattern.gain(g.theta, g.phi) - pl)
}

/// Pathloss curves for a fixed geometry: `(d2d, los, nlos, fspl)` rows.
pub fn generate_pathloss_curves(
    channel: &ChannelModel,
    h_bs: f64,
    h_ut: f64,
    fc_ghz: f64,
    distances: &[f64],
) -> Result<Vec<[f64; 4]>> {
    distances
        .iter()
        .map(|&d| {
            let d3d = (d * d + (h_bs - h_ut).powi(2)).sqrt();
            Ok([
                d,
                channel.pathloss(d, h_bs, h_ut, fc_ghz, true)?,
                channel.pathloss(d, h_bs, h_ut, fc_ghz, false)?,
                fspl_db(d3d, fc_ghz),
            ])
        })
        .collect()
}
