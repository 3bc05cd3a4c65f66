//! Downlink coupling-gain and SINR statistics versus UE altitude, and
//! coverage checks against SINR and rate floors.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ue_links, LinkState};
use crate::deployment::{drop_ues, select_serving_cell, DropParams, UeKind};
use crate::error::{Result, SimError};
use crate::rate::attenuated_shannon_bps;
use crate::rng::{self, Domain};
use crate::scenario::Scenario;
use crate::stats::{self, db_to_lin, lin_to_db};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceMode {
    /// Every interferer radiates `ru` times its full power.
    Average,
    /// Every interferer is on with probability `ru` (per cell and drop).
    Bernoulli,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DownlinkParams {
    pub tx_power_dbm: f64,
    pub bandwidth_hz: f64,
    pub ue_noise_figure_db: f64,
    pub resource_utilization: f64,
    pub interference: InterferenceMode,
    pub altitudes: Vec<f64>,
    pub ues_per_cell: usize,
    pub sinr_floor_db: f64,
    pub sinr_floor_ce_db: f64,
    pub c2_rate_bps: f64,
}

impl Default for DownlinkParams {
    fn default() -> Self {
        Self {
            tx_power_dbm: 46.0,
            bandwidth_hz: 10e6,
            ue_noise_figure_db: 9.0,
            resource_utilization: 0.2,
            interference: InterferenceMode::Average,
            altitudes: vec![1.5, 40.0, 120.0],
            ues_per_cell: 10,
            sinr_floor_db: -6.0,
            sinr_floor_ce_db: -10.0,
            c2_rate_bps: 100e3,
        }
    }
}

/// Thermal noise plus receiver noise figure over `bandwidth_hz`, dBm.
pub fn noise_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    -174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

impl DownlinkParams {
    pub fn noise_dbm(&self) -> f64 {
        noise_dbm(self.bandwidth_hz, self.ue_noise_figure_db)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.resource_utilization) {
            return Err(SimError::config("downlink.resource_utilization", "must lie in [0, 1]"));
        }
        if self.bandwidth_hz <= 0.0 {
            return Err(SimError::config("downlink.bandwidth_hz", "must be > 0"));
        }
        if self.altitudes.is_empty() {
            return Err(SimError::config("downlink.altitudes", "must not be empty"));
        }
        if self.ues_per_cell == 0 {
            return Err(SimError::config("downlink.ues_per_cell", "must be >= 1"));
        }
        Ok(())
    }
}

/// SINR in dB with interferer powers scaled by per-cell activity factors.
pub fn dl_sinr_with_activity(
    serving: usize,
    links: &[LinkState],
    activity: impl Fn(usize) -> f64,
    tx_power_dbm: f64,
    noise_dbm: f64,
) -> f64 {
    let mut signal = 0.0;
    let mut interference = 0.0;
    for l in links {
        let p = db_to_lin(tx_power_dbm + l.coupling_gain);
        if l.cell == serving {
            signal = p;
        } else {
            interference += activity(l.cell) * p;
        }
    }
    lin_to_db(signal / (interference + db_to_lin(noise_dbm)))
}

/// SINR in dB with every non-serving cell scaled by `ru`.
pub fn compute_dl_sinr(serving: usize, links: &[LinkState], ru: f64, tx_power_dbm: f64, noise_dbm: f64) -> f64 {
    dl_sinr_with_activity(serving, links, |_| ru, tx_power_dbm, noise_dbm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeDownlink {
    pub ue: usize,
    pub kind: UeKind,
    pub serving: usize,
    pub coupling_gain: f64,
    pub sinr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownlinkSnapshot {
    pub altitude: f64,
    pub seed: u64,
    pub resource_utilization: f64,
    pub ues: Vec<UeDownlink>,
}

/// One drop at one altitude (all UEs at `altitude`).
pub fn dl_snapshot(scn: &Scenario, params: &DownlinkParams, altitude: f64, seed: u64, min_distance: f64) -> Result<DownlinkSnapshot> {
    let drop = DropParams {
        per_cell: params.ues_per_cell,
        aerial_heights: vec![altitude],
        aerial_ratio: 1.0,
        ground_height: altitude,
        min_distance,
    };
    let ues = drop_ues(&scn.layout, &drop, seed, 0)?;
    let noise = params.noise_dbm();
    let ru = params.resource_utilization;
    let activity: Vec<f64> = match params.interference {
        InterferenceMode::Average => vec![ru; scn.layout.n_cells()],
        InterferenceMode::Bernoulli => (0..scn.layout.n_cells())
            .map(|c| {
                let mut r = rng::stream(Domain::Activity, &[seed, 0, c as u64]);
                if r.random::<f64>() < ru {
                    1.0
                } else {
                    0.0
                }
            })
            .collect(),
    };
    let out = ues
        .iter()
        .map(|ue| {
            let links = ue_links(&scn.layout, &scn.pattern, &scn.channel, ue, seed, 0)?;
            let serving = select_serving_cell(&links)?;
            let sinr = dl_sinr_with_activity(serving, &links, |c| activity[c], params.tx_power_dbm, noise);
            Ok(UeDownlink {
                ue: ue.id,
                kind: ue.kind,
                serving,
                coupling_gain: links[serving].coupling_gain,
                sinr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DownlinkSnapshot {
        altitude,
        seed,
        resource_utilization: ru,
        ues: out,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    /// Fraction with SINR at or above the regular floor.
    pub coverage: f64,
    /// Fraction with SINR at or above the coverage-enhanced floor.
    pub coverage_ce: f64,
    /// Fraction whose mapped rate meets the command-and-control floor.
    pub c2_rate: f64,
}

pub fn coverage_check(sinrs_db: &[f64], params: &DownlinkParams) -> CoverageReport {
    let n = sinrs_db.len().max(1) as f64;
    let frac = |f: &dyn Fn(f64) -> bool| sinrs_db.iter().filter(|&&s| f(s)).count() as f64 / n;
    CoverageReport {
        coverage: frac(&|s| s >= params.sinr_floor_db),
        coverage_ce: frac(&|s| s >= params.sinr_floor_ce_db),
        c2_rate: frac(&|s| attenuated_shannon_bps(s, params.bandwidth_hz) >= params.c2_rate_bps),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltitudeSummary {
    pub altitude: f64,
    pub coupling_gains: Vec<f64>,
    pub sinrs: Vec<f64>,
    pub median_sinr: f64,
    pub median_coupling_gain: f64,
    pub p05_coupling_gain: f64,
    pub p05_sinr: f64,
    pub coverage: CoverageReport,
    pub resource_utilization: f64,
}

/// Coupling-gain and SINR distributions per altitude, pooled over seeds.
pub fn run_dl_analysis(scn: &Scenario, params: &DownlinkParams, seeds: &[u64], min_distance: f64) -> Result<Vec<AltitudeSummary>> {
    params.validate()?;
    if seeds.is_empty() {
        return Err(SimError::config("seeds", "at least one seed is required"));
    }
    params
        .altitudes
        .iter()
        .map(|&alt| {
            let snaps = seeds
                .par_iter()
                .map(|&s| dl_snapshot(scn, params, alt, s, min_distance))
                .collect::<Result<Vec<_>>>()?;
            let cg: Vec<f64> = snaps.iter().flat_map(|s| s.ues.iter().map(|u| u.coupling_gain)).collect();
            let sinr: Vec<f64> = snaps.iter().flat_map(|s| s.ues.iter().map(|u| u.sinr)).collect();
            Ok(AltitudeSummary {
                altitude: alt,
                median_sinr: stats::median(&sinr),
                median_coupling_gain: stats::median(&cg),
                p05_coupling_gain: stats::percentile(&cg, 5.0),
                p05_sinr: stats::percentile(&sinr, 5.0),
                coverage: coverage_check(&sinr, params),
                resource_utilization: params.resource_utilization,
                coupling_gains: cg,
                sinrs: sinr,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(cell: usize, cg: f64) -> LinkState {
        LinkState {
            cell,
            ue: 0,
            d2d: 100.0,
            d3d: 100.0,
            los: true,
            pathloss: -cg,
            shadowing: 0.0,
            antenna_gain: 0.0,
            coupling_gain: cg,
        }
    }

    #[test]
    fn noise_floor_ten_mhz() {
        assert!((noise_dbm(10e6, 9.0) + 95.0).abs() < 1e-9);
    }

    #[test]
    fn single_cell_is_snr() {
        let s = compute_dl_sinr(0, &[link(0, -100.0)], 0.7, 46.0, -95.0);
        assert!((s - 41.0).abs() < 1e-9);
    }

    #[test]
    fn symmetric_pair_tends_to_zero_db() {
        let s = compute_dl_sinr(0, &[link(0, -60.0), link(1, -60.0)], 1.0, 46.0, -95.0);
        assert!(s.abs() < 1e-3);
    }

    #[test]
    fn zero_ru_is_snr() {
        let links = [link(0, -100.0), link(1, -90.0), link(2, -95.0)];
        assert!((compute_dl_sinr(0, &links, 0.0, 46.0, -95.0) - 41.0).abs() < 1e-9);
    }

    #[test]
    fn coverage_thresholds() {
        let p = DownlinkParams::default();
        let r = coverage_check(&[0.0; 10], &p);
        assert_eq!((r.coverage, r.coverage_ce), (1.0, 1.0));
        let r = coverage_check(&[-12.0, -8.0, -4.0, 3.0], &p);
        assert_eq!(r.coverage, 0.5);
        assert_eq!(r.coverage_ce, 0.75);
        assert!(r.coverage_ce >= r.coverage);
    }
}
