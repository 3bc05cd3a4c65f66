//! Interference and mobility experiments for aerial UEs: power-control
//! tuning, orthogonal resource pools, aerial identification from received
//! power patterns, association fragmentation and trajectory handover.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{expected_coupling_gain, link_geometry, ue_links, LinkState};
use crate::deployment::{argmax_cell, drop_ues, DropParams, NetworkLayout, Point2, UeKind};
use crate::downlink::dl_sinr_with_activity;
use crate::error::{Result, SimError};
use crate::rng::{self, Domain};
use crate::scenario::Scenario;
use crate::stats;
use crate::uplink::{run_ul_runs, ul_tx_power, Group, PowerControlConfig, UlRunResult, UplinkParams};

/// Which UEs a swept power-control setting applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PcScope {
    All,
    Aerial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcSweepRow {
    pub p0_dbm: f64,
    pub alpha: f64,
    pub aerial_tput_bps: f64,
    pub terrestrial_tput_bps: f64,
    pub mean_iot_db: f64,
    pub saturated: bool,
    /// Not dominated in (aerial, terrestrial) throughput by another row.
    pub pareto: bool,
}

fn seed_mean(runs: &[UlRunResult], group: Group) -> f64 {
    let k = Group::ALL.iter().position(|&g| g == group).unwrap_or(0);
    let per_seed: Vec<f64> = runs
        .iter()
        .map(|r| stats::mean(&r.throughputs[k]))
        .filter(|x| x.is_finite())
        .collect();
    stats::mean(&per_seed)
}

/// Marks rows whose throughput pair no other row dominates.
pub fn mark_pareto(rows: &mut [PcSweepRow]) {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.aerial_tput_bps, r.terrestrial_tput_bps))
        .collect();
    for (i, r) in rows.iter_mut().enumerate() {
        let (a, t) = pts[i];
        r.pareto = a.is_finite()
            && t.is_finite()
            && !pts.iter().enumerate().any(|(j, &(a2, t2))| {
                j != i && a2 >= a && t2 >= t && (a2 > a || t2 > t)
            });
    }
}

/// Uplink runs at one load and altitude for every `(p0, alpha)` pair.
///
/// `params.offered_loads_bps[0]` and `params.altitudes[0]` fix the traffic
/// point.
pub fn sweep_power_control(
    scn: &Scenario,
    params: &UplinkParams,
    seeds: &[u64],
    scope: PcScope,
    p0_grid: &[f64],
    alpha_grid: &[f64],
) -> Result<Vec<PcSweepRow>> {
    if p0_grid.is_empty() || alpha_grid.is_empty() {
        return Err(SimError::config("pc_sweep", "p0 and alpha grids must be non-empty"));
    }
    let (Some(&load), Some(&alt)) = (params.offered_loads_bps.first(), params.altitudes.first()) else {
        return Err(SimError::config("uplink", "pc_sweep needs one offered load and one altitude"));
    };
    let base = UplinkParams {
        offered_loads_bps: vec![load],
        altitudes: vec![alt],
        ..params.clone()
    };
    let mut rows = Vec::new();
    for &p0 in p0_grid {
        for &alpha in alpha_grid {
            let pc = PowerControlConfig {
                p0_dbm: p0,
                alpha,
                ..base.power_control
            };
            let p = match scope {
                PcScope::All => UplinkParams {
                    power_control: pc,
                    aerial_power_control: None,
                    ..base.clone()
                },
                PcScope::Aerial => UplinkParams {
                    aerial_power_control: Some(pc),
                    ..base.clone()
                },
            };
            let runs = run_ul_runs(scn, &p, seeds)?;
            rows.push(PcSweepRow {
                p0_dbm: p0,
                alpha,
                aerial_tput_bps: seed_mean(&runs, Group::Aerial),
                terrestrial_tput_bps: seed_mean(&runs, Group::Terrestrial),
                mean_iot_db: stats::mean(&runs.iter().map(|r| r.mean_iot_db).collect::<Vec<_>>()),
                saturated: runs.iter().any(|r| r.saturated),
                pareto: false,
            });
        }
    }
    mark_pareto(&mut rows);
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionRow {
    pub aerial_rb_fraction: f64,
    pub aerial_pool_ru: f64,
    pub terrestrial_pool_ru: f64,
    pub aerial_tput_bps: f64,
    pub terrestrial_tput_bps: f64,
    /// Terrestrial minus aerial pool utilisation; positive when the aerial
    /// reservation sits idle more.
    pub ru_gap: f64,
    pub aerial_underutilized: bool,
    /// Mean aerial interference on terrestrial-pool RBs, mW.
    pub aerial_on_terrestrial_mw: f64,
    pub saturated: bool,
}

/// Orthogonal aerial and terrestrial pools at one load and altitude.
pub fn partition_resources(
    scn: &Scenario,
    params: &UplinkParams,
    seeds: &[u64],
    aerial_rb_fraction: f64,
) -> Result<PartitionRow> {
    let (Some(&load), Some(&alt)) = (params.offered_loads_bps.first(), params.altitudes.first()) else {
        return Err(SimError::config("uplink", "partition needs one offered load and one altitude"));
    };
    let p = UplinkParams {
        offered_loads_bps: vec![load],
        altitudes: vec![alt],
        aerial_rb_fraction: Some(aerial_rb_fraction),
        ..params.clone()
    };
    let runs = run_ul_runs(scn, &p, seeds)?;
    let m = |f: &dyn Fn(&UlRunResult) -> f64| stats::mean(&runs.iter().map(f).collect::<Vec<_>>());
    let a_ru = m(&|r| r.pool_ru.0);
    let t_ru = m(&|r| r.pool_ru.1);
    Ok(PartitionRow {
        aerial_rb_fraction,
        aerial_pool_ru: a_ru,
        terrestrial_pool_ru: t_ru,
        aerial_tput_bps: seed_mean(&runs, Group::Aerial),
        terrestrial_tput_bps: seed_mean(&runs, Group::Terrestrial),
        ru_gap: t_ru - a_ru,
        aerial_underutilized: a_ru < t_ru,
        aerial_on_terrestrial_mw: m(&|r| r.aerial_on_terrestrial_mw),
        saturated: runs.iter().any(|r| r.saturated),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AerialClassifierConfig {
    /// Window below the strongest cell, dB.
    pub delta_db: f64,
    pub k_cells: usize,
}

impl AerialClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta_db > 0.0) {
            return Err(SimError::config("aerial_id.delta_db", "must be > 0"));
        }
        if self.k_cells < 2 {
            return Err(SimError::config("aerial_id.k_cells", "must be >= 2"));
        }
        Ok(())
    }
}

/// True when at least `k_cells` cells lie within `delta_db` of the
/// strongest received power.
pub fn classify_aerial(profile_dbm: &[f64], cfg: &AerialClassifierConfig) -> Result<bool> {
    let max = profile_dbm
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if profile_dbm.is_empty() || !max.is_finite() {
        return Err(SimError::domain("received-power profile is empty"));
    }
    let n = profile_dbm.iter().filter(|&&p| p >= max - cfg.delta_db).count();
    Ok(n >= cfg.k_cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub delta_db: f64,
    pub k_cells: usize,
    pub tpr: f64,
    pub fpr: f64,
}

/// Uplink received-power profiles of a mixed drop with labels.
pub fn received_power_profiles(
    scn: &Scenario,
    pc: &PowerControlConfig,
    ues_per_cell: usize,
    aerial_ratio: f64,
    altitude: f64,
    seed: u64,
) -> Result<Vec<(bool, Vec<f64>)>> {
    let drop = DropParams {
        per_cell: ues_per_cell,
        aerial_heights: vec![altitude],
        aerial_ratio,
        ground_height: 1.5,
        min_distance: scn.channel.ledger.pathloss.min_d2d,
    };
    let ues = drop_ues(&scn.layout, &drop, seed, 0)?;
    ues.iter()
        .map(|ue| {
            let gains: Vec<f64> = ue_links(&scn.layout, &scn.pattern, &scn.channel, ue, seed, 0)?
                .into_iter()
                .map(|l| l.coupling_gain)
                .collect();
            let best = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let tx = ul_tx_power(pc, 1, -best);
            Ok((ue.kind == UeKind::Aerial, gains.into_iter().map(|g| tx + g).collect()))
        })
        .collect()
}

/// ROC of the classifier over a `(delta_db, k_cells)` grid.
pub fn aerial_id_roc(
    profiles: &[(bool, Vec<f64>)],
    deltas: &[f64],
    ks: &[usize],
) -> Result<Vec<RocPoint>> {
    let pos = profiles.iter().filter(|p| p.0).count().max(1) as f64;
    let neg = profiles.iter().filter(|p| !p.0).count().max(1) as f64;
    let mut out = Vec::new();
    for &delta_db in deltas {
        for &k_cells in ks {
            let cfg = AerialClassifierConfig { delta_db, k_cells };
            cfg.validate()?;
            let (mut tp, mut fp) = (0usize, 0usize);
            for (label, prof) in profiles {
                if classify_aerial(prof, &cfg)? {
                    if *label {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            out.push(RocPoint {
                delta_db,
                k_cells,
                tpr: tp as f64 / pos,
                fpr: fp as f64 / neg,
            });
        }
    }
    Ok(out)
}

/// Best grid point with `fpr <= max_fpr`, by true-positive rate.
pub fn operating_point(roc: &[RocPoint], max_fpr: f64) -> Option<RocPoint> {
    roc.iter()
        .filter(|p| p.fpr <= max_fpr)
        .copied()
        .max_by(|a, b| a.tpr.total_cmp(&b.tpr).then(b.fpr.total_cmp(&a.fpr)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragmentationResult {
    pub altitude: f64,
    pub raster_step: f64,
    pub min_component_area_m2: f64,
    /// Components of at least the minimum area per cell. A serving cell
    /// always counts its largest component; cells serving no pixel get 0.
    pub components: Vec<usize>,
    /// Every 4-connected component, regardless of size.
    pub raw_components: Vec<usize>,
    /// Mean of `components` over cells that serve at least one pixel.
    pub mean_components: f64,
    pub raw_mean_components: f64,
    /// Component areas per cell in m², largest first.
    pub component_areas: Vec<Vec<f64>>,
    pub pixels: usize,
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Serving-cell map over a square raster of the cluster without shadowing,
/// and the number of connected regions each cell serves.
///
/// Pixels are 4-connected; neighbours that leave the cluster are folded back
/// through the wraparound so regions continue across the cluster edge.
/// Regions below `min_component_area_m2` are sub-raster slivers whose count
/// grows without bound under refinement, so they are left out of
/// `components` but kept in `raw_components`.
pub fn association_fragmentation(
    scn: &Scenario,
    altitude: f64,
    raster_step: f64,
    min_component_area_m2: f64,
) -> Result<FragmentationResult> {
    let layout = &scn.layout;
    let isd = layout.inter_site_distance;
    if !(raster_step > 0.0 && raster_step <= isd / 20.0) {
        return Err(SimError::config(
            "fragmentation.raster_step",
            format!("must lie in (0, {}] m", isd / 20.0),
        ));
    }
    if !(min_component_area_m2 >= 0.0) {
        return Err(SimError::config("fragmentation.min_component_area_m2", "must be >= 0"));
    }
    let extent = layout
        .sites
        .iter()
        .map(|s| s.position.x.abs().max(s.position.y.abs()))
        .fold(0.0, f64::max)
        + layout.hex_radius();
    let n = (2.0 * extent / raster_step).ceil() as usize + 1;
    let origin = -(n as f64 - 1.0) * raster_step / 2.0;
    let at = |i: usize, j: usize| Point2::new(origin + i as f64 * raster_step, origin + j as f64 * raster_step);
    let index = |p: Point2| -> Option<usize> {
        let i = ((p.x - origin) / raster_step).round();
        let j = ((p.y - origin) / raster_step).round();
        (i >= 0.0 && j >= 0.0 && (i as usize) < n && (j as usize) < n).then(|| j as usize * n + i as usize)
    };

    let serving: Vec<Option<usize>> = (0..n * n)
        .into_par_iter()
        .map(|k| {
            let p = at(k % n, k / n);
            if !layout.contains(p) {
                return Ok(None);
            }
            let gains = (0..layout.n_cells())
                .map(|c| expected_coupling_gain(layout, &scn.pattern, &scn.channel, c, p, altitude).map(|g| (c, g)))
                .collect::<Result<Vec<_>>>()?;
            Ok(argmax_cell(gains))
        })
        .collect::<Result<_>>()?;

    let mut ds = DisjointSet::new(n * n);
    for k in 0..n * n {
        let Some(c) = serving[k] else { continue };
        let p = at(k % n, k / n);
        for step in [Point2::new(raster_step, 0.0), Point2::new(0.0, raster_step)] {
            let q = p + step;
            let q = if layout.contains(q) { q } else { layout.fold(q) };
            if let Some(m) = index(q) {
                if serving[m] == Some(c) {
                    ds.union(k, m);
                }
            }
        }
    }
    let mut roots: Vec<Vec<usize>> = vec![Vec::new(); layout.n_cells()];
    let mut pixels = 0;
    for k in 0..n * n {
        if let Some(c) = serving[k] {
            pixels += 1;
            roots[c].push(ds.find(k));
        }
    }
    let component_areas: Vec<Vec<f64>> = roots
        .into_iter()
        .map(|mut r| {
            r.sort_unstable();
            let mut sizes: Vec<f64> = r
                .chunk_by(|a, b| a == b)
                .map(|g| g.len() as f64 * raster_step * raster_step)
                .collect();
            sizes.sort_by(|a, b| b.total_cmp(a));
            sizes
        })
        .collect();
    let raw_components: Vec<usize> = component_areas.iter().map(Vec::len).collect();
    let components: Vec<usize> = component_areas
        .iter()
        .map(|a| match a.len() {
            0 => 0,
            _ => a.iter().filter(|&&x| x >= min_component_area_m2).count().max(1),
        })
        .collect();
    let served_mean = |c: &[usize]| stats::mean(&c.iter().filter(|&&c| c > 0).map(|&c| c as f64).collect::<Vec<_>>());
    Ok(FragmentationResult {
        altitude,
        raster_step,
        min_component_area_m2,
        mean_components: served_mean(&components),
        raw_mean_components: served_mean(&raw_components),
        components,
        raw_components,
        component_areas,
        pixels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandoverConfig {
    pub hysteresis_db: f64,
    pub time_to_trigger_ms: f64,
    pub ue_speed_mps: f64,
    pub altitude: f64,
    pub measurement_period_ms: f64,
    pub ping_pong_window_ms: f64,
}

impl Default for HandoverConfig {
    fn default() -> Self {
        Self {
            hysteresis_db: 3.0,
            time_to_trigger_ms: 160.0,
            ue_speed_mps: 15.0,
            altitude: 120.0,
            measurement_period_ms: 40.0,
            ping_pong_window_ms: 1000.0,
        }
    }
}

impl HandoverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.hysteresis_db >= 0.0) {
            return Err(SimError::config("handover.hysteresis_db", "must be >= 0"));
        }
        if !(self.measurement_period_ms > 0.0) {
            return Err(SimError::config("handover.measurement_period_ms", "must be > 0"));
        }
        let ratio = self.time_to_trigger_ms / self.measurement_period_ms;
        if !(ratio >= 0.0) || (ratio - ratio.round()).abs() > 1e-9 {
            return Err(SimError::config(
                "handover.time_to_trigger_ms",
                "must be a non-negative multiple of the measurement period",
            ));
        }
        if !(self.ue_speed_mps > 0.0) || !(self.altitude > 0.0) {
            return Err(SimError::config("handover.ue_speed_mps", "speed and altitude must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandoverEvent {
    pub time_ms: f64,
    pub from_cell: usize,
    pub to_cell: usize,
    /// Downlink SINR on the new serving cell at the event.
    pub sinr_db: f64,
    pub ping_pong: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandoverTrace {
    pub events: Vec<HandoverEvent>,
    /// Serving cell at every measurement instant.
    pub serving: Vec<usize>,
    pub handovers: usize,
    pub ping_pongs: usize,
}

/// Downlink quantities used to report event-time SINR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrReference {
    pub tx_power_dbm: f64,
    pub noise_dbm: f64,
    pub resource_utilization: f64,
}

/// A3 handovers along a straight path at constant speed and altitude.
///
/// Shadowing follows a per-cell AR(1) process with the ledger's
/// decorrelation distance. Each cell keeps one uniform draw for the whole
/// path, and its link is LOS while that draw stays below the LOS probability.
pub fn simulate_trajectory_handover(
    scn: &Scenario,
    hoc: &HandoverConfig,
    start: Point2,
    end: Point2,
    reference: &SinrReference,
    seed: u64,
) -> Result<HandoverTrace> {
    hoc.validate()?;
    let layout: &NetworkLayout = &scn.layout;
    let ch = &scn.channel;
    let n_cells = layout.n_cells();
    let length = start.dist(end);
    let dt_s = hoc.measurement_period_ms / 1000.0;
    let step_m = hoc.ue_speed_mps * dt_s;
    let n_steps = (length / step_m).floor() as usize + 1;
    let rho = (-step_m / ch.ledger.shadowing.decorrelation_m).exp();
    let innov = (1.0 - rho * rho).sqrt();
    let ttt_steps = (hoc.time_to_trigger_ms / hoc.measurement_period_ms).round() as usize;
    let h = hoc.altitude;

    let mut rngs: Vec<_> = (0..n_cells)
        .map(|c| rng::stream(Domain::Trajectory, &[seed, c as u64]))
        .collect();
    let los_u: Vec<f64> = rngs.iter_mut().map(|r| r.random()).collect();
    let mut z: Vec<f64> = rngs.iter_mut().map(|r| r.sample(StandardNormal)).collect();

    let dir = if length > 0.0 { (end - start) * (1.0 / length) } else { Point2::new(0.0, 0.0) };
    let mut gains = vec![0.0; n_cells];
    let mut serving = 0;
    let mut timers = vec![0usize; n_cells];
    let mut trace = HandoverTrace {
        events: Vec::new(),
        serving: Vec::with_capacity(n_steps),
        handovers: 0,
        ping_pongs: 0,
    };
    let mut last_ho: Option<(f64, usize)> = None;
    for k in 0..n_steps {
        if k > 0 {
            for (c, r) in rngs.iter_mut().enumerate() {
                let e: f64 = r.sample(StandardNormal);
                z[c] = rho * z[c] + innov * e;
            }
        }
        let p = layout.fold(start + dir * (k as f64 * step_m));
        for c in 0..n_cells {
            let g = link_geometry(layout, c, p, h);
            let h_bs = layout.site_of(c).antenna_height;
            let los = los_u[c] < ch.los_probability(g.d2d, h)?;
            let pl = ch.pathloss_at(g.d2d.max(ch.ledger.pathloss.min_d2d), h_bs, h, los)?;
            let sigma = ch.shadowing_sigma(los, h, h_bs);
            gains[c] = scn.pattern.gain(g.theta, g.phi) - pl - sigma * z[c];
        }
        let t_ms = k as f64 * hoc.measurement_period_ms;
        if k == 0 {
            serving = argmax_cell(gains.iter().copied().enumerate()).unwrap_or(0);
        } else {
            for c in 0..n_cells {
                if c != serving && gains[c] > gains[serving] + hoc.hysteresis_db {
                    timers[c] += 1;
                } else {
                    timers[c] = 0;
                }
            }
            let target = argmax_cell(
                (0..n_cells)
                    .filter(|&c| c != serving && timers[c] > ttt_steps)
                    .map(|c| (c, gains[c])),
            );
            if let Some(to) = target {
                let from = serving;
                serving = to;
                timers.iter_mut().for_each(|t| *t = 0);
                let sinr_db = dl_sinr_with_activity(
                    serving,
                    &dl_links(&gains),
                    |_| reference.resource_utilization,
                    reference.tx_power_dbm,
                    reference.noise_dbm,
                );
                let ping_pong = matches!(last_ho, Some((t, prev)) if prev == to && t_ms - t <= hoc.ping_pong_window_ms);
                trace.handovers += 1;
                trace.ping_pongs += usize::from(ping_pong);
                trace.events.push(HandoverEvent {
                    time_ms: t_ms,
                    from_cell: from,
                    to_cell: to,
                    sinr_db,
                    ping_pong,
                });
                last_ho = Some((t_ms, from));
            }
        }
        trace.serving.push(serving);
    }
    Ok(trace)
}

fn dl_links(gains: &[f64]) -> Vec<LinkState> {
    gains
        .iter()
        .enumerate()
        .map(|(cell, &g)| LinkState {
            cell,
            ue: 0,
            d2d: 0.0,
            d3d: 0.0,
            los: true,
            pathloss: 0.0,
            shadowing: 0.0,
            antenna_gain: 0.0,
            coupling_gain: g,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antenna::AntennaArrayConfig;
    use crate::channel::{ChannelModel, LosModel};
    use crate::deployment::{build_layout, build_layout_with};
    use crate::ledger::ModelLedger;

    fn scenario(layout: NetworkLayout) -> Scenario {
        let ch = ChannelModel::new(ModelLedger::default(), LosModel::RmaAerial, 0.7).unwrap();
        Scenario::new(layout, &AntennaArrayConfig::default(), ch).unwrap()
    }

    fn reference() -> SinrReference {
        SinrReference {
            tx_power_dbm: 46.0,
            noise_dbm: -95.0,
            resource_utilization: 0.2,
        }
    }

    #[test]
    fn classifier_examples() {
        let cfg = AerialClassifierConfig { delta_db: 6.0, k_cells: 4 };
        let mut one = vec![-130.0; 20];
        one[3] = -100.0;
        assert!(!classify_aerial(&one, &cfg).unwrap());
        let mut six = vec![-130.0; 20];
        for (i, v) in six.iter_mut().take(6).enumerate() {
            *v = -100.0 - 0.5 * i as f64;
        }
        assert!(classify_aerial(&six, &cfg).unwrap());
        assert!(classify_aerial(&[], &cfg).is_err());
    }

    #[test]
    fn classifier_config_limits() {
        assert!(AerialClassifierConfig { delta_db: 0.0, k_cells: 4 }.validate().is_err());
        assert!(AerialClassifierConfig { delta_db: 3.0, k_cells: 1 }.validate().is_err());
    }

    #[test]
    fn pareto_front() {
        let row = |a: f64, t: f64| PcSweepRow {
            p0_dbm: 0.0,
            alpha: 0.0,
            aerial_tput_bps: a,
            terrestrial_tput_bps: t,
            mean_iot_db: 0.0,
            saturated: false,
            pareto: false,
        };
        let mut rows = vec![row(1.0, 5.0), row(2.0, 4.0), row(1.5, 3.0), row(2.0, 4.0)];
        mark_pareto(&mut rows);
        let front: Vec<bool> = rows.iter().map(|r| r.pareto).collect();
        assert_eq!(front, vec![true, true, false, true]);
    }

    #[test]
    fn single_cell_never_hands_over() {
        let scn = scenario(build_layout_with(1732.0, 1, 35.0, 1).unwrap());
        let t = simulate_trajectory_handover(
            &scn,
            &HandoverConfig::default(),
            Point2::new(-800.0, 0.0),
            Point2::new(800.0, 0.0),
            &reference(),
            1,
        )
        .unwrap();
        assert_eq!(t.handovers, 0);
    }

    #[test]
    fn infinite_hysteresis_never_hands_over() {
        let scn = scenario(build_layout(1732.0, 7, 35.0).unwrap());
        let hoc = HandoverConfig {
            hysteresis_db: 1e9,
            ..Default::default()
        };
        let t = simulate_trajectory_handover(&scn, &hoc, Point2::new(-2500.0, 0.0), Point2::new(2500.0, 0.0), &reference(), 3)
            .unwrap();
        assert_eq!(t.handovers, 0);
    }

    #[test]
    fn trace_transitions_match_events() {
        let scn = scenario(build_layout(1732.0, 7, 35.0).unwrap());
        let hoc = HandoverConfig {
            altitude: 1.5,
            ..Default::default()
        };
        let t = simulate_trajectory_handover(&scn, &hoc, Point2::new(-2500.0, -300.0), Point2::new(2500.0, 400.0), &reference(), 5)
            .unwrap();
        let transitions = t.serving.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(transitions, t.events.len());
        assert!(t.handovers > 0);
    }

    #[test]
    fn ttt_must_be_period_multiple() {
        let hoc = HandoverConfig {
            time_to_trigger_ms: 100.0,
            ..Default::default()
        };
        assert!(hoc.validate().is_err());
    }

    #[test]
    fn fragmentation_rejects_coarse_raster() {
        let scn = scenario(build_layout(1732.0, 7, 35.0).unwrap());
        assert!(association_fragmentation(&scn, 1.5, 200.0, 1e4).is_err());
    }
}
