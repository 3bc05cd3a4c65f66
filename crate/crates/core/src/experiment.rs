//! Experiment dispatch: turns a validated configuration into result tables
//! and writes them with a metadata record.
//!
//! Every table is computed before anything touches the output directory,
//! and rows are emitted in a canonical order so identical inputs give
//! identical bytes regardless of the worker count.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::config::{RunConfig, SyntheticKind, SyntheticTerrain};
use crate::downlink::run_dl_analysis;
use crate::enhancements::{
    aerial_id_roc, association_fragmentation, operating_point, partition_resources, received_power_profiles,
    simulate_trajectory_handover, sweep_power_control, HandoverConfig, SinrReference,
};
use crate::error::{Result, SimError};
use crate::output::{write_results, Manifest, Table, Value, MANIFEST_FILE};
use crate::stats;
use crate::terrain::{estimate_los_curve, load_heightmap, log_bins, synthetic, Heightmap};
use crate::uplink::{run_ul_runs, summarize_runs, UplinkParams};

pub const METADATA_FILE: &str = "metadata.json";

/// Points kept per empirical CDF in `dl_cdf.csv`.
const CDF_POINTS: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    DlCdf,
    UlSweep,
    PcSweep,
    Partition,
    LosCurve,
    PathlossCurves,
    Fragmentation,
    Handover,
    AerialId,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::DlCdf,
        Experiment::UlSweep,
        Experiment::PcSweep,
        Experiment::Partition,
        Experiment::LosCurve,
        Experiment::PathlossCurves,
        Experiment::Fragmentation,
        Experiment::Handover,
        Experiment::AerialId,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::DlCdf => "dl_cdf",
            Experiment::UlSweep => "ul_sweep",
            Experiment::PcSweep => "pc_sweep",
            Experiment::Partition => "partition",
            Experiment::LosCurve => "los_curve",
            Experiment::PathlossCurves => "pathloss_curves",
            Experiment::Fragmentation => "fragmentation",
            Experiment::Handover => "handover",
            Experiment::AerialId => "aerial_id",
        }
    }

    /// Config sections the experiment reads besides layout, antenna and channel.
    pub fn required_sections(self) -> &'static [&'static str] {
        match self {
            Experiment::DlCdf => &["downlink"],
            Experiment::UlSweep => &["uplink"],
            Experiment::PcSweep => &["uplink", "pc_sweep"],
            Experiment::Partition => &["uplink", "partition"],
            Experiment::LosCurve => &["terrain"],
            Experiment::PathlossCurves => &["pathloss_curves"],
            Experiment::Fragmentation => &["fragmentation"],
            Experiment::Handover => &["downlink", "handover"],
            Experiment::AerialId => &["uplink", "aerial_id"],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
                SimError::config("experiment", format!("unknown experiment {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

fn section_present(cfg: &RunConfig, name: &str) -> bool {
    match name {
        "downlink" => cfg.downlink.is_some(),
        "uplink" => cfg.uplink.is_some(),
        "pc_sweep" => cfg.pc_sweep.is_some(),
        "partition" => cfg.partition.is_some(),
        "aerial_id" => cfg.aerial_id.is_some(),
        "fragmentation" => cfg.fragmentation.is_some(),
        "handover" => cfg.handover.is_some(),
        "terrain" => cfg.terrain.is_some(),
        "pathloss_curves" => cfg.pathloss_curves.is_some(),
        _ => false,
    }
}

/// Checks everything an experiment needs without computing anything.
pub fn check_requirements(cfg: &RunConfig, exp: Experiment) -> Result<()> {
    cfg.validate()?;
    for s in exp.required_sections() {
        if !section_present(cfg, s) {
            return Err(SimError::config(*s, format!("section required by {exp} is missing")));
        }
    }
    if exp == Experiment::LosCurve {
        if let Some(t) = &cfg.terrain {
            if t.heightmap.is_none() && t.synthetic.is_none() {
                return Err(SimError::config("terrain.heightmap", "los_curve needs a heightmap or a synthetic terrain"));
            }
        }
    }
    cfg.channel_model()?;
    Ok(())
}

/// Computes an experiment's tables. Nothing is written.
pub fn compute(cfg: &RunConfig, exp: Experiment) -> Result<Vec<Table>> {
    check_requirements(cfg, exp)?;
    let run = || -> Result<Vec<Table>> {
        match exp {
            Experiment::DlCdf => dl_cdf(cfg),
            Experiment::UlSweep => ul_sweep(cfg),
            Experiment::PcSweep => pc_sweep(cfg),
            Experiment::Partition => partition(cfg),
            Experiment::LosCurve => los_curve(cfg),
            Experiment::PathlossCurves => pathloss_curves(cfg),
            Experiment::Fragmentation => fragmentation(cfg),
            Experiment::Handover => handover(cfg),
            Experiment::AerialId => aerial_id(cfg),
        }
    };
    run().map_err(|e| e.with_context(format!("experiment {exp}")))
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub experiment: Experiment,
    pub scenario: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub version: String,
    pub wall_time_s: f64,
    pub workers: usize,
    /// Largest jump between the rural-macro and free-space pathloss at the
    /// BS height over the evaluated distances, dB.
    pub altitude_seam_db: f64,
    /// The seam exceeds the ledger tolerance.
    pub seam_flagged: bool,
    pub files: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub manifest: Manifest,
    pub metadata: Metadata,
    pub out_dir: PathBuf,
}

/// Largest branch seam over log-spaced distances for both LOS states.
pub fn altitude_seam(cfg: &RunConfig) -> Result<(f64, bool)> {
    let ch = cfg.channel_model()?;
    let lim = &ch.ledger.pathloss;
    let mut worst: f64 = 0.0;
    for d in log_bins(lim.min_d2d, lim.max_d2d, 60) {
        let d = d.clamp(lim.min_d2d, lim.max_d2d);
        for los in [true, false] {
            worst = worst.max(ch.altitude_seam_db(d, cfg.layout.bs_height_m, cfg.channel.carrier_ghz, los)?);
        }
    }
    Ok((worst, worst > lim.seam_tolerance_db))
}

/// Computes an experiment and writes its CSVs, manifest and metadata into
/// `out_dir`. On failure no output file of this run is left behind.
pub fn run_experiment(cfg: &RunConfig, exp: Experiment, out_dir: &Path) -> Result<RunReport> {
    let t0 = Instant::now();
    let tables = compute(cfg, exp)?;
    let (seam, flagged) = altitude_seam(cfg)?;
    let manifest = write_results(&tables, out_dir).map_err(|e| e.with_context(format!("writing {exp} results")))?;
    let metadata = Metadata {
        experiment: exp,
        scenario: cfg.scenario.clone(),
        config_hash: cfg.hash()?,
        seeds: cfg.seeds.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: t0.elapsed().as_secs_f64(),
        workers: rayon::current_num_threads(),
        altitude_seam_db: seam,
        seam_flagged: flagged,
        files: manifest.files.iter().map(|f| f.file.clone()).collect(),
    };
    let path = out_dir.join(METADATA_FILE);
    let written = serde_json::to_string_pretty(&metadata)
        .map_err(|e| SimError::Runtime(format!("serializing metadata: {e}")))
        .and_then(|json| std::fs::write(&path, json + "\n").map_err(|e| SimError::io(&path, e)));
    if let Err(e) = written {
        for f in &manifest.files {
            let _ = std::fs::remove_file(out_dir.join(&f.file));
        }
        let _ = std::fs::remove_file(out_dir.join(MANIFEST_FILE));
        return Err(e);
    }
    Ok(RunReport {
        manifest,
        metadata,
        out_dir: out_dir.to_path_buf(),
    })
}

fn v(x: impl Into<Value>) -> Value {
    x.into()
}

fn dl_cdf(cfg: &RunConfig) -> Result<Vec<Table>> {
    let scn = cfg.scenario()?;
    let params = cfg.downlink()?;
    let sums = run_dl_analysis(&scn, params, &cfg.seeds, cfg.layout.min_ue_distance_m)?;
    let mut cdf = Table::new("dl_cdf", &["altitude_m", "metric", "x_value", "cdf"]);
    let mut summary = Table::new(
        "dl_summary",
        &[
            "altitude_m",
            "n_ues",
            "median_sinr_db",
            "p05_sinr_db",
            "median_cg_db",
            "p05_cg_db",
            "coverage_m6",
            "coverage_m10",
            "c2_rate",
            "ru",
        ],
    );
    for s in &sums {
        for (metric, values) in [("sinr_db", &s.sinrs), ("coupling_gain_db", &s.coupling_gains)] {
            for (x, f) in stats::ecdf_thinned(values, CDF_POINTS) {
                cdf.push(vec![v(s.altitude), v(metric), v(x), v(f)]);
            }
        }
        summary.push(vec![
            v(s.altitude),
            v(s.sinrs.len()),
            v(s.median_sinr),
            v(s.p05_sinr),
            v(s.median_coupling_gain),
            v(s.p05_coupling_gain),
            v(s.coverage.coverage),
            v(s.coverage.coverage_ce),
            v(s.coverage.c2_rate),
            v(s.resource_utilization),
        ]);
    }
    Ok(vec![cdf, summary])
}

fn ul_sweep(cfg: &RunConfig) -> Result<Vec<Table>> {
    let scn = cfg.scenario()?;
    let params = cfg.uplink()?;
    let runs = run_ul_runs(&scn, params, &cfg.seeds)?;
    let mut sweep = Table::new(
        "ul_sweep",
        &[
            "offered_load_bps",
            "altitude_m",
            "group",
            "mean_ru",
            "mean_tput_bps",
            "p05_tput_bps",
            "saturated",
            "mean_iot_db",
        ],
    );
    for r in summarize_runs(&runs) {
        sweep.push(vec![
            v(r.offered_load_bps),
            v(r.altitude),
            v(r.group.name()),
            v(r.mean_ru),
            v(r.mean_tput_bps),
            v(r.p05_tput_bps),
            v(r.saturated),
            v(r.mean_iot_db),
        ]);
    }
    let mut per_run = Table::new(
        "ul_runs",
        &[
            "offered_load_bps",
            "altitude_m",
            "seed",
            "ru_all",
            "ru_aerial",
            "ru_terrestrial",
            "files_arrived",
            "files_completed",
            "saturated",
            "mean_iot_db",
        ],
    );
    for r in &runs {
        per_run.push(vec![
            v(r.offered_load_bps),
            v(r.altitude),
            v(r.seed),
            v(r.ru[0]),
            v(r.ru[1]),
            v(r.ru[2]),
            v(r.files_arrived),
            v(r.files_completed),
            v(r.saturated),
            v(r.mean_iot_db),
        ]);
    }
    Ok(vec![sweep, per_run])
}

/// Uplink parameters pinned to one load and one altitude.
fn pinned_uplink(cfg: &RunConfig, load: f64, altitude: f64) -> Result<UplinkParams> {
    let p = UplinkParams {
        offered_loads_bps: vec![load],
        altitudes: vec![altitude],
        ..cfg.uplink()?.clone()
    };
    p.validate()?;
    Ok(p)
}

fn pc_sweep(cfg: &RunConfig) -> Result<Vec<Table>> {
    let scn = cfg.scenario()?;
    let pc = cfg.pc_sweep.as_ref().ok_or_else(|| SimError::config("pc_sweep", "missing"))?;
    let params = pinned_uplink(cfg, pc.offered_load_bps, pc.altitude_m)?;
    let rows = sweep_power_control(&scn, &params, &cfg.seeds, pc.scope, &pc.p0_grid_dbm, &pc.alpha_grid)?;
    let mut t = Table::new(
        "pc_sweep",
        &[
            "p0_dbm",
            "alpha",
            "aerial_tput_bps",
            "terrestrial_tput_bps",
            "mean_iot_db",
            "saturated",
            "pareto",
        ],
    );
    for r in rows {
        t.push(vec![
            v(r.p0_dbm),
            v(r.alpha),
            v(r.aerial_tput_bps),
            v(r.terrestrial_tput_bps),
            v(r.mean_iot_db),
            v(r.saturated),
            v(r.pareto),
        ]);
    }
    Ok(vec![t])
}

fn partition(cfg: &RunConfig) -> Result<Vec<Table>> {
    let scn = cfg.scenario()?;
    let pc = cfg.partition.as_ref().ok_or_else(|| SimError::config("partition", "missing"))?;
    let params = pinned_uplink(cfg, pc.offered_load_bps, pc.altitude_m)?;
    let mut t = Table::new(
        "partition",
        &[
            "aerial_rb_fraction",
            "aerial_pool_ru",
            "terrestrial_pool_ru",
            "aerial_tput_bps",
            "terrestrial_tput_bps",
            "ru_gap",
            "aerial_underutilized",
            "aerial_on_terrestrial_mw",
            "saturated",
        ],
    );
    for &f in &pc.fractions {
        let r = partition_resources(&scn, &params, &cfg.seeds, f)?;
        t.push(vec![
            v(r.aerial_rb_fraction),
            v(r.aerial_pool_ru),
            v(r.terrestrial_pool_ru),
            v(r.aerial_tput_bps),
            v(r.terrestrial_tput_bps),
            v(r.ru_gap),
            v(r.aerial_underutilized),
            v(r.aerial_on_terrestrial_mw),
            v(r.saturated),
        ]);
    }
    Ok(vec![t])
}

fn synthetic_map(s: &SyntheticTerrain, seed: u64) -> Result<Heightmap> {
    match s.kind {
        SyntheticKind::Flat => synthetic::flat(s.size_m, s.cell_m),
        SyntheticKind::ParallelWalls => synthetic::parallel_walls(s.size_m, s.cell_m, s.a_m, s.b_m, s.height_m),
        SyntheticKind::RingRidge => synthetic::ring_ridge(s.size_m, s.cell_m, s.a_m, s.b_m, s.height_m),
        SyntheticKind::RollingHills => synthetic::rolling_hills(s.size_m, s.cell_m, s.height_m, seed),
    }
}

fn los_curve(cfg: &RunConfig) -> Result<Vec<Table>> {
    let t = cfg.terrain.as_ref().ok_or_else(|| SimError::config("terrain", "missing"))?;
    let seed = cfg.seeds[0];
    let map = match (&t.heightmap, &t.synthetic, t.format) {
        (Some(p), _, Some(fmt)) => load_heightmap(&cfg.resolve(p), fmt)?,
        (None, Some(s), _) => synthetic_map(s, seed)?,
        _ => return Err(SimError::config("terrain.heightmap", "los_curve needs a heightmap or a synthetic terrain")),
    };
    let res = estimate_los_curve(&map, &t.curve_params()?, seed)?;
    let mut curve = Table::new("los_curve", &["ue_height_m", "d2d_bin_m", "p_los", "n_samples"]);
    for [h, d, p, n] in res.table.csv_rows() {
        curve.push(vec![v(h), v(d), v(p), v(n as u64)]);
    }
    let mut fitted = Table::new("los_curve_monotone", &["ue_height_m", "d2d_bin_m", "p_los"]);
    for (hi, &h) in res.table.ue_heights.iter().enumerate() {
        for k in 0..res.table.n_bins() {
            let p = res.table.monotone[hi][k].unwrap_or(f64::NAN);
            fitted.push(vec![v(h), v(res.table.bin_center(k)), v(p)]);
        }
    }
    let mut sites = Table::new("los_sites", &["site", "x_m", "y_m"]);
    for (i, s) in res.sites.iter().enumerate() {
        sites.push(vec![v(i), v(s.x), v(s.y)]);
    }
    Ok(vec![curve, fitted, sites])
}

fn pathloss_curves(cfg: &RunConfig) -> Result<Vec<Table>> {
    let pc = cfg
        .pathloss_curves
        .as_ref()
        .ok_or_else(|| SimError::config("pathloss_curves", "missing"))?;
    if pc.points < 2 || !(pc.d2d_min_m > 0.0 && pc.d2d_max_m > pc.d2d_min_m) {
        return Err(SimError::config(
            "pathloss_curves.points",
            "need points >= 2 and 0 < d2d_min_m < d2d_max_m",
        ));
    }
    let ch = cfg.channel_model()?;
    let h_bs = cfg.layout.bs_height_m;
    let fc = cfg.channel.carrier_ghz;
    let distances: Vec<f64> = log_bins(pc.d2d_min_m, pc.d2d_max_m, pc.points - 1)
        .into_iter()
        .map(|d| d.clamp(pc.d2d_min_m, pc.d2d_max_m))
        .collect();
    let mut t = Table::new(
        "pathloss_curves",
        &["ue_height_m", "d2d_m", "pl_los_db", "pl_nlos_db", "fspl_db", "p_los"],
    );
    for &h in &pc.ue_heights {
        for [d, los, nlos, fs] in crate::channel::generate_pathloss_curves(&ch, h_bs, h, fc, &distances)? {
            t.push(vec![v(h), v(d), v(los), v(nlos), v(fs), v(ch.los_probability(d, h)?)]);
        }
    }
    let mut seam = Table::new("pathloss_seam", &["d2d_m", "seam_los_db", "seam_nlos_db"]);
    for &d in &distances {
        seam.push(vec![
            v(d),
            v(ch.altitude_seam_db(d, h_bs, fc, true)?),
            v(ch.altitude_seam_db(d, h_bs, fc, false)?),
        ]);
    }
    Ok(vec![t, seam])
}

fn fragmentation(cfg: &RunConfig) -> Result<Vec<Table>> {
    let scn = cfg.scenario()?;
    let fc = cfg
        .fragmentation
        .as_ref()
        .ok_or_else(|| SimError::config("fragmentation", "missing"))?;
    let mut cells = Table::new(
        "fragmentation",
        &["altitude_m", "raster_step_m", "cell", "components", "raw_components", "largest_area_m2"],
    );
    let mut summary = Table::new(
        "fragmentation_summary",
        &[
            "altitude_m",
            "raster_step_m",
            "mean_components",
            "raw_mean_components",
            "relative_change_on_refinement",
        ],
    );
    for &alt in &fc.altitudes {
        let coarse = association_fragmentation(&scn, alt, fc.raster_step_m, fc.min_component_area_m2)?;
        let fine = association_fragmentation(&scn, alt, fc.raster_step_m / 2.0, fc.min_component_area_m2)?;
        let change = (fine.mean_components - coarse.mean_components).abs() / coarse.mean_components.max(f64::MIN_POSITIVE);
        for r in [&coarse, &fine] {
            for (c, (&n, &raw)) in r.components.iter().zip(&r.raw_components).enumerate() {
                let largest = r.component_areas[c].first().copied().unwrap_or(0.0);
                cells.push(vec![v(alt), v(r.raster_step), v(c), v(n), v(raw), v(largest)]);
            }
            summary.push(vec![
                v(alt),
                v(r.raster_step),
                v(r.mean_components),
                v(r.raw_mean_components),
                v(change),
            ]);
        }
    }
    Ok(vec![cells, summary])
}

fn handover(cfg: &RunConfig) -> Result<Vec<Table>> {
    let scn = cfg.scenario()?;
    let hs = cfg.handover.as_ref().ok_or_else(|| SimError::config("handover", "missing"))?;
    let dl = cfg.downlink()?;
    let reference = SinrReference {
        tx_power_dbm: dl.tx_power_dbm,
        noise_dbm: dl.noise_dbm(),
        resource_utilization: dl.resource_utilization,
    };
    let mut events = Table::new(
        "handover_events",
        &["altitude_m", "seed", "event_time_ms", "from_cell", "to_cell", "sinr_db", "ping_pong"],
    );
    let mut summary = Table::new(
        "handover_summary",
        &["altitude_m", "seed", "path_length_m", "handovers", "ping_pongs", "handovers_per_km"],
    );
    for &alt in &hs.altitudes {
        let hoc = HandoverConfig {
            hysteresis_db: hs.hysteresis_db,
            time_to_trigger_ms: hs.time_to_trigger_ms,
            ue_speed_mps: hs.ue_speed_mps,
            altitude: alt,
            measurement_period_ms: hs.measurement_period_ms,
            ping_pong_window_ms: hs.ping_pong_window_ms,
        };
        let traces = run_seeds(&cfg.seeds, |seed| {
            simulate_trajectory_handover(&scn, &hoc, hs.start(), hs.end(), &reference, seed)
        })?;
        let length = hs.start().dist(hs.end());
        for (&seed, tr) in cfg.seeds.iter().zip(&traces) {
            for e in &tr.events {
                events.push(vec![
                    v(alt),
                    v(seed),
                    v(e.time_ms),
                    v(e.from_cell),
                    v(e.to_cell),
                    v(e.sinr_db),
                    v(e.ping_pong),
                ]);
            }
            summary.push(vec![
                v(alt),
                v(seed),
                v(length),
                v(tr.handovers),
                v(tr.ping_pongs),
                v(tr.handovers as f64 / (length / 1000.0)),
            ]);
        }
    }
    Ok(vec![events, summary])
}

fn aerial_id(cfg: &RunConfig) -> Result<Vec<Table>> {
    let scn = cfg.scenario()?;
    let a = cfg.aerial_id.as_ref().ok_or_else(|| SimError::config("aerial_id", "missing"))?;
    let pc = cfg.uplink()?.power_control;
    let per_seed = run_seeds(&cfg.seeds, |seed| {
        received_power_profiles(&scn, &pc, a.ues_per_cell, a.aerial_ratio, a.altitude_m, seed)
    })?;
    let profiles: Vec<(bool, Vec<f64>)> = per_seed.into_iter().flatten().collect();
    let roc = aerial_id_roc(&profiles, &a.delta_grid_db, &a.k_grid)?;
    let mut t = Table::new("roc", &["delta_db", "k_cells", "tpr", "fpr"]);
    for p in &roc {
        t.push(vec![v(p.delta_db), v(p.k_cells), v(p.tpr), v(p.fpr)]);
    }
    let mut op = Table::new("roc_operating_point", &["max_fpr", "delta_db", "k_cells", "tpr", "fpr"]);
    if let Some(p) = operating_point(&roc, a.max_fpr) {
        op.push(vec![v(a.max_fpr), v(p.delta_db), v(p.k_cells), v(p.tpr), v(p.fpr)]);
    }
    Ok(vec![t, op])
}

/// Runs `f` for every seed on the worker pool, results in seed-list order.
fn run_seeds<T: Send>(seeds: &[u64], f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    use rayon::prelude::*;
    seeds.par_iter().map(|&s| f(s)).collect()
}
