//! Run configuration: one TOML file holding every tunable the experiments
//! consume. Channel constants live in the model ledger instead.
//!
//! Parsing is strict. Unknown keys are rejected, every missing required key
//! is reported at once, and cross-field constraints are checked before any
//! computation starts.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::antenna::AntennaArrayConfig;
use crate::channel::{ChannelModel, LosModel};
use crate::deployment::{build_layout_with, NetworkLayout, Point2};
use crate::downlink::DownlinkParams;
use crate::enhancements::{AerialClassifierConfig, PcScope};
use crate::error::{Result, SimError};
use crate::ledger::ModelLedger;
use crate::scenario::Scenario;
use crate::terrain::{log_bins, HeightmapFormat, LosCurveParams, LosCurveTable};
use crate::uplink::UplinkParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutConfig {
    pub isd_m: f64,
    pub n_sites: usize,
    pub cells_per_site: usize,
    pub bs_height_m: f64,
    /// UEs closer than this to their dropping site are redrawn.
    pub min_ue_distance_m: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            isd_m: 1732.0,
            n_sites: 37,
            cells_per_site: 3,
            bs_height_m: 35.0,
            min_ue_distance_m: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub los_model: LosModel,
    pub carrier_ghz: f64,
    /// Ledger file; the shipped ledger when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ledger: Option<PathBuf>,
    /// Curve table for `terrain_empirical`, as written by `los_curve`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub los_table: Option<PathBuf>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            los_model: LosModel::RmaAerial,
            carrier_ghz: 0.7,
            ledger: None,
            los_table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcSweepConfig {
    pub scope: PcScope,
    pub offered_load_bps: f64,
    pub altitude_m: f64,
    pub p0_grid_dbm: Vec<f64>,
    pub alpha_grid: Vec<f64>,
}

impl Default for PcSweepConfig {
    fn default() -> Self {
        Self {
            scope: PcScope::Aerial,
            offered_load_bps: 4e6,
            altitude_m: 120.0,
            p0_grid_dbm: vec![-96.0, -93.0, -90.0],
            alpha_grid: vec![0.6, 0.8, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub offered_load_bps: f64,
    pub altitude_m: f64,
    pub fractions: Vec<f64>,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            offered_load_bps: 4e6,
            altitude_m: 120.0,
            fractions: vec![0.05, 0.1, 0.2, 0.3, 0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AerialIdConfig {
    pub altitude_m: f64,
    pub aerial_ratio: f64,
    pub ues_per_cell: usize,
    pub delta_grid_db: Vec<f64>,
    pub k_grid: Vec<usize>,
    /// False-positive budget for the reported operating point.
    pub max_fpr: f64,
}

impl Default for AerialIdConfig {
    fn default() -> Self {
        Self {
            altitude_m: 120.0,
            aerial_ratio: 0.1,
            ues_per_cell: 10,
            delta_grid_db: vec![3.0, 6.0, 9.0, 12.0, 15.0, 20.0, 25.0, 30.0],
            k_grid: vec![2, 3, 4, 6, 8, 12, 16, 24, 32, 40, 48],
            max_fpr: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FragmentationConfig {
    pub altitudes: Vec<f64>,
    pub raster_step_m: f64,
    pub min_component_area_m2: f64,
}

impl Default for FragmentationConfig {
    fn default() -> Self {
        Self {
            altitudes: vec![1.5, 40.0, 120.0],
            raster_step_m: 1732.0 / 40.0,
            min_component_area_m2: 1e4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandoverSection {
    pub altitudes: Vec<f64>,
    pub hysteresis_db: f64,
    pub time_to_trigger_ms: f64,
    pub ue_speed_mps: f64,
    pub measurement_period_ms: f64,
    pub ping_pong_window_ms: f64,
    pub path_start_m: [f64; 2],
    pub path_end_m: [f64; 2],
}

impl Default for HandoverSection {
    fn default() -> Self {
        Self {
            altitudes: vec![1.5, 120.0],
            hysteresis_db: 3.0,
            time_to_trigger_ms: 160.0,
            ue_speed_mps: 15.0,
            measurement_period_ms: 40.0,
            ping_pong_window_ms: 1000.0,
            path_start_m: [-5000.0, 200.0],
            path_end_m: [5000.0, 200.0],
        }
    }
}

impl HandoverSection {
    pub fn start(&self) -> Point2 {
        Point2::new(self.path_start_m[0], self.path_start_m[1])
    }

    pub fn end(&self) -> Point2 {
        Point2::new(self.path_end_m[0], self.path_end_m[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    Flat,
    ParallelWalls,
    RingRidge,
    RollingHills,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTerrain {
    pub kind: SyntheticKind,
    pub size_m: f64,
    pub cell_m: f64,
    /// Wall pitch, ridge inner radius or unused, by kind.
    #[serde(default)]
    pub a_m: f64,
    /// Wall width, ridge outer radius or unused, by kind.
    #[serde(default)]
    pub b_m: f64,
    /// Feature height or hill amplitude.
    #[serde(default)]
    pub height_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerrainConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heightmap: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<HeightmapFormat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticTerrain>,
    pub n_bs_drops: usize,
    /// BS mast height above local ground.
    pub bs_height_agl: f64,
    pub ue_heights: Vec<f64>,
    /// Log-spaced distance bin edges from `d2d_min_m` to `d2d_max_m`.
    pub d2d_min_m: f64,
    pub d2d_max_m: f64,
    pub n_bins: usize,
    pub ues_per_bin: usize,
    pub building_threshold: f64,
    pub median_half_window: usize,
}

impl Default for TerrainConfig {
    fn default() -> Self {
        Self {
            heightmap: None,
            format: None,
            synthetic: None,
            n_bs_drops: 20,
            bs_height_agl: 35.0,
            ue_heights: vec![1.5, 10.0, 30.0, 50.0, 100.0],
            d2d_min_m: 10.0,
            d2d_max_m: 35_000.0,
            n_bins: 46,
            ues_per_bin: 50,
            building_threshold: 3.0,
            median_half_window: 10,
        }
    }
}

impl TerrainConfig {
    pub fn curve_params(&self) -> Result<LosCurveParams> {
        if !(self.d2d_min_m > 0.0 && self.d2d_max_m > self.d2d_min_m) || self.n_bins == 0 {
            return Err(SimError::config("terrain.d2d_min_m", "need 0 < d2d_min_m < d2d_max_m and n_bins >= 1"));
        }
        Ok(LosCurveParams {
            n_bs_drops: self.n_bs_drops,
            bs_height_agl: self.bs_height_agl,
            ue_heights: self.ue_heights.clone(),
            distance_bins: log_bins(self.d2d_min_m, self.d2d_max_m, self.n_bins),
            ues_per_bin: self.ues_per_bin,
            building_threshold: self.building_threshold,
            median_half_window: self.median_half_window,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathlossCurvesConfig {
    pub ue_heights: Vec<f64>,
    pub d2d_min_m: f64,
    pub d2d_max_m: f64,
    pub points: usize,
}

impl Default for PathlossCurvesConfig {
    fn default() -> Self {
        Self {
            ue_heights: vec![1.5, 10.0, 22.5, 40.0, 120.0],
            d2d_min_m: 10.0,
            d2d_max_m: 10_000.0,
            points: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    /// Explicit seed list; never generated implicitly.
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub layout: LayoutConfig,
    pub antenna: AntennaArrayConfig,
    pub channel: ChannelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub downlink: Option<DownlinkParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uplink: Option<UplinkParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pc_sweep: Option<PcSweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aerial_id: Option<AerialIdConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fragmentation: Option<FragmentationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub handover: Option<HandoverSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terrain: Option<TerrainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pathloss_curves: Option<PathlossCurvesConfig>,
    /// Directory relative paths resolve against; not part of the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    /// Every section filled with its documented default.
    pub fn baseline() -> Self {
        Self {
            scenario: "baseline".into(),
            seeds: (1..=10).collect(),
            output_dir: None,
            layout: LayoutConfig::default(),
            antenna: AntennaArrayConfig::default(),
            channel: ChannelConfig::default(),
            downlink: Some(DownlinkParams::default()),
            uplink: Some(UplinkParams::default()),
            pc_sweep: Some(PcSweepConfig::default()),
            partition: Some(PartitionConfig::default()),
            aerial_id: Some(AerialIdConfig::default()),
            fragmentation: Some(FragmentationConfig::default()),
            handover: Some(HandoverSection::default()),
            terrain: Some(TerrainConfig::default()),
            pathloss_curves: Some(PathlossCurvesConfig::default()),
            base_dir: PathBuf::new(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| SimError::Runtime(format!("serializing config: {e}")))
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn ledger(&self) -> Result<ModelLedger> {
        match &self.channel.ledger {
            Some(p) => ModelLedger::load(&self.resolve(p)),
            None => Ok(ModelLedger::default()),
        }
    }

    pub fn layout(&self) -> Result<NetworkLayout> {
        let l = &self.layout;
        build_layout_with(l.isd_m, l.n_sites, l.bs_height_m, l.cells_per_site)
    }

    pub fn channel_model(&self) -> Result<ChannelModel> {
        let ledger = self.ledger()?;
        match self.channel.los_model {
            LosModel::TerrainEmpirical => {
                let path = self.channel.los_table.as_ref().ok_or_else(|| {
                    SimError::config("channel.los_table", "required by los_model = terrain_empirical")
                })?;
                let table = LosCurveTable::read_csv(&self.resolve(path))?;
                ChannelModel::with_terrain(ledger, Arc::new(table), self.channel.carrier_ghz)
            }
            m => ChannelModel::new(ledger, m, self.channel.carrier_ghz),
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Scenario::new(self.layout()?, &self.antenna, self.channel_model()?)
    }

    pub fn downlink(&self) -> Result<&DownlinkParams> {
        self.downlink.as_ref().ok_or_else(|| missing_section("downlink"))
    }

    pub fn uplink(&self) -> Result<&UplinkParams> {
        self.uplink.as_ref().ok_or_else(|| missing_section("uplink"))
    }

    /// Cross-field checks that need more than one section.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(SimError::config("seeds", "at least one seed is required"));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return Err(SimError::config("seeds", "seeds must be distinct"));
        }
        let l = &self.layout;
        if !(l.isd_m > 0.0) || !(l.bs_height_m > 0.0) || !(l.min_ue_distance_m >= 0.0) {
            return Err(SimError::config("layout", "isd_m and bs_height_m must be > 0, min_ue_distance_m >= 0"));
        }
        self.antenna.validate()?;
        let ledger = self.ledger()?;
        let lim = &ledger.pathloss;
        if !(lim.min_fc_ghz..=lim.max_fc_ghz).contains(&self.channel.carrier_ghz) {
            return Err(SimError::config(
                "channel.carrier_ghz",
                format!("must lie in [{}, {}] GHz", lim.min_fc_ghz, lim.max_fc_ghz),
            ));
        }
        if self.channel.los_model == LosModel::TerrainEmpirical && self.channel.los_table.is_none() {
            return Err(SimError::config("channel.los_table", "required by los_model = terrain_empirical"));
        }
        let max_h = ledger.rma.baseline_max_ue_height;
        if self.channel.los_model == LosModel::RmaBaseline {
            for (key, h) in self.altitudes() {
                if h > max_h {
                    return Err(SimError::config(
                        key,
                        format!("altitude {h} m exceeds the {max_h} m limit of los_model = rma_baseline"),
                    ));
                }
            }
        }
        if let Some(d) = &self.downlink {
            d.validate()?;
        }
        if let Some(u) = &self.uplink {
            u.validate()?;
        }
        if let Some(pc) = &self.pc_sweep {
            if pc.p0_grid_dbm.is_empty() || pc.alpha_grid.is_empty() {
                return Err(SimError::config("pc_sweep.p0_grid_dbm", "grids must be non-empty"));
            }
            if pc.alpha_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return Err(SimError::config("pc_sweep.alpha_grid", "alpha must lie in [0, 1]"));
            }
        }
        if let Some(p) = &self.partition {
            if p.fractions.is_empty() || p.fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
                return Err(SimError::config("partition.fractions", "fractions must lie in (0, 1)"));
            }
        }
        if let Some(a) = &self.aerial_id {
            for &delta_db in &a.delta_grid_db {
                for &k_cells in &a.k_grid {
                    AerialClassifierConfig { delta_db, k_cells }.validate()?;
                }
            }
            if a.delta_grid_db.is_empty() || a.k_grid.is_empty() {
                return Err(SimError::config("aerial_id.delta_grid_db", "grids must be non-empty"));
            }
        }
        if let Some(f) = &self.fragmentation {
            if !(f.raster_step_m > 0.0 && f.raster_step_m <= l.isd_m / 20.0) {
                return Err(SimError::config(
                    "fragmentation.raster_step_m",
                    format!("must lie in (0, {}] m", l.isd_m / 20.0),
                ));
            }
        }
        if let Some(t) = &self.terrain {
            t.curve_params()?;
            match (&t.heightmap, &t.synthetic) {
                (Some(_), None) if t.format.is_none() => {
                    return Err(SimError::config("terrain.format", "required with terrain.heightmap"));
                }
                (Some(_), Some(_)) => {
                    return Err(SimError::config("terrain.synthetic", "give either heightmap or synthetic, not both"));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Every configured UE altitude with the key it came from.
    fn altitudes(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        let mut push = |key: &str, hs: &[f64]| out.extend(hs.iter().map(|&h| (key.to_string(), h)));
        if let Some(d) = &self.downlink {
            push("downlink.altitudes", &d.altitudes);
        }
        if let Some(u) = &self.uplink {
            push("uplink.altitudes", &u.altitudes);
        }
        if let Some(p) = &self.pc_sweep {
            push("pc_sweep.altitude_m", &[p.altitude_m]);
        }
        if let Some(p) = &self.partition {
            push("partition.altitude_m", &[p.altitude_m]);
        }
        if let Some(a) = &self.aerial_id {
            push("aerial_id.altitude_m", &[a.altitude_m]);
        }
        if let Some(f) = &self.fragmentation {
            push("fragmentation.altitudes", &f.altitudes);
        }
        if let Some(h) = &self.handover {
            push("handover.altitudes", &h.altitudes);
        }
        if let Some(p) = &self.pathloss_curves {
            push("pathloss_curves.ue_heights", &p.ue_heights);
        }
        out
    }
}

fn missing_section(name: &str) -> SimError {
    SimError::config(name, "section required by this experiment is missing")
}

/// Keys a fully specified section carries (optional keys excluded).
fn required_keys<T: Serialize>(value: &T) -> Vec<String> {
    match toml::Value::try_from(value) {
        Ok(toml::Value::Table(t)) => t.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

fn optional_keys(section: &str) -> &'static [&'static str] {
    match section {
        "channel" => &["ledger", "los_table"],
        "uplink" => &["aerial_power_control", "aerial_rb_fraction"],
        "terrain" => &["heightmap", "format", "synthetic"],
        _ => &[],
    }
}

fn missing_keys(doc: &toml::Table) -> Vec<String> {
    let template = RunConfig::baseline();
    let mut missing = Vec::new();
    for key in ["scenario", "seeds", "layout", "antenna", "channel"] {
        if !doc.contains_key(key) {
            missing.push(key.to_string());
        }
    }
    let sections: Vec<(&str, Vec<String>)> = vec![
        ("layout", required_keys(&template.layout)),
        ("antenna", required_keys(&template.antenna)),
        ("channel", required_keys(&template.channel)),
        ("downlink", required_keys(&DownlinkParams::default())),
        ("uplink", required_keys(&UplinkParams::default())),
        ("pc_sweep", required_keys(&PcSweepConfig::default())),
        ("partition", required_keys(&PartitionConfig::default())),
        ("aerial_id", required_keys(&AerialIdConfig::default())),
        ("fragmentation", required_keys(&FragmentationConfig::default())),
        ("handover", required_keys(&HandoverSection::default())),
        ("terrain", required_keys(&TerrainConfig::default())),
        ("pathloss_curves", required_keys(&PathlossCurvesConfig::default())),
    ];
    for (name, keys) in sections {
        let Some(toml::Value::Table(t)) = doc.get(name) else { continue };
        for k in keys {
            if !t.contains_key(&k) && !optional_keys(name).contains(&k.as_str()) {
                missing.push(format!("{name}.{k}"));
            }
        }
    }
    missing
}

/// Parses and validates a configuration text. `origin` names the file in
/// errors and anchors relative paths.
pub fn parse_config_str(text: &str, origin: &Path) -> Result<RunConfig> {
    let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| SimError::Parse {
        path: origin.to_path_buf(),
        location: e.span().map(|s| format!("byte {}", s.start)).unwrap_or_else(|| "?".into()),
        msg: e.message().to_string(),
    })?;
    let missing = missing_keys(&doc);
    if !missing.is_empty() {
        return Err(SimError::config(
            missing[0].clone(),
            format!("missing required keys: {}", missing.join(", ")),
        ));
    }
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| SimError::Parse {
        path: origin.to_path_buf(),
        location: e.span().map(|s| format!("byte {}", s.start)).unwrap_or_else(|| "?".into()),
        msg: e.message().to_string(),
    })?;
    cfg.base_dir = origin.parent().map(Path::to_path_buf).unwrap_or_default();
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    parse_config_str(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SHIPPED: &str = include_str!("../configs/baseline.toml");

    #[test]
    fn shipped_baseline_equals_defaults() {
        let cfg = parse_config_str(SHIPPED, Path::new("configs/baseline.toml")).unwrap();
        let mut expect = RunConfig::baseline();
        expect.base_dir = PathBuf::from("configs");
        assert_eq!(cfg, expect);
    }

    #[test]
    fn round_trip() {
        let cfg = RunConfig::baseline();
        let text = cfg.to_toml().unwrap();
        let back = parse_config_str(&text, Path::new("x.toml")).unwrap();
        assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
    }

    #[test]
    fn empty_file_lists_missing_keys() {
        let e = parse_config_str("", Path::new("e.toml")).unwrap_err();
        assert!(e.is_config());
        let msg = e.to_string();
        for k in ["scenario", "seeds", "layout", "antenna", "channel"] {
            assert!(msg.contains(k), "{msg}");
        }
    }

    #[test]
    fn partial_section_lists_every_missing_key() {
        let text = SHIPPED.replace("isd_m = 1732.0\n", "").replace("n_sites = 37\n", "");
        let msg = parse_config_str(&text, Path::new("p.toml")).unwrap_err().to_string();
        assert!(msg.contains("layout.isd_m") && msg.contains("layout.n_sites"), "{msg}");
    }

    #[test]
    fn baseline_model_rejects_aerial_altitudes() {
        let text = SHIPPED.replace("los_model = \"rma_aerial\"", "los_model = \"rma_baseline\"");
        let e = parse_config_str(&text, Path::new("b.toml")).unwrap_err();
        assert!(e.is_config());
        assert!(e.to_string().contains("rma_baseline"), "{e}");
    }

    #[test]
    fn unknown_key_rejected() {
        let text = SHIPPED.replace("[layout]\n", "[layout]\nbogus = 1\n");
        let e = parse_config_str(&text, Path::new("u.toml")).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
    }

    #[test]
    fn seeds_required() {
        let mut cfg = RunConfig::baseline();
        cfg.seeds.clear();
        assert!(cfg.validate().unwrap_err().is_config());
    }
}
