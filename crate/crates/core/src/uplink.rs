//! TTI-level uplink simulation: open-loop fractional power control, Poisson
//! file traffic and round-robin scheduling over a shared RB grid.
//!
//! Channels are large-scale only and frequency flat, so the schedule and
//! every per-RB SINR stay fixed between backlog changes. The simulator only
//! recomputes them when some UE starts or stops being backlogged.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::ue_links;
use crate::deployment::{argmax_cell, drop_ues, DropParams, UeKind, UserTerminal};
use crate::downlink::noise_dbm;
use crate::error::{Result, SimError};
use crate::rate::attenuated_shannon_bps_lin;
use crate::rng::{self, Domain, SimRng};
use crate::scenario::Scenario;
use crate::stats::{self, db_to_lin, lin_to_db};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerControlConfig {
    /// Target received power per RB, dBm.
    pub p0_dbm: f64,
    /// Fractional pathloss compensation.
    pub alpha: f64,
    pub p_max_dbm: f64,
}

impl Default for PowerControlConfig {
    fn default() -> Self {
        Self {
            p0_dbm: -90.0,
            alpha: 1.0,
            p_max_dbm: 23.0,
        }
    }
}

impl PowerControlConfig {
    pub fn validate(&self, key: &str) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(SimError::config(format!("{key}.alpha"), "must lie in [0, 1]"));
        }
        if !(self.p0_dbm.is_finite() && self.p_max_dbm.is_finite()) {
            return Err(SimError::config(format!("{key}.p0_dbm"), "powers must be finite"));
        }
        if self.p_max_dbm < self.p0_dbm {
            return Err(SimError::config(format!("{key}.p_max_dbm"), "must be >= p0_dbm"));
        }
        Ok(())
    }
}

/// Total transmit power in dBm over `n_rb` RBs.
pub fn ul_tx_power(pc: &PowerControlConfig, n_rb: usize, pathloss_db: f64) -> f64 {
    let n = n_rb.max(1) as f64;
    (pc.p0_dbm + 10.0 * n.log10() + pc.alpha * pathloss_db).min(pc.p_max_dbm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficModel {
    /// Files per second per cell.
    pub arrival_rate: f64,
    pub file_size_bytes: f64,
}

impl TrafficModel {
    pub fn from_offered_load(offered_load_bps: f64, file_size_bytes: f64) -> Result<Self> {
        if !(offered_load_bps >= 0.0) {
            return Err(SimError::config("uplink.offered_loads_bps", "loads must be >= 0"));
        }
        if !(file_size_bytes > 0.0) {
            return Err(SimError::config("uplink.file_size_bytes", "must be > 0"));
        }
        Ok(Self {
            arrival_rate: offered_load_bps / (8.0 * file_size_bytes),
            file_size_bytes,
        })
    }

    pub fn offered_load_bps(&self) -> f64 {
        self.arrival_rate * self.file_size_bytes * 8.0
    }
}

/// Per-RB uplink SINR in dB at the serving cell.
///
/// `ue_gains` and each co-scheduled entry's gains are coupling gains indexed
/// by cell; transmit powers are per RB.
pub fn ul_sinr(
    serving: usize,
    ue_tx_rb_dbm: f64,
    ue_gains: &[f64],
    co_scheduled: &[(f64, &[f64])],
    noise_rb_dbm: f64,
) -> f64 {
    let s = db_to_lin(ue_tx_rb_dbm + ue_gains[serving]);
    let i: f64 = co_scheduled
        .iter()
        .map(|(p, g)| db_to_lin(p + g[serving]))
        .sum();
    lin_to_db(s / (i + db_to_lin(noise_rb_dbm)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UplinkParams {
    pub n_rb: usize,
    pub rb_bandwidth_hz: f64,
    pub bs_noise_figure_db: f64,
    pub tti_s: f64,
    pub warmup_s: f64,
    pub duration_s: f64,
    pub ues_per_cell: usize,
    pub aerial_ratio: f64,
    /// Heights of the aerial group; 1.5 m yields the all-ground reference.
    pub altitudes: Vec<f64>,
    pub offered_loads_bps: Vec<f64>,
    pub file_size_bytes: f64,
    /// Per-UE arrival-rate multiplier for aerial UEs.
    pub aerial_traffic_scale: f64,
    pub power_control: PowerControlConfig,
    /// Separate settings for aerial UEs; `None` applies `power_control`.
    #[serde(default)]
    pub aerial_power_control: Option<PowerControlConfig>,
    /// Share of RBs reserved for aerial UEs; `None` shares the full band.
    #[serde(default)]
    pub aerial_rb_fraction: Option<f64>,
    /// A run is saturated when more than this share of measured files is
    /// still unfinished at the end.
    pub saturation_unfinished_ratio: f64,
}

impl Default for UplinkParams {
    fn default() -> Self {
        Self {
            n_rb: 50,
            rb_bandwidth_hz: 180e3,
            bs_noise_figure_db: 5.0,
            tti_s: 1e-3,
            warmup_s: 1.0,
            duration_s: 10.0,
            ues_per_cell: 10,
            aerial_ratio: 0.1,
            altitudes: vec![1.5, 40.0, 120.0],
            offered_loads_bps: vec![1e6, 2e6, 4e6, 6e6, 8e6],
            file_size_bytes: 0.5e6,
            aerial_traffic_scale: 1.0,
            power_control: PowerControlConfig::default(),
            aerial_power_control: None,
            aerial_rb_fraction: None,
            saturation_unfinished_ratio: 0.1,
        }
    }
}

impl UplinkParams {
    pub fn validate(&self) -> Result<()> {
        let key = |k: &str| format!("uplink.{k}");
        if self.n_rb == 0 {
            return Err(SimError::config(key("n_rb"), "must be >= 1"));
        }
        if !(self.rb_bandwidth_hz > 0.0) || !(self.tti_s > 0.0) {
            return Err(SimError::config(key("rb_bandwidth_hz"), "bandwidth and TTI must be > 0"));
        }
        if !(self.warmup_s >= 0.0) || !(self.duration_s > 0.0) {
            return Err(SimError::config(key("duration_s"), "need warmup_s >= 0 and duration_s > 0"));
        }
        if self.ues_per_cell == 0 {
            return Err(SimError::config(key("ues_per_cell"), "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.aerial_ratio) {
            return Err(SimError::config(key("aerial_ratio"), "must lie in [0, 1]"));
        }
        if self.altitudes.is_empty() {
            return Err(SimError::config(key("altitudes"), "must not be empty"));
        }
        if !(self.file_size_bytes > 0.0) {
            return Err(SimError::config(key("file_size_bytes"), "must be > 0"));
        }
        if self.offered_loads_bps.iter().any(|l| !(*l >= 0.0)) {
            return Err(SimError::config(key("offered_loads_bps"), "loads must be >= 0"));
        }
        if !(self.aerial_traffic_scale >= 0.0 && self.aerial_traffic_scale.is_finite()) {
            return Err(SimError::config(key("aerial_traffic_scale"), "must be finite and >= 0"));
        }
        self.power_control.validate("uplink.power_control")?;
        if let Some(pc) = &self.aerial_power_control {
            pc.validate("uplink.aerial_power_control")?;
        }
        if let Some(f) = self.aerial_rb_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(SimError::config(key("aerial_rb_fraction"), "must lie in (0, 1)"));
            }
            let (a, t) = self.pool_sizes();
            let n_aerial = (self.aerial_ratio * self.ues_per_cell as f64).round();
            if (a == 0 && self.aerial_ratio > 0.0 && self.aerial_traffic_scale > 0.0) || (t == 0 && n_aerial < self.ues_per_cell as f64) {
                return Err(SimError::config(
                    key("aerial_rb_fraction"),
                    format!("pool sizes ({a} aerial, {t} terrestrial RBs) leave a group with traffic but no RBs"),
                ));
            }
        }
        Ok(())
    }

    pub fn noise_rb_dbm(&self) -> f64 {
        noise_dbm(self.rb_bandwidth_hz, self.bs_noise_figure_db)
    }

    /// `(aerial, terrestrial)` pool sizes in RBs.
    pub fn pool_sizes(&self) -> (usize, usize) {
        match self.aerial_rb_fraction {
            None => (self.n_rb, self.n_rb),
            Some(f) => {
                let a = (f * self.n_rb as f64).round() as usize;
                (a, self.n_rb - a)
            }
        }
    }

    fn pc_for(&self, kind: UeKind) -> &PowerControlConfig {
        match (kind, &self.aerial_power_control) {
            (UeKind::Aerial, Some(pc)) => pc,
            _ => &self.power_control,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    All,
    Aerial,
    Terrestrial,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::All, Group::Aerial, Group::Terrestrial];

    pub fn name(self) -> &'static str {
        match self {
            Group::All => "all",
            Group::Aerial => "aerial",
            Group::Terrestrial => "terrestrial",
        }
    }

    fn index(kind: UeKind) -> usize {
        match kind {
            UeKind::Aerial => 1,
            UeKind::Terrestrial => 2,
        }
    }
}

/// UEs, their coupling gains to every cell and their serving cells.
#[derive(Debug, Clone)]
pub struct UlPopulation {
    pub ues: Vec<UserTerminal>,
    pub n_cells: usize,
    /// Row-major `[ue][cell]` coupling gains, dB.
    pub gains: Vec<f64>,
    pub serving: Vec<usize>,
}

impl UlPopulation {
    pub fn build(scn: &Scenario, params: &UplinkParams, altitude: f64, seed: u64) -> Result<Self> {
        let drop = DropParams {
            per_cell: params.ues_per_cell,
            aerial_heights: vec![altitude],
            aerial_ratio: params.aerial_ratio,
            ground_height: 1.5,
            min_distance: scn.channel.ledger.pathloss.min_d2d,
        };
        let ues = drop_ues(&scn.layout, &drop, seed, 0)?;
        let n_cells = scn.layout.n_cells();
        let rows = ues
            .iter()
            .map(|ue| {
                ue_links(&scn.layout, &scn.pattern, &scn.channel, ue, seed, 0)
                    .map(|l| l.into_iter().map(|l| l.coupling_gain).collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?;
        let serving = rows
            .iter()
            .map(|g| argmax_cell(g.iter().copied().enumerate()).unwrap_or(0))
            .collect();
        Ok(Self {
            ues,
            n_cells,
            gains: rows.concat(),
            serving,
        })
    }

    pub fn gains_of(&self, ue: usize) -> &[f64] {
        &self.gains[ue * self.n_cells..(ue + 1) * self.n_cells]
    }

    pub fn gain(&self, ue: usize, cell: usize) -> f64 {
        self.gains[ue * self.n_cells + cell]
    }
}

/// Contiguous RB range granted to one UE in the current TTI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grant {
    pub ue: usize,
    pub cell: usize,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Copy)]
struct File {
    arrival_s: f64,
    bits_left: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pool {
    Shared,
    Aerial,
    Terrestrial,
}

/// Per-run measurements after the warm-up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UlRunResult {
    pub offered_load_bps: f64,
    pub altitude: f64,
    pub seed: u64,
    /// RB-TTI share granted to each group, indexed like `Group::ALL`.
    pub ru: [f64; 3],
    /// Completed per-file throughputs, indexed like `Group::ALL`.
    pub throughputs: [Vec<f64>; 3],
    pub files_arrived: usize,
    pub files_completed: usize,
    pub saturated: bool,
    /// Mean interference over thermal across cells, RBs and TTIs, dB.
    pub mean_iot_db: f64,
    /// Utilisation of the aerial and terrestrial pools (equal without a partition).
    pub pool_ru: (f64, f64),
    /// Mean aerial-UE interference power landing on terrestrial-pool RBs, mW.
    pub aerial_on_terrestrial_mw: f64,
}

/// Event-cached TTI simulator for one (population, load, seed).
pub struct UplinkSim<'a> {
    pop: &'a UlPopulation,
    params: &'a UplinkParams,
    noise_mw: f64,
    pools: Vec<Pool>,
    members: Vec<Vec<usize>>,
    queues: Vec<VecDeque<File>>,
    arrivals: BinaryHeap<Reverse<(u64, usize)>>,
    next_arrival_s: Vec<f64>,
    traffic: Vec<SimRng>,
    ue_rate_per_s: f64,
    end_s: f64,
    tti: u64,
    dirty: bool,
    rotating: bool,
    rr_offset: Vec<[usize; 3]>,
    grants: Vec<Grant>,
    bits_per_tti: Vec<f64>,
    // Cached per-TTI quantities for the current schedule.
    rb_by_group: [f64; 3],
    rb_by_pool: (f64, f64),
    iot_db_sum: f64,
    aerial_on_terrestrial: f64,
    // Accumulators.
    acc_rb: [f64; 3],
    acc_pool: (f64, f64),
    acc_iot: f64,
    acc_aot: f64,
    measured_ttis: u64,
    tputs: [Vec<f64>; 3],
    arrived: usize,
    completed: usize,
}

impl<'a> UplinkSim<'a> {
    pub fn new(pop: &'a UlPopulation, params: &'a UplinkParams, offered_load_bps: f64, seed: u64) -> Result<Self> {
        params.validate()?;
        let traffic = TrafficModel::from_offered_load(offered_load_bps, params.file_size_bytes)?;
        let n_ue = pop.ues.len();
        let mut members = vec![Vec::new(); pop.n_cells];
        for (u, &c) in pop.serving.iter().enumerate() {
            members[c].push(u);
        }
        let pools = pop
            .ues
            .iter()
            .map(|ue| match (params.aerial_rb_fraction, ue.kind) {
                (None, _) => Pool::Shared,
                (Some(_), UeKind::Aerial) => Pool::Aerial,
                (Some(_), UeKind::Terrestrial) => Pool::Terrestrial,
            })
            .collect();
        let ue_rate_per_s = traffic.arrival_rate / params.ues_per_cell as f64;
        let end_s = params.warmup_s + params.duration_s;
        let mut sim = Self {
            pop,
            params,
            noise_mw: db_to_lin(params.noise_rb_dbm()),
            pools,
            members,
            queues: vec![VecDeque::new(); n_ue],
            arrivals: BinaryHeap::new(),
            next_arrival_s: vec![f64::INFINITY; n_ue],
            traffic: (0..n_ue)
                .map(|u| rng::stream(Domain::Traffic, &[seed, u as u64]))
                .collect(),
            ue_rate_per_s,
            end_s,
            tti: 0,
            dirty: true,
            rotating: false,
            rr_offset: vec![[0; 3]; pop.n_cells],
            grants: Vec::new(),
            bits_per_tti: vec![0.0; n_ue],
            rb_by_group: [0.0; 3],
            rb_by_pool: (0.0, 0.0),
            iot_db_sum: 0.0,
            aerial_on_terrestrial: 0.0,
            acc_rb: [0.0; 3],
            acc_pool: (0.0, 0.0),
            acc_iot: 0.0,
            acc_aot: 0.0,
            measured_ttis: 0,
            tputs: Default::default(),
            arrived: 0,
            completed: 0,
        };
        for u in 0..n_ue {
            sim.schedule_arrival(u, 0.0);
        }
        Ok(sim)
    }

    pub fn total_ttis(&self) -> u64 {
        (self.end_s / self.params.tti_s).round() as u64
    }

    pub fn tti(&self) -> u64 {
        self.tti
    }

    pub fn grants(&self) -> &[Grant] {
        &self.grants
    }

    pub fn is_backlogged(&self, ue: usize) -> bool {
        !self.queues[ue].is_empty()
    }

    pub fn members(&self, cell: usize) -> &[usize] {
        &self.members[cell]
    }

    /// RB range `[start, start + len)` a UE is allowed to use.
    pub fn pool_range(&self, ue: usize) -> (usize, usize) {
        let (a, _) = self.params.pool_sizes();
        match self.pools[ue] {
            Pool::Shared => (0, self.params.n_rb),
            Pool::Aerial => (0, a),
            Pool::Terrestrial => (a, self.params.n_rb - a),
        }
    }

    fn schedule_arrival(&mut self, ue: usize, after_s: f64) {
        let rate = match self.pop.ues[ue].kind {
            UeKind::Aerial => self.ue_rate_per_s * self.params.aerial_traffic_scale,
            UeKind::Terrestrial => self.ue_rate_per_s,
        };
        if rate <= 0.0 {
            return;
        }
        let gap: f64 = self.traffic[ue].sample(Exp1);
        let t = after_s + gap / rate;
        if t < self.end_s {
            self.next_arrival_s[ue] = t;
            let avail = (t / self.params.tti_s).ceil() as u64;
            self.arrivals.push(Reverse((avail, ue)));
        }
    }

    fn allocate(&mut self) {
        self.grants.clear();
        self.rotating = false;
        let n_rb = self.params.n_rb;
        for cell in 0..self.pop.n_cells {
            for (slot, pool) in [Pool::Shared, Pool::Aerial, Pool::Terrestrial].into_iter().enumerate() {
                let backlog: Vec<usize> = self.members[cell]
                    .iter()
                    .copied()
                    .filter(|&u| self.pools[u] == pool && !self.queues[u].is_empty())
                    .collect();
                if backlog.is_empty() {
                    continue;
                }
                let (lo, size) = self.pool_range(backlog[0]);
                debug_assert!(lo + size <= n_rb);
                let off = &mut self.rr_offset[cell][slot];
                if backlog.len() <= size {
                    let q = size / backlog.len();
                    let r = size % backlog.len();
                    let mut start = lo;
                    for (i, &u) in backlog.iter().enumerate() {
                        let len = q + usize::from(i < r);
                        self.grants.push(Grant { ue: u, cell, start, len });
                        start += len;
                    }
                } else {
                    self.rotating = true;
                    for k in 0..size {
                        let u = backlog[(*off + k) % backlog.len()];
                        self.grants.push(Grant { ue: u, cell, start: lo + k, len: 1 });
                    }
                    *off = (*off + size) % backlog.len();
                }
            }
        }
    }

    fn evaluate(&mut self) {
        let n_rb = self.params.n_rb;
        let n_cells = self.pop.n_cells;
        let (a_size, _) = self.params.pool_sizes();
        let partitioned = self.params.aerial_rb_fraction.is_some();
        let tx_rb: Vec<f64> = self
            .grants
            .iter()
            .map(|g| {
                let ue = &self.pop.ues[g.ue];
                let pc = self.params.pc_for(ue.kind);
                let coupling_loss = -self.pop.gain(g.ue, g.cell);
                db_to_lin(ul_tx_power(pc, g.len, coupling_loss) - 10.0 * (g.len as f64).log10())
            })
            .collect();
        let mut by_cell: Vec<Vec<usize>> = vec![Vec::new(); n_cells];
        for (i, g) in self.grants.iter().enumerate() {
            by_cell[g.cell].push(i);
        }
        let mut diff = vec![0.0; n_rb + 1];
        let mut iot_sum = 0.0;
        let mut aot = 0.0;
        for v in 0..n_cells {
            diff.iter_mut().for_each(|x| *x = 0.0);
            for (i, g) in self.grants.iter().enumerate() {
                if g.cell == v {
                    continue;
                }
                let p = tx_rb[i] * db_to_lin(self.pop.gain(g.ue, v));
                diff[g.start] += p;
                diff[g.start + g.len] -= p;
                if partitioned && self.pop.ues[g.ue].kind == UeKind::Aerial {
                    // Summed from the overlap directly so disjoint pools give exactly 0.
                    let overlap = (g.start + g.len).saturating_sub(g.start.max(a_size));
                    aot += p * overlap as f64;
                }
            }
            let mut interference = vec![0.0; n_rb];
            let (mut run, mut mean_i) = (0.0, 0.0);
            for rb in 0..n_rb {
                run += diff[rb];
                interference[rb] = run.max(0.0);
                mean_i += interference[rb];
            }
            iot_sum += lin_to_db(1.0 + mean_i / n_rb as f64 / self.noise_mw);
            for &i in &by_cell[v] {
                let g = self.grants[i];
                let s = tx_rb[i] * db_to_lin(self.pop.gain(g.ue, v));
                let bps: f64 = (g.start..g.start + g.len)
                    .map(|rb| attenuated_shannon_bps_lin(s / (interference[rb] + self.noise_mw), self.params.rb_bandwidth_hz))
                    .sum();
                self.bits_per_tti[g.ue] = bps * self.params.tti_s;
            }
        }
        self.iot_db_sum = iot_sum / n_cells as f64;
        self.aerial_on_terrestrial = aot / n_cells as f64;
        self.rb_by_group = [0.0; 3];
        self.rb_by_pool = (0.0, 0.0);
        for g in &self.grants {
            let len = g.len as f64;
            self.rb_by_group[0] += len;
            self.rb_by_group[Group::index(self.pop.ues[g.ue].kind)] += len;
            match self.pools[g.ue] {
                Pool::Aerial => self.rb_by_pool.0 += len,
                Pool::Terrestrial => self.rb_by_pool.1 += len,
                Pool::Shared => {
                    self.rb_by_pool.0 += len;
                    self.rb_by_pool.1 += len;
                }
            }
        }
    }

    /// Checks RB and work conservation for the current schedule.
    pub fn check_invariants(&self) -> Result<()> {
        let n_rb = self.params.n_rb;
        let mut used = vec![vec![false; n_rb]; self.pop.n_cells];
        let mut granted = vec![0usize; self.pop.n_cells];
        let mut per_pool = vec![[0usize; 3]; self.pop.n_cells];
        for g in &self.grants {
            let (lo, size) = self.pool_range(g.ue);
            if g.len == 0 || g.start < lo || g.start + g.len > lo + size {
                return Err(SimError::Runtime(format!("TTI {}: grant {g:?} outside its pool", self.tti)));
            }
            if self.queues[g.ue].is_empty() {
                return Err(SimError::Runtime(format!("TTI {}: grant to idle UE {}", self.tti, g.ue)));
            }
            for rb in g.start..g.start + g.len {
                if std::mem::replace(&mut used[g.cell][rb], true) {
                    return Err(SimError::Runtime(format!("TTI {}: RB {rb} of cell {} double-booked", self.tti, g.cell)));
                }
            }
            granted[g.cell] += g.len;
            per_pool[g.cell][self.pools[g.ue] as usize] += g.len;
        }
        for cell in 0..self.pop.n_cells {
            if granted[cell] > n_rb {
                return Err(SimError::Runtime(format!("TTI {}: cell {cell} granted {} RBs", self.tti, granted[cell])));
            }
            for &u in &self.members[cell] {
                let (_, size) = self.pool_range(u);
                if !self.queues[u].is_empty() && per_pool[cell][self.pools[u] as usize] != size {
                    return Err(SimError::Runtime(format!(
                        "TTI {}: cell {cell} has backlog but granted {} of {size} pool RBs",
                        self.tti, per_pool[cell][self.pools[u] as usize]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Admits arrivals and refreshes the schedule for the current TTI.
    pub fn prepare(&mut self) -> Result<()> {
        while let Some(&Reverse((avail, u))) = self.arrivals.peek() {
            if avail > self.tti {
                break;
            }
            self.arrivals.pop();
            let t = self.next_arrival_s[u];
            if t >= self.params.warmup_s {
                self.arrived += 1;
            }
            if self.queues[u].is_empty() {
                self.dirty = true;
            }
            self.queues[u].push_back(File {
                arrival_s: t,
                bits_left: 8.0 * self.params.file_size_bytes,
            });
            self.schedule_arrival(u, t);
        }
        if self.dirty || self.rotating {
            self.allocate();
            self.evaluate();
            self.check_invariants()?;
            self.dirty = false;
        }
        Ok(())
    }

    /// Serves the current schedule and advances one TTI.
    pub fn serve(&mut self) {
        let tti_s = self.params.tti_s;
        let now_s = self.tti as f64 * tti_s;
        if now_s >= self.params.warmup_s {
            self.measured_ttis += 1;
            for k in 0..3 {
                self.acc_rb[k] += self.rb_by_group[k];
            }
            self.acc_pool.0 += self.rb_by_pool.0;
            self.acc_pool.1 += self.rb_by_pool.1;
            self.acc_iot += self.iot_db_sum;
            self.acc_aot += self.aerial_on_terrestrial;
        }
        let file_bits = 8.0 * self.params.file_size_bytes;
        for gi in 0..self.grants.len() {
            let u = self.grants[gi].ue;
            let Some(f) = self.queues[u].front_mut() else { continue };
            f.bits_left -= self.bits_per_tti[u];
            if f.bits_left <= 0.0 {
                let f = self.queues[u].pop_front().unwrap_or(File { arrival_s: 0.0, bits_left: 0.0 });
                if f.arrival_s >= self.params.warmup_s {
                    self.completed += 1;
                    let tput = file_bits / (now_s + tti_s - f.arrival_s);
                    self.tputs[0].push(tput);
                    self.tputs[Group::index(self.pop.ues[u].kind)].push(tput);
                }
                if self.queues[u].is_empty() {
                    self.dirty = true;
                }
            }
        }
        self.tti += 1;
    }

    pub fn step(&mut self) -> Result<()> {
        self.prepare()?;
        self.serve();
        Ok(())
    }

    pub fn run(mut self, altitude: f64, seed: u64) -> Result<UlRunResult> {
        for _ in 0..self.total_ttis() {
            self.step()?;
        }
        Ok(self.finish(altitude, seed))
    }

    pub fn finish(self, altitude: f64, seed: u64) -> UlRunResult {
        let cap = (self.measured_ttis.max(1) * self.pop.n_cells as u64) as f64;
        let n_rb = self.params.n_rb as f64;
        let (a, t) = self.params.pool_sizes();
        let ru = self.acc_rb.map(|x| x / (cap * n_rb));
        let pool_ru = (
            if a > 0 { self.acc_pool.0 / (cap * a as f64) } else { 0.0 },
            if t > 0 { self.acc_pool.1 / (cap * t as f64) } else { 0.0 },
        );
        let unfinished = self.arrived.saturating_sub(self.completed);
        let saturated = self.arrived > 0
            && unfinished as f64 > self.params.saturation_unfinished_ratio * self.arrived as f64;
        let tm = self.measured_ttis.max(1) as f64;
        UlRunResult {
            offered_load_bps: self.ue_rate_per_s * self.params.ues_per_cell as f64 * 8.0 * self.params.file_size_bytes,
            altitude,
            seed,
            ru,
            throughputs: self.tputs,
            files_arrived: self.arrived,
            files_completed: self.completed,
            saturated,
            mean_iot_db: self.acc_iot / tm,
            pool_ru,
            aerial_on_terrestrial_mw: self.acc_aot / tm,
        }
    }
}

/// One simulation run.
pub fn run_ul_once(pop: &UlPopulation, params: &UplinkParams, offered_load_bps: f64, altitude: f64, seed: u64) -> Result<UlRunResult> {
    UplinkSim::new(pop, params, offered_load_bps, seed)?.run(altitude, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UlSweepRow {
    pub offered_load_bps: f64,
    pub altitude: f64,
    pub group: Group,
    /// Seed-averaged RB-TTI share of the group.
    pub mean_ru: f64,
    /// Seed-averaged mean per-file throughput.
    pub mean_tput_bps: f64,
    /// 5th percentile over all completed files of all seeds.
    pub p05_tput_bps: f64,
    /// Any seed saturated.
    pub saturated: bool,
    pub mean_iot_db: f64,
}

/// Runs every (altitude, load, seed) and returns raw per-run results in
/// canonical order.
pub fn run_ul_runs(scn: &Scenario, params: &UplinkParams, seeds: &[u64]) -> Result<Vec<UlRunResult>> {
    params.validate()?;
    if seeds.is_empty() {
        return Err(SimError::config("seeds", "at least one seed is required"));
    }
    let pops: Vec<(f64, u64, UlPopulation)> = params
        .altitudes
        .iter()
        .flat_map(|&a| seeds.iter().map(move |&s| (a, s)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(a, s)| UlPopulation::build(scn, params, a, s).map(|p| (a, s, p)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, f64)> = (0..pops.len())
        .flat_map(|i| params.offered_loads_bps.iter().map(move |&l| (i, l)))
        .collect();
    let mut runs = jobs
        .into_par_iter()
        .map(|(i, load)| {
            let (a, s, pop) = &pops[i];
            run_ul_once(pop, params, load, *a, *s)
        })
        .collect::<Result<Vec<_>>>()?;
    let alt_rank = |a: f64| params.altitudes.iter().position(|&x| x == a).unwrap_or(0);
    let seed_rank = |s: u64| seeds.iter().position(|&x| x == s).unwrap_or(0);
    runs.sort_by(|x, y| {
        alt_rank(x.altitude)
            .cmp(&alt_rank(y.altitude))
            .then(x.offered_load_bps.total_cmp(&y.offered_load_bps))
            .then(seed_rank(x.seed).cmp(&seed_rank(y.seed)))
    });
    Ok(runs)
}

/// Aggregates runs into one row per (load, altitude, group).
pub fn summarize_runs(runs: &[UlRunResult]) -> Vec<UlSweepRow> {
    let mut keys: Vec<(f64, f64)> = Vec::new();
    for r in runs {
        if !keys.contains(&(r.offered_load_bps, r.altitude)) {
            keys.push((r.offered_load_bps, r.altitude));
        }
    }
    keys.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rows = Vec::new();
    for (load, alt) in keys {
        let sel: Vec<&UlRunResult> = runs
            .iter()
            .filter(|r| r.offered_load_bps == load && r.altitude == alt)
            .collect();
        for (k, group) in Group::ALL.into_iter().enumerate() {
            let per_seed: Vec<f64> = sel
                .iter()
                .map(|r| stats::mean(&r.throughputs[k]))
                .filter(|x| x.is_finite())
                .collect();
            let pooled: Vec<f64> = sel.iter().flat_map(|r| r.throughputs[k].iter().copied()).collect();
            rows.push(UlSweepRow {
                offered_load_bps: load,
                altitude: alt,
                group,
                mean_ru: stats::mean(&sel.iter().map(|r| r.ru[k]).collect::<Vec<_>>()),
                mean_tput_bps: stats::mean(&per_seed),
                p05_tput_bps: stats::percentile(&pooled, 5.0),
                saturated: sel.iter().any(|r| r.saturated),
                mean_iot_db: stats::mean(&sel.iter().map(|r| r.mean_iot_db).collect::<Vec<_>>()),
            });
        }
    }
    rows
}

/// Load sweep over the configured loads and aerial altitudes.
pub fn run_ul_sim(scn: &Scenario, params: &UplinkParams, seeds: &[u64]) -> Result<Vec<UlSweepRow>> {
    Ok(summarize_runs(&run_ul_runs(scn, params, seeds)?))
}
