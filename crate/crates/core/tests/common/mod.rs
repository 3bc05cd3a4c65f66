//! Helpers shared by the integration tests and the acceptance binary.
#![allow(dead_code)]

use aerosim::config::RunConfig;
use aerosim::deployment::{Point2, Point3};
use aerosim::scenario::Scenario;
use aerosim::terrain::{los_census, synthetic, trace_los, Heightmap, LosCurveParams, LosCurveTable};

pub fn baseline() -> (RunConfig, Scenario) {
    let cfg = RunConfig::baseline();
    let scn = cfg.scenario().expect("baseline scenario builds");
    (cfg, scn)
}

pub fn linear_bins(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

fn curve_params(bs_height: f64, ue_heights: Vec<f64>, bins: Vec<f64>, ues_per_bin: usize) -> LosCurveParams {
    LosCurveParams {
        n_bs_drops: 1,
        bs_height_agl: bs_height,
        ue_heights,
        distance_bins: bins,
        ues_per_bin,
        building_threshold: 3.0,
        median_half_window: 10,
    }
}

/// Census on flat ground: every traced link must be LOS.
pub fn flat_census() -> LosCurveTable {
    let map = synthetic::flat(2000.0, 5.0).unwrap();
    let params = curve_params(35.0, vec![1.5, 10.0, 50.0], linear_bins(10.0, 950.0, 47.0), 200);
    los_census(&map, &[Point2::new(0.0, 0.0), Point2::new(-300.0, 250.0)], &params, 7).unwrap()
}

/// Shadow of an annular ridge seen from a mast at its centre.
#[derive(Debug, Clone)]
pub struct RidgeOracle {
    pub ue_height: f64,
    /// Distance where the ray grazing the ridge's outer edge meets the UE height.
    pub analytic_m: f64,
    pub analytic_bin: usize,
    /// First bin past the ridge with P_LOS >= 0.5.
    pub empirical_bin: Option<usize>,
    /// Largest P_LOS among bins wholly inside the predicted shadow.
    pub max_p_in_shadow: f64,
    /// Smallest P_LOS among bins wholly beyond the predicted boundary.
    pub min_p_beyond: f64,
    pub bin_width: f64,
}

pub const RIDGE_INNER: f64 = 100.0;
pub const RIDGE_OUTER: f64 = 120.0;
pub const RIDGE_HEIGHT: f64 = 20.0;
pub const RIDGE_BS: f64 = 35.0;

pub fn ridge_oracle() -> Vec<RidgeOracle> {
    let map = synthetic::ring_ridge(1000.0, 2.0, RIDGE_INNER, RIDGE_OUTER, RIDGE_HEIGHT).unwrap();
    let heights = vec![1.5, 10.0];
    let width = 20.0;
    let bins = linear_bins(130.0, 470.0, width);
    let params = curve_params(RIDGE_BS, heights.clone(), bins.clone(), 400);
    let table = los_census(&map, &[Point2::new(0.0, 0.0)], &params, 11).unwrap();
    heights
        .iter()
        .enumerate()
        .map(|(hi, &h)| {
            let analytic = RIDGE_OUTER * (RIDGE_BS - h) / (RIDGE_BS - RIDGE_HEIGHT);
            let analytic_bin = bins.windows(2).position(|w| (w[0]..w[1]).contains(&analytic)).unwrap();
            let p: Vec<f64> = (0..table.n_bins()).map(|k| table.raw(hi, k).unwrap_or(f64::NAN)).collect();
            let empirical_bin = p.iter().position(|&x| x >= 0.5);
            let max_p_in_shadow = (0..analytic_bin.saturating_sub(1)).map(|k| p[k]).fold(0.0, f64::max);
            let min_p_beyond = (analytic_bin + 2..p.len()).map(|k| p[k]).fold(1.0, f64::min);
            RidgeOracle {
                ue_height: h,
                analytic_m: analytic,
                analytic_bin,
                empirical_bin,
                max_p_in_shadow,
                min_p_beyond,
                bin_width: width,
            }
        })
        .collect()
}

/// Wall-grid map used by the census and monotonicity oracles.
pub fn wall_map() -> Heightmap {
    synthetic::parallel_walls(600.0, 5.0, 40.0, 5.0, 15.0).unwrap()
}

pub const WALL_HEIGHTS: [f64; 3] = [1.5, 10.0, 30.0];

pub fn wall_sites() -> Vec<Point2> {
    vec![
        Point2::new(0.0, 0.0),
        Point2::new(13.0, 7.0),
        Point2::new(-31.0, 22.0),
        Point2::new(21.5, -17.0),
    ]
}

pub fn wall_bins() -> Vec<f64> {
    linear_bins(20.0, 260.0, 30.0)
}

/// Monte Carlo census on the wall grid.
pub fn wall_census(ues_per_bin: usize) -> LosCurveTable {
    let params = curve_params(35.0, WALL_HEIGHTS.to_vec(), wall_bins(), ues_per_bin);
    los_census(&wall_map(), &wall_sites(), &params, 3).unwrap()
}

/// LOS fraction over every point of a fine lattice inside each annulus,
/// pooled over the census sites. `[height][bin]`.
pub fn wall_exhaustive(spacing: f64) -> Vec<Vec<f64>> {
    let map = wall_map();
    let bins = wall_bins();
    let nb = bins.len() - 1;
    let hi = *bins.last().unwrap();
    let mut los = vec![vec![0u64; nb]; WALL_HEIGHTS.len()];
    let mut tot = vec![vec![0u64; nb]; WALL_HEIGHTS.len()];
    let n = (hi / spacing).ceil() as i64;
    for bs in wall_sites() {
        let bs3 = Point3::new(bs.x, bs.y, map.elevation(bs) + 35.0);
        for i in -n..=n {
            for j in -n..=n {
                let (dx, dy) = (i as f64 * spacing, j as f64 * spacing);
                let r = dx.hypot(dy);
                let Some(k) = bins.windows(2).position(|w| r >= w[0] && r < w[1]) else { continue };
                let p = Point2::new(bs.x + dx, bs.y + dy);
                if !map.contains(p) {
                    continue;
                }
                let ground = map.elevation(p);
                for (h, &ue_h) in WALL_HEIGHTS.iter().enumerate() {
                    tot[h][k] += 1;
                    if trace_los(bs3, Point3::new(p.x, p.y, ground + ue_h), &map).unwrap() {
                        los[h][k] += 1;
                    }
                }
            }
        }
    }
    los.iter()
        .zip(&tot)
        .map(|(l, t)| l.iter().zip(t).map(|(&a, &b)| a as f64 / b as f64).collect())
        .collect()
}

/// Largest per-bin gap between the Monte Carlo and lattice censuses.
pub fn wall_census_gap(table: &LosCurveTable, exact: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (h, row) in exact.iter().enumerate() {
        for (k, &e) in row.iter().enumerate() {
            worst = worst.max((table.raw(h, k).unwrap() - e).abs());
        }
    }
    worst
}

#[derive(Debug, Clone)]
pub struct Monotonicity {
    /// Largest increase of the raw census from one bin to the next, in
    /// binomial standard errors.
    pub worst_distance_rise_se: f64,
    /// Fitted curves never increase with distance.
    pub fitted_nonincreasing: bool,
    /// Raw census never decreases with UE height (same UE positions).
    pub height_nondecreasing: bool,
}

pub fn monotonicity(table: &LosCurveTable) -> Monotonicity {
    let nh = table.ue_heights.len();
    let nb = table.n_bins();
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut fitted = true;
    for h in 0..nh {
        for k in 0..nb - 1 {
            let (a, b) = (table.raw(h, k).unwrap(), table.raw(h, k + 1).unwrap());
            let n = table.total[h][k].min(table.total[h][k + 1]) as f64;
            let p = 0.5 * (a + b);
            let se = (2.0 * p * (1.0 - p) / n).sqrt().max(1.0 / n);
            worst = worst.max((b - a) / se);
            fitted &= table.monotone[h][k + 1].unwrap() <= table.monotone[h][k].unwrap();
        }
    }
    let mut height = true;
    for k in 0..nb {
        for h in 0..nh - 1 {
            height &= table.los[h + 1][k] >= table.los[h][k] && table.total[h + 1][k] == table.total[h][k];
        }
    }
    Monotonicity {
        worst_distance_rise_se: worst,
        fitted_nonincreasing: fitted,
        height_nondecreasing: height,
    }
}
