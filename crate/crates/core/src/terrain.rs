//! Raster terrain and ray-traced LOS-probability estimation.
//!
//! A [`Heightmap`] is a single composite elevation layer (terrain plus
//! buildings). LOS between two points holds when the straight segment stays
//! strictly above the bilinearly interpolated surface at every interior
//! sample.

use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deployment::{Point2, Point3};
use crate::error::{Result, SimError};
use crate::rng::{self, Domain};

pub const DEFAULT_CELL_SIZE: f64 = 5.0;
pub const DEFAULT_QUANTIZATION: f64 = 0.15;

#[derive(Debug, Clone, PartialEq)]
pub struct Heightmap {
    /// Lower-left corner of the grid.
    pub origin: Point2,
    pub cell_size: f64,
    pub quantization: f64,
    pub nrows: usize,
    pub ncols: usize,
    /// Row-major, row 0 is the northern (top) row as in ASCII grids.
    grid: Vec<f64>,
}

fn quantize(v: f64, q: f64) -> f64 {
    if q > 0.0 {
        (v / q).round() * q
    } else {
        v
    }
}

impl Heightmap {
    pub fn new(
        origin: Point2,
        cell_size: f64,
        quantization: f64,
        nrows: usize,
        ncols: usize,
        grid: Vec<f64>,
    ) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(SimError::config("heightmap.cell_size", "must be > 0"));
        }
        if !(quantization >= 0.0 && quantization.is_finite()) {
            return Err(SimError::config("heightmap.quantization", "must be >= 0"));
        }
        if nrows == 0 || ncols == 0 || grid.len() != nrows * ncols {
            return Err(SimError::config(
                "heightmap.grid",
                format!("expected a non-empty {nrows}x{ncols} grid, got {} values", grid.len()),
            ));
        }
        if let Some(i) = grid.iter().position(|v| !v.is_finite()) {
            return Err(SimError::config(
                "heightmap.grid",
                format!("non-finite elevation at index {i}"),
            ));
        }
        let grid = grid.into_iter().map(|v| quantize(v, quantization)).collect();
        Ok(Self {
            origin,
            cell_size,
            quantization,
            nrows,
            ncols,
            grid,
        })
    }

    /// Builds a map from a function of the cell-centre position.
    pub fn from_fn(
        origin: Point2,
        cell_size: f64,
        quantization: f64,
        nrows: usize,
        ncols: usize,
        f: impl Fn(Point2) -> f64,
    ) -> Result<Self> {
        let mut grid = Vec::with_capacity(nrows * ncols);
        for row in 0..nrows {
            for col in 0..ncols {
                let p = Point2::new(
                    origin.x + (col as f64 + 0.5) * cell_size,
                    origin.y + ((nrows - 1 - row) as f64 + 0.5) * cell_size,
                );
                grid.push(f(p));
            }
        }
        Self::new(origin, cell_size, quantization, nrows, ncols, grid)
    }

    pub fn width(&self) -> f64 {
        self.ncols as f64 * self.cell_size
    }

    pub fn height(&self) -> f64 {
        self.nrows as f64 * self.cell_size
    }

    /// Value at `(row, col)`, row counted from the top.
    pub fn cell(&self, row: usize, col: usize) -> f64 {
        self.grid[row * self.ncols + col]
    }

    pub fn values(&self) -> &[f64] {
        &self.grid
    }

    /// Value with the row counted from the bottom.
    fn cell_from_bottom(&self, rb: usize, col: usize) -> f64 {
        self.cell(self.nrows - 1 - rb, col)
    }

    pub fn contains(&self, p: Point2) -> bool {
        let (dx, dy) = (p.x - self.origin.x, p.y - self.origin.y);
        (0.0..=self.width()).contains(&dx) && (0.0..=self.height()).contains(&dy)
    }

    /// Bilinear interpolation between cell centres, clamped at the borders.
    pub fn elevation(&self, p: Point2) -> f64 {
        let fx = ((p.x - self.origin.x) / self.cell_size - 0.5).clamp(0.0, (self.ncols - 1) as f64);
        let fy = ((p.y - self.origin.y) / self.cell_size - 0.5).clamp(0.0, (self.nrows - 1) as f64);
        let c0 = (fx.floor() as usize).min(self.ncols.saturating_sub(2));
        let r0 = (fy.floor() as usize).min(self.nrows.saturating_sub(2));
        let c1 = (c0 + 1).min(self.ncols - 1);
        let r1 = (r0 + 1).min(self.nrows - 1);
        let tx = fx - c0 as f64;
        let ty = fy - r0 as f64;
        let z00 = self.cell_from_bottom(r0, c0);
        let z01 = self.cell_from_bottom(r0, c1);
        let z10 = self.cell_from_bottom(r1, c0);
        let z11 = self.cell_from_bottom(r1, c1);
        (z00 * (1.0 - tx) + z01 * tx) * (1.0 - ty) + (z10 * (1.0 - tx) + z11 * tx) * ty
    }

    /// Median of the raw cells in a square window around `p`.
    pub fn local_median(&self, p: Point2, half_window: usize) -> f64 {
        let col = (((p.x - self.origin.x) / self.cell_size).floor().max(0.0) as usize).min(self.ncols - 1);
        let rb = (((p.y - self.origin.y) / self.cell_size).floor().max(0.0) as usize).min(self.nrows - 1);
        let mut v = Vec::new();
        for r in rb.saturating_sub(half_window)..=(rb + half_window).min(self.nrows - 1) {
            for c in col.saturating_sub(half_window)..=(col + half_window).min(self.ncols - 1) {
                v.push(self.cell_from_bottom(r, c));
            }
        }
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    }

    fn raw_cell_at(&self, p: Point2) -> f64 {
        let col = (((p.x - self.origin.x) / self.cell_size).floor().max(0.0) as usize).min(self.ncols - 1);
        let rb = (((p.y - self.origin.y) / self.cell_size).floor().max(0.0) as usize).min(self.nrows - 1);
        self.cell_from_bottom(rb, col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeightmapFormat {
    /// ESRI-style ASCII grid.
    AsciiGrid,
    /// `AGHM` little-endian binary; see [`write_flat_binary`].
    FlatBinary,
}

const BINARY_MAGIC: &[u8; 4] = b"AGHM";
const BINARY_HEADER_LEN: usize = 4 + 4 + 4 + 8 * 4;

pub fn load_heightmap(path: &Path, format: HeightmapFormat) -> Result<Heightmap> {
    match format {
        HeightmapFormat::AsciiGrid => {
            let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
            parse_ascii_grid(&text, path)
        }
        HeightmapFormat::FlatBinary => {
            let bytes = std::fs::read(path).map_err(|e| SimError::io(path, e))?;
            parse_flat_binary(&bytes, path)
        }
    }
}

/// Parses an ASCII grid. Required header keys: `ncols`, `nrows`,
/// `xllcorner`, `yllcorner`, `cellsize`; optional `nodata_value` and
/// `quantization` (defaults to 0.15 m). Cells equal to the nodata value are
/// rejected.
pub fn parse_ascii_grid(text: &str, path: &Path) -> Result<Heightmap> {
    let perr = |line: usize, msg: String| SimError::Parse {
        path: path.to_path_buf(),
        location: format!("line {line}"),
        msg,
    };
    let mut header = std::collections::BTreeMap::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some(&(i, line)) = lines.peek() {
        let mut toks = line.split_whitespace();
        let Some(key) = toks.next() else {
            lines.next();
            continue;
        };
        if !key.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
            break;
        }
        let key = key.to_ascii_lowercase();
        let val = toks
            .next()
            .ok_or_else(|| perr(i + 1, format!("header key `{key}` has no value")))?;
        let val: f64 = val
            .parse()
            .map_err(|_| perr(i + 1, format!("header value `{val}` is not a number")))?;
        if toks.next().is_some() {
            return Err(perr(i + 1, "trailing tokens in header line".into()));
        }
        if !matches!(
            key.as_str(),
            "ncols" | "nrows" | "xllcorner" | "yllcorner" | "cellsize" | "nodata_value" | "quantization"
        ) {
            return Err(perr(i + 1, format!("unknown header key `{key}`")));
        }
        header.insert(key, (val, i + 1));
        lines.next();
    }
    let header_end = lines.peek().map(|(i, _)| *i + 1).unwrap_or(text.lines().count() + 1);
    let get = |k: &str| {
        header
            .get(k)
            .map(|v| v.0)
            .ok_or_else(|| perr(header_end, format!("missing header key `{k}`")))
    };
    let ncols = get("ncols")?;
    let nrows = get("nrows")?;
    for (k, v) in [("ncols", ncols), ("nrows", nrows)] {
        if v < 1.0 || v.fract() != 0.0 {
            return Err(perr(header[k].1, format!("`{k}` must be a positive integer")));
        }
    }
    let (ncols, nrows) = (ncols as usize, nrows as usize);
    let origin = Point2::new(get("xllcorner")?, get("yllcorner")?);
    let cell_size = get("cellsize")?;
    if !(cell_size > 0.0) {
        return Err(perr(header["cellsize"].1, "`cellsize` must be > 0".into()));
    }
    let nodata = header.get("nodata_value").map(|v| v.0);
    let quantization = header.get("quantization").map(|v| v.0).unwrap_or(DEFAULT_QUANTIZATION);

    let mut grid = Vec::with_capacity(nrows * ncols);
    let mut row = 0;
    for (i, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if row == nrows {
            return Err(perr(i + 1, format!("more than {nrows} data rows")));
        }
        if toks.len() != ncols {
            return Err(perr(i + 1, format!("expected {ncols} values, found {}", toks.len())));
        }
        for t in toks {
            let v: f64 = t
                .parse()
                .map_err(|_| perr(i + 1, format!("`{t}` is not a number")))?;
            if !v.is_finite() {
                return Err(perr(i + 1, format!("non-finite elevation `{t}`")));
            }
            if nodata == Some(v) {
                return Err(perr(i + 1, "nodata cell in elevation grid".into()));
            }
            grid.push(v);
        }
        row += 1;
    }
    if row != nrows {
        return Err(perr(
            text.lines().count(),
            format!("expected {nrows} data rows, found {row}"),
        ));
    }
    Heightmap::new(origin, cell_size, quantization, nrows, ncols, grid)
}

pub fn write_ascii_grid(map: &Heightmap, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("ncols {}\nnrows {}\n", map.ncols, map.nrows));
    out.push_str(&format!("xllcorner {}\nyllcorner {}\n", map.origin.x, map.origin.y));
    out.push_str(&format!("cellsize {}\nnodata_value -9999\n", map.cell_size));
    out.push_str(&format!("quantization {}\n", map.quantization));
    for row in 0..map.nrows {
        let vals: Vec<String> = (0..map.ncols).map(|c| format!("{}", map.cell(row, c))).collect();
        out.push_str(&vals.join(" "));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| SimError::io(path, e))
}

/// Layout: magic `AGHM`, `u32 ncols`, `u32 nrows`, `f64 xllcorner`,
/// `f64 yllcorner`, `f64 cellsize`, `f64 quantization`, then
/// `nrows * ncols` `f64` elevations, top row first. All little-endian.
pub fn write_flat_binary(map: &Heightmap, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| SimError::io(path, e))?);
    let mut write = || -> std::io::Result<()> {
        f.write_all(BINARY_MAGIC)?;
        f.write_all(&(map.ncols as u32).to_le_bytes())?;
        f.write_all(&(map.nrows as u32).to_le_bytes())?;
        for v in [map.origin.x, map.origin.y, map.cell_size, map.quantization] {
            f.write_all(&v.to_le_bytes())?;
        }
        for v in &map.grid {
            f.write_all(&v.to_le_bytes())?;
        }
        f.flush()
    };
    write().map_err(|e| SimError::io(path, e))
}

pub fn parse_flat_binary(bytes: &[u8], path: &Path) -> Result<Heightmap> {
    let perr = |off: usize, msg: String| SimError::Parse {
        path: path.to_path_buf(),
        location: format!("offset {off}"),
        msg,
    };
    if bytes.len() < BINARY_HEADER_LEN {
        return Err(perr(bytes.len(), "truncated header".into()));
    }
    if &bytes[..4] != BINARY_MAGIC {
        return Err(perr(0, "bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let ncols = u32_at(4);
    let nrows = u32_at(8);
    let origin = Point2::new(f64_at(12), f64_at(20));
    let cell_size = f64_at(28);
    let quantization = f64_at(36);
    if ncols == 0 || nrows == 0 {
        return Err(perr(4, "zero grid dimension".into()));
    }
    if !(cell_size > 0.0) {
        return Err(perr(28, "cellsize must be > 0".into()));
    }
    let need = BINARY_HEADER_LEN + 8 * nrows * ncols;
    if bytes.len() != need {
        return Err(perr(
            bytes.len().min(need),
            format!("payload length {} bytes, expected {}", bytes.len() - BINARY_HEADER_LEN, need - BINARY_HEADER_LEN),
        ));
    }
    let mut grid = Vec::with_capacity(nrows * ncols);
    for k in 0..nrows * ncols {
        let off = BINARY_HEADER_LEN + 8 * k;
        let v = f64_at(off);
        if !v.is_finite() {
            return Err(perr(off, "non-finite elevation".into()));
        }
        grid.push(v);
    }
    Heightmap::new(origin, cell_size, quantization, nrows, ncols, grid)
}

/// LOS test with the default sampling step of half a cell.
pub fn trace_los(a: Point3, b: Point3, map: &Heightmap) -> Result<bool> {
    trace_los_with_step(a, b, map, map.cell_size / 2.0)
}

/// LOS test sampling the segment at `floor(d / step)` equal intervals.
///
/// Endpoints are not tested; pairs closer than two steps have no interior
/// samples. The result is symmetric in `a` and `b` bit for bit.
pub fn trace_los_with_step(a: Point3, b: Point3, map: &Heightmap, step: f64) -> Result<bool> {
    for p in [a, b] {
        if !map.contains(p.xy()) {
            return Err(SimError::domain(format!(
                "endpoint ({}, {}) outside the heightmap",
                p.x, p.y
            )));
        }
    }
    let key = |p: Point3| (p.x, p.y, p.z);
    let (a, b) = if key(a).partial_cmp(&key(b)) == Some(std::cmp::Ordering::Greater) {
        (b, a)
    } else {
        (a, b)
    };
    let d = (b.x - a.x).hypot(b.y - a.y);
    let n = (d / step).floor() as usize;
    for i in 1..n {
        let t = i as f64 / n as f64;
        let p = Point2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
        let z = a.z + t * (b.z - a.z);
        if z <= map.elevation(p) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Empirical LOS probability versus 2-D distance for several UE heights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosCurveTable {
    pub ue_heights: Vec<f64>,
    /// Bin edges, strictly increasing; bin `k` is `[edges[k], edges[k+1])`.
    pub bin_edges: Vec<f64>,
    /// `[height][bin]` LOS counts.
    pub los: Vec<Vec<u64>>,
    /// `[height][bin]` traced links.
    pub total: Vec<Vec<u64>>,
    /// `[height][bin]` nonincreasing-in-distance fit, `None` for empty bins.
    pub monotone: Vec<Vec<Option<f64>>>,
}

/// Weighted pool-adjacent-violators fit, nonincreasing.
fn isotonic_nonincreasing(y: &[f64], w: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, f64, usize)> = Vec::new();
    for (&yi, &wi) in y.iter().zip(w) {
        blocks.push((yi, wi, 1));
        while blocks.len() > 1 {
            let (y2, w2, n2) = blocks[blocks.len() - 1];
            let (y1, w1, n1) = blocks[blocks.len() - 2];
            if y1 >= y2 {
                break;
            }
            blocks.pop();
            let wsum = w1 + w2;
            *blocks.last_mut().unwrap() = ((y1 * w1 + y2 * w2) / wsum, wsum, n1 + n2);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(v, _, n)| std::iter::repeat_n(v, n))
        .collect()
}

impl LosCurveTable {
    pub fn from_counts(
        ue_heights: Vec<f64>,
        bin_edges: Vec<f64>,
        los: Vec<Vec<u64>>,
        total: Vec<Vec<u64>>,
    ) -> Result<Self> {
        let nb = bin_edges.len().saturating_sub(1);
        if nb == 0 || bin_edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SimError::config("terrain.distance_bins", "need >= 2 strictly increasing edges"));
        }
        if ue_heights.is_empty()
            || los.len() != ue_heights.len()
            || total.len() != ue_heights.len()
            || los.iter().chain(&total).any(|r| r.len() != nb)
        {
            return Err(SimError::config("terrain.ue_heights", "count arrays do not match heights x bins"));
        }
        let monotone = los
            .iter()
            .zip(&total)
            .map(|(l, t)| {
                let idx: Vec<usize> = (0..nb).filter(|&k| t[k] > 0).collect();
                let y: Vec<f64> = idx.iter().map(|&k| l[k] as f64 / t[k] as f64).collect();
                let w: Vec<f64> = idx.iter().map(|&k| t[k] as f64).collect();
                let fit = isotonic_nonincreasing(&y, &w);
                let mut row = vec![None; nb];
                for (k, v) in idx.into_iter().zip(fit) {
                    row[k] = Some(v);
                }
                row
            })
            .collect();
        Ok(Self {
            ue_heights,
            bin_edges,
            los,
            total,
            monotone,
        })
    }

    /// Table from probabilities directly (each bin weighted as one sample
    /// per 10^6 to keep rounding negligible).
    pub fn from_probabilities(ue_heights: Vec<f64>, bin_edges: Vec<f64>, p: Vec<Vec<f64>>) -> Result<Self> {
        const SCALE: f64 = 1e6;
        let los = p
            .iter()
            .map(|r| r.iter().map(|v| (v.clamp(0.0, 1.0) * SCALE).round() as u64).collect())
            .collect();
        let total = p.iter().map(|r| vec![SCALE as u64; r.len()]).collect();
        Self::from_counts(ue_heights, bin_edges, los, total)
    }

    pub fn n_bins(&self) -> usize {
        self.bin_edges.len() - 1
    }

    /// Rows `(ue_height_m, d2d_bin_m, p_los, n_samples)` with the raw census
    /// value (NaN for empty bins) at each geometric bin centre.
    pub fn csv_rows(&self) -> Vec<[f64; 4]> {
        let mut rows = Vec::new();
        for (h, &height) in self.ue_heights.iter().enumerate() {
            for k in 0..self.n_bins() {
                rows.push([
                    height,
                    self.bin_center(k),
                    self.raw(h, k).unwrap_or(f64::NAN),
                    self.total[h][k] as f64,
                ]);
            }
        }
        rows
    }

    /// Reads the curve CSV written by the `los_curve` experiment.
    ///
    /// Bin edges are rebuilt as geometric midpoints between centres, which
    /// is exact for log-spaced bins.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        let perr = |line: usize, msg: String| SimError::Parse {
            path: path.to_path_buf(),
            location: format!("line {line}"),
            msg,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "ue_height_m,d2d_bin_m,p_los,n_samples" => {}
            _ => return Err(perr(1, "expected header ue_height_m,d2d_bin_m,p_los,n_samples".into())),
        }
        let mut heights: Vec<f64> = Vec::new();
        let mut rows: Vec<Vec<(f64, f64, u64)>> = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(perr(i + 1, format!("expected 4 fields, found {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| perr(i + 1, format!("{s:?}: {e}")));
            let (h, c, p, n) = (num(f[0])?, num(f[1])?, num(f[2])?, num(f[3])?);
            let idx = match heights.iter().position(|&x| x == h) {
                Some(j) => j,
                None => {
                    heights.push(h);
                    rows.push(Vec::new());
                    heights.len() - 1
                }
            };
            let n = n.max(0.0).round() as u64;
            let los = if n == 0 || p.is_nan() { 0 } else { (p.clamp(0.0, 1.0) * n as f64).round() as u64 };
            rows[idx].push((c, los as f64, n));
        }
        let Some(first) = rows.first() else {
            return Err(perr(2, "no data rows".into()));
        };
        let centres: Vec<f64> = first.iter().map(|r| r.0).collect();
        if rows.iter().any(|r| r.iter().map(|x| x.0).ne(centres.iter().copied())) {
            return Err(perr(2, "every height must list the same distance bins".into()));
        }
        if centres.is_empty() || centres.windows(2).any(|w| !(w[1] > w[0])) || centres[0] <= 0.0 {
            return Err(perr(2, "bin centres must be positive and strictly increasing".into()));
        }
        let nb = centres.len();
        let mut edges = vec![0.0; nb + 1];
        for k in 1..nb {
            edges[k] = (centres[k - 1] * centres[k]).sqrt();
        }
        if nb == 1 {
            edges[0] = centres[0] / 2.0;
            edges[1] = centres[0] * 2.0;
        } else {
            edges[0] = centres[0] * centres[0] / edges[1];
            edges[nb] = centres[nb - 1] * centres[nb - 1] / edges[nb - 1];
        }
        let los = rows.iter().map(|r| r.iter().map(|x| x.1 as u64).collect()).collect();
        let total = rows.iter().map(|r| r.iter().map(|x| x.2).collect()).collect();
        Self::from_counts(heights, edges, los, total)
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        (self.bin_edges[k] * self.bin_edges[k + 1]).sqrt()
    }

    /// Raw census value, `None` when the bin is empty.
    pub fn raw(&self, height_idx: usize, bin: usize) -> Option<f64> {
        let t = self.total[height_idx][bin];
        (t > 0).then(|| self.los[height_idx][bin] as f64 / t as f64)
    }

    fn lookup_row(&self, h: usize, d2d: f64) -> f64 {
        let pts: Vec<(f64, f64)> = (0..self.n_bins())
            .filter_map(|k| self.monotone[h][k].map(|v| (self.bin_center(k).ln(), v)))
            .collect();
        if pts.is_empty() {
            return 1.0;
        }
        let x = d2d.max(1e-9).ln();
        if x <= pts[0].0 {
            return pts[0].1;
        }
        for w in pts.windows(2) {
            if x <= w[1].0 {
                let t = (x - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + t * (w[1].1 - w[0].1);
            }
        }
        pts[pts.len() - 1].1
    }

    /// Interpolated LOS probability: log-distance between bin centres,
    /// linear between tabulated heights, clamped outside the table.
    pub fn lookup(&self, d2d: f64, h_ut: f64) -> f64 {
        if d2d <= 0.0 {
            return 1.0;
        }
        let hs = &self.ue_heights;
        let mut order: Vec<usize> = (0..hs.len()).collect();
        order.sort_by(|&a, &b| hs[a].total_cmp(&hs[b]));
        let first = order[0];
        let last = order[order.len() - 1];
        if h_ut <= hs[first] {
            return self.lookup_row(first, d2d);
        }
        if h_ut >= hs[last] {
            return self.lookup_row(last, d2d);
        }
        for w in order.windows(2) {
            let (a, b) = (w[0], w[1]);
            if h_ut <= hs[b] {
                let t = (h_ut - hs[a]) / (hs[b] - hs[a]);
                return (1.0 - t) * self.lookup_row(a, d2d) + t * self.lookup_row(b, d2d);
            }
        }
        self.lookup_row(last, d2d)
    }
}

/// `n` log-spaced bins over `[lo, hi]`, returned as `n + 1` edges.
pub fn log_bins(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..=n).map(|k| (a + (b - a) * k as f64 / n as f64).exp()).collect()
}

/// Default binning: 46 log-spaced bins over 10 m .. 35 km.
pub fn default_bins() -> Vec<f64> {
    log_bins(10.0, 35_000.0, 46)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LosCurveParams {
    pub n_bs_drops: usize,
    pub bs_height_agl: f64,
    pub ue_heights: Vec<f64>,
    pub distance_bins: Vec<f64>,
    /// UE positions drawn per (BS drop, distance bin).
    pub ues_per_bin: usize,
    /// A BS location is rejected when its cell rises more than this above the
    /// local median (i.e. it sits on a building).
    pub building_threshold: f64,
    /// Half-width in cells of the median window.
    pub median_half_window: usize,
}

#[derive(Debug, Clone)]
pub struct LosCurveResult {
    pub sites: Vec<Point2>,
    pub table: LosCurveTable,
}

/// Draws BS sites uniformly over the map, rejecting building cells.
pub fn drop_sites(map: &Heightmap, params: &LosCurveParams, seed: u64) -> Result<Vec<Point2>> {
    let mut rng = rng::stream(Domain::Terrain, &[seed, u64::MAX]);
    let mut sites = Vec::with_capacity(params.n_bs_drops);
    let max_attempts = 1000 * params.n_bs_drops.max(1);
    let mut attempts = 0;
    while sites.len() < params.n_bs_drops {
        attempts += 1;
        if attempts > max_attempts {
            return Err(SimError::Runtime(format!(
                "could not place {} BS sites outside buildings after {max_attempts} attempts",
                params.n_bs_drops
            )));
        }
        let p = Point2::new(
            map.origin.x + rng.random::<f64>() * map.width(),
            map.origin.y + rng.random::<f64>() * map.height(),
        );
        if map.raw_cell_at(p) <= map.local_median(p, params.median_half_window) + params.building_threshold {
            sites.push(p);
        }
    }
    Ok(sites)
}

fn validate_curve_params(params: &LosCurveParams) -> Result<()> {
    if params.n_bs_drops == 0 {
        return Err(SimError::config("terrain.n_bs_drops", "must be >= 1"));
    }
    if params.ue_heights.is_empty() {
        return Err(SimError::config("terrain.ue_heights", "must not be empty"));
    }
    if params.ues_per_bin == 0 {
        return Err(SimError::config("terrain.ues_per_bin", "must be >= 1"));
    }
    if params.distance_bins.len() < 2 || params.distance_bins.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SimError::config("terrain.distance_bins", "need >= 2 strictly increasing edges"));
    }
    Ok(())
}

/// Ray-traced LOS census around randomly dropped BS sites.
pub fn estimate_los_curve(map: &Heightmap, params: &LosCurveParams, seed: u64) -> Result<LosCurveResult> {
    validate_curve_params(params)?;
    let sites = drop_sites(map, params, seed)?;
    let table = los_census(map, &sites, params, seed)?;
    Ok(LosCurveResult { sites, table })
}

/// LOS census around the given BS sites. UE positions are uniform by area
/// within each distance annulus; positions off the map are discarded.
pub fn los_census(map: &Heightmap, sites: &[Point2], params: &LosCurveParams, seed: u64) -> Result<LosCurveTable> {
    validate_curve_params(params)?;
    let nb = params.distance_bins.len() - 1;
    let nh = params.ue_heights.len();
    let per_site: Vec<Result<(Vec<Vec<u64>>, Vec<Vec<u64>>)>> = sites
        .par_iter()
        .enumerate()
        .map(|(i, &bs)| {
            let mut rng = rng::stream(Domain::Terrain, &[seed, i as u64]);
            let mut los = vec![vec![0u64; nb]; nh];
            let mut total = vec![vec![0u64; nb]; nh];
            let bs3 = Point3::new(bs.x, bs.y, map.elevation(bs) + params.bs_height_agl);
            for k in 0..nb {
                let (lo, hi) = (params.distance_bins[k], params.distance_bins[k + 1]);
                for _ in 0..params.ues_per_bin {
                    let r = (lo * lo + rng.random::<f64>() * (hi * hi - lo * lo)).sqrt();
                    let az = rng.random::<f64>() * std::f64::consts::TAU;
                    let p = Point2::new(bs.x + r * az.cos(), bs.y + r * az.sin());
                    if !map.contains(p) {
                        continue;
                    }
                    let ground = map.elevation(p);
                    for (h, &ue_h) in params.ue_heights.iter().enumerate() {
                        let ue3 = Point3::new(p.x, p.y, ground + ue_h);
                        total[h][k] += 1;
                        if trace_los(bs3, ue3, map)? {
                            los[h][k] += 1;
                        }
                    }
                }
            }
            Ok((los, total))
        })
        .collect();
    let mut los = vec![vec![0u64; nb]; nh];
    let mut total = vec![vec![0u64; nb]; nh];
    for r in per_site {
        let (l, t) = r?;
        for h in 0..nh {
            for k in 0..nb {
                los[h][k] += l[h][k];
                total[h][k] += t[h][k];
            }
        }
    }
    LosCurveTable::from_counts(params.ue_heights.clone(), params.distance_bins.clone(), los, total)
}

/// Synthetic maps for experiments and tests.
pub mod synthetic {
    use super::*;

    /// Square map of side `size` metres centred on the origin.
    fn square(size: f64, cell: f64, f: impl Fn(Point2) -> f64) -> Result<Heightmap> {
        let n = (size / cell).round() as usize;
        Heightmap::from_fn(Point2::new(-size / 2.0, -size / 2.0), cell, DEFAULT_QUANTIZATION, n, n, f)
    }

    pub fn flat(size: f64, cell: f64) -> Result<Heightmap> {
        square(size, cell, |_| 0.0)
    }

    /// Walls of `height` and `width` at `x = k * pitch + offset`, running along y.
    pub fn parallel_walls(size: f64, cell: f64, pitch: f64, width: f64, height: f64) -> Result<Heightmap> {
        square(size, cell, |p| {
            let u = (p.x + size / 2.0).rem_euclid(pitch);
            if u < width {
                height
            } else {
                0.0
            }
        })
    }

    /// Annular ridge around the origin covering radii `[inner, outer]`.
    pub fn ring_ridge(size: f64, cell: f64, inner: f64, outer: f64, height: f64) -> Result<Heightmap> {
        square(size, cell, |p| {
            let r = p.norm();
            if (inner..=outer).contains(&r) {
                height
            } else {
                0.0
            }
        })
    }

    /// Smooth pseudo-random hills: a sum of sinusoids with random phases.
    pub fn rolling_hills(size: f64, cell: f64, amplitude: f64, seed: u64) -> Result<Heightmap> {
        let mut rng = rng::stream(Domain::Terrain, &[seed, 0xA11]);
        let comps: Vec<(f64, f64, f64, f64)> = (0..12)
            .map(|_| {
                let wl = 200.0 + rng.random::<f64>() * 1800.0;
                let dir = rng.random::<f64>() * std::f64::consts::TAU;
                let ph = rng.random::<f64>() * std::f64::consts::TAU;
                let a = amplitude * (0.3 + 0.7 * rng.random::<f64>()) / 12f64.sqrt();
                (std::f64::consts::TAU / wl, dir, ph, a)
            })
            .collect();
        square(size, cell, |p| {
            amplitude
                + comps
                    .iter()
                    .map(|&(k, dir, ph, a)| a * (k * (p.x * dir.cos() + p.y * dir.sin()) + ph).sin())
                    .sum::<f64>()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_ascii_grid() {
        let text = "ncols 3\nnrows 3\nxllcorner 0\nyllcorner 0\ncellsize 5\nnodata_value -9999\n0 0 0\n0 0 0\n0 0 0\n";
        let m = parse_ascii_grid(text, Path::new("t.asc")).unwrap();
        assert_eq!(m.values(), &[0.0; 9]);
        assert_eq!(m.quantization, DEFAULT_QUANTIZATION);
    }

    #[test]
    fn ascii_dimension_mismatch() {
        let text = "ncols 3\nnrows 3\nxllcorner 0\nyllcorner 0\ncellsize 5\n0 0 0\n0 0\n0 0 0\n";
        let e = parse_ascii_grid(text, Path::new("t.asc")).unwrap_err();
        assert!(e.to_string().contains("line 7"), "{e}");
        let text = "ncols 3\nnrows 3\nxllcorner 0\nyllcorner 0\ncellsize 5\n0 0 0\n0 0 0\n";
        assert!(parse_ascii_grid(text, Path::new("t.asc")).is_err());
    }

    #[test]
    fn ascii_rejects_nodata_and_nan() {
        let base = "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 5\nnodata_value -9999\n";
        assert!(parse_ascii_grid(&format!("{base}1 -9999\n"), Path::new("t")).is_err());
        assert!(parse_ascii_grid(&format!("{base}1 NaN\n"), Path::new("t")).is_err());
    }

    #[test]
    fn values_are_quantized() {
        let text = "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 5\n1.07 2.0\n";
        let m = parse_ascii_grid(text, Path::new("t")).unwrap();
        assert!((m.cell(0, 0) - 1.05).abs() < 1e-12);
    }

    #[test]
    fn binary_truncation_names_offset() {
        let m = synthetic::flat(50.0, 5.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bin");
        write_flat_binary(&m, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        let e = parse_flat_binary(&bytes[..bytes.len() - 3], &p).unwrap_err();
        assert!(e.to_string().contains("offset"), "{e}");
        assert!(parse_flat_binary(&bytes[..10], &p).is_err());
    }

    #[test]
    fn bilinear_on_grid_and_between() {
        let m = Heightmap::from_fn(Point2::ORIGIN, 10.0, 0.0, 2, 2, |p| p.x).unwrap();
        assert!((m.elevation(Point2::new(5.0, 5.0)) - 5.0).abs() < 1e-12);
        assert!((m.elevation(Point2::new(10.0, 5.0)) - 10.0).abs() < 1e-12);
        assert!((m.elevation(Point2::new(15.0, 12.0)) - 15.0).abs() < 1e-12);
    }

    #[test]
    fn flat_terrain_is_los() {
        let m = synthetic::flat(1000.0, 5.0).unwrap();
        let a = Point3::new(-400.0, -400.0, 35.0);
        let b = Point3::new(400.0, 300.0, 1.5);
        assert!(trace_los(a, b, &m).unwrap());
    }

    #[test]
    fn ridge_blocks() {
        // Ridge 50 m high midway; the segment there is at 22.5 m.
        let m = Heightmap::from_fn(Point2::new(-500.0, -500.0), 5.0, 0.15, 200, 200, |p| {
            if p.x.abs() < 10.0 {
                50.0
            } else {
                0.0
            }
        })
        .unwrap();
        let a = Point3::new(-300.0, 0.0, 35.0);
        let b = Point3::new(300.0, 0.0, 10.0);
        assert!(!trace_los(a, b, &m).unwrap());
        assert!(!trace_los(b, a, &m).unwrap());
    }

    #[test]
    fn sub_cell_separation_has_no_samples() {
        let m = Heightmap::from_fn(Point2::ORIGIN, 5.0, 0.0, 4, 4, |_| 100.0).unwrap();
        let a = Point3::new(5.0, 5.0, 0.0);
        let b = Point3::new(9.0, 5.0, 0.0);
        assert!(trace_los(a, b, &m).unwrap());
    }

    #[test]
    fn out_of_bounds_endpoint() {
        let m = synthetic::flat(100.0, 5.0).unwrap();
        let e = trace_los(Point3::new(0.0, 0.0, 10.0), Point3::new(80.0, 0.0, 10.0), &m).unwrap_err();
        assert!(matches!(e, SimError::Domain(_)));
    }

    #[test]
    fn isotonic_fit() {
        let f = isotonic_nonincreasing(&[1.0, 0.5, 0.7, 0.2], &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(f, vec![1.0, 0.6, 0.6, 0.2]);
    }

    #[test]
    fn missing_bins_reported() {
        let t = LosCurveTable::from_counts(vec![1.5], vec![10.0, 20.0, 40.0], vec![vec![3, 0]], vec![vec![4, 0]]).unwrap();
        assert_eq!(t.raw(0, 0), Some(0.75));
        assert_eq!(t.raw(0, 1), None);
        assert_eq!(t.monotone[0][1], None);
    }

    #[test]
    fn table_lookup_hits_tabulated_point() {
        let edges = vec![5000.0, 20_000.0];
        let t = LosCurveTable::from_probabilities(vec![1.5, 50.0], edges, vec![vec![0.2], vec![0.65]]).unwrap();
        assert!((t.lookup(10_000.0, 50.0) - 0.65).abs() < 1e-6);
        assert_eq!(t.lookup(0.0, 50.0), 1.0);
    }

    #[test]
    fn default_binning() {
        let b = default_bins();
        assert_eq!(b.len(), 47);
        assert!((b[0] - 10.0).abs() < 1e-9 && (b[46] - 35_000.0).abs() < 1e-6);
    }
}
