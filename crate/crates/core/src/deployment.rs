//! Hexagonal multi-site layout, wraparound geometry, UE drops and serving-cell
//! association.
//!
//! Sites sit on a hexagonal lattice whose nearest neighbours lie at bearings
//! 30°, 90°, 150°, ... so that each site's Voronoi hexagon is flat-topped and
//! splits into three rhombi centred on the sector azimuths 0°, 120° and 240°.
//! Azimuths are measured counter-clockwise from +x.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::LinkState;
use crate::error::{Result, SimError};
use crate::rng::{self, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn xy(self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: usize,
    pub position: Point2,
    pub antenna_height: f64,
    /// Hexagonal ring index (0 = centre).
    pub ring: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: usize,
    pub site: usize,
    /// Boresight azimuth in degrees, counter-clockwise from +x.
    pub azimuth: f64,
}

/// Hexagonal cluster with wraparound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkLayout {
    pub sites: Vec<Site>,
    pub cells: Vec<Cell>,
    pub cells_per_site: usize,
    pub inter_site_distance: f64,
    pub rings: u32,
    /// Translations mapping the cluster onto its six mirror copies.
    pub wrap: Vec<Point2>,
}

/// Axial lattice coordinate -> plane position.
fn axial_to_xy(q: i64, r: i64, isd: f64) -> Point2 {
    let s3 = 3f64.sqrt();
    Point2::new(q as f64 * s3 / 2.0 * isd, (q as f64 / 2.0 + r as f64) * isd)
}

fn hex_ring(q: i64, r: i64) -> i64 {
    q.abs().max(r.abs()).max((q + r).abs())
}

/// Nearest lattice node (axial) to a plane position.
fn nearest_axial(p: Point2, isd: f64) -> (i64, i64) {
    let s3 = 3f64.sqrt();
    let qf = 2.0 * p.x / (s3 * isd);
    let rf = p.y / isd - qf / 2.0;
    let sf = -qf - rf;
    let (mut q, mut r, s) = (qf.round(), rf.round(), sf.round());
    let (dq, dr, ds) = ((q - qf).abs(), (r - rf).abs(), (s - sf).abs());
    if dq > dr && dq > ds {
        q = -r - s;
    } else if dr > ds {
        r = -q - s;
    }
    (q as i64, r as i64)
}

pub fn rings_for_sites(n_sites: usize) -> Option<u32> {
    match n_sites {
        1 => Some(0),
        7 => Some(1),
        19 => Some(2),
        37 => Some(3),
        _ => None,
    }
}

/// Builds the standard three-sector layout.
pub fn build_layout(isd: f64, n_sites: usize, bs_height: f64) -> Result<NetworkLayout> {
    build_layout_with(isd, n_sites, bs_height, 3)
}

pub fn build_layout_with(
    isd: f64,
    n_sites: usize,
    bs_height: f64,
    cells_per_site: usize,
) -> Result<NetworkLayout> {
    let rings = rings_for_sites(n_sites).ok_or_else(|| {
        SimError::config(
            "layout.n_sites",
            format!("unsupported site count {n_sites}; expected one of 1, 7, 19, 37"),
        )
    })?;
    if !(isd > 0.0 && isd.is_finite()) {
        return Err(SimError::config("layout.isd", "must be positive and finite"));
    }
    if !(bs_height > 0.0 && bs_height.is_finite()) {
        return Err(SimError::config("layout.bs_height", "must be positive"));
    }
    if cells_per_site != 1 && cells_per_site != 3 {
        return Err(SimError::config(
            "layout.cells_per_site",
            "only 1 or 3 cells per site are supported",
        ));
    }

    let r = rings as i64;
    let mut nodes = Vec::new();
    for q in -r..=r {
        for s in -r..=r {
            let ring = hex_ring(q, s);
            if ring <= r {
                let p = axial_to_xy(q, s, isd);
                let ang = p.y.atan2(p.x).rem_euclid(std::f64::consts::TAU);
                nodes.push((ring, if ring == 0 { 0.0 } else { ang }, p));
            }
        }
    }
    nodes.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let sites: Vec<Site> = nodes
        .iter()
        .enumerate()
        .map(|(id, &(ring, _, position))| Site {
            id,
            position,
            antenna_height: bs_height,
            ring: ring as u32,
        })
        .collect();

    let step = 360.0 / cells_per_site as f64;
    let cells = sites
        .iter()
        .flat_map(|s| {
            (0..cells_per_site).map(move |k| Cell {
                id: s.id * cells_per_site + k,
                site: s.id,
                azimuth: k as f64 * step,
            })
        })
        .collect();

    // (2R+1, -R) and its five 60° rotations; rotation in axial is (q, r) -> (-r, q + r).
    let mut wrap = Vec::with_capacity(6);
    let (mut q, mut s) = (2 * r + 1, -r);
    for _ in 0..6 {
        wrap.push(axial_to_xy(q, s, isd));
        (q, s) = (-s, q + s);
    }

    Ok(NetworkLayout {
        sites,
        cells,
        cells_per_site,
        inter_site_distance: isd,
        rings,
        wrap,
    })
}

impl NetworkLayout {
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn site_of(&self, cell: usize) -> &Site {
        &self.sites[self.cells[cell].site]
    }

    /// Circumradius of a site hexagon.
    pub fn hex_radius(&self) -> f64 {
        self.inter_site_distance / 3f64.sqrt()
    }

    /// Displacement from `from` to the nearest wraparound image of `to`.
    pub fn wrap_vector(&self, from: Point2, to: Point2) -> Point2 {
        let mut best = to - from;
        let mut best_d2 = best.x * best.x + best.y * best.y;
        for &t in &self.wrap {
            let v = to + t - from;
            let d2 = v.x * v.x + v.y * v.y;
            if d2 < best_d2 {
                best = v;
                best_d2 = d2;
            }
        }
        best
    }

    /// True when `p` lies in the union of the cluster's site hexagons.
    pub fn contains(&self, p: Point2) -> bool {
        let (q, r) = nearest_axial(p, self.inter_site_distance);
        hex_ring(q, r) <= self.rings as i64
    }

    /// Maps a point into the cluster using at most two wraparound steps.
    pub fn fold(&self, p: Point2) -> Point2 {
        if self.contains(p) {
            return p;
        }
        for &t in &self.wrap {
            if self.contains(p + t) {
                return p + t;
            }
        }
        for &t1 in &self.wrap {
            for &t2 in &self.wrap {
                let c = p + t1 + t2;
                if self.contains(c) {
                    return c;
                }
            }
        }
        p
    }

    /// Rhombus of plane points belonging to `cell`: `origin + u*e1 + v*e2`
    /// for `u, v` in `[0, 1]`. For single-cell sites the three rhombi of the
    /// hexagon are returned by [`NetworkLayout::cell_rhombi`].
    pub fn cell_rhombi(&self, cell: usize) -> Vec<(Point2, Point2, Point2)> {
        let c = &self.cells[cell];
        let o = self.sites[c.site].position;
        let rh = self.hex_radius();
        let rhombus = |az: f64| {
            let a = (az - 60.0).to_radians();
            let b = (az + 60.0).to_radians();
            (
                o,
                Point2::new(rh * a.cos(), rh * a.sin()),
                Point2::new(rh * b.cos(), rh * b.sin()),
            )
        };
        if self.cells_per_site == 3 {
            vec![rhombus(c.azimuth)]
        } else {
            vec![rhombus(0.0), rhombus(120.0), rhombus(240.0)]
        }
    }
}

/// Shortest 2-D distance between `a` and `b` over the identity and all
/// wraparound translations.
pub fn wrap_distance(a: Point2, b: Point2, layout: &NetworkLayout) -> f64 {
    layout.wrap_vector(a, b).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UeKind {
    Terrestrial,
    Aerial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserTerminal {
    pub id: usize,
    /// `z` equals `height_agl` (flat ground).
    pub position: Point3,
    pub height_agl: f64,
    pub kind: UeKind,
    /// Cell whose area the UE was dropped in (not necessarily its server).
    pub drop_cell: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropParams {
    pub per_cell: usize,
    /// Heights assigned round-robin to aerial UEs.
    pub aerial_heights: Vec<f64>,
    pub aerial_ratio: f64,
    pub ground_height: f64,
    /// Minimum 2-D distance to the dropping site.
    pub min_distance: f64,
}

/// Drops `per_cell` UEs uniformly over every cell's area.
///
/// `round(aerial_ratio * total)` UEs, chosen uniformly at random, are aerial
/// and take the heights in `params.aerial_heights` cyclically; the remainder
/// sit at the ground height. Identical seeds give identical drops.
pub fn drop_ues(
    layout: &NetworkLayout,
    params: &DropParams,
    seed: u64,
    drop: u64,
) -> Result<Vec<UserTerminal>> {
    if params.aerial_heights.is_empty() {
        return Err(SimError::config("heights", "list of UE heights is empty"));
    }
    if params.per_cell == 0 {
        return Err(SimError::config("per_cell", "must be at least 1"));
    }
    if !(0.0..=1.0).contains(&params.aerial_ratio) {
        return Err(SimError::config("aerial_ratio", "must lie in [0, 1]"));
    }
    if let Some(h) = params
        .aerial_heights
        .iter()
        .chain(std::iter::once(&params.ground_height))
        .find(|h| !(**h > 0.0 && h.is_finite()))
    {
        return Err(SimError::config("heights", format!("height {h} must be > 0")));
    }
    let min_d = params.min_distance.min(0.9 * layout.hex_radius());

    let mut rng = rng::stream(Domain::Drop, &[seed, drop]);
    let total = layout.n_cells() * params.per_cell;
    let mut ues = Vec::with_capacity(total);
    for cell in 0..layout.n_cells() {
        let rhombi = layout.cell_rhombi(cell);
        for _ in 0..params.per_cell {
            let p = loop {
                let (o, e1, e2) = rhombi[rng.random_range(0..rhombi.len())];
                let (u, v): (f64, f64) = (rng.random(), rng.random());
                let off = e1 * u + e2 * v;
                if off.norm() >= min_d {
                    break o + off;
                }
            };
            ues.push(UserTerminal {
                id: ues.len(),
                position: Point3::new(p.x, p.y, params.ground_height),
                height_agl: params.ground_height,
                kind: UeKind::Terrestrial,
                drop_cell: cell,
            });
        }
    }

    let n_aerial = (params.aerial_ratio * total as f64).round() as usize;
    let mut chosen = index::sample(&mut rng, total, n_aerial).into_vec();
    chosen.sort_unstable();
    for (k, id) in chosen.into_iter().enumerate() {
        let h = params.aerial_heights[k % params.aerial_heights.len()];
        let ue = &mut ues[id];
        ue.kind = UeKind::Aerial;
        ue.height_agl = h;
        ue.position.z = h;
    }
    Ok(ues)
}

/// Index of the strongest entry; ties go to the lowest cell id.
pub fn argmax_cell(gains: impl IntoIterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (cell, g) in gains {
        best = match best {
            None => Some((cell, g)),
            Some((bc, bg)) if g > bg || (g == bg && cell < bc) => Some((cell, g)),
            keep => keep,
        };
    }
    best.map(|(c, _)| c)
}

/// Cell with the largest coupling gain.
pub fn select_serving_cell(links: &[LinkState]) -> Result<usize> {
    argmax_cell(links.iter().map(|l| (l.cell, l.coupling_gain)))
        .ok_or_else(|| SimError::Runtime("serving-cell selection over an empty link list".into()))
}
