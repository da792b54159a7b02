//! Point sets, geometric metrics, grid extension and footprints.

pub mod domain;

pub use domain::{Bbox, Boundary, Domain, Polyline};

use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::io::{BufRead, Write};

/// A finite set of centers with stable integer ids.
///
/// Freshly generated sets carry contiguous ids 0..N; sets derived by
/// extension, restriction or footprint selection preserve the ids of the
/// points they keep.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    dim: usize,
    ids: Vec<usize>,
    coords: Vec<f64>, // flat, dim-strided
}

impl PointSet {
    /// Build a set with fresh contiguous ids 0..N.
    pub fn new(dim: usize, points: Vec<Vec<f64>>) -> PointSet {
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in &points {
            assert_eq!(p.len(), dim, "point dimension mismatch");
            assert!(p.iter().all(|v| v.is_finite()), "non-finite coordinate");
            coords.extend_from_slice(p);
        }
        PointSet {
            dim,
            ids: (0..points.len()).collect(),
            coords,
        }
    }

    /// Build a set with explicit ids (must be unique).
    pub fn with_ids(dim: usize, ids: Vec<usize>, coords: Vec<f64>) -> PointSet {
        assert_eq!(ids.len() * dim, coords.len());
        let mut seen = ids.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), ids.len(), "duplicate ids");
        PointSet { dim, ids, coords }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn point(&self, index: usize) -> &[f64] {
        &self.coords[index * self.dim..(index + 1) * self.dim]
    }

    pub fn id(&self, index: usize) -> usize {
        self.ids[index]
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    /// Index of a point by id, or None.
    pub fn index_of(&self, id: usize) -> Option<usize> {
        // ids are usually contiguous-from-zero; fast path first
        if id < self.ids.len() && self.ids[id] == id {
            return Some(id);
        }
        self.ids.iter().position(|&i| i == id)
    }

    /// Lookup table id -> index for repeated queries.
    pub fn id_index(&self) -> HashMap<usize, usize> {
        self.ids
            .iter()
            .enumerate()
            .map(|(idx, &id)| (id, idx))
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> + '_ {
        (0..self.len()).map(move |i| (self.ids[i], self.point(i)))
    }

    /// Exact minimum pairwise distance (brute force).
    pub fn min_pairwise_distance(&self) -> Option<f64> {
        if self.len() < 2 {
            return None;
        }
        let mut best = f64::INFINITY;
        for i in 0..self.len() {
            for j in (i + 1)..self.len() {
                let d = dist(self.point(i), self.point(j));
                if d < best {
                    best = d;
                }
            }
        }
        Some(best)
    }

    /// Distance from `x` to the nearest point of the set.
    pub fn distance_to_set(&self, x: &[f64]) -> f64 {
        (0..self.len())
            .map(|i| dist(x, self.point(i)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Serialize as plain text: header `dim N`, then one point per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.dim, self.len())?;
        for i in 0..self.len() {
            let line: Vec<String> = self.point(i).iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    /// Parse the plain-text format written by [`PointSet::write_text`].
    pub fn read_text<R: BufRead>(r: R) -> Result<PointSet> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty point-set file".into()))??;
        let mut it = header.split_whitespace();
        let dim: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::InvalidInput("bad point-set header".into()))?;
        let n: usize = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::InvalidInput("bad point-set header".into()))?;
        let mut points = Vec::with_capacity(n);
        for line in lines.take(n) {
            let line = line?;
            let p: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidInput(format!("bad coordinate: {e}")))?;
            if p.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "expected {dim} coordinates, got {}",
                    p.len()
                )));
            }
            points.push(p);
        }
        if points.len() != n {
            return Err(Error::InvalidInput(format!(
                "expected {n} points, got {}",
                points.len()
            )));
        }
        Ok(PointSet::new(dim, points))
    }
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Fill distance, separation radius and mesh ratio of a point set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointSetMetrics {
    pub fill_distance: f64,
    pub separation_radius: f64,
    pub mesh_ratio: f64,
    pub probe_resolution: f64,
}

/// Footprint selection parameters: radius = K * h * max(|ln h|, log_floor).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FootprintConfig {
    pub k: f64,
    pub h: f64,
    pub log_floor: f64,
}

impl FootprintConfig {
    pub fn new(k: f64, h: f64) -> FootprintConfig {
        FootprintConfig {
            k,
            h,
            log_floor: 1.0,
        }
    }

    pub fn radius(&self) -> f64 {
        assert!(self.k > 0.0 && self.h > 0.0 && self.h < 1.0);
        self.k * self.h * self.h.ln().abs().max(self.log_floor)
    }
}

/// Measure fill distance (probe grid), separation radius (exact) and mesh
/// ratio of `x` over `domain`.
///
/// The fill distance is the max over inside probe points of the distance to
/// the set; it underestimates the true supremum by at most one probe-cell
/// diagonal. If the requested probe resolution is coarser than h/5 the grid
/// is refined once using a first-pass estimate.
pub fn point_set_metrics(
    x: &PointSet,
    domain: &Domain,
    probe_resolution: f64,
) -> Result<PointSetMetrics> {
    if x.is_empty() {
        return Err(Error::InvalidInput("empty point set".into()));
    }
    let min_dist = x.min_pairwise_distance().ok_or(Error::DegenerateSeparation)?;
    if min_dist <= 0.0 {
        return Err(Error::InvalidInput(
            "duplicate points: separation radius would be zero".into(),
        ));
    }
    let q = 0.5 * min_dist;

    let mut res = probe_resolution;
    let mut h = fill_distance_probe(x, domain, res)?;
    if res > h / 5.0 {
        res = (h / 5.0).min(probe_resolution);
        h = fill_distance_probe(x, domain, res)?;
    }
    Ok(PointSetMetrics {
        fill_distance: h,
        separation_radius: q,
        mesh_ratio: h / q,
        probe_resolution: res,
    })
}

fn fill_distance_probe(x: &PointSet, domain: &Domain, resolution: f64) -> Result<f64> {
    let probes = domain::probe_points(domain.bbox(), resolution);
    let mut h: f64 = 0.0;
    let mut any = false;
    // cell-binned nearest neighbor keeps this usable for dense probe grids
    let index = CellIndex::build(x);
    for p in &probes {
        if domain.is_inside(p) {
            any = true;
            let d = index.nearest_distance(p);
            if d > h {
                h = d;
            }
        }
    }
    if !any {
        return Err(Error::EmptyDomain);
    }
    Ok(h)
}

/// Uniform-cell spatial index for nearest-distance queries.
struct CellIndex<'a> {
    set: &'a PointSet,
    cell: f64,
    origin: Vec<f64>,
    counts: Vec<i64>,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
}

impl<'a> CellIndex<'a> {
    fn build(set: &'a PointSet) -> CellIndex<'a> {
        let dim = set.dim();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for i in 0..set.len() {
            for (k, v) in set.point(i).iter().enumerate() {
                lo[k] = lo[k].min(*v);
                hi[k] = hi[k].max(*v);
            }
        }
        let extent: f64 = lo
            .iter()
            .zip(hi.iter())
            .map(|(a, b)| b - a)
            .fold(0.0, f64::max)
            .max(1e-12);
        // aim for O(1) points per cell
        let target_cells = (set.len() as f64).powf(1.0 / dim as f64).ceil().max(1.0);
        let cell = extent / target_cells;
        let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for i in 0..set.len() {
            let key: Vec<i64> = set
                .point(i)
                .iter()
                .zip(lo.iter())
                .map(|(v, o)| ((v - o) / cell).floor() as i64)
                .collect();
            buckets.entry(key).or_default().push(i);
        }
        let counts: Vec<i64> = lo
            .iter()
            .zip(hi.iter())
            .map(|(a, b)| ((b - a) / cell).floor() as i64 + 1)
            .collect();
        CellIndex {
            set,
            cell,
            origin: lo,
            counts,
            buckets,
        }
    }

    fn nearest_distance(&self, x: &[f64]) -> f64 {
        let dim = self.set.dim();
        let key: Vec<i64> = x
            .iter()
            .zip(self.origin.iter())
            .map(|(v, o)| ((v - o) / self.cell).floor() as i64)
            .collect();
        let max_ring = self
            .counts
            .iter()
            .zip(key.iter())
            .map(|(&c, &k)| (k + 1).max(c - k))
            .max()
            .unwrap_or(1);
        let mut best = f64::INFINITY;
        for ring in 0..=max_ring {
            // any point in a cell at Chebyshev ring r is at least (r-1)*cell away
            if best <= (ring as f64 - 1.0) * self.cell {
                break;
            }
            for c in ring_cells(&key, ring, dim) {
                if let Some(pts) = self.buckets.get(&c) {
                    for &i in pts {
                        let d = dist(x, self.set.point(i));
                        if d < best {
                            best = d;
                        }
                    }
                }
            }
        }
        best
    }
}

/// Cells at exact Chebyshev distance `ring` from `key`.
fn ring_cells(key: &[i64], ring: i64, dim: usize) -> Vec<Vec<i64>> {
    let mut cells: Vec<Vec<i64>> = vec![vec![]];
    for k in 0..dim {
        let mut next = Vec::new();
        for c in &cells {
            for v in (key[k] - ring)..=(key[k] + ring) {
                let mut c2 = c.clone();
                c2.push(v);
                next.push(c2);
            }
        }
        cells = next;
    }
    cells.retain(|c| {
        c.iter()
            .zip(key.iter())
            .map(|(a, b)| (a - b).abs())
            .max()
            .unwrap_or(0)
            == ring
    });
    cells
}

/// Generate a quasi-uniform point set in `domain` by a jittered grid:
/// regular spacing with bounded per-coordinate jitter, rejected against the
/// indicator. The spacing is shrunk until the measured metrics satisfy
/// h <= target_h and rho <= 3.
pub fn generate_quasi_uniform(domain: &Domain, target_h: f64, seed: u64) -> Result<PointSet> {
    if !(target_h > 0.0 && target_h < 1.0) {
        return Err(Error::InvalidInput(format!(
            "target_h must be in (0, 1), got {target_h}"
        )));
    }
    if target_h >= domain.diameter() / 4.0 {
        return Err(Error::InvalidInput(format!(
            "target_h {} too coarse for domain of diameter {}",
            target_h,
            domain.diameter()
        )));
    }
    let dim = domain.dim();
    let mut spacing = target_h / (0.7 * (dim as f64).sqrt());
    for attempt in 0..12u64 {
        let pts = jittered_grid(domain, spacing, seed, attempt);
        if pts.len() < 2 {
            spacing *= 0.8;
            continue;
        }
        let set = PointSet::new(dim, pts);
        let metrics = point_set_metrics(&set, domain, target_h / 10.0)?;
        if metrics.fill_distance <= target_h && metrics.mesh_ratio <= 3.0 {
            return Ok(set);
        }
        spacing *= 0.8;
    }
    Err(Error::InvalidInput(format!(
        "could not reach h <= {target_h} with mesh ratio <= 3 on domain `{}`",
        domain.name()
    )))
}

fn jittered_grid(domain: &Domain, spacing: f64, seed: u64, attempt: u64) -> Vec<Vec<f64>> {
    let dim = domain.dim();
    let bbox = domain.bbox();
    let jitter = spacing / 8.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E3779B97F4A7C15) ^ attempt);
    let counts: Vec<usize> = (0..dim)
        .map(|k| (((bbox.max[k] - bbox.min[k]) / spacing).ceil() as usize).max(1))
        .collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim];
    loop {
        let center: Vec<f64> = (0..dim)
            .map(|k| bbox.min[k] + (idx[k] as f64 + 0.5) * spacing)
            .collect();
        // draw jitter unconditionally to keep the stream aligned across cells
        let jittered: Vec<f64> = center
            .iter()
            .map(|c| c + rng.gen_range(-jitter..=jitter))
            .collect();
        if domain.is_inside(&jittered) {
            out.push(jittered);
        } else if domain.is_inside(&center) {
            out.push(center);
        }
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < counts[k] {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == dim {
                return out;
            }
        }
    }
}

/// Extend `xi` beyond the domain with the lattice h*Z^d, keeping lattice
/// points at distance >= h from the domain, clipped to the bbox of the
/// extended neighborhood. Original ids are preserved; lattice points get
/// fresh ids in lattice order.
pub fn extend_grid(xi: &PointSet, domain: &Domain, h: f64) -> Result<PointSet> {
    if h >= 1.0 {
        return Err(Error::ExtensionRequiresSmallH(h));
    }
    if h <= 0.0 {
        return Err(Error::InvalidInput("extension requires h > 0".into()));
    }
    let dim = domain.dim();
    assert_eq!(xi.dim(), dim);
    let bbox = domain.bbox().inflate(domain.diameter());
    let mut ids = xi.ids().to_vec();
    let mut coords = Vec::from(&xi.coords[..]);
    let mut next_id = xi.ids().iter().copied().max().map_or(0, |m| m + 1);

    let lo: Vec<i64> = (0..dim).map(|k| (bbox.min[k] / h).floor() as i64).collect();
    let hi: Vec<i64> = (0..dim).map(|k| (bbox.max[k] / h).ceil() as i64).collect();
    let mut idx = lo.clone();
    loop {
        let p: Vec<f64> = idx.iter().map(|&i| i as f64 * h).collect();
        if bbox.contains(&p) && domain.distance(&p) >= h {
            ids.push(next_id);
            next_id += 1;
            coords.extend_from_slice(&p);
        }
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] <= hi[k] {
                break;
            }
            idx[k] = lo[k];
            k += 1;
            if k == dim {
                return Ok(PointSet::with_ids(dim, ids, coords));
            }
        }
    }
}

/// Keep exactly the points with dist(x, Omega) <= diam(Omega), preserving ids.
pub fn restrict_to_tilde(x_ext: &PointSet, domain: &Domain) -> PointSet {
    let diam = domain.diameter();
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    for (id, p) in x_ext.iter() {
        if domain.distance(p) <= diam {
            ids.push(id);
            coords.extend_from_slice(p);
        }
    }
    PointSet::with_ids(x_ext.dim(), ids, coords)
}

/// The footprint of a center: all points of `x_tilde` within radius
/// K * h * max(|ln h|, log_floor) of the point with id `xi_id`. The center
/// itself always belongs to its footprint.
pub fn footprint(xi_id: usize, x_tilde: &PointSet, cfg: &FootprintConfig) -> Result<PointSet> {
    let xi_index = x_tilde
        .index_of(xi_id)
        .ok_or_else(|| Error::InvalidInput(format!("id {xi_id} not in point set")))?;
    let center = x_tilde.point(xi_index).to_vec();
    let radius = cfg.radius();
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    for (id, p) in x_tilde.iter() {
        if dist(p, &center) <= radius {
            ids.push(id);
            coords.extend_from_slice(p);
        }
    }
    debug_assert!(ids.contains(&xi_id));
    Ok(PointSet::with_ids(x_tilde.dim(), ids, coords))
}
