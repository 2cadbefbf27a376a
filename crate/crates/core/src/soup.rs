//! Brownian loop-soup sampling and extraction of simple CLE loops.
//!
//! A soup of Brownian bridges is thrown in a disk with the intensity that
//! matches the target loop ensemble, the loops are clustered by polyline
//! intersection, and the outer boundaries of the outermost clusters are the
//! CLE loops. The boundary of the rough domain `D` is the outermost
//! boundary surrounding the origin; the ensemble inside `D` reuses the
//! soup loops that fall entirely inside it (restriction property) rather
//! than sampling a second soup.

use crate::geom::{loops_intersect, Loop, LoopError, Point, Rect};
use crate::manifest::RunManifest;
use crate::raster::{flood_from_border, trace_outer_contour, walk_segment, BitGrid};
use crate::rng::{self, RunRng};
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SoupError {
    #[error("kappa must lie in (8/3, 4), got {0}")]
    KappaOutOfRange(f64),
    #[error("intensity must be positive, got {0}")]
    BadIntensity(f64),
    #[error("min_duration must be positive, got {0}")]
    BadMinDuration(f64),
    #[error("bridge duration must be positive, got {0}")]
    BadDuration(f64),
    #[error("a Brownian bridge needs at least 8 steps, got {0}")]
    TooFewSteps(usize),
    #[error("domain radius must be positive, got {0}")]
    BadDomainRadius(f64),
    #[error("raster grid must be at least 256 cells per side, got {0}")]
    RasterTooCoarse(usize),
    #[error("no outermost cluster boundary surrounds the origin")]
    NoDomainLoop,
    #[error(transparent)]
    Loop(#[from] LoopError),
}

/// Soup intensity matching `CLE_kappa` for `kappa` in `(8/3, 4]`.
pub fn default_intensity(kappa: f64) -> f64 {
    (3.0 * kappa - 8.0) * (6.0 - kappa) / (2.0 * kappa)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoupConfig {
    pub kappa: f64,
    pub intensity: f64,
    /// Set when `intensity` was supplied explicitly instead of derived from
    /// `kappa`; recorded in the manifest.
    pub intensity_overridden: bool,
    /// Loop-time cutoff; the soup measure diverges at small durations so a
    /// positive cutoff is mandatory.
    pub min_duration: f64,
    /// Steps of a bridge at the cutoff duration. Longer loops get
    /// proportionally more steps (capped) so every loop is resolved to the
    /// same spatial scale; see [`SoupConfig::steps_for_duration`].
    pub bridge_steps: usize,
    pub domain_radius: f64,
    pub seed: u64,
}

impl SoupConfig {
    /// Configuration with the intensity derived from `kappa` and the
    /// documented defaults for the remaining knobs.
    pub fn new(kappa: f64, seed: u64) -> Result<Self, SoupError> {
        let cfg = SoupConfig {
            kappa,
            intensity: default_intensity(kappa),
            intensity_overridden: false,
            min_duration: 1e-4,
            bridge_steps: 64,
            domain_radius: 1.0,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_intensity(mut self, intensity: f64) -> Self {
        self.intensity = intensity;
        self.intensity_overridden = true;
        self
    }

    pub fn validate(&self) -> Result<(), SoupError> {
        if !(self.kappa > 8.0 / 3.0 && self.kappa < 4.0) {
            return Err(SoupError::KappaOutOfRange(self.kappa));
        }
        if !(self.intensity >= 0.0) {
            return Err(SoupError::BadIntensity(self.intensity));
        }
        if !(self.min_duration > 0.0) {
            return Err(SoupError::BadMinDuration(self.min_duration));
        }
        if self.bridge_steps < 8 {
            return Err(SoupError::TooFewSteps(self.bridge_steps));
        }
        if !(self.domain_radius > 0.0) {
            return Err(SoupError::BadDomainRadius(self.domain_radius));
        }
        Ok(())
    }
}

/// A sampled ensemble: the loops of the CLE inside the rough domain, the
/// domain boundary itself, and the provenance record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopEnsemble {
    pub cle_loops: Vec<Loop>,
    pub domain_loop: Option<Loop>,
    pub manifest: RunManifest,
}

/// Closed polyline sampled as a 2-D Brownian bridge from `root` back to
/// itself, discretized at `steps` equal time increments.
pub fn sample_brownian_loop(
    root: Point,
    duration: f64,
    steps: usize,
    rng: &mut RunRng,
) -> Result<Loop, SoupError> {
    if steps < 8 {
        return Err(SoupError::TooFewSteps(steps));
    }
    if !(duration > 0.0) {
        return Err(SoupError::BadDuration(duration));
    }
    let n = steps;
    let step_sd = libm::sqrt(duration / n as f64);
    let mut walk = Vec::with_capacity(n + 1);
    walk.push(Point::new(0.0, 0.0));
    let mut acc = Point::new(0.0, 0.0);
    for _ in 0..n {
        let (gx, gy) = rng.normal_pair();
        acc = acc + Point::new(gx * step_sd, gy * step_sd);
        walk.push(acc);
    }
    let end = walk[n];
    let vertices = (0..n)
        .map(|k| {
            let f = k as f64 / n as f64;
            root + (walk[k] - end * f)
        })
        .collect();
    Ok(Loop::new(vertices)?)
}

/// Mean of the Poisson loop count: `intensity` times the mass that the
/// truncated rooted loop measure `dt/(2 pi t^2) dA` gives to roots in the
/// disk and durations past the cutoff.
pub fn expected_loop_count(config: &SoupConfig) -> f64 {
    let area = core::f64::consts::PI * config.domain_radius * config.domain_radius;
    config.intensity * area / (2.0 * core::f64::consts::PI * config.min_duration)
}

/// Poissonian Brownian loop soup in the disk of `config.domain_radius`.
/// An empty result is a legitimate sample, not an error.
pub fn sample_loop_soup(config: &SoupConfig) -> Result<Vec<Loop>, SoupError> {
    config.validate()?;
    let mut rng = RunRng::from_stream(config.seed, rng::tags::SOUP, 0);
    let count = rng.poisson(expected_loop_count(config));
    let r = config.domain_radius;
    let mut loops = Vec::with_capacity(count as usize);
    for _ in 0..count {
        // Uniform root in the disk, polar inversion.
        let rad = r * libm::sqrt(rng.uniform());
        let ang = rng.range(0.0, 2.0 * core::f64::consts::PI);
        let root = Point::new(rad * libm::cos(ang), rad * libm::sin(ang));
        // P[T > t] = t0/t for the truncated t^-2 duration density.
        let duration = config.min_duration / rng.uniform_pos();
        let lp = sample_brownian_loop(root, duration, config.bridge_steps, &mut rng)?;
        // Roots are inside the disk so this only guards pathological input:
        // a loop that ends up wholly outside the domain carries no carpet
        // information and is dropped.
        if lp.vertices().iter().any(|p| p.norm() <= r) {
            loops.push(lp);
        }
    }
    Ok(loops)
}

// ---------------------------------------------------------------------------
// Clustering

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            core::cmp::Ordering::Less => self.parent[ra] = rb,
            core::cmp::Ordering::Greater => self.parent[rb] = ra,
            core::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Groups loops into clusters connected through chains of pairwise
/// polyline intersections. Candidate pairs come from a spatial hash of the
/// loop segments; each candidate is confirmed with the exact segment test.
/// Clusters are ordered by smallest member index, members ascending.
pub fn cluster_loops(loops: &[Loop]) -> Vec<Vec<usize>> {
    let n = loops.len();
    if n == 0 {
        return Vec::new();
    }
    // Hash cell comparable to the typical loop size, clamped so a handful
    // of huge loops cannot blow up the bucket population.
    let mut sides: Vec<f64> = loops.iter().map(|l| l.bbox().side()).collect();
    sides.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let global = Rect::of_points(
        &loops
            .iter()
            .flat_map(|l| [l.bbox().min, l.bbox().max])
            .collect::<Vec<_>>(),
    )
    .unwrap();
    let cell = sides[n / 2].max(global.side() / 2048.0).max(1e-12);
    let origin = global.min;

    let mut buckets: BTreeMap<(i64, i64), Vec<u32>> = BTreeMap::new();
    for (idx, lp) in loops.iter().enumerate() {
        let mut cells: BTreeSet<(i64, i64)> = BTreeSet::new();
        for (a, b) in lp.segments() {
            walk_segment(a, b, origin, cell, |i, j| {
                cells.insert((i, j));
            });
        }
        for key in cells {
            buckets.entry(key).or_default().push(idx as u32);
        }
    }

    let mut uf = UnionFind::new(n);
    let mut candidates: BTreeSet<(u32, u32)> = BTreeSet::new();
    for ids in buckets.values() {
        for (k, &a) in ids.iter().enumerate() {
            for &b in &ids[k + 1..] {
                let key = if a < b { (a, b) } else { (b, a) };
                candidates.insert(key);
            }
        }
    }
    for (a, b) in candidates {
        let (ia, ib) = (a as usize, b as usize);
        if uf.find(ia) != uf.find(ib) && loops_intersect(&loops[ia], &loops[ib]) {
            uf.union(ia, ib);
        }
    }

    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = uf.find(i);
        by_root.entry(r).or_default().push(i);
    }
    let mut clusters: Vec<Vec<usize>> = by_root.into_values().collect();
    clusters.sort_by_key(|c| c[0]);
    clusters
}

/// Brute-force reference clustering: transitive closure of all-pairs
/// polyline intersection. Quadratic; intended for oracle checks against
/// [`cluster_loops`].
pub fn cluster_loops_brute_force(loops: &[Loop]) -> Vec<Vec<usize>> {
    let n = loops.len();
    let mut uf = UnionFind::new(n);
    for a in 0..n {
        for b in a + 1..n {
            if loops_intersect(&loops[a], &loops[b]) {
                uf.union(a, b);
            }
        }
    }
    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = uf.find(i);
        by_root.entry(r).or_default().push(i);
    }
    let mut clusters: Vec<Vec<usize>> = by_root.into_values().collect();
    clusters.sort_by_key(|c| c[0]);
    clusters
}

// ---------------------------------------------------------------------------
// Outermost boundaries

/// Rasterized hull of one cluster: the cells its polylines pass through
/// plus everything those cells enclose.
struct ClusterRaster {
    /// Window offset in global cell indices.
    x0: i64,
    y0: i64,
    curve: BitGrid,
    filled: BitGrid,
}

impl ClusterRaster {
    fn build(members: &[usize], loops: &[Loop], origin: Point, cell: f64) -> Self {
        let boxes: Vec<Point> = members
            .iter()
            .flat_map(|&i| {
                let b = loops[i].bbox();
                [b.min, b.max]
            })
            .collect();
        let bbox = Rect::of_points(&boxes).unwrap();
        let x0 = libm::floor((bbox.min.x - origin.x) / cell) as i64 - 1;
        let y0 = libm::floor((bbox.min.y - origin.y) / cell) as i64 - 1;
        let x1 = libm::floor((bbox.max.x - origin.x) / cell) as i64 + 1;
        let y1 = libm::floor((bbox.max.y - origin.y) / cell) as i64 + 1;
        let w = (x1 - x0 + 1) as usize;
        let h = (y1 - y0 + 1) as usize;
        let mut curve = BitGrid::new(w, h);
        for &i in members {
            for (a, b) in loops[i].segments() {
                walk_segment(a, b, origin, cell, |ci, cj| {
                    curve.set((ci - x0) as usize, (cj - y0) as usize, true);
                });
            }
        }
        let reached = flood_from_border(&curve);
        let mut filled = BitGrid::new(w, h);
        for j in 0..h {
            for i in 0..w {
                if !reached.get(i, j) {
                    filled.set(i, j, true);
                }
            }
        }
        ClusterRaster {
            x0,
            y0,
            curve,
            filled,
        }
    }

    #[inline]
    fn filled_at_global(&self, i: i64, j: i64) -> bool {
        self.filled.get_signed(i - self.x0, j - self.y0)
    }

    #[inline]
    fn interior_at_global(&self, i: i64, j: i64) -> bool {
        self.filled.get_signed(i - self.x0, j - self.y0)
            && !self.curve.get_signed(i - self.x0, j - self.y0)
    }

    fn cell_bbox(&self) -> (i64, i64, i64, i64) {
        (
            self.x0,
            self.y0,
            self.x0 + self.filled.w as i64 - 1,
            self.y0 + self.filled.h as i64 - 1,
        )
    }

    fn filled_count(&self) -> usize {
        self.filled.count()
    }

    /// Whether this hull sits inside `other`'s hull. Clusters are either
    /// nested or disjoint, so a few sampled filled cells decide it; all of
    /// them must land in `other` to tolerate one-cell raster noise.
    fn inside(&self, other: &ClusterRaster) -> bool {
        let mut seen = 0usize;
        let mut checked = 0usize;
        let stride = (self.filled.w * self.filled.h / 16).max(1);
        let mut k = 0usize;
        for j in 0..self.filled.h {
            for i in 0..self.filled.w {
                if self.filled.get(i, j) {
                    if k % stride == 0 {
                        checked += 1;
                        if other.filled_at_global(self.x0 + i as i64, self.y0 + j as i64) {
                            seen += 1;
                        }
                    }
                    k += 1;
                }
            }
        }
        checked > 0 && seen == checked
    }
}

/// One outermost cluster boundary plus the index of the cluster it came
/// from.
pub struct OutermostBoundary {
    pub cluster: usize,
    pub contour: Loop,
}

/// Survivors of the nesting discard, with the position (into `boundaries`)
/// of the one surrounding the origin, if any.
pub struct OutermostSet {
    pub boundaries: Vec<OutermostBoundary>,
    pub domain: Option<usize>,
}

/// Rasterizes every cluster hull on a grid with `raster_n` cells along the
/// longest side of the joint bounding box, discards clusters nested inside
/// another cluster's hull, and traces each survivor's outer contour.
pub fn outermost_clusters(
    clusters: &[Vec<usize>],
    loops: &[Loop],
    raster_n: usize,
) -> Result<OutermostSet, SoupError> {
    if raster_n < 256 {
        return Err(SoupError::RasterTooCoarse(raster_n));
    }
    if clusters.is_empty() {
        return Ok(OutermostSet {
            boundaries: Vec::new(),
            domain: None,
        });
    }
    let global = Rect::of_points(
        &loops
            .iter()
            .flat_map(|l| [l.bbox().min, l.bbox().max])
            .collect::<Vec<_>>(),
    )
    .unwrap();
    let cell = (global.side() / raster_n as f64).max(1e-300);
    let origin = global.min;

    let rasters: Vec<ClusterRaster> = clusters
        .iter()
        .map(|members| ClusterRaster::build(members, loops, origin, cell))
        .collect();

    let counts: Vec<usize> = rasters.iter().map(|r| r.filled_count()).collect();
    let mut discarded = vec![false; clusters.len()];
    for a in 0..rasters.len() {
        let (ax0, ay0, ax1, ay1) = rasters[a].cell_bbox();
        for b in 0..rasters.len() {
            if a == b {
                continue;
            }
            let (bx0, by0, bx1, by1) = rasters[b].cell_bbox();
            if ax0 < bx0 || ay0 < by0 || ax1 > bx1 || ay1 > by1 {
                continue;
            }
            // When two hulls raster-contain each other (near-coincident at
            // cell scale) only the smaller one is dropped.
            if counts[a] > counts[b] || (counts[a] == counts[b] && a < b) {
                continue;
            }
            if rasters[a].inside(&rasters[b]) {
                discarded[a] = true;
                break;
            }
        }
    }

    // Construction invariant: among survivors, the enclosed-minus-curve
    // cell sets are pairwise disjoint on the extraction grid.
    #[cfg(debug_assertions)]
    {
        let survivors: Vec<usize> = (0..rasters.len()).filter(|&i| !discarded[i]).collect();
        for (k, &a) in survivors.iter().enumerate() {
            for &b in &survivors[k + 1..] {
                let (ax0, ay0, ax1, ay1) = rasters[a].cell_bbox();
                let (bx0, by0, bx1, by1) = rasters[b].cell_bbox();
                let (x0, y0) = (ax0.max(bx0), ay0.max(by0));
                let (x1, y1) = (ax1.min(bx1), ay1.min(by1));
                for j in y0..=y1 {
                    for i in x0..=x1 {
                        debug_assert!(
                            !(rasters[a].interior_at_global(i, j)
                                && rasters[b].interior_at_global(i, j)),
                            "outermost clusters {a} and {b} share interior cell ({i},{j})"
                        );
                    }
                }
            }
        }
    }

    let mut boundaries = Vec::new();
    let mut domain = None;
    for (idx, raster) in rasters.iter().enumerate() {
        if discarded[idx] {
            continue;
        }
        let contour = match trace_outer_contour(&raster.filled, origin, cell) {
            Some(c) => c,
            None => continue,
        };
        debug_assert!(contour.signed_area() > 0.0);
        if domain.is_none() && contour.contains(Point::new(0.0, 0.0)) {
            domain = Some(boundaries.len());
        }
        boundaries.push(OutermostBoundary {
            cluster: idx,
            contour,
        });
    }
    Ok(OutermostSet {
        boundaries,
        domain,
    })
}

/// Spec-level wrapper around [`outermost_clusters`]: packages the surviving
/// boundaries as an ensemble whose `domain_loop` is the boundary
/// surrounding the origin.
pub fn outermost_boundaries(
    clusters: &[Vec<usize>],
    loops: &[Loop],
    raster_n: usize,
    manifest: RunManifest,
) -> Result<LoopEnsemble, SoupError> {
    let set = outermost_clusters(clusters, loops, raster_n)?;
    let domain_loop = set.domain.map(|i| set.boundaries[i].contour.clone());
    Ok(LoopEnsemble {
        cle_loops: set.boundaries.into_iter().map(|b| b.contour).collect(),
        domain_loop,
        manifest,
    })
}

/// Note recorded in every ensemble manifest for the restriction-property
/// shortcut (the inner ensemble reuses soup loops instead of resampling).
pub const RESTRICTION_NOTE: &str =
    "inner CLE approximated by loop-soup restriction to the domain loop interior";

/// Full sampling pipeline for the rough-domain setup: soup restricted to
/// the sampling disk, clustering, domain-loop extraction, then the inner
/// ensemble from the loops that fall entirely inside the domain.
///
/// The restriction to loops contained in the disk realizes the ensemble
/// *in* the disk (the same restriction property used for the inner
/// conditioning); without it the unbounded duration law produces clusters
/// far larger than the disk itself.
///
/// Fails with [`SoupError::NoDomainLoop`] when no outermost boundary
/// surrounds the origin; callers resample with a fresh seed.
pub fn sample_cle_ensemble(config: &SoupConfig, raster_n: usize) -> Result<LoopEnsemble, SoupError> {
    config.validate()?;
    if raster_n < 256 {
        return Err(SoupError::RasterTooCoarse(raster_n));
    }
    let r = config.domain_radius;
    let loops: Vec<Loop> = sample_loop_soup(config)?
        .into_iter()
        .filter(|lp| lp.vertices().iter().all(|p| p.norm() <= r))
        .collect();
    let clusters = cluster_loops(&loops);
    let outer = outermost_clusters(&clusters, &loops, raster_n)?;
    let domain_pos = outer.domain.ok_or(SoupError::NoDomainLoop)?;
    let domain_cluster = outer.boundaries[domain_pos].cluster;
    let domain_loop = outer.boundaries[domain_pos].contour.clone();

    // The domain-cluster raster decides strict interiority: a loop is kept
    // when all its vertices land in filled-but-not-curve cells, so loops
    // touching the boundary fabric are excluded (boundary points count as
    // outside the open domain).
    let global = Rect::of_points(
        &loops
            .iter()
            .flat_map(|l| [l.bbox().min, l.bbox().max])
            .collect::<Vec<_>>(),
    )
    .unwrap();
    let cell = (global.side() / raster_n as f64).max(1e-300);
    let origin = global.min;
    let domain_raster = ClusterRaster::build(&clusters[domain_cluster], &loops, origin, cell);
    let to_cell = |p: Point| -> (i64, i64) {
        (
            libm::floor((p.x - origin.x) / cell) as i64,
            libm::floor((p.y - origin.y) / cell) as i64,
        )
    };
    let inner: Vec<Loop> = loops
        .iter()
        .filter(|lp| {
            lp.vertices().iter().all(|&v| {
                let (i, j) = to_cell(v);
                domain_raster.interior_at_global(i, j)
            })
        })
        .cloned()
        .collect();

    let inner_clusters = cluster_loops(&inner);
    let inner_outer = outermost_clusters(&inner_clusters, &inner, raster_n)?;
    let cle_loops: Vec<Loop> = inner_outer
        .boundaries
        .into_iter()
        .map(|b| b.contour)
        .collect();

    let mut manifest = RunManifest::new(
        env!("CARGO_PKG_VERSION"),
        config.seed,
        crate::manifest::fnv1a64(&serde_json_config_bytes(config)),
        "sample",
    )
    .with_note(RESTRICTION_NOTE);
    if config.intensity_overridden {
        manifest = manifest.with_note("soup intensity overridden");
    }
    Ok(LoopEnsemble {
        cle_loops,
        domain_loop: Some(domain_loop),
        manifest,
    })
}

/// Canonical byte form of the soup configuration for hashing; field order
/// is fixed here, independent of any serializer.
fn serde_json_config_bytes(config: &SoupConfig) -> Vec<u8> {
    let mut out = Vec::new();
    let push_f64 = |v: f64, out: &mut Vec<u8>| out.extend_from_slice(&v.to_bits().to_le_bytes());
    push_f64(config.kappa, &mut out);
    push_f64(config.intensity, &mut out);
    out.push(config.intensity_overridden as u8);
    push_f64(config.min_duration, &mut out);
    out.extend_from_slice(&(config.bridge_steps as u64).to_le_bytes());
    push_f64(config.domain_radius, &mut out);
    out.extend_from_slice(&config.seed.to_le_bytes());
    out
}

/// Rasterized-interior overlap check between two closed contours at the
/// given cell size, with one cell of erosion around each contour's own
/// curve cells (the boundary-tracing tolerance is one cell, so cells
/// hugging a contour do not count as its interior).
pub fn rasterized_interiors_intersect(a: &Loop, b: &Loop, cell: f64) -> bool {
    if !a.bbox().intersects(&b.bbox()) {
        return false;
    }
    let global = Rect::of_points(&[a.bbox().min, a.bbox().max, b.bbox().min, b.bbox().max]).unwrap();
    let origin = global.min;
    let ra = ClusterRaster::build(&[0], core::slice::from_ref(a), origin, cell);
    let rb = ClusterRaster::build(&[0], core::slice::from_ref(b), origin, cell);
    let eroded_interior = |r: &ClusterRaster, i: i64, j: i64| -> bool {
        if !r.filled_at_global(i, j) {
            return false;
        }
        for dj in -1..=1 {
            for di in -1..=1 {
                if r.curve.get_signed(i - r.x0 + di, j - r.y0 + dj) {
                    return false;
                }
            }
        }
        true
    };
    for j in 0..ra.filled.h {
        for i in 0..ra.filled.w {
            let (gi, gj) = (ra.x0 + i as i64, ra.y0 + j as i64);
            if eroded_interior(&ra, gi, gj) && eroded_interior(&rb, gi, gj) {
                return true;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::circle_loop;

    fn rng() -> RunRng {
        RunRng::from_stream(0xC1E, rng::tags::SELFTEST, 0)
    }

    #[test]
    fn bridge_closes_and_respects_step_floor() {
        let mut r = rng();
        let lp = sample_brownian_loop(Point::new(0.0, 0.0), 1.0, 64, &mut r).unwrap();
        assert_eq!(lp.len(), 64);
        assert!(matches!(
            sample_brownian_loop(Point::new(0.0, 0.0), 1.0, 7, &mut r),
            Err(SoupError::TooFewSteps(7))
        ));
    }

    #[test]
    fn bridge_translation_equivariance() {
        let at_origin = {
            let mut r = rng();
            sample_brownian_loop(Point::new(0.0, 0.0), 0.7, 32, &mut r).unwrap()
        };
        let shifted = {
            let mut r = rng();
            sample_brownian_loop(Point::new(1.0, 1.0), 0.7, 32, &mut r).unwrap()
        };
        for (p, q) in at_origin.vertices().iter().zip(shifted.vertices()) {
            assert_eq!(p.x + 1.0, q.x);
            assert_eq!(p.y + 1.0, q.y);
        }
    }

    #[test]
    fn bridge_brownian_scaling_with_fixed_seed() {
        // Same stream, durations t and 1: the paths are related by the
        // exact sqrt(t) scaling of the increments.
        let max_excursion = |duration: f64| -> f64 {
            let mut r = rng();
            let lp = sample_brownian_loop(Point::new(0.0, 0.0), duration, 128, &mut r).unwrap();
            lp.vertices()
                .iter()
                .map(|p| p.norm())
                .fold(0.0, f64::max)
        };
        let base = max_excursion(1.0);
        for &t in &[1e-2, 1e-4, 1e-6] {
            let ratio = max_excursion(t) / base;
            assert!(
                (ratio / libm::sqrt(t) - 1.0).abs() < 1e-9,
                "duration {t}: ratio {ratio}"
            );
        }
    }

    #[test]
    fn zero_intensity_gives_empty_soup() {
        let cfg = SoupConfig::new(3.0, 11).unwrap().with_intensity(0.0);
        assert!(sample_loop_soup(&cfg).unwrap().is_empty());
    }

    #[test]
    fn kappa_three_default_intensity() {
        let cfg = SoupConfig::new(3.0, 1).unwrap();
        assert_eq!(cfg.intensity, 0.5);
        assert!(!cfg.intensity_overridden);
    }

    #[test]
    fn config_rejects_bad_fields() {
        assert!(matches!(
            SoupConfig::new(4.5, 0),
            Err(SoupError::KappaOutOfRange(_))
        ));
        let mut cfg = SoupConfig::new(3.0, 0).unwrap();
        cfg.min_duration = 0.0;
        assert!(matches!(
            cfg.validate(),
            Err(SoupError::BadMinDuration(_))
        ));
    }

    #[test]
    fn clustering_matches_circle_intuition() {
        let a = circle_loop(Point::new(0.0, 0.0), 1.0, 32);
        let b = circle_loop(Point::new(1.2, 0.0), 1.0, 32);
        let far = circle_loop(Point::new(9.0, 0.0), 1.0, 32);
        let clusters = cluster_loops(&[a.clone(), b.clone(), far.clone()]);
        assert_eq!(clusters, vec![vec![0, 1], vec![2]]);

        let disjoint = cluster_loops(&[a, far]);
        assert_eq!(disjoint, vec![vec![0], vec![1]]);
    }

    #[test]
    fn clustering_matches_brute_force_on_random_soup() {
        let mut cfg = SoupConfig::new(3.0, 2024).unwrap();
        cfg.min_duration = 2e-3;
        cfg.bridge_steps = 24;
        let loops = sample_loop_soup(&cfg).unwrap();
        assert!(
            loops.len() > 20 && loops.len() <= 500,
            "soup size {} outside oracle range",
            loops.len()
        );
        assert_eq!(cluster_loops(&loops), cluster_loops_brute_force(&loops));
    }

    #[test]
    fn nesting_discard_keeps_outer_circle() {
        let inner = circle_loop(Point::new(0.0, 0.0), 0.4, 64);
        let outer = circle_loop(Point::new(0.0, 0.0), 1.0, 64);
        let clusters = cluster_loops(&[inner.clone(), outer.clone()]);
        assert_eq!(clusters.len(), 2);
        let set = outermost_clusters(&clusters, &[inner, outer], 256).unwrap();
        assert_eq!(set.boundaries.len(), 1);
        assert_eq!(set.boundaries[0].cluster, 1);
        assert!(set.domain.is_some());
    }

    #[test]
    fn single_circle_survives_with_close_contour() {
        let c = circle_loop(Point::new(0.2, -0.1), 0.8, 256);
        let clusters = cluster_loops(core::slice::from_ref(&c));
        let set = outermost_clusters(&clusters, core::slice::from_ref(&c), 512).unwrap();
        assert_eq!(set.boundaries.len(), 1);
        let traced = &set.boundaries[0].contour;
        // Tolerance is one raster cell.
        let cell = c.bbox().side() / 512.0 * 2.0;
        for v in traced.vertices() {
            let d = (v.dist(Point::new(0.2, -0.1)) - 0.8).abs();
            assert!(d <= 2.0 * cell, "contour point off the circle by {d}");
        }
        assert_eq!(set.domain, Some(0));
    }

    #[test]
    fn ensemble_loops_have_disjoint_interiors() {
        let mut cfg = SoupConfig::new(3.0, 77).unwrap();
        cfg.min_duration = 5e-4;
        cfg.bridge_steps = 32;
        let ens = sample_first_ensemble(cfg);
        let loops = &ens.cle_loops;
        let cell = ens.domain_loop.as_ref().unwrap().bbox().side() / 256.0;
        for i in 0..loops.len() {
            for j in i + 1..loops.len() {
                assert!(
                    !rasterized_interiors_intersect(&loops[i], &loops[j], cell),
                    "interiors of loops {i} and {j} overlap"
                );
            }
        }
        let domain = ens.domain_loop.expect("domain loop present");
        assert_eq!(domain.winding_number(Point::new(0.0, 0.0)), 1);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let cfg = {
            let mut c = SoupConfig::new(3.0, 4242).unwrap();
            c.min_duration = 5e-4;
            c.bridge_steps = 24;
            c
        };
        let a = sample_first_ensemble(cfg.clone());
        let b = sample_first_ensemble(cfg);
        assert_eq!(a, b);
    }

    /// Resamples with incremented seeds until a domain loop appears; test
    /// helper mirroring what replica drivers do.
    fn sample_first_ensemble(mut cfg: SoupConfig) -> LoopEnsemble {
        for _ in 0..32 {
            match sample_cle_ensemble(&cfg, 256) {
                Ok(e) => return e,
                Err(SoupError::NoDomainLoop) => {
                    cfg.seed = crate::rng::mix(cfg.seed);
                }
                Err(e) => panic!("unexpected sampling error: {e}"),
            }
        }
        panic!("no domain loop in 32 attempts");
    }
}
