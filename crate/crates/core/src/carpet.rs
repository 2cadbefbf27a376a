//! Carpet rasterization and the approximate chemical distance.
//!
//! The carpet of an ensemble is an occupancy grid: cells strictly inside
//! the domain loop are carpet unless they fall in a CLE-loop interior
//! (holes); everything else is exterior. Distances are measured on the
//! eps-box graph: boxes of side `eps` holding at least one carpet cell,
//! adjacent when 4-neighboring boxes have carpet connected within the box
//! pair. The cost of a path is its box count times `eps^2`, a two-sided
//! proxy for the Lebesgue area of its eps-neighborhood; the exact area
//! functional is also provided for validation.

use crate::geom::{Point, Rect};
use crate::raster::{flood_from_border, walk_segment, BitGrid};
use crate::soup::LoopEnsemble;
use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

/// Area comparability constants between box-count estimates and exact
/// eps-neighborhood areas of connected paths (see `PathCost::exact_area`).
pub const AREA_LOWER_CONST: f64 = 1.0 / 18.0;
pub const AREA_UPPER_CONST: f64 = 9.0 * core::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CarpetError {
    #[error("ensemble has no domain loop")]
    DomainLoopMissing,
    #[error("raster grid must be at least 256 cells per side, got {0}")]
    RasterTooCoarse(usize),
    #[error("eps = {eps} must be at least 4h = {min_eps}")]
    EpsTooSmall { eps: f64, min_eps: f64 },
    #[error("no carpet cell within eps of ({x}, {y})")]
    SnapFailure { x: f64, y: f64 },
    #[error("no carpet path between the query points")]
    Disconnected,
    #[error("boundary net needs at least 2 distinct snapped cells")]
    DegenerateNet,
    #[error("every boundary net pair is disconnected")]
    BoundaryNetUnreachable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum CellClass {
    Exterior = 0,
    Hole = 1,
    Carpet = 2,
}

/// Occupancy grid of one carpet. Immutable once built; queries never
/// mutate it, so concurrent reads are safe.
#[derive(Debug, Clone, PartialEq)]
pub struct CarpetMask {
    n: usize,
    h: f64,
    origin: Point,
    cells: Vec<CellClass>,
    boundary_cells: Vec<(u32, u32)>,
    domain_contour: Vec<Point>,
}

impl CarpetMask {
    /// Builds a mask from raw cell classes; boundary cells are derived.
    /// `domain_contour` may be empty for synthetic masks, in which case
    /// boundary-net operations are unavailable.
    pub fn from_parts(
        n: usize,
        h: f64,
        origin: Point,
        cells: Vec<CellClass>,
        domain_contour: Vec<Point>,
    ) -> Self {
        assert_eq!(cells.len(), n * n, "cell buffer must be n x n");
        let mut mask = CarpetMask {
            n,
            h,
            origin,
            cells,
            boundary_cells: Vec::new(),
            domain_contour,
        };
        mask.boundary_cells = mask.compute_boundary_cells();
        mask
    }

    /// All-carpet square mask; synthetic fixture for metric tests.
    pub fn full_square(n: usize, side: f64, origin: Point) -> Self {
        CarpetMask::from_parts(
            n,
            side / n as f64,
            origin,
            vec![CellClass::Carpet; n * n],
            Vec::new(),
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Cell size in domain units.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn bbox(&self) -> Rect {
        let side = self.h * self.n as f64;
        Rect::new(
            self.origin,
            Point::new(self.origin.x + side, self.origin.y + side),
        )
    }

    #[inline]
    pub fn class(&self, i: usize, j: usize) -> CellClass {
        self.cells[j * self.n + i]
    }

    #[inline]
    pub fn is_carpet(&self, i: usize, j: usize) -> bool {
        self.class(i, j) == CellClass::Carpet
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> Point {
        Point::new(
            self.origin.x + (i as f64 + 0.5) * self.h,
            self.origin.y + (j as f64 + 0.5) * self.h,
        )
    }

    /// Grid cell containing `p`, if inside the grid.
    pub fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        let i = libm::floor((p.x - self.origin.x) / self.h);
        let j = libm::floor((p.y - self.origin.y) / self.h);
        if i < 0.0 || j < 0.0 || i >= self.n as f64 || j >= self.n as f64 {
            None
        } else {
            Some((i as usize, j as usize))
        }
    }

    /// Carpet cells adjacent (4-neighborhood) to an exterior cell or the
    /// grid edge, in row-major order.
    pub fn boundary_cells(&self) -> &[(u32, u32)] {
        &self.boundary_cells
    }

    pub fn domain_contour(&self) -> &[Point] {
        &self.domain_contour
    }

    pub fn carpet_cell_count(&self) -> usize {
        self.cells
            .iter()
            .filter(|&&c| c == CellClass::Carpet)
            .count()
    }

    pub fn hole_cell_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == CellClass::Hole).count()
    }

    /// Carpet cells as a fraction of all cells inside the domain loop.
    pub fn carpet_fraction(&self) -> f64 {
        let carpet = self.carpet_cell_count();
        let interior = carpet + self.hole_cell_count();
        if interior == 0 {
            0.0
        } else {
            carpet as f64 / interior as f64
        }
    }

    fn compute_boundary_cells(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        let n = self.n;
        for j in 0..n {
            for i in 0..n {
                if !self.is_carpet(i, j) {
                    continue;
                }
                let on_edge = i == 0 || j == 0 || i + 1 == n || j + 1 == n;
                let touches_exterior = on_edge
                    || self.class(i - 1, j) == CellClass::Exterior
                    || self.class(i + 1, j) == CellClass::Exterior
                    || self.class(i, j - 1) == CellClass::Exterior
                    || self.class(i, j + 1) == CellClass::Exterior;
                if touches_exterior {
                    out.push((i as u32, j as u32));
                }
            }
        }
        out
    }

    /// Nearest carpet cell whose center is within `radius` of `p`;
    /// ties break toward the smaller `(j, i)`.
    pub fn snap_to_carpet(&self, p: Point, radius: f64) -> Result<(usize, usize), CarpetError> {
        let ci = libm::floor((p.x - self.origin.x) / self.h) as i64;
        let cj = libm::floor((p.y - self.origin.y) / self.h) as i64;
        let r_cells = libm::ceil(radius / self.h) as i64 + 1;
        let mut best: Option<(f64, usize, usize)> = None;
        for j in (cj - r_cells).max(0)..=(cj + r_cells).min(self.n as i64 - 1) {
            for i in (ci - r_cells).max(0)..=(ci + r_cells).min(self.n as i64 - 1) {
                let (iu, ju) = (i as usize, j as usize);
                if !self.is_carpet(iu, ju) {
                    continue;
                }
                let d = self.cell_center(iu, ju).dist_sq(p);
                let better = match best {
                    None => true,
                    Some((bd, bi, bj)) => {
                        d < bd || (d == bd && (ju, iu) < (bj, bi))
                    }
                };
                if better {
                    best = Some((d, iu, ju));
                }
            }
        }
        match best {
            Some((d, i, j)) if d <= radius * radius => Ok((i, j)),
            _ => Err(CarpetError::SnapFailure { x: p.x, y: p.y }),
        }
    }
}

/// Square bounding box for rasterizing an ensemble: the domain loop's
/// tight square box padded by two cells of the target grid.
pub fn domain_bbox(ensemble: &LoopEnsemble, n: usize) -> Result<Rect, CarpetError> {
    let lp = ensemble
        .domain_loop
        .as_ref()
        .ok_or(CarpetError::DomainLoopMissing)?;
    let tight = lp.bbox();
    let side = tight.side();
    let pad = 2.0 * side / n as f64;
    let cx = 0.5 * (tight.min.x + tight.max.x);
    let cy = 0.5 * (tight.min.y + tight.max.y);
    let half = side / 2.0 + pad;
    Ok(Rect::new(
        Point::new(cx - half, cy - half),
        Point::new(cx + half, cy + half),
    ))
}

/// Classifies an `n x n` grid over `bbox` (squared on its longest side):
/// cells strictly inside the domain loop are carpet, those also inside a
/// CLE-loop interior are holes, and the rest (including cells on the
/// rasterized domain boundary) are exterior.
pub fn rasterize_carpet(
    ensemble: &LoopEnsemble,
    n: usize,
    bbox: Rect,
) -> Result<CarpetMask, CarpetError> {
    if n < 256 {
        return Err(CarpetError::RasterTooCoarse(n));
    }
    let domain = ensemble
        .domain_loop
        .as_ref()
        .ok_or(CarpetError::DomainLoopMissing)?;
    let side = bbox.side();
    let h = side / n as f64;
    let origin = bbox.min;

    // Domain wall, then flood from the grid border: unreached non-wall
    // cells are strictly inside the domain.
    let mut wall = BitGrid::new(n, n);
    for (a, b) in domain.segments() {
        walk_segment(a, b, origin, h, |i, j| {
            if i >= 0 && j >= 0 && (i as usize) < n && (j as usize) < n {
                wall.set(i as usize, j as usize, true);
            }
        });
    }
    let outside = flood_from_border(&wall);
    let mut cells = vec![CellClass::Exterior; n * n];
    for j in 0..n {
        for i in 0..n {
            if !wall.get(i, j) && !outside.get(i, j) {
                cells[j * n + i] = CellClass::Carpet;
            }
        }
    }

    // Each CLE loop knocks out its filled region (curve cells included:
    // points on a rasterized boundary count as hole).
    for lp in &ensemble.cle_loops {
        let b = lp.bbox();
        let x0 = libm::floor((b.min.x - origin.x) / h) as i64 - 1;
        let y0 = libm::floor((b.min.y - origin.y) / h) as i64 - 1;
        let x1 = libm::floor((b.max.x - origin.x) / h) as i64 + 1;
        let y1 = libm::floor((b.max.y - origin.y) / h) as i64 + 1;
        let w = (x1 - x0 + 1) as usize;
        let ht = (y1 - y0 + 1) as usize;
        let mut curve = BitGrid::new(w, ht);
        for (a, bb) in lp.segments() {
            walk_segment(a, bb, origin, h, |i, j| {
                curve.set((i - x0) as usize, (j - y0) as usize, true);
            });
        }
        let reached = flood_from_border(&curve);
        for j in 0..ht {
            for i in 0..w {
                if reached.get(i, j) {
                    continue;
                }
                let (gi, gj) = (x0 + i as i64, y0 + j as i64);
                if gi < 0 || gj < 0 || gi >= n as i64 || gj >= n as i64 {
                    continue;
                }
                let idx = gj as usize * n + gi as usize;
                if cells[idx] == CellClass::Carpet {
                    cells[idx] = CellClass::Hole;
                }
            }
        }
    }

    Ok(CarpetMask::from_parts(
        n,
        h,
        origin,
        cells,
        domain.vertices().to_vec(),
    ))
}

/// Cost of one box path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathCost {
    pub eps: f64,
    /// Boxes visited, endpoints included; a path within one box counts 1.
    pub boxes: usize,
    /// `boxes * eps^2`.
    pub area_estimate: f64,
    /// Exact eps-neighborhood area of the realized cell path, when
    /// refinement was requested.
    pub exact_area: Option<f64>,
}

/// The eps-box graph over a mask. Nodes are boxes of side `eps` holding at
/// least one carpet cell; 4-adjacent boxes are joined when their carpet is
/// 4-connected within the pair. Build once, query many times.
pub struct BoxGraph<'m> {
    mask: &'m CarpetMask,
    pub eps: f64,
    bw: usize,
    bh: usize,
    /// Box index of each cell column / row (centers decide).
    cell_bx: Vec<usize>,
    cell_by: Vec<usize>,
    /// First cell column / row of each box.
    box_ci: Vec<usize>,
    box_cj: Vec<usize>,
    has_carpet: Vec<bool>,
    open_right: Vec<bool>,
    open_up: Vec<bool>,
}

pub const UNREACHED: u32 = u32::MAX;

impl<'m> BoxGraph<'m> {
    pub fn build(mask: &'m CarpetMask, eps: f64) -> Result<Self, CarpetError> {
        let min_eps = 4.0 * mask.h();
        if !(eps >= min_eps) {
            return Err(CarpetError::EpsTooSmall { eps, min_eps });
        }
        let n = mask.n();
        let h = mask.h();
        let slot = |c: usize| -> usize { (libm::floor((c as f64 + 0.5) * h / eps)) as usize };
        let cell_bx: Vec<usize> = (0..n).map(slot).collect();
        let cell_by = cell_bx.clone();
        let bw = cell_bx[n - 1] + 1;
        let bh = bw;
        let mut box_ci = vec![usize::MAX; bw];
        for (c, &b) in cell_bx.iter().enumerate() {
            if box_ci[b] == usize::MAX {
                box_ci[b] = c;
            }
        }
        let box_cj = box_ci.clone();

        let mut has_carpet = vec![false; bw * bh];
        for j in 0..n {
            for i in 0..n {
                if mask.is_carpet(i, j) {
                    has_carpet[cell_by[j] * bw + cell_bx[i]] = true;
                }
            }
        }

        let mut graph = BoxGraph {
            mask,
            eps,
            bw,
            bh,
            cell_bx,
            cell_by,
            box_ci,
            box_cj,
            has_carpet,
            open_right: vec![false; bw * bh],
            open_up: vec![false; bw * bh],
        };
        for bj in 0..bh {
            for bi in 0..bw {
                if !graph.has_carpet[bj * bw + bi] {
                    continue;
                }
                if bi + 1 < bw && graph.has_carpet[bj * bw + bi + 1] {
                    graph.open_right[bj * bw + bi] = graph.pair_connected((bi, bj), (bi + 1, bj));
                }
                if bj + 1 < bh && graph.has_carpet[(bj + 1) * bw + bi] {
                    graph.open_up[bj * bw + bi] = graph.pair_connected((bi, bj), (bi, bj + 1));
                }
            }
        }
        Ok(graph)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.bw, self.bh)
    }

    pub fn box_of_cell(&self, i: usize, j: usize) -> (usize, usize) {
        (self.cell_bx[i], self.cell_by[j])
    }

    /// Cell index ranges `(i0..i1, j0..j1)` of a box, clipped to the grid.
    fn cell_span(&self, (bi, bj): (usize, usize)) -> (usize, usize, usize, usize) {
        let n = self.mask.n();
        let i0 = self.box_ci[bi];
        let i1 = if bi + 1 < self.bw {
            self.box_ci[bi + 1]
        } else {
            n
        };
        let j0 = self.box_cj[bj];
        let j1 = if bj + 1 < self.bh {
            self.box_cj[bj + 1]
        } else {
            n
        };
        (i0, i1, j0, j1)
    }

    /// Multi-source BFS over the carpet cells of two adjacent boxes: true
    /// when some carpet cell of `a` reaches some carpet cell of `b` without
    /// leaving the pair.
    fn pair_connected(&self, a: (usize, usize), b: (usize, usize)) -> bool {
        let (ai0, ai1, aj0, aj1) = self.cell_span(a);
        let (bi0, bi1, bj0, bj1) = self.cell_span(b);
        let i0 = ai0.min(bi0);
        let i1 = ai1.max(bi1);
        let j0 = aj0.min(bj0);
        let j1 = aj1.max(bj1);
        let w = i1 - i0;
        let h = j1 - j0;
        let in_pair = |i: usize, j: usize| -> bool {
            (i >= ai0 && i < ai1 && j >= aj0 && j < aj1)
                || (i >= bi0 && i < bi1 && j >= bj0 && j < bj1)
        };
        let mut visited = vec![false; w * h];
        let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
        for j in aj0..aj1 {
            for i in ai0..ai1 {
                if self.mask.is_carpet(i, j) {
                    visited[(j - j0) * w + (i - i0)] = true;
                    queue.push_back((i, j));
                }
            }
        }
        while let Some((i, j)) = queue.pop_front() {
            if i >= bi0 && i < bi1 && j >= bj0 && j < bj1 {
                return true;
            }
            let neighbors = [
                (i.wrapping_sub(1), j),
                (i + 1, j),
                (i, j.wrapping_sub(1)),
                (i, j + 1),
            ];
            for (ni, nj) in neighbors {
                if ni < i0 || nj < j0 || ni >= i1 || nj >= j1 || !in_pair(ni, nj) {
                    continue;
                }
                let v = &mut visited[(nj - j0) * w + (ni - i0)];
                if !*v && self.mask.is_carpet(ni, nj) {
                    *v = true;
                    queue.push_back((ni, nj));
                }
            }
        }
        false
    }

    /// Edge-count BFS from a box; `UNREACHED` marks unreachable boxes.
    /// Box counts are `dist + 1`.
    pub fn bfs(&self, src: (usize, usize)) -> Vec<u32> {
        let mut dist = vec![UNREACHED; self.bw * self.bh];
        let start = src.1 * self.bw + src.0;
        if !self.has_carpet[start] {
            return dist;
        }
        dist[start] = 0;
        let mut queue: VecDeque<usize> = VecDeque::new();
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            let (bi, bj) = (idx % self.bw, idx / self.bw);
            let d = dist[idx];
            let mut try_push = |nidx: usize, open: bool, dist: &mut Vec<u32>, queue: &mut VecDeque<usize>| {
                if open && dist[nidx] == UNREACHED {
                    dist[nidx] = d + 1;
                    queue.push_back(nidx);
                }
            };
            if bi + 1 < self.bw {
                try_push(idx + 1, self.open_right[idx], &mut dist, &mut queue);
            }
            if bi > 0 {
                try_push(idx - 1, self.open_right[idx - 1], &mut dist, &mut queue);
            }
            if bj + 1 < self.bh {
                try_push(idx + self.bw, self.open_up[idx], &mut dist, &mut queue);
            }
            if bj > 0 {
                try_push(idx - self.bw, self.open_up[idx - self.bw], &mut dist, &mut queue);
            }
        }
        dist
    }

    /// BFS with parent tracking, for path reconstruction.
    fn bfs_with_parents(&self, src: (usize, usize)) -> (Vec<u32>, Vec<u32>) {
        let mut dist = vec![UNREACHED; self.bw * self.bh];
        let mut parent = vec![UNREACHED; self.bw * self.bh];
        let start = src.1 * self.bw + src.0;
        if !self.has_carpet[start] {
            return (dist, parent);
        }
        dist[start] = 0;
        let mut queue: VecDeque<usize> = VecDeque::new();
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            let (bi, bj) = (idx % self.bw, idx / self.bw);
            let d = dist[idx];
            let mut try_push = |nidx: usize,
                                open: bool,
                                dist: &mut Vec<u32>,
                                parent: &mut Vec<u32>,
                                queue: &mut VecDeque<usize>| {
                if open && dist[nidx] == UNREACHED {
                    dist[nidx] = d + 1;
                    parent[nidx] = idx as u32;
                    queue.push_back(nidx);
                }
            };
            if bi + 1 < self.bw {
                try_push(idx + 1, self.open_right[idx], &mut dist, &mut parent, &mut queue);
            }
            if bi > 0 {
                try_push(idx - 1, self.open_right[idx - 1], &mut dist, &mut parent, &mut queue);
            }
            if bj + 1 < self.bh {
                try_push(idx + self.bw, self.open_up[idx], &mut dist, &mut parent, &mut queue);
            }
            if bj > 0 {
                try_push(
                    idx - self.bw,
                    self.open_up[idx - self.bw],
                    &mut dist,
                    &mut parent,
                    &mut queue,
                );
            }
        }
        (dist, parent)
    }

    pub fn snap(&self, p: Point) -> Result<(usize, usize), CarpetError> {
        self.mask.snap_to_carpet(p, self.eps)
    }

    /// Minimum-box-count path cost between `z` and `w` after snapping both
    /// to carpet cells. With `refine` set, the realized cell path is traced
    /// and its exact eps-neighborhood area evaluated and sanity-bounded
    /// against the estimate.
    pub fn chem_dist(&self, z: Point, w: Point, refine: bool) -> Result<PathCost, CarpetError> {
        let zc = self.snap(z)?;
        let wc = self.snap(w)?;
        self.chem_dist_cells(zc, wc, refine)
    }

    /// As [`BoxGraph::chem_dist`] but between already-snapped carpet cells.
    pub fn chem_dist_cells(
        &self,
        zc: (usize, usize),
        wc: (usize, usize),
        refine: bool,
    ) -> Result<PathCost, CarpetError> {
        let zb = self.box_of_cell(zc.0, zc.1);
        let wb = self.box_of_cell(wc.0, wc.1);
        let (dist, parent) = self.bfs_with_parents(zb);
        let widx = wb.1 * self.bw + wb.0;
        if dist[widx] == UNREACHED {
            return Err(CarpetError::Disconnected);
        }
        let boxes = dist[widx] as usize + 1;
        let area_estimate = boxes as f64 * self.eps * self.eps;
        let exact_area = if refine {
            let box_path = {
                let mut path = vec![widx];
                let mut cur = widx;
                while parent[cur] != UNREACHED {
                    cur = parent[cur] as usize;
                    path.push(cur);
                }
                path.reverse();
                path
            };
            let cell_path = self.realize_cell_path(zc, wc, &box_path);
            let points: Vec<Point> = cell_path
                .iter()
                .map(|&(i, j)| self.mask.cell_center(i, j))
                .collect();
            let resolution = self.mask.h().min(self.eps / 8.0);
            let exact = len_eps_exact(&points, self.eps, resolution);
            // Two-sided comparability with the box-count estimate; the
            // Vitali disjoint-disk count gives the sharper lower bound.
            let vitali = vitali_disk_count(&points, self.eps);
            assert!(
                exact >= AREA_LOWER_CONST * area_estimate,
                "exact area {exact} below lower sandwich bound of {area_estimate}"
            );
            assert!(
                exact >= core::f64::consts::PI * self.eps * self.eps * vitali as f64 * 0.95,
                "exact area {exact} below Vitali floor ({vitali} disks)"
            );
            assert!(
                exact <= AREA_UPPER_CONST * area_estimate,
                "exact area {exact} above upper sandwich bound of {area_estimate}"
            );
            Some(exact)
        } else {
            None
        };
        Ok(PathCost {
            eps: self.eps,
            boxes,
            area_estimate,
            exact_area,
        })
    }

    /// Carpet-cell path visiting the boxes of `box_path` in order. Between
    /// consecutive boxes the connecting cells come from a BFS restricted to
    /// the pair; if the walker's current component does not reach the next
    /// box it restarts from any carpet cell of the current box (the jump
    /// stays within one box, which the area bounds absorb).
    fn realize_cell_path(
        &self,
        zc: (usize, usize),
        wc: (usize, usize),
        box_path: &[usize],
    ) -> Vec<(usize, usize)> {
        let mut path = vec![zc];
        let mut cur = zc;
        for pair in box_path.windows(2) {
            let a = (pair[0] % self.bw, pair[0] / self.bw);
            let b = (pair[1] % self.bw, pair[1] / self.bw);
            match self.cell_walk(cur, a, b) {
                Some(mut hop) => {
                    path.append(&mut hop);
                    cur = *path.last().unwrap();
                }
                None => {
                    // Restart from the first carpet cell of `a` that does
                    // reach `b`.
                    let (ai0, ai1, aj0, aj1) = self.cell_span(a);
                    'retry: for j in aj0..aj1 {
                        for i in ai0..ai1 {
                            if self.mask.is_carpet(i, j) {
                                if let Some(mut hop) = self.cell_walk((i, j), a, b) {
                                    path.push((i, j));
                                    path.append(&mut hop);
                                    cur = *path.last().unwrap();
                                    break 'retry;
                                }
                            }
                        }
                    }
                }
            }
        }
        // Close onto the target cell inside the final box when possible.
        if cur != wc {
            let last = *box_path.last().unwrap();
            let b = (last % self.bw, last / self.bw);
            if let Some(mut hop) = self.cell_walk_to_cell(cur, b, wc) {
                path.append(&mut hop);
            } else {
                path.push(wc);
            }
        }
        path.dedup();
        path
    }

    /// BFS inside the pair `(a, b)` from `start`; returns the hop to the
    /// first cell of `b` reached (start excluded).
    fn cell_walk(
        &self,
        start: (usize, usize),
        a: (usize, usize),
        b: (usize, usize),
    ) -> Option<Vec<(usize, usize)>> {
        let (bi0, bi1, bj0, bj1) = self.cell_span(b);
        let goal = |i: usize, j: usize| i >= bi0 && i < bi1 && j >= bj0 && j < bj1;
        self.cell_bfs(start, a, b, goal)
    }

    fn cell_walk_to_cell(
        &self,
        start: (usize, usize),
        b: (usize, usize),
        target: (usize, usize),
    ) -> Option<Vec<(usize, usize)>> {
        self.cell_bfs(start, b, b, |i, j| (i, j) == target)
    }

    fn cell_bfs(
        &self,
        start: (usize, usize),
        a: (usize, usize),
        b: (usize, usize),
        goal: impl Fn(usize, usize) -> bool,
    ) -> Option<Vec<(usize, usize)>> {
        let (ai0, ai1, aj0, aj1) = self.cell_span(a);
        let (bi0, bi1, bj0, bj1) = self.cell_span(b);
        let i0 = ai0.min(bi0);
        let i1 = ai1.max(bi1);
        let j0 = aj0.min(bj0);
        let j1 = aj1.max(bj1);
        let w = i1 - i0;
        let in_pair = |i: usize, j: usize| -> bool {
            (i >= ai0 && i < ai1 && j >= aj0 && j < aj1)
                || (i >= bi0 && i < bi1 && j >= bj0 && j < bj1)
        };
        if !in_pair(start.0, start.1) || !self.mask.is_carpet(start.0, start.1) {
            return None;
        }
        if goal(start.0, start.1) {
            return Some(Vec::new());
        }
        let mut prev = vec![u32::MAX; w * (j1 - j0)];
        let local = |i: usize, j: usize| (j - j0) * w + (i - i0);
        prev[local(start.0, start.1)] = u32::MAX - 1;
        let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
        queue.push_back(start);
        while let Some((i, j)) = queue.pop_front() {
            let neighbors = [
                (i.wrapping_sub(1), j),
                (i + 1, j),
                (i, j.wrapping_sub(1)),
                (i, j + 1),
            ];
            for (ni, nj) in neighbors {
                if ni < i0 || nj < j0 || ni >= i1 || nj >= j1 || !in_pair(ni, nj) {
                    continue;
                }
                if prev[local(ni, nj)] != u32::MAX || !self.mask.is_carpet(ni, nj) {
                    continue;
                }
                prev[local(ni, nj)] = local(i, j) as u32;
                if goal(ni, nj) {
                    let mut hop = vec![(ni, nj)];
                    let mut cur = local(i, j);
                    while prev[cur] != u32::MAX - 1 {
                        hop.push((i0 + cur % w, j0 + cur / w));
                        cur = prev[cur] as usize;
                    }
                    hop.reverse();
                    return Some(hop);
                }
                queue.push_back((ni, nj));
            }
        }
        None
    }
}

/// Convenience single-query distance: builds the box graph and queries it.
pub fn chem_dist(
    mask: &CarpetMask,
    eps: f64,
    z: Point,
    w: Point,
    refine: bool,
) -> Result<PathCost, CarpetError> {
    BoxGraph::build(mask, eps)?.chem_dist(z, w, refine)
}

/// Single-source field of box counts (source box = 1); `0` marks
/// unreachable boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub eps: f64,
    pub bw: usize,
    pub bh: usize,
    pub origin: Point,
    /// Row-major box counts, `0` = unreachable or no carpet.
    pub boxes: Vec<u32>,
}

impl DistanceField {
    pub fn value_at(&self, bi: usize, bj: usize) -> Option<u32> {
        match self.boxes[bj * self.bw + bi] {
            0 => None,
            v => Some(v),
        }
    }

    pub fn max_value(&self) -> u32 {
        self.boxes.iter().copied().max().unwrap_or(0)
    }
}

pub fn distance_field(
    graph: &BoxGraph<'_>,
    source: Point,
) -> Result<DistanceField, CarpetError> {
    let sc = graph.snap(source)?;
    let sb = graph.box_of_cell(sc.0, sc.1);
    let dist = graph.bfs(sb);
    let (bw, bh) = graph.dims();
    let boxes = dist
        .iter()
        .map(|&d| if d == UNREACHED { 0 } else { d + 1 })
        .collect();
    Ok(DistanceField {
        eps: graph.eps,
        bw,
        bh,
        origin: graph.mask.origin(),
        boxes,
    })
}

/// Exact area of the eps-neighborhood of a polyline, by occupancy counting
/// on a fine grid: cells whose center lies within `eps` of a dense sample
/// of the path (sample spacing at most `resolution`).
///
/// Requires `resolution <= eps / 8`; nondecreasing in `eps` at fixed
/// resolution.
pub fn len_eps_exact(path: &[Point], eps: f64, resolution: f64) -> f64 {
    assert!(!path.is_empty(), "path must contain at least one point");
    assert!(eps > 0.0 && resolution > 0.0);
    assert!(
        resolution <= eps / 8.0 * (1.0 + 1e-12),
        "resolution {resolution} too coarse for eps {eps}"
    );
    let samples = sample_polyline(path, resolution);
    let bbox = Rect::of_points(&samples).unwrap().expand(eps + 2.0 * resolution);
    let w = libm::ceil(bbox.width() / resolution) as usize + 1;
    let h = libm::ceil(bbox.height() / resolution) as usize + 1;
    let mut occupied = BitGrid::new(w, h);
    let r_rows = libm::ceil(eps / resolution) as i64 + 1;
    for s in &samples {
        let sj = libm::floor((s.y - bbox.min.y) / resolution) as i64;
        for j in (sj - r_rows).max(0)..=(sj + r_rows).min(h as i64 - 1) {
            let cy = bbox.min.y + (j as f64 + 0.5) * resolution;
            let dy = cy - s.y;
            let rem = eps * eps - dy * dy;
            if rem < 0.0 {
                continue;
            }
            let half = libm::sqrt(rem);
            let lo = libm::ceil((s.x - half - bbox.min.x) / resolution - 0.5).max(0.0) as usize;
            let hi_f = libm::floor((s.x + half - bbox.min.x) / resolution - 0.5);
            if hi_f < 0.0 {
                continue;
            }
            let hi = (hi_f as usize).min(w - 1);
            for i in lo..=hi {
                occupied.set(i, j as usize, true);
            }
        }
    }
    occupied.count() as f64 * resolution * resolution
}

fn sample_polyline(path: &[Point], spacing: f64) -> Vec<Point> {
    let mut samples = Vec::new();
    samples.push(path[0]);
    for pair in path.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let len = a.dist(b);
        let pieces = libm::ceil(len / spacing).max(1.0) as usize;
        for k in 1..=pieces {
            let t = k as f64 / pieces as f64;
            samples.push(a + (b - a) * t);
        }
    }
    samples
}

/// Greedy count of disjoint eps-disks with centers on the path: a point is
/// accepted when it is at least `2 eps` from every accepted center. Used
/// for the Vitali-style lower bound on exact areas.
pub fn vitali_disk_count(path: &[Point], eps: f64) -> usize {
    let mut centers: Vec<Point> = Vec::new();
    for &p in path {
        if centers.iter().all(|c| c.dist_sq(p) >= 4.0 * eps * eps) {
            centers.push(p);
        }
    }
    centers.len()
}

/// Result of a boundary-diameter evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDiameter {
    /// Max over reachable net pairs of the box-count area estimate.
    pub max_area: f64,
    pub max_boxes: usize,
    /// Snapped net cells actually used.
    pub net_cells: Vec<(usize, usize)>,
    /// Unordered net pairs with no carpet path.
    pub disconnected_pairs: usize,
}

/// Approximates `sup` of the chemical distance over boundary points: picks
/// `net_count` positions uniformly by arc length along the traced domain
/// contour, snaps each to a carpet cell, and takes the max over net pairs
/// via one single-source search per net cell.
pub fn boundary_diameter(
    graph: &BoxGraph<'_>,
    net_count: usize,
) -> Result<BoundaryDiameter, CarpetError> {
    let contour = graph.mask.domain_contour();
    if contour.len() < 3 || net_count < 2 {
        return Err(CarpetError::DegenerateNet);
    }
    let perimeter: f64 = {
        let mut total = 0.0;
        for k in 0..contour.len() {
            total += contour[k].dist(contour[(k + 1) % contour.len()]);
        }
        total
    };
    let mut net: Vec<(usize, usize)> = Vec::new();
    for k in 0..net_count {
        let target = perimeter * k as f64 / net_count as f64;
        let p = point_at_arclength(contour, target);
        if let Ok(cell) = graph.mask.snap_to_carpet(p, graph.eps) {
            if !net.contains(&cell) {
                net.push(cell);
            }
        }
    }
    if net.len() < 2 {
        return Err(CarpetError::DegenerateNet);
    }

    let mut max_boxes = 0usize;
    let mut disconnected = 0usize;
    let mut any_connected = false;
    for (a_idx, &(ai, aj)) in net.iter().enumerate() {
        let ab = graph.box_of_cell(ai, aj);
        let dist = graph.bfs(ab);
        for &(bi, bj) in net.iter().skip(a_idx + 1) {
            let bb = graph.box_of_cell(bi, bj);
            let d = dist[bb.1 * graph.bw + bb.0];
            if d == UNREACHED {
                disconnected += 1;
            } else {
                any_connected = true;
                max_boxes = max_boxes.max(d as usize + 1);
            }
        }
    }
    if !any_connected {
        return Err(CarpetError::BoundaryNetUnreachable);
    }
    Ok(BoundaryDiameter {
        max_area: max_boxes as f64 * graph.eps * graph.eps,
        max_boxes,
        net_cells: net,
        disconnected_pairs: disconnected,
    })
}

fn point_at_arclength(contour: &[Point], target: f64) -> Point {
    let mut remaining = target;
    for k in 0..contour.len() {
        let a = contour[k];
        let b = contour[(k + 1) % contour.len()];
        let len = a.dist(b);
        if remaining <= len || k == contour.len() - 1 {
            let t = if len > 0.0 { remaining / len } else { 0.0 };
            return a + (b - a) * t.min(1.0);
        }
        remaining -= len;
    }
    contour[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::circle_loop;
    use crate::manifest::RunManifest;

    fn unit_square_mask(n: usize) -> CarpetMask {
        CarpetMask::full_square(n, 1.0, Point::new(0.0, 0.0))
    }

    fn synthetic_ensemble(cle: Vec<crate::geom::Loop>, domain: crate::geom::Loop) -> LoopEnsemble {
        LoopEnsemble {
            cle_loops: cle,
            domain_loop: Some(domain),
            manifest: RunManifest::new("test", 0, 0, "test"),
        }
    }

    #[test]
    fn empty_ensemble_is_all_carpet_inside() {
        let domain = circle_loop(Point::new(0.0, 0.0), 1.0, 256);
        let ens = synthetic_ensemble(Vec::new(), domain);
        let mask = rasterize_carpet(&ens, 256, Rect::centered_square(1.1)).unwrap();
        assert_eq!(mask.hole_cell_count(), 0);
        let frac_of_grid = mask.carpet_cell_count() as f64 / (256.0 * 256.0);
        // pi r^2 / (2.2)^2 with r = 1.
        let expect = core::f64::consts::PI / (2.2 * 2.2);
        assert!((frac_of_grid - expect).abs() < 0.02, "{frac_of_grid}");
    }

    #[test]
    fn concentric_hole_covers_quarter_of_interior() {
        let domain = circle_loop(Point::new(0.0, 0.0), 1.0, 512);
        let hole = circle_loop(Point::new(0.0, 0.0), 0.5, 512);
        let ens = synthetic_ensemble(vec![hole], domain);
        let n = 512;
        let mask = rasterize_carpet(&ens, n, Rect::centered_square(1.05)).unwrap();
        let holes = mask.hole_cell_count() as f64;
        let interior = holes + mask.carpet_cell_count() as f64;
        let ratio = holes / interior;
        assert!(
            (ratio - 0.25).abs() < 2.0 / n as f64 * 10.0,
            "hole ratio {ratio}"
        );
        assert!(mask.carpet_fraction() > 0.0 && mask.carpet_fraction() < 1.0);
        for &(i, j) in mask.boundary_cells() {
            assert!(mask.is_carpet(i as usize, j as usize));
        }
    }

    #[test]
    fn rasterize_requires_domain_loop() {
        let ens = LoopEnsemble {
            cle_loops: Vec::new(),
            domain_loop: None,
            manifest: RunManifest::new("test", 0, 0, "test"),
        };
        assert!(matches!(
            rasterize_carpet(&ens, 256, Rect::centered_square(1.0)),
            Err(CarpetError::DomainLoopMissing)
        ));
    }

    #[test]
    fn same_box_distance_is_one() {
        let mask = unit_square_mask(256);
        let cost = chem_dist(
            &mask,
            0.1,
            Point::new(0.51, 0.52),
            Point::new(0.53, 0.51),
            false,
        )
        .unwrap();
        assert_eq!(cost.boxes, 1);
        assert!((cost.area_estimate - 0.01).abs() < 1e-12);
    }

    #[test]
    fn corridor_of_ten_boxes() {
        let mask = unit_square_mask(256);
        let cost = chem_dist(
            &mask,
            0.1,
            Point::new(0.05, 0.05),
            Point::new(0.95, 0.05),
            true,
        )
        .unwrap();
        assert_eq!(cost.boxes, 10);
        assert!((cost.area_estimate - 0.1).abs() < 1e-12);
        let exact = cost.exact_area.unwrap();
        assert!(exact >= AREA_LOWER_CONST * cost.area_estimate);
        assert!(exact <= AREA_UPPER_CONST * cost.area_estimate);
    }

    #[test]
    fn eps_floor_is_enforced() {
        let mask = unit_square_mask(256);
        assert!(matches!(
            BoxGraph::build(&mask, 0.001),
            Err(CarpetError::EpsTooSmall { .. })
        ));
    }

    #[test]
    fn snap_failure_far_from_carpet() {
        let domain = circle_loop(Point::new(0.0, 0.0), 0.4, 128);
        let ens = synthetic_ensemble(Vec::new(), domain);
        let mask = rasterize_carpet(&ens, 256, Rect::centered_square(1.0)).unwrap();
        let graph = BoxGraph::build(&mask, 0.05).unwrap();
        assert!(matches!(
            graph.chem_dist(Point::new(0.9, 0.9), Point::new(0.0, 0.0), false),
            Err(CarpetError::SnapFailure { .. })
        ));
    }

    #[test]
    fn disconnected_components_error() {
        // Two carpet islands separated by exterior.
        let n = 256;
        let mut cells = vec![CellClass::Exterior; n * n];
        for j in 0..n {
            for i in 0..n / 4 {
                cells[j * n + i] = CellClass::Carpet;
                cells[j * n + (n - 1 - i)] = CellClass::Carpet;
            }
        }
        let mask = CarpetMask::from_parts(n, 1.0 / n as f64, Point::new(0.0, 0.0), cells, Vec::new());
        assert!(matches!(
            chem_dist(&mask, 0.1, Point::new(0.1, 0.5), Point::new(0.9, 0.5), false),
            Err(CarpetError::Disconnected)
        ));
    }

    #[test]
    fn field_matches_point_queries_and_manhattan() {
        let mask = unit_square_mask(256);
        let graph = BoxGraph::build(&mask, 0.1).unwrap();
        let src = Point::new(0.05, 0.05);
        let field = distance_field(&graph, src).unwrap();
        assert_eq!(field.value_at(0, 0), Some(1));
        let mut rng = crate::rng::RunRng::from_stream(5, crate::rng::tags::SELFTEST, 0);
        for _ in 0..32 {
            let w = Point::new(rng.uniform(), rng.uniform());
            let cost = graph.chem_dist(src, w, false).unwrap();
            let wc = graph.snap(w).unwrap();
            let wb = graph.box_of_cell(wc.0, wc.1);
            assert_eq!(field.value_at(wb.0, wb.1), Some(cost.boxes as u32));
        }
        // Empty carpet: the field is Manhattan box distance + 1.
        for bj in 0..field.bh {
            for bi in 0..field.bw {
                assert_eq!(field.value_at(bi, bj), Some((bi + bj) as u32 + 1));
            }
        }
    }

    #[test]
    fn exact_area_of_point_and_segment() {
        let eps = 0.1;
        let res = eps / 8.0;
        let disk = len_eps_exact(&[Point::new(0.3, 0.4)], eps, res);
        let expect = core::f64::consts::PI * eps * eps;
        assert!(
            (disk - expect).abs() <= 2.0 * res * (2.0 * core::f64::consts::PI * eps),
            "disk area {disk} vs {expect}"
        );
        let stadium = len_eps_exact(&[Point::new(0.0, 0.0), Point::new(1.0, 0.0)], eps, res);
        let expect = 2.0 * eps + core::f64::consts::PI * eps * eps;
        assert!(
            (stadium - expect).abs() <= 2.0 * res * (2.0 + 2.0 * core::f64::consts::PI * eps),
            "stadium area {stadium} vs {expect}"
        );
    }

    #[test]
    fn exact_area_monotone_in_eps() {
        let mut rng = crate::rng::RunRng::from_stream(9, crate::rng::tags::SELFTEST, 0);
        for _ in 0..10 {
            let path: Vec<Point> = (0..20)
                .scan(Point::new(0.0, 0.0), |acc, _| {
                    let (dx, dy) = rng.normal_pair();
                    *acc = *acc + Point::new(dx * 0.05, dy * 0.05);
                    Some(*acc)
                })
                .collect();
            let eps = 0.08;
            let res = eps / 16.0;
            let small = len_eps_exact(&path, eps, res);
            let large = len_eps_exact(&path, 2.0 * eps, res);
            assert!(large >= small);
        }
    }

    #[test]
    fn covering_bound_on_random_paths() {
        let mut rng = crate::rng::RunRng::from_stream(10, crate::rng::tags::SELFTEST, 0);
        let eps = 0.16;
        for _ in 0..5 {
            let path: Vec<Point> = (0..30)
                .scan(Point::new(0.0, 0.0), |acc, _| {
                    let (dx, dy) = rng.normal_pair();
                    *acc = *acc + Point::new(dx * 0.08, dy * 0.08);
                    Some(*acc)
                })
                .collect();
            let base = len_eps_exact(&path, eps, eps / 64.0);
            for delta in [0.25, 0.125] {
                let shrunk = len_eps_exact(&path, delta * eps, eps / 64.0);
                assert!(
                    shrunk >= AREA_LOWER_CONST * delta * base,
                    "covering bound failed: {shrunk} < (1/18) * {delta} * {base}"
                );
            }
        }
    }

    #[test]
    fn boundary_diameter_on_disk_matches_all_pairs() {
        let domain = circle_loop(Point::new(0.0, 0.0), 1.0, 512);
        let ens = synthetic_ensemble(Vec::new(), domain);
        let mask = rasterize_carpet(&ens, 256, Rect::centered_square(1.05)).unwrap();
        let eps = 0.2;
        let graph = BoxGraph::build(&mask, eps).unwrap();
        let diam = boundary_diameter(&graph, 16).unwrap();
        assert_eq!(diam.disconnected_pairs, 0);
        // Oracle: independent point queries over every net pair.
        let mut best = 0usize;
        for (k, &(ai, aj)) in diam.net_cells.iter().enumerate() {
            for &(bi, bj) in diam.net_cells.iter().skip(k + 1) {
                let cost = graph
                    .chem_dist_cells((ai, aj), (bi, bj), false)
                    .unwrap();
                best = best.max(cost.boxes);
            }
        }
        assert_eq!(diam.max_boxes, best);
        // Monotone in the net: a larger net can only increase the max.
        let small = boundary_diameter(&graph, 8).unwrap();
        assert!(diam.max_boxes >= small.max_boxes);
    }

    #[test]
    fn metric_axioms_on_sampled_boxes() {
        let domain = circle_loop(Point::new(0.0, 0.0), 1.0, 256);
        let hole = circle_loop(Point::new(0.3, 0.0), 0.25, 128);
        let hole2 = circle_loop(Point::new(-0.35, -0.2), 0.2, 128);
        let ens = synthetic_ensemble(vec![hole, hole2], domain);
        let mask = rasterize_carpet(&ens, 256, Rect::centered_square(1.05)).unwrap();
        let graph = BoxGraph::build(&mask, 0.1).unwrap();
        let mut rng = crate::rng::RunRng::from_stream(11, crate::rng::tags::SELFTEST, 0);
        let mut boxes = Vec::new();
        for _ in 0..200 {
            let p = Point::new(rng.range(-1.0, 1.0), rng.range(-1.0, 1.0));
            if let Ok(cell) = graph.snap(p) {
                boxes.push(graph.box_of_cell(cell.0, cell.1));
            }
        }
        boxes.dedup();
        let fields: Vec<(usize, Vec<u32>)> = boxes
            .iter()
            .map(|&b| (b.1 * graph.bw + b.0, graph.bfs(b)))
            .collect();
        for _ in 0..1000 {
            let pick = |rng: &mut crate::rng::RunRng| rng.index(fields.len());
            let (a, b, c) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
            let d = |x: usize, y: usize| -> Option<u32> {
                let v = fields[x].1[fields[y].0];
                (v != UNREACHED).then_some(v)
            };
            // Self-distance is the minimal convention value (0 edges).
            assert_eq!(fields[a].1[fields[a].0], 0);
            let (ab, ba) = (d(a, b), d(b, a));
            assert_eq!(ab, ba, "symmetry");
            if let (Some(ab), Some(bc), Some(ac)) = (ab, d(b, c), d(a, c)) {
                assert!(ac <= ab + bc, "triangle: {ac} > {ab} + {bc}");
            }
        }
    }
}
