//! Shared occupancy-grid machinery: 4-connected segment traversal, flood
//! fill, and boundary contour extraction on binary rasters.

use crate::geom::{Loop, Point};
use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

/// Dense bit grid addressed by `(column, row)`; row 0 is the bottom.
#[derive(Debug, Clone)]
pub struct BitGrid {
    pub w: usize,
    pub h: usize,
    bits: Vec<bool>,
}

impl BitGrid {
    pub fn new(w: usize, h: usize) -> Self {
        BitGrid {
            w,
            h,
            bits: vec![false; w * h],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[j * self.w + i]
    }

    #[inline]
    pub fn get_signed(&self, i: i64, j: i64) -> bool {
        if i < 0 || j < 0 || i >= self.w as i64 || j >= self.h as i64 {
            false
        } else {
            self.bits[j as usize * self.w + i as usize]
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.bits[j * self.w + i] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Visits every cell a segment passes through, stepping one axis at a time
/// so the visited cells form a 4-connected chain (Amanatides-Woo traversal).
/// Cell `(i, j)` covers `[origin + i*cell, origin + (i+1)*cell)` per axis.
pub fn walk_segment(a: Point, b: Point, origin: Point, cell: f64, mut visit: impl FnMut(i64, i64)) {
    let to_cell = |p: Point| -> (i64, i64) {
        (
            libm::floor((p.x - origin.x) / cell) as i64,
            libm::floor((p.y - origin.y) / cell) as i64,
        )
    };
    let (mut ix, mut iy) = to_cell(a);
    let (tx, ty) = to_cell(b);
    visit(ix, iy);
    if (ix, iy) == (tx, ty) {
        return;
    }
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let sx: i64 = if dx > 0.0 { 1 } else { -1 };
    let sy: i64 = if dy > 0.0 { 1 } else { -1 };
    // Parameter t along [0,1] at which the ray crosses the next grid line.
    let mut t_max_x = if dx == 0.0 {
        f64::INFINITY
    } else {
        let edge = origin.x + (ix + if sx > 0 { 1 } else { 0 }) as f64 * cell;
        (edge - a.x) / dx
    };
    let mut t_max_y = if dy == 0.0 {
        f64::INFINITY
    } else {
        let edge = origin.y + (iy + if sy > 0 { 1 } else { 0 }) as f64 * cell;
        (edge - a.y) / dy
    };
    let t_delta_x = if dx == 0.0 {
        f64::INFINITY
    } else {
        cell / libm::fabs(dx)
    };
    let t_delta_y = if dy == 0.0 {
        f64::INFINITY
    } else {
        cell / libm::fabs(dy)
    };
    // Guard against floating-point stalls: never take more steps than the
    // Manhattan distance allows, then force-walk to the target.
    let mut budget = (tx - ix).abs() + (ty - iy).abs() + 2;
    while (ix, iy) != (tx, ty) && budget > 0 {
        if t_max_x <= t_max_y {
            ix += sx;
            t_max_x += t_delta_x;
        } else {
            iy += sy;
            t_max_y += t_delta_y;
        }
        visit(ix, iy);
        budget -= 1;
    }
    while ix != tx {
        ix += if tx > ix { 1 } else { -1 };
        visit(ix, iy);
    }
    while iy != ty {
        iy += if ty > iy { 1 } else { -1 };
        visit(ix, iy);
    }
}

/// Marks every cell outside `blocked` that is 4-reachable from the grid
/// border. Returns the reachable mask.
pub fn flood_from_border(blocked: &BitGrid) -> BitGrid {
    let (w, h) = (blocked.w, blocked.h);
    let mut reached = BitGrid::new(w, h);
    let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
    let push = |reached: &mut BitGrid, queue: &mut VecDeque<(usize, usize)>, i: usize, j: usize| {
        if !blocked.get(i, j) && !reached.get(i, j) {
            reached.set(i, j, true);
            queue.push_back((i, j));
        }
    };
    for i in 0..w {
        push(&mut reached, &mut queue, i, 0);
        push(&mut reached, &mut queue, i, h - 1);
    }
    for j in 0..h {
        push(&mut reached, &mut queue, 0, j);
        push(&mut reached, &mut queue, w - 1, j);
    }
    while let Some((i, j)) = queue.pop_front() {
        if i > 0 {
            push(&mut reached, &mut queue, i - 1, j);
        }
        if i + 1 < w {
            push(&mut reached, &mut queue, i + 1, j);
        }
        if j > 0 {
            push(&mut reached, &mut queue, i, j - 1);
        }
        if j + 1 < h {
            push(&mut reached, &mut queue, i, j + 1);
        }
    }
    reached
}

/// Traces the outer boundary of the filled set as a closed polygon over
/// cell corners, walking with the filled region on the left (so the result
/// is counterclockwise and has winding +1 about interior points). The
/// filled set must be nonempty; holes, if any, are ignored.
///
/// `origin`/`cell` place corner `(x, y)` at `origin + (x*cell, y*cell)`.
pub fn trace_outer_contour(filled: &BitGrid, origin: Point, cell: f64) -> Option<Loop> {
    // The lowest-then-leftmost filled cell; its bottom edge is on the outer
    // boundary.
    let mut start_cell = None;
    'scan: for j in 0..filled.h {
        for i in 0..filled.w {
            if filled.get(i, j) {
                start_cell = Some((i as i64, j as i64));
                break 'scan;
            }
        }
    }
    let (ci, cj) = start_cell?;

    // Directions: 0 = +x, 1 = +y, 2 = -x, 3 = -y.
    const STEP: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];
    // Cells touching corner (x, y), ahead-left and ahead-right of a walker
    // moving in direction d and standing at (x, y).
    fn ahead_cells(x: i64, y: i64, dir: usize) -> ((i64, i64), (i64, i64)) {
        match dir {
            0 => ((x, y), (x, y - 1)),
            1 => ((x - 1, y), (x, y)),
            2 => ((x - 1, y - 1), (x - 1, y)),
            _ => ((x, y - 1), (x - 1, y - 1)),
        }
    }

    let start = (ci, cj, 0usize);
    let mut vertices: Vec<Point> = Vec::new();
    let (mut x, mut y, mut dir) = start;
    let push = |vertices: &mut Vec<Point>, x: i64, y: i64| {
        vertices.push(Point::new(
            origin.x + x as f64 * cell,
            origin.y + y as f64 * cell,
        ));
    };
    push(&mut vertices, x, y);
    let budget = 4 * (filled.w * filled.h) + 8;
    for _ in 0..budget {
        x += STEP[dir].0;
        y += STEP[dir].1;
        let (left, right) = ahead_cells(x, y, dir);
        let next_dir = if !filled.get_signed(left.0, left.1) {
            (dir + 1) % 4 // turn left
        } else if !filled.get_signed(right.0, right.1) {
            dir // straight on
        } else {
            (dir + 3) % 4 // turn right
        };
        if (x, y, next_dir) == start {
            break;
        }
        if next_dir != dir {
            push(&mut vertices, x, y);
            dir = next_dir;
        }
    }
    Loop::new(vertices).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;

    #[test]
    fn segment_walk_is_four_connected() {
        let mut cells: Vec<(i64, i64)> = Vec::new();
        walk_segment(
            Point::new(0.05, 0.05),
            Point::new(0.95, 0.63),
            Point::new(0.0, 0.0),
            0.1,
            |i, j| cells.push((i, j)),
        );
        assert_eq!(cells.first(), Some(&(0, 0)));
        assert_eq!(cells.last(), Some(&(9, 6)));
        for pair in cells.windows(2) {
            let d = (pair[1].0 - pair[0].0).abs() + (pair[1].1 - pair[0].1).abs();
            assert_eq!(d, 1, "non-adjacent step {pair:?}");
        }
        let unique: BTreeSet<_> = cells.iter().collect();
        assert_eq!(unique.len(), cells.len());
    }

    #[test]
    fn flood_fill_respects_walls() {
        // A 5x5 grid with a closed 3x3 ring of walls around the center.
        let mut wall = BitGrid::new(5, 5);
        for k in 1..4 {
            wall.set(k, 1, true);
            wall.set(k, 3, true);
            wall.set(1, k, true);
            wall.set(3, k, true);
        }
        let reached = flood_from_border(&wall);
        assert!(reached.get(0, 0));
        assert!(!reached.get(2, 2), "enclosed cell must stay unreached");
    }

    #[test]
    fn contour_of_single_cell_is_unit_square() {
        let mut filled = BitGrid::new(3, 3);
        filled.set(1, 1, true);
        let c = trace_outer_contour(&filled, Point::new(0.0, 0.0), 1.0).unwrap();
        assert_eq!(c.len(), 4);
        assert!((c.signed_area() - 1.0).abs() < 1e-12);
        assert_eq!(c.winding_number(Point::new(1.5, 1.5)), 1);
    }

    #[test]
    fn contour_of_rectangle_block() {
        let mut filled = BitGrid::new(8, 6);
        for j in 1..4 {
            for i in 2..7 {
                filled.set(i, j, true);
            }
        }
        let c = trace_outer_contour(&filled, Point::new(0.0, 0.0), 0.5).unwrap();
        // 5 x 3 cells at cell size 0.5 -> area 15 * 0.25.
        assert!((c.signed_area() - 3.75).abs() < 1e-12);
        assert_eq!(c.len(), 4);
    }

    #[test]
    fn contour_handles_l_shape() {
        let mut filled = BitGrid::new(6, 6);
        for i in 1..5 {
            filled.set(i, 1, true);
        }
        for j in 1..5 {
            filled.set(1, j, true);
        }
        let c = trace_outer_contour(&filled, Point::new(0.0, 0.0), 1.0).unwrap();
        assert!((c.signed_area() - 7.0).abs() < 1e-12);
        assert_eq!(c.winding_number(Point::new(1.5, 4.5)), 1);
        assert_eq!(c.winding_number(Point::new(4.5, 4.5)), 0);
    }
}
