//! Planar primitives: points, axis-aligned boxes, closed polylines, and the
//! predicates (winding number, segment intersection) the soup and carpet
//! modules are built on.

use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    #[inline]
    pub fn dist_sq(self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn dist(self, other: Point) -> f64 {
        libm::sqrt(self.dist_sq(other))
    }

    #[inline]
    pub fn norm(self) -> f64 {
        libm::sqrt(self.x * self.x + self.y * self.y)
    }

    /// z-component of the cross product `(self) x (other)`.
    #[inline]
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Self {
        Rect { min, max }
    }

    /// Square box centered at the origin with half-side `r`.
    pub fn centered_square(r: f64) -> Self {
        Rect::new(Point::new(-r, -r), Point::new(r, r))
    }

    pub fn of_points(points: &[Point]) -> Option<Rect> {
        let first = *points.first()?;
        let mut r = Rect::new(first, first);
        for p in &points[1..] {
            r.min.x = r.min.x.min(p.x);
            r.min.y = r.min.y.min(p.y);
            r.max.x = r.max.x.max(p.x);
            r.max.y = r.max.y.max(p.y);
        }
        Some(r)
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    /// Longest side.
    pub fn side(&self) -> f64 {
        self.width().max(self.height())
    }

    pub fn expand(&self, pad: f64) -> Rect {
        Rect::new(
            Point::new(self.min.x - pad, self.min.y - pad),
            Point::new(self.max.x + pad, self.max.y + pad),
        )
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.min.x <= other.min.x
            && self.min.y <= other.min.y
            && self.max.x >= other.max.x
            && self.max.y >= other.max.y
    }

    pub fn contains_point(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LoopError {
    #[error("a loop needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("consecutive loop vertices at index {0} coincide")]
    DegenerateEdge(usize),
}

/// A closed polyline. The closing edge from the last vertex back to the
/// first is implicit; it is never stored twice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Loop {
    vertices: Vec<Point>,
}

impl Loop {
    pub fn new(mut vertices: Vec<Point>) -> Result<Self, LoopError> {
        // Drop an explicitly repeated closing vertex.
        if vertices.len() >= 2 && vertices[0] == *vertices.last().unwrap() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(LoopError::TooFewVertices(vertices.len()));
        }
        for i in 0..vertices.len() {
            let j = (i + 1) % vertices.len();
            if vertices[i] == vertices[j] {
                return Err(LoopError::DegenerateEdge(i));
            }
        }
        Ok(Loop { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    /// Edges including the closing one.
    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn bbox(&self) -> Rect {
        Rect::of_points(&self.vertices).expect("loop is nonempty")
    }

    pub fn translate(&self, by: Point) -> Loop {
        Loop {
            vertices: self.vertices.iter().map(|&p| p + by).collect(),
        }
    }

    /// Winding number about `p` by signed crossings of the upward ray.
    /// Points exactly on an edge get an arbitrary but finite value; callers
    /// that care treat on-boundary as outside.
    pub fn winding_number(&self, p: Point) -> i32 {
        let mut w = 0i32;
        for (a, b) in self.segments() {
            if a.y <= p.y {
                if b.y > p.y && (b - a).cross(p - a) > 0.0 {
                    w += 1;
                }
            } else if b.y <= p.y && (b - a).cross(p - a) < 0.0 {
                w -= 1;
            }
        }
        w
    }

    /// Strict interior test by nonzero winding.
    pub fn contains(&self, p: Point) -> bool {
        self.winding_number(p) != 0
    }

    /// Total polyline length including the closing edge.
    pub fn perimeter(&self) -> f64 {
        self.segments().map(|(a, b)| a.dist(b)).sum()
    }

    /// Signed area (shoelace); positive for counterclockwise orientation.
    pub fn signed_area(&self) -> f64 {
        0.5 * self.segments().map(|(a, b)| a.cross(b)).sum::<f64>()
    }
}

#[inline]
fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b - a).cross(c - a)
}

#[inline]
fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(a1: Point, a2: Point, b1: Point, b2: Point) -> bool {
    let d1 = orient(b1, b2, a1);
    let d2 = orient(b1, b2, a2);
    let d3 = orient(a1, a2, b1);
    let d4 = orient(a1, a2, b2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(b1, b2, a1))
        || (d2 == 0.0 && on_segment(b1, b2, a2))
        || (d3 == 0.0 && on_segment(a1, a2, b1))
        || (d4 == 0.0 && on_segment(a1, a2, b2))
}

/// Whether two closed polylines meet, bounding boxes first.
pub fn loops_intersect(a: &Loop, b: &Loop) -> bool {
    let b_box = b.bbox();
    if !a.bbox().intersects(&b_box) {
        return false;
    }
    for (a1, a2) in a.segments() {
        let seg_box = Rect::of_points(&[a1, a2]).unwrap();
        if !seg_box.intersects(&b_box) {
            continue;
        }
        for (b1, b2) in b.segments() {
            if segments_intersect(a1, a2, b1, b2) {
                return true;
            }
        }
    }
    false
}

/// Regular polygon approximating a circle; used by tests and synthetic
/// fixtures throughout the workspace.
pub fn circle_loop(center: Point, radius: f64, sides: usize) -> Loop {
    let n = sides.max(3);
    let vertices = (0..n)
        .map(|i| {
            let t = 2.0 * core::f64::consts::PI * i as f64 / n as f64;
            Point::new(
                center.x + radius * libm::cos(t),
                center.y + radius * libm::sin(t),
            )
        })
        .collect();
    Loop::new(vertices).expect("regular polygon is a valid loop")
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn loop_rejects_degenerate_input() {
        assert!(matches!(
            Loop::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)]),
            Err(LoopError::TooFewVertices(2))
        ));
        assert!(matches!(
            Loop::new(vec![
                Point::new(0.0, 0.0),
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
            ]),
            Err(LoopError::DegenerateEdge(0))
        ));
    }

    #[test]
    fn winding_of_circle() {
        let c = circle_loop(Point::new(0.0, 0.0), 1.0, 64);
        assert_eq!(c.winding_number(Point::new(0.0, 0.0)), 1);
        assert_eq!(c.winding_number(Point::new(0.3, -0.4)), 1);
        assert_eq!(c.winding_number(Point::new(2.0, 0.0)), 0);
    }

    #[test]
    fn segment_predicates() {
        let o = Point::new(0.0, 0.0);
        assert!(segments_intersect(
            o,
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 0.0)
        ));
        assert!(!segments_intersect(
            o,
            Point::new(1.0, 0.0),
            Point::new(0.0, 1.0),
            Point::new(1.0, 1.0)
        ));
        // Touching at an endpoint counts.
        assert!(segments_intersect(
            o,
            Point::new(1.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(2.0, 5.0)
        ));
    }

    #[test]
    fn circle_intersection_cases() {
        let a = circle_loop(Point::new(0.0, 0.0), 1.0, 48);
        let b = circle_loop(Point::new(1.5, 0.0), 1.0, 48);
        let c = circle_loop(Point::new(5.0, 0.0), 1.0, 48);
        assert!(loops_intersect(&a, &b));
        assert!(!loops_intersect(&a, &c));
    }

    #[test]
    fn shoelace_area_of_circle() {
        let c = circle_loop(Point::new(0.0, 0.0), 2.0, 512);
        let area = c.signed_area();
        assert!((area - core::f64::consts::PI * 4.0).abs() < 0.01);
    }
}
