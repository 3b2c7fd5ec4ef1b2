//! Planar primitives in image coordinates (x right, y down).
//!
//! Polygon orientation is reported with the usual shoelace sign on the raw
//! coordinates, so "counter-clockwise" means positive signed area.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn distance(self, o: Point) -> f64 {
        (self - o).norm()
    }

    /// Unit vector in the same direction, or `None` for (near-)zero vectors.
    pub fn unit(self) -> Option<Point> {
        let n = self.norm();
        (n > 1e-12 && n.is_finite()).then(|| Point::new(self.x / n, self.y / n))
    }

    /// Left-hand perpendicular `(-y, x)`.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    /// Rotation by `angle` radians (positive = towards +y from +x).
    pub fn rotate(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn midpoint(self, o: Point) -> Point {
        Point::new((self.x + o.x) * 0.5, (self.y + o.y) * 0.5)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Axis-aligned rectangle `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    /// Tight bounding box of a point set; `None` when empty.
    pub fn bounding(points: impl IntoIterator<Item = Point>) -> Option<Rect> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (mut min, mut max) = (first, first);
        for p in it {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        Some(Rect { min, max })
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        p.x >= self.min.x - tol
            && p.x <= self.max.x + tol
            && p.y >= self.min.y - tol
            && p.y <= self.max.y + tol
    }

    /// Corners in counter-clockwise (positive-area) order.
    pub fn corners(&self) -> [Point; 4] {
        [
            self.min,
            Point::new(self.max.x, self.min.y),
            self.max,
            Point::new(self.min.x, self.max.y),
        ]
    }
}

/// Shoelace signed area; positive for counter-clockwise vertex order.
pub fn signed_area(poly: &[Point]) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        acc += a.cross(b);
    }
    acc * 0.5
}

pub fn area(poly: &[Point]) -> f64 {
    signed_area(poly).abs()
}

/// Area centroid of a simple polygon. Falls back to the vertex mean when the
/// polygon has (near-)zero area.
pub fn centroid(poly: &[Point]) -> Point {
    let a = signed_area(poly);
    if a.abs() < 1e-12 {
        let n = poly.len().max(1) as f64;
        let s = poly.iter().fold(Point::default(), |acc, &p| acc + p);
        return s * (1.0 / n);
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..poly.len() {
        let p = poly[i];
        let q = poly[(i + 1) % poly.len()];
        let w = p.cross(q);
        cx += (p.x + q.x) * w;
        cy += (p.y + q.y) * w;
    }
    Point::new(cx / (6.0 * a), cy / (6.0 * a))
}

/// True when every turn has the same sign (collinear runs allowed).
pub fn is_convex(poly: &[Point]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let mut sign = 0.0f64;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let c = poly[(i + 2) % n];
        let t = (b - a).cross(c - b);
        if t.abs() <= 1e-9 * (1.0 + (b - a).norm() * (c - b).norm()) {
            continue;
        }
        if sign == 0.0 {
            sign = t.signum();
        } else if t.signum() != sign {
            return false;
        }
    }
    true
}

/// Clips `subject` against the half-plane to the left of the directed edge
/// `a -> b` (inclusive).
fn clip_half_plane(subject: &[Point], a: Point, b: Point) -> Vec<Point> {
    let edge = b - a;
    let side = |p: Point| edge.cross(p - a);
    let mut out = Vec::with_capacity(subject.len() + 1);
    let Some(&last) = subject.last() else {
        return out;
    };
    let mut prev = last;
    let mut prev_side = side(prev);
    for &cur in subject {
        let cur_side = side(cur);
        if cur_side >= 0.0 {
            if prev_side < 0.0 {
                out.push(prev + (cur - prev) * (prev_side / (prev_side - cur_side)));
            }
            out.push(cur);
        } else if prev_side >= 0.0 {
            out.push(prev + (cur - prev) * (prev_side / (prev_side - cur_side)));
        }
        prev = cur;
        prev_side = cur_side;
    }
    out
}

/// Intersection of two convex polygons by successive half-plane clipping.
///
/// Both inputs may have either orientation; the result is counter-clockwise
/// (or empty / degenerate when the overlap has no area).
pub fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    if subject.len() < 3 || clip.len() < 3 {
        return Vec::new();
    }
    let subject = ccw(subject);
    let clip = ccw(clip);
    let mut out = subject;
    for i in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        out = clip_half_plane(&out, clip[i], clip[(i + 1) % clip.len()]);
    }
    dedup_ring(out)
}

fn ccw(poly: &[Point]) -> Vec<Point> {
    let mut v = poly.to_vec();
    if signed_area(&v) < 0.0 {
        v.reverse();
    }
    v
}

fn dedup_ring(mut ring: Vec<Point>) -> Vec<Point> {
    ring.dedup_by(|a, b| a.distance(*b) < 1e-12);
    while ring.len() > 1 && ring[0].distance(ring[ring.len() - 1]) < 1e-12 {
        ring.pop();
    }
    ring
}

/// Point-in-convex-polygon test with tolerance (either orientation).
pub fn convex_contains(poly: &[Point], p: Point, tol: f64) -> bool {
    let poly = ccw(poly);
    (0..poly.len()).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let e = b - a;
        let len = e.norm().max(1e-300);
        e.cross(p - a) / len >= -tol
    })
}

/// Parametric Liang-Barsky clip of `origin + t * dir` for `t` in
/// `[t0, t1]` against `rect`. Returns the clipped parameter interval.
fn liang_barsky(origin: Point, dir: Point, rect: &Rect, t0: f64, t1: f64) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (t0, t1);
    let checks = [
        (-dir.x, origin.x - rect.min.x),
        (dir.x, rect.max.x - origin.x),
        (-dir.y, origin.y - rect.min.y),
        (dir.y, rect.max.y - origin.y),
    ];
    for (p, q) in checks {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                lo = lo.max(r);
            } else {
                hi = hi.min(r);
            }
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Clips the infinite line through `through` with direction `dir`.
pub fn clip_line_to_rect(through: Point, dir: Point, rect: &Rect) -> Option<(Point, Point)> {
    let (lo, hi) = liang_barsky(through, dir, rect, f64::NEG_INFINITY, f64::INFINITY)?;
    Some((through + dir * lo, through + dir * hi))
}

/// Clips the segment `a -> b`.
pub fn clip_segment_to_rect(a: Point, b: Point, rect: &Rect) -> Option<(Point, Point)> {
    let d = b - a;
    let (lo, hi) = liang_barsky(a, d, rect, 0.0, 1.0)?;
    Some((a + d * lo, a + d * hi))
}
