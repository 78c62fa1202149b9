//! Planar primitives: points, dish footprints, and the overlap / corridor
//! predicates used by scene generation and grasp feasibility.
//!
//! All lengths are centimetres in `f64`. Touching counts as overlapping:
//! two closed regions closer than [`CONTACT_TOL`] are reported as intersecting.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Gap below which two closed regions are considered to intersect.
pub const CONTACT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn midpoint(self, other: Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }

    /// Unit vector in the same direction, or `None` for (near) zero vectors.
    pub fn normalized(self) -> Option<Point2> {
        let n = self.norm();
        (n > 1e-12).then(|| self * (1.0 / n))
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Point2 {
        Point2::new(-self.y, self.x)
    }

    pub fn from_angle(angle: f64) -> Point2 {
        Point2::new(angle.cos(), angle.sin())
    }

    /// Direction angle of this vector folded into `[0, π)`.
    pub fn undirected_angle(self) -> f64 {
        normalize_half_turn(self.y.atan2(self.x))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// Folds an angle into `[0, π)`. Gripper and utensil orientations are
/// undirected, so `θ` and `θ + π` describe the same pose.
pub fn normalize_half_turn(angle: f64) -> f64 {
    let r = angle.rem_euclid(PI);
    if r >= PI || r.is_nan() {
        0.0
    } else {
        r
    }
}

/// A rectangle of arbitrary orientation. `theta` is the direction of the long
/// axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub center: Point2,
    pub length: f64,
    pub width: f64,
    pub theta: f64,
}

impl OrientedRect {
    pub fn axis(&self) -> Point2 {
        Point2::from_angle(self.theta)
    }

    /// Endpoints of the long-axis midline.
    pub fn midline(&self) -> (Point2, Point2) {
        let h = self.axis() * (0.5 * self.length);
        (self.center - h, self.center + h)
    }

    pub fn corners(&self) -> [Point2; 4] {
        obb_corners(&self.into())
    }

    /// Radius of the smallest disc about `center` that contains the rectangle.
    pub fn circumradius(&self) -> f64 {
        (0.5 * self.length).hypot(0.5 * self.width)
    }
}

/// Top-down region occupied by a dish or stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Footprint {
    Disc { center: Point2, radius: f64 },
    Rect(OrientedRect),
}

impl Footprint {
    pub fn disc(center: Point2, radius: f64) -> Self {
        Footprint::Disc { center, radius }
    }

    pub fn rect(center: Point2, length: f64, width: f64, theta: f64) -> Self {
        Footprint::Rect(OrientedRect {
            center,
            length,
            width,
            theta,
        })
    }

    pub fn center(&self) -> Point2 {
        match self {
            Footprint::Disc { center, .. } => *center,
            Footprint::Rect(r) => r.center,
        }
    }

    pub fn circumradius(&self) -> f64 {
        match self {
            Footprint::Disc { radius, .. } => *radius,
            Footprint::Rect(r) => r.circumradius(),
        }
    }

    /// Same shape moved so that its center sits at `center`.
    pub fn moved_to(&self, center: Point2) -> Footprint {
        match *self {
            Footprint::Disc { radius, .. } => Footprint::Disc { center, radius },
            Footprint::Rect(r) => Footprint::Rect(OrientedRect { center, ..r }),
        }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            Footprint::Disc { center, radius } => center.is_finite() && radius > 0.0,
            Footprint::Rect(r) => {
                r.center.is_finite()
                    && r.width > 0.0
                    && r.length >= r.width
                    && (0.0..PI).contains(&r.theta)
            }
        }
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Point2, Point2) {
        match *self {
            Footprint::Disc { center, radius } => (
                Point2::new(center.x - radius, center.y - radius),
                Point2::new(center.x + radius, center.y + radius),
            ),
            Footprint::Rect(r) => {
                let cs = r.corners();
                let mut lo = cs[0];
                let mut hi = cs[0];
                for c in &cs[1..] {
                    lo = Point2::new(lo.x.min(c.x), lo.y.min(c.y));
                    hi = Point2::new(hi.x.max(c.x), hi.y.max(c.y));
                }
                (lo, hi)
            }
        }
    }

    /// True if the footprint lies inside `[0, width] × [0, height]`, allowing
    /// [`CONTACT_TOL`] of slack at the boundary.
    pub fn inside_workspace(&self, width: f64, height: f64) -> bool {
        let (lo, hi) = self.bounds();
        lo.x >= -CONTACT_TOL
            && lo.y >= -CONTACT_TOL
            && hi.x <= width + CONTACT_TOL
            && hi.y <= height + CONTACT_TOL
    }
}

/// Oriented box with possibly zero extents; used internally so that
/// degenerate corridors (zero length or zero half-width) need no special case.
#[derive(Debug, Clone, Copy)]
struct Obb {
    center: Point2,
    axis: Point2,
    half_len: f64,
    half_wid: f64,
}

impl From<&OrientedRect> for Obb {
    fn from(r: &OrientedRect) -> Self {
        Obb {
            center: r.center,
            axis: r.axis(),
            half_len: 0.5 * r.length,
            half_wid: 0.5 * r.width,
        }
    }
}

fn obb_corners(b: &Obb) -> [Point2; 4] {
    let u = b.axis * b.half_len;
    let v = b.axis.perp() * b.half_wid;
    [
        b.center + u + v,
        b.center - u + v,
        b.center - u - v,
        b.center + u - v,
    ]
}

fn point_obb_distance(p: Point2, b: &Obb) -> f64 {
    let d = p - b.center;
    let along = d.dot(b.axis);
    let across = d.dot(b.axis.perp());
    let dx = (along.abs() - b.half_len).max(0.0);
    let dy = (across.abs() - b.half_wid).max(0.0);
    dx.hypot(dy)
}

fn obb_projection_radius(b: &Obb, dir: Point2) -> f64 {
    b.half_len * b.axis.dot(dir).abs() + b.half_wid * b.axis.perp().dot(dir).abs()
}

/// Separating-axis test for strict interpenetration or contact.
fn obbs_intersect(a: &Obb, b: &Obb) -> bool {
    let d = b.center - a.center;
    [a.axis, a.axis.perp(), b.axis, b.axis.perp()]
        .iter()
        .all(|&ax| d.dot(ax).abs() <= obb_projection_radius(a, ax) + obb_projection_radius(b, ax))
}

fn obb_separation(a: &Obb, b: &Obb) -> f64 {
    if obbs_intersect(a, b) {
        return 0.0;
    }
    let from_a = obb_corners(a)
        .iter()
        .map(|&c| point_obb_distance(c, b))
        .fold(f64::INFINITY, f64::min);
    let from_b = obb_corners(b)
        .iter()
        .map(|&c| point_obb_distance(c, a))
        .fold(f64::INFINITY, f64::min);
    from_a.min(from_b)
}

fn footprint_obb_separation(f: &Footprint, b: &Obb) -> f64 {
    match f {
        Footprint::Disc { center, radius } => (point_obb_distance(*center, b) - radius).max(0.0),
        Footprint::Rect(r) => obb_separation(&r.into(), b),
    }
}

/// Minimum distance between two closed footprints; zero when they intersect.
pub fn separation(a: &Footprint, b: &Footprint) -> f64 {
    match (a, b) {
        (
            Footprint::Disc {
                center: c1,
                radius: r1,
            },
            Footprint::Disc {
                center: c2,
                radius: r2,
            },
        ) => (c1.distance(*c2) - r1 - r2).max(0.0),
        (f, Footprint::Rect(r)) | (Footprint::Rect(r), f) => footprint_obb_separation(f, &r.into()),
    }
}

/// True iff the closed regions intersect (contact included).
pub fn overlaps(a: &Footprint, b: &Footprint) -> bool {
    separation(a, b) <= CONTACT_TOL
}

/// True iff no obstacle intersects the rectangle swept by the segment `a → b`
/// inflated laterally by `half_width`.
pub fn corridor_clear(a: Point2, b: Point2, half_width: f64, obstacles: &[Footprint]) -> bool {
    let corridor = Obb {
        center: a.midpoint(b),
        axis: (b - a).normalized().unwrap_or(Point2::new(1.0, 0.0)),
        half_len: 0.5 * a.distance(b),
        half_wid: half_width.max(0.0),
    };
    obstacles
        .iter()
        .all(|o| footprint_obb_separation(o, &corridor) > CONTACT_TOL)
}

/// Point on a circle's rim at `angle`, together with the gripper orientation
/// perpendicular to the rim tangent there (the radial direction, folded into
/// `[0, π)`).
pub fn rim_point(center: Point2, radius: f64, angle: f64) -> (Point2, f64) {
    (
        center + Point2::from_angle(angle) * radius,
        normalize_half_turn(angle),
    )
}

/// A one-dimensional set a gripper can close on: a dish rim or a utensil axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Curve {
    Circle { center: Point2, radius: f64 },
    Segment(Point2, Point2),
}

fn closest_on_segment(p: Point2, s0: Point2, s1: Point2) -> Point2 {
    let d = s1 - s0;
    let len2 = d.dot(d);
    if len2 <= 0.0 {
        return s0;
    }
    let t = ((p - s0).dot(d) / len2).clamp(0.0, 1.0);
    s0 + d * t
}

fn segment_segment(p0: Point2, p1: Point2, q0: Point2, q1: Point2) -> (Point2, Point2) {
    let d1 = p1 - p0;
    let d2 = q1 - q0;
    let denom = d1.cross(d2);
    if denom.abs() > 1e-12 {
        let r = q0 - p0;
        let s = r.cross(d2) / denom;
        let t = r.cross(d1) / denom;
        if (0.0..=1.0).contains(&s) && (0.0..=1.0).contains(&t) {
            let x = p0 + d1 * s;
            return (x, x);
        }
    }
    // Disjoint (or parallel) segments: the closest pair involves an endpoint.
    let candidates = [
        (p0, closest_on_segment(p0, q0, q1)),
        (p1, closest_on_segment(p1, q0, q1)),
        (closest_on_segment(q0, p0, p1), q0),
        (closest_on_segment(q1, p0, p1), q1),
    ];
    candidates
        .into_iter()
        .min_by(|a, b| a.0.distance(a.1).total_cmp(&b.0.distance(b.1)))
        .expect("non-empty")
}

fn circle_circle(c1: Point2, r1: f64, c2: Point2, r2: f64) -> (Point2, Point2) {
    let d = c1.distance(c2);
    let u = (c2 - c1).normalized().unwrap_or(Point2::new(1.0, 0.0));
    if d >= r1 + r2 {
        (c1 + u * r1, c2 - u * r2)
    } else if d <= (r1 - r2).abs() {
        if r1 >= r2 {
            (c1 + u * r1, c2 + u * r2)
        } else {
            (c1 - u * r1, c2 - u * r2)
        }
    } else {
        let a = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
        let h = (r1 * r1 - a * a).max(0.0).sqrt();
        let x = c1 + u * a + u.perp() * h;
        (x, x)
    }
}

fn circle_segment(c: Point2, r: f64, s0: Point2, s1: Point2) -> (Point2, Point2) {
    let q = closest_on_segment(c, s0, s1);
    let dq = q.distance(c);
    if dq >= r {
        let dir = (q - c).normalized().unwrap_or(Point2::new(1.0, 0.0));
        return (c + dir * r, q);
    }
    let far = if s0.distance(c) >= s1.distance(c) {
        s0
    } else {
        s1
    };
    let df = far.distance(c);
    if df >= r {
        // Walk from q towards the far endpoint until the rim is crossed.
        let dir = (far - q).normalized().unwrap_or(Point2::new(1.0, 0.0));
        let w = q - c;
        let b = w.dot(dir);
        let t = -b + (b * b - (w.dot(w) - r * r)).max(0.0).sqrt();
        let x = q + dir * t;
        (x, x)
    } else {
        let dir = (far - c).normalized().unwrap_or(Point2::new(1.0, 0.0));
        (c + dir * r, far)
    }
}

/// Closest pair of points `(on a, on b)` between two curves.
pub fn nearest_points(a: &Curve, b: &Curve) -> (Point2, Point2) {
    match (*a, *b) {
        (
            Curve::Circle {
                center: c1,
                radius: r1,
            },
            Curve::Circle {
                center: c2,
                radius: r2,
            },
        ) => circle_circle(c1, r1, c2, r2),
        (Curve::Circle { center, radius }, Curve::Segment(s0, s1)) => {
            circle_segment(center, radius, s0, s1)
        }
        (Curve::Segment(s0, s1), Curve::Circle { center, radius }) => {
            let (pc, ps) = circle_segment(center, radius, s0, s1);
            (ps, pc)
        }
        (Curve::Segment(p0, p1), Curve::Segment(q0, q1)) => segment_segment(p0, p1, q0, q1),
    }
}
