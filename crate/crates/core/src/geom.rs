//! Planar points, robust orientation / in-circle predicates and triangle metrics.
//!
//! Predicates are exact (adaptive precision via the `robust` crate). The
//! triangulation uses [`in_circumball_sos`], which resolves exact
//! cocircularity with a symbolic perturbation keyed to vertex insertion order,
//! so every query there gets a strict answer.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    pub fn dist2(self, o: Point) -> f64 {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        dx * dx + dy * dy
    }

    fn coord(self) -> robust::Coord<f64> {
        robust::Coord { x: self.x, y: self.y }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("degenerate (collinear) triangle")]
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    Clockwise,
    Collinear,
    CounterClockwise,
}

impl Orientation {
    pub fn sign(self) -> i8 {
        match self {
            Orientation::Clockwise => -1,
            Orientation::Collinear => 0,
            Orientation::CounterClockwise => 1,
        }
    }
}

/// Exact orientation of `c` relative to the directed line `a -> b`.
pub fn orientation(a: Point, b: Point, c: Point) -> Orientation {
    let d = robust::orient2d(a.coord(), b.coord(), c.coord());
    if d > 0.0 {
        Orientation::CounterClockwise
    } else if d < 0.0 {
        Orientation::Clockwise
    } else {
        Orientation::Collinear
    }
}

/// Exact position of `d` relative to the circumcircle of `a, b, c`:
/// `1` strictly inside, `0` on the circle, `-1` strictly outside.
/// The vertex order of `a, b, c` does not matter.
pub fn in_circumball(a: Point, b: Point, c: Point, d: Point) -> Result<i8, GeomError> {
    if !(a.is_finite() && b.is_finite() && c.is_finite() && d.is_finite()) {
        return Err(GeomError::NonFinite);
    }
    let o = orientation(a, b, c).sign();
    if o == 0 {
        return Err(GeomError::Degenerate);
    }
    let s = robust::incircle(a.coord(), b.coord(), c.coord(), d.coord());
    let s = if s > 0.0 {
        1
    } else if s < 0.0 {
        -1
    } else {
        0
    };
    Ok(s * o)
}

/// Strict in-circle test with symbolic perturbation.
///
/// `a, b, c` must be counter-clockwise. Returns `true` if `d` is inside the
/// (perturbed) circumcircle. Exact ties are broken by lifting each point by an
/// infinitesimal that grows with its key, the largest key dominating.
pub fn in_circumball_sos(a: Point, b: Point, c: Point, d: Point, keys: [u64; 4]) -> bool {
    let s = robust::incircle(a.coord(), b.coord(), c.coord(), d.coord());
    if s > 0.0 {
        return true;
    }
    if s < 0.0 {
        return false;
    }
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| keys[j].cmp(&keys[i]));
    for &i in &order {
        let o = match i {
            3 => return false,
            2 => orientation(a, b, d),
            1 => orientation(a, d, c),
            _ => orientation(d, b, c),
        };
        match o {
            Orientation::CounterClockwise => return true,
            Orientation::Clockwise => return false,
            Orientation::Collinear => {}
        }
    }
    // Four distinct cocircular points never have three collinear among them.
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleMetrics {
    pub circumcenter: Point,
    /// Circumradius, written `delta` in formulas.
    pub circumradius: f64,
    /// Smallest interior angle in radians.
    pub min_angle: f64,
    pub area: f64,
}

fn angle_at(o: Point, p: Point, q: Point) -> f64 {
    let (ux, uy) = (p.x - o.x, p.y - o.y);
    let (vx, vy) = (q.x - o.x, q.y - o.y);
    (ux * vy - uy * vx).abs().atan2(ux * vx + uy * vy)
}

pub fn triangle_metrics(a: Point, b: Point, c: Point) -> Result<TriangleMetrics, GeomError> {
    if !(a.is_finite() && b.is_finite() && c.is_finite()) {
        return Err(GeomError::NonFinite);
    }
    if orientation(a, b, c) == Orientation::Collinear {
        return Err(GeomError::Degenerate);
    }
    let (bx, by) = (b.x - a.x, b.y - a.y);
    let (cx, cy) = (c.x - a.x, c.y - a.y);
    let cross = bx * cy - by * cx;
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let d = 2.0 * cross;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    let area = 0.5 * cross.abs();
    // abc / 4A is better conditioned than |center - a| for slivers.
    let a2 = b.dist2(c);
    let circumradius = (b2.sqrt() * c2.sqrt() * a2.sqrt()) / (4.0 * area);
    // The smallest angle faces the shortest edge.
    let min_angle = if a2 <= b2 && a2 <= c2 {
        angle_at(a, b, c)
    } else if c2 <= b2 {
        angle_at(b, c, a)
    } else {
        angle_at(c, a, b)
    };
    Ok(TriangleMetrics {
        circumcenter: Point::new(a.x + ux, a.y + uy),
        circumradius,
        min_angle,
        area,
    })
}

/// Total order on points, x first. Used for canonical sorting only.
pub fn lex_cmp(a: &Point, b: &Point) -> Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
}
