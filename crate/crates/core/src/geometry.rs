//! Small geometric helpers and simplex quadrature rules.
//!
//! Points are always stored as 3-vectors; two-dimensional meshes keep `z = 0`.

use nalgebra::Vector3;

pub type Point = Vector3<f64>;

/// A quadrature node with its absolute weight (the rule's measure is folded in).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub x: Point,
    pub weight: f64,
}

pub fn segment_length(a: &Point, b: &Point) -> f64 {
    (b - a).norm()
}

pub fn triangle_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Signed area of a triangle lying in the xy-plane.
pub fn signed_area_2d(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x))
}

pub fn tet_volume(a: &Point, b: &Point, c: &Point, d: &Point) -> f64 {
    ((b - a).cross(&(c - a))).dot(&(d - a)).abs() / 6.0
}

/// Measure of a `k`-simplex given by `k + 1` points (k = 1, 2, 3).
pub fn simplex_measure(points: &[Point]) -> f64 {
    match points.len() {
        2 => segment_length(&points[0], &points[1]),
        3 => triangle_area(&points[0], &points[1], &points[2]),
        4 => tet_volume(&points[0], &points[1], &points[2], &points[3]),
        n => panic!("simplex with {n} vertices"),
    }
}

pub fn centroid(points: &[Point]) -> Point {
    let mut s = Point::zeros();
    for p in points {
        s += p;
    }
    s / points.len() as f64
}

/// Largest vertex-to-vertex distance.
pub fn diameter(points: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            d = d.max((b - a).norm());
        }
    }
    d
}

/// Two-point Gauss rule on a segment (exact for cubics).
pub fn segment_rule(a: &Point, b: &Point) -> [QuadPoint; 2] {
    let len = segment_length(a, b);
    let s = 0.5 / 3f64.sqrt();
    let mid = 0.5 * (a + b);
    let d = b - a;
    [
        QuadPoint {
            x: mid - s * d,
            weight: 0.5 * len,
        },
        QuadPoint {
            x: mid + s * d,
            weight: 0.5 * len,
        },
    ]
}

/// Three-point rule on a triangle, exact for quadratics.
pub fn triangle_rule(a: &Point, b: &Point, c: &Point) -> [QuadPoint; 3] {
    let area = triangle_area(a, b, c);
    let w = area / 3.0;
    let p = |l0: f64, l1: f64, l2: f64| QuadPoint {
        x: a * l0 + b * l1 + c * l2,
        weight: w,
    };
    [
        p(2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0),
        p(1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0),
        p(1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0),
    ]
}

/// Four-point rule on a tetrahedron, exact for quadratics.
pub fn tet_rule(a: &Point, b: &Point, c: &Point, d: &Point) -> [QuadPoint; 4] {
    let vol = tet_volume(a, b, c, d);
    let alpha = 0.585_410_196_624_968_5;
    let beta = 0.138_196_601_125_010_5;
    let pts = [a, b, c, d];
    std::array::from_fn(|k| {
        let mut x = Point::zeros();
        for (j, p) in pts.iter().enumerate() {
            x += *p * if j == k { alpha } else { beta };
        }
        QuadPoint {
            x,
            weight: vol / 4.0,
        }
    })
}

/// Degree-2 rule on a simplex of any dimension 1..=3.
pub fn simplex_rule(points: &[Point]) -> Vec<QuadPoint> {
    match points.len() {
        2 => segment_rule(&points[0], &points[1]).to_vec(),
        3 => triangle_rule(&points[0], &points[1], &points[2]).to_vec(),
        4 => tet_rule(&points[0], &points[1], &points[2], &points[3]).to_vec(),
        n => panic!("simplex with {n} vertices"),
    }
}
