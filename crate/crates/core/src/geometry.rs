//! Small fixed-size vector helpers. Points always carry three coordinates;
//! 2D meshes keep `z = 0`.

pub type Point = [f64; 3];

#[inline]
pub fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: &Point, b: &Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: &Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: &Point, b: &Point) -> Point {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

pub fn centroid(pts: &[Point]) -> Point {
    let mut c = [0.0; 3];
    for p in pts {
        c = add(&c, p);
    }
    scale(&c, 1.0 / pts.len() as f64)
}

pub fn max_edge_length(pts: &[Point]) -> f64 {
    let mut h: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            h = h.max(norm(&sub(&pts[i], &pts[j])));
        }
    }
    h
}

/// Signed volume of a full-dimensional simplex (`dim + 1` points).
pub fn signed_volume(dim: usize, pts: &[Point]) -> f64 {
    match dim {
        1 => pts[1][0] - pts[0][0],
        2 => {
            let a = sub(&pts[1], &pts[0]);
            let b = sub(&pts[2], &pts[0]);
            0.5 * (a[0] * b[1] - a[1] * b[0])
        }
        3 => {
            let a = sub(&pts[1], &pts[0]);
            let b = sub(&pts[2], &pts[0]);
            let c = sub(&pts[3], &pts[0]);
            dot(&a, &cross(&b, &c)) / 6.0
        }
        _ => panic!("signed_volume: unsupported dimension {dim}"),
    }
}

/// Unsigned measure of an `s`-simplex embedded in 3-space (`s + 1` points),
/// from the Gram determinant of its edge vectors.
pub fn simplex_measure(pts: &[Point]) -> f64 {
    let s = pts.len() - 1;
    let edges: Vec<Point> = pts[1..].iter().map(|p| sub(p, &pts[0])).collect();
    let gram = |i: usize, j: usize| dot(&edges[i], &edges[j]);
    let det = match s {
        0 => 1.0,
        1 => gram(0, 0),
        2 => gram(0, 0) * gram(1, 1) - gram(0, 1) * gram(0, 1),
        3 => {
            let g = |i, j| gram(i, j);
            g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1)) - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0))
                + g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0))
        }
        _ => panic!("simplex_measure: unsupported simplex dimension {s}"),
    };
    let fact = [1.0, 1.0, 2.0, 6.0][s];
    det.max(0.0).sqrt() / fact
}

/// Unit normal of a codimension-one face (`dim` points); orientation is
/// arbitrary and fixed by the caller.
pub fn face_normal(dim: usize, pts: &[Point]) -> Point {
    let n = match dim {
        2 => {
            let t = sub(&pts[1], &pts[0]);
            [t[1], -t[0], 0.0]
        }
        3 => cross(&sub(&pts[1], &pts[0]), &sub(&pts[2], &pts[0])),
        _ => panic!("face_normal: unsupported dimension {dim}"),
    };
    scale(&n, 1.0 / norm(&n))
}
