//! Collapsed Gauss–Legendre rules on reference simplices.
//!
//! The reference `s`-simplex has vertices `0, e_1, .., e_s` and measure
//! `1/s!`. Rules are built as conical products of Gauss–Legendre rules on
//! `[0, 1]`, with enough points per direction to absorb the Duffy Jacobian.

use crate::error::{Error, Result};
use crate::geometry::{self, Point};

pub const MAX_DEGREE: usize = 20;

#[derive(Debug, Clone)]
pub struct QuadRule {
    pub dim: usize,
    /// Barycentric coordinates, `dim + 1` per point (unused slots zero).
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn reference_measure(&self) -> f64 {
        1.0 / factorial(self.dim)
    }

    /// Cartesian coordinates on the reference simplex.
    pub fn reference_point(&self, q: usize) -> Point {
        let mut x = [0.0; 3];
        x[..self.dim].copy_from_slice(&self.points[q][1..=self.dim]);
        x
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `n`-point Gauss–Legendre rule on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Rule on the reference `dim`-simplex exact for total degree `degree`.
pub fn simplex_rule(dim: usize, degree: usize) -> Result<QuadRule> {
    if degree > MAX_DEGREE {
        return Err(Error::config(format!(
            "quadrature degree {degree} exceeds {MAX_DEGREE}"
        )));
    }
    if !(1..=3).contains(&dim) {
        return Err(Error::config(format!("no quadrature on {dim}-simplices")));
    }
    // direction j carries the Jacobian factor (1 - t_j)^(dim - 1 - j)
    let rules: Vec<(Vec<f64>, Vec<f64>)> = (0..dim)
        .map(|j| gauss_legendre((degree + (dim - 1 - j)) / 2 + 1))
        .collect();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut idx = vec![0usize; dim];
    loop {
        let mut x = [0.0; 3];
        let mut remaining = 1.0;
        let mut jac = 1.0;
        let mut w = 1.0;
        for j in 0..dim {
            let tj = rules[j].0[idx[j]];
            w *= rules[j].1[idx[j]];
            jac *= remaining;
            x[j] = remaining * tj;
            remaining *= 1.0 - tj;
        }
        let w = w * jac;
        let mut bary = [0.0; 4];
        bary[0] = 1.0 - x[..dim].iter().sum::<f64>();
        bary[1..=dim].copy_from_slice(&x[..dim]);
        points.push(bary);
        weights.push(w);

        let mut j = 0;
        loop {
            idx[j] += 1;
            if idx[j] < rules[j].0.len() {
                break;
            }
            idx[j] = 0;
            j += 1;
            if j == dim {
                return Ok(QuadRule {
                    dim,
                    points,
                    weights,
                    exact_degree: degree,
                });
            }
        }
    }
}

/// Map a reference rule onto a physical simplex given by `rule.dim + 1`
/// vertices. Returns physical points and weights.
pub fn map_rule(rule: &QuadRule, vertices: &[Point]) -> Result<(Vec<Point>, Vec<f64>)> {
    if vertices.len() != rule.dim + 1 {
        return Err(Error::structural(format!(
            "expected {} vertices for a {}-simplex, got {}",
            rule.dim + 1,
            rule.dim,
            vertices.len()
        )));
    }
    let measure = geometry::simplex_measure(vertices);
    let h = geometry::max_edge_length(vertices);
    if !(measure > 1e-14 * h.powi(rule.dim as i32)) {
        return Err(Error::structural("degenerate simplex in quadrature map"));
    }
    let factor = measure / rule.reference_measure();
    let pts = rule
        .points
        .iter()
        .map(|b| {
            let mut x = [0.0; 3];
            for (i, v) in vertices.iter().enumerate() {
                x = geometry::add(&x, &geometry::scale(v, b[i]));
            }
            x
        })
        .collect();
    let w = rule.weights.iter().map(|w| w * factor).collect();
    Ok((pts, w))
}
