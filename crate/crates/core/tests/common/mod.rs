#![allow(dead_code)]

use std::sync::Arc;

use hdiv_stokes::assembly::{build_reduced, StokesDiscretization};
use hdiv_stokes::examples::{ExampleId, ExampleSpec};
use hdiv_stokes::mesh::{unit_cube_mesh, unit_square_mesh, SimplicialMesh};
use hdiv_stokes::polybasis::{build_basis, dim_p, monomial_exponents};
use hdiv_stokes::postproc::infsup_estimate;
use hdiv_stokes::quadrature::{map_rule, simplex_rule};
use hdiv_stokes::solver::{solve_saddle, SolverKind};
use hdiv_stokes::spaces::{FiniteElementSpace, HdivSpace, QuadSet};
use hdiv_stokes::taylor_hood::{LagrangeSpace, TaylorHood};
use hdiv_stokes::weak_gradient::{apply_weak_grad, build_weak_grad, project_gradient};
use hdiv_stokes::{Point, ScalarFn, VectorFn};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn mesh(dim: usize, level: usize) -> Arc<SimplicialMesh> {
    Arc::new(if dim == 2 {
        unit_square_mesh(level).unwrap()
    } else {
        unit_cube_mesh(level).unwrap()
    })
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Exact integral of `x^a y^b z^c` over the unit simplex.
pub fn simplex_monomial(dim: usize, e: [usize; 3]) -> f64 {
    let s: usize = e[..dim].iter().sum();
    e[..dim].iter().map(|&a| factorial(a)).product::<f64>() / factorial(s + dim)
}

/// Largest relative monomial error of the simplex rules of every degree
/// up to `max_degree`.
pub fn quadrature_sweep(dim: usize, max_degree: usize) -> f64 {
    let unit: Vec<Point> = if dim == 2 {
        vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
    } else {
        vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    };
    let mut worst: f64 = 0.0;
    for degree in 1..=max_degree {
        let rule = simplex_rule(dim, degree).unwrap();
        let (pts, wts) = map_rule(&rule, &unit).unwrap();
        for e in monomial_exponents(dim, degree) {
            let q: f64 = pts
                .iter()
                .zip(&wts)
                .map(|(x, w)| w * (0..dim).map(|i| x[i].powi(e[i] as i32)).product::<f64>())
                .sum();
            let exact = simplex_monomial(dim, e);
            worst = worst.max((q - exact).abs() / exact);
        }
    }
    worst
}

/// Largest deviation of the cell basis Gram matrix from the identity, over
/// every cell of `mesh`.
pub fn orthonormality_sweep(mesh: &SimplicialMesh, degree: usize) -> f64 {
    let quad = QuadSet::new(mesh.dim, 2 * degree + 2).unwrap();
    let mut worst: f64 = 0.0;
    for c in 0..mesh.n_cells() {
        let basis = build_basis(mesh, c, degree).unwrap();
        assert_eq!(basis.len(), dim_p(mesh.dim, degree));
        let (pts, wts) = quad.cell_points(mesh, c);
        let tab = basis.tabulate(&pts, None, false);
        for a in 0..basis.len() {
            for b in 0..basis.len() {
                let g: f64 = (0..pts.len()).map(|q| wts[q] * tab.value(q, a) * tab.value(q, b)).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
    }
    worst
}

/// Random continuous piecewise-`P_k` vector field, zero on the boundary.
pub fn random_lagrange_field(lag: &LagrangeSpace, rng: &mut StdRng) -> Vec<f64> {
    let n = lag.n_nodes();
    let mut coeffs: Vec<f64> = (0..n * lag.components).map(|_| rng.random_range(-1.0..1.0)).collect();
    for &b in &lag.boundary_nodes {
        for comp in 0..lag.components {
            coeffs[comp * n + b] = 0.0;
        }
    }
    coeffs
}

/// Weak-gradient consistency on `fields` random continuous fields: the
/// weak gradient of the interpolant equals the projected classical gradient.
/// Returns the largest coefficient error.
pub fn weak_gradient_identity(dim: usize, k: usize, level: usize, fields: usize, seed: u64) -> f64 {
    let mesh = mesh(dim, level);
    let space = HdivSpace::new(mesh.clone(), k, None).unwrap();
    let lag = LagrangeSpace::new(mesh.clone(), k, dim, QuadSet::new(dim, 2 * k + 6).unwrap()).unwrap();
    let ops: Vec<_> = (0..mesh.n_cells()).map(|c| build_weak_grad(&space, c)).collect();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..fields {
        let coeffs = random_lagrange_field(&lag, &mut rng);
        let value = |x: &Point| -> Point {
            let c = mesh.locate(x, 1e-10).expect("point inside the mesh");
            let v = lag.eval_cell(&coeffs, c, &[*x]);
            let mut out = [0.0; 3];
            out[..dim].copy_from_slice(&v[..dim]);
            out
        };
        let dofs = space.interpolate(&value);
        for (c, op) in ops.iter().enumerate() {
            let grad = |x: &Point| -> [[f64; 3]; 3] {
                let g = lag.eval_cell_grad(&coeffs, c, &[*x]);
                let mut m = [[0.0; 3]; 3];
                m[..dim].copy_from_slice(&g[..dim]);
                m
            };
            let weak = apply_weak_grad(op, &dofs);
            let proj = project_gradient(&space, c, &grad);
            worst = worst.max((weak - proj).amax());
        }
    }
    worst
}

/// Smooth polynomial potentials used for gradient forcing.
pub fn potentials() -> Vec<(Box<ScalarFn<'static>>, Box<VectorFn<'static>>)> {
    vec![
        (
            Box::new(|x: &Point| x[0] * x[0] * x[1].powi(3)),
            Box::new(|x: &Point| [2.0 * x[0] * x[1].powi(3), 3.0 * x[0] * x[0] * x[1] * x[1], 0.0]),
        ),
        (
            Box::new(|x: &Point| (x[0] - 0.3).powi(4) + x[1]),
            Box::new(|x: &Point| [4.0 * (x[0] - 0.3).powi(3), 1.0, 0.0]),
        ),
        (
            Box::new(|x: &Point| x[0] * x[1] * (x[0] + x[1]).powi(2)),
            Box::new(|x: &Point| {
                let s = x[0] + x[1];
                [
                    x[1] * s * s + 2.0 * x[0] * x[1] * s,
                    x[0] * s * s + 2.0 * x[0] * x[1] * s,
                    0.0,
                ]
            }),
        ),
    ]
}

/// Adding `grad phi` to the forcing: returns, over the three potentials,
/// the largest velocity change and the largest deviation of the pressure
/// change from `Q_h phi - mean(phi)`.
pub fn gradient_forcing_invariance(k: usize, level: usize) -> (f64, f64) {
    let disc = StokesDiscretization::new(mesh(2, level), k, None).unwrap();
    let spec = ExampleSpec::new(ExampleId::Ex1, 1.0).unwrap();
    let sys = build_reduced(&disc, 1.0, &*spec.forcing, None).unwrap();
    let base = solve_saddle(&sys, SolverKind::Direct).unwrap();
    let weights = disc.pressure.mean_weights();
    let volume: f64 = disc.mesh().total_volume();
    let one = disc.pressure.project(&disc.velocity.quad, &|_| 1.0);
    let (mut du, mut dp): (f64, f64) = (0.0, 0.0);
    for (phi, grad_phi) in potentials() {
        let f = |x: &Point| {
            let a = (spec.forcing)(x);
            let b = grad_phi(x);
            [a[0] + b[0], a[1] + b[1], 0.0]
        };
        let sys2 = build_reduced(&disc, 1.0, &f, None).unwrap();
        let sol = solve_saddle(&sys2, SolverKind::Direct).unwrap();
        du = du.max(max_abs_diff(&sol.velocity, &base.velocity));
        let q = disc.pressure.project(&disc.velocity.quad, &*phi);
        let mean: f64 = q.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>() / volume;
        let expected: Vec<f64> = q.iter().zip(&one).map(|(a, o)| a - mean * o).collect();
        let actual: Vec<f64> = sol.pressure.iter().zip(&base.pressure).map(|(a, b)| a - b).collect();
        dp = dp.max(max_abs_diff(&actual, &expected));
    }
    (du, dp)
}

/// Solve with `(mu, f)` and `(s mu, s f)`. Returns the relative velocity
/// difference and the relative deviation of `p_h(s)` from `s p_h`.
pub fn mu_scaling(k: usize, level: usize, mu: f64, s: f64) -> (f64, f64) {
    let disc = StokesDiscretization::new(mesh(2, level), k, None).unwrap();
    let spec = ExampleSpec::new(ExampleId::Ex1, mu).unwrap();
    let f = |x: &Point| {
        let v = (spec.forcing)(x);
        [s * v[0], s * v[1], 0.0]
    };
    let a = solve_saddle(
        &build_reduced(&disc, mu, &*spec.forcing, None).unwrap(),
        SolverKind::Direct,
    )
    .unwrap();
    let b = solve_saddle(&build_reduced(&disc, s * mu, &f, None).unwrap(), SolverKind::Direct).unwrap();
    let du = max_abs_diff(&a.velocity, &b.velocity) / max_abs(&a.velocity);
    let scaled: Vec<f64> = a.pressure.iter().map(|p| s * p).collect();
    let dp = max_abs_diff(&b.pressure, &scaled) / max_abs(&scaled);
    (du, dp)
}

/// Inf-sup estimates on 2D levels `levels`.
pub fn infsup_levels(k: usize, levels: std::ops::RangeInclusive<usize>) -> Vec<f64> {
    levels
        .map(|l| infsup_estimate(&StokesDiscretization::new(mesh(2, l), k, None).unwrap()).unwrap())
        .collect()
}

/// Families used by the uniqueness check: `(label, dim, k, taylor_hood)`.
pub fn all_families() -> Vec<(String, usize, usize, bool)> {
    let mut v: Vec<(String, usize, usize, bool)> = (1..=4).map(|k| (format!("hdiv 2D k={k}"), 2, k, false)).collect();
    v.push(("hdiv 3D k=2".into(), 3, 2, false));
    for k in 2..=3 {
        v.push((format!("taylor-hood 2D k={k}"), 2, k, true));
    }
    v
}

/// Zero data: the largest solution entry and the relative residual.
pub fn zero_data_solution(dim: usize, k: usize, taylor_hood: bool, kind: SolverKind) -> (f64, f64) {
    let level = if dim == 2 { 2 } else { 1 };
    let zero = |_: &Point| [0.0; 3];
    let sys = if taylor_hood {
        TaylorHood::new(mesh(dim, level), k, None)
            .unwrap()
            .build_reduced(1.0, &zero, Some(&zero))
            .unwrap()
    } else {
        let disc = StokesDiscretization::new(mesh(dim, level), k, None).unwrap();
        build_reduced(&disc, 1.0, &zero, Some(&zero)).unwrap()
    };
    let sol = solve_saddle(&sys, kind).unwrap();
    let size = max_abs(&sol.velocity)
        .max(max_abs(&sol.pressure))
        .max(sol.multiplier.abs());
    (size, sol.report.relative_residual)
}
