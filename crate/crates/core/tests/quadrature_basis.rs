mod common;

use common::{mesh, orthonormality_sweep, quadrature_sweep};
use hdiv_stokes::quadrature::{map_rule, simplex_rule, MAX_DEGREE};
use proptest::prelude::*;

#[test]
fn triangle_rules_exact_for_monomials() {
    let err = quadrature_sweep(2, MAX_DEGREE);
    assert!(err < 1e-11, "relative error {err}");
}

#[test]
fn tetrahedron_rules_exact_for_monomials() {
    let err = quadrature_sweep(3, MAX_DEGREE);
    assert!(err < 1e-10, "relative error {err}");
}

#[test]
fn cell_bases_orthonormal_2d() {
    let m = mesh(2, 3);
    for degree in 0..=5 {
        let dev = orthonormality_sweep(&m, degree);
        assert!(dev < 1e-10, "degree {degree}: {dev}");
    }
}

#[test]
fn cell_bases_orthonormal_3d() {
    let m = mesh(3, 2);
    for degree in 0..=3 {
        let dev = orthonormality_sweep(&m, degree);
        assert!(dev < 1e-10, "degree {degree}: {dev}");
    }
}

proptest! {
    #[test]
    fn mapped_rule_integrates_quadratics_on_any_triangle(
        a in prop::array::uniform2(-2.0f64..2.0),
        b in prop::array::uniform2(-2.0f64..2.0),
        c in prop::array::uniform2(-2.0f64..2.0),
    ) {
        let verts = [[a[0], a[1], 0.0], [b[0], b[1], 0.0], [c[0], c[1], 0.0]];
        let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
        prop_assume!(area > 1e-3);
        let rule = simplex_rule(2, 2).unwrap();
        let (pts, wts) = map_rule(&rule, &verts).unwrap();
        let total: f64 = wts.iter().sum();
        prop_assert!((total - area).abs() < 1e-12 * area.max(1.0));
        // int x^2 over a triangle: area/6 (sum x_i^2 + sum_{i<j} x_i x_j)
        let xs = [a[0], b[0], c[0]];
        let exact = area / 6.0 * (xs.iter().map(|x| x * x).sum::<f64>() + xs[0] * xs[1] + xs[0] * xs[2] + xs[1] * xs[2]);
        let q: f64 = pts.iter().zip(&wts).map(|(p, w)| w * p[0] * p[0]).sum();
        prop_assert!((q - exact).abs() < 1e-11 * exact.abs().max(1.0));
    }
}
