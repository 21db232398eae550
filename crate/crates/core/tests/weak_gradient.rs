mod common;

use common::{mesh, weak_gradient_identity};
use hdiv_stokes::polybasis::dim_p;
use hdiv_stokes::spaces::{FiniteElementSpace, HdivSpace};
use hdiv_stokes::weak_gradient::{apply_weak_grad, build_weak_grad, eval_tensor, tensor_dim};
use hdiv_stokes::Point;
use nalgebra::DVector;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const FIELDS: usize = 100;

#[test]
fn identity_on_continuous_fields_2d() {
    for k in 1..=4 {
        let err = weak_gradient_identity(2, k, 3, FIELDS, 100 + k as u64);
        assert!(err < 1e-9, "k={k}: {err}");
    }
}

#[test]
fn identity_on_continuous_fields_3d() {
    for k in 1..=2 {
        let err = weak_gradient_identity(3, k, 2, FIELDS, 200 + k as u64);
        assert!(err < 1e-9, "k={k}: {err}");
    }
}

/// Weak gradient coefficients straight from the defining integrals:
/// `-(v, div tau)_T + <{v}, tau n>_{dT}` against each orthonormal tensor
/// basis function, with `{v} = 0` on the boundary.
fn brute_force(space: &HdivSpace, cell: usize, u: &[f64]) -> DVector<f64> {
    let mesh = &*space.mesh;
    let dim = mesh.dim;
    let n1 = dim_p(dim, space.k + 1);
    let basis = &space.bases[cell];
    let mut out = DVector::zeros(tensor_dim(dim, space.k));
    let (pts, wts) = space.quad.cell_points(mesh, cell);
    let vals = space.eval_cell(u, cell, &pts);
    for (q, x) in pts.iter().enumerate() {
        let g = basis.eval_grad(x);
        for i in 0..dim {
            for j in 0..dim {
                for a in 0..n1 {
                    out[(i * dim + j) * n1 + a] -= wts[q] * vals[q * dim + i] * g[a][j];
                }
            }
        }
    }
    for &f in mesh.cell_faces(cell) {
        let face = &mesh.faces[f];
        let Some(other) = face.other(cell) else { continue };
        let sign = face.orientation(cell);
        let (pts, wts) = space.quad.face_points(mesh, f);
        let mine = space.eval_cell(u, cell, &pts);
        let theirs = space.eval_cell(u, other, &pts);
        for (q, x) in pts.iter().enumerate() {
            let phi = basis.eval(x);
            for i in 0..dim {
                let avg = 0.5 * (mine[q * dim + i] + theirs[q * dim + i]);
                for j in 0..dim {
                    for a in 0..n1 {
                        out[(i * dim + j) * n1 + a] += wts[q] * avg * phi[a] * sign * face.normal[j];
                    }
                }
            }
        }
    }
    out
}

#[test]
fn matches_brute_force_on_random_discontinuous_fields() {
    let cases = [(2, 1, 2), (2, 2, 2), (2, 4, 2), (3, 2, 1)];
    for (dim, k, level) in cases {
        let space = HdivSpace::new(mesh(dim, level), k, None).unwrap();
        let mut rng = StdRng::seed_from_u64(5);
        let u: Vec<f64> = (0..space.dofmap.n_dofs).map(|_| rng.random_range(-1.0..1.0)).collect();
        for c in 0..space.mesh.n_cells() {
            let fast = apply_weak_grad(&build_weak_grad(&space, c), &u);
            let slow = brute_force(&space, c, &u);
            let err = (&fast - &slow).amax();
            assert!(err < 1e-10 * (1.0 + slow.amax()), "dim {dim} k {k} cell {c}: {err}");
        }
    }
}

#[test]
fn constants_in_the_interior_have_zero_weak_gradient_away_from_boundary() {
    // a constant field is continuous, so on cells without boundary faces
    // its weak gradient vanishes
    let space = HdivSpace::new(mesh(2, 3), 2, None).unwrap();
    let u = space.interpolate(&|_: &Point| [1.0, -2.0, 0.0]);
    for c in 0..space.mesh.n_cells() {
        let interior = space
            .mesh
            .cell_faces(c)
            .iter()
            .all(|&f| !space.mesh.faces[f].is_boundary());
        if interior {
            let g = apply_weak_grad(&build_weak_grad(&space, c), &u);
            assert!(g.amax() < 1e-11);
        }
    }
}

#[test]
fn linear_field_has_its_constant_gradient_on_interior_cells() {
    let space = HdivSpace::new(mesh(2, 3), 1, None).unwrap();
    let u = space.interpolate(&|x: &Point| [x[0] + x[1], x[0] - x[1], 0.0]);
    let expected = [[1.0, 1.0], [1.0, -1.0]];
    for c in 0..space.mesh.n_cells() {
        if space
            .mesh
            .cell_faces(c)
            .iter()
            .any(|&f| space.mesh.faces[f].is_boundary())
        {
            continue;
        }
        let g = apply_weak_grad(&build_weak_grad(&space, c), &u);
        let x = space.mesh.cell_centroid(c);
        let m = eval_tensor(&space, c, &g, &x);
        for i in 0..2 {
            for j in 0..2 {
                assert!((m[i][j] - expected[i][j]).abs() < 1e-11, "{:?}", m);
            }
        }
    }
}

#[test]
fn operator_reads_only_the_patch() {
    let space = HdivSpace::new(mesh(2, 3), 2, None).unwrap();
    for c in 0..space.mesh.n_cells() {
        let op = build_weak_grad(&space, c);
        assert_eq!(op.element, c);
        assert_eq!(op.patch_cells[0], c);
        assert_eq!(op.n_tau(), tensor_dim(2, 2));
        assert_eq!(op.matrix.ncols(), op.patch.len());
        let mut sorted = op.patch.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), op.patch.len());
        let neighbors = space
            .mesh
            .cell_faces(c)
            .iter()
            .filter(|&&f| !space.mesh.faces[f].is_boundary())
            .count();
        assert_eq!(op.patch_cells.len(), 1 + neighbors);
    }
}
