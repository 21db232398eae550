//! Element weak-gradient operators.
//!
//! On a cell `T` the weak gradient of `v` is the matrix polynomial
//! `G in [P_{k+1}(T)]^{d x d}` with
//!
//! ```text
//! (G, tau)_T = -(v, div tau)_T + <{v}, tau n>_dT    for all tau,
//! ```
//!
//! where `{v}` is the two-sided average on interior faces and zero on
//! boundary faces. `div tau` is taken row-wise, so `G_ij` approximates
//! `d v_i / d x_j`. The test tensors are the orthonormal products
//! `phi_a E_ij`, which makes the mass matrix the identity: the operator is a
//! plain matrix acting on the DOFs of `T` and its face neighbors.

use nalgebra::{DMatrix, DVector};

use crate::geometry::Point;
use crate::polybasis::dim_p;
use crate::spaces::HdivSpace;
use crate::{MatrixFn, VectorFn};

#[derive(Debug, Clone)]
pub struct WeakGradOp {
    pub element: usize,
    /// `T` followed by its face neighbors.
    pub patch_cells: Vec<usize>,
    /// Global velocity DOFs the operator reads, without repeats.
    pub patch: Vec<usize>,
    /// `n_tau x patch.len()`, rows indexed `(i * d + j) * n_{k+1} + a`.
    pub matrix: DMatrix<f64>,
}

impl WeakGradOp {
    pub fn n_tau(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Number of tensor basis functions on one cell.
pub fn tensor_dim(dim: usize, k: usize) -> usize {
    dim * dim * dim_p(dim, k + 1)
}

/// Build the weak-gradient operator of `cell`.
pub fn build_weak_grad(space: &HdivSpace, cell: usize) -> WeakGradOp {
    let mesh = &*space.mesh;
    let dim = mesh.dim;
    let nk = space.n_scalar();
    let n1 = dim_p(dim, space.k + 1);
    let n_tau = dim * dim * n1;
    let n_poly = dim * nk;
    let basis = &space.bases[cell];
    let row = |i: usize, j: usize, a: usize| (i * dim + j) * n1 + a;

    // poly-level maps: vector-basis coefficients -> weak-gradient coefficients
    let mut own = DMatrix::<f64>::zeros(n_tau, n_poly);
    let (pts, wts) = space.quad.cell_points(mesh, cell);
    let tab = basis.tabulate(&pts, None, true);
    for q in 0..pts.len() {
        for a in 0..n1 {
            let ga = tab.grad(q, a);
            for b in 0..nk {
                let wb = wts[q] * tab.value(q, b);
                for j in 0..dim {
                    let v = -wb * ga[j];
                    for i in 0..dim {
                        own[(row(i, j, a), i * nk + b)] += v;
                    }
                }
            }
        }
    }

    let mut patch_cells = vec![cell];
    let mut neighbor_maps = Vec::new();
    for &f in mesh.cell_faces(cell) {
        let face = &mesh.faces[f];
        let Some(other) = face.other(cell) else {
            continue;
        };
        let n = crate::geometry::scale(&face.normal, face.orientation(cell));
        let (fp, fw) = space.quad.face_points(mesh, f);
        let tab_t = basis.tabulate(&fp, None, false);
        let tab_n = space.bases[other].tabulate(&fp, Some(nk), false);
        let mut nb = DMatrix::<f64>::zeros(n_tau, n_poly);
        for q in 0..fp.len() {
            for a in 0..n1 {
                let wa = 0.5 * fw[q] * tab_t.value(q, a);
                for b in 0..nk {
                    let et = wa * tab_t.value(q, b);
                    let en = wa * tab_n.value(q, b);
                    for j in 0..dim {
                        for i in 0..dim {
                            own[(row(i, j, a), i * nk + b)] += et * n[j];
                            nb[(row(i, j, a), i * nk + b)] += en * n[j];
                        }
                    }
                }
            }
        }
        patch_cells.push(other);
        neighbor_maps.push(nb);
    }

    let mut patch: Vec<usize> = Vec::new();
    for &c in &patch_cells {
        for &d in space.dofmap.cell_dofs(c) {
            if !patch.contains(&d) {
                patch.push(d);
            }
        }
    }
    let mut matrix = DMatrix::<f64>::zeros(n_tau, patch.len());
    let mut scatter = |c: usize, poly_map: &DMatrix<f64>| {
        let local = poly_map * &space.elements[c].shape;
        for (l, &d) in space.dofmap.cell_dofs(c).iter().enumerate() {
            let col = patch.iter().position(|&p| p == d).unwrap();
            let mut dst = matrix.column_mut(col);
            dst += local.column(l);
        }
    };
    scatter(cell, &own);
    for (idx, nb) in neighbor_maps.iter().enumerate() {
        scatter(patch_cells[idx + 1], nb);
    }

    WeakGradOp {
        element: cell,
        patch_cells,
        patch,
        matrix,
    }
}

/// Weak-gradient coefficients of a global velocity field on the operator's cell.
pub fn apply_weak_grad(op: &WeakGradOp, coeffs: &[f64]) -> DVector<f64> {
    let v = DVector::from_iterator(op.patch.len(), op.patch.iter().map(|&d| coeffs[d]));
    &op.matrix * v
}

/// Contribution `<P_e g, tau n>` of boundary data on the boundary faces of
/// `cell`, with `P_e` the face `L2` projection onto `P_k(e)`. Used as the
/// trial-side boundary average of a field with trace `g`.
pub fn boundary_lifting(space: &HdivSpace, cell: usize, g: &VectorFn<'_>) -> DVector<f64> {
    let mesh = &*space.mesh;
    let dim = mesh.dim;
    let n1 = dim_p(dim, space.k + 1);
    let mut out = DVector::zeros(dim * dim * n1);
    for &f in mesh.cell_faces(cell) {
        let face = &mesh.faces[f];
        if !face.is_boundary() {
            continue;
        }
        let (fp, fw) = space.quad.face_points(mesh, f);
        let nf = space.face_basis.n;
        let psi: Vec<Vec<f64>> = (0..fp.len())
            .map(|q| space.face_basis.values_at(q, face.measure).collect())
            .collect();
        let mut moments = vec![[0.0; 3]; nf];
        for (q, x) in fp.iter().enumerate() {
            let gv = g(x);
            for b in 0..nf {
                for i in 0..dim {
                    moments[b][i] += fw[q] * gv[i] * psi[q][b];
                }
            }
        }
        let tab = space.bases[cell].tabulate(&fp, None, false);
        for q in 0..fp.len() {
            let mut pg = [0.0; 3];
            for b in 0..nf {
                for i in 0..dim {
                    pg[i] += moments[b][i] * psi[q][b];
                }
            }
            for a in 0..n1 {
                let wa = fw[q] * tab.value(q, a);
                for i in 0..dim {
                    for j in 0..dim {
                        out[(i * dim + j) * n1 + a] += wa * pg[i] * face.normal[j];
                    }
                }
            }
        }
    }
    out
}

/// Coefficients of the element `L2` projection of a matrix field
/// (`grad[i][j] = d u_i / d x_j`) onto `[P_{k+1}(T)]^{d x d}`.
pub fn project_gradient(space: &HdivSpace, cell: usize, grad: &MatrixFn<'_>) -> DVector<f64> {
    let dim = space.dim();
    let n1 = dim_p(dim, space.k + 1);
    let (pts, wts) = space.quad.cell_points(&space.mesh, cell);
    project_matrix_field(space, cell, &pts, &wts, grad, n1)
}

pub(crate) fn project_matrix_field(
    space: &HdivSpace,
    cell: usize,
    pts: &[Point],
    wts: &[f64],
    grad: &MatrixFn<'_>,
    n1: usize,
) -> DVector<f64> {
    let dim = space.dim();
    let tab = space.bases[cell].tabulate(pts, Some(n1), false);
    let mut out = DVector::zeros(dim * dim * n1);
    for (q, x) in pts.iter().enumerate() {
        let gm = grad(x);
        for a in 0..n1 {
            let wa = wts[q] * tab.value(q, a);
            for i in 0..dim {
                for j in 0..dim {
                    out[(i * dim + j) * n1 + a] += wa * gm[i][j];
                }
            }
        }
    }
    out
}

/// Evaluate weak-gradient coefficients as a matrix at a point of `cell`.
pub fn eval_tensor(space: &HdivSpace, cell: usize, coeffs: &DVector<f64>, x: &Point) -> [[f64; 3]; 3] {
    let dim = space.dim();
    let n1 = dim_p(dim, space.k + 1);
    let phi = space.bases[cell].eval(x);
    let mut m = [[0.0; 3]; 3];
    for i in 0..dim {
        for j in 0..dim {
            m[i][j] = (0..n1).map(|a| coeffs[(i * dim + j) * n1 + a] * phi[a]).sum();
        }
    }
    m
}
