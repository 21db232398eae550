//! Global saddle-point system
//!
//! ```text
//! (mu grad_w u, grad_w v) - (div v, p) = (f, v)
//!                           (div u, q) = 0
//! ```
//!
//! `A` is accumulated as `sum_T mu G_T^T G_T` over element weak-gradient
//! operators; its sparsity pattern is the union of overlapping patches.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::SimplicialMesh;
use crate::polybasis::dim_p;
use crate::solver::ReducedSystem;
use crate::spaces::{HdivSpace, PressureSpace};
use crate::sparse::CsrMatrix;
use crate::weak_gradient::{boundary_lifting, build_weak_grad, WeakGradOp};
use crate::VectorFn;

/// Cells handled per parallel batch while accumulating `A`.
const CHUNK: usize = 256;

/// Velocity and pressure spaces on one mesh.
#[derive(Clone)]
pub struct StokesDiscretization {
    pub velocity: Arc<HdivSpace>,
    pub pressure: Arc<PressureSpace>,
}

impl StokesDiscretization {
    pub fn new(mesh: Arc<SimplicialMesh>, k: usize, quad_degree: Option<usize>) -> Result<Self> {
        let velocity = HdivSpace::new(mesh, k, quad_degree)?;
        let pressure = PressureSpace::new(velocity.mesh.clone(), k, velocity.bases.clone())?;
        Ok(StokesDiscretization {
            velocity: Arc::new(velocity),
            pressure: Arc::new(pressure),
        })
    }

    pub fn mesh(&self) -> &SimplicialMesh {
        &self.velocity.mesh
    }

    pub fn k(&self) -> usize {
        self.velocity.k
    }
}

#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub a: CsrMatrix,
    pub b: CsrMatrix,
    pub c: Vec<f64>,
    pub rhs_u: Vec<f64>,
    pub rhs_p: Vec<f64>,
    pub mu: f64,
    pub boundary_dofs: Vec<usize>,
}

/// Global DOFs read by the weak gradient of `cell`, in patch order.
fn patch_dofs(space: &HdivSpace, cell: usize) -> Vec<usize> {
    let mut patch: Vec<usize> = space.dofmap.cell_dofs(cell).to_vec();
    for &f in space.mesh.cell_faces(cell) {
        if let Some(other) = space.mesh.faces[f].other(cell) {
            for &d in space.dofmap.cell_dofs(other) {
                if !patch.contains(&d) {
                    patch.push(d);
                }
            }
        }
    }
    patch
}

/// Sparsity pattern of `sum_T G_T^T G_T`.
fn stiffness_pattern(space: &HdivSpace) -> CsrMatrix {
    let n = space.dofmap.n_dofs;
    let cells = space.mesh.n_cells();
    let patches: Vec<Vec<usize>> = (0..cells).into_par_iter().map(|c| patch_dofs(space, c)).collect();
    let mut dof_cells: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (c, p) in patches.iter().enumerate() {
        for &d in p {
            dof_cells[d].push(c as u32);
        }
    }
    let rows: Vec<Vec<usize>> = dof_cells
        .par_iter()
        .map(|cs| {
            let mut row: Vec<usize> = cs.iter().flat_map(|&c| patches[c as usize].iter().copied()).collect();
            row.sort_unstable();
            row.dedup();
            row
        })
        .collect();
    CsrMatrix::from_pattern(n, rows)
}

/// Weak-gradient operators of all cells, built in parallel.
pub fn weak_gradients(space: &HdivSpace) -> Vec<WeakGradOp> {
    (0..space.mesh.n_cells())
        .into_par_iter()
        .map(|c| build_weak_grad(space, c))
        .collect()
}

/// Energy matrix `sum_T mu G_T^T G_T` on all velocity DOFs.
pub fn assemble_stiffness(space: &HdivSpace, mu: f64) -> CsrMatrix {
    let mut a = stiffness_pattern(space);
    let cells = space.mesh.n_cells();
    for start in (0..cells).step_by(CHUNK) {
        let end = (start + CHUNK).min(cells);
        let locals: Vec<(Vec<usize>, DMatrix<f64>)> = (start..end)
            .into_par_iter()
            .map(|c| {
                let op = build_weak_grad(space, c);
                let local = op.matrix.tr_mul(&op.matrix) * mu;
                (op.patch, local)
            })
            .collect();
        for (patch, local) in locals {
            for (i, &r) in patch.iter().enumerate() {
                for (j, &col) in patch.iter().enumerate() {
                    let pos = a.position(r, col).expect("stiffness entry outside its pattern");
                    a.data[pos] += local[(i, j)];
                }
            }
        }
    }
    a
}

/// Divergence matrix `B[q, v] = (div v, q)`.
pub fn assemble_divergence(disc: &StokesDiscretization) -> CsrMatrix {
    let space = &*disc.velocity;
    let pressure = &*disc.pressure;
    let mesh = &*space.mesh;
    let dim = mesh.dim;
    let nk = space.n_scalar();
    let np = pressure.n_local();
    let triplets: Vec<(usize, usize, f64)> = (0..mesh.n_cells())
        .into_par_iter()
        .flat_map_iter(|c| {
            let (pts, wts) = space.quad.cell_points(mesh, c);
            let tab = space.bases[c].tabulate(&pts, Some(nk), true);
            let mut poly = DMatrix::<f64>::zeros(np, dim * nk);
            for q in 0..pts.len() {
                for a in 0..nk {
                    let g = tab.grad(q, a);
                    for r in 0..np {
                        let w = wts[q] * tab.value(q, r);
                        for comp in 0..dim {
                            poly[(r, comp * nk + a)] += w * g[comp];
                        }
                    }
                }
            }
            let local = poly * &space.elements[c].shape;
            let dofs = space.dofmap.cell_dofs(c);
            let mut out = Vec::with_capacity(np * dofs.len());
            for r in 0..np {
                for (j, &d) in dofs.iter().enumerate() {
                    out.push((c * np + r, d, local[(r, j)]));
                }
            }
            out.into_iter()
        })
        .collect();
    CsrMatrix::from_triplets(pressure.dofmap.n_dofs, space.dofmap.n_dofs, triplets)
}

/// Load vector `(f, v)`.
pub fn assemble_load(space: &HdivSpace, f: &VectorFn<'_>) -> Vec<f64> {
    let mesh = &*space.mesh;
    let dim = mesh.dim;
    let nk = space.n_scalar();
    let locals: Vec<DVector<f64>> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let (pts, wts) = space.quad.cell_points(mesh, c);
            let tab = space.bases[c].tabulate(&pts, Some(nk), false);
            let mut poly = DVector::zeros(dim * nk);
            for (q, x) in pts.iter().enumerate() {
                let fv = f(x);
                for comp in 0..dim {
                    for a in 0..nk {
                        poly[comp * nk + a] += wts[q] * fv[comp] * tab.value(q, a);
                    }
                }
            }
            space.elements[c].shape.tr_mul(&poly)
        })
        .collect();
    let mut rhs = vec![0.0; space.dofmap.n_dofs];
    for (c, local) in locals.iter().enumerate() {
        for (j, &d) in space.dofmap.cell_dofs(c).iter().enumerate() {
            rhs[d] += local[j];
        }
    }
    rhs
}

/// Assemble the full (unconstrained) system for forcing `f`.
pub fn assemble(disc: &StokesDiscretization, mu: f64, f: &VectorFn<'_>) -> Result<SaddleSystem> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::config(format!(
            "viscosity must be positive and finite, got {mu}"
        )));
    }
    let a = assemble_stiffness(&disc.velocity, mu);
    let b = assemble_divergence(disc);
    let rhs_u = assemble_load(&disc.velocity, f);
    Ok(SaddleSystem {
        a,
        b,
        c: disc.pressure.mean_weights(),
        rhs_u,
        rhs_p: vec![0.0; disc.pressure.dofmap.n_dofs],
        mu,
        boundary_dofs: disc.velocity.dofmap.boundary_dofs.clone(),
    })
}

/// Normal-trace values of `g` on the boundary DOFs (full-length vector,
/// zero elsewhere).
pub fn boundary_values(space: &HdivSpace, g: &VectorFn<'_>) -> Vec<f64> {
    let mut fixed = vec![0.0; space.dofmap.n_dofs];
    let n_fd = space.face_basis.n;
    for f in space.mesh.boundary_faces() {
        let m = space.face_normal_moments(f, g);
        fixed[f * n_fd..(f + 1) * n_fd].copy_from_slice(&m);
    }
    fixed
}

/// Boundary-lifting coefficients `g_T` of every cell touching the boundary.
pub fn boundary_liftings(space: &HdivSpace, g: &VectorFn<'_>) -> Vec<Option<DVector<f64>>> {
    let mesh = &*space.mesh;
    (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let touches = mesh.cell_faces(c).iter().any(|&f| mesh.faces[f].is_boundary());
            touches.then(|| boundary_lifting(space, c, g))
        })
        .collect()
}

/// Impose `u = g` on the boundary: normal moments strongly, tangential trace
/// through the lifting term, then eliminate the boundary DOFs. `g = None`
/// means homogeneous data.
pub fn apply_boundary(disc: &StokesDiscretization, sys: &SaddleSystem, g: Option<&VectorFn<'_>>) -> ReducedSystem {
    let space = &*disc.velocity;
    let n = space.dofmap.n_dofs;
    let free = space.dofmap.free_dofs();
    let mut fixed = vec![0.0; n];
    let mut rhs_u = sys.rhs_u.clone();
    if let Some(g) = g {
        fixed = boundary_values(space, g);
        let lifts = boundary_liftings(space, g);
        let cells: Vec<usize> = (0..lifts.len()).filter(|&c| lifts[c].is_some()).collect();
        let contributions: Vec<(Vec<usize>, DVector<f64>)> = cells
            .par_iter()
            .map(|&c| {
                let op = build_weak_grad(space, c);
                let v = op.matrix.tr_mul(lifts[c].as_ref().unwrap()) * sys.mu;
                (op.patch, v)
            })
            .collect();
        for (patch, v) in contributions {
            for (i, &d) in patch.iter().enumerate() {
                rhs_u[d] -= v[i];
            }
        }
    }
    // move the known boundary columns to the right-hand side
    let au = sys.a.matvec(&fixed);
    let bu = sys.b.matvec(&fixed);
    let rhs_free: Vec<f64> = free.iter().map(|&d| rhs_u[d] - au[d]).collect();
    let rhs_p: Vec<f64> = sys.rhs_p.iter().zip(&bu).map(|(r, b)| r - b).collect();
    let all_p: Vec<usize> = (0..sys.b.nrows).collect();
    ReducedSystem {
        a: sys.a.submatrix(&free, &free),
        b: sys.b.submatrix(&all_p, &free),
        c: sys.c.clone(),
        rhs_u: rhs_free,
        rhs_p,
        free,
        fixed,
        mu: sys.mu,
    }
}

/// Assemble, impose boundary data and reduce in one go.
pub fn build_reduced(
    disc: &StokesDiscretization,
    mu: f64,
    f: &VectorFn<'_>,
    g: Option<&VectorFn<'_>>,
) -> Result<ReducedSystem> {
    let sys = assemble(disc, mu, f)?;
    Ok(apply_boundary(disc, &sys, g))
}

/// Number of tensor coefficients per cell, `d^2 dim P_{k+1}`.
pub fn tensor_len(disc: &StokesDiscretization) -> usize {
    let d = disc.mesh().dim;
    d * d * dim_p(d, disc.k() + 1)
}
