//! Error norms, convergence rates and discrete stability diagnostics.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::assembly::{assemble_divergence, assemble_stiffness, boundary_liftings, StokesDiscretization};
use crate::error::{Error, Result};
use crate::examples::ExampleSpec;
use crate::geometry::Point;
use crate::spaces::{FiniteElementSpace, HdivSpace, QuadSet};
use crate::weak_gradient::{apply_weak_grad, build_weak_grad, project_matrix_field};

/// Degree of the rule used for error integrals.
pub const ERROR_QUAD_DEGREE: usize = 16;

/// Errors of one solve.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorNorms {
    pub velocity_l2: f64,
    pub energy: f64,
    pub pressure_l2: f64,
    /// `||Q_h p - p_h||`.
    pub pressure_projected: f64,
    pub divergence_sup: f64,
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub level: usize,
    pub h: f64,
    pub cells: usize,
    pub unknowns: usize,
    pub norms: ErrorNorms,
    pub solve_seconds: f64,
}

/// Rates `log2(e_l / e_{l+1})`; `None` on the first row.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Rates {
    pub velocity_l2: Option<f64>,
    pub energy: Option<f64>,
    pub pressure_l2: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
}

impl ErrorReport {
    pub fn push(&mut self, row: ErrorRow) {
        self.rows.push(row);
    }

    pub fn rates(&self) -> Vec<Rates> {
        let mut out = vec![Rates::default(); self.rows.len()];
        for i in 1..self.rows.len() {
            let (a, b) = (&self.rows[i - 1].norms, &self.rows[i].norms);
            out[i] = Rates {
                velocity_l2: Some(rate(a.velocity_l2, b.velocity_l2)),
                energy: Some(rate(a.energy, b.energy)),
                pressure_l2: Some(rate(a.pressure_l2, b.pressure_l2)),
            };
        }
        out
    }
}

pub fn rate(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

fn error_quad(space: &HdivSpace) -> QuadSet {
    let degree = space
        .quad
        .degree
        .clamp(ERROR_QUAD_DEGREE, crate::quadrature::MAX_DEGREE);
    QuadSet::new(space.dim(), degree).expect("error quadrature degree is supported")
}

/// All error norms of a solution `(u_h, p_h)` against the exact solution of
/// `spec`. The energy error is `sum_T ||Q grad u - grad_w u_h||^2`, where the
/// weak gradient includes the boundary lifting of nonhomogeneous data.
pub fn error_norms(disc: &StokesDiscretization, spec: &ExampleSpec, velocity: &[f64], pressure: &[f64]) -> ErrorNorms {
    let space = &*disc.velocity;
    let pspace = &*disc.pressure;
    let mesh = &*space.mesh;
    let dim = mesh.dim;
    let n1 = crate::polybasis::dim_p(dim, space.k + 1);
    let quad = error_quad(space);
    let lifts = match &spec.boundary {
        Some(g) => boundary_liftings(space, &**g),
        None => vec![None; mesh.n_cells()],
    };
    let np = pspace.n_local();
    let parts: Vec<[f64; 4]> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let (pts, wts) = quad.cell_points(mesh, c);
            let uh = space.eval_cell(velocity, c, &pts);
            let ph = pspace.eval_cell(pressure, c, &pts);
            let mut eu = 0.0;
            let mut ep = 0.0;
            for (q, x) in pts.iter().enumerate() {
                let u = (spec.velocity)(x);
                for i in 0..dim {
                    eu += wts[q] * (u[i] - uh[q * dim + i]).powi(2);
                }
                ep += wts[q] * ((spec.pressure)(x) - ph[q]).powi(2);
            }
            let op = build_weak_grad(space, c);
            let mut gw = apply_weak_grad(&op, velocity);
            if let Some(l) = &lifts[c] {
                gw += l;
            }
            let qg = project_matrix_field(space, c, &pts, &wts, &*spec.velocity_grad, n1);
            let ee = (qg - gw).norm_squared();
            let qp = space.bases[c].l2_project(&pts, &wts, np, |x| (spec.pressure)(x));
            let eq: f64 = (0..np).map(|a| (qp[a] - pressure[c * np + a]).powi(2)).sum();
            [eu, ee, ep, eq]
        })
        .collect();
    let mut sums = [0.0; 4];
    for p in &parts {
        for i in 0..4 {
            sums[i] += p[i];
        }
    }
    ErrorNorms {
        velocity_l2: sums[0].sqrt(),
        energy: sums[1].sqrt(),
        pressure_l2: sums[2].sqrt(),
        pressure_projected: sums[3].sqrt(),
        divergence_sup: divergence_sup(space, velocity),
    }
}

/// `||Q_h p - p||` for the exact pressure.
pub fn pressure_projection_error(disc: &StokesDiscretization, p: &(dyn Fn(&Point) -> f64 + Sync)) -> f64 {
    let space = &*disc.velocity;
    let quad = error_quad(space);
    let proj = disc.pressure.project(&quad, p);
    let mesh = &*space.mesh;
    let s: f64 = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let (pts, wts) = quad.cell_points(mesh, c);
            let v = disc.pressure.eval_cell(&proj, c, &pts);
            pts.iter()
                .enumerate()
                .map(|(q, x)| wts[q] * (p(x) - v[q]).powi(2))
                .sum::<f64>()
        })
        .sum();
    s.sqrt()
}

/// Largest `|div u_h|` over the cell quadrature points.
pub fn divergence_sup(space: &HdivSpace, velocity: &[f64]) -> f64 {
    let mesh = &*space.mesh;
    let dim = mesh.dim;
    (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let (pts, _) = space.quad.cell_points(mesh, c);
            let g = space.eval_cell_grad(velocity, c, &pts);
            (0..pts.len())
                .map(|q| (0..dim).map(|i| g[q * dim + i][i]).sum::<f64>().abs())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Energy seminorm `sum_T ||grad_w v||^2` of a velocity with zero boundary data.
pub fn energy_norm(space: &HdivSpace, velocity: &[f64]) -> f64 {
    (0..space.mesh.n_cells())
        .into_par_iter()
        .map(|c| apply_weak_grad(&build_weak_grad(space, c), velocity).norm_squared())
        .sum::<f64>()
        .sqrt()
}

fn dense_free(disc: &StokesDiscretization) -> (DMatrix<f64>, DMatrix<f64>, Vec<usize>) {
    let space = &*disc.velocity;
    let free = space.dofmap.free_dofs();
    let a = assemble_stiffness(space, 1.0).submatrix(&free, &free).to_dense();
    let all_p: Vec<usize> = (0..disc.pressure.dofmap.n_dofs).collect();
    let b = assemble_divergence(disc).submatrix(&all_p, &free).to_dense();
    (a, b, free)
}

/// Discrete inf-sup constant: the square root of the smallest eigenvalue of
/// `B A^{-1} B^T` on mean-zero pressures (the pressure mass matrix is the
/// identity in the orthonormal basis). Dense; meant for coarse meshes.
pub fn infsup_estimate(disc: &StokesDiscretization) -> Result<f64> {
    let (a, b, _) = dense_free(disc);
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::numerical(0, "energy matrix is not positive definite on free DOFs"))?;
    let x = chol.solve(&b.transpose());
    let mut s = &b * x;
    s = (&s + s.transpose()) * 0.5;
    let c = DVector::from_vec(disc.pressure.mean_weights());
    let c = &c / c.norm();
    let proj = DMatrix::identity(c.len(), c.len()) - &c * c.transpose();
    let shift = s.trace().max(1.0);
    let m = &proj * &s * &proj + &c * c.transpose() * shift;
    let eig = m.symmetric_eigen();
    let lo = eig.eigenvalues.min();
    if !lo.is_finite() {
        return Err(Error::numerical(0, "eigenvalue computation failed"));
    }
    Ok(lo.max(0.0).sqrt())
}

/// Gram matrix of `||v||_{1,h}^2 = sum_T ||grad v||^2 + sum_e h_e^{-1} ||[v]||^2`
/// on all velocity DOFs (dense; coarse meshes only).
pub fn broken_h1_gram(space: &HdivSpace) -> DMatrix<f64> {
    let mesh = &*space.mesh;
    let dim = mesh.dim;
    let nk = space.n_scalar();
    let n = space.dofmap.n_dofs;
    let mut gram = DMatrix::zeros(n, n);
    for c in 0..mesh.n_cells() {
        let (pts, wts) = space.quad.cell_points(mesh, c);
        let tab = space.bases[c].tabulate(&pts, Some(nk), true);
        let mut poly = DMatrix::<f64>::zeros(dim * nk, dim * nk);
        for q in 0..pts.len() {
            for a in 0..nk {
                for b in 0..nk {
                    let g = (0..dim).map(|j| tab.grad(q, a)[j] * tab.grad(q, b)[j]).sum::<f64>() * wts[q];
                    for i in 0..dim {
                        poly[(i * nk + a, i * nk + b)] += g;
                    }
                }
            }
        }
        let shape = &space.elements[c].shape;
        let local = shape.transpose() * poly * shape;
        let dofs = space.dofmap.cell_dofs(c);
        for (i, &r) in dofs.iter().enumerate() {
            for (j, &s) in dofs.iter().enumerate() {
                gram[(r, s)] += local[(i, j)];
            }
        }
    }
    for (f, face) in mesh.faces.iter().enumerate() {
        let (pts, wts) = space.quad.face_points(mesh, f);
        let mut sides = vec![(face.owner, 1.0)];
        if let Some(nb) = face.neighbor {
            sides.push((nb, -1.0));
        }
        // trace of each local basis function, signed by side
        let mut dofs: Vec<usize> = Vec::new();
        let mut traces: Vec<Vec<[f64; 3]>> = Vec::new();
        for &(c, sign) in &sides {
            let tab = space.bases[c].tabulate(&pts, Some(nk), false);
            let shape = &space.elements[c].shape;
            for (l, &d) in space.dofmap.cell_dofs(c).iter().enumerate() {
                let tr: Vec<[f64; 3]> = (0..pts.len())
                    .map(|q| {
                        let mut v = [0.0; 3];
                        for i in 0..dim {
                            v[i] = sign * (0..nk).map(|a| shape[(i * nk + a, l)] * tab.value(q, a)).sum::<f64>();
                        }
                        v
                    })
                    .collect();
                if let Some(pos) = dofs.iter().position(|&x| x == d) {
                    for (t, s) in traces[pos].iter_mut().zip(&tr) {
                        for i in 0..3 {
                            t[i] += s[i];
                        }
                    }
                } else {
                    dofs.push(d);
                    traces.push(tr);
                }
            }
        }
        let inv_h = 1.0 / face.diameter;
        for (i, &r) in dofs.iter().enumerate() {
            for (j, &s) in dofs.iter().enumerate() {
                let v: f64 = (0..pts.len())
                    .map(|q| wts[q] * (0..dim).map(|m| traces[i][q][m] * traces[j][q][m]).sum::<f64>())
                    .sum();
                gram[(r, s)] += inv_h * v;
            }
        }
    }
    gram
}

/// Extreme generalized eigenvalues `(lambda_min, lambda_max)` of the energy
/// matrix against the broken `H^1` Gram matrix, on free DOFs.
pub fn norm_equivalence_bounds(space: &HdivSpace) -> Result<(f64, f64)> {
    let free = space.dofmap.free_dofs();
    let a = assemble_stiffness(space, 1.0).submatrix(&free, &free).to_dense();
    let g = broken_h1_gram(space).select_rows(&free).select_columns(&free);
    let chol = g
        .cholesky()
        .ok_or_else(|| Error::numerical(0, "broken H1 Gram matrix is not positive definite"))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::numerical(0, "Gram factor is singular"))?;
    let m = &linv * a * linv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let eig = m.symmetric_eigen();
    Ok((eig.eigenvalues.min(), eig.eigenvalues.max()))
}
