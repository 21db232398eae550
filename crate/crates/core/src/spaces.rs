//! Degree-of-freedom layouts for the H(div) velocity space and the
//! discontinuous pressure space, the H(div) interpolant, and field
//! evaluation.
//!
//! Velocity DOFs are
//! * per face `e`: moments `int_e (v . n_e) psi_b` against an orthonormal basis
//!   `psi_b` of `P_k(e)`, with `n_e` the face's global normal, so both adjacent
//!   cells share the same functional;
//! * per cell: moments against an orthonormal basis of `grad P_{k-1}(T)` and
//!   against an orthonormal basis of the divergence-free normal bubbles
//!   `{z in [P_k]^d : z.n = 0 on dT, (z, grad q) = 0}`. Both are built
//!   numerically. Matching the gradient moments is what makes the
//!   interpolant preserve element divergence moments.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::mesh::SimplicialMesh;
use crate::polybasis::{dim_p, LocalBasis};
use crate::quadrature::{self, QuadRule};
use crate::VectorFn;

/// Largest condition number accepted for a local DOF-functional matrix.
pub const MAX_LOCAL_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    HdivVelocity,
    DgPressure,
    LagrangeVelocity,
    CgPressure,
}

#[derive(Debug, Clone)]
pub struct DofMap {
    pub kind: SpaceKind,
    pub degree: usize,
    pub n_dofs: usize,
    /// DOFs attached to each face (H(div) only; zero otherwise).
    pub dofs_per_face: usize,
    /// DOFs owned by each cell alone.
    pub dofs_per_cell_interior: usize,
    n_local: usize,
    cell_dofs: Vec<usize>,
    /// Sorted DOFs constrained by the boundary condition.
    pub boundary_dofs: Vec<usize>,
}

impl DofMap {
    pub fn new(
        kind: SpaceKind,
        degree: usize,
        n_dofs: usize,
        n_local: usize,
        cell_dofs: Vec<usize>,
        mut boundary_dofs: Vec<usize>,
    ) -> Self {
        boundary_dofs.sort_unstable();
        boundary_dofs.dedup();
        DofMap {
            kind,
            degree,
            n_dofs,
            dofs_per_face: 0,
            dofs_per_cell_interior: 0,
            n_local,
            cell_dofs,
            boundary_dofs,
        }
    }

    pub fn n_local(&self) -> usize {
        self.n_local
    }

    pub fn n_cells(&self) -> usize {
        self.cell_dofs.len() / self.n_local.max(1)
    }

    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        &self.cell_dofs[cell * self.n_local..(cell + 1) * self.n_local]
    }

    /// DOF range of face `f` (H(div) layout: faces first).
    pub fn face_dofs(&self, f: usize) -> std::ops::Range<usize> {
        f * self.dofs_per_face..(f + 1) * self.dofs_per_face
    }

    /// Complement of the boundary set, ascending.
    pub fn free_dofs(&self) -> Vec<usize> {
        let mut mask = vec![true; self.n_dofs];
        for &b in &self.boundary_dofs {
            mask[b] = false;
        }
        (0..self.n_dofs).filter(|&i| mask[i]).collect()
    }
}

/// A finite element space whose fields can be evaluated cell by cell.
pub trait FiniteElementSpace: Send + Sync {
    fn mesh(&self) -> &SimplicialMesh;
    fn dofmap(&self) -> &DofMap;
    /// Number of components of the field (1 or `dim`).
    fn value_dim(&self) -> usize;
    /// Values at points of `cell`, `pts.len() * value_dim` entries.
    fn eval_cell(&self, coeffs: &[f64], cell: usize, pts: &[Point]) -> Vec<f64>;
    /// Gradients at points of `cell`, `pts.len() * value_dim` entries.
    fn eval_cell_grad(&self, coeffs: &[f64], cell: usize, pts: &[Point]) -> Vec<[f64; 3]>;
}

/// Coefficient vector tied to its space.
#[derive(Clone)]
pub struct DiscreteField<S: FiniteElementSpace> {
    pub space: Arc<S>,
    pub coeffs: Vec<f64>,
}

impl<S: FiniteElementSpace> DiscreteField<S> {
    pub fn new(space: Arc<S>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dofmap().n_dofs {
            return Err(Error::structural(format!(
                "coefficient length {} does not match {} DOFs",
                coeffs.len(),
                space.dofmap().n_dofs
            )));
        }
        Ok(DiscreteField { space, coeffs })
    }

    pub fn zeros(space: Arc<S>) -> Self {
        let n = space.dofmap().n_dofs;
        DiscreteField {
            space,
            coeffs: vec![0.0; n],
        }
    }

    pub fn eval(&self, cell: usize, pts: &[Point]) -> Vec<f64> {
        self.space.eval_cell(&self.coeffs, cell, pts)
    }

    pub fn eval_grad(&self, cell: usize, pts: &[Point]) -> Vec<[f64; 3]> {
        self.space.eval_cell_grad(&self.coeffs, cell, pts)
    }

    /// Divergence at points of `cell` (vector fields only).
    pub fn eval_divergence(&self, cell: usize, pts: &[Point]) -> Vec<f64> {
        let d = self.space.value_dim();
        let g = self.eval_grad(cell, pts);
        (0..pts.len()).map(|q| (0..d).map(|i| g[q * d + i][i]).sum()).collect()
    }
}

/// Reference cell and face rules shared by a discretization.
#[derive(Debug, Clone)]
pub struct QuadSet {
    pub degree: usize,
    pub cell: QuadRule,
    pub face: QuadRule,
}

impl QuadSet {
    pub fn new(dim: usize, degree: usize) -> Result<Self> {
        Ok(QuadSet {
            degree,
            cell: quadrature::simplex_rule(dim, degree)?,
            face: quadrature::simplex_rule(dim - 1, degree)?,
        })
    }

    pub fn cell_points(&self, mesh: &SimplicialMesh, cell: usize) -> (Vec<Point>, Vec<f64>) {
        quadrature::map_rule(&self.cell, &mesh.cell_points(cell)).expect("mesh cells are nondegenerate")
    }

    /// Face quadrature mapped through the face's sorted vertex list, so the
    /// point order is the same seen from both adjacent cells.
    pub fn face_points(&self, mesh: &SimplicialMesh, face: usize) -> (Vec<Point>, Vec<f64>) {
        quadrature::map_rule(&self.face, &mesh.face_points(face)).expect("mesh faces are nondegenerate")
    }
}

/// Orthonormal `P_k` basis on faces, tabulated at the reference face rule.
#[derive(Debug, Clone)]
pub struct FaceBasis {
    pub degree: usize,
    pub n: usize,
    ref_values: Vec<f64>,
    ref_measure: f64,
}

impl FaceBasis {
    pub fn new(dim: usize, degree: usize, rule: &QuadRule) -> Result<Self> {
        let fd = dim - 1;
        let mut verts = vec![[0.0; 3]; fd + 1];
        for i in 0..fd {
            verts[i + 1][i] = 1.0;
        }
        let basis = LocalBasis::new(
            usize::MAX,
            fd,
            &verts,
            degree,
            &quadrature::simplex_rule(fd, 2 * degree)?,
        )?;
        let pts: Vec<Point> = (0..rule.len()).map(|q| rule.reference_point(q)).collect();
        let tab = basis.tabulate(&pts, None, false);
        Ok(FaceBasis {
            degree,
            n: basis.len(),
            ref_values: tab.values,
            ref_measure: rule.reference_measure(),
        })
    }

    /// Values at face quadrature point `q` for a face of the given measure.
    pub fn values_at(&self, q: usize, face_measure: f64) -> impl Iterator<Item = f64> + '_ {
        let s = (self.ref_measure / face_measure).sqrt();
        self.ref_values[q * self.n..(q + 1) * self.n].iter().map(move |v| v * s)
    }
}

/// Local data of one H(div) element.
#[derive(Debug, Clone)]
pub struct HdivElement {
    /// Maps local DOF values to coefficients in the vector basis
    /// `[phi_a e_i]`, index `i * n_k + a`.
    pub shape: DMatrix<f64>,
    /// Interior functionals as rows acting on vector-basis coefficients.
    pub interior_functionals: DMatrix<f64>,
    pub condition: f64,
}

pub struct HdivSpace {
    pub mesh: Arc<SimplicialMesh>,
    pub k: usize,
    pub dofmap: DofMap,
    /// Orthonormal bases of degree `k + 1`, one per cell.
    pub bases: Arc<Vec<LocalBasis>>,
    pub elements: Vec<HdivElement>,
    pub quad: QuadSet,
    pub face_basis: FaceBasis,
}

impl HdivSpace {
    /// Velocity space of degree `k`; `quad_degree` defaults to `2k + 6`.
    pub fn new(mesh: Arc<SimplicialMesh>, k: usize, quad_degree: Option<usize>) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("velocity degree must be at least 1"));
        }
        let dim = mesh.dim;
        let qdeg = quad_degree.unwrap_or(2 * k + 6);
        if qdeg < 2 * k + 2 {
            return Err(Error::config(format!(
                "quadrature degree {qdeg} is below the required {}",
                2 * k + 2
            )));
        }
        let quad = QuadSet::new(dim, qdeg)?;
        let face_basis = FaceBasis::new(dim, k, &quad.face)?;

        let bases: Vec<LocalBasis> = (0..mesh.n_cells())
            .into_par_iter()
            .map(|c| LocalBasis::new(c, dim, &mesh.cell_points(c), k + 1, &quad.cell))
            .collect::<Result<_>>()?;

        let n_fd = face_basis.n;
        let n_poly = dim * dim_p(dim, k);
        let n_int = n_poly - (dim + 1) * n_fd;
        let n_faces = mesh.n_faces();
        let mut cell_dofs = Vec::with_capacity(mesh.n_cells() * n_poly);
        for c in 0..mesh.n_cells() {
            for &f in mesh.cell_faces(c) {
                cell_dofs.extend(f * n_fd..(f + 1) * n_fd);
            }
            let base = n_faces * n_fd + c * n_int;
            cell_dofs.extend(base..base + n_int);
        }
        let boundary: Vec<usize> = mesh.boundary_faces().flat_map(|f| f * n_fd..(f + 1) * n_fd).collect();
        let mut dofmap = DofMap::new(
            SpaceKind::HdivVelocity,
            k,
            n_faces * n_fd + mesh.n_cells() * n_int,
            n_poly,
            cell_dofs,
            boundary,
        );
        dofmap.dofs_per_face = n_fd;
        dofmap.dofs_per_cell_interior = n_int;

        let mut space = HdivSpace {
            mesh,
            k,
            dofmap,
            bases: Arc::new(bases),
            elements: Vec::new(),
            quad,
            face_basis,
        };
        let elements: Vec<HdivElement> = (0..space.mesh.n_cells())
            .into_par_iter()
            .map(|c| space.build_element(c))
            .collect::<Result<_>>()?;
        space.elements = elements;
        Ok(space)
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim
    }

    /// `dim P_k(T)`.
    pub fn n_scalar(&self) -> usize {
        dim_p(self.mesh.dim, self.k)
    }

    /// Face-moment rows of the local functional matrix.
    fn face_functionals(&self, cell: usize) -> DMatrix<f64> {
        let mesh = &*self.mesh;
        let dim = mesh.dim;
        let nk = self.n_scalar();
        let n_fd = self.face_basis.n;
        let basis = &self.bases[cell];
        let mut fm = DMatrix::zeros((dim + 1) * n_fd, dim * nk);
        for (i, &f) in mesh.cell_faces(cell).iter().enumerate() {
            let face = &mesh.faces[f];
            let (pts, wts) = self.quad.face_points(mesh, f);
            let tab = basis.tabulate(&pts, Some(nk), false);
            for q in 0..pts.len() {
                for (b, psi) in self.face_basis.values_at(q, face.measure).enumerate() {
                    let wp = wts[q] * psi;
                    for comp in 0..dim {
                        let wpn = wp * face.normal[comp];
                        for a in 0..nk {
                            fm[(i * n_fd + b, comp * nk + a)] += wpn * tab.value(q, a);
                        }
                    }
                }
            }
        }
        fm
    }

    fn build_element(&self, cell: usize) -> Result<HdivElement> {
        let mesh = &*self.mesh;
        let dim = mesh.dim;
        let k = self.k;
        let nk = self.n_scalar();
        let n_poly = dim * nk;
        let basis = &self.bases[cell];
        let fm = self.face_functionals(cell);

        // orthonormal basis of grad P_{k-1}(T) inside [P_k]^d
        let n_grad = dim_p(dim, k - 1) - 1;
        let grad_rows = if n_grad > 0 {
            let (pts, wts) = self.quad.cell_points(mesh, cell);
            let tab = basis.tabulate(&pts, Some(nk), true);
            let mut g = DMatrix::zeros(n_poly, n_grad);
            for q in 0..pts.len() {
                for gi in 0..n_grad {
                    let grad = tab.grad(q, gi + 1);
                    for comp in 0..dim {
                        let wg = wts[q] * grad[comp];
                        for a in 0..nk {
                            g[(comp * nk + a, gi)] += wg * tab.value(q, a);
                        }
                    }
                }
            }
            g.qr().q().transpose()
        } else {
            DMatrix::zeros(0, n_poly)
        };

        let constrained = DMatrix::from_fn(fm.nrows() + n_grad, n_poly, |r, c| {
            if r < fm.nrows() {
                fm[(r, c)]
            } else {
                grad_rows[(r - fm.nrows(), c)]
            }
        });
        let n_bubble = n_poly - constrained.nrows();
        let bubble_rows = if n_bubble > 0 {
            let gram = constrained.transpose() * &constrained;
            let eig = gram.symmetric_eigen();
            let mut order: Vec<usize> = (0..n_poly).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
            let top = eig.eigenvalues.amax();
            if eig.eigenvalues[order[n_bubble - 1]] > 1e-9 * top || eig.eigenvalues[order[n_bubble]] < 1e-9 * top {
                return Err(Error::numerical(
                    cell,
                    "could not separate the divergence-free bubble space",
                ));
            }
            DMatrix::from_fn(n_bubble, n_poly, |r, c| eig.eigenvectors[(c, order[r])])
        } else {
            DMatrix::zeros(0, n_poly)
        };

        let interior = DMatrix::from_fn(n_grad + n_bubble, n_poly, |r, c| {
            if r < n_grad {
                grad_rows[(r, c)]
            } else {
                bubble_rows[(r - n_grad, c)]
            }
        });
        let functionals = DMatrix::from_fn(n_poly, n_poly, |r, c| {
            if r < fm.nrows() {
                fm[(r, c)]
            } else {
                interior[(r - fm.nrows(), c)]
            }
        });
        let sv = functionals.clone().singular_values();
        let condition = sv.max() / sv.min();
        if !(condition < MAX_LOCAL_CONDITION) {
            return Err(Error::numerical(
                cell,
                format!("DOF-functional matrix condition number {condition:.3e} exceeds {MAX_LOCAL_CONDITION:.0e}"),
            ));
        }
        let shape = functionals
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::numerical(cell, "DOF-functional matrix is singular"))?;
        Ok(HdivElement {
            shape,
            interior_functionals: interior,
            condition,
        })
    }

    /// Vector-basis coefficients of the field on `cell`.
    pub fn local_poly(&self, coeffs: &[f64], cell: usize) -> DVector<f64> {
        let dofs = self.dofmap.cell_dofs(cell);
        let local = DVector::from_iterator(dofs.len(), dofs.iter().map(|&d| coeffs[d]));
        &self.elements[cell].shape * local
    }

    /// Moments of `v . n_e` against the face basis of face `f`.
    pub fn face_normal_moments(&self, f: usize, v: &VectorFn<'_>) -> Vec<f64> {
        let face = &self.mesh.faces[f];
        let (pts, wts) = self.quad.face_points(&self.mesh, f);
        let mut m = vec![0.0; self.face_basis.n];
        for (q, x) in pts.iter().enumerate() {
            let val = v(x);
            let vn: f64 = (0..self.dim()).map(|i| val[i] * face.normal[i]).sum();
            for (b, psi) in self.face_basis.values_at(q, face.measure).enumerate() {
                m[b] += wts[q] * vn * psi;
            }
        }
        m
    }

    /// Canonical interpolant: face-normal moments and interior moments of `v`.
    pub fn interpolate(&self, v: &VectorFn<'_>) -> Vec<f64> {
        let mesh = &*self.mesh;
        let n_fd = self.face_basis.n;
        let mut out = vec![0.0; self.dofmap.n_dofs];
        let face_vals: Vec<Vec<f64>> = (0..mesh.n_faces())
            .into_par_iter()
            .map(|f| self.face_normal_moments(f, v))
            .collect();
        for (f, m) in face_vals.into_iter().enumerate() {
            out[f * n_fd..(f + 1) * n_fd].copy_from_slice(&m);
        }
        let n_int = self.dofmap.dofs_per_cell_interior;
        if n_int > 0 {
            let dim = mesh.dim;
            let nk = self.n_scalar();
            let interior: Vec<Vec<f64>> = (0..mesh.n_cells())
                .into_par_iter()
                .map(|c| {
                    let (pts, wts) = self.quad.cell_points(mesh, c);
                    let tab = self.bases[c].tabulate(&pts, Some(nk), false);
                    let mut proj = DVector::zeros(dim * nk);
                    for (q, x) in pts.iter().enumerate() {
                        let val = v(x);
                        for comp in 0..dim {
                            for a in 0..nk {
                                proj[comp * nk + a] += wts[q] * val[comp] * tab.value(q, a);
                            }
                        }
                    }
                    (&self.elements[c].interior_functionals * proj)
                        .iter()
                        .copied()
                        .collect()
                })
                .collect();
            for (c, vals) in interior.into_iter().enumerate() {
                let local = self.dofmap.cell_dofs(c);
                let start = local.len() - n_int;
                for (r, val) in vals.into_iter().enumerate() {
                    out[local[start + r]] = val;
                }
            }
        }
        out
    }
}

impl FiniteElementSpace for HdivSpace {
    fn mesh(&self) -> &SimplicialMesh {
        &self.mesh
    }

    fn dofmap(&self) -> &DofMap {
        &self.dofmap
    }

    fn value_dim(&self) -> usize {
        self.mesh.dim
    }

    fn eval_cell(&self, coeffs: &[f64], cell: usize, pts: &[Point]) -> Vec<f64> {
        let dim = self.dim();
        let nk = self.n_scalar();
        let p = self.local_poly(coeffs, cell);
        let tab = self.bases[cell].tabulate(pts, Some(nk), false);
        let mut out = vec![0.0; pts.len() * dim];
        for q in 0..pts.len() {
            for comp in 0..dim {
                out[q * dim + comp] = (0..nk).map(|a| p[comp * nk + a] * tab.value(q, a)).sum();
            }
        }
        out
    }

    fn eval_cell_grad(&self, coeffs: &[f64], cell: usize, pts: &[Point]) -> Vec<[f64; 3]> {
        let dim = self.dim();
        let nk = self.n_scalar();
        let p = self.local_poly(coeffs, cell);
        let tab = self.bases[cell].tabulate(pts, Some(nk), true);
        let mut out = vec![[0.0; 3]; pts.len() * dim];
        for q in 0..pts.len() {
            for comp in 0..dim {
                let mut g = [0.0; 3];
                for a in 0..nk {
                    let c = p[comp * nk + a];
                    let ga = tab.grad(q, a);
                    for j in 0..3 {
                        g[j] += c * ga[j];
                    }
                }
                out[q * dim + comp] = g;
            }
        }
        out
    }
}

/// Discontinuous `P_{k-1}` pressures, modal and orthonormal per cell.
pub struct PressureSpace {
    pub mesh: Arc<SimplicialMesh>,
    pub k: usize,
    pub dofmap: DofMap,
    pub bases: Arc<Vec<LocalBasis>>,
}

impl PressureSpace {
    /// Shares the (hierarchical) cell bases of a velocity space.
    pub fn new(mesh: Arc<SimplicialMesh>, k: usize, bases: Arc<Vec<LocalBasis>>) -> Result<Self> {
        if k == 0 {
            return Err(Error::config("pressure space needs k >= 1"));
        }
        let n = dim_p(mesh.dim, k - 1);
        if bases.first().is_some_and(|b| b.len() < n) {
            return Err(Error::config("cell bases have too low a degree for the pressure space"));
        }
        let cells = mesh.n_cells();
        let mut dofmap = DofMap::new(
            SpaceKind::DgPressure,
            k - 1,
            cells * n,
            n,
            (0..cells * n).collect(),
            Vec::new(),
        );
        dofmap.dofs_per_cell_interior = n;
        Ok(PressureSpace { mesh, k, dofmap, bases })
    }

    pub fn n_local(&self) -> usize {
        self.dofmap.n_local()
    }

    /// `int_T phi_i` for every pressure DOF.
    pub fn mean_weights(&self) -> Vec<f64> {
        let n = self.n_local();
        let mut c = vec![0.0; self.dofmap.n_dofs];
        for cell in 0..self.mesh.n_cells() {
            // phi_0 is the constant 1/sqrt|T|; higher modes are orthogonal to it
            c[cell * n] = self.mesh.cell_volume(cell).sqrt();
        }
        c
    }

    /// Element-wise `L2` projection of `p`.
    pub fn project(&self, quad: &QuadSet, p: &(dyn Fn(&Point) -> f64 + Sync)) -> Vec<f64> {
        let n = self.n_local();
        let parts: Vec<Vec<f64>> = (0..self.mesh.n_cells())
            .into_par_iter()
            .map(|c| {
                let (pts, wts) = quad.cell_points(&self.mesh, c);
                self.bases[c].l2_project(&pts, &wts, n, p)
            })
            .collect();
        parts.concat()
    }
}

impl FiniteElementSpace for PressureSpace {
    fn mesh(&self) -> &SimplicialMesh {
        &self.mesh
    }

    fn dofmap(&self) -> &DofMap {
        &self.dofmap
    }

    fn value_dim(&self) -> usize {
        1
    }

    fn eval_cell(&self, coeffs: &[f64], cell: usize, pts: &[Point]) -> Vec<f64> {
        let n = self.n_local();
        let c = &coeffs[cell * n..(cell + 1) * n];
        let tab = self.bases[cell].tabulate(pts, Some(n), false);
        (0..pts.len())
            .map(|q| (0..n).map(|a| c[a] * tab.value(q, a)).sum())
            .collect()
    }

    fn eval_cell_grad(&self, coeffs: &[f64], cell: usize, pts: &[Point]) -> Vec<[f64; 3]> {
        let n = self.n_local();
        let c = &coeffs[cell * n..(cell + 1) * n];
        let tab = self.bases[cell].tabulate(pts, Some(n), true);
        (0..pts.len())
            .map(|q| {
                let mut g = [0.0; 3];
                for a in 0..n {
                    for j in 0..3 {
                        g[j] += c[a] * tab.grad(q, a)[j];
                    }
                }
                g
            })
            .collect()
    }
}

pub fn build_hdiv_dofmap(mesh: Arc<SimplicialMesh>, k: usize) -> Result<HdivSpace> {
    HdivSpace::new(mesh, k, None)
}

pub fn build_pressure_dofmap(velocity: &HdivSpace) -> Result<PressureSpace> {
    PressureSpace::new(velocity.mesh.clone(), velocity.k, velocity.bases.clone())
}
