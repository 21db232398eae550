//! Continuous `P_k / P_{k-1}` (Taylor–Hood) reference discretization
//!
//! ```text
//! (mu grad u, grad v) - (div v, p) = (f, v)
//!                       (div u, q) = 0
//! ```
//!
//! with nodal Lagrange bases on equispaced barycentric lattices.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::examples::ExampleSpec;
use crate::geometry::Point;
use crate::mesh::SimplicialMesh;
use crate::polybasis::LocalBasis;
use crate::postproc::{ErrorNorms, ERROR_QUAD_DEGREE};
use crate::solver::{solve_saddle, ReducedSystem, SaddleSolution, SolverKind};
use crate::spaces::{DofMap, FiniteElementSpace, QuadSet, SpaceKind};
use crate::sparse::CsrMatrix;
use crate::VectorFn;

/// Barycentric multi-indices of total degree `m` in `n` variables.
fn lattice(n: usize, m: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![m]];
    }
    let mut out = Vec::new();
    for first in (0..=m).rev() {
        for mut rest in lattice(n - 1, m - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Continuous Lagrange space of degree `degree` with `components` copies.
/// DOF `comp * n_nodes + node`.
pub struct LagrangeSpace {
    pub mesh: Arc<SimplicialMesh>,
    pub degree: usize,
    pub components: usize,
    pub dofmap: DofMap,
    pub nodes: Vec<Point>,
    /// Sorted scalar node indices on the boundary.
    pub boundary_nodes: Vec<usize>,
    cell_nodes: Vec<usize>,
    bases: Vec<LocalBasis>,
    /// Per cell: column `i` holds nodal function `i` in the orthonormal basis.
    shapes: Vec<DMatrix<f64>>,
    pub quad: QuadSet,
}

impl LagrangeSpace {
    pub fn new(mesh: Arc<SimplicialMesh>, degree: usize, components: usize, quad: QuadSet) -> Result<Self> {
        if degree == 0 {
            return Err(Error::config("Lagrange spaces need degree >= 1"));
        }
        let dim = mesh.dim;
        let pattern = lattice(dim + 1, degree);
        let n_local = pattern.len();
        let mut keys: HashMap<Vec<(usize, usize)>, usize> = HashMap::new();
        let mut nodes: Vec<Point> = Vec::new();
        let mut cell_nodes = Vec::with_capacity(mesh.n_cells() * n_local);
        for c in 0..mesh.n_cells() {
            let verts = mesh.cell(c);
            for alpha in &pattern {
                let mut key: Vec<(usize, usize)> = verts
                    .iter()
                    .zip(alpha)
                    .filter(|(_, &a)| a > 0)
                    .map(|(&v, &a)| (v, a))
                    .collect();
                key.sort_unstable();
                let next = nodes.len();
                let id = *keys.entry(key).or_insert_with(|| {
                    let mut x = [0.0; 3];
                    for (&v, &a) in verts.iter().zip(alpha) {
                        let w = a as f64 / degree as f64;
                        for i in 0..3 {
                            x[i] += w * mesh.vertices[v][i];
                        }
                    }
                    nodes.push(x);
                    next
                });
                cell_nodes.push(id);
            }
        }
        // a node is on the boundary when its support lies in a boundary face
        let mut on_boundary = vec![false; nodes.len()];
        for f in mesh.boundary_faces() {
            let face = &mesh.faces[f];
            let c = face.owner;
            let verts = mesh.cell(c);
            for (l, alpha) in pattern.iter().enumerate() {
                let inside = verts
                    .iter()
                    .zip(alpha)
                    .all(|(v, &a)| a == 0 || face.vertices.contains(v));
                if inside {
                    on_boundary[cell_nodes[c * n_local + l]] = true;
                }
            }
        }
        let boundary_nodes: Vec<usize> = (0..nodes.len()).filter(|&i| on_boundary[i]).collect();

        let built: Vec<(LocalBasis, DMatrix<f64>)> = (0..mesh.n_cells())
            .into_par_iter()
            .map(|c| {
                let basis = LocalBasis::new(c, dim, &mesh.cell_points(c), degree, &quad.cell)?;
                let local = &cell_nodes[c * n_local..(c + 1) * n_local];
                let mut vandermonde = DMatrix::zeros(n_local, n_local);
                for (i, &node) in local.iter().enumerate() {
                    for (j, v) in basis.eval(&nodes[node]).into_iter().enumerate() {
                        vandermonde[(i, j)] = v;
                    }
                }
                let shape = vandermonde
                    .try_inverse()
                    .ok_or_else(|| Error::numerical(c, "singular nodal Vandermonde matrix"))?;
                Ok((basis, shape))
            })
            .collect::<Result<_>>()?;
        let (bases, shapes): (Vec<_>, Vec<_>) = built.into_iter().unzip();

        let n_nodes = nodes.len();
        let mut dofs = Vec::with_capacity(cell_nodes.len() * components);
        for c in 0..mesh.n_cells() {
            for comp in 0..components {
                dofs.extend(
                    cell_nodes[c * n_local..(c + 1) * n_local]
                        .iter()
                        .map(|&n| comp * n_nodes + n),
                );
            }
        }
        let boundary: Vec<usize> = (0..components)
            .flat_map(|comp| boundary_nodes.iter().map(move |&n| comp * n_nodes + n))
            .collect();
        let kind = if components == 1 {
            SpaceKind::CgPressure
        } else {
            SpaceKind::LagrangeVelocity
        };
        let dofmap = DofMap::new(kind, degree, n_nodes * components, n_local * components, dofs, boundary);
        Ok(LagrangeSpace {
            mesh,
            degree,
            components,
            dofmap,
            nodes,
            boundary_nodes,
            cell_nodes,
            bases,
            shapes,
            quad,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Scalar nodes per cell.
    pub fn n_local_nodes(&self) -> usize {
        self.cell_nodes.len() / self.mesh.n_cells()
    }

    pub fn cell_nodes(&self, cell: usize) -> &[usize] {
        let n = self.n_local_nodes();
        &self.cell_nodes[cell * n..(cell + 1) * n]
    }

    /// Nodal values and gradients of the local shape functions at `pts`.
    fn shape_tab(&self, cell: usize, pts: &[Point], with_grad: bool) -> (DMatrix<f64>, Vec<DMatrix<f64>>) {
        let tab = self.bases[cell].tabulate(pts, None, with_grad);
        let n = tab.n_functions;
        let vals = DMatrix::from_fn(pts.len(), n, |q, j| tab.value(q, j)) * &self.shapes[cell];
        let grads = if with_grad {
            (0..self.mesh.dim)
                .map(|a| DMatrix::from_fn(pts.len(), n, |q, j| tab.grad(q, j)[a]) * &self.shapes[cell])
                .collect()
        } else {
            Vec::new()
        };
        (vals, grads)
    }

    /// Nodal interpolant of a vector field (first `components` entries).
    pub fn interpolate(&self, v: &VectorFn<'_>) -> Vec<f64> {
        let n = self.n_nodes();
        let mut out = vec![0.0; n * self.components];
        for (i, x) in self.nodes.iter().enumerate() {
            let val = v(x);
            for comp in 0..self.components {
                out[comp * n + i] = val[comp];
            }
        }
        out
    }

    /// `int_Omega phi_i` for every scalar basis function.
    pub fn integrals(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.n_nodes()];
        for cell in 0..self.mesh.n_cells() {
            let (pts, wts) = self.quad.cell_points(&self.mesh, cell);
            let (vals, _) = self.shape_tab(cell, &pts, false);
            for (l, &node) in self.cell_nodes(cell).iter().enumerate() {
                c[node] += (0..pts.len()).map(|q| wts[q] * vals[(q, l)]).sum::<f64>();
            }
        }
        c
    }
}

impl FiniteElementSpace for LagrangeSpace {
    fn mesh(&self) -> &SimplicialMesh {
        &self.mesh
    }

    fn dofmap(&self) -> &DofMap {
        &self.dofmap
    }

    fn value_dim(&self) -> usize {
        self.components
    }

    fn eval_cell(&self, coeffs: &[f64], cell: usize, pts: &[Point]) -> Vec<f64> {
        let (vals, _) = self.shape_tab(cell, pts, false);
        let nodes = self.cell_nodes(cell);
        let n = self.n_nodes();
        let mut out = vec![0.0; pts.len() * self.components];
        for q in 0..pts.len() {
            for comp in 0..self.components {
                out[q * self.components + comp] = nodes
                    .iter()
                    .enumerate()
                    .map(|(l, &i)| vals[(q, l)] * coeffs[comp * n + i])
                    .sum();
            }
        }
        out
    }

    fn eval_cell_grad(&self, coeffs: &[f64], cell: usize, pts: &[Point]) -> Vec<[f64; 3]> {
        let (_, grads) = self.shape_tab(cell, pts, true);
        let nodes = self.cell_nodes(cell);
        let n = self.n_nodes();
        let mut out = vec![[0.0; 3]; pts.len() * self.components];
        for q in 0..pts.len() {
            for comp in 0..self.components {
                let mut g = [0.0; 3];
                for (a, ga) in grads.iter().enumerate() {
                    g[a] = nodes
                        .iter()
                        .enumerate()
                        .map(|(l, &i)| ga[(q, l)] * coeffs[comp * n + i])
                        .sum();
                }
                out[q * self.components + comp] = g;
            }
        }
        out
    }
}

/// Taylor–Hood velocity and pressure spaces.
pub struct TaylorHood {
    pub velocity: Arc<LagrangeSpace>,
    pub pressure: Arc<LagrangeSpace>,
}

impl TaylorHood {
    /// `k` is the velocity degree (2 or 3 in the reference experiments).
    pub fn new(mesh: Arc<SimplicialMesh>, k: usize, quad_degree: Option<usize>) -> Result<Self> {
        if k < 2 {
            return Err(Error::config("Taylor–Hood needs velocity degree k >= 2"));
        }
        let dim = mesh.dim;
        let qdeg = quad_degree.unwrap_or(2 * k + 6);
        if qdeg < 2 * k {
            return Err(Error::config(format!(
                "quadrature degree {qdeg} is below the required {}",
                2 * k
            )));
        }
        let velocity = LagrangeSpace::new(mesh.clone(), k, dim, QuadSet::new(dim, qdeg)?)?;
        let pressure = LagrangeSpace::new(mesh, k - 1, 1, QuadSet::new(dim, qdeg)?)?;
        Ok(TaylorHood {
            velocity: Arc::new(velocity),
            pressure: Arc::new(pressure),
        })
    }

    /// Assemble and reduce the system for forcing `f` and Dirichlet data `g`
    /// (nodal interpolation; `None` for zero).
    pub fn build_reduced(&self, mu: f64, f: &VectorFn<'_>, g: Option<&VectorFn<'_>>) -> Result<ReducedSystem> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::config(format!(
                "viscosity must be positive and finite, got {mu}"
            )));
        }
        let vs = &*self.velocity;
        let ps = &*self.pressure;
        let mesh = &*vs.mesh;
        let dim = mesh.dim;
        let nu_nodes = vs.n_nodes();
        let np_nodes = ps.n_nodes();
        type Local = (Vec<(usize, usize, f64)>, Vec<(usize, usize, f64)>, Vec<(usize, f64)>);
        let locals: Vec<Local> = (0..mesh.n_cells())
            .into_par_iter()
            .map(|c| {
                let (pts, wts) = vs.quad.cell_points(mesh, c);
                let (vals, grads) = vs.shape_tab(c, &pts, true);
                let (pvals, _) = ps.shape_tab(c, &pts, false);
                let vn = vs.cell_nodes(c);
                let pn = ps.cell_nodes(c);
                let nl = vn.len();
                let mut stiff = DMatrix::<f64>::zeros(nl, nl);
                let mut div = vec![DMatrix::<f64>::zeros(pn.len(), nl); dim];
                let mut load = vec![0.0; dim * nl];
                for (q, x) in pts.iter().enumerate() {
                    let fv = f(x);
                    for i in 0..nl {
                        for j in 0..nl {
                            let g: f64 = (0..dim).map(|a| grads[a][(q, i)] * grads[a][(q, j)]).sum();
                            stiff[(i, j)] += wts[q] * g;
                        }
                        for comp in 0..dim {
                            load[comp * nl + i] += wts[q] * fv[comp] * vals[(q, i)];
                            for r in 0..pn.len() {
                                div[comp][(r, i)] += wts[q] * pvals[(q, r)] * grads[comp][(q, i)];
                            }
                        }
                    }
                }
                let mut a_t = Vec::with_capacity(dim * nl * nl);
                let mut b_t = Vec::with_capacity(dim * nl * pn.len());
                let mut rhs = Vec::with_capacity(dim * nl);
                for comp in 0..dim {
                    let off = comp * nu_nodes;
                    for i in 0..nl {
                        for j in 0..nl {
                            a_t.push((off + vn[i], off + vn[j], mu * stiff[(i, j)]));
                        }
                        rhs.push((off + vn[i], load[comp * nl + i]));
                        for (r, &pr) in pn.iter().enumerate() {
                            b_t.push((pr, off + vn[i], div[comp][(r, i)]));
                        }
                    }
                }
                (a_t, b_t, rhs)
            })
            .collect();
        let n_u = vs.dofmap.n_dofs;
        let mut a_trip = Vec::new();
        let mut b_trip = Vec::new();
        let mut rhs_full = vec![0.0; n_u];
        for (a_t, b_t, rhs) in locals {
            a_trip.extend(a_t);
            b_trip.extend(b_t);
            for (i, v) in rhs {
                rhs_full[i] += v;
            }
        }
        let a = CsrMatrix::from_triplets(n_u, n_u, a_trip);
        let b = CsrMatrix::from_triplets(np_nodes, n_u, b_trip);

        let fixed = match g {
            Some(g) => {
                let all = vs.interpolate(g);
                let mut fixed = vec![0.0; n_u];
                for &d in &vs.dofmap.boundary_dofs {
                    fixed[d] = all[d];
                }
                fixed
            }
            None => vec![0.0; n_u],
        };
        let free = vs.dofmap.free_dofs();
        let au = a.matvec(&fixed);
        let bu = b.matvec(&fixed);
        let all_p: Vec<usize> = (0..np_nodes).collect();
        Ok(ReducedSystem {
            a: a.submatrix(&free, &free),
            b: b.submatrix(&all_p, &free),
            c: ps.integrals(),
            rhs_u: free.iter().map(|&d| rhs_full[d] - au[d]).collect(),
            rhs_p: bu.iter().map(|v| -v).collect(),
            free,
            fixed,
            mu,
        })
    }

    /// Errors against an exact solution. The energy entry is the `H^1`
    /// seminorm `|u - u_h|_1`.
    pub fn error_norms(&self, spec: &ExampleSpec, velocity: &[f64], pressure: &[f64]) -> ErrorNorms {
        let vs = &*self.velocity;
        let ps = &*self.pressure;
        let mesh = &*vs.mesh;
        let dim = mesh.dim;
        let quad = QuadSet::new(
            dim,
            vs.quad.degree.clamp(ERROR_QUAD_DEGREE, crate::quadrature::MAX_DEGREE),
        )
        .expect("supported quadrature degree");
        let parts: Vec<[f64; 4]> = (0..mesh.n_cells())
            .into_par_iter()
            .map(|c| {
                let (pts, wts) = quad.cell_points(mesh, c);
                let uh = vs.eval_cell(velocity, c, &pts);
                let gh = vs.eval_cell_grad(velocity, c, &pts);
                let ph = ps.eval_cell(pressure, c, &pts);
                let mut s = [0.0; 4];
                for (q, x) in pts.iter().enumerate() {
                    let u = (spec.velocity)(x);
                    let gu = (spec.velocity_grad)(x);
                    let mut div = 0.0;
                    for i in 0..dim {
                        s[0] += wts[q] * (u[i] - uh[q * dim + i]).powi(2);
                        for j in 0..dim {
                            s[1] += wts[q] * (gu[i][j] - gh[q * dim + i][j]).powi(2);
                        }
                        div += gh[q * dim + i][i];
                    }
                    s[2] += wts[q] * ((spec.pressure)(x) - ph[q]).powi(2);
                    s[3] = s[3].max(div.abs());
                }
                s
            })
            .collect();
        let mut sums = [0.0; 3];
        let mut div: f64 = 0.0;
        for p in &parts {
            for i in 0..3 {
                sums[i] += p[i];
            }
            div = div.max(p[3]);
        }
        ErrorNorms {
            velocity_l2: sums[0].sqrt(),
            energy: sums[1].sqrt(),
            pressure_l2: sums[2].sqrt(),
            pressure_projected: f64::NAN,
            divergence_sup: div,
        }
    }
}

/// Solve the Taylor–Hood problem for forcing `f` and boundary data `g`.
pub fn solve_taylor_hood(
    th: &TaylorHood,
    mu: f64,
    f: &VectorFn<'_>,
    g: Option<&VectorFn<'_>>,
    solver: SolverKind,
) -> Result<SaddleSolution> {
    let sys = th.build_reduced(mu, f, g)?;
    solve_saddle(&sys, solver)
}
