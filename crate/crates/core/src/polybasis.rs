//! Element-local orthonormal polynomial bases.
//!
//! Each basis is built from monomials in the centroid-centered coordinates
//! `(x - x_T) / h_T`, orthonormalized in `L2(T)` by modified Gram–Schmidt on
//! weighted quadrature samples. Monomials are ordered by total degree, so the
//! first `dim P_m` functions of a degree-`n` basis span `P_m(T)` for every
//! `m <= n`. Vector and matrix bases are products of the scalar basis with
//! canonical unit vectors and matrices (component-major ordering).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{self, Point};
use crate::mesh::SimplicialMesh;
use crate::quadrature::{self, QuadRule};

/// `dim P_m` in `dim` variables.
pub fn dim_p(dim: usize, m: usize) -> usize {
    match dim {
        1 => m + 1,
        2 => (m + 1) * (m + 2) / 2,
        3 => (m + 1) * (m + 2) * (m + 3) / 6,
        _ => panic!("dim_p: unsupported dimension {dim}"),
    }
}

/// Exponents of all monomials of total degree `<= degree`, graded order.
pub fn monomial_exponents(dim: usize, degree: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(dim_p(dim, degree));
    for total in 0..=degree {
        match dim {
            1 => out.push([total, 0, 0]),
            2 => {
                for b in 0..=total {
                    out.push([total - b, b, 0]);
                }
            }
            3 => {
                for b in 0..=total {
                    for c in 0..=total - b {
                        out.push([total - b - c, b, c]);
                    }
                }
            }
            _ => panic!("monomial_exponents: unsupported dimension {dim}"),
        }
    }
    out
}

/// Values (and optionally gradients) of a set of functions at a list of points.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub n_points: usize,
    pub n_functions: usize,
    /// `values[q * n_functions + j]`
    pub values: Vec<f64>,
    /// `grads[q * n_functions + j]`, empty when not requested.
    pub grads: Vec<[f64; 3]>,
}

impl Tabulation {
    #[inline]
    pub fn value(&self, q: usize, j: usize) -> f64 {
        self.values[q * self.n_functions + j]
    }

    #[inline]
    pub fn grad(&self, q: usize, j: usize) -> &[f64; 3] {
        &self.grads[q * self.n_functions + j]
    }
}

#[derive(Debug, Clone)]
pub struct LocalBasis {
    pub element: usize,
    pub dim: usize,
    pub degree: usize,
    center: Point,
    scale: f64,
    exponents: Vec<[usize; 3]>,
    /// Column `j` holds basis function `j` in scaled monomials; upper triangular.
    coeffs: DMatrix<f64>,
}

impl LocalBasis {
    /// Orthonormal basis of `P_degree` on the simplex `vertices`. The rule
    /// must integrate degree `2 * degree` exactly.
    pub fn new(element: usize, dim: usize, vertices: &[Point], degree: usize, rule: &QuadRule) -> Result<Self> {
        debug_assert!(rule.exact_degree >= 2 * degree);
        let volume = geometry::signed_volume(dim, vertices);
        if !(volume > 0.0) {
            return Err(Error::numerical(element, "non-positive element volume"));
        }
        let (pts, wts) = quadrature::map_rule(rule, vertices)?;
        let exponents = monomial_exponents(dim, degree);
        let n = exponents.len();
        let mut basis = LocalBasis {
            element,
            dim,
            degree,
            center: geometry::centroid(vertices),
            scale: geometry::max_edge_length(vertices),
            exponents,
            coeffs: DMatrix::identity(n, n),
        };
        let nq = pts.len();
        // columns of `samples` are sqrt(w)-weighted monomial values
        let mut samples = DMatrix::<f64>::zeros(nq, n);
        let mut mono = vec![0.0; n];
        for (q, x) in pts.iter().enumerate() {
            basis.monomials(x, &mut mono);
            let sw = wts[q].sqrt();
            for j in 0..n {
                samples[(q, j)] = sw * mono[j];
            }
        }
        let mut coeffs = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let original = samples.column(j).norm();
            let mut col = samples.column(j).clone_owned();
            let mut c = nalgebra::DVector::<f64>::zeros(n);
            c[j] = 1.0;
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for i in 0..j {
                    let qi = samples.column(i);
                    let r = qi.dot(&col);
                    col.axpy(-r, &qi, 1.0);
                    let ci = coeffs.column(i).clone_owned();
                    c.axpy(-r, &ci, 1.0);
                }
            }
            let r = col.norm();
            if !(r > 1e-10 * original) {
                return Err(Error::numerical(
                    element,
                    format!("Gram breakdown at basis function {j}"),
                ));
            }
            samples.set_column(j, &(col / r));
            coeffs.set_column(j, &(c / r));
        }
        basis.coeffs = coeffs;
        Ok(basis)
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn center(&self) -> Point {
        self.center
    }

    fn monomials(&self, x: &Point, out: &mut [f64]) {
        let s = geometry::scale(&geometry::sub(x, &self.center), 1.0 / self.scale);
        let pw = powers(&s, self.degree);
        for (m, e) in self.exponents.iter().enumerate() {
            out[m] = pw[0][e[0]] * pw[1][e[1]] * pw[2][e[2]];
        }
    }

    fn monomial_gradients(&self, x: &Point, out: &mut [[f64; 3]]) {
        let s = geometry::scale(&geometry::sub(x, &self.center), 1.0 / self.scale);
        let pw = powers(&s, self.degree);
        let inv = 1.0 / self.scale;
        for (m, e) in self.exponents.iter().enumerate() {
            let mut g = [0.0; 3];
            for axis in 0..self.dim {
                if e[axis] == 0 {
                    continue;
                }
                let mut v = e[axis] as f64 * inv;
                for other in 0..3 {
                    v *= if other == axis {
                        pw[other][e[other] - 1]
                    } else {
                        pw[other][e[other]]
                    };
                }
                g[axis] = v;
            }
            out[m] = g;
        }
    }

    /// Values of all basis functions at `x`.
    pub fn eval(&self, x: &Point) -> Vec<f64> {
        let n = self.len();
        let mut mono = vec![0.0; n];
        self.monomials(x, &mut mono);
        (0..n)
            .map(|j| (0..=j).map(|i| self.coeffs[(i, j)] * mono[i]).sum())
            .collect()
    }

    /// Gradients of all basis functions at `x`.
    pub fn eval_grad(&self, x: &Point) -> Vec<[f64; 3]> {
        let n = self.len();
        let mut mg = vec![[0.0; 3]; n];
        self.monomial_gradients(x, &mut mg);
        (0..n)
            .map(|j| {
                let mut g = [0.0; 3];
                for i in 0..=j {
                    let c = self.coeffs[(i, j)];
                    for a in 0..3 {
                        g[a] += c * mg[i][a];
                    }
                }
                g
            })
            .collect()
    }

    /// Tabulate the first `n` basis functions (all if `None`).
    pub fn tabulate(&self, pts: &[Point], n: Option<usize>, with_grad: bool) -> Tabulation {
        let nf = n.unwrap_or(self.len()).min(self.len());
        let nm = self.len();
        let mut values = Vec::with_capacity(pts.len() * nf);
        let mut grads = Vec::with_capacity(if with_grad { pts.len() * nf } else { 0 });
        let mut mono = vec![0.0; nm];
        let mut mg = vec![[0.0; 3]; nm];
        for x in pts {
            self.monomials(x, &mut mono);
            for j in 0..nf {
                values.push((0..=j).map(|i| self.coeffs[(i, j)] * mono[i]).sum());
            }
            if with_grad {
                self.monomial_gradients(x, &mut mg);
                for j in 0..nf {
                    let mut g = [0.0; 3];
                    for i in 0..=j {
                        let c = self.coeffs[(i, j)];
                        for a in 0..3 {
                            g[a] += c * mg[i][a];
                        }
                    }
                    grads.push(g);
                }
            }
        }
        Tabulation {
            n_points: pts.len(),
            n_functions: nf,
            values,
            grads,
        }
    }

    /// Coefficients of the `L2(T)` projection of `f` onto the first `n`
    /// basis functions, using the supplied physical quadrature.
    pub fn l2_project(&self, pts: &[Point], wts: &[f64], n: usize, f: impl Fn(&Point) -> f64) -> Vec<f64> {
        let tab = self.tabulate(pts, Some(n), false);
        let mut c = vec![0.0; tab.n_functions];
        for (q, x) in pts.iter().enumerate() {
            let fw = wts[q] * f(x);
            for j in 0..tab.n_functions {
                c[j] += fw * tab.value(q, j);
            }
        }
        c
    }

    /// Evaluate the expansion `sum_j coeffs[j] phi_j(x)`.
    pub fn combine(&self, coeffs: &[f64], x: &Point) -> f64 {
        self.eval(x).iter().zip(coeffs).map(|(p, c)| p * c).sum()
    }
}

fn powers(s: &Point, degree: usize) -> [Vec<f64>; 3] {
    let mk = |v: f64| {
        let mut p = Vec::with_capacity(degree + 1);
        let mut acc = 1.0;
        for _ in 0..=degree {
            p.push(acc);
            acc *= v;
        }
        p
    };
    [mk(s[0]), mk(s[1]), mk(s[2])]
}

/// Orthonormal basis of `P_degree` on mesh cell `cell`.
pub fn build_basis(mesh: &SimplicialMesh, cell: usize, degree: usize) -> Result<LocalBasis> {
    let rule = quadrature::simplex_rule(mesh.dim, 2 * degree)?;
    LocalBasis::new(cell, mesh.dim, &mesh.cell_points(cell), degree, &rule)
}
