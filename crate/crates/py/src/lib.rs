//! Python bindings: meshes, quadrature, single solves and convergence
//! studies.

use std::sync::Arc;

use hdiv_stokes::cli::{self, Config, Family, Solved};
use hdiv_stokes::examples::{ExampleId, ExampleSpec};
use hdiv_stokes::mesh::SimplicialMesh;
use hdiv_stokes::postproc::{self, ErrorRow};
use hdiv_stokes::solver::SolverKind;
use hdiv_stokes::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Structural(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Uniform simplicial mesh of the unit square or cube.
#[pyclass(name = "Mesh", module = "hdiv_stokes_py", frozen)]
struct PyMesh {
    inner: Arc<SimplicialMesh>,
}

#[pymethods]
impl PyMesh {
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn level(&self) -> usize {
        self.inner.level
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.inner.n_cells()
    }

    #[getter]
    fn n_vertices(&self) -> usize {
        self.inner.n_vertices()
    }

    #[getter]
    fn n_faces(&self) -> usize {
        self.inner.n_faces()
    }

    #[getter]
    fn n_boundary_faces(&self) -> usize {
        self.inner.boundary_faces().count()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.max_diameter()
    }

    fn volume(&self) -> f64 {
        self.inner.total_volume()
    }

    /// Vertex coordinates, `dim` entries each.
    fn vertices(&self) -> Vec<Vec<f64>> {
        let d = self.inner.dim;
        self.inner.vertices.iter().map(|v| v[..d].to_vec()).collect()
    }

    /// Vertex indices of every cell.
    fn cells(&self) -> Vec<Vec<usize>> {
        (0..self.inner.n_cells()).map(|c| self.inner.cell(c).to_vec()).collect()
    }

    /// Index of a cell containing `point`, or `None`.
    fn locate(&self, point: Vec<f64>) -> Option<usize> {
        let mut x = [0.0; 3];
        for (xi, p) in x.iter_mut().zip(&point) {
            *xi = *p;
        }
        self.inner.locate(&x, 1e-12)
    }

    fn __repr__(&self) -> String {
        format!(
            "Mesh(dim={}, level={}, cells={}, faces={})",
            self.inner.dim,
            self.inner.level,
            self.inner.n_cells(),
            self.inner.n_faces()
        )
    }
}

#[pyfunction]
fn unit_square_mesh(level: usize) -> PyResult<PyMesh> {
    Ok(PyMesh {
        inner: Arc::new(hdiv_stokes::mesh::unit_square_mesh(level).map_err(to_py)?),
    })
}

#[pyfunction]
fn unit_cube_mesh(level: usize) -> PyResult<PyMesh> {
    Ok(PyMesh {
        inner: Arc::new(hdiv_stokes::mesh::unit_cube_mesh(level).map_err(to_py)?),
    })
}

/// Reference-simplex rule of the given degree: `(points, weights)`.
#[pyfunction]
fn simplex_rule(dim: usize, degree: usize) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let rule = hdiv_stokes::quadrature::simplex_rule(dim, degree).map_err(to_py)?;
    let pts = (0..rule.len())
        .map(|q| rule.reference_point(q)[..dim].to_vec())
        .collect();
    Ok((pts, rule.weights.clone()))
}

/// Errors measured on one refinement level.
#[pyclass(name = "ErrorRow", module = "hdiv_stokes_py", get_all, frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyErrorRow {
    level: usize,
    h: f64,
    cells: usize,
    unknowns: usize,
    velocity_l2: f64,
    energy: f64,
    pressure_l2: f64,
    pressure_projected: f64,
    divergence_sup: f64,
    seconds: f64,
    velocity_rate: Option<f64>,
    energy_rate: Option<f64>,
    pressure_rate: Option<f64>,
}

#[pymethods]
impl PyErrorRow {
    fn __repr__(&self) -> String {
        format!(
            "ErrorRow(level={}, velocity_l2={:.4e}, energy={:.4e}, pressure_l2={:.4e}, divergence_sup={:.2e})",
            self.level, self.velocity_l2, self.energy, self.pressure_l2, self.divergence_sup
        )
    }
}

fn row_to_py(row: &ErrorRow, rate: Option<postproc::Rates>) -> PyErrorRow {
    let rate = rate.unwrap_or_default();
    PyErrorRow {
        level: row.level,
        h: row.h,
        cells: row.cells,
        unknowns: row.unknowns,
        velocity_l2: row.norms.velocity_l2,
        energy: row.norms.energy,
        pressure_l2: row.norms.pressure_l2,
        pressure_projected: row.norms.pressure_projected,
        divergence_sup: row.norms.divergence_sup,
        seconds: row.solve_seconds,
        velocity_rate: rate.velocity_l2,
        energy_rate: rate.energy,
        pressure_rate: rate.pressure_l2,
    }
}

fn config(
    example: &str,
    family: &str,
    degree: usize,
    levels: (usize, usize),
    mu: f64,
    quad_degree: Option<usize>,
    solver: &str,
) -> PyResult<Config> {
    let cfg = Config {
        example: example.parse::<ExampleId>().map_err(to_py)?,
        family: family.parse::<Family>().map_err(to_py)?,
        degree,
        levels,
        mu,
        quad_degree,
        solver: solver.parse::<SolverKind>().map_err(to_py)?,
        out: None,
    };
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

/// Discrete solution of one level with its error row.
#[pyclass(name = "Solution", module = "hdiv_stokes_py", frozen)]
struct PySolution {
    #[pyo3(get)]
    errors: PyErrorRow,
    solved: Solved,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn velocity(&self) -> Vec<f64> {
        match &self.solved {
            Solved::Hdiv { velocity, .. } | Solved::TaylorHood { velocity, .. } => velocity.clone(),
        }
    }

    #[getter]
    fn pressure(&self) -> Vec<f64> {
        match &self.solved {
            Solved::Hdiv { pressure, .. } | Solved::TaylorHood { pressure, .. } => pressure.clone(),
        }
    }

    /// Velocity and pressure at `point`: `(u, p)`.
    fn evaluate(&self, point: Vec<f64>) -> PyResult<(Vec<f64>, f64)> {
        let mesh = self.solved.mesh();
        let mut x = [0.0; 3];
        for (xi, p) in x.iter_mut().zip(&point) {
            *xi = *p;
        }
        let cell = mesh
            .locate(&x, 1e-12)
            .ok_or_else(|| PyValueError::new_err(format!("point {point:?} lies outside the domain")))?;
        Ok(self.solved.sample(cell, &x))
    }
}

/// Solve one level of a built-in example.
#[pyfunction]
#[pyo3(signature = (example, level, degree, family = "hdiv", mu = 1.0, quad_degree = None, solver = "direct"))]
fn solve(
    py: Python<'_>,
    example: &str,
    level: usize,
    degree: usize,
    family: &str,
    mu: f64,
    quad_degree: Option<usize>,
    solver: &str,
) -> PyResult<PySolution> {
    let cfg = config(example, family, degree, (level, level), mu, quad_degree, solver)?;
    let (row, solved) = py
        .detach(|| {
            let spec = ExampleSpec::new(cfg.example, cfg.mu)?;
            cli::run_level(&cfg, &spec, level)
        })
        .map_err(to_py)?;
    Ok(PySolution {
        errors: row_to_py(&row, None),
        solved,
    })
}

/// Convergence study over `levels = (first, last)`; one row per level.
#[pyfunction]
#[pyo3(signature = (example, degree, levels, family = "hdiv", mu = 1.0, quad_degree = None, solver = "direct"))]
fn run_convergence(
    py: Python<'_>,
    example: &str,
    degree: usize,
    levels: (usize, usize),
    family: &str,
    mu: f64,
    quad_degree: Option<usize>,
    solver: &str,
) -> PyResult<Vec<PyErrorRow>> {
    let cfg = config(example, family, degree, levels, mu, quad_degree, solver)?;
    let (report, _) = py.detach(|| cli::run_convergence(&cfg)).map_err(to_py)?;
    let rates = report.rates();
    Ok(report
        .rows
        .iter()
        .zip(rates)
        .map(|(r, rate)| row_to_py(r, Some(rate)))
        .collect())
}

/// Discrete inf-sup constant of the H(div) pair on the unit square.
#[pyfunction]
fn infsup_estimate(py: Python<'_>, degree: usize, level: usize) -> PyResult<f64> {
    py.detach(|| {
        let mesh = Arc::new(hdiv_stokes::mesh::unit_square_mesh(level)?);
        let disc = hdiv_stokes::assembly::StokesDiscretization::new(mesh, degree, None)?;
        postproc::infsup_estimate(&disc)
    })
    .map_err(to_py)
}

/// Number in the `0.4468E-02` table style.
#[pyfunction]
fn format_sci(value: f64) -> String {
    cli::format_sci(value)
}

#[pymodule]
fn hdiv_stokes_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyErrorRow>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(unit_square_mesh, m)?)?;
    m.add_function(wrap_pyfunction!(unit_cube_mesh, m)?)?;
    m.add_function(wrap_pyfunction!(simplex_rule, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(run_convergence, m)?)?;
    m.add_function(wrap_pyfunction!(infsup_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(format_sci, m)?)?;
    Ok(())
}
