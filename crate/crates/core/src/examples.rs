//! Manufactured Stokes problems with closed-form solutions.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::Point;

pub type Vector = Arc<dyn Fn(&Point) -> Point + Send + Sync>;
pub type Scalar = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type Matrix = Arc<dyn Fn(&Point) -> [[f64; 3]; 3] + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleId {
    /// Polynomial vortex on the unit square, homogeneous boundary data.
    Ex1,
    /// Zero velocity driven by a gradient forcing on the unit square.
    Ex2,
    /// Quadratic flow on the unit cube with nonhomogeneous boundary data.
    Ex3,
    Custom,
}

impl FromStr for ExampleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ex1" => Ok(ExampleId::Ex1),
            "ex2" => Ok(ExampleId::Ex2),
            "ex3" => Ok(ExampleId::Ex3),
            "custom" => Ok(ExampleId::Custom),
            other => Err(Error::config(format!(
                "unknown example '{other}' (expected ex1|ex2|ex3)"
            ))),
        }
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExampleId::Ex1 => "ex1",
            ExampleId::Ex2 => "ex2",
            ExampleId::Ex3 => "ex3",
            ExampleId::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// Exact solution and data of a Stokes problem. The forcing depends on `mu`.
#[derive(Clone)]
pub struct ExampleSpec {
    pub id: ExampleId,
    pub dim: usize,
    pub mu: f64,
    pub velocity: Vector,
    /// `grad[i][j] = d u_i / d x_j`.
    pub velocity_grad: Matrix,
    pub pressure: Scalar,
    pub forcing: Vector,
    /// Dirichlet data; `None` for homogeneous conditions.
    pub boundary: Option<Vector>,
}

impl fmt::Debug for ExampleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExampleSpec")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("mu", &self.mu)
            .finish_non_exhaustive()
    }
}

impl ExampleSpec {
    pub fn new(id: ExampleId, mu: f64) -> Result<Self> {
        match id {
            ExampleId::Ex1 => Ok(ex1(mu)),
            ExampleId::Ex2 => Ok(ex2(mu)),
            ExampleId::Ex3 => Ok(ex3(mu)),
            ExampleId::Custom => Err(Error::config("custom examples are built with ExampleSpec::custom")),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn custom(
        dim: usize,
        mu: f64,
        velocity: Vector,
        velocity_grad: Matrix,
        pressure: Scalar,
        forcing: Vector,
        boundary: Option<Vector>,
    ) -> Self {
        ExampleSpec {
            id: ExampleId::Custom,
            dim,
            mu,
            velocity,
            velocity_grad,
            pressure,
            forcing,
            boundary,
        }
    }
}

// X(t) = t - t^2 and its square with derivatives
fn sq(t: f64) -> [f64; 4] {
    let x = t - t * t;
    let dx = 1.0 - 2.0 * t;
    [x * x, 2.0 * x * dx, 2.0 * dx * dx - 4.0 * x, -12.0 * dx]
}

fn ex1(mu: f64) -> ExampleSpec {
    let velocity: Vector = Arc::new(|p| {
        let (a, b) = (sq(p[0]), sq(p[1]));
        [-a[0] * b[1], a[1] * b[0], 0.0]
    });
    let velocity_grad: Matrix = Arc::new(|p| {
        let (a, b) = (sq(p[0]), sq(p[1]));
        [
            [-a[1] * b[1], -a[0] * b[2], 0.0],
            [a[2] * b[0], a[1] * b[1], 0.0],
            [0.0; 3],
        ]
    });
    let pressure: Scalar = Arc::new(|p| sq(p[0])[1] * sq(p[1])[1]);
    let forcing: Vector = Arc::new(move |p| {
        let (a, b) = (sq(p[0]), sq(p[1]));
        [
            mu * (a[2] * b[1] + a[0] * b[3]) + a[2] * b[1],
            -mu * (a[3] * b[0] + a[1] * b[2]) + a[1] * b[2],
            0.0,
        ]
    });
    ExampleSpec {
        id: ExampleId::Ex1,
        dim: 2,
        mu,
        velocity,
        velocity_grad,
        pressure,
        forcing,
        boundary: None,
    }
}

fn ex2(mu: f64) -> ExampleSpec {
    ExampleSpec {
        id: ExampleId::Ex2,
        dim: 2,
        mu,
        velocity: Arc::new(|_| [0.0; 3]),
        velocity_grad: Arc::new(|_| [[0.0; 3]; 3]),
        pressure: Arc::new(|p| (p[0] - p[0] * p[0]) * (p[0] - 0.5)),
        forcing: Arc::new(|p| [3.0 * (p[0] - p[0] * p[0]) - 0.5, 0.0, 0.0]),
        boundary: None,
    }
}

fn ex3(mu: f64) -> ExampleSpec {
    let u = |p: &Point| [p[1] * p[1], p[2] * p[2], p[0] * p[0]];
    ExampleSpec {
        id: ExampleId::Ex3,
        dim: 3,
        mu,
        velocity: Arc::new(u),
        velocity_grad: Arc::new(|p| [[0.0, 2.0 * p[1], 0.0], [0.0, 0.0, 2.0 * p[2]], [2.0 * p[0], 0.0, 0.0]]),
        pressure: Arc::new(|p| p[1] * p[2] - 0.25),
        forcing: Arc::new(move |p| [-2.0 * mu, -2.0 * mu + p[2], -2.0 * mu + p[1]]),
        boundary: Some(Arc::new(u)),
    }
}
