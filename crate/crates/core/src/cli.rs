//! Command-line experiment driver: configuration, convergence runs, table
//! formatting and field export.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use clap::Parser;

use crate::assembly::{build_reduced, StokesDiscretization};
use crate::error::{Error, Result};
use crate::examples::{ExampleId, ExampleSpec};
use crate::geometry::Point;
use crate::mesh::{unit_cube_mesh, unit_square_mesh, SimplicialMesh};
use crate::postproc::{error_norms, ErrorReport, ErrorRow};
use crate::solver::{solve_saddle, SolverKind};
use crate::spaces::FiniteElementSpace;
use crate::taylor_hood::TaylorHood;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Hdiv,
    TaylorHood,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hdiv" => Ok(Family::Hdiv),
            "taylor-hood" | "th" => Ok(Family::TaylorHood),
            other => Err(Error::config(format!(
                "unknown family '{other}' (expected hdiv|taylor-hood)"
            ))),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Hdiv => "hdiv",
            Family::TaylorHood => "taylor-hood",
        })
    }
}

/// Parse `a..b` (inclusive) or a single level.
pub fn parse_levels(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::config(format!("invalid level range '{s}' (expected a..b)"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a.trim(), b.trim().trim_start_matches('=')),
        None => (s.trim(), s.trim()),
    };
    let a: usize = a.parse().map_err(|_| bad())?;
    let b: usize = b.parse().map_err(|_| bad())?;
    if a == 0 || b < a {
        return Err(bad());
    }
    Ok((a, b))
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub example: ExampleId,
    pub family: Family,
    pub degree: usize,
    pub levels: (usize, usize),
    pub mu: f64,
    pub quad_degree: Option<usize>,
    pub solver: SolverKind,
    pub out: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            example: ExampleId::Ex1,
            family: Family::Hdiv,
            degree: 1,
            levels: (1, 4),
            mu: 1.0,
            quad_degree: None,
            solver: SolverKind::Direct,
            out: None,
        }
    }
}

impl Config {
    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| Error::config(format!("invalid value '{v}' for '{key}'")))
        };
        match key {
            "example" => self.example = value.parse()?,
            "family" => self.family = value.parse()?,
            "degree" => self.degree = num(value)?,
            "levels" => self.levels = parse_levels(value)?,
            "mu" => {
                self.mu = value
                    .parse()
                    .map_err(|_| Error::config(format!("invalid value '{value}' for 'mu'")))?
            }
            "quad-degree" | "quad_degree" => self.quad_degree = Some(num(value)?),
            "solver" => self.solver = value.parse()?,
            "out" => self.out = Some(PathBuf::from(value)),
            other => return Err(Error::config(format!("unknown configuration key '{other}'"))),
        }
        Ok(())
    }

    /// Read `key = value` lines; `#` starts a comment.
    pub fn apply_file_contents(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self.example {
            ExampleId::Ex3 => 3,
            _ => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree == 0 {
            return Err(Error::config("degree must be at least 1"));
        }
        if self.example == ExampleId::Custom {
            return Err(Error::config("custom examples are only available through the library"));
        }
        let dim = self.dim();
        match (self.family, dim) {
            (Family::Hdiv, 2) if (1..=4).contains(&self.degree) => {}
            (Family::Hdiv, 3) if self.degree == 2 => {}
            (Family::TaylorHood, 2) if (2..=3).contains(&self.degree) => {}
            (Family::Hdiv, _) => {
                return Err(Error::config(format!(
                    "hdiv supports k = 1..4 in 2D and k = 2 in 3D (got k = {} in {dim}D)",
                    self.degree
                )))
            }
            (Family::TaylorHood, _) => {
                return Err(Error::config(format!(
                    "taylor-hood supports k = 2..3 in 2D (got k = {} in {dim}D)",
                    self.degree
                )))
            }
        }
        let max_level = if dim == 2 { 10 } else { 6 };
        if self.levels.1 > max_level {
            return Err(Error::config(format!(
                "levels above {max_level} are not supported in {dim}D"
            )));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::config(format!(
                "mu must be positive and finite (got {})",
                self.mu
            )));
        }
        if let Some(q) = self.quad_degree {
            let need = 2 * self.degree + 2;
            if q < need || q > crate::quadrature::MAX_DEGREE {
                return Err(Error::config(format!(
                    "quad-degree must lie in {need}..={}",
                    crate::quadrature::MAX_DEGREE
                )));
            }
        }
        Ok(())
    }
}

#[derive(Parser, Debug, Default)]
#[command(
    name = "hdiv-stokes",
    version,
    about = "H(div) weak-gradient Stokes solver: convergence studies"
)]
pub struct Args {
    /// ex1 | ex2 | ex3
    #[arg(long)]
    pub example: Option<String>,
    /// hdiv | taylor-hood
    #[arg(long)]
    pub family: Option<String>,
    /// Velocity polynomial degree k
    #[arg(long)]
    pub degree: Option<usize>,
    /// Refinement levels, e.g. 2..5
    #[arg(long)]
    pub levels: Option<String>,
    /// Viscosity (default 1)
    #[arg(long)]
    pub mu: Option<f64>,
    /// Quadrature degree (default 2k+6)
    #[arg(long = "quad-degree")]
    pub quad_degree: Option<usize>,
    /// direct | lu | minres
    #[arg(long)]
    pub solver: Option<String>,
    /// Output directory for table.md, table.csv and field_*.dat
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// key = value configuration file; command-line flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Lattice points per side for field export
    #[arg(long, default_value_t = 33)]
    pub samples: usize,
}

impl Args {
    pub fn resolve(&self) -> Result<Config> {
        let mut cfg = Config::default();
        if let Some(path) = &self.config {
            cfg.apply_file_contents(&std::fs::read_to_string(path)?)?;
        }
        if let Some(v) = &self.example {
            cfg.set("example", v)?;
        }
        if let Some(v) = &self.family {
            cfg.set("family", v)?;
        }
        if let Some(v) = self.degree {
            cfg.degree = v;
        }
        if let Some(v) = &self.levels {
            cfg.set("levels", v)?;
        }
        if let Some(v) = self.mu {
            cfg.mu = v;
        }
        if let Some(v) = self.quad_degree {
            cfg.quad_degree = Some(v);
        }
        if let Some(v) = &self.solver {
            cfg.set("solver", v)?;
        }
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn build_mesh(dim: usize, level: usize) -> Result<SimplicialMesh> {
    match dim {
        2 => unit_square_mesh(level),
        3 => unit_cube_mesh(level),
        _ => Err(Error::config(format!("unsupported dimension {dim}"))),
    }
}

/// Discrete solution on one level, kept for field export.
pub enum Solved {
    Hdiv {
        disc: StokesDiscretization,
        velocity: Vec<f64>,
        pressure: Vec<f64>,
    },
    TaylorHood {
        th: TaylorHood,
        velocity: Vec<f64>,
        pressure: Vec<f64>,
    },
}

impl Solved {
    pub fn mesh(&self) -> &SimplicialMesh {
        match self {
            Solved::Hdiv { disc, .. } => disc.mesh(),
            Solved::TaylorHood { th, .. } => &th.velocity.mesh,
        }
    }

    /// Velocity components and pressure at `x` in `cell`.
    pub fn sample(&self, cell: usize, x: &Point) -> (Vec<f64>, f64) {
        let pts = [*x];
        match self {
            Solved::Hdiv {
                disc,
                velocity,
                pressure,
            } => (
                disc.velocity.eval_cell(velocity, cell, &pts),
                disc.pressure.eval_cell(pressure, cell, &pts)[0],
            ),
            Solved::TaylorHood { th, velocity, pressure } => (
                th.velocity.eval_cell(velocity, cell, &pts),
                th.pressure.eval_cell(pressure, cell, &pts)[0],
            ),
        }
    }
}

/// Solve one level and measure its errors.
pub fn run_level(cfg: &Config, spec: &ExampleSpec, level: usize) -> Result<(ErrorRow, Solved)> {
    let start = Instant::now();
    let mesh = Arc::new(build_mesh(spec.dim, level)?);
    let h = mesh.max_diameter();
    let cells = mesh.n_cells();
    let g = spec.boundary.as_deref().map(|g| g as &crate::VectorFn<'_>);
    let (norms, unknowns, solved) = match cfg.family {
        Family::Hdiv => {
            let disc = StokesDiscretization::new(mesh, cfg.degree, cfg.quad_degree)?;
            let sys = build_reduced(&disc, cfg.mu, &*spec.forcing, g)?;
            let sol = solve_saddle(&sys, cfg.solver)?;
            let norms = error_norms(&disc, spec, &sol.velocity, &sol.pressure);
            (
                norms,
                sys.size(),
                Solved::Hdiv {
                    disc,
                    velocity: sol.velocity,
                    pressure: sol.pressure,
                },
            )
        }
        Family::TaylorHood => {
            let th = TaylorHood::new(mesh, cfg.degree, cfg.quad_degree)?;
            let sys = th.build_reduced(cfg.mu, &*spec.forcing, g)?;
            let sol = solve_saddle(&sys, cfg.solver)?;
            let norms = th.error_norms(spec, &sol.velocity, &sol.pressure);
            (
                norms,
                sys.size(),
                Solved::TaylorHood {
                    th,
                    velocity: sol.velocity,
                    pressure: sol.pressure,
                },
            )
        }
    };
    let row = ErrorRow {
        level,
        h,
        cells,
        unknowns,
        norms,
        solve_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((row, solved))
}

/// Run all configured levels. Returns the report and the finest solution.
pub fn run_convergence(cfg: &Config) -> Result<(ErrorReport, Option<Solved>)> {
    cfg.validate()?;
    let spec = ExampleSpec::new(cfg.example, cfg.mu)?;
    let mut report = ErrorReport::default();
    let mut last = None;
    for level in cfg.levels.0..=cfg.levels.1 {
        let (row, solved) = run_level(cfg, &spec, level)?;
        report.push(row);
        last = Some(solved);
    }
    Ok((report, last))
}

/// Scientific notation with a mantissa in `[0.1, 1)` and four digits,
/// e.g. `0.4468E-02`.
pub fn format_sci(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0.0000E+00".to_string();
    }
    let mut e = v.abs().log10().floor() as i32 + 1;
    let mut m = v / 10f64.powi(e);
    if (m.abs() * 1e4).round() >= 1e4 {
        m /= 10.0;
        e += 1;
    }
    format!("{m:.4}E{e:+03}")
}

fn format_rate(r: Option<f64>) -> String {
    match r {
        Some(r) if r.is_finite() => format!("{r:.2}"),
        _ => "-".to_string(),
    }
}

fn energy_label(family: Family) -> &'static str {
    match family {
        Family::Hdiv => "|||u-u_h|||",
        Family::TaylorHood => "|u-u_h|_1",
    }
}

/// Markdown table in the layout of the reference tables, plus a
/// divergence column.
pub fn format_markdown(cfg: &Config, report: &ErrorReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} {} k={} mu={}\n",
        cfg.example,
        cfg.family,
        cfg.degree,
        format_sci(cfg.mu)
    );
    let _ = writeln!(
        s,
        "| level | ||u-u_h|| | rate | {} | rate | ||p-p_h|| | rate | max|div u_h| |",
        energy_label(cfg.family)
    );
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|");
    for (row, rate) in report.rows.iter().zip(report.rates()) {
        let n = &row.norms;
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} | {} |",
            row.level,
            format_sci(n.velocity_l2),
            format_rate(rate.velocity_l2),
            format_sci(n.energy),
            format_rate(rate.energy),
            format_sci(n.pressure_l2),
            format_rate(rate.pressure_l2),
            format_sci(n.divergence_sup),
        );
    }
    s
}

pub fn format_csv(report: &ErrorReport) -> String {
    let mut s = String::from(
        "level,h,cells,unknowns,velocity_l2,velocity_l2_rate,energy,energy_rate,pressure_l2,pressure_l2_rate,pressure_projected,divergence_sup\n",
    );
    for (row, rate) in report.rows.iter().zip(report.rates()) {
        let n = &row.norms;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            row.level,
            format_sci(row.h),
            row.cells,
            row.unknowns,
            format_sci(n.velocity_l2),
            format_rate(rate.velocity_l2),
            format_sci(n.energy),
            format_rate(rate.energy),
            format_sci(n.pressure_l2),
            format_rate(rate.pressure_l2),
            format_sci(n.pressure_projected),
            format_sci(n.divergence_sup),
        );
    }
    s
}

/// Points of a uniform lattice on the unit square or cube.
pub fn lattice_points(dim: usize, per_side: usize) -> Vec<Point> {
    let n = per_side.max(2);
    let t = |i: usize| i as f64 / (n - 1) as f64;
    let mut pts = Vec::new();
    match dim {
        2 => {
            for j in 0..n {
                for i in 0..n {
                    pts.push([t(i), t(j), 0.0]);
                }
            }
        }
        _ => {
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        pts.push([t(i), t(j), t(k)]);
                    }
                }
            }
        }
    }
    pts
}

/// Write one `field_<name>.dat` per velocity component and one for the
/// pressure: columns `x y [z] value`. Returns the written paths.
pub fn export_fields(solved: &Solved, dir: &Path, per_side: usize) -> Result<Vec<PathBuf>> {
    let mesh = solved.mesh();
    let dim = mesh.dim;
    let pts = lattice_points(dim, per_side);
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(pts.len()); dim + 1];
    for x in &pts {
        let cell = mesh
            .locate(x, 1e-12)
            .ok_or_else(|| Error::structural(format!("sample point {x:?} lies outside the mesh")))?;
        let (u, p) = solved.sample(cell, x);
        for i in 0..dim {
            columns[i].push(u[i]);
        }
        columns[dim].push(p);
    }
    let mut names: Vec<String> = (1..=dim).map(|i| format!("u{i}")).collect();
    names.push("p".into());
    let mut written = Vec::new();
    for (name, values) in names.iter().zip(&columns) {
        let path = dir.join(format!("field_{name}.dat"));
        write_field(&path, dim, &pts, values)?;
        written.push(path);
    }
    Ok(written)
}

/// Plain-text lattice table `x y [z] value`.
pub fn write_field(path: &Path, dim: usize, pts: &[Point], values: &[f64]) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "# {}", if dim == 2 { "x y value" } else { "x y z value" });
    for (x, v) in pts.iter().zip(values) {
        for c in &x[..dim] {
            let _ = write!(s, "{c:.6} ");
        }
        let _ = writeln!(s, "{v:.10e}");
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Entry point shared by the binary: run, print and write outputs.
pub fn run(args: &Args) -> Result<String> {
    let cfg = args.resolve()?;
    let (report, solved) = run_convergence(&cfg)?;
    let md = format_markdown(&cfg, &report);
    if let Some(dir) = &cfg.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("table.md"), &md)?;
        std::fs::write(dir.join("table.csv"), format_csv(&report))?;
        if let Some(solved) = &solved {
            export_fields(solved, dir, args.samples)?;
        }
    }
    Ok(md)
}
