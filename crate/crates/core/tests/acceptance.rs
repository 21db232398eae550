//! Acceptance criteria. Prints one PASS/FAIL line per criterion followed by
//! indented details. Comparisons against the reference tables
//! are reported but do not set the exit status; every computed property
//! does.

mod common;

use std::time::Instant;

use common::{
    all_families, gradient_forcing_invariance, infsup_levels, mesh, mu_scaling, orthonormality_sweep, quadrature_sweep,
    weak_gradient_identity, zero_data_solution,
};
use hdiv_stokes::cli::{run_convergence, Config, Family};
use hdiv_stokes::examples::ExampleId;
use hdiv_stokes::postproc::{ErrorNorms, ErrorReport};
use hdiv_stokes::quadrature::MAX_DEGREE;
use hdiv_stokes::solver::SolverKind;

/// `(level, [value, rate] x 3)` for velocity, energy and pressure.
type RefRow = (usize, [f64; 6]);

type Column = (&'static str, fn(&ErrorNorms) -> f64);

const EX1_REFERENCE: [(usize, &[RefRow]); 4] = [
    (
        1,
        &[
            (5, [0.6699E-01, 1.82, 0.3105E+01, 1.05, 0.1087E+01, 1.12]),
            (6, [0.1754E-01, 1.93, 0.1516E+01, 1.03, 0.5164E+00, 1.07]),
            (7, [0.4468E-02, 1.97, 0.7479E+00, 1.02, 0.2528E+00, 1.03]),
        ],
    ),
    (
        2,
        &[
            (5, [0.7769E-03, 3.10, 0.1607E+00, 1.95, 0.3320E+00, 1.68]),
            (6, [0.9439E-04, 3.04, 0.4059E-01, 1.98, 0.9258E-01, 1.84]),
            (7, [0.1170E-04, 3.01, 0.1018E-01, 2.00, 0.2443E-01, 1.92]),
        ],
    ),
    (
        3,
        &[
            (4, [0.3821E-03, 3.90, 0.4483E-01, 2.80, 0.1374E+00, 2.71]),
            (5, [0.2444E-04, 3.97, 0.5895E-02, 2.93, 0.1884E-01, 2.87]),
            (6, [0.1550E-05, 3.98, 0.7560E-03, 2.96, 0.2461E-02, 2.94]),
        ],
    ),
    (
        4,
        &[
            (4, [0.2350E-04, 4.85, 0.3140E-02, 3.81, 0.5804E-02, 3.85]),
            (5, [0.7645E-06, 4.94, 0.2082E-03, 3.91, 0.3818E-03, 3.93]),
            (6, [0.2433E-07, 4.97, 0.1341E-04, 3.96, 0.2447E-04, 3.96]),
        ],
    ),
];

/// H(div) pressure errors, identical for both viscosities: `(k, level, value, rate)`.
const EX2_HDIV_PRESSURE: [(usize, usize, f64, f64); 6] = [
    (2, 5, 0.5615E-03, 1.94),
    (2, 6, 0.1434E-03, 1.97),
    (2, 7, 0.3624E-04, 1.98),
    (3, 4, 0.5580E-04, 3.00),
    (3, 5, 0.6975E-05, 3.00),
    (3, 6, 0.8719E-06, 3.00),
];

/// Taylor-Hood at unit viscosity: `(k, level, velocity, rate, h1, rate)`.
const EX2_TH_VELOCITY: [(usize, usize, [f64; 4]); 6] = [
    (2, 5, [0.2292E-06, 3.99, 0.2733E-04, 2.93]),
    (2, 6, [0.1438E-07, 3.99, 0.3491E-05, 2.97]),
    (2, 7, [0.9002E-09, 4.00, 0.4410E-06, 2.98]),
    (3, 4, [0.7690E-06, 3.64, 0.4897E-04, 2.74]),
    (3, 5, [0.5345E-07, 3.85, 0.6637E-05, 2.88]),
    (3, 6, [0.3509E-08, 3.93, 0.8620E-06, 2.94]),
];

/// 3D level 4: energy, velocity, pressure.
const EX3_LEVEL4: [f64; 3] = [0.6209E-01, 0.1006E-02, 0.3879E-01];

const VALUE_TOL: f64 = 0.02;
const RATE_TOL: f64 = 0.1;
const DIV_TOL: f64 = 1e-10;

struct Outcome {
    /// Computed properties; these gate the exit status.
    property: bool,
    /// Agreement with reference values.
    reference: bool,
    summary: String,
    details: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            property: true,
            reference: true,
            summary: String::new(),
            details: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, line: String) {
        self.property &= ok;
        self.details
            .push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }

    fn compare(&mut self, ok: bool, line: String) {
        self.reference &= ok;
        self.details
            .push(format!("{} {line}", if ok { "ok  " } else { "MISS" }));
    }

    fn note(&mut self, line: String) {
        self.details.push(format!("     {line}"));
    }
}

fn study(example: ExampleId, family: Family, degree: usize, levels: (usize, usize), mu: f64) -> (ErrorReport, f64) {
    let cfg = Config {
        example,
        family,
        degree,
        levels,
        mu,
        quad_degree: None,
        solver: SolverKind::Direct,
        out: None,
    };
    let start = Instant::now();
    let (report, _) = run_convergence(&cfg).expect("convergence study");
    (report, start.elapsed().as_secs_f64())
}

fn close(value: f64, reference: f64) -> bool {
    (value - reference).abs() <= VALUE_TOL * reference.abs()
}

fn rate_close(rate: Option<f64>, reference: f64) -> bool {
    rate.is_some_and(|r| (r - reference).abs() <= RATE_TOL)
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or("-".into(), |r| format!("{r:.2}"))
}

fn criteria_1_and_2() -> (Outcome, Outcome) {
    let mut c1 = Outcome::new();
    let mut c2 = Outcome::new();
    let mut worst_div: f64 = 0.0;
    for (k, rows) in EX1_REFERENCE {
        let first = rows[0].0 - 1;
        let last = rows[rows.len() - 1].0;
        let (report, seconds) = study(ExampleId::Ex1, Family::Hdiv, k, (first, last), 1.0);
        let rates = report.rates();
        for (row, rate) in report.rows.iter().zip(&rates) {
            worst_div = worst_div.max(row.norms.divergence_sup);
            c2.check(
                row.norms.divergence_sup < DIV_TOL,
                format!(
                    "ex1 k={k} level {}: max|div u_h| = {:.3e}",
                    row.level, row.norms.divergence_sup
                ),
            );
            let Some((_, r)) = rows.iter().find(|(l, _)| *l == row.level) else {
                continue;
            };
            let measured = [row.norms.velocity_l2, row.norms.energy, row.norms.pressure_l2];
            let measured_rates = [rate.velocity_l2, rate.energy, rate.pressure_l2];
            let ok = (0..3).all(|i| close(measured[i], r[2 * i]) && rate_close(measured_rates[i], r[2 * i + 1]));
            c1.compare(
                ok,
                format!(
                    "k={k} level {}: u {:.4e} ({}) energy {:.4e} ({}) p {:.4e} ({}) | reference {:.4e} ({}) {:.4e} ({}) {:.4e} ({})",
                    row.level,
                    measured[0],
                    fmt_rate(measured_rates[0]),
                    measured[1],
                    fmt_rate(measured_rates[1]),
                    measured[2],
                    fmt_rate(measured_rates[2]),
                    r[0],
                    r[1],
                    r[2],
                    r[3],
                    r[4],
                    r[5]
                ),
            );
        }
        if k == 4 {
            let level6 = report.rows.last().unwrap().solve_seconds;
            c1.check(
                level6 < 300.0,
                format!("k=4 level 6 solve took {level6:.1} s (limit 300 s)"),
            );
        }
        c1.note(format!("k={k} study wall time {seconds:.1} s"));
    }
    c1.summary = "ex1 error table (2D, k = 1..4)".into();
    c2.summary = format!("divergence-free velocities, worst max|div u_h| = {worst_div:.2e}");
    (c1, c2)
}

fn criterion_3() -> Outcome {
    let mut c = Outcome::new();
    for (k, levels) in [(2, (4, 7)), (3, (3, 7))] {
        for mu in [1.0, 1e-6] {
            let (report, _) = study(ExampleId::Ex2, Family::Hdiv, k, levels, mu);
            let rates = report.rates();
            for (row, rate) in report.rows.iter().zip(&rates) {
                if row.level >= 4 {
                    c.check(
                        row.norms.velocity_l2 < 1e-9,
                        format!(
                            "hdiv k={k} mu={mu:e} level {}: ||u-u_h|| = {:.3e}",
                            row.level, row.norms.velocity_l2
                        ),
                    );
                }
                c.check(
                    row.norms.divergence_sup < DIV_TOL,
                    format!(
                        "hdiv k={k} mu={mu:e} level {}: max|div u_h| = {:.3e}",
                        row.level, row.norms.divergence_sup
                    ),
                );
                if let Some(&(_, _, value, r)) = EX2_HDIV_PRESSURE.iter().find(|e| e.0 == k && e.1 == row.level) {
                    let ok = close(row.norms.pressure_l2, value) && rate_close(rate.pressure_l2, r);
                    c.compare(
                        ok,
                        format!(
                            "hdiv k={k} mu={mu:e} level {}: ||p-p_h|| {:.4e} ({}) | reference {:.4e} ({r})",
                            row.level,
                            row.norms.pressure_l2,
                            fmt_rate(rate.pressure_l2),
                            value
                        ),
                    );
                }
            }
        }
    }
    for (k, levels) in [(2, (4, 7)), (3, (3, 6))] {
        let (unit, _) = study(ExampleId::Ex2, Family::TaylorHood, k, levels, 1.0);
        let (small, _) = study(ExampleId::Ex2, Family::TaylorHood, k, levels, 1e-6);
        let rates = unit.rates();
        for ((a, b), rate) in unit.rows.iter().zip(&small.rows).zip(&rates) {
            let ratio = b.norms.velocity_l2 / a.norms.velocity_l2;
            c.check(
                (ratio / 1e6 - 1.0).abs() < 0.01,
                format!(
                    "taylor-hood k={k} level {}: velocity error ratio mu=1e-6 / mu=1 = {ratio:.6e}",
                    a.level
                ),
            );
            if let Some((_, _, r)) = EX2_TH_VELOCITY.iter().find(|e| e.0 == k && e.1 == a.level) {
                let ok = close(a.norms.velocity_l2, r[0])
                    && rate_close(rate.velocity_l2, r[1])
                    && close(a.norms.energy, r[2])
                    && rate_close(rate.energy, r[3]);
                c.compare(
                    ok,
                    format!(
                        "taylor-hood k={k} mu=1 level {}: u {:.4e} ({}) |u|_1 {:.4e} ({}) | reference {:.4e} ({}) {:.4e} ({})",
                        a.level,
                        a.norms.velocity_l2,
                        fmt_rate(rate.velocity_l2),
                        a.norms.energy,
                        fmt_rate(rate.energy),
                        r[0],
                        r[1],
                        r[2],
                        r[3]
                    ),
                );
            }
        }
    }
    c.summary = "ex2 pressure robustness (H(div) vs Taylor-Hood)".into();
    c
}

fn criterion_4() -> Outcome {
    let mut c = Outcome::new();
    let (report, seconds) = study(ExampleId::Ex3, Family::Hdiv, 2, (1, 4), 1.0);
    c.check(
        report.rows.len() == 4,
        format!("levels 1-4 completed in {seconds:.1} s"),
    );
    for row in &report.rows {
        c.check(
            row.norms.divergence_sup < DIV_TOL,
            format!("level {}: max|div u_h| = {:.3e}", row.level, row.norms.divergence_sup),
        );
        c.note(format!(
            "level {}: energy {:.4e} u {:.4e} p {:.4e}",
            row.level, row.norms.energy, row.norms.velocity_l2, row.norms.pressure_l2
        ));
    }
    let columns: [Column; 3] = [
        ("energy", |n| n.energy),
        ("velocity", |n| n.velocity_l2),
        ("pressure", |n| n.pressure_l2),
    ];
    for (name, get) in columns {
        let values: Vec<f64> = report.rows.iter().skip(1).map(|r| get(&r.norms)).collect();
        let largest = values.iter().cloned().fold(0.0, f64::max);
        if largest < 1e-10 {
            c.note(format!(
                "{name} error is at round-off on every level (max {largest:.2e}): the solution is reproduced exactly, no decrease to measure"
            ));
            continue;
        }
        let monotone = values.windows(2).all(|w| w[1] < w[0]);
        c.check(
            monotone,
            format!(
                "{name} error decreases from level 2 on: {}",
                values.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", ")
            ),
        );
    }
    let last = &report.rows.last().unwrap().norms;
    let measured = [last.energy, last.velocity_l2, last.pressure_l2];
    let matches = (0..3).all(|i| (measured[i] - EX3_LEVEL4[i]).abs() <= 0.1 * EX3_LEVEL4[i]);
    c.note(format!(
        "level 4 measured {:.4e} / {:.4e} / {:.4e}, reference {:.4e} / {:.4e} / {:.4e}: {}",
        measured[0],
        measured[1],
        measured[2],
        EX3_LEVEL4[0],
        EX3_LEVEL4[1],
        EX3_LEVEL4[2],
        if matches {
            "within 10%"
        } else {
            "not reproduced; the tangential boundary treatment differs (open question flagged)"
        }
    ));
    c.summary = "ex3 in 3D, k = 2, levels 1-4".into();
    c
}

fn criterion_5() -> Outcome {
    let mut c = Outcome::new();
    for (dim, k, level) in [(2, 1, 3), (2, 2, 3), (2, 3, 3), (2, 4, 3), (3, 1, 2), (3, 2, 2)] {
        let err = weak_gradient_identity(dim, k, level, 100, 1000 + 10 * dim as u64 + k as u64);
        c.check(
            err < 1e-9,
            format!("weak gradient identity, {dim}D k={k}, 100 fields: max coefficient error {err:.2e}"),
        );
    }
    for k in 1..=3 {
        let (du, dp) = gradient_forcing_invariance(k, 3);
        c.check(
            du < 1e-10 && dp < 1e-9,
            format!("gradient forcing k={k}, 3 potentials: velocity change {du:.2e}, pressure shift error {dp:.2e}"),
        );
    }
    for k in 1..=2 {
        let (du, dp) = mu_scaling(k, 3, 1.0, 1e-6);
        c.check(
            du < 1e-12 && dp < 1e-12,
            format!("viscosity scaling k={k}: velocity {du:.2e}, pressure {dp:.2e}"),
        );
    }
    for k in 1..=2 {
        let beta = infsup_levels(k, 2..=5);
        let ok = beta.iter().all(|&b| b > 0.0) && beta.iter().all(|&b| b >= 0.8 * beta[0]);
        c.check(ok, format!("inf-sup k={k}, levels 2-5: {beta:.4?}"));
    }
    let q2 = quadrature_sweep(2, MAX_DEGREE);
    let q3 = quadrature_sweep(3, MAX_DEGREE);
    c.check(
        q2 < 1e-11 && q3 < 1e-10,
        format!("quadrature degrees 1-{MAX_DEGREE}: max relative monomial error 2D {q2:.1e}, 3D {q3:.1e}"),
    );
    let o2 = (0..=5)
        .map(|d| orthonormality_sweep(&mesh(2, 3), d))
        .fold(0.0, f64::max);
    let o3 = (0..=3)
        .map(|d| orthonormality_sweep(&mesh(3, 2), d))
        .fold(0.0, f64::max);
    c.check(
        o2 < 1e-10 && o3 < 1e-10,
        format!("basis orthonormality: 2D degrees 0-5 {o2:.1e}, 3D degrees 0-3 {o3:.1e}"),
    );
    c.summary = "property suites".into();
    c
}

fn criterion_6() -> Outcome {
    let mut c = Outcome::new();
    for (label, dim, k, th) in all_families() {
        let (size, res) = zero_data_solution(dim, k, th, SolverKind::Direct);
        c.check(
            size == 0.0 && res < 1e-12,
            format!("{label}: max |x| = {size:e}, residual {res:e}"),
        );
    }
    c.summary = "zero data gives the zero solution".into();
    c
}

fn main() {
    let start = Instant::now();
    let (c1, c2) = criteria_1_and_2();
    let outcomes = [c1, c2, criterion_3(), criterion_4(), criterion_5(), criterion_6()];
    let mut gate = true;
    for (i, o) in outcomes.iter().enumerate() {
        let pass = o.property && o.reference;
        gate &= o.property;
        let why = match (o.property, o.reference) {
            (true, true) => String::new(),
            (true, false) => " (computed properties hold; reference values not reproduced)".into(),
            (false, _) => " (computed property violated)".into(),
        };
        println!(
            "{} criterion {}: {}{why}",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            o.summary
        );
        for d in &o.details {
            println!("    {d}");
        }
    }
    println!("acceptance finished in {:.1} s", start.elapsed().as_secs_f64());
    if !gate {
        std::process::exit(1);
    }
}
