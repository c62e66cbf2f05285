//! Example registry, single runs with artifacts, refinement studies with
//! EOCs, and SSC sweeps.

pub mod analytic;
pub mod errors;
pub mod output;
pub mod study;
pub mod sweep;

use std::f64::consts::PI;
use std::path::Path;

use crate::controldisc::{Bounds, ControlKind};
use crate::error::{Error, Result};
use crate::fem::assemble;
use crate::mesh::{build_structured_mesh, build_time_grid, n_for_level, Rect};
use crate::optimizer::{self, SolveReport, SolverOptions, Start};
use crate::reduced::{Iterate, ProblemData};

pub use study::{compute_eoc, convergence_study, Axis, StudyRow, StudySpec};
pub use sweep::{ssc_sweep, value_function_curvature, SweepCell};

/// How discretization errors are measured.
#[derive(Clone, Debug, PartialEq)]
pub enum Reference {
    /// closed-form solution (example 1)
    Analytic,
    /// the same solver `extra_levels` uniform refinements deeper in the
    /// studied axis
    FineGrid { extra_levels: usize },
}

/// Data of one example problem.
#[derive(Clone, Debug)]
pub struct ExampleConfig {
    pub name: String,
    pub c_diff: f64,
    pub alpha: f64,
    pub delta0: f64,
    pub bounds: Option<Bounds>,
    /// control region for distributed controls (empty for parameters)
    pub omega: Vec<Rect>,
    pub control: ControlKind,
    pub u0: fn([f64; 2]) -> f64,
    pub ud: fn([f64; 2]) -> f64,
    pub reference: Reference,
}

fn ex1_u0(x: [f64; 2]) -> f64 {
    analytic::phi(x)
}

fn ex1_ud(x: [f64; 2]) -> f64 {
    -2.0 * analytic::phi(x)
}

fn ex2_u0(x: [f64; 2]) -> f64 {
    4.0 * (PI * x[0] * x[0]).sin() * (PI * x[1].powi(3)).sin()
}

fn ex3_u0(x: [f64; 2]) -> f64 {
    4.0 * (PI * x[0] * x[0]).sin() * (PI * x[1]).sin().powi(3)
}

fn ex3_ud(x: [f64; 2]) -> f64 {
    -2.0 * x[0].min(1.0 - x[0]).min(x[1]).min(1.0 - x[1])
}

fn zero(_: [f64; 2]) -> f64 {
    0.0
}

impl ExampleConfig {
    /// Unconstrained distributed control on the whole square with a known
    /// solution (T = log 2).
    pub fn example1() -> Self {
        ExampleConfig {
            name: "example1".into(),
            c_diff: 1.0 / (2.0 * PI * PI),
            alpha: 1.0,
            delta0: 0.5,
            bounds: None,
            omega: vec![Rect::unit()],
            control: ControlKind::Variational,
            u0: ex1_u0,
            ud: ex1_ud,
            reference: Reference::Analytic,
        }
    }

    /// Two purely time-dependent controls acting on rectangles.
    pub fn example2() -> Self {
        ExampleConfig {
            name: "example2".into(),
            c_diff: 0.03,
            alpha: 1e-2,
            delta0: 0.1,
            bounds: Some(Bounds { lower: -1.5, upper: 0.0 }),
            omega: vec![],
            control: ControlKind::Parameter(vec![Rect::new(0.0, 0.5, 0.0, 1.0), Rect::new(0.5, 1.0, 0.0, 0.5)]),
            u0: ex2_u0,
            ud: zero,
            reference: Reference::FineGrid { extra_levels: 2 },
        }
    }

    /// Distributed control on (0, 0.75)² with active bounds.
    pub fn example3() -> Self {
        ExampleConfig {
            name: "example3".into(),
            c_diff: 0.03,
            alpha: 1e-2,
            delta0: 0.1,
            bounds: Some(Bounds { lower: -5.0, upper: 0.0 }),
            omega: vec![Rect::new(0.0, 0.75, 0.0, 0.75)],
            control: ControlKind::PiecewiseConstant,
            u0: ex3_u0,
            ud: ex3_ud,
            reference: Reference::FineGrid { extra_levels: 2 },
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "example1" | "ex1" | "1" => Ok(Self::example1()),
            "example2" | "ex2" | "2" => Ok(Self::example2()),
            "example3" | "ex3" | "3" => Ok(Self::example3()),
            other => Err(Error::Config(format!("unknown example '{other}' (expected example1, example2 or example3)"))),
        }
    }

    /// Discrete problem with `m` time steps on spatial level `level`.
    pub fn build(&self, m: usize, level: usize) -> Result<ProblemData> {
        let mesh = build_structured_mesh(n_for_level(level), &self.omega)?;
        let ops = assemble(&mesh, self.c_diff, &self.control.spatial(self.bounds.is_some()))?;
        let u0 = ops.l2_project(self.u0);
        let ud = ops.l2_project(self.ud);
        ProblemData::new(ops, build_time_grid(m)?, self.alpha, self.delta0, u0, ud, self.bounds, self.control.clone())
    }
}

/// A finished solve.
pub struct Run {
    pub problem: ProblemData,
    pub report: SolveReport,
    pub iterate: Iterate,
    pub level: usize,
}

/// Start for `problem` from a solution on another discretization.
pub fn warm_start(prev: &Run, problem: &ProblemData) -> Result<Start> {
    let q = errors::transfer_control(&prev.problem, &prev.iterate.q, problem)?;
    Ok(Start { nu: prev.report.nu, q, mu: prev.report.mu, rho: prev.report.rho, radius: None })
}

/// Solves one configuration; writes `report.csv`, `history.csv`,
/// `control.csv` and `solve.log` into `out` if given.
pub fn run_example(cfg: &ExampleConfig, m: usize, level: usize, opts: &SolverOptions, start: Option<Start>, out: Option<&Path>) -> Result<Run> {
    let problem = cfg.build(m, level)?;
    let start = start.unwrap_or_else(|| Start::default_for(&problem));
    log::info!(
        "{}: M={m} level={level} N={} control={} alpha={}",
        cfg.name,
        problem.ops.mesh.num_nodes(),
        cfg.control.name(),
        cfg.alpha
    );
    let (report, iterate) = optimizer::solve(&problem, start, opts)?;
    let run = Run { problem, report, iterate, level };
    if let Some(dir) = out {
        output::write_run_artifacts(dir, cfg, &run)?;
    }
    Ok(run)
}
