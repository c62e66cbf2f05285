//! Refinement studies in time or space with experimental orders of
//! convergence.

use std::str::FromStr;

use serde::Serialize;

use super::analytic;
use super::errors::{control_error_discrete, control_error_separable, state_error_discrete};
use super::{run_example, warm_start, ExampleConfig, Reference, Run};
use crate::error::{Error, Result};
use crate::mesh::n_for_level;
use crate::optimizer::SolverOptions;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Time,
    Space,
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Axis> {
        match s {
            "time" => Ok(Axis::Time),
            "space" => Ok(Axis::Space),
            other => Err(Error::Config(format!("unknown axis '{other}' (expected time or space)"))),
        }
    }
}

/// Which discretizations to run. For the space axis `values` are spatial
/// levels and `fixed` is M; for the time axis `values` are numbers of time
/// steps and `fixed` is the spatial level.
#[derive(Clone, Debug)]
pub struct StudySpec {
    pub axis: Axis,
    pub values: Vec<usize>,
    pub fixed: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyRow {
    pub level: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub nodes: usize,
    pub nu: f64,
    pub err_nu: f64,
    pub err_q: f64,
    pub err_u: f64,
    pub eoc_nu: Option<f64>,
    pub eoc_q: Option<f64>,
    pub eoc_u: Option<f64>,
    /// terminal constraint value at the solution
    pub g: f64,
    pub seconds: f64,
}

pub struct StudyResult {
    pub rows: Vec<StudyRow>,
    pub reference_nu: f64,
    /// run on the finest study discretization
    pub finest: Run,
}

/// log(e_i/e_{i+1})/log(ratio) for consecutive errors; None where an error
/// is zero (or not finite).
pub fn compute_eoc(errors: &[f64], ratio: f64) -> Vec<Option<f64>> {
    errors
        .windows(2)
        .map(|w| {
            let ok = w[0] > 0.0 && w[1] > 0.0 && w[0].is_finite() && w[1].is_finite();
            ok.then(|| (w[0] / w[1]).ln() / ratio.ln())
        })
        .collect()
}

fn validate(spec: &StudySpec) -> Result<()> {
    if spec.values.len() < 2 {
        return Err(Error::Config("a study needs at least two discretizations".into()));
    }
    for w in spec.values.windows(2) {
        let nested = match spec.axis {
            Axis::Space => w[1] > w[0],
            Axis::Time => w[1] > w[0] && w[1] % w[0] == 0,
        };
        if !nested {
            return Err(Error::Config(format!("study values {:?} are not nested refinements", spec.values)));
        }
    }
    Ok(())
}

fn ratio(spec: &StudySpec, i: usize) -> f64 {
    match spec.axis {
        Axis::Space => (n_for_level(spec.values[i + 1]) / n_for_level(spec.values[i])) as f64,
        Axis::Time => (spec.values[i + 1] / spec.values[i]) as f64,
    }
}

fn is_example1_data(cfg: &ExampleConfig) -> bool {
    let e = ExampleConfig::example1();
    cfg.c_diff == e.c_diff && cfg.delta0 == e.delta0 && cfg.bounds.is_none() && cfg.u0 as usize == e.u0 as usize && cfg.ud as usize == e.ud as usize
}

/// Runs the study from coarse to fine (warm-started) and measures errors
/// against the configured reference. `reuse` may supply an already solved
/// discretization (matched by M and level).
pub fn convergence_study(cfg: &ExampleConfig, spec: &StudySpec, opts: &SolverOptions, reuse: Option<Run>) -> Result<StudyResult> {
    validate(spec)?;
    let mut reuse = reuse;
    let mut runs: Vec<Run> = Vec::new();
    for &v in &spec.values {
        let (m, level) = match spec.axis {
            Axis::Space => (spec.fixed, v),
            Axis::Time => (v, spec.fixed),
        };
        let matches = reuse.as_ref().is_some_and(|r| r.level == level && r.problem.intervals() == m);
        let run = if matches {
            reuse.take().expect("checked")
        } else {
            let start = match runs.last() {
                Some(prev) => {
                    let problem = cfg.build(m, level)?;
                    Some(warm_start(prev, &problem)?)
                }
                None => None,
            };
            run_example(cfg, m, level, opts, start, None)?
        };
        runs.push(run);
    }
    let mut rows = Vec::new();
    let reference_nu;
    match cfg.reference {
        Reference::Analytic => {
            if !is_example1_data(cfg) {
                return Err(Error::Config("the analytic reference needs the example-1 data".into()));
            }
            match spec.axis {
                Axis::Time => {
                    if cfg.alpha != 1.0 {
                        return Err(Error::Config("the closed-form solution assumes alpha = 1".into()));
                    }
                    reference_nu = analytic::nu_bar();
                    for r in &runs {
                        let p = &r.problem;
                        let e_q = control_error_separable(&p.ops, &p.grid, &r.iterate.q, &analytic::control_time, &analytic::phi)?;
                        let e_u = p.ops.l2_error(r.iterate.state.terminal(), |x| analytic::state(1.0, x));
                        rows.push(row(r, (r.report.nu - reference_nu).abs(), e_q, e_u));
                    }
                }
                Axis::Space => {
                    // time-discrete, space-exact solution at the same M
                    let modal = analytic::modal_reference(spec.fixed, cfg.alpha, cfg.c_diff, cfg.delta0);
                    reference_nu = modal.nu;
                    for r in &runs {
                        let p = &r.problem;
                        let time = |t: f64| modal.p[p.grid.interval_of(t)];
                        let e_q = control_error_separable(&p.ops, &p.grid, &r.iterate.q, &time, &analytic::phi)?;
                        let e_u = p.ops.l2_error(r.iterate.state.terminal(), |x| modal.y_terminal * analytic::phi(x));
                        rows.push(row(r, (r.report.nu - modal.nu).abs(), e_q, e_u));
                    }
                }
            }
        }
        Reference::FineGrid { extra_levels } => {
            let last = runs.last().expect("at least two runs");
            let (m, level) = match spec.axis {
                Axis::Space => (spec.fixed, last.level + extra_levels),
                Axis::Time => (last.problem.intervals() << extra_levels, spec.fixed),
            };
            let ref_opts = SolverOptions { tol_g: opts.tol_g * 0.01, tol_s: opts.tol_s * 0.01, ..opts.clone() };
            let problem = cfg.build(m, level)?;
            let start = warm_start(last, &problem)?;
            drop(problem);
            log::info!("{}: reference solve at M={m} level={level}", cfg.name);
            let reference = run_example(cfg, m, level, &ref_opts, Some(start), None)?;
            reference_nu = reference.report.nu;
            for r in &runs {
                let e_q = control_error_discrete(&r.problem, &r.iterate.q, &reference.problem, &reference.iterate.q)?;
                let e_u = state_error_discrete(&r.problem.ops, r.iterate.state.terminal(), &reference.problem.ops, reference.iterate.state.terminal());
                rows.push(row(r, (r.report.nu - reference_nu).abs(), e_q, e_u));
            }
        }
    }
    for i in 1..rows.len() {
        let rt = ratio(spec, i - 1);
        rows[i].eoc_nu = compute_eoc(&[rows[i - 1].err_nu, rows[i].err_nu], rt)[0];
        rows[i].eoc_q = compute_eoc(&[rows[i - 1].err_q, rows[i].err_q], rt)[0];
        rows[i].eoc_u = compute_eoc(&[rows[i - 1].err_u, rows[i].err_u], rt)[0];
    }
    for r in &rows {
        log::info!(
            "study level={} M={} N={} err_nu={:.3e} err_q={:.3e} err_u={:.3e} eoc_nu={:?} eoc_q={:?}",
            r.level,
            r.m,
            r.nodes,
            r.err_nu,
            r.err_q,
            r.err_u,
            r.eoc_nu,
            r.eoc_q
        );
    }
    let finest = runs.pop().expect("at least two runs");
    Ok(StudyResult { rows, reference_nu, finest })
}

fn row(r: &Run, err_nu: f64, err_q: f64, err_u: f64) -> StudyRow {
    StudyRow {
        level: r.level,
        m: r.problem.intervals(),
        nodes: r.problem.ops.mesh.num_nodes(),
        nu: r.report.nu,
        err_nu,
        err_q,
        err_u,
        eoc_nu: None,
        eoc_q: None,
        eoc_u: None,
        g: r.report.g,
        seconds: r.report.seconds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eoc_examples() {
        let e = compute_eoc(&[1.0, 0.5, 0.25], 2.0);
        assert!(e.iter().all(|v| (v.unwrap() - 1.0).abs() < 1e-15));
        let e = compute_eoc(&[1.0, 0.25, 0.0625], 2.0);
        assert!(e.iter().all(|v| (v.unwrap() - 2.0).abs() < 1e-15));
        assert_eq!(compute_eoc(&[1e-3, 1e-3], 2.0), vec![Some(0.0)]);
        assert_eq!(compute_eoc(&[1e-3, 0.0], 2.0), vec![None]);
    }

    #[test]
    fn rejects_non_nested_values() {
        let spec = StudySpec { axis: Axis::Time, values: vec![16, 24], fixed: 1 };
        assert!(matches!(validate(&spec), Err(Error::Config(_))));
        let spec = StudySpec { axis: Axis::Space, values: vec![2], fixed: 8 };
        assert!(validate(&spec).is_err());
        assert!("diagonal".parse::<Axis>().is_err());
    }

    #[test]
    fn example3_space_study_on_tiny_grids() {
        let cfg = ExampleConfig::example3();
        let spec = StudySpec { axis: Axis::Space, values: vec![0, 1], fixed: 4 };
        let res = convergence_study(&cfg, &spec, &SolverOptions::default(), None).unwrap();
        assert_eq!(res.rows.len(), 2);
        assert!(res.rows.iter().all(|r| r.err_nu >= 0.0 && r.err_q > 0.0 && r.err_u > 0.0));
        assert!(res.rows[0].eoc_q.is_none() && res.rows[1].eoc_q.is_some());
    }
}
