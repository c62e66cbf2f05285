//! SSC sweeps over α and discretizations, and the value-function check of γ̄.

use super::{run_example, warm_start, ExampleConfig, Run};
use crate::error::Result;
use crate::optimizer::{self, SolverOptions, Start};
use crate::ssc::{self, SscOptions, SscReport};

/// One (α, M, level) cell of a sweep; failures are kept as messages.
pub struct SweepCell {
    pub alpha: f64,
    pub m: usize,
    pub level: usize,
    pub nodes: usize,
    pub nu: Option<f64>,
    /// terminal constraint value at the solution
    pub g: Option<f64>,
    pub outcome: std::result::Result<SscReport, String>,
}

/// Solves and checks every (α, grid) cell. `grids` holds (M, level) pairs;
/// within one α each grid is warm-started from the previous one.
pub fn ssc_sweep(cfg: &ExampleConfig, alphas: &[f64], grids: &[(usize, usize)], opts: &SolverOptions, ssc_opts: &SscOptions) -> Vec<SweepCell> {
    let mut cells = Vec::new();
    for &alpha in alphas {
        let cfg_a = ExampleConfig { alpha, ..cfg.clone() };
        let mut prev: Option<Run> = None;
        for &(m, level) in grids {
            let nodes = crate::mesh::n_for_level(level).pow(2) + 2 * crate::mesh::n_for_level(level) + 1;
            let solved = (|| -> Result<Run> {
                let start = match &prev {
                    Some(p) => Some(warm_start(p, &cfg_a.build(m, level)?)?),
                    None => None,
                };
                run_example(&cfg_a, m, level, opts, start, None)
            })();
            let cell = match solved {
                Ok(run) => {
                    let outcome = ssc::verify(&run.problem, &run.iterate, run.report.mu, ssc_opts).map_err(|e| e.to_string());
                    let nu = Some(run.report.nu);
                    let g = Some(run.report.g);
                    prev = Some(run);
                    SweepCell { alpha, m, level, nodes, nu, g, outcome }
                }
                Err(e) => {
                    log::warn!("sweep cell alpha={alpha} M={m} level={level} failed: {e}");
                    SweepCell { alpha, m, level, nodes, nu: None, g: None, outcome: Err(e.to_string()) }
                }
            };
            cells.push(cell);
        }
    }
    cells
}

/// Second difference [V(ν̄+s) − 2V(ν̄) + V(ν̄−s)]/s² of the value function
/// V(ν) = min{j(ν, q) : g(ν, q) ≤ 0}, each V from a fixed-ν solve started at
/// the solution. Returns the difference quotient and the three values.
pub fn value_function_curvature(run: &Run, s: f64, opts: &SolverOptions) -> Result<(f64, [f64; 3])> {
    let fixed = SolverOptions { fix_nu: true, ..opts.clone() };
    let mut v = [0.0; 3];
    for (i, nu) in [run.report.nu - s, run.report.nu, run.report.nu + s].into_iter().enumerate() {
        let start = Start { nu, q: run.iterate.q.clone(), mu: run.report.mu, rho: run.report.rho, radius: None };
        let (rep, _) = optimizer::solve(&run.problem, start, &fixed)?;
        v[i] = rep.j;
    }
    Ok(((v[2] - 2.0 * v[1] + v[0]) / (s * s), v))
}
