//! dG(0) time stepping on the reference interval (0, 1).
//!
//! Every forward equation has the form
//! `(M + ν k_m c A) U_m = M U_{m−1} + L_m` and every backward equation
//! `(M + ν k_m c A) Z_m = M Z_{m+1} + L_m` (with `Z_{M+1}` replaced by a
//! terminal load), so all solvers below are thin wrappers around two generic
//! sweeps that take the per-step load `L_m` as a callback.

use crate::controldisc::ControlFunction;
use crate::error::{Error, Result};
use crate::fem::{check_len, FemOperators};
use crate::linalg::axpy;
use crate::mesh::TimeGrid;

/// Piecewise constant in time: `values[m]` is the value on the interval
/// (t_m, t_{m+1}] (0-based), i.e. u(t_{m+1}).
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub values: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
}

impl Trajectory {
    pub fn zeros(intervals: usize, n: usize) -> Trajectory {
        Trajectory { values: vec![vec![0.0; n]; intervals], initial: vec![0.0; n] }
    }

    pub fn terminal(&self) -> &[f64] {
        self.values.last().map(|v| v.as_slice()).unwrap_or(&self.initial)
    }

    pub fn intervals(&self) -> usize {
        self.values.len()
    }
}

fn check_nu(nu: f64) -> Result<()> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::Domain(format!("nu must be positive, got {nu}")));
    }
    Ok(())
}

fn check_control(ops: &FemOperators, grid: &TimeGrid, q: &ControlFunction) -> Result<()> {
    check_len("control intervals", grid.num_intervals(), q.intervals)?;
    check_len("control dimension", ops.control.dim(), q.dim)
}

fn check_traj(ops: &FemOperators, grid: &TimeGrid, t: &Trajectory) -> Result<()> {
    check_len("trajectory intervals", grid.num_intervals(), t.intervals())?;
    check_len("trajectory dofs", ops.num_interior(), t.terminal().len())
}

/// Forward sweep with initial value `initial` and per-step loads added by
/// `load(m, rhs)`; each step calls `visit(m, U_m)` after solving.
pub fn forward_sweep<L, V>(ops: &FemOperators, grid: &TimeGrid, nu: f64, initial: &[f64], mut load: L, mut visit: V) -> Result<()>
where
    L: FnMut(usize, &mut [f64]),
    V: FnMut(usize, &[f64]),
{
    check_nu(nu)?;
    check_len("initial value", ops.num_interior(), initial.len())?;
    let mut prev = initial.to_vec();
    let mut rhs = vec![0.0; prev.len()];
    for m in 0..grid.num_intervals() {
        let factor = ops.step_factor(nu * grid.k[m])?;
        ops.m.mul_vec_into(&prev, &mut rhs);
        load(m, &mut rhs);
        factor.solve_in_place(&mut rhs);
        std::mem::swap(&mut prev, &mut rhs);
        visit(m, &prev);
    }
    Ok(())
}

/// Backward sweep: the last step solves with right side `terminal_load`
/// plus its load; `visit` is called in reverse order m = M−1, …, 0.
pub fn backward_sweep<L, V>(ops: &FemOperators, grid: &TimeGrid, nu: f64, terminal_load: &[f64], mut load: L, mut visit: V) -> Result<()>
where
    L: FnMut(usize, &mut [f64]),
    V: FnMut(usize, &[f64]),
{
    check_nu(nu)?;
    check_len("terminal load", ops.num_interior(), terminal_load.len())?;
    let n = terminal_load.len();
    let mut next = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    let last = grid.num_intervals();
    for m in (0..last).rev() {
        let factor = ops.step_factor(nu * grid.k[m])?;
        if m + 1 == last {
            rhs.copy_from_slice(terminal_load);
        } else {
            ops.m.mul_vec_into(&next, &mut rhs);
        }
        load(m, &mut rhs);
        factor.solve_in_place(&mut rhs);
        std::mem::swap(&mut next, &mut rhs);
        visit(m, &next);
    }
    Ok(())
}

fn collect_forward<L: FnMut(usize, &mut [f64])>(ops: &FemOperators, grid: &TimeGrid, nu: f64, initial: Vec<f64>, load: L) -> Result<Trajectory> {
    let mut values = Vec::with_capacity(grid.num_intervals());
    forward_sweep(ops, grid, nu, &initial, load, |_, u| values.push(u.to_vec()))?;
    Ok(Trajectory { values, initial })
}

fn collect_backward<L: FnMut(usize, &mut [f64])>(ops: &FemOperators, grid: &TimeGrid, nu: f64, terminal_load: &[f64], load: L) -> Result<Trajectory> {
    let mut values = vec![Vec::new(); grid.num_intervals()];
    backward_sweep(ops, grid, nu, terminal_load, load, |m, z| values[m] = z.to_vec())?;
    Ok(Trajectory { values, initial: vec![0.0; terminal_load.len()] })
}

/// State equation: `(M + ν k_m c A) U_m = M U_{m−1} + ν k_m B q_m`, `U_0 = u0`.
pub fn solve_state(ops: &FemOperators, grid: &TimeGrid, nu: f64, q: &ControlFunction, u0: &[f64]) -> Result<Trajectory> {
    check_control(ops, grid, q)?;
    collect_forward(ops, grid, nu, u0.to_vec(), |m, rhs| ops.apply_b_add(nu * grid.k[m], q.block(m), rhs))
}

/// Linearized state in direction (δν, δq) at `base = S(ν, q)`:
/// source `k_m [δν (B q_m − c A U_m) + ν B δq_m]`, zero initial value.
pub fn solve_linearized_state(
    ops: &FemOperators,
    grid: &TimeGrid,
    nu: f64,
    q: &ControlFunction,
    base: &Trajectory,
    dnu: f64,
    dq: &ControlFunction,
) -> Result<Trajectory> {
    check_control(ops, grid, q)?;
    check_control(ops, grid, dq)?;
    check_traj(ops, grid, base)?;
    let zero = vec![0.0; ops.num_interior()];
    collect_forward(ops, grid, nu, zero, |m, rhs| linearized_load(ops, grid, nu, q, base, dnu, dq, m, rhs))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn linearized_load(
    ops: &FemOperators,
    grid: &TimeGrid,
    nu: f64,
    q: &ControlFunction,
    base: &Trajectory,
    dnu: f64,
    dq: &ControlFunction,
    m: usize,
    rhs: &mut [f64],
) {
    let k = grid.k[m];
    if dnu != 0.0 {
        ops.apply_b_add(dnu * k, q.block(m), rhs);
        ops.stiff_mul_add(-dnu * k, &base.values[m], rhs);
    }
    ops.apply_b_add(nu * k, dq.block(m), rhs);
}

/// Second linearized state for directions δ1, δ2 with first-order tangents
/// `du1`, `du2`: source `k_m [δν1 (B δq2 − c A δU2) + δν2 (B δq1 − c A δU1)]`.
#[allow(clippy::too_many_arguments)]
pub fn solve_second_linearized_state(
    ops: &FemOperators,
    grid: &TimeGrid,
    nu: f64,
    d1: (f64, &ControlFunction),
    d2: (f64, &ControlFunction),
    du1: &Trajectory,
    du2: &Trajectory,
) -> Result<Trajectory> {
    check_control(ops, grid, d1.1)?;
    check_control(ops, grid, d2.1)?;
    check_traj(ops, grid, du1)?;
    check_traj(ops, grid, du2)?;
    let zero = vec![0.0; ops.num_interior()];
    collect_forward(ops, grid, nu, zero, |m, rhs| {
        let k = grid.k[m];
        for (dnu, dq, du) in [(d1.0, d2.1, du2), (d2.0, d1.1, du1)] {
            if dnu != 0.0 {
                ops.apply_b_add(dnu * k, dq.block(m), rhs);
                ops.stiff_mul_add(-dnu * k, &du.values[m], rhs);
            }
        }
    })
}

/// Adjoint: `(M + ν k_M c A) Z_M = μ M (u_T − u_d)`,
/// `(M + ν k_m c A) Z_m = M Z_{m+1}`.
pub fn solve_adjoint(ops: &FemOperators, grid: &TimeGrid, nu: f64, mu: f64, u_terminal: &[f64], ud: &[f64]) -> Result<Trajectory> {
    check_len("terminal state", ops.num_interior(), u_terminal.len())?;
    check_len("desired state", ops.num_interior(), ud.len())?;
    let diff: Vec<f64> = u_terminal.iter().zip(ud).map(|(a, b)| mu * (a - b)).collect();
    let terminal_load = ops.mass_mul(&diff);
    collect_backward(ops, grid, nu, &terminal_load, |_, _| {})
}

/// Backward equation with terminal value `terminal` (as in the adjoint with
/// μ = 1, u_d = 0) and per-step source `ν k_m M source_m`.
pub fn solve_backward_with_source(ops: &FemOperators, grid: &TimeGrid, nu: f64, source: &Trajectory, terminal: &[f64]) -> Result<Trajectory> {
    check_traj(ops, grid, source)?;
    check_len("terminal value", ops.num_interior(), terminal.len())?;
    let terminal_load = ops.mass_mul(terminal);
    collect_backward(ops, grid, nu, &terminal_load, |m, rhs| ops.m.mul_vec_add(nu * grid.k[m], &source.values[m], rhs))
}

/// Backward equation whose per-step right side gets the raw loads
/// `loads[m]` (already in dual form) and terminal load `terminal_load`.
pub fn solve_backward_with_loads(ops: &FemOperators, grid: &TimeGrid, nu: f64, loads: &[Vec<f64>], terminal_load: &[f64]) -> Result<Trajectory> {
    check_len("load intervals", grid.num_intervals(), loads.len())?;
    collect_backward(ops, grid, nu, terminal_load, |m, rhs| axpy(1.0, &loads[m], rhs))
}
