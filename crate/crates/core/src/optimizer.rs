//! Augmented Lagrangian outer loop for the terminal constraint g ≤ 0 and a
//! trust-region semismooth (projected) Newton inner solver in (ν, q).
//!
//! The inner problem minimizes
//! `𝓛_A = j + (max(0, μ + ρg)² − μ²)/(2ρ)` over ν ≥ ν_min and the control
//! box. Variables that sit (within ε) at a bound with the gradient pushing
//! outward form the active set; Newton steps are computed on the remaining
//! variables by Steihaug CG with the metric `diag(1, αν k_m D)` (D: diagonal
//! of the control mass, lumped for P1 controls).

use std::time::Instant;

use serde::Serialize;

use crate::controldisc::{self, ControlFunction};
use crate::error::{Error, Result};
use crate::krylov::{steihaug_cg, CgExit};
use crate::linalg::dot;
use crate::reduced::{Iterate, ProblemData};

/// Trust-region constants (recorded in every report).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TrustRegion {
    pub initial_radius: f64,
    pub accept_ratio: f64,
    pub shrink: f64,
    pub expand: f64,
    pub min_radius: f64,
}

impl Default for TrustRegion {
    fn default() -> Self {
        TrustRegion { initial_radius: 1.0, accept_ratio: 0.1, shrink: 0.25, expand: 2.0, min_radius: 1e-14 }
    }
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    /// |g| tolerance at convergence
    pub tol_g: f64,
    /// stationarity tolerance at convergence
    pub tol_s: f64,
    pub max_outer: usize,
    pub max_newton: usize,
    pub max_cg: usize,
    pub rho_factor: f64,
    pub decrease_factor: f64,
    pub rho_max: f64,
    pub nu_min: f64,
    pub trust_region: TrustRegion,
    /// keep ν fixed at its initial value (value-function evaluations)
    pub fix_nu: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_g: 1e-9,
            tol_s: 1e-8,
            max_outer: 40,
            max_newton: 200,
            max_cg: 300,
            rho_factor: 10.0,
            decrease_factor: 0.25,
            rho_max: 1e12,
            nu_min: 1e-6,
            trust_region: TrustRegion::default(),
            fix_nu: false,
        }
    }
}

/// Starting point and multiplier/penalty state.
#[derive(Clone, Debug)]
pub struct Start {
    pub nu: f64,
    pub q: ControlFunction,
    pub mu: f64,
    pub rho: f64,
    pub radius: Option<f64>,
}

impl Start {
    /// ν₀ = 1, q₀ = 0 clamped to the bounds, μ₀ = 0, ρ₀ = 10.
    pub fn default_for(problem: &ProblemData) -> Start {
        let q = controldisc::project_admissible(&problem.control_zeros(), problem.bounds);
        Start { nu: 1.0, q, mu: 0.0, rho: 10.0, radius: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OuterRecord {
    pub iteration: usize,
    pub nu: f64,
    pub g: f64,
    pub mu: f64,
    pub rho: f64,
    pub newton_iterations: usize,
    pub cg_iterations: usize,
    pub stationarity: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub nu: f64,
    pub mu: f64,
    pub rho: f64,
    pub g: f64,
    pub j: f64,
    pub stationarity: f64,
    pub hamiltonian_residual: f64,
    pub projection_residual: f64,
    pub multiplier_identity: f64,
    pub outer_iterations: usize,
    pub newton_iterations: usize,
    pub cg_iterations: usize,
    pub seconds: f64,
    pub converged: bool,
    pub trust_region: TrustRegion,
    pub final_radius: f64,
    pub history: Vec<OuterRecord>,
    #[serde(skip)]
    pub q: ControlFunction,
}

/// State of the multiplier iteration.
#[derive(Clone, Debug)]
pub struct AugLagState {
    pub mu: f64,
    pub rho: f64,
    pub last_g: Option<f64>,
}

/// μ ← max(0, μ + ρg); ρ grows by `factor` unless |g| dropped below
/// `decrease` times its previous value.
pub fn auglag_update(state: &AugLagState, g: f64, factor: f64, decrease: f64, rho_max: f64) -> AugLagState {
    let mu = (state.mu + state.rho * g).max(0.0);
    let stalled = match state.last_g {
        Some(prev) => g.abs() > decrease * prev.abs(),
        None => false,
    };
    let rho = if stalled { (state.rho * factor).min(rho_max) } else { state.rho };
    AugLagState { mu, rho, last_g: Some(g) }
}

/// Effective multiplier max(0, μ + ρg) of the augmented functional.
pub fn effective_multiplier(mu: f64, rho: f64, g: f64) -> f64 {
    (mu + rho * g).max(0.0)
}

fn augmented_value(problem: &ProblemData, it: &Iterate, mu: f64, rho: f64) -> f64 {
    // (max(0, μ+ρg)² − μ²)/(2ρ) without cancellation
    let g = it.g;
    let shift = if mu + rho * g >= 0.0 { g * (mu + 0.5 * rho * g) } else { -mu * mu / (2.0 * rho) };
    problem.eval_j(it.nu, &it.q) + shift
}

pub struct InnerStats {
    pub newton_iterations: usize,
    pub cg_iterations: usize,
    pub stationarity: f64,
    pub radius: f64,
}

/// Per-coefficient metric weights αν k_m D_i.
fn metric(problem: &ProblemData, nu: f64) -> Vec<f64> {
    let d = problem.ops.control.mass.lumped();
    let mut w = Vec::with_capacity(problem.intervals() * d.len());
    for m in 0..problem.intervals() {
        let s = problem.alpha * nu * problem.grid.k[m];
        w.extend(d.iter().map(|v| s * v));
    }
    w
}

struct Gradient {
    nu: f64,
    q: ControlFunction,
}

/// Stationarity |∂ν| (projected onto ν ≥ ν_min) plus the scaled projected
/// gradient norm in q.
fn stationarity(problem: &ProblemData, it: &Iterate, grad: &Gradient, weights: &[f64], opts: &SolverOptions) -> (f64, f64) {
    let chi_nu = if opts.fix_nu { 0.0 } else { (it.nu - (it.nu - grad.nu).max(opts.nu_min)).abs() };
    let mut s = 0.0;
    let mut winf = 0.0f64;
    for i in 0..it.q.len() {
        let q = it.q.values[i];
        let step = grad.q.values[i] / weights[i];
        let p = problem.bounds.map_or(q - step, |b| b.clamp(q - step));
        s += weights[i] / (problem.alpha * it.nu) * (q - p).powi(2);
        winf = winf.max((q - p).abs());
    }
    (chi_nu + s.sqrt(), winf)
}

/// Minimizes the augmented functional for fixed (μ, ρ) to stationarity `tol`.
pub fn inner_solve(problem: &ProblemData, mut it: Iterate, mu: f64, rho: f64, tol: f64, radius: f64, opts: &SolverOptions) -> Result<(Iterate, InnerStats)> {
    let tr = opts.trust_region;
    let mut radius = radius;
    let mut cg_total = 0;
    let mut rejections = 0;
    problem.ensure_adjoint(&mut it)?;
    let mut f = augmented_value(problem, &it, mu, rho);
    for newton in 0..=opts.max_newton {
        let mu_t = effective_multiplier(mu, rho, it.g);
        let (gn, gq) = problem.grad_l_at(&it, mu_t);
        let grad = Gradient { nu: gn, q: gq };
        let weights = metric(problem, it.nu);
        let (chi, winf) = stationarity(problem, &it, &grad, &weights, opts);
        if chi <= tol {
            return Ok((it, InnerStats { newton_iterations: newton, cg_iterations: cg_total, stationarity: chi, radius }));
        }
        if newton == opts.max_newton {
            return Err(Error::NonConvergence {
                stage: "Newton",
                iterations: newton,
                g_abs: it.g.abs(),
                stationarity: chi,
                history: format!("inner solver hit {} Newton iterations", opts.max_newton),
            });
        }
        // ε-active set (Bertsekas): near a bound with the gradient pointing out
        let n = it.q.len();
        let eps = problem.bounds.map_or(0.0, |b| (0.01 * (b.upper - b.lower)).min(winf));
        let mut free = vec![true; n + 1];
        let mut step_active = vec![0.0; n + 1];
        if let Some(b) = problem.bounds {
            for i in 0..n {
                let (q, gi) = (it.q.values[i], grad.q.values[i]);
                if (q <= b.lower + eps && gi > 0.0) || (q >= b.upper - eps && gi < 0.0) {
                    free[i + 1] = false;
                    step_active[i + 1] = b.clamp(q - gi / weights[i]) - q;
                }
            }
        }
        if opts.fix_nu || (it.nu <= opts.nu_min * (1.0 + 1e-12) && gn > 0.0) {
            free[0] = false;
        }
        let rank_one = if mu + rho * it.g > 0.0 { Some(problem.grad_g_at(&it)) } else { None };
        let hess_full = |v: &[f64]| -> Result<Vec<f64>> {
            let dq = ControlFunction { intervals: it.q.intervals, dim: it.q.dim, values: v[1..].to_vec() };
            let (mut hn, mut hq) = problem.hess_apply(&it, mu_t, v[0], &dq)?;
            if let Some((ggn, ggq)) = &rank_one {
                let s = rho * (ggn * v[0] + dot(&ggq.values, &dq.values));
                hn += s * ggn;
                hq.axpy(s, ggq);
            }
            let mut out = hq.values;
            out.insert(0, hn);
            Ok(out)
        };
        let prec = |r: &[f64]| -> Vec<f64> {
            let mut z = Vec::with_capacity(n + 1);
            z.push(r[0]);
            z.extend(r[1..].iter().zip(&weights).map(|(a, w)| a / w));
            z
        };
        // the move of the active variables is kept inside the trust region
        let active_norm = {
            let mut s = 0.0;
            for i in 0..n {
                s += weights[i] * step_active[i + 1] * step_active[i + 1];
            }
            s.sqrt()
        };
        if active_norm > radius {
            let t = radius / active_norm;
            step_active.iter_mut().for_each(|v| *v *= t);
        }
        let mut g_red = vec![0.0; n + 1];
        let mut active_pred = 0.0;
        if active_norm > 0.0 {
            let v = hess_full(&step_active)?;
            let lin: f64 = (1..=n).map(|i| grad.q.values[i - 1] * step_active[i]).sum();
            active_pred = -(lin + 0.5 * dot(&step_active, &v));
            for i in 0..=n {
                if free[i] {
                    g_red[i] = v[i];
                }
            }
        }
        if free[0] {
            g_red[0] += gn;
        }
        for i in 0..n {
            if free[i + 1] {
                g_red[i + 1] += grad.q.values[i];
            }
        }
        let hess = |v: &[f64]| -> Result<Vec<f64>> {
            let mut out = hess_full(v)?;
            out.iter_mut().zip(&free).for_each(|(o, &fr)| {
                if !fr {
                    *o = 0.0
                }
            });
            Ok(out)
        };
        let gnorm = dot(&g_red, &prec(&g_red)).sqrt();
        let cg_tol = (gnorm * gnorm.sqrt().min(0.1)).max(0.01 * tol);
        let cg = steihaug_cg(hess, prec, &g_red, radius, cg_tol, opts.max_cg)?;
        cg_total += cg.iterations;
        // model decrease of the combined step (active move plus free Newton step)
        let pred = -(dot(&g_red, &cg.step) + 0.5 * dot(&cg.step, &cg.h_step)) + active_pred;
        let step_norm = {
            let mut s = cg.step[0] * cg.step[0];
            for i in 0..n {
                s += weights[i] * cg.step[i + 1] * cg.step[i + 1];
            }
            s.sqrt()
        };
        // trial point, projected onto the bounds
        let nu_trial = if opts.fix_nu { it.nu } else { (it.nu + cg.step[0]).max(opts.nu_min) };
        let mut q_trial = it.q.clone();
        for i in 0..n {
            q_trial.values[i] += cg.step[i + 1] + step_active[i + 1];
        }
        let q_trial = controldisc::project_admissible(&q_trial, problem.bounds);
        let trial = problem.iterate(nu_trial, q_trial, false)?;
        let f_trial = augmented_value(problem, &trial, mu, rho);
        let ared = f - f_trial;
        let noise = 1e3 * f64::EPSILON * f.abs().max(1.0);
        let ratio = if pred <= noise { if ared >= -noise { 1.0 } else { -1.0 } } else { ared / pred };
        log::debug!(
            "newton={newton} nu={:.10} chi={chi:.3e} g={:.3e} cg={} exit={:?} pred={pred:.3e} ared={ared:.3e} ratio={ratio:.3} radius={radius:.3e}",
            it.nu,
            it.g,
            cg.iterations,
            cg.exit
        );
        if ratio > tr.accept_ratio {
            assert_admissible(problem, &trial, opts);
            it = trial;
            problem.ensure_adjoint(&mut it)?;
            f = f_trial;
            rejections = 0;
            if ratio > 0.75 && matches!(cg.exit, CgExit::Boundary | CgExit::NegativeCurvature) {
                radius *= tr.expand;
            } else if ratio < 0.25 {
                radius *= tr.shrink;
            }
        } else {
            radius = tr.shrink * radius.min(step_norm.max(tr.min_radius));
            rejections += 1;
            if rejections >= 3 {
                if let Some((next, fnext)) = projected_gradient_step(problem, &it, &grad, &weights, mu, rho, f, opts)? {
                    it = next;
                    problem.ensure_adjoint(&mut it)?;
                    f = fnext;
                    rejections = 0;
                    continue;
                }
            }
            if radius < tr.min_radius {
                return Err(Error::Stagnation { radius, nu: it.nu, stationarity: chi });
            }
        }
    }
    unreachable!("loop returns on the last Newton iteration")
}

fn assert_admissible(problem: &ProblemData, it: &Iterate, opts: &SolverOptions) {
    assert!(it.nu >= opts.nu_min, "nu below its floor");
    if let Some(b) = problem.bounds {
        assert!(it.q.values.iter().all(|&v| b.lower <= v && v <= b.upper), "control left the box");
    }
}

/// Armijo projected-gradient step along the metric-scaled gradient.
#[allow(clippy::too_many_arguments)]
fn projected_gradient_step(
    problem: &ProblemData,
    it: &Iterate,
    grad: &Gradient,
    weights: &[f64],
    mu: f64,
    rho: f64,
    f: f64,
    opts: &SolverOptions,
) -> Result<Option<(Iterate, f64)>> {
    let mut s = 1.0;
    for _ in 0..40 {
        let nu = if opts.fix_nu { it.nu } else { (it.nu - s * grad.nu).max(opts.nu_min) };
        let mut q = it.q.clone();
        for i in 0..q.len() {
            q.values[i] -= s * grad.q.values[i] / weights[i];
        }
        let q = controldisc::project_admissible(&q, problem.bounds);
        let mut decrease = grad.nu * (it.nu - nu);
        for i in 0..q.len() {
            decrease += grad.q.values[i] * (it.q.values[i] - q.values[i]);
        }
        let trial = problem.iterate(nu, q, false)?;
        let ft = augmented_value(problem, &trial, mu, rho);
        if ft <= f - 1e-4 * decrease && decrease > 0.0 {
            assert_admissible(problem, &trial, opts);
            return Ok(Some((trial, ft)));
        }
        s *= 0.5;
    }
    Ok(None)
}

/// Solves the discrete time-optimal control problem from `start`.
pub fn solve(problem: &ProblemData, start: Start, opts: &SolverOptions) -> Result<(SolveReport, Iterate)> {
    let clock = Instant::now();
    if !(start.nu > 0.0) {
        return Err(Error::Domain(format!("initial nu must be positive, got {}", start.nu)));
    }
    let q0 = controldisc::project_admissible(&start.q, problem.bounds);
    let mut it = problem.iterate(start.nu.max(opts.nu_min), q0, true)?;
    let mut state = AugLagState { mu: start.mu.max(0.0), rho: start.rho, last_g: None };
    let mut radius = start.radius.unwrap_or(opts.trust_region.initial_radius);
    let mut history = Vec::new();
    let (mut newton_total, mut cg_total) = (0, 0);
    let mut g_prev = it.g;
    for outer in 1..=opts.max_outer {
        let tol_inner = opts.tol_s.max(0.1 * g_prev.abs());
        let (next, stats) = inner_solve(problem, it, state.mu, state.rho, tol_inner, radius.max(1e-3), opts)?;
        it = next;
        radius = stats.radius;
        newton_total += stats.newton_iterations;
        cg_total += stats.cg_iterations;
        let g = it.g;
        let mu_eff = effective_multiplier(state.mu, state.rho, g);
        history.push(OuterRecord {
            iteration: outer,
            nu: it.nu,
            g,
            mu: mu_eff,
            rho: state.rho,
            newton_iterations: stats.newton_iterations,
            cg_iterations: stats.cg_iterations,
            stationarity: stats.stationarity,
        });
        log::info!(
            "outer={outer} nu={:.12} g={g:.3e} mu={mu_eff:.6e} rho={:.1e} newton={} cg={} stationarity={:.3e}",
            it.nu,
            state.rho,
            stats.newton_iterations,
            stats.cg_iterations,
            stats.stationarity
        );
        if !opts.fix_nu && it.nu <= opts.nu_min * (1.0 + 1e-12) {
            return Err(Error::Degenerate { nu_min: opts.nu_min });
        }
        let done = g.abs() < opts.tol_g && stats.stationarity <= opts.tol_s;
        state = auglag_update(&state, g, opts.rho_factor, opts.decrease_factor, opts.rho_max);
        g_prev = g;
        if done {
            let report = finish(problem, &it, &state, history, newton_total, cg_total, stats.stationarity, clock, radius, opts);
            return Ok((report, it));
        }
    }
    let last = history.last().cloned();
    Err(Error::NonConvergence {
        stage: "outer",
        iterations: opts.max_outer,
        g_abs: last.as_ref().map_or(f64::NAN, |r| r.g.abs()),
        stationarity: last.as_ref().map_or(f64::NAN, |r| r.stationarity),
        history: serde_json::to_string(&history).unwrap_or_default(),
    })
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &ProblemData,
    it: &Iterate,
    state: &AugLagState,
    history: Vec<OuterRecord>,
    newton: usize,
    cg: usize,
    stationarity: f64,
    clock: Instant,
    radius: f64,
    opts: &SolverOptions,
) -> SolveReport {
    let mu = state.mu;
    let (gn, _) = problem.grad_g_at(it);
    let (jn, _) = problem.grad_j(it.nu, &it.q);
    let identity = if gn != 0.0 { (mu - jn / (-gn)).abs() / mu.abs().max(f64::MIN_POSITIVE) } else { f64::INFINITY };
    SolveReport {
        nu: it.nu,
        mu,
        rho: state.rho,
        g: it.g,
        j: problem.eval_j(it.nu, &it.q),
        stationarity,
        hamiltonian_residual: problem.hamiltonian_residual(it, mu),
        projection_residual: problem.projection_residual(it, mu),
        multiplier_identity: identity,
        outer_iterations: history.len(),
        newton_iterations: newton,
        cg_iterations: cg,
        seconds: clock.elapsed().as_secs_f64(),
        converged: it.g.abs() < opts.tol_g && stationarity <= opts.tol_s,
        trust_region: opts.trust_region,
        final_radius: radius,
        history,
        q: it.q.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controldisc::{Bounds, ControlKind};
    use crate::fem::assemble;
    use crate::mesh::{build_structured_mesh, build_time_grid, Rect};
    use std::f64::consts::PI;

    fn ex1(n: usize, m: usize) -> ProblemData {
        let mesh = build_structured_mesh(n, &[Rect::unit()]).unwrap();
        let kind = ControlKind::Variational;
        let ops = assemble(&mesh, 1.0 / (2.0 * PI * PI), &kind.spatial(false)).unwrap();
        let u0 = ops.l2_project(|p| (PI * p[0]).sin() * (PI * p[1]).sin());
        let ud: Vec<f64> = u0.iter().map(|v| -2.0 * v).collect();
        ProblemData::new(ops, build_time_grid(m).unwrap(), 1.0, 0.5, u0, ud, None, kind).unwrap()
    }

    fn ex3(n: usize, m: usize) -> ProblemData {
        let mesh = build_structured_mesh(n, &[Rect::new(0.0, 0.75, 0.0, 0.75)]).unwrap();
        let kind = ControlKind::PiecewiseConstant;
        let ops = assemble(&mesh, 0.03, &kind.spatial(true)).unwrap();
        let u0 = ops.l2_project(|p| 4.0 * (PI * p[0] * p[0]).sin() * (PI * p[1]).sin().powi(3));
        let ud = ops.l2_project(|p| -2.0 * p[0].min(1.0 - p[0]).min(p[1]).min(1.0 - p[1]));
        let bounds = Some(Bounds::new(-5.0, 0.0).unwrap());
        ProblemData::new(ops, build_time_grid(m).unwrap(), 1e-2, 0.1, u0, ud, bounds, kind).unwrap()
    }

    #[test]
    fn multiplier_update_rules() {
        let s = AugLagState { mu: 0.0, rho: 1.0, last_g: None };
        assert_eq!(auglag_update(&s, -0.3, 10.0, 0.25, 1e12).mu, 0.0);
        let s = AugLagState { mu: 1.0, rho: 10.0, last_g: None };
        let n = auglag_update(&s, 0.05, 10.0, 0.25, 1e12);
        assert!((n.mu - 1.5).abs() < 1e-15);
        assert_eq!(n.rho, 10.0);
        let s = AugLagState { mu: 1.0, rho: 10.0, last_g: Some(0.06) };
        assert_eq!(auglag_update(&s, 0.05, 10.0, 0.25, 1e12).rho, 100.0);
        let s = AugLagState { mu: 1.0, rho: 10.0, last_g: Some(1.0) };
        assert_eq!(auglag_update(&s, 0.05, 10.0, 0.25, 1e12).rho, 10.0);
    }

    #[test]
    fn solves_ex1_coarse_with_optimality_system() {
        let p = ex1(4, 16);
        let opts = SolverOptions::default();
        let (rep, it) = solve(&p, Start::default_for(&p), &opts).unwrap();
        assert!(rep.converged);
        assert!(rep.g.abs() < 1e-9);
        assert!(rep.mu >= 1e-8);
        assert!(rep.multiplier_identity < 1e-6, "{}", rep.multiplier_identity);
        assert!(rep.hamiltonian_residual <= opts.tol_s);
        assert!(rep.projection_residual <= opts.tol_s, "{}", rep.projection_residual);
        assert!((rep.nu - 2f64.ln()).abs() < 0.1, "{}", rep.nu);
        // restart at the solution: nothing left to do
        let (_, stats) = inner_solve(&p, it, rep.mu, 1e-14, opts.tol_s, 1.0, &opts).unwrap();
        assert_eq!(stats.newton_iterations, 0);
    }

    #[test]
    fn frozen_multiplier_surrogate_converges_quickly() {
        let p = ex1(4, 16);
        let (rep, _) = solve(&p, Start::default_for(&p), &SolverOptions::default()).unwrap();
        // ρ → 0 turns 𝓛_A into j + μ g with μ frozen
        let start = p.iterate(1.0, p.control_zeros(), true).unwrap();
        let opts = SolverOptions::default();
        let (it, stats) = inner_solve(&p, start, rep.mu, 1e-14, 1e-11, 1.0, &opts).unwrap();
        assert!(stats.newton_iterations <= 10, "{}", stats.newton_iterations);
        assert!(p.projection_residual(&it, rep.mu) < 1e-10);
    }

    #[test]
    fn respects_bounds_on_ex3_coarse() {
        let p = ex3(8, 10);
        let (rep, it) = solve(&p, Start::default_for(&p), &SolverOptions::default()).unwrap();
        assert!(rep.converged);
        assert!(it.q.values.iter().all(|&v| (-5.0..=0.0).contains(&v)));
        assert!(it.q.values.iter().any(|&v| v == -5.0 || v == 0.0));
        assert!(rep.projection_residual <= 1e-8, "{}", rep.projection_residual);
        assert!(rep.mu > 0.0);
    }

    #[test]
    fn fixed_nu_mode_keeps_time() {
        let p = ex1(4, 8);
        let opts = SolverOptions { fix_nu: true, ..Default::default() };
        let start = Start { nu: 0.9, ..Start::default_for(&p) };
        let (rep, _) = solve(&p, start, &opts).unwrap();
        assert_eq!(rep.nu, 0.9);
        assert!(rep.g.abs() < 1e-9);
    }

    #[test]
    fn rejects_nonpositive_start() {
        let p = ex1(4, 4);
        let start = Start { nu: 0.0, ..Start::default_for(&p) };
        assert!(matches!(solve(&p, start, &SolverOptions::default()), Err(Error::Domain(_))));
    }
}
