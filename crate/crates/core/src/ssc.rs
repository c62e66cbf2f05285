//! Numerical check of the second-order sufficient condition at a discrete
//! solution.
//!
//! The curvature direction (1, δq̄) is obtained from the saddle-point system
//! on the free control dofs
//!
//! ```text
//! [ H_FF  d_F ] [δq̄]   [ −r_mix|_F ]
//! [ d_Fᵀ   0  ] [δμ̄] = [ −∂νg      ]
//! ```
//!
//! (H = ∂²_qq 𝓛, d = ∂_q g, r_mix = ∂ν∂q 𝓛, all in dual form), solved by
//! preconditioned MINRES with matrix-free Hessian applications. Then
//! γ̄ = ∂²𝓛[1, δq̄]² and κ̄ ≥ (γ̄/3)·min{αν̄/(γ̄ + c₁), 1}.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::controldisc::{self, ControlFunction};
use crate::error::Result;
use crate::krylov::minres;
use crate::linalg::dot;
use crate::reduced::{Iterate, ProblemData};

#[derive(Clone, Copy, Debug)]
pub struct SscOptions {
    /// relative threshold on the switching function (times its max norm)
    pub eps_act: f64,
    /// distance to a bound that counts as "at the bound"
    pub eps_b: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// random pairs for the symmetry check of the KKT operator
    pub symmetry_samples: usize,
    pub seed: u64,
    /// run the derivative FD gates at the point before the check
    pub self_check: bool,
}

impl Default for SscOptions {
    fn default() -> Self {
        SscOptions { eps_act: 1e-6, eps_b: 1e-10, tol: 1e-8, max_iter: 2000, symmetry_samples: 1, seed: 7, self_check: false }
    }
}

/// Control dofs that are not strongly active.
#[derive(Clone, Debug)]
pub struct FreeSet {
    pub free: Vec<bool>,
    pub eps_act: f64,
}

impl FreeSet {
    pub fn count(&self) -> usize {
        self.free.iter().filter(|&&f| f).count()
    }

    pub fn fraction(&self) -> f64 {
        if self.free.is_empty() {
            return 0.0;
        }
        self.count() as f64 / self.free.len() as f64
    }

    fn restrict(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.free).filter(|(_, &f)| f).map(|(x, _)| *x).collect()
    }

    fn extend(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.free.len()];
        let mut it = v.iter();
        for (o, &f) in out.iter_mut().zip(&self.free) {
            if f {
                *o = *it.next().expect("length matches free count");
            }
        }
        out
    }
}

/// Pointwise switching function αq + B*z (z the μ-adjoint) as coefficients
/// of the control space.
pub fn switching_function(problem: &ProblemData, it: &Iterate, mu: f64) -> ControlFunction {
    let z = it.adjoint.as_ref().expect("adjoint evaluated");
    let mut out = it.q.scaled(problem.alpha);
    for m in 0..problem.intervals() {
        let dual = problem.ops.apply_bstar(&z.values[m]).expect("adjoint matches mesh");
        let rep = problem.ops.control.mass.solve(&dual);
        for (o, r) in out.block_mut(m).iter_mut().zip(rep) {
            *o += mu * r;
        }
    }
    out
}

/// A dof is strongly active if it sits at a bound (within ε_b) and the
/// switching function exceeds ε_act·max|αq + B*z| there; all others are free.
pub fn build_free_set(problem: &ProblemData, it: &Iterate, mu: f64, opts: &SscOptions) -> FreeSet {
    let n = it.q.len();
    let Some(b) = problem.bounds else {
        return FreeSet { free: vec![true; n], eps_act: 0.0 };
    };
    let s = switching_function(problem, it, mu);
    let scale = s.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let eps_act = opts.eps_act * scale;
    let free = (0..n)
        .map(|i| {
            let q = it.q.values[i];
            let at_bound = q <= b.lower + opts.eps_b || q >= b.upper - opts.eps_b;
            !(at_bound && s.values[i].abs() > eps_act)
        })
        .collect();
    FreeSet { free, eps_act }
}

/// Matrix-free saddle-point operator on (δq|_F, δμ).
pub struct Kkt<'a> {
    problem: &'a ProblemData,
    it: &'a Iterate,
    mu: f64,
    free: &'a FreeSet,
    d: Vec<f64>,
}

impl<'a> Kkt<'a> {
    pub fn new(problem: &'a ProblemData, it: &'a Iterate, mu: f64, free: &'a FreeSet) -> Kkt<'a> {
        let (_, dg) = problem.grad_g_at(it);
        let d = free.restrict(&dg.values);
        Kkt { problem, it, mu, free, d }
    }

    pub fn dim(&self) -> usize {
        self.d.len() + 1
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let nf = self.d.len();
        let (p, dmu) = (&x[..nf], x[nf]);
        let full = ControlFunction { intervals: self.it.q.intervals, dim: self.it.q.dim, values: self.free.extend(p) };
        let (_, hq) = self.problem.hess_apply(self.it, self.mu, 0.0, &full)?;
        let mut y = self.free.restrict(&hq.values);
        for (yi, di) in y.iter_mut().zip(&self.d) {
            *yi += dmu * di;
        }
        y.push(dot(&self.d, p));
        Ok(y)
    }

    /// Block-diagonal preconditioner: αν k D on the free dofs and the Schur
    /// complement d_Fᵀ(αν k D_F)⁻¹d_F for δμ.
    fn weights(&self) -> (Vec<f64>, f64) {
        let p = self.problem;
        let lumped = p.ops.control.mass.lumped();
        let mut w = Vec::with_capacity(self.it.q.len());
        for m in 0..p.intervals() {
            let s = p.alpha * self.it.nu * p.grid.k[m];
            w.extend(lumped.iter().map(|v| s * v));
        }
        let wf = self.free.restrict(&w);
        let schur: f64 = self.d.iter().zip(&wf).map(|(d, w)| d * d / w).sum();
        (wf, if schur > 0.0 { schur } else { 1.0 })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SscReport {
    pub alpha: f64,
    pub intervals: usize,
    pub nodes: usize,
    pub nu: f64,
    pub mu: f64,
    pub gamma: f64,
    /// None when γ̄ ≤ 0 (no positive curvature found)
    pub kappa_lower: Option<f64>,
    pub c1: f64,
    pub d2nu: f64,
    pub mixed_norm: f64,
    pub dq_norm: f64,
    pub dmu: f64,
    pub minres_iterations: usize,
    pub residual: f64,
    pub minres_converged: bool,
    pub inactive_fraction: f64,
    pub constraint_row_residual: f64,
    pub symmetry_error: f64,
    /// γ̄ rebuilt from the KKT rows minus the direct forward value
    pub gamma_identity_gap: f64,
    /// bound on that gap implied by the MINRES residual
    pub gamma_identity_bound: f64,
    #[serde(skip)]
    pub dq: ControlFunction,
}

/// κ̄ lower bound (γ̄/3)·min{αν̄/(γ̄ + c₁), 1}; None if γ̄ ≤ 0.
pub fn kappa_lower(gamma: f64, c1: f64, alpha: f64, nu: f64) -> Option<f64> {
    (gamma > 0.0).then(|| gamma / 3.0 * (alpha * nu / (gamma + c1)).min(1.0))
}

/// c₁ = |∂²ν𝓛| + 2‖∂ν∂q𝓛‖²/(αν̄) with the L²(I×ω) norm of the mixed derivative.
pub fn c1(d2nu: f64, mixed_norm: f64, alpha: f64, nu: f64) -> f64 {
    d2nu.abs() + 2.0 * mixed_norm * mixed_norm / (alpha * nu)
}

/// Dual norm of a control functional over the controls supported on the
/// free set: sup ⟨r, δq⟩/‖δq‖ with δq vanishing off F. This is the norm of
/// the mixed derivative that enters c1, since coercivity is only needed on
/// the critical cone.
pub fn restricted_dual_norm(problem: &ProblemData, dual: &ControlFunction, free: &FreeSet) -> Result<f64> {
    if free.free.iter().all(|&f| f) {
        return controldisc::norm(&problem.ops, &problem.grid, &controldisc::riesz(&problem.ops, &problem.grid, dual));
    }
    let mass = &problem.ops.control.mass;
    let dim = dual.dim;
    let mut s = 0.0;
    for m in 0..dual.intervals {
        let mask = &free.free[m * dim..(m + 1) * dim];
        let r: Vec<f64> = dual.block(m).iter().zip(mask).filter(|(_, &f)| f).map(|(v, _)| *v).collect();
        if r.is_empty() {
            continue;
        }
        // r_F · M_FF⁻¹ r_F, a diagonal division or an SPD Krylov solve
        let x = match mass {
            crate::fem::ControlMass::Diagonal(d) => r.iter().zip(d.iter().zip(mask).filter(|(_, &f)| f)).map(|(a, (w, _))| a / w).collect(),
            crate::fem::ControlMass::Consistent { .. } => {
                let sub = FreeSet { free: mask.to_vec(), eps_act: free.eps_act };
                let op = |v: &[f64]| -> Result<Vec<f64>> { Ok(sub.restrict(&mass.apply(&sub.extend(v)))) };
                minres(op, |v: &[f64]| v.to_vec(), &r, None, 1e-12, 10 * r.len() + 100)?.x
            }
        };
        s += dot(&r, &x) / problem.grid.k[m];
    }
    Ok(s.sqrt())
}

/// γ̄ = ∂²𝓛[1, δq̄]² by forward solves.
pub fn gamma_bar(problem: &ProblemData, it: &Iterate, mu: f64, dq: &ControlFunction) -> Result<f64> {
    problem.quadratic_form_l(it.nu, &it.q, mu, 1.0, dq)
}

/// Runs the full check at a converged iterate with multiplier μ.
pub fn verify(problem: &ProblemData, it: &Iterate, mu: f64, opts: &SscOptions) -> Result<SscReport> {
    if opts.self_check {
        let checks = crate::selfcheck::derivative_gates(problem, it.nu, &it.q, mu, opts.seed)?;
        for c in &checks {
            log::info!("self-check {c}");
        }
        crate::selfcheck::require_all(&checks)?;
    }
    let free = build_free_set(problem, it, mu, opts);
    let (mixed, d2nu) = problem.hess_l_mixed_representer(it.nu, &it.q, mu)?;
    let mixed_norm = restricted_dual_norm(problem, &mixed, &free)?;
    let (gnu, _) = problem.grad_g_at(it);
    let kkt = Kkt::new(problem, it, mu, &free);
    let symmetry_error = symmetry_check(&kkt, opts.symmetry_samples, opts.seed)?;
    let mut rhs: Vec<f64> = free.restrict(&mixed.values).iter().map(|v| -v).collect();
    rhs.push(-gnu);
    let (wf, schur) = kkt.weights();
    let prec = |r: &[f64]| -> Vec<f64> {
        let mut z: Vec<f64> = r[..wf.len()].iter().zip(&wf).map(|(a, w)| a / w).collect();
        z.push(r[wf.len()] / schur);
        z
    };
    let sol = if free.count() == 0 {
        // trivial critical cone: only δμ remains and the constraint row cannot be met
        crate::krylov::MinresResult { x: vec![0.0], iterations: 0, relative_residual: 1.0, converged: false }
    } else {
        minres(|x: &[f64]| kkt.apply(x), prec, &rhs, None, opts.tol, opts.max_iter)?
    };
    let nf = free.count();
    let dq = ControlFunction { intervals: it.q.intervals, dim: it.q.dim, values: free.extend(&sol.x[..nf]) };
    let dmu = sol.x[nf];
    let gamma = gamma_bar(problem, it, mu, &dq)?;
    let c1v = c1(d2nu, mixed_norm, problem.alpha, it.nu);
    // γ̄ from the KKT rows: ∂²ν𝓛 + ⟨r_mix, δq̄⟩ + δμ̄ ∂νg
    let gamma_kkt = d2nu + dot(&mixed.values, &dq.values) + dmu * gnu;
    let rhs_norm = dot(&rhs, &rhs).sqrt();
    let x_norm = dot(&sol.x, &sol.x).sqrt();
    let constraint_row = (dot(&kkt.d, &sol.x[..nf]) + gnu).abs();
    log::info!(
        "ssc alpha={} gamma={gamma:.4e} minres={} residual={:.2e} inactive={:.3}",
        problem.alpha,
        sol.iterations,
        sol.relative_residual,
        free.fraction()
    );
    Ok(SscReport {
        alpha: problem.alpha,
        intervals: problem.intervals(),
        nodes: problem.ops.mesh.num_nodes(),
        nu: it.nu,
        mu,
        gamma,
        kappa_lower: kappa_lower(gamma, c1v, problem.alpha, it.nu),
        c1: c1v,
        d2nu,
        mixed_norm,
        dq_norm: problem.norm_sq(&dq).sqrt(),
        dmu,
        minres_iterations: sol.iterations,
        residual: sol.relative_residual,
        minres_converged: sol.converged && sol.relative_residual <= opts.tol.max(1e-14) * 10.0,
        inactive_fraction: free.fraction(),
        constraint_row_residual: constraint_row,
        symmetry_error,
        gamma_identity_gap: (gamma - gamma_kkt).abs(),
        gamma_identity_bound: sol.relative_residual * rhs_norm * x_norm,
        dq,
    })
}

/// Max relative asymmetry |⟨Kx, y⟩ − ⟨x, Ky⟩| / (‖Kx‖‖y‖ + ‖x‖‖Ky‖) over
/// random pairs.
pub fn symmetry_check(kkt: &Kkt<'_>, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x: Vec<f64> = (0..kkt.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..kkt.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (kx, ky) = (kkt.apply(&x)?, kkt.apply(&y)?);
        let scale = dot(&kx, &kx).sqrt() * dot(&y, &y).sqrt() + dot(&x, &x).sqrt() * dot(&ky, &ky).sqrt();
        worst = worst.max((dot(&kx, &y) - dot(&x, &ky)).abs() / scale.max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

/// Aligned text table with one (γ̄, κ̄) column pair per α and one row per
/// (M, N) discretization, plus the inactive fraction per α.
pub fn render_table(reports: &[SscReport]) -> String {
    let mut alphas: Vec<f64> = Vec::new();
    let mut rows: Vec<(usize, usize)> = Vec::new();
    for r in reports {
        if !alphas.iter().any(|a| *a == r.alpha) {
            alphas.push(r.alpha);
        }
        if !rows.contains(&(r.intervals, r.nodes)) {
            rows.push((r.intervals, r.nodes));
        }
    }
    alphas.sort_by(|a, b| b.total_cmp(a));
    rows.sort();
    let mut out = String::new();
    let _ = write!(out, "{:>6} {:>7}", "M", "N");
    for a in &alphas {
        let _ = write!(out, " | {:>10} {:>10}", format!("g a={a:.0e}"), "kappa");
    }
    out.push('\n');
    for &(m, n) in &rows {
        let _ = write!(out, "{m:>6} {n:>7}");
        for a in &alphas {
            match reports.iter().find(|r| r.alpha == *a && r.intervals == m && r.nodes == n) {
                Some(r) => {
                    let k = r.kappa_lower.map_or("n/a".to_string(), |k| format!("{k:.3e}"));
                    let _ = write!(out, " | {:>10.3e} {:>10}", r.gamma, k);
                }
                None => {
                    let _ = write!(out, " | {:>10} {:>10}", "-", "-");
                }
            }
        }
        out.push('\n');
    }
    let _ = write!(out, "{:>14}", "inactive");
    for a in &alphas {
        let frac = reports.iter().filter(|r| r.alpha == *a).map(|r| r.inactive_fraction).last().unwrap_or(f64::NAN);
        let _ = write!(out, " | {:>21}", format!("{:.0}%", 100.0 * frac));
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controldisc::{Bounds, ControlKind};
    use crate::fem::assemble;
    use crate::mesh::{build_structured_mesh, build_time_grid, Rect};
    use crate::optimizer::{solve, SolverOptions, Start};
    use std::f64::consts::PI;

    fn ex2_like(n: usize, m: usize, alpha: f64) -> ProblemData {
        let forms = vec![Rect::new(0.0, 0.5, 0.0, 1.0), Rect::new(0.5, 1.0, 0.0, 0.5)];
        let mesh = build_structured_mesh(n, &[]).unwrap();
        let kind = ControlKind::Parameter(forms);
        let ops = assemble(&mesh, 1.0, &kind.spatial(true)).unwrap();
        let u0 = ops.l2_project(|p| 4.0 * (PI * p[0] * p[0]).sin() * (PI * p[1].powi(3)).sin());
        let ud = vec![0.0; ops.num_interior()];
        let bounds = Some(Bounds::new(-1.5, 0.0).unwrap());
        ProblemData::new(ops, build_time_grid(m).unwrap(), alpha, 0.1, u0, ud, bounds, kind).unwrap()
    }

    fn solved(alpha: f64) -> (ProblemData, Iterate, f64) {
        let p = ex2_like(4, 6, alpha);
        let (rep, it) = solve(&p, Start::default_for(&p), &SolverOptions::default()).unwrap();
        (p, it, rep.mu)
    }

    #[test]
    fn kappa_formula() {
        assert_eq!(kappa_lower(-1.0, 1.0, 1.0, 1.0), None);
        let k = kappa_lower(3.0, 1.0, 1.0, 1.0).unwrap();
        assert!((k - 0.25).abs() < 1e-15);
        assert!((kappa_lower(0.3, 0.0, 1.0, 10.0).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn no_bounds_means_everything_free() {
        let (mut p, it, mu) = solved(1.0);
        p.bounds = None;
        let f = build_free_set(&p, &it, mu, &SscOptions::default());
        assert_eq!(f.count(), it.q.len());
    }

    #[test]
    fn kkt_operator_is_symmetric_and_linear() {
        let (p, it, mu) = solved(0.1);
        let free = build_free_set(&p, &it, mu, &SscOptions::default());
        let kkt = Kkt::new(&p, &it, mu, &free);
        assert!(symmetry_check(&kkt, 4, 1).unwrap() < 1e-10);
        let zero = kkt.apply(&vec![0.0; kkt.dim()]).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_multiplier_reduces_to_scaled_mass() {
        let (p, it, _) = solved(1.0);
        let free = FreeSet { free: vec![true; it.q.len()], eps_act: 0.0 };
        let kkt = Kkt::new(&p, &it, 0.0, &free);
        let x: Vec<f64> = (0..kkt.dim()).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut x0 = x.clone();
        *x0.last_mut().unwrap() = 0.0;
        let y = kkt.apply(&x0).unwrap();
        let q = ControlFunction { intervals: it.q.intervals, dim: it.q.dim, values: x[..it.q.len()].to_vec() };
        let expect = p.mass_dual(&q).scaled(p.alpha * it.nu);
        for i in 0..it.q.len() {
            assert!((y[i] - expect.values[i]).abs() < 1e-14);
        }
        // j-only curvature: αν‖δq‖² + 2α⟨q, δq⟩
        let g = gamma_bar(&p, &it, 0.0, &q).unwrap();
        let expect = p.alpha * it.nu * p.norm_sq(&q) + 2.0 * p.alpha * p.inner(&it.q, &q);
        assert!((g - expect).abs() < 1e-12 * expect.abs().max(1.0));
    }

    #[test]
    fn single_free_dof_matches_direct_solve() {
        let (p, it, mu) = solved(0.1);
        let mut free = FreeSet { free: vec![false; it.q.len()], eps_act: 0.0 };
        free.free[3] = true;
        let kkt = Kkt::new(&p, &it, mu, &free);
        // assemble the 2×2 system column by column
        let c0 = kkt.apply(&[1.0, 0.0]).unwrap();
        let c1v = kkt.apply(&[0.0, 1.0]).unwrap();
        let (h, d) = (c0[0], c0[1]);
        assert!((c1v[0] - d).abs() < 1e-14 && c1v[1] == 0.0);
        let b = [0.3, -0.7];
        // [h d; d 0] x = b  →  x1 = b1/d, x0 ... solved in closed form
        let x0 = b[1] / d;
        let x1 = (b[0] - h * x0) / d;
        let prec = |r: &[f64]| r.to_vec();
        let sol = minres(|x: &[f64]| kkt.apply(x), prec, &b, None, 1e-15, 10).unwrap();
        assert!((sol.x[0] - x0).abs() < 1e-12 * x0.abs().max(1.0));
        assert!((sol.x[1] - x1).abs() < 1e-12 * x1.abs().max(1.0));
        let again = minres(|x: &[f64]| kkt.apply(x), prec, &b, Some(&sol.x), 1e-10, 10).unwrap();
        assert_eq!(again.iterations, 0);
    }

    #[test]
    fn verify_reports_consistent_quantities() {
        let (p, it, mu) = solved(0.1);
        let r = verify(&p, &it, mu, &SscOptions::default()).unwrap();
        assert!(r.minres_converged, "{}", r.residual);
        assert!(r.gamma > 0.0);
        assert!(r.constraint_row_residual < 1e-6, "{}", r.constraint_row_residual);
        assert!(r.gamma_identity_gap <= 10.0 * r.gamma_identity_bound + 1e-9 * r.gamma.abs(), "{} {}", r.gamma_identity_gap, r.gamma_identity_bound);
        let table = render_table(&[r]);
        assert!(table.contains("inactive"));
    }
}
