//! Runtime oracle battery: finite-difference gates for the reduced
//! derivatives, symmetry of the Hessian and KKT operators, discrete duality
//! and projection identities, and optimality identities at a converged
//! solve. Every check reports its measured value next to its tolerance.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::controldisc::{self, Bounds, ControlFunction, ControlKind, ReferenceControl};
use crate::error::{Error, Result};
use crate::experiments::ExampleConfig;
use crate::fem::assemble;
use crate::linalg::dot;
use crate::mesh::{build_structured_mesh, build_time_grid, Rect};
use crate::optimizer::{self, SolverOptions, Start};
use crate::reduced::{Iterate, ProblemData};
use crate::ssc::{FreeSet, Kkt};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Check {
        Check { name: name.into(), value, tolerance, passed: value <= tolerance }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {:<44} {:.3e} (tol {:.1e})", self.name, self.value, self.tolerance)
    }
}

/// Error unless every check passed.
pub fn require_all(checks: &[Check]) -> Result<()> {
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::SelfCheck(failed.join(", ")))
    }
}

fn random_control(p: &ProblemData, rng: &mut ChaCha8Rng, scale: f64) -> ControlFunction {
    let values = (0..p.intervals() * p.dim()).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
    ControlFunction::from_values(p.intervals(), p.dim(), values).expect("shape from problem")
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Derivative gates at one point (ν, q, μ): central differences of 𝓛 for
/// the gradient (with the O(ε²) decay between ε = 1e-3 and 1e-4), of ∂q𝓛
/// in ν for the mixed representer, and Hessian symmetry on random pairs.
pub fn derivative_gates(p: &ProblemData, nu: f64, q: &ControlFunction, mu: f64, seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let (gn, gq) = p.grad_l(nu, q, mu)?;
    let dir = random_control(p, &mut rng, 1.0);
    let exact_q = controldisc::pair(&gq, &dir);
    let err = |eps: f64| -> Result<(f64, f64)> {
        let fd_nu = (p.eval_l(nu + eps, q, mu)? - p.eval_l(nu - eps, q, mu)?) / (2.0 * eps);
        let (mut qp, mut qm) = (q.clone(), q.clone());
        qp.axpy(eps, &dir);
        qm.axpy(-eps, &dir);
        let fd_q = (p.eval_l(nu, &qp, mu)? - p.eval_l(nu, &qm, mu)?) / (2.0 * eps);
        Ok(((gn - fd_nu).abs() / (1.0 + gn.abs()), (exact_q - fd_q).abs() / (1.0 + exact_q.abs())))
    };
    let (e3, e4) = (err(1e-3)?, err(1e-4)?);
    out.push(Check::at_most("FD gradient in nu (eps=1e-4)", e4.0, 1e-6));
    out.push(Check::at_most("FD gradient in q (eps=1e-4)", e4.1, 1e-6));
    // second-order decay: a tenfold smaller ε should cut the error ~100x
    // unless rounding already dominates
    for (name, a, b) in [("nu", e3.0, e4.0), ("q", e3.1, e4.1)] {
        let ratio = if b < 1e-11 { 0.0 } else { b / a };
        out.push(Check::at_most(format!("FD decay ratio in {name} (1e-4 vs 1e-3)"), ratio, 1.0 / 30.0));
    }

    let (r, d2) = p.hess_l_mixed_representer(nu, q, mu)?;
    let eps = 1e-4;
    let (_, gp) = p.grad_l(nu + eps, q, mu)?;
    let (_, gm) = p.grad_l(nu - eps, q, mu)?;
    let fd = (controldisc::pair(&gp, &dir) - controldisc::pair(&gm, &dir)) / (2.0 * eps);
    out.push(Check::at_most("mixed representer vs FD of dq L in nu", rel(controldisc::pair(&r, &dir), fd), 1e-5));
    let e = 1e-3;
    let fd2 = (p.eval_l(nu + e, q, mu)? - 2.0 * p.eval_l(nu, q, mu)? + p.eval_l(nu - e, q, mu)?) / (e * e);
    out.push(Check::at_most("d2 L/dnu2 vs second difference", rel(d2, fd2), 1e-4));

    let it = p.iterate(nu, q.clone(), true)?;
    let (p1, p2) = (random_control(p, &mut rng, 1.0), random_control(p, &mut rng, 1.0));
    let (a1, a2) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let (n1, q1) = p.hess_apply(&it, mu, a1, &p1)?;
    let (n2, q2) = p.hess_apply(&it, mu, a2, &p2)?;
    let l = n1 * a2 + controldisc::pair(&q1, &p2);
    let rr = n2 * a1 + controldisc::pair(&q2, &p1);
    out.push(Check::at_most("Hessian-apply symmetry", rel(l, rr), 1e-10));
    Ok(out)
}

/// Symmetry of the SSC saddle-point operator on random pairs for a random
/// free set covering about half of the control dofs.
pub fn kkt_symmetry(p: &ProblemData, it: &Iterate, mu: f64, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut free = FreeSet { free: (0..it.q.len()).map(|_| rng.gen_bool(0.5)).collect(), eps_act: 0.0 };
    free.free[0] = true;
    let kkt = Kkt::new(p, it, mu, &free);
    let err = crate::ssc::symmetry_check(&kkt, 3, seed)?;
    Ok(Check::at_most("KKT operator symmetry", err, 1e-10))
}

fn small_problem(kind: ControlKind, bounds: Option<Bounds>) -> Result<ProblemData> {
    let mesh = build_structured_mesh(8, &[Rect::new(0.0, 0.75, 0.0, 0.75)])?;
    let ops = assemble(&mesh, 0.2, &kind.spatial(bounds.is_some()))?;
    let u0 = ops.l2_project(|x| 4.0 * (PI * x[0] * x[0]).sin() * (PI * x[1]).sin().powi(3));
    let ud = ops.l2_project(|x| -2.0 * x[0].min(1.0 - x[0]).min(x[1]).min(1.0 - x[1]));
    ProblemData::new(ops, build_time_grid(6)?, 0.3, 0.1, u0, ud, bounds, kind)
}

/// Discrete identities that need no optimization: B/B* duality, Π_kh
/// orthogonality, mass partition of unity, and the dG(0) stability bound.
pub fn structural_checks(seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let kinds = [
        ControlKind::PiecewiseConstant,
        ControlKind::PiecewiseLinear,
        ControlKind::Parameter(vec![Rect::new(0.0, 0.5, 0.0, 1.0), Rect::new(0.5, 1.0, 0.0, 0.5)]),
    ];
    let mut duality = 0.0f64;
    for kind in kinds {
        let p = small_problem(kind, None)?;
        let ops = &p.ops;
        let q: Vec<f64> = (0..ops.control.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let z: Vec<f64> = (0..ops.num_interior()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // (Π_h Bq, z)_M against (q, B*z)_{control mass}
        let lhs = ops.mass_inner(&ops.b_projected(&q)?, &z);
        let rhs = ops.control.mass.inner(&q, &ops.bstar_representer(&z)?);
        duality = duality.max(rel(lhs, rhs));
    }
    out.push(Check::at_most("B/B* duality", duality, 1e-12));

    // ⟨f − Π_kh f, p⟩ = 0 for p piecewise constant in time and on cells
    let p = small_problem(ControlKind::PiecewiseConstant, None)?;
    let f = |t: f64, x: [f64; 2]| (3.0 * t).sin() * (x[0] * x[0] + x[1]).exp();
    let pi_f = controldisc::apply_isigma(&p.ops, &p.grid, &ReferenceControl::Field(&f))?;
    let test = random_control(&p, &mut rng, 1.0);
    let gl = crate::quadrature::gauss_legendre5();
    let rule = crate::quadrature::triangle_order4();
    let (mut pair_f, mut scale) = (0.0, 0.0);
    for m in 0..p.intervals() {
        for (c, &cell) in p.ops.control.cells.iter().enumerate() {
            let v = p.ops.mesh.vertices(cell);
            let area = p.ops.mesh.area(cell);
            for pt in &rule {
                let x = crate::quadrature::physical(&v, pt.bary);
                for &(s, w) in &gl {
                    let val = f(p.grid.breakpoints[m] + s * p.grid.k[m], x);
                    pair_f += p.grid.k[m] * w * area * pt.weight * val * test.block(m)[c];
                    scale += p.grid.k[m] * w * area * pt.weight * (val * test.block(m)[c]).abs();
                }
            }
        }
    }
    let pair_pi = p.inner(&pi_f, &test);
    out.push(Check::at_most("Pi_kh orthogonality", (pair_f - pair_pi).abs() / scale, 1e-12));

    let full_sum = p.ops.m_full.sum();
    out.push(Check::at_most("mass matrix entry sum - 1", (full_sum - 1.0).abs(), 1e-12));

    // ‖U_M‖²_M + ν Σ k_m c‖U_m‖²_A ≤ 10 (ν‖Bq‖² + ‖Π_h u0‖²)
    let nu = 0.8;
    let q = random_control(&p, &mut rng, 3.0);
    let traj = p.solve_state(nu, &q)?;
    let mut lhs = p.ops.mass_inner(traj.terminal(), traj.terminal());
    let mut bq = 0.0;
    for m in 0..p.intervals() {
        let u = &traj.values[m];
        lhs += nu * p.grid.k[m] * dot(&p.ops.stiff_mul(u), u);
        let b = p.ops.b_projected(q.block(m))?;
        bq += p.grid.k[m] * p.ops.mass_inner(&b, &b);
    }
    let bound = 10.0 * (nu * bq + p.ops.mass_inner(&p.u0, &p.u0));
    out.push(Check::at_most("dG(0) stability ratio", lhs / bound, 1.0));
    Ok(out)
}

/// Solves the coarse example-1 problem and checks the multiplier identity,
/// feasibility, and the projection-formula residual at convergence.
pub fn convergence_checks(opts: &SolverOptions) -> Result<Vec<Check>> {
    let cfg = ExampleConfig::example1();
    let p = cfg.build(16, 0)?;
    let (rep, _) = optimizer::solve(&p, Start::default_for(&p), opts)?;
    let mut out = vec![
        Check::at_most("multiplier identity at convergence", rep.multiplier_identity, 1e-6),
        Check::at_most("|g| at convergence", rep.g.abs(), opts.tol_g),
        Check::at_most("projection-formula residual", rep.projection_residual, opts.tol_s),
    ];
    // bounded case with active constraints
    let p3 = small_problem(ControlKind::PiecewiseConstant, Some(Bounds::new(-5.0, 0.0)?))?;
    let (rep3, it3) = optimizer::solve(&p3, Start::default_for(&p3), opts)?;
    out.push(Check::at_most("multiplier identity (bounded)", rep3.multiplier_identity, 1e-6));
    out.push(Check::at_most("projection-formula residual (bounded)", rep3.projection_residual, opts.tol_s));
    out.push(kkt_symmetry(&p3, &it3, rep3.mu, 11)?);
    Ok(out)
}

/// The full battery: structural identities, derivative gates at random
/// points for every control kind, and the checks at converged solves.
pub fn run_battery(opts: &SolverOptions, seed: u64) -> Result<Vec<Check>> {
    let mut out = structural_checks(seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    for kind in [ControlKind::PiecewiseConstant, ControlKind::PiecewiseLinear, ControlKind::Variational] {
        let name = kind.name();
        let p = small_problem(kind, None)?;
        let q = random_control(&p, &mut rng, 2.0);
        for mut c in derivative_gates(&p, 0.9, &q, 3.0, seed)? {
            c.name = format!("{} [{name}]", c.name);
            out.push(c);
        }
    }
    out.extend(convergence_checks(opts)?);
    Ok(out)
}
