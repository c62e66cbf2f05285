//! Reduced objective j(ν, q) = ν(1 + α/2 ‖q‖²), terminal constraint
//! g(ν, q) = G(u(1)), and derivatives of the Lagrangian 𝓛 = j + μ g.
//!
//! Control derivatives are returned in dual form: block m holds the
//! Euclidean partial derivatives with respect to the coefficients of q_m
//! (so they contain the factor k_m). [`controldisc::riesz`] converts to the
//! L²(I×ω) representer.

use crate::controldisc::{self, Bounds, ControlFunction, ControlKind};
use crate::error::{Error, Result};
use crate::fem::{check_len, FemOperators};
use crate::linalg::dot;
use crate::mesh::TimeGrid;
use crate::pde::{self, backward_sweep, forward_sweep, Trajectory};

/// Data of one discrete time-optimal control problem.
pub struct ProblemData {
    pub ops: FemOperators,
    pub grid: TimeGrid,
    pub alpha: f64,
    pub delta0: f64,
    pub u0: Vec<f64>,
    pub ud: Vec<f64>,
    pub bounds: Option<Bounds>,
    pub kind: ControlKind,
}

/// Point (ν, q) with its state and the adjoint for unit weight μ = 1; the
/// adjoint for weight μ is μ times that one.
#[derive(Clone, Debug)]
pub struct Iterate {
    pub nu: f64,
    pub q: ControlFunction,
    pub state: Trajectory,
    pub adjoint: Option<Trajectory>,
    pub g: f64,
}

impl ProblemData {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ops: FemOperators,
        grid: TimeGrid,
        alpha: f64,
        delta0: f64,
        u0: Vec<f64>,
        ud: Vec<f64>,
        bounds: Option<Bounds>,
        kind: ControlKind,
    ) -> Result<ProblemData> {
        if !(alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be positive, got {alpha}")));
        }
        if !(delta0 > 0.0) {
            return Err(Error::Config(format!("delta0 must be positive, got {delta0}")));
        }
        check_len("initial state", ops.num_interior(), u0.len())?;
        check_len("desired state", ops.num_interior(), ud.len())?;
        let p = ProblemData { ops, grid, alpha, delta0, u0, ud, bounds, kind };
        let g0 = p.big_g(&p.u0);
        if !(g0 > 0.0) {
            return Err(Error::Config(format!("initial state already lies in the target ball (G(u0) = {g0:.3e})")));
        }
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.ops.control.dim()
    }

    pub fn intervals(&self) -> usize {
        self.grid.num_intervals()
    }

    pub fn control_zeros(&self) -> ControlFunction {
        ControlFunction::zeros(self.intervals(), self.dim())
    }

    /// G(u) = ½‖u − u_d‖² − δ₀²/2.
    pub fn big_g(&self, u: &[f64]) -> f64 {
        let diff: Vec<f64> = u.iter().zip(&self.ud).map(|(a, b)| a - b).collect();
        0.5 * self.ops.mass_inner(&diff, &diff) - 0.5 * self.delta0 * self.delta0
    }

    pub fn inner(&self, a: &ControlFunction, b: &ControlFunction) -> f64 {
        controldisc::inner(&self.ops, &self.grid, a, b).expect("control shapes match the problem")
    }

    pub fn norm_sq(&self, q: &ControlFunction) -> f64 {
        self.inner(q, q)
    }

    /// Dual vector of the L²(I×ω) product: block m is `k_m M_c q_m`.
    pub fn mass_dual(&self, q: &ControlFunction) -> ControlFunction {
        let mut out = ControlFunction::zeros(q.intervals, q.dim);
        for m in 0..q.intervals {
            let v = self.ops.control.mass.apply(q.block(m));
            for (o, x) in out.block_mut(m).iter_mut().zip(v) {
                *o = self.grid.k[m] * x;
            }
        }
        out
    }

    pub fn eval_j(&self, nu: f64, q: &ControlFunction) -> f64 {
        nu * (1.0 + 0.5 * self.alpha * self.norm_sq(q))
    }

    pub fn solve_state(&self, nu: f64, q: &ControlFunction) -> Result<Trajectory> {
        pde::solve_state(&self.ops, &self.grid, nu, q, &self.u0)
    }

    /// g(ν, q) and the state.
    pub fn eval_g(&self, nu: f64, q: &ControlFunction) -> Result<(f64, Trajectory)> {
        let u = self.solve_state(nu, q)?;
        Ok((self.big_g(u.terminal()), u))
    }

    /// Adjoint for terminal weight μ.
    pub fn solve_adjoint(&self, nu: f64, mu: f64, state: &Trajectory) -> Result<Trajectory> {
        pde::solve_adjoint(&self.ops, &self.grid, nu, mu, state.terminal(), &self.ud)
    }

    /// Evaluates state, g, and optionally the unit adjoint at (ν, q).
    pub fn iterate(&self, nu: f64, q: ControlFunction, with_adjoint: bool) -> Result<Iterate> {
        let (g, state) = self.eval_g(nu, &q)?;
        let mut it = Iterate { nu, q, state, adjoint: None, g };
        if with_adjoint {
            self.ensure_adjoint(&mut it)?;
        }
        Ok(it)
    }

    pub fn ensure_adjoint(&self, it: &mut Iterate) -> Result<()> {
        if it.adjoint.is_none() {
            it.adjoint = Some(self.solve_adjoint(it.nu, 1.0, &it.state)?);
        }
        Ok(())
    }

    /// ∇j: (1 + α/2‖q‖², α ν k_m M_c q_m).
    pub fn grad_j(&self, nu: f64, q: &ControlFunction) -> (f64, ControlFunction) {
        let dq = self.mass_dual(q).scaled(self.alpha * nu);
        (1.0 + 0.5 * self.alpha * self.norm_sq(q), dq)
    }

    /// Terms of ∇𝓛 that involve the adjoint z:
    /// (Σ k_m (B q_m + Δ_h U_m, Z_m), ν k_m B*Z_m).
    pub fn adjoint_terms(&self, nu: f64, q: &ControlFunction, state: &Trajectory, z: &Trajectory) -> (f64, ControlFunction) {
        let mut dnu = 0.0;
        let mut dq = self.control_zeros();
        for m in 0..self.intervals() {
            let k = self.grid.k[m];
            let zm = &z.values[m];
            let bq = self.ops.control.load.mul_vec(q.block(m));
            dnu += k * (dot(&bq, zm) + self.ops.pair_with_discrete_laplacian(&state.values[m], zm));
            self.ops.apply_bstar_add(nu * k, zm, dq.block_mut(m));
        }
        (dnu, dq)
    }

    /// ∇g via the unit adjoint.
    pub fn grad_g_at(&self, it: &Iterate) -> (f64, ControlFunction) {
        let z = it.adjoint.as_ref().expect("adjoint evaluated");
        self.adjoint_terms(it.nu, &it.q, &it.state, z)
    }

    pub fn grad_g(&self, nu: f64, q: &ControlFunction) -> Result<(f64, ControlFunction)> {
        let it = self.iterate(nu, q.clone(), true)?;
        Ok(self.grad_g_at(&it))
    }

    /// ∇𝓛 = ∇j + μ ∇g at an evaluated iterate.
    pub fn grad_l_at(&self, it: &Iterate, mu: f64) -> (f64, ControlFunction) {
        let (mut dnu, mut dq) = self.grad_j(it.nu, &it.q);
        if mu != 0.0 {
            let (gn, gq) = self.grad_g_at(it);
            dnu += mu * gn;
            dq.axpy(mu, &gq);
        }
        (dnu, dq)
    }

    /// ∇𝓛 at (ν, q) for multiplier μ, solving state and adjoint.
    pub fn grad_l(&self, nu: f64, q: &ControlFunction, mu: f64) -> Result<(f64, ControlFunction)> {
        let state = self.solve_state(nu, q)?;
        let z = self.solve_adjoint(nu, mu, &state)?;
        let (mut dnu, mut dq) = self.grad_j(nu, q);
        let (an, aq) = self.adjoint_terms(nu, q, &state, &z);
        dnu += an;
        dq.axpy(1.0, &aq);
        Ok((dnu, dq))
    }

    /// Hessian of 𝓛 (multiplier μ) applied to (δν, δq), adjoint route:
    /// one forward linearized sweep and one backward sweep for the adjoint
    /// derivative w, neither stored in full.
    pub fn hess_apply(&self, it: &Iterate, mu: f64, dnu: f64, dq: &ControlFunction) -> Result<(f64, ControlFunction)> {
        let ops = &self.ops;
        let grid = &self.grid;
        let (nu, q) = (it.nu, &it.q);
        let z1 = it.adjoint.as_ref().expect("adjoint evaluated");
        let n = ops.num_interior();
        let mut h_nu = self.alpha * self.inner(q, dq);
        let mut h_q = self.mass_dual(dq).scaled(self.alpha * nu);
        if dnu != 0.0 {
            h_q.axpy(self.alpha * dnu, &self.mass_dual(q));
        }
        if mu == 0.0 {
            return Ok((h_nu, h_q));
        }
        // forward: δU, accumulating Σ k_m (B δq_m + Δ_h δU_m, μ Z_m)
        let mut du_terminal = vec![0.0; n];
        let mut acc = 0.0;
        let zero = vec![0.0; n];
        forward_sweep(
            ops,
            grid,
            nu,
            &zero,
            |m, rhs| pde::linearized_load(ops, grid, nu, q, &it.state, dnu, dq, m, rhs),
            |m, du| {
                let k = grid.k[m];
                let zm = &z1.values[m];
                let bdq = ops.control.load.mul_vec(dq.block(m));
                acc += k * mu * (dot(&bdq, zm) + ops.pair_with_discrete_laplacian(du, zm));
                if m + 1 == grid.num_intervals() {
                    du_terminal.copy_from_slice(du);
                }
            },
        )?;
        h_nu += acc;
        // backward: w = derivative of the μ-adjoint
        let terminal_load = ops.mass_mul(&du_terminal.iter().map(|v| mu * v).collect::<Vec<_>>());
        let mut acc_w = 0.0;
        backward_sweep(
            ops,
            grid,
            nu,
            &terminal_load,
            |m, rhs| {
                if dnu != 0.0 {
                    ops.stiff_mul_add(-dnu * grid.k[m] * mu, &z1.values[m], rhs);
                }
            },
            |m, w| {
                let k = grid.k[m];
                let bq = ops.control.load.mul_vec(q.block(m));
                acc_w += k * (dot(&bq, w) + ops.pair_with_discrete_laplacian(&it.state.values[m], w));
                let block = h_q.block_mut(m);
                ops.apply_bstar_add(nu * k, w, block);
                if dnu != 0.0 {
                    ops.apply_bstar_add(dnu * k * mu, &z1.values[m], block);
                }
            },
        )?;
        h_nu += acc_w;
        Ok((h_nu, h_q))
    }

    /// ∂²_qq 𝓛 p = α ν p + ν B*w with δu_p the linearized state in direction
    /// (0, p) and w the adjoint with terminal μ δu_p(1) and u_d = 0 (dual form).
    pub fn hess_l_qq_apply(&self, nu: f64, q: &ControlFunction, mu: f64, p: &ControlFunction) -> Result<ControlFunction> {
        let mut out = self.mass_dual(p).scaled(self.alpha * nu);
        if mu == 0.0 {
            return Ok(out);
        }
        let u = self.solve_state(nu, q)?;
        let du = pde::solve_linearized_state(&self.ops, &self.grid, nu, q, &u, 0.0, p)?;
        let zero = vec![0.0; self.ops.num_interior()];
        let w = pde::solve_adjoint(&self.ops, &self.grid, nu, mu, du.terminal(), &zero)?;
        for m in 0..self.intervals() {
            self.ops.apply_bstar_add(nu * self.grid.k[m], &w.values[m], out.block_mut(m));
        }
        Ok(out)
    }

    /// Mixed derivative ∂ν∂q𝓛 (dual form) and ∂²ν𝓛.
    ///
    /// r_mix_m = k_m (α M_c q_m + B*Z_m) + ν k_m B*ζ_m where ζ solves the
    /// backward equation with terminal μ M δu_ν(1) − k_M c A Z_M and sources
    /// −k_m c A Z_m (the ν-derivative of the adjoint), δu_ν being the
    /// linearized state in direction (1, 0). ∂²ν𝓛 comes from forward solves:
    /// μ (‖δu_ν(1)‖² + (u(1) − u_d, δũ_νν(1))).
    pub fn hess_l_mixed_representer(&self, nu: f64, q: &ControlFunction, mu: f64) -> Result<(ControlFunction, f64)> {
        let ops = &self.ops;
        let grid = &self.grid;
        let mut r = self.mass_dual(q).scaled(self.alpha);
        if mu == 0.0 {
            return Ok((r, 0.0));
        }
        let u = self.solve_state(nu, q)?;
        let z = self.solve_adjoint(nu, mu, &u)?;
        let zero_q = self.control_zeros();
        let du = pde::solve_linearized_state(ops, grid, nu, q, &u, 1.0, &zero_q)?;
        let loads: Vec<Vec<f64>> = (0..self.intervals())
            .map(|m| {
                let mut l = vec![0.0; ops.num_interior()];
                ops.stiff_mul_add(-grid.k[m], &z.values[m], &mut l);
                l
            })
            .collect();
        let terminal_load = ops.mass_mul(&du.terminal().iter().map(|v| mu * v).collect::<Vec<_>>());
        let zeta = pde::solve_backward_with_loads(ops, grid, nu, &loads, &terminal_load)?;
        for m in 0..self.intervals() {
            let k = grid.k[m];
            let block = r.block_mut(m);
            ops.apply_bstar_add(k, &z.values[m], block);
            ops.apply_bstar_add(nu * k, &zeta.values[m], block);
        }
        let ddu = pde::solve_second_linearized_state(ops, grid, nu, (1.0, &zero_q), (1.0, &zero_q), &du, &du)?;
        let diff: Vec<f64> = u.terminal().iter().zip(&self.ud).map(|(a, b)| a - b).collect();
        let d2nu = mu * (ops.mass_inner(du.terminal(), du.terminal()) + ops.mass_inner(&diff, ddu.terminal()));
        Ok((r, d2nu))
    }

    /// ∂²𝓛[δν, δq]² from forward solves:
    /// α ν ‖δq‖² + 2 α δν (q, δq) + μ (‖δu(1)‖² + (u(1) − u_d, δũ(1))).
    pub fn quadratic_form_l(&self, nu: f64, q: &ControlFunction, mu: f64, dnu: f64, dq: &ControlFunction) -> Result<f64> {
        let mut val = self.alpha * nu * self.norm_sq(dq) + 2.0 * self.alpha * dnu * self.inner(q, dq);
        if mu != 0.0 {
            let ops = &self.ops;
            let u = self.solve_state(nu, q)?;
            let du = pde::solve_linearized_state(ops, &self.grid, nu, q, &u, dnu, dq)?;
            let ddu = pde::solve_second_linearized_state(ops, &self.grid, nu, (dnu, dq), (dnu, dq), &du, &du)?;
            let diff: Vec<f64> = u.terminal().iter().zip(&self.ud).map(|(a, b)| a - b).collect();
            val += mu * (ops.mass_inner(du.terminal(), du.terminal()) + ops.mass_inner(&diff, ddu.terminal()));
        }
        Ok(val)
    }

    /// Value of 𝓛 = j + μ g.
    pub fn eval_l(&self, nu: f64, q: &ControlFunction, mu: f64) -> Result<f64> {
        let (g, _) = self.eval_g(nu, q)?;
        Ok(self.eval_j(nu, q) + mu * g)
    }

    /// Projection-formula residual ‖q − P(−B*z/α)‖_{L²(I×ω)} with z the
    /// μ-adjoint, measured in the lumped metric for nodal controls.
    pub fn projection_residual(&self, it: &Iterate, mu: f64) -> f64 {
        let z = it.adjoint.as_ref().expect("adjoint evaluated");
        let mut s = 0.0;
        let lumped = self.ops.control.mass.lumped();
        for m in 0..self.intervals() {
            let dual = self.ops.apply_bstar(&z.values[m]).expect("adjoint matches mesh");
            let rep = self.ops.control.mass.solve(&dual);
            let q = it.q.block(m);
            for i in 0..q.len() {
                let target = -mu * rep[i] / self.alpha;
                let p = self.bounds.map_or(target, |b| b.clamp(target));
                s += self.grid.k[m] * lumped[i] * (q[i] - p).powi(2);
            }
        }
        s.sqrt()
    }

    /// Discrete Hamiltonian ∫ 1 + α/2‖q‖² + (Bq + Δ_h u, z) with μ-adjoint.
    pub fn hamiltonian_residual(&self, it: &Iterate, mu: f64) -> f64 {
        let (dnu, _) = self.grad_l_at(it, mu);
        dnu.abs()
    }
}
