//! Matrix-free Krylov solvers: Steihaug truncated CG for trust-region
//! subproblems and preconditioned MINRES for symmetric indefinite systems.
//!
//! Operators are closures on flat vectors; preconditioners apply the inverse
//! of a symmetric positive definite matrix P.

use crate::error::Result;
use crate::linalg::{axpy, dot};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CgExit {
    Converged,
    Boundary,
    NegativeCurvature,
    MaxIterations,
}

pub struct SteihaugResult {
    pub step: Vec<f64>,
    /// H applied to the step
    pub h_step: Vec<f64>,
    pub iterations: usize,
    pub exit: CgExit,
}

/// Approximately minimizes `gᵀp + ½ pᵀHp` subject to `‖p‖_P ≤ radius`.
/// Stops when the preconditioned residual norm drops to `tol`.
pub fn steihaug_cg<H, P>(mut h: H, prec: P, g: &[f64], radius: f64, tol: f64, max_iter: usize) -> Result<SteihaugResult>
where
    H: FnMut(&[f64]) -> Result<Vec<f64>>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    let n = g.len();
    let mut p = vec![0.0; n];
    let mut hp = vec![0.0; n];
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut z = prec(&r);
    let mut rz = dot(&r, &z);
    let mut d = z.clone();
    let (mut ppp, mut ppd, mut dpd) = (0.0, 0.0, rz);
    if rz.sqrt() <= tol {
        return Ok(SteihaugResult { step: p, h_step: hp, iterations: 0, exit: CgExit::Converged });
    }
    for it in 1..=max_iter {
        let hd = h(&d)?;
        let dhd = dot(&d, &hd);
        let to_boundary = |ppp: f64, ppd: f64, dpd: f64| -> f64 {
            // τ ≥ 0 with ‖p + τd‖²_P = radius²
            let disc = (ppd * ppd + dpd * (radius * radius - ppp)).max(0.0);
            (-ppd + disc.sqrt()) / dpd
        };
        if dhd <= 0.0 {
            let tau = to_boundary(ppp, ppd, dpd);
            axpy(tau, &d, &mut p);
            axpy(tau, &hd, &mut hp);
            return Ok(SteihaugResult { step: p, h_step: hp, iterations: it, exit: CgExit::NegativeCurvature });
        }
        let a = rz / dhd;
        let ppp_new = ppp + 2.0 * a * ppd + a * a * dpd;
        if ppp_new >= radius * radius {
            let tau = to_boundary(ppp, ppd, dpd);
            axpy(tau, &d, &mut p);
            axpy(tau, &hd, &mut hp);
            return Ok(SteihaugResult { step: p, h_step: hp, iterations: it, exit: CgExit::Boundary });
        }
        axpy(a, &d, &mut p);
        axpy(a, &hd, &mut hp);
        axpy(-a, &hd, &mut r);
        z = prec(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        ppd = beta * (ppd + a * dpd);
        dpd = rz_new + beta * beta * dpd;
        ppp = ppp_new;
        rz = rz_new;
        if rz.sqrt() <= tol {
            return Ok(SteihaugResult { step: p, h_step: hp, iterations: it, exit: CgExit::Converged });
        }
        for (di, zi) in d.iter_mut().zip(&z) {
            *di = zi + beta * *di;
        }
    }
    Ok(SteihaugResult { step: p, h_step: hp, iterations: max_iter, exit: CgExit::MaxIterations })
}

pub struct MinresResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// ‖b − A x‖ / ‖b‖ in the Euclidean norm, recomputed at the end
    pub relative_residual: f64,
    pub converged: bool,
}

/// Preconditioned MINRES (Paige–Saunders) for symmetric `A`, started at
/// `x0`. Iterates until the preconditioned residual estimate falls below
/// `tol` relative to the initial one computed from `b`.
pub fn minres<A, P>(mut a: A, prec: P, b: &[f64], x0: Option<&[f64]>, tol: f64, max_iter: usize) -> Result<MinresResult>
where
    A: FnMut(&[f64]) -> Result<Vec<f64>>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let mut x = x0.map_or_else(|| vec![0.0; n], |v| v.to_vec());
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(MinresResult { x: vec![0.0; n], iterations: 0, relative_residual: 0.0, converged: true });
    }
    let yb = prec(b);
    let beta_b = dot(b, &yb).sqrt();
    let mut r1 = b.to_vec();
    if x0.is_some() {
        let ax = a(&x)?;
        axpy(-1.0, &ax, &mut r1);
    }
    let mut y = prec(&r1);
    let beta1 = dot(&r1, &y).max(0.0).sqrt();
    if beta1 <= tol * beta_b {
        let rel = true_residual(&mut a, b, &x, bnorm)?;
        return Ok(MinresResult { x, iterations: 0, relative_residual: rel, converged: true });
    }
    let mut r2 = r1.clone();
    let (mut oldb, mut beta, mut dbar, mut epsln, mut phibar) = (0.0, beta1, 0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    for itn in 1..=max_iter {
        iterations = itn;
        let s = 1.0 / beta;
        let v: Vec<f64> = y.iter().map(|yi| s * yi).collect();
        y = a(&v)?;
        if itn >= 2 {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        r1 = std::mem::replace(&mut r2, y.clone());
        y = prec(&r2);
        oldb = beta;
        beta = dot(&r2, &y).max(0.0).sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let w1 = std::mem::replace(&mut w2, w.clone());
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
        }
        axpy(phi, &w, &mut x);
        if phibar <= tol * beta_b || beta == 0.0 {
            converged = true;
            break;
        }
    }
    let rel = true_residual(&mut a, b, &x, bnorm)?;
    Ok(MinresResult { x, iterations, relative_residual: rel, converged })
}

fn true_residual<A: FnMut(&[f64]) -> Result<Vec<f64>>>(a: &mut A, b: &[f64], x: &[f64], bnorm: f64) -> Result<f64> {
    let mut r = b.to_vec();
    let ax = a(x)?;
    axpy(-1.0, &ax, &mut r);
    Ok(dot(&r, &r).sqrt() / bnorm)
}
