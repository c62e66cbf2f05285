//! Closed-form solution of example 1 and its time-discrete, space-exact
//! counterpart.
//!
//! Example 1 lives entirely in the span of the first eigenfunction
//! φ = sin(πx₁)sin(πx₂) of −cΔ with c = 1/(2π²), eigenvalue λ = 1. Because of
//! that, the dG(0) time discretization without any spatial error reduces to a
//! scalar recursion, which isolates the spatial error in refinement studies.

use std::f64::consts::{LN_2, PI};

/// Eigenfunction φ (= u₀).
pub fn phi(x: [f64; 2]) -> f64 {
    (PI * x[0]).sin() * (PI * x[1]).sin()
}

/// ‖φ‖²_{L²(Ω)}.
pub const PHI_NORM_SQ: f64 = 0.25;

pub fn nu_bar() -> f64 {
    LN_2
}

pub fn mu_bar() -> f64 {
    4.0
}

/// ū(t, x) = 2(e^{−νt} − e^{ν(t−1)}) φ(x).
pub fn state(t: f64, x: [f64; 2]) -> f64 {
    let nu = nu_bar();
    2.0 * ((-nu * t).exp() - (nu * (t - 1.0)).exp()) * phi(x)
}

/// z̄(t, x) = 4 e^{ν(t−1)} φ(x).
pub fn adjoint(t: f64, x: [f64; 2]) -> f64 {
    4.0 * (nu_bar() * (t - 1.0)).exp() * phi(x)
}

/// q̄ = −z̄/α.
pub fn control(t: f64, x: [f64; 2], alpha: f64) -> f64 {
    -adjoint(t, x) / alpha
}

/// Time factor of q̄ for α = 1, so that q̄(t, x) = control_time(t)·φ(x)/α.
pub fn control_time(t: f64) -> f64 {
    -4.0 * (nu_bar() * (t - 1.0)).exp()
}

/// Residuals of the continuous optimality system at (t, x) for α = 1,
/// δ₀ = 1/2, u_d = −2φ, using exact derivatives:
/// state equation, adjoint equation, projection formula, adjoint terminal
/// condition, and the constraint value G(ū(1)).
pub fn optimality_residuals(t: f64, x: [f64; 2]) -> [f64; 5] {
    let nu = nu_bar();
    let c = 1.0 / (2.0 * PI * PI);
    let p = phi(x);
    let lap_p = -2.0 * PI * PI * p;
    let e1 = (-nu * t).exp();
    let e2 = (nu * (t - 1.0)).exp();
    let u_t = 2.0 * (-nu * e1 - nu * e2) * p;
    let lap_u = 2.0 * (e1 - e2) * lap_p;
    let q = control(t, x, 1.0);
    let state_res = u_t - nu * c * lap_u - nu * q;
    let z_t = 4.0 * nu * e2 * p;
    let lap_z = 4.0 * e2 * lap_p;
    let adjoint_res = -z_t - nu * c * lap_z;
    let projection_res = q + adjoint(t, x);
    let ud = -2.0 * p;
    let terminal_res = adjoint(1.0, x) - mu_bar() * (state(1.0, x) - ud);
    // ū(1) − u_d = φ, so G = ½‖φ‖² − δ₀²/2
    let u1 = 2.0 * ((-nu).exp() - 1.0);
    let constraint = 0.5 * (u1 + 2.0).powi(2) * PHI_NORM_SQ - 0.5 * 0.25;
    [state_res, adjoint_res, projection_res, terminal_res, constraint]
}

/// ∂ν𝓛 at the exact solution: 1 + α/2‖q̄‖² + ∫(q̄ + cΔū, z̄) dt, with the
/// time integral by composite Gauss–Legendre quadrature.
pub fn hamiltonian_residual(panels: usize) -> f64 {
    let nu = nu_bar();
    let gl = crate::quadrature::gauss_legendre5();
    let mut qq = 0.0;
    let mut pair = 0.0;
    for i in 0..panels {
        let (a, h) = (i as f64 / panels as f64, 1.0 / panels as f64);
        for &(s, w) in &gl {
            let t = a + s * h;
            let qt = control_time(t);
            let ut = 2.0 * ((-nu * t).exp() - (nu * (t - 1.0)).exp());
            let zt = 4.0 * (nu * (t - 1.0)).exp();
            // cΔφ = −φ
            qq += w * h * qt * qt * PHI_NORM_SQ;
            pair += w * h * (qt - ut) * zt * PHI_NORM_SQ;
        }
    }
    1.0 + 0.5 * qq + pair
}

/// Optimal solution of the dG(0)-in-time, exact-in-space problem of
/// example 1 on a uniform grid with `m` intervals.
#[derive(Clone, Debug)]
pub struct ModalReference {
    pub nu: f64,
    /// q = p_m φ on interval m
    pub p: Vec<f64>,
    /// u(1) = y_terminal φ
    pub y_terminal: f64,
    pub value: f64,
}

/// Scalar problem: y_m = r(y_{m−1} + νk p_m), r = 1/(1 + νkλ), y₀ = 1,
/// minimize ν(1 + α/2‖φ‖² Σ k p_m²) subject to ½(y_M + 2)²‖φ‖² ≤ δ₀²/2.
/// For fixed ν the minimal-norm control reaching y_M = −2 + δ₀/‖φ‖ has cost
/// b²/S with b = y_M − r^M and S = Σ w_m²/k, w_m = νk r^{M−m+1}; the time is
/// the root of V'.
pub fn modal_reference(m: usize, alpha: f64, c_diff: f64, delta0: f64) -> ModalReference {
    let lambda = c_diff * 2.0 * PI * PI;
    let k = 1.0 / m as f64;
    let target = -2.0 + delta0 / PHI_NORM_SQ.sqrt();
    let parts = |nu: f64| -> (f64, f64, Vec<f64>) {
        let r = 1.0 / (1.0 + nu * k * lambda);
        let w: Vec<f64> = (1..=m).map(|i| nu * k * r.powi((m - i + 1) as i32)).collect();
        let s: f64 = w.iter().map(|v| v * v / k).sum();
        let b = target - r.powi(m as i32);
        (b, s, w)
    };
    let value = |nu: f64| {
        let (b, s, _) = parts(nu);
        nu * (1.0 + 0.5 * alpha * PHI_NORM_SQ * b * b / s)
    };
    let dv = |nu: f64| {
        let h = 1e-6 * nu;
        (value(nu + h) - value(nu - h)) / (2.0 * h)
    };
    let (mut lo, mut hi) = (1e-3, 20.0);
    while hi - lo > 1e-14 * hi {
        let mid = 0.5 * (lo + hi);
        if dv(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let nu = 0.5 * (lo + hi);
    let (b, s, w) = parts(nu);
    let p = w.iter().map(|wm| b * wm / (k * s)).collect();
    ModalReference { nu, p, y_terminal: target, value: value(nu) }
}
