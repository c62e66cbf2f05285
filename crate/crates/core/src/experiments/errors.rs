//! Error norms between discrete solutions and references.
//!
//! A [`Sampler`] evaluates a discrete field at a fixed set of weighted
//! points (the order-4 points of a sampling mesh). On nested meshes the
//! samples of a coarse field are exactly its prolongation, so errors against
//! a fine-grid reference are computed on the reference mesh without
//! interpolation error.

use crate::controldisc::ControlFunction;
use crate::error::{Error, Result};
use crate::fem::{FemOperators, SpatialKind};
use crate::mesh::{Mesh2D, TimeGrid};
use crate::quadrature::{gauss_legendre5, physical, triangle_order4};
use crate::reduced::ProblemData;

/// Order-4 quadrature points and weights on the given triangles.
pub fn quadrature_points(mesh: &Mesh2D, triangles: &[usize]) -> (Vec<[f64; 2]>, Vec<f64>) {
    let rule = triangle_order4();
    let mut pts = Vec::with_capacity(6 * triangles.len());
    let mut w = Vec::with_capacity(6 * triangles.len());
    for &k in triangles {
        let v = mesh.vertices(k);
        let area = mesh.area(k);
        for p in &rule {
            pts.push(physical(&v, p.bary));
            w.push(p.weight * area);
        }
    }
    (pts, w)
}

/// Linear evaluation functionals of a coefficient vector at points.
pub struct Sampler {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    entries: Vec<[(usize, f64); 3]>,
}

impl Sampler {
    /// P1 state (interior coefficients) of `ops`.
    pub fn state(ops: &FemOperators, points: Vec<[f64; 2]>, weights: Vec<f64>) -> Sampler {
        let entries = points
            .iter()
            .map(|&p| {
                let k = ops.mesh.locate(p);
                let b = ops.mesh.barycentric(k, p);
                let t = ops.mesh.triangles[k];
                let mut e = [(0, 0.0); 3];
                for i in 0..3 {
                    if let Some(d) = ops.interior_index[t[i]] {
                        e[i] = (d, b[i]);
                    }
                }
                e
            })
            .collect();
        Sampler { points, weights, entries }
    }

    /// Distributed control of `ops` (cells, nodes, or quadrature points).
    pub fn control(ops: &FemOperators, points: Vec<[f64; 2]>, weights: Vec<f64>) -> Result<Sampler> {
        let mesh = &ops.mesh;
        let mut tri_pos = vec![None; mesh.num_triangles()];
        for (c, &k) in mesh.omega_triangles.iter().enumerate() {
            tri_pos[k] = Some(c);
        }
        // nodal control numbering as in the assembly: ascending node index
        let mut node_ctrl = vec![None; mesh.num_nodes()];
        if matches!(ops.control.kind, SpatialKind::OmegaNodes) {
            for &k in &mesh.omega_triangles {
                for &v in &mesh.triangles[k] {
                    node_ctrl[v] = Some(0);
                }
            }
            let mut count = 0;
            for slot in node_ctrl.iter_mut().filter(|s| s.is_some()) {
                *slot = Some(count);
                count += 1;
            }
        }
        let mut entries = Vec::with_capacity(points.len());
        for &p in &points {
            let k = mesh.locate(p);
            let mut e = [(0, 0.0); 3];
            match &ops.control.kind {
                SpatialKind::OmegaCells => {
                    if let Some(c) = tri_pos[k] {
                        e[0] = (c, 1.0);
                    }
                }
                SpatialKind::OmegaNodes => {
                    let b = mesh.barycentric(k, p);
                    for (i, &v) in mesh.triangles[k].iter().enumerate() {
                        if let Some(c) = node_ctrl[v] {
                            e[i] = (c, b[i]);
                        }
                    }
                }
                SpatialKind::OmegaQuadrature => {
                    if let Some(c) = tri_pos[k] {
                        let first = 6 * c;
                        let near = (0..6)
                            .min_by(|&a, &b| {
                                let d = |j: usize| {
                                    let q = ops.control.points[first + j];
                                    (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)
                                };
                                d(a).total_cmp(&d(b))
                            })
                            .unwrap_or(0);
                        e[0] = (first + near, 1.0);
                    }
                }
                SpatialKind::Forms(_) => {
                    return Err(Error::Config("parameter controls have no spatial samples".into()));
                }
            }
            entries.push(e);
        }
        Ok(Sampler { points, weights, entries })
    }

    pub fn eval(&self, coeffs: &[f64]) -> Vec<f64> {
        self.entries.iter().map(|e| e.iter().map(|&(i, w)| if w != 0.0 { w * coeffs[i] } else { 0.0 }).sum()).collect()
    }
}

fn check_nested(coarse: &ProblemData, fine: &ProblemData) -> Result<()> {
    let (mc, mf) = (coarse.intervals(), fine.intervals());
    let (nc, nf) = (coarse.ops.mesh.n_per_side, fine.ops.mesh.n_per_side);
    if mf % mc != 0 || nf % nc != 0 {
        return Err(Error::Config(format!("reference grid (M={mf}, n={nf}) is not nested over (M={mc}, n={nc})")));
    }
    Ok(())
}

/// ‖q_c − q_f‖_{L²(I×ω)} on the fine (reference) discretization; for
/// parameter controls the Euclidean norm in ℝ^d replaces L²(ω).
pub fn control_error_discrete(coarse: &ProblemData, qc: &ControlFunction, fine: &ProblemData, qf: &ControlFunction) -> Result<f64> {
    check_nested(coarse, fine)?;
    let mut s = 0.0;
    if let SpatialKind::Forms(_) = coarse.ops.control.kind {
        for mf in 0..fine.intervals() {
            let t = 0.5 * (fine.grid.breakpoints[mf] + fine.grid.breakpoints[mf + 1]);
            let mc = coarse.grid.interval_of(t);
            let d: f64 = qc.block(mc).iter().zip(qf.block(mf)).map(|(a, b)| (a - b).powi(2)).sum();
            s += fine.grid.k[mf] * d;
        }
        return Ok(s.sqrt());
    }
    let (pts, w) = quadrature_points(&fine.ops.mesh, &fine.ops.mesh.omega_triangles);
    let sc = Sampler::control(&coarse.ops, pts.clone(), w.clone())?;
    let sf = Sampler::control(&fine.ops, pts, w)?;
    let mut cache: Option<(usize, Vec<f64>)> = None;
    for mf in 0..fine.intervals() {
        let t = 0.5 * (fine.grid.breakpoints[mf] + fine.grid.breakpoints[mf + 1]);
        let mc = coarse.grid.interval_of(t);
        if cache.as_ref().map_or(true, |(m, _)| *m != mc) {
            cache = Some((mc, sc.eval(qc.block(mc))));
        }
        let vc = &cache.as_ref().expect("cached").1;
        let vf = sf.eval(qf.block(mf));
        let d: f64 = vc.iter().zip(&vf).zip(&sf.weights).map(|((a, b), w)| w * (a - b).powi(2)).sum();
        s += fine.grid.k[mf] * d;
    }
    Ok(s.sqrt())
}

/// ‖u_c − u_f‖_{L²(Ω)} for P1 fields on nested meshes.
pub fn state_error_discrete(coarse: &FemOperators, uc: &[f64], fine: &FemOperators, uf: &[f64]) -> f64 {
    let all: Vec<usize> = (0..fine.mesh.num_triangles()).collect();
    let (pts, w) = quadrature_points(&fine.mesh, &all);
    let sc = Sampler::state(coarse, pts.clone(), w.clone());
    let sf = Sampler::state(fine, pts, w);
    let (vc, vf) = (sc.eval(uc), sf.eval(uf));
    vc.iter().zip(&vf).zip(&sf.weights).map(|((a, b), w)| w * (a - b).powi(2)).sum::<f64>().sqrt()
}

/// ‖q_kh − f(t)g(x)‖_{L²(I×ω)} for a separable reference, with five
/// Gauss points per interval and the order-4 rule on the ω cells.
pub fn control_error_separable(
    ops: &FemOperators,
    grid: &TimeGrid,
    q: &ControlFunction,
    time: &dyn Fn(f64) -> f64,
    space: &dyn Fn([f64; 2]) -> f64,
) -> Result<f64> {
    let (pts, w) = quadrature_points(&ops.mesh, &ops.mesh.omega_triangles);
    let g: Vec<f64> = pts.iter().map(|&p| space(p)).collect();
    let sampler = Sampler::control(ops, pts, w)?;
    let gl = gauss_legendre5();
    let mut s = 0.0;
    for m in 0..grid.num_intervals() {
        let v = sampler.eval(q.block(m));
        for &(tau, wt) in &gl {
            let f = time(grid.breakpoints[m] + tau * grid.k[m]);
            // pointwise differences, no expansion of the square
            let d: f64 = v.iter().zip(&g).zip(&sampler.weights).map(|((a, gx), wx)| wx * (a - f * gx).powi(2)).sum();
            s += grid.k[m] * wt * d;
        }
    }
    Ok(s.sqrt())
}

/// Nodal values of a coarse P1 state on a nested fine mesh (exact).
pub fn prolong_state(coarse: &FemOperators, uc: &[f64], fine: &FemOperators) -> Vec<f64> {
    fine.interior_nodes.iter().map(|&v| coarse.evaluate(uc, fine.mesh.nodes[v])).collect()
}

/// Injection of a fine P1 state into the coarse interior nodes.
pub fn restrict_state(fine: &FemOperators, uf: &[f64], coarse: &FemOperators) -> Vec<f64> {
    coarse.interior_nodes.iter().map(|&v| fine.evaluate(uf, coarse.mesh.nodes[v])).collect()
}

/// Control of `from` re-expressed on the control space and time grid of
/// `to`: interval midpoints in time, control points in space (cell
/// centroids, nodes, or quadrature points). Exact prolongation on nested
/// grids for cells and nodes.
pub fn transfer_control(from: &ProblemData, q: &ControlFunction, to: &ProblemData) -> Result<ControlFunction> {
    let mut out = to.control_zeros();
    let sampler = match to.ops.control.kind {
        SpatialKind::Forms(_) => None,
        _ => Some(Sampler::control(&from.ops, to.ops.control.points.clone(), vec![1.0; to.ops.control.points.len()])?),
    };
    if sampler.is_none() && from.dim() != to.dim() {
        return Err(Error::Shape { what: "parameter control", expected: to.dim(), found: from.dim() });
    }
    for m in 0..to.intervals() {
        let t = 0.5 * (to.grid.breakpoints[m] + to.grid.breakpoints[m + 1]);
        let src = q.block(from.grid.interval_of(t));
        let vals = match &sampler {
            Some(s) => s.eval(src),
            None => src.to_vec(),
        };
        out.block_mut(m).copy_from_slice(&vals);
    }
    Ok(out)
}

/// Area-weighted average of fine cell values over each coarse cell, and
/// interval average in time (left inverse of [`transfer_control`] for cells).
pub fn restrict_cell_control(fine: &ProblemData, qf: &ControlFunction, coarse: &ProblemData) -> Result<ControlFunction> {
    check_nested(coarse, fine)?;
    let mut coarse_pos = vec![None; coarse.ops.mesh.num_triangles()];
    for (c, &k) in coarse.ops.mesh.omega_triangles.iter().enumerate() {
        coarse_pos[k] = Some(c);
    }
    let mut out = coarse.control_zeros();
    let areas: Vec<f64> = coarse.ops.mesh.omega_triangles.iter().map(|&k| coarse.ops.mesh.area(k)).collect();
    for mf in 0..fine.intervals() {
        let t = 0.5 * (fine.grid.breakpoints[mf] + fine.grid.breakpoints[mf + 1]);
        let mc = coarse.grid.interval_of(t);
        let share = fine.grid.k[mf] / coarse.grid.k[mc];
        for (cf, &kf) in fine.ops.mesh.omega_triangles.iter().enumerate() {
            let kc = coarse.ops.mesh.locate(fine.ops.mesh.centroid(kf));
            if let Some(cc) = coarse_pos[kc] {
                out.block_mut(mc)[cc] += share * fine.ops.mesh.area(kf) / areas[cc] * qf.block(mf)[cf];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::ExampleConfig;

    #[test]
    fn state_prolongation_is_exact_and_injection_inverts_it() {
        let cfg = ExampleConfig::example1();
        let (c, f) = (cfg.build(2, 0).unwrap(), cfg.build(2, 1).unwrap());
        let uc: Vec<f64> = (0..c.ops.num_interior()).map(|i| (i as f64 * 0.37).sin()).collect();
        let uf = prolong_state(&c.ops, &uc, &f.ops);
        let back = restrict_state(&f.ops, &uf, &c.ops);
        assert!(uc.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-13));
        assert!(state_error_discrete(&c.ops, &uc, &f.ops, &uf) < 1e-13);
    }

    #[test]
    fn cell_control_transfer_round_trip() {
        let cfg = ExampleConfig::example3();
        let (c, f) = (cfg.build(3, 1).unwrap(), cfg.build(6, 2).unwrap());
        let vals: Vec<f64> = (0..c.control_zeros().len()).map(|i| -(((i * 7919) % 13) as f64) / 3.0).collect();
        let qc = ControlFunction::from_values(3, c.dim(), vals).unwrap();
        let qf = transfer_control(&c, &qc, &f).unwrap();
        assert!(control_error_discrete(&c, &qc, &f, &qf).unwrap() < 1e-13);
        let back = restrict_cell_control(&f, &qf, &c).unwrap();
        let diff: f64 = (0..3).flat_map(|m| qc.block(m).iter().zip(back.block(m)).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>()).fold(0.0, f64::max);
        assert!(diff < 1e-12, "round trip error {diff}");
    }
}
