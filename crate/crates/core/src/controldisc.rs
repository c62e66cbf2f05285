//! Discrete control spaces: piecewise constant in time, with one of several
//! spatial representations, plus the box projection and L²(I×ω) products.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fem::{FemOperators, SpatialKind};
use crate::mesh::{Rect, TimeGrid};
use crate::quadrature::{gauss_legendre5, physical, triangle_order4};

/// Control discretization strategy.
#[derive(Clone, Debug, PartialEq)]
pub enum ControlKind {
    /// Induced by the projection formula applied to the discrete adjoint.
    Variational,
    /// P0 in time × P0 on ω cells.
    PiecewiseConstant,
    /// P0 in time × P1 on ω nodes.
    PiecewiseLinear,
    /// P0 in time × coefficients of rectangle indicator form functions.
    Parameter(Vec<Rect>),
}

impl ControlKind {
    /// Spatial representation used for the unknowns.
    ///
    /// Without bounds the variational control −B*z/α is a P1 field on ω, so
    /// nodal coefficients represent it exactly; with bounds the cutoff is
    /// stored at the points of the order-4 rule.
    pub fn spatial(&self, bounded: bool) -> SpatialKind {
        match self {
            ControlKind::Variational if bounded => SpatialKind::OmegaQuadrature,
            ControlKind::Variational | ControlKind::PiecewiseLinear => SpatialKind::OmegaNodes,
            ControlKind::PiecewiseConstant => SpatialKind::OmegaCells,
            ControlKind::Parameter(r) => SpatialKind::Forms(r.clone()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ControlKind::Variational => "variational",
            ControlKind::PiecewiseConstant => "cellwise-constant",
            ControlKind::PiecewiseLinear => "cellwise-linear",
            ControlKind::Parameter(_) => "parameter",
        }
    }
}

/// Pointwise control bounds q_a ≤ q ≤ q_b.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn new(lower: f64, upper: f64) -> Result<Bounds> {
        if !(lower < upper) {
            return Err(Error::Config(format!("control bounds need q_a < q_b, got [{lower}, {upper}]")));
        }
        Ok(Bounds { lower, upper })
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.max(self.lower).min(self.upper)
    }
}

/// Control coefficients, one block of `dim` spatial coefficients per time
/// interval, stored contiguously.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlFunction {
    pub intervals: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl ControlFunction {
    pub fn zeros(intervals: usize, dim: usize) -> Self {
        ControlFunction { intervals, dim, values: vec![0.0; intervals * dim] }
    }

    pub fn constant(intervals: usize, dim: usize, v: f64) -> Self {
        ControlFunction { intervals, dim, values: vec![v; intervals * dim] }
    }

    pub fn from_values(intervals: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != intervals * dim {
            return Err(Error::Shape { what: "control values", expected: intervals * dim, found: values.len() });
        }
        Ok(ControlFunction { intervals, dim, values })
    }

    pub fn block(&self, m: usize) -> &[f64] {
        &self.values[m * self.dim..(m + 1) * self.dim]
    }

    pub fn block_mut(&mut self, m: usize) -> &mut [f64] {
        &mut self.values[m * self.dim..(m + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_shape(&self, other: &ControlFunction) -> Result<()> {
        if self.intervals != other.intervals || self.dim != other.dim {
            return Err(Error::Shape { what: "control function", expected: self.len(), found: other.len() });
        }
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> ControlFunction {
        ControlFunction { intervals: self.intervals, dim: self.dim, values: self.values.iter().map(|v| a * v).collect() }
    }

    /// self += a · other
    pub fn axpy(&mut self, a: f64, other: &ControlFunction) {
        crate::linalg::axpy(a, &other.values, &mut self.values);
    }
}

/// `Σ_m k_m q1_mᵀ M_c q2_m`, the L²(I×ω) product.
pub fn inner(ops: &FemOperators, grid: &TimeGrid, q1: &ControlFunction, q2: &ControlFunction) -> Result<f64> {
    q1.same_shape(q2)?;
    check_grid(grid, q1)?;
    Ok((0..q1.intervals).map(|m| grid.k[m] * ops.control.mass.inner(q1.block(m), q2.block(m))).sum())
}

pub fn norm(ops: &FemOperators, grid: &TimeGrid, q: &ControlFunction) -> Result<f64> {
    Ok(inner(ops, grid, q, q)?.sqrt())
}

/// Euclidean pairing of a dual (load-like) control vector with coefficients.
pub fn pair(dual: &ControlFunction, q: &ControlFunction) -> f64 {
    crate::linalg::dot(&dual.values, &q.values)
}

/// Converts a dual vector (`k_m ·` spatial duals per block) to its L²(I×ω)
/// representer.
pub fn riesz(ops: &FemOperators, grid: &TimeGrid, dual: &ControlFunction) -> ControlFunction {
    let mut out = ControlFunction::zeros(dual.intervals, dual.dim);
    for m in 0..dual.intervals {
        let r = ops.control.mass.solve(dual.block(m));
        for (o, v) in out.block_mut(m).iter_mut().zip(r) {
            *o = v / grid.k[m];
        }
    }
    out
}

fn check_grid(grid: &TimeGrid, q: &ControlFunction) -> Result<()> {
    if grid.num_intervals() != q.intervals {
        return Err(Error::Shape { what: "time intervals", expected: grid.num_intervals(), found: q.intervals });
    }
    Ok(())
}

/// Coefficientwise clamp to the bounds (nodal clamp for P1, pointwise cutoff
/// at the stored points for the variational case).
pub fn project_admissible(q: &ControlFunction, bounds: Option<Bounds>) -> ControlFunction {
    match bounds {
        None => q.clone(),
        Some(b) => ControlFunction { intervals: q.intervals, dim: q.dim, values: q.values.iter().map(|&v| b.clamp(v)).collect() },
    }
}

/// A control given independently of any discretization.
pub enum ReferenceControl<'a> {
    /// Scalar field q(t, x) on ω.
    Field(&'a dyn Fn(f64, [f64; 2]) -> f64),
    /// Parameter vector q(t).
    Parameter(&'a dyn Fn(f64) -> Vec<f64>),
}

/// Discretizes a reference control onto the control space of `ops`:
/// cell/interval L² averages for cells, interval average then nodal
/// interpolation for nodes and points, interval averages for parameters.
pub fn apply_isigma(ops: &FemOperators, grid: &TimeGrid, reference: &ReferenceControl<'_>) -> Result<ControlFunction> {
    let dim = ops.control.dim();
    let mut q = ControlFunction::zeros(grid.num_intervals(), dim);
    let gl = gauss_legendre5();
    let rule = triangle_order4();
    for m in 0..grid.num_intervals() {
        let (t0, k) = (grid.breakpoints[m], grid.k[m]);
        let times: Vec<(f64, f64)> = gl.iter().map(|&(s, w)| (t0 + s * k, w)).collect();
        let block = q.block_mut(m);
        match (reference, &ops.control.kind) {
            (ReferenceControl::Parameter(f), SpatialKind::Forms(_)) => {
                for &(t, w) in &times {
                    let v = f(t);
                    if v.len() != dim {
                        return Err(Error::Shape { what: "parameter control", expected: dim, found: v.len() });
                    }
                    for (b, x) in block.iter_mut().zip(v) {
                        *b += w * x;
                    }
                }
            }
            (ReferenceControl::Field(f), SpatialKind::OmegaCells) => {
                for (c, &cell) in ops.control.cells.iter().enumerate() {
                    let v = ops.mesh.vertices(cell);
                    let mut s = 0.0;
                    for p in &rule {
                        let x = physical(&v, p.bary);
                        for &(t, w) in &times {
                            s += p.weight * w * f(t, x);
                        }
                    }
                    block[c] = s;
                }
            }
            (ReferenceControl::Field(f), SpatialKind::OmegaNodes | SpatialKind::OmegaQuadrature) => {
                for (c, &x) in ops.control.points.iter().enumerate() {
                    block[c] = times.iter().map(|&(t, w)| w * f(t, x)).sum();
                }
            }
            _ => return Err(Error::Config("reference control does not match the control space".into())),
        }
    }
    Ok(q)
}

/// Value of the control at time t and spatial point x (ω cells/nodes only).
pub fn evaluate(ops: &FemOperators, grid: &TimeGrid, q: &ControlFunction, t: f64, x: [f64; 2]) -> f64 {
    let m = grid.interval_of(t);
    let block = q.block(m);
    match &ops.control.kind {
        SpatialKind::OmegaCells => {
            let k = ops.mesh.locate(x);
            ops.control.cells.iter().position(|&c| c == k).map_or(0.0, |c| block[c])
        }
        SpatialKind::OmegaNodes => {
            let k = ops.mesh.locate(x);
            let bary = ops.mesh.barycentric(k, x);
            ops.mesh.triangles[k]
                .iter()
                .zip(bary)
                .map(|(&v, l)| {
                    let p = ops.mesh.nodes[v];
                    let c = ops.control.points.binary_search_by(|a| (a[1], a[0]).partial_cmp(&(p[1], p[0])).unwrap());
                    c.map_or(0.0, |c| block[c] * l)
                })
                .sum()
        }
        SpatialKind::Forms(rects) => rects.iter().zip(block).filter(|(r, _)| r.contains(x)).map(|(_, v)| v).sum(),
        SpatialKind::OmegaQuadrature => {
            let mut best = (f64::MAX, 0.0);
            for (c, p) in ops.control.points.iter().enumerate() {
                let d = (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2);
                if d < best.0 {
                    best = (d, block[c]);
                }
            }
            best.1
        }
    }
}

/// Writes one row per interval: `t_start,t_end,c0,c1,…`.
pub fn write_csv<W: Write>(out: W, grid: &TimeGrid, q: &ControlFunction) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t_start".to_string(), "t_end".to_string()];
    header.extend((0..q.dim).map(|c| format!("c{c}")));
    w.write_record(&header)?;
    for m in 0..q.intervals {
        let mut row = vec![format!("{}", grid.breakpoints[m]), format!("{}", grid.breakpoints[m + 1])];
        row.extend(q.block(m).iter().map(|v| format!("{v:e}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble;
    use crate::mesh::{build_structured_mesh, build_time_grid};

    fn setup(n: usize, omega: Rect, kind: &ControlKind, m: usize) -> (FemOperators, TimeGrid) {
        let mesh = build_structured_mesh(n, &[omega]).unwrap();
        (assemble(&mesh, 1.0, &kind.spatial(false)).unwrap(), build_time_grid(m).unwrap())
    }

    #[test]
    fn projection_examples() {
        let b = Bounds::new(-1.5, 0.0).unwrap();
        let q = ControlFunction::from_values(1, 3, vec![-2.3, 0.7, -0.4]).unwrap();
        let p = project_admissible(&q, Some(b));
        assert_eq!(p.values, vec![-1.5, 0.0, -0.4]);
        assert_eq!(project_admissible(&p, Some(b)), p);
        assert!(Bounds::new(1.0, 1.0).is_err());
    }

    #[test]
    fn norm_of_constant_on_three_quarter_square() {
        for kind in [ControlKind::PiecewiseConstant, ControlKind::PiecewiseLinear] {
            let (ops, grid) = setup(4, Rect::new(0.0, 0.75, 0.0, 0.75), &kind, 3);
            let q = ControlFunction::constant(3, ops.control.dim(), 1.0);
            assert!((norm(&ops, &grid, &q).unwrap().powi(2) - 0.5625).abs() < 1e-13);
        }
    }

    #[test]
    fn parameter_norm_uses_counting_measure() {
        let kind = ControlKind::Parameter(vec![Rect::new(0.0, 0.5, 0.0, 1.0), Rect::new(0.5, 1.0, 0.0, 0.5)]);
        let (ops, grid) = setup(4, Rect::unit(), &kind, 5);
        let mut q = ControlFunction::zeros(5, 2);
        for m in 0..5 {
            q.block_mut(m)[0] = 1.0;
        }
        assert!((norm(&ops, &grid, &q).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn isigma_reproduces_constants() {
        let c = |_: f64, _: [f64; 2]| 2.5;
        for kind in [ControlKind::PiecewiseConstant, ControlKind::PiecewiseLinear] {
            let (ops, grid) = setup(4, Rect::unit(), &kind, 3);
            let q = apply_isigma(&ops, &grid, &ReferenceControl::Field(&c)).unwrap();
            assert!(q.values.iter().all(|v| (v - 2.5).abs() < 1e-14));
        }
        let kind = ControlKind::Parameter(vec![Rect::unit()]);
        let (ops, grid) = setup(4, Rect::unit(), &kind, 3);
        let f = |_: f64| vec![-0.5];
        let q = apply_isigma(&ops, &grid, &ReferenceControl::Parameter(&f)).unwrap();
        assert!(q.values.iter().all(|v| (v + 0.5).abs() < 1e-14));
    }

    #[test]
    fn cell_averages_of_x1_are_centroids() {
        let (ops, grid) = setup(2, Rect::unit(), &ControlKind::PiecewiseConstant, 2);
        let f = |_: f64, x: [f64; 2]| x[0];
        let q = apply_isigma(&ops, &grid, &ReferenceControl::Field(&f)).unwrap();
        for m in 0..2 {
            for (c, &k) in ops.control.cells.iter().enumerate() {
                assert!((q.block(m)[c] - ops.mesh.centroid(k)[0]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn isigma_is_idempotent() {
        let (ops, grid) = setup(4, Rect::unit(), &ControlKind::PiecewiseConstant, 4);
        let f = |t: f64, x: [f64; 2]| (t * x[0]).sin() + x[1] * x[1];
        let q = apply_isigma(&ops, &grid, &ReferenceControl::Field(&f)).unwrap();
        let g = |t: f64, x: [f64; 2]| evaluate(&ops, &grid, &q, t, x);
        let q2 = apply_isigma(&ops, &grid, &ReferenceControl::Field(&g)).unwrap();
        for (a, b) in q.values.iter().zip(&q2.values) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn riesz_inverts_mass_pairing() {
        let (ops, grid) = setup(4, Rect::unit(), &ControlKind::PiecewiseLinear, 3);
        let dim = ops.control.dim();
        let p = ControlFunction::from_values(3, dim, (0..3 * dim).map(|i| (i as f64 * 0.37).cos()).collect()).unwrap();
        let mut dual = ControlFunction::zeros(3, dim);
        for m in 0..3 {
            let d = ops.control.mass.apply(p.block(m));
            for (o, v) in dual.block_mut(m).iter_mut().zip(d) {
                *o = grid.k[m] * v;
            }
        }
        let r = riesz(&ops, &grid, &dual);
        for (a, b) in r.values.iter().zip(&p.values) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn csv_has_one_row_per_interval() {
        let q = ControlFunction::constant(2, 2, 1.0);
        let grid = build_time_grid(2).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &grid, &q).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("t_start,t_end,c0,c1"));
    }
}
