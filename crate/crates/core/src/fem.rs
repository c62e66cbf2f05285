//! P1 finite elements on a [`Mesh2D`]: mass and stiffness matrices with
//! Dirichlet nodes eliminated, control-to-load maps, and the L² projection.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::linalg::{Csr, FactorCache, SpdFactor};
use crate::mesh::{Mesh2D, Rect};
use crate::quadrature::{physical, triangle_order4};

/// Spatial representation of control functions.
#[derive(Clone, Debug, PartialEq)]
pub enum SpatialKind {
    /// One value per ω cell.
    OmegaCells,
    /// P1 coefficients at the nodes of ω̄.
    OmegaNodes,
    /// Values at the points of the order-4 rule on each ω cell.
    OmegaQuadrature,
    /// Coefficients of indicator form functions of the given rectangles.
    Forms(Vec<Rect>),
}

/// Gram matrix of the spatial control basis in L²(ω) (identity for forms).
pub enum ControlMass {
    Diagonal(Vec<f64>),
    Consistent { matrix: Csr, factor: SpdFactor, lumped: Vec<f64> },
}

impl ControlMass {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ControlMass::Diagonal(d) => x.iter().zip(d).map(|(a, b)| a * b).collect(),
            ControlMass::Consistent { matrix, .. } => matrix.mul_vec(x),
        }
    }

    pub fn solve(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ControlMass::Diagonal(d) => x.iter().zip(d).map(|(a, b)| a / b).collect(),
            ControlMass::Consistent { factor, .. } => factor.solve(x),
        }
    }

    /// Diagonal used as a metric for box projections (the lumped mass for the
    /// consistent case).
    pub fn lumped(&self) -> &[f64] {
        match self {
            ControlMass::Diagonal(d) => d,
            ControlMass::Consistent { lumped, .. } => lumped,
        }
    }

    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            ControlMass::Diagonal(d) => x.iter().zip(y).zip(d).map(|((a, b), w)| a * b * w).sum(),
            ControlMass::Consistent { matrix, .. } => {
                let mut s = 0.0;
                for i in 0..matrix.nrows {
                    let mut r = 0.0;
                    for (j, v) in matrix.row(i) {
                        r += v * y[j];
                    }
                    s += x[i] * r;
                }
                s
            }
        }
    }
}

/// Spatial control operator: maps control coefficients to interior loads
/// `(B q, φ_i)`.
pub struct ControlMap {
    pub kind: SpatialKind,
    /// rows: all mesh nodes, columns: control dofs
    pub load_full: Csr,
    /// rows: interior dofs
    pub load: Csr,
    pub mass: ControlMass,
    /// physical location of each control dof (cell centroid, node, or point;
    /// empty for forms)
    pub points: Vec<[f64; 2]>,
    /// mesh cell owning each control dof (cells and quadrature points)
    pub cells: Vec<usize>,
}

impl ControlMap {
    pub fn dim(&self) -> usize {
        self.load.ncols
    }
}

/// Assembled operators for one mesh level.
pub struct FemOperators {
    pub mesh: Mesh2D,
    pub c_diff: f64,
    pub m_full: Csr,
    /// stiffness of −Δ (without the diffusion coefficient)
    pub a_full: Csr,
    pub interior_index: Vec<Option<usize>>,
    pub interior_nodes: Vec<usize>,
    pub m: Csr,
    pub a: Csr,
    pub control: ControlMap,
    cache: FactorCache,
    mass_factor: OnceLock<SpdFactor>,
}

fn element_matrices(v: &[[f64; 2]; 3]) -> (f64, [[f64; 3]; 3], [[f64; 3]; 3]) {
    let area = 0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]));
    let mut b = [0.0; 3];
    let mut c = [0.0; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        b[i] = v[j][1] - v[k][1];
        c[i] = v[k][0] - v[j][0];
    }
    let mut mass = [[0.0; 3]; 3];
    let mut stiff = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            mass[i][j] = area / 12.0 * if i == j { 2.0 } else { 1.0 };
            stiff[i][j] = (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
        }
    }
    (area, mass, stiff)
}

/// Assembles mass, stiffness and the control map on `mesh`.
pub fn assemble(mesh: &Mesh2D, c_diff: f64, kind: &SpatialKind) -> Result<FemOperators> {
    if !(c_diff > 0.0) {
        return Err(Error::Domain(format!("diffusion coefficient must be positive, got {c_diff}")));
    }
    let nn = mesh.num_nodes();
    let mut mt = Vec::with_capacity(9 * mesh.num_triangles());
    let mut at = Vec::with_capacity(9 * mesh.num_triangles());
    for k in 0..mesh.num_triangles() {
        let (_, me, ke) = element_matrices(&mesh.vertices(k));
        let t = mesh.triangles[k];
        for i in 0..3 {
            for j in 0..3 {
                mt.push((t[i], t[j], me[i][j]));
                at.push((t[i], t[j], ke[i][j]));
            }
        }
    }
    let m_full = Csr::from_triplets(nn, nn, &mt);
    let a_full = Csr::from_triplets(nn, nn, &at);
    let boundary = mesh.is_boundary_mask();
    let mut interior_index = vec![None; nn];
    let mut interior_nodes = Vec::new();
    for v in 0..nn {
        if !boundary[v] {
            interior_index[v] = Some(interior_nodes.len());
            interior_nodes.push(v);
        }
    }
    let ni = interior_nodes.len();
    let m = m_full.select(&interior_index, ni, &interior_index, ni);
    let a = a_full.select(&interior_index, ni, &interior_index, ni);
    let control = build_control_map(mesh, kind, &interior_index, ni)?;
    let stiff = Csr::combine_same_pattern(0.0, &m, c_diff, &a);
    let cache = FactorCache::new(m.clone(), stiff, 6);
    Ok(FemOperators {
        mesh: mesh.clone(),
        c_diff,
        m_full,
        a_full,
        interior_index,
        interior_nodes,
        m,
        a,
        control,
        cache,
        mass_factor: OnceLock::new(),
    })
}

fn build_control_map(mesh: &Mesh2D, kind: &SpatialKind, interior_index: &[Option<usize>], ni: usize) -> Result<ControlMap> {
    let nn = mesh.num_nodes();
    let needs_omega = !matches!(kind, SpatialKind::Forms(_));
    if needs_omega && mesh.omega_triangles.is_empty() {
        return Err(Error::Config("distributed control needs a mesh with tagged omega cells".into()));
    }
    let mut trips = Vec::new();
    let mut points = Vec::new();
    let mut cells = Vec::new();
    let mass = match kind {
        SpatialKind::OmegaCells => {
            let mut areas = Vec::new();
            for (c, &k) in mesh.omega_triangles.iter().enumerate() {
                let area = mesh.area(k);
                for &v in &mesh.triangles[k] {
                    trips.push((v, c, area / 3.0));
                }
                areas.push(area);
                points.push(mesh.centroid(k));
                cells.push(k);
            }
            ControlMass::Diagonal(areas)
        }
        SpatialKind::OmegaNodes => {
            let mut node_id = vec![None; nn];
            for &k in &mesh.omega_triangles {
                for &v in &mesh.triangles[k] {
                    if node_id[v].is_none() {
                        node_id[v] = Some(0);
                    }
                }
            }
            let mut count = 0;
            for v in 0..nn {
                if node_id[v].is_some() {
                    node_id[v] = Some(count);
                    points.push(mesh.nodes[v]);
                    count += 1;
                }
            }
            let mut mass_trips = Vec::new();
            for &k in &mesh.omega_triangles {
                let (_, me, _) = element_matrices(&mesh.vertices(k));
                let t = mesh.triangles[k];
                for i in 0..3 {
                    for j in 0..3 {
                        let cj = node_id[t[j]].unwrap();
                        trips.push((t[i], cj, me[i][j]));
                        mass_trips.push((node_id[t[i]].unwrap(), cj, me[i][j]));
                    }
                }
            }
            let matrix = Csr::from_triplets(count, count, &mass_trips);
            let lumped = (0..count).map(|i| matrix.row(i).map(|(_, v)| v).sum()).collect();
            let factor = SpdFactor::new(&matrix, None)?;
            ControlMass::Consistent { matrix, factor, lumped }
        }
        SpatialKind::OmegaQuadrature => {
            let rule = triangle_order4();
            let mut weights = Vec::new();
            for &k in &mesh.omega_triangles {
                let v = mesh.vertices(k);
                let area = mesh.area(k);
                for p in &rule {
                    let c = weights.len();
                    for (i, &node) in mesh.triangles[k].iter().enumerate() {
                        trips.push((node, c, p.bary[i] * p.weight * area));
                    }
                    weights.push(p.weight * area);
                    points.push(physical(&v, p.bary));
                    cells.push(k);
                }
            }
            ControlMass::Diagonal(weights)
        }
        SpatialKind::Forms(rects) => {
            for (c, r) in rects.iter().enumerate() {
                let aligned = build_structured_mesh_aligned(r, mesh.n_per_side);
                if !aligned {
                    return Err(Error::Alignment { rect: r.to_string(), n_per_side: mesh.n_per_side });
                }
                for k in 0..mesh.num_triangles() {
                    if r.contains(mesh.centroid(k)) {
                        let area = mesh.area(k);
                        for &v in &mesh.triangles[k] {
                            trips.push((v, c, area / 3.0));
                        }
                    }
                }
            }
            ControlMass::Diagonal(vec![1.0; rects.len()])
        }
    };
    let dim = match &mass {
        ControlMass::Diagonal(d) => d.len(),
        ControlMass::Consistent { lumped, .. } => lumped.len(),
    };
    let load_full = Csr::from_triplets(nn, dim, &trips);
    let col_map: Vec<Option<usize>> = (0..dim).map(Some).collect();
    let load = load_full.select(interior_index, ni, &col_map, dim);
    Ok(ControlMap { kind: kind.clone(), load_full, load, mass, points, cells })
}

fn build_structured_mesh_aligned(r: &Rect, n: usize) -> bool {
    [r.x0, r.x1, r.y0, r.y1].iter().all(|&v| {
        let s = v * n as f64;
        (s - s.round()).abs() < 1e-9
    })
}

impl FemOperators {
    pub fn num_interior(&self) -> usize {
        self.interior_nodes.len()
    }

    /// Factorization of `M + s·c·A`.
    pub fn step_factor(&self, s: f64) -> Result<Arc<SpdFactor>> {
        self.cache.get(s)
    }

    pub fn cached_factorizations(&self) -> usize {
        self.cache.len()
    }

    pub fn mass_factor(&self) -> &SpdFactor {
        self.mass_factor.get_or_init(|| SpdFactor::new(&self.m, None).expect("mass matrix is SPD"))
    }

    /// y += alpha · c·A x (interior)
    pub fn stiff_mul_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        self.a.mul_vec_add(alpha * self.c_diff, x, y);
    }

    pub fn stiff_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.stiff_mul_add(1.0, x, &mut y);
        y
    }

    pub fn mass_mul(&self, x: &[f64]) -> Vec<f64> {
        self.m.mul_vec(x)
    }

    pub fn mass_inner(&self, x: &[f64], y: &[f64]) -> f64 {
        crate::linalg::dot(&self.m.mul_vec(x), y)
    }

    /// Interior load vector `(B q, φ_i)` for spatial control coefficients.
    pub fn apply_b(&self, q: &[f64]) -> Result<Vec<f64>> {
        check_len("control coefficients", self.control.dim(), q.len())?;
        Ok(self.control.load.mul_vec(q))
    }

    /// y += alpha · load(q), no shape check (hot path).
    pub fn apply_b_add(&self, alpha: f64, q: &[f64], y: &mut [f64]) {
        self.control.load.mul_vec_add(alpha, q, y);
    }

    /// Dual pairing `(z, B ψ_j)` of an interior field with each control basis
    /// function; for forms this is `(e_n, z)`.
    pub fn apply_bstar(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len("interior field", self.num_interior(), z.len())?;
        let mut out = vec![0.0; self.control.dim()];
        self.control.load.tr_mul_vec_add(1.0, z, &mut out);
        Ok(out)
    }

    /// out += alpha · Bᵀ z (hot path, no shape check).
    pub fn apply_bstar_add(&self, alpha: f64, z: &[f64], out: &mut [f64]) {
        self.control.load.tr_mul_vec_add(alpha, z, out);
    }

    /// Same as [`apply_bstar`](Self::apply_bstar) for a field given at all mesh nodes.
    pub fn apply_bstar_nodal(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len("nodal field", self.mesh.num_nodes(), z.len())?;
        let mut out = vec![0.0; self.control.dim()];
        self.control.load_full.tr_mul_vec_add(1.0, z, &mut out);
        Ok(out)
    }

    /// L²(ω) representer of B*z: control coefficients r with
    /// `(r, ψ)_{L²(ω)} = (z, Bψ)` for all basis functions ψ.
    pub fn bstar_representer(&self, z: &[f64]) -> Result<Vec<f64>> {
        let dual = self.apply_bstar(z)?;
        Ok(self.control.mass.solve(&dual))
    }

    /// L² projection onto V_h of the load `(B q, ·)`.
    pub fn b_projected(&self, q: &[f64]) -> Result<Vec<f64>> {
        let load = self.apply_b(q)?;
        Ok(self.mass_factor().solve(&load))
    }

    /// Interior load vector `(f, φ_i)` with the order-4 rule.
    pub fn load<F: Fn([f64; 2]) -> f64>(&self, f: F) -> Vec<f64> {
        let rule = triangle_order4();
        let mut b = vec![0.0; self.num_interior()];
        for k in 0..self.mesh.num_triangles() {
            let v = self.mesh.vertices(k);
            let area = self.mesh.area(k);
            let t = self.mesh.triangles[k];
            for p in &rule {
                let fx = f(physical(&v, p.bary)) * p.weight * area;
                for i in 0..3 {
                    if let Some(d) = self.interior_index[t[i]] {
                        b[d] += fx * p.bary[i];
                    }
                }
            }
        }
        b
    }

    /// L² projection of `f` onto V_h ⊂ H¹₀ (interior coefficients).
    pub fn l2_project<F: Fn([f64; 2]) -> f64>(&self, f: F) -> Vec<f64> {
        let b = self.load(f);
        self.mass_factor().solve(&b)
    }

    /// Nodal interpolant at interior nodes.
    pub fn interpolate<F: Fn([f64; 2]) -> f64>(&self, f: F) -> Vec<f64> {
        self.interior_nodes.iter().map(|&v| f(self.mesh.nodes[v])).collect()
    }

    /// Extends interior coefficients by zero to all mesh nodes.
    pub fn extend(&self, u: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.mesh.num_nodes()];
        for (d, &v) in self.interior_nodes.iter().enumerate() {
            full[v] = u[d];
        }
        full
    }

    /// `(Δ_h u, z)_{L²} = −(c A u)·z`.
    pub fn pair_with_discrete_laplacian(&self, u: &[f64], z: &[f64]) -> f64 {
        -crate::linalg::dot(&self.stiff_mul(u), z)
    }

    /// Value of the P1 field `u` (interior coefficients) at `p`.
    pub fn evaluate(&self, u: &[f64], p: [f64; 2]) -> f64 {
        let k = self.mesh.locate(p);
        let b = self.mesh.barycentric(k, p);
        self.mesh.triangles[k]
            .iter()
            .zip(b)
            .map(|(&v, l)| self.interior_index[v].map_or(0.0, |d| u[d]) * l)
            .sum()
    }

    /// ‖u_h − f‖_{L²(Ω)} with the order-4 rule.
    pub fn l2_error<F: Fn([f64; 2]) -> f64>(&self, u: &[f64], f: F) -> f64 {
        let rule = triangle_order4();
        let mut s = 0.0;
        for k in 0..self.mesh.num_triangles() {
            let v = self.mesh.vertices(k);
            let area = self.mesh.area(k);
            let t = self.mesh.triangles[k];
            let uk = t.map(|n| self.interior_index[n].map_or(0.0, |d| u[d]));
            for p in &rule {
                let uh = uk[0] * p.bary[0] + uk[1] * p.bary[1] + uk[2] * p.bary[2];
                let e = uh - f(physical(&v, p.bary));
                s += e * e * p.weight * area;
            }
        }
        s.sqrt()
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Shape { what, expected, found });
    }
    Ok(())
}
