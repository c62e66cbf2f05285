//! Structured triangulations of the unit square and uniform time grids.
//!
//! Meshes split every grid square along the diagonal from its lower-left to
//! its upper-right corner. Nodes are numbered lexicographically by (y, x) and
//! triangles square by square, so the mesh for a given `n_per_side` is unique
//! and point location is a constant-time index computation.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Axis-aligned rectangle `(x0, x1) × (y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Rect { x0, x1, y0, y1 }
    }

    pub fn unit() -> Self {
        Rect::new(0.0, 1.0, 0.0, 1.0)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }
}

impl std::fmt::Display for Rect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}) x ({}, {})", self.x0, self.x1, self.y0, self.y1)
    }
}

/// Triangulation of (0,1)² with ω tags and Dirichlet boundary marks.
#[derive(Clone, Debug)]
pub struct Mesh2D {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_nodes: Vec<usize>,
    pub omega_triangles: Vec<usize>,
    pub omega: Vec<Rect>,
    pub n_per_side: usize,
    pub level: usize,
}

/// Number of squares per side at a refinement level: level 0 has 4.
pub fn n_for_level(level: usize) -> usize {
    4 << level
}

fn on_grid(v: f64, n: usize) -> bool {
    let s = v * n as f64;
    (s - s.round()).abs() < 1e-9 && v >= 0.0 && v <= 1.0
}

/// Builds the structured mesh with `n_per_side` squares per side and tags the
/// cells inside the union of `omega`.
pub fn build_structured_mesh(n_per_side: usize, omega: &[Rect]) -> Result<Mesh2D> {
    if n_per_side == 0 {
        return Err(Error::Config("n_per_side must be positive".into()));
    }
    let n = n_per_side;
    for r in omega {
        let aligned = [r.x0, r.x1, r.y0, r.y1].iter().all(|&v| on_grid(v, n));
        if !aligned || r.x0 >= r.x1 || r.y0 >= r.y1 {
            return Err(Error::Alignment { rect: r.to_string(), n_per_side: n });
        }
    }
    let h = 1.0 / n as f64;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    let mut boundary_nodes = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            // i * h is exact for dyadic n, which keeps refinement nesting exact
            let p = [i as f64 / n as f64, j as f64 / n as f64];
            if i == 0 || j == 0 || i == n || j == n {
                boundary_nodes.push(nodes.len());
            }
            nodes.push(p);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    let mut omega_triangles = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let (p00, p10, p01, p11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            let centre = [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h];
            let tagged = omega.iter().any(|r| r.contains(centre));
            for tri in [[p00, p10, p11], [p00, p11, p01]] {
                if tagged {
                    omega_triangles.push(triangles.len());
                }
                triangles.push(tri);
            }
        }
    }
    let level = level_of(n);
    Ok(Mesh2D { nodes, triangles, boundary_nodes, omega_triangles, omega: omega.to_vec(), n_per_side: n, level })
}

fn level_of(n: usize) -> usize {
    let mut l = 0;
    while n_for_level(l) < n {
        l += 1;
    }
    if n_for_level(l) == n {
        l
    } else {
        0
    }
}

/// Red refinement: every triangle is split into four through its edge
/// midpoints. The result is renumbered into the canonical structured order,
/// so it coincides with `build_structured_mesh(2n)`.
pub fn refine_uniform(mesh: &Mesh2D) -> Mesh2D {
    let mut nodes = mesh.nodes.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, nodes: &mut Vec<[f64; 2]>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoint.entry(key).or_insert_with(|| {
            let (pa, pb) = (nodes[a], nodes[b]);
            nodes.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
            nodes.len() - 1
        })
    };
    let tagged: Vec<bool> = {
        let mut t = vec![false; mesh.triangles.len()];
        for &k in &mesh.omega_triangles {
            t[k] = true;
        }
        t
    };
    let mut fine: Vec<([usize; 3], bool)> = Vec::with_capacity(4 * mesh.triangles.len());
    for (k, &[a, b, c]) in mesh.triangles.iter().enumerate() {
        let ab = mid(a, b, &mut nodes);
        let bc = mid(b, c, &mut nodes);
        let ca = mid(c, a, &mut nodes);
        for tri in [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]] {
            fine.push((tri, tagged[k]));
        }
    }
    canonicalize(nodes, fine, mesh.n_per_side * 2, mesh.omega.clone())
}

/// Renumbers nodes lexicographically by (y, x) and orders triangles by grid
/// square (lower-right triangle first), rotating each triangle to start at its
/// lower-left vertex.
fn canonicalize(nodes: Vec<[f64; 2]>, tris: Vec<([usize; 3], bool)>, n: usize, omega: Vec<Rect>) -> Mesh2D {
    let grid_index = |p: [f64; 2]| -> (usize, usize) {
        ((p[0] * n as f64).round() as usize, (p[1] * n as f64).round() as usize)
    };
    let new_id: Vec<usize> = nodes
        .iter()
        .map(|&p| {
            let (i, j) = grid_index(p);
            j * (n + 1) + i
        })
        .collect();
    let mut new_nodes = vec![[0.0; 2]; (n + 1) * (n + 1)];
    for (old, &p) in nodes.iter().enumerate() {
        new_nodes[new_id[old]] = p;
    }
    let mut slots: Vec<Option<([usize; 3], bool)>> = vec![None; 2 * n * n];
    for (tri, tag) in tris {
        let t = tri.map(|v| new_id[v]);
        let pts = t.map(|v| new_nodes[v]);
        let cx = (pts[0][0] + pts[1][0] + pts[2][0]) / 3.0;
        let cy = (pts[0][1] + pts[1][1] + pts[2][1]) / 3.0;
        let (si, sj) = ((cx * n as f64).floor() as usize, (cy * n as f64).floor() as usize);
        let local = if cx - si as f64 / n as f64 > cy - sj as f64 / n as f64 { 0 } else { 1 };
        // start at the vertex with the smallest index (the lower-left corner)
        let r = (0..3).min_by_key(|&q| t[q]).unwrap();
        let rotated = [t[r], t[(r + 1) % 3], t[(r + 2) % 3]];
        slots[2 * (sj * n + si) + local] = Some((rotated, tag));
    }
    let mut triangles = Vec::with_capacity(slots.len());
    let mut omega_triangles = Vec::new();
    for (k, s) in slots.into_iter().enumerate() {
        let (tri, tag) = s.expect("red refinement of a structured mesh fills every slot");
        if tag {
            omega_triangles.push(k);
        }
        triangles.push(tri);
    }
    let boundary_nodes = (0..new_nodes.len())
        .filter(|&v| {
            let p = new_nodes[v];
            p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0
        })
        .collect();
    Mesh2D { nodes: new_nodes, triangles, boundary_nodes, omega_triangles, omega, n_per_side: n, level: level_of(n) }
}

impl Mesh2D {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Signed area of triangle `k`.
    pub fn area(&self, k: usize) -> f64 {
        let [a, b, c] = self.triangles[k].map(|v| self.nodes[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn vertices(&self, k: usize) -> [[f64; 2]; 3] {
        self.triangles[k].map(|v| self.nodes[v])
    }

    pub fn centroid(&self, k: usize) -> [f64; 2] {
        let [a, b, c] = self.vertices(k);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn omega_area(&self) -> f64 {
        self.omega_triangles.iter().map(|&k| self.area(k)).sum()
    }

    /// Index of a triangle containing `p` (ties on edges resolved towards the
    /// lower-right triangle of the lower-left square).
    pub fn locate(&self, p: [f64; 2]) -> usize {
        let n = self.n_per_side;
        let sx = (p[0] * n as f64).clamp(0.0, n as f64);
        let sy = (p[1] * n as f64).clamp(0.0, n as f64);
        let i = (sx.floor() as usize).min(n - 1);
        let j = (sy.floor() as usize).min(n - 1);
        let local = if sx - i as f64 >= sy - j as f64 { 0 } else { 1 };
        2 * (j * n + i) + local
    }

    /// Barycentric coordinates of `p` in triangle `k`.
    pub fn barycentric(&self, k: usize, p: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.vertices(k);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    pub fn is_boundary_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.nodes.len()];
        for &v in &self.boundary_nodes {
            mask[v] = true;
        }
        mask
    }

    pub fn omega_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.triangles.len()];
        for &k in &self.omega_triangles {
            mask[k] = true;
        }
        mask
    }
}

/// Partition of the reference interval [0, 1] into `M` intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    pub breakpoints: Vec<f64>,
    pub k: Vec<f64>,
}

impl TimeGrid {
    pub fn num_intervals(&self) -> usize {
        self.k.len()
    }

    /// Interval index m (0-based) with t in (t_m, t_{m+1}]; t = 0 maps to 0.
    pub fn interval_of(&self, t: f64) -> usize {
        let m = self.k.len();
        let idx = self.breakpoints.partition_point(|&b| b < t);
        idx.saturating_sub(1).min(m - 1)
    }

    pub fn is_uniform(&self) -> bool {
        let max = self.k.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.k.iter().cloned().fold(f64::MAX, f64::min);
        max == min
    }
}

/// Uniform grid with `m` intervals.
pub fn build_time_grid(m: usize) -> Result<TimeGrid> {
    if m == 0 {
        return Err(Error::Config("time grid needs M >= 1".into()));
    }
    let breakpoints: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
    Ok(TimeGrid { breakpoints, k: vec![1.0 / m as f64; m] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_mesh() {
        let m = build_structured_mesh(1, &[Rect::unit()]).unwrap();
        assert_eq!(m.num_nodes(), 4);
        assert_eq!(m.num_triangles(), 2);
        assert_eq!(m.omega_triangles.len(), 2);
        assert_eq!(m.boundary_nodes.len(), 4);
    }

    #[test]
    fn tagged_area_of_three_quarter_square() {
        let m = build_structured_mesh(4, &[Rect::new(0.0, 0.75, 0.0, 0.75)]).unwrap();
        assert!((m.omega_area() - 0.5625).abs() < 1e-14);
    }

    #[test]
    fn half_strip_tags_half() {
        let m = build_structured_mesh(2, &[Rect::new(0.0, 0.5, 0.0, 1.0)]).unwrap();
        assert_eq!(m.num_triangles(), 8);
        assert_eq!(m.omega_triangles.len(), 4);
    }

    #[test]
    fn misaligned_rectangle_is_rejected() {
        let err = build_structured_mesh(4, &[Rect::new(0.0, 0.3, 0.0, 1.0)]).unwrap_err();
        assert!(matches!(err, Error::Alignment { .. }));
        assert!(err.to_string().contains("0.3"));
    }

    #[test]
    fn areas_positive_and_sum_to_one() {
        for n in [1, 3, 8] {
            let m = build_structured_mesh(n, &[]).unwrap();
            let total: f64 = (0..m.num_triangles()).map(|k| m.area(k)).sum();
            assert!((0..m.num_triangles()).all(|k| m.area(k) > 0.0));
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn refine_two_triangles() {
        let m = build_structured_mesh(1, &[Rect::unit()]).unwrap();
        let f = refine_uniform(&m);
        assert_eq!(f.num_triangles(), 8);
        assert_eq!(f.num_nodes(), 9);
    }

    #[test]
    fn refining_twice_matches_direct_build() {
        let omega = [Rect::new(0.0, 0.75, 0.0, 0.75)];
        let coarse = build_structured_mesh(4, &omega).unwrap();
        let twice = refine_uniform(&refine_uniform(&coarse));
        let direct = build_structured_mesh(16, &omega).unwrap();
        // set comparison of node coordinates (bit patterns)
        let key = |p: &[f64; 2]| (p[0].to_bits(), p[1].to_bits());
        let mut a: Vec<_> = twice.nodes.iter().map(key).collect();
        let mut b: Vec<_> = direct.nodes.iter().map(key).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert_eq!(twice.triangles, direct.triangles);
        assert_eq!(twice.omega_triangles, direct.omega_triangles);
        assert!((twice.omega_area() - 0.5625).abs() < 1e-14);
        assert_eq!(twice.level, 2);
    }

    #[test]
    fn coarse_nodes_are_fine_nodes() {
        let coarse = build_structured_mesh(4, &[]).unwrap();
        let fine = refine_uniform(&coarse);
        for p in &coarse.nodes {
            assert!(fine.nodes.contains(p));
        }
    }

    #[test]
    fn locate_finds_containing_triangle() {
        let m = build_structured_mesh(8, &[]).unwrap();
        for p in [[0.1, 0.05], [0.9, 0.95], [0.0, 0.0], [1.0, 1.0], [0.5, 0.25]] {
            let k = m.locate(p);
            let b = m.barycentric(k, p);
            assert!(b.iter().all(|&l| l >= -1e-12), "{p:?} {b:?}");
        }
    }

    #[test]
    fn time_grids() {
        let g = build_time_grid(1).unwrap();
        assert_eq!(g.breakpoints, vec![0.0, 1.0]);
        let g = build_time_grid(4).unwrap();
        assert!(g.k.iter().all(|&k| k == 0.25));
        let g = build_time_grid(320).unwrap();
        assert_eq!(g.breakpoints.len(), 321);
        assert!((g.k.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(g.is_uniform());
        assert_eq!(g.interval_of(0.0), 0);
        assert_eq!(g.interval_of(1.0), 319);
        assert_eq!(g.interval_of(1.0 / 320.0), 0);
    }
}
