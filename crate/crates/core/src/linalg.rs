//! Sparse matrices, dense vector helpers, and cached SPD factorizations.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, OnceLock, RwLock};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{MatMut, Side};

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl Csr {
    /// Builds a matrix from (row, col, value) triplets; duplicates are summed
    /// and every listed position is kept in the pattern, even if it sums to 0.
    pub fn from_triplets(nrows: usize, ncols: usize, trips: &[(usize, usize, f64)]) -> Csr {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, _, _) in trips {
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut cols = vec![0usize; trips.len()];
        let mut vals = vec![0.0; trips.len()];
        for &(r, c, v) in trips {
            cols[fill[r]] = c;
            vals[fill[r]] = v;
            fill[r] += 1;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(trips.len());
        let mut data = Vec::with_capacity(trips.len());
        indptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for i in 0..nrows {
            row.clear();
            row.extend((counts[i]..counts[i + 1]).map(|p| (cols[p], vals[p])));
            row.sort_by_key(|e| e.0);
            for &(c, v) in &row {
                if indices.len() > indptr[i] && *indices.last().unwrap() == c {
                    *data.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Csr { nrows, ncols, indptr, indices, data }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.indptr[i]..self.indptr[i + 1]).map(move |p| (self.indices[p], self.data[p]))
    }

    /// y = A x
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        for i in 0..self.nrows {
            let mut s = 0.0;
            for p in self.indptr[i]..self.indptr[i + 1] {
                s += self.data[p] * x[self.indices[p]];
            }
            y[i] = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// y += alpha A x
    pub fn mul_vec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for i in 0..self.nrows {
            let mut s = 0.0;
            for p in self.indptr[i]..self.indptr[i + 1] {
                s += self.data[p] * x[self.indices[p]];
            }
            y[i] += alpha * s;
        }
    }

    /// y += alpha Aᵀ x
    pub fn tr_mul_vec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for i in 0..self.nrows {
            let xi = alpha * x[i];
            if xi != 0.0 {
                for p in self.indptr[i]..self.indptr[i + 1] {
                    y[self.indices[p]] += self.data[p] * xi;
                }
            }
        }
    }

    /// Submatrix selecting rows and columns through index maps (old → new).
    pub fn select(&self, row_map: &[Option<usize>], nrows: usize, col_map: &[Option<usize>], ncols: usize) -> Csr {
        let mut trips = Vec::new();
        for i in 0..self.nrows {
            if let Some(ni) = row_map[i] {
                for (j, v) in self.row(i) {
                    if let Some(nj) = col_map[j] {
                        trips.push((ni, nj, v));
                    }
                }
            }
        }
        Csr::from_triplets(nrows, ncols, &trips)
    }

    /// a·A + b·B for matrices with identical sparsity pattern.
    pub fn combine_same_pattern(a: f64, m1: &Csr, b: f64, m2: &Csr) -> Csr {
        assert!(m1.indptr == m2.indptr && m1.indices == m2.indices, "patterns differ");
        let data = m1.data.iter().zip(&m2.data).map(|(x, y)| a * x + b * y).collect();
        Csr { nrows: m1.nrows, ncols: m1.ncols, indptr: m1.indptr.clone(), indices: m1.indices.clone(), data }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let cols = &self.indices[self.indptr[i]..self.indptr[i + 1]];
        match cols.binary_search(&j) {
            Ok(p) => self.data[self.indptr[i] + p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, i)).collect()
    }

    /// Largest |A_ij − A_ji|.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn transpose(&self) -> Csr {
        let mut trips = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                trips.push((j, i, v));
            }
        }
        Csr::from_triplets(self.ncols, self.nrows, &trips)
    }

    /// Symmetric CSR viewed as CSC (the same arrays) for faer.
    fn to_faer_symmetric(&self) -> SparseColMat<usize, f64> {
        let symbolic = SymbolicSparseColMat::new_checked(self.nrows, self.ncols, self.indptr.clone(), None, self.indices.clone());
        SparseColMat::new(symbolic, self.data.clone())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// y += alpha x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    for v in x {
        *v *= alpha;
    }
}

/// x[i] - y[i]
pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

/// Cholesky factorization of a sparse symmetric positive definite matrix.
pub struct SpdFactor {
    n: usize,
    llt: Option<Llt<usize, f64>>,
}

impl SpdFactor {
    pub fn new(a: &Csr, symbolic: Option<&SymbolicLlt<usize>>) -> Result<SpdFactor> {
        if a.nrows == 0 {
            return Ok(SpdFactor { n: 0, llt: None });
        }
        let mat = a.to_faer_symmetric();
        let symbolic = match symbolic {
            Some(s) => s.clone(),
            None => SymbolicLlt::try_new(mat.symbolic(), Side::Lower).map_err(|e| Error::Factorization(format!("{e:?}")))?,
        };
        let llt = Llt::try_new_with_symbolic(symbolic, mat.as_ref(), Side::Lower).map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(SpdFactor { n: a.nrows, llt: Some(llt) })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        if let Some(llt) = &self.llt {
            llt.solve_in_place(MatMut::from_column_major_slice_mut(x, self.n, 1));
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Symbolic analysis of a symmetric pattern, reused for every numeric
/// factorization sharing that pattern.
pub fn symbolic_for(a: &Csr) -> Result<Option<SymbolicLlt<usize>>> {
    if a.nrows == 0 {
        return Ok(None);
    }
    let mat = a.to_faer_symmetric();
    SymbolicLlt::try_new(mat.symbolic(), Side::Lower).map(Some).map_err(|e| Error::Factorization(format!("{e:?}")))
}

/// Cache of factorizations of `M + s·A` keyed by the bit pattern of `s`.
/// Readers share the map; inserts take the write lock after the numeric
/// factorization is done outside of it.
pub struct FactorCache {
    mass: Csr,
    stiff: Csr,
    symbolic: OnceLock<Option<SymbolicLlt<usize>>>,
    entries: RwLock<(HashMap<u64, Arc<SpdFactor>>, VecDeque<u64>)>,
    capacity: usize,
}

impl FactorCache {
    pub fn new(mass: Csr, stiff: Csr, capacity: usize) -> FactorCache {
        FactorCache {
            mass,
            stiff,
            symbolic: OnceLock::new(),
            entries: RwLock::new((HashMap::new(), VecDeque::new())),
            capacity: capacity.max(1),
        }
    }

    /// Factorization of `M + s·A`.
    pub fn get(&self, s: f64) -> Result<Arc<SpdFactor>> {
        let key = s.to_bits();
        if let Some(f) = self.entries.read().unwrap().0.get(&key) {
            return Ok(f.clone());
        }
        let symbolic = match self.symbolic.get() {
            Some(sym) => sym,
            None => {
                let sym = symbolic_for(&self.mass)?;
                self.symbolic.get_or_init(|| sym)
            }
        };
        let system = Csr::combine_same_pattern(1.0, &self.mass, s, &self.stiff);
        let factor = Arc::new(SpdFactor::new(&system, symbolic.as_ref())?);
        let mut guard = self.entries.write().unwrap();
        let (map, order) = &mut *guard;
        if !map.contains_key(&key) {
            if map.len() >= self.capacity {
                if let Some(old) = order.pop_front() {
                    map.remove(&old);
                }
            }
            map.insert(key, factor.clone());
            order.push_back(key);
        }
        Ok(map[&key].clone())
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
