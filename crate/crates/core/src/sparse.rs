//! Symmetric sparse matrices stored as the upper triangle in compressed
//! sparse column form, plus a sparse Cholesky wrapper.

use std::sync::Arc;

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::Side;

use crate::error::{Error, Result};

/// Upper-triangular CSC sparsity pattern with sorted row indices.
/// Every diagonal entry is always present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
}

/// Collects entries of a symmetric pattern.
#[derive(Debug, Clone)]
pub struct PatternBuilder {
    cols: Vec<Vec<usize>>,
}

impl PatternBuilder {
    pub fn new(n: usize) -> Self {
        PatternBuilder {
            cols: (0..n).map(|j| vec![j]).collect(),
        }
    }

    pub fn add(&mut self, i: usize, j: usize) {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        self.cols[c].push(r);
    }

    /// Adds the dense coupling block between all listed indices.
    pub fn add_clique(&mut self, idx: &[usize]) {
        for &a in idx {
            for &b in idx {
                if a <= b {
                    self.cols[b].push(a);
                }
            }
        }
    }

    pub fn build(mut self) -> Pattern {
        let n = self.cols.len();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for col in self.cols.iter_mut() {
            col.sort_unstable();
            col.dedup();
            row_idx.extend_from_slice(col);
            col_ptr.push(row_idx.len());
        }
        Pattern { n, col_ptr, row_idx }
    }
}

impl Pattern {
    pub fn diagonal(n: usize) -> Pattern {
        PatternBuilder::new(n).build()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    /// Storage slot of entry (i, j), in either order.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        let lo = self.col_ptr[c];
        let hi = self.col_ptr[c + 1];
        self.row_idx[lo..hi].binary_search(&r).ok().map(|k| lo + k)
    }

    pub fn union(&self, other: &Pattern) -> Pattern {
        assert_eq!(self.n, other.n);
        let mut b = PatternBuilder::new(self.n);
        for p in [self, other] {
            for c in 0..p.n {
                b.cols[c].extend_from_slice(&p.row_idx[p.col_ptr[c]..p.col_ptr[c + 1]]);
            }
        }
        b.build()
    }

    /// Slot map of `self` entries inside `target` (which must contain them).
    pub fn slots_in(&self, target: &Pattern) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nnz());
        for c in 0..self.n {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                out.push(
                    target
                        .find(self.row_idx[k], c)
                        .expect("target pattern misses an entry"),
                );
            }
        }
        out
    }

    /// Iterates (row, col, slot) over the stored upper triangle.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.n).flat_map(move |c| {
            (self.col_ptr[c]..self.col_ptr[c + 1]).map(move |k| (self.row_idx[k], c, k))
        })
    }
}

/// Symmetric matrix with a shared, fixed sparsity pattern.
#[derive(Debug, Clone)]
pub struct SymMatrix {
    pattern: Arc<Pattern>,
    values: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        SymMatrix { pattern, values }
    }

    pub fn identity(n: usize) -> Self {
        let pattern = Arc::new(Pattern::diagonal(n));
        SymMatrix {
            values: vec![1.0; n],
            pattern,
        }
    }

    pub fn from_dense(a: &[Vec<f64>]) -> Self {
        let n = a.len();
        let mut b = PatternBuilder::new(n);
        for (i, row) in a.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if i <= j && v != 0.0 {
                    b.add(i, j);
                }
            }
        }
        let mut m = SymMatrix::zeros(Arc::new(b.build()));
        for (r, c, k) in m.pattern.clone().entries() {
            m.values[k] = a[r][c];
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.pattern.n
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Adds `v` to entry (i, j); off-diagonal entries represent both halves.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .pattern
            .find(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) outside pattern"));
        self.values[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|v| *v *= a);
    }

    pub fn add_diagonal(&mut self, a: f64) {
        for c in 0..self.pattern.n {
            let k = self.pattern.find(c, c).unwrap();
            self.values[k] += a;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        for (r, c, k) in self.pattern.entries() {
            let v = self.values[k];
            y[r] += v * x[c];
            if r != c {
                y[c] += v * x[r];
            }
        }
        y
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        let mut s = vec![0.0; self.dim()];
        for (r, c, k) in self.pattern.entries() {
            let v = self.values[k].abs();
            s[c] += v;
            if r != c {
                s[r] += v;
            }
        }
        s.into_iter().fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut a = vec![vec![0.0; n]; n];
        for (r, c, k) in self.pattern.entries() {
            a[r][c] = self.values[k];
            a[c][r] = self.values[k];
        }
        a
    }

    /// Copies values into a larger pattern.
    pub fn expand_to(&self, target: &Arc<Pattern>) -> SymMatrix {
        let mut out = SymMatrix::zeros(target.clone());
        for (k, s) in self.pattern.slots_in(target).into_iter().enumerate() {
            out.values[s] += self.values[k];
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Sparse LLᵀ factorization with a symbolic analysis reused across
/// numeric factorizations on a fixed pattern.
pub struct Cholesky {
    pattern: Arc<Pattern>,
    symbolic: Option<SymbolicLlt<usize>>,
}

/// Numeric factor produced by [`Cholesky::factor`].
pub struct Factor {
    llt: Option<Llt<usize, f64>>,
    n: usize,
}

impl Cholesky {
    pub fn new(pattern: Arc<Pattern>) -> Result<Self> {
        let symbolic = if pattern.n == 0 {
            None
        } else {
            let sym = SymbolicSparseColMatRef::new_checked(
                pattern.n,
                pattern.n,
                &pattern.col_ptr,
                None,
                &pattern.row_idx,
            );
            Some(
                SymbolicLlt::try_new(sym, Side::Upper)
                    .map_err(|e| Error::Factorization(format!("{e:?}")))?,
            )
        };
        Ok(Cholesky { pattern, symbolic })
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    /// Returns `None` when the matrix is not numerically positive definite.
    pub fn factor(&self, values: &[f64]) -> Option<Factor> {
        let p = &self.pattern;
        if values.len() != p.nnz() || !values.iter().all(|v| v.is_finite()) {
            return None;
        }
        let Some(symbolic) = &self.symbolic else {
            return Some(Factor { llt: None, n: 0 });
        };
        let sym =
            SymbolicSparseColMatRef::new_checked(p.n, p.n, &p.col_ptr, None, &p.row_idx);
        let mat = SparseColMatRef::new(sym, values);
        Llt::try_new_with_symbolic(symbolic.clone(), mat, Side::Upper)
            .ok()
            .map(|llt| Factor {
                llt: Some(llt),
                n: p.n,
            })
    }

    pub fn factor_matrix(&self, m: &SymMatrix) -> Option<Factor> {
        assert!(Arc::ptr_eq(&self.pattern, &m.pattern) || *self.pattern == *m.pattern);
        self.factor(&m.values)
    }
}

impl Factor {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let Some(llt) = &self.llt else {
            return Vec::new();
        };
        let mut x = Col::<f64>::from_fn(self.n, |i| b[i]);
        llt.solve_in_place(&mut x);
        (0..self.n).map(|i| x[i]).collect()
    }
}

/// Fixes the factorization thread count; `0` or `1` means sequential.
pub fn set_threads(n: usize) {
    if n <= 1 {
        faer::set_global_parallelism(faer::Par::Seq);
    } else {
        faer::set_global_parallelism(faer::Par::rayon(n));
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
