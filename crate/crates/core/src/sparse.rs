//! Compressed-row sparse matrices, block composition and a direct LU solve.
//!
//! Factorization is delegated to faer's supernodal sparse LU with partial
//! pivoting. The residual contract and the singularity reporting live here.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Conj, Mat};

use crate::math;

/// Accumulates `(row, col, value)` contributions.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder { nrows, ncols, entries: Vec::new() }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn build(self) -> SparseMatrix {
        SparseMatrix::from_triplets(self.nrows, self.ncols, self.entries)
    }
}

/// CSR matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Duplicates are summed in input order, so equal inputs give equal bits.
    pub fn from_triplets(nrows: usize, ncols: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            assert!(r < nrows && c < ncols, "entry ({r}, {c}) outside {nrows}x{ncols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        SparseMatrix { nrows, ncols, row_ptr: vec![0; nrows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut t = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }
    pub fn ncols(&self) -> usize {
        self.ncols
    }
    pub fn nnz(&self) -> usize {
        self.values.len()
    }
    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }
    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn mul_vec_transpose(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                out[j] += v * y[i];
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.iter().map(|(i, j, v)| (j, i, v)).collect())
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &SparseMatrix) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t: Vec<_> = self.iter().collect();
        t.extend(other.iter());
        Self::from_triplets(self.nrows, self.ncols, t)
    }

    /// Keeps rows and columns that map to `Some(new_index)`.
    pub fn select(&self, rows: &[Option<usize>], row_count: usize, cols: &[Option<usize>], col_count: usize) -> Self {
        let mut t = Vec::new();
        for (i, j, v) in self.iter() {
            if let (Some(r), Some(c)) = (rows[i], cols[j]) {
                t.push((r, c, v));
            }
        }
        Self::from_triplets(row_count, col_count, t)
    }

    /// `self * diag(s)`.
    pub fn scale_columns(&self, s: &[f64]) -> Self {
        assert_eq!(s.len(), self.ncols);
        let mut out = self.clone();
        for (v, &c) in out.values.iter_mut().zip(&out.col_idx) {
            *v *= s[c];
        }
        out
    }

    /// Sparse product `self * other`.
    pub fn mul_mat(&self, other: &SparseMatrix) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut cols: Vec<usize> = Vec::new();
        for i in 0..self.nrows {
            cols.clear();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        cols.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            cols.sort_unstable();
            for &j in &cols {
                col_idx.push(j);
                values.push(acc[j]);
            }
            row_ptr[i + 1] = col_idx.len();
        }
        SparseMatrix { nrows: self.nrows, ncols: other.ncols, row_ptr, col_idx, values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(math::abs(*v)))
    }

    /// `max |self - other|` over the union of both patterns.
    pub fn max_abs_diff(&self, other: &SparseMatrix) -> f64 {
        self.add(&other.scaled(-1.0)).max_abs()
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.iter() {
            d[i][j] = v;
        }
        d
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    math::sqrt(dot(a, a))
}

/// A grid of sparse blocks with a right-hand side.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub row_names: Vec<String>,
    pub row_sizes: Vec<usize>,
    pub col_sizes: Vec<usize>,
    blocks: Vec<(usize, usize, SparseMatrix)>,
    pub rhs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("matrix is {0}x{1}, expected square")]
    NotSquare(usize, usize),
    #[error("block ({row}, {col}) is {got_rows}x{got_cols}, expected {want_rows}x{want_cols}")]
    BlockShape { row: usize, col: usize, got_rows: usize, got_cols: usize, want_rows: usize, want_cols: usize },
    #[error("right-hand side has length {got}, expected {want}")]
    RhsLength { got: usize, want: usize },
    #[error("factorization is singular: {0}")]
    Singular(String),
    #[error("relative residual {0:e} exceeds tolerance")]
    Inaccurate(f64),
}

impl BlockSystem {
    /// `sizes[i]` is both the row size of block row `i` and the column size of block column `i`.
    pub fn new(names: &[&str], sizes: &[usize]) -> Self {
        BlockSystem {
            row_names: names.iter().map(|s| String::from(*s)).collect(),
            row_sizes: sizes.to_vec(),
            col_sizes: sizes.to_vec(),
            blocks: Vec::new(),
            rhs: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn set_block(&mut self, row: usize, col: usize, block: SparseMatrix) -> Result<(), SolveError> {
        let (want_rows, want_cols) = (self.row_sizes[row], self.col_sizes[col]);
        if block.nrows() != want_rows || block.ncols() != want_cols {
            return Err(SolveError::BlockShape {
                row,
                col,
                got_rows: block.nrows(),
                got_cols: block.ncols(),
                want_rows,
                want_cols,
            });
        }
        self.blocks.push((row, col, block));
        Ok(())
    }

    pub fn set_rhs(&mut self, row: usize, values: Vec<f64>) -> Result<(), SolveError> {
        if values.len() != self.row_sizes[row] {
            return Err(SolveError::RhsLength { got: values.len(), want: self.row_sizes[row] });
        }
        self.rhs[row] = values;
        Ok(())
    }

    pub fn offsets(&self) -> Vec<usize> {
        let mut o = vec![0];
        for s in &self.row_sizes {
            o.push(o.last().unwrap() + s);
        }
        o
    }

    pub fn matrix(&self) -> SparseMatrix {
        let ro = self.offsets();
        let mut co = vec![0];
        for s in &self.col_sizes {
            co.push(co.last().unwrap() + s);
        }
        let mut t = Vec::new();
        for (r, c, b) in &self.blocks {
            for (i, j, v) in b.iter() {
                t.push((ro[*r] + i, co[*c] + j, v));
            }
        }
        SparseMatrix::from_triplets(*ro.last().unwrap(), *co.last().unwrap(), t)
    }

    pub fn rhs_vector(&self) -> Vec<f64> {
        self.rhs.iter().flatten().copied().collect()
    }

    /// Splits a monolithic vector back into block pieces.
    pub fn split(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let o = self.offsets();
        (0..self.row_sizes.len()).map(|k| x[o[k]..o[k + 1]].to_vec()).collect()
    }

    pub fn solve(&self) -> Result<Vec<f64>, SolveError> {
        solve(&self.matrix(), &self.rhs_vector())
    }
}

pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// LU factorization of a square sparse matrix.
pub struct LuSolver {
    matrix: SparseMatrix,
    lu: Lu<usize, f64>,
}

impl LuSolver {
    pub fn factor(a: &SparseMatrix) -> Result<Self, SolveError> {
        if a.nrows() != a.ncols() {
            return Err(SolveError::NotSquare(a.nrows(), a.ncols()));
        }
        if a.values().iter().any(|v| !v.is_finite()) {
            return Err(SolveError::Singular(String::from("matrix has non-finite entries")));
        }
        let trips: Vec<Triplet<usize, usize, f64>> = a.iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        let csc = SparseColMat::<usize, f64>::try_new_from_triplets(a.nrows(), a.ncols(), &trips)
            .map_err(|e| SolveError::Singular(alloc::format!("{e:?}")))?;
        let lu = csc.sp_lu().map_err(|e| SolveError::Singular(alloc::format!("{e:?}")))?;
        Ok(LuSolver { matrix: a.clone(), lu })
    }

    fn raw(&self, b: &[f64], transpose: bool) -> Vec<f64> {
        let n = b.len();
        let mut rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
        if transpose {
            self.lu.solve_transpose_in_place_with_conj(Conj::No, rhs.as_mut());
        } else {
            self.lu.solve_in_place_with_conj(Conj::No, rhs.as_mut());
        }
        (0..n).map(|i| rhs[(i, 0)]).collect()
    }

    fn residual(&self, x: &[f64], b: &[f64], transpose: bool) -> Vec<f64> {
        let ax = if transpose { self.matrix.mul_vec_transpose(x) } else { self.matrix.mul_vec(x) };
        b.iter().zip(&ax).map(|(b, a)| b - a).collect()
    }

    fn solve_impl(&self, b: &[f64], transpose: bool) -> Result<Vec<f64>, SolveError> {
        let n = self.matrix.nrows();
        if b.len() != n {
            return Err(SolveError::RhsLength { got: b.len(), want: n });
        }
        let bnorm = norm2(b);
        if bnorm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let mut x = self.raw(b, transpose);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SolveError::Singular(String::from("zero pivot encountered")));
        }
        let mut r = self.residual(&x, b, transpose);
        let mut rel = norm2(&r) / bnorm;
        // a few sweeps of iterative refinement
        for _ in 0..3 {
            if rel <= 1e-15 {
                break;
            }
            let dx = self.raw(&r, transpose);
            let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
            let rc = self.residual(&cand, b, transpose);
            let relc = norm2(&rc) / bnorm;
            if !(relc < rel) {
                break;
            }
            x = cand;
            r = rc;
            rel = relc;
        }
        if !rel.is_finite() {
            return Err(SolveError::Singular(String::from("non-finite residual")));
        }
        if rel > RESIDUAL_TOLERANCE {
            // a near-zero pivot shows up as an unresolvable residual
            if rel > 1e-2 {
                return Err(SolveError::Singular(alloc::format!("relative residual {rel:e}")));
            }
            return Err(SolveError::Inaccurate(rel));
        }
        Ok(x)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, SolveError> {
        self.solve_impl(b, false)
    }

    pub fn solve_transpose(&self, c: &[f64]) -> Result<Vec<f64>, SolveError> {
        self.solve_impl(c, true)
    }
}

/// Solves `a x = b` with relative residual at most [`RESIDUAL_TOLERANCE`].
pub fn solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>, SolveError> {
    LuSolver::factor(a)?.solve(b)
}

pub fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let bn = norm2(b);
    if bn == 0.0 { norm2(&r) } else { norm2(&r) / bn }
}
