//! Matrices over GF(p) and the extended-codeword bijection.
//!
//! Encoders are stored row-sparse ([`SparseMatrix`]); elimination, inversion
//! and the reconstruction map run on [`DenseMatrix`]. An
//! [`ExtendedCodeSystem`] bundles an encoder `A`, a complement `B` and the
//! inverse of the stacked map `x -> (Ax, Bx)`, with the extended-codeword
//! coordinates interleaved according to an index partition `(I0, I1)`.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gf::FieldSpec;

/// Row-major dense matrix over GF(p).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseMatrix {
    field: FieldSpec,
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl DenseMatrix {
    pub fn zeros(field: FieldSpec, rows: usize, cols: usize) -> Self {
        DenseMatrix {
            field,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(field: FieldSpec, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(field: FieldSpec, rows: &[Vec<u8>], cols: usize) -> Result<Self> {
        let mut m = Self::zeros(field, rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Usage(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            field.check_symbols(r)?;
            m.data[i * cols..(i + 1) * cols].copy_from_slice(r);
        }
        Ok(m)
    }

    #[inline]
    pub fn field(&self) -> FieldSpec {
        self.field
    }
    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }
    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.data[i * self.cols + j]
    }
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u8) {
        self.data[i * self.cols + j] = v;
    }
    #[inline]
    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.cols {
                self.data.swap(a * self.cols + j, b * self.cols + j);
            }
        }
    }

    pub fn apply(&self, x: &[u8]) -> Result<Vec<u8>> {
        if x.len() != self.cols {
            return Err(Error::Usage(format!(
                "vector length {} does not match {} columns",
                x.len(),
                self.cols
            )));
        }
        let f = self.field;
        Ok((0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(0u8, |acc, (&a, &b)| f.add(acc, f.mul(a, b)))
            })
            .collect())
    }

    pub fn mul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows || self.field != other.field {
            return Err(Error::Usage("incompatible matrix product".into()));
        }
        let f = self.field;
        let mut out = DenseMatrix::zeros(f, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let v = f.add(out.get(i, j), f.mul(a, other.get(k, j)));
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.field, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Reduces to row echelon form in place and returns the pivot columns.
    fn row_reduce(&mut self) -> Vec<usize> {
        let f = self.field;
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(pr) = (r..self.rows).find(|&i| self.get(i, c) != 0) else {
                continue;
            };
            self.swap_rows(r, pr);
            let inv = f.inv(self.get(r, c)).expect("pivot is nonzero");
            for j in c..self.cols {
                let v = f.mul(self.get(r, j), inv);
                self.set(r, j, v);
            }
            for i in r + 1..self.rows {
                let factor = self.get(i, c);
                if factor == 0 {
                    continue;
                }
                for j in c..self.cols {
                    let v = f.sub(self.get(i, j), f.mul(factor, self.get(r, j)));
                    self.set(i, j, v);
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        self.clone().row_reduce().len()
    }

    /// Gauss-Jordan inverse.
    pub fn inverse(&self) -> Result<DenseMatrix> {
        if self.rows != self.cols {
            return Err(Error::Domain(format!(
                "cannot invert a non-square {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let f = self.field;
        let mut aug = DenseMatrix::zeros(f, n, 2 * n);
        for i in 0..n {
            aug.data[i * 2 * n..i * 2 * n + n].copy_from_slice(self.row(i));
            aug.set(i, n + i, 1);
        }
        for c in 0..n {
            let Some(pr) = (c..n).find(|&i| aug.get(i, c) != 0) else {
                return Err(Error::Domain("matrix is singular".into()));
            };
            aug.swap_rows(c, pr);
            let inv = f.inv(aug.get(c, c))?;
            for j in 0..2 * n {
                let v = f.mul(aug.get(c, j), inv);
                aug.set(c, j, v);
            }
            for i in 0..n {
                let factor = aug.get(i, c);
                if i == c || factor == 0 {
                    continue;
                }
                for j in 0..2 * n {
                    let v = f.sub(aug.get(i, j), f.mul(factor, aug.get(c, j)));
                    aug.set(i, j, v);
                }
            }
        }
        let mut out = DenseMatrix::zeros(f, n, n);
        for i in 0..n {
            out.data[i * n..(i + 1) * n].copy_from_slice(&aug.row(i)[n..]);
        }
        Ok(out)
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        let rows = (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0)
                    .map(|(j, &v)| (j, v))
                    .collect()
            })
            .collect();
        SparseMatrix {
            field: self.field,
            cols: self.cols,
            rows,
        }
    }
}

/// `l x n` matrix stored as per-row lists of `(column, nonzero value)`,
/// columns strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseMatrix {
    field: FieldSpec,
    cols: usize,
    rows: Vec<Vec<(usize, u8)>>,
}

impl SparseMatrix {
    pub fn new(field: FieldSpec, cols: usize, rows: Vec<Vec<(usize, u8)>>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            for (k, &(j, v)) in row.iter().enumerate() {
                if j >= cols {
                    return Err(Error::Usage(format!(
                        "row {i}: column {j} out of range for {cols} columns"
                    )));
                }
                if v == 0 || v >= field.p() {
                    return Err(Error::Usage(format!(
                        "row {i}: stored value {v} must be a nonzero element of {field}"
                    )));
                }
                if k > 0 && row[k - 1].0 >= j {
                    return Err(Error::Usage(format!(
                        "row {i}: column indices must be strictly increasing"
                    )));
                }
            }
        }
        Ok(SparseMatrix { field, cols, rows })
    }

    pub fn from_dense_rows(field: FieldSpec, rows: &[Vec<u8>], cols: usize) -> Result<Self> {
        Ok(DenseMatrix::from_rows(field, rows, cols)?.to_sparse())
    }

    pub fn identity(field: FieldSpec, n: usize) -> Self {
        SparseMatrix {
            field,
            cols: n,
            rows: (0..n).map(|i| vec![(i, 1)]).collect(),
        }
    }

    pub fn zeros(field: FieldSpec, rows: usize, cols: usize) -> Self {
        SparseMatrix {
            field,
            cols,
            rows: vec![Vec::new(); rows],
        }
    }

    #[inline]
    pub fn field(&self) -> FieldSpec {
        self.field
    }
    #[inline]
    pub fn rows(&self) -> usize {
        self.rows.len()
    }
    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }
    #[inline]
    pub fn row(&self, i: usize) -> &[(usize, u8)] {
        &self.rows[i]
    }

    pub fn max_row_weight(&self) -> usize {
        self.rows.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map(|k| self.rows[i][k].1)
            .unwrap_or(0)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.field, self.rows(), self.cols);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m.set(i, j, v);
            }
        }
        m
    }

    /// Matrix-vector product over GF(p).
    pub fn apply(&self, x: &[u8]) -> Result<Vec<u8>> {
        if x.len() != self.cols {
            return Err(Error::Usage(format!(
                "vector length {} does not match {} columns",
                x.len(),
                self.cols
            )));
        }
        let f = self.field;
        Ok(self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .fold(0u8, |acc, &(j, v)| f.add(acc, f.mul(v, x[j])))
            })
            .collect())
    }

    /// Column `j` as `(row, value)` pairs.
    pub fn column(&self, j: usize) -> Vec<(usize, u8)> {
        (0..self.rows())
            .filter_map(|i| match self.get(i, j) {
                0 => None,
                v => Some((i, v)),
            })
            .collect()
    }

    /// Submatrix made of columns `start..cols`, re-indexed from zero.
    pub fn column_suffix(&self, start: usize) -> SparseMatrix {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .filter(|&&(j, _)| j >= start)
                    .map(|&(j, v)| (j - start, v))
                    .collect()
            })
            .collect();
        SparseMatrix {
            field: self.field,
            cols: self.cols.saturating_sub(start),
            rows,
        }
    }

    /// Submatrix with every column `< start` removed but indices kept.
    fn drop_leading_column(&self, start: usize) -> SparseMatrix {
        let rows = self
            .rows
            .iter()
            .map(|row| row.iter().copied().filter(|&(j, _)| j != start).collect())
            .collect();
        SparseMatrix {
            field: self.field,
            cols: self.cols,
            rows,
        }
    }

    /// `A S` where column `j` of the result is column `perm.source(j)` of `A`.
    pub fn permute_columns(&self, perm: &Permutation) -> SparseMatrix {
        let inv = perm.inverse_map();
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut r: Vec<(usize, u8)> = row.iter().map(|&(j, v)| (inv[j], v)).collect();
                r.sort_unstable_by_key(|e| e.0);
                r
            })
            .collect();
        SparseMatrix {
            field: self.field,
            cols: self.cols,
            rows,
        }
    }

    pub fn rank(&self) -> usize {
        self.to_dense().rank()
    }

    pub fn invert(&self) -> Result<SparseMatrix> {
        Ok(self.to_dense().inverse()?.to_sparse())
    }
}

/// Successive column-suffix views `A_j^n` obtained by deleting the left-end
/// column one step at a time, rather than re-slicing.
pub fn column_suffixes(a: &SparseMatrix) -> Vec<SparseMatrix> {
    let mut out = Vec::with_capacity(a.cols() + 1);
    let mut cur = a.clone();
    for j in 0..=a.cols() {
        out.push(cur.column_suffix(j));
        if j < a.cols() {
            cur = cur.drop_leading_column(j);
        }
    }
    out
}

impl fmt::Display for SparseMatrix {
    /// Text format: header `p l n`, then one line per row,
    /// `k idx1:val1 ... idxk:valk` with 0-based indices.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {} {}", self.field.p(), self.rows(), self.cols)?;
        for row in &self.rows {
            write!(f, "{}", row.len())?;
            for &(j, v) in row {
                write!(f, " {j}:{v}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl FromStr for SparseMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut lines = s.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty matrix file"))?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::parse(1, format!("bad header token `{t}`"))))
            .collect::<Result<_>>()?;
        let [p, l, n] = nums[..] else {
            return Err(Error::parse(1, "header must be `p l n`"));
        };
        let field = FieldSpec::new(p as u32)?;
        let mut rows = Vec::with_capacity(l);
        for (ln, line) in lines.by_ref().take(l) {
            let ln = ln + 1;
            let mut toks = line.split_whitespace();
            let k: usize = toks
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::parse(ln, "missing row weight"))?;
            let entries: Vec<(usize, u8)> = toks
                .map(|t| {
                    let (j, v) = t
                        .split_once(':')
                        .ok_or_else(|| Error::parse(ln, format!("bad entry `{t}`")))?;
                    Ok((
                        j.parse().map_err(|_| Error::parse(ln, format!("bad index `{j}`")))?,
                        v.parse().map_err(|_| Error::parse(ln, format!("bad value `{v}`")))?,
                    ))
                })
                .collect::<Result<_>>()?;
            if entries.len() != k {
                return Err(Error::parse(ln, format!("row declares {k} entries, found {}", entries.len())));
            }
            rows.push(entries);
        }
        if rows.len() != l {
            return Err(Error::parse(rows.len() + 2, format!("expected {l} rows")));
        }
        if let Some((ln, extra)) = lines.find(|(_, t)| !t.trim().is_empty()) {
            return Err(Error::parse(ln + 1, format!("trailing content `{extra}`")));
        }
        SparseMatrix::new(field, n, rows)
    }
}

/// Column permutation `S`, stored as `source[j]` = original column placed at
/// position `j` of `A S`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    source: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            source: (0..n).collect(),
        }
    }

    pub fn from_sources(source: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; source.len()];
        for &s in &source {
            if s >= source.len() || std::mem::replace(&mut seen[s], true) {
                return Err(Error::Usage("not a permutation".into()));
            }
        }
        Ok(Permutation { source })
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.source.iter().enumerate().all(|(j, &s)| j == s)
    }

    #[inline]
    pub fn source(&self, j: usize) -> usize {
        self.source[j]
    }

    fn inverse_map(&self) -> Vec<usize> {
        let mut inv = vec![0; self.source.len()];
        for (j, &s) in self.source.iter().enumerate() {
            inv[s] = j;
        }
        inv
    }

    /// `S^{-1} x`: reorders a vector into the permuted coordinates.
    pub fn to_working<T: Copy>(&self, x: &[T]) -> Vec<T> {
        self.source.iter().map(|&s| x[s]).collect()
    }

    /// `S w`: inverse of [`Permutation::to_working`].
    pub fn from_working<T: Copy + Default>(&self, w: &[T]) -> Vec<T> {
        let mut x = vec![T::default(); w.len()];
        for (j, &s) in self.source.iter().enumerate() {
            x[s] = w[j];
        }
        x
    }
}

/// Finds a column permutation `S` such that the rightmost `l x l` block of
/// `A S` is invertible. Returns the identity when `A` already qualifies;
/// otherwise pivots greedily on the lowest-index usable columns and moves
/// them to the right, keeping the relative order within each group.
pub fn permute_columns_full_rank_tail(a: &SparseMatrix) -> Result<(SparseMatrix, Permutation)> {
    let (l, n) = (a.rows(), a.cols());
    if l > n {
        return Err(Error::Domain(format!("{l}x{n} encoder cannot have full row rank")));
    }
    if a.column_suffix(n - l).rank() == l {
        return Ok((a.clone(), Permutation::identity(n)));
    }
    let pivots = a.to_dense().row_reduce();
    if pivots.len() < l {
        return Err(Error::Domain(format!(
            "encoder has rank {} < {l} rows",
            pivots.len()
        )));
    }
    let mut is_pivot = vec![false; n];
    for &c in &pivots {
        is_pivot[c] = true;
    }
    let source: Vec<usize> = (0..n)
        .filter(|&c| !is_pivot[c])
        .chain(pivots.iter().copied())
        .collect();
    let perm = Permutation { source };
    Ok((a.permute_columns(&perm), perm))
}

/// How extended-codeword coordinates are split between codeword and complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexOrdering {
    /// `I1 = {1..l}`, `I0 = {l+1..n}`.
    Ordered,
    General,
}

#[derive(Debug, Clone)]
enum Reconstruction {
    /// `B = [I | 0]`: `x_head = c0`, `x_tail = T^{-1} (c1 - A_head x_head)`.
    IdentityComplement { tail_inverse: DenseMatrix },
    /// Full inverse of the stacked map, rows in extended-codeword order.
    Dense { inverse: DenseMatrix },
}

/// Encoder `A`, complement `B`, index partition and the map `Q` with
/// `Q(Ax, Bx) = x`.
#[derive(Debug, Clone)]
pub struct ExtendedCodeSystem {
    a: SparseMatrix,
    b: SparseMatrix,
    in_i1: Vec<bool>,
    i1: Vec<usize>,
    i0: Vec<usize>,
    /// For each extended coordinate, its row within `A` or `B`.
    slot: Vec<usize>,
    ordering: IndexOrdering,
    recon: Reconstruction,
}

/// Builds the `[I | 0]` complement for an encoder whose rightmost `l x l`
/// block is invertible, giving an ordered system with `C_{l+j} = X_j`.
pub fn build_complement(a: &SparseMatrix) -> Result<ExtendedCodeSystem> {
    let (l, n) = (a.rows(), a.cols());
    if l > n {
        return Err(Error::Domain(format!("{l}x{n} encoder has more rows than columns")));
    }
    let tail_inverse = a.column_suffix(n - l).to_dense().inverse().map_err(|_| {
        Error::Domain("rightmost l x l block of the encoder is singular; permute columns first".into())
    })?;
    let f = a.field();
    let b = SparseMatrix {
        field: f,
        cols: n,
        rows: (0..n - l).map(|i| vec![(i, 1)]).collect(),
    };
    let in_i1: Vec<bool> = (0..n).map(|i| i < l).collect();
    let slot = (0..n).map(|i| if i < l { i } else { i - l }).collect();
    Ok(ExtendedCodeSystem {
        a: a.clone(),
        b,
        i1: (0..l).collect(),
        i0: (l..n).collect(),
        in_i1,
        slot,
        ordering: IndexOrdering::Ordered,
        recon: Reconstruction::IdentityComplement { tail_inverse },
    })
}

impl ExtendedCodeSystem {
    /// General system from an invertible `n x n` transform `T` (extended
    /// codeword `c = T x`) and a membership mask for `I1`. `A` collects the
    /// rows of `T` in `I1`, `B` the rows in `I0`, both in increasing order.
    pub fn from_transform(t: &DenseMatrix, in_i1: Vec<bool>) -> Result<Self> {
        let n = t.rows();
        if t.cols() != n || in_i1.len() != n {
            return Err(Error::Usage("transform must be n x n with an n-entry mask".into()));
        }
        let inverse = t.inverse()?;
        let f = t.field();
        let (mut a_rows, mut b_rows) = (Vec::new(), Vec::new());
        let (mut i1, mut i0, mut slot) = (Vec::new(), Vec::new(), Vec::with_capacity(n));
        for (i, &member) in in_i1.iter().enumerate() {
            let row = t.row(i).to_vec();
            if member {
                slot.push(a_rows.len());
                a_rows.push(row);
                i1.push(i);
            } else {
                slot.push(b_rows.len());
                b_rows.push(row);
                i0.push(i);
            }
        }
        let ordering = if i1.iter().enumerate().all(|(k, &i)| k == i) {
            IndexOrdering::Ordered
        } else {
            IndexOrdering::General
        };
        Ok(ExtendedCodeSystem {
            a: SparseMatrix::from_dense_rows(f, &a_rows, n)?,
            b: SparseMatrix::from_dense_rows(f, &b_rows, n)?,
            in_i1,
            i1,
            i0,
            slot,
            ordering,
            recon: Reconstruction::Dense { inverse },
        })
    }

    #[inline]
    pub fn field(&self) -> FieldSpec {
        self.a.field()
    }
    #[inline]
    pub fn n(&self) -> usize {
        self.a.cols()
    }
    #[inline]
    pub fn l(&self) -> usize {
        self.a.rows()
    }
    pub fn a(&self) -> &SparseMatrix {
        &self.a
    }
    pub fn b(&self) -> &SparseMatrix {
        &self.b
    }
    pub fn ordering(&self) -> IndexOrdering {
        self.ordering
    }
    /// Codeword coordinates, 0-based and increasing.
    pub fn i1(&self) -> &[usize] {
        &self.i1
    }
    /// Complement coordinates, 0-based and increasing.
    pub fn i0(&self) -> &[usize] {
        &self.i0
    }
    #[inline]
    pub fn is_codeword_index(&self, i: usize) -> bool {
        self.in_i1[i]
    }

    /// True when `B = [I | 0]` so that `C_{l+j} = X_j`.
    pub fn has_identity_complement(&self) -> bool {
        matches!(self.recon, Reconstruction::IdentityComplement { .. })
    }

    /// Inverse of the rightmost `l x l` block of `A` (identity-complement
    /// systems only).
    pub fn tail_inverse(&self) -> Option<&DenseMatrix> {
        match &self.recon {
            Reconstruction::IdentityComplement { tail_inverse } => Some(tail_inverse),
            Reconstruction::Dense { .. } => None,
        }
    }

    /// Row `i` of the stacked transform in extended-codeword order.
    pub fn transform_row(&self, i: usize) -> &[(usize, u8)] {
        if self.in_i1[i] {
            self.a.row(self.slot[i])
        } else {
            self.b.row(self.slot[i])
        }
    }

    /// Stacked transform `T` with `c = T x`, rows in extended-codeword order.
    pub fn transform(&self) -> DenseMatrix {
        let n = self.n();
        let mut t = DenseMatrix::zeros(self.field(), n, n);
        for i in 0..n {
            for &(j, v) in self.transform_row(i) {
                t.set(i, j, v);
            }
        }
        t
    }

    pub fn encode(&self, x: &[u8]) -> Result<Vec<u8>> {
        self.a.apply(x)
    }

    /// Extended codeword `c` of `x`, coordinates interleaved per `(I0, I1)`.
    pub fn extend(&self, x: &[u8]) -> Result<Vec<u8>> {
        if x.len() != self.n() {
            return Err(Error::Usage(format!(
                "source block has length {}, expected {}",
                x.len(),
                self.n()
            )));
        }
        let f = self.field();
        Ok((0..self.n())
            .map(|i| {
                self.transform_row(i)
                    .iter()
                    .fold(0u8, |acc, &(j, v)| f.add(acc, f.mul(v, x[j])))
            })
            .collect())
    }

    /// Merges codeword and complement symbols into one extended codeword.
    pub fn interleave(&self, c1: &[u8], c0: &[u8]) -> Result<Vec<u8>> {
        if c1.len() != self.l() || c0.len() != self.n() - self.l() {
            return Err(Error::Usage(format!(
                "expected codeword of length {} and complement of length {}",
                self.l(),
                self.n() - self.l()
            )));
        }
        Ok((0..self.n())
            .map(|i| if self.in_i1[i] { c1[self.slot[i]] } else { c0[self.slot[i]] })
            .collect())
    }

    /// Splits an extended codeword into `(c1, c0)`.
    pub fn split(&self, c: &[u8]) -> (Vec<u8>, Vec<u8>) {
        (
            self.i1.iter().map(|&i| c[i]).collect(),
            self.i0.iter().map(|&i| c[i]).collect(),
        )
    }

    /// `x = [A, B]^{-1} c` for an interleaved extended codeword.
    pub fn source_from_extended(&self, c: &[u8]) -> Result<Vec<u8>> {
        if c.len() != self.n() {
            return Err(Error::Usage("extended codeword length mismatch".into()));
        }
        let f = self.field();
        match &self.recon {
            Reconstruction::Dense { inverse } => inverse.apply(c),
            Reconstruction::IdentityComplement { tail_inverse } => {
                let (l, n) = (self.l(), self.n());
                let head = &c[l..];
                let mut target = c[..l].to_vec();
                for (r, t) in target.iter_mut().enumerate() {
                    for &(j, v) in self.a.row(r) {
                        if j < n - l {
                            *t = f.sub(*t, f.mul(v, head[j]));
                        }
                    }
                }
                let tail = tail_inverse.apply(&target)?;
                Ok(head.iter().copied().chain(tail).collect())
            }
        }
    }

    /// `Q(c1, c0)`: the unique `x` with `Ax = c1` and `Bx = c0`.
    pub fn q_map(&self, c1: &[u8], c0: &[u8]) -> Result<Vec<u8>> {
        self.source_from_extended(&self.interleave(c1, c0)?)
    }
}

/// Draws a full-rank `l x n` matrix whose rows carry at most `w` nonzeros.
/// Rows are generated one at a time and rejected until they raise the rank.
pub fn sample_sparse_full_rank(
    field: FieldSpec,
    n: usize,
    l: usize,
    w: usize,
    seed: u64,
) -> Result<SparseMatrix> {
    const ATTEMPTS_PER_ROW: usize = 10_000;
    if l == 0 || l > n || w == 0 {
        return Err(Error::Usage(format!(
            "need 1 <= l <= n and w >= 1 (got n={n}, l={l}, w={w})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_weight = w.min(n);
    let mut basis = EchelonBasis::new(field, n);
    let mut rows = Vec::with_capacity(l);
    for _ in 0..l {
        let mut accepted = false;
        for _ in 0..ATTEMPTS_PER_ROW {
            let weight = rng.random_range(1..=max_weight);
            let mut cols = index::sample(&mut rng, n, weight).into_vec();
            cols.sort_unstable();
            let row: Vec<(usize, u8)> = cols
                .into_iter()
                .map(|j| (j, rng.random_range(1..field.p())))
                .collect();
            if basis.insert(&row) {
                rows.push(row);
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(Error::Budget {
                what: "full-rank sparse matrix sampling (attempts per row)",
                needed: f64::INFINITY,
                limit: ATTEMPTS_PER_ROW as f64,
            });
        }
    }
    SparseMatrix::new(field, n, rows)
}

/// Incrementally maintained reduced row basis, keyed by pivot column.
struct EchelonBasis {
    field: FieldSpec,
    n: usize,
    pivot_rows: Vec<Option<Vec<u8>>>,
}

impl EchelonBasis {
    fn new(field: FieldSpec, n: usize) -> Self {
        EchelonBasis {
            field,
            n,
            pivot_rows: vec![None; n],
        }
    }

    /// Adds `row` if it is independent of the basis; returns whether it was.
    fn insert(&mut self, row: &[(usize, u8)]) -> bool {
        let f = self.field;
        let mut v = vec![0u8; self.n];
        for &(j, x) in row {
            v[j] = x;
        }
        for c in 0..self.n {
            if v[c] == 0 {
                continue;
            }
            match &self.pivot_rows[c] {
                Some(prow) => {
                    let factor = v[c];
                    for k in c..self.n {
                        v[k] = f.sub(v[k], f.mul(factor, prow[k]));
                    }
                }
                None => {
                    let inv = f.inv(v[c]).expect("nonzero");
                    for x in v.iter_mut().skip(c) {
                        *x = f.mul(*x, inv);
                    }
                    self.pivot_rows[c] = Some(v);
                    return true;
                }
            }
        }
        false
    }
}
