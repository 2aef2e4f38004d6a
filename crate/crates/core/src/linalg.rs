//! Exact rational linear algebra (rank, spark, canonical subspace forms,
//! orthogonal projection) plus the floating-point SVD used for entropies.
//!
//! Every identity question (is this column set dependent, do these two
//! affine subsets coincide) is answered in exact arithmetic. Floats appear
//! only where the downstream formula is real-valued.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// Relative singular-value threshold for the floating-point rank.
pub const DEFAULT_FLOAT_RANK_TOL: f64 = 1e-9;

/// Largest column count accepted by exhaustive subset enumeration (spark).
pub const MAX_SUBSET_COLUMNS: usize = 24;

/// Dense exact matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RationalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Rational>,
}

impl RationalMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Rational>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::DimensionMismatch("matrix has no rows".into()));
        }
        let n = rows[0].len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::new(m, n, rows.into_iter().flatten().collect())
    }

    pub fn from_i64_rows(rows: &[&[i64]]) -> Result<Self> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&v| rational::from_int(v)).collect())
                .collect(),
        )
    }

    /// Parses rows of `"p/q"` / decimal literals.
    pub fn from_str_rows(rows: &[&[&str]]) -> Result<Self> {
        let parsed = rows
            .iter()
            .map(|r| r.iter().map(|s| rational::parse_rational(s)).collect())
            .collect::<Result<Vec<Vec<_>>>>()?;
        Self::from_rows(parsed)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Rational::one();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Rational) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[Rational] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Rational> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<Rational>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j).clone());
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        out.data[i * other.cols + j] += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Rational]) -> Result<Vec<Rational>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} for {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| dot(self.row(i), v))
            .collect())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| rational::to_f64(self.get(i, j)))
    }

    /// Matrix JSON object `{ "rows", "cols", "entries": [["p/q", ...], ...] }`.
    pub fn to_json(&self) -> MatrixJson {
        MatrixJson {
            rows: self.rows,
            cols: self.cols,
            entries: (0..self.rows)
                .map(|i| self.row(i).iter().map(rational::format_rational).collect())
                .collect(),
        }
    }

    pub fn from_json(j: &MatrixJson) -> Result<Self> {
        if j.entries.len() != j.rows || j.entries.iter().any(|r| r.len() != j.cols) {
            return Err(Error::DimensionMismatch(format!(
                "matrix JSON declares {}x{} but entries disagree",
                j.rows, j.cols
            )));
        }
        if j.rows == 0 || j.cols == 0 {
            return Err(Error::DimensionMismatch("matrix must be at least 1x1".into()));
        }
        let data = j
            .entries
            .iter()
            .flatten()
            .map(|s| rational::parse_rational(s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(j.rows, j.cols, data)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Vec<String>>,
}

pub(crate) fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter()
        .zip(b)
        .filter(|(x, y)| !x.is_zero() && !y.is_zero())
        .fold(Rational::zero(), |acc, (x, y)| acc + x * y)
}

/// Scales a rational vector by the lcm of its denominators, giving integers.
/// Rank is unaffected by scaling a row (or column) by a nonzero constant.
fn integer_scaled(v: &[Rational]) -> Vec<BigInt> {
    let l = v
        .iter()
        .fold(BigInt::one(), |acc, r| acc.lcm(r.denom()));
    v.iter()
        .map(|r| r.numer() * (&l / r.denom()))
        .collect()
}

/// Fraction-free (Bareiss) elimination rank of an integer matrix given as rows.
fn bareiss_rank_big(mut m: Vec<Vec<BigInt>>) -> usize {
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut prev = BigInt::one();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let (top, rest) = m.split_at_mut(r + 1);
        let pivot_row = &top[r];
        let pivot = pivot_row[c].clone();
        for row in rest.iter_mut() {
            let lead = row[c].clone();
            for j in c + 1..cols {
                let v = &pivot * &row[j] - &lead * &pivot_row[j];
                row[j] = v / &prev;
            }
            row[c] = BigInt::zero();
        }
        prev = pivot;
        r += 1;
    }
    r
}

/// Same elimination in i128 with overflow detection. `None` on overflow.
fn bareiss_rank_i128(mut m: Vec<Vec<i128>>) -> Option<usize> {
    let rows = m.len();
    if rows == 0 {
        return Some(0);
    }
    let cols = m[0].len();
    let mut prev: i128 = 1;
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| m[i][c] != 0) else {
            continue;
        };
        m.swap(r, p);
        let (top, rest) = m.split_at_mut(r + 1);
        let pivot_row = &top[r];
        let pivot = pivot_row[c];
        for row in rest.iter_mut() {
            let lead = row[c];
            if lead == 0 {
                // (pivot * x) / prev is still exact; skip the zero product.
                for j in c + 1..cols {
                    row[j] = pivot.checked_mul(row[j])? / prev;
                }
            } else {
                for j in c + 1..cols {
                    let v = pivot
                        .checked_mul(row[j])?
                        .checked_sub(lead.checked_mul(pivot_row[j])?)?;
                    row[j] = v / prev;
                }
            }
            row[c] = 0;
        }
        prev = pivot;
        r += 1;
    }
    Some(r)
}

fn integer_rank(rows: Vec<Vec<BigInt>>) -> usize {
    let small: Option<Vec<Vec<i128>>> = rows
        .iter()
        .map(|r| r.iter().map(|v| v.to_i64().map(i128::from)).collect())
        .collect();
    if let Some(small) = small {
        if let Some(r) = bareiss_rank_i128(small) {
            return r;
        }
    }
    bareiss_rank_big(rows)
}

/// Exact rank by fraction-free elimination.
pub fn rank(m: &RationalMatrix) -> usize {
    if m.cols() == 0 || m.rows() == 0 {
        return 0;
    }
    let rows = (0..m.rows()).map(|i| integer_scaled(m.row(i))).collect();
    integer_rank(rows)
}

/// Columns of `m` where `pattern[j]` is set, in original order. An empty
/// pattern yields an `m x 0` matrix whose rank is 0.
pub fn column_submatrix(m: &RationalMatrix, pattern: &[bool]) -> Result<RationalMatrix> {
    if pattern.len() != m.cols() {
        return Err(Error::DimensionMismatch(format!(
            "pattern of length {} for {} columns",
            pattern.len(),
            m.cols()
        )));
    }
    let keep: Vec<usize> = (0..m.cols()).filter(|&j| pattern[j]).collect();
    let mut data = Vec::with_capacity(m.rows() * keep.len());
    for i in 0..m.rows() {
        for &j in &keep {
            data.push(m.get(i, j).clone());
        }
    }
    RationalMatrix::new(m.rows(), keep.len(), data)
}

/// Rank oracle for column subsets of a fixed matrix. Columns are stored
/// integer-scaled once, so each query is a single Bareiss pass over the
/// selected columns (taken as rows).
#[derive(Debug, Clone)]
pub struct ColumnRanker {
    rows: usize,
    columns: Vec<Vec<BigInt>>,
    small: Option<Vec<Vec<i128>>>,
    /// Column residues modulo each of `MODULAR_PRIMES`.
    residues: Vec<Vec<Vec<u64>>>,
}

/// Two 31-bit primes; products of residues fit in a `u64`.
pub const MODULAR_PRIMES: [u64; 2] = [2_147_483_647, 2_147_483_629];

impl ColumnRanker {
    pub fn new(m: &RationalMatrix) -> Self {
        let columns: Vec<Vec<BigInt>> = (0..m.cols())
            .map(|j| integer_scaled(&m.column(j)))
            .collect();
        let small = columns
            .iter()
            .map(|c| c.iter().map(|v| v.to_i64().map(i128::from)).collect())
            .collect();
        let residues = MODULAR_PRIMES
            .iter()
            .map(|&p| {
                let pb = BigInt::from(p);
                columns
                    .iter()
                    .map(|c| {
                        c.iter()
                            .map(|v| v.mod_floor(&pb).to_u64().expect("residue below p"))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            rows: m.rows(),
            columns,
            small,
            residues,
        }
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn rank_of(&self, cols: &[usize]) -> usize {
        if cols.is_empty() {
            return 0;
        }
        if let Some(small) = &self.small {
            let sel = cols.iter().map(|&j| small[j].clone()).collect();
            if let Some(r) = bareiss_rank_i128(sel) {
                return r;
            }
        }
        bareiss_rank_big(cols.iter().map(|&j| self.columns[j].clone()).collect())
    }

    /// Rank of the columns whose bits are set in `mask` (bit j = column j).
    pub fn rank_of_mask(&self, mask: u64) -> usize {
        self.rank_of(&mask_to_indices(mask, self.cols()))
    }

    pub fn rank_of_pattern(&self, pattern: &[bool]) -> usize {
        let cols: Vec<usize> = pattern
            .iter()
            .enumerate()
            .filter_map(|(j, &b)| b.then_some(j))
            .collect();
        self.rank_of(&cols)
    }

    /// Rank over the prime field F_p. Never exceeds the rational rank.
    pub fn rank_of_mask_mod(&self, mask: u64, p: u64) -> usize {
        let pb = BigInt::from(p);
        let rows: Vec<Vec<u64>> = mask_to_indices(mask, self.cols())
            .into_iter()
            .map(|j| {
                self.columns[j]
                    .iter()
                    .map(|v| v.mod_floor(&pb).to_u64().unwrap_or(0))
                    .collect()
            })
            .collect();
        rank_mod_p(rows, p)
    }

    /// Max of the F_p ranks over `MODULAR_PRIMES`. Equals the rational
    /// rank unless both primes divide every maximal nonzero minor.
    pub fn rank_of_mask_modular(&self, mask: u64) -> usize {
        let cols = mask_to_indices(mask, self.cols());
        let full = cols.len().min(self.rows);
        let mut best = 0;
        for (k, &p) in MODULAR_PRIMES.iter().enumerate() {
            let sel = cols.iter().map(|&j| self.residues[k][j].clone()).collect();
            best = best.max(rank_mod_small_p(sel, p));
            if best == full {
                break;
            }
        }
        best
    }
}

/// Elimination over F_p for `p < 2^32`.
fn rank_mod_small_p(mut m: Vec<Vec<u64>>, p: u64) -> usize {
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(piv) = (r..rows).find(|&i| m[i][c] != 0) else {
            continue;
        };
        m.swap(r, piv);
        let inv = powmod(m[r][c], p - 2, p);
        let (top, rest) = m.split_at_mut(r + 1);
        let pivot_row = &top[r];
        for row in rest.iter_mut() {
            if row[c] == 0 {
                continue;
            }
            let f = row[c] * inv % p;
            for j in c..cols {
                row[j] = (row[j] + p - f * pivot_row[j] % p) % p;
            }
        }
        r += 1;
    }
    r
}

fn mulmod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn powmod(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1;
    while e > 0 {
        if e & 1 == 1 {
            r = mulmod(r, a, p);
        }
        a = mulmod(a, a, p);
        e >>= 1;
    }
    r
}

fn rank_mod_p(mut m: Vec<Vec<u64>>, p: u64) -> usize {
    let rows = m.len();
    if rows == 0 {
        return 0;
    }
    let cols = m[0].len();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(piv) = (r..rows).find(|&i| m[i][c] != 0) else {
            continue;
        };
        m.swap(r, piv);
        let inv = powmod(m[r][c], p - 2, p);
        let (top, rest) = m.split_at_mut(r + 1);
        let pivot_row = &top[r];
        for row in rest.iter_mut() {
            if row[c] == 0 {
                continue;
            }
            let f = mulmod(row[c], inv, p);
            for j in c..cols {
                let sub = mulmod(f, pivot_row[j], p);
                row[j] = (row[j] + p - sub) % p;
            }
        }
        r += 1;
    }
    r
}

pub(crate) fn mask_to_indices(mask: u64, n: usize) -> Vec<usize> {
    (0..n).filter(|&j| mask >> j & 1 == 1).collect()
}

/// Iterates all `k`-subsets of `{0..n}` as bitmasks (Gosper's hack).
pub(crate) fn subsets_of_size(n: usize, k: usize) -> impl Iterator<Item = u64> {
    let limit: u64 = if n >= 64 { u64::MAX } else { 1u64 << n };
    let first: Option<u64> = if k > n {
        None
    } else if k == 0 {
        Some(0)
    } else {
        Some((1u64 << k) - 1)
    };
    let mut cur = first;
    std::iter::from_fn(move || {
        let c = cur?;
        cur = if c == 0 {
            None
        } else {
            let lowest = c & c.wrapping_neg();
            let ripple = c.wrapping_add(lowest);
            if ripple == 0 {
                None
            } else {
                let next = (((ripple ^ c) >> 2) / lowest) | ripple;
                (next < limit).then_some(next)
            }
        };
        Some(c)
    })
}

/// Smallest number of linearly dependent columns; `cols + 1` when every
/// subset is independent. Enumerates subsets by increasing size and stops
/// at the first dependent one (never past `rank + 1`).
pub fn spark(m: &RationalMatrix) -> Result<usize> {
    let n = m.cols();
    if n > MAX_SUBSET_COLUMNS {
        return Err(Error::EnumerationCap {
            n,
            cap: MAX_SUBSET_COLUMNS,
        });
    }
    let ranker = ColumnRanker::new(m);
    let full = ranker.rank_of(&(0..n).collect::<Vec<_>>());
    for k in 1..=full.min(n) {
        let masks: Vec<u64> = subsets_of_size(n, k).collect();
        if masks
            .par_iter()
            .any(|&mask| ranker.rank_of_mask(mask) < k)
        {
            return Ok(k);
        }
    }
    // Every subset up to size `rank` is independent; any `rank + 1` columns
    // are dependent unless there are no more columns to pick.
    Ok(if full < n { full + 1 } else { n + 1 })
}

/// Canonical form of a subspace of Q^m: the nonzero rows of the reduced
/// row echelon form of any spanning set. Two spanning sets give identical
/// canonical forms iff they span the same subspace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubspaceCanonical {
    ambient: usize,
    basis: Vec<Vec<Rational>>,
    pivots: Vec<usize>,
}

impl SubspaceCanonical {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn basis(&self) -> &[Vec<Rational>] {
        &self.basis
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Span of the given vectors (each of length `ambient`).
    pub fn from_vectors(ambient: usize, vectors: Vec<Vec<Rational>>) -> Self {
        let (basis, pivots) = rref(vectors, ambient);
        Self {
            ambient,
            basis,
            pivots,
        }
    }

    /// Exact membership test: `v` lies in the subspace.
    pub fn contains(&self, v: &[Rational]) -> bool {
        // Read off coefficients at the pivot columns, then compare.
        let mut residual = v.to_vec();
        for (row, &p) in self.basis.iter().zip(&self.pivots) {
            let c = residual[p].clone();
            if c.is_zero() {
                continue;
            }
            for (r, b) in residual.iter_mut().zip(row) {
                if !b.is_zero() {
                    *r -= &c * b;
                }
            }
        }
        residual.iter().all(Zero::is_zero)
    }

    /// Orthonormal float basis (columns) of the subspace, via Gram-Schmidt
    /// on the canonical rows.
    pub fn orthonormal_basis(&self) -> DMatrix<f64> {
        let r = self.dimension();
        let mut q = DMatrix::<f64>::zeros(self.ambient, r);
        for (k, row) in self.basis.iter().enumerate() {
            let mut v: Vec<f64> = row.iter().map(rational::to_f64).collect();
            // Two passes of modified Gram-Schmidt.
            for _ in 0..2 {
                for prev in 0..k {
                    let d: f64 = (0..self.ambient).map(|i| q[(i, prev)] * v[i]).sum();
                    for (i, vi) in v.iter_mut().enumerate() {
                        *vi -= d * q[(i, prev)];
                    }
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            for (i, vi) in v.iter().enumerate() {
                q[(i, k)] = vi / norm;
            }
        }
        q
    }
}

/// Reduced row echelon form; returns the nonzero rows and pivot columns.
pub(crate) fn rref(mut rows: Vec<Vec<Rational>>, width: usize) -> (Vec<Vec<Rational>>, Vec<usize>) {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..width {
        if r == rows.len() {
            break;
        }
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][c].recip();
        for v in rows[r].iter_mut() {
            if !v.is_zero() {
                *v *= &inv;
            }
        }
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (x, y) in row.iter_mut().zip(&pivot_row) {
                if !y.is_zero() {
                    *x -= &f * y;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    rows.truncate(r);
    (rows, pivots)
}

/// Canonical form of the column span of `m`.
pub fn subspace_canonical(m: &RationalMatrix) -> SubspaceCanonical {
    let vectors = (0..m.cols()).map(|j| m.column(j)).collect();
    SubspaceCanonical::from_vectors(m.rows(), vectors)
}

/// Solves `g x = b` for square nonsingular `g` by Gauss-Jordan.
fn solve_square(g: Vec<Vec<Rational>>, b: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = g.len();
    let aug: Vec<Vec<Rational>> = g
        .into_iter()
        .zip(b)
        .map(|(mut row, bi)| {
            row.push(bi);
            row
        })
        .collect();
    let (red, pivots) = rref(aug, n + 1);
    if pivots.len() != n || pivots.last() == Some(&n) {
        return None;
    }
    Some(red.into_iter().map(|row| row[n].clone()).collect())
}

/// Exact projection of `shift` onto the orthogonal complement of `s`.
pub fn project_orthogonal(shift: &[Rational], s: &SubspaceCanonical) -> Result<Vec<Rational>> {
    if shift.len() != s.ambient() {
        return Err(Error::DimensionMismatch(format!(
            "shift of length {} in ambient dimension {}",
            shift.len(),
            s.ambient()
        )));
    }
    if s.dimension() == 0 {
        return Ok(shift.to_vec());
    }
    let b = s.basis();
    let gram: Vec<Vec<Rational>> = b
        .iter()
        .map(|bi| b.iter().map(|bj| dot(bi, bj)).collect())
        .collect();
    let rhs: Vec<Rational> = b.iter().map(|bi| dot(bi, shift)).collect();
    let coeff = solve_square(gram, rhs).expect("canonical basis rows are independent");
    let mut out = shift.to_vec();
    for (c, bi) in coeff.iter().zip(b) {
        if c.is_zero() {
            continue;
        }
        for (o, x) in out.iter_mut().zip(bi) {
            if !x.is_zero() {
                *o -= c * x;
            }
        }
    }
    Ok(out)
}

/// `I - B^T (B B^T)^{-1} B` for the canonical basis `B` of `s`.
pub fn orthogonal_projector(s: &SubspaceCanonical) -> RationalMatrix {
    let m = s.ambient();
    let mut cols = Vec::with_capacity(m);
    for j in 0..m {
        let mut e = vec![Rational::zero(); m];
        e[j] = Rational::one();
        cols.push(project_orthogonal(&e, s).expect("ambient matches"));
    }
    let mut p = RationalMatrix::zeros(m, m);
    for (j, col) in cols.into_iter().enumerate() {
        for (i, v) in col.into_iter().enumerate() {
            p.set(i, j, v);
        }
    }
    p
}

/// Exact determinant of a square matrix.
pub fn determinant(m: &RationalMatrix) -> Result<Rational> {
    if m.rows() != m.cols() {
        return Err(Error::DimensionMismatch("determinant of non-square matrix".into()));
    }
    let n = m.rows();
    let mut a = m.to_rows();
    let mut det = Rational::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !a[i][c].is_zero()) else {
            return Ok(Rational::zero());
        };
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det *= &a[c][c];
        let pivot_row = a[c].clone();
        for row in a.iter_mut().skip(c + 1) {
            if row[c].is_zero() {
                continue;
            }
            let f = &row[c] / &pivot_row[c];
            for (x, y) in row.iter_mut().zip(&pivot_row) {
                *x -= &f * y;
            }
        }
    }
    Ok(det)
}

/// Thin SVD `A = U diag(sigma) V^T` restricted to the singular values above
/// the relative threshold.
#[derive(Debug, Clone)]
pub struct SvdResult {
    /// Descending, all strictly positive.
    pub singular_values: Vec<f64>,
    /// m x k, orthonormal columns.
    pub u: DMatrix<f64>,
    /// n x k, orthonormal columns.
    pub v: DMatrix<f64>,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.singular_values));
        &self.u * d * self.v.transpose()
    }
}

pub fn svd(m: &DMatrix<f64>) -> Result<SvdResult> {
    svd_with_tolerance(m, DEFAULT_FLOAT_RANK_TOL)
}

pub fn svd_with_tolerance(m: &DMatrix<f64>, rel_tol: f64) -> Result<SvdResult> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("svd input"));
    }
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(SvdResult {
            singular_values: vec![],
            u: DMatrix::zeros(rows, 0),
            v: DMatrix::zeros(cols, 0),
        });
    }
    let dec = m.clone().svd(true, true);
    let u = dec.u.expect("requested U");
    let vt = dec.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..dec.singular_values.len()).collect();
    order.sort_by(|&a, &b| dec.singular_values[b].total_cmp(&dec.singular_values[a]));
    let top = order
        .first()
        .map(|&i| dec.singular_values[i])
        .unwrap_or(0.0);
    let keep: Vec<usize> = order
        .into_iter()
        .filter(|&i| top > 0.0 && dec.singular_values[i] > rel_tol * top)
        .collect();
    let k = keep.len();
    let mut uu = DMatrix::zeros(rows, k);
    let mut vv = DMatrix::zeros(cols, k);
    for (dst, &src) in keep.iter().enumerate() {
        uu.set_column(dst, &u.column(src));
        vv.set_column(dst, &vt.row(src).transpose());
    }
    Ok(SvdResult {
        singular_values: keep.iter().map(|&i| dec.singular_values[i]).collect(),
        u: uu,
        v: vv,
    })
}

/// Number of singular values above `rel_tol * sigma_1`.
pub fn float_rank(m: &DMatrix<f64>, rel_tol: f64) -> Result<usize> {
    Ok(svd_with_tolerance(m, rel_tol)?.rank())
}

/// Gaussian elimination in f64 with a relative pivot threshold. Faster than
/// the SVD; used only where exactness is checked elsewhere.
pub fn float_rank_elimination(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let scale = a.amax();
    if scale == 0.0 {
        return 0;
    }
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (p, best) = (r..rows)
            .map(|i| (i, a[(i, c)].abs()))
            .fold((r, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= rel_tol * scale {
            continue;
        }
        a.swap_rows(r, p);
        for i in r + 1..rows {
            let f = a[(i, c)] / a[(r, c)];
            if f != 0.0 {
                for j in c..cols {
                    let v = a[(r, j)];
                    a[(i, j)] -= f * v;
                }
            }
        }
        r += 1;
    }
    r
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{from_int, ratio};

    fn tilde_a() -> RationalMatrix {
        RationalMatrix::from_i64_rows(&[&[1, 1, 0], &[0, 1, 1], &[1, 0, -1]]).unwrap()
    }

    fn example_a() -> RationalMatrix {
        RationalMatrix::from_str_rows(&[
            &["1", "-1", "0.3"],
            &["1", "0.5", "1"],
            &["0.5", "-1", "0.5"],
        ])
        .unwrap()
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&tilde_a()), 2);
        assert_eq!(rank(&RationalMatrix::zeros(3, 4)), 0);
        assert_eq!(rank(&example_a()), 3);
        assert_eq!(rank(&RationalMatrix::identity(5)), 5);
    }

    #[test]
    fn bigint_fallback_agrees() {
        let m = RationalMatrix::from_rows(vec![
            vec![from_int(i64::MAX), from_int(3)],
            vec![from_int(i64::MAX - 1), from_int(3)],
        ])
        .unwrap();
        assert_eq!(rank(&m), 2);
        let rows = vec![
            vec![BigInt::from(i64::MAX), BigInt::from(2)],
            vec![BigInt::from(i64::MAX) * 2, BigInt::from(4)],
        ];
        assert_eq!(bareiss_rank_big(rows), 1);
    }

    #[test]
    fn column_submatrix_selection() {
        let a = tilde_a();
        let s = column_submatrix(&a, &[true, true, false]).unwrap();
        assert_eq!(
            s,
            RationalMatrix::from_i64_rows(&[&[1, 1], &[0, 1], &[1, 0]]).unwrap()
        );
        let empty = column_submatrix(&a, &[false, false, false]).unwrap();
        assert_eq!(empty.cols(), 0);
        assert_eq!(rank(&empty), 0);
        assert_eq!(column_submatrix(&a, &[true; 3]).unwrap(), a);
        assert!(column_submatrix(&a, &[true; 2]).is_err());
    }

    /// Independent oracle: smallest dependent subset by brute force over all
    /// subsets, with dependence decided by the exact rank of the submatrix.
    fn spark_brute(m: &RationalMatrix) -> usize {
        let n = m.cols();
        let mut best = n + 1;
        for mask in 1u64..(1 << n) {
            let pat: Vec<bool> = (0..n).map(|j| mask >> j & 1 == 1).collect();
            let k = mask.count_ones() as usize;
            if rank(&column_submatrix(m, &pat).unwrap()) < k {
                best = best.min(k);
            }
        }
        best
    }

    #[test]
    fn spark_examples() {
        let vand = RationalMatrix::from_i64_rows(&[&[1, 1, 1], &[1, 2, 3]]).unwrap();
        assert_eq!(spark_brute(&vand), 3);
        assert_eq!(spark(&vand).unwrap(), 3);
        let zc = RationalMatrix::from_i64_rows(&[&[1, 0, 2], &[0, 0, 1]]).unwrap();
        assert_eq!(spark(&zc).unwrap(), 1);
        assert_eq!(spark(&RationalMatrix::identity(3)).unwrap(), 4);
        assert_eq!(spark(&tilde_a()).unwrap(), spark_brute(&tilde_a()));
    }

    #[test]
    fn gosper_enumerates_binomial_counts() {
        for n in 0..8 {
            for k in 0..=n + 1 {
                let c = subsets_of_size(n, k).count();
                let expect = if k > n {
                    0
                } else {
                    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
                };
                assert_eq!(c, expect, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn canonical_scaling_invariance() {
        let m = RationalMatrix::from_i64_rows(&[&[1, 2], &[0, 0], &[1, 2]]).unwrap();
        let s = subspace_canonical(&m);
        assert_eq!(s.dimension(), 1);
        assert_eq!(s.basis(), &[vec![from_int(1), from_int(0), from_int(1)]]);
        let empty = subspace_canonical(&RationalMatrix::zeros(3, 0));
        assert_eq!(empty.dimension(), 0);
    }

    #[test]
    fn canonical_pairs_of_tilde_a_match_full_span() {
        let a = tilde_a();
        let full = subspace_canonical(&a);
        assert_eq!(full.dimension(), 2);
        for pat in [[true, true, false], [true, false, true], [false, true, true]] {
            let s = subspace_canonical(&column_submatrix(&a, &pat).unwrap());
            assert_eq!(s, full);
        }
    }

    #[test]
    fn projection_examples() {
        let s = SubspaceCanonical::from_vectors(3, vec![vec![from_int(1), from_int(0), from_int(0)]]);
        let p = project_orthogonal(&[from_int(1), from_int(1), from_int(0)], &s).unwrap();
        assert_eq!(p, vec![from_int(0), from_int(1), from_int(0)]);
        // In S -> zero.
        let p = project_orthogonal(&[from_int(5), from_int(0), from_int(0)], &s).unwrap();
        assert!(p.iter().all(Zero::is_zero));
        // Orthogonal -> unchanged.
        let v = vec![from_int(0), ratio(2, 3), from_int(-1)];
        assert_eq!(project_orthogonal(&v, &s).unwrap(), v);
    }

    #[test]
    fn projector_matches_projection() {
        let a = tilde_a();
        let s = subspace_canonical(&a);
        let p = orthogonal_projector(&s);
        let v = vec![ratio(1, 2), from_int(3), from_int(-2)];
        assert_eq!(p.mul_vec(&v).unwrap(), project_orthogonal(&v, &s).unwrap());
    }

    #[test]
    fn determinant_example() {
        let det = determinant(&example_a()).unwrap();
        // 1*(0.25+1) - (-1)*(0.5-0.5) + 0.3*(-1-0.25) = 1.25 - 0.375
        assert_eq!(det, ratio(7, 8));
        assert_eq!(determinant(&tilde_a()).unwrap(), from_int(0));
    }

    #[test]
    fn svd_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        let s = svd(&id).unwrap();
        assert_eq!(s.rank(), 3);
        assert!(s.singular_values.iter().all(|&x| (x - 1.0).abs() < 1e-12));

        let d = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 0.0]);
        let s = svd(&d).unwrap();
        assert_eq!(s.singular_values.len(), 1);
        assert!((s.singular_values[0] - 3.0).abs() < 1e-12);

        let a = example_a().to_f64();
        let s = svd(&a).unwrap();
        assert_eq!(s.rank(), 3);
        let prod: f64 = s.singular_values.iter().product();
        assert!((prod - 0.875).abs() < 1e-9);
        let err = (s.reconstruct() - &a).norm();
        assert!(err <= 1e-9 * a.norm());
        let ortho = (s.u.transpose() * &s.u - DMatrix::identity(3, 3)).norm();
        assert!(ortho <= 1e-10);

        let bad = DMatrix::from_row_slice(1, 2, &[f64::NAN, 1.0]);
        assert!(svd(&bad).is_err());
    }

    #[test]
    fn modular_rank_matches_exact_on_banded() {
        let taps = [from_int(-2), ratio(1, 2), from_int(1)];
        let (rows, cols) = (6, 8);
        let mut m = RationalMatrix::zeros(rows, cols);
        for i in 0..rows {
            for (k, t) in taps.iter().enumerate() {
                m.set(i, i + k, t.clone());
            }
        }
        let r = ColumnRanker::new(&m);
        for mask in 0..(1u64 << cols) {
            assert_eq!(r.rank_of_mask(mask), r.rank_of_mask_modular(mask));
        }
    }

    #[test]
    fn float_elimination_rank() {
        let a = tilde_a().to_f64();
        assert_eq!(float_rank_elimination(&a, 1e-9), 2);
        assert_eq!(float_rank(&a, 1e-9).unwrap(), 2);
    }

    #[test]
    fn contains_membership() {
        let s = subspace_canonical(&tilde_a());
        assert!(s.contains(&[from_int(2), from_int(1), from_int(1)]));
        assert!(!s.contains(&[from_int(1), from_int(0), from_int(0)]));
    }
}
