//! Exact arithmetic over prime fields GF(p) and dense matrices over them.
//!
//! Extension fields are not modelled natively: a k-length vector code over
//! GF(p) uses k×k blocks instead, which is all the characteristic-dependent
//! results need.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

/// Errors from field construction and matrix algebra.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GfError {
    #[error("{0} is not a prime")]
    NotPrime(u32),
    #[error("characteristic {0} exceeds the supported maximum of 2^16")]
    FieldTooLarge(u32),
    #[error("matrix dimension mismatch: {0}")]
    DimensionMismatch(&'static str),
    #[error("operands live over different fields (GF({0}) vs GF({1}))")]
    FieldMismatch(u32, u32),
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("entry {value} is not a residue mod {p}")]
    EntryOutOfRange { value: u32, p: u32 },
    #[error("expected {expected} entries, got {got}")]
    EntryCount { expected: usize, got: usize },
}

/// A prime field GF(p).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldSpec {
    p: u32,
}

impl FieldSpec {
    pub const MAX_CHARACTERISTIC: u32 = 1 << 16;

    pub fn new(p: u32) -> Result<Self, GfError> {
        if p > Self::MAX_CHARACTERISTIC {
            return Err(GfError::FieldTooLarge(p));
        }
        if !is_prime(p) {
            return Err(GfError::NotPrime(p));
        }
        Ok(Self { p })
    }

    #[inline]
    pub fn p(self) -> u32 {
        self.p
    }

    /// Reduces an arbitrary integer into `[0, p)`.
    #[inline]
    pub fn reduce(self, v: i64) -> u32 {
        v.rem_euclid(self.p as i64) as u32
    }

    #[inline]
    pub fn add(self, a: u32, b: u32) -> u32 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(self, a: u32, b: u32) -> u32 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    #[inline]
    pub fn neg(self, a: u32) -> u32 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    #[inline]
    pub fn mul(self, a: u32, b: u32) -> u32 {
        ((a as u64 * b as u64) % self.p as u64) as u32
    }

    pub fn pow(self, mut base: u32, mut exp: u64) -> u32 {
        let mut acc = 1 % self.p;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(self, a: u32) -> Option<u32> {
        let a = a % self.p;
        if a == 0 {
            None
        } else {
            Some(self.pow(a, self.p as u64 - 2))
        }
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({})", self.p)
    }
}

fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Dense row-major matrix over GF(p).
///
/// Zero-sized shapes are allowed; they show up for nodes without inputs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MatrixGF {
    field: FieldSpec,
    rows: usize,
    cols: usize,
    entries: Vec<u32>,
}

impl MatrixGF {
    pub fn new(field: FieldSpec, rows: usize, cols: usize, entries: Vec<u32>) -> Result<Self, GfError> {
        if entries.len() != rows * cols {
            return Err(GfError::EntryCount { expected: rows * cols, got: entries.len() });
        }
        if let Some(&value) = entries.iter().find(|&&v| v >= field.p) {
            return Err(GfError::EntryOutOfRange { value, p: field.p });
        }
        Ok(Self { field, rows, cols, entries })
    }

    /// Builds a matrix from rows of arbitrary integers, reducing them mod p.
    pub fn from_rows(field: FieldSpec, rows: &[&[i64]]) -> Result<Self, GfError> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(GfError::DimensionMismatch("ragged rows"));
        }
        let entries = rows.iter().flat_map(|r| r.iter().map(|&v| field.reduce(v))).collect();
        Ok(Self { field, rows: rows.len(), cols, entries })
    }

    pub fn zeros(field: FieldSpec, rows: usize, cols: usize) -> Self {
        Self { field, rows, cols, entries: vec![0; rows * cols] }
    }

    pub fn identity(field: FieldSpec, dim: usize) -> Self {
        let mut m = Self::zeros(field, dim, dim);
        for i in 0..dim {
            m.entries[i * dim + i] = 1 % field.p;
        }
        m
    }

    /// `c·I`.
    pub fn scalar(field: FieldSpec, dim: usize, c: u32) -> Self {
        let mut m = Self::zeros(field, dim, dim);
        for i in 0..dim {
            m.entries[i * dim + i] = c % field.p;
        }
        m
    }

    /// The `rows×cols` matrix `[I; 0]` or `[I 0]`: identity on the leading square.
    pub fn leading_identity(field: FieldSpec, rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(field, rows, cols);
        for i in 0..rows.min(cols) {
            m.entries[i * cols + i] = 1 % field.p;
        }
        m
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
    #[inline]
    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u32 {
        self.entries[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u32) {
        self.entries[r * self.cols + c] = v % self.field.p;
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&v| v == 0)
    }

    pub fn is_identity(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|r| (0..self.cols).all(|c| self.get(r, c) == u32::from(r == c)))
    }

    fn check_field(&self, other: &Self) -> Result<(), GfError> {
        if self.field != other.field {
            Err(GfError::FieldMismatch(self.field.p, other.field.p))
        } else {
            Ok(())
        }
    }

    /// Matrix product `self · rhs`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self, GfError> {
        self.check_field(rhs)?;
        if self.cols != rhs.rows {
            return Err(GfError::DimensionMismatch("left cols != right rows"));
        }
        let p = self.field.p as u64;
        let mut out = vec![0u32; self.rows * rhs.cols];
        let mut acc = vec![0u64; rhs.cols];
        for r in 0..self.rows {
            acc.iter_mut().for_each(|a| *a = 0);
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == 0 {
                    continue;
                }
                let a = a as u64;
                for (slot, &b) in acc.iter_mut().zip(rhs.row(k)) {
                    // at most cols * p^2 < 2^64 for p <= 2^16 and any realistic width
                    *slot += a * b as u64;
                }
            }
            for (o, a) in out[r * rhs.cols..(r + 1) * rhs.cols].iter_mut().zip(&acc) {
                *o = (a % p) as u32;
            }
        }
        Ok(Self { field: self.field, rows: self.rows, cols: rhs.cols, entries: out })
    }

    pub fn add(&self, rhs: &Self) -> Result<Self, GfError> {
        self.check_field(rhs)?;
        if self.shape() != rhs.shape() {
            return Err(GfError::DimensionMismatch("addends differ in shape"));
        }
        let f = self.field;
        let entries = self.entries.iter().zip(&rhs.entries).map(|(&a, &b)| f.add(a, b)).collect();
        Ok(Self { entries, ..*self })
    }

    /// In-place `self += rhs`.
    pub fn add_assign(&mut self, rhs: &Self) -> Result<(), GfError> {
        self.check_field(rhs)?;
        if self.shape() != rhs.shape() {
            return Err(GfError::DimensionMismatch("addends differ in shape"));
        }
        let f = self.field;
        for (a, &b) in self.entries.iter_mut().zip(&rhs.entries) {
            *a = f.add(*a, b);
        }
        Ok(())
    }

    pub fn scale(&self, c: u32) -> Self {
        let f = self.field;
        let c = c % f.p;
        Self { entries: self.entries.iter().map(|&a| f.mul(a, c)).collect(), ..*self }
    }

    pub fn transpose(&self) -> Self {
        let mut entries = vec![0; self.entries.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                entries[c * self.rows + r] = self.get(r, c);
            }
        }
        Self { field: self.field, rows: self.cols, cols: self.rows, entries }
    }

    /// Copies out the `h×w` block whose top-left corner is `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, h: usize, w: usize) -> Self {
        assert!(r0 + h <= self.rows && c0 + w <= self.cols, "block out of range");
        let mut entries = Vec::with_capacity(h * w);
        for r in r0..r0 + h {
            entries.extend_from_slice(&self.entries[r * self.cols + c0..r * self.cols + c0 + w]);
        }
        Self { field: self.field, rows: h, cols: w, entries }
    }

    /// Writes `src` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, src: &Self) {
        assert!(r0 + src.rows <= self.rows && c0 + src.cols <= self.cols, "block out of range");
        for r in 0..src.rows {
            let dst = (r0 + r) * self.cols + c0;
            self.entries[dst..dst + src.cols].copy_from_slice(src.row(r));
        }
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(field: FieldSpec, cols: usize, parts: &[&Self]) -> Result<Self, GfError> {
        let mut entries = Vec::new();
        let mut rows = 0;
        for m in parts {
            if m.field != field {
                return Err(GfError::FieldMismatch(field.p, m.field.p));
            }
            if m.cols != cols {
                return Err(GfError::DimensionMismatch("vstack column mismatch"));
            }
            entries.extend_from_slice(&m.entries);
            rows += m.rows;
        }
        Ok(Self { field, rows, cols, entries })
    }

    /// Reduces to reduced row echelon form in place and returns the pivot columns.
    ///
    /// Pivots are taken at the first nonzero entry of each column scan, so the
    /// result depends only on the input.
    pub fn rref_in_place(&mut self) -> Vec<usize> {
        self.rref_limited(self.cols)
    }

    /// RREF that only pivots within the first `pivot_cols` columns, carrying
    /// the remaining columns along (augmented-matrix elimination).
    fn rref_limited(&mut self, pivot_cols: usize) -> Vec<usize> {
        let f = self.field;
        let cols = self.cols;
        let mut pivots = Vec::new();
        let mut row = 0;
        for col in 0..pivot_cols {
            if row == self.rows {
                break;
            }
            let Some(pr) = (row..self.rows).find(|&r| self.entries[r * cols + col] != 0) else {
                continue;
            };
            if pr != row {
                for c in 0..cols {
                    self.entries.swap(pr * cols + c, row * cols + c);
                }
            }
            let inv = f.inv(self.entries[row * cols + col]).expect("pivot is nonzero");
            for c in col..cols {
                let v = &mut self.entries[row * cols + c];
                *v = f.mul(*v, inv);
            }
            for r in 0..self.rows {
                if r == row {
                    continue;
                }
                let factor = self.entries[r * cols + col];
                if factor == 0 {
                    continue;
                }
                for c in col..cols {
                    let sub = f.mul(factor, self.entries[row * cols + c]);
                    let v = &mut self.entries[r * cols + c];
                    *v = f.sub(*v, sub);
                }
            }
            pivots.push(col);
            row += 1;
        }
        pivots
    }

    pub fn rref(&self) -> (Self, Vec<usize>) {
        let mut m = self.clone();
        let pivots = m.rref_in_place();
        (m, pivots)
    }

    pub fn rank(&self) -> usize {
        self.rref().1.len()
    }

    /// Inverse if the matrix has full rank, `None` otherwise.
    pub fn inverse(&self) -> Result<Option<Self>, GfError> {
        if self.rows != self.cols {
            return Err(GfError::NotSquare(self.rows, self.cols));
        }
        let n = self.rows;
        let ident = Self::identity(self.field, n);
        let mut aug = Self::zeros(self.field, n, 2 * n);
        aug.set_block(0, 0, self);
        aug.set_block(0, n, &ident);
        let pivots = aug.rref_limited(n);
        if pivots.len() < n {
            return Ok(None);
        }
        Ok(Some(aug.block(0, n, n, n)))
    }

    /// Finds `X` with `self · X == rhs`.
    ///
    /// Returns `None` when the system is inconsistent. Free variables are set
    /// to zero, so the answer is deterministic when the system is underdetermined.
    pub fn solve_right(&self, rhs: &Self) -> Result<Option<Self>, GfError> {
        self.check_field(rhs)?;
        if self.rows != rhs.rows {
            return Err(GfError::DimensionMismatch("system rows != right-hand side rows"));
        }
        let (n, w) = (self.cols, rhs.cols);
        let mut aug = Self::zeros(self.field, self.rows, n + w);
        aug.set_block(0, 0, self);
        aug.set_block(0, n, rhs);
        let pivots = aug.rref_limited(n);
        // rows below the pivots must have an all-zero right-hand side
        for r in pivots.len()..self.rows {
            if aug.row(r)[n..].iter().any(|&v| v != 0) {
                return Ok(None);
            }
        }
        let mut x = Self::zeros(self.field, n, w);
        for (r, &pc) in pivots.iter().enumerate() {
            for c in 0..w {
                x.entries[pc * w + c] = aug.entries[r * (n + w) + n + c];
            }
        }
        Ok(Some(x))
    }
}

impl fmt::Display for MatrixGF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            write!(f, "[")?;
            for (i, v) in self.row(r).iter().enumerate() {
                if i > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{v}")?;
            }
            writeln!(f, "]")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gf(p: u32) -> FieldSpec {
        FieldSpec::new(p).unwrap()
    }

    #[test]
    fn field_rejects_composites_and_oversize() {
        assert_eq!(FieldSpec::new(4), Err(GfError::NotPrime(4)));
        assert_eq!(FieldSpec::new(1), Err(GfError::NotPrime(1)));
        assert_eq!(FieldSpec::new(70_001), Err(GfError::FieldTooLarge(70_001)));
        assert_eq!(FieldSpec::new(65_521).unwrap().p(), 65_521);
    }

    #[test]
    fn identity_times_a() {
        let f = gf(7);
        let a = MatrixGF::from_rows(f, &[&[3, 4], &[5, 6]]).unwrap();
        assert_eq!(MatrixGF::identity(f, 2).matmul(&a).unwrap(), a);
    }

    #[test]
    fn gf2_hand_product() {
        let f = gf(2);
        let a = MatrixGF::from_rows(f, &[&[1, 1], &[0, 1]]).unwrap();
        let b = MatrixGF::from_rows(f, &[&[1, 0], &[1, 1]]).unwrap();
        let want = MatrixGF::from_rows(f, &[&[0, 1], &[1, 1]]).unwrap();
        assert_eq!(a.matmul(&b).unwrap(), want);
    }

    #[test]
    fn mismatches_are_errors() {
        let a = MatrixGF::zeros(gf(3), 2, 3);
        let b = MatrixGF::zeros(gf(3), 2, 3);
        assert!(matches!(a.matmul(&b), Err(GfError::DimensionMismatch(_))));
        let c = MatrixGF::zeros(gf(5), 3, 3);
        assert_eq!(a.matmul(&c), Err(GfError::FieldMismatch(3, 5)));
        assert_eq!(a.inverse(), Err(GfError::NotSquare(2, 3)));
        assert!(MatrixGF::new(gf(3), 1, 1, vec![3]).is_err());
    }

    #[test]
    fn inverse_examples() {
        let f2 = gf(2);
        assert_eq!(MatrixGF::identity(f2, 3).inverse().unwrap(), Some(MatrixGF::identity(f2, 3)));
        let singular = MatrixGF::from_rows(f2, &[&[1, 1], &[1, 1]]).unwrap();
        assert_eq!(singular.inverse().unwrap(), None);
        let f3 = gf(3);
        let two = MatrixGF::from_rows(f3, &[&[2]]).unwrap();
        assert_eq!(two.inverse().unwrap(), Some(two.clone()));
    }

    #[test]
    fn solve_right_examples() {
        let f = gf(2);
        let b = MatrixGF::from_rows(f, &[&[1, 0], &[1, 1]]).unwrap();
        assert_eq!(MatrixGF::identity(f, 2).solve_right(&b).unwrap(), Some(b.clone()));

        let zero = MatrixGF::zeros(f, 2, 2);
        assert_eq!(zero.solve_right(&zero).unwrap(), Some(zero.clone()));

        let a = MatrixGF::from_rows(f, &[&[1, 1], &[0, 0]]).unwrap();
        let rhs = MatrixGF::from_rows(f, &[&[1], &[1]]).unwrap();
        assert_eq!(a.solve_right(&rhs).unwrap(), None);
    }

    #[test]
    fn solve_right_sets_free_variables_to_zero() {
        let f = gf(5);
        let a = MatrixGF::from_rows(f, &[&[0, 1, 1]]).unwrap();
        let rhs = MatrixGF::from_rows(f, &[&[3]]).unwrap();
        let x = a.solve_right(&rhs).unwrap().unwrap();
        assert_eq!(x.to_rows(), vec![vec![0], vec![3], vec![0]]);
    }

    fn square(p: u32, n: usize) -> impl Strategy<Value = MatrixGF> {
        proptest::collection::vec(0..p, n * n)
            .prop_map(move |e| MatrixGF::new(FieldSpec::new(p).unwrap(), n, n, e).unwrap())
    }

    fn naive_product(a: &MatrixGF, b: &MatrixGF) -> Vec<u32> {
        let p = a.field().p() as u64;
        let mut out = Vec::new();
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let s: u64 = (0..a.cols()).map(|k| a.get(i, k) as u64 * b.get(k, j) as u64).sum();
                out.push((s % p) as u32);
            }
        }
        out
    }

    proptest! {
        #[test]
        fn transpose_of_product_entrywise(a in square(5, 3), b in square(5, 3)) {
            let ab_t = a.matmul(&b).unwrap().transpose();
            let naive = naive_product(&b.transpose(), &a.transpose());
            prop_assert_eq!(ab_t.entries(), &naive[..]);
        }

        #[test]
        fn product_is_associative(a in square(3, 3), b in square(3, 3), c in square(3, 3)) {
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
            let i = MatrixGF::identity(a.field(), 3);
            prop_assert_eq!(&a.matmul(&i).unwrap(), &a);
            prop_assert_eq!(&i.matmul(&a).unwrap(), &a);
        }

        #[test]
        fn inverse_exists_iff_full_rank(a in square(3, 3)) {
            let inv = a.inverse().unwrap();
            prop_assert_eq!(inv.is_some(), a.rank() == 3);
            if let Some(inv) = inv {
                prop_assert!(a.matmul(&inv).unwrap().is_identity());
            }
        }

        #[test]
        fn solve_right_solutions_verify(
            e in proptest::collection::vec(0u32..2, 12),
            r in proptest::collection::vec(0u32..2, 6),
        ) {
            let f = FieldSpec::new(2).unwrap();
            let a = MatrixGF::new(f, 3, 4, e).unwrap();
            let b = MatrixGF::new(f, 3, 2, r).unwrap();
            if let Some(x) = a.solve_right(&b).unwrap() {
                prop_assert_eq!(a.matmul(&x).unwrap(), b);
            } else {
                // inconsistent systems add rank when the rhs is appended
                let mut aug = MatrixGF::zeros(f, 3, 6);
                aug.set_block(0, 0, &a);
                aug.set_block(0, 4, &b);
                prop_assert!(aug.rank() > a.rank());
            }
        }
    }
}
