//! Dense matrices over a prime field GF(q).
//!
//! Entries are stored as canonical residues in `[0, q)` in row-major order and
//! every operation reduces eagerly. Matrices are immutable values: each
//! operation returns a fresh matrix.
//!
//! The modulus is limited to `q < 2^32` so that a product of two residues
//! always fits in a `u64` before reduction.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GfError {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} is out of range (must satisfy 2 <= q < 2^32)")]
    ModulusOutOfRange(u64),
    #[error("dimension mismatch: {op} on {left:?} and {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("modulus mismatch: {0} vs {1}")]
    ModulusMismatch(u64, u64),
    #[error("matrix must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("matrix dimensions must be positive, got {0}x{1}")]
    EmptyMatrix(usize, usize),
    #[error("entry {value} at ({row}, {col}) is not a residue mod {modulus}")]
    EntryOutOfRange {
        row: usize,
        col: usize,
        value: u64,
        modulus: u64,
    },
    #[error("vandermonde seed {0} appears more than once")]
    SeedCollision(u64),
    #[error("vandermonde seed must be a nonzero residue, got {0}")]
    InvalidSeed(u64),
    #[error("t + 1 = {rows} exceeds modulus {modulus}")]
    TooManyPowers { rows: usize, modulus: u64 },
    #[error("column index {index} out of range for {cols} columns")]
    IndexOutOfRange { index: usize, cols: usize },
    #[error("column index {0} listed twice")]
    DuplicateIndex(usize),
    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, GfError>;

/// A prime modulus `q` with `2 <= q < 2^32`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrimeModulus(u64);

impl PrimeModulus {
    pub fn new(q: u64) -> Result<Self> {
        if !(2..(1 << 32)).contains(&q) {
            return Err(GfError::ModulusOutOfRange(q));
        }
        if !is_prime(q) {
            return Err(GfError::NotPrime(q));
        }
        Ok(Self(q))
    }

    #[inline]
    pub fn get(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn reduce(self, x: u64) -> u64 {
        x % self.0
    }

    #[inline]
    pub fn add(self, a: u64, b: u64) -> u64 {
        (a + b) % self.0
    }

    #[inline]
    pub fn mul(self, a: u64, b: u64) -> u64 {
        (a * b) % self.0
    }

    /// Multiplicative inverse by the extended Euclidean algorithm.
    /// Returns `None` for zero.
    pub fn inv(self, a: u64) -> Option<u64> {
        let a = a % self.0;
        if a == 0 {
            return None;
        }
        let (mut old_r, mut r) = (a as i64, self.0 as i64);
        let (mut old_s, mut s) = (1i64, 0i64);
        while r != 0 {
            let quot = old_r / r;
            (old_r, r) = (r, old_r - quot * r);
            (old_s, s) = (s, old_s - quot * s);
        }
        debug_assert_eq!(old_r, 1);
        Some(old_s.rem_euclid(self.0 as i64) as u64)
    }
}

impl fmt::Display for PrimeModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Trial division up to `sqrt(n)`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n.is_multiple_of(2) {
        return false;
    }
    let mut d = 3;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Field-operation tallies for one counting session.
///
/// `exps` counts the multiplications spent building cumulative power chains
/// (the Vandermonde construction); they are kept apart from `mults` so the two
/// public-matrix constructions can be compared directly.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounter {
    pub mults: u64,
    pub adds: u64,
    pub exps: u64,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }
}

fn tally(counter: &mut Option<&mut OpCounter>, f: impl FnOnce(&mut OpCounter)) {
    if let Some(c) = counter.as_deref_mut() {
        f(c);
    }
}

/// Distinct nonzero evaluation points for a Vandermonde matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VandermondeSeeds(Vec<u64>);

impl VandermondeSeeds {
    pub fn new(seeds: Vec<u64>, modulus: PrimeModulus) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for &s in &seeds {
            if s == 0 || s >= modulus.get() {
                return Err(GfError::InvalidSeed(s));
            }
            if !seen.insert(s) {
                return Err(GfError::SeedCollision(s));
            }
        }
        Ok(Self(seeds))
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    entries: Vec<u64>,
    modulus: PrimeModulus,
}

impl Matrix {
    /// Builds a matrix from row-major entries; every entry must already be a
    /// canonical residue.
    pub fn from_entries(
        rows: usize,
        cols: usize,
        entries: Vec<u64>,
        modulus: PrimeModulus,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(GfError::EmptyMatrix(rows, cols));
        }
        if entries.len() != rows * cols {
            return Err(GfError::DimensionMismatch {
                op: "from_entries",
                left: (rows, cols),
                right: (entries.len(), 1),
            });
        }
        if let Some(pos) = entries.iter().position(|&e| e >= modulus.get()) {
            return Err(GfError::EntryOutOfRange {
                row: pos / cols,
                col: pos % cols,
                value: entries[pos],
                modulus: modulus.get(),
            });
        }
        Ok(Self {
            rows,
            cols,
            entries,
            modulus,
        })
    }

    /// Builds a matrix from rows of arbitrary non-negative integers, reducing
    /// each entry mod q.
    pub fn from_rows_reduced<R: AsRef<[u64]>>(rows: &[R], modulus: PrimeModulus) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(GfError::DimensionMismatch {
                    op: "from_rows",
                    left: (i, cols),
                    right: (i, r.len()),
                });
            }
            entries.extend(r.iter().map(|&e| modulus.reduce(e)));
        }
        Self::from_entries(rows.len(), cols, entries, modulus)
    }

    /// Builds a matrix from rows that must already be canonical residues.
    pub fn from_rows<R: AsRef<[u64]>>(rows: &[R], modulus: PrimeModulus) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(GfError::DimensionMismatch {
                    op: "from_rows",
                    left: (i, cols),
                    right: (i, r.len()),
                });
            }
            entries.extend_from_slice(r);
        }
        Self::from_entries(rows.len(), cols, entries, modulus)
    }

    pub fn zero(rows: usize, cols: usize, modulus: PrimeModulus) -> Result<Self> {
        Self::from_entries(rows, cols, vec![0; rows * cols], modulus)
    }

    pub fn identity(n: usize, modulus: PrimeModulus) -> Result<Self> {
        let mut entries = vec![0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1;
        }
        Self::from_entries(n, n, entries, modulus)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn modulus(&self) -> PrimeModulus {
        self.modulus
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.entries[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[u64] {
        &self.entries[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<u64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    /// Matrix built from a subset of this matrix's columns, in the given order.
    pub fn select_columns(&self, subset: &[usize]) -> Result<Matrix> {
        let mut seen = vec![false; self.cols];
        for &c in subset {
            if c >= self.cols {
                return Err(GfError::IndexOutOfRange {
                    index: c,
                    cols: self.cols,
                });
            }
            if std::mem::replace(&mut seen[c], true) {
                return Err(GfError::DuplicateIndex(c));
            }
        }
        let mut entries = Vec::with_capacity(self.rows * subset.len());
        for r in 0..self.rows {
            entries.extend(subset.iter().map(|&c| self.get(r, c)));
        }
        Matrix::from_entries(self.rows, subset.len(), entries, self.modulus)
    }

    fn check_modulus(&self, other: &Matrix) -> Result<()> {
        if self.modulus != other.modulus {
            return Err(GfError::ModulusMismatch(
                self.modulus.get(),
                other.modulus.get(),
            ));
        }
        Ok(())
    }

    /// Serializes to the text format: a `rows cols q` header followed by one
    /// line of space-separated residues per row.
    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        text.parse()
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {} {}", self.rows, self.cols, self.modulus)?;
        for r in 0..self.rows {
            let line = self
                .row(r)
                .iter()
                .map(u64::to_string)
                .collect::<Vec<_>>()
                .join(" ");
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

impl FromStr for Matrix {
    type Err = GfError;

    fn from_str(text: &str) -> Result<Self> {
        let parse_err = |line: usize, reason: String| GfError::Parse { line, reason };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(1, "header must be `rows cols q`".into()));
        }
        let num = |s: &str, line: usize| {
            s.parse::<u64>()
                .map_err(|e| parse_err(line, format!("`{s}`: {e}")))
        };
        let rows = num(fields[0], 1)? as usize;
        let cols = num(fields[1], 1)? as usize;
        let modulus = PrimeModulus::new(num(fields[2], 1)?)?;
        let mut entries = Vec::with_capacity(rows * cols);
        let mut seen_rows = 0;
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            if seen_rows == rows {
                return Err(parse_err(idx + 1, "more rows than the header declares".into()));
            }
            let before = entries.len();
            for tok in line.split_whitespace() {
                entries.push(num(tok, idx + 1)?);
            }
            if entries.len() - before != cols {
                return Err(parse_err(
                    idx + 1,
                    format!("expected {cols} entries, found {}", entries.len() - before),
                ));
            }
            seen_rows += 1;
        }
        if seen_rows != rows {
            return Err(parse_err(
                seen_rows + 2,
                format!("expected {rows} rows, found {seen_rows}"),
            ));
        }
        Matrix::from_entries(rows, cols, entries, modulus)
    }
}

/// `a · b mod q`. With a counter, records `r·c·k` multiplications and
/// `r·c·(k−1)` additions for an `(r×k)·(k×c)` product.
pub fn mat_mul(a: &Matrix, b: &Matrix, mut counter: Option<&mut OpCounter>) -> Result<Matrix> {
    a.check_modulus(b)?;
    if a.cols != b.rows {
        return Err(GfError::DimensionMismatch {
            op: "mat_mul",
            left: a.dims(),
            right: b.dims(),
        });
    }
    let q = a.modulus;
    let (n, m, inner) = (a.rows, b.cols, a.cols);
    let mut entries = vec![0u64; n * m];
    for i in 0..n {
        let arow = a.row(i);
        for j in 0..m {
            let mut acc = 0u64;
            for (k, &aik) in arow.iter().enumerate() {
                acc = q.add(acc, q.mul(aik, b.entries[k * m + j]));
            }
            entries[i * m + j] = acc;
        }
    }
    let cells = (n * m) as u64;
    tally(&mut counter, |c| {
        c.mults += cells * inner as u64;
        c.adds += cells * (inner as u64 - 1);
    });
    Matrix::from_entries(n, m, entries, q)
}

pub fn mat_add(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.check_modulus(b)?;
    if a.dims() != b.dims() {
        return Err(GfError::DimensionMismatch {
            op: "mat_add",
            left: a.dims(),
            right: b.dims(),
        });
    }
    let q = a.modulus;
    let entries = a
        .entries
        .iter()
        .zip(&b.entries)
        .map(|(&x, &y)| q.add(x, y))
        .collect();
    Matrix::from_entries(a.rows, a.cols, entries, q)
}

pub fn transpose(a: &Matrix) -> Matrix {
    let mut entries = Vec::with_capacity(a.entries.len());
    for c in 0..a.cols {
        entries.extend((0..a.rows).map(|r| a.get(r, c)));
    }
    Matrix {
        rows: a.cols,
        cols: a.rows,
        entries,
        modulus: a.modulus,
    }
}

/// Row `i` of the result is row `rows−1−i` of the input (left multiplication
/// by the exchange matrix).
pub fn reverse_rows(a: &Matrix) -> Matrix {
    let mut entries = Vec::with_capacity(a.entries.len());
    for r in (0..a.rows).rev() {
        entries.extend_from_slice(a.row(r));
    }
    Matrix {
        entries,
        ..a.clone()
    }
}

/// `(t+1)×N` Vandermonde matrix whose row `r` holds the `r`-th powers of the
/// seeds. Powers are built cumulatively, which the counter records as `t−1`
/// exponentiation steps per column (rows 0 and 1 are free).
pub fn vandermonde(
    seeds: &VandermondeSeeds,
    t: usize,
    modulus: PrimeModulus,
    mut counter: Option<&mut OpCounter>,
) -> Result<Matrix> {
    let rows = t + 1;
    if rows as u64 > modulus.get() {
        return Err(GfError::TooManyPowers {
            rows,
            modulus: modulus.get(),
        });
    }
    let cols = seeds.len();
    let mut entries = vec![0u64; rows * cols];
    for (j, &seed) in seeds.as_slice().iter().enumerate() {
        let mut power = 1u64;
        for r in 0..rows {
            entries[r * cols + j] = power;
            power = modulus.mul(power, seed);
        }
    }
    tally(&mut counter, |c| {
        c.exps += cols as u64 * t.saturating_sub(1) as u64;
    });
    Matrix::from_entries(rows, cols, entries, modulus)
}

/// Uniform random matrix from the crate's seeded generator. The same seed
/// always yields the same matrix.
pub fn random_matrix(rows: usize, cols: usize, modulus: PrimeModulus, seed: u64) -> Result<Matrix> {
    let mut gen = rng::seeded(seed);
    random_matrix_from(&mut gen, rows, cols, modulus)
}

pub(crate) fn random_matrix_from<R: Rng>(
    gen: &mut R,
    rows: usize,
    cols: usize,
    modulus: PrimeModulus,
) -> Result<Matrix> {
    let entries = (0..rows * cols)
        .map(|_| gen.gen_range(0..modulus.get()))
        .collect();
    Matrix::from_entries(rows, cols, entries, modulus)
}

/// `m · mᵀ mod q`, which is always symmetric.
pub fn symmetric_from_random(m: &Matrix, counter: Option<&mut OpCounter>) -> Result<Matrix> {
    if !m.is_square() {
        return Err(GfError::NotSquare(m.rows, m.cols));
    }
    mat_mul(m, &transpose(m), counter)
}

pub fn is_symmetric(m: &Matrix) -> bool {
    m.is_square() && (0..m.rows).all(|i| (0..i).all(|j| m.get(i, j) == m.get(j, i)))
}

/// Rank over GF(q) by Gaussian elimination.
pub fn rank(m: &Matrix) -> usize {
    let q = m.modulus;
    let cols = m.cols;
    let mut work = m.entries.clone();
    let mut rank = 0;
    for col in 0..cols {
        if rank == m.rows {
            break;
        }
        let Some(pivot) = (rank..m.rows).find(|&r| work[r * cols + col] != 0) else {
            continue;
        };
        if pivot != rank {
            for c in 0..cols {
                work.swap(pivot * cols + c, rank * cols + c);
            }
        }
        let inv = q.inv(work[rank * cols + col]).expect("pivot is nonzero");
        for c in col..cols {
            work[rank * cols + c] = q.mul(work[rank * cols + c], inv);
        }
        for r in 0..m.rows {
            if r == rank {
                continue;
            }
            let factor = work[r * cols + col];
            if factor == 0 {
                continue;
            }
            let neg = q.get() - factor;
            for c in col..cols {
                let v = q.mul(neg, work[rank * cols + c]);
                work[r * cols + c] = q.add(work[r * cols + c], v);
            }
        }
        rank += 1;
    }
    rank
}

/// True iff the selected columns are linearly independent over GF(q).
pub fn columns_independent(m: &Matrix, subset: &[usize]) -> Result<bool> {
    if subset.is_empty() {
        return Ok(true);
    }
    let sub = m.select_columns(subset)?;
    Ok(rank(&sub) == subset.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q31() -> PrimeModulus {
        PrimeModulus::new(31).unwrap()
    }

    fn m(rows: &[&[u64]]) -> Matrix {
        Matrix::from_rows(rows, q31()).unwrap()
    }

    #[test]
    fn modulus_rejects_composites_and_small_values() {
        assert_eq!(PrimeModulus::new(30), Err(GfError::NotPrime(30)));
        assert_eq!(PrimeModulus::new(1), Err(GfError::ModulusOutOfRange(1)));
        assert_eq!(PrimeModulus::new(0), Err(GfError::ModulusOutOfRange(0)));
        assert!(PrimeModulus::new(2).is_ok());
        assert!(PrimeModulus::new(4_294_967_291).is_ok());
        assert!(PrimeModulus::new(1 << 32).is_err());
    }

    #[test]
    fn inverse_round_trips() {
        let q = PrimeModulus::new(257).unwrap();
        for a in 1..257 {
            assert_eq!(q.mul(a, q.inv(a).unwrap()), 1);
        }
        assert_eq!(q.inv(0), None);
    }

    #[test]
    fn product_reproduces_secret_fixture() {
        let a = m(&[&[1, 0, 1, 1], &[1, 2, 0, 1], &[0, 0, 1, 1], &[0, 2, 3, 1]]);
        let s = mat_mul(&a, &transpose(&a), None).unwrap();
        assert_eq!(
            s.to_rows(),
            vec![
                vec![3, 2, 2, 4],
                vec![2, 6, 1, 5],
                vec![2, 1, 2, 4],
                vec![4, 5, 4, 14]
            ]
        );
        let p = m(&[&[1, 2, 3, 4], &[1, 0, 1, 1], &[2, 1, 3, 1], &[4, 0, 9, 5]]);
        let sp = mat_mul(&s, &p, None).unwrap();
        assert_eq!(
            sp.to_rows(),
            vec![
                vec![25, 8, 22, 5],
                vec![30, 5, 29, 9],
                vec![23, 6, 18, 0],
                vec![11, 12, 0, 2]
            ]
        );
    }

    #[test]
    fn identity_is_neutral() {
        let x = random_matrix(4, 3, q31(), 9).unwrap();
        let id = Matrix::identity(4, q31()).unwrap();
        assert_eq!(mat_mul(&id, &x, None).unwrap(), x);
    }

    #[test]
    fn mul_rejects_mismatches() {
        let a = Matrix::zero(2, 3, q31()).unwrap();
        assert!(matches!(
            mat_mul(&a, &a, None),
            Err(GfError::DimensionMismatch { .. })
        ));
        let b = Matrix::zero(3, 2, PrimeModulus::new(37).unwrap()).unwrap();
        assert_eq!(mat_mul(&a, &b, None), Err(GfError::ModulusMismatch(31, 37)));
    }

    #[test]
    fn counter_tracks_product_cost() {
        let a = random_matrix(3, 5, q31(), 1).unwrap();
        let b = random_matrix(5, 2, q31(), 2).unwrap();
        let mut c = OpCounter::new();
        mat_mul(&a, &b, Some(&mut c)).unwrap();
        assert_eq!(c, OpCounter { mults: 30, adds: 24, exps: 0 });
    }

    #[test]
    fn addition_cases() {
        let x = random_matrix(3, 3, q31(), 5).unwrap();
        assert_eq!(mat_add(&x, &Matrix::zero(3, 3, q31()).unwrap()).unwrap(), x);
        assert_eq!(
            mat_add(&m(&[&[1, 2], &[2, 1]]), &m(&[&[3, 0], &[0, 3]]))
                .unwrap()
                .to_rows(),
            vec![vec![4, 2], vec![2, 4]]
        );
        assert_eq!(
            mat_add(&m(&[&[30, 30], &[30, 30]]), &m(&[&[2, 2], &[2, 2]]))
                .unwrap()
                .to_rows(),
            vec![vec![1, 1], vec![1, 1]]
        );
        assert!(mat_add(&x, &Matrix::zero(3, 2, q31()).unwrap()).is_err());
    }

    #[test]
    fn transpose_and_reverse() {
        let x = m(&[&[1, 2, 3], &[4, 5, 6]]);
        assert_eq!(transpose(&x).to_rows(), vec![vec![1, 4], vec![2, 5], vec![3, 6]]);
        assert_eq!(transpose(&transpose(&x)), x);
        let s = m(&[&[3, 2, 2, 4], &[2, 6, 1, 5], &[2, 1, 2, 4], &[4, 5, 4, 14]]);
        assert_eq!(transpose(&s), s);
        assert_eq!(
            reverse_rows(&s).to_rows(),
            vec![
                vec![4, 5, 4, 14],
                vec![2, 1, 2, 4],
                vec![2, 6, 1, 5],
                vec![3, 2, 2, 4]
            ]
        );
        assert_eq!(reverse_rows(&reverse_rows(&s)), s);
        let single = m(&[&[7, 8, 9]]);
        assert_eq!(reverse_rows(&single), single);
    }

    #[test]
    fn vandermonde_rows_are_powers() {
        let seeds = VandermondeSeeds::new(vec![1, 2, 3], q31()).unwrap();
        let v = vandermonde(&seeds, 1, q31(), None).unwrap();
        assert_eq!(v.to_rows(), vec![vec![1, 1, 1], vec![1, 2, 3]]);
        let seeds = VandermondeSeeds::new(vec![2, 3], q31()).unwrap();
        let mut c = OpCounter::new();
        let v = vandermonde(&seeds, 2, q31(), Some(&mut c)).unwrap();
        assert_eq!(v.to_rows(), vec![vec![1, 1], vec![2, 3], vec![4, 9]]);
        assert_eq!(c.exps, 2);
        assert_eq!(c.mults, 0);
    }

    #[test]
    fn vandermonde_errors() {
        assert_eq!(
            VandermondeSeeds::new(vec![1, 2, 1], q31()),
            Err(GfError::SeedCollision(1))
        );
        assert_eq!(
            VandermondeSeeds::new(vec![0, 2], q31()),
            Err(GfError::InvalidSeed(0))
        );
        let q5 = PrimeModulus::new(5).unwrap();
        let seeds = VandermondeSeeds::new(vec![1, 2], q5).unwrap();
        assert!(matches!(
            vandermonde(&seeds, 5, q5, None),
            Err(GfError::TooManyPowers { rows: 6, modulus: 5 })
        ));
    }

    #[test]
    fn random_matrix_is_deterministic() {
        let a = random_matrix(4, 4, q31(), 42).unwrap();
        let b = random_matrix(4, 4, q31(), 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, random_matrix(4, 4, q31(), 43).unwrap());
        let one = random_matrix(1, 1, q31(), 0).unwrap();
        assert!(one.get(0, 0) < 31);
    }

    #[test]
    fn random_residues_are_uniform() {
        // 10^4 draws, each of the 31 residue counts within 5 sigma of the mean.
        let x = random_matrix(100, 100, q31(), 2024).unwrap();
        let mut counts = [0u64; 31];
        for &e in x.entries() {
            counts[e as usize] += 1;
        }
        let n = 10_000f64;
        let p = 1.0 / 31.0;
        let mean = n * p;
        let sigma = (n * p * (1.0 - p)).sqrt();
        for (r, &c) in counts.iter().enumerate() {
            assert!(
                (c as f64 - mean).abs() <= 5.0 * sigma,
                "residue {r} drawn {c} times"
            );
        }
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - mean).powi(2) / mean)
            .sum();
        // 30 degrees of freedom; 99.9th percentile is about 59.7.
        assert!(chi2 < 59.7, "chi-square {chi2}");
    }

    #[test]
    fn symmetric_construction() {
        let id = Matrix::identity(3, q31()).unwrap();
        assert_eq!(symmetric_from_random(&id, None).unwrap(), id);
        let r = random_matrix(5, 5, q31(), 3).unwrap();
        assert!(is_symmetric(&symmetric_from_random(&r, None).unwrap()));
        assert_eq!(
            symmetric_from_random(&Matrix::zero(2, 3, q31()).unwrap(), None),
            Err(GfError::NotSquare(2, 3))
        );
    }

    #[test]
    fn symmetry_predicate() {
        assert!(!is_symmetric(&m(&[&[0, 1], &[2, 0]])));
        assert!(is_symmetric(&m(&[&[5]])));
        assert!(!is_symmetric(&Matrix::zero(2, 3, q31()).unwrap()));
    }

    #[test]
    fn rank_cases() {
        assert_eq!(rank(&Matrix::identity(4, q31()).unwrap()), 4);
        assert_eq!(rank(&Matrix::zero(3, 5, q31()).unwrap()), 0);
        let seeds = VandermondeSeeds::new(vec![1, 2, 3, 4], q31()).unwrap();
        assert_eq!(rank(&vandermonde(&seeds, 3, q31(), None).unwrap()), 4);
        assert_eq!(rank(&m(&[&[1, 2], &[2, 4]])), 1);
    }

    #[test]
    fn column_independence() {
        let id = Matrix::identity(3, q31()).unwrap();
        assert!(columns_independent(&id, &[0, 1, 2]).unwrap());
        let dup = m(&[&[1, 1, 0], &[2, 2, 1], &[3, 3, 0]]);
        assert!(!columns_independent(&dup, &[0, 1]).unwrap());
        assert!(columns_independent(&dup, &[0, 2]).unwrap());
        assert_eq!(
            columns_independent(&dup, &[0, 3]),
            Err(GfError::IndexOutOfRange { index: 3, cols: 3 })
        );
        assert_eq!(
            columns_independent(&dup, &[1, 1]),
            Err(GfError::DuplicateIndex(1))
        );
    }

    #[test]
    fn text_format_round_trip() {
        let x = m(&[&[1, 2, 3], &[4, 5, 30]]);
        let text = x.to_text();
        assert_eq!(text, "2 3 31\n1 2 3\n4 5 30\n");
        assert_eq!(Matrix::parse_text(&text).unwrap(), x);
    }

    #[test]
    fn text_format_rejects_bad_input() {
        assert!(Matrix::parse_text("2 2 31\n1 2\n").is_err());
        assert!(Matrix::parse_text("1 2 31\n1 2 3\n").is_err());
        assert!(Matrix::parse_text("1 2 30\n1 2\n").is_err());
        assert!(matches!(
            Matrix::parse_text("1 2 31\n1 40\n"),
            Err(GfError::EntryOutOfRange { value: 40, .. })
        ));
        assert!(Matrix::parse_text("").is_err());
    }
}
