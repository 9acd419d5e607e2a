//! Sparse multivariate polynomials with rational coefficients in the
//! central variables `λ1, …, λc`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::algebra::{rational_to_f64, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("matrix is not square: {rows} rows, row {bad_row} has {cols} entries")]
    NotSquare {
        rows: usize,
        bad_row: usize,
        cols: usize,
    },
    #[error("entries disagree on the number of variables ({0} vs {1})")]
    VariableCount(usize, usize),
    #[error("empty matrix")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Homogeneity {
    Zero,
    Homogeneous(u32),
    NotHomogeneous,
}

/// Polynomial stored as exponent vector -> nonzero coefficient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CentralPolynomial {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, Rational>,
}

impl CentralPolynomial {
    pub fn zero(nvars: usize) -> Self {
        CentralPolynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: Rational) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    /// The variable `λ_{k+1}` (0-based `k`).
    pub fn variable(nvars: usize, k: usize) -> Self {
        assert!(k < nvars, "variable index out of range");
        let mut e = vec![0; nvars];
        e[k] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, Rational::one());
        p
    }

    /// `Σ coeffs[k] λ_{k+1}`.
    pub fn linear_form(coeffs: &[Rational]) -> Self {
        let n = coeffs.len();
        let mut p = Self::zero(n);
        for (k, c) in coeffs.iter().enumerate() {
            let mut e = vec![0; n];
            e[k] = 1;
            p.add_term(e, c.clone());
        }
        p
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs; like terms add.
    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Vec<u32>, Rational)>) -> Self {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            assert_eq!(e.len(), nvars, "exponent vector length mismatch");
            p.add_term(e, c);
        }
        p
    }

    fn add_term(&mut self, e: Vec<u32>, c: Rational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(e);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], &Rational)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), c))
    }

    pub fn coefficient(&self, exponents: &[u32]) -> Rational {
        self.terms.get(exponents).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_nontrivial(&self) -> bool {
        !self.is_zero()
    }

    /// Maximum total degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    pub fn homogeneity(&self) -> Homogeneity {
        let mut degrees = self.terms.keys().map(|e| e.iter().sum::<u32>());
        match degrees.next() {
            None => Homogeneity::Zero,
            Some(first) => {
                if degrees.all(|d| d == first) {
                    Homogeneity::Homogeneous(first)
                } else {
                    Homogeneity::NotHomogeneous
                }
            }
        }
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self::from_terms(self.nvars, self.terms.iter().map(|(e, v)| (e.clone(), v * c)))
    }

    /// Exact value at a rational point.
    pub fn evaluate_exact(&self, lambda: &[Rational]) -> Rational {
        assert_eq!(lambda.len(), self.nvars, "point has wrong dimension");
        let mut acc = Rational::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (x, &k) in lambda.iter().zip(e) {
                for _ in 0..k {
                    t *= x;
                }
            }
            acc += t;
        }
        acc
    }

    /// Floating-point value, nested Horner in `λ1`, then `λ2`, and so on.
    pub fn evaluate(&self, lambda: &[f64]) -> f64 {
        assert_eq!(lambda.len(), self.nvars, "point has wrong dimension");
        let terms: Vec<(&[u32], f64)> = self
            .terms
            .iter()
            .map(|(e, c)| (e.as_slice(), rational_to_f64(c)))
            .collect();
        horner(&terms, lambda, 0)
    }
}

fn horner(terms: &[(&[u32], f64)], x: &[f64], var: usize) -> f64 {
    if terms.is_empty() {
        return 0.0;
    }
    if var == x.len() {
        return terms.iter().map(|(_, c)| c).sum();
    }
    // Group by the exponent of `var`, highest first.
    let mut groups: BTreeMap<u32, Vec<(&[u32], f64)>> = BTreeMap::new();
    for &(e, c) in terms {
        groups.entry(e[var]).or_default().push((e, c));
    }
    let mut acc = 0.0;
    let mut prev: Option<u32> = None;
    for (&k, group) in groups.iter().rev() {
        if let Some(p) = prev {
            acc *= x[var].powi((p - k) as i32);
        }
        acc += horner(group, x, var + 1);
        prev = Some(k);
    }
    if let Some(p) = prev {
        acc *= x[var].powi(p as i32);
    }
    acc
}

impl Add for &CentralPolynomial {
    type Output = CentralPolynomial;
    fn add(self, rhs: &CentralPolynomial) -> CentralPolynomial {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }
}

impl Sub for &CentralPolynomial {
    type Output = CentralPolynomial;
    fn sub(self, rhs: &CentralPolynomial) -> CentralPolynomial {
        self + &(-rhs)
    }
}

impl Neg for &CentralPolynomial {
    type Output = CentralPolynomial;
    fn neg(self) -> CentralPolynomial {
        CentralPolynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }
}

impl Mul for &CentralPolynomial {
    type Output = CentralPolynomial;
    fn mul(self, rhs: &CentralPolynomial) -> CentralPolynomial {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = CentralPolynomial::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }
}

/// Graded-lex descending: higher total degree first, then lexicographically
/// larger exponent vectors.
fn display_order(a: &[u32], b: &[u32]) -> std::cmp::Ordering {
    let da: u32 = a.iter().sum();
    let db: u32 = b.iter().sum();
    db.cmp(&da).then_with(|| b.cmp(a))
}

impl CentralPolynomial {
    /// Terms in printing order.
    pub fn ordered_terms(&self) -> Vec<(&[u32], &Rational)> {
        let mut v: Vec<_> = self.terms().collect();
        v.sort_by(|a, b| display_order(a.0, b.0));
        v
    }
}

impl fmt::Display for CentralPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (idx, (e, c)) in self.ordered_terms().into_iter().enumerate() {
            let negative = c.is_negative();
            let mag = c.abs();
            match (idx, negative) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let factors: Vec<String> = e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(v, &k)| {
                    if k == 1 {
                        format!("λ{}", v + 1)
                    } else {
                        format!("λ{}^{}", v + 1, k)
                    }
                })
                .collect();
            if factors.is_empty() {
                write!(f, "{mag}")?;
            } else if mag.is_one() {
                write!(f, "{}", factors.join("·"))?;
            } else {
                write!(f, "{mag}·{}", factors.join("·"))?;
            }
        }
        Ok(())
    }
}

/// Determinant of a square matrix whose entries are linear forms in the
/// central variables (coefficient vectors over `Z_1..Z_c`).
///
/// Cofactor expansion along rows, memoized over the set of remaining columns.
pub fn det_of_central_matrix(m: &[Vec<Vec<Rational>>]) -> Result<CentralPolynomial, PolyError> {
    let n = m.len();
    if n == 0 {
        return Err(PolyError::Empty);
    }
    for (i, row) in m.iter().enumerate() {
        if row.len() != n {
            return Err(PolyError::NotSquare {
                rows: n,
                bad_row: i,
                cols: row.len(),
            });
        }
    }
    assert!(n <= 63, "determinant size beyond supported range");
    let nvars = m[0][0].len();
    for row in m {
        for e in row {
            if e.len() != nvars {
                return Err(PolyError::VariableCount(nvars, e.len()));
            }
        }
    }
    let entries: Vec<Vec<CentralPolynomial>> = m
        .iter()
        .map(|row| row.iter().map(|e| CentralPolynomial::linear_form(e)).collect())
        .collect();
    let mut memo = HashMap::new();
    let full = (1u64 << n) - 1;
    Ok(minor(&entries, 0, full, nvars, &mut memo))
}

fn minor(
    entries: &[Vec<CentralPolynomial>],
    row: usize,
    cols: u64,
    nvars: usize,
    memo: &mut HashMap<u64, CentralPolynomial>,
) -> CentralPolynomial {
    if row == entries.len() {
        return CentralPolynomial::constant(nvars, Rational::one());
    }
    if let Some(p) = memo.get(&cols) {
        return p.clone();
    }
    let mut acc = CentralPolynomial::zero(nvars);
    let mut position = 0;
    for col in 0..entries.len() {
        if cols & (1 << col) == 0 {
            continue;
        }
        let entry = &entries[row][col];
        if !entry.is_zero() {
            let sub = minor(entries, row + 1, cols & !(1 << col), nvars, memo);
            let term = entry * &sub;
            acc = if position % 2 == 0 { &acc + &term } else { &acc - &term };
        }
        position += 1;
    }
    memo.insert(cols, acc.clone());
    acc
}

/// Exact determinant of a rational matrix by elimination.
pub fn rational_determinant(m: &[Vec<Rational>]) -> Rational {
    let n = m.len();
    let mut a: Vec<Vec<Rational>> = m.to_vec();
    let mut det = Rational::one();
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| !a[r][col].is_zero()) else {
            return Rational::zero();
        };
        if p != col {
            a.swap(p, col);
            det = -det;
        }
        let pivot = a[col][col].clone();
        det *= &pivot;
        for r in (col + 1)..n {
            if a[r][col].is_zero() {
                continue;
            }
            let factor = &a[r][col] / &pivot;
            for c in col..n {
                let delta = &factor * &a[col][c];
                a[r][c] -= delta;
            }
        }
    }
    det
}
