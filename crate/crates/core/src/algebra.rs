//! Structure constants of a step-two nilpotent Lie algebra `n = z ⊕ b ⊕ a`,
//! the associated group law in exponential coordinates of the second kind,
//! and enumeration of the integer point set used for sampling.
//!
//! The basis is ordered central-first:
//! `Z_c, …, Z_1, Y_d, …, Y_1, X_d, …, X_1` with `c = n - 2d`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::poly::{det_of_central_matrix, CentralPolynomial, Homogeneity};

pub type Rational = BigRational;

/// Default cap on the number of enumerated integer points.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpecError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("dimension mismatch: n = {n}, d = {d} leaves no room for a nontrivial center (need n > 2d >= 2)")]
    Dimension { n: usize, d: usize },
    #[error("bracket {0}: basis element index out of range")]
    IndexOutOfRange(String),
    #[error("bracket [{left}, {right}] cannot be represented: {reason}")]
    NonRepresentable {
        left: String,
        right: String,
        reason: String,
    },
    #[error("bracket [{left}, {right}] has non-central value component `{key}`")]
    NonCentralValue {
        left: String,
        right: String,
        key: String,
    },
    #[error("invalid rational `{0}`")]
    BadRational(String),
    #[error("unknown basis element name `{0}`")]
    BadName(String),
    #[error("bracket [{left}, {right}] is listed more than once")]
    Duplicate { left: String, right: String },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnumerationError {
    #[error("enumeration of (2R+1)^n = {count} points exceeds the cap {cap}")]
    CapExceeded { count: u128, cap: u128 },
    #[error("factor order must list each X index exactly once, got {0:?}")]
    BadOrder(Vec<usize>),
}

/// A basis element with its 1-based index as in the names `Z1`, `Y2`, `X3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasisElement {
    Z(usize),
    Y(usize),
    X(usize),
}

impl fmt::Display for BasisElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisElement::Z(k) => write!(f, "Z{k}"),
            BasisElement::Y(k) => write!(f, "Y{k}"),
            BasisElement::X(k) => write!(f, "X{k}"),
        }
    }
}

impl FromStr for BasisElement {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let mut chars = s.chars();
        let kind = chars.next().ok_or_else(|| SpecError::BadName(s.to_string()))?;
        let index: usize = chars
            .as_str()
            .parse()
            .map_err(|_| SpecError::BadName(s.to_string()))?;
        if index == 0 {
            return Err(SpecError::BadName(s.to_string()));
        }
        match kind {
            'Z' => Ok(BasisElement::Z(index)),
            'Y' => Ok(BasisElement::Y(index)),
            'X' => Ok(BasisElement::X(index)),
            _ => Err(SpecError::BadName(s.to_string())),
        }
    }
}

/// Parses `"p/q"` or `"p"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational, SpecError> {
    let t = text.trim();
    let bad = || SpecError::BadRational(text.to_string());
    match t.split_once('/') {
        Some((p, q)) => {
            let p = BigInt::from_str(p.trim()).map_err(|_| bad())?;
            let q = BigInt::from_str(q.trim()).map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(p, q))
        }
        None => Ok(Rational::from_integer(BigInt::from_str(t).map_err(|_| bad())?)),
    }
}

pub fn rational(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    n: usize,
    d: usize,
    brackets: Vec<RawBracket>,
    #[serde(default)]
    #[allow(dead_code)]
    name: Option<String>,
    #[serde(default)]
    #[allow(dead_code)]
    description: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBracket {
    left: String,
    right: String,
    value: BTreeMap<String, String>,
}

/// Structure constants in the ordered basis.
///
/// Only pairs `(i, j)` with `i < j` (0-based positions in the ordered basis)
/// are stored; each value is a coefficient vector over `Z_1, …, Z_c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LieAlgebraSpec {
    n: usize,
    d: usize,
    brackets: BTreeMap<(usize, usize), Vec<Rational>>,
}

impl LieAlgebraSpec {
    /// Builds a spec from `(left, right, value over Z_1..Z_c)` triples.
    pub fn from_brackets(
        n: usize,
        d: usize,
        entries: &[(BasisElement, BasisElement, Vec<Rational>)],
    ) -> Result<Self, SpecError> {
        if d == 0 || n <= 2 * d {
            return Err(SpecError::Dimension { n, d });
        }
        let mut spec = LieAlgebraSpec {
            n,
            d,
            brackets: BTreeMap::new(),
        };
        let c = n - 2 * d;
        let mut seen = std::collections::BTreeSet::new();
        for (left, right, value) in entries {
            let (ln, rn) = (left.to_string(), right.to_string());
            let label = format!("[{ln}, {rn}]");
            let li = spec
                .try_index_of(*left)
                .ok_or_else(|| SpecError::IndexOutOfRange(label.clone()))?;
            let ri = spec
                .try_index_of(*right)
                .ok_or_else(|| SpecError::IndexOutOfRange(label.clone()))?;
            if value.len() != c {
                return Err(SpecError::IndexOutOfRange(label));
            }
            let reject = |reason: &str| SpecError::NonRepresentable {
                left: ln.clone(),
                right: rn.clone(),
                reason: reason.to_string(),
            };
            match (left, right) {
                (BasisElement::Z(_), _) | (_, BasisElement::Z(_)) => {
                    return Err(reject("central elements commute with everything"))
                }
                (BasisElement::Y(_), BasisElement::Y(_)) => {
                    return Err(reject("b must be commutative"))
                }
                _ => {}
            }
            if li == ri {
                if value.iter().any(|v| !v.is_zero()) {
                    return Err(reject("[B, B] = 0"));
                }
                continue;
            }
            let (key, stored) = if li < ri {
                ((li, ri), value.clone())
            } else {
                ((ri, li), value.iter().map(|v| -v).collect())
            };
            if !seen.insert(key) {
                return Err(SpecError::Duplicate {
                    left: ln,
                    right: rn,
                });
            }
            if stored.iter().any(|v| !v.is_zero()) {
                spec.brackets.insert(key, stored);
            }
        }
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Dimension of the center, `n - 2d`.
    pub fn central_dim(&self) -> usize {
        self.n - 2 * self.d
    }

    /// Number of stored nonzero bracket entries.
    pub fn bracket_count(&self) -> usize {
        self.brackets.len()
    }

    pub fn stored_brackets(&self) -> impl Iterator<Item = (BasisElement, BasisElement, &[Rational])> {
        self.brackets
            .iter()
            .map(|(&(i, j), v)| (self.element_at(i), self.element_at(j), v.as_slice()))
    }

    fn try_index_of(&self, e: BasisElement) -> Option<usize> {
        let c = self.central_dim();
        let d = self.d;
        match e {
            BasisElement::Z(k) if (1..=c).contains(&k) => Some(c - k),
            BasisElement::Y(j) if (1..=d).contains(&j) => Some(c + d - j),
            BasisElement::X(i) if (1..=d).contains(&i) => Some(self.n - i),
            _ => None,
        }
    }

    /// 0-based position of a basis element in the ordered basis.
    ///
    /// Panics if the element does not exist in this algebra.
    pub fn index_of(&self, e: BasisElement) -> usize {
        self.try_index_of(e)
            .unwrap_or_else(|| panic!("{e} is not a basis element of this algebra"))
    }

    pub fn element_at(&self, idx: usize) -> BasisElement {
        let c = self.central_dim();
        let d = self.d;
        assert!(idx < self.n, "basis position {idx} out of range");
        if idx < c {
            BasisElement::Z(c - idx)
        } else if idx < c + d {
            BasisElement::Y(c + d - idx)
        } else {
            BasisElement::X(self.n - idx)
        }
    }

    pub fn basis_names(&self) -> Vec<String> {
        (0..self.n).map(|i| self.element_at(i).to_string()).collect()
    }

    /// Coefficient vector (length n) of a single basis element.
    pub fn unit(&self, e: BasisElement) -> Vec<Rational> {
        let mut v = vec![Rational::zero(); self.n];
        v[self.index_of(e)] = Rational::one();
        v
    }

    /// Bracket of two basis positions, over `Z_1..Z_c`.
    pub fn bracket_positions(&self, i: usize, j: usize) -> Vec<Rational> {
        let c = self.central_dim();
        if i < j {
            self.brackets
                .get(&(i, j))
                .cloned()
                .unwrap_or_else(|| vec![Rational::zero(); c])
        } else if j < i {
            self.brackets
                .get(&(j, i))
                .map(|v| v.iter().map(|x| -x).collect())
                .unwrap_or_else(|| vec![Rational::zero(); c])
        } else {
            vec![Rational::zero(); c]
        }
    }

    pub fn bracket_elements(&self, a: BasisElement, b: BasisElement) -> Vec<Rational> {
        self.bracket_positions(self.index_of(a), self.index_of(b))
    }

    /// `[X_i, Y_j]` over `Z_1..Z_c`.
    pub fn bracket_xy(&self, i: usize, j: usize) -> Vec<Rational> {
        self.bracket_elements(BasisElement::X(i), BasisElement::Y(j))
    }

    /// `[X_i, X_j]` over `Z_1..Z_c`.
    pub fn bracket_xx(&self, i: usize, j: usize) -> Vec<Rational> {
        self.bracket_elements(BasisElement::X(i), BasisElement::X(j))
    }

    /// Bilinear antisymmetric extension of the table to coefficient vectors.
    pub fn bracket(&self, u: &[Rational], v: &[Rational]) -> Vec<Rational> {
        assert_eq!(u.len(), self.n, "left operand has wrong length");
        assert_eq!(v.len(), self.n, "right operand has wrong length");
        let mut out = vec![Rational::zero(); self.central_dim()];
        for (&(i, j), val) in &self.brackets {
            let coef = &u[i] * &v[j] - &u[j] * &v[i];
            if coef.is_zero() {
                continue;
            }
            for (o, x) in out.iter_mut().zip(val) {
                *o += &coef * x;
            }
        }
        out
    }

    /// The d×d matrix of central vectors with entry `(i, j) = [X_{i+1}, Y_{j+1}]`.
    pub fn s_matrix_entries(&self) -> Vec<Vec<Vec<Rational>>> {
        (1..=self.d)
            .map(|i| (1..=self.d).map(|j| self.bracket_xy(i, j)).collect())
            .collect()
    }

    /// Central vector as a coordinate vector of length n.
    pub fn embed_central(&self, z: &[Rational]) -> Vec<Rational> {
        let mut v = vec![Rational::zero(); self.n];
        for (k, val) in z.iter().enumerate() {
            v[self.index_of(BasisElement::Z(k + 1))] = val.clone();
        }
        v
    }

    pub fn validate(&self) -> ValidationReport {
        let mut checks = Vec::new();

        let jacobi_failure = self.first_jacobi_failure();
        checks.push(CheckResult {
            name: "jacobi".into(),
            passed: jacobi_failure.is_none(),
            detail: match jacobi_failure {
                None => format!("holds on all {} basis triples", binomial3(self.n)),
                Some((a, b, c)) => format!("fails on ({a}, {b}, {c})"),
            },
        });

        let c = self.central_dim();
        let noncentral: Vec<usize> = (c..self.n).collect();
        let pairing: Vec<Vec<Rational>> = noncentral
            .iter()
            .map(|&i| {
                (0..self.n)
                    .flat_map(|j| self.bracket_positions(i, j))
                    .collect()
            })
            .collect();
        let r = exact_rank(pairing);
        checks.push(CheckResult {
            name: "center_is_z".into(),
            passed: r == 2 * self.d,
            detail: format!(
                "rank of the bracket pairing on b+a is {r} (need {})",
                2 * self.d
            ),
        });

        let x_against_b: Vec<Vec<Rational>> = (1..=self.d)
            .map(|i| (1..=self.d).flat_map(|j| self.bracket_xy(i, j)).collect())
            .collect();
        let r = exact_rank(x_against_b);
        checks.push(CheckResult {
            name: "zb_maximal_commutative".into(),
            passed: r == self.d,
            detail: format!("rank of A -> [A, b] on a is {r} (need {})", self.d),
        });

        checks.push(CheckResult {
            name: "ab_in_z".into(),
            passed: true,
            detail: "bracket table codomain is z".into(),
        });

        let det = det_of_central_matrix(&self.s_matrix_entries())
            .expect("S is square by construction");
        checks.push(CheckResult {
            name: "detS_nontrivial".into(),
            passed: det.is_nontrivial(),
            detail: format!("det S = {det}"),
        });
        let hom = det.homogeneity();
        checks.push(CheckResult {
            name: "detS_homogeneous".into(),
            passed: hom == Homogeneity::Homogeneous(self.d as u32),
            detail: match hom {
                Homogeneity::Zero => "det S is the zero polynomial".into(),
                Homogeneity::Homogeneous(k) => format!("homogeneous of degree {k}"),
                Homogeneity::NotHomogeneous => "not homogeneous".into(),
            },
        });

        ValidationReport { checks, det_s: det }
    }

    fn first_jacobi_failure(&self) -> Option<(BasisElement, BasisElement, BasisElement)> {
        let basis: Vec<Vec<Rational>> = (0..self.n)
            .map(|i| self.unit(self.element_at(i)))
            .collect();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                for k in (j + 1)..self.n {
                    let t1 = self.bracket(&self.embed_central(&self.bracket(&basis[i], &basis[j])), &basis[k]);
                    let t2 = self.bracket(&self.embed_central(&self.bracket(&basis[j], &basis[k])), &basis[i]);
                    let t3 = self.bracket(&self.embed_central(&self.bracket(&basis[k], &basis[i])), &basis[j]);
                    let nonzero = t1
                        .iter()
                        .zip(&t2)
                        .zip(&t3)
                        .any(|((a, b), c)| !(a + b + c).is_zero());
                    if nonzero {
                        return Some((self.element_at(i), self.element_at(j), self.element_at(k)));
                    }
                }
            }
        }
        None
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement::identity(self.central_dim(), self.d)
    }

    /// Sum over `i > j` of `m_i m_j [X_i, X_j] / 2`: the central part of
    /// `log(exp(m_d X_d) ⋯ exp(m_1 X_1))`.
    fn x_product_correction(&self, m: &[Rational]) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.central_dim()];
        let half = rational(1, 2);
        for i in 1..=self.d {
            for j in 1..i {
                let coef = &m[i - 1] * &m[j - 1] * &half;
                if coef.is_zero() {
                    continue;
                }
                for (o, x) in out.iter_mut().zip(self.bracket_xx(i, j)) {
                    *o += &coef * x;
                }
            }
        }
        out
    }

    /// `[l·Y, m·X]` over `Z_1..Z_c`.
    fn y_x_pairing(&self, l: &[Rational], m: &[Rational]) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); self.central_dim()];
        for j in 1..=self.d {
            for i in 1..=self.d {
                let coef = &l[j - 1] * &m[i - 1];
                if coef.is_zero() {
                    continue;
                }
                for (o, x) in out.iter_mut().zip(self.bracket_xy(i, j)) {
                    *o -= &coef * x;
                }
            }
        }
        out
    }

    /// Central coordinate of the first-kind logarithm of `g`.
    fn first_kind_center(&self, g: &GroupElement) -> Vec<Rational> {
        let half = rational(1, 2);
        let yx = self.y_x_pairing(&g.l, &g.m);
        let cx = self.x_product_correction(&g.m);
        g.z.iter()
            .zip(yx)
            .zip(cx)
            .map(|((z, a), b)| z + a * &half + b)
            .collect()
    }

    fn element_from_first_kind(&self, w: Vec<Rational>, l: Vec<Rational>, m: Vec<Rational>) -> GroupElement {
        let half = rational(1, 2);
        let yx = self.y_x_pairing(&l, &m);
        let cx = self.x_product_correction(&m);
        let z = w
            .into_iter()
            .zip(yx)
            .zip(cx)
            .map(|((w, a), b)| w - a * &half - b)
            .collect();
        GroupElement { z, l, m }
    }

    /// Noncentral part `l·Y + m·X` as a coordinate vector of length n.
    fn noncentral_vector(&self, l: &[Rational], m: &[Rational]) -> Vec<Rational> {
        let mut v = vec![Rational::zero(); self.n];
        for j in 1..=self.d {
            v[self.index_of(BasisElement::Y(j))] = l[j - 1].clone();
            v[self.index_of(BasisElement::X(j))] = m[j - 1].clone();
        }
        v
    }

    pub fn group_multiply(&self, g: &GroupElement, h: &GroupElement) -> GroupElement {
        self.check_shape(g);
        self.check_shape(h);
        let wg = self.first_kind_center(g);
        let wh = self.first_kind_center(h);
        let comm = self.bracket(
            &self.noncentral_vector(&g.l, &g.m),
            &self.noncentral_vector(&h.l, &h.m),
        );
        let half = rational(1, 2);
        let w = wg
            .into_iter()
            .zip(wh)
            .zip(comm)
            .map(|((a, b), c)| a + b + c * &half)
            .collect();
        let l = g.l.iter().zip(&h.l).map(|(a, b)| a + b).collect();
        let m = g.m.iter().zip(&h.m).map(|(a, b)| a + b).collect();
        self.element_from_first_kind(w, l, m)
    }

    pub fn group_inverse(&self, g: &GroupElement) -> GroupElement {
        self.check_shape(g);
        // exp(W)^{-1} = exp(-W) in first-kind coordinates.
        let w: Vec<Rational> = self.first_kind_center(g).into_iter().map(|x| -x).collect();
        let l = g.l.iter().map(|x| -x).collect();
        let m = g.m.iter().map(|x| -x).collect();
        self.element_from_first_kind(w, l, m)
    }

    /// The element `exp(t·B)` for a single basis element.
    pub fn basis_exponential(&self, e: BasisElement, t: Rational) -> GroupElement {
        let mut g = self.identity();
        match e {
            BasisElement::Z(k) => g.z[k - 1] = t,
            BasisElement::Y(j) => g.l[j - 1] = t,
            BasisElement::X(i) => g.m[i - 1] = t,
        }
        g
    }

    /// Ordered product `exp(t_1 B_{a_1}) ⋯ exp(t_r B_{a_r})`.
    pub fn ordered_product(&self, factors: &[(BasisElement, Rational)]) -> GroupElement {
        factors.iter().fold(self.identity(), |acc, (e, t)| {
            self.group_multiply(&acc, &self.basis_exponential(*e, t.clone()))
        })
    }

    fn check_shape(&self, g: &GroupElement) {
        assert!(
            g.z.len() == self.central_dim() && g.l.len() == self.d && g.m.len() == self.d,
            "group element does not match the algebra's dimensions"
        );
    }

    /// All integer points with coordinates in `[-R, R]`, lexicographic in
    /// basis order `(Z_c..Z_1, Y_d..Y_1, X_d..X_1)`.
    pub fn gamma_enumerate(&self, radius: u32) -> Result<Vec<GroupElement>, EnumerationError> {
        self.gamma_enumerate_capped(radius, DEFAULT_ENUMERATION_CAP)
    }

    pub fn gamma_enumerate_capped(
        &self,
        radius: u32,
        cap: u128,
    ) -> Result<Vec<GroupElement>, EnumerationError> {
        let coords = integer_box(self.n, radius, cap)?;
        let c = self.central_dim();
        let d = self.d;
        Ok(coords
            .into_iter()
            .map(|t| {
                let mut g = self.identity();
                for (pos, v) in t.into_iter().enumerate() {
                    let v = Rational::from_integer(BigInt::from(v));
                    match self.element_at(pos) {
                        BasisElement::Z(k) => g.z[k - 1] = v,
                        BasisElement::Y(j) => g.l[j - 1] = v,
                        BasisElement::X(i) => g.m[i - 1] = v,
                    }
                }
                debug_assert!(g.z.len() == c && g.l.len() == d);
                g
            })
            .collect())
    }

    /// Same integer box, but each point is the product
    /// `exp(zZ) exp(lY) ∏_{i in x_order} exp(m_i X_i)` rewritten in canonical
    /// coordinates. The canonical order is `x_order = [d, d-1, …, 1]`.
    pub fn gamma_enumerate_with_x_order(
        &self,
        radius: u32,
        x_order: &[usize],
    ) -> Result<Vec<GroupElement>, EnumerationError> {
        let mut sorted = x_order.to_vec();
        sorted.sort_unstable();
        if sorted != (1..=self.d).collect::<Vec<_>>() {
            return Err(EnumerationError::BadOrder(x_order.to_vec()));
        }
        let points = self.gamma_enumerate(radius)?;
        Ok(points
            .into_iter()
            .map(|p| {
                let mut head = p.clone();
                head.m.iter_mut().for_each(|x| *x = Rational::zero());
                let tail: Vec<(BasisElement, Rational)> = x_order
                    .iter()
                    .map(|&i| (BasisElement::X(i), p.m[i - 1].clone()))
                    .collect();
                self.group_multiply(&head, &self.ordered_product(&tail))
            })
            .collect())
    }
}

fn binomial3(n: usize) -> usize {
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2) / 6
    }
}

/// All integer vectors in `[-R, R]^dim` in lexicographic order.
pub fn integer_box(dim: usize, radius: u32, cap: u128) -> Result<Vec<Vec<i64>>, EnumerationError> {
    let side = 2 * radius as u128 + 1;
    let count = side.checked_pow(dim as u32).unwrap_or(u128::MAX);
    if count > cap {
        return Err(EnumerationError::CapExceeded { count, cap });
    }
    let r = radius as i64;
    let mut out = Vec::with_capacity(count as usize);
    let mut cur = vec![-r; dim];
    loop {
        out.push(cur.clone());
        let mut pos = dim;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            if cur[pos] < r {
                cur[pos] += 1;
                break;
            }
            cur[pos] = -r;
        }
    }
}

/// Exact rank of a list of rational row vectors.
pub fn exact_rank(mut rows: Vec<Vec<Rational>>) -> usize {
    let ncols = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..ncols {
        let Some(pivot) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, pivot);
        let p = rows[rank][col].clone();
        for r in (rank + 1)..rows.len() {
            if rows[r][col].is_zero() {
                continue;
            }
            let factor = &rows[r][col] / &p;
            for c2 in col..ncols {
                let delta = &factor * &rows[rank][c2];
                rows[r][c2] -= delta;
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

/// Parses the JSON algebra description.
pub fn parse_spec(text: &str) -> Result<LieAlgebraSpec, SpecError> {
    let raw: RawSpec = serde_json::from_str(text).map_err(|e| {
        let full = e.to_string();
        // serde_json appends the position, which the variant already carries.
        let suffix = format!(" at line {} column {}", e.line(), e.column());
        SpecError::Syntax {
            line: e.line(),
            column: e.column(),
            message: full.strip_suffix(&suffix).unwrap_or(&full).to_string(),
        }
    })?;
    if raw.d == 0 || raw.n <= 2 * raw.d {
        return Err(SpecError::Dimension { n: raw.n, d: raw.d });
    }
    let c = raw.n - 2 * raw.d;
    let mut entries = Vec::with_capacity(raw.brackets.len());
    for b in &raw.brackets {
        let left: BasisElement = b.left.parse()?;
        let right: BasisElement = b.right.parse()?;
        let mut value = vec![Rational::zero(); c];
        for (key, text) in &b.value {
            let k = match key.parse::<BasisElement>() {
                Ok(BasisElement::Z(k)) => k,
                _ => {
                    return Err(SpecError::NonCentralValue {
                        left: b.left.clone(),
                        right: b.right.clone(),
                        key: key.clone(),
                    })
                }
            };
            if k > c {
                return Err(SpecError::IndexOutOfRange(format!(
                    "[{}, {}] value {key}",
                    b.left, b.right
                )));
            }
            value[k - 1] += parse_rational(text)?;
        }
        entries.push((left, right, value));
    }
    LieAlgebraSpec::from_brackets(raw.n, raw.d, &entries)
}

/// Renders a spec back into the JSON config format.
pub fn spec_to_json(spec: &LieAlgebraSpec) -> serde_json::Value {
    let brackets: Vec<serde_json::Value> = spec
        .stored_brackets()
        .map(|(a, b, v)| {
            let value: serde_json::Map<String, serde_json::Value> = v
                .iter()
                .enumerate()
                .filter(|(_, x)| !x.is_zero())
                .map(|(k, x)| (format!("Z{}", k + 1), serde_json::Value::String(x.to_string())))
                .collect();
            serde_json::json!({"left": a.to_string(), "right": b.to_string(), "value": value})
        })
        .collect();
    serde_json::json!({"n": spec.n(), "d": spec.d(), "brackets": brackets})
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub det_s: CentralPolynomial,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }
}

/// A point of the group in exponential coordinates of the second kind:
/// `exp(Σ z_k Z_k) · exp(l_d Y_d) ⋯ exp(l_1 Y_1) · exp(m_d X_d) ⋯ exp(m_1 X_1)`.
///
/// `z[k-1]` is the coefficient of `Z_k`, `l[j-1]` of `Y_j`, `m[i-1]` of `X_i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupElement {
    pub z: Vec<Rational>,
    pub l: Vec<Rational>,
    pub m: Vec<Rational>,
}

impl GroupElement {
    pub fn identity(c: usize, d: usize) -> Self {
        GroupElement {
            z: vec![Rational::zero(); c],
            l: vec![Rational::zero(); d],
            m: vec![Rational::zero(); d],
        }
    }

    pub fn from_integers(z: &[i64], l: &[i64], m: &[i64]) -> Self {
        let conv = |v: &[i64]| v.iter().map(|&x| Rational::from_integer(BigInt::from(x))).collect();
        GroupElement {
            z: conv(z),
            l: conv(l),
            m: conv(m),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.z.iter().chain(&self.l).chain(&self.m).all(|x| x.is_zero())
    }

    pub fn is_integral(&self) -> bool {
        self.z.iter().chain(&self.l).chain(&self.m).all(|x| x.is_integer())
    }

    /// Largest absolute coordinate.
    pub fn sup_norm(&self) -> Rational {
        self.z
            .iter()
            .chain(&self.l)
            .chain(&self.m)
            .map(|x| x.abs())
            .max()
            .unwrap_or_else(Rational::zero)
    }

    /// The element with the central coordinates cleared.
    pub fn noncentral_part(&self) -> GroupElement {
        GroupElement {
            z: vec![Rational::zero(); self.z.len()],
            l: self.l.clone(),
            m: self.m.clone(),
        }
    }
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[Rational]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "(z=[{}], l=[{}], m=[{}])", join(&self.z), join(&self.l), join(&self.m))
    }
}
