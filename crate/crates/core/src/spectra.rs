//! Quantities indexed by the central parameter λ: the matrices S(λ), X(λ),
//! B(λ) and M(λ), jump indices, region membership, Plancherel density and
//! quadrature over the unit cube K.

use nalgebra::DMatrix;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{rational_to_f64, LieAlgebraSpec, Rational};
use crate::numeric::pairwise_sum;

/// Relative singular-value cut for float ranks.
pub const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("λ has {got} coordinates, the center has dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("λ is outside Q: ‖S(λ)^T‖∞ = {norm} is not < 1")]
    NotInQ { norm: f64 },
}

fn pair_value(coeffs: &[Rational], lambda: &[f64]) -> f64 {
    coeffs
        .iter()
        .zip(lambda)
        .map(|(c, l)| rational_to_f64(c) * l)
        .sum()
}

fn pair_exact(coeffs: &[Rational], lambda: &[Rational]) -> Rational {
    coeffs
        .iter()
        .zip(lambda)
        .fold(Rational::zero(), |acc, (c, l)| acc + c * l)
}

/// `S(λ)_{ij} = λ[X_i, Y_j]` in exact arithmetic (0-based `i, j`).
pub fn s_matrix_exact(spec: &LieAlgebraSpec, lambda: &[Rational]) -> Vec<Vec<Rational>> {
    let d = spec.d();
    (1..=d)
        .map(|i| {
            (1..=d)
                .map(|j| pair_exact(&spec.bracket_xy(i, j), lambda))
                .collect()
        })
        .collect()
}

/// `X(λ)_{ij} = λ[X_i, X_j]` for `i < j`, zero elsewhere.
pub fn x_matrix_exact(spec: &LieAlgebraSpec, lambda: &[Rational]) -> Vec<Vec<Rational>> {
    let d = spec.d();
    (1..=d)
        .map(|i| {
            (1..=d)
                .map(|j| {
                    if i < j {
                        pair_exact(&spec.bracket_xx(i, j), lambda)
                    } else {
                        Rational::zero()
                    }
                })
                .collect()
        })
        .collect()
}

/// `B(λ) = [[I, 0], [-X(λ), -S(λ)]]`.
pub fn b_matrix_exact(spec: &LieAlgebraSpec, lambda: &[Rational]) -> Vec<Vec<Rational>> {
    let d = spec.d();
    let s = s_matrix_exact(spec, lambda);
    let x = x_matrix_exact(spec, lambda);
    let mut b = vec![vec![Rational::zero(); 2 * d]; 2 * d];
    for i in 0..d {
        b[i][i] = Rational::from_integer(1.into());
        for j in 0..d {
            b[d + i][j] = -x[i][j].clone();
            b[d + i][d + j] = -s[i][j].clone();
        }
    }
    b
}

/// `M(λ)_{ij} = λ[B_i, B_j]` in exact arithmetic.
pub fn m_matrix_exact(spec: &LieAlgebraSpec, lambda: &[Rational]) -> Vec<Vec<Rational>> {
    let n = spec.n();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| pair_exact(&spec.bracket_positions(i, j), lambda))
                .collect()
        })
        .collect()
}

/// The matrices attached to one central functional λ.
#[derive(Debug, Clone)]
pub struct SpectralPoint {
    lambda: Vec<f64>,
    s: DMatrix<f64>,
    x: DMatrix<f64>,
    b: DMatrix<f64>,
    det_s: f64,
}

impl SpectralPoint {
    pub fn new(spec: &LieAlgebraSpec, lambda: &[f64]) -> Result<Self, SpectraError> {
        check_dim(spec, lambda)?;
        let d = spec.d();
        let s = DMatrix::from_fn(d, d, |i, j| pair_value(&spec.bracket_xy(i + 1, j + 1), lambda));
        let x = DMatrix::from_fn(d, d, |i, j| {
            if i < j {
                pair_value(&spec.bracket_xx(i + 1, j + 1), lambda)
            } else {
                0.0
            }
        });
        let mut b = DMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            b[(i, i)] = 1.0;
            for j in 0..d {
                b[(d + i, j)] = -x[(i, j)];
                b[(d + i, d + j)] = -s[(i, j)];
            }
        }
        let det_s = s.clone().lu().determinant();
        Ok(SpectralPoint {
            lambda: lambda.to_vec(),
            s,
            x,
            b,
            det_s,
        })
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn d(&self) -> usize {
        self.s.nrows()
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn det_s(&self) -> f64 {
        self.det_s
    }

    /// Maximum absolute row sum of `S(λ)^T`.
    pub fn transpose_row_sum_norm(&self) -> f64 {
        let d = self.d();
        (0..d)
            .map(|j| (0..d).map(|i| self.s[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn region_flags(&self) -> RegionFlags {
        let det = self.det_s;
        let norm = self.transpose_row_sum_norm();
        let in_k = self.lambda.iter().all(|x| x.abs() <= 0.5);
        let in_e = det != 0.0 && det.abs() <= 1.0;
        let in_q = norm < 1.0;
        RegionFlags {
            in_e,
            in_k,
            in_q,
            in_i: in_e && in_k && in_q,
            det_value: det,
            norm_value: norm,
        }
    }
}

pub fn build_spectral_point(spec: &LieAlgebraSpec, lambda: &[f64]) -> Result<SpectralPoint, SpectraError> {
    SpectralPoint::new(spec, lambda)
}

fn check_dim(spec: &LieAlgebraSpec, lambda: &[f64]) -> Result<(), SpectraError> {
    if lambda.len() != spec.central_dim() {
        return Err(SpectraError::Dimension {
            expected: spec.central_dim(),
            got: lambda.len(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionFlags {
    pub in_e: bool,
    pub in_k: bool,
    pub in_q: bool,
    pub in_i: bool,
    pub det_value: f64,
    pub norm_value: f64,
}

pub fn region_flags(spec: &LieAlgebraSpec, lambda: &[f64]) -> Result<RegionFlags, SpectraError> {
    Ok(SpectralPoint::new(spec, lambda)?.region_flags())
}

pub fn plancherel_density(spec: &LieAlgebraSpec, lambda: &[f64]) -> Result<f64, SpectraError> {
    Ok(SpectralPoint::new(spec, lambda)?.det_s().abs())
}

/// The skew-symmetric matrix of the functional on the whole algebra.
#[derive(Debug, Clone)]
pub struct MMatrix {
    pub matrix: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub nullity: usize,
    /// Orthonormal basis of the null space, one column per vector.
    pub null_basis: DMatrix<f64>,
}

pub fn m_matrix(spec: &LieAlgebraSpec, lambda: &[f64]) -> Result<MMatrix, SpectraError> {
    check_dim(spec, lambda)?;
    let n = spec.n();
    let matrix = DMatrix::from_fn(n, n, |i, j| pair_value(&spec.bracket_positions(i, j), lambda));
    let svd = matrix.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let largest = sv.iter().copied().fold(0.0, f64::max);
    let cut = RANK_TOLERANCE * largest;
    let null_rows: Vec<usize> = (0..n).filter(|&k| sv[k] <= cut).collect();
    let null_basis = DMatrix::from_fn(n, null_rows.len(), |i, c| v_t[(null_rows[c], i)]);
    Ok(MMatrix {
        nullity: null_rows.len(),
        matrix,
        singular_values: sv,
        null_basis,
    })
}

fn float_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    m.clone().svd(false, false).singular_values.iter().filter(|&&s| s > tol).count()
}

/// Jump indices `e(λ)` as 1-based basis positions.
///
/// `k` is a jump when `B_k` is not in `span(B_1..B_{k-1}) + n(λ)`. With `N`
/// the null-space basis and `r_k` the rank of its rows `k+1..n`, the sum
/// `span(B_1..B_k) + n(λ)` has dimension `k + r_k`, so `k` jumps iff
/// `r_k = r_{k-1}`.
pub fn jump_indices(spec: &LieAlgebraSpec, lambda: &[f64]) -> Result<Vec<usize>, SpectraError> {
    let mm = m_matrix(spec, lambda)?;
    let n = spec.n();
    let nb = &mm.null_basis;
    let tail_rank = |k: usize| float_rank(&nb.rows(k, n - k).into_owned(), 1e-9);
    let ranks: Vec<usize> = (0..=n).map(tail_rank).collect();
    Ok((1..=n).filter(|&k| ranks[k] == ranks[k - 1]).collect())
}

/// Positions `n-2d+1..=n`, the jump set on the generic layer.
pub fn generic_jump_set(spec: &LieAlgebraSpec) -> Vec<usize> {
    (spec.central_dim() + 1..=spec.n()).collect()
}

/// Midpoints of a uniform `q^c` grid over `K = [-1/2, 1/2]^c`, lexicographic.
pub fn cube_midpoints(c: usize, q: usize) -> Vec<Vec<f64>> {
    let total = q.pow(c as u32);
    (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; c];
            for axis in (0..c).rev() {
                let i = idx % q;
                idx /= q;
                p[axis] = -0.5 + (i as f64 + 0.5) / q as f64;
            }
            p
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasureEstimate {
    pub q: usize,
    pub lebesgue_m: f64,
    pub mu: f64,
}

/// Midpoint-rule estimates of the Lebesgue measure of I and of `μ(I)`.
pub fn measure_of_i(spec: &LieAlgebraSpec, q: usize) -> MeasureEstimate {
    assert!(q >= 2, "quadrature resolution must be at least 2");
    let c = spec.central_dim();
    let w = (q as f64).powi(-(c as i32));
    let cells = cube_midpoints(c, q);
    let contributions: Vec<(f64, f64)> = cells
        .par_iter()
        .map(|p| {
            let flags = SpectralPoint::new(spec, p)
                .expect("midpoint has the central dimension")
                .region_flags();
            if flags.in_i {
                (w, w * flags.det_value.abs())
            } else {
                (0.0, 0.0)
            }
        })
        .collect();
    let m: Vec<f64> = contributions.iter().map(|c| c.0).collect();
    let mu: Vec<f64> = contributions.iter().map(|c| c.1).collect();
    MeasureEstimate {
        q,
        lebesgue_m: pairwise_sum(&m),
        mu: pairwise_sum(&mu),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PackingCertificate {
    pub passed: bool,
    /// Search radius used for the exhaustive lattice scan.
    pub search_radius: i64,
    pub lattice_points_checked: usize,
    pub random_trials: usize,
    /// Integer coefficient vector `j` with `S^{-T} j` inside the open cube `(-1, 1)^d`.
    pub witness: Option<Vec<i64>>,
}

/// Checks that the unit cube packs along the lattice `S(λ)^{-T} ℤ^d`: no
/// nonzero lattice point lies in the difference set `(-1, 1)^d`.
pub fn packing_certificate(
    spec: &LieAlgebraSpec,
    lambda: &[f64],
    trials: usize,
    seed: u64,
) -> Result<PackingCertificate, SpectraError> {
    let point = SpectralPoint::new(spec, lambda)?;
    let norm = point.transpose_row_sum_norm();
    let flags = point.region_flags();
    if !flags.in_q || point.det_s() == 0.0 {
        return Err(SpectraError::NotInQ { norm });
    }
    let d = point.d();
    let st = point.s().transpose();
    let inv = st.clone().try_inverse().ok_or(SpectraError::NotInQ { norm })?;

    // If S^T v = j with |v|∞ < 1 then |j|∞ < ‖S^T‖∞, so this radius is complete.
    let radius = norm.ceil() as i64 + 1;
    let mut checked = 0usize;
    let mut witness = None;
    let side = (2 * radius + 1) as usize;
    let total = side.pow(d as u32);
    for idx in 0..total {
        let mut rem = idx;
        let j: Vec<i64> = (0..d)
            .map(|_| {
                let v = (rem % side) as i64 - radius;
                rem /= side;
                v
            })
            .collect();
        if j.iter().all(|&x| x == 0) {
            continue;
        }
        checked += 1;
        let jv = nalgebra::DVector::from_iterator(d, j.iter().map(|&x| x as f64));
        let v = &inv * jv;
        if v.iter().all(|x| x.abs() < 1.0 - 1e-12) {
            witness = Some(j);
            break;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        if witness.is_some() {
            break;
        }
        let s1: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let s2: Vec<f64> = (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let diff = nalgebra::DVector::from_iterator(d, s1.iter().zip(&s2).map(|(a, b)| a - b));
        let j = &st * diff;
        let rounded: Vec<i64> = j.iter().map(|x| x.round() as i64).collect();
        let on_lattice = j.iter().zip(&rounded).all(|(x, r)| (x - *r as f64).abs() < 1e-12);
        if on_lattice && rounded.iter().any(|&r| r != 0) {
            witness = Some(rounded);
        }
    }

    Ok(PackingCertificate {
        passed: witness.is_none(),
        search_radius: radius,
        lattice_points_checked: checked,
        random_trials: trials,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{parse_spec, rational};

    const HEISENBERG: &str = r#"{"n":3,"d":1,"brackets":[{"left":"X1","right":"Y1","value":{"Z1":"1"}}]}"#;
    const FIVE: &str = r#"{"n":5,"d":2,"brackets":[
        {"left":"X1","right":"X2","value":{"Z1":"1"}},
        {"left":"X1","right":"Y1","value":{"Z1":"1"}},
        {"left":"X2","right":"Y2","value":{"Z1":"1"}}]}"#;

    #[test]
    fn heisenberg_blocks() {
        let spec = parse_spec(HEISENBERG).unwrap();
        let p = SpectralPoint::new(&spec, &[2.0]).unwrap();
        assert_eq!(p.s()[(0, 0)], 2.0);
        assert_eq!(p.x()[(0, 0)], 0.0);
        assert_eq!(p.b(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0]));
    }

    #[test]
    fn nullity_and_jumps_heisenberg() {
        let spec = parse_spec(HEISENBERG).unwrap();
        assert_eq!(m_matrix(&spec, &[1.0]).unwrap().nullity, 1);
        assert_eq!(m_matrix(&spec, &[0.0]).unwrap().nullity, 3);
        assert_eq!(jump_indices(&spec, &[1.0]).unwrap(), vec![2, 3]);
        assert!(jump_indices(&spec, &[0.0]).unwrap().is_empty());
    }

    #[test]
    fn region_flags_heisenberg() {
        let spec = parse_spec(HEISENBERG).unwrap();
        assert!(region_flags(&spec, &[0.25]).unwrap().in_i);
        assert!(!region_flags(&spec, &[0.0]).unwrap().in_i);
        assert!(!region_flags(&spec, &[0.75]).unwrap().in_k);
        assert_eq!(plancherel_density(&spec, &[-0.5]).unwrap(), 0.5);
    }

    #[test]
    fn five_dim_density() {
        let spec = parse_spec(FIVE).unwrap();
        let v = plancherel_density(&spec, &[1.0 / 3.0]).unwrap();
        assert!((v - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn wrong_dimension_rejected() {
        let spec = parse_spec(FIVE).unwrap();
        assert!(matches!(
            SpectralPoint::new(&spec, &[0.1, 0.2]),
            Err(SpectraError::Dimension { .. })
        ));
    }

    #[test]
    fn heisenberg_measure_converges() {
        let spec = parse_spec(HEISENBERG).unwrap();
        let m = measure_of_i(&spec, 64);
        assert!((m.mu - 0.25).abs() < 1e-12);
        assert!((m.lebesgue_m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn packing_heisenberg() {
        let spec = parse_spec(HEISENBERG).unwrap();
        let cert = packing_certificate(&spec, &[0.5], 100, 7).unwrap();
        assert!(cert.passed);
        assert!(matches!(
            packing_certificate(&spec, &[1.5], 10, 7),
            Err(SpectraError::NotInQ { .. })
        ));
    }

    #[test]
    fn exact_blocks_match_float() {
        let spec = parse_spec(FIVE).unwrap();
        let lam = [rational(1, 3)];
        let b = b_matrix_exact(&spec, &lam);
        let p = SpectralPoint::new(&spec, &[1.0 / 3.0]).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((rational_to_f64(&b[i][j]) - p.b()[(i, j)]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn midpoints_are_lexicographic() {
        let pts = cube_midpoints(2, 2);
        assert_eq!(pts, vec![vec![-0.25, -0.25], vec![-0.25, 0.25], vec![0.25, -0.25], vec![0.25, 0.25]]);
    }
}
