//! Independent evaluation paths checked against the library.

mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use nilband::algebra::{exact_rank, rational, rational_to_f64, BasisElement, GroupElement, LieAlgebraSpec, Rational};
use nilband::band::{
    coefficient_transform, probe_set, random_band_limited, reconstruct, reconstruction_error,
    synthesize_admissible_f, BandLimitedVector, RandomFieldOptions, SincTable, SpectralQuadrature,
    VectorFieldU,
};
use nilband::frame::{
    frame_bounds_family, frame_operator_apply, modulation_window, parseval_certify, CertifyOptions,
    PowerOptions, Verdict,
};
use nilband::poly::rational_determinant;
use nilband::repr::{
    chirp_u, gabor_system, window_phi, GaborIndex, Grid, GridFunction, IrreducibleRep,
};
use nilband::spectra::{m_matrix, m_matrix_exact, s_matrix_exact, SpectralPoint};
use num_complex::Complex64;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{load, random_complex, random_element, random_rational, ALL_FIXTURES};

type Matrix = Vec<Vec<Rational>>;

fn identity_matrix(n: usize) -> Matrix {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }).collect())
        .collect()
}

fn mat_mul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (0..n).fold(Rational::zero(), |acc, k| acc + &a[i][k] * &b[k][j]))
                .collect()
        })
        .collect()
}

/// `exp ρ(W) = I + ρ(W)` with `ρ(W)(U, t) = (½[W, U] + tW, 0)` on `n ⊕ ℝ`.
///
/// For a step-two algebra `ρ` is a faithful representation with `ρ(W)² = 0`,
/// so products of these matrices realize the group law independently of BCH.
fn exp_matrix(spec: &LieAlgebraSpec, w: &[Rational]) -> Matrix {
    let n = spec.n();
    let half = rational(1, 2);
    let mut m = identity_matrix(n + 1);
    for j in 0..n {
        let col = spec.embed_central(&spec.bracket(w, &spec.unit(spec.element_at(j))));
        for (i, v) in col.into_iter().enumerate() {
            m[i][j] += v * &half;
        }
    }
    for (i, v) in w.iter().enumerate() {
        m[i][n] += v;
    }
    m
}

fn element_matrix(spec: &LieAlgebraSpec, g: &GroupElement) -> Matrix {
    let n = spec.n();
    let scaled = |e: BasisElement, t: &Rational| -> Vec<Rational> {
        spec.unit(e).into_iter().map(|x| x * t).collect()
    };
    let mut central = vec![Rational::zero(); n];
    for (k, t) in g.z.iter().enumerate() {
        for (c, x) in central.iter_mut().zip(scaled(BasisElement::Z(k + 1), t)) {
            *c += x;
        }
    }
    let mut m = exp_matrix(spec, &central);
    for j in (1..=spec.d()).rev() {
        m = mat_mul(&m, &exp_matrix(spec, &scaled(BasisElement::Y(j), &g.l[j - 1])));
    }
    for i in (1..=spec.d()).rev() {
        m = mat_mul(&m, &exp_matrix(spec, &scaled(BasisElement::X(i), &g.m[i - 1])));
    }
    m
}

#[test]
fn group_law_matches_matrix_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for name in ALL_FIXTURES {
        let spec = load(name);
        let one = identity_matrix(spec.n() + 1);
        for _ in 0..100 {
            let g = random_element(&spec, &mut rng, 5);
            let h = random_element(&spec, &mut rng, 5);
            let mg = element_matrix(&spec, &g);
            assert_eq!(
                mat_mul(&mg, &element_matrix(&spec, &h)),
                element_matrix(&spec, &spec.group_multiply(&g, &h)),
                "{name}: product of {g} and {h}"
            );
            assert_eq!(mat_mul(&mg, &element_matrix(&spec, &spec.group_inverse(&g))), one, "{name}: inverse of {g}");
        }
    }
}

#[test]
fn matrix_model_is_faithful_on_samples() {
    let spec = load("example2");
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let one = identity_matrix(spec.n() + 1);
    for _ in 0..50 {
        let g = random_element(&spec, &mut rng, 4);
        assert_eq!(element_matrix(&spec, &g) == one, g.is_identity());
    }
}

fn exact_nullity(spec: &LieAlgebraSpec, lambda: &[Rational]) -> usize {
    spec.n() - exact_rank(m_matrix_exact(spec, lambda))
}

#[test]
fn nullity_matches_exact_rank() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for name in ALL_FIXTURES {
        let spec = load(name);
        let c = spec.central_dim();
        let mut checked = 0;
        while checked < 40 {
            let lambda: Vec<Rational> = (0..c).map(|_| random_rational(&mut rng, 7)).collect();
            if rational_determinant(&s_matrix_exact(&spec, &lambda)).is_zero() {
                continue;
            }
            checked += 1;
            let exact = exact_nullity(&spec, &lambda);
            let float: Vec<f64> = lambda.iter().map(rational_to_f64).collect();
            assert_eq!(exact, c, "{name} at {float:?}");
            assert_eq!(m_matrix(&spec, &float).unwrap().nullity, exact, "{name} at {float:?}");
        }
    }
}

#[test]
fn nullity_jumps_on_the_singular_set() {
    // det S = λ1² - λ2² vanishes on the diagonal.
    let spec = load("example1");
    let lambda = vec![rational(1, 3), rational(1, 3)];
    let exact = exact_nullity(&spec, &lambda);
    assert!(exact > spec.central_dim());
    assert_eq!(m_matrix(&spec, &[1.0 / 3.0, 1.0 / 3.0]).unwrap().nullity, exact);
}

fn random_core_vector(grid: Grid, half: f64, rng: &mut impl Rng) -> GridFunction {
    let values = (0..grid.len())
        .map(|i| {
            if grid.point(i).iter().all(|&t| (-half..half).contains(&t)) {
                random_complex(rng)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    GridFunction::new(grid, values).unwrap()
}

/// `U M_{-Sl} T_k U⁻¹ v` evaluated through the chirp operator.
fn conjugated_member(point: &SpectralPoint, v: &GridFunction, k: &[i64], l: &[i64]) -> GridFunction {
    let d = point.d();
    let q = v.grid().q() as i64;
    let s = point.s();
    let freq: Vec<f64> = (0..d).map(|i| -(0..d).map(|j| s[(i, j)] * l[j] as f64).sum::<f64>()).collect();
    let steps: Vec<i64> = k.iter().map(|x| x * q).collect();
    let inner = chirp_u(point, v, true).time_frequency_shift(&steps, &freq).unwrap();
    chirp_u(point, &inner, false)
}

/// Returns the largest deviation from the corrected identity
/// `U M_{-Sl} T_k U⁻¹ = e^{2πi⟨k,Xk⟩} M_{-Sl-(X+Xᵀ)k} T_k` and from the form
/// without the symmetrization and the constant phase.
fn conjugation_gaps(name: &str, lambda: &[f64]) -> (f64, f64) {
    let spec = load(name);
    let point = SpectralPoint::new(&spec, lambda).unwrap();
    let d = spec.d();
    let grid = Grid::new(d, 8, 8).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let v = random_core_vector(grid, 1.0, &mut rng);
    let (s, x) = (point.s(), point.x());
    let mut corrected: f64 = 0.0;
    let mut literal: f64 = 0.0;
    for k in nilband::algebra::integer_box(d, 2, u128::MAX).unwrap() {
        for l in nilband::algebra::integer_box(d, 2, u128::MAX).unwrap() {
            let lhs = conjugated_member(&point, &v, &k, &l);
            let kf: Vec<f64> = k.iter().map(|&t| t as f64).collect();
            let sl = |i: usize| (0..d).map(|j| s[(i, j)] * l[j] as f64).sum::<f64>();
            let xk = |i: usize| (0..d).map(|j| x[(i, j)] * kf[j]).sum::<f64>();
            let xtk = |i: usize| (0..d).map(|j| x[(j, i)] * kf[j]).sum::<f64>();
            let kxk: f64 = (0..d).map(|i| kf[i] * xk(i)).sum();
            let steps: Vec<i64> = k.iter().map(|t| t * grid.q() as i64).collect();
            let sym: Vec<f64> = (0..d).map(|i| -sl(i) - xk(i) - xtk(i)).collect();
            let rhs = v
                .time_frequency_shift(&steps, &sym)
                .unwrap()
                .scale(Complex64::from_polar(1.0, 2.0 * PI * kxk));
            corrected = corrected.max(lhs.max_abs_diff(&rhs).unwrap());
            let plain: Vec<f64> = (0..d).map(|i| -sl(i) - xk(i)).collect();
            let rhs_plain = v.time_frequency_shift(&steps, &plain).unwrap();
            literal = literal.max(lhs.max_abs_diff(&rhs_plain).unwrap());
        }
    }
    (corrected, literal)
}

#[test]
fn chirp_conjugation_identity() {
    let (corrected, literal) = conjugation_gaps("example1", &[1.0 / 3.0, 1.0 / 4.0]);
    assert!(corrected < 1e-11, "corrected identity gap {corrected}");
    assert!(literal > 0.1, "unsymmetrized form should not hold when X ≠ 0, gap {literal}");

    let (corrected, _) = conjugation_gaps("seven_dim_sinc", &[0.25, 0.1, 0.25]);
    assert!(corrected < 1e-11, "corrected identity gap {corrected}");

    // Without X-brackets the two forms coincide.
    let (corrected, literal) = conjugation_gaps("heisenberg", &[0.5]);
    assert!(corrected < 1e-12 && literal < 1e-12);
}

#[test]
fn representation_is_a_homomorphism() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    for (name, lambda) in [
        ("heisenberg", vec![0.3]),
        ("five_dim", vec![-0.4]),
        ("example1", vec![0.35, -0.2]),
        ("seven_dim_sinc", vec![0.25, 0.1, 0.3]),
    ] {
        let spec = load(name);
        let rep = IrreducibleRep::new(&spec, &lambda).unwrap();
        let grid = Grid::new(spec.d(), 8, 4).unwrap();
        let v = random_core_vector(grid, 0.5, &mut rng);
        for _ in 0..20 {
            let aligned = |rng: &mut ChaCha8Rng| {
                let mut g = random_element(&spec, rng, 6);
                for m in g.m.iter_mut() {
                    *m = rational(rng.gen_range(-4..=4), 4);
                }
                g
            };
            let g = aligned(&mut rng);
            let h = aligned(&mut rng);
            let lhs = rep.act(&g, &rep.act(&h, &v).unwrap()).unwrap();
            let rhs = rep.act(&spec.group_multiply(&g, &h), &v).unwrap();
            let gap = lhs.max_abs_diff(&rhs).unwrap();
            assert!(gap < 1e-12, "{name}: π(g)π(h) vs π(gh) gap {gap}");
        }
    }
}

/// Gabor family of the window at `λ` with `|k|∞ ≤ rk` and modulations in the
/// Nyquist window.
fn window_family(name: &str, lambda: &[f64], grid: Grid, rk: u32) -> Vec<GridFunction> {
    let spec = load(name);
    let point = SpectralPoint::new(&spec, lambda).unwrap();
    let window = window_phi(&point, grid).unwrap();
    let ls = modulation_window(point.s(), grid.q());
    let indices: Vec<GaborIndex> = nilband::algebra::integer_box(spec.d(), rk, u128::MAX)
        .unwrap()
        .into_iter()
        .flat_map(|k| ls.iter().map(move |l| GaborIndex { k: k.clone(), l: l.clone() }))
        .collect();
    gabor_system(&point, &window, &indices)
        .unwrap()
        .into_iter()
        .map(|(_, f)| f)
        .collect()
}

#[test]
fn frame_operator_of_orthonormal_families() {
    let grid = Grid::new(1, 4, 4).unwrap();
    let scale = 1.0 / grid.cell_volume().sqrt();
    let basis: Vec<GridFunction> = (0..grid.len())
        .map(|i| {
            let mut values = vec![Complex64::zero(); grid.len()];
            values[i] = Complex64::new(scale, 0.0);
            GridFunction::new(grid, values).unwrap()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let v = random_core_vector(grid, 2.0, &mut rng);
    assert!(frame_operator_apply(&basis, &v).unwrap().max_abs_diff(&v).unwrap() < 1e-12);
    let e = basis[3].clone();
    assert!(frame_operator_apply(std::slice::from_ref(&e), &e).unwrap().max_abs_diff(&e).unwrap() < 1e-12);
    let report = frame_bounds_family(&basis, 1e-10, PowerOptions::default()).unwrap();
    assert!((report.lower_bound - 1.0).abs() < 1e-10 && (report.upper_bound - 1.0).abs() < 1e-10);
    assert_eq!(report.verdict, Verdict::Parseval);
}

#[test]
fn heisenberg_window_frame_operator_matches_dense_gram_sum() {
    let grid = Grid::new(1, 8, 8).unwrap();
    let family = window_family("heisenberg", &[0.5], grid, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    let v = random_core_vector(grid, 1.5, &mut rng);
    let sv = frame_operator_apply(&family, &v).unwrap();

    // Dense Gram summation: Σ_n ⟨v, f_n⟩ f_n written out sample by sample.
    let h = grid.cell_volume();
    let mut dense = vec![Complex64::zero(); grid.len()];
    for f in &family {
        let c: Complex64 = v.values().iter().zip(f.values()).map(|(a, b)| a * b.conj()).sum::<Complex64>() * h;
        for (o, x) in dense.iter_mut().zip(f.values()) {
            *o += c * x;
        }
    }
    let dense = GridFunction::new(grid, dense).unwrap();
    assert!(sv.max_abs_diff(&dense).unwrap() < 1e-12);
    let rel = sv.sub(&v).unwrap().norm() / v.norm();
    assert!(rel <= 1e-3, "relative error {rel}");
}

#[test]
fn dense_cross_check_certifies_fixture_windows() {
    for (name, lambda) in [("five_dim", vec![1.0 / 3.0]), ("seven_dim_sinc", vec![0.25, 0.0, 0.25])] {
        let spec = load(name);
        let grid = Grid::new(spec.d(), 8, 16).unwrap();
        let cert = parseval_certify(&spec, &lambda, grid, CertifyOptions::default()).unwrap();
        assert_eq!(cert.verdict, Verdict::Parseval, "{name}");
        assert!((cert.report.upper_bound - cert.dense_upper).abs() < 1e-8, "{name}");
        assert!((cert.report.lower_bound - cert.dense_lower).abs() < 1e-6, "{name}");
    }
}

#[test]
fn density_violation_has_small_lower_bound() {
    // |det B(λ)| = 4.
    let grid = Grid::new(1, 4, 16).unwrap();
    let family = window_family("heisenberg", &[4.0], grid, 1);
    let report = frame_bounds_family(&family, 2e-2, PowerOptions::default()).unwrap();
    assert!(report.lower_bound <= 0.3, "lower bound {}", report.lower_bound);
    assert_ne!(report.verdict, Verdict::Parseval);
}

struct Setup {
    spec: LieAlgebraSpec,
    f: BandLimitedVector,
    h: BandLimitedVector,
}

fn setup(name: &str, q_lambda: usize, grid: (u32, u32), seed: u64) -> Setup {
    let spec = load(name);
    let grid = Grid::new(spec.d(), grid.0, grid.1).unwrap();
    let quad = Arc::new(SpectralQuadrature::new(&spec, q_lambda).unwrap());
    let u = Arc::new(VectorFieldU::constant_indicator(&quad, grid));
    let f = synthesize_admissible_f(quad.clone(), u.clone(), grid).unwrap();
    let h = random_band_limited(quad, u, grid, RandomFieldOptions { cube_radius: 1, seed }).unwrap();
    Setup { spec, f, h }
}

#[test]
fn central_sinc_values_are_fourier_coefficients() {
    let s = setup("heisenberg", 64, (8, 16), 1);
    for k in -4i64..=4 {
        let x = GroupElement::from_integers(&[k], &[0], &[0]);
        let value = coefficient_transform(&s.f, &s.f, &x).unwrap();
        // Midpoint rule for ∫ |λ| e^{-2πikλ} dλ over [-1/2, 1/2].
        let discrete: Complex64 = (0..64)
            .map(|j| {
                let lam = -0.5 + (j as f64 + 0.5) / 64.0;
                Complex64::from_polar(lam.abs() / 64.0, -2.0 * PI * k as f64 * lam)
            })
            .sum();
        assert!((value - discrete).norm() < 1e-12, "k = {k}");
        let exact = if k == 0 {
            0.25
        } else {
            ((-1f64).powi(k as i32) - 1.0) / (2.0 * PI * PI * (k * k) as f64)
        };
        assert!((value.re - exact).abs() < 1e-3 && value.im.abs() < 1e-12, "k = {k}");
    }
}

#[test]
fn norm_is_the_weighted_field_sum() {
    let s = setup("five_dim", 32, (8, 8), 4);
    let quad = s.h.quadrature();
    let direct: f64 = quad
        .nodes()
        .iter()
        .zip(s.h.fields())
        .map(|(node, v)| quad.cell_weight() * v.norm_sqr() * node.det_s.abs())
        .sum();
    assert!((s.h.norm_sqr() - direct).abs() <= 1e-12 * direct);
    assert!((s.h.inner(&s.h).unwrap().re - direct).abs() <= 1e-12 * direct);
    let identity = s.spec.identity();
    let at_e = coefficient_transform(&s.f, &s.f, &identity).unwrap();
    assert!((at_e.re - s.f.norm_sqr()).abs() < 1e-12 && at_e.im.abs() < 1e-12);
}

#[test]
fn coefficient_transform_is_left_covariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(28);
    for name in ["heisenberg", "five_dim"] {
        let s = setup(name, 16, (8, 8), 2);
        for _ in 0..10 {
            let mut gamma = GroupElement::from_integers(
                &vec![rng.gen_range(-2..=2); s.spec.central_dim()],
                &(0..s.spec.d()).map(|_| rng.gen_range(-2..=2)).collect::<Vec<_>>(),
                &(0..s.spec.d()).map(|_| rng.gen_range(-1..=1)).collect::<Vec<_>>(),
            );
            gamma.z[0] += rational(1, 3);
            let mut x = random_element(&s.spec, &mut rng, 4);
            for m in x.m.iter_mut() {
                *m = rational(rng.gen_range(-8..=8), 8);
            }
            let lhs = coefficient_transform(&s.h, &s.f, &s.spec.group_multiply(&gamma, &x)).unwrap();
            let moved = s.h.left_translate(&s.spec.group_inverse(&gamma)).unwrap();
            let rhs = coefficient_transform(&moved, &s.f, &x).unwrap();
            assert!((lhs - rhs).norm() < 1e-10, "{name}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn reconstruction_of_f_and_at_lattice_points() {
    let s = setup("heisenberg", 64, (8, 16), 3);
    let probes = probe_set(&s.spec, 16, 16, 11);
    let own = reconstruction_error(&s.f, &s.f, &[2, 4, 6, 8], &probes).unwrap();
    assert!(own.errors.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(own.errors[3] <= 5e-2, "h = f error {:?}", own.errors);
    let r = reconstruction_error(&s.h, &s.f, &[8], &probes).unwrap();
    assert!(r.gamma_probe_count > 0);
    assert!(r.gamma_probe_errors[0] <= 1e-2, "Γ probes {:?}", r.gamma_probe_errors);
}

fn gamma_box(spec: &LieAlgebraSpec, radius: u32) -> Vec<GroupElement> {
    spec.gamma_enumerate(radius).unwrap()
}

#[test]
fn reconstruction_is_stable_under_sample_refinement() {
    // Samples recomputed at doubled q_λ change the error by less than the
    // refinement change of ‖f‖².
    let coarse = setup("five_dim", 32, (8, 8), 3);
    let fine = setup("five_dim", 64, (8, 8), 3);
    let spec = &coarse.spec;
    let gammas = gamma_box(spec, 2);
    let probes = probe_set(spec, 8, 4, 12);
    let samples = |s: &Setup| -> Vec<(GroupElement, Complex64)> {
        gammas
            .iter()
            .map(|g| (g.clone(), coefficient_transform(&s.h, &s.f, g).unwrap()))
            .collect()
    };
    let truth: Vec<Complex64> = probes
        .iter()
        .map(|x| coefficient_transform(&coarse.h, &coarse.f, x).unwrap())
        .collect();
    let norm: f64 = truth.iter().map(|t| t.norm_sqr()).sum::<f64>().sqrt();
    let error = |samples: &[(GroupElement, Complex64)]| -> f64 {
        let mut sinc = SincTable::new(&coarse.f);
        probes
            .iter()
            .zip(&truth)
            .map(|(x, t)| (reconstruct(spec, samples, &mut sinc, x).unwrap() - t).norm_sqr())
            .sum::<f64>()
            .sqrt()
            / norm
    };
    let delta_err = (error(&samples(&coarse)) - error(&samples(&fine))).abs();
    let delta_norm = (coarse.f.norm_sqr() - fine.f.norm_sqr()).abs();
    assert!(delta_err < delta_norm, "error change {delta_err} vs norm change {delta_norm}");
}

#[test]
fn parseval_ratios_settle_under_q_lambda_refinement() {
    let radii: Vec<u32> = (0..=4).collect();
    for name in ["heisenberg", "five_dim"] {
        let ratios: Vec<Vec<f64>> = [16, 32, 64]
            .iter()
            .map(|&ql| {
                let s = setup(name, ql, (8, 8), 1);
                nilband::band::parseval_lgamma_ratios(&s.h, &s.f, &radii).unwrap()
            })
            .collect();
        for r in 0..radii.len() {
            let first = (ratios[1][r] - ratios[0][r]).abs();
            let second = (ratios[2][r] - ratios[1][r]).abs();
            assert!(second <= first + 1e-12, "{name} R={r}: {first} then {second}");
            assert!(second < 1e-5, "{name} R={r}: {second}");
        }
    }
}

#[test]
fn det_b_is_signed_det_s() {
    // Block triangular: det B(λ) = det(-S(λ)) = (-1)^d det S(λ).
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for name in ALL_FIXTURES {
        let spec = load(name);
        let sign = if spec.d() % 2 == 0 { rational(1, 1) } else { rational(-1, 1) };
        for _ in 0..100 {
            let lambda: Vec<Rational> = (0..spec.central_dim()).map(|_| random_rational(&mut rng, 9)).collect();
            let det_b = rational_determinant(&nilband::spectra::b_matrix_exact(&spec, &lambda));
            let det_s = rational_determinant(&s_matrix_exact(&spec, &lambda));
            assert_eq!(det_b, det_s * &sign, "{name}");
        }
    }
}
