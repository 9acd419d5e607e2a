mod common;

use std::sync::Arc;

use nilband::algebra::{integer_box, parse_rational, rational, GroupElement, LieAlgebraSpec, Rational};
use nilband::band::{SpectralQuadrature, VectorFieldU};
use nilband::frame::{frame_operator_apply, frame_sum, modulation_window, PARSEVAL_TOLERANCE};
use nilband::poly::{det_of_central_matrix, rational_determinant, Homogeneity};
use nilband::repr::{
    gabor_system, read_grid_function, window_phi, write_grid_function, GaborIndex, Grid, GridFunction,
};
use nilband::spectra::{packing_certificate, s_matrix_exact, SpectralPoint};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{load, random_complex, ALL_FIXTURES};

fn fixture() -> impl Strategy<Value = &'static str> {
    prop::sample::select(ALL_FIXTURES.to_vec())
}

fn small_rational() -> impl Strategy<Value = Rational> {
    (-40i64..=40, 1i64..=9).prop_map(|(p, q)| rational(p, q))
}

fn rationals(n: usize) -> impl Strategy<Value = Vec<Rational>> {
    prop::collection::vec(small_rational(), n)
}

fn element(spec: &LieAlgebraSpec) -> impl Strategy<Value = GroupElement> {
    (rationals(spec.central_dim()), rationals(spec.d()), rationals(spec.d()))
        .prop_map(|(z, l, m)| GroupElement { z, l, m })
}

fn spec_and_elements(count: usize) -> impl Strategy<Value = (LieAlgebraSpec, Vec<GroupElement>)> {
    fixture().prop_flat_map(move |name| {
        let spec = load(name);
        let elems = prop::collection::vec(element(&spec), count);
        (Just(spec), elems)
    })
}

fn random_vector(grid: Grid, half: f64, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..grid.len())
        .map(|i| {
            if grid.point(i).iter().all(|&t| (-half..half).contains(&t)) {
                random_complex(&mut rng)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    GridFunction::new(grid, values).unwrap()
}

fn heisenberg_window_family(rk: u32) -> Vec<GridFunction> {
    let spec = load("heisenberg");
    let point = SpectralPoint::new(&spec, &[0.5]).unwrap();
    let grid = Grid::new(1, 8, 8).unwrap();
    let window = window_phi(&point, grid).unwrap();
    let ls = modulation_window(point.s(), grid.q());
    let indices: Vec<GaborIndex> = integer_box(1, rk, u128::MAX)
        .unwrap()
        .into_iter()
        .flat_map(|k| ls.iter().map(move |l| GaborIndex { k: k.clone(), l: l.clone() }))
        .collect();
    gabor_system(&point, &window, &indices).unwrap().into_iter().map(|(_, f)| f).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inverse_is_exact((spec, g) in spec_and_elements(1)) {
        let g = &g[0];
        prop_assert!(spec.group_multiply(g, &spec.group_inverse(g)).is_identity());
        prop_assert!(spec.group_multiply(&spec.group_inverse(g), g).is_identity());
    }

    #[test]
    fn multiplication_is_associative((spec, e) in spec_and_elements(3)) {
        let left = spec.group_multiply(&spec.group_multiply(&e[0], &e[1]), &e[2]);
        let right = spec.group_multiply(&e[0], &spec.group_multiply(&e[1], &e[2]));
        prop_assert_eq!(left, right);
    }

    #[test]
    fn noncentral_coordinates_add((spec, e) in spec_and_elements(2)) {
        let p = spec.group_multiply(&e[0], &e[1]);
        for j in 0..spec.d() {
            prop_assert_eq!(&p.l[j], &(&e[0].l[j] + &e[1].l[j]));
            prop_assert_eq!(&p.m[j], &(&e[0].m[j] + &e[1].m[j]));
        }
    }

    #[test]
    fn bracket_is_bilinear_and_antisymmetric(
        (spec, u, v, w, a) in fixture().prop_flat_map(|name| {
            let spec = load(name);
            let n = spec.n();
            (Just(spec), rationals(n), rationals(n), rationals(n), small_rational())
        })
    ) {
        let neg: Vec<Rational> = spec.bracket(&v, &u).into_iter().map(|x| -x).collect();
        prop_assert_eq!(spec.bracket(&u, &v), neg);
        let combo: Vec<Rational> = u.iter().zip(&w).map(|(x, y)| x * &a + y).collect();
        let expected: Vec<Rational> = spec
            .bracket(&u, &v)
            .into_iter()
            .zip(spec.bracket(&w, &v))
            .map(|(x, y)| x * &a + y)
            .collect();
        prop_assert_eq!(spec.bracket(&combo, &v), expected);
    }

    #[test]
    fn determinant_polynomial_evaluates_to_determinant(
        (spec, lambda, t) in fixture().prop_flat_map(|name| {
            let spec = load(name);
            let c = spec.central_dim();
            (Just(spec), rationals(c), small_rational())
        })
    ) {
        let det = det_of_central_matrix(&spec.s_matrix_entries()).unwrap();
        prop_assert_eq!(det.evaluate_exact(&lambda), rational_determinant(&s_matrix_exact(&spec, &lambda)));
        // Homogeneous of degree d.
        prop_assert_eq!(det.homogeneity(), Homogeneity::Homogeneous(spec.d() as u32));
        let scaled: Vec<Rational> = lambda.iter().map(|x| x * &t).collect();
        let mut power = Rational::from_integer(1.into());
        for _ in 0..spec.d() {
            power *= &t;
        }
        prop_assert_eq!(det.evaluate_exact(&scaled), det.evaluate_exact(&lambda) * power);
    }

    #[test]
    fn rationals_round_trip(r in small_rational()) {
        prop_assert_eq!(parse_rational(&r.to_string()).unwrap(), r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn translation_keeps_support_and_norm(seed in 0u64..1000, shift in -6i64..=6, modulation in -3.0f64..3.0) {
        let grid = Grid::new(2, 4, 4).unwrap();
        let v = random_vector(grid, 0.5, seed);
        let w = v.time_frequency_shift(&[shift, -shift], &[modulation, 0.5]).unwrap();
        prop_assert!((w.norm() - v.norm()).abs() < 1e-12);
        let support = w.support().unwrap();
        for (i, x) in w.values().iter().enumerate() {
            if *x != Complex64::new(0.0, 0.0) {
                let idx = grid.multi_index(i);
                prop_assert!((0..2).all(|a| support.lo[a] <= idx[a] && idx[a] < support.hi[a]));
            }
        }
        let back = w.time_frequency_shift(&[-shift, shift], &[0.0, 0.0]).unwrap();
        prop_assert!((back.norm() - v.norm()).abs() < 1e-12);
    }

    #[test]
    fn dump_round_trips(seed in 0u64..1000, d in 1usize..=2) {
        let grid = Grid::new(d, 2, 4).unwrap();
        let v = random_vector(grid, 1.0, seed);
        let mut bytes = Vec::new();
        write_grid_function(&v, &mut bytes).unwrap();
        prop_assert_eq!(read_grid_function(&mut bytes.as_slice()).unwrap(), v);
    }

    #[test]
    fn frame_operator_is_self_adjoint_and_positive(seed in 0u64..1000) {
        let grid = Grid::new(1, 4, 4).unwrap();
        let family: Vec<GridFunction> = (0..6).map(|k| random_vector(grid, 2.0, seed * 10 + k)).collect();
        let v = random_vector(grid, 2.0, seed + 5000);
        let w = random_vector(grid, 2.0, seed + 6000);
        let sv = frame_operator_apply(&family, &v).unwrap();
        let sw = frame_operator_apply(&family, &w).unwrap();
        let a = sv.inner(&w).unwrap();
        let b = sw.inner(&v).unwrap().conj();
        prop_assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
        let q = sv.inner(&v).unwrap();
        prop_assert!(q.re >= -1e-12 && q.im.abs() <= 1e-12 * q.re.abs().max(1.0));
    }

    #[test]
    fn packing_holds_inside_q(lambda in prop::collection::vec(-0.5f64..0.5, 3), seed in 0u64..100) {
        let spec = load("seven_dim_sinc");
        let flags = SpectralPoint::new(&spec, &lambda).unwrap().region_flags();
        prop_assume!(flags.in_q && flags.det_value != 0.0);
        let cert = packing_certificate(&spec, &lambda, 200, seed).unwrap();
        prop_assert!(cert.passed, "witness {:?}", cert.witness);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn parseval_window_preserves_norms(seed in any::<u64>()) {
        let family = heisenberg_window_family(3);
        let v = random_vector(*family[0].grid(), 2.0, seed);
        let ratio = frame_sum(&family, &v).unwrap() / v.norm_sqr();
        prop_assert!((ratio - 1.0).abs() <= PARSEVAL_TOLERANCE, "ratio {}", ratio);
    }

    #[test]
    fn frame_sums_grow_with_the_index_box(seed in any::<u64>()) {
        let v = random_vector(Grid::new(1, 8, 8).unwrap(), 3.5, seed);
        let sums: Vec<f64> = (0..=3).map(|r| frame_sum(&heisenberg_window_family(r), &v).unwrap()).collect();
        prop_assert!(sums.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{:?}", sums);
    }
}

#[test]
fn quadrature_nodes_lie_in_i_with_unit_fields() {
    for name in ["heisenberg", "five_dim", "example1"] {
        let spec = load(name);
        let quad = Arc::new(SpectralQuadrature::new(&spec, 16).unwrap());
        assert!(!quad.is_empty());
        for node in quad.nodes() {
            assert!(node.point.region_flags().in_i, "{name} at {:?}", node.lambda);
        }
        let grid = Grid::new(spec.d(), 4, 8).unwrap();
        let u = VectorFieldU::constant_indicator(&quad, grid);
        assert!(u.unit_error() <= 1e-12);
    }
}
