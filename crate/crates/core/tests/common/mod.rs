#![allow(dead_code)]

use nilband::algebra::{parse_spec, rational, GroupElement, LieAlgebraSpec, Rational};
use num_complex::Complex64;
use rand::Rng;

pub const ALL_FIXTURES: [&str; 7] = [
    "heisenberg",
    "five_dim",
    "example1",
    "seven_dim_b",
    "seven_dim_sinc",
    "example2",
    "region_d3",
];

pub fn fixture_path(name: &str) -> String {
    format!("{}/fixtures/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

pub fn load(name: &str) -> LieAlgebraSpec {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture readable");
    parse_spec(&text).expect("fixture parses")
}

/// `p/q` with `|p| ≤ 3q` and `q ∈ 1..=max_den`.
pub fn random_rational(rng: &mut impl Rng, max_den: i64) -> Rational {
    let q = rng.gen_range(1..=max_den);
    let p = rng.gen_range(-3 * q..=3 * q);
    rational(p, q)
}

pub fn random_element(spec: &LieAlgebraSpec, rng: &mut impl Rng, max_den: i64) -> GroupElement {
    let mut draw = |k: usize| (0..k).map(|_| random_rational(rng, max_den)).collect::<Vec<_>>();
    GroupElement {
        z: draw(spec.central_dim()),
        l: draw(spec.d()),
        m: draw(spec.d()),
    }
}

pub fn random_complex(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}
