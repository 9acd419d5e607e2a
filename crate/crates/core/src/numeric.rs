//! Small numeric helpers shared by the floating-point modules.

use num_complex::Complex64;

/// Pairwise (tree) summation; the order of additions depends only on the
/// length of the input.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

pub fn pairwise_sum_complex(xs: &[Complex64]) -> Complex64 {
    match xs.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum_complex(a) + pairwise_sum_complex(b)
        }
    }
}

/// `e^{2πi t}`.
pub fn cis_turns(t: f64) -> Complex64 {
    let (s, c) = (std::f64::consts::TAU * t).sin_cos();
    Complex64::new(c, s)
}

/// In-place forward DFT over a `d`-dimensional cube of side `n`, row-major.
///
/// Convention: `X(ω) = Σ_b x(b) e^{-2πi⟨ω, b⟩/n}`.
pub fn fft_nd(data: &mut [Complex64], n: usize, d: usize) {
    assert_eq!(data.len(), n.pow(d as u32), "buffer does not match n^d");
    let mut planner = rustfft::FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let total = data.len();
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        for start in 0..total {
            // visit each line once: starting points have coordinate 0 on `axis`
            if !(start / stride).is_multiple_of(n) {
                continue;
            }
            for (i, slot) in line.iter_mut().enumerate() {
                *slot = data[start + i * stride];
            }
            fft.process(&mut line);
            for (i, v) in line.iter().enumerate() {
                data[start + i * stride] = *v;
            }
        }
    }
}
