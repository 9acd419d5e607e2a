//! Frame operators, frame-bound estimation and the checks built on them:
//! Parseval certification of the chirped unit-cube window, the
//! representation/Gabor intertwining regression, and span residuals for
//! families that are too sparse to be total.

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{integer_box, GroupElement, LieAlgebraSpec};
use crate::numeric::{cis_turns, fft_nd};
use crate::repr::{
    gabor_indices, gabor_member, window_phi, GaborIndex, Grid, GridFunction, IrreducibleRep, ReprError,
};
use crate::spectra::{RegionFlags, SpectraError, SpectralPoint};

pub const PARSEVAL_TOLERANCE: f64 = 2e-2;
pub const PARSEVAL_TOLERANCE_REFINED: f64 = 5e-3;

/// Test modes per unit cube are `e^{2πi⟨j, s⟩}` with `|j|∞ ≤ MODE_RADIUS`.
pub const MODE_RADIUS: i64 = 3;

/// Below this fraction of the upper bound the lower bound counts as zero.
pub const FRAME_FLOOR: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("the family is empty")]
    EmptyFamily,
    #[error("λ = {lambda:?} is not in I (flags {flags:?})")]
    NotInI { lambda: Vec<f64>, flags: RegionFlags },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Repr(#[from] ReprError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

/// A self-adjoint positive semidefinite operator on `ℂ^dim`.
pub trait FrameOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64>;
}

#[derive(Debug, Clone, Copy)]
pub struct PowerOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            max_iterations: 2000,
            tolerance: 1e-13,
            seed: 0x6e69_6c62,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundEstimate {
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn vec_norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let mut x: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let n = vec_norm(&x);
    x.iter_mut().for_each(|v| *v /= n);
    x
}

/// Largest eigenvalue of a PSD map by power iteration with Rayleigh quotients.
fn power_largest(
    dim: usize,
    apply: impl Fn(&[Complex64]) -> Vec<Complex64>,
    opts: PowerOptions,
    rng: &mut ChaCha8Rng,
) -> (f64, usize, bool) {
    let mut x = random_unit(dim, rng);
    let mut prev = f64::NAN;
    for it in 1..=opts.max_iterations {
        let y = apply(&x);
        let rq = dot(&x, &y).re;
        let ny = vec_norm(&y);
        if ny == 0.0 {
            return (0.0, it, true);
        }
        if (rq - prev).abs() <= opts.tolerance * rq.abs().max(1e-300) {
            return (rq, it, true);
        }
        prev = rq;
        x = y.into_iter().map(|v| v / ny).collect();
    }
    (prev, opts.max_iterations, false)
}

/// Extremal eigenvalue estimates: power iteration for the upper bound, power
/// iteration on `(B + δ)I - S` for the lower bound.
pub fn frame_bounds<O: FrameOperator + ?Sized>(op: &O, opts: PowerOptions) -> BoundEstimate {
    let dim = op.dim();
    if dim == 0 {
        return BoundEstimate {
            lower: 0.0,
            upper: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (upper, it1, c1) = power_largest(dim, |x| op.apply(x), opts, &mut rng);
    let shift = upper * 1.01 + 1e-12;
    let (top, it2, c2) = power_largest(
        dim,
        |x| {
            let sx = op.apply(x);
            x.iter().zip(sx).map(|(a, b)| a * shift - b).collect()
        },
        opts,
        &mut rng,
    );
    BoundEstimate {
        lower: (shift - top).max(0.0),
        upper,
        iterations: it1 + it2,
        converged: c1 && c2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Parseval,
    Frame,
    NotFrameEvidence,
}

pub fn verdict_for(lower: f64, upper: f64, tolerance: f64) -> Verdict {
    if (lower - 1.0).abs().max((upper - 1.0).abs()) <= tolerance {
        Verdict::Parseval
    } else if lower > FRAME_FLOOR * upper.max(1e-300) {
        Verdict::Frame
    } else {
        Verdict::NotFrameEvidence
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameReport {
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub family_size: usize,
    pub grid: String,
    pub verdict: Verdict,
    pub converged: bool,
    pub iterations: usize,
}

/// An explicit family restricted to grid points inside the core box
/// `[-T/4, T/4)^d`.
pub struct CoreRestrictedFamily {
    members: Vec<Vec<Complex64>>,
    cell_volume: f64,
    core: Vec<usize>,
    grid: Grid,
}

/// Flat indices of grid points with every coordinate in `[-T/4, T/4)`.
pub fn core_indices(grid: &Grid) -> Vec<usize> {
    let quarter = grid.extent() as f64 / 4.0;
    (0..grid.len())
        .filter(|&i| grid.point(i).iter().all(|&x| (-quarter..quarter).contains(&x)))
        .collect()
}

impl CoreRestrictedFamily {
    pub fn new(family: &[GridFunction]) -> Result<Self, FrameError> {
        let first = family.first().ok_or(FrameError::EmptyFamily)?;
        let grid = *first.grid();
        if let Some(bad) = family.iter().find(|f| *f.grid() != grid) {
            return Err(ReprError::GridMismatch(grid, *bad.grid()).into());
        }
        let core = core_indices(&grid);
        let members = family
            .iter()
            .map(|f| core.iter().map(|&i| f.values()[i]).collect())
            .collect();
        Ok(CoreRestrictedFamily {
            members,
            cell_volume: grid.cell_volume(),
            core,
            grid,
        })
    }

    pub fn core(&self) -> &[usize] {
        &self.core
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

impl FrameOperator for CoreRestrictedFamily {
    fn dim(&self) -> usize {
        self.core.len()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::zero(); x.len()];
        for f in &self.members {
            let c: Complex64 = x.iter().zip(f).map(|(a, b)| a * b.conj()).sum::<Complex64>() * self.cell_volume;
            if c.is_zero() {
                continue;
            }
            for (o, v) in out.iter_mut().zip(f) {
                *o += c * v;
            }
        }
        out
    }
}

/// `S v = Σ_n ⟨v, f_n⟩ f_n`.
pub fn frame_operator_apply(family: &[GridFunction], v: &GridFunction) -> Result<GridFunction, FrameError> {
    if family.is_empty() {
        return Err(FrameError::EmptyFamily);
    }
    let grid = *v.grid();
    let coeffs: Vec<Complex64> = family
        .par_iter()
        .map(|f| v.inner(f))
        .collect::<Result<_, _>>()?;
    let mut out = vec![Complex64::zero(); grid.len()];
    for (c, f) in coeffs.iter().zip(family) {
        if c.is_zero() {
            continue;
        }
        for (o, x) in out.iter_mut().zip(f.values()) {
            *o += c * x;
        }
    }
    Ok(GridFunction::new(grid, out)?)
}

/// `Σ_n |⟨v, f_n⟩|²`.
pub fn frame_sum(family: &[GridFunction], v: &GridFunction) -> Result<f64, FrameError> {
    let terms: Vec<f64> = family
        .par_iter()
        .map(|f| v.inner(f).map(|c| c.norm_sqr()))
        .collect::<Result<_, _>>()?;
    Ok(crate::numeric::pairwise_sum(&terms))
}

/// Frame bounds of an explicit family on the core-box subspace.
pub fn frame_bounds_family(
    family: &[GridFunction],
    tolerance: f64,
    opts: PowerOptions,
) -> Result<FrameReport, FrameError> {
    let op = CoreRestrictedFamily::new(family)?;
    let est = frame_bounds(&op, opts);
    Ok(FrameReport {
        lower_bound: est.lower,
        upper_bound: est.upper,
        family_size: op.len(),
        grid: op.grid.to_string(),
        verdict: verdict_for(est.lower, est.upper, tolerance),
        converged: est.converged,
        iterations: est.iterations,
    })
}

/// `Σ_{l=lo}^{hi} e^{2πi t l}`.
fn geometric_turns(t: f64, lo: i64, hi: i64) -> Complex64 {
    if hi < lo {
        return Complex64::zero();
    }
    let count = (hi - lo + 1) as f64;
    let half = std::f64::consts::PI * t;
    let s = half.sin();
    if s.abs() < 1e-9 {
        return (lo..=hi).map(|l| cis_turns(t * l as f64)).sum();
    }
    cis_turns(t * (lo + hi) as f64 / 2.0) * ((count * half).sin() / s)
}

/// Frequencies of the modulation window: `l ∈ ℤ^d` with `S l ∈ (-q/2, q/2]^d`.
///
/// Calls `row(outer, lo, hi)` for every nonempty run `l = (outer, lo..=hi)`.
fn for_each_window_row(s: &DMatrix<f64>, q: u32, mut row: impl FnMut(&[i64], i64, i64)) {
    let d = s.nrows();
    let half = q as f64 / 2.0;
    let inv = s.clone().try_inverse().expect("S is invertible on I");
    let bounds: Vec<i64> = (0..d)
        .map(|j| ((0..d).map(|i| inv[(j, i)].abs()).sum::<f64>() * half).ceil() as i64 + 1)
        .collect();
    let outer_dim = d - 1;
    let outer_points: Vec<Vec<i64>> = if outer_dim == 0 {
        vec![vec![]]
    } else {
        let mut pts = vec![vec![]];
        for &b in &bounds[..outer_dim] {
            pts = pts
                .into_iter()
                .flat_map(|p: Vec<i64>| {
                    (-b..=b).map(move |v| {
                        let mut p = p.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        pts
    };
    let last = d - 1;
    for outer in outer_points {
        let mut lo = -bounds[last] - 1;
        let mut hi = bounds[last] + 1;
        let mut empty = false;
        for i in 0..d {
            let a: f64 = (0..outer_dim).map(|j| s[(i, j)] * outer[j] as f64).sum();
            let c = s[(i, last)];
            if c > 0.0 {
                lo = lo.max(((-half - a) / c).floor() as i64 + 1);
                hi = hi.min(((half - a) / c).floor() as i64);
            } else if c < 0.0 {
                lo = lo.max(((half - a) / c).ceil() as i64);
                hi = hi.min(((-half - a) / c).ceil() as i64 - 1);
            } else if !(a > -half && a <= half) {
                empty = true;
            }
        }
        if empty {
            continue;
        }
        // Snap the ends with one predicate so boundary ties are decided consistently.
        let member = |l: i64| {
            (0..d).all(|i| {
                let x: f64 = (0..outer_dim).map(|j| s[(i, j)] * outer[j] as f64).sum::<f64>()
                    + s[(i, last)] * l as f64;
                x > -half && x <= half
            })
        };
        while lo <= hi && !member(lo) {
            lo += 1;
        }
        while member(lo - 1) {
            lo -= 1;
        }
        while hi >= lo && !member(hi) {
            hi -= 1;
        }
        while member(hi + 1) {
            hi += 1;
        }
        if lo <= hi {
            row(&outer, lo, hi);
        }
    }
}

/// Enumerates the modulation window explicitly (small cases and tests).
pub fn modulation_window(s: &DMatrix<f64>, q: u32) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for_each_window_row(s, q, |outer, lo, hi| {
        for l in lo..=hi {
            let mut v = outer.to_vec();
            v.push(l);
            out.push(v);
        }
    });
    out
}

/// DFT (side `2q`) of `D(n) = Σ_{l in window} e^{-2πi⟨S l, n⟩/q}` for
/// `n ∈ [-(q-1), q-1]^d`, placed circularly.
fn modulation_kernel_spectrum(s: &DMatrix<f64>, q: u32) -> Vec<f64> {
    let d = s.nrows();
    let qi = q as i64;
    let side = 2 * q as usize;
    let offsets: Vec<Vec<i64>> = integer_box(d, q - 1, u128::MAX).expect("uncapped");
    // v_n = S^T n / q
    let v: Vec<Vec<f64>> = offsets
        .iter()
        .map(|n| {
            (0..d)
                .map(|j| (0..d).map(|i| s[(i, j)] * n[i] as f64).sum::<f64>() / q as f64)
                .collect()
        })
        .collect();
    let mut dvals = vec![Complex64::zero(); offsets.len()];
    for_each_window_row(s, q, |outer, lo, hi| {
        for (acc, vn) in dvals.iter_mut().zip(&v) {
            let outer_turns: f64 = outer.iter().zip(vn).map(|(l, x)| *l as f64 * x).sum();
            *acc += cis_turns(-outer_turns) * geometric_turns(-vn[d - 1], lo, hi);
        }
    });
    let mut buf = vec![Complex64::zero(); side.pow(d as u32)];
    for (n, val) in offsets.iter().zip(dvals) {
        let flat = n
            .iter()
            .fold(0usize, |acc, &x| acc * side + x.rem_euclid(side as i64) as usize);
        buf[flat] = val;
    }
    debug_assert!(qi > 0);
    fft_nd(&mut buf, side, d);
    buf.into_iter().map(|c| c.re).collect()
}

/// The frame operator of `G(φ(λ), B(λ)ℤ^{2d})` compressed to the span of the
/// modes `e^{2πi⟨j, t-k⟩}` on each unit cube `k + [-1/2, 1/2)^d`.
///
/// Window members are supported on single cubes, so the compressed operator
/// is block diagonal with one block per cube.
pub struct CubeBlocks {
    pub cubes: Vec<Vec<i64>>,
    pub modes: Vec<Vec<i64>>,
    pub blocks: Vec<DMatrix<Complex64>>,
}

impl FrameOperator for CubeBlocks {
    fn dim(&self) -> usize {
        self.cubes.len() * self.modes.len()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let m = self.modes.len();
        let mut out = Vec::with_capacity(x.len());
        for (b, block) in self.blocks.iter().enumerate() {
            let seg = &x[b * m..(b + 1) * m];
            for r in 0..m {
                out.push((0..m).map(|c| block[(r, c)] * seg[c]).sum());
            }
        }
        out
    }
}

impl CubeBlocks {
    /// Extreme eigenvalues from a dense Hermitian eigendecomposition per block.
    pub fn dense_extremes(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for block in &self.blocks {
            let eig = nalgebra::SymmetricEigen::new(block.clone());
            for &e in eig.eigenvalues.iter() {
                lo = lo.min(e);
                hi = hi.max(e);
            }
        }
        (lo, hi)
    }

    pub fn compress(&self, cube_filter: impl Fn(&[i64]) -> bool) -> CubeBlocks {
        let keep: Vec<usize> = (0..self.cubes.len()).filter(|&i| cube_filter(&self.cubes[i])).collect();
        CubeBlocks {
            cubes: keep.iter().map(|&i| self.cubes[i].clone()).collect(),
            modes: self.modes.clone(),
            blocks: keep.iter().map(|&i| self.blocks[i].clone()).collect(),
        }
    }
}

/// Builds the compressed blocks for the given cubes at resolution `q`.
pub fn cube_blocks(
    point: &SpectralPoint,
    q: u32,
    cubes: &[Vec<i64>],
    mode_radius: i64,
) -> Result<CubeBlocks, FrameError> {
    let d = point.d();
    if point.det_s() == 0.0 {
        return Err(FrameError::Config("det S(λ) = 0".into()));
    }
    if 2 * mode_radius as u32 >= q {
        return Err(FrameError::Config(format!(
            "mode radius {mode_radius} is not resolved at q = {q}"
        )));
    }
    let side = 2 * q as usize;
    let dhat = modulation_kernel_spectrum(point.s(), q);

    // Window samples on the unit cube at local coordinates.
    let local = Grid::new(d, 2, q)?;
    let phi = window_phi(point, local)?;
    let (lo, _) = local.unit_cube_range(0).expect("unit cube fits in a side-2 grid");
    let qs = q as usize;
    let cube_points = qs.pow(d as u32);
    let local_index = |mut b: usize| -> (Vec<usize>, Vec<f64>) {
        let mut idx = vec![0; d];
        for axis in (0..d).rev() {
            idx[axis] = b % qs;
            b /= qs;
        }
        let s = idx.iter().map(|&i| -0.5 + (i as f64 + 0.5) / q as f64).collect();
        (idx, s)
    };
    let phi_local: Vec<Complex64> = (0..cube_points)
        .map(|b| {
            let (idx, _) = local_index(b);
            let g: Vec<usize> = idx.iter().map(|&i| i + lo).collect();
            phi.values()[local.flat_index(&g)]
        })
        .collect();

    let modes = integer_box(d, mode_radius as u32, u128::MAX).expect("uncapped");
    let h2d = (1.0 / q as f64).powi(2 * d as i32);
    let norm = h2d / (side.pow(d as u32) as f64);
    let offset = -0.5 + 0.5 / q as f64;
    let mode_phase: Vec<Complex64> = modes
        .iter()
        .map(|j| cis_turns(j.iter().map(|&x| x as f64 * offset).sum()))
        .collect();

    let blocks: Vec<DMatrix<Complex64>> = cubes
        .par_iter()
        .map(|k| {
            // W_k(b) = conj(φ_b) e^{2πi⟨X k, s_b⟩}
            let xk: Vec<f64> = (0..d)
                .map(|i| (0..d).map(|j| point.x()[(i, j)] * k[j] as f64).sum())
                .collect();
            let mut buf = vec![Complex64::zero(); side.pow(d as u32)];
            for b in 0..cube_points {
                let (idx, s) = local_index(b);
                let turns: f64 = xk.iter().zip(&s).map(|(a, b)| a * b).sum();
                let flat = idx.iter().fold(0usize, |acc, &i| acc * side + i);
                buf[flat] = phi_local[b].conj() * cis_turns(turns);
            }
            fft_nd(&mut buf, side, d);
            let total = buf.len();
            let shifted = DMatrix::from_fn(total, modes.len(), |w, c| {
                // Ŵ(ω - 2j)
                let mut rem = w;
                let mut src = 0usize;
                let mut stride = 1usize;
                for axis in (0..d).rev() {
                    let wi = rem % side;
                    rem /= side;
                    let si = (wi as i64 - 2 * modes[c][axis]).rem_euclid(side as i64) as usize;
                    src += si * stride;
                    stride *= side;
                }
                buf[src]
            });
            let weighted = DMatrix::from_fn(total, modes.len(), |w, c| shifted[(w, c)] * dhat[w]);
            let mut g = shifted.adjoint() * weighted;
            for r in 0..modes.len() {
                for c in 0..modes.len() {
                    g[(r, c)] *= mode_phase[r].conj() * mode_phase[c] * norm;
                }
            }
            // symmetrize away rounding
            let gh = g.adjoint();
            (g + gh) * Complex64::new(0.5, 0.0)
        })
        .collect();

    Ok(CubeBlocks {
        cubes: cubes.to_vec(),
        modes,
        blocks,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ParsevalCertificate {
    pub lambda: Vec<f64>,
    pub det_s: f64,
    pub q: u32,
    pub mode_radius: i64,
    pub cube_radius: u32,
    /// Power-iteration bounds with cubes `|k|∞ ≤ R`.
    pub report: FrameReport,
    /// Same with `|k|∞ ≤ 2R`.
    pub report_doubled: FrameReport,
    /// Dense eigenvalue extremes of the same blocks, `|k|∞ ≤ R`.
    pub dense_lower: f64,
    pub dense_upper: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl ParsevalCertificate {
    /// `max(|A - 1|, |B - 1|)` over both estimation routes.
    pub fn deviation(&self) -> f64 {
        [
            self.report.lower_bound,
            self.report.upper_bound,
            self.dense_lower,
            self.dense_upper,
        ]
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CertifyOptions {
    pub tolerance: f64,
    pub mode_radius: i64,
    pub power: PowerOptions,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            tolerance: PARSEVAL_TOLERANCE,
            mode_radius: MODE_RADIUS,
            power: PowerOptions::default(),
        }
    }
}

/// Frame bounds of `G(|det S|^{1/2} U χ, B(λ)ℤ^{2d})` on the resolved
/// subspace of cubes inside the core box `[-T/4, T/4)^d`.
pub fn parseval_certify(
    spec: &LieAlgebraSpec,
    lambda: &[f64],
    grid: Grid,
    opts: CertifyOptions,
) -> Result<ParsevalCertificate, FrameError> {
    let point = SpectralPoint::new(spec, lambda)?;
    let flags = point.region_flags();
    if !flags.in_i {
        return Err(FrameError::NotInI {
            lambda: lambda.to_vec(),
            flags,
        });
    }
    if grid.d() != spec.d() {
        return Err(FrameError::Config(format!(
            "grid dimension {} does not match d = {}",
            grid.d(),
            spec.d()
        )));
    }
    let core_half = grid.extent() as f64 / 4.0;
    let radius = (core_half - 0.5).floor().max(0.0) as u32;
    let doubled = (2 * radius).max(1);
    let cubes = integer_box(spec.d(), doubled, u128::MAX).expect("uncapped");
    let all = cube_blocks(&point, grid.q(), &cubes, opts.mode_radius)?;
    let inner = all.compress(|k| k.iter().all(|&x| x.unsigned_abs() <= radius as u64));

    let describe = |blocks: &CubeBlocks| -> FrameReport {
        let est = frame_bounds(blocks, opts.power);
        FrameReport {
            lower_bound: est.lower,
            upper_bound: est.upper,
            family_size: blocks.cubes.len() * window_size(&point, grid.q()),
            grid: format!("{grid} cubes={} modes={}", blocks.cubes.len(), blocks.modes.len()),
            verdict: verdict_for(est.lower, est.upper, opts.tolerance),
            converged: est.converged,
            iterations: est.iterations,
        }
    };
    let report = describe(&inner);
    let report_doubled = describe(&all);
    let (dense_lower, dense_upper) = inner.dense_extremes();
    let lo = report.lower_bound.min(dense_lower);
    let hi = report.upper_bound.max(dense_upper);
    Ok(ParsevalCertificate {
        lambda: lambda.to_vec(),
        det_s: point.det_s(),
        q: grid.q(),
        mode_radius: opts.mode_radius,
        cube_radius: radius,
        verdict: verdict_for(lo, hi, opts.tolerance),
        report,
        report_doubled,
        dense_lower,
        dense_upper,
        tolerance: opts.tolerance,
    })
}

fn window_size(point: &SpectralPoint, q: u32) -> usize {
    let mut n = 0;
    for_each_window_row(point.s(), q, |_, lo, hi| n += (hi - lo + 1) as usize);
    n
}

/// Maximum pointwise gap between `π_λ(η) v` for `η = exp(lY) exp(mX)` and the
/// Gabor member with index `(k, l) = (m, l)`, over `|l|∞, |m|∞ ≤ radius`.
pub fn intertwining_regression(
    spec: &LieAlgebraSpec,
    lambda: &[f64],
    v: &GridFunction,
    radius: u32,
) -> Result<f64, FrameError> {
    let point = SpectralPoint::new(spec, lambda)?;
    let rep = IrreducibleRep::new(spec, lambda)?;
    let c = spec.central_dim();
    let indices = gabor_indices(spec.d(), radius, radius);
    let gaps: Vec<f64> = indices
        .par_iter()
        .map(|idx: &GaborIndex| -> Result<f64, FrameError> {
            let eta = GroupElement::from_integers(&vec![0; c], &idx.l, &idx.k);
            let lhs = rep.act(&eta, v)?;
            let rhs = gabor_member(&point, v, idx)?;
            Ok(lhs.max_abs_diff(&rhs)?)
        })
        .collect::<Result<_, _>>()?;
    Ok(gaps.into_iter().fold(0.0, f64::max))
}

/// `‖v - P v‖ / ‖v‖` with `P` the orthogonal projection onto the span of the
/// family (modified Gram–Schmidt with one reorthogonalization pass).
pub fn span_residual(family: &[GridFunction], probe: &GridFunction) -> Result<f64, FrameError> {
    if family.is_empty() {
        return Err(FrameError::EmptyFamily);
    }
    let h = probe.grid().cell_volume();
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    for f in family {
        if f.grid() != probe.grid() {
            return Err(ReprError::GridMismatch(*probe.grid(), *f.grid()).into());
        }
        let mut w: Vec<Complex64> = f.values().to_vec();
        let start = vec_norm(&w);
        if start == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = vec_norm(&w);
        if n > 1e-10 * start {
            basis.push(w.into_iter().map(|x| x / n).collect());
        }
    }
    let mut r: Vec<Complex64> = probe.values().to_vec();
    for _ in 0..2 {
        for b in &basis {
            let c = dot(b, &r);
            r.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
    let pn = probe.norm();
    if pn == 0.0 {
        return Err(FrameError::Config("probe vector is zero".into()));
    }
    Ok((vec_norm(&r) * h.sqrt()) / pn)
}
