//! Grid discretization of L²(ℝᵈ), the irreducible representations π_λ
//! realized on it, the chirp operator, the unit-cube window and Gabor
//! families.

use std::fmt;
use std::io::{self, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{rational_to_f64, GroupElement, LieAlgebraSpec, Rational};
use crate::numeric::cis_turns;
use crate::spectra::{SpectraError, SpectralPoint};

/// Relative mass that may be lost to the grid edge before an action fails.
pub const TRUNCATION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ReprError {
    #[error("invalid grid: {0}")]
    BadGrid(String),
    #[error("grid functions live on different grids ({0} vs {1})")]
    GridMismatch(Grid, Grid),
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("translation {0} is not a multiple of the grid spacing")]
    NotGridAligned(String),
    #[error("translated support leaves the grid: relative mass {fraction:e} truncated")]
    SupportOverflow { fraction: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("malformed grid dump: {0}")]
    Format(String),
}

/// Uniform midpoint grid over `[-T/2, T/2)^d` with `q` points per unit length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Grid {
    d: usize,
    extent: u32,
    q: u32,
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d={} T={} q={}", self.d, self.extent, self.q)
    }
}

impl Grid {
    pub fn new(d: usize, extent: u32, q: u32) -> Result<Self, ReprError> {
        if d == 0 {
            return Err(ReprError::BadGrid("dimension must be positive".into()));
        }
        if q < 2 {
            return Err(ReprError::BadGrid(format!("q = {q} must be at least 2")));
        }
        if extent == 0 {
            return Err(ReprError::BadGrid("extent must be positive".into()));
        }
        if !(extent as u64 * q as u64).is_multiple_of(2) {
            return Err(ReprError::BadGrid(format!(
                "T·q = {} must be even so the unit cube is sampled symmetrically",
                extent as u64 * q as u64
            )));
        }
        Ok(Grid { d, extent, q })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn extent(&self) -> u32 {
        self.extent
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn points_per_axis(&self) -> usize {
        (self.extent * self.q) as usize
    }

    pub fn len(&self) -> usize {
        self.points_per_axis().pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.q as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    /// Coordinate of sample `i` along any axis.
    pub fn coordinate(&self, i: usize) -> f64 {
        -(self.extent as f64) / 2.0 + (i as f64 + 0.5) / self.q as f64
    }

    /// Index of the first sample with coordinate ≥ `x` for `x` on the half-grid.
    pub fn axis_index_at(&self, x: f64) -> i64 {
        ((x + self.extent as f64 / 2.0) * self.q as f64 - 0.5).ceil() as i64
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let n = self.points_per_axis();
        let mut idx = vec![0; self.d];
        for axis in (0..self.d).rev() {
            idx[axis] = flat % n;
            flat /= n;
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let n = self.points_per_axis();
        idx.iter().fold(0, |acc, &i| acc * n + i)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).into_iter().map(|i| self.coordinate(i)).collect()
    }

    /// Index range `[lo, hi)` per axis of the samples inside `k + [-1/2, 1/2)^d`.
    pub fn unit_cube_range(&self, k: i64) -> Option<(usize, usize)> {
        let q = self.q as i64;
        let lo = self.axis_index_at(k as f64 - 0.5);
        let hi = lo + q;
        if lo < 0 || hi > (self.extent as i64 * q) {
            None
        } else {
            Some((lo as usize, hi as usize))
        }
    }
}

/// Axis-aligned index box `[lo, hi)` containing every nonzero sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportBox {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

/// Complex samples on a grid, row-major with axis 0 slowest.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<Complex64>,
    support: Option<SupportBox>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self, ReprError> {
        if values.len() != grid.len() {
            return Err(ReprError::Length {
                expected: grid.len(),
                got: values.len(),
            });
        }
        let support = support_box(&grid, &values);
        Ok(GridFunction {
            grid,
            values,
            support,
        })
    }

    pub fn zeros(grid: Grid) -> Self {
        GridFunction {
            grid,
            values: vec![Complex64::zero(); grid.len()],
            support: None,
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self::new(grid, values).expect("length matches by construction")
    }

    /// Indicator of `[-1/2, 1/2)^d` sampled at midpoints.
    pub fn unit_cube_indicator(grid: Grid) -> Self {
        Self::from_fn(grid, |x| {
            if x.iter().all(|&t| (-0.5..0.5).contains(&t)) {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::zero()
            }
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn support(&self) -> Option<&SupportBox> {
        self.support.as_ref()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    fn check_grid(&self, other: &GridFunction) -> Result<(), ReprError> {
        if self.grid != other.grid {
            return Err(ReprError::GridMismatch(self.grid, other.grid));
        }
        Ok(())
    }

    /// `⟨self, other⟩ = h^d Σ self · conj(other)`.
    pub fn inner(&self, other: &GridFunction) -> Result<Complex64, ReprError> {
        self.check_grid(other)?;
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b.conj())
            .sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> Result<f64, ReprError> {
        self.check_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::new(self.grid, self.values.iter().map(|v| v * c).collect()).expect("same length")
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self, ReprError> {
        self.check_grid(other)?;
        Self::new(
            self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        )
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self, ReprError> {
        self.check_grid(other)?;
        Self::new(
            self.grid,
            self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        )
    }

    /// Pointwise product with a function of the coordinates.
    pub fn multiply_by(&self, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| if v.is_zero() { *v } else { v * f(&self.grid.point(i)) })
            .collect();
        Self::new(self.grid, values).expect("same length")
    }

    /// `x ↦ e^{2πi⟨freq, x⟩} v(x - shift/q)`, failing if more than the
    /// tolerated mass leaves the grid.
    pub fn time_frequency_shift(&self, shift_steps: &[i64], freq: &[f64]) -> Result<Self, ReprError> {
        let g = self.grid;
        if shift_steps.len() != g.d || freq.len() != g.d {
            return Err(ReprError::Dimension("shift/frequency length".into()));
        }
        let mut out = self.translate(shift_steps)?;
        let Some(sb) = out.support.clone() else {
            return Ok(out);
        };
        let axis_phase: Vec<Vec<Complex64>> = freq
            .iter()
            .map(|&f| (0..g.points_per_axis()).map(|i| cis_turns(f * g.coordinate(i))).collect())
            .collect();
        let values = &mut out.values;
        for_each_in_box(&g, &sb.lo, &sb.hi, |flat, idx| {
            let v = values[flat];
            if !v.is_zero() {
                values[flat] = idx
                    .iter()
                    .enumerate()
                    .fold(v, |acc, (axis, &i)| acc * axis_phase[axis][i]);
            }
        });
        Ok(out)
    }

    /// `x ↦ v(x - shift/q)` with loss check.
    pub fn translate(&self, shift_steps: &[i64]) -> Result<Self, ReprError> {
        let g = self.grid;
        let Some(sb) = &self.support else {
            return Ok(Self::zeros(g));
        };
        let n = g.points_per_axis() as i64;
        let mut out = vec![Complex64::zero(); g.len()];
        let mut lost = 0.0;
        let mut total = 0.0;
        let mut target = vec![0usize; g.d];
        for_each_in_box(&g, &sb.lo, &sb.hi, |flat, idx| {
            let v = self.values[flat];
            if v.is_zero() {
                return;
            }
            total += v.norm_sqr();
            let mut inside = true;
            for ((t, &i), &s) in target.iter_mut().zip(idx).zip(shift_steps) {
                let x = i as i64 + s;
                inside &= (0..n).contains(&x);
                *t = x.clamp(0, n - 1) as usize;
            }
            if inside {
                out[g.flat_index(&target)] = v;
            } else {
                lost += v.norm_sqr();
            }
        });
        if total > 0.0 && lost / total > TRUNCATION_TOLERANCE {
            return Err(ReprError::SupportOverflow {
                fraction: lost / total,
            });
        }
        // The shifted box, clipped to the grid, still covers every nonzero.
        let shifted = |b: usize, s: i64| (b as i64 + s).clamp(0, n) as usize;
        let lo: Vec<usize> = sb.lo.iter().zip(shift_steps).map(|(&b, &s)| shifted(b, s)).collect();
        let hi: Vec<usize> = sb.hi.iter().zip(shift_steps).map(|(&b, &s)| shifted(b, s)).collect();
        let support = lo.iter().zip(&hi).all(|(l, h)| l < h).then_some(SupportBox { lo, hi });
        Ok(GridFunction {
            grid: g,
            values: out,
            support,
        })
    }
}

/// Calls `f(flat, idx)` for every multi-index in `[lo, hi)`, axis 0 slowest.
fn for_each_in_box(grid: &Grid, lo: &[usize], hi: &[usize], mut f: impl FnMut(usize, &[usize])) {
    let d = grid.d();
    if lo.iter().zip(hi).any(|(l, h)| l >= h) {
        return;
    }
    let mut idx = lo.to_vec();
    loop {
        f(grid.flat_index(&idx), &idx);
        let mut axis = d;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < hi[axis] {
                break;
            }
            idx[axis] = lo[axis];
        }
    }
}

// The support box is a cache and may be looser than the exact one.
impl PartialEq for GridFunction {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.values == other.values
    }
}

fn support_box(grid: &Grid, values: &[Complex64]) -> Option<SupportBox> {
    let d = grid.d();
    let mut lo = vec![usize::MAX; d];
    let mut hi = vec![0; d];
    let mut any = false;
    for (flat, v) in values.iter().enumerate() {
        if v.is_zero() {
            continue;
        }
        any = true;
        for (axis, i) in grid.multi_index(flat).into_iter().enumerate() {
            lo[axis] = lo[axis].min(i);
            hi[axis] = hi[axis].max(i + 1);
        }
    }
    any.then_some(SupportBox { lo, hi })
}

/// A group element with its translation part expressed in grid steps.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedElement {
    pub z: Vec<f64>,
    pub l: Vec<f64>,
    pub m_steps: Vec<i64>,
}

impl AlignedElement {
    pub fn from_group_element(g: &GroupElement, q: u32) -> Result<Self, ReprError> {
        let q_r = Rational::from_integer((q as i64).into());
        let m_steps = g
            .m
            .iter()
            .map(|m| {
                let s = m * &q_r;
                if s.is_integer() {
                    use num_traits::ToPrimitive;
                    s.to_integer()
                        .to_i64()
                        .ok_or_else(|| ReprError::NotGridAligned(m.to_string()))
                } else {
                    Err(ReprError::NotGridAligned(m.to_string()))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(AlignedElement {
            z: g.z.iter().map(rational_to_f64).collect(),
            l: g.l.iter().map(rational_to_f64).collect(),
            m_steps,
        })
    }
}

/// The representation π_λ acting on grid functions.
///
/// Holds `λ(Z_k)`, `λ[X_k, Y_j]` and `λ[X_r, X_j]` read directly off the
/// bracket table.
#[derive(Debug, Clone)]
pub struct IrreducibleRep {
    lambda: Vec<f64>,
    /// `xy[k][j] = λ[X_{k+1}, Y_{j+1}]`
    xy: Vec<Vec<f64>>,
    /// `xx[r][j] = λ[X_{r+1}, X_{j+1}]`
    xx: Vec<Vec<f64>>,
}

impl IrreducibleRep {
    pub fn new(spec: &LieAlgebraSpec, lambda: &[f64]) -> Result<Self, ReprError> {
        if lambda.len() != spec.central_dim() {
            return Err(SpectraError::Dimension {
                expected: spec.central_dim(),
                got: lambda.len(),
            }
            .into());
        }
        let d = spec.d();
        let pair = |v: Vec<Rational>| -> f64 {
            v.iter().zip(lambda).map(|(c, l)| rational_to_f64(c) * l).sum()
        };
        let xy = (1..=d)
            .map(|k| (1..=d).map(|j| pair(spec.bracket_xy(k, j))).collect())
            .collect();
        let xx = (1..=d)
            .map(|r| (1..=d).map(|j| pair(spec.bracket_xx(r, j))).collect())
            .collect();
        Ok(IrreducibleRep {
            lambda: lambda.to_vec(),
            xy,
            xx,
        })
    }

    pub fn d(&self) -> usize {
        self.xy.len()
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// `Σ_k z_k λ(Z_k)`: the central character exponent in turns.
    pub fn central_turns(&self, z: &[f64]) -> f64 {
        z.iter().zip(&self.lambda).map(|(a, b)| a * b).sum()
    }

    /// Coefficient of `x_k` in the linear phase, in turns:
    /// `Σ_j l_j λ[X_k, Y_j] + Σ_{j>k} m_j λ[X_k, X_j]`.
    pub fn phase_slope(&self, l: &[f64], m: &[f64]) -> Vec<f64> {
        let d = self.d();
        (0..d)
            .map(|k| {
                let from_y: f64 = (0..d).map(|j| l[j] * self.xy[k][j]).sum();
                let from_x: f64 = ((k + 1)..d).map(|j| m[j] * self.xx[k][j]).sum();
                from_y + from_x
            })
            .collect()
    }

    /// `π_λ(γ) v` evaluated pointwise on the grid.
    pub fn act(&self, g: &GroupElement, v: &GridFunction) -> Result<GridFunction, ReprError> {
        let a = AlignedElement::from_group_element(g, v.grid().q())?;
        self.act_aligned(&a, v)
    }

    pub fn act_aligned(&self, g: &AlignedElement, v: &GridFunction) -> Result<GridFunction, ReprError> {
        let grid = *v.grid();
        let q = grid.q() as f64;
        let m: Vec<f64> = g.m_steps.iter().map(|&s| s as f64 / q).collect();
        let slope = self.phase_slope(&g.l, &m);
        let central = self.central_turns(&g.z);
        let mut out = v.translate(&g.m_steps)?;
        let Some(sb) = out.support.clone() else {
            return Ok(out);
        };
        let mut x = vec![0.0; grid.d()];
        let values = &mut out.values;
        for_each_in_box(&grid, &sb.lo, &sb.hi, |flat, idx| {
            let val = values[flat];
            if val.is_zero() {
                return;
            }
            for (t, &i) in x.iter_mut().zip(idx) {
                *t = grid.coordinate(i);
            }
            let turns = central - slope.iter().zip(&x).map(|(s, t)| s * t).sum::<f64>();
            values[flat] = val * cis_turns(turns);
        });
        Ok(out)
    }

    /// `⟨a, π_λ(γ) b⟩`, summing only where both supports overlap.
    pub fn pairing(&self, g: &AlignedElement, a: &GridFunction, b: &GridFunction) -> Result<Complex64, ReprError> {
        a.check_grid(b)?;
        let grid = *a.grid();
        let (Some(sa), Some(sb)) = (a.support(), b.support()) else {
            return Ok(Complex64::zero());
        };
        let d = grid.d();
        let q = grid.q() as f64;
        let m: Vec<f64> = g.m_steps.iter().map(|&s| s as f64 / q).collect();
        let slope = self.phase_slope(&g.l, &m);
        let central = self.central_turns(&g.z);
        // Target indices x with x in supp(a) and x - shift in supp(b).
        let mut lo = vec![0usize; d];
        let mut hi = vec![0usize; d];
        for axis in 0..d {
            let s = g.m_steps[axis];
            let l = (sa.lo[axis] as i64).max(sb.lo[axis] as i64 + s);
            let h = (sa.hi[axis] as i64).min(sb.hi[axis] as i64 + s);
            if l >= h {
                return Ok(Complex64::zero());
            }
            lo[axis] = l as usize;
            hi[axis] = h as usize;
        }
        // conj(e^{-2πi ξ·x}) = e^{+2πi ξ·x}
        let axis_phase: Vec<Vec<Complex64>> = (0..d)
            .map(|axis| (lo[axis]..hi[axis]).map(|i| cis_turns(slope[axis] * grid.coordinate(i))).collect())
            .collect();
        let n = grid.points_per_axis();
        let last = d - 1;
        let mut outer: Vec<usize> = lo[..last].to_vec();
        let av = a.values();
        let bv = b.values();
        let mut acc = Complex64::zero();
        loop {
            let mut weight = Complex64::new(1.0, 0.0);
            let mut base_a = 0usize;
            let mut base_b = 0usize;
            for axis in 0..last {
                weight *= axis_phase[axis][outer[axis] - lo[axis]];
                base_a = base_a * n + outer[axis];
                base_b = base_b * n + (outer[axis] as i64 - g.m_steps[axis]) as usize;
            }
            let shift_last = g.m_steps[last];
            let mut row = Complex64::zero();
            for i in lo[last]..hi[last] {
                let ai = av[base_a * n + i];
                let bi = bv[base_b * n + (i as i64 - shift_last) as usize];
                row += ai * bi.conj() * axis_phase[last][i - lo[last]];
            }
            acc += row * weight;
            // advance the outer odometer
            let mut axis = last;
            loop {
                if axis == 0 {
                    return Ok(acc * grid.cell_volume() * cis_turns(-central));
                }
                axis -= 1;
                outer[axis] += 1;
                if outer[axis] < hi[axis] {
                    break;
                }
                outer[axis] = lo[axis];
            }
        }
    }
}

pub fn pi_action(
    spec: &LieAlgebraSpec,
    lambda: &[f64],
    g: &GroupElement,
    v: &GridFunction,
) -> Result<GridFunction, ReprError> {
    IrreducibleRep::new(spec, lambda)?.act(g, v)
}

/// `⟨t, X t⟩ = Σ_{i<j} X_{ij} t_i t_j`.
fn chirp_turns(point: &SpectralPoint, t: &[f64]) -> f64 {
    let x = point.x();
    let d = point.d();
    let mut s = 0.0;
    for i in 0..d {
        for j in (i + 1)..d {
            s += x[(i, j)] * t[i] * t[j];
        }
    }
    s
}

/// `U f(t) = e^{-2πi⟨t, X(λ)t⟩} f(t)`; with `inverse` the sign flips.
pub fn chirp_u(point: &SpectralPoint, v: &GridFunction, inverse: bool) -> GridFunction {
    let sign = if inverse { 1.0 } else { -1.0 };
    v.multiply_by(|t| cis_turns(sign * chirp_turns(point, t)))
}

/// `|det S(λ)|^{1/2} U χ` with χ the indicator of `[-1/2, 1/2)^d`.
pub fn window_phi(point: &SpectralPoint, grid: Grid) -> Result<GridFunction, ReprError> {
    if grid.d() != point.d() {
        return Err(ReprError::Dimension(format!(
            "grid dimension {} vs d = {}",
            grid.d(),
            point.d()
        )));
    }
    let chi = GridFunction::unit_cube_indicator(grid);
    let amp = point.det_s().abs().sqrt();
    Ok(chirp_u(point, &chi, false).scale(Complex64::new(amp, 0.0)))
}

/// Translation `k` and modulation index `l` of one Gabor family member.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct GaborIndex {
    pub k: Vec<i64>,
    pub l: Vec<i64>,
}

/// `(n, ξ) = B(λ)(k, l)`: translation `n = k` and frequency `-S l - X k`.
pub fn gabor_parameters(point: &SpectralPoint, idx: &GaborIndex) -> (Vec<f64>, Vec<f64>) {
    let d = point.d();
    let b = point.b();
    let input: Vec<f64> = idx.k.iter().chain(&idx.l).map(|&v| v as f64).collect();
    let out: Vec<f64> = (0..2 * d)
        .map(|r| (0..2 * d).map(|c| b[(r, c)] * input[c]).sum())
        .collect();
    (out[..d].to_vec(), out[d..].to_vec())
}

/// All index pairs with `|k|∞ ≤ rk`, `|l|∞ ≤ rl`, lexicographic in `(k, l)`.
pub fn gabor_indices(d: usize, rk: u32, rl: u32) -> Vec<GaborIndex> {
    let ks = crate::algebra::integer_box(d, rk, u128::MAX).expect("uncapped");
    let ls = crate::algebra::integer_box(d, rl, u128::MAX).expect("uncapped");
    ks.iter()
        .flat_map(|k| ls.iter().map(move |l| GaborIndex { k: k.clone(), l: l.clone() }))
        .collect()
}

/// One member `M_{-S l - X k} T_k v`.
pub fn gabor_member(point: &SpectralPoint, v: &GridFunction, idx: &GaborIndex) -> Result<GridFunction, ReprError> {
    let (shift, freq) = gabor_parameters(point, idx);
    let q = v.grid().q() as f64;
    let steps: Vec<i64> = shift.iter().map(|s| (s * q).round() as i64).collect();
    v.time_frequency_shift(&steps, &freq)
}

pub fn gabor_system(
    point: &SpectralPoint,
    v: &GridFunction,
    indices: &[GaborIndex],
) -> Result<Vec<(GaborIndex, GridFunction)>, ReprError> {
    indices
        .par_iter()
        .map(|idx| Ok((idx.clone(), gabor_member(point, v, idx)?)))
        .collect()
}

const DUMP_MAGIC: &[u8; 4] = b"NBGF";
const DUMP_VERSION: u32 = 1;

/// Writes the 32-byte header and little-endian `(re, im)` pairs.
///
/// Header: magic `NBGF`, version (u32), d (u32), q (u32), T (u32),
/// points per axis T·q (u32), total point count (u64).
pub fn write_grid_function(v: &GridFunction, out: &mut impl Write) -> io::Result<()> {
    let g = v.grid();
    out.write_all(DUMP_MAGIC)?;
    out.write_all(&DUMP_VERSION.to_le_bytes())?;
    out.write_all(&(g.d() as u32).to_le_bytes())?;
    out.write_all(&g.q().to_le_bytes())?;
    out.write_all(&g.extent().to_le_bytes())?;
    out.write_all(&(g.points_per_axis() as u32).to_le_bytes())?;
    out.write_all(&(g.len() as u64).to_le_bytes())?;
    for c in v.values() {
        out.write_all(&c.re.to_le_bytes())?;
        out.write_all(&c.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_grid_function(input: &mut impl Read) -> Result<GridFunction, ReprError> {
    let mut header = [0u8; 32];
    input.read_exact(&mut header)?;
    if &header[0..4] != DUMP_MAGIC {
        return Err(ReprError::Format("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().expect("4 bytes"));
    if word(4) != DUMP_VERSION {
        return Err(ReprError::Format(format!("unsupported version {}", word(4))));
    }
    let grid = Grid::new(word(8) as usize, word(16), word(12))?;
    if word(20) as usize != grid.points_per_axis() {
        return Err(ReprError::Format("points per axis disagree with T·q".into()));
    }
    let count = u64::from_le_bytes(header[24..32].try_into().expect("8 bytes"));
    if count as usize != grid.len() {
        return Err(ReprError::Format("point count disagrees with the grid".into()));
    }
    let mut buf = vec![0u8; grid.len() * 16];
    input.read_exact(&mut buf)?;
    let values = buf
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[0..8].try_into().expect("8 bytes")),
                f64::from_le_bytes(c[8..16].try_into().expect("8 bytes")),
            )
        })
        .collect();
    GridFunction::new(grid, values)
}

/// Writes `<stem>.bin` and a JSON manifest `<stem>.json`.
pub fn dump_grid_function(
    v: &GridFunction,
    stem: &Path,
    extra: serde_json::Value,
) -> Result<(), ReprError> {
    let bin = stem.with_extension("bin");
    let mut f = io::BufWriter::new(std::fs::File::create(&bin)?);
    write_grid_function(v, &mut f)?;
    f.flush()?;
    let manifest = serde_json::json!({
        "format": "little-endian complex f64 pairs after a 32-byte header",
        "binary": bin.file_name().map(|s| s.to_string_lossy().into_owned()),
        "grid": {"d": v.grid().d(), "T": v.grid().extent(), "q": v.grid().q(),
                 "points_per_axis": v.grid().points_per_axis()},
        "norm_squared": v.norm_sqr(),
        "meta": extra,
    });
    std::fs::write(
        stem.with_extension("json"),
        serde_json::to_string_pretty(&manifest).expect("json") + "\n",
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::parse_spec;

    const HEISENBERG: &str = r#"{"n":3,"d":1,"brackets":[{"left":"X1","right":"Y1","value":{"Z1":"1"}}]}"#;

    #[test]
    fn grid_validation() {
        assert!(Grid::new(1, 8, 1).is_err());
        assert!(Grid::new(1, 3, 3).is_err());
        assert!(Grid::new(2, 8, 16).is_ok());
        let g = Grid::new(1, 2, 4).unwrap();
        assert_eq!(g.coordinate(0), -0.875);
        assert_eq!(g.unit_cube_range(0), Some((2, 6)));
        assert_eq!(g.unit_cube_range(1), None);
    }

    #[test]
    fn indicator_has_unit_norm() {
        for (d, t, q) in [(1, 8, 16), (2, 4, 8), (1, 3, 4)] {
            let g = Grid::new(d, t, q).unwrap();
            let chi = GridFunction::unit_cube_indicator(g);
            assert!((chi.norm_sqr() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_acts_trivially() {
        let spec = parse_spec(HEISENBERG).unwrap();
        let g = Grid::new(1, 4, 8).unwrap();
        let v = GridFunction::from_fn(g, |x| Complex64::new(x[0], 1.0));
        let out = pi_action(&spec, &[0.3], &spec.identity(), &v).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn misaligned_translation_rejected() {
        let spec = parse_spec(HEISENBERG).unwrap();
        let g = Grid::new(1, 4, 8).unwrap();
        let v = GridFunction::unit_cube_indicator(g);
        let mut e = spec.identity();
        e.m[0] = crate::algebra::rational(1, 3);
        assert!(matches!(
            pi_action(&spec, &[0.3], &e, &v),
            Err(ReprError::NotGridAligned(_))
        ));
    }

    #[test]
    fn overflow_is_reported() {
        let g = Grid::new(1, 2, 4).unwrap();
        let v = GridFunction::unit_cube_indicator(g);
        assert!(matches!(v.translate(&[4]), Err(ReprError::SupportOverflow { .. })));
        assert!(v.translate(&[2]).is_ok());
    }

    #[test]
    fn heisenberg_window_modulus() {
        let spec = parse_spec(HEISENBERG).unwrap();
        let p = SpectralPoint::new(&spec, &[0.25]).unwrap();
        let g = Grid::new(1, 8, 16).unwrap();
        let phi = window_phi(&p, g).unwrap();
        for (i, v) in phi.values().iter().enumerate() {
            let x = g.coordinate(i);
            let expect = if (-0.5..0.5).contains(&x) { 0.5 } else { 0.0 };
            assert!((v.norm() - expect).abs() < 1e-15);
        }
        assert!((phi.norm_sqr() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn pairing_matches_materialized_inner_product() {
        let spec = parse_spec(HEISENBERG).unwrap();
        let rep = IrreducibleRep::new(&spec, &[0.37]).unwrap();
        let g = Grid::new(1, 6, 8).unwrap();
        let a = GridFunction::from_fn(g, |x| {
            if x[0].abs() < 1.7 {
                Complex64::new(x[0].cos(), x[0] * 0.3)
            } else {
                Complex64::zero()
            }
        });
        let b = GridFunction::unit_cube_indicator(g);
        let e = AlignedElement {
            z: vec![0.7],
            l: vec![1.5],
            m_steps: vec![-9],
        };
        let direct = a.inner(&rep.act_aligned(&e, &b).unwrap()).unwrap();
        let fast = rep.pairing(&e, &a, &b).unwrap();
        assert!((direct - fast).norm() < 1e-14);
    }

    #[test]
    fn dump_round_trip() {
        let g = Grid::new(2, 2, 4).unwrap();
        let v = GridFunction::from_fn(g, |x| Complex64::new(x[0], -x[1]));
        let mut buf = Vec::new();
        write_grid_function(&v, &mut buf).unwrap();
        assert_eq!(buf.len(), 32 + 16 * g.len());
        let back = read_grid_function(&mut buf.as_slice()).unwrap();
        assert_eq!(back, v);
    }
}
