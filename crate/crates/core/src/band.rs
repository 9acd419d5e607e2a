//! Band-limited vectors on the group, held in the Plancherel domain as fields
//! of rank-one operators `v_λ ⊗ u_λ` over a quadrature of `I`.
//!
//! Nothing here materializes a function on the group: coefficients
//! `⟨h, L(x) f⟩` come from `Σ_λ w |det S(λ)| ⟨v^h_λ, π_λ(x) v^f_λ⟩`.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{integer_box, rational, GroupElement, LieAlgebraSpec, Rational};
use crate::numeric::{cis_turns, pairwise_sum};
use crate::repr::{window_phi, AlignedElement, Grid, GridFunction, IrreducibleRep, ReprError};
use crate::spectra::{cube_midpoints, SpectraError, SpectralPoint};

pub const DEFAULT_Q_LAMBDA: usize = 64;
pub const DEFAULT_RADII: [u32; 4] = [2, 4, 6, 8];

#[derive(Debug, Error)]
pub enum BandError {
    #[error("no quadrature cell of I at q_λ = {0}")]
    EmptyQuadrature(usize),
    #[error("vectors are built on different quadratures or unit fields")]
    QuadratureMismatch,
    #[error("expected {expected} field entries, got {got}")]
    FieldLength { expected: usize, got: usize },
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Repr(#[from] ReprError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

/// One quadrature cell of I.
#[derive(Debug, Clone)]
pub struct SpectralNode {
    pub lambda: Vec<f64>,
    pub det_s: f64,
    pub point: SpectralPoint,
    pub rep: IrreducibleRep,
}

/// Midpoints of the `q_λ^c` cells of `K` that lie in `I`, each of weight `q_λ^{-c}`.
#[derive(Debug, Clone)]
pub struct SpectralQuadrature {
    spec: LieAlgebraSpec,
    q_lambda: usize,
    cell_weight: f64,
    nodes: Vec<SpectralNode>,
    weights: Vec<f64>,
}

impl SpectralQuadrature {
    pub fn new(spec: &LieAlgebraSpec, q_lambda: usize) -> Result<Self, BandError> {
        if q_lambda < 2 {
            return Err(BandError::Config(format!("q_λ must be at least 2, got {q_lambda}")));
        }
        let c = spec.central_dim();
        let nodes = cube_midpoints(c, q_lambda)
            .into_iter()
            .map(|lambda| -> Result<Option<SpectralNode>, BandError> {
                let point = SpectralPoint::new(spec, &lambda)?;
                if !point.region_flags().in_i {
                    return Ok(None);
                }
                Ok(Some(SpectralNode {
                    det_s: point.det_s(),
                    rep: IrreducibleRep::new(spec, &lambda)?,
                    point,
                    lambda,
                }))
            })
            .filter_map(Result::transpose)
            .collect::<Result<Vec<_>, _>>()?;
        if nodes.is_empty() {
            return Err(BandError::EmptyQuadrature(q_lambda));
        }
        let cell_weight = (q_lambda as f64).powi(-(c as i32));
        let weights = nodes.iter().map(|n| cell_weight * n.det_s.abs()).collect();
        Ok(SpectralQuadrature {
            spec: spec.clone(),
            q_lambda,
            cell_weight,
            nodes,
            weights,
        })
    }

    pub fn spec(&self) -> &LieAlgebraSpec {
        &self.spec
    }

    pub fn q_lambda(&self) -> usize {
        self.q_lambda
    }

    pub fn cell_weight(&self) -> f64 {
        self.cell_weight
    }

    pub fn nodes(&self) -> &[SpectralNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `w |det S(λ)|` per node.
    pub fn plancherel_weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ w |det S(λ)|`, the quadrature value of `μ(I)`.
    pub fn plancherel_mass(&self) -> f64 {
        pairwise_sum(self.plancherel_weights())
    }

    /// `e^{-2πi⟨z, λ⟩}` for every node.
    fn central_phases(&self, z: &[f64]) -> Vec<Complex64> {
        self.nodes
            .iter()
            .map(|n| cis_turns(-z.iter().zip(&n.lambda).map(|(a, b)| a * b).sum::<f64>()))
            .collect()
    }
}

/// A unit vector `u_λ` per quadrature node.
#[derive(Debug, Clone)]
pub struct VectorFieldU {
    vectors: Vec<GridFunction>,
    norms_sqr: Vec<f64>,
}

impl VectorFieldU {
    /// The indicator of `[-1/2, 1/2)^d` at every node.
    pub fn constant_indicator(quad: &SpectralQuadrature, grid: Grid) -> Self {
        let chi = GridFunction::unit_cube_indicator(grid);
        Self::from_vectors(vec![chi; quad.len()])
    }

    fn from_vectors(vectors: Vec<GridFunction>) -> Self {
        let norms_sqr = vectors.iter().map(GridFunction::norm_sqr).collect();
        VectorFieldU { vectors, norms_sqr }
    }

    /// Normalizes `x ↦ u(λ, x)` at every node.
    pub fn from_fn(
        quad: &SpectralQuadrature,
        grid: Grid,
        u: impl Fn(&[f64], &[f64]) -> Complex64 + Sync,
    ) -> Result<Self, BandError> {
        let vectors = quad
            .nodes()
            .iter()
            .map(|n| {
                let v = GridFunction::from_fn(grid, |x| u(&n.lambda, x));
                let norm = v.norm();
                if norm == 0.0 {
                    return Err(BandError::Config(format!("u vanishes at λ = {:?}", n.lambda)));
                }
                Ok(v.scale(Complex64::new(1.0 / norm, 0.0)))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self::from_vectors(vectors))
    }

    pub fn vectors(&self) -> &[GridFunction] {
        &self.vectors
    }

    /// `⟨u_λ, u_λ⟩` per node.
    pub fn norms_sqr(&self) -> &[f64] {
        &self.norms_sqr
    }

    /// `max_λ |‖u_λ‖ - 1|`.
    pub fn unit_error(&self) -> f64 {
        self.vectors.iter().map(|u| (u.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// `h` with `P h(λ) = v_λ ⊗ u_λ` at each quadrature node.
#[derive(Debug, Clone)]
pub struct BandLimitedVector {
    quad: Arc<SpectralQuadrature>,
    u: Arc<VectorFieldU>,
    fields: Vec<GridFunction>,
}

impl BandLimitedVector {
    pub fn new(
        quad: Arc<SpectralQuadrature>,
        u: Arc<VectorFieldU>,
        fields: Vec<GridFunction>,
    ) -> Result<Self, BandError> {
        if fields.len() != quad.len() || u.vectors.len() != quad.len() {
            return Err(BandError::FieldLength {
                expected: quad.len(),
                got: fields.len().min(u.vectors.len()),
            });
        }
        if let Some(first) = fields.first() {
            let grid = *first.grid();
            if let Some(bad) = fields.iter().find(|v| *v.grid() != grid) {
                return Err(ReprError::GridMismatch(grid, *bad.grid()).into());
            }
        }
        Ok(BandLimitedVector { quad, u, fields })
    }

    pub fn quadrature(&self) -> &Arc<SpectralQuadrature> {
        &self.quad
    }

    pub fn unit_field(&self) -> &Arc<VectorFieldU> {
        &self.u
    }

    pub fn fields(&self) -> &[GridFunction] {
        &self.fields
    }

    pub fn grid(&self) -> Grid {
        *self.fields[0].grid()
    }

    fn check_compatible(&self, other: &BandLimitedVector) -> Result<(), BandError> {
        if Arc::ptr_eq(&self.quad, &other.quad) && Arc::ptr_eq(&self.u, &other.u) {
            Ok(())
        } else {
            Err(BandError::QuadratureMismatch)
        }
    }

    /// `Σ_λ w |det S| ⟨v_λ, v'_λ⟩ ⟨u_λ, u_λ⟩`.
    pub fn inner(&self, other: &BandLimitedVector) -> Result<Complex64, BandError> {
        self.check_compatible(other)?;
        let weights = self.quad.plancherel_weights();
        let mut acc = Complex64::zero();
        for ((a, b), (w, u)) in self.fields.iter().zip(&other.fields).zip(weights.iter().zip(&self.u.norms_sqr)) {
            acc += a.inner(b)? * (w * u);
        }
        Ok(acc)
    }

    pub fn norm_sqr(&self) -> f64 {
        let terms: Vec<f64> = self
            .fields
            .iter()
            .zip(self.quad.plancherel_weights())
            .zip(&self.u.norms_sqr)
            .map(|((v, w), u)| w * v.norm_sqr() * u)
            .collect();
        pairwise_sum(&terms)
    }

    /// `L(x) h`, i.e. `v_λ ↦ π_λ(x) v_λ`.
    pub fn left_translate(&self, x: &GroupElement) -> Result<BandLimitedVector, BandError> {
        let aligned = AlignedElement::from_group_element(x, self.grid().q())?;
        let fields = self
            .quad
            .nodes()
            .par_iter()
            .zip(&self.fields)
            .map(|(node, v)| node.rep.act_aligned(&aligned, v))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BandLimitedVector {
            quad: Arc::clone(&self.quad),
            u: Arc::clone(&self.u),
            fields,
        })
    }

    /// `w |det S| ⟨v^self_λ, π_λ(η) v^f_λ⟩ ⟨u_λ, u_λ⟩` per node, for `η` with zero central part.
    fn pairing_profile(&self, f: &BandLimitedVector, eta: &AlignedElement) -> Result<Vec<Complex64>, BandError> {
        let weights = self.quad.plancherel_weights();
        self.quad
            .nodes()
            .iter()
            .zip(self.fields.iter().zip(&f.fields))
            .zip(weights.iter().zip(&self.u.norms_sqr))
            .map(|((node, (a, b)), (w, u))| Ok(node.rep.pairing(eta, a, b)? * (w * u)))
            .collect()
    }
}

/// The admissible vector: `v_λ = |det B(λ)|^{-1/2} φ(λ) = U χ`.
pub fn synthesize_admissible_f(
    quad: Arc<SpectralQuadrature>,
    u: Arc<VectorFieldU>,
    grid: Grid,
) -> Result<BandLimitedVector, BandError> {
    if quad.is_empty() {
        return Err(BandError::EmptyQuadrature(quad.q_lambda()));
    }
    let fields = quad
        .nodes()
        .par_iter()
        .map(|node| {
            let phi = window_phi(&node.point, grid)?;
            Ok(phi.scale(Complex64::new(node.det_s.abs().powf(-0.5), 0.0)))
        })
        .collect::<Result<Vec<_>, BandError>>()?;
    BandLimitedVector::new(quad, u, fields)
}

/// Shape of the random test vectors.
#[derive(Debug, Clone, Copy)]
pub struct RandomFieldOptions {
    /// Bumps sit on unit cubes `m` with `|m|∞ ≤ cube_radius`.
    pub cube_radius: u32,
    pub seed: u64,
}

impl Default for RandomFieldOptions {
    fn default() -> Self {
        RandomFieldOptions {
            cube_radius: 1,
            seed: 7,
        }
    }
}

/// `Π_i cos²(π(x_i - m_i))` on the cube centred at `m`, zero elsewhere.
fn cube_bump(x: &[f64], m: &[i64]) -> f64 {
    x.iter()
        .zip(m)
        .map(|(&t, &c)| {
            let s = t - c as f64;
            if (-0.5..0.5).contains(&s) {
                (std::f64::consts::PI * s).cos().powi(2)
            } else {
                0.0
            }
        })
        .product()
}

/// `Π_k sin²(2πλ_k)`: smooth, periodic on K, zero on the coordinate planes.
pub fn spectral_profile(lambda: &[f64]) -> f64 {
    lambda
        .iter()
        .map(|l| (2.0 * std::f64::consts::PI * l).sin().powi(2))
        .product()
}

/// `v_λ(x) = ρ(λ) Σ_m a_m bump(x - m)` with seeded complex `a_m` and the
/// profile `ρ` of [`spectral_profile`].
pub fn random_band_limited(
    quad: Arc<SpectralQuadrature>,
    u: Arc<VectorFieldU>,
    grid: Grid,
    opts: RandomFieldOptions,
) -> Result<BandLimitedVector, BandError> {
    let d = grid.d();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let cubes = integer_box(d, opts.cube_radius, u128::MAX).expect("uncapped");
    let coeffs: Vec<Complex64> = cubes
        .iter()
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let base = GridFunction::from_fn(grid, |x| {
        cubes
            .iter()
            .zip(&coeffs)
            .map(|(m, a)| a * cube_bump(x, m))
            .sum()
    });
    let fields = quad
        .nodes()
        .iter()
        .map(|n| base.scale(Complex64::new(spectral_profile(&n.lambda), 0.0)))
        .collect();
    BandLimitedVector::new(quad, u, fields)
}

/// `V_f h(x) = ⟨h, L(x) f⟩`.
pub fn coefficient_transform(
    h: &BandLimitedVector,
    f: &BandLimitedVector,
    x: &GroupElement,
) -> Result<Complex64, BandError> {
    h.check_compatible(f)?;
    let aligned = AlignedElement::from_group_element(x, h.grid().q())?;
    let eta = AlignedElement {
        z: vec![0.0; aligned.z.len()],
        ..aligned.clone()
    };
    let profile = h.pairing_profile(f, &eta)?;
    let phases = h.quad.central_phases(&aligned.z);
    Ok(profile.iter().zip(&phases).map(|(p, e)| p * e).sum())
}

fn integer_element(z: &[i64], l: &[i64], m: &[i64]) -> GroupElement {
    GroupElement::from_integers(z, l, m)
}

fn aligned_integer(c: usize, l: &[i64], m: &[i64], q: u32) -> AlignedElement {
    AlignedElement {
        z: vec![0.0; c],
        l: l.iter().map(|&v| v as f64).collect(),
        m_steps: m.iter().map(|&v| v * q as i64).collect(),
    }
}

fn sup(xs: &[i64]) -> u32 {
    xs.iter().map(|v| v.unsigned_abs() as u32).max().unwrap_or(0)
}

/// `Σ_{γ ∈ Γ, |γ|∞ ≤ R} |⟨g, L(γ) f⟩|² / ‖g‖²` for each `R` in `radii`.
///
/// The central part of `γ = k η` is summed as Fourier coefficients over the
/// quadrature nodes; the `Γ₁` part pairs grid functions directly.
pub fn parseval_lgamma_ratios(
    g: &BandLimitedVector,
    f: &BandLimitedVector,
    radii: &[u32],
) -> Result<Vec<f64>, BandError> {
    g.check_compatible(f)?;
    let r_max = radii.iter().copied().max().unwrap_or(0);
    let quad = &g.quad;
    let c = quad.spec.central_dim();
    let d = quad.spec.d();
    let q = g.grid().q();
    let ks = integer_box(c, r_max, u128::MAX).expect("uncapped");
    let k_phases: Vec<Vec<Complex64>> = ks
        .iter()
        .map(|k| quad.central_phases(&k.iter().map(|&v| v as f64).collect::<Vec<_>>()))
        .collect();
    let k_levels: Vec<u32> = ks.iter().map(|k| sup(k)).collect();
    let etas = integer_box(2 * d, r_max, u128::MAX).expect("uncapped");
    let buckets: Vec<Vec<f64>> = etas
        .par_iter()
        .map(|eta| -> Result<Vec<f64>, BandError> {
            let mut bucket = vec![0.0; r_max as usize + 1];
            let (l, m) = eta.split_at(d);
            let profile = g.pairing_profile(f, &aligned_integer(c, l, m, q))?;
            if profile.iter().all(|p| p.is_zero()) {
                return Ok(bucket);
            }
            let eta_level = sup(eta);
            for (phases, &kl) in k_phases.iter().zip(&k_levels) {
                let coeff: Complex64 = profile.iter().zip(phases).map(|(p, e)| p * e).sum();
                bucket[eta_level.max(kl) as usize] += coeff.norm_sqr();
            }
            Ok(bucket)
        })
        .collect::<Result<_, _>>()?;
    let mut totals = vec![0.0; r_max as usize + 1];
    for (level, total) in totals.iter_mut().enumerate() {
        let column: Vec<f64> = buckets.iter().map(|b| b[level]).collect();
        *total = pairwise_sum(&column);
    }
    let norm = g.norm_sqr();
    if norm == 0.0 {
        return Err(BandError::Config("g is zero".into()));
    }
    let mut cumulative = Vec::with_capacity(totals.len());
    let mut running = 0.0;
    for t in totals {
        running += t;
        cumulative.push(running / norm);
    }
    Ok(radii.iter().map(|&r| cumulative[r as usize]).collect())
}

/// One sample `h(γ)` with the sup-norm level of `γ`.
#[derive(Debug, Clone)]
struct Sample {
    z: Vec<i64>,
    eta: GroupElement,
    level: u32,
    value: Complex64,
}

/// Samples `V_f h(γ)` for `γ ∈ Γ`, `|γ|∞ ≤ r_max`, skipping those that vanish identically.
fn gamma_samples(h: &BandLimitedVector, f: &BandLimitedVector, r_max: u32) -> Result<Vec<Sample>, BandError> {
    let quad = &h.quad;
    let c = quad.spec.central_dim();
    let d = quad.spec.d();
    let q = h.grid().q();
    let ks = integer_box(c, r_max, u128::MAX).expect("uncapped");
    let k_phases: Vec<Vec<Complex64>> = ks
        .iter()
        .map(|k| quad.central_phases(&k.iter().map(|&v| v as f64).collect::<Vec<_>>()))
        .collect();
    let etas = integer_box(2 * d, r_max, u128::MAX).expect("uncapped");
    let per_eta: Vec<Vec<Sample>> = etas
        .par_iter()
        .map(|eta| -> Result<Vec<Sample>, BandError> {
            let (l, m) = eta.split_at(d);
            let profile = h.pairing_profile(f, &aligned_integer(c, l, m, q))?;
            if profile.iter().all(|p| p.is_zero()) {
                return Ok(Vec::new());
            }
            let element = integer_element(&vec![0; c], l, m);
            let eta_level = sup(eta);
            Ok(ks
                .iter()
                .zip(&k_phases)
                .map(|(k, phases)| Sample {
                    z: k.clone(),
                    eta: element.clone(),
                    level: eta_level.max(sup(k)),
                    value: profile.iter().zip(phases).map(|(p, e)| p * e).sum(),
                })
                .collect())
        })
        .collect::<Result<_, _>>()?;
    Ok(per_eta.into_iter().flatten().collect())
}

/// `s = V_f f` evaluated at group elements with grid-aligned translation part;
/// node profiles are cached by the non-central part.
pub struct SincTable<'a> {
    f: &'a BandLimitedVector,
    cache: HashMap<(Vec<Rational>, Vec<Rational>), Vec<Complex64>>,
}

impl<'a> SincTable<'a> {
    pub fn new(f: &'a BandLimitedVector) -> Self {
        SincTable {
            f,
            cache: HashMap::new(),
        }
    }

    pub fn cached_profiles(&self) -> usize {
        self.cache.len()
    }

    pub fn value(&mut self, x: &GroupElement) -> Result<Complex64, BandError> {
        let key = (x.l.clone(), x.m.clone());
        if !self.cache.contains_key(&key) {
            let eta = GroupElement {
                z: vec![Rational::zero(); x.z.len()],
                l: x.l.clone(),
                m: x.m.clone(),
            };
            let aligned = AlignedElement::from_group_element(&eta, self.f.grid().q())?;
            let profile = self.f.pairing_profile(self.f, &aligned)?;
            self.cache.insert(key.clone(), profile);
        }
        let profile = &self.cache[&key];
        if profile.iter().all(|p| p.is_zero()) {
            return Ok(Complex64::zero());
        }
        let z: Vec<f64> = x.z.iter().map(crate::algebra::rational_to_f64).collect();
        let phases = self.f.quad.central_phases(&z);
        Ok(profile.iter().zip(&phases).map(|(p, e)| p * e).sum())
    }
}

/// `Σ_γ h(γ) s(γ⁻¹ x)` over the given samples (with `γ = exp(zZ) η`).
pub fn reconstruct(
    spec: &LieAlgebraSpec,
    samples: &[(GroupElement, Complex64)],
    sinc: &mut SincTable<'_>,
    x: &GroupElement,
) -> Result<Complex64, BandError> {
    let mut acc = Complex64::zero();
    for (gamma, value) in samples {
        if value.is_zero() {
            continue;
        }
        let y = spec.group_multiply(&spec.group_inverse(gamma), x);
        acc += value * sinc.value(&y)?;
    }
    Ok(acc)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionReport {
    pub radii: Vec<u32>,
    /// `‖H - H_R‖ / ‖H‖` over all probes.
    pub errors: Vec<f64>,
    /// Same, restricted to probes that lie in Γ.
    pub gamma_probe_errors: Vec<f64>,
    pub probe_count: usize,
    pub gamma_probe_count: usize,
    pub samples_used: Vec<usize>,
}

/// Relative L² error of sinc-type reconstruction of `H = V_f h` on a probe set.
pub fn reconstruction_error(
    h: &BandLimitedVector,
    f: &BandLimitedVector,
    radii: &[u32],
    probes: &[GroupElement],
) -> Result<ReconstructionReport, BandError> {
    h.check_compatible(f)?;
    if probes.is_empty() {
        return Err(BandError::Config("empty probe set".into()));
    }
    let spec = &h.quad.spec;
    let q = h.grid().q();
    for p in probes {
        AlignedElement::from_group_element(p, q)?;
    }
    let r_max = radii.iter().copied().max().unwrap_or(0);
    let samples = gamma_samples(h, f, r_max)?;
    let exact: Vec<Complex64> = probes
        .par_iter()
        .map(|x| coefficient_transform(h, f, x))
        .collect::<Result<_, _>>()?;

    // Distinct non-central parts of the samples, in first-seen order.
    let mut etas: Vec<GroupElement> = Vec::new();
    let mut eta_index: HashMap<GroupElement, usize> = HashMap::new();
    let sample_eta: Vec<usize> = samples
        .iter()
        .map(|s| {
            *eta_index.entry(s.eta.clone()).or_insert_with(|| {
                etas.push(s.eta.clone());
                etas.len() - 1
            })
        })
        .collect();

    let levels = r_max as usize + 1;
    let partial: Vec<Vec<Complex64>> = probes
        .par_iter()
        .map(|x| -> Result<Vec<Complex64>, BandError> {
            let mut sinc = SincTable::new(f);
            // η⁻¹ x for every distinct η; exp(zZ) is central so γ⁻¹x = exp(-zZ) η⁻¹ x.
            let shifted: Vec<GroupElement> = etas
                .iter()
                .map(|eta| spec.group_multiply(&spec.group_inverse(eta), x))
                .collect();
            let mut by_level = vec![Complex64::zero(); levels];
            for (s, &ei) in samples.iter().zip(&sample_eta) {
                if s.value.is_zero() {
                    continue;
                }
                let base = &shifted[ei];
                let y = GroupElement {
                    z: base
                        .z
                        .iter()
                        .zip(&s.z)
                        .map(|(a, &k)| a - Rational::from_integer(k.into()))
                        .collect(),
                    l: base.l.clone(),
                    m: base.m.clone(),
                };
                by_level[s.level as usize] += s.value * sinc.value(&y)?;
            }
            Ok(by_level)
        })
        .collect::<Result<_, _>>()?;

    let in_gamma: Vec<bool> = probes.iter().map(|p| p.is_integral()).collect();
    let mut errors = Vec::new();
    let mut gamma_errors = Vec::new();
    let mut samples_used = Vec::new();
    for &r in radii {
        let mut err = Vec::new();
        let mut norm = Vec::new();
        let mut gerr = Vec::new();
        let mut gnorm = Vec::new();
        for ((levels, exact), &g) in partial.iter().zip(&exact).zip(&in_gamma) {
            let approx: Complex64 = levels[..=r as usize].iter().sum();
            let e = (exact - approx).norm_sqr();
            err.push(e);
            norm.push(exact.norm_sqr());
            if g {
                gerr.push(e);
                gnorm.push(exact.norm_sqr());
            }
        }
        errors.push((pairwise_sum(&err) / pairwise_sum(&norm)).sqrt());
        gamma_errors.push(if gnorm.is_empty() {
            0.0
        } else {
            (pairwise_sum(&gerr) / pairwise_sum(&gnorm)).sqrt()
        });
        samples_used.push(samples.iter().filter(|s| s.level <= r && !s.value.is_zero()).count());
    }
    Ok(ReconstructionReport {
        radii: radii.to_vec(),
        errors,
        gamma_probe_errors: gamma_errors,
        probe_count: probes.len(),
        gamma_probe_count: in_gamma.iter().filter(|&&g| g).count(),
        samples_used,
    })
}

/// Seeded probes near the identity: the identity, a few points of Γ, and
/// points off Γ with quarter-integer central and `Y` parts and grid-step `X` parts.
pub fn probe_set(spec: &LieAlgebraSpec, q: u32, count: usize, seed: u64) -> Vec<GroupElement> {
    let c = spec.central_dim();
    let d = spec.d();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probes = vec![spec.identity()];
    let gamma_count = count / 4;
    for _ in 0..gamma_count {
        let mut ints = |n: usize| -> Vec<i64> { (0..n).map(|_| rng.gen_range(-1..=1)).collect() };
        let (z, l, m) = (ints(c), ints(d), ints(d));
        probes.push(GroupElement::from_integers(&z, &l, &m));
    }
    while probes.len() < count.max(1) {
        let z = (0..c).map(|_| rational(rng.gen_range(-4..=4), 4)).collect();
        let l = (0..d).map(|_| rational(rng.gen_range(-4..=4), 4)).collect();
        let m = (0..d)
            .map(|_| rational(rng.gen_range(-(q as i64)..=q as i64), q as i64))
            .collect();
        probes.push(GroupElement { z, l, m });
    }
    probes
}

#[derive(Debug, Clone, Copy)]
pub struct IsometryOptions {
    /// `Y` coordinates range over `|l|∞ ≤ l_radius`.
    pub l_radius: f64,
    pub l_step: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IsometryReport {
    pub spectral_norm_sqr: f64,
    pub sampled_norm_sqr: f64,
    pub relative_gap: f64,
    pub l_radius: f64,
    pub l_step: f64,
    pub grid: String,
    pub sample_points: usize,
}

/// `⟨a, π_λ(l, m) b⟩` for every `l` in the product grid `values^d` (row-major)
/// at a fixed grid shift `m_steps`.
fn pairings_over_l(
    rep: &IrreducibleRep,
    a: &GridFunction,
    b: &GridFunction,
    m_steps: &[i64],
    values: &[f64],
) -> Vec<Complex64> {
    let grid = *a.grid();
    let d = grid.d();
    let nl = values.len();
    let total = nl.pow(d as u32);
    let (Some(sa), Some(sb)) = (a.support(), b.support()) else {
        return vec![Complex64::zero(); total];
    };
    let mut lo = vec![0usize; d];
    let mut shape = vec![0usize; d];
    for axis in 0..d {
        let s = m_steps[axis];
        let l = (sa.lo[axis] as i64).max(sb.lo[axis] as i64 + s);
        let h = (sa.hi[axis] as i64).min(sb.hi[axis] as i64 + s);
        if l >= h {
            return vec![Complex64::zero(); total];
        }
        lo[axis] = l as usize;
        shape[axis] = (h - l) as usize;
    }
    let q = grid.q() as f64;
    let m: Vec<f64> = m_steps.iter().map(|&s| s as f64 / q).collect();
    // ξ = A l + c(m); the pairing carries e^{+2πi⟨ξ, x⟩}.
    let offset = rep.phase_slope(&vec![0.0; d], &m);
    let columns: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            rep.phase_slope(&e, &vec![0.0; d])
        })
        .collect();
    let diagonal = (0..d).all(|j| (0..d).all(|k| k == j || columns[j][k] == 0.0));

    let n = grid.points_per_axis();
    let count: usize = shape.iter().product();
    let mut points = Vec::with_capacity(count);
    let mut products = Vec::with_capacity(count);
    for flat in 0..count {
        let mut rem = flat;
        let mut idx = vec![0usize; d];
        for axis in (0..d).rev() {
            idx[axis] = lo[axis] + rem % shape[axis];
            rem /= shape[axis];
        }
        let ia = idx.iter().fold(0usize, |acc, &i| acc * n + i);
        let ib = idx
            .iter()
            .zip(m_steps)
            .fold(0usize, |acc, (&i, &s)| acc * n + (i as i64 - s) as usize);
        let x: Vec<f64> = idx.iter().map(|&i| grid.coordinate(i)).collect();
        let base = offset.iter().zip(&x).map(|(o, t)| o * t).sum::<f64>();
        products.push(a.values()[ia] * b.values()[ib].conj() * cis_turns(base) * grid.cell_volume());
        points.push(x);
    }

    if diagonal {
        // Contract one axis at a time: x_axis -> l_axis.
        let mut data = products;
        let mut dims = shape.clone();
        for axis in 0..d {
            let slope = columns[axis][axis];
            let coords: Vec<f64> = (0..shape[axis]).map(|i| grid.coordinate(lo[axis] + i)).collect();
            let table: Vec<Complex64> = values
                .iter()
                .flat_map(|&l| coords.iter().map(move |&t| cis_turns(l * slope * t)))
                .collect();
            let outer: usize = dims[..axis].iter().product();
            let inner: usize = dims[axis + 1..].iter().product();
            let len = dims[axis];
            let mut next = vec![Complex64::zero(); outer * nl * inner];
            for o in 0..outer {
                for (li, row) in table.chunks(len).enumerate() {
                    for i in 0..inner {
                        let mut acc = Complex64::zero();
                        for (t, w) in row.iter().enumerate() {
                            acc += w * data[(o * len + t) * inner + i];
                        }
                        next[(o * nl + li) * inner + i] = acc;
                    }
                }
            }
            data = next;
            dims[axis] = nl;
        }
        return data;
    }

    // y_j = Σ_k A_kj x_k; e^{2πi⟨l, y⟩} from per-axis power tables.
    let tables: Vec<Vec<Vec<Complex64>>> = points
        .iter()
        .map(|x| {
            (0..d)
                .map(|j| {
                    let y: f64 = (0..d).map(|k| columns[j][k] * x[k]).sum();
                    values.iter().map(|&l| cis_turns(l * y)).collect()
                })
                .collect()
        })
        .collect();
    (0..total)
        .map(|flat| {
            let mut rem = flat;
            let mut li = vec![0usize; d];
            for axis in (0..d).rev() {
                li[axis] = rem % nl;
                rem /= nl;
            }
            products
                .iter()
                .zip(&tables)
                .map(|(p, t)| (0..d).fold(*p, |acc, j| acc * t[j][li[j]]))
                .sum()
        })
        .collect()
}

/// Compares `‖h‖²` with `Σ_x |V_f h(x)|² · cell` on a grid of the group.
///
/// `z` runs over the integers of one period of the quadrature (the node
/// spacing is `1/q_λ`, so this sum is exact), `l` over a box of step
/// `l_step`, and `m` over every grid shift at which supports meet.
pub fn isometry_check(
    h: &BandLimitedVector,
    f: &BandLimitedVector,
    opts: IsometryOptions,
) -> Result<IsometryReport, BandError> {
    h.check_compatible(f)?;
    if opts.l_step <= 0.0 || opts.l_radius < 0.0 {
        return Err(BandError::Config("l_step must be positive and l_radius nonnegative".into()));
    }
    let quad = &h.quad;
    let c = quad.spec.central_dim();
    let grid = h.grid();
    let d = grid.d();
    let steps = (opts.l_radius / opts.l_step).floor() as i64;
    let values: Vec<f64> = (-steps..=steps).map(|i| i as f64 * opts.l_step).collect();
    let nl_total = values.len().pow(d as u32);

    let union = |v: &BandLimitedVector| -> Option<(Vec<i64>, Vec<i64>)> {
        let mut lo = vec![i64::MAX; d];
        let mut hi = vec![i64::MIN; d];
        let mut any = false;
        for s in v.fields.iter().filter_map(|g| g.support()) {
            any = true;
            for axis in 0..d {
                lo[axis] = lo[axis].min(s.lo[axis] as i64);
                hi[axis] = hi[axis].max(s.hi[axis] as i64);
            }
        }
        any.then_some((lo, hi))
    };
    let spectral = h.norm_sqr();
    let (Some((alo, ahi)), Some((blo, bhi))) = (union(h), union(f)) else {
        return Ok(IsometryReport {
            spectral_norm_sqr: spectral,
            sampled_norm_sqr: 0.0,
            relative_gap: if spectral == 0.0 { 0.0 } else { 1.0 },
            l_radius: opts.l_radius,
            l_step: opts.l_step,
            grid: grid.to_string(),
            sample_points: 0,
        });
    };
    // Shifts s with [blo + s, bhi + s) meeting [alo, ahi).
    let ranges: Vec<(i64, i64)> = (0..d).map(|a| (alo[a] - bhi[a] + 1, ahi[a] - blo[a] - 1)).collect();
    let shifts: Vec<Vec<i64>> = ranges.iter().fold(vec![vec![]], |acc, &(lo, hi)| {
        acc.into_iter()
            .flat_map(|p| {
                (lo..=hi).map(move |s| {
                    let mut p = p.clone();
                    p.push(s);
                    p
                })
            })
            .collect()
    });

    let q_lambda = quad.q_lambda() as u32;
    let zs = integer_box(c, q_lambda, u128::MAX)
        .expect("uncapped")
        .into_iter()
        .filter(|z| z.iter().all(|&v| (0..q_lambda as i64).contains(&v)))
        .collect::<Vec<_>>();
    // E[z][node] = e^{-2πi⟨z, λ⟩}
    let phase = DMatrix::from_fn(zs.len(), quad.len(), |r, j| {
        let z: Vec<f64> = zs[r].iter().map(|&v| v as f64).collect();
        quad.central_phases(&z)[j]
    });
    let weights: Vec<f64> = quad
        .plancherel_weights()
        .iter()
        .zip(&h.u.norms_sqr)
        .map(|(w, u)| w * u)
        .collect();

    let per_shift: Vec<f64> = shifts
        .par_iter()
        .map(|m| {
            let mut profile = DMatrix::<Complex64>::zeros(quad.len(), nl_total);
            let mut any = false;
            for (j, node) in quad.nodes().iter().enumerate() {
                let row = pairings_over_l(&node.rep, &h.fields[j], &f.fields[j], m, &values);
                for (col, v) in row.into_iter().enumerate() {
                    if !v.is_zero() {
                        any = true;
                    }
                    profile[(j, col)] = v * weights[j];
                }
            }
            if !any {
                return 0.0;
            }
            let sampled = &phase * profile;
            sampled.iter().map(|v| v.norm_sqr()).sum::<f64>()
        })
        .collect();
    let cell = opts.l_step.powi(d as i32) * grid.cell_volume();
    let sampled = pairwise_sum(&per_shift) * cell;
    Ok(IsometryReport {
        spectral_norm_sqr: spectral,
        sampled_norm_sqr: sampled,
        relative_gap: (sampled - spectral).abs() / spectral.max(f64::MIN_POSITIVE),
        l_radius: opts.l_radius,
        l_step: opts.l_step,
        grid: grid.to_string(),
        sample_points: zs.len() * nl_total * shifts.len(),
    })
}

/// `‖f‖²` next to the independent midpoint estimate of `μ(I)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormIdentity {
    pub q_lambda: usize,
    pub norm_f_sqr: f64,
    pub mu_estimate: f64,
    pub max_field_norm_error: f64,
}

pub fn norm_identity(spec: &LieAlgebraSpec, q_lambda: usize, grid: Grid) -> Result<NormIdentity, BandError> {
    let quad = Arc::new(SpectralQuadrature::new(spec, q_lambda)?);
    let u = Arc::new(VectorFieldU::constant_indicator(&quad, grid));
    let f = synthesize_admissible_f(Arc::clone(&quad), u, grid)?;
    let max_field_norm_error = f
        .fields()
        .iter()
        .map(|v| (v.norm_sqr() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(NormIdentity {
        q_lambda,
        norm_f_sqr: f.norm_sqr(),
        mu_estimate: crate::spectra::measure_of_i(spec, q_lambda).mu,
        max_field_norm_error,
    })
}
