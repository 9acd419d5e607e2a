//! Command-line front end: argument parsing, dispatch and report emission.
//!
//! Every report is pretty JSON on stdout (and under `--out` when given) with
//! the tool version, the seed and an echo of the run parameters. Reductions
//! downstream are order-fixed, so reports do not depend on the thread count.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::algebra::{parse_rational, parse_spec, rational_to_f64, LieAlgebraSpec, SpecError};
use crate::band::{self, BandError, RandomFieldOptions};
use crate::frame::{self, CertifyOptions, FrameError, Verdict};
use crate::poly::Homogeneity;
use crate::repr::{self, Grid, GridFunction, ReprError};
use crate::spectra::{self, SpectraError, SpectralPoint};

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const THREADS_ENV: &str = "NILBAND_THREADS";
pub const INTERTWINING_TOLERANCE: f64 = 1e-11;

#[derive(Debug, Parser)]
#[command(name = "nilband", version, about = "Sampling on step-two nilpotent groups: checks and reports")]
pub struct Cli {
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads (overrides NILBAND_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for report files; stdout only when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Structural checks and det S(λ).
    Validate { spec: PathBuf },
    /// The polynomial det S(λ).
    Detpoly { spec: PathBuf },
    /// Membership counts for E, K, Q and I over cell midpoints of K.
    Region {
        spec: PathBuf,
        #[arg(long, default_value_t = 8)]
        q: usize,
    },
    /// Midpoint estimates of |I| and μ(I) at q and 2q.
    Measure {
        spec: PathBuf,
        #[arg(long, default_value_t = 64)]
        q: usize,
    },
    /// Parseval certification of the chirped window system.
    FrameCheck {
        spec: PathBuf,
        #[arg(long)]
        lambda: Option<String>,
        /// Certify every cell midpoint of I at resolution --q.
        #[arg(long)]
        sweep: bool,
        #[arg(long, default_value_t = 4)]
        q: usize,
        #[arg(long, default_value = "8,16")]
        grid: String,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Compares π_λ on Γ₁ with the Gabor family member by member.
    Intertwine {
        spec: PathBuf,
        #[arg(long)]
        lambda: String,
        #[arg(long, default_value = "8,16")]
        grid: String,
        #[arg(long, default_value_t = 3)]
        radius: u32,
    },
    /// Norm identity, Parseval ratios of L(Γ)f and sinc-type reconstruction errors.
    SampleReconstruct {
        spec: PathBuf,
        #[arg(long = "R", value_delimiter = ',', default_value = "2,4,6,8")]
        radii: Vec<u32>,
        #[arg(long = "q-lambda", default_value_t = band::DEFAULT_Q_LAMBDA)]
        q_lambda: usize,
        #[arg(long, default_value = "8,16")]
        grid: String,
        #[arg(long, default_value_t = 16)]
        probes: usize,
    },
    /// Writes the window |det S|^{1/2} U χ as a binary grid dump.
    DumpWindow {
        spec: PathBuf,
        #[arg(long)]
        lambda: String,
        #[arg(long, default_value = "8,16")]
        grid: String,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Spec { path: String, source: SpecError },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Band(#[from] BandError),
    #[error(transparent)]
    Repr(#[from] ReprError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

/// The parsed run parameters.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub command: String,
}

/// One emitted report.
pub struct Outcome {
    pub passed: bool,
    pub report: Value,
    pub csv: Option<String>,
}

/// Resolves `path`, trying `path.json` when `path` itself does not exist.
pub fn resolve_spec_path(path: &Path) -> PathBuf {
    if path.exists() {
        return path.to_path_buf();
    }
    let mut with_ext = path.as_os_str().to_owned();
    with_ext.push(".json");
    PathBuf::from(with_ext)
}

pub fn load_spec(path: &Path) -> Result<LieAlgebraSpec, CliError> {
    let resolved = resolve_spec_path(path);
    let shown = resolved.display().to_string();
    let text = std::fs::read_to_string(&resolved).map_err(|source| CliError::Io {
        path: shown.clone(),
        source,
    })?;
    parse_spec(&text).map_err(|source| CliError::Spec { path: shown, source })
}

/// Parses `"1/4,0,0.25"`: each entry is a rational `p/q` or a decimal.
pub fn parse_lambda(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|t| {
            let t = t.trim();
            parse_rational(t)
                .map(|r| rational_to_f64(&r))
                .or_else(|e| t.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or(e))
                .map_err(|e| CliError::Usage(format!("--lambda: {e}")))
        })
        .collect()
}

/// Parses `"T,q"`.
pub fn parse_grid(text: &str, d: usize) -> Result<Grid, CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let [t, q] = parts.as_slice() else {
        return Err(CliError::Usage(format!("--grid expects T,q, got `{text}`")));
    };
    let parse = |s: &str| {
        s.parse::<u32>()
            .map_err(|_| CliError::Usage(format!("--grid: `{s}` is not a positive integer")))
    };
    Grid::new(d, parse(t)?, parse(q)?).map_err(|e| CliError::Usage(format!("--grid: {e}")))
}

fn spec_label(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().trim_end_matches(".json").to_string())
        .unwrap_or_default()
}

fn check_lambda(spec: &LieAlgebraSpec, lambda: &[f64]) -> Result<(), CliError> {
    if lambda.len() != spec.central_dim() {
        return Err(CliError::Usage(format!(
            "--lambda has {} entries, the center has dimension {}",
            lambda.len(),
            spec.central_dim()
        )));
    }
    Ok(())
}

fn homogeneity_label(h: Homogeneity) -> Value {
    match h {
        Homogeneity::Zero => json!("zero"),
        Homogeneity::Homogeneous(k) => json!(k),
        Homogeneity::NotHomogeneous => json!("mixed"),
    }
}

fn validate(spec_path: &Path) -> Result<Outcome, CliError> {
    let spec = load_spec(spec_path)?;
    let report = spec.validate();
    Ok(Outcome {
        passed: report.passed(),
        report: json!({
            "n": spec.n(),
            "d": spec.d(),
            "central_dim": spec.central_dim(),
            "basis": spec.basis_names(),
            "checks": report.checks,
            "det_s": report.det_s.to_string(),
        }),
        csv: None,
    })
}

fn detpoly(spec_path: &Path) -> Result<Outcome, CliError> {
    let spec = load_spec(spec_path)?;
    let det = spec.validate().det_s;
    Ok(Outcome {
        passed: det.is_nontrivial(),
        report: json!({
            "det_s": det.to_string(),
            "terms": det.term_count(),
            "degree": det.degree(),
            "homogeneous_degree": homogeneity_label(det.homogeneity()),
        }),
        csv: None,
    })
}

fn region(spec_path: &Path, q: usize) -> Result<Outcome, CliError> {
    if q < 2 {
        return Err(CliError::Usage("--q must be at least 2".into()));
    }
    let spec = load_spec(spec_path)?;
    let c = spec.central_dim();
    let mut csv = String::new();
    let names: Vec<String> = (1..=c).map(|k| format!("lambda{k}")).collect();
    csv.push_str(&format!("{},in_e,in_k,in_q,in_i,det_s,norm\n", names.join(",")));
    let (mut e, mut k, mut qq, mut i) = (0usize, 0usize, 0usize, 0usize);
    let mut generic_jumps = 0usize;
    let generic = spectra::generic_jump_set(&spec);
    let cells = spectra::cube_midpoints(c, q);
    for lambda in &cells {
        let flags = spectra::region_flags(&spec, lambda)?;
        e += flags.in_e as usize;
        k += flags.in_k as usize;
        qq += flags.in_q as usize;
        i += flags.in_i as usize;
        if flags.in_i && spectra::jump_indices(&spec, lambda)? == generic {
            generic_jumps += 1;
        }
        let coords: Vec<String> = lambda.iter().map(|v| v.to_string()).collect();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            coords.join(","),
            flags.in_e,
            flags.in_k,
            flags.in_q,
            flags.in_i,
            flags.det_value,
            flags.norm_value
        ));
    }
    let cell = (q as f64).powi(-(c as i32));
    Ok(Outcome {
        passed: generic_jumps == i,
        report: json!({
            "q": q,
            "cells": cells.len(),
            "in_e": e,
            "in_k": k,
            "in_q": qq,
            "in_i": i,
            "lebesgue_i_estimate": i as f64 * cell,
            "generic_jump_set": generic,
            "cells_in_i_with_generic_jumps": generic_jumps,
        }),
        csv: Some(csv),
    })
}

fn measure(spec_path: &Path, q: usize) -> Result<Outcome, CliError> {
    if q < 2 {
        return Err(CliError::Usage("--q must be at least 2".into()));
    }
    let spec = load_spec(spec_path)?;
    let coarse = spectra::measure_of_i(&spec, q);
    let fine = spectra::measure_of_i(&spec, 2 * q);
    Ok(Outcome {
        passed: true,
        report: json!({
            "estimates": [coarse, fine],
            "mu_change_under_doubling": (fine.mu - coarse.mu).abs(),
        }),
        csv: None,
    })
}

#[derive(Serialize)]
struct SweepRow {
    lambda: Vec<f64>,
    lower: f64,
    upper: f64,
    deviation: f64,
    verdict: Verdict,
}

fn default_tolerance(grid: &Grid) -> f64 {
    if grid.q() >= 32 {
        frame::PARSEVAL_TOLERANCE_REFINED
    } else {
        frame::PARSEVAL_TOLERANCE
    }
}

fn frame_check(
    spec_path: &Path,
    lambda: Option<&str>,
    sweep: bool,
    q: usize,
    grid: &str,
    tolerance: Option<f64>,
) -> Result<Outcome, CliError> {
    let spec = load_spec(spec_path)?;
    let grid = parse_grid(grid, spec.d())?;
    let opts = CertifyOptions {
        tolerance: tolerance.unwrap_or_else(|| default_tolerance(&grid)),
        ..CertifyOptions::default()
    };
    match (lambda, sweep) {
        (Some(text), false) => {
            let lambda = parse_lambda(text)?;
            check_lambda(&spec, &lambda)?;
            let cert = frame::parseval_certify(&spec, &lambda, grid, opts)?;
            Ok(Outcome {
                passed: cert.verdict == Verdict::Parseval,
                report: json!({"certificate": cert, "deviation": cert.deviation()}),
                csv: None,
            })
        }
        (None, true) => {
            if q < 2 {
                return Err(CliError::Usage("--q must be at least 2".into()));
            }
            let mut rows = Vec::new();
            for lambda in spectra::cube_midpoints(spec.central_dim(), q) {
                if !spectra::region_flags(&spec, &lambda)?.in_i {
                    continue;
                }
                let cert = frame::parseval_certify(&spec, &lambda, grid, opts)?;
                rows.push(SweepRow {
                    lower: cert.report.lower_bound.min(cert.dense_lower),
                    upper: cert.report.upper_bound.max(cert.dense_upper),
                    deviation: cert.deviation(),
                    verdict: cert.verdict,
                    lambda,
                });
            }
            let c = spec.central_dim();
            let names: Vec<String> = (1..=c).map(|k| format!("lambda{k}")).collect();
            let mut csv = format!("{},A,B,verdict\n", names.join(","));
            for r in &rows {
                let coords: Vec<String> = r.lambda.iter().map(|v| v.to_string()).collect();
                let verdict = serde_json::to_value(r.verdict).expect("verdict");
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    coords.join(","),
                    r.lower,
                    r.upper,
                    verdict.as_str().unwrap_or_default()
                ));
            }
            Ok(Outcome {
                passed: !rows.is_empty() && rows.iter().all(|r| r.verdict == Verdict::Parseval),
                report: json!({"q": q, "grid": grid.to_string(), "tolerance": opts.tolerance, "points": rows}),
                csv: Some(csv),
            })
        }
        _ => Err(CliError::Usage("frame-check needs exactly one of --lambda or --sweep".into())),
    }
}

/// Seeded complex samples on the unit cube, zero elsewhere.
fn random_cube_vector(grid: Grid, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chi = GridFunction::unit_cube_indicator(grid);
    let values = chi
        .values()
        .iter()
        .map(|v| {
            let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if v.re != 0.0 {
                z
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    GridFunction::new(grid, values).expect("same grid")
}

fn intertwine(spec_path: &Path, lambda: &str, grid: &str, radius: u32, seed: u64) -> Result<Outcome, CliError> {
    let spec = load_spec(spec_path)?;
    let lambda = parse_lambda(lambda)?;
    check_lambda(&spec, &lambda)?;
    let grid = parse_grid(grid, spec.d())?;
    let v = random_cube_vector(grid, seed);
    let deviation = frame::intertwining_regression(&spec, &lambda, &v, radius)?;
    Ok(Outcome {
        passed: deviation <= INTERTWINING_TOLERANCE,
        report: json!({
            "lambda": lambda,
            "grid": grid.to_string(),
            "radius": radius,
            "max_deviation": deviation,
            "tolerance": INTERTWINING_TOLERANCE,
        }),
        csv: None,
    })
}

fn sample_reconstruct(
    spec_path: &Path,
    radii: &[u32],
    q_lambda: usize,
    grid: &str,
    probes: usize,
    seed: u64,
) -> Result<Outcome, CliError> {
    if radii.is_empty() {
        return Err(CliError::Usage("--R needs at least one radius".into()));
    }
    let mut radii = radii.to_vec();
    radii.sort_unstable();
    radii.dedup();
    let spec = load_spec(spec_path)?;
    let grid = parse_grid(grid, spec.d())?;
    let quad = Arc::new(band::SpectralQuadrature::new(&spec, q_lambda)?);
    let u = Arc::new(band::VectorFieldU::constant_indicator(&quad, grid));
    let f = band::synthesize_admissible_f(Arc::clone(&quad), Arc::clone(&u), grid)?;
    let h = band::random_band_limited(
        Arc::clone(&quad),
        Arc::clone(&u),
        grid,
        RandomFieldOptions { cube_radius: 1, seed },
    )?;
    let mu = spectra::measure_of_i(&spec, q_lambda).mu;
    let ratios = band::parseval_lgamma_ratios(&h, &f, &radii)?;
    let probe_points = band::probe_set(&spec, grid.q(), probes, seed);
    let recon = band::reconstruction_error(&h, &f, &radii, &probe_points)?;
    let ratios_monotone = ratios.windows(2).all(|w| w[1] >= w[0]);
    let errors_monotone = recon.errors.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let mut csv = String::from("R,parseval_ratio,reconstruction_error,gamma_probe_error,samples\n");
    for (i, r) in radii.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r, ratios[i], recon.errors[i], recon.gamma_probe_errors[i], recon.samples_used[i]
        ));
    }
    Ok(Outcome {
        passed: ratios_monotone && errors_monotone,
        report: json!({
            "q_lambda": q_lambda,
            "grid": grid.to_string(),
            "quadrature_nodes": quad.len(),
            "norm_f_squared": f.norm_sqr(),
            "mu_estimate": mu,
            "norm_h_squared": h.norm_sqr(),
            "radii": radii,
            "parseval_ratios": ratios,
            "reconstruction": recon,
            "ratios_monotone": ratios_monotone,
            "errors_monotone": errors_monotone,
        }),
        csv: Some(csv),
    })
}

fn dump_window(spec_path: &Path, lambda: &str, grid: &str, out: Option<&Path>) -> Result<Outcome, CliError> {
    let Some(out) = out else {
        return Err(CliError::Usage("dump-window needs --out DIR".into()));
    };
    let spec = load_spec(spec_path)?;
    let lambda = parse_lambda(lambda)?;
    check_lambda(&spec, &lambda)?;
    let grid = parse_grid(grid, spec.d())?;
    let point = SpectralPoint::new(&spec, &lambda)?;
    let phi = repr::window_phi(&point, grid)?;
    std::fs::create_dir_all(out).map_err(|source| CliError::Io {
        path: out.display().to_string(),
        source,
    })?;
    let stem = out.join("window");
    repr::dump_grid_function(&phi, &stem, json!({"lambda": lambda, "det_s": point.det_s()}))?;
    Ok(Outcome {
        passed: true,
        report: json!({
            "lambda": lambda,
            "grid": grid.to_string(),
            "norm_squared": phi.norm_sqr(),
            "det_s": point.det_s(),
            "files": ["window.bin", "window.json"],
        }),
        csv: None,
    })
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Validate { .. } => "validate",
        Command::Detpoly { .. } => "detpoly",
        Command::Region { .. } => "region",
        Command::Measure { .. } => "measure",
        Command::FrameCheck { .. } => "frame-check",
        Command::Intertwine { .. } => "intertwine",
        Command::SampleReconstruct { .. } => "sample-reconstruct",
        Command::DumpWindow { .. } => "dump-window",
    }
}

/// Parameter echo; the thread count is left out so reports stay byte-identical across it.
fn config_echo(cli: &Cli) -> Value {
    let params = match &cli.command {
        Command::Validate { spec } | Command::Detpoly { spec } => json!({"spec": spec_label(spec)}),
        Command::Region { spec, q } | Command::Measure { spec, q } => json!({"spec": spec_label(spec), "q": q}),
        Command::FrameCheck {
            spec,
            lambda,
            sweep,
            q,
            grid,
            tolerance,
        } => json!({"spec": spec_label(spec), "lambda": lambda, "sweep": sweep, "q": q, "grid": grid, "tolerance": tolerance}),
        Command::Intertwine {
            spec,
            lambda,
            grid,
            radius,
        } => json!({"spec": spec_label(spec), "lambda": lambda, "grid": grid, "radius": radius}),
        Command::SampleReconstruct {
            spec,
            radii,
            q_lambda,
            grid,
            probes,
        } => json!({"spec": spec_label(spec), "R": radii, "q_lambda": q_lambda, "grid": grid, "probes": probes}),
        Command::DumpWindow { spec, lambda, grid } => {
            json!({"spec": spec_label(spec), "lambda": lambda, "grid": grid})
        }
    };
    json!({"seed": cli.seed, "params": params})
}

fn dispatch(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Validate { spec } => validate(spec),
        Command::Detpoly { spec } => detpoly(spec),
        Command::Region { spec, q } => region(spec, *q),
        Command::Measure { spec, q } => measure(spec, *q),
        Command::FrameCheck {
            spec,
            lambda,
            sweep,
            q,
            grid,
            tolerance,
        } => frame_check(spec, lambda.as_deref(), *sweep, *q, grid, *tolerance),
        Command::Intertwine {
            spec,
            lambda,
            grid,
            radius,
        } => intertwine(spec, lambda, grid, *radius, cli.seed),
        Command::SampleReconstruct {
            spec,
            radii,
            q_lambda,
            grid,
            probes,
        } => sample_reconstruct(spec, radii, *q_lambda, grid, *probes, cli.seed),
        Command::DumpWindow { spec, lambda, grid } => dump_window(spec, lambda, grid, cli.out.as_deref()),
    }
}

/// Thread count: the flag wins over the environment variable.
pub fn thread_count(flag: Option<usize>, env: Option<&str>) -> Result<Option<usize>, CliError> {
    if let Some(n) = flag {
        return match n {
            0 => Err(CliError::Usage("--threads must be positive".into())),
            n => Ok(Some(n)),
        };
    }
    match env {
        None => Ok(None),
        Some(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got `{s}`"))),
        },
    }
}

fn write_outputs(out: &Path, name: &str, json_text: &str, csv: Option<&str>) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: out.display().to_string(),
        source,
    };
    std::fs::create_dir_all(out).map_err(io)?;
    std::fs::write(out.join(format!("{name}.json")), json_text).map_err(io)?;
    if let Some(csv) = csv {
        std::fs::write(out.join(format!("{name}.csv")), csv).map_err(io)?;
    }
    Ok(())
}

/// Runs the tool; returns the exit code (0 pass, 1 check failure, 2 usage or config error).
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                2
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    let env = std::env::var(THREADS_ENV).ok();
    let threads = match thread_count(cli.threads, env.as_deref()) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return 2;
        }
    };
    let config = RunConfig {
        seed: cli.seed,
        threads,
        out: cli.out.clone(),
        command: command_name(&cli.command).to_string(),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: thread pool: {e}");
            return 2;
        }
    };
    let outcome = match pool.install(|| dispatch(&cli)) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return 2;
        }
    };
    let report = json!({
        "tool": "nilband",
        "version": env!("CARGO_PKG_VERSION"),
        "command": config.command,
        "config": config_echo(&cli),
        "passed": outcome.passed,
        "result": outcome.report,
    });
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    if let Some(out) = &config.out {
        if let Err(e) = write_outputs(out, &config.command, &text, outcome.csv.as_deref()) {
            let _ = writeln!(stderr, "error: {e}");
            return 2;
        }
    }
    if write!(stdout, "{text}").is_err() {
        return 2;
    }
    if outcome.passed {
        0
    } else {
        1
    }
}
