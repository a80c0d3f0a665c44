//! The work behind each subcommand, independent of argument parsing.

use crate::io::{self, kernel_name, LoadError, PolicyJson};
use crate::report::{
    bench_rows, to_csv, to_json, BenchConfigJson, BenchSummary, DiagnosticJson, EstimateConfig, EstimateReport,
    SizesJson, ValidationReport, VerifyReport,
};
use blochpaw_core::bench::{assemble_series, check_sizes, run_point, Axis, BenchConfig, ScalingSeries};
use blochpaw_core::dataset::{synth_dataset, BlochDataset, Profile, SynthSizes, TruncationPolicy};
use blochpaw_core::fock::{fock_from_integrals, fock_from_lcu, lambda_bruteforce, SpinOrbitalOrder, SPIN_ORBITAL_CAP};
use blochpaw_core::hamiltonian::kappa;
use blochpaw_core::kspace::KernelKind;
use blochpaw_core::lcu::{factorize, LcuFactorization};
use blochpaw_core::norm::lambda_total;
use blochpaw_core::resources::{total_resources, BitParams, ResourceOptions};
use blochpaw_core::{Error, MEV_IN_HARTREE};
use rayon::prelude::*;
use std::fmt;
use std::path::{Path, PathBuf};

/// A failed command and its exit status.
#[derive(Debug)]
pub enum CliError {
    /// A file could not be read or written (exit 1).
    Io(String),
    /// Input or result failed a check (exit 2).
    Invalid(String),
    /// The request is outside what the tool does (exit 3).
    Refused(String),
}

impl CliError {
    /// Process exit status.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Invalid(_) => 2,
            CliError::Refused(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) | CliError::Invalid(m) | CliError::Refused(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Io { .. } => CliError::Io(e.to_string()),
            LoadError::Invalid(_) => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::SizeCap { .. } => CliError::Refused(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

/// Text for stdout plus the exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Report body.
    pub text: String,
    /// 0 on success, 2 when a check failed.
    pub code: i32,
}

/// Output encoding of `estimate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// Full report.
    Json,
    /// Header plus one row.
    Csv,
}

/// Bit widths given on the command line; unset ones use the defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BitOverrides {
    /// `b_r`.
    pub b_r: Option<u64>,
    /// `N_1`.
    pub n1: Option<u64>,
    /// `N_2`.
    pub n2: Option<u64>,
    /// `B`.
    pub angle_bits: Option<u64>,
}

impl BitOverrides {
    /// `base` with every set field replaced.
    pub fn apply(&self, base: BitParams) -> BitParams {
        BitParams {
            b_r: self.b_r.unwrap_or(base.b_r),
            n1: self.n1.unwrap_or(base.n1),
            n2: self.n2.unwrap_or(base.n2),
            angle_bits: self.angle_bits.unwrap_or(base.angle_bits),
        }
    }

    fn names(&self) -> Vec<&'static str> {
        [("b_r", self.b_r), ("n1", self.n1), ("n2", self.n2), ("angle_bits", self.angle_bits)]
            .into_iter()
            .filter(|(_, v)| v.is_some())
            .map(|(n, _)| n)
            .collect()
    }
}

/// Threshold flags; unset ones keep the command's base policy.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PolicyOverrides {
    /// Density cut.
    pub density: Option<f64>,
    /// D-tensor cut.
    pub d: Option<f64>,
    /// C-tensor cut.
    pub c: Option<f64>,
    /// Eigenvalue cut.
    pub eig: Option<f64>,
}

impl PolicyOverrides {
    /// `base` with every set field replaced.
    pub fn apply(&self, base: TruncationPolicy) -> TruncationPolicy {
        TruncationPolicy {
            density_threshold: self.density.unwrap_or(base.density_threshold),
            d_tensor_threshold: self.d.unwrap_or(base.d_tensor_threshold),
            c_tensor_threshold: self.c.unwrap_or(base.c_tensor_threshold),
            eigenvalue_threshold: self.eig.unwrap_or(base.eigenvalue_threshold),
        }
    }
}

fn kernel_for(ds: &BlochDataset, kernel: Option<KernelKind>) -> KernelKind {
    kernel.unwrap_or_else(|| ds.default_kernel())
}

fn system_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into())
}

/// Runs every dataset check. Exit status 1 for an unreadable file, 2 for
/// any finding; the diagnostics list is produced in every case.
pub fn cmd_validate(dataset: &Path) -> Result<Outcome, CliError> {
    let name = dataset.display().to_string();
    let (diagnostics, code) = match io::load_dataset(dataset) {
        Ok(ds) => {
            let d = ds.validate();
            let code = if d.is_empty() { 0 } else { 2 };
            (d.iter().map(DiagnosticJson::from).collect(), code)
        }
        Err(LoadError::Invalid(d)) => (d.iter().map(DiagnosticJson::from).collect(), 2),
        Err(LoadError::Io { source, .. }) => {
            (vec![DiagnosticJson { path: name.clone(), message: format!("I/O error: {source}") }], 1)
        }
    };
    let report = ValidationReport { dataset: name, ok: code == 0, diagnostics };
    Ok(Outcome { text: to_json(&report), code })
}

/// Settings of `estimate`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSettings {
    /// `None` picks the dataset's own kernel.
    pub kernel: Option<KernelKind>,
    /// Thresholds.
    pub policy: TruncationPolicy,
    /// Bit width flags.
    pub bits: BitOverrides,
    /// Target precision, Hartree.
    pub epsilon_qpe: f64,
    /// Include the on-site sign qubit.
    pub sign_qubit: bool,
}

impl Default for EstimateSettings {
    fn default() -> Self {
        EstimateSettings {
            kernel: None,
            policy: TruncationPolicy::default(),
            bits: BitOverrides::default(),
            epsilon_qpe: MEV_IN_HARTREE,
            sign_qubit: true,
        }
    }
}

/// Truncate, factorize, take the one-norm and cost the walk.
pub fn estimate(ds: &BlochDataset, system: &str, s: &EstimateSettings) -> Result<EstimateReport, Error> {
    if !(s.epsilon_qpe > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon_qpe must be > 0, got {}", s.epsilon_qpe)));
    }
    let kind = kernel_for(ds, s.kernel);
    let fact = factorize(ds, kind, &s.policy)?;
    let norm = lambda_total(&fact);
    let bits = s.bits.apply(BitParams::defaults_for(norm.lambda_total, s.epsilon_qpe));
    let options = ResourceOptions { sign_qubit: s.sign_qubit, ..ResourceOptions::default() };
    let r = total_resources(ds, &fact, &bits, s.epsilon_qpe, &norm, &options)?;
    let config = EstimateConfig {
        kernel: kernel_name(kind).into(),
        policy: s.policy.into(),
        bits: bits.into(),
        bits_overridden: s.bits.names(),
        epsilon_qpe: s.epsilon_qpe,
        epsilon_qpe_mev: s.epsilon_qpe / MEV_IN_HARTREE,
        objective: "gates",
        sign_qubit: s.sign_qubit,
        composition: r.composition.clone(),
    };
    let sizes = SizesJson {
        mesh: ds.mesh.dims(),
        n_k: ds.n_k(),
        n_atoms: ds.n_atoms(),
        n_b: ds.n_b,
        n_pw: ds.n_pw(),
        partial_waves: ds.atoms.iter().map(|a| a.n_a).collect(),
    };
    Ok(EstimateReport::new(system.into(), config, sizes, &norm, &r))
}

/// `estimate` on a dataset file.
pub fn cmd_estimate(dataset: &Path, s: &EstimateSettings, format: Format) -> Result<Outcome, CliError> {
    let ds = io::load_valid_dataset(dataset)?;
    let report = estimate(&ds, &system_name(dataset), s)?;
    let text = match format {
        Format::Json => to_json(&report),
        Format::Csv => to_csv(&[report.csv_row()]),
    };
    Ok(Outcome { text, code: 0 })
}

/// Factorization of a dataset file as JSON.
pub fn cmd_factorize(dataset: &Path, kernel: Option<KernelKind>, policy: &TruncationPolicy) -> Result<Outcome, CliError> {
    let ds = io::load_valid_dataset(dataset)?;
    let fact = factorize(&ds, kernel_for(&ds, kernel), policy)?;
    Ok(Outcome { text: io::factorization_to_string(&fact), code: 0 })
}

/// Settings of `verify`.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifySettings {
    /// `None` picks the dataset's own kernel.
    pub kernel: Option<KernelKind>,
    /// Thresholds used when the factorization is computed here.
    pub policy: TruncationPolicy,
    /// Largest accepted Fock-matrix and spectrum difference.
    pub tolerance: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings { kernel: None, policy: TruncationPolicy::zero(), tolerance: 1e-9 }
    }
}

/// Relative agreement required between the two `λ` evaluations.
pub const LAMBDA_RTOL: f64 = 1e-10;

/// Absolute slack in `λ ≥ spectral radius`.
pub const BOUND_SLACK: f64 = 1e-9;

/// Checks a factorization against the dense Fock-space oracle. With
/// `fact = None` the factorization is computed from `ds`.
pub fn verify(ds: &BlochDataset, fact: Option<LcuFactorization>, s: &VerifySettings) -> Result<VerifyReport, CliError> {
    let order = SpinOrbitalOrder::new(ds.n_k(), ds.n_b);
    let n = order.n_spin_orbitals();
    if n > SPIN_ORBITAL_CAP {
        return Err(CliError::Refused(format!(
            "refusing to verify: {n} spin orbitals exceed the dense oracle cap of {SPIN_ORBITAL_CAP} (2 N_b N_k <= {SPIN_ORBITAL_CAP})"
        )));
    }
    let from_file = fact.is_some();
    let kind = kernel_for(ds, s.kernel);
    let fact = match fact {
        Some(f) => {
            if f.mesh != ds.mesh || f.n_b != ds.n_b {
                return Err(CliError::Invalid(format!(
                    "factorization is for mesh {:?} with {} bands, dataset has mesh {:?} with {}",
                    f.mesh.dims(),
                    f.n_b,
                    ds.mesh.dims(),
                    ds.n_b
                )));
            }
            f
        }
        None => factorize(ds, kind, &s.policy)?,
    };
    let kind = if from_file { fact.kernel } else { kind };
    let sectors = (0..ds.n_k()).map(|q| kappa(ds, kind, q)).collect::<Result<Vec<_>, _>>()?;
    let direct = fock_from_integrals(&ds.h_one_body, &sectors, &ds.mesh)?;
    let lcu = fock_from_lcu(&fact)?;
    let fock_max_abs_diff = direct.max_abs_diff(&lcu);
    let (ed, el) = (direct.eigenvalues(), lcu.eigenvalues());
    let eigenvalue_max_diff = ed.iter().zip(&el).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let norm = lambda_total(&fact);
    let brute = lambda_bruteforce(&fact);
    let lambda_relative_diff = if norm.lambda_total == 0.0 && brute == 0.0 {
        0.0
    } else {
        (norm.lambda_total - brute).abs() / norm.lambda_total.abs().max(brute.abs())
    };
    let spectral_radius = lcu.spectral_radius_shifted(fact.energy_shift);
    let equivalence_ok = fock_max_abs_diff <= s.tolerance && eigenvalue_max_diff <= s.tolerance;
    let lambda_ok = lambda_relative_diff <= LAMBDA_RTOL;
    let bound_ok = norm.lambda_total + BOUND_SLACK >= spectral_radius;
    Ok(VerifyReport {
        spin_orbitals: n,
        kernel: kernel_name(kind).into(),
        policy: PolicyJson::from(fact.policy),
        factorization_from_file: from_file,
        fock_max_abs_diff,
        eigenvalue_max_diff,
        tolerance: s.tolerance,
        lambda_total: norm.lambda_total,
        lambda_bruteforce: brute,
        lambda_relative_diff,
        spectral_radius,
        equivalence_ok,
        lambda_ok,
        bound_ok,
        passed: equivalence_ok && lambda_ok && bound_ok,
    })
}

/// `verify` on files.
pub fn cmd_verify(dataset: &Path, factorization: Option<&Path>, s: &VerifySettings) -> Result<Outcome, CliError> {
    let ds = io::load_valid_dataset(dataset)?;
    let fact = factorization.map(io::load_factorization).transpose()?;
    let report = verify(&ds, fact, s)?;
    Ok(Outcome { text: to_json(&report), code: if report.passed { 0 } else { 2 } })
}

/// Settings of `bench`.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchSettings {
    /// Grown size.
    pub axis: Axis,
    /// `None` uses the axis defaults.
    pub sizes: Option<Vec<usize>>,
    /// Seed shared by every point.
    pub seed: u64,
    /// Worker threads; `None` lets rayon decide.
    pub threads: Option<usize>,
    /// Threshold flags.
    pub policy: PolicyOverrides,
    /// Bit width flags.
    pub bits: BitOverrides,
    /// Target precision flag, Hartree.
    pub epsilon_qpe: Option<f64>,
}

/// Effective configuration of a bench run.
pub fn bench_config(s: &BenchSettings) -> BenchConfig {
    let base = BenchConfig::default_for(s.axis);
    BenchConfig {
        policy: s.policy.apply(base.policy),
        bits: s.bits.apply(base.bits),
        epsilon_qpe: s.epsilon_qpe.unwrap_or(base.epsilon_qpe),
        ..base
    }
}

/// Runs the points of a series in parallel and fits them.
pub fn bench(s: &BenchSettings) -> Result<(ScalingSeries, BenchConfig), CliError> {
    let config = bench_config(s);
    config.policy.check()?;
    config.bits.check()?;
    let sizes = s.sizes.clone().unwrap_or_else(|| BenchConfig::default_sizes(s.axis));
    check_sizes(s.axis, &sizes, &config)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = s.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;
    let points = pool.install(|| {
        sizes.par_iter().map(|&n| run_point(s.axis, n, &config, s.seed)).collect::<Result<Vec<_>, _>>()
    })?;
    Ok((assemble_series(s.axis, points)?, config))
}

/// Writes `scaling_<axis>.csv` and `scaling_<axis>_fit.json` under `out_dir`.
pub fn cmd_bench(s: &BenchSettings, out_dir: &Path) -> Result<Outcome, CliError> {
    let (series, c) = bench(s)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let name = series.axis.name();
    let csv_path = out_dir.join(format!("scaling_{name}.csv"));
    let fit_path = out_dir.join(format!("scaling_{name}_fit.json"));
    io::write_text(&csv_path, &to_csv(&bench_rows(&series)))?;
    let config = BenchConfigJson {
        n_b: c.n_b,
        mesh_edge: c.mesh_edge,
        n_atoms: c.n_atoms,
        n_a: c.n_a,
        n_pw: c.n_pw,
        policy: c.policy.into(),
        bits: c.bits.into(),
        epsilon_qpe: c.epsilon_qpe,
        profile: "physical",
    };
    let summary = BenchSummary::new(&series, s.seed, config);
    io::write_text(&fit_path, &to_json(&summary))?;
    Ok(Outcome { text: format!("{}\n{}\n", csv_path.display(), fit_path.display()), code: 0 })
}

/// Settings of `synth`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSettings {
    /// RNG seed.
    pub seed: u64,
    /// Sizes.
    pub sizes: SynthSizes,
    /// Amplitude law.
    pub profile: Profile,
}

/// Writes a synthetic dataset file.
pub fn cmd_synth(s: &SynthSettings, out: &PathBuf) -> Result<Outcome, CliError> {
    let ds = synth_dataset(s.seed, &s.sizes, s.profile)?;
    io::save_dataset(&ds, out)?;
    Ok(Outcome { text: format!("{}\n", out.display()), code: 0 })
}
