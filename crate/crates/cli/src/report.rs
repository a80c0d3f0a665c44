//! Machine-readable reports written by the commands.

use crate::io::PolicyJson;
use blochpaw_core::bench::{PowerFit, ScalingSeries};
use blochpaw_core::dataset::Diagnostic;
use blochpaw_core::norm::NormBreakdown;
use blochpaw_core::resources::{BitParams, LabelCounts, QroamParams, ResourceReport, STAGE_NAMES};
use blochpaw_core::MEV_IN_HARTREE;
use serde::Serialize;

/// Output of `validate`.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    /// Dataset path as given.
    pub dataset: String,
    /// True when there are no diagnostics.
    pub ok: bool,
    /// Findings.
    pub diagnostics: Vec<DiagnosticJson>,
}

/// One finding.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticJson {
    /// Array path.
    pub path: String,
    /// Description.
    pub message: String,
}

impl From<&Diagnostic> for DiagnosticJson {
    fn from(d: &Diagnostic) -> Self {
        DiagnosticJson { path: d.path.clone(), message: d.message.clone() }
    }
}

/// Energy units of every field.
#[derive(Debug, Clone, Serialize)]
pub struct Units {
    /// Always `"hartree"`.
    pub energy: &'static str,
    /// Conversion used for meV values.
    pub hartree_per_mev: f64,
}

impl Default for Units {
    fn default() -> Self {
        Units { energy: "hartree", hartree_per_mev: MEV_IN_HARTREE }
    }
}

/// Bit widths and where they came from.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BitsJson {
    /// `b_r`.
    pub b_r: u64,
    /// `N_1`.
    pub n1: u64,
    /// `N_2`.
    pub n2: u64,
    /// `B`.
    pub angle_bits: u64,
}

impl From<BitParams> for BitsJson {
    fn from(b: BitParams) -> Self {
        BitsJson { b_r: b.b_r, n1: b.n1, n2: b.n2, angle_bits: b.angle_bits }
    }
}

/// Every setting an estimate depends on.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateConfig {
    /// Coulomb kernel used.
    pub kernel: String,
    /// Thresholds applied.
    pub policy: PolicyJson,
    /// Bit widths used.
    pub bits: BitsJson,
    /// Widths set by flags; the rest are defaults.
    pub bits_overridden: Vec<&'static str>,
    /// Target precision, Hartree.
    pub epsilon_qpe: f64,
    /// Target precision, meV.
    pub epsilon_qpe_mev: f64,
    /// QROAM objective.
    pub objective: &'static str,
    /// Whether `b_o` carries the on-site sign qubit.
    pub sign_qubit: bool,
    /// How `toffoli_total` is formed.
    pub composition: String,
}

/// Sizes of the input.
#[derive(Debug, Clone, Serialize)]
pub struct SizesJson {
    /// k-point mesh.
    pub mesh: [usize; 3],
    /// `N_k`.
    pub n_k: usize,
    /// Number of atoms.
    pub n_atoms: usize,
    /// Bands per k-point.
    pub n_b: usize,
    /// Plane waves.
    pub n_pw: usize,
    /// Partial waves per atom.
    pub partial_waves: Vec<usize>,
}

/// The one-norm split.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NormJson {
    /// One-body part.
    pub lambda_one_body: f64,
    /// Smooth two-body part.
    pub lambda_soft: f64,
    /// On-site two-body part.
    pub lambda_hard: f64,
    /// Two-body total.
    pub lambda_two_body: f64,
    /// Everything.
    pub lambda_total: f64,
}

impl From<&NormBreakdown> for NormJson {
    fn from(n: &NormBreakdown) -> Self {
        NormJson {
            lambda_one_body: n.lambda_one_body,
            lambda_soft: n.lambda_soft(),
            lambda_hard: n.lambda_hard(),
            lambda_two_body: n.lambda_two_body,
            lambda_total: n.lambda_total,
        }
    }
}

/// Label counts and register widths.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CountsJson {
    /// `N_k`.
    pub n_kpoints: u64,
    /// `N_b`.
    pub n_b: u64,
    /// Channels per transfer.
    pub m: u64,
    /// `L`.
    pub l: u64,
    /// `⌈log₂ L⌉`.
    pub n_l: u64,
    /// 2-adic valuation of `L`.
    pub eta: u64,
    /// `⌈log₂ N_k⌉`.
    pub n_k: u64,
    /// Total two-body rank.
    pub lr: u64,
    /// Average rank.
    pub r_avg: f64,
    /// Largest one-body rank.
    pub r0: u64,
    /// Largest block rank.
    pub r_max: u64,
    /// Rank register width.
    pub n_r: u64,
    /// Combined rank register width.
    pub n_lr: u64,
    /// Outer data width.
    pub b_o: u64,
    /// Outer keep width.
    pub b_p1: u64,
    /// Inner keep width.
    pub b_p2: u64,
}

impl From<&LabelCounts> for CountsJson {
    fn from(c: &LabelCounts) -> Self {
        CountsJson {
            n_kpoints: c.n_kpoints,
            n_b: c.n_b,
            m: c.m,
            l: c.l,
            n_l: c.n_l,
            eta: c.eta,
            n_k: c.n_k,
            lr: c.lr,
            r_avg: c.r_avg,
            r0: c.r0,
            r_max: c.r_max,
            n_r: c.n_r,
            n_lr: c.n_lr,
            b_o: c.b_o,
            b_p1: c.b_p1,
            b_p2: c.b_p2,
        }
    }
}

/// QROAM block sizes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QroamJson {
    /// Outer state preparation.
    pub k_p1: u64,
    /// Outer data lookup.
    pub k_o: u64,
    /// Inner state preparation.
    pub k_p2: u64,
    /// Givens-angle lookup.
    pub k_r: u64,
    /// Uncompute of `k_p1`.
    pub kp_p1: u64,
    /// Uncompute of `k_o`.
    pub kp_o: u64,
    /// Uncompute of `k_p2`.
    pub kp_p2: u64,
    /// Uncompute of `k_p2` in the squaring repeat.
    pub kp_p2b: u64,
    /// Uncompute of `k_r`.
    pub kp_r: u64,
    /// Uncompute of `k_r` in the squaring repeat.
    pub kp_rb: u64,
}

impl From<QroamParams> for QroamJson {
    fn from(p: QroamParams) -> Self {
        QroamJson {
            k_p1: p.k_p1,
            k_o: p.k_o,
            k_p2: p.k_p2,
            k_r: p.k_r,
            kp_p1: p.kp_p1,
            kp_o: p.kp_o,
            kp_p2: p.kp_p2,
            kp_p2b: p.kp_p2b,
            kp_r: p.kp_r,
            kp_rb: p.kp_rb,
        }
    }
}

/// One stage of a walk step.
#[derive(Debug, Clone, Serialize)]
pub struct StageJson {
    /// Stage name.
    pub name: &'static str,
    /// Toffoli count.
    pub toffoli: i64,
}

/// Output of `estimate`.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    /// Label for the CSV row.
    pub system: String,
    /// Units.
    pub units: Units,
    /// Effective configuration.
    pub config: EstimateConfig,
    /// Input sizes.
    pub sizes: SizesJson,
    /// One-norm.
    pub norm: NormJson,
    /// Label counts.
    pub counts: CountsJson,
    /// QROAM block sizes chosen.
    pub qroam: QroamJson,
    /// Per-stage Toffoli counts.
    pub stages: Vec<StageJson>,
    /// Toffolis per walk step.
    pub toffoli_per_step: i64,
    /// Logical qubits.
    pub qubits: i64,
    /// QPE iterations `I`.
    pub qpe_iterations: u64,
    /// `I · toffoli_per_step`.
    pub toffoli_total: u128,
}

impl EstimateReport {
    /// Assembles the report from pipeline outputs.
    pub fn new(
        system: String,
        config: EstimateConfig,
        sizes: SizesJson,
        norm: &NormBreakdown,
        r: &ResourceReport,
    ) -> Self {
        EstimateReport {
            system,
            units: Units::default(),
            config,
            sizes,
            norm: norm.into(),
            counts: (&r.counts).into(),
            qroam: r.params.into(),
            stages: STAGE_NAMES
                .iter()
                .zip(r.stages.values.iter())
                .map(|(name, &toffoli)| StageJson { name, toffoli })
                .collect(),
            toffoli_per_step: r.toffoli_per_step,
            qubits: r.qubits_total,
            qpe_iterations: r.qpe_iterations,
            toffoli_total: r.toffoli_total,
        }
    }

    /// Flat CSV row.
    pub fn csv_row(&self) -> EstimateRow {
        let (b, q) = (self.config.bits, self.qroam);
        EstimateRow {
            system: self.system.clone(),
            n_k: self.sizes.n_k,
            n_a: self.sizes.n_atoms,
            n_b: self.sizes.n_b,
            lambda: self.norm.lambda_total,
            qubits: self.qubits,
            toffoli_per_step: self.toffoli_per_step,
            iterations: self.qpe_iterations,
            toffoli_total: self.toffoli_total,
            b_r: b.b_r,
            n1: b.n1,
            n2: b.n2,
            angle_bits: b.angle_bits,
            k_p1: q.k_p1,
            k_o: q.k_o,
            k_p2: q.k_p2,
            k_r: q.k_r,
            kp_p1: q.kp_p1,
            kp_o: q.kp_o,
            kp_p2: q.kp_p2,
            kp_p2b: q.kp_p2b,
            kp_r: q.kp_r,
            kp_rb: q.kp_rb,
        }
    }
}

/// CSV form of [`EstimateReport`].
#[derive(Debug, Clone, Serialize)]
pub struct EstimateRow {
    /// System label.
    pub system: String,
    /// k-points.
    #[serde(rename = "N_k")]
    pub n_k: usize,
    /// Atoms.
    #[serde(rename = "N_a")]
    pub n_a: usize,
    /// Bands.
    #[serde(rename = "N_b")]
    pub n_b: usize,
    /// `λ`, Hartree.
    pub lambda: f64,
    /// Logical qubits.
    pub qubits: i64,
    /// Toffolis per step.
    pub toffoli_per_step: i64,
    /// QPE iterations.
    #[serde(rename = "I")]
    pub iterations: u64,
    /// Total Toffolis.
    pub toffoli_total: u128,
    /// `b_r`.
    pub b_r: u64,
    /// `N_1`.
    pub n1: u64,
    /// `N_2`.
    pub n2: u64,
    /// `B`.
    pub angle_bits: u64,
    /// QROAM sizes.
    pub k_p1: u64,
    pub k_o: u64,
    pub k_p2: u64,
    pub k_r: u64,
    pub kp_p1: u64,
    pub kp_o: u64,
    pub kp_p2: u64,
    pub kp_p2b: u64,
    pub kp_r: u64,
    pub kp_rb: u64,
}

/// Header plus rows, `\n` terminated.
pub fn to_csv<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory CSV");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV")).expect("UTF-8 CSV")
}

/// Output of `verify`.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    /// `2 N_b N_k`.
    pub spin_orbitals: usize,
    /// Kernel used.
    pub kernel: String,
    /// Thresholds of the factorization checked.
    pub policy: PolicyJson,
    /// Whether the factorization was read from a file.
    pub factorization_from_file: bool,
    /// Largest entry of `|H_lcu − H_direct|`.
    pub fock_max_abs_diff: f64,
    /// Largest difference of sorted spectra.
    pub eigenvalue_max_diff: f64,
    /// Tolerance on both differences above.
    pub tolerance: f64,
    /// Closed-form `λ`.
    pub lambda_total: f64,
    /// Term-by-term `λ`.
    pub lambda_bruteforce: f64,
    /// `|λ − λ_brute| / λ`.
    pub lambda_relative_diff: f64,
    /// `max |eig(H_lcu) − energy_shift|`.
    pub spectral_radius: f64,
    /// Fock operators agree.
    pub equivalence_ok: bool,
    /// Both `λ` agree to 1e-10 relative.
    pub lambda_ok: bool,
    /// `λ + 1e-9 ≥ spectral_radius`.
    pub bound_ok: bool,
    /// All of the above.
    pub passed: bool,
}

/// One CSV row of a series.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BenchRow {
    /// Axis value.
    pub size: usize,
    /// Two-body one-norm.
    pub lambda2: f64,
    /// Toffolis per walk step.
    pub toffoli_per_query: i64,
    /// Logical qubits.
    pub qubits: i64,
}

/// A fit as written.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FitJson {
    /// Log-log slope.
    pub exponent: f64,
    /// Log-log intercept.
    pub intercept: f64,
    /// `r²`.
    pub r_squared: f64,
}

impl From<PowerFit> for FitJson {
    fn from(f: PowerFit) -> Self {
        FitJson { exponent: f.exponent, intercept: f.intercept, r_squared: f.r_squared }
    }
}

/// Settings a series was run with.
#[derive(Debug, Clone, Serialize)]
pub struct BenchConfigJson {
    /// Bands (per atom on the Na axis).
    pub n_b: usize,
    /// Mesh edge on the Nb axis.
    pub mesh_edge: usize,
    /// Atoms on the Nb and Nk axes.
    pub n_atoms: usize,
    /// Partial waves per atom.
    pub n_a: usize,
    /// Plane waves (per atom on the Na axis).
    pub n_pw: usize,
    /// Thresholds.
    pub policy: PolicyJson,
    /// Fixed bit widths.
    pub bits: BitsJson,
    /// Target precision, Hartree.
    pub epsilon_qpe: f64,
    /// Data profile.
    pub profile: &'static str,
}

/// Fit summary of a series.
#[derive(Debug, Clone, Serialize)]
pub struct BenchSummary {
    /// `nb`, `nk` or `na`.
    pub axis: &'static str,
    /// RNG seed shared by every point.
    pub seed: u64,
    /// Sizes, ascending.
    pub sizes: Vec<usize>,
    /// Settings.
    pub config: BenchConfigJson,
    /// Fit of `lambda2`.
    pub lambda2: FitJson,
    /// Fit of `toffoli_per_query`.
    pub toffoli_per_query: FitJson,
    /// Fit of `qubits`.
    pub qubits: FitJson,
}

impl BenchSummary {
    /// Summary of `s`.
    pub fn new(s: &ScalingSeries, seed: u64, config: BenchConfigJson) -> Self {
        BenchSummary {
            axis: s.axis.name(),
            seed,
            sizes: s.points.iter().map(|p| p.size).collect(),
            config,
            lambda2: s.fit_lambda2.into(),
            toffoli_per_query: s.fit_toffoli.into(),
            qubits: s.fit_qubits.into(),
        }
    }
}

/// CSV rows of a series.
pub fn bench_rows(s: &ScalingSeries) -> Vec<BenchRow> {
    s.points
        .iter()
        .map(|p| BenchRow { size: p.size, lambda2: p.lambda2, toffoli_per_query: p.toffoli_per_query, qubits: p.qubits })
        .collect()
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(x: &T) -> String {
    let mut s = serde_json::to_string_pretty(x).expect("serializable report");
    s.push('\n');
    s
}
