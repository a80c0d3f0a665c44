//! Toffoli and logical-qubit cost of one qubitization walk step, QROAM
//! parameter optimization and QPE totals.

use crate::dataset::BlochDataset;
use crate::lcu::LcuFactorization;
use crate::linalg::{ceil_div, clog2};
use crate::norm::NormBreakdown;
use crate::Error;
use alloc::format;
use alloc::string::String;

/// Classical bit widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BitParams {
    /// Rotation bits for amplitude amplification in state preparation `b_r`.
    pub b_r: u64,
    /// Keep-register bits of the outer state preparation `N_1`.
    pub n1: u64,
    /// Keep-register bits of the inner state preparation `N_2`.
    pub n2: u64,
    /// Givens-angle bits `B`.
    pub angle_bits: u64,
}

/// Upper limit on the automatically chosen keep-register width.
pub const KEEP_BITS_CAP: u64 = 32;

impl BitParams {
    /// `b_r = 7`, `B = 16`, `N_1 = N_2 = ⌈log₂(2√2 λ/ε)⌉` clamped to `[1, 32]`.
    pub fn defaults_for(lambda: f64, epsilon_qpe: f64) -> Self {
        let keep = keep_bits(lambda, epsilon_qpe);
        BitParams { b_r: 7, n1: keep, n2: keep, angle_bits: 16 }
    }

    /// Rejects zero widths.
    pub fn check(&self) -> Result<(), Error> {
        if self.b_r == 0 || self.n1 == 0 || self.n2 == 0 || self.angle_bits == 0 {
            return Err(Error::InvalidParameter(format!("bit widths must be >= 1, got {self:?}")));
        }
        Ok(())
    }
}

/// `⌈log₂(2√2 λ/ε)⌉` clamped to `[1, 32]`.
pub fn keep_bits(lambda: f64, epsilon_qpe: f64) -> u64 {
    let x = 2.0 * core::f64::consts::SQRT_2 * lambda / epsilon_qpe;
    if !(x > 2.0) {
        return 1;
    }
    (libm::ceil(libm::log2(x)) as u64).clamp(1, KEEP_BITS_CAP)
}

/// QROAM block sizes; all powers of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QroamParams {
    /// Outer state preparation.
    pub k_p1: u64,
    /// Outer data lookup.
    pub k_o: u64,
    /// Inner state preparation.
    pub k_p2: u64,
    /// Givens-angle lookup.
    pub k_r: u64,
    /// Outer state preparation, uncompute.
    pub kp_p1: u64,
    /// Outer data lookup, uncompute.
    pub kp_o: u64,
    /// Inner state preparation, uncompute.
    pub kp_p2: u64,
    /// Inner state preparation, uncompute inside the squaring repeat.
    pub kp_p2b: u64,
    /// Givens-angle lookup, uncompute.
    pub kp_r: u64,
    /// Givens-angle lookup, uncompute inside the squaring repeat.
    pub kp_rb: u64,
}

impl QroamParams {
    /// Every block size 1.
    pub fn ones() -> Self {
        QroamParams { k_p1: 1, k_o: 1, k_p2: 1, k_r: 1, kp_p1: 1, kp_o: 1, kp_p2: 1, kp_p2b: 1, kp_r: 1, kp_rb: 1 }
    }

    /// All ten values in declaration order.
    pub fn as_array(&self) -> [u64; 10] {
        [self.k_p1, self.k_o, self.k_p2, self.k_r, self.kp_p1, self.kp_o, self.kp_p2, self.kp_p2b, self.kp_r, self.kp_rb]
    }

    /// Inverse of [`QroamParams::as_array`].
    pub fn from_array(a: [u64; 10]) -> Self {
        QroamParams {
            k_p1: a[0],
            k_o: a[1],
            k_p2: a[2],
            k_r: a[3],
            kp_p1: a[4],
            kp_o: a[5],
            kp_p2: a[6],
            kp_p2b: a[7],
            kp_r: a[8],
            kp_rb: a[9],
        }
    }

    /// Parameter names in array order.
    pub const NAMES: [&'static str; 10] =
        ["k_p1", "k_o", "k_p2", "k_r", "kp_p1", "kp_o", "kp_p2", "kp_p2b", "kp_r", "kp_rb"];

    /// Rejects values that are not powers of two.
    pub fn check(&self) -> Result<(), Error> {
        for (n, v) in Self::NAMES.iter().zip(self.as_array()) {
            if !v.is_power_of_two() {
                return Err(Error::InvalidParameter(format!("{n} = {v} is not a power of two")));
            }
        }
        Ok(())
    }
}

/// Label counts and register widths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelCounts {
    /// `N_k`.
    pub n_kpoints: u64,
    /// `N_b`.
    pub n_b: u64,
    /// `M = N_pw + ½ Σ_a n_a (n_a + 1)`.
    pub m: u64,
    /// `L = 2 N_k M`.
    pub l: u64,
    /// `⌈log₂ L⌉`.
    pub n_l: u64,
    /// Largest `η` with `2^η | L`.
    pub eta: u64,
    /// `⌈log₂ N_k⌉`.
    pub n_k: u64,
    /// `L · R_avg`, the total two-body rank.
    pub lr: u64,
    /// `R_avg = lr / L`.
    pub r_avg: f64,
    /// Largest one-body rank over k.
    pub r0: u64,
    /// Largest per-block rank.
    pub r_max: u64,
    /// `⌈log₂ r_max⌉`.
    pub n_r: u64,
    /// `⌈log₂(L R_avg + N_k R0)⌉`.
    pub n_lr: u64,
    /// Outer data width `n_k + n_R + n_LR + b_r + 1 (+1 sign)`.
    pub b_o: u64,
    /// `n_L + N_1`.
    pub b_p1: u64,
    /// `n_L + N_2`.
    pub b_p2: u64,
    /// Whether `b_o` carries the sign qubit of the on-site terms.
    pub sign_qubit: bool,
}

impl LabelCounts {
    /// Counts from raw sizes. `pairs` is `½ Σ_a n_a (n_a + 1)`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        n_kpoints: u64,
        n_b: u64,
        n_pw: u64,
        pairs: u64,
        lr: u64,
        r0: u64,
        r_max: u64,
        bits: &BitParams,
        sign_qubit: bool,
    ) -> Self {
        let m = n_pw + pairs;
        let l = 2 * n_kpoints * m;
        let n_l = clog2(l) as u64;
        let eta = if l == 0 { 0 } else { l.trailing_zeros() as u64 };
        let n_k = clog2(n_kpoints) as u64;
        let n_r = clog2(r_max) as u64;
        let n_lr = clog2(lr + n_kpoints * r0) as u64;
        let b_o = n_k + n_r + n_lr + bits.b_r + 1 + u64::from(sign_qubit);
        LabelCounts {
            n_kpoints,
            n_b,
            m,
            l,
            n_l,
            eta,
            n_k,
            lr,
            r_avg: if l == 0 { 0.0 } else { lr as f64 / l as f64 },
            r0,
            r_max,
            n_r,
            n_lr,
            b_o,
            b_p1: n_l + bits.n1,
            b_p2: n_l + bits.n2,
            sign_qubit,
        }
    }

    /// `L R_avg + N_k R0`.
    pub fn full(&self) -> u64 {
        self.lr + self.n_kpoints * self.r0
    }
}

/// Counts for a dataset and its factorization.
pub fn label_counts(ds: &BlochDataset, fact: &LcuFactorization, bits: &BitParams, sign_qubit: bool) -> LabelCounts {
    let pairs: u64 = ds.atoms.iter().map(|a| (a.n_a * (a.n_a + 1) / 2) as u64).sum();
    let lr: u64 = fact.soft_blocks.iter().chain(&fact.hard_blocks).map(|b| b.rank as u64).sum();
    let r0 = fact.one_body.iter().map(|o| o.rank as u64).max().unwrap_or(0);
    let r_max = fact.soft_blocks.iter().chain(&fact.hard_blocks).map(|b| b.rank as u64).max().unwrap_or(0).max(r0);
    LabelCounts::from_parts(ds.n_k() as u64, ds.n_b as u64, ds.n_pw() as u64, pairs, lr, r0, r_max, bits, sign_qubit)
}

/// QROAM gates and qubits for a raw numerator.
pub fn qroam_cost_raw(numerator: u64, n_b: u64, angle_bits: u64, k: u64) -> Result<(u64, u64), Error> {
    if !k.is_power_of_two() {
        return Err(Error::InvalidParameter(format!("QROAM parameter {k} is not a power of two")));
    }
    let blocks = ceil_div(numerator, k);
    Ok((blocks + 4 * n_b * angle_bits * (k - 1), clog2(blocks) as u64 + n_b * angle_bits * k))
}

/// `(⌈(L R_avg + N_b N_k)/K⌉ + 4 N_b B (K−1), ⌈log₂⌈(L R_avg + N_b N_k)/K⌉⌉ + N_b B K)`.
pub fn qroam_cost(counts: &LabelCounts, bits: &BitParams, k: u64) -> Result<(u64, u64), Error> {
    qroam_cost_raw(counts.lr + counts.n_b * counts.n_kpoints, counts.n_b, bits.angle_bits, k)
}

/// Names of the entries of [`StageCosts::values`].
pub const STAGE_NAMES: [&str; 8] = [
    "outer_prep",
    "inner_prep",
    "swaps_givens",
    "inner_cleanup",
    "oaa_reflection",
    "squaring",
    "outer_cleanup",
    "reflect",
];

/// Per-stage Toffoli counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageCosts {
    /// Stages 1–7 and the walk reflection, in [`STAGE_NAMES`] order.
    pub values: [i64; 8],
}

impl StageCosts {
    /// Sum over all entries.
    pub fn total(&self) -> i64 {
        self.values.iter().sum()
    }
}

fn cd(a: u64, b: u64) -> i64 {
    ceil_div(a, b) as i64
}

struct Widths {
    n_l: i64,
    eta: i64,
    n_k: i64,
    n_r: i64,
    n_lr: i64,
    b_o: i64,
    b_p1: i64,
    b_p2: i64,
    b_r: i64,
    n1: i64,
    n2: i64,
    nb: i64,
    bb: i64,
    nkp: i64,
}

fn widths(c: &LabelCounts, bits: &BitParams) -> Widths {
    Widths {
        n_l: c.n_l as i64,
        eta: c.eta as i64,
        n_k: c.n_k as i64,
        n_r: c.n_r as i64,
        n_lr: c.n_lr as i64,
        b_o: c.b_o as i64,
        b_p1: c.b_p1 as i64,
        b_p2: c.b_p2 as i64,
        b_r: bits.b_r as i64,
        n1: bits.n1 as i64,
        n2: bits.n2 as i64,
        nb: c.n_b as i64,
        bb: bits.angle_bits as i64,
        nkp: c.n_kpoints as i64,
    }
}

/// Stage-by-stage Toffoli counts. The squaring stage repeats stages 2–4 with
/// `L R_avg + N_k R0 ↦ L R_avg`; its Givens lookup reuses the fan-out already
/// paid for in stage 3, so the `(4 N_b B + n_k)(k_r − 1)` term appears once.
pub fn stage_costs(c: &LabelCounts, bits: &BitParams, p: &QroamParams) -> StageCosts {
    let w = widths(c, bits);
    let (l1, full, lr) = (c.l + 1, c.full(), c.lr);
    let k = |x: u64| x as i64;
    let s1 = 3 * w.n_l - 3 * w.eta + 2 * w.b_r - 9
        + cd(l1, p.k_p1)
        + w.b_p1 * (k(p.k_p1) - 1)
        + w.n1
        + w.n_l
        + cd(l1, p.k_o)
        + w.b_o * (k(p.k_o) - 1);
    let s2 = |x: u64| {
        7 * w.n_r + 2 * w.b_r - 6 + w.n_lr - 1 + cd(x, p.k_p2) + w.b_p2 * (k(p.k_p2) - 1) + w.n2 + w.n_r + 1
    };
    let s3 = |x: u64, fanout: bool| {
        cd(x, p.k_r)
            + if fanout { (4 * w.nb * w.bb + w.n_k) * (k(p.k_r) - 1) } else { 0 }
            + 2 * (w.n_lr - 1)
            + 8 * w.nb * (w.bb - 2)
            + 3 * w.nb * w.nkp
            + 6 * w.n_k
    };
    let s4 = |x: u64, kr: u64, kp2: u64| {
        cd(x, kr) + k(kr) + 7 * w.n_r + 2 * w.b_r - 6 + cd(x, kp2) + k(kp2) + w.n_lr - 1 + w.n2 + w.n_r + 1
    };
    let s5 = w.n_r + w.n2;
    let s6 = s2(lr) + s3(lr, false) + s4(lr, p.kp_rb, p.kp_p2b);
    let s7 = 3 * w.n_l - 3 * w.eta + 2 * w.b_r - 9 + cd(l1, p.kp_p1) + k(p.kp_p1) + w.n1 + w.n_l + cd(l1, p.kp_o)
        + k(p.kp_o);
    let reflect = w.n_l + w.n_r + w.n1 + w.n2 + 1 + 2;
    StageCosts { values: [s1, s2(full), s3(full, true), s4(full, p.kp_r, p.kp_p2), s5, s6, s7, reflect] }
}

/// Closed-form Toffoli count per walk step. With `kp_p2b = kp_p2` and
/// `kp_rb = kp_r` it matches the stage sum term for term.
pub fn toffoli_per_step(c: &LabelCounts, bits: &BitParams, p: &QroamParams) -> i64 {
    let w = widths(c, bits);
    let (l1, full, lr) = (c.l + 1, c.full(), c.lr);
    let k = |x: u64| x as i64;
    cd(l1, p.k_p1) + cd(l1, p.kp_p1) + cd(l1, p.k_o) + cd(l1, p.kp_o)
        + cd(full, p.k_p2) + cd(lr, p.k_p2)
        + cd(full, p.k_r) + cd(lr, p.k_r)
        + cd(full, p.kp_r) + cd(lr, p.kp_rb)
        + cd(full, p.kp_p2) + cd(lr, p.kp_p2b)
        + w.b_p1 * (k(p.k_p1) - 1) + w.b_o * (k(p.k_o) - 1) + 2 * w.b_p2 * (k(p.k_p2) - 1)
        + (4 * w.nb * w.bb + w.n_k) * (k(p.k_r) - 1)
        + k(p.kp_p1) + k(p.kp_o) + k(p.kp_r) + k(p.kp_rb) + k(p.kp_p2) + k(p.kp_p2b)
        + 9 * w.n_l + 34 * w.n_r + 8 * w.n_lr + 3 * w.n1 + 6 * w.n2 + 12 * w.b_r - 6 * w.eta
        + 16 * w.nb * w.bb - 32 * w.nb + 6 * w.nb * w.nkp + 12 * w.n_k - 43
}

/// Logical qubits for `qpe_iterations` walk steps.
pub fn qubits_total(c: &LabelCounts, bits: &BitParams, p: &QroamParams, qpe_iterations: u64) -> i64 {
    let w = widths(c, bits);
    2 * w.nkp * c.r0 as i64 + w.nb + 2 * w.n_l + w.n_r + 2 * w.n1 + w.n2 + w.bb + w.b_o + w.b_p2
        + 2 * clog2(ceil_div(c.full(), p.k_r)) as i64
        + 2 * p.k_r as i64 * w.nb * w.bb
        + 2 * clog2(qpe_iterations.saturating_add(1)) as i64
        + 9
}

/// What [`optimize_qroam`] minimizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// Toffoli count per step.
    Gates,
    /// Logical qubits.
    Qubits,
    /// `gates + weight · qubits`.
    Weighted(f64),
}

/// Terms of the per-step Toffoli and qubit totals that depend on parameter
/// `idx` (in [`QroamParams::as_array`] order) when it takes value `k`.
fn param_terms(c: &LabelCounts, bits: &BitParams, idx: usize, k: u64) -> (i64, i64) {
    let (l1, full, lr) = (c.l + 1, c.full(), c.lr);
    let ki = k as i64;
    let nbb = (c.n_b * bits.angle_bits) as i64;
    match idx {
        0 => (cd(l1, k) + c.b_p1 as i64 * (ki - 1), 0),
        1 => (cd(l1, k) + c.b_o as i64 * (ki - 1), 0),
        2 => (cd(full, k) + cd(lr, k) + 2 * c.b_p2 as i64 * (ki - 1), 0),
        3 => (
            cd(full, k) + cd(lr, k) + (4 * nbb + c.n_k as i64) * (ki - 1),
            2 * clog2(ceil_div(full, k)) as i64 + 2 * ki * nbb,
        ),
        4 | 5 => (cd(l1, k) + ki, 0),
        6 | 8 => (cd(full, k) + ki, 0),
        7 | 9 => (cd(lr, k) + ki, 0),
        _ => unreachable!("ten QROAM parameters"),
    }
}

fn score(objective: Objective, terms: (i64, i64)) -> f64 {
    match objective {
        Objective::Gates => terms.0 as f64,
        Objective::Qubits => terms.1 as f64,
        Objective::Weighted(w) => terms.0 as f64 + w * terms.1 as f64,
    }
}

/// Largest power of two worth scanning for parameter `idx`.
fn scan_limit(c: &LabelCounts, idx: usize) -> u64 {
    let n = match idx {
        0 | 1 | 4 | 5 => c.l + 1,
        2 | 3 | 6 | 8 => c.full(),
        _ => c.lr,
    };
    1u64 << clog2(n.max(1))
}

/// Exhaustive power-of-two scan. Each parameter enters the totals through
/// separate additive terms, so scanning them one at a time finds the joint
/// optimum; ties go to the smaller value.
pub fn optimize_qroam(c: &LabelCounts, bits: &BitParams, objective: Objective) -> QroamParams {
    let mut best = [1u64; 10];
    for (idx, slot) in best.iter_mut().enumerate() {
        let mut k = 1u64;
        let mut best_score = score(objective, param_terms(c, bits, idx, 1));
        let limit = scan_limit(c, idx);
        while k < limit {
            k *= 2;
            let s = score(objective, param_terms(c, bits, idx, k));
            if s < best_score {
                best_score = s;
                *slot = k;
            }
        }
    }
    QroamParams::from_array(best)
}

/// QPE iteration count `⌈π λ / ε⌉`.
pub fn qpe_iterations(lambda: f64, epsilon_qpe: f64) -> Result<u64, Error> {
    if !(epsilon_qpe > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon_qpe must be > 0, got {epsilon_qpe}")));
    }
    Ok(libm::ceil(core::f64::consts::PI * lambda / epsilon_qpe) as u64)
}

/// Full cost report.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceReport {
    /// Label counts and widths.
    pub counts: LabelCounts,
    /// Bit widths used.
    pub bits: BitParams,
    /// QROAM parameters used.
    pub params: QroamParams,
    /// Per-stage Toffoli counts.
    pub stages: StageCosts,
    /// Toffoli count of one walk step.
    pub toffoli_per_step: i64,
    /// Logical qubits.
    pub qubits_total: i64,
    /// `⌈π λ / ε⌉`.
    pub qpe_iterations: u64,
    /// `qpe_iterations × toffoli_per_step`.
    pub toffoli_total: u128,
    /// `λ` used, Hartree.
    pub lambda: f64,
    /// Target precision, Hartree.
    pub epsilon_qpe: f64,
    /// How `toffoli_total` is composed.
    pub composition: String,
}

/// Options for [`total_resources`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResourceOptions {
    /// QROAM objective.
    pub objective: Objective,
    /// Include the on-site sign qubit in `b_o`.
    pub sign_qubit: bool,
}

impl Default for ResourceOptions {
    fn default() -> Self {
        ResourceOptions { objective: Objective::Gates, sign_qubit: true }
    }
}

/// Report for a dataset and its factorization and norm.
pub fn total_resources(
    ds: &BlochDataset,
    fact: &LcuFactorization,
    bits: &BitParams,
    epsilon_qpe: f64,
    lambda: &NormBreakdown,
    options: &ResourceOptions,
) -> Result<ResourceReport, Error> {
    bits.check()?;
    let counts = label_counts(ds, fact, bits, options.sign_qubit);
    report_from_counts(counts, bits, epsilon_qpe, lambda.lambda_total, options.objective)
}

/// Report from precomputed counts.
pub fn report_from_counts(
    counts: LabelCounts,
    bits: &BitParams,
    epsilon_qpe: f64,
    lambda: f64,
    objective: Objective,
) -> Result<ResourceReport, Error> {
    let iterations = qpe_iterations(lambda, epsilon_qpe)?;
    let params = optimize_qroam(&counts, bits, objective);
    let stages = stage_costs(&counts, bits, &params);
    let per_step = toffoli_per_step(&counts, bits, &params);
    debug_assert_eq!(stages.total(), per_step);
    Ok(ResourceReport {
        counts,
        bits: *bits,
        params,
        stages,
        toffoli_per_step: per_step,
        qubits_total: qubits_total(&counts, bits, &params, iterations),
        qpe_iterations: iterations,
        toffoli_total: iterations as u128 * per_step.max(0) as u128,
        lambda,
        epsilon_qpe,
        composition: String::from("qpe_iterations * toffoli_per_step"),
    })
}
