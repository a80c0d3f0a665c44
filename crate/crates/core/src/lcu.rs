//! Linear-combination-of-unitaries factorization: one-body eigendata,
//! smooth and on-site pair blocks, and the C-tensor eigendecomposition.

use crate::dataset::{apply_truncation, BlochDataset, TruncationPolicy, SYMMETRY_TOL};
use crate::hamiltonian::{h_tilde, pair_d_matrices, pair_matrix};
use crate::kspace::{KernelKind, MeshDims};
use crate::linalg::{fix_column_phase, hermitian_eigen, hermiticity_residual, pivot_index, svd_checked, CMat, CompensatedSum};
use crate::{Error, C64};
use alloc::format;
use alloc::vec::Vec;
use nalgebra::DMatrix;

/// Eigendata of `h̃(k)` at one k-point.
#[derive(Debug, Clone, PartialEq)]
pub struct OneBodyFactor {
    /// Flat k index.
    pub k: usize,
    /// All eigenvalues, sorted by descending magnitude.
    pub eigenvalues: Vec<f64>,
    /// Unitary whose columns are the matching eigenvectors.
    pub rotation: CMat,
    /// Number of leading eigenvalues kept (`R⁽⁰⁾` at this k).
    pub rank: usize,
}

impl OneBodyFactor {
    /// Kept eigenvalues.
    pub fn retained(&self) -> &[f64] {
        &self.eigenvalues[..self.rank]
    }
}

/// Diagonalizes each `h̃(k)`; eigenvalues with `|ε| < threshold` are not
/// counted in the rank but the rotation stays full size.
pub fn factor_one_body(h: &[CMat], threshold: f64) -> Result<Vec<OneBodyFactor>, Error> {
    let mut out = Vec::with_capacity(h.len());
    for (k, m) in h.iter().enumerate() {
        let r = hermiticity_residual(m);
        if r > 1e-8 {
            return Err(Error::NotHermitian { path: format!("h_tilde[{k}]"), residual: r });
        }
        let (vals, vecs) = hermitian_eigen(m);
        let n = vals.len();
        let mut order: Vec<usize> = (0..n).collect();
        let piv: Vec<usize> = (0..n).map(|c| pivot_index(&vecs, c)).collect();
        order.sort_by(|&a, &b| {
            vals[b]
                .abs()
                .total_cmp(&vals[a].abs())
                .then(piv[a].cmp(&piv[b]))
                .then(vals[b].total_cmp(&vals[a]))
        });
        let mut rotation = CMat::zeros(n, n);
        for (c, &src) in order.iter().enumerate() {
            rotation.set_column(c, &vecs.column(src));
            fix_column_phase(&mut rotation, c);
        }
        let eigenvalues: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
        let rank = eigenvalues.iter().filter(|e| !(e.abs() < threshold)).count();
        out.push(OneBodyFactor { k, eigenvalues, rotation, rank });
    }
    Ok(out)
}

/// Eigendecomposition of an atom's pair-weighted C-tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct CTensorFactor {
    /// Site index.
    pub atom: usize,
    /// Eigenvalues `ε_m` with sign, sorted by descending magnitude.
    pub eigenvalues: Vec<f64>,
    /// Orthogonal matrix, rows are pairs `(p1 ≤ p2)`, columns factors `m`.
    pub o: DMatrix<f64>,
    /// Whether `ε_m` survived the cut.
    pub retained: Vec<bool>,
}

impl CTensorFactor {
    /// `sign(ε_m)`, taken as `+1` for zero.
    pub fn sign(&self, m: usize) -> f64 {
        if self.eigenvalues[m] < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

/// Diagonalizes `M[μ][ν] = (½)^{δ_{p1p2}} (½)^{δ_{p3p4}} C[p1][p2][p3][p4]`.
pub fn factor_c_tensor(ds: &BlochDataset, atom: usize, threshold: f64) -> Result<CTensorFactor, Error> {
    let site = &ds.atoms[atom];
    let scale = site.c_tensor.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let r = site.c_symmetry_residual();
    if r > SYMMETRY_TOL * scale {
        return Err(Error::Validation(format!("atoms[{atom}].c_tensor is not pair-symmetric (residual {r:.3e})")));
    }
    let m = pair_matrix(ds, atom);
    let n = m.nrows();
    let e = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        e.eigenvalues[b].abs().total_cmp(&e.eigenvalues[a].abs()).then(e.eigenvalues[b].total_cmp(&e.eigenvalues[a]))
    });
    let mut o = DMatrix::zeros(n, n);
    for (c, &src) in order.iter().enumerate() {
        let mut col = e.eigenvectors.column(src).into_owned();
        let mut piv = 0;
        for r in 0..n {
            if col[r].abs() > col[piv].abs() * (1.0 + 1e-12) {
                piv = r;
            }
        }
        if col[piv] < 0.0 {
            col = -col;
        }
        o.set_column(c, &col);
    }
    let eigenvalues: Vec<f64> = order.iter().map(|&i| e.eigenvalues[i]).collect();
    let retained = eigenvalues.iter().map(|x| !(x.abs() < threshold)).collect();
    Ok(CTensorFactor { atom, eigenvalues, o, retained })
}

/// Which two-body channel a pair block belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BlockKey {
    /// Smooth density mode `(J, G, Q, k)`.
    Soft {
        /// 1 or 2.
        j: u8,
        /// Index into `g_list`.
        g: usize,
        /// Flat transfer index.
        q: usize,
        /// Flat k index.
        k: usize,
    },
    /// On-site mode `(J, a, m, Q, k)`.
    Hard {
        /// 1 or 2.
        j: u8,
        /// Site index.
        atom: usize,
        /// C-tensor factor index.
        m: usize,
        /// Flat transfer index.
        q: usize,
        /// Flat k index.
        k: usize,
    },
}

impl BlockKey {
    /// `J`.
    pub fn j(&self) -> u8 {
        match *self {
            BlockKey::Soft { j, .. } | BlockKey::Hard { j, .. } => j,
        }
    }

    /// Flat transfer index.
    pub fn q(&self) -> usize {
        match *self {
            BlockKey::Soft { q, .. } | BlockKey::Hard { q, .. } => q,
        }
    }

    /// Flat k index.
    pub fn k(&self) -> usize {
        match *self {
            BlockKey::Soft { k, .. } | BlockKey::Hard { k, .. } => k,
        }
    }

    /// The key with `k` removed: all blocks of one channel share it.
    pub fn channel(&self) -> BlockKey {
        match *self {
            BlockKey::Soft { j, g, q, .. } => BlockKey::Soft { j, g, q, k: 0 },
            BlockKey::Hard { j, atom, m, q, .. } => BlockKey::Hard { j, atom, m, q, k: 0 },
        }
    }
}

/// Eigendata of `H_J = (1/(2 i^{δ_{J2}})) [[0, C], [(−1)^{J−1} C†, 0]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBlockFactor {
    /// Channel and k-point.
    pub key: BlockKey,
    /// Kept eigenvalues, descending magnitude, `+` before `−`.
    pub f: Vec<f64>,
    /// All `2 N_b` eigenvalues in column order of `rotation`.
    pub spectrum: Vec<f64>,
    /// `2N_b × 2N_b` unitary; the first `rank` columns belong to `f`.
    pub rotation: CMat,
    /// Number of kept eigenvalues, both signs counted.
    pub rank: usize,
    /// Channel weight: `(4π/V) v'(G+Q)` for smooth blocks, `sign(ε_m)` for on-site.
    pub weight: f64,
}

impl PairBlockFactor {
    /// `Σ_i |f_i|`.
    pub fn abs_sum(&self) -> f64 {
        let mut s = CompensatedSum::new();
        for x in &self.f {
            s.add(x.abs());
        }
        s.value()
    }

    /// `U diag(f) U†` over the kept columns (a `2N_b` Hermitian matrix).
    pub fn retained_matrix(&self) -> CMat {
        let n = self.rotation.nrows();
        let mut m = CMat::zeros(n, n);
        for (c, &f) in self.f.iter().enumerate() {
            let col = self.rotation.column(c);
            m += col * col.adjoint() * C64::new(f, 0.0);
        }
        m
    }
}

/// Pair-block eigendata from the singular value decomposition of `c`.
///
/// Each singular value `σ` gives eigenvalues `±σ/2`; eigenvalues with
/// `|f| < threshold`, and singular values at round-off level, are dropped.
pub fn factor_pair_block(c: &CMat, j: u8, threshold: f64) -> PairBlockFactor {
    assert!(j == 1 || j == 2, "J must be 1 or 2");
    let n = c.nrows();
    assert_eq!(n, c.ncols(), "pair blocks are square");
    let (sigma, u, v) = svd_checked(c);
    let smax = sigma.first().copied().unwrap_or(0.0);
    let floor = f64::EPSILON * smax * n as f64;
    let h = core::f64::consts::FRAC_1_SQRT_2;
    let top = if j == 1 { C64::new(h, 0.0) } else { C64::new(0.0, -h) };
    let mut cols = Vec::with_capacity(2 * n);
    for t in 0..n {
        let keep = sigma[t] > floor && !(sigma[t] / 2.0 < threshold);
        for sign in [1.0, -1.0] {
            let mut e = CMat::zeros(2 * n, 1);
            for r in 0..n {
                // J=1: (u; ±v)/√2.  J=2: (−i u; v)/√2 for +, (i u; v)/√2 for −.
                let (a, b) = if j == 1 { (top, C64::new(h * sign, 0.0)) } else { (top * sign, C64::new(h, 0.0)) };
                e[(r, 0)] = u[(r, t)] * a;
                e[(n + r, 0)] = v[(r, t)] * b;
            }
            cols.push((keep, sign * sigma[t] / 2.0, e));
        }
    }
    let mut rotation = CMat::zeros(2 * n, 2 * n);
    let mut spectrum = Vec::with_capacity(2 * n);
    let mut f = Vec::new();
    let mut c_out = 0;
    for pass in [true, false] {
        for (keep, val, e) in &cols {
            if *keep != pass {
                continue;
            }
            rotation.set_column(c_out, &e.column(0));
            fix_column_phase(&mut rotation, c_out);
            spectrum.push(*val);
            if pass {
                f.push(*val);
            }
            c_out += 1;
        }
    }
    let rank = f.len();
    PairBlockFactor { key: BlockKey::Soft { j, g: 0, q: 0, k: 0 }, f, spectrum, rotation, rank, weight: 1.0 }
}

/// `H_J` for a block, as used by the reconstruction checks.
pub fn pair_block_matrix(c: &CMat, j: u8) -> CMat {
    let n = c.nrows();
    let mut m = CMat::zeros(2 * n, 2 * n);
    let (pre, lower) = if j == 1 { (C64::new(0.5, 0.0), 1.0) } else { (C64::new(0.0, -0.5), -1.0) };
    let cd = c.adjoint();
    for r in 0..n {
        for s in 0..n {
            m[(r, n + s)] = c[(r, s)] * pre;
            m[(n + r, s)] = cd[(r, s)] * pre * lower;
        }
    }
    m
}

/// Smooth pair blocks for every `(J, G, Q, k)` except the removed `G+Q = 0`
/// mode of the bare kernel.
pub fn build_soft_blocks(
    ds: &BlochDataset,
    kind: KernelKind,
    policy: &TruncationPolicy,
) -> Result<Vec<PairBlockFactor>, Error> {
    let nk = ds.n_k();
    let mut out = Vec::new();
    for j in [1u8, 2] {
        for g in 0..ds.n_pw() {
            for q in 0..nk {
                if ds.is_zero_mode(kind, g, q) {
                    continue;
                }
                let w = ds.soft_weight(kind, g, q)?;
                for k in 0..nk {
                    let mut b = factor_pair_block(&ds.density_block(g, q, k), j, policy.eigenvalue_threshold);
                    b.key = BlockKey::Soft { j, g, q, k };
                    b.weight = w;
                    out.push(b);
                }
            }
        }
    }
    Ok(out)
}

/// `F_m(Q,k) = √|ε_m| Σ_μ O_{μm} A_μ(k)`, zero for factors cut from the C-tensor.
pub fn hard_channel_matrices(ds: &BlochDataset, cf: &CTensorFactor, q: usize) -> Vec<Vec<CMat>> {
    let a = pair_d_matrices(ds, cf.atom, q);
    let nb = ds.n_b;
    (0..cf.eigenvalues.len())
        .map(|m| {
            (0..ds.n_k())
                .map(|k| {
                    let mut f = CMat::zeros(nb, nb);
                    if cf.retained[m] {
                        let s = libm::sqrt(cf.eigenvalues[m].abs());
                        for (mu, am) in a.iter().enumerate() {
                            let c = s * cf.o[(mu, m)];
                            if c != 0.0 {
                                f += &am[k] * C64::new(c, 0.0);
                            }
                        }
                    }
                    f
                })
                .collect()
        })
        .collect()
}

/// On-site pair blocks for every `(J, a, m, Q, k)`.
pub fn build_hard_blocks(
    ds: &BlochDataset,
    c_factors: &[CTensorFactor],
    policy: &TruncationPolicy,
) -> Vec<PairBlockFactor> {
    let nk = ds.n_k();
    let mut per_q = Vec::with_capacity(nk);
    for q in 0..nk {
        per_q.push(c_factors.iter().map(|cf| hard_channel_matrices(ds, cf, q)).collect::<Vec<_>>());
    }
    let mut out = Vec::new();
    for j in [1u8, 2] {
        for (a, cf) in c_factors.iter().enumerate() {
            for m in 0..cf.eigenvalues.len() {
                for (q, mats) in per_q.iter().enumerate() {
                    for k in 0..nk {
                        let mut b = factor_pair_block(&mats[a][m][k], j, policy.eigenvalue_threshold);
                        b.key = BlockKey::Hard { j, atom: cf.atom, m, q, k };
                        b.weight = cf.sign(m);
                        out.push(b);
                    }
                }
            }
        }
    }
    out
}

/// The complete factorization.
#[derive(Debug, Clone, PartialEq)]
pub struct LcuFactorization {
    /// k-point mesh of the source dataset.
    pub mesh: MeshDims,
    /// Bands per k-point.
    pub n_b: usize,
    /// Kernel used for the smooth weights.
    pub kernel: KernelKind,
    /// One entry per k-point.
    pub one_body: Vec<OneBodyFactor>,
    /// Smooth pair blocks in key order.
    pub soft_blocks: Vec<PairBlockFactor>,
    /// On-site pair blocks in key order.
    pub hard_blocks: Vec<PairBlockFactor>,
    /// One entry per atom.
    pub c_factors: Vec<CTensorFactor>,
    /// Scalar `c` with `H = c·I + Σ (LCU terms)`, Hartree.
    pub energy_shift: f64,
    /// Thresholds used.
    pub policy: TruncationPolicy,
}

/// Per-channel sums that fix the constant shift: `S = Σ_k Σ_i |f|` and the
/// trace `t` of the folded one-body operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSums {
    /// Channel key (k set to 0).
    pub key: BlockKey,
    /// Channel weight.
    pub weight: f64,
    /// `Σ_k Σ_i |f_i(k)|`.
    pub abs_sum: f64,
    /// Trace of `Σ_k fold(U diag(f) U†)`.
    pub trace: f64,
}

/// Groups blocks by channel (blocks must be sorted with `k` innermost).
pub fn channel_sums(blocks: &[PairBlockFactor]) -> Vec<ChannelSums> {
    let mut out: Vec<ChannelSums> = Vec::new();
    for b in blocks {
        let ch = b.key.channel();
        let n = b.rotation.nrows() / 2;
        let mut tr = CompensatedSum::new();
        for (c, &f) in b.f.iter().enumerate() {
            tr.add(f);
            if b.key.q() == 0 {
                let mut cross = C64::new(0.0, 0.0);
                for r in 0..n {
                    cross += b.rotation[(r, c)] * b.rotation[(n + r, c)].conj();
                }
                tr.add(2.0 * f * cross.re);
            }
        }
        match out.last_mut() {
            Some(last) if last.key == ch => {
                last.abs_sum += b.abs_sum();
                last.trace += tr.value();
            }
            _ => out.push(ChannelSums { key: ch, weight: b.weight, abs_sum: b.abs_sum(), trace: tr.value() }),
        }
    }
    out
}

/// Truncates `ds` with `policy` and factorizes the result.
pub fn factorize(ds: &BlochDataset, kind: KernelKind, policy: &TruncationPolicy) -> Result<LcuFactorization, Error> {
    policy.check()?;
    let ds = apply_truncation(ds, policy);
    let ht = h_tilde(&ds, kind)?;
    let one_body = factor_one_body(&ht, policy.eigenvalue_threshold)?;
    let c_factors = (0..ds.n_atoms())
        .map(|a| factor_c_tensor(&ds, a, policy.c_tensor_threshold))
        .collect::<Result<Vec<_>, _>>()?;
    let soft_blocks = build_soft_blocks(&ds, kind, policy)?;
    let hard_blocks = build_hard_blocks(&ds, &c_factors, policy);
    let mut shift = CompensatedSum::new();
    for ob in &one_body {
        for e in ob.retained() {
            shift.add(*e);
        }
    }
    for ch in channel_sums(&soft_blocks).iter().chain(channel_sums(&hard_blocks).iter()) {
        shift.add(0.25 * ch.weight * ch.abs_sum * ch.abs_sum);
        shift.add(-0.5 * ch.weight * ch.trace * ch.trace);
    }
    Ok(LcuFactorization {
        mesh: ds.mesh,
        n_b: ds.n_b,
        kernel: kind,
        one_body,
        soft_blocks,
        hard_blocks,
        c_factors,
        energy_shift: shift.value(),
        policy: *policy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, unitarity_residual};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn one_body_diagonal() {
        let h = CMat::from_row_slice(2, 2, &[c(1.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.5, 0.0)]);
        let f = factor_one_body(&[h], 0.0).unwrap();
        assert_eq!(f[0].eigenvalues.len(), 2);
        assert!((f[0].eigenvalues[0] - 1.5).abs() < 1e-15 && (f[0].eigenvalues[1] + 0.5).abs() < 1e-15);
        assert!(max_abs_diff(&f[0].rotation, &CMat::identity(2, 2)) < 1e-15);
        assert_eq!(f[0].rank, 2);
    }

    #[test]
    fn one_body_pauli_x() {
        let h = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let f = factor_one_body(&[h], 0.0).unwrap();
        assert!((f[0].eigenvalues[0] - 1.0).abs() < 1e-14 && (f[0].eigenvalues[1] + 1.0).abs() < 1e-14);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        assert!((f[0].rotation[(0, 0)] - c(s, 0.0)).norm() < 1e-14);
        assert!((f[0].rotation[(1, 0)] - c(s, 0.0)).norm() < 1e-14);
        assert!((f[0].rotation[(0, 1)].norm() - s).abs() < 1e-14);
        assert!((f[0].rotation[(0, 1)] + f[0].rotation[(1, 1)]).norm() < 1e-14);
    }

    #[test]
    fn one_body_rejects_non_hermitian() {
        let h = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(factor_one_body(&[h], 0.0), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn pair_block_scalar() {
        let b = factor_pair_block(&CMat::from_element(1, 1, c(0.6, 0.0)), 1, 0.0);
        assert_eq!(b.rank, 2);
        assert!((b.f[0] - 0.3).abs() < 1e-15 && (b.f[1] + 0.3).abs() < 1e-15);
    }

    #[test]
    fn pair_block_zero() {
        let b = factor_pair_block(&CMat::zeros(3, 3), 2, 0.0);
        assert_eq!(b.rank, 0);
        assert!(b.f.is_empty());
        assert!(unitarity_residual(&b.rotation) < 1e-15);
    }

    #[test]
    fn pair_block_reconstructs_both_j() {
        let m = CMat::from_fn(3, 3, |r, s| c((r * 3 + s) as f64 * 0.17 - 0.4, (r as f64 - s as f64) * 0.31));
        for j in [1u8, 2] {
            let b = factor_pair_block(&m, j, 0.0);
            assert!(unitarity_residual(&b.rotation) < 1e-12);
            let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(6, b.spectrum.iter().map(|x| c(*x, 0.0))));
            let rec = &b.rotation * d * b.rotation.adjoint();
            assert!(max_abs_diff(&rec, &pair_block_matrix(&m, j)) < 1e-12, "J={j}");
            assert!(b.f.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn pair_block_threshold_drops_small() {
        let m = CMat::from_diagonal(&nalgebra::DVector::from_vec(alloc::vec![c(1.0, 0.0), c(1e-6, 0.0)]));
        assert_eq!(factor_pair_block(&m, 1, 0.0).rank, 4);
        let b = factor_pair_block(&m, 1, 1e-5);
        assert_eq!(b.rank, 2);
        assert_eq!(b.spectrum.len(), 4);
    }
}
