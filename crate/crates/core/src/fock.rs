//! Brute-force many-body reference: Hamiltonians on the occupation-number
//! basis, stored as dense blocks per `(N_up, N_down)` sector.
//!
//! Bit layout: spin orbital `(k, i, σ)` sits at bit `2 (k N_b + i) + σ`.

use crate::hamiltonian::KappaSector;
use crate::lcu::{BlockKey, LcuFactorization, PairBlockFactor};
use crate::linalg::{hermitian_eigenvalues, hermiticity_residual, max_abs_diff, CMat, CompensatedSum};
use crate::kspace::MeshDims;
use crate::{Error, C64};
use alloc::vec;
use alloc::vec::Vec;

/// Largest number of spin orbitals accepted.
pub const SPIN_ORBITAL_CAP: usize = 14;

/// Mapping `(k, band, spin) → bit`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpinOrbitalOrder {
    /// `N_k`.
    pub n_k: usize,
    /// `N_b`.
    pub n_b: usize,
}

impl SpinOrbitalOrder {
    /// Layout for a mesh of `n_k` points with `n_b` bands.
    pub fn new(n_k: usize, n_b: usize) -> Self {
        SpinOrbitalOrder { n_k, n_b }
    }

    /// Spatial orbitals.
    pub fn n_orbitals(&self) -> usize {
        self.n_k * self.n_b
    }

    /// Spin orbitals.
    pub fn n_spin_orbitals(&self) -> usize {
        2 * self.n_orbitals()
    }

    /// Bit of `(k, i, σ)`.
    pub fn bit(&self, k: usize, i: usize, spin: usize) -> usize {
        2 * (k * self.n_b + i) + spin
    }

    fn check(&self) -> Result<(), Error> {
        let n = self.n_spin_orbitals();
        if n > SPIN_ORBITAL_CAP {
            return Err(Error::SizeCap { spin_orbitals: n, cap: SPIN_ORBITAL_CAP });
        }
        Ok(())
    }
}

/// One fixed-`(N_up, N_down)` block.
#[derive(Debug, Clone, PartialEq)]
pub struct FockSector {
    /// Spin-up electrons.
    pub n_up: usize,
    /// Spin-down electrons.
    pub n_down: usize,
    /// Occupation bit strings, ascending.
    pub states: Vec<u32>,
    /// Hamiltonian block, Hartree.
    pub matrix: CMat,
}

/// Many-body Hamiltonian; block diagonal in the spin-resolved particle numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct FockMatrix {
    /// Layout.
    pub order: SpinOrbitalOrder,
    /// All sectors, `(n_up, n_down)` lexicographic.
    pub sectors: Vec<FockSector>,
}

fn parity_below(s: u32, bit: usize) -> f64 {
    if (s & ((1u32 << bit) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn annihilate(s: u32, bit: usize) -> Option<(f64, u32)> {
    if s & (1 << bit) == 0 {
        return None;
    }
    Some((parity_below(s, bit), s ^ (1 << bit)))
}

fn create(s: u32, bit: usize) -> Option<(f64, u32)> {
    if s & (1 << bit) != 0 {
        return None;
    }
    Some((parity_below(s, bit), s | (1 << bit)))
}

/// `a†_p a_q |s⟩`.
fn hop(s: u32, p: usize, q: usize) -> Option<(f64, u32)> {
    let (s1, t) = annihilate(s, q)?;
    let (s2, u) = create(t, p)?;
    Some((s1 * s2, u))
}

impl FockMatrix {
    /// All-zero operator.
    pub fn zeros(order: SpinOrbitalOrder) -> Result<Self, Error> {
        order.check()?;
        let n = order.n_orbitals();
        let spread = |mask: u32, spin: usize| -> u32 {
            let mut s = 0;
            for p in 0..n {
                if mask & (1 << p) != 0 {
                    s |= 1 << (2 * p + spin);
                }
            }
            s
        };
        let mut sectors = Vec::new();
        for n_up in 0..=n {
            for n_down in 0..=n {
                let mut states = Vec::new();
                for up in 0u32..(1 << n) {
                    if up.count_ones() as usize != n_up {
                        continue;
                    }
                    for dn in 0u32..(1 << n) {
                        if dn.count_ones() as usize == n_down {
                            states.push(spread(up, 0) | spread(dn, 1));
                        }
                    }
                }
                states.sort_unstable();
                let d = states.len();
                sectors.push(FockSector { n_up, n_down, states, matrix: CMat::zeros(d, d) });
            }
        }
        Ok(FockMatrix { order, sectors })
    }

    /// Hilbert-space dimension `2^{n_spin_orbitals}`.
    pub fn dim(&self) -> usize {
        1 << self.order.n_spin_orbitals()
    }

    /// Adds `c · I`.
    pub fn add_identity(&mut self, c: f64) {
        for s in self.sectors.iter_mut() {
            for i in 0..s.states.len() {
                s.matrix[(i, i)] += C64::new(c, 0.0);
            }
        }
    }

    /// Adds `Σ_{pq} x_{pq} Σ_σ a†_{pσ} a_{qσ}` for an orbital matrix `x`.
    pub fn add_one_body(&mut self, x: &CMat) {
        for sec in self.sectors.iter_mut() {
            let m = one_body_block(&sec.states, x);
            sec.matrix += m;
        }
    }

    /// Largest entry difference; both operators must share a layout.
    pub fn max_abs_diff(&self, other: &FockMatrix) -> f64 {
        assert_eq!(self.order, other.order);
        self.sectors.iter().zip(&other.sectors).map(|(a, b)| max_abs_diff(&a.matrix, &b.matrix)).fold(0.0, f64::max)
    }

    /// Largest Hermiticity residual over sectors.
    pub fn hermiticity_residual(&self) -> f64 {
        self.sectors.iter().map(|s| hermiticity_residual(&s.matrix)).fold(0.0, f64::max)
    }

    /// Full spectrum, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.sectors.iter().flat_map(|s| hermitian_eigenvalues(&s.matrix)).collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// `max |eig(H) − shift|`.
    pub fn spectral_radius_shifted(&self, shift: f64) -> f64 {
        self.eigenvalues().iter().map(|e| (e - shift).abs()).fold(0.0, f64::max)
    }

    /// Dense matrix over all `2^n` states, indexed by bit string. Only for
    /// very small systems and tests.
    pub fn to_dense(&self) -> CMat {
        let d = self.dim();
        let mut m = CMat::zeros(d, d);
        for s in &self.sectors {
            for (a, &sa) in s.states.iter().enumerate() {
                for (b, &sb) in s.states.iter().enumerate() {
                    m[(sa as usize, sb as usize)] = s.matrix[(a, b)];
                }
            }
        }
        m
    }
}

fn locate(states: &[u32], s: u32) -> usize {
    states.binary_search(&s).expect("number-conserving move stays in sector")
}

fn one_body_block(states: &[u32], x: &CMat) -> CMat {
    let d = states.len();
    let n = x.nrows();
    let mut m = CMat::zeros(d, d);
    for (col, &s) in states.iter().enumerate() {
        for p in 0..n {
            for q in 0..n {
                let v = x[(p, q)];
                if v.re == 0.0 && v.im == 0.0 {
                    continue;
                }
                for spin in 0..2 {
                    if let Some((sg, t)) = hop(s, 2 * p + spin, 2 * q + spin) {
                        m[(locate(states, t), col)] += v * sg;
                    }
                }
            }
        }
    }
    m
}

/// `Σ h E + ½ Σ κ :E†E:` from the bare one-body matrices `h[k]` and all `N_k`
/// κ sectors. The two-body part is normal ordered, so a lone electron only
/// feels `h`.
pub fn fock_from_integrals(h: &[CMat], kappa: &[KappaSector], mesh: &MeshDims) -> Result<FockMatrix, Error> {
    let nk = mesh.n_k();
    let nb = h.first().map(|m| m.nrows()).unwrap_or(0);
    let order = SpinOrbitalOrder::new(nk, nb);
    let mut fm = FockMatrix::zeros(order)?;
    let mut x = CMat::zeros(nk * nb, nk * nb);
    for k in 0..nk {
        for i in 0..nb {
            for j in 0..nb {
                x[(k * nb + i, k * nb + j)] = h[k][(i, j)];
            }
        }
    }
    fm.add_one_body(&x);
    let table = mesh.add_table();
    // (coef, α, β, γ, δ) for ½κ a†_α a†_γ a_δ a_β over spatial orbitals.
    let mut terms = Vec::new();
    for sec in kappa {
        let q = sec.q;
        for k1 in 0..nk {
            for k2 in 0..nk {
                for i in 0..nb {
                    for j in 0..nb {
                        for k in 0..nb {
                            for l in 0..nb {
                                let c = sec.get(k1, k2, i, j, k, l);
                                if c.re == 0.0 && c.im == 0.0 {
                                    continue;
                                }
                                let alpha = table[q][k1] * nb + j;
                                let beta = k1 * nb + i;
                                let gamma = k2 * nb + k;
                                let delta = table[q][k2] * nb + l;
                                terms.push((c * 0.5, alpha, beta, gamma, delta));
                            }
                        }
                    }
                }
            }
        }
    }
    for sec in fm.sectors.iter_mut() {
        for (col, &s) in sec.states.iter().enumerate() {
            for &(c, alpha, beta, gamma, delta) in &terms {
                for sa in 0..2 {
                    for sb in 0..2 {
                        let step = annihilate(s, 2 * beta + sa)
                            .and_then(|(g1, t)| annihilate(t, 2 * delta + sb).map(|(g2, t)| (g1 * g2, t)))
                            .and_then(|(g, t)| create(t, 2 * gamma + sb).map(|(g3, t)| (g * g3, t)))
                            .and_then(|(g, t)| create(t, 2 * alpha + sa).map(|(g4, t)| (g * g4, t)));
                        if let Some((g, t)) = step {
                            let row = locate(&sec.states, t);
                            sec.matrix[(row, col)] += c * g;
                        }
                    }
                }
            }
        }
    }
    Ok(fm)
}

/// Orbital matrix `Σ_k fold(U diag(f) U†)` of one channel: the top half of
/// each block acts on `(k, ·)`, the bottom half on `(k⊕Q, ·)`; for `Q = 0`
/// both halves land on the same orbitals.
pub fn channel_orbital_matrix(blocks: &[&PairBlockFactor], mesh: &MeshDims, n_b: usize) -> CMat {
    let n = mesh.n_k() * n_b;
    let mut x = CMat::zeros(n, n);
    for b in blocks {
        let (k, q) = (b.key.k(), b.key.q());
        let kq = mesh.add_flat(k, q).flat;
        let m = b.retained_matrix();
        let base = |half: usize, r: usize| if half == 0 { k * n_b + r } else { kq * n_b + r };
        for hr in 0..2 {
            for hc in 0..2 {
                for r in 0..n_b {
                    for c in 0..n_b {
                        x[(base(hr, r), base(hc, c))] += m[(hr * n_b + r, hc * n_b + c)];
                    }
                }
            }
        }
    }
    x
}

fn channels(blocks: &[PairBlockFactor]) -> Vec<(BlockKey, Vec<&PairBlockFactor>)> {
    let mut out: Vec<(BlockKey, Vec<&PairBlockFactor>)> = Vec::new();
    for b in blocks {
        let ch = b.key.channel();
        match out.last_mut() {
            Some((key, v)) if *key == ch => v.push(b),
            _ => out.push((ch, vec![b])),
        }
    }
    out
}

/// Adds `c · (A_s)²` sector by sector, where `A_s` is the sector block of the
/// one-body operator `E(x) − tr(x)`. Uses the sparsity of `A_s`.
fn add_scaled_square(fm: &mut FockMatrix, x: &CMat, c: f64) {
    let tr = x.trace();
    for sec in fm.sectors.iter_mut() {
        let mut a = one_body_block(&sec.states, x);
        for i in 0..a.nrows() {
            a[(i, i)] -= tr;
        }
        let d = a.nrows();
        let rows: Vec<Vec<(usize, C64)>> = (0..d)
            .map(|r| (0..d).filter(|&c| a[(r, c)].norm() != 0.0).map(|c| (c, a[(r, c)])).collect())
            .collect();
        for r in 0..d {
            for &(m, v1) in &rows[r] {
                for &(col, v2) in &rows[m] {
                    sec.matrix[(r, col)] += v1 * v2 * c;
                }
            }
        }
    }
}

/// Rebuilds the Hamiltonian from the factorization alone: rotated `Ẑ`
/// strings for the one-body family, `½ w η'² − ¼ w S²` for every two-body
/// channel, plus `energy_shift`.
pub fn fock_from_lcu(fact: &LcuFactorization) -> Result<FockMatrix, Error> {
    let (nk, nb) = (fact.mesh.n_k(), fact.n_b);
    let order = SpinOrbitalOrder::new(nk, nb);
    let mut fm = FockMatrix::zeros(order)?;
    // −½ Σ ε Ẑ = Σ ε n − Σ ε, with Ẑ the spin-summed rotated Pauli Z.
    let mut x = CMat::zeros(nk * nb, nk * nb);
    let mut trace = CompensatedSum::new();
    for ob in &fact.one_body {
        for (c, &e) in ob.retained().iter().enumerate() {
            let col = ob.rotation.column(c);
            let m = col * col.adjoint() * C64::new(e, 0.0);
            for r in 0..nb {
                for s in 0..nb {
                    x[(ob.k * nb + r, ob.k * nb + s)] += m[(r, s)];
                }
            }
            trace.add(e);
        }
    }
    fm.add_one_body(&x);
    fm.add_identity(-trace.value());
    for blocks in [&fact.soft_blocks, &fact.hard_blocks] {
        for (_, members) in channels(blocks) {
            let w = members[0].weight;
            let s: f64 = members.iter().map(|b| b.abs_sum()).sum();
            if s == 0.0 {
                continue;
            }
            let xch = channel_orbital_matrix(&members, &fact.mesh, nb);
            add_scaled_square(&mut fm, &xch, 0.5 * w);
            fm.add_identity(-0.25 * w * s * s);
        }
    }
    fm.add_identity(fact.energy_shift);
    Ok(fm)
}

/// Sum of the absolute values of every LCU coefficient, enumerated term by
/// term: `|ε_i(k)|` for the one-body family and `¼ |w| |f_i(k)| |f_j(k')|`
/// for every pair of eigenvalues inside a two-body channel.
pub fn lambda_bruteforce(fact: &LcuFactorization) -> f64 {
    let mut s = CompensatedSum::new();
    for ob in &fact.one_body {
        for e in ob.retained() {
            s.add(e.abs());
        }
    }
    for blocks in [&fact.soft_blocks, &fact.hard_blocks] {
        for (_, members) in channels(blocks) {
            let w = members[0].weight.abs();
            for b1 in &members {
                for f1 in &b1.f {
                    for b2 in &members {
                        for f2 in &b2.f {
                            s.add(0.25 * w * f1.abs() * f2.abs());
                        }
                    }
                }
            }
        }
    }
    s.value()
}
