//! One-norm `λ` of the LCU and its split into one-body, smooth (ξ) and
//! on-site (χ) parts.

use crate::lcu::{channel_sums, BlockKey, LcuFactorization, OneBodyFactor, PairBlockFactor};
use crate::linalg::CompensatedSum;
use alloc::vec::Vec;

/// One `ξ_G^{(J)}(Q)` value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XiEntry {
    /// 1 or 2.
    pub j: u8,
    /// Flat transfer index.
    pub q: usize,
    /// Index into `g_list`.
    pub g: usize,
    /// `(4π/V) v'(G+Q) (Σ_k Σ_i |f|)²`, Hartree.
    pub value: f64,
}

/// One `χ_{rs}^{a,J}(Q)` value (the `√|ε|` factor already sits in `f`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiEntry {
    /// 1 or 2.
    pub j: u8,
    /// Flat transfer index.
    pub q: usize,
    /// Site index.
    pub atom: usize,
    /// C-tensor factor index.
    pub m: usize,
    /// `(Σ_k Σ_i |f|)²`, Hartree.
    pub value: f64,
}

/// `λ` and its parts.
#[derive(Debug, Clone, PartialEq)]
pub struct NormBreakdown {
    /// `Σ_k Σ_i |ε_i(k)|`.
    pub lambda_one_body: f64,
    /// Smooth channel contributions in key order.
    pub xi: Vec<XiEntry>,
    /// On-site channel contributions in key order.
    pub chi: Vec<ChiEntry>,
    /// `¼ (Σ ξ + Σ χ)`.
    pub lambda_two_body: f64,
    /// `lambda_one_body + lambda_two_body`.
    pub lambda_total: f64,
}

impl NormBreakdown {
    /// `¼ Σ ξ`.
    pub fn lambda_soft(&self) -> f64 {
        0.25 * crate::linalg::compensated_sum(self.xi.iter().map(|x| x.value))
    }

    /// `¼ Σ χ`.
    pub fn lambda_hard(&self) -> f64 {
        0.25 * crate::linalg::compensated_sum(self.chi.iter().map(|x| x.value))
    }
}

/// Sum of kept `|ε_i(k)|`.
pub fn lambda_one_body(one_body: &[OneBodyFactor]) -> f64 {
    let mut s = CompensatedSum::new();
    for ob in one_body {
        for e in ob.retained() {
            s.add(e.abs());
        }
    }
    s.value()
}

fn abs_sum_where(blocks: &[PairBlockFactor], pred: impl Fn(&BlockKey) -> bool) -> (f64, f64) {
    let mut s = CompensatedSum::new();
    let mut w = 0.0;
    for b in blocks.iter().filter(|b| pred(&b.key)) {
        s.add(b.abs_sum());
        w = b.weight;
    }
    (s.value(), w)
}

/// `ξ = (4π/V) v'(G+Q) (Σ_k Σ_i |f_i^{(J)}(G,Q,k)|)²`.
pub fn xi_soft(blocks: &[PairBlockFactor], j: u8, q: usize, g: usize) -> f64 {
    let (s, w) = abs_sum_where(blocks, |key| matches!(*key, BlockKey::Soft { j: a, q: b, g: c, .. } if a == j && b == q && c == g));
    w.abs() * s * s
}

/// `χ = (Σ_k Σ_i |f_{i,rs}^{a,J}(Q,k)|)²`.
pub fn chi_hard(blocks: &[PairBlockFactor], atom: usize, m: usize, j: u8, q: usize) -> f64 {
    let (s, _) = abs_sum_where(
        blocks,
        |key| matches!(*key, BlockKey::Hard { j: a, q: b, atom: c, m: d, .. } if a == j && b == q && c == atom && d == m),
    );
    s * s
}

/// Assembles the full breakdown in key order with compensated sums.
pub fn lambda_total(fact: &LcuFactorization) -> NormBreakdown {
    let lambda_one_body = lambda_one_body(&fact.one_body);
    let xi: Vec<XiEntry> = channel_sums(&fact.soft_blocks)
        .into_iter()
        .map(|c| match c.key {
            BlockKey::Soft { j, g, q, .. } => XiEntry { j, q, g, value: c.weight.abs() * c.abs_sum * c.abs_sum },
            BlockKey::Hard { .. } => unreachable!("soft list holds soft keys"),
        })
        .collect();
    let chi: Vec<ChiEntry> = channel_sums(&fact.hard_blocks)
        .into_iter()
        .map(|c| match c.key {
            BlockKey::Hard { j, atom, m, q, .. } => ChiEntry { j, q, atom, m, value: c.abs_sum * c.abs_sum },
            BlockKey::Soft { .. } => unreachable!("hard list holds hard keys"),
        })
        .collect();
    let mut two = CompensatedSum::new();
    for x in &xi {
        two.add(x.value);
    }
    for x in &chi {
        two.add(x.value);
    }
    let lambda_two_body = 0.25 * two.value();
    NormBreakdown { lambda_one_body, xi, chi, lambda_two_body, lambda_total: lambda_one_body + lambda_two_body }
}
