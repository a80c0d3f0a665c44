//! Two-body integrals κ (smooth and on-site parts) and the renormalized
//! one-body kernel h̃.
//!
//! Conventions. Orbitals are `(k, i)`. For a transfer `Q` the pair operator is
//! `E_Q^{ij}(k) = Σ_σ a†_{k i σ} a_{(k⊕Q) j σ}` and the two-body operator is
//! `½ Σ κ_Q^{ijkl}(k,k') :E_Q^{ij}(k)† E_Q^{kl}(k'):`. The smooth part is
//! `κ = Σ_G w(G,Q) conj(C(G,Q,k)_{ij}) C(G,Q,k')_{kl}` with `w = (4π/V) v'(G+Q)`;
//! the on-site part uses `d_ij(k)_{p1p2} = conj(P[k][i][p1]) P[k⊕Q][j][p2]` in
//! the same Hermitian `A†A` arrangement.

use crate::dataset::BlochDataset;
use crate::kspace::KernelKind;
use crate::linalg::CMat;
use crate::{Error, C64};
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;

/// D-tensor block for one atom and orbital pair.
#[derive(Debug, Clone, PartialEq)]
pub struct DTensorBlock {
    /// Site index.
    pub atom: usize,
    /// Partial-wave count.
    pub n_a: usize,
    /// `values[p1 * n_a + p2]`.
    pub values: Vec<C64>,
}

impl DTensorBlock {
    /// `D[p1][p2]`.
    pub fn get(&self, p1: usize, p2: usize) -> C64 {
        self.values[p1 * self.n_a + p2]
    }
}

/// `D_{(k i, q j), p1 p2} = conj(P[k][i][p1]) P[q][j][p2]`, entries below the
/// dataset's recorded D threshold zeroed.
pub fn assemble_d(ds: &BlochDataset, atom: usize, k: usize, i: usize, q: usize, j: usize) -> DTensorBlock {
    let site = &ds.atoms[atom];
    let n = site.n_a;
    let mut values = Vec::with_capacity(n * n);
    for p1 in 0..n {
        let left = site.p(ds.n_b, k, i, p1).conj();
        for p2 in 0..n {
            let v = left * site.p(ds.n_b, q, j, p2);
            values.push(if v.norm() < ds.d_threshold { C64::new(0.0, 0.0) } else { v });
        }
    }
    DTensorBlock { atom, n_a: n, values }
}

/// Lexicographic unordered pairs `(p1 ≤ p2)` of `n` partial waves.
pub fn pair_list(n: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(n * (n + 1) / 2);
    for p1 in 0..n {
        for p2 in p1..n {
            v.push((p1, p2));
        }
    }
    v
}

/// `M[μ][ν] = (½)^{δ_{p1p2}} (½)^{δ_{p3p4}} C[p1][p2][p3][p4]` over pair indices.
pub fn pair_matrix(ds: &BlochDataset, atom: usize) -> DMatrix<f64> {
    let site = &ds.atoms[atom];
    let pairs = pair_list(site.n_a);
    let half = |a: usize, b: usize| if a == b { 0.5 } else { 1.0 };
    DMatrix::from_fn(pairs.len(), pairs.len(), |m, n| {
        let (p1, p2) = pairs[m];
        let (p3, p4) = pairs[n];
        half(p1, p2) * half(p3, p4) * site.c(p1, p2, p3, p4)
    })
}

/// Pair-folded D matrices `A_μ(k)[i][j] = d_ij(k)_{p1p2} + d_ij(k)_{p2p1}` for
/// transfer `q`, indexed `[μ][k]`. Diagonal pairs give `2 d_pp`.
pub fn pair_d_matrices(ds: &BlochDataset, atom: usize, q: usize) -> Vec<Vec<CMat>> {
    let nb = ds.n_b;
    let nk = ds.n_k();
    let n_a = ds.atoms[atom].n_a;
    let pairs = pair_list(n_a);
    let mut out = vec![vec![CMat::zeros(nb, nb); nk]; pairs.len()];
    for k in 0..nk {
        let kq = ds.mesh.add_flat(k, q).flat;
        for i in 0..nb {
            for j in 0..nb {
                let d = assemble_d(ds, atom, k, i, kq, j);
                for (m, &(p1, p2)) in pairs.iter().enumerate() {
                    out[m][k][(i, j)] = d.get(p1, p2) + d.get(p2, p1);
                }
            }
        }
    }
    out
}

/// Which parts of κ a sector holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    /// Smooth-density part only.
    SoftOnly,
    /// On-site part only.
    HardOnly,
    /// Both.
    Full,
}

/// `κ_Q^{ijkl}(k, k')` for one transfer `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaSector {
    /// Flat transfer index.
    pub q: usize,
    /// `N_k`.
    pub n_k: usize,
    /// `N_b`.
    pub n_b: usize,
    /// Flattened `[k][k'][i][j][k][l]`.
    pub values: Vec<C64>,
    /// Parts included.
    pub provenance: Provenance,
}

impl KappaSector {
    fn zeros(q: usize, n_k: usize, n_b: usize, provenance: Provenance) -> Self {
        KappaSector { q, n_k, n_b, values: vec![C64::new(0.0, 0.0); n_k * n_k * n_b.pow(4)], provenance }
    }

    /// Offset of `κ^{ijkl}(k1, k2)`.
    pub fn index(&self, k1: usize, k2: usize, i: usize, j: usize, k: usize, l: usize) -> usize {
        let nb = self.n_b;
        ((((k1 * self.n_k + k2) * nb + i) * nb + j) * nb + k) * nb + l
    }

    /// `κ^{ijkl}(k1, k2)`.
    pub fn get(&self, k1: usize, k2: usize, i: usize, j: usize, k: usize, l: usize) -> C64 {
        self.values[self.index(k1, k2, i, j, k, l)]
    }

    /// Largest violation of `κ[(k1,i,j),(k2,k,l)] = conj κ[(k2,k,l),(k1,i,j)]`.
    pub fn hermiticity_residual(&self) -> f64 {
        let nb = self.n_b;
        let mut r = 0.0f64;
        for k1 in 0..self.n_k {
            for k2 in 0..self.n_k {
                for i in 0..nb {
                    for j in 0..nb {
                        for k in 0..nb {
                            for l in 0..nb {
                                let a = self.get(k1, k2, i, j, k, l);
                                let b = self.get(k2, k1, k, l, i, j);
                                r = r.max((a - b.conj()).norm());
                            }
                        }
                    }
                }
            }
        }
        r
    }

    fn add(&mut self, other: &KappaSector) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }
}

/// Smooth-density part of κ for transfer `q`.
pub fn kappa_soft(ds: &BlochDataset, kind: KernelKind, q: usize) -> Result<KappaSector, Error> {
    let (nk, nb) = (ds.n_k(), ds.n_b);
    let mut s = KappaSector::zeros(q, nk, nb, Provenance::SoftOnly);
    for g in 0..ds.n_pw() {
        let w = ds.soft_weight(kind, g, q)?;
        if w == 0.0 {
            continue;
        }
        for k1 in 0..nk {
            for k2 in 0..nk {
                for i in 0..nb {
                    for j in 0..nb {
                        let left = ds.density(q, k1, g, i, j).conj() * w;
                        for k in 0..nb {
                            for l in 0..nb {
                                let o = s.index(k1, k2, i, j, k, l);
                                s.values[o] += left * ds.density(q, k2, g, k, l);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(s)
}

/// On-site part of κ for transfer `q`.
pub fn kappa_hard(ds: &BlochDataset, q: usize) -> KappaSector {
    let (nk, nb) = (ds.n_k(), ds.n_b);
    let mut s = KappaSector::zeros(q, nk, nb, Provenance::HardOnly);
    for a in 0..ds.n_atoms() {
        let n = ds.atoms[a].n_a;
        let nn = n * n;
        let c = DMatrix::from_row_slice(nn, nn, &ds.atoms[a].c_tensor);
        // d[k][i][j] as a vector over (p1, p2), and C·d.
        let mut d = Vec::with_capacity(nk * nb * nb);
        for k in 0..nk {
            let kq = ds.mesh.add_flat(k, q).flat;
            for i in 0..nb {
                for j in 0..nb {
                    d.push(assemble_d(ds, a, k, i, kq, j).values);
                }
            }
        }
        let cd: Vec<Vec<C64>> = d
            .iter()
            .map(|v| (0..nn).map(|r| (0..nn).map(|t| v[t] * c[(r, t)]).sum()).collect())
            .collect();
        for k1 in 0..nk {
            for k2 in 0..nk {
                for i in 0..nb {
                    for j in 0..nb {
                        let left = &d[(k1 * nb + i) * nb + j];
                        for k in 0..nb {
                            for l in 0..nb {
                                let right = &cd[(k2 * nb + k) * nb + l];
                                let v: C64 = left.iter().zip(right).map(|(x, y)| x.conj() * y).sum();
                                let o = s.index(k1, k2, i, j, k, l);
                                s.values[o] += v;
                            }
                        }
                    }
                }
            }
        }
    }
    s
}

/// Full κ sector (smooth + on-site).
pub fn kappa(ds: &BlochDataset, kind: KernelKind, q: usize) -> Result<KappaSector, Error> {
    let mut s = kappa_soft(ds, kind, q)?;
    s.add(&kappa_hard(ds, q));
    s.provenance = Provenance::Full;
    Ok(s)
}

/// Largest Hermiticity residual of the smooth κ over all sectors, or `None`
/// when the sectors are too large to assemble cheaply.
pub fn soft_kappa_hermiticity_residual(ds: &BlochDataset, kind: KernelKind) -> Option<f64> {
    let (nk, nb, npw) = (ds.n_k(), ds.n_b, ds.n_pw());
    let work = nk.checked_pow(3)?.checked_mul(nb.checked_pow(4)?)?.checked_mul(npw)?;
    if work > 20_000_000 {
        return None;
    }
    let mut r = 0.0f64;
    for q in 0..nk {
        r = r.max(kappa_soft(ds, kind, q).ok()?.hermiticity_residual());
    }
    Some(r)
}

/// Adds the one-body terms generated by one family of channels to `h`.
///
/// A family is a set of matrices `A_μ(k)` (orbital `(k,i)` to `(k⊕Q,j)`) with a
/// real symmetric weight matrix `W`, so that `κ = Σ_{μν} W_{μν} conj(A_μ) A_ν`.
/// The added terms are `-¼(𝒞†𝒞 + 𝒞𝒞†)` and, for `Q = 0`, the symmetrized
/// direct term `½(D + D†)` with `D(k) = Σ_{μν} W_{μν} τ_ν A_μ(k)†`,
/// `τ_ν = Σ_k tr A_ν(k)`.
fn add_family(h: &mut [CMat], ds: &BlochDataset, q: usize, a: &[Vec<CMat>], w: &DMatrix<f64>) {
    let nk = ds.n_k();
    let nb = ds.n_b;
    let tau: Vec<C64> = a.iter().map(|am| am.iter().map(|m| m.trace()).sum()).collect();
    for k in 0..nk {
        let kq = ds.mesh.add_flat(k, q).flat;
        let mut cdc = CMat::zeros(nb, nb);
        let mut ccd = CMat::zeros(nb, nb);
        let mut dir = CMat::zeros(nb, nb);
        for m in 0..a.len() {
            for n in 0..a.len() {
                let wmn = w[(m, n)];
                if wmn == 0.0 {
                    continue;
                }
                let am = &a[m][k];
                let an = &a[n][k];
                cdc += am.adjoint() * an * C64::new(wmn, 0.0);
                ccd += an * am.adjoint() * C64::new(wmn, 0.0);
                if q == 0 {
                    dir += am.adjoint() * (tau[n] * wmn);
                }
            }
        }
        h[kq] -= cdc * C64::new(0.25, 0.0);
        h[k] -= ccd * C64::new(0.25, 0.0);
        if q == 0 {
            h[k] += (&dir + dir.adjoint()) * C64::new(0.5, 0.0);
        }
    }
}

/// `h̃(k) = h(k) − ¼(𝒞†𝒞 + 𝒞𝒞†) + ½(D + D†)` summed over all smooth and
/// on-site channels: the exchange-like contraction of κ plus the direct term
/// produced when the two-body part is written as sums of squares.
///
/// For a single orbital this reduces to `h + ½ κ`.
pub fn h_tilde(ds: &BlochDataset, kind: KernelKind) -> Result<Vec<CMat>, Error> {
    let mut h = ds.h_one_body.clone();
    let nk = ds.n_k();
    for q in 0..nk {
        for g in 0..ds.n_pw() {
            let w = ds.soft_weight(kind, g, q)?;
            if w == 0.0 {
                continue;
            }
            let blocks = vec![(0..nk).map(|k| ds.density_block(g, q, k)).collect::<Vec<_>>()];
            add_family(&mut h, ds, q, &blocks, &DMatrix::from_element(1, 1, w));
        }
        for a in 0..ds.n_atoms() {
            let w = pair_matrix(ds, a);
            let blocks = pair_d_matrices(ds, a, q);
            add_family(&mut h, ds, q, &blocks, &w);
        }
    }
    for m in h.iter_mut() {
        let s = (&*m + m.adjoint()) * C64::new(0.5, 0.0);
        *m = s;
    }
    Ok(h)
}
