//! The input container: mesh, cell, one-body integrals, smooth-density
//! Fourier coefficients, projector overlaps and on-site Coulomb tensors.

use crate::kspace::{coulomb_kernel, CellGeometry, GIndex, KIndex, KernelKind, MeshDims};
use crate::linalg::{hermiticity_residual, CMat};
use crate::{Error, C64};
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Tolerance for the Hermiticity and pair-symmetry invariants.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// One augmentation site.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomSite {
    /// Element label.
    pub species: String,
    /// Number of partial waves `n_a`.
    pub n_a: usize,
    /// `P[k][j][i] = <p_i|ψ_kj>`, flattened row-major `[N_k][N_b][n_a]`.
    pub projector_overlaps: Vec<C64>,
    /// On-site tensor `C[p1][p2][p3][p4]`, flattened row-major, Hartree.
    pub c_tensor: Vec<f64>,
}

impl AtomSite {
    /// `n_a (n_a + 1) / 2`, the number of unordered partial-wave pairs.
    pub fn n_pairs(&self) -> usize {
        self.n_a * (self.n_a + 1) / 2
    }

    /// `P[k][j][i]`.
    pub fn p(&self, n_b: usize, k: usize, j: usize, i: usize) -> C64 {
        self.projector_overlaps[(k * n_b + j) * self.n_a + i]
    }

    /// `C[p1][p2][p3][p4]`.
    pub fn c(&self, p1: usize, p2: usize, p3: usize, p4: usize) -> f64 {
        let n = self.n_a;
        self.c_tensor[((p1 * n + p2) * n + p3) * n + p4]
    }

    /// Largest violation of the pair symmetries of the C-tensor.
    pub fn c_symmetry_residual(&self) -> f64 {
        let n = self.n_a;
        let mut r = 0.0f64;
        for p1 in 0..n {
            for p2 in 0..n {
                for p3 in 0..n {
                    for p4 in 0..n {
                        let v = self.c(p1, p2, p3, p4);
                        r = r
                            .max((v - self.c(p2, p1, p3, p4)).abs())
                            .max((v - self.c(p1, p2, p4, p3)).abs())
                            .max((v - self.c(p3, p4, p1, p2)).abs());
                    }
                }
            }
        }
        r
    }
}

/// Absolute truncation thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    /// Density Fourier coefficients below this are zeroed.
    pub density_threshold: f64,
    /// Assembled D-tensor entries below this are zeroed.
    pub d_tensor_threshold: f64,
    /// C-tensor entries (and C-tensor eigenvalues) below this are dropped.
    pub c_tensor_threshold: f64,
    /// One-body and pair-block eigenvalues below this are dropped.
    pub eigenvalue_threshold: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy {
            density_threshold: 1e-16,
            d_tensor_threshold: 1e-19,
            c_tensor_threshold: 1e-7,
            eigenvalue_threshold: 1e-5,
        }
    }
}

impl TruncationPolicy {
    /// No truncation at all.
    pub fn zero() -> Self {
        TruncationPolicy {
            density_threshold: 0.0,
            d_tensor_threshold: 0.0,
            c_tensor_threshold: 0.0,
            eigenvalue_threshold: 0.0,
        }
    }

    /// Rejects negative or NaN thresholds.
    pub fn check(&self) -> Result<(), Error> {
        let all = [
            self.density_threshold,
            self.d_tensor_threshold,
            self.c_tensor_threshold,
            self.eigenvalue_threshold,
        ];
        if all.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::InvalidParameter(format!("thresholds must be >= 0, got {all:?}")));
        }
        Ok(())
    }
}

/// One validation finding.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    /// Array path, e.g. `h_one_body[3]`.
    pub path: String,
    /// Human-readable description.
    pub message: String,
}

impl Diagnostic {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic { path: path.into(), message: message.into() }
    }
}

/// Immutable input for every downstream stage.
#[derive(Debug, Clone, PartialEq)]
pub struct BlochDataset {
    /// Cell geometry.
    pub geometry: CellGeometry,
    /// k-point mesh.
    pub mesh: MeshDims,
    /// Bands per k-point `N_b`.
    pub n_b: usize,
    /// Augmentation sites.
    pub atoms: Vec<AtomSite>,
    /// Reciprocal-lattice vectors, length `N_pw`.
    pub g_list: Vec<GIndex>,
    /// `h[k]`, each `N_b × N_b`, Hartree.
    pub h_one_body: Vec<CMat>,
    /// `C_{k i,(k⊕Q) j}(G)` flattened `[Q][k][G][i][j]`.
    pub density_fourier: Vec<C64>,
    /// Optional `v'(G+Q)` flattened `[G][Q]`.
    pub kernel_table: Option<Vec<f64>>,
    /// D-tensor threshold recorded by [`apply_truncation`]; not part of the file format.
    pub d_threshold: f64,
}

impl BlochDataset {
    /// `N_k`.
    pub fn n_k(&self) -> usize {
        self.mesh.n_k()
    }

    /// `N_pw`.
    pub fn n_pw(&self) -> usize {
        self.g_list.len()
    }

    /// `N_a`.
    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    /// Spatial orbitals `N_k · N_b`.
    pub fn n_orbitals(&self) -> usize {
        self.n_k() * self.n_b
    }

    /// Flat offset of `C(G,Q,k)[i][j]` in `density_fourier`.
    pub fn density_index(&self, q: usize, k: usize, g: usize, i: usize, j: usize) -> usize {
        let nb = self.n_b;
        (((q * self.n_k() + k) * self.n_pw() + g) * nb + i) * nb + j
    }

    /// `C_{k i,(k⊕Q) j}(G)`.
    pub fn density(&self, q: usize, k: usize, g: usize, i: usize, j: usize) -> C64 {
        self.density_fourier[self.density_index(q, k, g, i, j)]
    }

    /// The `N_b × N_b` block `C(G,Q,k)`.
    pub fn density_block(&self, g: usize, q: usize, k: usize) -> CMat {
        let nb = self.n_b;
        let start = self.density_index(q, k, g, 0, 0);
        CMat::from_row_slice(nb, nb, &self.density_fourier[start..start + nb * nb])
    }

    /// Label for flat index `q`.
    pub fn k_label(&self, q: usize) -> KIndex {
        self.mesh.index(q).expect("k in range")
    }

    /// Kernel choice implied by the data: tabulated when a table is attached.
    pub fn default_kernel(&self) -> KernelKind {
        if self.kernel_table.is_some() {
            KernelKind::Tabulated
        } else {
            KernelKind::BareZeroModeRemoved
        }
    }

    /// `v'(G+Q)` for `g_list[g]` and flat `q`.
    pub fn kernel(&self, kind: KernelKind, g: usize, q: usize) -> Result<f64, Error> {
        let entry = self.kernel_table.as_ref().and_then(|t| t.get(g * self.n_k() + q).copied());
        let gq = self.geometry.g_plus_q(self.g_list[g].miller, &self.k_label(q), &self.mesh);
        coulomb_kernel(gq, kind, entry).ok_or(Error::MissingKernel { g, q })
    }

    /// `(4π/V) v'(G+Q)`.
    pub fn soft_weight(&self, kind: KernelKind, g: usize, q: usize) -> Result<f64, Error> {
        Ok(self.geometry.coulomb_prefactor() * self.kernel(kind, g, q)?)
    }

    /// Whether `(G, Q)` is the removed `G+Q = 0` mode of the bare kernel.
    pub fn is_zero_mode(&self, kind: KernelKind, g: usize, q: usize) -> bool {
        kind == KernelKind::BareZeroModeRemoved && q == 0 && self.g_list[g].is_zero()
    }

    /// Checks every structural and numerical invariant.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let (nk, nb, npw) = (self.n_k(), self.n_b, self.n_pw());
        if nb == 0 {
            out.push(Diagnostic::new("n_b", "must be >= 1"));
        }
        if npw == 0 {
            out.push(Diagnostic::new("g_list", "must contain at least one vector"));
        }
        if self.atoms.is_empty() {
            out.push(Diagnostic::new("atoms", "must contain at least one site"));
        }
        if !(self.geometry.volume > 0.0) {
            out.push(Diagnostic::new("geometry.volume", "must be > 0"));
        }
        let mut seen = BTreeSet::new();
        for (n, g) in self.g_list.iter().enumerate() {
            if !seen.insert(g.miller) {
                out.push(Diagnostic::new(format!("g_list[{n}]"), format!("duplicate vector {:?}", g.miller)));
            }
        }
        if self.h_one_body.len() != nk {
            out.push(dim("h_one_body", nk, self.h_one_body.len()));
        }
        for (k, h) in self.h_one_body.iter().enumerate() {
            if h.nrows() != nb || h.ncols() != nb {
                out.push(dim(format!("h_one_body[{k}]"), nb, h.nrows()));
                continue;
            }
            if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                out.push(Diagnostic::new(format!("h_one_body[{k}]"), "non-finite entry"));
                continue;
            }
            let r = hermiticity_residual(h);
            if r > SYMMETRY_TOL {
                out.push(Diagnostic::new(
                    format!("h_one_body[{k}]"),
                    format!("Hermiticity violation (residual {r:.3e})"),
                ));
            }
        }
        let want = nk * nk * npw * nb * nb;
        if self.density_fourier.len() != want {
            out.push(dim("density_fourier", want, self.density_fourier.len()));
        } else if let Some(p) = self.density_fourier.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            out.push(Diagnostic::new("density_fourier", format!("non-finite entry at flat offset {p}")));
        }
        for (a, atom) in self.atoms.iter().enumerate() {
            if atom.n_a == 0 {
                out.push(Diagnostic::new(format!("atoms[{a}].n_a"), "must be >= 1"));
                continue;
            }
            let wp = nk * nb * atom.n_a;
            if atom.projector_overlaps.len() != wp {
                out.push(dim(format!("atoms[{a}].projector_overlaps"), wp, atom.projector_overlaps.len()));
            } else if atom.projector_overlaps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                out.push(Diagnostic::new(format!("atoms[{a}].projector_overlaps"), "non-finite entry"));
            }
            let wc = atom.n_a.pow(4);
            if atom.c_tensor.len() != wc {
                out.push(dim(format!("atoms[{a}].c_tensor"), wc, atom.c_tensor.len()));
            } else if atom.c_tensor.iter().any(|x| !x.is_finite()) {
                out.push(Diagnostic::new(format!("atoms[{a}].c_tensor"), "non-finite entry"));
            } else {
                let r = atom.c_symmetry_residual();
                if r > SYMMETRY_TOL {
                    out.push(Diagnostic::new(
                        format!("atoms[{a}].c_tensor"),
                        format!("pair symmetry violation (residual {r:.3e})"),
                    ));
                }
            }
        }
        if let Some(t) = &self.kernel_table {
            if t.len() != npw * nk {
                out.push(dim("kernel_table", npw * nk, t.len()));
            } else if let Some(p) = t.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
                out.push(Diagnostic::new(
                    format!("kernel_table[{}][{}]", p / nk, p % nk),
                    "kernel values must be finite and >= 0",
                ));
            }
        }
        if out.is_empty() {
            let kind = self.default_kernel();
            if let Some(r) = crate::hamiltonian::soft_kappa_hermiticity_residual(self, kind) {
                let scale = self.density_fourier.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max).max(1.0);
                if r > SYMMETRY_TOL * scale {
                    out.push(Diagnostic::new(
                        "density_fourier",
                        format!("assembled soft kappa is not Hermitian (residual {r:.3e})"),
                    ));
                }
            }
        }
        out
    }

    /// Validates, turning the first diagnostic into an error.
    pub fn checked(self) -> Result<Self, Error> {
        match self.validate().into_iter().next() {
            None => Ok(self),
            Some(d) => Err(Error::Validation(format!("{}: {}", d.path, d.message))),
        }
    }
}

fn dim(path: impl Into<String>, expected: usize, found: usize) -> Diagnostic {
    let path = path.into();
    Diagnostic::new(path.clone(), Error::DimensionMismatch { path, expected, found }.to_string())
}

/// Returns a truncated copy of `ds`; the input is untouched.
///
/// Density entries and whole symmetry orbits of each C-tensor below their
/// thresholds are zeroed. The D-tensor threshold is recorded on the copy and
/// applied when D blocks are assembled.
pub fn apply_truncation(ds: &BlochDataset, policy: &TruncationPolicy) -> BlochDataset {
    let mut out = ds.clone();
    for z in out.density_fourier.iter_mut() {
        if z.norm() < policy.density_threshold {
            *z = C64::new(0.0, 0.0);
        }
    }
    for atom in out.atoms.iter_mut() {
        let n = atom.n_a;
        let idx = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;
        let src = atom.c_tensor.clone();
        for p1 in 0..n {
            for p2 in 0..n {
                for p3 in 0..n {
                    for p4 in 0..n {
                        let orbit = [
                            idx(p1, p2, p3, p4),
                            idx(p2, p1, p3, p4),
                            idx(p1, p2, p4, p3),
                            idx(p2, p1, p4, p3),
                            idx(p3, p4, p1, p2),
                            idx(p4, p3, p1, p2),
                            idx(p3, p4, p2, p1),
                            idx(p4, p3, p2, p1),
                        ];
                        let big = orbit.iter().map(|&o| src[o].abs()).fold(0.0, f64::max);
                        if big < policy.c_tensor_threshold {
                            atom.c_tensor[idx(p1, p2, p3, p4)] = 0.0;
                        }
                    }
                }
            }
        }
    }
    out.d_threshold = out.d_threshold.max(policy.d_tensor_threshold);
    out
}

/// Amplitude laws for synthetic data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Profile {
    /// Unit-scale Gaussian entries everywhere.
    Flat,
    /// Density entries scale as `(N_pw/N_a) / (16 √(N_b N_k))`: `1/N_a` at a
    /// fixed basis, while along a supercell family with fixed plane waves per
    /// atom the Coulomb metric per band pair stays of order one. Projector
    /// overlaps scale as `1/(√N_a N_k^¼)`, so D entries go as `1/(N_a √N_k)`.
    Physical,
}

/// Sizes for [`synth_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SynthSizes {
    /// k-point mesh.
    pub mesh: [usize; 3],
    /// Bands per k-point.
    pub n_b: usize,
    /// Number of atoms, one per cubic cell of a near-cubic supercell.
    pub n_atoms: usize,
    /// Partial waves per atom.
    pub n_a: usize,
    /// Plane waves.
    pub n_pw: usize,
}

/// Plane waves per atom at which physical-profile density entries have
/// scale `0.5/√(N_b N_k)`.
pub const PLANE_WAVES_PER_ATOM_REF: f64 = 16.0;

/// Edge of the cubic cell hosting one synthetic atom, Bohr.
pub const SYNTH_CELL_EDGE: f64 = 4.0;

/// The `n` shortest reciprocal vectors of `geometry`, ordered by length then
/// Miller indices.
pub fn shortest_g_vectors(geometry: &CellGeometry, n: usize) -> Vec<GIndex> {
    let mut radius = 1i32;
    loop {
        let mut all = Vec::new();
        for a in -radius..=radius {
            for b in -radius..=radius {
                for c in -radius..=radius {
                    let g = GIndex::new([a, b, c], geometry);
                    let n2: f64 = g.cart.iter().map(|x| x * x).sum();
                    all.push((n2, g));
                }
            }
        }
        all.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.miller.cmp(&y.1.miller)));
        // The box is large enough once the n-th vector is shorter than every
        // vector on the box surface.
        let surface_min = all
            .iter()
            .filter(|(_, g)| g.miller.iter().any(|m| m.abs() == radius))
            .map(|(n2, _)| *n2)
            .fold(f64::INFINITY, f64::min);
        if all.len() > n && all[n - 1].0 * (1.0 + 1e-12) < surface_min {
            return all.into_iter().take(n).map(|(_, g)| g).collect();
        }
        radius += 1;
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn cgauss(rng: &mut ChaCha8Rng) -> C64 {
    let re = gauss(rng);
    let im = gauss(rng);
    C64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}

/// Factors `[a, b, c]` of `n` with `a ≤ b ≤ c`, as close to cubic as possible.
pub fn supercell_shape(n: usize) -> [usize; 3] {
    let mut best = [1, 1, n.max(1)];
    for a in 1..=n {
        if a * a * a > n {
            break;
        }
        if n % a != 0 {
            continue;
        }
        for b in a..=n / a {
            if b * b > n / a {
                break;
            }
            if (n / a) % b == 0 {
                let c = n / a / b;
                if c * best[0] < best[2] * a {
                    best = [a, b, c];
                }
            }
        }
    }
    best
}

fn synth_c_tensor(seed: u64, n_a: usize, c_scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let raw: Vec<f64> = (0..n_a.pow(4)).map(|_| gauss(&mut rng)).collect();
    let n = n_a;
    let idx = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;
    let mut c_tensor = vec![0.0; n.pow(4)];
    for p1 in 0..n {
        for p2 in 0..n {
            for p3 in 0..n {
                for p4 in 0..n {
                    let s = raw[idx(p1, p2, p3, p4)]
                        + raw[idx(p2, p1, p3, p4)]
                        + raw[idx(p1, p2, p4, p3)]
                        + raw[idx(p2, p1, p4, p3)]
                        + raw[idx(p3, p4, p1, p2)]
                        + raw[idx(p4, p3, p1, p2)]
                        + raw[idx(p3, p4, p2, p1)]
                        + raw[idx(p4, p3, p2, p1)];
                    c_tensor[idx(p1, p2, p3, p4)] = c_scale * s / 8.0;
                }
            }
        }
    }
    // Pairwise sums above are evaluated in different orders per orbit
    // member; re-copy from the canonical representative so the pair
    // symmetries hold bit-exactly.
    for p1 in 0..n {
        for p2 in 0..n {
            for p3 in 0..n {
                for p4 in 0..n {
                    let (a, b) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
                    let (c, d) = if p3 <= p4 { (p3, p4) } else { (p4, p3) };
                    let (x, y) = if (a, b) <= (c, d) { ((a, b), (c, d)) } else { ((c, d), (a, b)) };
                    c_tensor[idx(p1, p2, p3, p4)] = c_tensor[idx(x.0, x.1, y.0, y.1)];
                }
            }
        }
    }
    c_tensor
}

/// Deterministic pseudo-random dataset satisfying every invariant.
pub fn synth_dataset(seed: u64, sizes: &SynthSizes, profile: Profile) -> Result<BlochDataset, Error> {
    let SynthSizes { mesh, n_b, n_atoms, n_a, n_pw } = *sizes;
    if n_b == 0 || n_atoms == 0 || n_a == 0 || n_pw == 0 {
        return Err(Error::InvalidParameter(format!("all synthetic sizes must be >= 1, got {sizes:?}")));
    }
    let mesh = MeshDims::new(mesh)?;
    let nk = mesh.n_k();
    let edge = SYNTH_CELL_EDGE;
    let [sa, sb, sc] = supercell_shape(n_atoms);
    let geometry = CellGeometry::orthorhombic(edge * sa as f64, edge * sb as f64, edge * sc as f64)?;
    let g_list = shortest_g_vectors(&geometry, n_pw);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let (density_scale, p_scale, c_scale) = match profile {
        Profile::Flat => (1.0, 1.0, 1.0),
        Profile::Physical => (
            0.5 * (n_pw as f64 / (PLANE_WAVES_PER_ATOM_REF * n_atoms as f64)) / libm::sqrt((n_b * nk) as f64),
            1.0 / (libm::sqrt(n_atoms as f64) * libm::pow(nk as f64, 0.25)),
            0.5,
        ),
    };

    let mut h_one_body = Vec::with_capacity(nk);
    for _ in 0..nk {
        let a = CMat::from_fn(n_b, n_b, |_, _| cgauss(&mut rng));
        let mut h = (&a + a.adjoint()) * C64::new(0.5, 0.0);
        for i in 0..n_b {
            h[(i, i)].im = 0.0;
        }
        h_one_body.push(h);
    }

    let density_fourier: Vec<C64> =
        (0..nk * nk * n_pw * n_b * n_b).map(|_| cgauss(&mut rng) * density_scale).collect();

    // One species: every atom shares the C-tensor, drawn from its own stream so
    // it does not depend on the other sizes.
    let c_tensor = synth_c_tensor(seed, n_a, c_scale);
    let mut atoms = Vec::with_capacity(n_atoms);
    for _ in 0..n_atoms {
        let projector_overlaps: Vec<C64> = (0..nk * n_b * n_a).map(|_| cgauss(&mut rng) * p_scale).collect();
        atoms.push(AtomSite { species: "H".into(), n_a, projector_overlaps, c_tensor: c_tensor.clone() });
    }

    Ok(BlochDataset {
        geometry,
        mesh,
        n_b,
        atoms,
        g_list,
        h_one_body,
        density_fourier,
        kernel_table: None,
        d_threshold: 0.0,
    })
}
