//! Momentum-mesh bookkeeping: k-point labels, modular addition, reciprocal
//! lattice vectors and the Coulomb kernel.

use crate::Error;
use alloc::format;
use nalgebra::{Matrix3, RowVector3};

/// Monkhorst-Pack style mesh dimensions `(m1, m2, m3)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MeshDims {
    dims: [usize; 3],
}

impl MeshDims {
    /// Builds a mesh; every dimension must be at least one.
    pub fn new(dims: [usize; 3]) -> Result<Self, Error> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Validation(format!("mesh dimensions must be >= 1, got {dims:?}")));
        }
        Ok(MeshDims { dims })
    }

    /// The Gamma-only mesh `(1, 1, 1)`.
    pub fn gamma() -> Self {
        MeshDims { dims: [1, 1, 1] }
    }

    /// Dimensions `(m1, m2, m3)`.
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Number of k-points `N_k`.
    pub fn n_k(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    /// Label for a flat index in `[0, N_k)`.
    pub fn index(&self, flat: usize) -> Result<KIndex, Error> {
        if flat >= self.n_k() {
            return Err(Error::Validation(format!("k index {flat} out of range for N_k = {}", self.n_k())));
        }
        let [_, m2, m3] = self.dims;
        let coords = [flat / (m2 * m3), (flat / m3) % m2, flat % m3];
        Ok(KIndex { coords, flat })
    }

    /// Label for integer coordinates, each in `[0, dims[a])`.
    pub fn from_coords(&self, coords: [usize; 3]) -> Result<KIndex, Error> {
        for a in 0..3 {
            if coords[a] >= self.dims[a] {
                return Err(Error::Validation(format!(
                    "k coordinates {coords:?} out of range for mesh {:?}",
                    self.dims
                )));
            }
        }
        let [_, m2, m3] = self.dims;
        Ok(KIndex { coords, flat: (coords[0] * m2 + coords[1]) * m3 + coords[2] })
    }

    /// All k-points in flat order.
    pub fn iter(&self) -> impl Iterator<Item = KIndex> + '_ {
        (0..self.n_k()).map(move |f| self.index(f).expect("in range"))
    }

    fn check(&self, k: &KIndex) -> Result<(), Error> {
        let again = self.from_coords(k.coords)?;
        if again.flat != k.flat {
            return Err(Error::Validation(format!("inconsistent k label {k:?}")));
        }
        Ok(())
    }

    /// `k ⊕ q`, componentwise modulo the mesh.
    pub fn mod_add(&self, k: &KIndex, q: &KIndex) -> Result<KIndex, Error> {
        self.check(k)?;
        self.check(q)?;
        Ok(self.add_flat(k.flat, q.flat))
    }

    /// Flat-index version of [`MeshDims::mod_add`] without validation.
    pub fn add_flat(&self, k: usize, q: usize) -> KIndex {
        let a = self.index(k).expect("k in range");
        let b = self.index(q).expect("q in range");
        let mut c = [0; 3];
        for i in 0..3 {
            c[i] = (a.coords[i] + b.coords[i]) % self.dims[i];
        }
        self.from_coords(c).expect("reduced")
    }

    /// Additive inverse of `k` on the mesh.
    pub fn neg(&self, k: &KIndex) -> KIndex {
        let mut c = [0; 3];
        for i in 0..3 {
            c[i] = (self.dims[i] - k.coords[i]) % self.dims[i];
        }
        self.from_coords(c).expect("reduced")
    }

    /// Table `t[q][k] = k ⊕ q` as flat indices.
    pub fn add_table(&self) -> alloc::vec::Vec<alloc::vec::Vec<usize>> {
        let n = self.n_k();
        (0..n).map(|q| (0..n).map(|k| self.add_flat(k, q).flat).collect()).collect()
    }
}

/// A crystal-momentum label on a mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KIndex {
    /// Integer coordinates, `coords[a] < dims[a]`.
    pub coords: [usize; 3],
    /// Row-major flat index.
    pub flat: usize,
}

/// A reciprocal-lattice vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GIndex {
    /// Integer (Miller) coordinates.
    pub miller: [i32; 3],
    /// Cartesian components in inverse Bohr.
    pub cart: [f64; 3],
}

impl GIndex {
    /// Builds the vector and its Cartesian form for a cell.
    pub fn new(miller: [i32; 3], geometry: &CellGeometry) -> Self {
        let cart = geometry.to_cartesian([miller[0] as f64, miller[1] as f64, miller[2] as f64]);
        GIndex { miller, cart }
    }

    /// True for `G = 0`.
    pub fn is_zero(&self) -> bool {
        self.miller == [0, 0, 0]
    }
}

/// Real-space lattice, reciprocal lattice and cell volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    /// Lattice vectors as rows, Bohr.
    pub lattice: Matrix3<f64>,
    /// Reciprocal vectors as rows, `2π (latticeᵀ)⁻¹`, inverse Bohr.
    pub recip: Matrix3<f64>,
    /// `|det lattice|`, Bohr³.
    pub volume: f64,
}

impl CellGeometry {
    /// Geometry from lattice rows. Fails on a singular lattice.
    pub fn new(lattice: Matrix3<f64>) -> Result<Self, Error> {
        let det = lattice.determinant();
        if !(det.abs() > 0.0) || !det.is_finite() {
            return Err(Error::Validation(format!("lattice is singular (det = {det})")));
        }
        let inv = lattice
            .transpose()
            .try_inverse()
            .ok_or_else(|| Error::Validation(format!("lattice is singular (det = {det})")))?;
        Ok(CellGeometry { lattice, recip: inv * (2.0 * core::f64::consts::PI), volume: det.abs() })
    }

    /// Orthorhombic cell with edge lengths `a`, `b`, `c`.
    pub fn orthorhombic(a: f64, b: f64, c: f64) -> Result<Self, Error> {
        Self::new(Matrix3::new(a, 0.0, 0.0, 0.0, b, 0.0, 0.0, 0.0, c))
    }

    /// Cartesian form of fractional reciprocal coordinates.
    pub fn to_cartesian(&self, frac: [f64; 3]) -> [f64; 3] {
        let v = RowVector3::new(frac[0], frac[1], frac[2]) * self.recip;
        [v[0], v[1], v[2]]
    }

    /// Cartesian `G + Q` for Miller indices `g` and mesh label `q`.
    pub fn g_plus_q(&self, g: [i32; 3], q: &KIndex, mesh: &MeshDims) -> [f64; 3] {
        let d = mesh.dims();
        let mut frac = [0.0; 3];
        for a in 0..3 {
            frac[a] = g[a] as f64 + q.coords[a] as f64 / d[a] as f64;
        }
        self.to_cartesian(frac)
    }

    /// `4π / V`.
    pub fn coulomb_prefactor(&self) -> f64 {
        4.0 * core::f64::consts::PI / self.volume
    }
}

/// Which Coulomb kernel `v'(G+Q)` to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum KernelKind {
    /// `1/|G+Q|²` with the `G+Q = 0` mode set to zero.
    #[default]
    BareZeroModeRemoved,
    /// Values supplied with the dataset, keyed by `(G, Q)`.
    Tabulated,
}

/// Kernel value `v'(g_plus_q)` without the `4π/V` prefactor.
///
/// `table_entry` is consulted only for [`KernelKind::Tabulated`]; `None`
/// there means the entry is missing.
pub fn coulomb_kernel(g_plus_q: [f64; 3], kind: KernelKind, table_entry: Option<f64>) -> Option<f64> {
    match kind {
        KernelKind::BareZeroModeRemoved => {
            let n2 = g_plus_q.iter().map(|x| x * x).sum::<f64>();
            Some(if n2 == 0.0 { 0.0 } else { 1.0 / n2 })
        }
        KernelKind::Tabulated => table_entry,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mod_add_examples() {
        let m = MeshDims::new([2, 2, 2]).unwrap();
        let s = m.mod_add(&m.from_coords([1, 0, 1]).unwrap(), &m.from_coords([1, 1, 1]).unwrap()).unwrap();
        assert_eq!(s.coords, [0, 1, 0]);
        let m = MeshDims::new([3, 3, 3]).unwrap();
        let s = m.mod_add(&m.from_coords([0, 0, 0]).unwrap(), &m.from_coords([2, 1, 0]).unwrap()).unwrap();
        assert_eq!(s.coords, [2, 1, 0]);
        let s = m.mod_add(&m.from_coords([2, 2, 0]).unwrap(), &m.from_coords([2, 0, 1]).unwrap()).unwrap();
        assert_eq!(s.coords, [1, 2, 1]);
    }

    #[test]
    fn out_of_range_rejected() {
        let m = MeshDims::new([2, 2, 2]).unwrap();
        let bad = KIndex { coords: [2, 0, 0], flat: 8 };
        assert!(m.mod_add(&bad, &m.index(0).unwrap()).is_err());
        assert!(m.index(8).is_err());
        assert!(MeshDims::new([0, 1, 1]).is_err());
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(coulomb_kernel([2.0, 0.0, 0.0], KernelKind::BareZeroModeRemoved, None), Some(0.25));
        assert_eq!(coulomb_kernel([0.0; 3], KernelKind::BareZeroModeRemoved, None), Some(0.0));
        assert_eq!(coulomb_kernel([1.0, 0.0, 0.0], KernelKind::Tabulated, Some(0.173)), Some(0.173));
        assert_eq!(coulomb_kernel([1.0, 0.0, 0.0], KernelKind::Tabulated, None), None);
    }

    #[test]
    fn reciprocal_is_dual() {
        let lat = Matrix3::new(0.0, 3.37, 3.37, 3.37, 0.0, 3.37, 3.37, 3.37, 0.0);
        let g = CellGeometry::new(lat).unwrap();
        let prod = g.lattice * g.recip.transpose();
        let two_pi = 2.0 * core::f64::consts::PI;
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { two_pi } else { 0.0 };
                assert!((prod[(i, j)] - want).abs() < 1e-12 * two_pi);
            }
        }
        assert!((g.volume - 2.0 * 3.37f64.powi(3)).abs() < 1e-10);
    }
}
