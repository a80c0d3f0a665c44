//! Dataset and factorization JSON files.
//!
//! Complex numbers are `[re, im]` pairs and every float is written as its
//! shortest round-trip decimal, so `load(save(x)) == x` bit for bit.

use blochpaw_core::dataset::{AtomSite, BlochDataset, Diagnostic, TruncationPolicy};
use blochpaw_core::kspace::{CellGeometry, GIndex, KernelKind, MeshDims};
use blochpaw_core::lcu::{BlockKey, CTensorFactor, LcuFactorization, OneBodyFactor, PairBlockFactor};
use blochpaw_core::linalg::CMat;
use blochpaw_core::C64;
use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::fmt;
use std::path::Path;

/// Dataset file version written and accepted.
pub const SCHEMA_VERSION: u64 = 1;

/// Factorization file version written and accepted.
pub const FACTORIZATION_VERSION: u64 = 1;

const DATASET_KEYS: [&str; 9] = [
    "schema_version",
    "geometry",
    "mesh",
    "n_b",
    "g_list",
    "atoms",
    "h_one_body",
    "density_fourier",
    "kernel_table",
];

/// Why a file could not be turned into a value.
#[derive(Debug)]
pub enum LoadError {
    /// The file could not be read or written.
    Io {
        /// File involved.
        path: String,
        /// Underlying error.
        source: std::io::Error,
    },
    /// The file was read but its content is malformed or inconsistent.
    Invalid(Vec<Diagnostic>),
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Io { path, source } => write!(f, "{path}: {source}"),
            LoadError::Invalid(d) => {
                for (n, x) in d.iter().enumerate() {
                    if n > 0 {
                        writeln!(f)?;
                    }
                    write!(f, "{}: {}", x.path, x.message)?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for LoadError {}

fn diag(path: impl Into<String>, message: impl Into<String>) -> Diagnostic {
    Diagnostic { path: path.into(), message: message.into() }
}

fn read(path: &Path) -> Result<String, LoadError> {
    std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.display().to_string(), source })
}

/// Writes `text` to `path`, mapping failures to [`LoadError::Io`].
pub fn write_text(path: &Path, text: &str) -> Result<(), LoadError> {
    std::fs::write(path, text).map_err(|source| LoadError::Io { path: path.display().to_string(), source })
}

/// Name of a kernel as used in files and flags.
pub fn kernel_name(kind: KernelKind) -> &'static str {
    match kind {
        KernelKind::BareZeroModeRemoved => "bare",
        KernelKind::Tabulated => "tabulated",
    }
}

/// Inverse of [`kernel_name`].
pub fn parse_kernel(s: &str) -> Option<KernelKind> {
    match s {
        "bare" => Some(KernelKind::BareZeroModeRemoved),
        "tabulated" => Some(KernelKind::Tabulated),
        _ => None,
    }
}

// ---------------------------------------------------------------- writing

fn cval(z: C64) -> Value {
    Value::Array(vec![Value::from(z.re), Value::from(z.im)])
}

/// Nests `flat` (row-major) into arrays of shape `dims`.
fn nest<T: Copy>(flat: &[T], dims: &[usize], leaf: &impl Fn(T) -> Value) -> Value {
    match dims.split_first() {
        None => leaf(flat[0]),
        Some((&n, rest)) => {
            let stride: usize = rest.iter().product();
            Value::Array((0..n).map(|i| nest(&flat[i * stride..(i + 1) * stride], rest, leaf)).collect())
        }
    }
}

fn cmat_value(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|r| Value::Array((0..m.ncols()).map(|c| cval(m[(r, c)])).collect()))
            .collect(),
    )
}

/// Serializes a dataset with keys in schema order.
pub fn dataset_to_string(ds: &BlochDataset) -> String {
    let (nk, nb, npw) = (ds.n_k(), ds.n_b, ds.n_pw());
    let l = &ds.geometry.lattice;
    let mut lattice = Vec::with_capacity(9);
    for r in 0..3 {
        for c in 0..3 {
            lattice.push(Value::from(l[(r, c)]));
        }
    }
    let mut geometry = Map::new();
    geometry.insert("lattice".into(), Value::Array(lattice));
    geometry.insert("volume".into(), Value::from(ds.geometry.volume));
    let atoms: Vec<Value> = ds
        .atoms
        .iter()
        .map(|a| {
            let mut m = Map::new();
            m.insert("species".into(), Value::from(a.species.clone()));
            m.insert("n_a".into(), Value::from(a.n_a));
            m.insert("projector_overlaps".into(), nest(&a.projector_overlaps, &[nk, nb, a.n_a], &cval));
            m.insert("c_tensor".into(), nest(&a.c_tensor, &[a.n_a; 4], &|x: f64| Value::from(x)));
            Value::Object(m)
        })
        .collect();
    // serde_json's default Map keeps keys sorted, so the top level is
    // written by hand to keep schema order.
    let mut parts: Vec<(&str, Value)> = vec![
        ("schema_version", Value::from(SCHEMA_VERSION)),
        ("geometry", Value::Object(geometry)),
        ("mesh", Value::from(ds.mesh.dims().to_vec())),
        ("n_b", Value::from(nb)),
        ("g_list", Value::Array(ds.g_list.iter().map(|g| Value::from(g.miller.to_vec())).collect())),
        ("atoms", Value::Array(atoms)),
        ("h_one_body", Value::Array(ds.h_one_body.iter().map(cmat_value).collect())),
        ("density_fourier", nest(&ds.density_fourier, &[nk, nk, npw, nb, nb], &cval)),
    ];
    if let Some(t) = &ds.kernel_table {
        parts.push(("kernel_table", nest(t, &[npw, nk], &|x: f64| Value::from(x))));
    }
    let mut out = String::from("{");
    for (n, (k, v)) in parts.iter().enumerate() {
        if n > 0 {
            out.push(',');
        }
        out.push_str(&serde_json::to_string(k).expect("string key"));
        out.push(':');
        out.push_str(&serde_json::to_string(v).expect("finite JSON value"));
    }
    out.push_str("}\n");
    out
}

/// Writes a dataset file.
pub fn save_dataset(ds: &BlochDataset, path: &Path) -> Result<(), LoadError> {
    write_text(path, &dataset_to_string(ds))
}

// ---------------------------------------------------------------- reading

struct Reader {
    diags: Vec<Diagnostic>,
}

impl Reader {
    fn fail<T>(&mut self, path: &str, msg: impl Into<String>) -> Option<T> {
        self.diags.push(diag(path, msg));
        None
    }

    fn field<'a>(&mut self, obj: &'a Map<String, Value>, key: &str, path: &str) -> Option<&'a Value> {
        match obj.get(key) {
            Some(v) => Some(v),
            None => self.fail(path, format!("missing field `{key}`")),
        }
    }

    fn object<'a>(&mut self, v: &'a Value, path: &str) -> Option<&'a Map<String, Value>> {
        match v.as_object() {
            Some(o) => Some(o),
            None => self.fail(path, "expected an object"),
        }
    }

    fn array<'a>(&mut self, v: &'a Value, path: &str, len: Option<usize>) -> Option<&'a Vec<Value>> {
        let Some(a) = v.as_array() else {
            return self.fail(path, "expected an array");
        };
        if let Some(n) = len {
            if a.len() != n {
                return self.fail(path, format!("dimension mismatch at {path}: expected {n}, found {}", a.len()));
            }
        }
        Some(a)
    }

    fn usize(&mut self, v: &Value, path: &str) -> Option<usize> {
        match v.as_u64() {
            Some(x) => Some(x as usize),
            None => self.fail(path, "expected a nonnegative integer"),
        }
    }

    fn real(&mut self, v: &Value, path: &str) -> Option<f64> {
        if v.is_array() {
            return self.fail(path, "expected a real number, found a complex value");
        }
        match v.as_f64() {
            Some(x) => Some(x),
            None => self.fail(path, "expected a number"),
        }
    }

    fn complex(&mut self, v: &Value, path: &str) -> Option<C64> {
        match v.as_array().map(|a| a.as_slice()) {
            Some([re, im]) => match (re.as_f64(), im.as_f64()) {
                (Some(re), Some(im)) => Some(C64::new(re, im)),
                _ => self.fail(path, "expected numeric [re, im]"),
            },
            _ => self.fail(path, "expected a complex number as [re, im]"),
        }
    }

    /// Reads nested arrays of shape `dims` into `out`, row-major. Returns
    /// false (with a diagnostic) on the first shape or type error.
    fn nested<T>(
        &mut self,
        v: &Value,
        path: &str,
        dims: &[usize],
        out: &mut Vec<T>,
        leaf: &impl Fn(&mut Self, &Value, &str) -> Option<T>,
    ) -> bool {
        match dims.split_first() {
            None => match leaf(self, v, path) {
                Some(x) => {
                    out.push(x);
                    true
                }
                None => false,
            },
            Some((&n, rest)) => {
                let Some(a) = self.array(v, path, Some(n)) else {
                    return false;
                };
                a.iter().enumerate().all(|(i, x)| self.nested(x, &format!("{path}[{i}]"), rest, out, leaf))
            }
        }
    }

    fn complex_array(&mut self, v: &Value, path: &str, dims: &[usize]) -> Option<Vec<C64>> {
        let mut out = Vec::with_capacity(dims.iter().product());
        self.nested(v, path, dims, &mut out, &|r: &mut Self, x: &Value, p: &str| r.complex(x, p)).then_some(out)
    }

    fn real_array(&mut self, v: &Value, path: &str, dims: &[usize]) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(dims.iter().product());
        self.nested(v, path, dims, &mut out, &|r: &mut Self, x: &Value, p: &str| r.real(x, p)).then_some(out)
    }

    fn cmat(&mut self, v: &Value, path: &str, rows: usize, cols: usize) -> Option<CMat> {
        let flat = self.complex_array(v, path, &[rows, cols])?;
        Some(CMat::from_row_slice(rows, cols, &flat))
    }
}

fn parse_json(text: &str) -> Result<Value, LoadError> {
    serde_json::from_str(text).map_err(|e| LoadError::Invalid(vec![diag("$", format!("malformed JSON: {e}"))]))
}

/// Parses dataset JSON. Shapes are checked against `mesh`, `n_b`, `g_list`
/// and each site's `n_a`; numerical invariants are left to
/// [`BlochDataset::validate`].
pub fn dataset_from_str(text: &str) -> Result<BlochDataset, LoadError> {
    let root = parse_json(text)?;
    let mut r = Reader { diags: Vec::new() };
    let ds = read_dataset(&mut r, &root);
    match ds {
        Some(ds) if r.diags.is_empty() => Ok(ds),
        _ => Err(LoadError::Invalid(r.diags)),
    }
}

fn read_dataset(r: &mut Reader, root: &Value) -> Option<BlochDataset> {
    let obj = r.object(root, "$")?;
    for k in obj.keys() {
        if !DATASET_KEYS.contains(&k.as_str()) {
            r.diags.push(diag(k.as_str(), "unknown field"));
        }
    }
    let version = r.field(obj, "schema_version", "schema_version").and_then(|v| v.as_u64());
    if version != Some(SCHEMA_VERSION) {
        return r.fail("schema_version", format!("unsupported schema version {version:?}, expected {SCHEMA_VERSION}"));
    }

    let gobj = r.field(obj, "geometry", "geometry").and_then(|v| r.object(v, "geometry"))?;
    let lattice = r.field(gobj, "lattice", "geometry").and_then(|v| r.real_array(v, "geometry.lattice", &[9]));
    let volume = r.field(gobj, "volume", "geometry").and_then(|v| r.real(v, "geometry.volume"));
    let geometry = match (lattice, volume) {
        (Some(l), Some(volume)) => match CellGeometry::new(Matrix3::from_row_slice(&l)) {
            Ok(mut g) => {
                if !((g.volume - volume).abs() <= 1e-9 * g.volume) {
                    r.diags.push(diag(
                        "geometry.volume",
                        format!("volume {volume} does not match |det lattice| = {}", g.volume),
                    ));
                }
                // The stored value wins so a round trip is exact.
                g.volume = volume;
                Some(g)
            }
            Err(e) => r.fail("geometry.lattice", e.to_string()),
        },
        _ => None,
    };

    let mesh = r.field(obj, "mesh", "mesh").and_then(|v| {
        let a = r.array(v, "mesh", Some(3))?;
        let d: Vec<usize> = a.iter().enumerate().filter_map(|(i, x)| r.usize(x, &format!("mesh[{i}]"))).collect();
        match MeshDims::new([*d.first()?, *d.get(1)?, *d.get(2)?]) {
            Ok(m) => Some(m),
            Err(e) => r.fail("mesh", e.to_string()),
        }
    });
    let n_b = r.field(obj, "n_b", "n_b").and_then(|v| r.usize(v, "n_b"));
    let g_raw = r.field(obj, "g_list", "g_list").and_then(|v| r.array(v, "g_list", None));
    let (geometry, mesh, n_b, g_raw) = (geometry?, mesh?, n_b?, g_raw?);
    let nk = mesh.n_k();

    let mut g_list = Vec::with_capacity(g_raw.len());
    for (n, g) in g_raw.iter().enumerate() {
        let path = format!("g_list[{n}]");
        let a = r.array(g, &path, Some(3))?;
        let mut m = [0i32; 3];
        for (c, x) in a.iter().enumerate() {
            match x.as_i64().and_then(|v| i32::try_from(v).ok()) {
                Some(v) => m[c] = v,
                None => return r.fail(&path, "expected integer Miller indices"),
            }
        }
        g_list.push(GIndex::new(m, &geometry));
    }
    let npw = g_list.len();

    let atoms_raw = r.field(obj, "atoms", "atoms").and_then(|v| r.array(v, "atoms", None))?;
    let mut atoms = Vec::with_capacity(atoms_raw.len());
    for (a, v) in atoms_raw.iter().enumerate() {
        let path = format!("atoms[{a}]");
        let o = r.object(v, &path)?;
        for k in o.keys() {
            if !["species", "n_a", "projector_overlaps", "c_tensor"].contains(&k.as_str()) {
                r.diags.push(diag(format!("{path}.{k}"), "unknown field"));
            }
        }
        let species = match r.field(o, "species", &path)?.as_str() {
            Some(s) => s.to_string(),
            None => return r.fail(&format!("{path}.species"), "expected a string"),
        };
        let n_a = r.field(o, "n_a", &path)?;
        let n_a = r.usize(n_a, &format!("{path}.n_a"))?;
        let p = r.field(o, "projector_overlaps", &path)?;
        let projector_overlaps = r.complex_array(p, &format!("{path}.projector_overlaps"), &[nk, n_b, n_a])?;
        let c = r.field(o, "c_tensor", &path)?;
        let c_tensor = r.real_array(c, &format!("{path}.c_tensor"), &[n_a; 4])?;
        atoms.push(AtomSite { species, n_a, projector_overlaps, c_tensor });
    }

    let h_raw = r.field(obj, "h_one_body", "h_one_body").and_then(|v| r.array(v, "h_one_body", Some(nk)))?;
    let mut h_one_body = Vec::with_capacity(nk);
    for (k, h) in h_raw.iter().enumerate() {
        h_one_body.push(r.cmat(h, &format!("h_one_body[{k}]"), n_b, n_b)?);
    }
    let density_fourier = r
        .field(obj, "density_fourier", "density_fourier")
        .and_then(|v| r.complex_array(v, "density_fourier", &[nk, nk, npw, n_b, n_b]))?;
    let kernel_table = match obj.get("kernel_table") {
        None | Some(Value::Null) => None,
        Some(v) => Some(r.real_array(v, "kernel_table", &[npw, nk])?),
    };
    Some(BlochDataset {
        geometry,
        mesh,
        n_b,
        atoms,
        g_list,
        h_one_body,
        density_fourier,
        kernel_table,
        d_threshold: 0.0,
    })
}

/// Reads a dataset file without running [`BlochDataset::validate`].
pub fn load_dataset(path: &Path) -> Result<BlochDataset, LoadError> {
    dataset_from_str(&read(path)?)
}

/// Reads a dataset file and rejects it unless every invariant holds.
pub fn load_valid_dataset(path: &Path) -> Result<BlochDataset, LoadError> {
    let ds = load_dataset(path)?;
    let d = ds.validate();
    if d.is_empty() {
        Ok(ds)
    } else {
        Err(LoadError::Invalid(d))
    }
}

// ---------------------------------------------------------- factorization

/// A threshold that may be infinite; written as a number or `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Bound {
    Finite(f64),
    Text(String),
}

mod threshold {
    use super::Bound;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            Bound::Finite(*x).serialize(s)
        } else {
            Bound::Text(if *x > 0.0 { "inf".into() } else { "nan".into() }).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Bound::deserialize(d)? {
            Bound::Finite(x) => Ok(x),
            Bound::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Bound::Text(t) => Err(serde::de::Error::custom(format!("bad threshold {t:?}"))),
        }
    }
}

/// Truncation thresholds as written in files and reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyJson {
    /// Density Fourier coefficient cut.
    #[serde(with = "threshold")]
    pub density_threshold: f64,
    /// D-tensor cut.
    #[serde(with = "threshold")]
    pub d_tensor_threshold: f64,
    /// C-tensor entry and eigenvalue cut.
    #[serde(with = "threshold")]
    pub c_tensor_threshold: f64,
    /// One-body and pair-block eigenvalue cut.
    #[serde(with = "threshold")]
    pub eigenvalue_threshold: f64,
}

impl From<TruncationPolicy> for PolicyJson {
    fn from(p: TruncationPolicy) -> Self {
        PolicyJson {
            density_threshold: p.density_threshold,
            d_tensor_threshold: p.d_tensor_threshold,
            c_tensor_threshold: p.c_tensor_threshold,
            eigenvalue_threshold: p.eigenvalue_threshold,
        }
    }
}

impl From<PolicyJson> for TruncationPolicy {
    fn from(p: PolicyJson) -> Self {
        TruncationPolicy {
            density_threshold: p.density_threshold,
            d_tensor_threshold: p.d_tensor_threshold,
            c_tensor_threshold: p.c_tensor_threshold,
            eigenvalue_threshold: p.eigenvalue_threshold,
        }
    }
}

type CRows = Vec<Vec<[f64; 2]>>;

fn cmat_rows(m: &CMat) -> CRows {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OneBodyJson {
    k: usize,
    eigenvalues: Vec<f64>,
    rotation: CRows,
    rank: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
enum KeyJson {
    Soft { j: u8, g: usize, q: usize, k: usize },
    Hard { j: u8, atom: usize, m: usize, q: usize, k: usize },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockJson {
    key: KeyJson,
    f: Vec<f64>,
    spectrum: Vec<f64>,
    rotation: CRows,
    rank: usize,
    weight: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CFactorJson {
    atom: usize,
    eigenvalues: Vec<f64>,
    o: Vec<Vec<f64>>,
    retained: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorizationJson {
    schema_version: u64,
    mesh: [usize; 3],
    n_b: usize,
    kernel: String,
    policy: PolicyJson,
    energy_shift: f64,
    one_body: Vec<OneBodyJson>,
    soft_blocks: Vec<BlockJson>,
    hard_blocks: Vec<BlockJson>,
    c_factors: Vec<CFactorJson>,
}

fn block_json(b: &PairBlockFactor) -> BlockJson {
    let key = match b.key {
        BlockKey::Soft { j, g, q, k } => KeyJson::Soft { j, g, q, k },
        BlockKey::Hard { j, atom, m, q, k } => KeyJson::Hard { j, atom, m, q, k },
    };
    BlockJson {
        key,
        f: b.f.clone(),
        spectrum: b.spectrum.clone(),
        rotation: cmat_rows(&b.rotation),
        rank: b.rank,
        weight: b.weight,
    }
}

/// Serializes a factorization.
pub fn factorization_to_string(f: &LcuFactorization) -> String {
    let doc = FactorizationJson {
        schema_version: FACTORIZATION_VERSION,
        mesh: f.mesh.dims(),
        n_b: f.n_b,
        kernel: kernel_name(f.kernel).into(),
        policy: f.policy.into(),
        energy_shift: f.energy_shift,
        one_body: f
            .one_body
            .iter()
            .map(|o| OneBodyJson {
                k: o.k,
                eigenvalues: o.eigenvalues.clone(),
                rotation: cmat_rows(&o.rotation),
                rank: o.rank,
            })
            .collect(),
        soft_blocks: f.soft_blocks.iter().map(block_json).collect(),
        hard_blocks: f.hard_blocks.iter().map(block_json).collect(),
        c_factors: f
            .c_factors
            .iter()
            .map(|c| CFactorJson {
                atom: c.atom,
                eigenvalues: c.eigenvalues.clone(),
                o: (0..c.o.nrows()).map(|r| c.o.row(r).iter().copied().collect()).collect(),
                retained: c.retained.clone(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string(&doc).expect("finite factorization");
    s.push('\n');
    s
}

/// Writes a factorization file.
pub fn save_factorization(f: &LcuFactorization, path: &Path) -> Result<(), LoadError> {
    write_text(path, &factorization_to_string(f))
}

fn square(rows: &CRows, n: usize, path: &str, diags: &mut Vec<Diagnostic>) -> Option<CMat> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        diags.push(diag(path, format!("expected a {n}x{n} matrix")));
        return None;
    }
    Some(CMat::from_fn(n, n, |r, c| C64::new(rows[r][c][0], rows[r][c][1])))
}

fn read_block(b: BlockJson, n: usize, path: &str, diags: &mut Vec<Diagnostic>) -> Option<PairBlockFactor> {
    let key = match b.key {
        KeyJson::Soft { j, g, q, k } => BlockKey::Soft { j, g, q, k },
        KeyJson::Hard { j, atom, m, q, k } => BlockKey::Hard { j, atom, m, q, k },
    };
    if !matches!(key.j(), 1 | 2) {
        diags.push(diag(format!("{path}.key.j"), "must be 1 or 2"));
    }
    if b.rank != b.f.len() || b.f.len() > n || b.spectrum.len() != n {
        diags.push(diag(path, format!("rank {} / f {} / spectrum {} inconsistent with size {n}", b.rank, b.f.len(), b.spectrum.len())));
        return None;
    }
    let rotation = square(&b.rotation, n, &format!("{path}.rotation"), diags)?;
    Some(PairBlockFactor { key, f: b.f, spectrum: b.spectrum, rotation, rank: b.rank, weight: b.weight })
}

/// Parses factorization JSON and checks shapes.
pub fn factorization_from_str(text: &str) -> Result<LcuFactorization, LoadError> {
    let doc: FactorizationJson = serde_json::from_str(text)
        .map_err(|e| LoadError::Invalid(vec![diag("$", format!("malformed factorization: {e}"))]))?;
    let mut diags = Vec::new();
    if doc.schema_version != FACTORIZATION_VERSION {
        diags.push(diag("schema_version", format!("unsupported version {}", doc.schema_version)));
    }
    let mesh = MeshDims::new(doc.mesh).map_err(|e| LoadError::Invalid(vec![diag("mesh", e.to_string())]))?;
    let kernel = parse_kernel(&doc.kernel);
    if kernel.is_none() {
        diags.push(diag("kernel", format!("unknown kernel {:?}", doc.kernel)));
    }
    let nb = doc.n_b;
    let mut one_body = Vec::new();
    for (n, o) in doc.one_body.into_iter().enumerate() {
        let path = format!("one_body[{n}]");
        if o.k >= mesh.n_k() || o.eigenvalues.len() != nb || o.rank > nb {
            diags.push(diag(&path, "k, eigenvalue count or rank out of range"));
            continue;
        }
        if let Some(rotation) = square(&o.rotation, nb, &format!("{path}.rotation"), &mut diags) {
            one_body.push(OneBodyFactor { k: o.k, eigenvalues: o.eigenvalues, rotation, rank: o.rank });
        }
    }
    let mut blocks = [Vec::new(), Vec::new()];
    for (slot, (name, list)) in [("soft_blocks", doc.soft_blocks), ("hard_blocks", doc.hard_blocks)].into_iter().enumerate() {
        for (n, b) in list.into_iter().enumerate() {
            let path = format!("{name}[{n}]");
            let in_range = {
                let k = match b.key {
                    KeyJson::Soft { q, k, .. } | KeyJson::Hard { q, k, .. } => q.max(k),
                };
                k < mesh.n_k()
            };
            if !in_range {
                diags.push(diag(&path, "k or Q out of range"));
                continue;
            }
            if let Some(b) = read_block(b, 2 * nb, &path, &mut diags) {
                blocks[slot].push(b);
            }
        }
    }
    let mut c_factors = Vec::new();
    for (n, c) in doc.c_factors.into_iter().enumerate() {
        let m = c.eigenvalues.len();
        if c.retained.len() != m || c.o.len() != m || c.o.iter().any(|r| r.len() != m) {
            diags.push(diag(format!("c_factors[{n}]"), format!("expected {m} eigenvalues, flags and a {m}x{m} O")));
            continue;
        }
        let o = DMatrix::from_fn(m, m, |r, col| c.o[r][col]);
        c_factors.push(CTensorFactor { atom: c.atom, eigenvalues: c.eigenvalues, o, retained: c.retained });
    }
    if !diags.is_empty() {
        return Err(LoadError::Invalid(diags));
    }
    let [soft_blocks, hard_blocks] = blocks;
    Ok(LcuFactorization {
        mesh,
        n_b: nb,
        kernel: kernel.expect("checked above"),
        one_body,
        soft_blocks,
        hard_blocks,
        c_factors,
        energy_shift: doc.energy_shift,
        policy: doc.policy.into(),
    })
}

/// Reads a factorization file.
pub fn load_factorization(path: &Path) -> Result<LcuFactorization, LoadError> {
    factorization_from_str(&read(path)?)
}
