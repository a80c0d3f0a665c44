//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! nonzero when a gated criterion fails.
//!
//! Set `BLOCHPAW_DIAMOND_DATASET` to an exported diamond (1,1,1) dataset to
//! run the reference-row comparison on real data.

use blochpaw::commands::{bench, estimate, BenchSettings, EstimateSettings};
use blochpaw::report::to_csv;
use blochpaw_core::bench::Axis;
use blochpaw_core::dataset::{synth_dataset, AtomSite, BlochDataset, Profile, SynthSizes, TruncationPolicy};
use blochpaw_core::fock::{fock_from_integrals, fock_from_lcu, lambda_bruteforce, FockMatrix};
use blochpaw_core::hamiltonian::{h_tilde, kappa};
use blochpaw_core::kspace::{CellGeometry, GIndex, KernelKind, MeshDims};
use blochpaw_core::lcu::{factor_c_tensor, factor_pair_block, factorize, LcuFactorization};
use blochpaw_core::linalg::{hermitian_eigen, CMat};
use blochpaw_core::norm::lambda_total;
use blochpaw_core::resources::*;
use blochpaw_core::{C64, MEV_IN_HARTREE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

struct Line {
    name: &'static str,
    pass: bool,
    gated: bool,
    detail: String,
}

fn line(name: &'static str, pass: bool, detail: String) -> Line {
    Line { name, pass, gated: true, detail }
}

// ------------------------------------------------------------ Fock oracle

fn direct_fock(ds: &BlochDataset, kind: KernelKind) -> FockMatrix {
    let sectors: Vec<_> = (0..ds.n_k()).map(|q| kappa(ds, kind, q).unwrap()).collect();
    fock_from_integrals(&ds.h_one_body, &sectors, &ds.mesh).unwrap()
}

fn spectrum_diff(a: &FockMatrix, b: &FockMatrix) -> f64 {
    a.eigenvalues().iter().zip(b.eigenvalues()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// 60 datasets with `2 N_b N_k <= 12`, mixing both amplitude profiles.
fn oracle_instances() -> Vec<(u64, SynthSizes, Profile)> {
    let shapes: [([usize; 3], usize); 14] = [
        ([1, 1, 1], 1),
        ([1, 1, 1], 2),
        ([1, 1, 1], 3),
        ([1, 1, 1], 4),
        ([1, 1, 1], 5),
        ([1, 1, 1], 6),
        ([2, 1, 1], 1),
        ([2, 1, 1], 2),
        ([1, 2, 1], 3),
        ([1, 1, 3], 1),
        ([3, 1, 1], 2),
        ([2, 2, 1], 1),
        ([1, 2, 2], 1),
        ([3, 2, 1], 1),
    ];
    (0..60)
        .map(|i| {
            let (mesh, n_b) = shapes[i % shapes.len()];
            let sizes = SynthSizes { mesh, n_b, n_atoms: 1 + i % 2, n_a: 1 + (i / 2) % 3, n_pw: 1 + (i / 3) % 4 };
            let profile = if i % 4 == 3 { Profile::Physical } else { Profile::Flat };
            (1000 + i as u64, sizes, profile)
        })
        .collect()
}

struct OracleRun {
    fock_diff: f64,
    eig_diff: f64,
    lambda_rel: f64,
    bound_gap: f64,
}

fn oracle_checks() -> Vec<Line> {
    let kind = KernelKind::BareZeroModeRemoved;
    let (mut t_fock, mut t_lambda) = (0.0, 0.0);
    let mut runs = Vec::new();
    let instances = oracle_instances();
    for (seed, sizes, profile) in &instances {
        assert!(2 * sizes.n_b * sizes.mesh.iter().product::<usize>() <= 12);
        let ds = synth_dataset(*seed, sizes, *profile).unwrap();
        let t = Instant::now();
        let fact = factorize(&ds, kind, &TruncationPolicy::zero()).unwrap();
        let direct = direct_fock(&ds, kind);
        let lcu = fock_from_lcu(&fact).unwrap();
        let fock_diff = direct.max_abs_diff(&lcu);
        let eig_diff = spectrum_diff(&direct, &lcu);
        t_fock += t.elapsed().as_secs_f64();
        let t = Instant::now();
        let lam = lambda_total(&fact).lambda_total;
        let brute = lambda_bruteforce(&fact);
        let radius = direct.spectral_radius_shifted(fact.energy_shift);
        t_lambda += t.elapsed().as_secs_f64();
        runs.push(OracleRun {
            fock_diff,
            eig_diff,
            lambda_rel: (lam - brute).abs() / lam.abs().max(brute.abs()).max(f64::MIN_POSITIVE),
            bound_gap: lam + 1e-9 - radius,
        });
    }
    let max = |f: &dyn Fn(&OracleRun) -> f64| runs.iter().map(f).fold(0.0, f64::max);
    let (fd, ed, lr) = (max(&|r| r.fock_diff), max(&|r| r.eig_diff), max(&|r| r.lambda_rel));
    let min_gap = runs.iter().map(|r| r.bound_gap).fold(f64::INFINITY, f64::min);
    vec![
        line(
            "lcu_faithfulness",
            fd <= 1e-9 && ed <= 1e-8 && t_fock < 120.0,
            format!("{} datasets, max |dH| {fd:.2e}, max |d eig| {ed:.2e}, {t_fock:.1}s", runs.len()),
        ),
        line(
            "lambda_equivalence",
            lr <= 1e-10 && min_gap >= 0.0 && t_lambda < 60.0,
            format!("max rel |lambda - brute| {lr:.2e}, min (lambda + 1e-9 - radius) {min_gap:.3e}, {t_lambda:.1}s"),
        ),
    ]
}

// ------------------------------------------------------- scalar closed forms

/// `N_k = N_b = N_pw = 1` with one single-projector site. The kernel table
/// is chosen so the smooth weight `(4π/V) v` equals `w`.
fn scalar_dataset(c: f64, w: f64, p: f64, c_onsite: f64) -> BlochDataset {
    let geometry = CellGeometry::orthorhombic(1.0, 1.0, 1.0).unwrap();
    let v = w / geometry.coulomb_prefactor();
    BlochDataset {
        g_list: vec![GIndex::new([0, 0, 0], &geometry)],
        geometry,
        mesh: MeshDims::gamma(),
        n_b: 1,
        atoms: vec![AtomSite {
            species: "X".into(),
            n_a: 1,
            projector_overlaps: vec![C64::new(p, 0.0)],
            c_tensor: vec![c_onsite],
        }],
        h_one_body: vec![CMat::from_element(1, 1, C64::new(-1.0, 0.0))],
        density_fourier: vec![C64::new(c, 0.0)],
        kernel_table: Some(vec![v]),
        d_threshold: 0.0,
    }
}

fn close(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn scalar_check() -> Line {
    let mut worst = 0.0f64;
    let mut notes = Vec::new();

    let pb = factor_pair_block(&CMat::from_element(1, 1, C64::new(0.6, 0.0)), 1, 0.0);
    worst = worst.max(close(&pb.f, &[0.3, -0.3]));
    if pb.rank != 2 {
        worst = f64::INFINITY;
    }
    notes.push(format!("C=0.6 f={:?}", pb.f));

    // Hubbard atom: h = -1, kappa = w c^2 = 0.5, no on-site term.
    let ds = scalar_dataset(1.0, 0.5, 0.0, 0.0);
    assert!(ds.validate().is_empty(), "{:?}", ds.validate());
    let kind = KernelKind::Tabulated;
    let direct = direct_fock(&ds, kind);
    let want = [-1.5, -1.0, -1.0, 0.0];
    worst = worst.max(close(&direct.eigenvalues(), &want));
    let fact = factorize(&ds, kind, &TruncationPolicy::zero()).unwrap();
    worst = worst.max(close(&fock_from_lcu(&fact).unwrap().eigenvalues(), &want));
    notes.push(format!("Hubbard {:?}", direct.eigenvalues()));

    // Unit density coefficient: sigma = 1 gives f = +-0.5 for both J.
    for j in [1u8, 2] {
        let b = fact.soft_blocks.iter().find(|b| b.key.j() == j).unwrap();
        worst = worst.max(close(&b.f, &[0.5, -0.5]));
    }

    // On-site: C = 0.8 gives the pair-matrix eigenvalue (1/2)^2 0.8 = 0.2.
    // With P = 1 the pair product is A = d + d = 2, so f = +-sqrt(0.2) 2 / 2.
    let ds = scalar_dataset(0.0, 0.5, 1.0, 0.8);
    let cf = factor_c_tensor(&ds, 0, 0.0).unwrap();
    worst = worst.max(close(&cf.eigenvalues, &[0.2]));
    let fact = factorize(&ds, kind, &TruncationPolicy::zero()).unwrap();
    let s = 0.2f64.sqrt();
    for b in &fact.hard_blocks {
        worst = worst.max(close(&b.f, &[s, -s]));
    }
    worst = worst.max(direct_fock(&ds, kind).max_abs_diff(&fock_from_lcu(&fact).unwrap()));
    notes.push(format!("C-tensor eps {:?}", cf.eigenvalues));

    line("scalar_closed_forms", worst <= 1e-12, format!("max error {worst:.2e}; {}", notes.join("; ")))
}

// ----------------------------------------------------- resource integrity

fn cdiv(a: u64, b: u64) -> i64 {
    a.div_ceil(b) as i64
}

/// The per-step Toffoli total written out term by term, independent of the stage code.
fn printed_c1(c: &LabelCounts, b: &BitParams, p: &QroamParams) -> i64 {
    let l1 = c.l + 1;
    let full = c.lr + c.n_kpoints * c.r0;
    let lr = c.lr;
    let i = |x: u64| x as i64;
    let (nb, bb) = (i(c.n_b), i(b.angle_bits));
    cdiv(l1, p.k_p1) + cdiv(l1, p.kp_p1) + cdiv(l1, p.k_o) + cdiv(l1, p.kp_o)
        + cdiv(full, p.k_p2) + cdiv(lr, p.k_p2)
        + cdiv(full, p.k_r) + cdiv(lr, p.k_r)
        + cdiv(full, p.kp_r) + cdiv(lr, p.kp_r)
        + cdiv(full, p.kp_p2) + cdiv(lr, p.kp_p2)
        + i(c.b_p1) * (i(p.k_p1) - 1) + i(c.b_o) * (i(p.k_o) - 1) + 2 * i(c.b_p2) * (i(p.k_p2) - 1)
        + (4 * nb * bb + i(c.n_k)) * (i(p.k_r) - 1)
        + i(p.kp_p1) + i(p.kp_o) + 2 * i(p.kp_r) + 2 * i(p.kp_p2)
        + 9 * i(c.n_l) + 34 * i(c.n_r) + 8 * i(c.n_lr) + 3 * i(b.n1) + 6 * i(b.n2) + 12 * i(b.b_r) - 6 * i(c.eta)
        + 16 * nb * bb - 32 * nb + 6 * nb * i(c.n_kpoints) + 12 * i(c.n_k) - 43
}

fn draw(rng: &mut ChaCha8Rng, sign: bool) -> (LabelCounts, BitParams) {
    let bits = BitParams {
        b_r: rng.random_range(5..12),
        n1: rng.random_range(1..33),
        n2: rng.random_range(1..33),
        angle_bits: rng.random_range(4..24),
    };
    let n_k = rng.random_range(1..65);
    let n_b = rng.random_range(1..40);
    let r0 = rng.random_range(0..=n_b);
    let r_max = rng.random_range(r0.max(1)..=2 * n_b);
    let c = LabelCounts::from_parts(
        n_k,
        n_b,
        rng.random_range(1..500),
        rng.random_range(0..60),
        rng.random_range(0..200_000),
        r0,
        r_max,
        &bits,
        sign,
    );
    (c, bits)
}

fn random_params(rng: &mut ChaCha8Rng, max_exp: u32) -> QroamParams {
    let mut a = [0u64; 10];
    for v in &mut a {
        *v = 1 << rng.random_range(0..=max_exp);
    }
    QroamParams::from_array(a)
}

fn resource_check() -> Line {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut identity_fail = 0;
    for _ in 0..100 {
        let sign = rng.random();
        let (c, b) = draw(&mut rng, sign);
        let mut p = random_params(&mut rng, 12);
        p.kp_rb = p.kp_r;
        p.kp_p2b = p.kp_p2;
        let stages = stage_costs(&c, &b, &p).total();
        if stages != toffoli_per_step(&c, &b, &p) || stages != printed_c1(&c, &b, &p) {
            identity_fail += 1;
        }
    }
    let mut sign_fail = 0;
    for _ in 0..100 {
        let seed = rng.random();
        let (with, b) = draw(&mut ChaCha8Rng::seed_from_u64(seed), true);
        let (without, _) = draw(&mut ChaCha8Rng::seed_from_u64(seed), false);
        let p = random_params(&mut rng, 8);
        let it = rng.random_range(0..1u64 << 40);
        if with.b_o != without.b_o + 1 || qubits_total(&with, &b, &p, it) != qubits_total(&without, &b, &p, it) + 1 {
            sign_fail += 1;
        }
    }
    // Optimizer against a full joint scan: every parameter over 1..8 on
    // small counts, where that range covers every useful block size.
    let mut beaten = 0;
    let mut scanned = 0u64;
    for _ in 0..6 {
        let bits = BitParams { b_r: 7, n1: rng.random_range(2..6), n2: rng.random_range(2..6), angle_bits: rng.random_range(1..4) };
        let c = LabelCounts::from_parts(1, rng.random_range(1..3), rng.random_range(1..3), 1, rng.random_range(1..10), 1, 2, &bits, true);
        let v = toffoli_per_step(&c, &bits, &optimize_qroam(&c, &bits, Objective::Gates));
        for code in 0..(4u32.pow(10)) {
            let mut a = [0u64; 10];
            let mut x = code;
            for slot in &mut a {
                *slot = 1 << (x % 4);
                x /= 4;
            }
            scanned += 1;
            if toffoli_per_step(&c, &bits, &QroamParams::from_array(a)) < v {
                beaten += 1;
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    line(
        "resource_integrity",
        identity_fail == 0 && sign_fail == 0 && beaten == 0 && secs < 30.0,
        format!(
            "C1 identity failures {identity_fail}/100, sign-qubit failures {sign_fail}/100, \
             optimizer beaten {beaten}/{scanned} scanned vectors, {secs:.1}s"
        ),
    )
}

// --------------------------------------------------------------- scaling

fn scaling_check() -> Line {
    let t = Instant::now();
    // (axis, lambda2 band, toffoli band, qubit band)
    let bands = [
        (Axis::Nk, (1.9, 2.1), (0.8, 1.3), (0.8, 1.2)),
        (Axis::Nb, (1.8, 2.3), (0.7, 1.2), (0.8, 1.2)),
        (Axis::Na, (1.6, 2.1), (1.2, 1.6), (1.3, 1.7)),
    ];
    let mut pass = true;
    let mut notes = Vec::new();
    for (axis, bl, bt, bq) in bands {
        let s = BenchSettings {
            axis,
            sizes: None,
            seed: 7,
            threads: None,
            policy: Default::default(),
            bits: Default::default(),
            epsilon_qpe: None,
        };
        let (series, _) = bench(&s).unwrap();
        let inb = |x: f64, b: (f64, f64)| x >= b.0 && x <= b.1;
        let fits = [(series.fit_lambda2, bl), (series.fit_toffoli, bt), (series.fit_qubits, bq)];
        let ok = fits.iter().all(|(f, b)| inb(f.exponent, *b) && f.r_squared >= 0.98);
        pass &= ok;
        notes.push(format!(
            "{} lambda2 {:.3} (r2 {:.4}) toffoli {:.3} (r2 {:.4}) qubits {:.3} (r2 {:.4}){}",
            axis.name(),
            fits[0].0.exponent,
            fits[0].0.r_squared,
            fits[1].0.exponent,
            fits[1].0.r_squared,
            fits[2].0.exponent,
            fits[2].0.r_squared,
            if ok { "" } else { " OUT OF BAND" }
        ));
    }
    let secs = t.elapsed().as_secs_f64();
    line("scaling_trends", pass && secs < 600.0, format!("{}; {secs:.1}s", notes.join("; ")))
}

// ------------------------------------------------------- truncation budget

/// Puts the upper half of the G list at `1e-17` and the smallest eigenvalue
/// of each renormalized one-body kernel at `3e-6` Ha, so the default cuts have
/// something to remove.
fn with_small_tails(ds: &mut BlochDataset, kind: KernelKind) {
    let (nb, npw) = (ds.n_b, ds.n_pw());
    for (i, z) in ds.density_fourier.iter_mut().enumerate() {
        if (i / (nb * nb)) % npw >= npw.div_ceil(2) {
            *z *= 1e-17;
        }
    }
    // h̃ - h depends only on the two-body data, so shift h by the change.
    let ht = h_tilde(ds, kind).unwrap();
    for (h, t) in ds.h_one_body.iter_mut().zip(&ht) {
        let (mut vals, vecs) = hermitian_eigen(t);
        let small = (0..nb).min_by(|&a, &b| vals[a].abs().total_cmp(&vals[b].abs())).unwrap();
        vals[small] = 3e-6;
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(nb, vals.iter().map(|&x| C64::new(x, 0.0))));
        *h += &vecs * d * vecs.adjoint() - t;
    }
}

fn term_count(f: &LcuFactorization) -> usize {
    f.one_body.iter().map(|o| o.rank).sum::<usize>()
        + f.soft_blocks.iter().chain(&f.hard_blocks).map(|b| b.rank).sum::<usize>()
}

fn truncation_check() -> Line {
    let t = Instant::now();
    let kind = KernelKind::BareZeroModeRemoved;
    let cases = [
        ([1, 1, 1], 4, 1, 16),
        ([1, 1, 1], 6, 2, 32),
        ([1, 1, 1], 5, 2, 24),
        ([2, 1, 1], 3, 1, 16),
        ([1, 1, 2], 2, 2, 8),
        ([3, 1, 1], 2, 1, 12),
        ([1, 2, 1], 3, 2, 20),
        ([5, 1, 1], 1, 1, 8),
    ];
    let mut worst = 0.0f64;
    let mut dropped = 0usize;
    for (n, (mesh, n_b, n_atoms, n_pw)) in cases.into_iter().enumerate() {
        let sizes = SynthSizes { mesh, n_b, n_atoms, n_a: 2, n_pw };
        let mut ds = synth_dataset(300 + n as u64, &sizes, Profile::Physical).unwrap();
        with_small_tails(&mut ds, kind);
        let exact = direct_fock(&ds, kind);
        let full = factorize(&ds, kind, &TruncationPolicy::zero()).unwrap();
        let fact: LcuFactorization = factorize(&ds, kind, &TruncationPolicy::default()).unwrap();
        dropped += term_count(&full) - term_count(&fact);
        worst = worst.max(spectrum_diff(&exact, &fock_from_lcu(&fact).unwrap()));
    }
    let budget = 10.0 * MEV_IN_HARTREE;
    line(
        "truncation_budget",
        worst <= budget,
        format!(
            "{} physical datasets, {dropped} terms dropped, max spectral shift {:.3e} Ha ({:.4} meV), budget 10 meV, {:.1}s",
            cases.len(),
            worst,
            worst / MEV_IN_HARTREE,
            t.elapsed().as_secs_f64()
        ),
    )
}

// ------------------------------------------------------ reference row

fn reference_row_check() -> Line {
    let settings = EstimateSettings::default();
    match std::env::var_os("BLOCHPAW_DIAMOND_DATASET") {
        Some(path) => {
            let path = std::path::PathBuf::from(path);
            let result = blochpaw::io::load_valid_dataset(&path)
                .map_err(|e| e.to_string())
                .and_then(|ds| estimate(&ds, "diamond_111", &settings).map_err(|e| e.to_string()));
            match result {
                Ok(r) => Line {
                    name: "reference_row_diamond",
                    pass: true,
                    gated: false,
                    detail: format!(
                        "qubits {} (reference 1,977), toffoli_total {:.2e} (reference 2.1e9); row: {}",
                        r.qubits,
                        r.toffoli_total as f64,
                        to_csv(&[r.csv_row()]).lines().nth(1).unwrap_or("")
                    ),
                },
                Err(e) => Line { name: "reference_row_diamond", pass: false, gated: false, detail: e },
            }
        }
        None => {
            // Same pipeline and row schema on a two-atom stand-in with
            // diamond-like sizes (4 bands per atom, 8 partial waves).
            let sizes = SynthSizes { mesh: [1, 1, 1], n_b: 8, n_atoms: 2, n_a: 8, n_pw: 287 };
            let ds = synth_dataset(7, &sizes, Profile::Physical).unwrap();
            let r = estimate(&ds, "synthetic_stand_in", &settings).unwrap();
            let csv = to_csv(&[r.csv_row()]);
            Line {
                name: "reference_row_diamond",
                pass: false,
                gated: false,
                detail: format!(
                    "not desk-reproducible: no exported carbon dataset (set BLOCHPAW_DIAMOND_DATASET); \
                     row schema exercised on a synthetic stand-in: {}",
                    csv.lines().nth(1).unwrap_or("")
                ),
            }
        }
    }
}

fn main() {
    // libtest-style probes (`--list`) get an empty listing.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    // Free arguments select criteria by substring.
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |names: &[&str]| filters.is_empty() || names.iter().any(|n| filters.iter().any(|f| n.contains(f.as_str())));
    let t = Instant::now();
    let mut lines = Vec::new();
    if wanted(&["lcu_faithfulness", "lambda_equivalence"]) {
        lines.extend(oracle_checks());
    }
    let single: [(&str, fn() -> Line); 5] = [
        ("scalar_closed_forms", scalar_check),
        ("resource_integrity", resource_check),
        ("scaling_trends", scaling_check),
        ("truncation_budget", truncation_check),
        ("reference_row_diamond", reference_row_check),
    ];
    for (name, f) in single {
        if wanted(&[name]) {
            lines.push(f());
        }
    }
    println!();
    for l in &lines {
        let tag = if l.pass { "PASS" } else { "FAIL" };
        let gate = if l.gated { "" } else { " [not gated]" };
        println!("{tag} {}{gate}: {}", l.name, l.detail);
    }
    let failed = lines.iter().filter(|l| l.gated && !l.pass).count();
    println!("acceptance: {} criteria, {failed} gated failures, {:.1}s", lines.len(), t.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
