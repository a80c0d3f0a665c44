use blochpaw_core::dataset::{apply_truncation, synth_dataset, BlochDataset, Profile, SynthSizes, TruncationPolicy};
use blochpaw_core::kspace::KernelKind;
use blochpaw_core::lcu::{factor_pair_block, factorize, LcuFactorization};
use blochpaw_core::linalg::CMat;
use blochpaw_core::norm::lambda_total;
use blochpaw_core::C64;
use proptest::prelude::*;

const KIND: KernelKind = KernelKind::BareZeroModeRemoved;

fn data(seed: u64, edge: usize, n_b: usize, n_atoms: usize, n_a: usize, n_pw: usize) -> BlochDataset {
    synth_dataset(seed, &SynthSizes { mesh: [edge, 1, 1], n_b, n_atoms, n_a, n_pw }, Profile::Physical).unwrap()
}

fn ds_strategy() -> impl Strategy<Value = BlochDataset> {
    (any::<u64>(), 1usize..=2, 1usize..=3, 1usize..=2, 1usize..=2, 1usize..=4)
        .prop_map(|(s, e, b, at, a, pw)| data(s, e, b, at, a, pw))
}

fn blocks(f: &LcuFactorization) -> impl Iterator<Item = &blochpaw_core::lcu::PairBlockFactor> {
    f.soft_blocks.iter().chain(&f.hard_blocks)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn untruncated_blocks_pair_up(ds in ds_strategy()) {
        let f = factorize(&ds, KIND, &TruncationPolicy::zero()).unwrap();
        for b in blocks(&f) {
            let sum: f64 = b.spectrum.iter().sum();
            let scale = 1.0 + b.spectrum.iter().map(|x| x.abs()).sum::<f64>();
            prop_assert!(sum.abs() < 1e-12 * scale);
            let mut pos: Vec<f64> = b.spectrum.iter().filter(|x| **x > 0.0).copied().collect();
            let mut neg: Vec<f64> = b.spectrum.iter().filter(|x| **x < 0.0).map(|x| -x).collect();
            pos.sort_by(f64::total_cmp);
            neg.sort_by(f64::total_cmp);
            prop_assert_eq!(pos.len(), neg.len());
            for (a, c) in pos.iter().zip(&neg) {
                prop_assert!((a - c).abs() < 1e-12 * scale);
            }
            let fsum: f64 = b.f.iter().sum();
            prop_assert!(fsum.abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn truncation_is_idempotent(ds in ds_strategy(), e1 in -20i32..0, e2 in -20i32..0, e3 in -8i32..1) {
        let p = TruncationPolicy {
            density_threshold: 10f64.powi(e1),
            d_tensor_threshold: 10f64.powi(e2),
            c_tensor_threshold: 10f64.powi(e3),
            eigenvalue_threshold: 1e-5,
        };
        let once = apply_truncation(&ds, &p);
        prop_assert_eq!(apply_truncation(&once, &p), once);
    }

    #[test]
    fn eigenvalue_threshold_is_monotone(ds in ds_strategy(), lo in 0.0f64..0.05, extra in 0.0f64..0.2) {
        let p_lo = TruncationPolicy { eigenvalue_threshold: lo, ..TruncationPolicy::zero() };
        let p_hi = TruncationPolicy { eigenvalue_threshold: lo + extra, ..TruncationPolicy::zero() };
        let a = factorize(&ds, KIND, &p_lo).unwrap();
        let b = factorize(&ds, KIND, &p_hi).unwrap();
        for (x, y) in blocks(&a).zip(blocks(&b)) {
            prop_assert_eq!(x.key, y.key);
            prop_assert!(y.rank <= x.rank);
            prop_assert!(y.abs_sum() <= x.abs_sum() + 1e-12);
        }
        for (x, y) in a.one_body.iter().zip(&b.one_body) {
            prop_assert!(y.rank <= x.rank);
        }
        prop_assert!(lambda_total(&b).lambda_total <= lambda_total(&a).lambda_total * (1.0 + 1e-12));
    }

    #[test]
    fn soft_lambda_is_quadratic_in_density(ds in ds_strategy(), s in 0.1f64..10.0) {
        let mut scaled = ds.clone();
        scaled.density_fourier.iter_mut().for_each(|z| *z *= s);
        let a = lambda_total(&factorize(&ds, KIND, &TruncationPolicy::zero()).unwrap()).lambda_soft();
        let b = lambda_total(&factorize(&scaled, KIND, &TruncationPolicy::zero()).unwrap()).lambda_soft();
        prop_assert!((b - s * s * a).abs() <= 1e-10 * (1.0 + b.abs()));
    }

    #[test]
    fn factorization_is_deterministic(ds in ds_strategy()) {
        let p = TruncationPolicy::default();
        prop_assert_eq!(factorize(&ds, KIND, &p).unwrap(), factorize(&ds, KIND, &p).unwrap());
    }
}

/// Zeroing an entry can raise the nuclear norm and the rank, so entry-level
/// thresholds are not monotone in Σ|f| in general.
#[test]
fn entry_zeroing_can_raise_abs_sum() {
    let one = C64::new(1.0, 0.0);
    let full = CMat::from_row_slice(2, 2, &[one, one, one, one]);
    let cut = CMat::from_row_slice(2, 2, &[one, one, one, C64::new(0.0, 0.0)]);
    let a = factor_pair_block(&full, 1, 0.0);
    let b = factor_pair_block(&cut, 1, 0.0);
    assert_eq!(a.rank, 2);
    assert_eq!(b.rank, 4);
    assert!((a.abs_sum() - 2.0).abs() < 1e-12);
    assert!((b.abs_sum() - 5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn infinite_density_threshold_removes_soft_norm() {
    let ds = data(5, 2, 2, 1, 2, 3);
    let p = TruncationPolicy { density_threshold: f64::INFINITY, ..TruncationPolicy::zero() };
    let n = lambda_total(&factorize(&ds, KIND, &p).unwrap());
    assert_eq!(n.lambda_soft(), 0.0);
    assert!(n.lambda_hard() > 0.0);
}
