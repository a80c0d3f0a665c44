//! Synthetic scaling families and power-law fits.

use crate::dataset::{synth_dataset, Profile, SynthSizes, TruncationPolicy};
use crate::lcu::factorize;
use crate::norm::lambda_total;
use crate::resources::{label_counts, optimize_qroam, qpe_iterations, qubits_total, toffoli_per_step, BitParams, Objective};
use crate::Error;
use alloc::format;
use alloc::vec::Vec;

/// Which size is grown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    /// Bands, at fixed mesh, atoms and plane waves.
    Nb,
    /// k-points, `size` must be a cube `n³` and the mesh is `n×n×n`.
    Nk,
    /// Atoms, with `N_k = 1` and bands and plane waves per atom held fixed.
    Na,
}

impl Axis {
    /// Lower-case name used in file names and CSV.
    pub fn name(&self) -> &'static str {
        match self {
            Axis::Nb => "nb",
            Axis::Nk => "nk",
            Axis::Na => "na",
        }
    }

    /// Parses `nb`, `nk` or `na` (any case).
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nb" => Some(Axis::Nb),
            "nk" => Some(Axis::Nk),
            "na" => Some(Axis::Na),
            _ => None,
        }
    }
}

/// Sizes and fixed parameters held constant along an axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    /// Bands for the Nb and Nk axes, bands per atom for the Na axis.
    pub n_b: usize,
    /// Mesh edge for the Nb axis.
    pub mesh_edge: usize,
    /// Atoms for the Nb and Nk axes.
    pub n_atoms: usize,
    /// Partial waves per atom.
    pub n_a: usize,
    /// Plane waves, per atom on the Na axis.
    pub n_pw: usize,
    /// Truncation applied before factorizing.
    pub policy: TruncationPolicy,
    /// Bit widths, held fixed so only label counts move.
    pub bits: BitParams,
    /// QPE precision, Hartree.
    pub epsilon_qpe: f64,
}

impl BenchConfig {
    /// Defaults for an axis.
    pub fn default_for(axis: Axis) -> Self {
        let base = BenchConfig {
            n_b: 4,
            mesh_edge: 1,
            n_atoms: 1,
            n_a: 2,
            n_pw: 16,
            policy: TruncationPolicy::default(),
            bits: BitParams { b_r: 7, n1: 20, n2: 20, angle_bits: 16 },
            epsilon_qpe: crate::MEV_IN_HARTREE,
        };
        match axis {
            Axis::Nb => BenchConfig { mesh_edge: 2, ..base },
            Axis::Nk => BenchConfig { n_b: 8, ..base },
            Axis::Na => BenchConfig { n_b: 3, n_pw: 48, ..base },
        }
    }

    /// Default sizes for an axis. The atom range runs to 32 so the
    /// `√(N_b L R)` QROAM terms outgrow the fixed register widths.
    pub fn default_sizes(axis: Axis) -> Vec<usize> {
        match axis {
            Axis::Nb => alloc::vec![4, 8, 16, 32],
            Axis::Nk => alloc::vec![1, 8, 27, 64],
            Axis::Na => alloc::vec![1, 2, 4, 8, 16, 32],
        }
    }

    /// Dataset sizes for one point.
    pub fn sizes(&self, axis: Axis, size: usize) -> Result<SynthSizes, Error> {
        if size == 0 {
            return Err(Error::InvalidParameter("bench sizes must be >= 1".into()));
        }
        Ok(match axis {
            Axis::Nb => SynthSizes {
                mesh: [self.mesh_edge; 3],
                n_b: size,
                n_atoms: self.n_atoms,
                n_a: self.n_a,
                n_pw: self.n_pw,
            },
            Axis::Nk => {
                let edge = (1..=size).find(|e| e * e * e >= size).unwrap_or(1);
                if edge * edge * edge != size {
                    return Err(Error::InvalidParameter(format!("Nk axis size {size} is not a perfect cube")));
                }
                SynthSizes { mesh: [edge; 3], n_b: self.n_b, n_atoms: self.n_atoms, n_a: self.n_a, n_pw: self.n_pw }
            }
            Axis::Na => SynthSizes {
                mesh: [1; 3],
                n_b: self.n_b * size,
                n_atoms: size,
                n_a: self.n_a,
                n_pw: self.n_pw * size,
            },
        })
    }
}

/// One benchmark point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingPoint {
    /// Axis value.
    pub size: usize,
    /// Two-body one-norm.
    pub lambda2: f64,
    /// Toffoli count per walk step.
    pub toffoli_per_query: i64,
    /// Logical qubits.
    pub qubits: i64,
}

/// Least-squares fit of `log y = exponent · log x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFit {
    /// Slope in log-log space.
    pub exponent: f64,
    /// Intercept in log-log space.
    pub intercept: f64,
    /// Coefficient of determination, clamped to `[0, 1]`.
    pub r_squared: f64,
}

/// A grown family with fits per metric.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSeries {
    /// Grown size.
    pub axis: Axis,
    /// Points sorted by size.
    pub points: Vec<ScalingPoint>,
    /// Fit of `lambda2`.
    pub fit_lambda2: PowerFit,
    /// Fit of `toffoli_per_query`.
    pub fit_toffoli: PowerFit,
    /// Fit of `qubits`.
    pub fit_qubits: PowerFit,
}

/// Ordinary least squares on `(log x, log y)`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerFit, Error> {
    if points.len() < 3 {
        return Err(Error::InvalidParameter(format!("need >= 3 points for a fit, got {}", points.len())));
    }
    if let Some(p) = points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::InvalidParameter(format!("power-law fit needs positive values, got {p:?}")));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| libm::log(p.0)).collect();
    let ly: Vec<f64> = points.iter().map(|p| libm::log(p.1)).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("power-law fit needs at least two distinct x".into()));
    }
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let ss_res: f64 = lx.iter().zip(&ly).map(|(x, y)| {
        let r = y - intercept - exponent * x;
        r * r
    }).sum();
    // A constant y is fitted perfectly by a zero slope.
    let r_squared = if syy <= f64::EPSILON * n { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0f64, 1.0) };
    Ok(PowerFit { exponent, intercept, r_squared })
}

/// Generates, factorizes and costs one point. Every point of a series uses
/// the same seed, so per-species data is shared along the axis.
pub fn run_point(axis: Axis, size: usize, config: &BenchConfig, seed: u64) -> Result<ScalingPoint, Error> {
    let sizes = config.sizes(axis, size)?;
    let ds = synth_dataset(seed, &sizes, Profile::Physical)?;
    let kind = ds.default_kernel();
    let fact = factorize(&ds, kind, &config.policy)?;
    let norm = lambda_total(&fact);
    let counts = label_counts(&ds, &fact, &config.bits, true);
    let params = optimize_qroam(&counts, &config.bits, Objective::Gates);
    let iterations = qpe_iterations(norm.lambda_total, config.epsilon_qpe)?;
    Ok(ScalingPoint {
        size,
        lambda2: norm.lambda_two_body,
        toffoli_per_query: toffoli_per_step(&counts, &config.bits, &params),
        qubits: qubits_total(&counts, &config.bits, &params, iterations),
    })
}

/// Checks that sizes are usable for a series.
pub fn check_sizes(axis: Axis, sizes: &[usize], config: &BenchConfig) -> Result<(), Error> {
    if sizes.len() < 3 {
        return Err(Error::InvalidParameter(format!("need >= 3 sizes, got {}", sizes.len())));
    }
    let mut sorted = sizes.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter("bench sizes must be distinct".into()));
    }
    for &s in sizes {
        config.sizes(axis, s)?;
    }
    Ok(())
}

/// Sorts points by size and fits every metric.
pub fn assemble_series(axis: Axis, mut points: Vec<ScalingPoint>) -> Result<ScalingSeries, Error> {
    points.sort_by_key(|p| p.size);
    let fit = |f: &dyn Fn(&ScalingPoint) -> f64| {
        fit_power_law(&points.iter().map(|p| (p.size as f64, f(p))).collect::<Vec<_>>())
    };
    let fit_lambda2 = fit(&|p| p.lambda2)?;
    let fit_toffoli = fit(&|p| p.toffoli_per_query as f64)?;
    let fit_qubits = fit(&|p| p.qubits as f64)?;
    Ok(ScalingSeries { axis, points, fit_lambda2, fit_toffoli, fit_qubits })
}

/// Runs every point in order and fits.
pub fn run_series(axis: Axis, sizes: &[usize], config: &BenchConfig, seed: u64) -> Result<ScalingSeries, Error> {
    check_sizes(axis, sizes, config)?;
    let points = sizes.iter().map(|&s| run_point(axis, s, config, seed)).collect::<Result<Vec<_>, _>>()?;
    assemble_series(axis, points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_law() {
        let pts: Vec<_> = (1..6).map(|x| (x as f64, 3.0 * (x * x) as f64)).collect();
        let f = fit_power_law(&pts).unwrap();
        assert!((f.exponent - 2.0).abs() < 1e-12);
        assert!((f.intercept - libm::log(3.0)).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant() {
        let f = fit_power_law(&[(1.0, 5.0), (2.0, 5.0), (4.0, 5.0)]).unwrap();
        assert!(f.exponent.abs() < 1e-12);
    }

    #[test]
    fn noisy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<_> = (1..=10)
            .map(|x| {
                let x = x as f64;
                (x, libm::pow(x, 1.5) * (1.0 + 0.01 * (rng.random::<f64>() * 2.0 - 1.0)))
            })
            .collect();
        let f = fit_power_law(&pts).unwrap();
        assert!((1.4..=1.6).contains(&f.exponent));
    }

    #[test]
    fn fit_errors() {
        assert!(fit_power_law(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(fit_power_law(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
    }

    #[test]
    fn nk_sizes_are_cubes() {
        let c = BenchConfig::default_for(Axis::Nk);
        assert_eq!(c.sizes(Axis::Nk, 27).unwrap().mesh, [3, 3, 3]);
        assert!(c.sizes(Axis::Nk, 9).is_err());
        assert!(check_sizes(Axis::Nk, &[1, 8], &c).is_err());
    }

    #[test]
    fn series_is_deterministic() {
        let mut c = BenchConfig::default_for(Axis::Nb);
        c.mesh_edge = 1;
        c.n_pw = 3;
        let a = run_series(Axis::Nb, &[3, 1, 2], &c, 5).unwrap();
        assert_eq!(a, run_series(Axis::Nb, &[1, 2, 3], &c, 5).unwrap());
        assert_eq!(a.points.iter().map(|p| p.size).collect::<Vec<_>>(), [1, 2, 3]);
        assert!(run_series(Axis::Nb, &[1, 1, 2], &c, 5).is_err());
    }

    #[test]
    fn axis_names() {
        for a in [Axis::Nb, Axis::Nk, Axis::Na] {
            assert_eq!(Axis::parse(a.name()), Some(a));
        }
        assert_eq!(Axis::parse("nz"), None);
    }
}
