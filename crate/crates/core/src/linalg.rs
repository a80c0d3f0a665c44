//! Small dense linear-algebra helpers on top of nalgebra.

use crate::C64;
use alloc::vec::Vec;
use nalgebra::DMatrix;

/// Dense complex matrix.
pub type CMat = DMatrix<C64>;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    /// Empty sum.
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one term.
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Current value.
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Compensated sum of a sequence.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut s = CompensatedSum::new();
    for x in xs {
        s.add(x);
    }
    s.value()
}

/// Largest entry of `|A - A^H|`.
pub fn hermiticity_residual(a: &CMat) -> f64 {
    let n = a.nrows();
    if a.ncols() != n {
        return f64::INFINITY;
    }
    let mut r = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            r = r.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    r
}

/// Largest `|a_ij - b_ij|`.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Eigen-decomposition of a Hermitian matrix (upper and lower parts are
/// averaged first). Eigenvalues come back in nalgebra's order.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let sym = (a + a.adjoint()) * C64::new(0.5, 0.0);
    let e = sym.symmetric_eigen();
    (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let sym = (a + a.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Index of the largest-magnitude entry of column `c` (first one on ties).
pub fn pivot_index(m: &CMat, c: usize) -> usize {
    let mut best = 0;
    let mut mag = -1.0;
    for r in 0..m.nrows() {
        let v = m[(r, c)].norm();
        if v > mag * (1.0 + 1e-12) {
            mag = v;
            best = r;
        }
    }
    best
}

/// Rotates column `c` by a phase so its pivot entry is real and positive.
pub fn fix_column_phase(m: &mut CMat, c: usize) {
    let p = pivot_index(m, c);
    let v = m[(p, c)];
    let n = v.norm();
    if n == 0.0 {
        return;
    }
    let phase = v.conj() / n;
    for r in 0..m.nrows() {
        m[(r, c)] *= phase;
    }
    m[(p, c)] = C64::new(m[(p, c)].norm(), 0.0);
}

/// `max |U^H U - I|`.
pub fn unitarity_residual(u: &CMat) -> f64 {
    let g = u.adjoint() * u;
    let mut r = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let want = if i == j { 1.0 } else { 0.0 };
            r = r.max((g[(i, j)] - C64::new(want, 0.0)).norm());
        }
    }
    r
}

/// Singular value decomposition `c = U diag(σ) V†` of a square matrix,
/// `σ` descending.
///
/// nalgebra's complex SVD returns a wrong factorization for some
/// rank-deficient inputs. Its result is checked (reconstruction and
/// unitarity) and replaced by [`svd_jacobi`] when the check fails.
pub fn svd_checked(c: &CMat) -> (Vec<f64>, CMat, CMat) {
    let n = c.nrows();
    assert_eq!(n, c.ncols(), "square input expected");
    if n == 0 || c.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
        return (alloc::vec![0.0; n], CMat::identity(n, n), CMat::identity(n, n));
    }
    let svd = c.clone().svd(true, true);
    if let (Some(u), Some(vt)) = (svd.u, svd.v_t) {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let mut us = CMat::zeros(n, n);
        let mut vs = CMat::zeros(n, n);
        let v = vt.adjoint();
        for (t, &s) in order.iter().enumerate() {
            us.set_column(t, &u.column(s));
            vs.set_column(t, &v.column(s));
        }
        let sigma: Vec<f64> = order.iter().map(|&s| svd.singular_values[s]).collect();
        let mut rec = us.clone();
        for (t, &x) in sigma.iter().enumerate() {
            rec.column_mut(t).scale_mut(x);
        }
        let scale = sigma[0].max(f64::MIN_POSITIVE);
        let tol = 64.0 * f64::EPSILON * n as f64;
        if max_abs_diff(&(rec * vs.adjoint()), c) <= tol * scale
            && unitarity_residual(&us) <= tol
            && unitarity_residual(&vs) <= tol
        {
            return (sigma, us, vs);
        }
    }
    svd_jacobi(c)
}

/// Singular value decomposition by one-sided Jacobi rotations, `σ`
/// descending. Columns of `U` for singular values at round-off level are an
/// orthonormal completion.
pub fn svd_jacobi(c: &CMat) -> (Vec<f64>, CMat, CMat) {
    let n = c.nrows();
    assert_eq!(n, c.ncols(), "square input expected");
    let mut a = c.clone();
    let mut v = CMat::identity(n, n);
    // Column-major storage: column j is the slice [j n, (j + 1) n).
    fn rotate(m: &mut [C64], n: usize, p: usize, q: usize, cs: f64, sn: f64, phase: C64) {
        let (lo, hi) = m.split_at_mut(q * n);
        let (cp, cq) = (&mut lo[p * n..(p + 1) * n], &mut hi[..n]);
        for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
            let yq = *y * phase;
            let xp = *x;
            *x = xp * cs - yq * sn;
            *y = xp * sn + yq * cs;
        }
    }
    for _sweep in 0..80 {
        let mut rotated = false;
        let d = a.as_slice();
        let mut sq: Vec<f64> = (0..n).map(|j| d[j * n..(j + 1) * n].iter().map(|z| z.norm_sqr()).sum()).collect();
        for p in 0..n {
            for q in p + 1..n {
                let d = a.as_slice();
                let (alpha, beta) = (sq[p], sq[q]);
                let mut gamma = C64::new(0.0, 0.0);
                for (x, y) in d[p * n..(p + 1) * n].iter().zip(&d[q * n..(q + 1) * n]) {
                    gamma += x.conj() * y;
                }
                let g = gamma.norm();
                if g == 0.0 || g <= f64::EPSILON * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let phase = gamma.conj() / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta >= 0.0 { 1.0 } else { -1.0 } / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let cs = 1.0 / libm::sqrt(1.0 + t * t);
                let sn = cs * t;
                rotate(a.as_mut_slice(), n, p, q, cs, sn, phase);
                rotate(v.as_mut_slice(), n, p, q, cs, sn, phase);
                sq[p] = (alpha - t * g).max(0.0);
                sq[q] = beta + t * g;
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let smax = norms.iter().copied().fold(0.0, f64::max);
    let floor = f64::EPSILON * smax * n as f64;
    let mut u = CMat::zeros(n, n);
    let mut vs = CMat::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    let mut filled = 0;
    for (t, &j) in order.iter().enumerate() {
        vs.set_column(t, &v.column(j));
        sigma.push(norms[j]);
        if norms[j] > floor {
            u.set_column(t, &(a.column(j) / C64::new(norms[j], 0.0)));
            filled += 1;
        }
    }
    // Complete U with the standard basis vector that keeps the most norm
    // after two Gram-Schmidt passes.
    for t in filled..n {
        let mut best = (CMat::zeros(n, 1), -1.0);
        for i in 0..n {
            let mut r = CMat::zeros(n, 1);
            r[(i, 0)] = C64::new(1.0, 0.0);
            for _ in 0..2 {
                for s in 0..t {
                    let proj = u.column(s).dotc(&r.column(0));
                    r -= u.column(s) * proj;
                }
            }
            let nr = r.norm();
            if nr > best.1 {
                best = (r, nr);
            }
        }
        u.set_column(t, &(best.0.column(0) / C64::new(best.1, 0.0)));
    }
    (sigma, u, vs)
}

/// `⌈log₂ x⌉` with `clog2(0) = clog2(1) = 0`.
pub fn clog2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// `⌈a / b⌉` for `b > 0`.
pub fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clog2_values() {
        assert_eq!(clog2(0), 0);
        assert_eq!(clog2(1), 0);
        assert_eq!(clog2(2), 1);
        assert_eq!(clog2(3), 2);
        assert_eq!(clog2(2512), 12);
        assert_eq!(clog2(4096), 12);
        assert_eq!(clog2(4097), 13);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }

    #[test]
    fn jacobi_svd_rank_deficient_hermitian() {
        // A rank-two Hermitian block on which nalgebra's complex SVD is off by 1e-2.
        let c = |a: f64, b: f64| C64::new(a, b);
        let m = CMat::from_row_slice(
            3,
            3,
            &[
                c(0.09792983317508257, 0.0),
                c(-0.19609650188143166, -0.17971284839897697),
                c(0.27945410041217644, 0.18074867669866726),
                c(-0.19609650188143166, 0.17971284839897697),
                c(-0.44569590365236655, 0.0),
                c(-1.335113424195658, -0.5523994671407024),
                c(0.27945410041217644, -0.18074867669866726),
                c(-1.335113424195658, 0.5523994671407024),
                c(0.5390057569049574, 0.0),
            ],
        );
        let (s, u, v) = svd_jacobi(&m);
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(3, s.iter().map(|&x| c(x, 0.0))));
        assert!(max_abs_diff(&(&u * d * v.adjoint()), &m) < 1e-14);
        assert!(unitarity_residual(&u) < 1e-14 && unitarity_residual(&v) < 1e-14);
        let ev = hermitian_eigenvalues(&m);
        assert!((s[0] - ev[2]).abs() < 1e-14 && (s[1] + ev[0]).abs() < 1e-14 && s[2] < 1e-14);
    }

    #[test]
    fn checked_svd_falls_back_on_bad_input() {
        let c = |a: f64, b: f64| C64::new(a, b);
        let m = CMat::from_row_slice(
            3,
            3,
            &[
                c(0.09792983317508257, 0.0),
                c(-0.19609650188143166, -0.17971284839897697),
                c(0.27945410041217644, 0.18074867669866726),
                c(-0.19609650188143166, 0.17971284839897697),
                c(-0.44569590365236655, 0.0),
                c(-1.335113424195658, -0.5523994671407024),
                c(0.27945410041217644, -0.18074867669866726),
                c(-1.335113424195658, 0.5523994671407024),
                c(0.5390057569049574, 0.0),
            ],
        );
        let (s, u, v) = svd_checked(&m);
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(3, s.iter().map(|&x| c(x, 0.0))));
        assert!(max_abs_diff(&(&u * d * v.adjoint()), &m) < 1e-14);
    }

    #[test]
    fn jacobi_svd_zero_matrix_is_identity() {
        let (s, u, v) = svd_jacobi(&CMat::zeros(3, 3));
        assert_eq!(s, vec![0.0; 3]);
        assert_eq!(u, CMat::identity(3, 3));
        assert_eq!(v, CMat::identity(3, 3));
    }

    #[test]
    fn phase_fix_makes_pivot_positive() {
        let mut m = CMat::from_column_slice(2, 1, &[C64::new(0.0, 0.6), C64::new(0.0, -0.8)]);
        fix_column_phase(&mut m, 0);
        assert!((m[(1, 0)] - C64::new(0.8, 0.0)).norm() < 1e-15);
        assert!((m[(0, 0)] - C64::new(-0.6, 0.0)).norm() < 1e-15);
    }
}
