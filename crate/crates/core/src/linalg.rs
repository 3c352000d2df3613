//! Small dense linear-algebra helpers on top of `nalgebra`.
//!
//! Everything in the beamforming code is expressed with dynamically sized
//! complex matrices. Hermitian positive definite systems are solved through
//! Cholesky factorizations; when a factorization fails a relative ridge is
//! added and the caller is told about it through [`Regularized`].

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

pub const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Relative ridge used when a Hermitian factorization fails.
pub const RIDGE_REL: f64 = 1e-12;

/// Outcome flag for solves that may have been regularized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Regularized(pub bool);

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

fn ridge(a: &CMat) -> f64 {
    let n = a.nrows().max(1) as f64;
    let tr: f64 = a.diagonal().iter().map(|z| z.re.abs()).sum();
    RIDGE_REL * (tr / n).max(f64::MIN_POSITIVE)
}

/// Cholesky factor of a Hermitian positive definite matrix, retrying with a
/// ridge of `1e-12 * trace / n` (then growing it) if the plain attempt fails.
pub fn hpd_cholesky(a: &CMat) -> Result<(Cholesky<Complex64, nalgebra::Dyn>, Regularized)> {
    let sym = hermitian_part(a);
    if let Some(ch) = Cholesky::new(sym.clone()) {
        return Ok((ch, Regularized(false)));
    }
    let mut eps = ridge(&sym);
    for _ in 0..12 {
        let mut reg = sym.clone();
        for i in 0..reg.nrows() {
            reg[(i, i)] += Complex64::new(eps, 0.0);
        }
        if let Some(ch) = Cholesky::new(reg) {
            log::debug!("hermitian factorization regularized with ridge {eps:e}");
            return Ok((ch, Regularized(true)));
        }
        eps *= 100.0;
    }
    Err(Error::Singular(
        "hermitian factorization failed after regularization",
    ))
}

/// `log det` of a Hermitian positive definite matrix (natural log).
pub fn logdet_hpd(a: &CMat) -> Result<f64> {
    let (ch, _) = hpd_cholesky(a)?;
    Ok(ch
        .l_dirty()
        .diagonal()
        .iter()
        .map(|z| 2.0 * z.re.ln())
        .sum())
}

pub fn inverse_hpd(a: &CMat) -> Result<(CMat, Regularized)> {
    let (ch, reg) = hpd_cholesky(a)?;
    let mut inv = ch.inverse();
    inv = hermitian_part(&inv);
    Ok((inv, reg))
}

pub fn solve_hpd(a: &CMat, b: &CMat) -> Result<(CMat, Regularized)> {
    let (ch, reg) = hpd_cholesky(a)?;
    Ok((ch.solve(b), reg))
}

pub fn trace_re(a: &CMat) -> f64 {
    a.diagonal().iter().map(|z| z.re).sum()
}

/// Eigen-decomposition of a real symmetric matrix with eigenvalues in
/// ascending order and matching eigenvector columns.
pub fn sym_eigen_sorted(a: &RMat) -> (RVec, RMat) {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = RVec::from_iterator(n, idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = RMat::zeros(n, n);
    for (c, &i) in idx.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Largest eigenvalue of a Hermitian matrix.
///
/// Exact decomposition up to 64x64, power iteration beyond that. The power
/// iteration estimate is inflated by its stopping tolerance so that
/// `lambda * I - A` stays positive semidefinite.
pub fn lambda_max_hermitian(a: &CMat) -> f64 {
    let n = a.nrows();
    if n == 0 {
        return 0.0;
    }
    let sym = hermitian_part(a);
    if n <= 64 {
        let eig = SymmetricEigen::new(sym);
        return eig
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
    }
    let tol = 1e-8;
    let mut v = CVec::from_fn(n, |i, _| Complex64::new(1.0 + (i as f64) * 1e-3, 0.0));
    v /= Complex64::new(v.norm(), 0.0);
    let mut lam = 0.0f64;
    for _ in 0..10_000 {
        let w = &sym * &v;
        let next = v.dotc(&w).re;
        let nrm = w.norm();
        if nrm == 0.0 {
            return 0.0;
        }
        v = w / Complex64::new(nrm, 0.0);
        if (next - lam).abs() <= tol * next.abs().max(f64::MIN_POSITIVE) {
            lam = next;
            break;
        }
        lam = next;
    }
    // Gershgorin bound caps the inflation so the estimate stays meaningful.
    let gersh = (0..n)
        .map(|i| (0..n).map(|j| sym[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    (lam * (1.0 + 10.0 * tol)).min(gersh).max(lam)
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logdet_of_diagonal() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![cr(2.0), cr(3.0)]));
        assert!((logdet_hpd(&a).unwrap() - 6.0f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn inverse_of_diagonal() {
        let a = CMat::from_diagonal(&CVec::from_vec(vec![cr(2.0), cr(4.0)]));
        let (inv, reg) = inverse_hpd(&a).unwrap();
        assert!(!reg.0);
        assert!((inv[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((inv[(1, 1)].re - 0.25).abs() < 1e-15);
    }

    #[test]
    fn singular_matrix_gets_regularized() {
        let a = CMat::from_element(2, 2, cr(1.0));
        let (_, reg) = hpd_cholesky(&a).unwrap();
        assert!(reg.0);
    }

    #[test]
    fn eigen_sorted_ascending() {
        let a = RMat::from_row_slice(3, 3, &[3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        let (vals, vecs) = sym_eigen_sorted(&a);
        assert_eq!(vals.as_slice(), &[1.0, 2.0, 3.0]);
        let recon = &vecs * RMat::from_diagonal(&vals) * vecs.transpose();
        assert!((recon - a).norm() < 1e-12);
    }

    #[test]
    fn power_iteration_matches_exact() {
        let n = 80;
        let g = CMat::from_fn(n, n, |i, j| {
            c(
                ((i * 7 + j * 3) % 11) as f64 - 5.0,
                ((i + 2 * j) % 5) as f64 - 2.0,
            )
        });
        let a = &g * g.adjoint();
        let exact = SymmetricEigen::new(a.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let est = lambda_max_hermitian(&a);
        assert!(est >= exact * (1.0 - 1e-6), "{est} vs {exact}");
        assert!(est <= exact * (1.0 + 1e-6));
    }
}
