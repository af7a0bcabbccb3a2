//! Eigenanalysis, participation factors and modal controllability.

use nalgebra::{DMatrix, DVector};

use super::LinearModel;
use crate::error::{Error, Result};
use crate::phasor::C64;

#[derive(Debug, Clone)]
pub struct Mode {
    pub lambda: C64,
    pub freq_hz: f64,
    pub zeta: f64,
    /// `|psi_k phi_k|` per state, normalized to sum 1.
    pub participation: Vec<f64>,
    pub right: DVector<C64>,
    /// Row of `V^-1`, so that `left . right = 1`.
    pub left: DVector<C64>,
}

impl Mode {
    /// States with the largest participation, descending.
    pub fn top_states<'a>(&self, names: &'a [String], count: usize) -> Vec<(&'a str, f64)> {
        let mut idx: Vec<usize> = (0..self.participation.len()).collect();
        idx.sort_by(|a, b| self.participation[*b].total_cmp(&self.participation[*a]));
        idx.into_iter().take(count).map(|k| (names[k].as_str(), self.participation[k])).collect()
    }
}

pub fn damping_ratio(l: C64) -> f64 {
    let m = l.norm();
    if m == 0.0 {
        1.0
    } else {
        -l.re / m
    }
}

/// Eigenvalues of a real matrix, conjugate pairs exact.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<C64>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure("matrix has non-finite entries".into()));
    }
    let fa = faer::Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)]);
    let ev =
        fa.eigenvalues().map_err(|e| Error::EigenFailure(format!("{e:?} (n = {n}, max |a| = {:.3e})", a.amax())))?;
    Ok(ev.into_iter().map(|z| C64::new(z.re, z.im)).collect())
}

/// Full spectrum of `A` with right/left eigenvectors and participation factors, sorted by
/// ascending damping ratio.
pub fn eigenanalysis(lm: &LinearModel) -> Result<Vec<Mode>> {
    let a = &lm.a;
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure("state matrix has non-finite entries".into()));
    }
    let fa = faer::Mat::<f64>::from_fn(n, n, |i, j| a[(i, j)]);
    let eig = faer::linalg::solvers::Eigen::new_from_real(fa.as_ref())
        .map_err(|e| Error::EigenFailure(format!("{e:?} (n = {n}, max |a| = {:.3e})", a.amax())))?;
    let s = eig.S();
    let u = eig.U();
    let v = DMatrix::from_fn(n, n, |i, j| {
        let z = u[(i, j)];
        C64::new(z.re, z.im)
    });
    let w = v
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::EigenFailure(format!("eigenvector matrix is singular (defective A, n = {n})")))?;
    let mut modes = Vec::with_capacity(n);
    for k in 0..n {
        let z = s[k];
        let lambda = C64::new(z.re, z.im);
        let right = v.column(k).into_owned();
        let left = w.row(k).transpose();
        let mut part: Vec<f64> = (0..n).map(|i| (left[i] * right[i]).norm()).collect();
        let tot: f64 = part.iter().sum();
        if tot > 0.0 {
            part.iter_mut().for_each(|p| *p /= tot);
        }
        modes.push(Mode {
            lambda,
            freq_hz: lambda.im.abs() / (2.0 * std::f64::consts::PI),
            zeta: damping_ratio(lambda),
            participation: part,
            right,
            left,
        });
    }
    modes.sort_by(|a, b| a.zeta.total_cmp(&b.zeta).then(b.lambda.im.total_cmp(&a.lambda.im)));
    Ok(modes)
}

/// Oscillatory modes (`Im >= 0` member of each pair) with frequency in `[f_lo, f_hi]` Hz.
pub fn modes_in_band(modes: &[Mode], f_lo: f64, f_hi: f64) -> Vec<&Mode> {
    modes.iter().filter(|m| m.lambda.im > 0.0 && m.freq_hz >= f_lo && m.freq_hz <= f_hi).collect()
}

/// The least-damped oscillatory mode in a frequency band.
pub fn least_damped_in_band(modes: &[Mode], f_lo: f64, f_hi: f64) -> Option<&Mode> {
    modes_in_band(modes, f_lo, f_hi).into_iter().min_by(|a, b| a.zeta.total_cmp(&b.zeta))
}

/// `|psi^T B_j|` for each listed input, ranked descending as `(input index, score)`.
pub fn modal_controllability(lm: &LinearModel, mode: &Mode, inputs: &[usize]) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = inputs
        .iter()
        .map(|j| {
            let mut acc = C64::default();
            for i in 0..lm.n_states() {
                acc += mode.left[i] * lm.b[(i, *j)];
            }
            (*j, acc.norm())
        })
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn lm(a: DMatrix<f64>, b: DMatrix<f64>) -> LinearModel {
        let n = a.nrows();
        let m = b.ncols();
        LinearModel::new(a, b, DMatrix::zeros(1, n), DMatrix::zeros(1, m)).unwrap()
    }

    #[test]
    fn diagonal_modes() {
        let m = eigenanalysis(&lm(DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0])), DMatrix::zeros(2, 1)))
            .unwrap();
        let mut l: Vec<f64> = m.iter().map(|m| m.lambda.re).collect();
        l.sort_by(f64::total_cmp);
        assert_eq!(l, vec![-2.0, -1.0]);
        assert!(m.iter().all(|m| m.zeta == 1.0 && m.freq_hz == 0.0));
    }

    #[test]
    fn oscillator_definition() {
        let (s, w) = (-0.1, 2.0 * PI * 6.357);
        let a = DMatrix::from_row_slice(2, 2, &[s, w, -w, s]);
        let m = eigenanalysis(&lm(a, DMatrix::zeros(2, 1))).unwrap();
        let top = m.iter().find(|m| m.lambda.im > 0.0).unwrap();
        assert_abs_diff_eq!(top.freq_hz, 6.357, epsilon = 1e-10);
        assert_abs_diff_eq!(top.zeta, 0.1 / (0.01 + w * w).sqrt(), epsilon = 1e-12);
        assert!((top.zeta * 100.0 - 0.25).abs() < 0.01);
        // exact conjugate pair
        let other = m.iter().find(|m| m.lambda.im < 0.0).unwrap();
        assert_eq!(other.lambda, top.lambda.conj());
    }

    #[test]
    fn participation_and_biorthogonality() {
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 2.0, 0.0, -3.0, -0.5, 1.0, 0.2, 0.0, -4.0]);
        let modes = eigenanalysis(&lm(a, DMatrix::zeros(3, 1))).unwrap();
        for m in &modes {
            assert_abs_diff_eq!(m.participation.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            let dot: C64 = (0..3).map(|i| m.left[i] * m.right[i]).sum();
            assert_abs_diff_eq!((dot - 1.0).norm(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn controllability_orthogonal_and_duplicate_columns() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
        let b = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 1.0, 1.0, 0.5, 0.5]);
        let l = lm(a, b);
        let modes = eigenanalysis(&l).unwrap();
        let m1 = modes.iter().find(|m| m.lambda.re == -1.0).unwrap();
        let r = modal_controllability(&l, m1, &[0, 1, 2]);
        let score = |j: usize| r.iter().find(|x| x.0 == j).unwrap().1;
        assert_eq!(score(0), 0.0);
        assert_eq!(score(1), score(2));
        assert!(r[0].1 >= r[1].1 && r[1].1 >= r[2].1);
    }
}
