//! Matrix sign function and the Lyapunov/Riccati solvers built on it.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

const MAX_ITER: usize = 100;

fn norm1(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `ln |det M|` and the inverse, or `None` if singular.
fn inverse_logdet(m: &DMatrix<f64>) -> Option<(DMatrix<f64>, f64)> {
    let lu = m.clone().lu();
    let u = lu.u();
    let mut ld = 0.0;
    for i in 0..m.nrows() {
        let d = u[(i, i)].abs();
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        ld += d.ln();
    }
    let inv = lu.try_inverse()?;
    inv.iter().all(|v| v.is_finite()).then_some((inv, ld))
}

/// Matrix sign function by the scaled Newton iteration. Fails when `M` has eigenvalues
/// on (or numerically at) the imaginary axis.
pub fn sign(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let mut z = m.clone();
    let mut scale = true;
    for _ in 0..MAX_ITER {
        let (zi, ld) =
            inverse_logdet(&z).ok_or_else(|| Error::Numerical("sign iteration hit a singular matrix".into()))?;
        let mu = if scale { (-ld / n as f64).exp() } else { 1.0 };
        let next = (&z * mu + zi / mu) * 0.5;
        let delta = norm1(&(&next - &z));
        let size = norm1(&next);
        z = next;
        if !size.is_finite() {
            break;
        }
        if delta < 1e-2 * size {
            scale = false;
        }
        if delta <= 1e-12 * size {
            return Ok(z);
        }
    }
    Err(Error::Numerical("sign iteration did not converge (eigenvalues near the imaginary axis)".into()))
}

/// Solves `A X + X A^T + Q = 0` for stable `A`.
pub fn lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut ak = a.clone();
    let mut qk = q.clone();
    let mut scale = true;
    for _ in 0..MAX_ITER {
        let (ai, ld) =
            inverse_logdet(&ak).ok_or_else(|| Error::Numerical("Lyapunov iteration hit a singular matrix".into()))?;
        let mu = if scale { (-ld / n as f64).exp() } else { 1.0 };
        let an = (&ak * mu + &ai / mu) * 0.5;
        let qn = (&qk * mu + &ai * &qk * ai.transpose() / mu) * 0.5;
        let delta = norm1(&(&an - &ak));
        let size = norm1(&an);
        ak = an;
        qk = qn;
        if !size.is_finite() {
            break;
        }
        if delta < 1e-2 * size {
            scale = false;
        }
        if delta <= 1e-12 * size {
            // A_k -> -I for stable A
            let dev = norm1(&(&ak + DMatrix::identity(n, n)));
            if dev > 1e-6 {
                return Err(Error::UnstablePlant { count: 0, max_re: f64::NAN });
            }
            let x = &qk * 0.5;
            return Ok((&x + x.transpose()) * 0.5);
        }
    }
    Err(Error::Numerical("Lyapunov iteration did not converge".into()))
}

/// Stabilizing solution `X` of the Riccati equation with Hamiltonian
/// `H = [A, R; -Q, -A^T]`, i.e. `A^T X + X A + X R X + Q = 0` (`R` and `Q` symmetric).
pub fn riccati(a: &DMatrix<f64>, r: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(r);
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
    let s = sign(&h)?;
    // stable subspace span [I; X] lies in ker(S + I)
    let mut lhs = DMatrix::zeros(2 * n, n);
    let mut rhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&s.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(s.view((n, n), (n, n)) + DMatrix::identity(n, n)));
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(s.view((0, 0), (n, n)) + DMatrix::identity(n, n))));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-s.view((n, 0), (n, n))));
    let svd = lhs.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::Numerical("Riccati stable subspace is not a graph".into()));
    }
    let x = svd.solve(&rhs, 0.0).map_err(|e| Error::Numerical(e.to_string()))?;
    let x = (&x + x.transpose()) * 0.5;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("Riccati solution is not finite".into()));
    }
    let res = a.transpose() * &x + &x * a + &x * r * &x + q;
    let scale = (a.amax() * x.amax() + r.amax() * x.amax().powi(2) + q.amax()).max(f64::MIN_POSITIVE);
    if !(res.amax() <= 1e-8 * scale) {
        return Err(Error::Numerical(format!("Riccati residual {:.3e} (scale {scale:.3e})", res.amax())));
    }
    let acl = a + r * &x;
    if crate::analysis::eigenvalues(&acl)?.iter().any(|l| !(l.re < 0.0)) {
        return Err(Error::Numerical("Riccati solution is not stabilizing".into()));
    }
    Ok(x)
}

/// `M^{1/2}` factor `L` with `M = L L^T` for a symmetric positive semidefinite `M`;
/// negative eigenvalues from round-off are clipped.
pub fn psd_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let mut l = e.eigenvectors.clone();
    for j in 0..l.ncols() {
        let s = e.eigenvalues[j].max(0.0).sqrt();
        l.column_mut(j).scale_mut(s);
    }
    l
}

/// `M^{-1/2}` for a symmetric positive definite `M`.
pub fn inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let e = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let emax = e.eigenvalues.amax();
    if e.eigenvalues.iter().any(|v| !(*v > 1e-14 * emax.max(1e-300))) {
        return Err(Error::AssumptionViolated("matrix is not positive definite".into()));
    }
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|v| 1.0 / v.sqrt()));
    Ok(&e.eigenvectors * d * e.eigenvectors.transpose())
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eig(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new((m + m.transpose()) * 0.5).eigenvalues.min()
}
