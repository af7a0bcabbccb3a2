//! Stable/unstable splitting and Schur balanced truncation.

use nalgebra::DMatrix;

use super::linalg::{lyapunov, psd_factor, sign};
use crate::analysis::{eigenvalues, LinearModel};
use crate::error::{Error, Result};

/// Result of removing the slow or unstable part of a model.
#[derive(Debug, Clone)]
pub struct StableSplit {
    pub stable: LinearModel,
    /// Number of removed modes (`Re λ >= -margin`).
    pub removed: usize,
    /// Largest real part among the removed modes.
    pub max_removed_re: f64,
}

/// Projects onto the invariant subspace of modes with `Re λ < -margin`. The spectral
/// projector is `(I - sign(A + margin I)) / 2`.
pub fn stable_projection(lm: &LinearModel, margin: f64) -> Result<StableSplit> {
    let n = lm.n_states();
    let ev = eigenvalues(&lm.a)?;
    let out: Vec<f64> = ev.iter().map(|l| l.re).filter(|re| *re >= -margin).collect();
    if out.is_empty() {
        return Ok(StableSplit { stable: lm.clone(), removed: 0, max_removed_re: f64::NEG_INFINITY });
    }
    let max_removed_re = out.iter().copied().fold(f64::MIN, f64::max);
    let k = n - out.len();
    let shifted = &lm.a + DMatrix::identity(n, n) * margin;
    let s = sign(&shifted)?;
    let proj = (DMatrix::identity(n, n) - s) * 0.5;
    let svd = proj.svd(true, true);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let t = DMatrix::from_fn(n, k, |i, j| u[(i, idx[j])]);
    let l = DMatrix::from_fn(n, k, |i, j| vt[(idx[j], i)]);
    let ltt = l.transpose() * &t;
    let ltt_inv = ltt.try_inverse().ok_or_else(|| Error::Numerical("stable projection is singular".into()))?;
    let left = ltt_inv * l.transpose();
    let stable = LinearModel {
        a: &left * &lm.a * &t,
        b: &left * &lm.b,
        c: &lm.c * &t,
        d: lm.d.clone(),
        states: (0..k).map(|j| format!("s{j}")).collect(),
        inputs: lm.inputs.clone(),
        outputs: lm.outputs.clone(),
    };
    Ok(StableSplit { stable, removed: out.len(), max_removed_re })
}

/// Controllability and observability gramians of a stable model.
pub fn gramians(lm: &LinearModel) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let p = lyapunov(&lm.a, &(&lm.b * lm.b.transpose()))?;
    let q = lyapunov(&lm.a.transpose(), &(lm.c.transpose() * &lm.c))?;
    Ok((p, q))
}

fn check_stable(lm: &LinearModel) -> Result<()> {
    let ev = eigenvalues(&lm.a)?;
    let bad: Vec<f64> = ev.iter().map(|l| l.re).filter(|re| *re >= 0.0).collect();
    if !bad.is_empty() {
        return Err(Error::UnstablePlant { count: bad.len(), max_re: bad.iter().copied().fold(f64::MIN, f64::max) });
    }
    Ok(())
}

/// Orthonormal basis of the column space of `m`.
fn orth(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().qr().q()
}

/// Balanced truncation to order `r` using orthonormal (Schur) bases of the dominant
/// right and left gramian-product subspaces. Returns the reduced model and all Hankel
/// singular values, descending.
pub fn schur_balanced_truncation(lm: &LinearModel, r: usize) -> Result<(LinearModel, Vec<f64>)> {
    let n = lm.n_states();
    if n == 0 {
        return Ok((lm.clone(), Vec::new()));
    }
    check_stable(lm)?;
    let (p, q) = gramians(lm)?;
    let lc = psd_factor(&p);
    let lo = psd_factor(&q);
    let svd = (lo.transpose() * &lc).svd(true, true);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));
    let hsv: Vec<f64> = idx.iter().map(|k| svd.singular_values[*k]).collect();
    if r >= n {
        return Ok((lm.clone(), hsv));
    }
    let smax = hsv[0].max(f64::MIN_POSITIVE);
    let r = r.min(hsv.iter().filter(|s| **s > 1e-14 * smax).count()).max(1);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let u1 = DMatrix::from_fn(n, r, |i, j| u[(i, idx[j])]);
    let v1 = DMatrix::from_fn(n, r, |i, j| vt[(idx[j], i)]);
    // dominant invariant subspaces of PQ (right) and QP (left)
    let vr = orth(&(&lc * v1));
    let vl = orth(&(&lo * u1));
    let e = vl.transpose() * &vr;
    let esvd = e.svd(true, true);
    let ue = esvd.u.as_ref().unwrap();
    let ve = esvd.v_t.as_ref().unwrap().transpose();
    let s_isqrt = DMatrix::from_diagonal(&esvd.singular_values.map(|s| 1.0 / s.sqrt()));
    if esvd.singular_values.iter().any(|s| !(*s > 1e-14)) {
        return Err(Error::Numerical("balanced truncation: degenerate subspace pair".into()));
    }
    let sl = &vl * ue * &s_isqrt;
    let sr = &vr * ve * &s_isqrt;
    let reduced = LinearModel {
        a: sl.transpose() * &lm.a * &sr,
        b: sl.transpose() * &lm.b,
        c: &lm.c * &sr,
        d: lm.d.clone(),
        states: (0..r).map(|j| format!("r{j}")).collect(),
        inputs: lm.inputs.clone(),
        outputs: lm.outputs.clone(),
    };
    Ok((reduced, hsv))
}

/// `2 * sum_{i >= r} sigma_i`.
pub fn truncation_bound(hsv: &[f64], r: usize) -> f64 {
    2.0 * hsv.iter().skip(r).sum::<f64>()
}

/// Largest singular value of `G1(jw) - G2(jw)` over the grid.
pub fn peak_error(g1: &LinearModel, g2: &LinearModel, omegas: &[f64]) -> Result<f64> {
    let r1 = crate::analysis::frequency_response(g1, omegas)?;
    let r2 = crate::analysis::frequency_response(g2, omegas)?;
    Ok(r1.iter().zip(&r2).map(|(a, b)| (a - b).singular_values().max()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::logspace;
    use rand::{Rng, SeedableRng};

    fn random_stable(n: usize, m: usize, p: usize, seed: u64) -> LinearModel {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let shift = eigenvalues(&a).unwrap().iter().map(|l| l.re).fold(f64::MIN, f64::max);
        let a = a - DMatrix::identity(n, n) * (shift + 0.2);
        let b = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        let c = DMatrix::from_fn(p, n, |_, _| rng.random_range(-1.0..1.0));
        LinearModel::new(a, b, c, DMatrix::zeros(p, m)).unwrap()
    }

    #[test]
    fn full_order_is_exact() {
        let g = random_stable(6, 1, 1, 1);
        let (gr, hsv) = schur_balanced_truncation(&g, 6).unwrap();
        assert_eq!(gr, g);
        assert_eq!(truncation_bound(&hsv, 6), 0.0);
        assert!(hsv.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn random_model_respects_bound() {
        let g = random_stable(30, 2, 2, 7);
        let (gr, hsv) = schur_balanced_truncation(&g, 10).unwrap();
        assert_eq!(gr.n_states(), 10);
        let grid = logspace(1e-3, 1e3, 800);
        let err = peak_error(&g, &gr, &grid).unwrap();
        let bound = truncation_bound(&hsv, 10);
        assert!(err <= bound * (1.0 + 1e-9), "{err} > {bound}");
        // reduced model stays stable
        assert!(eigenvalues(&gr.a).unwrap().iter().all(|l| l.re < 0.0));
    }

    #[test]
    fn hankel_values_match_balanced_oracle() {
        // first-order 1/(s+a): sigma = 1/(2a)
        let one = |v: f64| DMatrix::from_element(1, 1, v);
        let g = LinearModel::new(one(-2.0), one(1.0), one(1.0), one(0.0)).unwrap();
        let (_, hsv) = schur_balanced_truncation(&g, 1).unwrap();
        approx::assert_abs_diff_eq!(hsv[0], 0.25, epsilon = 1e-14);
    }

    #[test]
    fn unstable_rejected() {
        let one = |v: f64| DMatrix::from_element(1, 1, v);
        let g = LinearModel::new(one(0.5), one(1.0), one(1.0), one(0.0)).unwrap();
        assert!(matches!(schur_balanced_truncation(&g, 1), Err(Error::UnstablePlant { count: 1, .. })));
    }

    #[test]
    fn projection_drops_marginal_mode() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, -2.0, 1.0, 0.0, 0.0, -5.0]);
        let g = LinearModel::new(
            a,
            DMatrix::from_element(3, 1, 1.0),
            DMatrix::from_element(1, 3, 1.0),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let s = stable_projection(&g, 1e-6).unwrap();
        assert_eq!(s.removed, 1);
        let mut ev: Vec<f64> = eigenvalues(&s.stable.a).unwrap().iter().map(|l| l.re).collect();
        ev.sort_by(f64::total_cmp);
        approx::assert_abs_diff_eq!(ev[0], -5.0, epsilon = 1e-10);
        approx::assert_abs_diff_eq!(ev[1], -2.0, epsilon = 1e-10);
    }
}
