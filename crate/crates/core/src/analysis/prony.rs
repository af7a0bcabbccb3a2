//! Least-squares Prony fit of uniformly resampled ringdowns.

use nalgebra::{DMatrix, DVector};

use super::modal::{damping_ratio, eigenvalues};
use crate::error::{Error, Result};
use crate::phasor::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PronyOptions {
    pub order: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// Resampling period (s).
    pub dt: f64,
}

impl PronyOptions {
    pub fn new(order: usize, t_start: f64, t_end: f64) -> Self {
        Self { order, t_start, t_end, dt: 1.0 / 200.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PronyComponent {
    pub freq_hz: f64,
    pub zeta: f64,
    /// Continuous-time root `sigma + j omega` (upper member of a pair).
    pub root: C64,
    /// Peak amplitude of the real component at `t_start`.
    pub amplitude: f64,
    pub phase: f64,
    /// Sum of squares of the component over the window.
    pub energy: f64,
}

/// Linear interpolation of `(t, y)` onto `t0 + k dt` up to `t1`.
pub fn resample(t: &[f64], y: &[f64], t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if t.len() < 2 || t.len() != y.len() {
        return out;
    }
    let mut j = 0usize;
    let mut k = 0usize;
    loop {
        let tk = t0 + k as f64 * dt;
        if tk > t1 + 1e-12 || tk > t[t.len() - 1] + 1e-12 {
            break;
        }
        if tk < t[0] - 1e-12 {
            k += 1;
            continue;
        }
        while j + 2 < t.len() && t[j + 1] < tk {
            j += 1;
        }
        let (ta, tb) = (t[j], t[j + 1]);
        let s = ((tk - ta) / (tb - ta)).clamp(0.0, 1.0);
        out.push(y[j] + s * (y[j + 1] - y[j]));
        k += 1;
    }
    out
}

/// Fits `y(t) = sum_i b_i z_i^k` over the window; components are sorted by energy.
pub fn prony_fit(t: &[f64], y: &[f64], opts: &PronyOptions) -> Result<Vec<PronyComponent>> {
    if opts.order == 0 || !(opts.dt > 0.0) || !(opts.t_end > opts.t_start) {
        return Err(Error::config("prony", "order must be >= 1, dt > 0 and the window non-empty"));
    }
    let s = resample(t, y, opts.t_start, opts.t_end, opts.dt);
    prony_samples(&s, opts.order, opts.dt)
}

/// Prony fit of already uniform samples.
pub fn prony_samples(s: &[f64], order: usize, dt: f64) -> Result<Vec<PronyComponent>> {
    let n = s.len();
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::IllConditioned("signal has non-finite samples".into()));
    }
    if n < 2 * order + 1 {
        return Err(Error::IllConditioned(format!("{n} samples are too few for order {order}")));
    }
    let mut p = order;
    let coeffs = loop {
        let rows = n - p;
        let h = DMatrix::from_fn(rows, p, |r, c| s[r + p - 1 - c]);
        let rhs = DVector::from_fn(rows, |r, _| s[r + p]);
        let svd = h.svd(true, true);
        let smax = svd.singular_values.max();
        if !(smax > 0.0) {
            return Err(Error::IllConditioned("prediction matrix is zero".into()));
        }
        let rank = svd.singular_values.iter().filter(|v| **v > 1e-10 * smax).count();
        if rank < p {
            p = rank;
            continue;
        }
        break svd.solve(&rhs, 1e-10 * smax).map_err(|e| Error::IllConditioned(e.to_string()))?;
    };
    // roots of z^p - a_1 z^(p-1) - ... - a_p
    let mut comp = DMatrix::zeros(p, p);
    for c in 0..p {
        comp[(0, c)] = coeffs[c];
    }
    for r in 1..p {
        comp[(r, r - 1)] = 1.0;
    }
    let z = eigenvalues(&comp)?;
    let vand = DMatrix::from_fn(n, p, |k, i| z[i].powi(k as i32));
    let yc = DVector::from_fn(n, |k, _| C64::new(s[k], 0.0));
    let svd = vand.clone().svd(true, true);
    let vmax = svd.singular_values.max();
    let b = svd.solve(&yc, 1e-12 * vmax).map_err(|e| Error::IllConditioned(e.to_string()))?;
    let mut out = Vec::new();
    for i in 0..p {
        let root = z[i].ln() / dt;
        if root.im < 0.0 {
            continue;
        }
        let pair = root.im > 1e-9;
        let energy: f64 = (0..n).map(|k| (b[i] * vand[(k, i)]).norm_sqr()).sum::<f64>() * if pair { 2.0 } else { 1.0 };
        let (amplitude, phase) = if pair { (2.0 * b[i].norm(), b[i].arg()) } else { (b[i].re, 0.0) };
        out.push(PronyComponent {
            freq_hz: root.im / (2.0 * std::f64::consts::PI),
            zeta: damping_ratio(root),
            root,
            amplitude,
            phase,
            energy,
        });
    }
    out.sort_by(|a, b| b.energy.total_cmp(&a.energy));
    Ok(out)
}

/// The most energetic component with frequency in `[f_lo, f_hi]`.
pub fn dominant_in_band(comps: &[PronyComponent], f_lo: f64, f_hi: f64) -> Option<PronyComponent> {
    comps.iter().copied().find(|c| c.freq_hz >= f_lo && c.freq_hz <= f_hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn sampled(f: impl Fn(f64) -> f64, t1: f64, dt: f64) -> (Vec<f64>, Vec<f64>) {
        let n = (t1 / dt).round() as usize + 1;
        let t: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
        let y = t.iter().map(|t| f(*t)).collect();
        (t, y)
    }

    #[test]
    fn damped_tone() {
        let (t, y) = sampled(|t| (-0.5 * t).exp() * (2.0 * PI * 6.0 * t).cos(), 4.0, 1e-3);
        let c = prony_fit(&t, &y, &PronyOptions::new(2, 0.0, 4.0)).unwrap();
        let d = dominant_in_band(&c, 4.0, 8.0).unwrap();
        let zeta = 0.5 / (0.25 + (12.0 * PI).powi(2)).sqrt();
        assert_abs_diff_eq!(d.freq_hz, 6.0, epsilon = 0.01);
        assert_abs_diff_eq!(d.zeta * 100.0, zeta * 100.0, epsilon = 0.1);
        assert_abs_diff_eq!(d.amplitude, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn two_tones_resolved() {
        let (t, y) = sampled(
            |t| {
                (-0.3 * t).exp() * (2.0 * PI * 1.2 * t).cos()
                    + 0.5 * (-1.0 * t).exp() * (2.0 * PI * 6.4 * t + 0.3).sin()
            },
            5.0,
            1e-3,
        );
        let c = prony_fit(&t, &y, &PronyOptions::new(4, 0.0, 5.0)).unwrap();
        let f: Vec<f64> = c.iter().map(|c| c.freq_hz).collect();
        assert!(f.iter().any(|f| (f - 1.2).abs() < 1e-6), "{f:?}");
        assert!(f.iter().any(|f| (f - 6.4).abs() < 1e-6), "{f:?}");
        let hi = dominant_in_band(&c, 6.0, 7.0).unwrap();
        assert_abs_diff_eq!(hi.root.re, -1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(hi.amplitude, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn constant_signal_is_zero_frequency() {
        let (t, y) = sampled(|_| 3.0, 2.0, 1e-3);
        let c = prony_fit(&t, &y, &PronyOptions::new(6, 0.0, 2.0)).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].freq_hz, 0.0);
        assert_abs_diff_eq!(c[0].amplitude, 3.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_signal_is_ill_conditioned() {
        let (t, y) = sampled(|_| 0.0, 1.0, 1e-3);
        assert!(matches!(prony_fit(&t, &y, &PronyOptions::new(2, 0.0, 1.0)), Err(Error::IllConditioned(_))));
    }

    #[test]
    fn resample_linear() {
        let t = [0.0, 1.0, 2.0];
        let y = [0.0, 2.0, 0.0];
        assert_eq!(resample(&t, &y, 0.0, 2.0, 0.5), vec![0.0, 1.0, 2.0, 1.0, 0.0]);
    }
}
