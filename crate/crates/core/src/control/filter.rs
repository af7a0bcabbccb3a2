//! Rational continuous-time filters and their state-space realizations.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phasor::C64;

/// `num(s) / den(s)`, coefficients in descending powers of `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

/// `(A, B, C, D)` of a SISO system.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl Realization {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }
}

fn trim(v: &[f64]) -> Vec<f64> {
    let k = v.iter().position(|c| *c != 0.0).unwrap_or(v.len());
    v[k..].to_vec()
}

impl FilterSpec {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        let f = Self { num, den };
        f.validate()?;
        Ok(f)
    }

    pub fn identity() -> Self {
        Self { num: vec![1.0], den: vec![1.0] }
    }

    /// `s T / (1 + s T)`.
    pub fn washout(t_w: f64) -> Self {
        Self { num: vec![t_w, 0.0], den: vec![t_w, 1.0] }
    }

    /// Second-order bandpass `k s / (s^2 + k s + w0^2)`.
    pub fn bandpass(k: f64, w0_sq: f64) -> Self {
        Self { num: vec![k, 0.0], den: vec![1.0, k, w0_sq] }
    }

    pub fn validate(&self) -> Result<()> {
        let (n, d) = (trim(&self.num), trim(&self.den));
        if self.num.iter().chain(&self.den).any(|c| !c.is_finite()) {
            return Err(Error::config("filter", "coefficients must be finite"));
        }
        if d.is_empty() {
            return Err(Error::config("filter", "denominator is zero"));
        }
        if n.len() > d.len() {
            return Err(Error::config("filter", "filter must be proper"));
        }
        Ok(())
    }

    pub fn eval(&self, s: C64) -> C64 {
        let p = |c: &[f64]| c.iter().fold(C64::new(0.0, 0.0), |acc, k| acc * s + *k);
        p(&self.num) / p(&self.den)
    }

    /// Roots of the denominator.
    pub fn poles(&self) -> Result<Vec<C64>> {
        let r = self.realize()?;
        crate::analysis::eigenvalues(&r.a)
    }

    pub fn is_stable(&self) -> Result<bool> {
        Ok(self.poles()?.iter().all(|p| p.re < 0.0))
    }

    /// Time constant `T` if this is `s T / (1 + s T)` up to scaling, else `None`.
    pub fn washout_time(&self) -> Option<f64> {
        let (n, d) = (trim(&self.num), trim(&self.den));
        if n.len() != 2 || d.len() != 2 || self.num.last() != Some(&0.0) || d[1] == 0.0 {
            return None;
        }
        let t = d[0] / d[1];
        let gain = n[0] / d[0];
        ((gain - 1.0).abs() < 1e-12 && t > 0.0).then_some(t)
    }

    /// Controllable canonical realization.
    pub fn realize(&self) -> Result<Realization> {
        self.validate()?;
        let den = trim(&self.den);
        let n = den.len() - 1;
        let a0 = den[0];
        let dn: Vec<f64> = den.iter().map(|c| c / a0).collect();
        let mut num = vec![0.0; n + 1];
        let nt = trim(&self.num);
        for (k, c) in nt.iter().enumerate() {
            num[n + 1 - nt.len() + k] = c / a0;
        }
        let d = num[0];
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, 1);
        let mut c = DMatrix::zeros(1, n);
        if n > 0 {
            for j in 0..n {
                a[(0, j)] = -dn[j + 1];
            }
            for i in 1..n {
                a[(i, i - 1)] = 1.0;
            }
            b[(0, 0)] = 1.0;
            for j in 0..n {
                c[(0, j)] = num[j + 1] - d * dn[j + 1];
            }
        }
        Ok(Realization { a, b, c, d: DMatrix::from_element(1, 1, d) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tf_of(r: &Realization, s: C64) -> C64 {
        let n = r.order();
        if n == 0 {
            return C64::new(r.d[(0, 0)], 0.0);
        }
        let m =
            DMatrix::from_fn(n, n, |i, j| if i == j { s } else { C64::new(0.0, 0.0) }) - r.a.map(|v| C64::new(v, 0.0));
        let x = m.lu().solve(&r.b.map(|v| C64::new(v, 0.0))).unwrap();
        (r.c.map(|v| C64::new(v, 0.0)) * x)[(0, 0)] + r.d[(0, 0)]
    }

    #[test]
    fn realization_matches_rational_function() {
        let filters = [
            FilterSpec::bandpass(25.13, 1593.0),
            FilterSpec::washout(2.0),
            FilterSpec::identity(),
            FilterSpec::new(vec![2.0, 3.0, 1.0], vec![4.0, 1.0, 5.0]).unwrap(),
        ];
        for f in &filters {
            let r = f.realize().unwrap();
            for w in [0.1, 1.0, 39.9, 400.0] {
                let s = C64::new(0.0, w);
                assert_abs_diff_eq!((tf_of(&r, s) - f.eval(s)).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn bandpass_peak_at_center() {
        let w = FilterSpec::bandpass(25.13, 1593.0);
        let w0 = 1593f64.sqrt();
        assert_abs_diff_eq!(w.eval(C64::new(0.0, w0)).norm(), 1.0, epsilon = 1e-12);
        assert!(w.eval(C64::new(0.0, 0.8 * w0)).norm() < 1.0);
        assert!(w.eval(C64::new(0.0, 1.2 * w0)).norm() < 1.0);
        assert!(w.is_stable().unwrap());
    }

    #[test]
    fn improper_rejected_and_washout_detected() {
        assert!(FilterSpec::new(vec![1.0, 0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert_eq!(FilterSpec::washout(2.0).washout_time(), Some(2.0));
        assert_eq!(FilterSpec::new(vec![4.0, 0.0], vec![4.0, 2.0]).unwrap().washout_time(), Some(2.0));
        assert_eq!(FilterSpec::identity().washout_time(), None);
    }
}
