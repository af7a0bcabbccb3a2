//! TR-BDF2: one-step, L-stable, second order, with a trapezoidal stage to `t + gamma h`
//! followed by a BDF2 stage, both sharing the iteration matrix `I - (gamma/2) h J`.
//! Local error from the second divided difference of `f`, filtered through the iteration
//! matrix. Jacobian by forward differences, refreshed when a step is rejected because
//! Newton stalls.

use faer::linalg::solvers::{PartialPivLu, Solve};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

const GAMMA: f64 = 2.0 - std::f64::consts::SQRT_2;
/// Leading local-error coefficient of the `h^3 x'''` term.
const ERR_CONST: f64 = std::f64::consts::FRAC_1_SQRT_2 - 2.0 / 3.0;

pub trait OdeRhs {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<()>;
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { rtol: 1e-3, atol: 1e-6, h_init: 1e-5, h_min: 1e-12, h_max: 0.01, max_steps: 5_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub jacobians: usize,
    pub factorizations: usize,
}

/// One accepted step, handed to the observer.
pub struct StepView<'a> {
    pub t0: f64,
    pub x0: &'a [f64],
    pub f0: &'a [f64],
    pub t1: f64,
    pub x1: &'a [f64],
    pub f1: &'a [f64],
}

impl StepView<'_> {
    /// Cubic Hermite interpolant on the step.
    pub fn interpolate(&self, t: f64, out: &mut [f64]) {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        for i in 0..out.len() {
            out[i] = h00 * self.x0[i] + h10 * h * self.f0[i] + h01 * self.x1[i] + h11 * h * self.f1[i];
        }
    }
}

pub struct TrBdf2<'a, S: OdeRhs> {
    sys: &'a S,
    pub opts: SolverOptions,
    pub stats: SolverStats,
    jac: Option<DMatrix<f64>>,
    jac_fresh: bool,
    lu: Option<(f64, PartialPivLu<f64>)>,
    h: f64,
}

fn wrms(v: &[f64], w: &[f64]) -> f64 {
    let s: f64 = v.iter().zip(w).map(|(a, b)| (a / b) * (a / b)).sum();
    (s / v.len().max(1) as f64).sqrt()
}

impl<'a, S: OdeRhs> TrBdf2<'a, S> {
    pub fn new(sys: &'a S, opts: SolverOptions) -> Self {
        Self { sys, h: opts.h_init, opts, stats: SolverStats::default(), jac: None, jac_fresh: false, lu: None }
    }

    fn eval(&mut self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        self.stats.rhs_evals += 1;
        self.sys.rhs(t, x, dx)
    }

    fn jacobian(&mut self, t: f64, x: &[f64], f: &[f64]) -> Result<()> {
        let n = x.len();
        let mut j = DMatrix::zeros(n, n);
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; n];
        for c in 0..n {
            let dx = 1e-7 * x[c].abs().max(1e-2);
            xp[c] = x[c] + dx;
            let dx = xp[c] - x[c];
            self.eval(t, &xp, &mut fp)?;
            for r in 0..n {
                j[(r, c)] = (fp[r] - f[r]) / dx;
            }
            xp[c] = x[c];
        }
        self.stats.jacobians += 1;
        self.jac = Some(j);
        self.jac_fresh = true;
        self.lu = None;
        Ok(())
    }

    fn factor(&mut self, h: f64) -> Result<()> {
        if let Some((hh, _)) = &self.lu {
            if *hh == h {
                return Ok(());
            }
        }
        let j = self.jac.as_ref().expect("jacobian computed");
        let n = j.nrows();
        let c = 0.5 * GAMMA * h;
        let m = faer::Mat::<f64>::from_fn(n, n, |r, k| if r == k { 1.0 } else { 0.0 } - c * j[(r, k)]);
        self.lu = Some((h, m.partial_piv_lu()));
        self.stats.factorizations += 1;
        Ok(())
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (_, lu) = self.lu.as_ref().expect("factorized");
        let mut b = faer::Mat::<f64>::from_fn(rhs.len(), 1, |r, _| rhs[r]);
        lu.solve_in_place(b.as_mut());
        (0..rhs.len()).map(|r| b[(r, 0)]).collect()
    }

    /// Simplified Newton for `z - d h f(t, z) = base`. Returns `None` on divergence.
    fn newton(&mut self, t: f64, h: f64, base: &[f64], z0: &[f64], w: &[f64]) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        let n = base.len();
        let dh = 0.5 * GAMMA * h;
        let mut z = z0.to_vec();
        let mut f = vec![0.0; n];
        let mut prev = f64::INFINITY;
        let mut res = vec![0.0; n];
        for it in 0..8 {
            match self.eval(t, &z, &mut f) {
                Ok(()) => {}
                Err(e) => {
                    // a trial iterate may leave the model's domain; only report once the step is tiny
                    if h <= 1e3 * self.opts.h_min {
                        return Err(e);
                    }
                    return Ok(None);
                }
            }
            for i in 0..n {
                res[i] = base[i] + dh * f[i] - z[i];
            }
            let dz = self.solve(&res);
            let nrm = wrms(&dz, w);
            if !nrm.is_finite() {
                return Ok(None);
            }
            for i in 0..n {
                z[i] += dz[i];
            }
            let rate = if it > 0 { nrm / prev } else { 0.5 };
            if nrm < 1e-3 || (rate < 0.9 && rate / (1.0 - rate) * nrm < 0.03) {
                return match self.eval(t, &z, &mut f) {
                    Ok(()) => Ok(Some((z, f))),
                    Err(e) if h <= 1e3 * self.opts.h_min => Err(e),
                    Err(_) => Ok(None),
                };
            }
            if it > 0 && nrm > 0.9 * prev {
                return Ok(None);
            }
            prev = nrm;
        }
        Ok(None)
    }

    /// Integrates from `t0` to `t1` starting at `x` (updated in place). `observer` sees every
    /// accepted step and may return an error to abort.
    pub fn integrate<F>(&mut self, t0: f64, t1: f64, x: &mut Vec<f64>, mut observer: F) -> Result<()>
    where
        F: FnMut(&StepView) -> Result<()>,
    {
        let n = x.len();
        let mut t = t0;
        let mut f0 = vec![0.0; n];
        self.eval(t, x, &mut f0).map_err(|e| e.at_time(t))?;
        if self.jac.is_none() {
            self.jacobian(t, x, &f0).map_err(|e| e.at_time(t))?;
        }
        let mut h_prop = self.h.min(self.opts.h_max);
        let mut h;
        let mut steps = 0usize;
        let mut w = vec![0.0; n];
        let mut base = vec![0.0; n];
        let mut z0 = vec![0.0; n];
        while t < t1 {
            steps += 1;
            if steps > self.opts.max_steps {
                return Err(Error::StepFailure { t, reason: "maximum number of steps".into() });
            }
            h = h_prop;
            let mut last = false;
            if t + h >= t1 || t1 - (t + h) < 1e-3 * h {
                h = t1 - t;
                last = true;
            }
            for i in 0..n {
                w[i] = self.opts.atol + self.opts.rtol * x[i].abs();
            }
            self.factor(h)?;
            let dh = 0.5 * GAMMA * h;
            // trapezoidal stage
            for i in 0..n {
                base[i] = x[i] + dh * f0[i];
                z0[i] = x[i] + GAMMA * h * f0[i];
            }
            let stage1 = self.newton(t + GAMMA * h, h, &base, &z0, &w).map_err(|e| e.at_time(t))?;
            let Some((xg, fg)) = stage1 else {
                h_prop = h;
                self.on_failure(t, x, &f0, &mut h_prop)?;
                continue;
            };
            // BDF2 stage
            let a = 1.0 / (GAMMA * (2.0 - GAMMA));
            let b = (1.0 - GAMMA) * (1.0 - GAMMA) / (GAMMA * (2.0 - GAMMA));
            for i in 0..n {
                base[i] = a * xg[i] - b * x[i];
                z0[i] = x[i] + (xg[i] - x[i]) / GAMMA;
            }
            let stage2 = self.newton(t + h, h, &base, &z0, &w).map_err(|e| e.at_time(t))?;
            let Some((x1, f1)) = stage2 else {
                h_prop = h;
                self.on_failure(t, x, &f0, &mut h_prop)?;
                continue;
            };
            // error estimate
            let mut est = vec![0.0; n];
            for i in 0..n {
                est[i] =
                    2.0 * ERR_CONST * h * (f0[i] / GAMMA - fg[i] / (GAMMA * (1.0 - GAMMA)) + f1[i] / (1.0 - GAMMA));
            }
            let est = self.solve(&est);
            for i in 0..n {
                w[i] = self.opts.atol + self.opts.rtol * x[i].abs().max(x1[i].abs());
            }
            let err = wrms(&est, &w);
            if !err.is_finite() || err > 1.0 {
                self.stats.rejected += 1;
                let fac = if err.is_finite() { (0.9 * err.powf(-1.0 / 3.0)).clamp(0.1, 0.5) } else { 0.25 };
                h_prop = h * fac;
                if h_prop < self.opts.h_min {
                    return Err(Error::StepFailure {
                        t,
                        reason: format!("step size {h:.3e} below minimum (error {err:.3e})"),
                    });
                }
                continue;
            }
            self.stats.accepted += 1;
            let t_new = if last { t1 } else { t + h };
            observer(&StepView { t0: t, x0: x, f0: &f0, t1: t_new, x1: &x1, f1: &f1 })?;
            t = t_new;
            x.copy_from_slice(&x1);
            f0.copy_from_slice(&f1);
            self.jac_fresh = false;
            let fac = (0.9 * err.max(1e-10).powf(-1.0 / 3.0)).clamp(0.2, 4.0);
            let h_next = (h * fac).min(self.opts.h_max);
            if last {
                // a truncated final step says little about the natural step size
                h_prop = if h < h_prop { h_prop.min(h_next.max(h_prop * fac.min(1.0))) } else { h_next };
            } else if !(h_next >= h && h_next < 1.2 * h) {
                // otherwise keep h and reuse the factorization
                h_prop = h_next;
            }
        }
        self.h = h_prop;
        Ok(())
    }

    fn on_failure(&mut self, t: f64, x: &[f64], f0: &[f64], h: &mut f64) -> Result<()> {
        self.stats.rejected += 1;
        if !self.jac_fresh {
            self.jacobian(t, x, f0).map_err(|e| e.at_time(t))?;
        } else {
            *h *= 0.25;
        }
        self.lu = None;
        if *h < self.opts.h_min {
            return Err(Error::StepFailure { t, reason: "Newton iteration failed at minimum step".into() });
        }
        Ok(())
    }

    /// Drops the cached Jacobian, e.g. after a discontinuity.
    pub fn reset_jacobian(&mut self) {
        self.jac = None;
        self.lu = None;
    }

    pub fn step_size(&self) -> f64 {
        self.h
    }

    pub fn set_step_size(&mut self, h: f64) {
        self.h = h;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Lin(Vec<f64>);
    impl OdeRhs for Lin {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn rhs(&self, _t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
            for i in 0..x.len() {
                dx[i] = self.0[i] * x[i];
            }
            Ok(())
        }
    }

    #[test]
    fn stiff_decay_and_slow_mode() {
        let sys = Lin(vec![-1.0, -1e6]);
        let mut s = TrBdf2::new(&sys, SolverOptions::default());
        let mut x = vec![1.0, 1.0];
        s.integrate(0.0, 2.0, &mut x, |_| Ok(())).unwrap();
        assert!((x[0] - (-2.0f64).exp()).abs() < 1e-5, "{}", x[0]);
        assert!(x[1].abs() < 1e-8);
        assert!(s.stats.accepted < 2000, "{:?}", s.stats);
    }

    /// Harmonic oscillator; also checks that the error estimate tracks the true local error.
    struct Osc;
    impl OdeRhs for Osc {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
            dx[0] = x[1];
            dx[1] = -x[0];
            Ok(())
        }
    }

    #[test]
    fn oscillator_accuracy() {
        let mut s = TrBdf2::new(&Osc, SolverOptions { rtol: 1e-8, atol: 1e-10, ..Default::default() });
        let mut x = vec![1.0, 0.0];
        let mut samples = Vec::new();
        s.integrate(0.0, 10.0, &mut x, |v| {
            let tm = 0.5 * (v.t0 + v.t1);
            let mut o = [0.0; 2];
            v.interpolate(tm, &mut o);
            samples.push((tm, o[0]));
            Ok(())
        })
        .unwrap();
        assert!((x[0] - 10f64.cos()).abs() < 2e-5, "{}", x[0] - 10f64.cos());
        let worst = samples.iter().map(|(t, v)| (v - t.cos()).abs()).fold(0.0, f64::max);
        assert!(worst < 5e-5, "dense output error {worst}");
    }
}
