//! Positive-sequence Newton-Raphson power flow in polar coordinates with a dense analytic
//! Jacobian. Networks here have tens of buses, so dense LU is adequate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::phasor::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Slack,
    Pv,
    Pq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PfBus {
    pub name: String,
    pub kind: BusKind,
    /// Specified net injection (generation minus constant-power demand), pu.
    pub p: f64,
    pub q: f64,
    /// Voltage magnitude for slack/PV buses; angle for the slack bus.
    pub v: f64,
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PfSolution {
    /// Complex bus voltages (pu magnitude).
    pub v: Vec<C64>,
    /// Net complex injection `V conj(Y V)` per bus.
    pub s: Vec<C64>,
    pub iterations: usize,
    pub mismatch: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PfOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PfOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 30 }
    }
}

fn injections(y: &DMatrix<C64>, v: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let n = v.len();
    let mut i = vec![C64::default(); n];
    for r in 0..n {
        for c in 0..n {
            i[r] += y[(r, c)] * v[c];
        }
    }
    let s = (0..n).map(|k| v[k] * i[k].conj()).collect();
    (i, s)
}

/// Solves the power flow from a flat start (specified magnitudes, zero angles).
pub fn solve(y: &DMatrix<C64>, buses: &[PfBus], opts: PfOptions) -> Result<PfSolution> {
    let n = buses.len();
    if y.nrows() != n || y.ncols() != n {
        return Err(Error::Dimension("admittance matrix vs bus list".into()));
    }
    let mut vm: Vec<f64> = buses.iter().map(|b| if b.kind == BusKind::Pq { 1.0 } else { b.v }).collect();
    let mut va: Vec<f64> = buses.iter().map(|b| if b.kind == BusKind::Slack { b.angle } else { 0.0 }).collect();
    let pvpq: Vec<usize> = (0..n).filter(|k| buses[*k].kind != BusKind::Slack).collect();
    let pq: Vec<usize> = (0..n).filter(|k| buses[*k].kind == BusKind::Pq).collect();
    let m = pvpq.len() + pq.len();
    let volt = |vm: &[f64], va: &[f64]| -> Vec<C64> { (0..n).map(|k| C64::from_polar(vm[k], va[k])).collect() };
    let mismatch = |s: &[C64]| -> DVector<f64> {
        let mut f = DVector::zeros(m);
        for (r, k) in pvpq.iter().enumerate() {
            f[r] = s[*k].re - buses[*k].p;
        }
        for (r, k) in pq.iter().enumerate() {
            f[pvpq.len() + r] = s[*k].im - buses[*k].q;
        }
        f
    };
    let mut iterations = 0;
    loop {
        let v = volt(&vm, &va);
        let (i, s) = injections(y, &v);
        let f = mismatch(&s);
        let err = f.amax();
        if !err.is_finite() {
            return Err(Error::PowerFlowDiverged { iterations, mismatch: err });
        }
        if err < opts.tol || m == 0 {
            return Ok(PfSolution { v, s, iterations, mismatch: err });
        }
        if iterations >= opts.max_iter {
            return Err(Error::PowerFlowDiverged { iterations, mismatch: err });
        }
        iterations += 1;
        // dS/dVa = j diag(V) conj(diag(I) - Y diag(V))
        // dS/dVm = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
        let ds_da = |r: usize, c: usize| -> C64 {
            let mut t = -y[(r, c)] * v[c];
            if r == c {
                t += i[r];
            }
            C64::new(0.0, 1.0) * v[r] * t.conj()
        };
        let ds_dm = |r: usize, c: usize| -> C64 {
            let u = v[c] / vm[c];
            let mut t = v[r] * (y[(r, c)] * u).conj();
            if r == c {
                t += i[r].conj() * u;
            }
            t
        };
        let mut jac = DMatrix::zeros(m, m);
        let np = pvpq.len();
        for (a, r) in pvpq.iter().enumerate() {
            for (b, c) in pvpq.iter().enumerate() {
                jac[(a, b)] = ds_da(*r, *c).re;
            }
            for (b, c) in pq.iter().enumerate() {
                jac[(a, np + b)] = ds_dm(*r, *c).re;
            }
        }
        for (a, r) in pq.iter().enumerate() {
            for (b, c) in pvpq.iter().enumerate() {
                jac[(np + a, b)] = ds_da(*r, *c).im;
            }
            for (b, c) in pq.iter().enumerate() {
                jac[(np + a, np + b)] = ds_dm(*r, *c).im;
            }
        }
        let dx = jac.lu().solve(&(-f)).ok_or(Error::PowerFlowDiverged { iterations, mismatch: err })?;
        for (a, k) in pvpq.iter().enumerate() {
            va[*k] += dx[a];
        }
        for (a, k) in pq.iter().enumerate() {
            vm[*k] += dx[np + a];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bus(kind: BusKind, p: f64, q: f64, v: f64) -> PfBus {
        PfBus { name: String::new(), kind, p, q, v, angle: 0.0 }
    }

    #[test]
    fn two_bus_against_closed_form() {
        // slack 1 pu feeding a PQ load through jx
        let x = 0.1;
        let yl = C64::new(0.0, -1.0 / x);
        let y = DMatrix::from_row_slice(2, 2, &[yl, -yl, -yl, yl]);
        let sol =
            solve(&y, &[bus(BusKind::Slack, 0.0, 0.0, 1.0), bus(BusKind::Pq, -1.0, 0.0, 1.0)], PfOptions::default())
                .unwrap();
        let v2 = sol.v[1];
        // oracle: P = V1 V2 sin(d)/x with zero reactive injection at bus 2
        let p = v2.norm() * v2.arg().sin() / x;
        assert_abs_diff_eq!(p, -1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.s[1].im, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(sol.s[0].re, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn single_bus_converges_immediately() {
        let y = DMatrix::from_element(1, 1, C64::default());
        let sol = solve(&y, &[bus(BusKind::Slack, 0.0, 0.0, 1.0)], PfOptions::default()).unwrap();
        assert!(sol.iterations <= 1);
    }

    #[test]
    fn zero_load_flat_start() {
        let yl = C64::new(1.0, -10.0);
        let y = DMatrix::from_row_slice(2, 2, &[yl, -yl, -yl, yl]);
        let sol =
            solve(&y, &[bus(BusKind::Slack, 0.0, 0.0, 1.0), bus(BusKind::Pq, 0.0, 0.0, 1.0)], PfOptions::default())
                .unwrap();
        assert!(sol.iterations <= 1);
    }

    #[test]
    fn infeasible_demand_diverges() {
        let yl = C64::new(0.0, -1.0 / 0.1);
        let y = DMatrix::from_row_slice(2, 2, &[yl, -yl, -yl, yl]);
        let r =
            solve(&y, &[bus(BusKind::Slack, 0.0, 0.0, 1.0), bus(BusKind::Pq, -50.0, 0.0, 1.0)], PfOptions::default());
        assert!(matches!(r, Err(Error::PowerFlowDiverged { .. })));
    }
}
