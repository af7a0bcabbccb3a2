//! Frequency response `G(jw) = C (jwI - A)^-1 B + D` and locational impact ranking.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::LinearModel;
use crate::error::{Error, Result};
use crate::phasor::C64;

/// `G(jw)` at a single frequency.
pub fn transfer_at(lm: &LinearModel, omega: f64) -> Result<DMatrix<C64>> {
    if !omega.is_finite() {
        return Err(Error::config("frequency grid", "frequencies must be finite"));
    }
    let n = lm.n_states();
    let dc = lm.d.map(|v| C64::new(v, 0.0));
    if n == 0 {
        return Ok(dc);
    }
    let mut m = lm.a.map(|v| C64::new(-v, 0.0));
    for i in 0..n {
        m[(i, i)] += C64::new(0.0, omega);
    }
    let lu = m.lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..n).map(|i| u[(i, i)].norm()).collect();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(*d), hi.max(*d)));
    if !(lo > 1e-13 * hi.max(1.0)) {
        return Err(Error::NearSingular { omega });
    }
    let bc = lm.b.map(|v| C64::new(v, 0.0));
    let x = lu.solve(&bc).ok_or(Error::NearSingular { omega })?;
    let cc = lm.c.map(|v| C64::new(v, 0.0));
    Ok(cc * x + dc)
}

/// `G(jw)` over a grid, evaluated in parallel.
pub fn frequency_response(lm: &LinearModel, omegas: &[f64]) -> Result<Vec<DMatrix<C64>>> {
    if omegas.is_empty() {
        return Err(Error::config("frequency grid", "grid is empty"));
    }
    if omegas.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::config("frequency grid", "frequencies must be finite and non-negative"));
    }
    omegas.par_iter().map(|w| transfer_at(lm, *w)).collect()
}

/// `n` logarithmically spaced points from `lo` to `hi`.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpactRow {
    pub input: String,
    pub index: f64,
    pub rank: usize,
}

/// Ranks inputs by `|G_yw(j omega)|` for one output, largest first.
pub fn locational_impact(lm: &LinearModel, inputs: &[usize], output: usize, omega: f64) -> Result<Vec<ImpactRow>> {
    if output >= lm.c.nrows() {
        return Err(Error::MissingChannel(format!("output #{output}")));
    }
    if let Some(j) = inputs.iter().find(|j| **j >= lm.b.ncols()) {
        return Err(Error::MissingChannel(format!("input #{j}")));
    }
    let g = transfer_at(lm, omega)?;
    let mut rows: Vec<ImpactRow> = inputs
        .iter()
        .map(|j| ImpactRow { input: lm.inputs[*j].clone(), index: g[(output, *j)].norm(), rank: 0 })
        .collect();
    rows.sort_by(|a, b| b.index.total_cmp(&a.index));
    for (k, r) in rows.iter_mut().enumerate() {
        r.rank = k + 1;
    }
    Ok(rows)
}
