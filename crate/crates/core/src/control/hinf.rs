//! Generalized plants and two-Riccati H-infinity synthesis with gamma bisection.

use nalgebra::DMatrix;

use super::filter::FilterSpec;
use super::linalg::{inv_sqrt, min_eig, riccati};
use super::reduce::schur_balanced_truncation;
use crate::analysis::{eigenvalues, frequency_response, logspace, LinearModel};
use crate::assembly::DampingInput;
use crate::error::{Error, Result};

/// `dx = A x + B1 w + B2 u`, `z = C1 x + D11 w + D12 u`, `y = C2 x + D21 w + D22 u`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedPlant {
    pub a: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c1: DMatrix<f64>,
    pub c2: DMatrix<f64>,
    pub d11: DMatrix<f64>,
    pub d12: DMatrix<f64>,
    pub d21: DMatrix<f64>,
    pub d22: DMatrix<f64>,
}

impl GeneralizedPlant {
    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.n_states();
        let (m1, m2) = (self.b1.ncols(), self.b2.ncols());
        let (p1, p2) = (self.c1.nrows(), self.c2.nrows());
        let ok = self.a.ncols() == n
            && self.b1.nrows() == n
            && self.b2.nrows() == n
            && self.c1.ncols() == n
            && self.c2.ncols() == n
            && self.d11.shape() == (p1, m1)
            && self.d12.shape() == (p1, m2)
            && self.d21.shape() == (p2, m1)
            && self.d22.shape() == (p2, m2);
        if !ok {
            return Err(Error::Dimension("generalized plant blocks are inconsistent".into()));
        }
        Ok(())
    }

    /// Appends `rho * u` to the performance output.
    pub fn with_control_penalty(&self, rho: f64) -> Self {
        let (p1, m1, m2, n) = (self.c1.nrows(), self.b1.ncols(), self.b2.ncols(), self.n_states());
        let mut p = self.clone();
        p.c1 = DMatrix::zeros(p1 + m2, n);
        p.c1.view_mut((0, 0), (p1, n)).copy_from(&self.c1);
        p.d11 = DMatrix::zeros(p1 + m2, m1);
        p.d11.view_mut((0, 0), (p1, m1)).copy_from(&self.d11);
        p.d12 = DMatrix::zeros(p1 + m2, m2);
        p.d12.view_mut((0, 0), (p1, m2)).copy_from(&self.d12);
        for k in 0..m2 {
            p.d12[(p1 + k, k)] = rho;
        }
        p
    }

    /// Appends a disturbance `rho * d` entering with the control input.
    pub fn with_input_disturbance(&self, rho: f64) -> Self {
        let (p1, m1, p2, n, m2) = (self.c1.nrows(), self.b1.ncols(), self.c2.nrows(), self.n_states(), self.b2.ncols());
        let mut p = self.clone();
        p.b1 = DMatrix::zeros(n, m1 + m2);
        p.b1.view_mut((0, 0), (n, m1)).copy_from(&self.b1);
        p.b1.view_mut((0, m1), (n, m2)).copy_from(&(&self.b2 * rho));
        p.d11 = DMatrix::zeros(p1, m1 + m2);
        p.d11.view_mut((0, 0), (p1, m1)).copy_from(&self.d11);
        p.d11.view_mut((0, m1), (p1, m2)).copy_from(&(&self.d12 * rho));
        p.d21 = DMatrix::zeros(p2, m1 + m2);
        p.d21.view_mut((0, 0), (p2, m1)).copy_from(&self.d21);
        p.d21.view_mut((0, m1), (p2, m2)).copy_from(&(&self.d22 * rho));
        p
    }

    /// Appends `rho * v` as a disturbance on each measurement.
    pub fn with_sensor_noise(&self, rho: f64) -> Self {
        let (p1, m1, p2, n) = (self.c1.nrows(), self.b1.ncols(), self.c2.nrows(), self.n_states());
        let mut p = self.clone();
        p.b1 = DMatrix::zeros(n, m1 + p2);
        p.b1.view_mut((0, 0), (n, m1)).copy_from(&self.b1);
        p.d11 = DMatrix::zeros(p1, m1 + p2);
        p.d11.view_mut((0, 0), (p1, m1)).copy_from(&self.d11);
        p.d21 = DMatrix::zeros(p2, m1 + p2);
        p.d21.view_mut((0, 0), (p2, m1)).copy_from(&self.d21);
        for k in 0..p2 {
            p.d21[(k, m1 + k)] = rho;
        }
        p
    }
}

/// State-space controller `dxk = Ak xk + Bk y`, `u = Ck xk + Dk y`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpace {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn zero(m: usize, p: usize) -> Self {
        Self { a: DMatrix::zeros(0, 0), b: DMatrix::zeros(0, p), c: DMatrix::zeros(m, 0), d: DMatrix::zeros(m, p) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOptions {
    /// Relative bisection tolerance on gamma.
    pub tol: f64,
    /// The controller is computed at `gamma_margin * gamma_opt`.
    pub gamma_margin: f64,
    /// Feedthrough added when `D12` or `D21` is rank deficient.
    pub regularization: f64,
    /// Verification grid: `(lo, hi, points)` in rad/s, log-spaced.
    pub grid: (f64, f64, usize),
    pub gamma_max: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self { tol: 1e-3, gamma_margin: 1.1, regularization: 1e-6, grid: (1e-2, 1e4, 400), gamma_max: 1e8 }
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisProblem {
    pub plant: GeneralizedPlant,
    /// Requested gamma; `None` bisects for the optimum.
    pub gamma: Option<f64>,
    /// Settling-time bound checked by the design loop.
    pub settling_bound: Option<f64>,
    pub options: SynthesisOptions,
}

impl SynthesisProblem {
    pub fn new(plant: GeneralizedPlant) -> Self {
        Self { plant, gamma: None, settling_bound: None, options: SynthesisOptions::default() }
    }
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub controller: StateSpace,
    /// Gamma used for the central controller.
    pub gamma: f64,
    /// Bisection estimate of the optimal gamma.
    pub gamma_opt: f64,
    /// Peak of `sigma_max(T_zw(jw))` over the verification grid.
    pub peak: f64,
    /// True if the rank regularization was applied.
    pub regularized: bool,
    /// Closed-loop state matrix of `P` with the controller.
    pub closed_loop_a: DMatrix<f64>,
}

/// Builds the damping-control plant for one inverter: `z = W (|v_dq|* - |v_dq| - w)`,
/// `y = washout(|v_dq| + w)`, control `u` on the selected inverter input.
pub fn build_generalized_plant(
    lm: &LinearModel,
    ibr: &str,
    input: DampingInput,
    weight: &FilterSpec,
    washout: &FilterSpec,
) -> Result<SynthesisProblem> {
    let u = lm.input_index(&damping_input_name(ibr, input))?;
    let y = lm.output_index(&format!("vdq:{ibr}"))?;
    let g = lm.select(&[u], &[y]);
    let w = weight.realize()?;
    let h = washout.realize()?;
    let (n, nw, nh) = (g.n_states(), w.order(), h.order());
    let nt = n + nw + nh;
    let (cg, dg) = (&g.c, g.d[(0, 0)]);
    let (dw, dh) = (w.d[(0, 0)], h.d[(0, 0)]);
    let mut a = DMatrix::zeros(nt, nt);
    a.view_mut((0, 0), (n, n)).copy_from(&g.a);
    a.view_mut((n, 0), (nw, n)).copy_from(&(-(&w.b * cg)));
    a.view_mut((n, n), (nw, nw)).copy_from(&w.a);
    a.view_mut((n + nw, 0), (nh, n)).copy_from(&(&h.b * cg));
    a.view_mut((n + nw, n + nw), (nh, nh)).copy_from(&h.a);
    let mut b1 = DMatrix::zeros(nt, 1);
    b1.view_mut((n, 0), (nw, 1)).copy_from(&(-&w.b));
    b1.view_mut((n + nw, 0), (nh, 1)).copy_from(&h.b);
    let mut b2 = DMatrix::zeros(nt, 1);
    b2.view_mut((0, 0), (n, 1)).copy_from(&g.b);
    b2.view_mut((n, 0), (nw, 1)).copy_from(&(-&w.b * dg));
    b2.view_mut((n + nw, 0), (nh, 1)).copy_from(&(&h.b * dg));
    let mut c1 = DMatrix::zeros(1, nt);
    c1.view_mut((0, 0), (1, n)).copy_from(&(-cg * dw));
    c1.view_mut((0, n), (1, nw)).copy_from(&w.c);
    let mut c2 = DMatrix::zeros(1, nt);
    c2.view_mut((0, 0), (1, n)).copy_from(&(cg * dh));
    c2.view_mut((0, n + nw), (1, nh)).copy_from(&h.c);
    let one = |v: f64| DMatrix::from_element(1, 1, v);
    let plant =
        GeneralizedPlant { a, b1, b2, c1, c2, d11: one(-dw), d12: one(-dw * dg), d21: one(dh), d22: one(dh * dg) };
    Ok(SynthesisProblem::new(plant))
}

pub fn damping_input_name(ibr: &str, input: DampingInput) -> String {
    match input {
        DampingInput::Ud => format!("u_d:{ibr}"),
        DampingInput::Uq => format!("u_q:{ibr}"),
    }
}

fn full_column_rank(m: &DMatrix<f64>) -> bool {
    if m.ncols() == 0 {
        return true;
    }
    if m.nrows() < m.ncols() {
        return false;
    }
    let s = m.clone().svd(false, false).singular_values;
    s.min() > 1e-12 * s.max().max(1e-300)
}

/// For square invertible `D`, whether the invariant zeros `eig(A - B D^-1 C)` touch the
/// imaginary axis.
fn square_zeros_on_axis(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<bool> {
    if d.nrows() != d.ncols() || a.nrows() == 0 {
        return Ok(false);
    }
    let Some(di) = d.clone().try_inverse() else { return Ok(false) };
    let z = eigenvalues(&(a - b * di * c))?;
    let scale = a.amax().max(1.0);
    Ok(z.iter().any(|l| l.re.abs() <= 1e-9 * scale))
}

/// Normalized data: `D12^T D12 = I`, `D21 D21^T = I`, `D22` removed.
struct Normalized {
    a: DMatrix<f64>,
    b1: DMatrix<f64>,
    b2: DMatrix<f64>,
    c1: DMatrix<f64>,
    c2: DMatrix<f64>,
    d12: DMatrix<f64>,
    d21: DMatrix<f64>,
    su: DMatrix<f64>,
    sy: DMatrix<f64>,
}

fn normalize(p: &GeneralizedPlant) -> Result<Normalized> {
    let su = inv_sqrt(&(p.d12.transpose() * &p.d12))?;
    let sy = inv_sqrt(&(&p.d21 * p.d21.transpose()))?;
    Ok(Normalized {
        a: p.a.clone(),
        b1: p.b1.clone(),
        b2: &p.b2 * &su,
        c1: p.c1.clone(),
        c2: &sy * &p.c2,
        d12: &p.d12 * &su,
        d21: &sy * &p.d21,
        su,
        sy,
    })
}

/// Central controller for the normalized problem at `gamma`, or `None` if infeasible.
fn central(nz: &Normalized, gamma: f64) -> Option<StateSpace> {
    let n = nz.a.nrows();
    let g2 = 1.0 / (gamma * gamma);
    let ip1 = DMatrix::identity(nz.c1.nrows(), nz.c1.nrows());
    let im1 = DMatrix::identity(nz.b1.ncols(), nz.b1.ncols());
    let ax = &nz.a - &nz.b2 * nz.d12.transpose() * &nz.c1;
    let rx = &nz.b1 * nz.b1.transpose() * g2 - &nz.b2 * nz.b2.transpose();
    let qx = nz.c1.transpose() * (&ip1 - &nz.d12 * nz.d12.transpose()) * &nz.c1;
    let x = riccati(&ax, &rx, &qx).ok()?;
    let ay = (&nz.a - &nz.b1 * nz.d21.transpose() * &nz.c2).transpose();
    let ry = nz.c1.transpose() * &nz.c1 * g2 - nz.c2.transpose() * &nz.c2;
    let qy = &nz.b1 * (&im1 - nz.d21.transpose() * &nz.d21) * nz.b1.transpose();
    let y = riccati(&ay, &ry, &qy).ok()?;
    let tol = |m: &DMatrix<f64>| -1e-9 * m.amax().max(1.0);
    if min_eig(&x) < tol(&x) || min_eig(&y) < tol(&y) {
        return None;
    }
    let xy = &y * &x;
    let rho = eigenvalues(&xy).ok()?.iter().map(|l| l.norm()).fold(0.0, f64::max);
    if !(rho < gamma * gamma * (1.0 - 1e-9)) {
        return None;
    }
    let f = -(nz.d12.transpose() * &nz.c1 + nz.b2.transpose() * &x);
    let l = -(&nz.b1 * nz.d21.transpose() + &y * nz.c2.transpose());
    let z = (DMatrix::identity(n, n) - &xy * g2).try_inverse()?;
    let zl = &z * &l;
    let ak = &nz.a
        + &nz.b1 * nz.b1.transpose() * &x * g2
        + &nz.b2 * &f
        + &zl * (&nz.c2 + &nz.d21 * nz.b1.transpose() * &x * g2);
    let k = StateSpace { a: ak, b: -zl, c: f, d: DMatrix::zeros(nz.b2.ncols(), nz.c2.nrows()) };
    k.a.iter().chain(k.b.iter()).chain(k.c.iter()).all(|v| v.is_finite()).then_some(k)
}

/// Lower linear fractional transformation of `P` with `K`: `(A, B, C, D)` from `w` to `z`.
pub fn lft(p: &GeneralizedPlant, k: &StateSpace) -> Result<LinearModel> {
    let (n, nk) = (p.n_states(), k.order());
    let (m2, p2) = (p.b2.ncols(), p.c2.nrows());
    // u = Ck xk + Dk y, y = C2 x + D21 w + D22 u  =>  u = M (Ck xk + Dk C2 x + Dk D21 w)
    let m = (DMatrix::identity(m2, m2) - &k.d * &p.d22).try_inverse().ok_or(Error::AlgebraicLoop)?;
    let u_x = &m * &k.d * &p.c2;
    let u_xk = &m * &k.c;
    let u_w = &m * &k.d * &p.d21;
    let y_x = &p.c2 + &p.d22 * &u_x;
    let y_xk = &p.d22 * &u_xk;
    let y_w = &p.d21 + &p.d22 * &u_w;
    let nt = n + nk;
    let mut a = DMatrix::zeros(nt, nt);
    a.view_mut((0, 0), (n, n)).copy_from(&(&p.a + &p.b2 * &u_x));
    a.view_mut((0, n), (n, nk)).copy_from(&(&p.b2 * &u_xk));
    a.view_mut((n, 0), (nk, n)).copy_from(&(&k.b * &y_x));
    a.view_mut((n, n), (nk, nk)).copy_from(&(&k.a + &k.b * &y_xk));
    let mut b = DMatrix::zeros(nt, p.b1.ncols());
    b.view_mut((0, 0), (n, p.b1.ncols())).copy_from(&(&p.b1 + &p.b2 * &u_w));
    b.view_mut((n, 0), (nk, p.b1.ncols())).copy_from(&(&k.b * &y_w));
    let mut c = DMatrix::zeros(p.c1.nrows(), nt);
    c.view_mut((0, 0), (p.c1.nrows(), n)).copy_from(&(&p.c1 + &p.d12 * &u_x));
    c.view_mut((0, n), (p.c1.nrows(), nk)).copy_from(&(&p.d12 * &u_xk));
    let d = &p.d11 + &p.d12 * &u_w;
    let _ = p2;
    LinearModel::new(a, b, c, d)
}

/// Peak `sigma_max` of a model over a grid.
pub fn peak_gain(lm: &LinearModel, omegas: &[f64]) -> Result<f64> {
    Ok(frequency_response(lm, omegas)?.iter().map(|g| g.singular_values().max()).fold(0.0, f64::max))
}

/// Removes numerically unobservable or uncontrollable controller states when the
/// controller is stable.
fn minimal(k: StateSpace) -> StateSpace {
    if k.order() == 0 {
        return k;
    }
    let Ok(ev) = eigenvalues(&k.a) else { return k };
    if ev.iter().any(|l| l.re >= 0.0) {
        return k;
    }
    let lm = match LinearModel::new(k.a.clone(), k.b.clone(), k.c.clone(), k.d.clone()) {
        Ok(lm) => lm,
        Err(_) => return k,
    };
    let Ok((_, hsv)) = schur_balanced_truncation(&lm, k.order()) else { return k };
    let smax = hsv.first().copied().unwrap_or(0.0);
    let r = hsv.iter().filter(|s| **s > 1e-10 * smax).count();
    if r == k.order() || r == 0 {
        return k;
    }
    match schur_balanced_truncation(&lm, r) {
        Ok((red, _)) => StateSpace { a: red.a, b: red.b, c: red.c, d: red.d },
        Err(_) => k,
    }
}

/// Two-Riccati H-infinity synthesis. Bisects gamma unless one is requested, then
/// verifies the closed loop on the frequency grid.
pub fn hinf_synthesize(problem: &SynthesisProblem) -> Result<Synthesis> {
    let opts = &problem.options;
    let mut p = problem.plant.clone();
    p.check()?;
    if p.b2.ncols() == 0 || p.c2.nrows() == 0 {
        return Err(Error::AssumptionViolated("plant has no control input or measurement".into()));
    }
    if p.d11.amax() > 0.0 {
        return Err(Error::AssumptionViolated("D11 must be zero (use a strictly proper weight)".into()));
    }
    let mut regularized = false;
    if !full_column_rank(&p.d12) {
        p = p.with_control_penalty(opts.regularization);
        regularized = true;
    }
    if !full_column_rank(&p.d21.transpose()) {
        p = p.with_sensor_noise(opts.regularization);
        regularized = true;
    }
    if square_zeros_on_axis(&p.a, &p.b1, &p.c2, &p.d21)? {
        p = p.with_sensor_noise(opts.regularization);
        regularized = true;
    }
    if square_zeros_on_axis(&p.a, &p.b2, &p.c1, &p.d12)? {
        p = p.with_control_penalty(opts.regularization);
        regularized = true;
    }
    let nz = normalize(&p)?;
    let feasible = |g: f64| central(&nz, g);
    let (gamma_opt, gamma) = match problem.gamma {
        Some(g) => {
            if feasible(g).is_none() {
                let lower = bisect(&feasible, opts)?.0;
                return Err(Error::GammaInfeasible { requested: g, lower_bound: lower });
            }
            (g, g)
        }
        None => {
            let (lo, hi) = bisect(&feasible, opts)?;
            let _ = lo;
            (hi, hi * opts.gamma_margin)
        }
    };
    let kn =
        feasible(gamma).ok_or_else(|| Error::Numerical(format!("central controller failed at gamma = {gamma}")))?;
    // undo normalization and reinsert D22 (Dk = 0)
    let d22n = &nz.sy * &p.d22 * &nz.su;
    let ak = &kn.a - &kn.b * d22n * &kn.c;
    let k = StateSpace { a: ak, b: &kn.b * &nz.sy, c: &nz.su * &kn.c, d: DMatrix::zeros(p.b2.ncols(), p.c2.nrows()) };
    let k = minimal(k);
    let cl = lft(&p, &k)?;
    let max_re = eigenvalues(&cl.a)?.iter().map(|l| l.re).fold(f64::MIN, f64::max);
    if max_re >= 0.0 {
        return Err(Error::UnstableClosedLoop { max_re });
    }
    let (lo, hi, npts) = opts.grid;
    let peak = peak_gain(&cl, &logspace(lo, hi, npts))?;
    if peak > gamma * (1.0 + 1e-6) {
        return Err(Error::Numerical(format!("closed-loop peak {peak:.6} exceeds gamma {gamma:.6}")));
    }
    Ok(Synthesis { controller: k, gamma, gamma_opt, peak, regularized, closed_loop_a: cl.a })
}

/// Bracket `(infeasible, feasible)` around the optimal gamma.
fn bisect(feasible: &dyn Fn(f64) -> Option<StateSpace>, opts: &SynthesisOptions) -> Result<(f64, f64)> {
    let mut hi = 1.0;
    let mut lo = 0.0;
    if feasible(hi).is_some() {
        let mut g = hi;
        for _ in 0..60 {
            g *= 0.5;
            if feasible(g).is_some() {
                hi = g;
            } else {
                lo = g;
                break;
            }
        }
    } else {
        lo = hi;
        loop {
            hi *= 2.0;
            if hi > opts.gamma_max {
                return Err(Error::AssumptionViolated(format!(
                    "no stabilizing controller achieves gamma <= {:.1e} (check stabilizability/detectability)",
                    opts.gamma_max
                )));
            }
            if feasible(hi).is_some() {
                break;
            }
            lo = hi;
        }
    }
    while (hi - lo) > opts.tol * hi {
        let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
        if feasible(mid).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    /// `G = 1/(s+1)`, `z = [G (u + w); u]`, `y = G (u + w) + w`.
    fn scalar_problem() -> GeneralizedPlant {
        GeneralizedPlant {
            a: one(-1.0),
            b1: one(1.0),
            b2: one(1.0),
            c1: DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            c2: one(1.0),
            d11: DMatrix::zeros(2, 1),
            d12: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            d21: one(1.0),
            d22: one(0.0),
        }
    }

    #[test]
    fn scalar_plant_unit_weights() {
        let s = hinf_synthesize(&SynthesisProblem::new(scalar_problem())).unwrap();
        assert!(s.gamma.is_finite() && s.gamma > 0.0);
        assert!(s.closed_loop_a.iter().all(|v| v.is_finite()));
        // independent dense-grid check of the closed-loop norm
        let cl = lft(&scalar_problem(), &s.controller).unwrap();
        let dense = peak_gain(&cl, &logspace(1e-4, 1e5, 4000)).unwrap();
        assert!(dense <= s.gamma * (1.0 + 1e-6), "{dense} > {}", s.gamma);
        assert!(eigenvalues(&cl.a).unwrap().iter().all(|l| l.re < 0.0));
    }

    #[test]
    fn gamma_below_optimum_is_infeasible() {
        let s = hinf_synthesize(&SynthesisProblem::new(scalar_problem())).unwrap();
        let mut pr = SynthesisProblem::new(scalar_problem());
        pr.gamma = Some(0.5 * s.gamma_opt);
        match hinf_synthesize(&pr) {
            Err(Error::GammaInfeasible { requested, lower_bound }) => {
                assert_eq!(requested, 0.5 * s.gamma_opt);
                assert!(lower_bound > requested);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unstable_plant_is_stabilized() {
        let mut p = scalar_problem();
        p.a = one(2.0);
        let s = hinf_synthesize(&SynthesisProblem::new(p.clone())).unwrap();
        let cl = lft(&p, &s.controller).unwrap();
        assert!(eigenvalues(&cl.a).unwrap().iter().all(|l| l.re < 0.0));
    }

    #[test]
    fn rank_deficient_d12_is_regularized() {
        let mut p = scalar_problem();
        p.c1 = one(1.0);
        p.d11 = one(0.0);
        p.d12 = one(0.0);
        let s = hinf_synthesize(&SynthesisProblem::new(p)).unwrap();
        assert!(s.regularized);
    }

    #[test]
    fn nonzero_d11_rejected() {
        let mut p = scalar_problem();
        p.d11[(0, 0)] = 1.0;
        assert!(matches!(hinf_synthesize(&SynthesisProblem::new(p)), Err(Error::AssumptionViolated(_))));
    }

    fn toy_model() -> LinearModel {
        let a = DMatrix::from_row_slice(2, 2, &[-0.1, 40.0, -40.0, -0.1]);
        let mut lm = LinearModel::new(
            a,
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            one(0.0),
        )
        .unwrap();
        lm.inputs = vec!["u_q:IBR2".into()];
        lm.outputs = vec!["vdq:IBR2".into()];
        lm
    }

    #[test]
    fn identity_filters_pass_plant_through() {
        let lm = toy_model();
        let pr =
            build_generalized_plant(&lm, "IBR2", DampingInput::Uq, &FilterSpec::identity(), &FilterSpec::identity())
                .unwrap();
        let p = pr.plant;
        assert_eq!(p.n_states(), 2);
        assert_eq!(p.a, lm.a);
        assert_eq!(p.b2, lm.b);
        assert_eq!(p.c2, lm.c);
        assert_eq!(p.d21, one(1.0));
        assert_eq!(p.b1, DMatrix::zeros(2, 1));
    }

    #[test]
    fn missing_channel() {
        let lm = toy_model();
        let r =
            build_generalized_plant(&lm, "IBR1", DampingInput::Uq, &FilterSpec::identity(), &FilterSpec::identity());
        assert!(matches!(r, Err(Error::MissingChannel(_))));
    }

    #[test]
    fn weighted_plant_state_count_and_damping() {
        let lm = toy_model();
        let w = FilterSpec::bandpass(25.13, 1593.0);
        let pr = build_generalized_plant(&lm, "IBR2", DampingInput::Uq, &w, &FilterSpec::washout(2.0)).unwrap();
        assert_eq!(pr.plant.n_states(), 2 + 2 + 1);
        let bare = hinf_synthesize(&pr).unwrap();
        assert!(bare.regularized);
        let mut pr = pr.clone();
        pr.plant = pr.plant.with_input_disturbance(1.0).with_control_penalty(0.1).with_sensor_noise(0.01);
        let s = hinf_synthesize(&pr).unwrap();
        // the lightly damped plant pole moves left once the loop is closed
        let k = &s.controller;
        let cl = lft(&pr.plant, k).unwrap();
        let ev = eigenvalues(&cl.a).unwrap();
        let near = ev.iter().filter(|l| (l.im.abs() - 40.0).abs() < 5.0).map(|l| l.re).fold(f64::MIN, f64::max);
        assert!(near < -0.1, "{ev:?}");
    }
}
