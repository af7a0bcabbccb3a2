//! Damping controllers, loop closure, settling-time checks and the sequential design loop.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::filter::FilterSpec;
use super::hinf::{
    build_generalized_plant, damping_input_name, hinf_synthesize, GeneralizedPlant, StateSpace, SynthesisOptions,
};
use super::reduce::{peak_error, schur_balanced_truncation, stable_projection, truncation_bound};
use crate::analysis::{eigenvalues, logspace, LinearModel};
use crate::assembly::{DampingInput, InstalledController, SystemModel};
use crate::error::{Error, Result};
use crate::phasor::C64;

/// SISO damping controller: washout on the inverter's `|v_dq|`, then `K(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub name: String,
    pub ibr: String,
    pub input: DampingInput,
    pub washout: FilterSpec,
    pub k: StateSpace,
    pub gamma: f64,
}

impl Controller {
    pub fn order(&self) -> usize {
        self.k.order()
    }

    /// Realization from `|v_dq|` deviation to the damping input, washout included.
    pub fn realization(&self) -> Result<StateSpace> {
        let h = self.washout.realize()?;
        let (nh, nk) = (h.order(), self.k.order());
        let n = nh + nk;
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (nh, nh)).copy_from(&h.a);
        a.view_mut((nh, 0), (nk, nh)).copy_from(&(&self.k.b * &h.c));
        a.view_mut((nh, nh), (nk, nk)).copy_from(&self.k.a);
        let mut b = DMatrix::zeros(n, 1);
        b.view_mut((0, 0), (nh, 1)).copy_from(&h.b);
        b.view_mut((nh, 0), (nk, 1)).copy_from(&(&self.k.b * &h.d));
        let mut c = DMatrix::zeros(1, n);
        c.view_mut((0, 0), (1, nh)).copy_from(&(&self.k.d * &h.c));
        c.view_mut((0, nh), (1, nk)).copy_from(&self.k.c);
        let d = &self.k.d * &h.d;
        Ok(StateSpace { a, b, c, d })
    }

    /// Form accepted by [`SystemModel::install_controller`]; needs a first-order washout.
    pub fn installed(&self, model: &SystemModel) -> Result<InstalledController> {
        let t_w = self.washout.washout_time().ok_or_else(|| {
            Error::config(&format!("controller {}", self.name), "the nonlinear model needs a washout sT/(1+sT)")
        })?;
        let ibr = model.ibr_index(&self.ibr)?;
        Ok(InstalledController {
            name: self.name.clone(),
            ibr,
            input: self.input,
            a: self.k.a.clone(),
            b: DVector::from_column_slice(self.k.b.column(0).as_slice()),
            c: DVector::from_iterator(self.k.order(), self.k.c.row(0).iter().copied()),
            d: self.k.d[(0, 0)],
            t_w,
            offset: 0,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ControllerDoc::from(self)).expect("controller serializes")
    }

    pub fn from_toml_str(s: &str, origin: &str) -> Result<Self> {
        let doc: ControllerDoc = toml::from_str(s).map_err(|e| Error::config(origin, e.to_string()))?;
        doc.into_controller(origin)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string())
            .map_err(|e| Error::config(&path.display().to_string(), e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let origin = path.display().to_string();
        let s = std::fs::read_to_string(path).map_err(|e| Error::config(&origin, e.to_string()))?;
        Self::from_toml_str(&s, &origin)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateSpaceDoc {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    d: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerDoc {
    format: u32,
    name: String,
    ibr: String,
    input: DampingInput,
    gamma: f64,
    washout: FilterSpec,
    state_space: StateSpaceDoc,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn matrix(r: &[Vec<f64>], nrows: usize, ncols: usize, what: &str, origin: &str) -> Result<DMatrix<f64>> {
    if r.len() != nrows || r.iter().any(|row| row.len() != ncols) {
        return Err(Error::config(origin, format!("{what} must be {nrows}x{ncols}")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| r[i][j]))
}

impl From<&Controller> for ControllerDoc {
    fn from(c: &Controller) -> Self {
        Self {
            format: 1,
            name: c.name.clone(),
            ibr: c.ibr.clone(),
            input: c.input,
            gamma: c.gamma,
            washout: c.washout.clone(),
            state_space: StateSpaceDoc { a: rows(&c.k.a), b: rows(&c.k.b), c: rows(&c.k.c), d: rows(&c.k.d) },
        }
    }
}

impl ControllerDoc {
    fn into_controller(self, origin: &str) -> Result<Controller> {
        if self.format != 1 {
            return Err(Error::config(origin, format!("unsupported controller format {}", self.format)));
        }
        self.washout.validate()?;
        let n = self.state_space.a.len();
        let ss = &self.state_space;
        let k = StateSpace {
            a: matrix(&ss.a, n, n, "a", origin)?,
            b: matrix(&ss.b, n, 1, "b", origin)?,
            c: matrix(&ss.c, 1, n, "c", origin)?,
            d: matrix(&ss.d, 1, 1, "d", origin)?,
        };
        Ok(Controller {
            name: self.name,
            ibr: self.ibr,
            input: self.input,
            washout: self.washout,
            k,
            gamma: self.gamma,
        })
    }
}

/// Positive-feedback interconnection `u += K(s) |v_dq|` on the controller's channels.
/// All plant inputs and outputs are kept; controller states are appended.
pub fn close_loop(plant: &LinearModel, ctrl: &Controller) -> Result<LinearModel> {
    let ju = plant.input_index(&damping_input_name(&ctrl.ibr, ctrl.input))?;
    let iv = plant.output_index(&format!("vdq:{}", ctrl.ibr))?;
    let k = ctrl.realization()?;
    let (n, nk) = (plant.n_states(), k.order());
    let bu = plant.b.column(ju).into_owned();
    let du = plant.d.column(ju).into_owned();
    let cv = plant.c.row(iv).into_owned();
    let dv = plant.d.row(iv).into_owned();
    let dvu = plant.d[(iv, ju)];
    let dk = k.d[(0, 0)];
    let den = 1.0 - dk * dvu;
    if den.abs() < 1e-12 {
        return Err(Error::AlgebraicLoop);
    }
    let m = 1.0 / den;
    // r = m (Ck xk + Dk cv x + Dk dv u)
    let r_x = &cv * (m * dk);
    let r_xk = &k.c * m;
    let r_u = &dv * (m * dk);
    // v = cv x + dv u + dvu r
    let v_x = &cv + &r_x * dvu;
    let v_xk = &r_xk * dvu;
    let v_u = &dv + &r_u * dvu;
    let nt = n + nk;
    let mut a = DMatrix::zeros(nt, nt);
    a.view_mut((0, 0), (n, n)).copy_from(&(&plant.a + &bu * &r_x));
    a.view_mut((0, n), (n, nk)).copy_from(&(&bu * &r_xk));
    a.view_mut((n, 0), (nk, n)).copy_from(&(&k.b * &v_x));
    a.view_mut((n, n), (nk, nk)).copy_from(&(&k.a + &k.b * &v_xk));
    let mi = plant.b.ncols();
    let mut b = DMatrix::zeros(nt, mi);
    b.view_mut((0, 0), (n, mi)).copy_from(&(&plant.b + &bu * &r_u));
    b.view_mut((n, 0), (nk, mi)).copy_from(&(&k.b * &v_u));
    let po = plant.c.nrows();
    let mut c = DMatrix::zeros(po, nt);
    c.view_mut((0, 0), (po, n)).copy_from(&(&plant.c + &du * &r_x));
    c.view_mut((0, n), (po, nk)).copy_from(&(&du * &r_xk));
    let d = &plant.d + &du * &r_u;
    let nh = nk - ctrl.k.order();
    let mut states = plant.states.clone();
    states.extend((0..nh).map(|j| format!("{}.washout{j}", ctrl.name)));
    states.extend((0..ctrl.k.order()).map(|j| format!("{}.x{j}", ctrl.name)));
    Ok(LinearModel { a, b, c, d, states, inputs: plant.inputs.clone(), outputs: plant.outputs.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettlingReport {
    /// Largest `4 / (zeta |lambda|)` over oscillatory modes in the band.
    pub max_settling: f64,
    pub dominant: C64,
    pub bound: f64,
    pub pass: bool,
}

/// Tolerance on `Re λ` for marginal modes (e.g. absolute angle reference).
const MARGINAL: f64 = 1e-6;

/// 2% settling time `4 / (zeta |lambda|) = 4 / (-Re lambda)` of the slowest oscillatory
/// mode with frequency in `band` (Hz).
pub fn settling_time_check(a: &DMatrix<f64>, bound: f64, band: (f64, f64)) -> Result<SettlingReport> {
    let ev = eigenvalues(a)?;
    let max_re = ev.iter().map(|l| l.re).fold(f64::MIN, f64::max);
    if max_re > MARGINAL {
        return Err(Error::UnstableClosedLoop { max_re });
    }
    let mut worst = (0.0, C64::new(0.0, 0.0));
    for l in &ev {
        let f = l.im / (2.0 * std::f64::consts::PI);
        if l.im <= 0.0 || f < band.0 || f > band.1 {
            continue;
        }
        let ts = if l.re < 0.0 { 4.0 / -l.re } else { f64::INFINITY };
        if ts > worst.0 {
            worst = (ts, *l);
        }
    }
    Ok(SettlingReport { max_settling: worst.0, dominant: worst.1, bound, pass: worst.0 < bound })
}

/// Least-damped mode in a band as `(f Hz, zeta)`.
pub fn least_damped(a: &DMatrix<f64>, band: (f64, f64)) -> Result<Option<(f64, f64)>> {
    Ok(eigenvalues(a)?
        .iter()
        .filter(|l| l.im > 0.0)
        .map(|l| (l.im / (2.0 * std::f64::consts::PI), crate::analysis::modal::damping_ratio(*l)))
        .filter(|(f, _)| *f >= band.0 && *f <= band.1)
        .min_by(|a, b| a.1.total_cmp(&b.1)))
}

fn default_band() -> (f64, f64) {
    (0.1, 15.0)
}
fn default_sso_band() -> (f64, f64) {
    (4.0, 8.0)
}
fn default_margin() -> f64 {
    1e-4
}
fn default_weights() -> Vec<f64> {
    vec![1.0, 0.3, 0.1, 0.03, 0.01]
}
fn default_grid_points() -> usize {
    400
}

/// Inputs of [`sequential_design`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    /// Inverters in design order.
    pub ibrs: Vec<String>,
    /// Settling-time bound per stage (s), strictly decreasing.
    pub settling: Vec<f64>,
    pub weight: FilterSpec,
    pub washout: FilterSpec,
    /// Reduced plant order.
    pub order: usize,
    #[serde(default = "default_input")]
    pub input: DampingInput,
    /// Control penalties tried in turn until the settling bound holds.
    #[serde(default = "default_weights")]
    pub control_weights: Vec<f64>,
    /// Frequency band (Hz) for the settling-time check.
    #[serde(default = "default_band")]
    pub band: (f64, f64),
    /// Band (Hz) in which the SSO mode is tracked for reporting.
    #[serde(default = "default_sso_band")]
    pub sso_band: (f64, f64),
    /// Modes with `Re λ >= -margin` are split off before reduction.
    #[serde(default = "default_margin")]
    pub stability_margin: f64,
    /// Points of the log grid used to measure the reduction error.
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_gamma_margin")]
    pub gamma_margin: f64,
    /// Scaling of a disturbance entering with the control input. Voltage-to-current gains of
    /// grid inverters are small, so this has to be large for the resonance to dominate `z`.
    #[serde(default = "default_input_disturbance")]
    pub input_disturbance: f64,
    /// Scaling of an extra measurement-noise channel on `y`.
    #[serde(default = "default_sensor_noise")]
    pub sensor_noise: f64,
}

fn default_input() -> DampingInput {
    DampingInput::Uq
}
fn default_input_disturbance() -> f64 {
    100.0
}
fn default_sensor_noise() -> f64 {
    0.01
}
fn default_gamma_margin() -> f64 {
    SynthesisOptions::default().gamma_margin
}

impl DesignSpec {
    /// Bandpass weight `25.13 s / (s^2 + 25.13 s + 1593)`, washout `T_w = 2 s`.
    pub fn new(ibrs: &[&str], settling: &[f64], order: usize) -> Self {
        Self {
            ibrs: ibrs.iter().map(|s| s.to_string()).collect(),
            settling: settling.to_vec(),
            weight: FilterSpec::bandpass(25.13, 1593.0),
            washout: FilterSpec::washout(2.0),
            order,
            input: DampingInput::Uq,
            control_weights: default_weights(),
            band: default_band(),
            sso_band: default_sso_band(),
            stability_margin: default_margin(),
            grid_points: default_grid_points(),
            gamma_margin: default_gamma_margin(),
            input_disturbance: default_input_disturbance(),
            sensor_noise: default_sensor_noise(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config("design", m.to_string()));
        if self.ibrs.is_empty() || self.ibrs.len() != self.settling.len() {
            return bad("ibrs and settling must be non-empty and of equal length");
        }
        if self.settling.windows(2).any(|w| !(w[1] < w[0])) || self.settling.iter().any(|t| !(*t > 0.0)) {
            return bad("settling-time schedule must be positive and strictly decreasing");
        }
        if self.order == 0 || self.control_weights.is_empty() || self.control_weights.iter().any(|w| !(*w > 0.0)) {
            return bad("order must be >= 1 and control weights positive");
        }
        if !(self.sensor_noise >= 0.0) || !(self.input_disturbance >= 0.0) {
            return bad("sensor_noise and input_disturbance must be >= 0");
        }
        if !(self.gamma_margin >= 1.0) {
            return bad("gamma_margin must be >= 1");
        }
        self.weight.validate()?;
        self.washout.validate()
    }

    pub fn from_toml_str(s: &str, origin: &str) -> Result<Self> {
        let d: Self = toml::from_str(s).map_err(|e| Error::config(origin, e.to_string()))?;
        d.validate()?;
        Ok(d)
    }
}

#[derive(Debug, Clone)]
pub struct StageReport {
    pub ibr: String,
    /// Modes split off before reduction.
    pub removed_modes: usize,
    pub hankel: Vec<f64>,
    pub reduction_bound: f64,
    pub reduction_error: f64,
    pub gamma: f64,
    pub gamma_opt: f64,
    pub peak: f64,
    pub regularized: bool,
    pub control_weight: f64,
    pub settling: SettlingReport,
    pub sso_before: Option<(f64, f64)>,
    pub sso_after: Option<(f64, f64)>,
    /// Reduced single-loop plant the controller was synthesized on.
    pub reduced: LinearModel,
    /// Weighted generalized plant of the accepted synthesis.
    pub generalized: GeneralizedPlant,
}

#[derive(Debug, Clone)]
pub struct Design {
    pub controllers: Vec<Controller>,
    pub stages: Vec<StageReport>,
    pub closed_loop: LinearModel,
}

/// For each inverter in order: split off marginal modes, reduce, synthesize, check the
/// settling time and close the loop; the closed loop is the next stage's plant.
pub fn sequential_design(lm: &LinearModel, spec: &DesignSpec) -> Result<Design> {
    spec.validate()?;
    let mut current = lm.clone();
    let mut controllers = Vec::new();
    let mut stages = Vec::new();
    for (si, (ibr, ts)) in spec.ibrs.iter().zip(&spec.settling).enumerate() {
        let stage = |e: Error| Error::Stage { stage: si + 1, source: Box::new(e) };
        let r = design_stage(&current, ibr, *ts, spec).map_err(stage)?;
        current = r.1;
        controllers.push(r.0);
        stages.push(r.2);
    }
    Ok(Design { controllers, stages, closed_loop: current })
}

fn design_stage(
    plant: &LinearModel,
    ibr: &str,
    ts: f64,
    spec: &DesignSpec,
) -> Result<(Controller, LinearModel, StageReport)> {
    let ju = plant.input_index(&damping_input_name(ibr, spec.input))?;
    let iv = plant.output_index(&format!("vdq:{ibr}"))?;
    let siso = plant.select(&[ju], &[iv]);
    let split = stable_projection(&siso, spec.stability_margin)?;
    if split.max_removed_re > spec.stability_margin {
        return Err(Error::UnstablePlant { count: split.removed, max_re: split.max_removed_re });
    }
    let (red, hsv) = schur_balanced_truncation(&split.stable, spec.order)?;
    let grid = logspace(1e-2, 1e4, spec.grid_points);
    let reduction_error = peak_error(&split.stable, &red, &grid)?;
    let reduction_bound = truncation_bound(&hsv, red.n_states());
    let sso_before = least_damped(&plant.a, spec.sso_band)?;
    let mut last_err = None;
    for rho in &spec.control_weights {
        let mut pr = build_generalized_plant(&red, ibr, spec.input, &spec.weight, &spec.washout)?;
        if spec.input_disturbance > 0.0 {
            pr.plant = pr.plant.with_input_disturbance(spec.input_disturbance);
        }
        pr.plant = pr.plant.with_control_penalty(*rho);
        if spec.sensor_noise > 0.0 {
            pr.plant = pr.plant.with_sensor_noise(spec.sensor_noise);
        }
        pr.settling_bound = Some(ts);
        pr.options.gamma_margin = spec.gamma_margin;
        let syn = match hinf_synthesize(&pr) {
            Ok(s) => s,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let ctrl = Controller {
            name: format!("K_{ibr}"),
            ibr: ibr.to_string(),
            input: spec.input,
            washout: spec.washout.clone(),
            k: syn.controller.clone(),
            gamma: syn.gamma,
        };
        let cl = close_loop(plant, &ctrl)?;
        let settling = match settling_time_check(&cl.a, ts, spec.band) {
            Ok(s) => s,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        if !settling.pass {
            last_err = Some(Error::SettlingTime { achieved: settling.max_settling, bound: ts });
            continue;
        }
        let sso_after = least_damped(&cl.a, spec.sso_band)?;
        let report = StageReport {
            ibr: ibr.to_string(),
            removed_modes: split.removed,
            hankel: hsv,
            reduction_bound,
            reduction_error,
            gamma: syn.gamma,
            gamma_opt: syn.gamma_opt,
            peak: syn.peak,
            regularized: syn.regularized,
            control_weight: *rho,
            settling,
            sso_before,
            sso_after,
            reduced: red.clone(),
            generalized: pr.plant.clone(),
        };
        return Ok((ctrl, cl, report));
    }
    Err(last_err.unwrap_or_else(|| Error::Numerical("no control weight tried".into())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn one(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn zero_controller(ibr: &str) -> Controller {
        Controller {
            name: "K".into(),
            ibr: ibr.into(),
            input: DampingInput::Uq,
            washout: FilterSpec::washout(2.0),
            k: StateSpace { a: one(-1.0), b: one(0.0), c: one(0.0), d: one(0.0) },
            gamma: 1.0,
        }
    }

    /// Two lightly damped oscillators, each observed and actuated by one "inverter".
    fn two_oscillators() -> LinearModel {
        let (s, w1, w2) = (-0.1, 40.0, 33.0);
        let a = DMatrix::from_row_slice(4, 4, &[s, w1, 0.0, 0.0, -w1, s, 0.3, 0.0, 0.0, 0.0, s, w2, 0.0, 0.3, -w2, s]);
        let b = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.5, 0.0, 0.0, 0.5, 1.0]);
        let c = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.5, 0.0, 0.5, 0.0, 1.0, 0.0]);
        let mut lm = LinearModel::new(a, b, c, DMatrix::zeros(2, 2)).unwrap();
        lm.inputs = vec!["u_q:IBR1".into(), "u_q:IBR2".into()];
        lm.outputs = vec!["vdq:IBR1".into(), "vdq:IBR2".into()];
        lm
    }

    #[test]
    fn zero_controller_leaves_plant() {
        let lm = two_oscillators();
        let cl = close_loop(&lm, &zero_controller("IBR1")).unwrap();
        assert_eq!(cl.a.view((0, 0), (4, 4)), lm.a);
        assert_eq!(cl.b.rows(0, 4), lm.b);
        assert_eq!(cl.c.columns(0, 4), lm.c);
        assert_eq!(cl.d, lm.d);
    }

    #[test]
    fn settling_formula() {
        let a = DMatrix::from_row_slice(2, 2, &[-0.1, 40.0, -40.0, -0.1]);
        let r = settling_time_check(&a, 15.0, (0.1, 15.0)).unwrap();
        assert_abs_diff_eq!(r.max_settling, 40.0, epsilon = 1e-9);
        assert!(!r.pass);
        assert!(settling_time_check(&a, 45.0, (0.1, 15.0)).unwrap().pass);
        let u = DMatrix::from_row_slice(2, 2, &[0.1, 40.0, -40.0, 0.1]);
        assert!(matches!(settling_time_check(&u, 45.0, (0.1, 15.0)), Err(Error::UnstableClosedLoop { .. })));
    }

    #[test]
    fn algebraic_loop_detected() {
        let mut lm = two_oscillators();
        lm.d[(0, 0)] = 1.0;
        let mut k = zero_controller("IBR1");
        k.washout = FilterSpec::identity();
        k.k = StateSpace::zero(1, 1);
        k.k.d = one(1.0);
        assert!(matches!(close_loop(&lm, &k), Err(Error::AlgebraicLoop)));
    }

    #[test]
    fn stabilizing_controller_on_unstable_plant() {
        // dx = 0.5 x + u, y = x; u = -2 y via static gain
        let mut lm = LinearModel::new(one(0.5), one(1.0), one(1.0), one(0.0)).unwrap();
        lm.inputs = vec!["u_q:IBR1".into()];
        lm.outputs = vec!["vdq:IBR1".into()];
        let k = Controller {
            name: "K".into(),
            ibr: "IBR1".into(),
            input: DampingInput::Uq,
            washout: FilterSpec::identity(),
            k: StateSpace { a: DMatrix::zeros(0, 0), b: DMatrix::zeros(0, 1), c: DMatrix::zeros(1, 0), d: one(-2.0) },
            gamma: 1.0,
        };
        let cl = close_loop(&lm, &k).unwrap();
        assert!(eigenvalues(&cl.a).unwrap().iter().all(|l| l.re < 0.0));
        assert_abs_diff_eq!(cl.a[(0, 0)], -1.5, epsilon = 1e-15);
    }

    #[test]
    fn two_stage_design_improves_damping() {
        let lm = two_oscillators();
        let mut spec = DesignSpec::new(&["IBR2", "IBR1"], &[45.0, 15.0], 4);
        spec.sso_band = (4.0, 8.0);
        // unit-gain toy plant
        spec.input_disturbance = 1.0;
        let d = sequential_design(&lm, &spec).unwrap();
        assert_eq!(d.controllers.len(), 2);
        let z0 = least_damped(&lm.a, (4.0, 8.0)).unwrap().unwrap().1;
        let z1 = d.stages[0].sso_after.unwrap().1;
        let z2 = d.stages[1].sso_after.unwrap().1;
        assert!(z1 > z0 && z2 > z1, "{z0} {z1} {z2}");
        for s in &d.stages {
            assert!(s.peak <= s.gamma * (1.0 + 1e-6));
            assert!(s.reduction_error <= s.reduction_bound * (1.0 + 1e-9) + 1e-12);
        }
        assert!(d.stages[1].settling.max_settling < 15.0);
    }

    #[test]
    fn schedule_must_decrease() {
        let spec = DesignSpec::new(&["IBR2", "IBR1"], &[15.0, 45.0], 4);
        assert!(sequential_design(&two_oscillators(), &spec).is_err());
    }

    #[test]
    fn controller_document_round_trip() {
        let mut k = zero_controller("IBR2");
        k.k.a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.1 + 1e-17, 0.3, -2.0 / 3.0]);
        k.k.b = DMatrix::from_row_slice(2, 1, &[1.0, -0.5]);
        k.k.c = DMatrix::from_row_slice(1, 2, &[0.25, std::f64::consts::PI]);
        let s = k.to_toml_string();
        let back = Controller::from_toml_str(&s, "test").unwrap();
        assert_eq!(back, k);
        assert!(Controller::from_toml_str(&s.replace("format = 1", "format = 9"), "test").is_err());
    }
}
