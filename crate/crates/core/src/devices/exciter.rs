//! IEEE DC1A rotating exciter, k = 0 only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExciterParams {
    pub t_f: f64,
    pub t_r: f64,
    pub t_a: f64,
    pub t_e: f64,
    pub k_a: f64,
    pub k_f: f64,
    pub k_e: f64,
    pub a_ex: f64,
    pub b_ex: f64,
    #[serde(default)]
    pub vr_max: Option<f64>,
    #[serde(default)]
    pub vr_min: Option<f64>,
}

impl ExciterParams {
    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.t_f > 0.0 && self.t_r > 0.0 && self.t_a > 0.0 && self.t_e > 0.0) {
            return Err(Error::config(format!("exciter of {name}"), "time constants must be > 0"));
        }
        if let (Some(hi), Some(lo)) = (self.vr_max, self.vr_min) {
            if hi <= lo {
                return Err(Error::config(format!("exciter of {name}"), "vr_max <= vr_min"));
            }
        }
        Ok(())
    }

    /// Saturation term `A_ex e^{B_ex e_fd} e_fd`.
    pub fn saturation(&self, e_fd: f64) -> f64 {
        self.a_ex * (self.b_ex * e_fd).exp() * e_fd
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExciterState {
    pub r_f: f64,
    pub v_tr: f64,
    pub v_r: f64,
    pub e_fd: f64,
}

pub const EXCITER_STATE_LEN: usize = 4;

impl ExciterState {
    pub fn read(x: &[f64]) -> Self {
        Self { r_f: x[0], v_tr: x[1], v_r: x[2], e_fd: x[3] }
    }

    pub fn write(&self, x: &mut [f64]) {
        x[0] = self.r_f;
        x[1] = self.v_tr;
        x[2] = self.v_r;
        x[3] = self.e_fd;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExciterDerivatives {
    pub d: ExciterState,
    /// Field voltage applied to the machine, `(R_fd/L_adu) e_fd`.
    pub v_f: f64,
}

/// DC1A dynamics. `v_p` is the positive-sequence terminal voltage magnitude in pu.
pub fn exciter_dc1a_derivatives(
    state: &ExciterState,
    v_p: f64,
    v_ref: f64,
    params: &ExciterParams,
    r_fd: f64,
    l_adu: f64,
) -> ExciterDerivatives {
    let p = params;
    let mut d_vr =
        (p.k_a * p.k_f / p.t_f * (state.r_f - state.e_fd) + p.k_a * (v_ref - state.v_tr) - state.v_r) / p.t_a;
    if let Some(hi) = p.vr_max {
        if state.v_r >= hi && d_vr > 0.0 {
            d_vr = 0.0;
        }
    }
    if let Some(lo) = p.vr_min {
        if state.v_r <= lo && d_vr < 0.0 {
            d_vr = 0.0;
        }
    }
    ExciterDerivatives {
        d: ExciterState {
            r_f: (state.e_fd - state.r_f) / p.t_f,
            v_tr: (v_p - state.v_tr) / p.t_r,
            v_r: d_vr,
            e_fd: -(p.k_e * state.e_fd + p.saturation(state.e_fd) - state.v_r) / p.t_e,
        },
        v_f: r_fd / l_adu * state.e_fd,
    }
}

/// Steady state for a field voltage `e_fd` and sensed voltage `v_p`; returns the state and
/// the voltage reference that holds it.
pub fn exciter_equilibrium(e_fd: f64, v_p: f64, params: &ExciterParams) -> (ExciterState, f64) {
    let v_r = params.k_e * e_fd + params.saturation(e_fd);
    let v_ref = v_p + v_r / params.k_a;
    (ExciterState { r_f: e_fd, v_tr: v_p, v_r, e_fd }, v_ref)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    pub fn params() -> ExciterParams {
        ExciterParams {
            t_f: 1.8,
            t_r: 0.05,
            t_a: 0.055,
            t_e: 0.36,
            k_a: 20.0,
            k_f: 0.125,
            k_e: 1.0,
            a_ex: 0.0056,
            b_ex: 1.075,
            vr_max: None,
            vr_min: None,
        }
    }

    #[test]
    fn steady_state_is_fixed_point() {
        let p = params();
        let (s, v_ref) = exciter_equilibrium(2.1, 1.01, &p);
        let d = exciter_dc1a_derivatives(&s, 1.01, v_ref, &p, 0.001, 1.6);
        for v in [d.d.r_f, d.d.v_tr, d.d.v_r, d.d.e_fd] {
            assert!(v.abs() < 1e-13);
        }
        assert_abs_diff_eq!(d.v_f, 0.001 / 1.6 * 2.1, epsilon = 1e-15);
    }

    #[test]
    fn saturation_term_value() {
        let p = ExciterParams { a_ex: 0.01, b_ex: 1.0, ..params() };
        assert_abs_diff_eq!(p.saturation(2.0), 0.01 * 2f64.exp() * 2.0, epsilon = 1e-15);
        let s = ExciterState { e_fd: 2.0, ..Default::default() };
        let d = exciter_dc1a_derivatives(&s, 1.0, 1.0, &p, 1.0, 1.0);
        assert_abs_diff_eq!(d.d.e_fd, -(p.k_e * 2.0 + 0.01 * 2f64.exp() * 2.0) / p.t_e, epsilon = 1e-12);
    }

    #[test]
    fn vr_ceiling_holds() {
        let p = ExciterParams { vr_max: Some(3.0), ..params() };
        let s = ExciterState { v_r: 3.0, ..Default::default() };
        let d = exciter_dc1a_derivatives(&s, 0.5, 1.2, &p, 1.0, 1.0);
        assert_eq!(d.d.v_r, 0.0);
    }

    /// Linearized step response against the analytic transfer function: with K_F = 0,
    /// no saturation and a frozen transducer, `e_fd(s)/v_ref(s) = K_A / ((1 + s T_A)(K_E + s T_E))`.
    #[test]
    fn vref_step_matches_second_order_response() {
        let p = ExciterParams { k_f: 0.0, a_ex: 0.0, t_r: 1e9, ..params() };
        let (mut s, v_ref0) = exciter_equilibrium(1.0, 1.0, &p);
        let step = 0.05 * v_ref0;
        let dt = 1e-5;
        let mut t = 0.0;
        let (a, b) = (1.0 / p.t_a, p.k_e / p.t_e);
        let gain = p.k_a / (p.t_a * p.t_e);
        while t < 1.0 {
            // RK4 on the nonlinear right-hand side
            let f = |s: &ExciterState| exciter_dc1a_derivatives(s, 1.0, v_ref0 + step, &p, 1.0, 1.0).d;
            let k1 = f(&s);
            let add = |s: &ExciterState, k: &ExciterState, h: f64| ExciterState {
                r_f: s.r_f + h * k.r_f,
                v_tr: s.v_tr + h * k.v_tr,
                v_r: s.v_r + h * k.v_r,
                e_fd: s.e_fd + h * k.e_fd,
            };
            let k2 = f(&add(&s, &k1, dt / 2.0));
            let k3 = f(&add(&s, &k2, dt / 2.0));
            let k4 = f(&add(&s, &k3, dt));
            s.v_r += dt / 6.0 * (k1.v_r + 2.0 * k2.v_r + 2.0 * k3.v_r + k4.v_r);
            s.e_fd += dt / 6.0 * (k1.e_fd + 2.0 * k2.e_fd + 2.0 * k3.e_fd + k4.e_fd);
            s.r_f += dt / 6.0 * (k1.r_f + 2.0 * k2.r_f + 2.0 * k3.r_f + k4.r_f);
            t += dt;
        }
        // step response of gain/((s+a)(s+b))
        let y = step * gain * (1.0 / (a * b) + (-a * t).exp() / (a * (a - b)) - (-b * t).exp() / (b * (a - b)));
        assert_abs_diff_eq!(s.e_fd - 1.0, y, epsilon = 1e-6 * y.abs().max(1e-3));
    }
}
