//! Grid-following inverter in its own PLL-aligned dq frame, DPs `k in {0, +-2}`.
//!
//! Structure: PLL, first-order voltage measurement, P/|v| outer loops producing current
//! references at k = 0, constant-angle current limiter, PI current loops with cross-coupling
//! feedforward, and the series R-L filter plus transformer as the plant. The converter is
//! ideal (`v_t = v_t*`). No zero-sequence path exists through the unit.

use serde::{Deserialize, Serialize};

use super::{harm_symbols, Harm02, Reader, Symbol, Writer};
use crate::error::{Error, Result};
use crate::phasor::{AsyncFrame, DqHarmonics, SeqTriple, C64};

/// Voltage below which the `P/v_dm` division in the outer loop is refused.
pub const V_DM_GUARD: f64 = 0.2;

/// Controller and filter data on the system base. Reactances are `omega_s L` in pu.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GflParams {
    pub kp_pll: f64,
    pub ki_pll: f64,
    pub tau_m: f64,
    pub tau_f: f64,
    pub kp_v: f64,
    pub ki_v: f64,
    pub kp_i: f64,
    pub ki_i: f64,
    pub r: f64,
    pub x: f64,
    pub r_t: f64,
    pub x_t: f64,
    pub i_max: f64,
}

impl GflParams {
    pub fn validate(&self, name: &str) -> Result<()> {
        let bad = |m: &str| Err(Error::config(format!("ibr {name}"), m));
        if !(self.tau_m > 0.0 && self.tau_f > 0.0) {
            return bad("time constants must be > 0");
        }
        if !(self.x + self.x_t > 0.0) {
            return bad("L + L_t must be > 0");
        }
        if !(self.i_max > 0.0) {
            return bad("i_max must be > 0");
        }
        Ok(())
    }

    pub fn x_total(&self) -> f64 {
        self.x + self.x_t
    }

    pub fn r_total(&self) -> f64 {
        self.r + self.r_t
    }

    /// PLL gains for a closed-loop natural frequency `2 pi bw_hz` at damping `zeta`, for a
    /// terminal voltage of `v` pu: `s^2 + kp v s + ki v`.
    pub fn pll_gains_from_bandwidth(bw_hz: f64, zeta: f64, v: f64) -> (f64, f64) {
        let wn = 2.0 * std::f64::consts::PI * bw_hz;
        (2.0 * zeta * wn / v, wn * wn / v)
    }

    /// Gains whose closed loop `(2 zeta wn s + wn^2) / (s^2 + 2 zeta wn s + wn^2)` has its
    /// -3 dB point at `bw_hz`.
    pub fn pll_gains_from_3db(bw_hz: f64, zeta: f64, v: f64) -> (f64, f64) {
        let a = 1.0 + 2.0 * zeta * zeta;
        let ratio = (a + (a * a + 1.0).sqrt()).sqrt();
        Self::pll_gains_from_bandwidth(bw_hz / ratio, zeta, v)
    }
}

/// Exogenous inputs of one inverter.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GflInputs {
    /// Real-power reference `P_c*` in the controller's 3/2-scaled convention.
    pub p_ref: f64,
    /// `|v_dq|*`.
    pub v_ref: f64,
    pub u_d: f64,
    pub u_q: f64,
}

/// Inverter state. Harmonic symbols carry k = 0 (real) and k = 2 (complex).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GflState {
    pub x_pll: Harm02,
    pub delta: Harm02,
    pub v_dm: Harm02,
    pub v_qm: Harm02,
    pub x_id: Harm02,
    pub x_iq: Harm02,
    pub i_td: Harm02,
    pub i_tq: Harm02,
    pub x_f: f64,
    pub x_v: f64,
}

pub const GFL_STATE_LEN: usize = 26;

impl GflState {
    pub fn symbols() -> Vec<Symbol> {
        let mut out = Vec::new();
        for s in ["x_pll", "delta_pll", "v_dm", "v_qm", "x_id", "x_iq", "i_td", "i_tq"] {
            harm_symbols(&mut out, s);
        }
        out.push(Symbol::real("x_f"));
        out.push(Symbol::real("x_v"));
        out
    }

    pub fn read(x: &[f64]) -> Self {
        let mut r = Reader::new(x);
        GflState {
            x_pll: r.harm(),
            delta: r.harm(),
            v_dm: r.harm(),
            v_qm: r.harm(),
            x_id: r.harm(),
            x_iq: r.harm(),
            i_td: r.harm(),
            i_tq: r.harm(),
            x_f: r.real(),
            x_v: r.real(),
        }
    }

    pub fn write(&self, x: &mut [f64]) {
        let mut w = Writer::new(x);
        for h in [self.x_pll, self.delta, self.v_dm, self.v_qm, self.x_id, self.x_iq, self.i_td, self.i_tq] {
            w.harm(h);
        }
        w.real(self.x_f);
        w.real(self.x_v);
    }

    pub fn frame(&self) -> AsyncFrame {
        AsyncFrame::new(self.delta.k0, self.delta.k2)
    }

    /// `|v_dq|` from the k = 0 measured components.
    pub fn v_mag(&self) -> f64 {
        self.v_dm.k0.hypot(self.v_qm.k0)
    }

    /// Current magnitude at k = 0.
    pub fn i_mag(&self) -> f64 {
        self.i_td.k0.hypot(self.i_tq.k0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PllDerivatives {
    pub x_pll: Harm02,
    pub delta: Harm02,
}

/// `d<x_pll>_k = k_i <v_q>_k - j k w <x_pll>_k`,
/// `d<delta>_k = k_p <v_q>_k + <x_pll>_k - j k w <delta>_k`.
pub fn pll_derivatives(state: &GflState, v_q: Harm02, params: &GflParams, omega_s: f64) -> PllDerivatives {
    PllDerivatives {
        x_pll: v_q * params.ki_pll + state.x_pll.rotation(omega_s),
        delta: v_q * params.kp_pll + state.x_pll + state.delta.rotation(omega_s),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterLoop {
    pub v_dm: Harm02,
    pub v_qm: Harm02,
    pub x_f: f64,
    pub x_v: f64,
    /// Reactive-power reference from the |v| PI.
    pub q_ref: f64,
    pub i_td_ref: f64,
    pub i_tq_ref: f64,
}

/// Measurement filters, |v| PI and k = 0 current references.
pub fn outer_loop_eval(
    state: &GflState,
    v_d: Harm02,
    v_q: Harm02,
    params: &GflParams,
    inputs: &GflInputs,
    omega_s: f64,
    device: &str,
) -> Result<OuterLoop> {
    let v_dm = state.v_dm.k0;
    if v_dm.abs() < V_DM_GUARD || !v_dm.is_finite() {
        return Err(Error::LowVoltage { device: device.to_string(), v_dm, guard: V_DM_GUARD });
    }
    let inv_tm = 1.0 / params.tau_m;
    let d_vdm = (v_d - state.v_dm) * inv_tm + state.v_dm.rotation(omega_s);
    let d_vqm = (v_q - state.v_qm) * inv_tm + state.v_qm.rotation(omega_s);
    let v_mag = state.v_mag();
    let err = inputs.v_ref - state.x_f;
    let q_ref = state.x_v + params.kp_v * err;
    Ok(OuterLoop {
        v_dm: d_vdm,
        v_qm: d_vqm,
        x_f: (v_mag - state.x_f) / params.tau_f,
        x_v: params.ki_v * err,
        q_ref,
        i_td_ref: 2.0 / 3.0 * inputs.p_ref / v_dm + inputs.u_d,
        i_tq_ref: -2.0 / 3.0 * q_ref / v_dm + inputs.u_q,
    })
}

/// Constant-angle limiter: scales both references by `I_max/|i*|` when the magnitude exceeds
/// `I_max`.
pub fn apply_current_limit(i_td_ref: f64, i_tq_ref: f64, i_max: f64) -> (f64, f64) {
    let mag = i_td_ref.hypot(i_tq_ref);
    if mag <= i_max {
        (i_td_ref, i_tq_ref)
    } else {
        let s = i_max / mag;
        (i_td_ref * s, i_tq_ref * s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerLoop {
    pub x_id: Harm02,
    pub x_iq: Harm02,
    pub i_td: Harm02,
    pub i_tq: Harm02,
    pub v_td: Harm02,
    pub v_tq: Harm02,
}

/// PI current loops with cross-coupling feedforward and the series R-L plant.
pub fn inner_loop_and_filter_derivatives(
    state: &GflState,
    i_td_ref: f64,
    i_tq_ref: f64,
    v_d: Harm02,
    v_q: Harm02,
    params: &GflParams,
    omega_s: f64,
) -> InnerLoop {
    let x = params.x_total();
    let r = params.r_total();
    // references exist at k = 0 only
    let e_d = Harm02::new(i_td_ref, C64::default()) - state.i_td;
    let e_q = Harm02::new(i_tq_ref, C64::default()) - state.i_tq;
    let v_td = e_d * params.kp_i + state.x_id + state.v_dm - state.i_tq * x;
    let v_tq = e_q * params.kp_i + state.x_iq + state.v_qm + state.i_td * x;
    let gain = omega_s / x;
    InnerLoop {
        x_id: e_d * params.ki_i + state.x_id.rotation(omega_s),
        x_iq: e_q * params.ki_i + state.x_iq.rotation(omega_s),
        i_td: (v_td - v_d + state.i_tq * x - state.i_td * r) * gain + state.i_td.rotation(omega_s),
        i_tq: (v_tq - v_q - state.i_td * x - state.i_tq * r) * gain + state.i_tq.rotation(omega_s),
        v_td,
        v_tq,
    }
}

/// Full inverter evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct GflIbr {
    pub name: String,
    pub params: GflParams,
}

/// Algebraic by-products of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GflOutput {
    /// Current injected into the POI node.
    pub injection: SeqTriple,
    pub v_dq: DqHarmonics,
    pub v_mag: f64,
    pub i_ref_limited: (f64, f64),
    pub limiting: bool,
}

impl GflIbr {
    pub fn new(name: impl Into<String>, params: GflParams) -> Self {
        Self { name: name.into(), params }
    }

    /// Terminal voltage seen in the inverter frame.
    pub fn terminal_dq(state: &GflState, v_node: SeqTriple) -> DqHarmonics {
        state.frame().pnz_to_dq(v_node.p, v_node.n)
    }

    pub fn injection(state: &GflState) -> SeqTriple {
        let i = DqHarmonics { d0: state.i_td.k0, q0: state.i_tq.k0, d2: state.i_td.k2, q2: state.i_tq.k2 };
        let (p, n) = state.frame().dq_to_pnz(&i);
        SeqTriple::new(p, n, C64::default())
    }

    pub fn evaluate(
        &self,
        x: &[f64],
        dx: &mut [f64],
        v_node: SeqTriple,
        inputs: &GflInputs,
        omega_s: f64,
    ) -> Result<GflOutput> {
        let s = GflState::read(x);
        let v = Self::terminal_dq(&s, v_node);
        let v_d = Harm02::new(v.d0, v.d2);
        let v_q = Harm02::new(v.q0, v.q2);
        let pll = pll_derivatives(&s, v_q, &self.params, omega_s);
        let outer = outer_loop_eval(&s, v_d, v_q, &self.params, inputs, omega_s, &self.name)?;
        let (i_d_ref, i_q_ref) = apply_current_limit(outer.i_td_ref, outer.i_tq_ref, self.params.i_max);
        let limiting = outer.i_td_ref.hypot(outer.i_tq_ref) > self.params.i_max;
        let inner = inner_loop_and_filter_derivatives(&s, i_d_ref, i_q_ref, v_d, v_q, &self.params, omega_s);
        let d = GflState {
            x_pll: pll.x_pll,
            delta: pll.delta,
            v_dm: outer.v_dm,
            v_qm: outer.v_qm,
            x_id: inner.x_id,
            x_iq: inner.x_iq,
            i_td: inner.i_td,
            i_tq: inner.i_tq,
            x_f: outer.x_f,
            x_v: outer.x_v,
        };
        d.write(dx);
        Ok(GflOutput {
            injection: Self::injection(&s),
            v_dq: v,
            v_mag: s.v_mag(),
            i_ref_limited: (i_d_ref, i_q_ref),
            limiting,
        })
    }

    /// Equilibrium for a POI voltage phasor `v` (pu magnitude, i.e. `sqrt(2) <v_p>_1`) and
    /// injected current phasor `i`.
    pub fn equilibrium(&self, v: C64, i: C64) -> Result<(GflState, GflInputs)> {
        let delta = v.arg() + std::f64::consts::FRAC_PI_2;
        let rot = C64::from_polar(1.0, -delta);
        let vr = v * rot;
        let ir = i * rot;
        let (v_d, v_q) = (-vr.im, vr.re);
        let (i_d, i_q) = (-ir.im, ir.re);
        let p = &self.params;
        if v_d < V_DM_GUARD {
            return Err(Error::DeviceInitInfeasible {
                device: self.name.clone(),
                reason: format!("terminal voltage {v_d:.3} pu below guard"),
            });
        }
        if i_d.hypot(i_q) > p.i_max {
            return Err(Error::DeviceInitInfeasible {
                device: self.name.clone(),
                reason: format!("current reference {:.3} pu exceeds i_max {:.3} pu", i_d.hypot(i_q), p.i_max),
            });
        }
        let h = |v: f64| Harm02::new(v, C64::default());
        let state = GflState {
            x_pll: Harm02::ZERO,
            delta: h(delta),
            v_dm: h(v_d),
            v_qm: h(v_q),
            x_id: h(p.r_total() * i_d),
            x_iq: h(p.r_total() * i_q),
            i_td: h(i_d),
            i_tq: h(i_q),
            x_f: v_d.hypot(v_q),
            x_v: -1.5 * v_d * i_q,
        };
        let inputs = GflInputs { p_ref: 1.5 * v_d * i_d, v_ref: v_d.hypot(v_q), u_d: 0.0, u_q: 0.0 };
        Ok((state, inputs))
    }
}
