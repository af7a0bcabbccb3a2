//! Synchronous generator with stator transients in pnz (k = +-1) and rotor circuits at
//! k in {0, +-2}: field, one d-axis damper, two q-axis dampers.
//!
//! Step-up transformer impedance is folded into the stator (resistance and leakage), so the
//! machine terminal is the transformer's network-side bus. Generator convention: stator
//! currents leave the machine.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::exciter::{exciter_dc1a_derivatives, exciter_equilibrium, ExciterParams, ExciterState};
use super::{harm_symbols, Harm02, Reader, Symbol, Writer};
use crate::error::{Error, Result};
use crate::phasor::{AsyncFrame, DqHarmonics, SeqTriple, C64, J};

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

/// Standard machine data on the machine's own base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgStandardData {
    pub ra: f64,
    pub xl: f64,
    pub xd: f64,
    pub xq: f64,
    pub xd_p: f64,
    pub xq_p: f64,
    pub xd_pp: f64,
    pub xq_pp: f64,
    pub td0_p: f64,
    pub tq0_p: f64,
    pub td0_pp: f64,
    pub tq0_pp: f64,
    /// Inertia constant (s).
    pub h: f64,
    /// Speed damping (pu torque / pu speed).
    #[serde(default)]
    pub kd: f64,
}

impl SgStandardData {
    pub fn validate(&self, name: &str) -> Result<()> {
        let bad = |m: &str| Err(Error::config(format!("sg {name}"), m));
        if !(self.xd > self.xd_p && self.xd_p > self.xd_pp && self.xd_pp > self.xl) {
            return bad("need xd > xd' > xd'' > xl");
        }
        if !(self.xq > self.xq_p && self.xq_p > self.xq_pp && self.xq_pp > self.xl) {
            return bad("need xq > xq' > xq'' > xl");
        }
        if !(self.td0_p > 0.0 && self.tq0_p > 0.0 && self.td0_pp > 0.0 && self.tq0_pp > 0.0) {
            return bad("open-circuit time constants must be > 0");
        }
        if !(self.h > 0.0) {
            return bad("h must be > 0");
        }
        Ok(())
    }
}

/// Fundamental (equivalent-circuit) parameters on the system base, reciprocal pu rotor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgParams {
    pub ra: f64,
    pub ll: f64,
    pub lad: f64,
    pub laq: f64,
    pub lfd: f64,
    pub rfd: f64,
    pub l1d: f64,
    pub r1d: f64,
    pub l1q: f64,
    pub r1q: f64,
    pub l2q: f64,
    pub r2q: f64,
    pub h: f64,
    pub kd: f64,
    /// Step-up transformer folded into the stator.
    pub r_t: f64,
    pub x_t: f64,
    /// Grounded-wye network-side winding: provides a zero-sequence path through `x_t`.
    pub grounded: bool,
}

fn parallel(a: f64, b: f64) -> f64 {
    a * b / (a + b)
}

impl SgParams {
    /// Classical conversion of standard data (machine base) to fundamental parameters, then
    /// to the system base `s_sys` given the machine rating `s_mach`.
    pub fn from_standard(
        d: &SgStandardData,
        s_mach: f64,
        s_sys: f64,
        r_t: f64,
        x_t: f64,
        grounded: bool,
        omega_s: f64,
    ) -> Self {
        let lad = d.xd - d.xl;
        let laq = d.xq - d.xl;
        let lfd = 1.0 / (1.0 / (d.xd_p - d.xl) - 1.0 / lad);
        let l1d = 1.0 / (1.0 / (d.xd_pp - d.xl) - 1.0 / lad - 1.0 / lfd);
        let rfd = (lad + lfd) / (omega_s * d.td0_p);
        let r1d = (l1d + parallel(lad, lfd)) / (omega_s * d.td0_pp);
        let l1q = 1.0 / (1.0 / (d.xq_p - d.xl) - 1.0 / laq);
        let l2q = 1.0 / (1.0 / (d.xq_pp - d.xl) - 1.0 / laq - 1.0 / l1q);
        let r1q = (laq + l1q) / (omega_s * d.tq0_p);
        let r2q = (l2q + parallel(laq, l1q)) / (omega_s * d.tq0_pp);
        let z = s_sys / s_mach;
        SgParams {
            ra: d.ra * z,
            ll: d.xl * z,
            lad: lad * z,
            laq: laq * z,
            lfd: lfd * z,
            rfd: rfd * z,
            l1d: l1d * z,
            r1d: r1d * z,
            l1q: l1q * z,
            r1q: r1q * z,
            l2q: l2q * z,
            r2q: r2q * z,
            h: d.h / z,
            kd: d.kd / z,
            r_t,
            x_t,
            grounded,
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        let vals = [
            self.ll, self.lad, self.laq, self.lfd, self.rfd, self.l1d, self.r1d, self.l1q, self.r1q, self.l2q,
            self.r2q, self.h,
        ];
        if vals.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::config(
                format!("sg {name}"),
                "fundamental parameters must be finite and > 0 (check standard data consistency)",
            ));
        }
        if self.grounded && !(self.x_t > 0.0) {
            return Err(Error::config(format!("sg {name}"), "grounded transformer needs x_t > 0"));
        }
        Ok(())
    }

    /// Stator resistance seen from the terminal.
    pub fn r_stator(&self) -> f64 {
        self.ra + self.r_t
    }

    pub fn l_stator(&self) -> f64 {
        self.ll + self.x_t
    }

    /// `[psi_d, psi_fd, psi_1d] = M [i_d, i_fd, i_1d]`.
    pub fn d_matrix(&self) -> Matrix3<f64> {
        let a = self.lad;
        Matrix3::new(-(a + self.l_stator()), a, a, -a, a + self.lfd, a, -a, a, a + self.l1d)
    }

    /// `[psi_q, psi_1q, psi_2q] = M [i_q, i_1q, i_2q]`.
    pub fn q_matrix(&self) -> Matrix3<f64> {
        let a = self.laq;
        Matrix3::new(-(a + self.l_stator()), a, a, -a, a + self.l1q, a, -a, a, a + self.l2q)
    }

    /// Open-circuit field time constant `L_ffd / (omega_s R_fd)` in seconds.
    pub fn field_time_constant(&self, omega_s: f64) -> f64 {
        (self.lad + self.lfd) / (omega_s * self.rfd)
    }
}

/// Machine state (without exciter).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SgState {
    pub psi_p: C64,
    pub psi_n: C64,
    /// Zero-sequence current through the grounded transformer winding (into ground).
    pub i_gz: C64,
    pub psi_fd: Harm02,
    pub psi_1d: Harm02,
    pub psi_1q: Harm02,
    pub psi_2q: Harm02,
    pub omega: f64,
    pub delta: f64,
}

impl SgState {
    pub fn len(grounded: bool) -> usize {
        4 + if grounded { 2 } else { 0 } + 12 + 2
    }

    pub fn symbols(grounded: bool) -> Vec<Symbol> {
        let mut out = vec![Symbol::complex("psi_p", 1), Symbol::complex("psi_n", 1)];
        if grounded {
            out.push(Symbol::complex("i_gz", 1));
        }
        for s in ["psi_fd", "psi_1d", "psi_1q", "psi_2q"] {
            harm_symbols(&mut out, s);
        }
        out.push(Symbol::real("omega"));
        out.push(Symbol::real("delta_g"));
        out
    }

    pub fn read(x: &[f64], grounded: bool) -> Self {
        let mut r = Reader::new(x);
        let psi_p = r.complex();
        let psi_n = r.complex();
        let i_gz = if grounded { r.complex() } else { C64::default() };
        SgState {
            psi_p,
            psi_n,
            i_gz,
            psi_fd: r.harm(),
            psi_1d: r.harm(),
            psi_1q: r.harm(),
            psi_2q: r.harm(),
            omega: r.real(),
            delta: r.real(),
        }
    }

    pub fn write(&self, x: &mut [f64], grounded: bool) {
        let mut w = Writer::new(x);
        w.complex(self.psi_p);
        w.complex(self.psi_n);
        if grounded {
            w.complex(self.i_gz);
        }
        w.harm(self.psi_fd);
        w.harm(self.psi_1d);
        w.harm(self.psi_1q);
        w.harm(self.psi_2q);
        w.real(self.omega);
        w.real(self.delta);
    }
}

/// Winding currents solved from fluxes.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SgCurrents {
    pub psi_d: Harm02,
    pub psi_q: Harm02,
    pub i_d: Harm02,
    pub i_q: Harm02,
    pub i_fd: Harm02,
    pub i_1d: Harm02,
    pub i_1q: Harm02,
    pub i_2q: Harm02,
    /// Stator current leaving the machine, pnz at k = 1 (z from the grounding path).
    pub i_stator: SeqTriple,
}

fn solve3(minv: &Matrix3<f64>, a: Harm02, b: Harm02, c: Harm02) -> [Harm02; 3] {
    let mut out = [Harm02::ZERO; 3];
    for (i, o) in out.iter_mut().enumerate() {
        let m = [minv[(i, 0)], minv[(i, 1)], minv[(i, 2)]];
        *o = a * m[0] + b * m[1] + c * m[2];
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncGen {
    pub name: String,
    pub params: SgParams,
    pub exciter: ExciterParams,
    inv_d: Matrix3<f64>,
    inv_q: Matrix3<f64>,
}

/// Algebraic by-products of one machine evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgOutput {
    pub injection: SeqTriple,
    pub te: f64,
    /// Positive-sequence terminal magnitude sensed by the exciter (pu).
    pub v_sensed: f64,
    pub p_elec: f64,
}

/// Time derivatives of the machine states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgDerivatives {
    pub d: SgState,
    pub currents: SgCurrents,
    pub te: f64,
}

impl SyncGen {
    pub fn new(name: impl Into<String>, params: SgParams, exciter: ExciterParams) -> Result<Self> {
        let name = name.into();
        params.validate(&name)?;
        exciter.validate(&name)?;
        let inv_d = params
            .d_matrix()
            .try_inverse()
            .ok_or_else(|| Error::config(format!("sg {name}"), "singular d-axis inductances"))?;
        let inv_q = params
            .q_matrix()
            .try_inverse()
            .ok_or_else(|| Error::config(format!("sg {name}"), "singular q-axis inductances"))?;
        Ok(Self { name, params, exciter, inv_d, inv_q })
    }

    pub fn machine_len(&self) -> usize {
        SgState::len(self.params.grounded)
    }

    /// Machine plus exciter.
    pub fn state_len(&self) -> usize {
        self.machine_len() + super::exciter::EXCITER_STATE_LEN
    }

    pub fn symbols(&self) -> Vec<Symbol> {
        let mut s = SgState::symbols(self.params.grounded);
        for n in ["exc_r_f", "exc_v_tr", "exc_v_r", "exc_e_fd"] {
            s.push(Symbol::real(n));
        }
        s
    }

    /// Stator flux to rotor-frame dq harmonics, then the per-axis flux/current inversion.
    pub fn currents(&self, s: &SgState) -> SgCurrents {
        let frame = AsyncFrame::aligned(s.delta);
        let psi = frame.pnz_to_dq(s.psi_p, s.psi_n);
        let psi_d = Harm02::new(psi.d0, psi.d2);
        let psi_q = Harm02::new(psi.q0, psi.q2);
        let [i_d, i_fd, i_1d] = solve3(&self.inv_d, psi_d, s.psi_fd, s.psi_1d);
        let [i_q, i_1q, i_2q] = solve3(&self.inv_q, psi_q, s.psi_1q, s.psi_2q);
        let (p, n) = frame.dq_to_pnz(&DqHarmonics { d0: i_d.k0, q0: i_q.k0, d2: i_d.k2, q2: i_q.k2 });
        SgCurrents { psi_d, psi_q, i_d, i_q, i_fd, i_1d, i_1q, i_2q, i_stator: SeqTriple::new(p, n, -s.i_gz) }
    }

    /// Machine dynamics for terminal voltage `v` (pnz, k = 1), mechanical torque `tm` and
    /// field voltage `v_f` applied to the field winding.
    pub fn sg_derivatives(&self, s: &SgState, v: SeqTriple, tm: f64, v_f: f64, omega_s: f64) -> SgDerivatives {
        let p = &self.params;
        let cur = self.currents(s);
        let r = p.r_stator();
        let w = omega_s;
        let i = cur.i_stator;
        let d_psi_p = w * (v.p + r * i.p) - J * w * s.psi_p;
        let d_psi_n = w * (v.n + r * i.n) - J * w * s.psi_n;
        let d_i_gz = if p.grounded { (w / p.x_t) * (v.z - p.r_t * s.i_gz) - J * w * s.i_gz } else { C64::default() };
        let rotor = |psi: Harm02, e: f64, res: f64, cur: Harm02| -> Harm02 {
            (Harm02::new(e, C64::default()) - cur * res) * w + psi.rotation(w)
        };
        let te = cur.psi_d.mean_product(&cur.i_q) - cur.psi_q.mean_product(&cur.i_d);
        let d = SgState {
            psi_p: d_psi_p,
            psi_n: d_psi_n,
            i_gz: d_i_gz,
            psi_fd: rotor(s.psi_fd, v_f, p.rfd, cur.i_fd),
            psi_1d: rotor(s.psi_1d, 0.0, p.r1d, cur.i_1d),
            psi_1q: rotor(s.psi_1q, 0.0, p.r1q, cur.i_1q),
            psi_2q: rotor(s.psi_2q, 0.0, p.r2q, cur.i_2q),
            omega: (tm - te - p.kd * (s.omega - 1.0)) / (2.0 * p.h),
            delta: w * (s.omega - 1.0),
        };
        SgDerivatives { d, currents: cur, te }
    }

    /// Terminal-side voltage behind the folded transformer, quasi-static.
    fn sensed_voltage(&self, v_p: C64, i_p: C64) -> f64 {
        SQRT_2 * (v_p + C64::new(self.params.r_t, self.params.x_t) * i_p).norm()
    }

    /// Machine plus exciter evaluation over the device slice.
    pub fn evaluate(&self, x: &[f64], dx: &mut [f64], v: SeqTriple, tm: f64, v_ref: f64, omega_s: f64) -> SgOutput {
        let g = self.params.grounded;
        let n = self.machine_len();
        let s = SgState::read(&x[..n], g);
        let e = ExciterState::read(&x[n..]);
        let v_f = self.params.rfd / self.params.lad * e.e_fd;
        let m = self.sg_derivatives(&s, v, tm, v_f, omega_s);
        m.d.write(&mut dx[..n], g);
        let i = m.currents.i_stator;
        let v_sensed = self.sensed_voltage(v.p, i.p);
        let ex = exciter_dc1a_derivatives(&e, v_sensed, v_ref, &self.exciter, self.params.rfd, self.params.lad);
        ex.d.write(&mut dx[n..]);
        let p_elec = 2.0 * (v.p.conj() * i.p + v.n.conj() * i.n + v.z.conj() * i.z).re;
        SgOutput { injection: i, te: m.te, v_sensed, p_elec }
    }

    /// Steady state for a balanced terminal phasor `v` and current phasor `i` (pu magnitudes,
    /// `sqrt(2) <x_p>_1`). Returns the full device state, mechanical torque and voltage
    /// reference.
    pub fn equilibrium(&self, v: C64, i: C64) -> Result<(Vec<f64>, f64, f64)> {
        let p = &self.params;
        let r = p.r_stator();
        let xq = p.laq + p.l_stator();
        let e_q = v + C64::new(r, xq) * i;
        if e_q.norm() < 1e-9 {
            return Err(Error::DeviceInitInfeasible {
                device: self.name.clone(),
                reason: "degenerate internal voltage".into(),
            });
        }
        let delta = e_q.arg();
        let rot = C64::from_polar(1.0, -delta);
        let vr = v * rot;
        let ir = i * rot;
        let (v_d, v_q) = (-vr.im, vr.re);
        let (i_d, i_q) = (-ir.im, ir.re);
        let psi_d = v_q + r * i_q;
        let psi_q = -(v_d + r * i_d);
        let i_fd = (psi_d + (p.lad + p.l_stator()) * i_d) / p.lad;
        if !(i_fd > 0.0) {
            return Err(Error::DeviceInitInfeasible {
                device: self.name.clone(),
                reason: format!("non-positive field current {i_fd:.4}"),
            });
        }
        let h = |v: f64| Harm02::new(v, C64::default());
        let psi_fd = -p.lad * i_d + (p.lad + p.lfd) * i_fd;
        let psi_1d = -p.lad * i_d + p.lad * i_fd;
        let psi_1q = -p.laq * i_q;
        let psi_2q = -p.laq * i_q;
        let e_fd = p.lad * i_fd;
        let te = psi_d * i_q - psi_q * i_d;
        // stator flux in pnz: psi_q - j psi_d = sqrt(2) e^{-j delta} psi_p
        let psi_p = C64::new(psi_q, -psi_d) * C64::from_polar(1.0, delta) * FRAC_1_SQRT_2;
        let s = SgState {
            psi_p,
            psi_n: C64::default(),
            i_gz: C64::default(),
            psi_fd: h(psi_fd),
            psi_1d: h(psi_1d),
            psi_1q: h(psi_1q),
            psi_2q: h(psi_2q),
            omega: 1.0,
            delta,
        };
        let v_sensed = self.sensed_voltage(v * FRAC_1_SQRT_2, i * FRAC_1_SQRT_2);
        let (ex, v_ref) = exciter_equilibrium(e_fd, v_sensed, &self.exciter);
        let mut x = vec![0.0; self.state_len()];
        let n = self.machine_len();
        s.write(&mut x[..n], p.grounded);
        ex.write(&mut x[n..]);
        Ok((x, te, v_ref))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    const W: f64 = 2.0 * PI * 60.0;

    pub fn kundur_machine() -> SgStandardData {
        SgStandardData {
            ra: 0.0025,
            xl: 0.2,
            xd: 1.8,
            xq: 1.7,
            xd_p: 0.3,
            xq_p: 0.55,
            xd_pp: 0.25,
            xq_pp: 0.25,
            td0_p: 8.0,
            tq0_p: 0.4,
            td0_pp: 0.03,
            tq0_pp: 0.05,
            h: 6.5,
            kd: 0.0,
        }
    }

    pub fn exciter() -> ExciterParams {
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

    fn gen(grounded: bool) -> SyncGen {
        let p = SgParams::from_standard(&kundur_machine(), 900.0, 100.0, 0.0, 0.15 / 9.0, grounded, W);
        SyncGen::new("g", p, exciter()).unwrap()
    }

    #[test]
    fn standard_conversion_reproduces_reactances() {
        let d = kundur_machine();
        let p = SgParams::from_standard(&d, 1.0, 1.0, 0.0, 0.0, false, W);
        // transient and subtransient reactances from the fundamental circuit
        let xd_p = p.ll + parallel(p.lad, p.lfd);
        let xd_pp = p.ll + 1.0 / (1.0 / p.lad + 1.0 / p.lfd + 1.0 / p.l1d);
        let xq_pp = p.ll + 1.0 / (1.0 / p.laq + 1.0 / p.l1q + 1.0 / p.l2q);
        assert_abs_diff_eq!(xd_p, d.xd_p, epsilon = 1e-12);
        assert_abs_diff_eq!(xd_pp, d.xd_pp, epsilon = 1e-12);
        assert_abs_diff_eq!(xq_pp, d.xq_pp, epsilon = 1e-12);
        assert_abs_diff_eq!(p.field_time_constant(W), d.td0_p, epsilon = 1e-12);
    }

    #[test]
    fn synchronous_steady_state_is_equilibrium() {
        for grounded in [false, true] {
            let g = gen(grounded);
            let v = C64::from_polar(1.01, 0.2);
            let i = C64::from_polar(7.0, 0.05);
            let (x, tm, v_ref) = g.equilibrium(v, i).unwrap();
            let mut dx = vec![1.0; g.state_len()];
            let vt = SeqTriple::new(v * FRAC_1_SQRT_2, C64::default(), C64::default());
            let out = g.evaluate(&x, &mut dx, vt, tm, v_ref, W);
            let m = dx.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            assert!(m < 1e-9, "max derivative {m}");
            assert_abs_diff_eq!((out.injection.p * SQRT_2 - i).norm(), 0.0, epsilon = 1e-10);
            let s = SgState::read(&x, grounded);
            assert_eq!(s.omega, 1.0);
            // electrical power equals air-gap power less stator losses
            let p_term = (v * i.conj()).re;
            let loss = g.params.r_stator() * i.norm_sqr();
            assert_abs_diff_eq!(out.te, p_term + loss, epsilon = 1e-10);
        }
    }

    /// Open stator, dampers made very resistive: the field flux relaxes with the open-circuit
    /// field time constant.
    #[test]
    fn open_circuit_field_decay() {
        let mut p = SgParams::from_standard(&kundur_machine(), 1.0, 1.0, 0.0, 0.0, false, W);
        p.r1d *= 1e3;
        let g = SyncGen::new("g", p, exciter()).unwrap();
        let tau = p.field_time_constant(W);
        // rotor-only integration with the stator flux slaved to zero current
        let lffd = p.lad + p.lfd;
        let psi0 = 1.2;
        let mut psi_fd = psi0;
        let mut psi_1d = p.lad / lffd * psi0;
        let dt = 1e-4;
        let t_end = 2.0;
        let mut t = 0.0;
        let f = |psi_fd: f64, psi_1d: f64| -> (f64, f64) {
            // stator current zero: d-axis reduces to the 2x2 rotor system
            let m = nalgebra::Matrix2::new(lffd, p.lad, p.lad, p.lad + p.l1d);
            let i = m.try_inverse().unwrap() * nalgebra::Vector2::new(psi_fd, psi_1d);
            let psi_d = p.lad * (i[0] + i[1]);
            let s = SgState {
                psi_p: C64::new(0.0, -psi_d) * FRAC_1_SQRT_2,
                psi_fd: Harm02::new(psi_fd, C64::default()),
                psi_1d: Harm02::new(psi_1d, C64::default()),
                omega: 1.0,
                ..Default::default()
            };
            let cur = g.currents(&s);
            assert!(cur.i_d.k0.abs() < 1e-9);
            let d = g.sg_derivatives(&s, SeqTriple::ZERO, 0.0, 0.0, W);
            (d.d.psi_fd.k0, d.d.psi_1d.k0)
        };
        // implicit Euler is unnecessary; the damper pole is fast, use small explicit steps
        let h = dt / 20.0;
        while t < t_end - 1e-12 {
            for _ in 0..20 {
                let (a, b) = f(psi_fd, psi_1d);
                psi_fd += h * a;
                psi_1d += h * b;
            }
            t += dt;
        }
        let expected = psi0 * (-t_end / tau).exp();
        assert!((psi_fd - expected).abs() / expected < 0.01, "{psi_fd} vs {expected}");
    }

    #[test]
    fn rotation_terms_on_stator_flux() {
        let g = gen(false);
        let s = SgState { psi_p: C64::new(0.3, 0.0), omega: 1.0, ..Default::default() };
        let d = g.sg_derivatives(&s, SeqTriple::ZERO, 0.0, 0.0, W);
        let i = g.currents(&s).i_stator;
        let expect = W * g.params.r_stator() * i.p - J * W * 0.3;
        assert_abs_diff_eq!((d.d.psi_p - expect).norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn layout_width_matches() {
        for g in [false, true] {
            let w: usize = SgState::symbols(g).iter().map(|s| s.width()).sum();
            assert_eq!(w, SgState::len(g));
        }
    }
}
