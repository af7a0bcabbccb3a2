//! Initialization: power flow, then per-device back-solve of internal states.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;

use super::powerflow::{self, BusKind, PfBus, PfOptions, PfSolution};
use super::SystemModel;
use crate::error::{Error, Result};
use crate::phasor::{SeqTriple, C64};

#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub x: Vec<f64>,
    pub pf: PfSolution,
    /// `max |f(x)|` at the initialized state.
    pub residual: f64,
}

/// Power-flow bus list and admittance matrix: network nodes first, then one terminal bus
/// per synchronous machine behind its step-up transformer.
pub fn powerflow_problem(model: &SystemModel) -> Result<(DMatrix<C64>, Vec<PfBus>)> {
    let net = &model.network;
    let n = net.n_nodes();
    let m = n + model.sgs.len();
    let mut y = DMatrix::from_element(m, m, C64::default());
    for b in &net.branches {
        let yl = 1.0 / C64::new(b.r[0], b.x[0]);
        y[(b.from, b.from)] += yl;
        y[(b.to, b.to)] += yl;
        y[(b.from, b.to)] -= yl;
        y[(b.to, b.from)] -= yl;
    }
    for k in 0..n {
        y[(k, k)] += C64::new(0.0, net.b_shunt[k]);
    }
    for l in &model.loads {
        y[(l.params.node, l.params.node)] += C64::new(l.params.g, -l.params.b_l);
    }
    let mut buses: Vec<PfBus> = net
        .node_names
        .iter()
        .map(|name| PfBus { name: name.clone(), kind: BusKind::Pq, p: 0.0, q: 0.0, v: 1.0, angle: 0.0 })
        .collect();
    for d in &model.dc_loads {
        buses[d.params.node].p -= d.p0;
    }
    for u in &model.ibrs {
        let b = &mut buses[u.node];
        if b.kind != BusKind::Pq {
            return Err(Error::config(format!("ibr {}", u.ibr.name), "bus already voltage-controlled"));
        }
        b.kind = BusKind::Pv;
        b.p += u.p_set;
        b.v = u.v_set;
    }
    for (g, s) in model.sgs.iter().enumerate() {
        let k = n + g;
        let p = &s.gen.params;
        let yt = 1.0 / C64::new(p.r_t, p.x_t);
        y[(k, k)] += yt;
        y[(s.node, s.node)] += yt;
        y[(k, s.node)] -= yt;
        y[(s.node, k)] -= yt;
        buses.push(PfBus {
            name: format!("{}:terminal", s.gen.name),
            kind: if s.slack { BusKind::Slack } else { BusKind::Pv },
            p: s.p_set,
            q: 0.0,
            v: s.v_set,
            angle: s.angle_set,
        });
    }
    Ok((y, buses))
}

/// Solves the power flow, back-solves every device and stores setpoints in the model.
pub fn initialize(model: &mut SystemModel) -> Result<Equilibrium> {
    initialize_with(model, PfOptions::default())
}

pub fn initialize_with(model: &mut SystemModel, opts: PfOptions) -> Result<Equilibrium> {
    let (y, buses) = powerflow_problem(model)?;
    let pf = powerflow::solve(&y, &buses, opts)?;
    let n = model.network.n_nodes();
    let mut x = vec![0.0; model.n_states()];
    let vol: Vec<SeqTriple> =
        (0..n).map(|k| SeqTriple::new(pf.v[k] * FRAC_1_SQRT_2, C64::default(), C64::default())).collect();
    let cur: Vec<SeqTriple> = model
        .network
        .branches
        .iter()
        .map(|b| {
            let i = (pf.v[b.from] - pf.v[b.to]) / C64::new(b.r[0], b.x[0]);
            SeqTriple::new(i * FRAC_1_SQRT_2, C64::default(), C64::default())
        })
        .collect();
    let ns = model.network.state_len();
    model.network.write_state(&mut x[..ns], &cur, &vol);
    for g in 0..model.sgs.len() {
        let s = &model.sgs[g];
        let (v_hv, v_lv) = (pf.v[s.node], pf.v[n + g]);
        let i = (v_lv - v_hv) / C64::new(s.gen.params.r_t, s.gen.params.x_t);
        let (xs, tm, v_ref) = s.gen.equilibrium(v_hv, i)?;
        let o = s.offset;
        x[o..o + xs.len()].copy_from_slice(&xs);
        let s = &mut model.sgs[g];
        s.tm = tm;
        s.v_ref = v_ref;
    }
    for k in 0..model.ibrs.len() {
        let u = &model.ibrs[k];
        let nd = u.node;
        let dc: f64 = model.dc_loads.iter().filter(|d| d.params.node == nd).map(|d| d.p0).sum();
        let s_ibr = pf.s[nd] + dc;
        let i = (s_ibr / pf.v[nd]).conj();
        let (st, inp) = u.ibr.equilibrium(pf.v[nd], i)?;
        let o = u.offset;
        st.write(&mut x[o..o + crate::devices::ibr::GFL_STATE_LEN]);
        model.ibrs[k].setpoint = inp;
    }
    for l in &model.loads {
        let i = l.params.steady_inductor_current(vol[l.params.node]);
        let len = l.params.state_len();
        l.params.write_state(&mut x[l.offset..l.offset + len], i);
    }
    let dx = model.derivative(&x, &model.zero_input())?;
    let residual = dx.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if !(residual < 1e-6) {
        return Err(Error::NotAtEquilibrium { residual });
    }
    Ok(Equilibrium { x, pf, residual })
}
