//! System assembly: devices and network composed into one real state vector.

pub mod init;
pub mod integrator;
pub mod powerflow;
pub mod scenario;
pub mod simulate;

use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};

use crate::config::SystemConfig;
use crate::devices::dc_load::{dc_load_current, DcLoadParams};
use crate::devices::fault::Mat3;
use crate::devices::ibr::{GflIbr, GflInputs, GflState, GFL_STATE_LEN};
use crate::devices::load::LoadParams;
use crate::devices::network::{BranchParams, Network};
use crate::devices::sg::{SgParams, SyncGen};
use crate::devices::{SlotKind, Symbol};
use crate::error::{Error, Result};
use crate::phasor::{SeqTriple, C64};

pub use init::{initialize, Equilibrium};
pub use scenario::{Event, EventKind, Scenario, Signal};
pub use simulate::{simulate, Trajectory};

#[derive(Debug, Clone)]
pub struct SgUnit {
    pub gen: SyncGen,
    pub node: usize,
    pub offset: usize,
    pub rating_mva: f64,
    pub slack: bool,
    pub p_set: f64,
    pub v_set: f64,
    pub angle_set: f64,
    /// Mechanical torque and exciter reference, set by initialization.
    pub tm: f64,
    pub v_ref: f64,
}

#[derive(Debug, Clone)]
pub struct IbrUnit {
    pub ibr: GflIbr,
    pub node: usize,
    pub offset: usize,
    pub p_set: f64,
    pub v_set: f64,
    /// Controller setpoints, set by initialization.
    pub setpoint: GflInputs,
}

#[derive(Debug, Clone)]
pub struct LoadUnit {
    pub params: LoadParams,
    pub offset: usize,
}

#[derive(Debug, Clone)]
pub struct DcUnit {
    pub params: DcLoadParams,
    /// Steady demand (pu).
    pub p0: f64,
}

#[derive(Debug, Clone)]
pub struct Monitor {
    pub name: String,
    pub branches: Vec<usize>,
}

/// Which inverter input a damping controller drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DampingInput {
    Ud,
    Uq,
}

/// Linear damping controller installed in the nonlinear model: washout on the inverter's
/// `|v_dq|`, then `(A_K, B_K, C_K, D_K)`, driving `u_d` or `u_q`.
#[derive(Debug, Clone)]
pub struct InstalledController {
    pub name: String,
    pub ibr: usize,
    pub input: DampingInput,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: f64,
    pub t_w: f64,
    pub offset: usize,
}

impl InstalledController {
    pub fn state_len(&self) -> usize {
        1 + self.a.nrows()
    }
}

/// Exogenous input channels; values are deviations from the initialized setpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputChannel {
    IbrUd(usize),
    IbrUq(usize),
    IbrPref(usize),
    IbrVref(usize),
    SgVref(usize),
    SgTm(usize),
    DcPower(usize),
}

/// Measured output channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputChannel {
    /// `|v_dq|` measured by an inverter (k = 0 components).
    IbrVmag(usize),
    IbrCurrent(usize),
    IbrPower(usize),
    IbrZeroSeqCurrent(usize),
    Monitor(usize),
    BranchPower(usize),
    BranchNegSeqCurrent(usize),
    SgSpeed(usize),
    SgPower(usize),
    BusVp(usize),
    BusVn(usize),
    BusVz(usize),
    DcPower(usize),
}

/// Shunt fault currently applied at a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveFault {
    pub node: usize,
    pub y: Mat3,
}

/// One real slot of the flat state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSlot {
    pub device: String,
    pub symbol: String,
    pub kind: SlotKind,
    /// 0 for the real part (or a real slot), 1 for the imaginary part.
    pub part: u8,
}

impl StateSlot {
    pub fn label(&self) -> String {
        match (self.kind, self.part) {
            (SlotKind::Real, _) => format!("{}.{}", self.device, self.symbol),
            (_, 0) => format!("{}.{}.re", self.device, self.symbol),
            _ => format!("{}.{}.im", self.device, self.symbol),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SystemModel {
    pub name: String,
    pub omega_s: f64,
    pub base_mva: f64,
    pub network: Network,
    pub sgs: Vec<SgUnit>,
    pub ibrs: Vec<IbrUnit>,
    pub loads: Vec<LoadUnit>,
    pub dc_loads: Vec<DcUnit>,
    pub monitors: Vec<Monitor>,
    pub controllers: Vec<InstalledController>,
    pub slots: Vec<StateSlot>,
    pub inputs: Vec<InputChannel>,
    pub outputs: Vec<OutputChannel>,
}

/// Algebraic quantities from one evaluation.
#[derive(Debug, Clone)]
pub struct EvalAux {
    /// Net non-branch current entering each node.
    pub external: Vec<SeqTriple>,
    /// Capacitor current per node.
    pub i_cap: Vec<SeqTriple>,
    pub ibr_limiting: Vec<bool>,
    /// Magnitude of each inverter's current reference after the limiter.
    pub ibr_current_ref: Vec<f64>,
    pub ibr_injection: Vec<SeqTriple>,
    pub sg_injection: Vec<SeqTriple>,
    pub dc_power: Vec<f64>,
}

fn push_slots(slots: &mut Vec<StateSlot>, device: &str, symbols: &[Symbol]) {
    for s in symbols {
        match s.kind {
            SlotKind::Real => {
                slots.push(StateSlot { device: device.to_string(), symbol: s.name.clone(), kind: s.kind, part: 0 })
            }
            SlotKind::Complex(_) => {
                for part in 0..2 {
                    slots.push(StateSlot { device: device.to_string(), symbol: s.name.clone(), kind: s.kind, part });
                }
            }
        }
    }
}

impl SystemModel {
    /// Builds the model from a validated configuration. Setpoint-dependent quantities are
    /// filled in by [`initialize`].
    pub fn from_config(cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let base = cfg.system.base_mva;
        let omega_s = cfg.omega_s();
        let node = |name: &str| cfg.bus_index(name).expect("validated");
        let mut b_shunt: Vec<f64> = cfg.buses.iter().map(|b| b.shunt_mvar / base).collect();
        let mut branches = Vec::new();
        for l in &cfg.lines {
            let (f, t) = (node(&l.from), node(&l.to));
            b_shunt[f] += 0.5 * l.b;
            b_shunt[t] += 0.5 * l.b;
            let r0 = l.r0.unwrap_or(3.0 * l.r);
            let x0 = l.x0.unwrap_or(3.0 * l.x);
            branches.push(BranchParams { name: l.name.clone(), from: f, to: t, r: [l.r, l.r, r0], x: [l.x, l.x, x0] });
        }
        let mut loads = Vec::new();
        for l in &cfg.loads {
            let nd = node(&l.bus);
            let mut p = LoadParams::from_pq(&l.name, nd, l.p_mw / base, l.q_mvar / base, l.grounded);
            p.b_c += l.q_cap_mvar / base;
            p.validate()?;
            b_shunt[nd] += p.b_c;
            loads.push(LoadUnit { params: p, offset: 0 });
        }
        let network = Network::new(cfg.buses.iter().map(|b| b.name.clone()).collect(), b_shunt, branches)?;
        let mut slots = Vec::new();
        push_slots(&mut slots, "net", &network.symbols());
        let mut offset = network.state_len();
        let mut sgs = Vec::new();
        for g in &cfg.generators {
            let z = base / g.rating_mva;
            let params = SgParams::from_standard(
                &g.machine,
                g.rating_mva,
                base,
                g.transformer.r * z,
                g.transformer.x * z,
                g.transformer.grounded,
                omega_s,
            );
            let gen = SyncGen::new(&g.name, params, g.exciter)?;
            push_slots(&mut slots, &g.name, &gen.symbols());
            let len = gen.state_len();
            sgs.push(SgUnit {
                gen,
                node: node(&g.bus),
                offset,
                rating_mva: g.rating_mva,
                slack: g.slack,
                p_set: g.p_mw / base,
                v_set: g.v_pu,
                angle_set: g.angle_deg.to_radians(),
                tm: 0.0,
                v_ref: 0.0,
            });
            offset += len;
        }
        let mut ibrs = Vec::new();
        for i in &cfg.ibrs {
            let params = i.params(base)?;
            push_slots(&mut slots, &i.name, &GflState::symbols());
            ibrs.push(IbrUnit {
                ibr: GflIbr::new(&i.name, params),
                node: node(&i.bus),
                offset,
                p_set: i.p_mw / base,
                v_set: i.v_pu,
                setpoint: GflInputs::default(),
            });
            offset += GFL_STATE_LEN;
        }
        for l in &mut loads {
            l.offset = offset;
            push_slots(&mut slots, &l.params.name, &l.params.symbols());
            offset += l.params.state_len();
        }
        debug_assert_eq!(offset, slots.len());
        let dc_loads = cfg
            .dc_loads
            .iter()
            .map(|d| DcUnit {
                params: DcLoadParams { name: d.name.clone(), node: node(&d.bus), v_min: d.v_min },
                p0: d.p_mw / base,
            })
            .collect::<Vec<_>>();
        let monitors = cfg
            .monitors
            .iter()
            .map(|m| Monitor {
                name: m.name.clone(),
                branches: m
                    .branches
                    .iter()
                    .map(|b| cfg.lines.iter().position(|l| &l.name == b).expect("validated"))
                    .collect(),
            })
            .collect::<Vec<_>>();
        let mut model = SystemModel {
            name: cfg.system.name.clone(),
            omega_s,
            base_mva: base,
            network,
            sgs,
            ibrs,
            loads,
            dc_loads,
            monitors,
            controllers: Vec::new(),
            slots,
            inputs: Vec::new(),
            outputs: Vec::new(),
        };
        model.build_channels();
        Ok(model)
    }

    fn build_channels(&mut self) {
        let mut inputs = Vec::new();
        for i in 0..self.ibrs.len() {
            inputs.extend([
                InputChannel::IbrUd(i),
                InputChannel::IbrUq(i),
                InputChannel::IbrPref(i),
                InputChannel::IbrVref(i),
            ]);
        }
        for g in 0..self.sgs.len() {
            inputs.extend([InputChannel::SgVref(g), InputChannel::SgTm(g)]);
        }
        for d in 0..self.dc_loads.len() {
            inputs.push(InputChannel::DcPower(d));
        }
        let mut outputs = Vec::new();
        for m in 0..self.monitors.len() {
            outputs.push(OutputChannel::Monitor(m));
        }
        for i in 0..self.ibrs.len() {
            outputs.extend([
                OutputChannel::IbrVmag(i),
                OutputChannel::IbrCurrent(i),
                OutputChannel::IbrPower(i),
                OutputChannel::IbrZeroSeqCurrent(i),
            ]);
        }
        for g in 0..self.sgs.len() {
            outputs.extend([OutputChannel::SgSpeed(g), OutputChannel::SgPower(g)]);
        }
        for d in 0..self.dc_loads.len() {
            outputs.push(OutputChannel::DcPower(d));
        }
        for n in 0..self.network.n_nodes() {
            outputs.extend([OutputChannel::BusVp(n), OutputChannel::BusVn(n), OutputChannel::BusVz(n)]);
        }
        for l in 0..self.network.n_branches() {
            outputs.extend([OutputChannel::BranchPower(l), OutputChannel::BranchNegSeqCurrent(l)]);
        }
        self.inputs = inputs;
        self.outputs = outputs;
    }

    pub fn n_states(&self) -> usize {
        self.slots.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn state_labels(&self) -> Vec<String> {
        self.slots.iter().map(|s| s.label()).collect()
    }

    pub fn input_name(&self, ch: InputChannel) -> String {
        match ch {
            InputChannel::IbrUd(i) => format!("u_d:{}", self.ibrs[i].ibr.name),
            InputChannel::IbrUq(i) => format!("u_q:{}", self.ibrs[i].ibr.name),
            InputChannel::IbrPref(i) => format!("p_ref:{}", self.ibrs[i].ibr.name),
            InputChannel::IbrVref(i) => format!("v_ref:{}", self.ibrs[i].ibr.name),
            InputChannel::SgVref(g) => format!("v_ref:{}", self.sgs[g].gen.name),
            InputChannel::SgTm(g) => format!("t_m:{}", self.sgs[g].gen.name),
            InputChannel::DcPower(d) => format!("p_dc:{}", self.dc_loads[d].params.name),
        }
    }

    pub fn output_name(&self, ch: OutputChannel) -> String {
        let bus = |n: usize| &self.network.node_names[n];
        let br = |l: usize| &self.network.branches[l].name;
        match ch {
            OutputChannel::IbrVmag(i) => format!("vdq:{}", self.ibrs[i].ibr.name),
            OutputChannel::IbrCurrent(i) => format!("imag:{}", self.ibrs[i].ibr.name),
            OutputChannel::IbrPower(i) => format!("p:{}", self.ibrs[i].ibr.name),
            OutputChannel::IbrZeroSeqCurrent(i) => format!("iz:{}", self.ibrs[i].ibr.name),
            OutputChannel::Monitor(m) => format!("p:{}", self.monitors[m].name),
            OutputChannel::BranchPower(l) => format!("p:{}", br(l)),
            OutputChannel::BranchNegSeqCurrent(l) => format!("in:{}", br(l)),
            OutputChannel::SgSpeed(g) => format!("omega:{}", self.sgs[g].gen.name),
            OutputChannel::SgPower(g) => format!("p:{}", self.sgs[g].gen.name),
            OutputChannel::BusVp(n) => format!("vp:{}", bus(n)),
            OutputChannel::BusVn(n) => format!("vn:{}", bus(n)),
            OutputChannel::BusVz(n) => format!("vz:{}", bus(n)),
            OutputChannel::DcPower(d) => format!("p:{}", self.dc_loads[d].params.name),
        }
    }

    pub fn input_names(&self) -> Vec<String> {
        self.inputs.iter().map(|c| self.input_name(*c)).collect()
    }

    pub fn output_names(&self) -> Vec<String> {
        self.outputs.iter().map(|c| self.output_name(*c)).collect()
    }

    pub fn find_input(&self, name: &str) -> Result<InputChannel> {
        self.inputs
            .iter()
            .copied()
            .find(|c| self.input_name(*c) == name)
            .ok_or_else(|| Error::MissingChannel(format!("input '{name}'")))
    }

    pub fn find_output(&self, name: &str) -> Result<OutputChannel> {
        self.outputs
            .iter()
            .copied()
            .find(|c| self.output_name(*c) == name)
            .ok_or_else(|| Error::MissingChannel(format!("output '{name}'")))
    }

    pub fn input_index(&self, ch: InputChannel) -> usize {
        self.inputs.iter().position(|c| *c == ch).expect("channel of this model")
    }

    pub fn ibr_index(&self, name: &str) -> Result<usize> {
        self.ibrs
            .iter()
            .position(|u| u.ibr.name == name)
            .ok_or_else(|| Error::MissingChannel(format!("inverter '{name}'")))
    }

    pub fn node_index(&self, name: &str) -> Result<usize> {
        self.network
            .node_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::config("bus", format!("unknown bus '{name}'")))
    }

    /// Adds a damping controller; the state vector grows by its washout and controller
    /// states. Returns the slice of new state that is in equilibrium for `x_eq`.
    pub fn install_controller(&mut self, mut ctrl: InstalledController, x_eq: &[f64]) -> Result<Vec<f64>> {
        let k = ctrl.a.nrows();
        if ctrl.a.ncols() != k || ctrl.b.len() != k || ctrl.c.len() != k || !(ctrl.t_w > 0.0) {
            return Err(Error::Dimension(format!("controller {}", ctrl.name)));
        }
        if ctrl.ibr >= self.ibrs.len() {
            return Err(Error::MissingChannel(format!("inverter #{} for controller {}", ctrl.ibr, ctrl.name)));
        }
        ctrl.offset = self.slots.len();
        let mut sym = vec![Symbol::real("washout")];
        for j in 0..k {
            sym.push(Symbol::real(&format!("x{j}")));
        }
        push_slots(&mut self.slots, &ctrl.name, &sym);
        let u = &self.ibrs[ctrl.ibr];
        let vmag = GflState::read(&x_eq[u.offset..u.offset + GFL_STATE_LEN]).v_mag();
        let mut x = vec![0.0; ctrl.state_len()];
        x[0] = vmag;
        self.controllers.push(ctrl);
        Ok(x)
    }

    /// Controller outputs `(ibr, input, value)` for state `x`.
    fn controller_outputs(
        &self,
        x: &[f64],
        enabled: Option<&[bool]>,
        dx: Option<&mut [f64]>,
    ) -> Vec<(usize, DampingInput, f64)> {
        let mut out = Vec::with_capacity(self.controllers.len());
        let mut dx = dx;
        for (ci, c) in self.controllers.iter().enumerate() {
            let u = &self.ibrs[c.ibr];
            let y = GflState::read(&x[u.offset..u.offset + GFL_STATE_LEN]).v_mag();
            let w = x[c.offset];
            let e = y - w;
            let k = c.a.nrows();
            let xk = DVector::from_column_slice(&x[c.offset + 1..c.offset + 1 + k]);
            let val = c.c.dot(&xk) + c.d * e;
            if let Some(dx) = dx.as_deref_mut() {
                dx[c.offset] = e / c.t_w;
                let dxk = &c.a * &xk + &c.b * e;
                dx[c.offset + 1..c.offset + 1 + k].copy_from_slice(dxk.as_slice());
            }
            let on = enabled.map_or(true, |e| e.get(ci).copied().unwrap_or(true));
            out.push((c.ibr, c.input, if on { val } else { 0.0 }));
        }
        out
    }

    fn ibr_inputs(&self, i: usize, u: &[f64], ctrl: &[(usize, DampingInput, f64)]) -> GflInputs {
        let mut inp = self.ibrs[i].setpoint;
        for (k, ch) in self.inputs.iter().enumerate() {
            match *ch {
                InputChannel::IbrUd(j) if j == i => inp.u_d += u[k],
                InputChannel::IbrUq(j) if j == i => inp.u_q += u[k],
                InputChannel::IbrPref(j) if j == i => inp.p_ref += u[k],
                InputChannel::IbrVref(j) if j == i => inp.v_ref += u[k],
                _ => {}
            }
        }
        for (j, which, v) in ctrl {
            if *j == i {
                match which {
                    DampingInput::Ud => inp.u_d += v,
                    DampingInput::Uq => inp.u_q += v,
                }
            }
        }
        inp
    }

    fn input_value(&self, u: &[f64], ch: InputChannel) -> f64 {
        self.inputs.iter().position(|c| *c == ch).map(|k| u[k]).unwrap_or(0.0)
    }

    /// Right-hand side `dx = f(x, u)` with the given faults applied; also returns the
    /// algebraic by-products.
    pub fn evaluate(&self, x: &[f64], u: &[f64], faults: &[ActiveFault], dx: &mut [f64]) -> Result<EvalAux> {
        self.evaluate_gated(x, u, faults, None, dx)
    }

    /// As [`evaluate`](Self::evaluate), with controllers whose `enabled` flag is false
    /// contributing zero output (their states still evolve).
    pub fn evaluate_gated(
        &self,
        x: &[f64],
        u: &[f64],
        faults: &[ActiveFault],
        enabled: Option<&[bool]>,
        dx: &mut [f64],
    ) -> Result<EvalAux> {
        if u.len() != self.inputs.len() {
            return Err(Error::Dimension(format!(
                "input vector has {} entries, expected {}",
                u.len(),
                self.inputs.len()
            )));
        }
        let w = self.omega_s;
        let v = self.network.read_voltages(x);
        let mut ext = vec![SeqTriple::ZERO; self.network.n_nodes()];
        let ctrl = self.controller_outputs(x, enabled, Some(dx));
        let mut sg_injection = Vec::with_capacity(self.sgs.len());
        for (g, s) in self.sgs.iter().enumerate() {
            let len = s.gen.state_len();
            let tm = s.tm + self.input_value(u, InputChannel::SgTm(g));
            let vr = s.v_ref + self.input_value(u, InputChannel::SgVref(g));
            let out =
                s.gen.evaluate(&x[s.offset..s.offset + len], &mut dx[s.offset..s.offset + len], v[s.node], tm, vr, w);
            ext[s.node] += out.injection;
            sg_injection.push(out.injection);
        }
        let mut ibr_limiting = Vec::with_capacity(self.ibrs.len());
        let mut ibr_injection = Vec::with_capacity(self.ibrs.len());
        let mut ibr_current_ref = Vec::with_capacity(self.ibrs.len());
        for (i, b) in self.ibrs.iter().enumerate() {
            let inp = self.ibr_inputs(i, u, &ctrl);
            let r = GFL_STATE_LEN;
            let out =
                b.ibr.evaluate(&x[b.offset..b.offset + r], &mut dx[b.offset..b.offset + r], v[b.node], &inp, w)?;
            ext[b.node] += out.injection;
            ibr_injection.push(out.injection);
            ibr_limiting.push(out.limiting);
            ibr_current_ref.push(out.i_ref_limited.0.hypot(out.i_ref_limited.1));
        }
        for l in &self.loads {
            let len = l.params.state_len();
            let i = l.params.load_eval(
                &x[l.offset..l.offset + len],
                &mut dx[l.offset..l.offset + len],
                v[l.params.node],
                w,
            );
            ext[l.params.node] -= i;
        }
        let mut dc_power = Vec::with_capacity(self.dc_loads.len());
        for (d, dc) in self.dc_loads.iter().enumerate() {
            let p = dc.p0 + self.input_value(u, InputChannel::DcPower(d));
            let nd = dc.params.node;
            let i = dc_load_current(v[nd].p, p, dc.params.v_min, &dc.params.name)?;
            ext[nd] -= i;
            dc_power.push(p);
        }
        for f in faults {
            ext[f.node] -= crate::devices::fault::fault_current(&f.y, v[f.node], true);
        }
        let n = self.network.state_len();
        let i_cap = self.network.network_eval(&x[..n], &mut dx[..n], &ext, w);
        Ok(EvalAux { external: ext, i_cap, ibr_limiting, ibr_current_ref, ibr_injection, sg_injection, dc_power })
    }

    /// `f(x, u)` without faults.
    pub fn derivative(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let mut dx = vec![0.0; x.len()];
        self.evaluate(x, u, &[], &mut dx)?;
        Ok(dx)
    }

    pub fn zero_input(&self) -> Vec<f64> {
        vec![0.0; self.inputs.len()]
    }

    /// Nodal current balance residual: capacitor current implied by the node-voltage
    /// derivative against `i_N - i_L - i_DC - i_fault` plus branch currents.
    pub fn kcl_residual(&self, x: &[f64], dx: &[f64], aux: &EvalAux) -> f64 {
        let v = self.network.read_voltages(x);
        let dv = self.network.read_voltages(dx);
        let cur = self.network.read_currents(x);
        let br = self.network.branch_injections(&cur);
        let mut worst = 0.0f64;
        for n in 0..self.network.n_nodes() {
            let b = self.network.b_shunt[n];
            let (vv, dd) = (v[n].as_array(), dv[n].as_array());
            let net = (br[n] + aux.external[n]).as_array();
            for s in 0..3 {
                let ic = (b / self.omega_s) * (dd[s] + C64::new(0.0, self.omega_s) * vv[s]);
                worst = worst.max((ic - net[s]).norm());
            }
        }
        worst
    }

    fn ibr_state(&self, x: &[f64], i: usize) -> GflState {
        let o = self.ibrs[i].offset;
        GflState::read(&x[o..o + GFL_STATE_LEN])
    }

    fn branch_power(&self, x: &[f64], l: usize) -> f64 {
        let v = self.network.read_voltages(x);
        let i = self.network.read_currents(x);
        let b = &self.network.branches[l];
        let (vv, ii) = (v[b.from].as_array(), i[l].as_array());
        (0..3).map(|s| 2.0 * (vv[s].conj() * ii[s]).re).sum()
    }

    /// Value of one output channel (pu).
    pub fn output(&self, x: &[f64], u: &[f64], ch: OutputChannel) -> f64 {
        match ch {
            OutputChannel::IbrVmag(i) => self.ibr_state(x, i).v_mag(),
            OutputChannel::IbrCurrent(i) => self.ibr_state(x, i).i_mag(),
            OutputChannel::IbrPower(i) => {
                let inj = GflIbr::injection(&self.ibr_state(x, i));
                let v = self.network.read_voltages(x)[self.ibrs[i].node];
                2.0 * (v.p.conj() * inj.p + v.n.conj() * inj.n + v.z.conj() * inj.z).re
            }
            OutputChannel::IbrZeroSeqCurrent(i) => GflIbr::injection(&self.ibr_state(x, i)).z.norm() * SQRT_2,
            OutputChannel::Monitor(m) => self.monitors[m].branches.iter().map(|l| self.branch_power(x, *l)).sum(),
            OutputChannel::BranchPower(l) => self.branch_power(x, l),
            OutputChannel::BranchNegSeqCurrent(l) => self.network.read_currents(x)[l].n.norm() * SQRT_2,
            OutputChannel::SgSpeed(g) => {
                let s = &self.sgs[g];
                let n = s.gen.machine_len();
                x[s.offset + n - 2]
            }
            OutputChannel::SgPower(g) => {
                let s = &self.sgs[g];
                let n = s.gen.machine_len();
                let st = crate::devices::sg::SgState::read(&x[s.offset..s.offset + n], s.gen.params.grounded);
                let i = s.gen.currents(&st).i_stator;
                let v = self.network.read_voltages(x)[s.node];
                2.0 * (v.p.conj() * i.p + v.n.conj() * i.n + v.z.conj() * i.z).re
            }
            OutputChannel::BusVp(n) => self.network.read_voltages(x)[n].p.norm() * SQRT_2,
            OutputChannel::BusVn(n) => self.network.read_voltages(x)[n].n.norm() * SQRT_2,
            OutputChannel::BusVz(n) => self.network.read_voltages(x)[n].z.norm() * SQRT_2,
            OutputChannel::DcPower(d) => self.dc_loads[d].p0 + self.input_value(u, InputChannel::DcPower(d)),
        }
    }

    pub fn output_values(&self, x: &[f64], u: &[f64], channels: &[OutputChannel]) -> Vec<f64> {
        channels.iter().map(|c| self.output(x, u, *c)).collect()
    }
}
