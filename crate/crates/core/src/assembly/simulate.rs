//! Time-domain simulation of a scenario with TR-BDF2; events are step boundaries.

use std::cell::RefCell;

use super::integrator::{OdeRhs, SolverOptions, SolverStats, StepView, TrBdf2};
use super::scenario::{fault_spec, CompiledSignal, EventKind, Scenario};
use super::{ActiveFault, OutputChannel, SystemModel};
use crate::devices::fault::fault_admittance;
use crate::devices::ibr::{GflState, GFL_STATE_LEN};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub time: Vec<f64>,
    pub names: Vec<String>,
    /// One column per recorded channel.
    pub data: Vec<Vec<f64>>,
    pub events: Vec<(f64, String)>,
    pub stats: SolverStats,
    /// Largest nodal current-balance residual over accepted steps.
    pub max_kcl_residual: f64,
    /// Per inverter: whether the current limiter was active at any accepted step.
    pub limiter_engaged: Vec<bool>,
    /// Per inverter: largest `|i_dq|` seen at accepted steps.
    pub max_ibr_current: Vec<f64>,
    /// Per inverter: largest limited current reference at accepted steps.
    pub max_ibr_current_ref: Vec<f64>,
    pub final_state: Vec<f64>,
}

impl Trajectory {
    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|k| self.data[k].as_slice())
    }

    /// Samples of a channel with `t0 <= t <= t1`.
    pub fn window(&self, name: &str, t0: f64, t1: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let col = self.channel(name)?;
        let (mut t, mut y) = (Vec::new(), Vec::new());
        for (k, tk) in self.time.iter().enumerate() {
            if *tk >= t0 - 1e-12 && *tk <= t1 + 1e-12 {
                t.push(*tk);
                y.push(col[k]);
            }
        }
        Some((t, y))
    }
}

#[derive(Debug, Clone, Default)]
struct Segment {
    u: Vec<f64>,
    faults: Vec<ActiveFault>,
    enabled: Vec<bool>,
}

struct Rhs<'a> {
    model: &'a SystemModel,
    seg: RefCell<Segment>,
}

impl OdeRhs for Rhs<'_> {
    fn dim(&self) -> usize {
        self.model.n_states()
    }

    fn rhs(&self, _t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        let s = self.seg.borrow();
        self.model.evaluate_gated(x, &s.u, &s.faults, Some(&s.enabled), dx)?;
        Ok(())
    }
}

struct ActiveSignal {
    start: f64,
    input: usize,
    signal: CompiledSignal,
}

/// Integrates `model` from `x0` through the scenario and records its channels.
pub fn simulate(model: &SystemModel, x0: &[f64], scenario: &Scenario, opts: &SolverOptions) -> Result<Trajectory> {
    scenario.validate()?;
    let n = model.n_states();
    if x0.len() != n {
        return Err(Error::Dimension(format!("initial state has {} entries, model has {n}", x0.len())));
    }
    let channels: Vec<OutputChannel> = scenario.record.iter().map(|c| model.find_output(c)).collect::<Result<_>>()?;
    let horizon = scenario.duration;

    // breakpoints
    let mut bps = vec![0.0, horizon];
    for e in &scenario.events {
        bps.push(e.time);
        if let EventKind::DcPulse { signal, .. } = &e.kind {
            bps.extend(signal.breakpoints(horizon - e.time).into_iter().map(|t| t + e.time));
        }
    }
    bps.retain(|t| (0.0..=horizon).contains(t));
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bps.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    // controllers that wait for an enable event start disabled
    let mut enabled = vec![true; model.controllers.len()];
    for e in &scenario.events {
        if let EventKind::ControllerEnable { controller } = &e.kind {
            let k = model
                .controllers
                .iter()
                .position(|c| &c.name == controller)
                .ok_or_else(|| Error::MissingChannel(format!("controller {controller}")))?;
            enabled[k] = false;
        }
    }

    let mut steps = model.zero_input();
    let mut signals: Vec<ActiveSignal> = Vec::new();
    let mut faults: Vec<(String, ActiveFault)> = Vec::new();
    let mut next_event = 0usize;
    let mut event_log = Vec::new();

    let rhs = Rhs { model, seg: RefCell::new(Segment::default()) };
    let mut solver = TrBdf2::new(&rhs, *opts);
    let mut x = x0.to_vec();

    let n_samples = (horizon / scenario.sample_period + 1e-9).floor() as usize + 1;
    let mut time = Vec::with_capacity(n_samples);
    let mut data: Vec<Vec<f64>> = vec![Vec::with_capacity(n_samples); channels.len()];
    let mut max_kcl = 0.0f64;
    let mut limiter = vec![false; model.ibrs.len()];
    let mut max_i = vec![0.0f64; model.ibrs.len()];
    let mut max_ref = vec![0.0f64; model.ibrs.len()];
    let mut buf = vec![0.0; n];
    let mut dx = vec![0.0; n];

    for w in bps.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut discontinuous = false;
        while next_event < scenario.events.len() && scenario.events[next_event].time <= a + 1e-12 {
            let e = &scenario.events[next_event];
            event_log.push((e.time, e.label()));
            match &e.kind {
                EventKind::FaultApply { bus, phases, r_f, r_g, ground } => {
                    let spec = fault_spec(bus, phases, *r_f, *r_g, *ground, e.time, horizon + 1.0)?;
                    let node = model.node_index(bus)?;
                    faults.push((bus.clone(), ActiveFault { node, y: fault_admittance(&spec) }));
                    discontinuous = true;
                }
                EventKind::FaultClear { bus } => {
                    faults.retain(|(b, _)| b != bus);
                    discontinuous = true;
                }
                EventKind::ReferenceStep { input, value } => {
                    let ch = model.find_input(input)?;
                    steps[model.input_index(ch)] = *value;
                }
                EventKind::DcPulse { input, signal } => {
                    let ch = model.find_input(input)?;
                    signals.push(ActiveSignal {
                        start: e.time,
                        input: model.input_index(ch),
                        signal: signal.compile(horizon - e.time),
                    });
                }
                EventKind::ControllerEnable { controller } => {
                    let k = model.controllers.iter().position(|c| &c.name == controller).unwrap();
                    enabled[k] = true;
                }
            }
            next_event += 1;
        }
        // inputs are piecewise constant between breakpoints
        let mid = 0.5 * (a + b);
        let mut u = steps.clone();
        for s in &signals {
            u[s.input] += s.signal.value(mid - s.start);
        }
        *rhs.seg.borrow_mut() =
            Segment { u: u.clone(), faults: faults.iter().map(|(_, f)| *f).collect(), enabled: enabled.clone() };
        if discontinuous {
            solver.reset_jacobian();
            solver.set_step_size(opts.h_init);
        }
        if time.is_empty() {
            record(model, &x, &u, &channels, &mut time, &mut data, 0.0);
        }
        let seg = rhs.seg.borrow().clone();
        let observer = |v: &StepView| -> Result<()> {
            while time.len() < n_samples {
                let ts = time.len() as f64 * scenario.sample_period;
                if ts > v.t1 + 1e-12 {
                    break;
                }
                v.interpolate(ts.max(v.t0), &mut buf);
                record(model, &buf, &u, &channels, &mut time, &mut data, ts);
            }
            let aux = model.evaluate_gated(v.x1, &seg.u, &seg.faults, Some(&seg.enabled), &mut dx)?;
            max_kcl = max_kcl.max(model.kcl_residual(v.x1, &dx, &aux));
            for (k, unit) in model.ibrs.iter().enumerate() {
                limiter[k] |= aux.ibr_limiting[k];
                let st = GflState::read(&v.x1[unit.offset..unit.offset + GFL_STATE_LEN]);
                max_i[k] = max_i[k].max(st.i_mag());
                max_ref[k] = max_ref[k].max(aux.ibr_current_ref[k]);
            }
            Ok(())
        };
        solver.integrate(a, b, &mut x, observer)?;
    }
    for (c, col) in data.iter().enumerate() {
        if let Some(k) = col.iter().position(|v| !v.is_finite()) {
            return Err(Error::StepFailure {
                t: time[k],
                reason: format!("non-finite value on channel {}", scenario.record[c]),
            });
        }
    }
    Ok(Trajectory {
        time,
        names: scenario.record.clone(),
        data,
        events: event_log,
        stats: solver.stats,
        max_kcl_residual: max_kcl,
        limiter_engaged: limiter,
        max_ibr_current: max_i,
        max_ibr_current_ref: max_ref,
        final_state: x,
    })
}

fn record(
    model: &SystemModel,
    x: &[f64],
    u: &[f64],
    channels: &[OutputChannel],
    time: &mut Vec<f64>,
    data: &mut [Vec<f64>],
    t: f64,
) {
    time.push(t);
    for (k, ch) in channels.iter().enumerate() {
        data[k].push(model.output(x, u, *ch));
    }
}
