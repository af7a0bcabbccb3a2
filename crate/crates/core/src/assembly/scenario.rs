//! Timed event lists and input signals.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::devices::fault::{FaultSpec, OPEN};
use crate::error::{Error, Result};

/// Time signal added to an input channel, with `t` measured from the event time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Signal {
    Constant {
        value: f64,
    },
    /// Rectangular pulses of height `amplitude` at `frequency_hz`, high for the first
    /// `duty` fraction of each period.
    PulseTrain {
        amplitude: f64,
        frequency_hz: f64,
        #[serde(default = "half")]
        duty: f64,
        #[serde(default)]
        cycles: Option<u32>,
    },
    /// Seeded zero-mean Gaussian sequence held for `period` seconds per sample.
    Noise {
        std: f64,
        period: f64,
        seed: u64,
    },
    Sum {
        terms: Vec<Signal>,
    },
}

fn half() -> f64 {
    0.5
}

impl Signal {
    /// Noise seeds used anywhere in the signal.
    pub fn seeds(&self) -> Vec<u64> {
        match self {
            Signal::Noise { seed, .. } => vec![*seed],
            Signal::Sum { terms } => terms.iter().flat_map(|t| t.seeds()).collect(),
            _ => Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::config("scenario signal", m.to_string()));
        match self {
            Signal::Constant { value } if !value.is_finite() => bad("value must be finite"),
            Signal::PulseTrain { amplitude, frequency_hz, duty, .. } => {
                if !amplitude.is_finite() || !(*frequency_hz > 0.0) || !(*duty > 0.0 && *duty < 1.0) {
                    bad("pulse train needs finite amplitude, frequency > 0 and 0 < duty < 1")
                } else {
                    Ok(())
                }
            }
            Signal::Noise { std, period, .. } if !(*std >= 0.0) || !(*period > 0.0) => {
                bad("noise needs std >= 0 and period > 0")
            }
            Signal::Sum { terms } => terms.iter().try_for_each(|s| s.validate()),
            _ => Ok(()),
        }
    }

    /// Instants (relative, within `[0, horizon]`) where the signal may jump.
    pub fn breakpoints(&self, horizon: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match self {
            Signal::Constant { .. } => out.push(0.0),
            Signal::PulseTrain { frequency_hz, duty, cycles, .. } => {
                let period = 1.0 / frequency_hz;
                let n_max = cycles.map(|c| c as usize).unwrap_or(usize::MAX);
                let mut k = 0usize;
                while k < n_max && k as f64 * period <= horizon {
                    out.push(k as f64 * period);
                    out.push((k as f64 + duty) * period);
                    k += 1;
                }
                if k == n_max {
                    out.push(k as f64 * period);
                }
            }
            Signal::Noise { period, .. } => {
                let mut k = 0usize;
                while k as f64 * period <= horizon {
                    out.push(k as f64 * period);
                    k += 1;
                }
            }
            Signal::Sum { terms } => {
                for s in terms {
                    out.extend(s.breakpoints(horizon));
                }
            }
        }
        out.retain(|t| *t <= horizon);
        out
    }

    /// Materializes the signal for evaluation up to `horizon` seconds.
    pub fn compile(&self, horizon: f64) -> CompiledSignal {
        match self {
            Signal::Noise { std, period, seed } => {
                let n = (horizon / period).floor() as usize + 2;
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let values = if *std > 0.0 {
                    let d = Normal::new(0.0, *std).expect("std validated");
                    (0..n).map(|_| d.sample(&mut rng)).collect()
                } else {
                    vec![0.0; n]
                };
                CompiledSignal::Held { period: *period, values }
            }
            Signal::Sum { terms } => CompiledSignal::Sum(terms.iter().map(|s| s.compile(horizon)).collect()),
            other => CompiledSignal::Plain(other.clone()),
        }
    }
}

#[derive(Debug, Clone)]
pub enum CompiledSignal {
    Plain(Signal),
    Held { period: f64, values: Vec<f64> },
    Sum(Vec<CompiledSignal>),
}

impl CompiledSignal {
    /// Value at relative time `t >= 0`; right-continuous.
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            CompiledSignal::Plain(Signal::Constant { value }) => *value,
            CompiledSignal::Plain(Signal::PulseTrain { amplitude, frequency_hz, duty, cycles }) => {
                let phase = t * frequency_hz;
                if let Some(c) = cycles {
                    if phase >= *c as f64 {
                        return 0.0;
                    }
                }
                if phase - phase.floor() < *duty {
                    *amplitude
                } else {
                    0.0
                }
            }
            CompiledSignal::Plain(_) => 0.0,
            CompiledSignal::Held { period, values } => {
                let k = (t / period).floor() as usize;
                values.get(k).copied().unwrap_or(0.0)
            }
            CompiledSignal::Sum(terms) => terms.iter().map(|s| s.value(t)).sum(),
        }
    }
}

fn default_phases() -> String {
    "a".into()
}

fn default_rf() -> f64 {
    1e-3
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventKind {
    /// Shunt fault on the listed phases (e.g. "a", "bc", "abc").
    FaultApply {
        bus: String,
        #[serde(default = "default_phases")]
        phases: String,
        #[serde(default = "default_rf")]
        r_f: f64,
        #[serde(default)]
        r_g: f64,
        #[serde(default = "yes")]
        ground: bool,
    },
    FaultClear {
        bus: String,
    },
    /// Sets the deviation of an input channel from its initialized value.
    ReferenceStep {
        input: String,
        value: f64,
    },
    /// Adds a time signal to an input channel from the event time on.
    DcPulse {
        input: String,
        signal: Signal,
    },
    ControllerEnable {
        controller: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub duration: f64,
    pub sample_period: f64,
    #[serde(default)]
    pub record: Vec<String>,
    #[serde(default, rename = "event")]
    pub events: Vec<Event>,
}

impl Event {
    pub fn label(&self) -> String {
        match &self.kind {
            EventKind::FaultApply { bus, phases, .. } => format!("fault_apply {bus} {phases}"),
            EventKind::FaultClear { bus } => format!("fault_clear {bus}"),
            EventKind::ReferenceStep { input, value } => format!("reference_step {input} {value}"),
            EventKind::DcPulse { input, .. } => format!("dc_pulse {input}"),
            EventKind::ControllerEnable { controller } => format!("controller_enable {controller}"),
        }
    }
}

/// Builds the phase resistances for a fault on `phases`.
pub fn fault_spec(
    bus: &str,
    phases: &str,
    r_f: f64,
    r_g: f64,
    ground: bool,
    t_apply: f64,
    t_clear: f64,
) -> Result<FaultSpec> {
    let loc = format!("fault at {bus}");
    let p = phases.to_ascii_lowercase();
    if p.is_empty() || p.chars().any(|c| !"abc".contains(c)) {
        return Err(Error::config(loc, format!("phases '{phases}' must be a subset of \"abc\"")));
    }
    if !ground && p.len() < 2 {
        return Err(Error::config(loc, "an ungrounded fault needs at least two phases"));
    }
    let r = |ph: char| if p.contains(ph) { r_f } else { OPEN };
    let spec = FaultSpec {
        bus: bus.to_string(),
        r_a: r('a'),
        r_b: r('b'),
        r_c: r('c'),
        r_g: if ground { r_g } else { OPEN },
        t_apply,
        t_clear,
    };
    spec.validate()?;
    Ok(spec)
}

impl Scenario {
    pub fn new(duration: f64, sample_period: f64) -> Self {
        Self { duration, sample_period, record: Vec::new(), events: Vec::new() }
    }

    /// Noise seeds of all DC-pulse signals, in event order.
    pub fn seeds(&self) -> Vec<u64> {
        self.events
            .iter()
            .flat_map(|e| match &e.kind {
                EventKind::DcPulse { signal, .. } => signal.seeds(),
                _ => Vec::new(),
            })
            .collect()
    }

    pub fn record(mut self, channels: &[&str]) -> Self {
        self.record.extend(channels.iter().map(|s| s.to_string()));
        self
    }

    pub fn event(mut self, time: f64, kind: EventKind) -> Self {
        self.events.push(Event { time, kind });
        self
    }

    /// Single line-to-ground fault on phase a, applied at `t` and cleared after `length`.
    pub fn with_lg_fault(self, bus: &str, t: f64, length: f64, r_f: f64) -> Self {
        self.event(t, EventKind::FaultApply { bus: bus.into(), phases: "a".into(), r_f, r_g: 0.0, ground: true })
            .event(t + length, EventKind::FaultClear { bus: bus.into() })
    }

    pub fn from_toml_str(s: &str, origin: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(s).map_err(|e| Error::config(origin, e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        Self::from_toml_str(&s, &path.display().to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !(self.sample_period > 0.0) {
            return Err(Error::config("scenario", "duration and sample_period must be > 0"));
        }
        let mut last = 0.0;
        let mut open: Vec<&str> = Vec::new();
        for (k, e) in self.events.iter().enumerate() {
            let loc = format!("scenario event #{k} ({})", e.label());
            if !(e.time >= last) || e.time > self.duration {
                return Err(Error::config(loc, "events must be time-ordered within [0, duration]"));
            }
            last = e.time;
            match &e.kind {
                EventKind::FaultApply { bus, phases, r_f, r_g, ground } => {
                    if open.contains(&bus.as_str()) {
                        return Err(Error::config(loc, "fault already applied at this bus"));
                    }
                    fault_spec(bus, phases, *r_f, *r_g, *ground, e.time, e.time + 1.0)?;
                    open.push(bus);
                }
                EventKind::FaultClear { bus } => {
                    let Some(i) = open.iter().position(|b| *b == bus) else {
                        return Err(Error::config(loc, "fault clear without a matching apply"));
                    };
                    open.remove(i);
                }
                EventKind::DcPulse { signal, .. } => signal.validate()?,
                EventKind::ReferenceStep { value, .. } if !value.is_finite() => {
                    return Err(Error::config(loc, "step value must be finite"));
                }
                _ => {}
            }
        }
        if let Some(b) = open.first() {
            return Err(Error::config("scenario", format!("fault at {b} is never cleared")));
        }
        Ok(())
    }
}
