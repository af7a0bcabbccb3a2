//! System and scenario documents (TOML).
//!
//! Machine, converter and transformer data are given on each device's own MVA rating and
//! converted to the system base when the model is assembled. Lines, bus shunts and loads are
//! on the system base (lines in pu, loads in MW/MVAr).

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::devices::exciter::ExciterParams;
use crate::devices::ibr::GflParams;
use crate::devices::sg::SgStandardData;
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub system: SystemSection,
    #[serde(default, rename = "bus")]
    pub buses: Vec<BusConfig>,
    #[serde(default, rename = "line")]
    pub lines: Vec<LineConfig>,
    #[serde(default, rename = "generator")]
    pub generators: Vec<GeneratorConfig>,
    #[serde(default, rename = "ibr")]
    pub ibrs: Vec<IbrConfig>,
    #[serde(default, rename = "load")]
    pub loads: Vec<LoadConfig>,
    #[serde(default, rename = "dc_load")]
    pub dc_loads: Vec<DcLoadConfig>,
    #[serde(default, rename = "monitor")]
    pub monitors: Vec<MonitorConfig>,
}

fn default_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub name: String,
    pub base_mva: f64,
    pub frequency_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusConfig {
    pub name: String,
    /// Extra shunt capacitor (MVAr at 1 pu).
    #[serde(default)]
    pub shunt_mvar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineConfig {
    pub name: String,
    pub from: String,
    pub to: String,
    /// Series resistance, reactance and total charging susceptance (pu, system base).
    pub r: f64,
    pub x: f64,
    #[serde(default)]
    pub b: f64,
    /// Zero-sequence series impedance; defaults to three times the positive sequence.
    #[serde(default)]
    pub r0: Option<f64>,
    #[serde(default)]
    pub x0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformerConfig {
    /// On the device rating.
    #[serde(default)]
    pub r: f64,
    pub x: f64,
    /// Grounded-wye network-side winding.
    #[serde(default = "yes")]
    pub grounded: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub name: String,
    /// Network bus on the high-voltage side of the step-up transformer.
    pub bus: String,
    pub rating_mva: f64,
    /// Power-flow setpoints at the machine terminal.
    pub p_mw: f64,
    pub v_pu: f64,
    #[serde(default)]
    pub slack: bool,
    #[serde(default)]
    pub angle_deg: f64,
    pub transformer: TransformerConfig,
    pub machine: SgStandardData,
    pub exciter: ExciterParams,
}

/// How `bandwidth_hz` is turned into PLL gains.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PllMapping {
    /// `w_n = 2 pi bw`.
    #[default]
    NaturalFrequency,
    /// `bw` is the -3 dB frequency of the closed tracking loop.
    #[serde(rename = "closed_loop_3db")]
    ClosedLoop3db,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PllConfig {
    /// Loop bandwidth in Hz; gains follow `k_p = 2 zeta w_n / V`, `k_i = w_n^2 / V` with
    /// `w_n` given by `mapping`.
    #[serde(default)]
    pub bandwidth_hz: Option<f64>,
    #[serde(default)]
    pub mapping: PllMapping,
    #[serde(default = "default_zeta")]
    pub damping: f64,
    #[serde(default)]
    pub kp: Option<f64>,
    #[serde(default)]
    pub ki: Option<f64>,
}

fn default_zeta() -> f64 {
    0.707
}

impl PllConfig {
    pub fn gains(&self, v_nominal: f64, name: &str) -> Result<(f64, f64)> {
        match (self.bandwidth_hz, self.kp, self.ki) {
            (Some(bw), None, None) => {
                if !(bw > 0.0) {
                    return Err(Error::config(format!("ibr {name}.pll"), "bandwidth_hz must be > 0"));
                }
                Ok(match self.mapping {
                    PllMapping::NaturalFrequency => GflParams::pll_gains_from_bandwidth(bw, self.damping, v_nominal),
                    PllMapping::ClosedLoop3db => GflParams::pll_gains_from_3db(bw, self.damping, v_nominal),
                })
            }
            (None, Some(kp), Some(ki)) => Ok((kp, ki)),
            _ => Err(Error::config(format!("ibr {name}.pll"), "give either bandwidth_hz or both kp and ki")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IbrControlConfig {
    pub tau_m: f64,
    pub tau_f: f64,
    pub kp_v: f64,
    pub ki_v: f64,
    pub kp_i: f64,
    pub ki_i: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IbrFilterConfig {
    pub r: f64,
    pub x: f64,
    pub r_t: f64,
    pub x_t: f64,
    pub i_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IbrConfig {
    pub name: String,
    pub bus: String,
    pub rating_mva: f64,
    pub p_mw: f64,
    /// Voltage setpoint at the point of interconnection.
    pub v_pu: f64,
    pub pll: PllConfig,
    pub control: IbrControlConfig,
    pub filter: IbrFilterConfig,
}

impl IbrConfig {
    /// Parameters on the system base.
    pub fn params(&self, base_mva: f64) -> Result<GflParams> {
        let z = base_mva / self.rating_mva;
        let (kp_pll, ki_pll) = self.pll.gains(1.0, &self.name)?;
        let c = &self.control;
        let f = &self.filter;
        let p = GflParams {
            kp_pll,
            ki_pll,
            tau_m: c.tau_m,
            tau_f: c.tau_f,
            kp_v: c.kp_v / z,
            ki_v: c.ki_v / z,
            kp_i: c.kp_i * z,
            ki_i: c.ki_i * z,
            r: f.r * z,
            x: f.x * z,
            r_t: f.r_t * z,
            x_t: f.x_t * z,
            i_max: f.i_max / z,
        };
        p.validate(&self.name)?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    pub name: String,
    pub bus: String,
    pub p_mw: f64,
    #[serde(default)]
    pub q_mvar: f64,
    /// Parallel capacitor (MVAr at 1 pu).
    #[serde(default)]
    pub q_cap_mvar: f64,
    #[serde(default = "yes")]
    pub grounded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcLoadConfig {
    pub name: String,
    pub bus: String,
    /// Steady demand used by the power flow.
    #[serde(default)]
    pub p_mw: f64,
    #[serde(default = "default_vmin")]
    pub v_min: f64,
}

fn default_vmin() -> f64 {
    0.5
}

/// Named sum of branch powers, measured at the sending end of each branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorConfig {
    pub name: String,
    pub branches: Vec<String>,
}

fn parse_err(path: &str, e: impl std::fmt::Display) -> Error {
    Error::Parse { path: path.to_string(), message: e.to_string() }
}

impl SystemConfig {
    pub fn from_toml_str(s: &str, origin: &str) -> Result<Self> {
        let c: SystemConfig = toml::from_str(s).map_err(|e| parse_err(origin, e))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
        Self::from_toml_str(&s, &path.display().to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn omega_s(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.system.frequency_hz
    }

    pub fn bus_index(&self, name: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::config("version", format!("unsupported schema version {}", self.version)));
        }
        if !(self.system.base_mva > 0.0 && self.system.frequency_hz > 0.0) {
            return Err(Error::config("system", "base_mva and frequency_hz must be > 0"));
        }
        if self.buses.is_empty() {
            return Err(Error::config("bus", "at least one bus is required"));
        }
        let mut names = HashSet::new();
        for b in &self.buses {
            if !names.insert(b.name.as_str()) {
                return Err(Error::config(format!("bus {}", b.name), "duplicate bus name"));
            }
        }
        let bus = |loc: String, name: &str| -> Result<usize> {
            self.bus_index(name).ok_or_else(|| Error::config(loc, format!("unknown bus '{name}'")))
        };
        let mut dev = HashSet::new();
        let mut unique = |kind: &str, name: &str| -> Result<()> {
            if !dev.insert(format!("{kind}:{name}")) {
                return Err(Error::config(format!("{kind} {name}"), "duplicate name"));
            }
            Ok(())
        };
        for l in &self.lines {
            unique("line", &l.name)?;
            let f = bus(format!("line {}.from", l.name), &l.from)?;
            let t = bus(format!("line {}.to", l.name), &l.to)?;
            if f == t {
                return Err(Error::config(format!("line {}", l.name), "from and to are the same bus"));
            }
            if !(l.x > 0.0) || l.r < 0.0 || l.b < 0.0 {
                return Err(Error::config(format!("line {}", l.name), "need x > 0, r >= 0, b >= 0"));
            }
        }
        let mut slack = 0;
        for g in &self.generators {
            unique("generator", &g.name)?;
            bus(format!("generator {}.bus", g.name), &g.bus)?;
            g.machine.validate(&g.name)?;
            g.exciter.validate(&g.name)?;
            if !(g.rating_mva > 0.0 && g.v_pu > 0.0) {
                return Err(Error::config(format!("generator {}", g.name), "rating and v_pu must be > 0"));
            }
            if !(g.transformer.x > 0.0) {
                return Err(Error::config(format!("generator {}.transformer", g.name), "x must be > 0"));
            }
            slack += g.slack as usize;
        }
        for i in &self.ibrs {
            unique("ibr", &i.name)?;
            bus(format!("ibr {}.bus", i.name), &i.bus)?;
            if !(i.rating_mva > 0.0 && i.v_pu > 0.0) {
                return Err(Error::config(format!("ibr {}", i.name), "rating and v_pu must be > 0"));
            }
            i.params(self.system.base_mva)?;
        }
        if slack != 1 {
            return Err(Error::config("generator", format!("exactly one slack generator required, found {slack}")));
        }
        for l in &self.loads {
            unique("load", &l.name)?;
            bus(format!("load {}.bus", l.name), &l.bus)?;
            if l.p_mw < 0.0 || l.q_cap_mvar < 0.0 {
                return Err(Error::config(format!("load {}", l.name), "p_mw and q_cap_mvar must be >= 0"));
            }
        }
        for d in &self.dc_loads {
            unique("dc_load", &d.name)?;
            bus(format!("dc_load {}.bus", d.name), &d.bus)?;
            if !(d.v_min > 0.0) {
                return Err(Error::config(format!("dc_load {}", d.name), "v_min must be > 0"));
            }
        }
        for m in &self.monitors {
            for b in &m.branches {
                if !self.lines.iter().any(|l| &l.name == b) {
                    return Err(Error::config(format!("monitor {}", m.name), format!("unknown line '{b}'")));
                }
            }
        }
        Ok(())
    }

    /// Sets the PLL bandwidth of every inverter.
    pub fn with_pll_bandwidth(mut self, bw_hz: f64) -> Self {
        for i in &mut self.ibrs {
            i.pll.bandwidth_hz = Some(bw_hz);
            i.pll.kp = None;
            i.pll.ki = None;
        }
        self
    }
}

/// Bundled two-area benchmark with two machines replaced by inverters, PLL bandwidth 20 Hz.
pub const TWO_AREA_TOML: &str = include_str!("../data/two_area.toml");

pub fn two_area() -> SystemConfig {
    SystemConfig::from_toml_str(TWO_AREA_TOML, "two_area.toml").expect("bundled config is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_config_parses() {
        let c = two_area();
        assert_eq!(c.generators.len(), 2);
        assert_eq!(c.ibrs.len(), 2);
        let back = SystemConfig::from_toml_str(&c.to_toml_string(), "rt").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_bus_is_config_error() {
        let s = TWO_AREA_TOML.replacen("from = \"5\"", "from = \"55\"", 1);
        let e = SystemConfig::from_toml_str(&s, "x").unwrap_err();
        assert!(e.is_config());
        assert!(e.to_string().contains("55"), "{e}");
    }

    #[test]
    fn malformed_field_reports_location() {
        let s = TWO_AREA_TOML.replacen("base_mva = 100.0", "base_mva = \"x\"", 1);
        let e = SystemConfig::from_toml_str(&s, "x.toml").unwrap_err();
        assert!(matches!(e, Error::Parse { .. }));
        assert!(e.to_string().contains("base_mva"), "{e}");
    }

    #[test]
    fn pll_bandwidth_rule() {
        let p = PllConfig {
            bandwidth_hz: Some(20.0),
            mapping: PllMapping::NaturalFrequency,
            damping: 0.707,
            kp: None,
            ki: None,
        };
        let (kp, ki) = p.gains(1.0, "x").unwrap();
        let wn = 2.0 * std::f64::consts::PI * 20.0;
        assert!((kp - 2.0 * 0.707 * wn).abs() < 1e-12);
        assert!((ki - wn * wn).abs() < 1e-9);
        let bad = PllConfig {
            bandwidth_hz: Some(20.0),
            mapping: PllMapping::NaturalFrequency,
            damping: 0.7,
            kp: Some(1.0),
            ki: None,
        };
        assert!(bad.gains(1.0, "x").is_err());
    }

    #[test]
    fn pll_3db_rule_halves_power_at_bandwidth() {
        for zeta in [0.5, 0.707, 1.2] {
            let p = PllConfig {
                bandwidth_hz: Some(15.0),
                mapping: PllMapping::ClosedLoop3db,
                damping: zeta,
                kp: None,
                ki: None,
            };
            let (kp, ki) = p.gains(1.0, "x").unwrap();
            let s = crate::phasor::C64::new(0.0, 2.0 * std::f64::consts::PI * 15.0);
            let h = (s * kp + ki) / (s * s + s * kp + ki);
            assert!((h.norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12, "{}", h.norm());
        }
    }
}
