//! Resistive shunt fault at a bus, in pnz.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phasor::{sym_matrix, SeqTriple, C64};

/// Stand-in resistance for an open phase (pu).
pub const OPEN: f64 = 1e6;

pub type Mat3 = [[C64; 3]; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    pub bus: String,
    pub r_a: f64,
    pub r_b: f64,
    pub r_c: f64,
    #[serde(default)]
    pub r_g: f64,
    pub t_apply: f64,
    pub t_clear: f64,
}

impl FaultSpec {
    /// Single line-to-ground fault on phase a.
    pub fn line_to_ground(bus: &str, r_f: f64, t_apply: f64, t_clear: f64) -> Self {
        Self { bus: bus.to_string(), r_a: r_f, r_b: OPEN, r_c: OPEN, r_g: 0.0, t_apply, t_clear }
    }

    pub fn validate(&self) -> Result<()> {
        let loc = format!("fault at {}", self.bus);
        if [self.r_a, self.r_b, self.r_c].iter().any(|r| !(*r > 0.0)) || self.r_g < 0.0 {
            return Err(Error::config(loc, "phase resistances must be > 0 and r_g >= 0"));
        }
        if !(self.t_clear > self.t_apply) {
            return Err(Error::config(loc, "t_clear must exceed t_apply"));
        }
        Ok(())
    }

    /// Phase-to-ground resistance matrix `R_fabcg`, `v_abc = R i_abc`.
    pub fn abc_matrix(&self) -> Mat3 {
        let d = [self.r_a, self.r_b, self.r_c];
        let mut m = [[C64::new(self.r_g, 0.0); 3]; 3];
        for i in 0..3 {
            m[i][i] += d[i];
        }
        m
    }

    /// Phase conductance matrix, the inverse of [`abc_matrix`](Self::abc_matrix) by
    /// Sherman-Morrison (rank-one ground coupling).
    pub fn abc_admittance(&self) -> Mat3 {
        let g = [1.0 / self.r_a, 1.0 / self.r_b, 1.0 / self.r_c];
        let denom = 1.0 + self.r_g * g.iter().sum::<f64>();
        let mut m = [[C64::default(); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let diag = if i == j { g[i] } else { 0.0 };
                m[i][j] = C64::new(diag - self.r_g * g[i] * g[j] / denom, 0.0);
            }
        }
        m
    }
}

/// `T^H M T`.
fn to_pnz(m: &Mat3) -> Mat3 {
    let t = sym_matrix();
    let mut out = [[C64::default(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = C64::default();
            for a in 0..3 {
                for b in 0..3 {
                    acc += t[a][i].conj() * m[a][b] * t[b][j];
                }
            }
            out[i][j] = acc;
        }
    }
    out
}

/// `R_fpnz = T^{-1} R_fabcg T`.
pub fn fault_matrix(spec: &FaultSpec) -> Mat3 {
    to_pnz(&spec.abc_matrix())
}

/// `R_fpnz^{-1}`, computed from the phase conductances.
pub fn fault_admittance(spec: &FaultSpec) -> Mat3 {
    to_pnz(&spec.abc_admittance())
}

/// `<i_fault>_1 = R_fpnz^{-1} <v_N>_1` while active.
pub fn fault_current(y: &Mat3, v: SeqTriple, active: bool) -> SeqTriple {
    if !active {
        return SeqTriple::ZERO;
    }
    let va = v.as_array();
    let mut out = [C64::default(); 3];
    for (i, o) in out.iter_mut().enumerate() {
        for j in 0..3 {
            *o += y[i][j] * va[j];
        }
    }
    SeqTriple::from_array(out)
}
