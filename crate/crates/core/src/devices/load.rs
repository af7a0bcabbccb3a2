//! Parallel R-L load per sequence at k = +-1. The load capacitor is merged into the node
//! shunt by the assembler.

use serde::{Deserialize, Serialize};

use super::{Reader, Symbol, Writer};
use crate::error::{Error, Result};
use crate::phasor::{SeqTriple, C64, J};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadParams {
    pub name: String,
    pub node: usize,
    /// Conductance `1/R_L` (pu).
    pub g: f64,
    /// Inductive susceptance `1/X_L` (pu); zero means no inductive branch.
    pub b_l: f64,
    /// Capacitive susceptance (pu), merged into the node.
    pub b_c: f64,
    /// Grounded wye: the zero sequence sees the same elements.
    pub grounded: bool,
}

impl LoadParams {
    /// Constant-impedance load drawing `p + j q` at 1 pu voltage (q > 0 inductive).
    pub fn from_pq(name: &str, node: usize, p: f64, q: f64, grounded: bool) -> Self {
        Self { name: name.to_string(), node, g: p, b_l: q.max(0.0), b_c: (-q).max(0.0), grounded }
    }

    pub fn validate(&self) -> Result<()> {
        if self.g < 0.0 || self.b_l < 0.0 || self.b_c < 0.0 {
            return Err(Error::config(format!("load {}", self.name), "admittances must be >= 0"));
        }
        Ok(())
    }

    fn sequences(&self) -> usize {
        if self.b_l > 0.0 {
            if self.grounded {
                3
            } else {
                2
            }
        } else {
            0
        }
    }

    /// Inductor-current states, one complex slot per active sequence.
    pub fn state_len(&self) -> usize {
        2 * self.sequences()
    }

    pub fn symbols(&self) -> Vec<Symbol> {
        ["p", "n", "z"][..self.sequences()].iter().map(|s| Symbol::complex(&format!("i_ll_{s}"), 1)).collect()
    }

    /// Inductor current in steady state at voltage `v`: `v / (j X_L)`.
    pub fn steady_inductor_current(&self, v: SeqTriple) -> SeqTriple {
        let mut i = v.scale(-J * self.b_l);
        if !self.grounded {
            i.z = C64::default();
        }
        i
    }

    pub fn write_state(&self, x: &mut [f64], i_ll: SeqTriple) {
        let mut w = Writer::new(x);
        for v in &i_ll.as_array()[..self.sequences()] {
            w.complex(*v);
        }
    }

    /// Inductor derivatives and the total current drawn from the node.
    pub fn load_eval(&self, x: &[f64], dx: &mut [f64], v: SeqTriple, omega_s: f64) -> SeqTriple {
        let n = self.sequences();
        let mut r = Reader::new(x);
        let mut w = Writer::new(dx);
        let va = v.as_array();
        let mut i_ll = [C64::default(); 3];
        for s in 0..n {
            let i = r.complex();
            i_ll[s] = i;
            w.complex(omega_s * self.b_l * va[s] - J * omega_s * i);
        }
        let mut i_r = v.scale(C64::new(self.g, 0.0));
        if !self.grounded {
            i_r.z = C64::default();
        }
        i_r + SeqTriple::from_array(i_ll)
    }
}
