//! Lumped pi-section network in pnz at k = +-1. Branch currents and node voltages are states;
//! every node must carry shunt capacitance.

use serde::{Deserialize, Serialize};

use super::{seq_symbols, Reader, Symbol, Writer};
use crate::error::{Error, Result};
use crate::phasor::{SeqTriple, C64, J};

/// Series R-L branch, per sequence `[p, n, z]` on the system base (reactances in pu).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchParams {
    pub name: String,
    pub from: usize,
    pub to: usize,
    pub r: [f64; 3],
    pub x: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub node_names: Vec<String>,
    /// Total shunt susceptance per node (pu), line halves and load capacitors merged.
    pub b_shunt: Vec<f64>,
    pub branches: Vec<BranchParams>,
}

/// `d<i>_k/dt = (omega_s/X)(v - R i) - j k omega_s i` for one branch and one sequence.
pub fn branch_derivative(k: i32, v_l: C64, i: C64, r: f64, x: f64, omega_s: f64) -> C64 {
    (omega_s / x) * (v_l - r * i) - J * (k as f64 * omega_s) * i
}

/// `d<v>_k/dt = (omega_s/B) i_c - j k omega_s v` for one node and one sequence.
pub fn node_derivative(k: i32, i_c: C64, v: C64, b: f64, omega_s: f64) -> C64 {
    (omega_s / b) * i_c - J * (k as f64 * omega_s) * v
}

impl Network {
    pub fn new(node_names: Vec<String>, b_shunt: Vec<f64>, branches: Vec<BranchParams>) -> Result<Self> {
        if node_names.len() != b_shunt.len() {
            return Err(Error::Dimension("node names vs shunt susceptances".into()));
        }
        for (name, b) in node_names.iter().zip(&b_shunt) {
            if !(*b > 0.0) || !b.is_finite() {
                return Err(Error::SingularTopology { node: name.clone() });
            }
        }
        for br in &branches {
            if br.from >= node_names.len() || br.to >= node_names.len() || br.from == br.to {
                return Err(Error::config(
                    format!("branch {}", br.name),
                    "endpoint does not resolve to a distinct node",
                ));
            }
            if br.x.iter().any(|x| !(*x > 0.0)) || br.r.iter().any(|r| *r < 0.0) {
                return Err(Error::config(format!("branch {}", br.name), "need x > 0 and r >= 0"));
            }
        }
        Ok(Self { node_names, b_shunt, branches })
    }

    pub fn n_nodes(&self) -> usize {
        self.node_names.len()
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    /// Branch currents (3 sequences each) followed by node voltages.
    pub fn state_len(&self) -> usize {
        6 * (self.n_branches() + self.n_nodes())
    }

    pub fn symbols(&self) -> Vec<Symbol> {
        let mut out = Vec::new();
        for b in &self.branches {
            seq_symbols(&mut out, &format!("i_{}", b.name));
        }
        for n in &self.node_names {
            seq_symbols(&mut out, &format!("v_{n}"));
        }
        out
    }

    pub fn voltage_offset(&self) -> usize {
        6 * self.n_branches()
    }

    /// Branch-to-node current incidence for one sequence: entry `(node, branch)` is `-1` at
    /// the sending end and `+1` at the receiving end.
    pub fn cci(&self) -> Vec<Vec<i8>> {
        let mut m = vec![vec![0i8; self.n_branches()]; self.n_nodes()];
        for (l, b) in self.branches.iter().enumerate() {
            m[b.from][l] = -1;
            m[b.to][l] = 1;
        }
        m
    }

    /// Node-to-branch voltage incidence for one sequence: `v_l = v_from - v_to`.
    pub fn ccu(&self) -> Vec<Vec<i8>> {
        let mut m = vec![vec![0i8; self.n_nodes()]; self.n_branches()];
        for (l, b) in self.branches.iter().enumerate() {
            m[l][b.from] = 1;
            m[l][b.to] = -1;
        }
        m
    }

    pub fn read_currents(&self, x: &[f64]) -> Vec<SeqTriple> {
        let mut r = Reader::new(x);
        (0..self.n_branches()).map(|_| SeqTriple::new(r.complex(), r.complex(), r.complex())).collect()
    }

    pub fn read_voltages(&self, x: &[f64]) -> Vec<SeqTriple> {
        let mut r = Reader::new(&x[self.voltage_offset()..]);
        (0..self.n_nodes()).map(|_| SeqTriple::new(r.complex(), r.complex(), r.complex())).collect()
    }

    pub fn write_state(&self, x: &mut [f64], currents: &[SeqTriple], voltages: &[SeqTriple]) {
        let mut w = Writer::new(x);
        for s in currents.iter().chain(voltages) {
            for v in s.as_array() {
                w.complex(v);
            }
        }
    }

    /// Net branch current into each node, `CCI i_l`.
    pub fn branch_injections(&self, currents: &[SeqTriple]) -> Vec<SeqTriple> {
        let mut out = vec![SeqTriple::ZERO; self.n_nodes()];
        for (b, i) in self.branches.iter().zip(currents) {
            out[b.from] -= *i;
            out[b.to] += *i;
        }
        out
    }

    /// Branch and node derivatives. `external[n]` is the net current entering node `n` from
    /// devices, loads, DC loads and faults (`i_N - i_L - i_DC - i_fault` without the branch
    /// part). Returns the capacitor current per node.
    pub fn network_eval(&self, x: &[f64], dx: &mut [f64], external: &[SeqTriple], omega_s: f64) -> Vec<SeqTriple> {
        let cur = self.read_currents(x);
        let vol = self.read_voltages(x);
        let mut w = Writer::new(dx);
        for (b, i) in self.branches.iter().zip(&cur) {
            let vl = vol[b.from] - vol[b.to];
            let (v, ii) = (vl.as_array(), i.as_array());
            for s in 0..3 {
                w.complex(branch_derivative(1, v[s], ii[s], b.r[s], b.x[s], omega_s));
            }
        }
        let mut i_c = self.branch_injections(&cur);
        for (n, ic) in i_c.iter_mut().enumerate() {
            *ic += external[n];
            let (c, v) = (ic.as_array(), vol[n].as_array());
            for s in 0..3 {
                w.complex(node_derivative(1, c[s], v[s], self.b_shunt[n], omega_s));
            }
        }
        i_c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    const W: f64 = 2.0 * PI * 60.0;

    fn two_node() -> Network {
        Network::new(
            vec!["a".into(), "b".into()],
            vec![0.1, 0.2],
            vec![BranchParams { name: "ab".into(), from: 0, to: 1, r: [0.01; 3], x: [0.1, 0.1, 0.3] }],
        )
        .unwrap()
    }

    #[test]
    fn dc_mode_branch_current() {
        // k = 0 between fixed sources: steady current v / R
        let (r, x, v) = (0.05, 0.2, 1.0);
        let mut i = 0.0;
        let dt = 1e-5;
        for _ in 0..200_000 {
            i += dt * branch_derivative(0, C64::new(v, 0.0), C64::new(i, 0.0), r, x, W).re;
        }
        assert_abs_diff_eq!(i, v / r, epsilon = 1e-6);
    }

    #[test]
    fn singular_topology_detected() {
        let r = Network::new(vec!["a".into()], vec![0.0], vec![]);
        assert!(matches!(r, Err(Error::SingularTopology { .. })));
    }

    #[test]
    fn dangling_branch_rejected() {
        let r = Network::new(
            vec!["a".into()],
            vec![0.1],
            vec![BranchParams { name: "x".into(), from: 0, to: 3, r: [0.0; 3], x: [0.1; 3] }],
        );
        assert!(matches!(r, Err(Error::Config { .. })));
    }

    #[test]
    fn incidence_consistency() {
        let n = two_node();
        let cci = n.cci();
        let ccu = n.ccu();
        // CCI = -CCU^T
        for a in 0..n.n_nodes() {
            for l in 0..n.n_branches() {
                assert_eq!(cci[a][l], -ccu[l][a]);
            }
        }
    }

    #[test]
    fn steady_phasor_is_equilibrium() {
        let n = two_node();
        let va = SeqTriple::new(C64::new(0.7, 0.1), C64::new(0.01, 0.0), C64::new(0.0, 0.02));
        let vb = SeqTriple::new(C64::new(0.68, 0.05), C64::default(), C64::default());
        let dv = (va - vb).as_array();
        let br = &n.branches[0];
        let i: Vec<C64> = (0..3).map(|s| dv[s] / C64::new(br.r[s], br.x[s])).collect();
        let i = SeqTriple::new(i[0], i[1], i[2]);
        // capacitor current j B v must be supplied externally
        let ext = [i + va.scale(J * n.b_shunt[0]), SeqTriple::ZERO - i + vb.scale(J * n.b_shunt[1])];
        let mut x = vec![0.0; n.state_len()];
        n.write_state(&mut x, &[i], &[va, vb]);
        let mut dx = vec![1.0; n.state_len()];
        n.network_eval(&x, &mut dx, &ext, W);
        for d in dx {
            assert!(d.abs() < 1e-11, "{d}");
        }
    }
}
