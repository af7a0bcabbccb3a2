//! CSV emitters/readers and run manifests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{ImpactRow, Mode, PronyComponent};
use crate::assembly::integrator::SolverOptions;
use crate::assembly::Trajectory;
use crate::error::{Error, Result};
use crate::phasor::C64;

/// 17 significant digits; parses back to the identical `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::config(path.display().to_string(), e.to_string())
}

/// Column-oriented numeric table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Dimension(format!("{} names for {} columns", names.len(), columns.len())));
        }
        if let Some(n) = columns.first().map(|c| c.len()) {
            if columns.iter().any(|c| c.len() != n) {
                return Err(Error::Dimension("columns differ in length".into()));
            }
        }
        Ok(Self { names, columns })
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.len())
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.columns[k].as_slice())
            .ok_or_else(|| Error::MissingChannel(name.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.names).expect("in-memory write");
        for r in 0..self.rows() {
            w.write_record(self.columns.iter().map(|c| fmt_f64(c[r]))).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn from_csv_str(s: &str, origin: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(s.as_bytes());
        let names: Vec<String> =
            r.headers().map_err(|e| Error::config(origin, e.to_string()))?.iter().map(str::to_string).collect();
        let mut columns = vec![Vec::new(); names.len()];
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::config(origin, e.to_string()))?;
            for (k, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::config(format!("{origin}:{}", line + 2), format!("'{field}' is not a number"))
                })?;
                columns[k].push(v);
            }
        }
        Self::new(names, columns)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| io_err(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_csv_str(&s, &path.display().to_string())
    }
}

/// `time` followed by the recorded channels.
pub fn trajectory_table(traj: &Trajectory) -> Table {
    let mut names = vec!["time".to_string()];
    names.extend(traj.names.iter().cloned());
    let mut columns = vec![traj.time.clone()];
    columns.extend(traj.data.iter().cloned());
    Table { names, columns }
}

pub fn events_csv(traj: &Trajectory) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time", "event"]).expect("in-memory write");
    for (t, e) in &traj.events {
        w.write_record([fmt_f64(*t), e.clone()]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// One row per mode with `Im >= 0`: eigenvalue, frequency, damping (%), top states.
pub fn modes_csv(modes: &[Mode], states: &[String], top: usize) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["re", "im", "freq_hz", "zeta_pct", "participation"]).expect("in-memory write");
    for m in modes.iter().filter(|m| m.lambda.im >= 0.0) {
        let part = m.top_states(states, top).iter().map(|(n, p)| format!("{n}:{p:.3}")).collect::<Vec<_>>().join(" ");
        w.write_record([fmt_f64(m.lambda.re), fmt_f64(m.lambda.im), fmt_f64(m.freq_hz), fmt_f64(m.zeta * 100.0), part])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// `omega, |G|, arg G` per listed pair label.
pub fn bode_table(omegas: &[f64], labels: &[String], values: &[Vec<C64>]) -> Table {
    let mut names = vec!["omega".to_string()];
    let mut columns = vec![omegas.to_vec()];
    for (l, v) in labels.iter().zip(values) {
        names.push(format!("mag:{l}"));
        columns.push(v.iter().map(|g| g.norm()).collect());
        names.push(format!("phase:{l}"));
        columns.push(v.iter().map(|g| g.arg()).collect());
    }
    Table { names, columns }
}

pub fn impact_csv(rows: &[ImpactRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "input", "index"]).expect("in-memory write");
    for r in rows {
        w.write_record([r.rank.to_string(), r.input.clone(), fmt_f64(r.index)]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn prony_csv(comps: &[PronyComponent]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["freq_hz", "zeta_pct", "sigma", "amplitude", "phase", "energy"]).expect("in-memory write");
    for c in comps {
        w.write_record([
            fmt_f64(c.freq_hz),
            fmt_f64(c.zeta * 100.0),
            fmt_f64(c.root.re),
            fmt_f64(c.amplitude),
            fmt_f64(c.phase),
            fmt_f64(c.energy),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDoc {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl From<&SolverOptions> for SolverDoc {
    fn from(o: &SolverOptions) -> Self {
        Self { rtol: o.rtol, atol: o.atol, h_init: o.h_init, h_min: o.h_min, h_max: o.h_max, max_steps: o.max_steps }
    }
}

/// Provenance record written next to every output set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config_sha256: String,
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
    #[serde(default)]
    pub solver: Option<SolverDoc>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// Output file name to SHA-256 of its contents.
    #[serde(default)]
    pub outputs: BTreeMap<String, String>,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn new(command: &str, config_text: &str) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_sha256: sha256_hex(config_text.as_bytes()),
            inputs: BTreeMap::new(),
            solver: None,
            seeds: Vec::new(),
            outputs: BTreeMap::new(),
            wall_time_s: 0.0,
        }
    }

    pub fn add_input(&mut self, name: &str, text: &str) {
        self.inputs.insert(name.to_string(), sha256_hex(text.as_bytes()));
    }

    /// Writes `contents` to `dir/name` and records its hash.
    pub fn emit(&mut self, dir: &Path, name: &str, contents: &str) -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
        self.outputs.insert(name.to_string(), sha256_hex(contents.as_bytes()));
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.toml");
        std::fs::write(&path, self.to_toml_string()).map_err(|e| io_err(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(vals in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, 1..40)) {
            let t = Table::new(vec!["a".into(), "b".into()], vec![vals.clone(), vals.iter().map(|v| -v).collect()]).unwrap();
            let back = Table::from_csv_str(&t.to_csv_string(), "mem").unwrap();
            prop_assert_eq!(back, t);
        }
    }

    #[test]
    fn fmt_has_17_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
    }

    #[test]
    fn bad_cell_reports_line() {
        let e = Table::from_csv_str("t,x\n0,1\n1,abc\n", "f.csv").unwrap_err();
        assert!(e.to_string().contains("f.csv:3"), "{e}");
    }

    #[test]
    fn manifest_hashes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("simulate", "cfg");
        m.emit(dir.path(), "x.csv", "t\n1\n").unwrap();
        assert_eq!(m.outputs["x.csv"], sha256_hex(b"t\n1\n"));
        assert_eq!(m.config_sha256.len(), 64);
        m.write(dir.path()).unwrap();
        let back: RunManifest =
            toml::from_str(&std::fs::read_to_string(dir.path().join("manifest.toml")).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
