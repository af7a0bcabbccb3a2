//! Central-difference linearization around an equilibrium.

use nalgebra::DMatrix;

use crate::assembly::{InputChannel, OutputChannel, SystemModel};
use crate::error::{Error, Result};

/// `dx = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub states: Vec<String>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl LinearModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let (m, p) = (b.ncols(), c.nrows());
        if a.ncols() != n || b.nrows() != n || c.ncols() != n || d.nrows() != p || d.ncols() != m {
            return Err(Error::Dimension(format!(
                "A {}x{}, B {}x{}, C {}x{}, D {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        Ok(Self {
            a,
            b,
            c,
            d,
            states: (0..n).map(|k| format!("x{k}")).collect(),
            inputs: (0..m).map(|k| format!("u{k}")).collect(),
            outputs: (0..p).map(|k| format!("y{k}")).collect(),
        })
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_index(&self, name: &str) -> Result<usize> {
        self.inputs.iter().position(|n| n == name).ok_or_else(|| Error::MissingChannel(format!("input {name}")))
    }

    pub fn output_index(&self, name: &str) -> Result<usize> {
        self.outputs.iter().position(|n| n == name).ok_or_else(|| Error::MissingChannel(format!("output {name}")))
    }

    /// Keeps the listed input and output columns/rows.
    pub fn select(&self, inputs: &[usize], outputs: &[usize]) -> LinearModel {
        let b = DMatrix::from_fn(self.n_states(), inputs.len(), |i, j| self.b[(i, inputs[j])]);
        let c = DMatrix::from_fn(outputs.len(), self.n_states(), |i, j| self.c[(outputs[i], j)]);
        let d = DMatrix::from_fn(outputs.len(), inputs.len(), |i, j| self.d[(outputs[i], inputs[j])]);
        LinearModel {
            a: self.a.clone(),
            b,
            c,
            d,
            states: self.states.clone(),
            inputs: inputs.iter().map(|k| self.inputs[*k].clone()).collect(),
            outputs: outputs.iter().map(|k| self.outputs[*k].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizeOptions {
    /// Relative perturbation; the step for entry `i` is `eps * max(1, |x_i|)`.
    pub eps: f64,
    /// Washout time constant for `w:`-prefixed outputs.
    pub t_w: f64,
    /// Largest `|f(x0)|` accepted as an equilibrium.
    pub tol: f64,
}

impl Default for LinearizeOptions {
    fn default() -> Self {
        Self { eps: 1e-6, t_w: 2.0, tol: 1e-6 }
    }
}

/// Prefix marking an output passed through `s T_w / (1 + s T_w)`.
pub const WASHOUT_PREFIX: &str = "w:";

/// Linearizes `model` at `x0`. Output names prefixed with `w:` are washout-filtered; each
/// adds one state to the linear model.
pub fn linearize(
    model: &SystemModel,
    x0: &[f64],
    inputs: &[&str],
    outputs: &[&str],
    opts: &LinearizeOptions,
) -> Result<LinearModel> {
    let n = model.n_states();
    if x0.len() != n {
        return Err(Error::Dimension(format!("state has {} entries, model has {n}", x0.len())));
    }
    let u0 = model.zero_input();
    let f0 = model.derivative(x0, &u0)?;
    let residual = f0.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if !(residual < opts.tol) {
        return Err(Error::NotAtEquilibrium { residual });
    }
    let in_ch: Vec<InputChannel> = inputs.iter().map(|s| model.find_input(s)).collect::<Result<_>>()?;
    let mut out_ch: Vec<(OutputChannel, bool)> = Vec::new();
    for s in outputs {
        match s.strip_prefix(WASHOUT_PREFIX) {
            Some(base) => out_ch.push((model.find_output(base)?, true)),
            None => out_ch.push((model.find_output(s)?, false)),
        }
    }
    let (m, p) = (in_ch.len(), out_ch.len());
    let chans: Vec<OutputChannel> = out_ch.iter().map(|c| c.0).collect();
    let mut a = DMatrix::zeros(n, n);
    let mut cy = DMatrix::zeros(p, n);
    let mut x = x0.to_vec();
    for j in 0..n {
        let h = opts.eps * x0[j].abs().max(1.0);
        x[j] = x0[j] + h;
        let fp = model.derivative(&x, &u0)?;
        let yp = model.output_values(&x, &u0, &chans);
        x[j] = x0[j] - h;
        let fm = model.derivative(&x, &u0)?;
        let ym = model.output_values(&x, &u0, &chans);
        x[j] = x0[j];
        for i in 0..n {
            a[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
        for i in 0..p {
            cy[(i, j)] = (yp[i] - ym[i]) / (2.0 * h);
        }
    }
    let mut b = DMatrix::zeros(n, m);
    let mut dy = DMatrix::zeros(p, m);
    let mut u = u0.clone();
    for (j, ch) in in_ch.iter().enumerate() {
        let k = model.input_index(*ch);
        let h = opts.eps;
        u[k] = h;
        let fp = model.derivative(x0, &u)?;
        let yp = model.output_values(x0, &u, &chans);
        u[k] = -h;
        let fm = model.derivative(x0, &u)?;
        let ym = model.output_values(x0, &u, &chans);
        u[k] = 0.0;
        for i in 0..n {
            b[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
        for i in 0..p {
            dy[(i, j)] = (yp[i] - ym[i]) / (2.0 * h);
        }
    }
    // washout: dw = (y - w)/T_w, output y - w
    let nw = out_ch.iter().filter(|c| c.1).count();
    let nt = n + nw;
    let mut aa = DMatrix::zeros(nt, nt);
    aa.view_mut((0, 0), (n, n)).copy_from(&a);
    let mut bb = DMatrix::zeros(nt, m);
    bb.view_mut((0, 0), (n, m)).copy_from(&b);
    let mut cc = DMatrix::zeros(p, nt);
    let mut dd = DMatrix::zeros(p, m);
    let mut states = model.state_labels();
    let mut w = n;
    for (i, (_, washed)) in out_ch.iter().enumerate() {
        for j in 0..n {
            cc[(i, j)] = cy[(i, j)];
        }
        for j in 0..m {
            dd[(i, j)] = dy[(i, j)];
        }
        if *washed {
            for j in 0..n {
                aa[(w, j)] = cy[(i, j)] / opts.t_w;
            }
            aa[(w, w)] = -1.0 / opts.t_w;
            for j in 0..m {
                bb[(w, j)] = dy[(i, j)] / opts.t_w;
            }
            cc[(i, w)] = -1.0;
            states.push(format!("washout.{}", outputs[i]));
            w += 1;
        }
    }
    Ok(LinearModel {
        a: aa,
        b: bb,
        c: cc,
        d: dd,
        states,
        inputs: inputs.iter().map(|s| s.to_string()).collect(),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
    })
}
