use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use dynphasor::analysis::{
    eigenanalysis, frequency_response, least_damped_in_band, linearize, locational_impact, logspace, prony_fit,
    LinearizeOptions, PronyOptions,
};
use dynphasor::assembly::integrator::SolverOptions;
use dynphasor::assembly::{initialize, simulate, Equilibrium, Scenario, SystemModel};
use dynphasor::config::{SystemConfig, TWO_AREA_TOML};
use dynphasor::control::{sequential_design, Controller, DesignSpec};
use dynphasor::io::{self, RunManifest, Table};
use dynphasor::phasor::C64;
use dynphasor::Error;

#[derive(Parser)]
#[command(name = "dynphasor", version, about = "Dynamic-phasor simulation and small-signal analysis")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct SystemArgs {
    /// System config (TOML). Defaults to the bundled two-area system.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the PLL bandwidth (Hz) of every inverter.
    #[arg(long)]
    pll_bw: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Nonlinear time-domain simulation of a scenario.
    Simulate {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Controller documents to install.
        #[arg(long = "controller")]
        controllers: Vec<PathBuf>,
        #[arg(long, default_value_t = 1e-3)]
        rtol: f64,
        #[arg(long, default_value_t = 1e-6)]
        atol: f64,
    },
    /// Several scenarios in parallel, one output directory each.
    Batch {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, num_args = 1.., required = true)]
        scenarios: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        rtol: f64,
        #[arg(long, default_value_t = 1e-6)]
        atol: f64,
    },
    /// Eigenvalues, damping and participation at the initialized equilibrium.
    Modes {
        #[command(flatten)]
        sys: SystemArgs,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of participating states listed per mode.
        #[arg(long, default_value_t = 3)]
        top: usize,
    },
    /// Frequency response magnitude and phase.
    Bode {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long = "input", required = true)]
        inputs: Vec<String>,
        #[arg(long)]
        output: String,
        /// Lowest frequency (rad/s).
        #[arg(long, default_value_t = 1.0)]
        w_min: f64,
        #[arg(long, default_value_t = 200.0)]
        w_max: f64,
        #[arg(long, default_value_t = 400)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sequential H-infinity damping-controller design.
    Design {
        #[command(flatten)]
        sys: SystemArgs,
        /// Design spec (TOML).
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ranks input locations by their gain to an output at a mode frequency.
    Impact {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long)]
        output: String,
        /// Candidate inputs; defaults to every DC-load power input.
        #[arg(long = "input")]
        inputs: Vec<String>,
        /// Frequency (Hz); defaults to the least-damped mode in the band.
        #[arg(long)]
        freq_hz: Option<f64>,
        #[arg(long, num_args = 2, default_values_t = [4.0, 8.0])]
        band: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Prony fit of a recorded channel.
    Prony {
        /// Trajectory CSV written by `simulate`.
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        channel: String,
        #[arg(long)]
        t0: f64,
        #[arg(long)]
        t1: f64,
        #[arg(long, default_value_t = 20)]
        order: usize,
        #[arg(long, default_value_t = 0.005)]
        dt: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_system(args: &SystemArgs) -> anyhow::Result<(SystemConfig, String)> {
    let (mut cfg, text) = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::config(p.display().to_string(), e.to_string()))?;
            (SystemConfig::from_toml_str(&text, &p.display().to_string())?, text)
        }
        None => (dynphasor::config::two_area(), TWO_AREA_TOML.to_string()),
    };
    if let Some(bw) = args.pll_bw {
        if !(bw > 0.0) {
            return Err(Error::config("--pll-bw", "must be > 0").into());
        }
        cfg = cfg.with_pll_bandwidth(bw);
    }
    cfg.validate()?;
    Ok((cfg, text))
}

fn build(args: &SystemArgs) -> anyhow::Result<(SystemModel, Equilibrium, String)> {
    let (cfg, text) = load_system(args)?;
    let mut model = SystemModel::from_config(&cfg)?;
    let eq = initialize(&mut model)?;
    Ok((model, eq, text))
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::config(dir.display().to_string(), e.to_string()))?;
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::config(p.display().to_string(), e.to_string()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn read_scenario(path: &Path) -> anyhow::Result<(Scenario, String)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    Ok((Scenario::from_toml_str(&text, &path.display().to_string())?, text))
}

fn run_scenario(
    model: &SystemModel,
    x0: &[f64],
    cfg_text: &str,
    sc: &Scenario,
    sc_text: &str,
    opts: &SolverOptions,
    out: &Path,
) -> anyhow::Result<()> {
    let start = Instant::now();
    create_dir(out)?;
    let traj = simulate(model, x0, sc, opts)?;
    let mut m = RunManifest::new("simulate", cfg_text);
    m.add_input("scenario", sc_text);
    m.solver = Some(opts.into());
    m.seeds = sc.seeds();
    m.emit(out, "trajectory.csv", &io::trajectory_table(&traj).to_csv_string())?;
    m.emit(out, "events.csv", &io::events_csv(&traj))?;
    m.wall_time_s = start.elapsed().as_secs_f64();
    m.write(out)?;
    eprintln!(
        "{}: {} samples, {} steps ({} rejected), max KCL residual {:.2e}",
        out.display(),
        traj.time.len(),
        traj.stats.accepted,
        traj.stats.rejected,
        traj.max_kcl_residual
    );
    Ok(())
}

fn solver(rtol: f64, atol: f64) -> anyhow::Result<SolverOptions> {
    if !(rtol > 0.0 && atol > 0.0) {
        return Err(Error::config("solver", "rtol and atol must be > 0").into());
    }
    Ok(SolverOptions { rtol, atol, ..SolverOptions::default() })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Simulate { sys, scenario, out, controllers, rtol, atol } => {
            let (mut model, eq, text) = build(&sys)?;
            let mut x0 = eq.x.clone();
            for p in &controllers {
                let k = Controller::load(p)?;
                let inst = k.installed(&model)?;
                let extra = model.install_controller(inst, &x0)?;
                x0.extend(extra);
            }
            let (sc, sc_text) = read_scenario(&scenario)?;
            run_scenario(&model, &x0, &text, &sc, &sc_text, &solver(rtol, atol)?, &out)
        }
        Cmd::Batch { sys, scenarios, out, rtol, atol } => {
            let (model, eq, text) = build(&sys)?;
            let opts = solver(rtol, atol)?;
            let jobs: Vec<(PathBuf, Scenario, String)> = scenarios
                .iter()
                .map(|p| read_scenario(p).map(|(s, t)| (p.clone(), s, t)))
                .collect::<anyhow::Result<_>>()?;
            jobs.par_iter()
                .map(|(p, sc, st)| {
                    let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
                    run_scenario(&model, &eq.x, &text, sc, st, &opts, &out.join(stem))
                })
                .collect::<anyhow::Result<Vec<()>>>()?;
            Ok(())
        }
        Cmd::Modes { sys, out, top } => {
            let (model, eq, _) = build(&sys)?;
            let lm = linearize(&model, &eq.x, &[], &[], &LinearizeOptions::default())?;
            let modes = eigenanalysis(&lm)?;
            if let Some(m) = least_damped_in_band(&modes, 1.0, 15.0) {
                eprintln!("least-damped subsynchronous mode: {:.3} Hz, zeta {:.2}%", m.freq_hz, m.zeta * 100.0);
            }
            emit(out.as_deref(), &io::modes_csv(&modes, &lm.states, top))
        }
        Cmd::Bode { sys, inputs, output, w_min, w_max, points, out } => {
            if points == 0 || !(w_min > 0.0 && w_max >= w_min) {
                return Err(Error::config("frequency grid", "need points >= 1 and 0 < w_min <= w_max").into());
            }
            let (model, eq, text) = build(&sys)?;
            let ins: Vec<&str> = inputs.iter().map(String::as_str).collect();
            let lm = linearize(&model, &eq.x, &ins, &[output.as_str()], &LinearizeOptions::default())?;
            let grid = logspace(w_min, w_max, points);
            let resp = frequency_response(&lm, &grid)?;
            let labels: Vec<String> = inputs.iter().map(|i| format!("{i}->{output}")).collect();
            let values: Vec<Vec<C64>> = (0..inputs.len()).map(|j| resp.iter().map(|g| g[(0, j)]).collect()).collect();
            let table = io::bode_table(&grid, &labels, &values);
            let (dir, name) = split_out(&out)?;
            let mut m = RunManifest::new("bode", &text);
            m.emit(&dir, &name, &table.to_csv_string())?;
            m.write(&dir)?;
            Ok(())
        }
        Cmd::Design { sys, spec, out } => {
            let start = Instant::now();
            let (model, eq, text) = build(&sys)?;
            let spec_text =
                std::fs::read_to_string(&spec).map_err(|e| Error::config(spec.display().to_string(), e.to_string()))?;
            let ds = DesignSpec::from_toml_str(&spec_text, &spec.display().to_string())?;
            let ins: Vec<String> =
                ds.ibrs.iter().map(|i| dynphasor::control::hinf::damping_input_name(i, ds.input)).collect();
            let outs: Vec<String> = ds.ibrs.iter().map(|i| format!("vdq:{i}")).collect();
            let ins_ref: Vec<&str> = ins.iter().map(String::as_str).collect();
            let outs_ref: Vec<&str> = outs.iter().map(String::as_str).collect();
            let lm = linearize(&model, &eq.x, &ins_ref, &outs_ref, &LinearizeOptions::default())?;
            let design = sequential_design(&lm, &ds)?;
            create_dir(&out)?;
            let mut m = RunManifest::new("design", &text);
            m.add_input("spec", &spec_text);
            for k in &design.controllers {
                m.emit(&out, &format!("{}.toml", k.name), &k.to_toml_string())?;
            }
            let before = eigenanalysis(&lm)?;
            let after = eigenanalysis(&design.closed_loop)?;
            m.emit(&out, "modes_open_loop.csv", &io::modes_csv(&before, &lm.states, 3))?;
            m.emit(&out, "modes_closed_loop.csv", &io::modes_csv(&after, &design.closed_loop.states, 3))?;
            let mut report = String::from("stage,ibr,removed_modes,reduction_bound,reduction_error,gamma,gamma_opt,peak,control_weight,settling_s,sso_before_hz,sso_before_zeta_pct,sso_after_hz,sso_after_zeta_pct\n");
            for (k, s) in design.stages.iter().enumerate() {
                let (fb, zb) = s.sso_before.unwrap_or((f64::NAN, f64::NAN));
                let (fa, za) = s.sso_after.unwrap_or((f64::NAN, f64::NAN));
                report.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    k + 1,
                    s.ibr,
                    s.removed_modes,
                    io::fmt_f64(s.reduction_bound),
                    io::fmt_f64(s.reduction_error),
                    io::fmt_f64(s.gamma),
                    io::fmt_f64(s.gamma_opt),
                    io::fmt_f64(s.peak),
                    io::fmt_f64(s.control_weight),
                    io::fmt_f64(s.settling.max_settling),
                    io::fmt_f64(fb),
                    io::fmt_f64(zb * 100.0),
                    io::fmt_f64(fa),
                    io::fmt_f64(za * 100.0)
                ));
                eprintln!(
                    "stage {}: {} gamma {:.4}, T_s {:.2} s, SSO zeta {:.2}% -> {:.2}%",
                    k + 1,
                    s.ibr,
                    s.gamma,
                    s.settling.max_settling,
                    zb * 100.0,
                    za * 100.0
                );
            }
            m.emit(&out, "stages.csv", &report)?;
            m.wall_time_s = start.elapsed().as_secs_f64();
            m.write(&out)?;
            Ok(())
        }
        Cmd::Impact { sys, output, inputs, freq_hz, band, out } => {
            let (model, eq, _) = build(&sys)?;
            let inputs = if inputs.is_empty() {
                model.input_names().into_iter().filter(|n| n.starts_with("p_dc:")).collect()
            } else {
                inputs
            };
            if inputs.is_empty() {
                bail!(Error::config("impact", "no candidate inputs"));
            }
            let ins: Vec<&str> = inputs.iter().map(String::as_str).collect();
            let lm = linearize(&model, &eq.x, &ins, &[output.as_str()], &LinearizeOptions::default())?;
            let omega = match freq_hz {
                Some(f) => 2.0 * std::f64::consts::PI * f,
                None => {
                    let modes = eigenanalysis(&lm)?;
                    let m = least_damped_in_band(&modes, band[0], band[1])
                        .ok_or_else(|| Error::config("impact", format!("no mode in {}-{} Hz", band[0], band[1])))?;
                    eprintln!("mode {:.3} Hz, zeta {:.2}%", m.freq_hz, m.zeta * 100.0);
                    m.lambda.im
                }
            };
            let idx: Vec<usize> = (0..inputs.len()).collect();
            let rows = locational_impact(&lm, &idx, 0, omega)?;
            emit(out.as_deref(), &io::impact_csv(&rows))
        }
        Cmd::Prony { csv, channel, t0, t1, order, dt, out } => {
            let table = Table::read(&csv)?;
            let t = table.column("time")?;
            let y = table.column(&channel)?;
            let mut opts = PronyOptions::new(order, t0, t1);
            opts.dt = dt;
            let comps = prony_fit(t, y, &opts)?;
            emit(out.as_deref(), &io::prony_csv(&comps))
        }
    }
}

fn split_out(out: &Path) -> anyhow::Result<(PathBuf, String)> {
    let dir =
        out.parent().map(Path::to_path_buf).filter(|p| !p.as_os_str().is_empty()).unwrap_or_else(|| PathBuf::from("."));
    create_dir(&dir)?;
    let name = out.file_name().map(|s| s.to_string_lossy().into_owned()).context("output path has no file name")?;
    Ok((dir, name))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.downcast_ref::<Error>().map_or(true, Error::is_config);
            ExitCode::from(if config { 2 } else { 3 })
        }
    }
}
