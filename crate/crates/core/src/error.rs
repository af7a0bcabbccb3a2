use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },

    #[error("singular topology: node {node} has no shunt capacitance")]
    SingularTopology { node: String },

    #[error("measured d-axis voltage {v_dm:.4} pu at {device} is below the divide guard {guard} pu")]
    LowVoltage { device: String, v_dm: f64, guard: f64 },

    #[error("voltage collapse at DC load on {bus}: |v| = {v:.4} pu < v_min = {v_min} pu")]
    VoltageCollapse { bus: String, v: f64, v_min: f64 },

    #[error("power flow diverged after {iterations} iterations (mismatch {mismatch:.3e})")]
    PowerFlowDiverged { iterations: usize, mismatch: f64 },

    #[error("device {device} cannot be initialized: {reason}")]
    DeviceInitInfeasible { device: String, reason: String },

    #[error("integration step failure at t = {t:.6} s: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("at t = {t:.6} s: {source}")]
    AtTime {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("state is not an equilibrium: max |f(x)| = {residual:.3e}")]
    NotAtEquilibrium { residual: f64 },

    #[error("eigen decomposition failed: {0}")]
    EigenFailure(String),

    #[error("(jwI - A) is near singular at w = {omega} rad/s")]
    NearSingular { omega: f64 },

    #[error("ill-conditioned Prony problem: {0}")]
    IllConditioned(String),

    #[error("missing channel: {0}")]
    MissingChannel(String),

    #[error("plant has {count} eigenvalue(s) with Re >= 0 (max Re = {max_re:.3e})")]
    UnstablePlant { count: usize, max_re: f64 },

    #[error("closed loop is unstable (max Re = {max_re:.3e})")]
    UnstableClosedLoop { max_re: f64 },

    #[error("synthesis assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("gamma infeasible: requested {requested}, lower bound {lower_bound}")]
    GammaInfeasible { requested: f64, lower_bound: f64 },

    #[error("algebraic loop: I - D*Dk is singular")]
    AlgebraicLoop,

    #[error("settling time {achieved:.2} s exceeds bound {bound:.2} s")]
    SettlingTime { achieved: f64, bound: f64 },

    #[error("design stage {stage}: {source}")]
    Stage {
        stage: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

impl Error {
    pub fn config(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { location: location.into(), message: message.into() }
    }

    pub fn at_time(self, t: f64) -> Self {
        match self {
            e @ Error::AtTime { .. } => e,
            e @ Error::StepFailure { .. } => e,
            e => Error::AtTime { t, source: Box::new(e) },
        }
    }

    pub fn in_stage(self, stage: usize) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// True for configuration problems (CLI exit code 2); everything else is numerical.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config { .. } | Error::SingularTopology { .. } | Error::Parse { .. } | Error::MissingChannel(_) => {
                true
            }
            Error::Stage { source, .. } | Error::AtTime { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
