use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix equation AXB = Y is inconsistent (residual {residual:.3e})")]
    InfeasibleEquation { residual: f64 },

    #[error("decay rate {mu} unachievable: max Re(lambda) = {max_real}")]
    DecayRateUnachievable { max_real: f64, mu: f64 },

    #[error("eigenvalue iteration did not converge")]
    NoConvergence,

    #[error("model error: {0}")]
    Model(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("full-actuation condition violated: {0}")]
    Actuation(String),

    #[error("state left the safe region: {0}")]
    SafeRegion(String),

    #[error("structural infeasibility: {0}")]
    Structural(String),

    #[error("LMI infeasible or stalled: best margin {best_margin:.3e} after {iterations} iterations")]
    LmiInfeasible { best_margin: f64, iterations: usize },

    #[error("singular parametric design: |det V| = {det:.3e}; perturb Z or F")]
    ParameterChoice { det: f64 },

    #[error("unknown plant '{0}'")]
    UnknownPlant(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag for error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Input(_) => "input",
            Error::Shape(_) => "shape",
            Error::InfeasibleEquation { .. } => "infeasible_equation",
            Error::DecayRateUnachievable { .. } => "decay_rate_unachievable",
            Error::NoConvergence => "no_convergence",
            Error::Model(_) => "model",
            Error::Assumption(_) => "assumption",
            Error::Actuation(_) => "actuation",
            Error::SafeRegion(_) => "safe_region",
            Error::Structural(_) => "structural",
            Error::LmiInfeasible { .. } => "lmi_infeasible",
            Error::ParameterChoice { .. } => "parameter_choice",
            Error::UnknownPlant(_) => "unknown_plant",
            Error::Schema(_) => "schema",
            Error::Json(_) => "json",
            Error::Io(_) => "io",
        }
    }
}
