use std::path::Path;

use csf_core::flowgraph::GraphError;
use csf_core::metrics::MetricError;
use csf_core::numcore::NumError;
use csf_core::pipeline::PipelineError;
use csf_core::stgcn::StgcnError;
use csf_core::synth::ScenarioError;

/// Every failure a command can report, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("numerical divergence: {0}")]
    Diverged(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::Invariant(_) => 4,
        }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        // the variant name is part of the diagnostic so scripts can match on it
        CliError::Input(format!("{e:?}: {e}"))
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        CliError::Input(format!("{e:?}: {e}"))
    }
}

fn from_num(e: NumError) -> CliError {
    match e {
        NumError::NonFinite { .. } => CliError::Diverged(e.to_string()),
        other => CliError::Invariant(other.to_string()),
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::NonFinite { .. } => CliError::Diverged(e.to_string()),
            PipelineError::Num(n) | PipelineError::Model(StgcnError::Num(n)) => from_num(n),
            PipelineError::Graph(g) => g.into(),
            PipelineError::Metric(m) => m.into(),
            PipelineError::Model(m) => CliError::Input(m.to_string()),
            other => CliError::Input(format!("{other}")),
        }
    }
}
