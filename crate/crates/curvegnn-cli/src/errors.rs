//! Exit-code discipline: 0 success, 1 validation/usage errors, 2 numerical
//! failures (divergence, non-finite losses, degenerate sampling).

use curvegnn::exact::CurvatureError;
use curvegnn::gnn::GnnError;
use curvegnn::graph::GraphError;
use curvegnn::heat::HeatError;
use curvegnn::influence::InfluenceError;
use curvegnn::learn::LearnError;
use curvegnn::nn::NnError;

#[derive(Debug)]
pub enum CliError {
    /// Bad input: flags, config keys, files, ranges. Exit code 1.
    Usage(String),
    /// Numerical failure during computation. Exit code 2.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Numerical(m) => m,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::NonFiniteGradient { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<LearnError> for CliError {
    fn from(e: LearnError) -> Self {
        match e {
            LearnError::NonFiniteLoss { .. } => CliError::Numerical(e.to_string()),
            LearnError::Nn(inner) => inner.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<GnnError> for CliError {
    fn from(e: GnnError) -> Self {
        match e {
            GnnError::Divergence { .. } => CliError::Numerical(e.to_string()),
            GnnError::Nn(inner) => inner.into(),
            GnnError::Learn(inner) => inner.into(),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<CurvatureError> for CliError {
    fn from(e: CurvatureError) -> Self {
        match e {
            CurvatureError::DegenerateSamples(..) => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<HeatError> for CliError {
    fn from(e: HeatError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<InfluenceError> for CliError {
    fn from(e: InfluenceError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o error: {e}"))
    }
}

impl From<curvegnn::checkpoint::CheckpointError> for CliError {
    fn from(e: curvegnn::checkpoint::CheckpointError) -> Self {
        CliError::Usage(e.to_string())
    }
}
