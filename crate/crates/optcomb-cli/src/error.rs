//! Exit-code discipline: every failure is classified as a configuration,
//! data, or solver problem so scripts can branch on the process status.

use optcomb::combine::CombineError;
use optcomb::dataset::DatasetError;
use optcomb::grid::GridError;
use optcomb::svm::SvmError;

/// Failure class; the numeric value is the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitKind {
    Config,
    Data,
    Solver,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        match self {
            ExitKind::Config => 2,
            ExitKind::Data => 3,
            ExitKind::Solver => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub err: anyhow::Error,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(err: impl Into<anyhow::Error>) -> Self {
        CliError { kind: ExitKind::Config, err: err.into() }
    }

    pub fn data(err: impl Into<anyhow::Error>) -> Self {
        CliError { kind: ExitKind::Data, err: err.into() }
    }

    pub fn solver(err: impl Into<anyhow::Error>) -> Self {
        CliError { kind: ExitKind::Solver, err: err.into() }
    }
}

/// Dataset problems are data errors except for an out-of-range fold count,
/// which the user chose in the config.
pub fn classify_dataset(err: DatasetError) -> CliError {
    match err {
        DatasetError::KOutOfRange { .. } | DatasetError::BadReplicateCount { .. } => {
            CliError::config(err)
        }
        _ => CliError::data(err),
    }
}

/// Grid failures: an empty grid or bad hyperparameter is a config mistake, a
/// plan/data disagreement is a data problem, and anything the optimizer
/// reports from inside a cell is a solver failure.
pub fn classify_grid(err: GridError) -> CliError {
    match &err {
        GridError::EmptyGrid => CliError::config(err),
        GridError::PlanMismatch { .. } => CliError::data(err),
        GridError::Train { source, .. } | GridError::TrainBootstrap { source, .. } => {
            match source {
                SvmError::SingleClass => CliError::data(err),
                SvmError::NonPositiveHyperparameter { .. } => CliError::config(err),
            }
        }
    }
}

/// Combiner failures: infeasible caps and bad penalties are config mistakes,
/// shape problems are data problems, LP internals are solver failures.
pub fn classify_combine(err: CombineError) -> CliError {
    match &err {
        CombineError::CapInfeasible { .. } | CombineError::BadPenalty { .. } => {
            CliError::config(err)
        }
        CombineError::Empty
        | CombineError::LengthMismatch { .. }
        | CombineError::NeverOutOfBag { .. } => CliError::data(err),
        CombineError::Lp(_) | CombineError::Internal(_) => CliError::solver(err),
    }
}
