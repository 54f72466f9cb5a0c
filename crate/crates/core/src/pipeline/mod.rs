//! Preprocessing, windowing, cluster batching, training and forecasting.

mod ablation;
mod batching;
mod config;
mod data;
mod forecast;
mod model;
mod train;

pub use ablation::Arm;
pub use batching::{cluster_batches, Batch};
pub use config::{TrainConfig, TrainingMode, CONFIG_KEYS};
pub use data::{
    impute, make_windows, preprocess, temporal_split, BasinData, CapMode, ForecastTask, Prepared, PreprocessStats,
    SplitRanges, TaskName, FORCING_NAMES,
};
pub use forecast::{rolling_forecast, OneStepForecaster};
pub use model::{distance_adjacency, effective_matrix, CsfModel};
pub use train::{evaluate_split, prepare, train, EpochRecord, EvalSeries, TrainOutcome, TrainingLog};

use alloc::string::String;

use crate::flowgraph::GraphError;
use crate::metrics::MetricError;
use crate::numcore::NumError;
use crate::stgcn::StgcnError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("missing value at station {station}, day {day}")]
    MissingData { station: usize, day: usize },
    #[error("station {station}: {feature} has zero variance on the training split")]
    DegenerateSeries { station: usize, feature: &'static str },
    #[error("{what} too short: need {needed}, got {got}")]
    TooShort { what: &'static str, needed: usize, got: usize },
    #[error("history of {got} days is shorter than the {needed}-day input window")]
    HistoryTooShort { needed: usize, got: usize },
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),
    #[error("training diverged in epoch {epoch}: {detail}")]
    NonFinite { epoch: usize, detail: String },
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Model(#[from] StgcnError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

pub type Result<T> = core::result::Result<T, PipelineError>;
