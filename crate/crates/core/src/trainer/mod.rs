//! Strategy runner, evaluation grid and confidence traces.

mod eval;
mod report;
mod strategy;
mod train;

pub use eval::{
    confidence_trace, evaluate, evaluate_checkpoint, predict, ConfidenceRecord, EvalReport, PredictionRecord,
    EVAL_BATCH,
};
pub use report::{Grid, GridRow, ReportHeader};
pub use strategy::{Regularization, Strategy, TrainingSet};
pub use train::{
    checkpoint_path, latest_checkpoint, read_log, train, train_with, EpochLog, TrainOptions, TrainOutcome, LOG_FILE,
};
