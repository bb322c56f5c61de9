//! Task 1 and Task 2 evaluation protocols, classification metrics, and
//! multi-trial importance aggregation.

mod metrics;
mod ranking;
mod tasks;

pub use metrics::{confusion, metrics, ConfusionCounts, MetricReport};
pub use ranking::{compare_rankings, rank_combinations, rank_importance, RankComparison, RankedEntry, RankedList};
pub use tasks::{run_task1, run_task2, ImportanceDistribution, RunOptions, SampleLog, Task1Outcome, Task2Outcome};

use crate::textualize::TextError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("predictions ({preds}) and labels ({labels}) differ in length")]
    LengthMismatch { preds: usize, labels: usize },
    #[error("no samples to score")]
    Empty,
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Text(#[from] TextError),
}
