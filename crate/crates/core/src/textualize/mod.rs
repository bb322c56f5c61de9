//! Turning trajectory records into prompts, and model replies back into labels.

mod parse;
mod render;
mod sft;

use serde::{Deserialize, Serialize};

pub use parse::{parse_task1, parse_task2, Combination, Task2Answer};
pub use render::{render_task1, render_task2, KnowledgeMode, PromptRenderer};
pub use sft::{export_sft, gold_answer, read_sft, sft_example, SftExample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Binary risk prediction.
    Predict,
    /// Key variables and combinations for a high-risk trip.
    Interpret,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
    pub task: Task,
}

#[derive(Debug, thiserror::Error)]
pub enum TextError {
    #[error("knowledge base has no usable entry for {0}")]
    MissingKnowledge(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("SFT line {line}: {message}")]
    Sft { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
