//! Permutational MANOVA for variable combinations and a random-forest
//! baseline with impurity-based importance.

mod forest;
mod permanova;

pub use forest::{
    average_importance, rf_importance, rf_predict, rf_train, train_matrix, ForestModel, ForestParams, ImportanceVector,
    Node, Tree,
};
pub use permanova::{
    permanova, permanova_rows, significance_at, significance_stars, PermanovaResult, Significance,
    DEFAULT_ALPHA_LEVELS, MIN_PERMUTATIONS,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("model has no feature named `{0}`")]
    UnknownFeature(String),
}
