//! Literature corpus to knowledge base: markdown ingest, per-paper screening
//! and extraction, and a single aggregation call validated against the catalog.

mod aggregate;
pub(crate) mod kb;
mod screen;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use aggregate::{aggregate_kb, AggregateOptions};
pub use kb::{validate_kb, KbEntry, KbField, KbReport, KnowledgeBase};
pub use screen::{screen_corpus, screen_paper, ScreenOptions};

use crate::llmclient::LlmError;

#[derive(Debug, thiserror::Error)]
pub enum LitError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("knowledge base aggregation failed after {attempts} attempt(s): {}", gaps.join("; "))]
    Aggregation { attempts: u32, gaps: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperDoc {
    pub doc_id: String,
    pub path: PathBuf,
    pub markdown: String,
    pub token_estimate: usize,
}

/// Token count approximated as one token per four characters.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperSummary {
    pub doc_id: String,
    pub relevant: bool,
    #[serde(default)]
    pub hypotheses: String,
    #[serde(default)]
    pub data_conditions: String,
    #[serde(default)]
    pub factors: Vec<String>,
    #[serde(default)]
    pub conclusion: String,
    /// The reply never parsed, so the paper was excluded.
    #[serde(default)]
    pub parse_failed: bool,
    /// The markdown was cut to fit the context budget.
    #[serde(default)]
    pub truncated: bool,
}

#[derive(Debug, Default)]
pub struct Ingested {
    pub docs: Vec<PaperDoc>,
    /// Files that could not be read or were empty; the rest still load.
    pub failures: Vec<(PathBuf, String)>,
}

/// Loads every `.md` file in `dir` (not recursive), sorted by file name.
pub fn ingest_markdown(dir: &Path) -> Result<Ingested, LitError> {
    let io = |source| LitError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "md") {
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));

    let mut out = Ingested::default();
    for path in paths {
        let doc_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        match std::fs::read_to_string(&path) {
            Ok(text) if text.trim().is_empty() => out.failures.push((path, "empty file".into())),
            Ok(markdown) => out.docs.push(PaperDoc {
                doc_id,
                token_estimate: estimate_tokens(&markdown),
                path,
                markdown,
            }),
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                out.failures.push((path, e.to_string()));
            }
        }
    }
    Ok(out)
}
