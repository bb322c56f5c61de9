use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::llmclient::{parallel_map, ChatClient, ChatRequest};

use super::{LitError, PaperDoc, PaperSummary};

const SCREEN_SYSTEM: &str = include_str!("../../templates/screen_system.txt");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScreenOptions {
    /// Longest paper sent in one request, in estimated tokens.
    pub context_budget_tokens: usize,
    /// Extra attempts after a reply that does not parse.
    pub parse_retries: u32,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for ScreenOptions {
    fn default() -> Self {
        Self {
            context_budget_tokens: 120_000,
            parse_retries: 2,
            temperature: 0.0,
            max_tokens: 1024,
        }
    }
}

fn text_field(obj: &Map<String, Value>, key: &str) -> String {
    match obj.get(key) {
        Some(Value::String(s)) => s.trim().to_string(),
        Some(Value::Array(items)) => items.iter().filter_map(Value::as_str).collect::<Vec<_>>().join("; "),
        _ => String::new(),
    }
}

fn parse_summary(doc_id: &str, text: &str) -> Option<PaperSummary> {
    crate::json_scan::find_object(text, |obj| {
        let relevant = obj.get("relevant")?.as_bool()?;
        let factors: Vec<String> = match obj.get("factors") {
            Some(Value::Array(items)) => items
                .iter()
                .filter_map(Value::as_str)
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect(),
            _ => Vec::new(),
        };
        if relevant && factors.is_empty() {
            return None;
        }
        Some(PaperSummary {
            doc_id: doc_id.to_string(),
            relevant,
            hypotheses: text_field(&obj, "hypotheses"),
            data_conditions: text_field(&obj, "data_conditions"),
            factors,
            conclusion: text_field(&obj, "conclusion"),
            parse_failed: false,
            truncated: false,
        })
    })
}

/// Cuts from the end so the head of the paper (abstract, method) survives.
fn fit_to_budget(doc: &PaperDoc, budget_tokens: usize) -> (&str, bool) {
    if doc.token_estimate <= budget_tokens {
        return (&doc.markdown, false);
    }
    let keep = budget_tokens * 4;
    let end = doc
        .markdown
        .char_indices()
        .nth(keep)
        .map_or(doc.markdown.len(), |(i, _)| i);
    log::warn!(
        "{}: ~{} tokens exceeds the {budget_tokens}-token budget; truncating",
        doc.doc_id,
        doc.token_estimate
    );
    (&doc.markdown[..end], true)
}

/// Asks the model whether the paper is relevant and what it found. Transport
/// failures propagate; replies that never parse yield an irrelevant summary
/// flagged `parse_failed`.
pub fn screen_paper(doc: &PaperDoc, llm: &ChatClient, opts: &ScreenOptions) -> Result<PaperSummary, LitError> {
    let (markdown, truncated) = fit_to_budget(doc, opts.context_budget_tokens);
    let req = ChatRequest::new(SCREEN_SYSTEM, markdown)
        .temperature(opts.temperature)
        .max_tokens(opts.max_tokens)
        .correlation_id(format!("screen:{}", doc.doc_id));
    for attempt in 0..=opts.parse_retries {
        let reply = llm.chat(&req)?;
        if let Some(mut summary) = parse_summary(&doc.doc_id, &reply) {
            summary.truncated = truncated;
            return Ok(summary);
        }
        log::warn!("{}: unparseable screening reply (attempt {})", doc.doc_id, attempt + 1);
    }
    Ok(PaperSummary {
        doc_id: doc.doc_id.clone(),
        parse_failed: true,
        truncated,
        ..PaperSummary::default()
    })
}

/// Screens every document concurrently; the output is in input order.
pub fn screen_corpus(docs: &[PaperDoc], llm: &ChatClient, opts: &ScreenOptions) -> Result<Vec<PaperSummary>, LitError> {
    parallel_map(docs, llm.max_in_flight(), |d| screen_paper(d, llm, opts))
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_relevant_summary() {
        let s = parse_summary(
            "p1",
            "```json\n{\"relevant\": true, \"hypotheses\": \"h\", \"factors\": [\"speed variance\", \" \"], \"conclusion\": \"c\"}\n```",
        )
        .unwrap();
        assert!(s.relevant);
        assert_eq!(s.factors, ["speed variance"]);
        assert_eq!(s.data_conditions, "");
    }

    #[test]
    fn relevant_without_factors_is_rejected() {
        assert!(parse_summary("p", "{\"relevant\": true, \"factors\": []}").is_none());
        assert!(parse_summary("p", "{\"relevant\": \"yes\"}").is_none());
        assert!(!parse_summary("p", "{\"relevant\": false}").unwrap().relevant);
    }

    #[test]
    fn truncation_keeps_head() {
        let markdown = "abcdefghij".repeat(10);
        let doc = PaperDoc {
            doc_id: "d".into(),
            path: "d.md".into(),
            token_estimate: super::super::estimate_tokens(&markdown),
            markdown,
        };
        let (text, cut) = fit_to_budget(&doc, 5);
        assert!(cut);
        assert_eq!(text, "abcdefghijabcdefghij");
        assert_eq!(fit_to_budget(&doc, 25), (doc.markdown.as_str(), false));
    }
}
