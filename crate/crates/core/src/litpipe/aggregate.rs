use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::catalog::VariableSpec;
use crate::llmclient::{ChatClient, ChatRequest};

use super::{validate_kb, KbEntry, KnowledgeBase, LitError, PaperSummary};

const AGGREGATE_SYSTEM: &str = include_str!("../../templates/aggregate_system.txt");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AggregateOptions {
    /// Extra attempts after a reply that does not parse or validate.
    pub retries: u32,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for AggregateOptions {
    fn default() -> Self {
        Self {
            retries: 2,
            temperature: 0.0,
            max_tokens: 4096,
        }
    }
}

fn user_prompt(relevant: &[&PaperSummary], catalog: &[VariableSpec]) -> String {
    let summaries: Vec<Value> = relevant
        .iter()
        .map(|s| {
            json!({
                "doc_id": s.doc_id,
                "hypotheses": s.hypotheses,
                "data_conditions": s.data_conditions,
                "factors": s.factors,
                "conclusion": s.conclusion,
            })
        })
        .collect();
    let definitions: Vec<String> = catalog
        .iter()
        .map(|s| format!("- {} ({}): {}", s.name(), s.units, s.description))
        .collect();
    format!(
        "Paper summaries (JSON):\n{}\n\nVariables:\n{}\n",
        serde_json::to_string_pretty(&summaries).expect("summaries serialize"),
        definitions.join("\n")
    )
}

/// Accepts either `{"variables": {...}}` or the bare name-keyed map.
fn parse_kb(text: &str) -> Option<KnowledgeBase> {
    crate::json_scan::find_object(text, |mut obj| {
        let map = match obj.remove("variables") {
            Some(Value::Object(inner)) => inner,
            Some(_) => return None,
            None => obj,
        };
        let variables = map
            .into_iter()
            .map(|(k, v)| serde_json::from_value::<KbEntry>(v).ok().map(|e| (k, e)))
            .collect::<Option<_>>()?;
        Some(KnowledgeBase { variables })
    })
}

/// One call over all relevant summaries. The result is returned only if
/// every catalog variable has all three fields and no extra keys are present.
pub fn aggregate_kb(
    summaries: &[PaperSummary],
    catalog: &[VariableSpec],
    llm: &ChatClient,
    opts: &AggregateOptions,
) -> Result<KnowledgeBase, LitError> {
    let relevant: Vec<&PaperSummary> = summaries.iter().filter(|s| s.relevant).collect();
    if relevant.is_empty() {
        return Err(LitError::Precondition(
            "no relevant paper summaries to aggregate".into(),
        ));
    }
    let req = ChatRequest::new(AGGREGATE_SYSTEM, user_prompt(&relevant, catalog))
        .temperature(opts.temperature)
        .max_tokens(opts.max_tokens)
        .correlation_id("aggregate");
    let mut gaps = Vec::new();
    for attempt in 0..=opts.retries {
        let reply = llm.chat(&req)?;
        gaps = match parse_kb(&reply) {
            None => vec!["reply is not a knowledge base JSON object".to_string()],
            Some(mut kb) => {
                for entry in kb.variables.values_mut() {
                    entry.definition = entry.definition.trim().to_string();
                    entry.impact = entry.impact.trim().to_string();
                    entry.combination_impact = entry.combination_impact.trim().to_string();
                }
                let report = validate_kb(&kb, catalog);
                if report.passed() {
                    return Ok(kb);
                }
                report.gaps()
            }
        };
        log::warn!("aggregation attempt {} rejected: {}", attempt + 1, gaps.join("; "));
    }
    Err(LitError::Aggregation {
        attempts: opts.retries + 1,
        gaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::litpipe::kb::filled_kb;

    #[test]
    fn accepts_wrapped_and_bare_maps() {
        let kb = filled_kb();
        let wrapped = format!("Here it is:\n{}", kb.to_json());
        assert_eq!(parse_kb(&wrapped).unwrap(), kb);
        let bare = serde_json::to_string(&kb.variables).unwrap();
        assert_eq!(parse_kb(&bare).unwrap(), kb);
        assert!(parse_kb("{\"variables\": 3}").is_none());
    }

    #[test]
    fn prompt_lists_every_variable() {
        let s = PaperSummary {
            doc_id: "p".into(),
            relevant: true,
            factors: vec!["speed".into()],
            ..Default::default()
        };
        let text = user_prompt(&[&s], crate::catalog::catalog());
        for spec in crate::catalog::catalog() {
            assert!(text.contains(&format!("- {} (", spec.name())));
        }
        assert!(text.contains("\"doc_id\": \"p\""));
    }
}
