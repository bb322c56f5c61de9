//! Scripted offline backend.
//!
//! A script is an ordered rule list; the first rule whose conditions all hold
//! answers the request. A rule either returns a fixed response, fails with a
//! scripted error, or samples among weighted responses. Sampling draws from
//! `softmax(ln(weight) / temperature)` with a generator seeded by a digest of
//! the request, so identical requests always yield identical bytes and a
//! temperature of zero always returns the heaviest choice.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ChatBackend, ChatRequest, LlmError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedResponse {
    pub response: String,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockFailureKind {
    Transport,
    Server,
    Request,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockFailure {
    pub kind: MockFailureKind,
    #[serde(default)]
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system_contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_contains: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_regex: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub choices: Vec<WeightedResponse>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<MockFailure>,
}

impl MockRule {
    pub fn user_contains(needle: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            user_contains: Some(needle.into()),
            response: Some(response.into()),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    pub rules: Vec<MockRule>,
    #[serde(default)]
    pub default_response: String,
}

impl MockScript {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| LlmError::MockScript(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| LlmError::MockScript(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mock scripts serialize")
    }
}

struct CompiledRule {
    rule: MockRule,
    regex: Option<Regex>,
}

impl CompiledRule {
    fn matches(&self, model: &str, req: &ChatRequest) -> bool {
        let r = &self.rule;
        r.model.as_deref().is_none_or(|m| m == model)
            && r.system_contains.as_deref().is_none_or(|s| req.system.contains(s))
            && r.user_contains.as_deref().is_none_or(|s| req.user.contains(s))
            && self.regex.as_ref().is_none_or(|re| re.is_match(&req.user))
    }
}

pub struct MockBackend {
    rules: Vec<CompiledRule>,
    default_response: String,
    calls: AtomicUsize,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Result<Self, LlmError> {
        let mut rules = Vec::with_capacity(script.rules.len());
        for (i, rule) in script.rules.into_iter().enumerate() {
            let outcomes = usize::from(rule.response.is_some())
                + usize::from(!rule.choices.is_empty())
                + usize::from(rule.error.is_some());
            if outcomes != 1 {
                return Err(LlmError::MockScript(format!(
                    "rule {i} needs exactly one of response, choices, error"
                )));
            }
            if rule.choices.iter().any(|c| !(c.weight > 0.0 && c.weight.is_finite())) {
                return Err(LlmError::MockScript(format!(
                    "rule {i} has a non-positive choice weight"
                )));
            }
            let regex = rule
                .user_regex
                .as_deref()
                .map(Regex::new)
                .transpose()
                .map_err(|e| LlmError::MockScript(format!("rule {i}: {e}")))?;
            rules.push(CompiledRule { rule, regex });
        }
        Ok(Self {
            rules,
            default_response: script.default_response,
            calls: AtomicUsize::new(0),
        })
    }

    /// Number of completions attempted so far, failures included.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    /// Index of the rule that answers `req`, if any.
    pub fn matching_rule(&self, model: &str, req: &ChatRequest) -> Option<usize> {
        self.rules.iter().position(|r| r.matches(model, req))
    }
}

fn request_digest(rule: usize, req: &ChatRequest) -> u64 {
    let mut h = Sha256::new();
    h.update((rule as u64).to_le_bytes());
    h.update(req.system.as_bytes());
    h.update([0]);
    h.update(req.user.as_bytes());
    h.update([0]);
    h.update(req.seed.unwrap_or(0).to_le_bytes());
    h.update(req.temperature.to_bits().to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Index drawn from `softmax(ln w / temperature)`; argmax when temperature is 0.
pub(crate) fn sample_choice(weights: &[f64], temperature: f64, u: f64) -> usize {
    let argmax = weights
        .iter()
        .enumerate()
        .fold(0, |best, (i, w)| if *w > weights[best] { i } else { best });
    if temperature <= 0.0 {
        return argmax;
    }
    let top = weights[argmax].ln();
    let scaled: Vec<f64> = weights.iter().map(|w| ((w.ln() - top) / temperature).exp()).collect();
    let total: f64 = scaled.iter().sum();
    let mut acc = 0.0;
    for (i, s) in scaled.iter().enumerate() {
        acc += s / total;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

impl ChatBackend for MockBackend {
    fn complete(&self, model: &str, req: &ChatRequest) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let Some(i) = self.matching_rule(model, req) else {
            return Ok(self.default_response.clone());
        };
        let rule = &self.rules[i].rule;
        if let Some(fail) = &rule.error {
            let message = fail.message.clone();
            return Err(match fail.kind {
                MockFailureKind::Transport => LlmError::Transport(message),
                MockFailureKind::Server => LlmError::Server { status: 500, message },
                MockFailureKind::Request => LlmError::Request { status: 400, message },
            });
        }
        if let Some(text) = &rule.response {
            return Ok(text.clone());
        }
        let weights: Vec<f64> = rule.choices.iter().map(|c| c.weight).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(request_digest(i, req));
        let pick = sample_choice(&weights, req.temperature, rng.random());
        Ok(rule.choices[pick].response.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llmclient::{ChatClient, EndpointConfig};

    fn backend(script: MockScript) -> MockBackend {
        MockBackend::new(script).unwrap()
    }

    #[test]
    fn first_matching_rule_wins() {
        let b = backend(MockScript {
            rules: vec![
                MockRule::user_contains("s_std_s", "RISK: HIGH"),
                MockRule::user_contains("s_", "RISK: LOW"),
            ],
            default_response: "dunno".into(),
        });
        let ask = |u: &str| b.complete("m", &ChatRequest::new("sys", u)).unwrap();
        assert_eq!(ask("s_std_s = 9.00"), "RISK: HIGH");
        assert_eq!(ask("s_avg_s = 9.00"), "RISK: LOW");
        assert_eq!(ask("nothing"), "dunno");
        assert_eq!(b.calls(), 3);
    }

    #[test]
    fn conditions_combine() {
        let rule = MockRule {
            model: Some("tuned".into()),
            system_contains: Some("Task B".into()),
            user_regex: Some(r"x = [5-9]\.".into()),
            response: Some("hit".into()),
            ..MockRule::default()
        };
        let b = backend(MockScript {
            rules: vec![rule],
            default_response: "miss".into(),
        });
        let req = |s: &str, u: &str| ChatRequest::new(s, u);
        assert_eq!(b.complete("tuned", &req("Task B", "x = 7.10")).unwrap(), "hit");
        assert_eq!(b.complete("base", &req("Task B", "x = 7.10")).unwrap(), "miss");
        assert_eq!(b.complete("tuned", &req("Task A", "x = 7.10")).unwrap(), "miss");
        assert_eq!(b.complete("tuned", &req("Task B", "x = 1.10")).unwrap(), "miss");
    }

    #[test]
    fn scripted_failures() {
        let rule = MockRule {
            user_contains: Some("boom".into()),
            error: Some(MockFailure {
                kind: MockFailureKind::Server,
                message: "overloaded".into(),
            }),
            ..MockRule::default()
        };
        let b = backend(MockScript {
            rules: vec![rule],
            default_response: "fine".into(),
        });
        assert!(matches!(
            b.complete("m", &ChatRequest::new("", "boom")),
            Err(LlmError::Server { status: 500, .. })
        ));
    }

    #[test]
    fn malformed_rules_are_rejected() {
        let both = MockRule {
            response: Some("a".into()),
            error: Some(MockFailure {
                kind: MockFailureKind::Request,
                message: String::new(),
            }),
            ..MockRule::default()
        };
        assert!(MockBackend::new(MockScript {
            rules: vec![both],
            default_response: String::new()
        })
        .is_err());
        let bad_regex = MockRule {
            user_regex: Some("(".into()),
            response: Some("a".into()),
            ..MockRule::default()
        };
        assert!(MockBackend::new(MockScript {
            rules: vec![bad_regex],
            default_response: String::new()
        })
        .is_err());
    }

    fn stochastic() -> MockScript {
        MockScript {
            rules: vec![MockRule {
                choices: vec![
                    WeightedResponse {
                        response: "A".into(),
                        weight: 1.0,
                    },
                    WeightedResponse {
                        response: "B".into(),
                        weight: 0.5,
                    },
                ],
                ..MockRule::default()
            }],
            default_response: String::new(),
        }
    }

    #[test]
    fn identical_requests_identical_bytes() {
        let b = backend(stochastic());
        for seed in 0..20 {
            let req = ChatRequest::new("s", "u").temperature(1.0).seed(seed);
            assert_eq!(b.complete("m", &req).unwrap(), b.complete("m", &req).unwrap());
        }
    }

    #[test]
    fn zero_temperature_is_greedy() {
        let b = backend(stochastic());
        for seed in 0..50 {
            let req = ChatRequest::new("s", "u").seed(seed);
            assert_eq!(b.complete("m", &req).unwrap(), "A");
        }
    }

    #[test]
    fn sampling_follows_tempered_weights() {
        // weights 1 : 0.5 at temperature 1 -> P(B) = 1/3; at 0.5 -> 0.25/1.25 = 0.2
        let n = 4000;
        let frac_b = |t: f64| {
            let b = backend(stochastic());
            (0..n)
                .filter(|&s| {
                    let req = ChatRequest::new("s", "u").temperature(t).seed(s);
                    b.complete("m", &req).unwrap() == "B"
                })
                .count() as f64
                / n as f64
        };
        assert!((frac_b(1.0) - 1.0 / 3.0).abs() < 0.03);
        assert!((frac_b(0.5) - 0.2).abs() < 0.03);
    }

    #[test]
    fn deterministic_under_temperature_zero_through_client() {
        let (client, backend) = ChatClient::mock(stochastic(), &EndpointConfig::default()).unwrap();
        let req = ChatRequest::new("s", "u");
        assert_eq!(client.chat(&req).unwrap(), client.chat(&req).unwrap());
        assert_eq!(backend.calls(), 2);
    }

    #[test]
    fn script_json_shape() {
        let json = r#"{"rules":[{"user_contains":"s_std_s","response":"RISK: HIGH"}],"default_response":"RISK: LOW"}"#;
        let script: MockScript = serde_json::from_str(json).unwrap();
        assert_eq!(script.rules[0].response.as_deref(), Some("RISK: HIGH"));
        let back: MockScript = serde_json::from_str(&script.to_json()).unwrap();
        assert_eq!(back, script);
    }
}
