use std::path::Path;

use lift_core::catalog::catalog;
use lift_core::litpipe::{
    aggregate_kb, ingest_markdown, screen_corpus, screen_paper, validate_kb, AggregateOptions, KnowledgeBase, LitError,
    PaperSummary, ScreenOptions,
};
use lift_core::llmclient::{ChatClient, EndpointConfig, LlmError, MockFailure, MockFailureKind, MockRule, MockScript};

const FIXTURE_KB: &str = include_str!("fixtures/knowledge_base.json");
const RELEVANT: &str = r#"{"relevant": true, "hypotheses": "Warnings precede collisions.", "data_conditions": "Naturalistic truck data.", "factors": ["forward collision warning frequency", "speed variability"], "conclusion": "Warnings and speed variance raise risk."}"#;
const IRRELEVANT: &str = r#"{"relevant": false}"#;

fn screening_rules() -> Vec<MockRule> {
    vec![
        MockRule {
            system_contains: Some("review research papers".into()),
            user_contains: Some("forward collision".into()),
            response: Some(RELEVANT.into()),
            ..MockRule::default()
        },
        MockRule {
            system_contains: Some("review research papers".into()),
            response: Some(IRRELEVANT.into()),
            ..MockRule::default()
        },
    ]
}

fn aggregation_rule(response: &str) -> MockRule {
    MockRule {
        system_contains: Some("domain knowledge base".into()),
        response: Some(response.into()),
        ..MockRule::default()
    }
}

fn client(rules: Vec<MockRule>) -> (ChatClient, std::sync::Arc<lift_core::llmclient::MockBackend>) {
    let script = MockScript {
        rules,
        default_response: String::new(),
    };
    ChatClient::mock(script, &EndpointConfig::default()).unwrap()
}

fn write_corpus(dir: &Path, total: usize, relevant_every: impl Fn(usize) -> bool) {
    for i in 0..total {
        let body = if relevant_every(i) {
            format!("# Study {i}\n\nWe analyse forward collision warnings of heavy trucks on expressways.\n")
        } else {
            format!("# Study {i}\n\nWe survey bicycle lane usage in dense urban districts.\n")
        };
        std::fs::write(dir.join(format!("paper-{i:03}.md")), body).unwrap();
    }
}

#[test]
fn fixture_kb_is_complete() {
    let kb = KnowledgeBase::from_json_str(FIXTURE_KB).unwrap();
    let report = validate_kb(&kb, catalog());
    assert!(report.passed(), "{report}");
    assert_eq!((report.filled_cells, report.total_cells), (30, 30));
    assert_eq!(kb.to_json(), FIXTURE_KB);
}

#[test]
fn corpus_of_299_keeps_137() {
    let dir = tempfile::tempdir().unwrap();
    // 137 of 299: every index whose position in a 299-cycle falls below 137 after a stride shuffle.
    let relevant = |i: usize| (i * 7) % 299 < 137;
    write_corpus(dir.path(), 299, relevant);
    std::fs::write(dir.path().join("notes.txt"), "not a paper").unwrap();

    let ingested = ingest_markdown(dir.path()).unwrap();
    assert_eq!(ingested.docs.len(), 299);
    assert!(ingested.failures.is_empty());

    let (llm, mock) = client(screening_rules());
    let summaries = screen_corpus(&ingested.docs, &llm, &ScreenOptions::default()).unwrap();
    assert_eq!(mock.calls(), 299);
    assert_eq!(summaries.iter().filter(|s| s.relevant).count(), 137);
    for (doc, s) in ingested.docs.iter().zip(&summaries) {
        assert_eq!(doc.doc_id, s.doc_id);
        let i: usize = doc.doc_id["paper-".len()..].parse().unwrap();
        assert_eq!(s.relevant, relevant(i));
        if s.relevant {
            assert!(!s.factors.is_empty());
        }
    }
}

#[test]
fn screening_is_order_independent() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 20, |i| i % 3 == 0);
    let docs = ingest_markdown(dir.path()).unwrap().docs;
    let (llm, _) = client(screening_rules());
    let forward = screen_corpus(&docs, &llm, &ScreenOptions::default()).unwrap();
    let mut reversed_docs = docs.clone();
    reversed_docs.reverse();
    let mut reversed = screen_corpus(&reversed_docs, &llm, &ScreenOptions::default()).unwrap();
    reversed.reverse();
    assert_eq!(forward, reversed);
}

#[test]
fn unparseable_screening_is_marked_after_retries() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 1, |_| true);
    let doc = &ingest_markdown(dir.path()).unwrap().docs[0];
    let (llm, mock) = client(vec![MockRule::user_contains("Study", "I think it is relevant.")]);
    let s = screen_paper(doc, &llm, &ScreenOptions::default()).unwrap();
    assert!(!s.relevant && s.parse_failed);
    assert_eq!(mock.calls(), 3);
}

#[test]
fn screening_transport_error_propagates() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 1, |_| true);
    let doc = &ingest_markdown(dir.path()).unwrap().docs[0];
    let failing = MockRule {
        error: Some(MockFailure {
            kind: MockFailureKind::Transport,
            message: "connection refused".into(),
        }),
        ..MockRule::default()
    };
    let (llm, _) = client(vec![failing]);
    let err = screen_paper(doc, &llm, &ScreenOptions::default()).unwrap_err();
    assert!(matches!(err, LitError::Llm(LlmError::Transport(_))));
}

#[test]
fn oversized_paper_is_truncated() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("forward collision {}", "x".repeat(1000));
    std::fs::write(dir.path().join("big.md"), body).unwrap();
    let doc = &ingest_markdown(dir.path()).unwrap().docs[0];
    let (llm, _) = client(screening_rules());
    let opts = ScreenOptions {
        context_budget_tokens: 50,
        ..ScreenOptions::default()
    };
    let s = screen_paper(doc, &llm, &opts).unwrap();
    assert!(s.truncated && s.relevant);
}

fn relevant_summary() -> PaperSummary {
    PaperSummary {
        doc_id: "p".into(),
        relevant: true,
        factors: vec!["speed variability".into()],
        ..PaperSummary::default()
    }
}

#[test]
fn aggregation_returns_fixture_verbatim() {
    let (llm, mock) = client(vec![aggregation_rule(FIXTURE_KB)]);
    let kb = aggregate_kb(&[relevant_summary()], catalog(), &llm, &AggregateOptions::default()).unwrap();
    assert_eq!(mock.calls(), 1);
    assert!(kb.variables["s_f_col"]
        .impact
        .contains("higher frequency of forward collision warnings"));
    assert_eq!(kb.to_json(), FIXTURE_KB);
}

#[test]
fn aggregation_missing_key_is_named() {
    let mut kb = KnowledgeBase::from_json_str(FIXTURE_KB).unwrap();
    kb.variables.remove("lk_std_s");
    let (llm, mock) = client(vec![aggregation_rule(&kb.to_json())]);
    let err = aggregate_kb(&[relevant_summary()], catalog(), &llm, &AggregateOptions::default()).unwrap_err();
    match err {
        LitError::Aggregation { attempts, gaps } => {
            assert_eq!(attempts, 3);
            assert_eq!(gaps, ["lk_std_s: missing"]);
        }
        other => panic!("unexpected {other}"),
    }
    assert_eq!(mock.calls(), 3);
}

#[test]
fn aggregation_needs_a_relevant_summary() {
    let (llm, mock) = client(vec![aggregation_rule(FIXTURE_KB)]);
    let irrelevant = PaperSummary {
        doc_id: "q".into(),
        ..PaperSummary::default()
    };
    let err = aggregate_kb(&[irrelevant], catalog(), &llm, &AggregateOptions::default()).unwrap_err();
    assert!(matches!(err, LitError::Precondition(_)));
    assert_eq!(mock.calls(), 0);
}

#[test]
fn pipeline_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), 12, |i| i % 2 == 0);
    let run = || {
        let mut rules = screening_rules();
        rules.push(aggregation_rule(FIXTURE_KB));
        let (llm, _) = client(rules);
        let docs = ingest_markdown(dir.path()).unwrap().docs;
        let summaries = screen_corpus(&docs, &llm, &ScreenOptions::default()).unwrap();
        aggregate_kb(&summaries, catalog(), &llm, &AggregateOptions::default())
            .unwrap()
            .to_json()
    };
    assert_eq!(run(), run());
}
