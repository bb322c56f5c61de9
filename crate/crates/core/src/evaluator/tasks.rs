use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::catalog::Variable;
use crate::dataset::{Dataset, NON_RISKY};
use crate::llmclient::{ChatClient, ChatRequest, DEFAULT_MAX_TOKENS};
use crate::textualize::{parse_task1, parse_task2, Combination, PromptBundle, PromptRenderer, Task};

use super::{metrics, ConfusionCounts, EvalError, MetricReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            temperature: 0.5,
            max_tokens: DEFAULT_MAX_TOKENS,
            seed: 0,
        }
    }
}

/// One line of the per-sample JSONL log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleLog {
    pub trajectory_id: String,
    pub task: Task,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial: Option<u32>,
    pub raw_text: String,
    /// Predicted label, Task 2 answer object, or null when nothing parsed.
    pub parsed: Value,
    pub truth: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task1Outcome {
    pub confusion: ConfusionCounts,
    pub metrics: MetricReport,
    pub logs: Vec<SampleLog>,
}

fn request(prompt: PromptBundle, opts: &RunOptions, seed: u64, id: String) -> ChatRequest {
    ChatRequest::new(prompt.system_text, prompt.user_text)
        .temperature(opts.temperature)
        .max_tokens(opts.max_tokens)
        .seed(seed)
        .correlation_id(id)
}

/// Unparseable replies and failed requests both count as a low-risk
/// prediction; they are tallied separately in the report.
pub fn run_task1(
    llm: &ChatClient,
    eval_set: &Dataset,
    renderer: &PromptRenderer,
    opts: &RunOptions,
) -> Result<Task1Outcome, EvalError> {
    if eval_set.is_empty() {
        return Err(EvalError::Empty);
    }
    let reqs: Vec<ChatRequest> = eval_set
        .records()
        .iter()
        .map(|r| request(renderer.task1(r), opts, opts.seed, format!("t1:{}", r.trajectory_id)))
        .collect();
    let replies = llm.chat_batch(&reqs);

    let mut confusion = ConfusionCounts::default();
    let (mut unparseable, mut failed) = (0, 0);
    let mut logs = Vec::with_capacity(replies.len());
    for (record, reply) in eval_set.records().iter().zip(replies) {
        let (raw_text, parsed, error) = match reply {
            Ok(text) => {
                let parsed = parse_task1(&text);
                if parsed.is_none() {
                    unparseable += 1;
                }
                (text, parsed, None)
            }
            Err(e) => {
                failed += 1;
                (String::new(), None, Some(e.to_string()))
            }
        };
        confusion.add(parsed.unwrap_or(NON_RISKY), record.risk_label);
        logs.push(SampleLog {
            trajectory_id: record.trajectory_id.clone(),
            task: Task::Predict,
            trial: None,
            raw_text,
            parsed: parsed.map_or(Value::Null, Value::from),
            truth: record.risk_label,
            error,
        });
    }
    let mut report = metrics(&confusion)?;
    report.unparseable_count = unparseable;
    report.failed_count = failed;
    Ok(Task1Outcome {
        confusion,
        metrics: report,
        logs,
    })
}

/// Per-trial raw counts of how many samples named each variable or combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceDistribution {
    pub trials: usize,
    pub temperature: f64,
    pub sample_count: usize,
    pub per_trial_counts: Vec<BTreeMap<Variable, usize>>,
    pub combination_counts: Vec<BTreeMap<Combination, usize>>,
    pub unparseable_per_trial: Vec<usize>,
    pub failed_per_trial: Vec<usize>,
}

impl ImportanceDistribution {
    pub fn variable_counts_by_name(&self) -> Vec<BTreeMap<String, usize>> {
        self.per_trial_counts
            .iter()
            .map(|m| m.iter().map(|(v, &n)| (v.name().to_string(), n)).collect())
            .collect()
    }

    pub fn combination_counts_by_key(&self) -> Vec<BTreeMap<String, usize>> {
        self.combination_counts
            .iter()
            .map(|m| m.iter().map(|(c, &n)| (c.key(), n)).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task2Outcome {
    pub distribution: ImportanceDistribution,
    pub logs: Vec<SampleLog>,
}

/// Queries every risky record once per trial. Trial `t` sends seed
/// `opts.seed + t`, so trials differ only through decoding randomness.
pub fn run_task2(
    llm: &ChatClient,
    risky: &Dataset,
    renderer: &PromptRenderer,
    trials: usize,
    opts: &RunOptions,
) -> Result<Task2Outcome, EvalError> {
    if trials == 0 {
        return Err(EvalError::Precondition("trials must be >= 1".into()));
    }
    if risky.is_empty() {
        return Err(EvalError::Empty);
    }
    let records = risky.records();
    let mut reqs = Vec::with_capacity(trials * records.len());
    for trial in 0..trials {
        for r in records {
            let prompt = renderer.task2(r)?;
            let id = format!("t2:{trial}:{}", r.trajectory_id);
            reqs.push(request(prompt, opts, opts.seed.wrapping_add(trial as u64), id));
        }
    }
    let mut replies = llm.chat_batch(&reqs).into_iter();

    let mut dist = ImportanceDistribution {
        trials,
        temperature: opts.temperature,
        sample_count: records.len(),
        per_trial_counts: Vec::with_capacity(trials),
        combination_counts: Vec::with_capacity(trials),
        unparseable_per_trial: vec![0; trials],
        failed_per_trial: vec![0; trials],
    };
    let mut logs = Vec::with_capacity(reqs.len());
    for trial in 0..trials {
        let mut vars: BTreeMap<Variable, usize> = Variable::ALL.iter().map(|&v| (v, 0)).collect();
        let mut combos: BTreeMap<Combination, usize> = BTreeMap::new();
        for r in records {
            let reply = replies.next().expect("one reply per request");
            let (raw_text, answer, error) = match reply {
                Ok(text) => {
                    let answer = parse_task2(&text);
                    (text, answer, None)
                }
                Err(e) => {
                    dist.failed_per_trial[trial] += 1;
                    (String::new(), None, Some(e.to_string()))
                }
            };
            match &answer {
                Some(a) => {
                    // The parser already removes duplicates within one reply.
                    for v in &a.key_variables {
                        *vars.entry(*v).or_default() += 1;
                    }
                    for c in &a.key_combinations {
                        *combos.entry(c.clone()).or_default() += 1;
                    }
                }
                None if error.is_none() => dist.unparseable_per_trial[trial] += 1,
                None => {}
            }
            logs.push(SampleLog {
                trajectory_id: r.trajectory_id.clone(),
                task: Task::Interpret,
                trial: Some(trial as u32),
                raw_text,
                parsed: answer.map_or(Value::Null, |a| serde_json::to_value(a).expect("answer serializes")),
                truth: r.risk_label,
                error,
            });
        }
        dist.per_trial_counts.push(vars);
        dist.combination_counts.push(combos);
    }
    Ok(Task2Outcome {
        distribution: dist,
        logs,
    })
}
