use lift_core::catalog::{catalog, Variable};
use lift_core::dataset::{sample_eval, smote_balance, split, Dataset, Features};
use lift_core::evaluator::{
    compare_rankings, confusion, metrics, rank_combinations, rank_importance, run_task1, run_task2, MetricReport,
    RunOptions,
};
use lift_core::stats::{average_importance, permanova, rf_importance, rf_predict, rf_train, significance_at};
use lift_core::textualize::{KnowledgeMode, PromptRenderer};

use super::{now, say, suffixed, write_jsonl, Context};
use crate::args::{TaskArg, Toggle};
use crate::error::CliError;
use crate::report::{EvalCounts, MetricSection, PermanovaRow, RankingSection, RunReport};

/// The evaluation set for a seed: the held-out split, sampled at the configured ratio.
pub fn evaluation_split(ctx: &Context, ds: &Dataset) -> Result<(Dataset, Dataset), CliError> {
    let e = &ctx.cfg.eval;
    let (train, test) = split(ds, e.train_fraction, ctx.seed)?;
    let eval_set = sample_eval(&test, e.eval_ratio, e.eval_risky_limit, ctx.seed)?;
    Ok((train, eval_set))
}

fn mean_metrics(runs: &[MetricReport]) -> MetricReport {
    let n = runs.len() as f64;
    let avg = |f: fn(&MetricReport) -> f64| runs.iter().map(f).sum::<f64>() / n;
    MetricReport {
        accuracy: avg(|m| m.accuracy),
        precision: avg(|m| m.precision),
        recall: avg(|m| m.recall),
        f1: avg(|m| m.f1),
        unparseable_count: 0,
        failed_count: 0,
    }
}

fn combination_vars(key: &str) -> Result<Vec<Variable>, CliError> {
    key.split('+')
        .map(|name| {
            name.parse::<Variable>()
                .map_err(|e| CliError::Validation(e.to_string()))
        })
        .collect()
}

pub fn run(ctx: &Context, task: TaskArg, ablation: Option<(Toggle, String)>) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let started_at = now();
    let (mode, model, tag) = match &ablation {
        None => (KnowledgeMode::Full, None, "main".to_string()),
        Some((kb, adapter)) => {
            let model = cfg.adapters.get(adapter).ok_or_else(|| {
                let known: Vec<&str> = cfg.adapters.keys().map(String::as_str).collect();
                CliError::Validation(format!(
                    "unknown adapter `{adapter}`; configured adapters: [{}]",
                    known.join(", ")
                ))
            })?;
            let (mode, label) = match kb {
                Toggle::On => (KnowledgeMode::Full, "on"),
                Toggle::Off => (KnowledgeMode::DefinitionsOnly, "off"),
            };
            (mode, Some(model.as_str()), format!("kb-{label}_{adapter}"))
        }
    };

    let ds = ctx.dataset()?;
    let kb = ctx.knowledge_base()?;
    let renderer = PromptRenderer::new(&kb, catalog(), mode)?;
    let llm = ctx.client(model)?;
    let (train, eval_set) = evaluation_split(ctx, &ds)?;
    say(format!(
        "evaluation set: {} risky / {} non-risky trips, model {}",
        eval_set.positive_count(),
        eval_set.negative_count(),
        llm.model()
    ));
    let opts = RunOptions {
        temperature: cfg.eval.temperature,
        max_tokens: cfg.eval.max_tokens,
        seed: ctx.seed,
    };
    let log_dir = &cfg.paths.log_dir;

    let balanced = smote_balance(&train, cfg.smote.k_neighbors, ctx.seed)?;
    let mut rf_runs = Vec::with_capacity(cfg.eval.seeds.len());
    let mut importances = Vec::with_capacity(cfg.eval.seeds.len());
    for &s in &cfg.eval.seeds {
        let model = rf_train(&balanced, &cfg.rf, s)?;
        let preds = rf_predict(&model, eval_set.records())?;
        rf_runs.push(metrics(&confusion(&preds, &eval_set.labels())?)?);
        importances.push(rf_importance(&model));
    }
    let rf_metrics = mean_metrics(&rf_runs);
    let rf_variables = average_importance(&importances);

    let mut metric_section = MetricSection {
        eval_set: EvalCounts {
            risky: eval_set.positive_count(),
            non_risky: eval_set.negative_count(),
        },
        lift: None,
        lift_confusion: None,
        random_forest: rf_metrics,
    };
    if task.predict() {
        let out = run_task1(&llm, &eval_set, &renderer, &opts)?;
        write_jsonl(&log_dir.join(format!("{tag}-task1.jsonl")), &out.logs)?;
        if out.metrics.failed_count == eval_set.len() {
            let first = out.logs.iter().find_map(|l| l.error.clone()).unwrap_or_default();
            return Err(CliError::Transport(format!("every prediction request failed: {first}")));
        }
        metric_section.lift = Some(out.metrics);
        metric_section.lift_confusion = Some(out.confusion);
    }

    let (mut rankings, mut permanova_rows) = (None, None);
    if task.interpret() {
        let risky = eval_set.risky_subset();
        let out = run_task2(&llm, &risky, &renderer, cfg.eval.trials, &opts)?;
        write_jsonl(&log_dir.join(format!("{tag}-task2.jsonl")), &out.logs)?;
        let dist = out.distribution;
        if dist.failed_per_trial.iter().sum::<usize>() == dist.trials * dist.sample_count {
            let first = out.logs.iter().find_map(|l| l.error.clone()).unwrap_or_default();
            return Err(CliError::Transport(format!(
                "every interpretation request failed: {first}"
            )));
        }
        let lift_variables = rank_importance(&dist);
        let lift_combinations = rank_combinations(&dist, cfg.eval.min_combination_mean);
        let comparison = compare_rankings(&lift_variables, &rf_variables, cfg.eval.top_k)?;

        let all_risky: Vec<Features> = ds.risky().map(|r| r.features).collect();
        let all_safe: Vec<Features> = ds.non_risky().map(|r| r.features).collect();
        let mut rows = Vec::new();
        for entry in lift_combinations.entries.iter().take(cfg.permanova.top_combinations) {
            let vars = combination_vars(&entry.item)?;
            let r = permanova(&all_risky, &all_safe, &vars, cfg.permanova.n_perm, ctx.seed)?;
            rows.push(PermanovaRow {
                combination: entry.item.clone(),
                mean_frequency: entry.mean_frequency,
                pseudo_f: r.pseudo_f,
                p_value: r.p_value,
                n_permutations: r.n_permutations,
                stars: significance_at(r.p_value, &cfg.permanova.alpha_levels).to_string(),
            });
        }
        permanova_rows = Some(rows);
        rankings = Some(RankingSection {
            trials: dist.trials,
            temperature: dist.temperature,
            lift_variables,
            lift_combinations,
            rf_variables,
            comparison,
            distribution: dist,
        });
    }

    let report = RunReport {
        command: if ablation.is_some() { "ablate" } else { "eval" }.to_string(),
        tag: tag.clone(),
        config_hash: ctx.config_hash.clone(),
        seed: ctx.seed,
        model: llm.model().to_string(),
        started_at,
        finished_at: now(),
        metric_report: Some(metric_section),
        rankings,
        permanova_results: permanova_rows,
        stability_tables: None,
    };
    let path = match ablation {
        None => cfg.paths.report_out.clone(),
        Some(_) => suffixed(&cfg.paths.report_out, &tag),
    };
    report.save(&path)?;
    print!("{}", report.summary());
    say(format!("report written to {}", path.display()));
    Ok(())
}
