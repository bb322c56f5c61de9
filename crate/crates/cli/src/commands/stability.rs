use std::collections::BTreeMap;

use lift_core::catalog::{catalog, Variable};
use lift_core::dataset::{sample_eval, EvalRatio};
use lift_core::evaluator::{run_task2, RunOptions};
use lift_core::stats::{rf_importance, rf_train};
use lift_core::textualize::{KnowledgeMode, PromptRenderer};

use super::eval::evaluation_split;
use super::{now, say, suffixed, write_jsonl, Context};
use crate::error::CliError;
use crate::report::{DispersionRow, ResampleTable, RunReport, StabilitySection, TemperatureTable};

/// Mean and population std per variable, in catalog order.
fn dispersion(samples: &[BTreeMap<String, f64>]) -> (Vec<DispersionRow>, f64) {
    let n = samples.len().max(1) as f64;
    let rows: Vec<DispersionRow> = Variable::ALL
        .iter()
        .map(|v| {
            let xs: Vec<f64> = samples
                .iter()
                .map(|m| m.get(v.name()).copied().unwrap_or(0.0))
                .collect();
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            DispersionRow {
                variable: v.name().to_string(),
                mean,
                std: var.sqrt(),
            }
        })
        .collect();
    let mean_std = rows.iter().map(|r| r.std).sum::<f64>() / rows.len() as f64;
    (rows, mean_std)
}

pub fn run(ctx: &Context, temps: &[f64], resamples: usize) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    if temps.is_empty() {
        return Err(CliError::Usage("at least one temperature is required".into()));
    }
    let started_at = now();
    let ds = ctx.dataset()?;
    let kb = ctx.knowledge_base()?;
    let renderer = PromptRenderer::new(&kb, catalog(), KnowledgeMode::Full)?;
    let llm = ctx.client(None)?;
    let (_, eval_set) = evaluation_split(ctx, &ds)?;
    let risky = eval_set.risky_subset();

    let mut temperatures = Vec::with_capacity(temps.len());
    for &t in temps {
        let opts = RunOptions {
            temperature: t,
            max_tokens: cfg.eval.max_tokens,
            seed: ctx.seed,
        };
        let out = run_task2(&llm, &risky, &renderer, cfg.eval.trials, &opts)?;
        write_jsonl(
            &cfg.paths.log_dir.join(format!("stability-t{t}-task2.jsonl")),
            &out.logs,
        )?;
        let counts: Vec<BTreeMap<String, f64>> = out
            .distribution
            .variable_counts_by_name()
            .into_iter()
            .map(|m| m.into_iter().map(|(k, n)| (k, n as f64)).collect())
            .collect();
        let (rows, mean_std) = dispersion(&counts);
        say(format!("temperature {t}: mean per-variable std {mean_std:.3}"));
        temperatures.push(TemperatureTable {
            temperature: t,
            trials: cfg.eval.trials,
            rows,
            mean_std,
            distribution: out.distribution,
        });
    }

    let rf_resamples = if resamples == 0 {
        None
    } else {
        let balanced = EvalRatio::new(1, 1)?;
        let mut vectors = Vec::with_capacity(resamples);
        for r in 0..resamples as u64 {
            let seed = ctx.seed.wrapping_add(r);
            let sample = sample_eval(&ds, balanced, None, seed)?;
            vectors.push(rf_importance(&rf_train(&sample, &cfg.rf, seed)?));
        }
        let maps: Vec<BTreeMap<String, f64>> = vectors.iter().map(|v| v.0.clone()).collect();
        let (rows, mean_std) = dispersion(&maps);
        say(format!(
            "random forest over {resamples} resamples: mean importance std {mean_std:.4}"
        ));
        Some(ResampleTable {
            resamples,
            rows,
            mean_std,
            importance_vectors: vectors,
        })
    };

    let report = RunReport {
        command: "stability".into(),
        tag: "stability".into(),
        config_hash: ctx.config_hash.clone(),
        seed: ctx.seed,
        model: llm.model().to_string(),
        started_at,
        finished_at: now(),
        metric_report: None,
        rankings: None,
        permanova_results: None,
        stability_tables: Some(StabilitySection {
            temperatures,
            rf_resamples,
        }),
    };
    let path = suffixed(&cfg.paths.report_out, "stability");
    report.save(&path)?;
    say(format!("report written to {}", path.display()));
    Ok(())
}
