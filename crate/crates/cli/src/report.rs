use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use lift_core::evaluator::{ConfusionCounts, ImportanceDistribution, MetricReport, RankComparison, RankedList};
use lift_core::stats::ImportanceVector;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub risky: usize,
    pub non_risky: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSection {
    pub eval_set: EvalCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lift: Option<MetricReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lift_confusion: Option<ConfusionCounts>,
    /// Mean over the configured seeds.
    pub random_forest: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingSection {
    pub trials: usize,
    pub temperature: f64,
    pub lift_variables: RankedList,
    pub lift_combinations: RankedList,
    pub rf_variables: RankedList,
    pub comparison: RankComparison,
    pub distribution: ImportanceDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermanovaRow {
    pub combination: String,
    pub mean_frequency: f64,
    pub pseudo_f: f64,
    pub p_value: f64,
    pub n_permutations: usize,
    pub stars: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionRow {
    pub variable: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureTable {
    pub temperature: f64,
    pub trials: usize,
    pub rows: Vec<DispersionRow>,
    /// Mean of the per-variable standard deviations.
    pub mean_std: f64,
    pub distribution: ImportanceDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampleTable {
    pub resamples: usize,
    pub rows: Vec<DispersionRow>,
    pub mean_std: f64,
    pub importance_vectors: Vec<ImportanceVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySection {
    pub temperatures: Vec<TemperatureTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rf_resamples: Option<ResampleTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub tag: String,
    pub config_hash: String,
    pub seed: u64,
    pub model: String,
    pub started_at: String,
    pub finished_at: String,
    pub metric_report: Option<MetricSection>,
    pub rankings: Option<RankingSection>,
    pub permanova_results: Option<Vec<PermanovaRow>>,
    pub stability_tables: Option<StabilitySection>,
}

impl RunReport {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    /// Writes `<path>` (JSON) and the same path with a `.txt` extension (summary).
    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        crate::commands::write_file(
            path,
            (serde_json::to_string_pretty(self).expect("report serializes") + "\n").as_bytes(),
        )?;
        crate::commands::write_file(&path.with_extension("txt"), self.summary().as_bytes())
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "lift {}", self.command);
        let _ = writeln!(s, "tag: {}  model: {}  seed: {}", self.tag, self.model, self.seed);
        let _ = writeln!(s, "config: {}", self.config_hash);
        if let Some(m) = &self.metric_report {
            metrics_block(&mut s, m);
        }
        if let Some(r) = &self.rankings {
            rankings_block(&mut s, r, self.permanova_results.as_deref());
        }
        if let Some(st) = &self.stability_tables {
            stability_block(&mut s, st);
        }
        s
    }
}

fn metrics_block(s: &mut String, m: &MetricSection) {
    let _ = writeln!(
        s,
        "\nEvaluation set: {} risky / {} non-risky",
        m.eval_set.risky, m.eval_set.non_risky
    );
    let _ = writeln!(s, "{:<12}{:>10}{:>15}", "Metric", "LIFT LLM", "Random forest");
    let rf = &m.random_forest;
    type Getter = fn(&MetricReport) -> f64;
    let rows: [(&str, Getter); 4] = [
        ("Accuracy", |r| r.accuracy),
        ("Precision", |r| r.precision),
        ("Recall", |r| r.recall),
        ("F1-score", |r| r.f1),
    ];
    for (name, get) in rows {
        let lift = m.lift.as_ref().map_or("-".to_string(), |l| format!("{:.2}", get(l)));
        let _ = writeln!(s, "{name:<12}{lift:>10}{:>15.2}", get(rf));
    }
    if let Some(l) = &m.lift {
        let _ = writeln!(
            s,
            "Unparseable replies: {}  failed requests: {}",
            l.unparseable_count, l.failed_count
        );
    }
}

fn rankings_block(s: &mut String, r: &RankingSection, permanova: Option<&[PermanovaRow]>) {
    let _ = writeln!(
        s,
        "\nKey variables ({} trials at temperature {}) vs random-forest importance",
        r.trials, r.temperature
    );
    let _ = writeln!(
        s,
        "{:<6}{:<12}{:>8}{:>8}   {:<12}{:>11}",
        "Rank", "LIFT LLM", "mean", "std", "RF", "importance"
    );
    let n = r.lift_variables.len().max(r.rf_variables.len());
    for i in 0..n {
        let lift = r.lift_variables.entries.get(i);
        let rf = r.rf_variables.entries.get(i);
        let _ = writeln!(
            s,
            "{:<6}{:<12}{:>8}{:>8}   {:<12}{:>11}",
            i + 1,
            lift.map_or("", |e| e.item.as_str()),
            lift.map_or(String::new(), |e| format!("{:.1}", e.mean_frequency)),
            lift.map_or(String::new(), |e| format!("{:.2}", e.std_frequency)),
            rf.map_or("", |e| e.item.as_str()),
            rf.map_or(String::new(), |e| format!("{:.3}", e.mean_frequency)),
        );
    }
    let c = &r.comparison;
    let _ = writeln!(
        s,
        "Top-{} overlap: {}/{}  Spearman: {:.2}",
        c.k, c.top_k_overlap, c.k, c.spearman
    );

    let _ = writeln!(s, "\nKey combinations");
    if r.lift_combinations.is_empty() {
        let _ = writeln!(s, "(none above the frequency threshold)");
        return;
    }
    let _ = writeln!(s, "{:<32}{:>8}{:>10}{:>9}  sig", "Combination", "mean", "pseudo-F", "p");
    for e in &r.lift_combinations.entries {
        match permanova.and_then(|rows| rows.iter().find(|p| p.combination == e.item)) {
            Some(p) => {
                let _ = writeln!(
                    s,
                    "{:<32}{:>8.1}{:>10.2}{:>9.4}  {}",
                    e.item, e.mean_frequency, p.pseudo_f, p.p_value, p.stars
                );
            }
            None => {
                let _ = writeln!(s, "{:<32}{:>8.1}{:>10}{:>9}  -", e.item, e.mean_frequency, "-", "-");
            }
        }
    }
}

fn dispersion_rows(s: &mut String, rows: &[DispersionRow], precision: usize) {
    for r in rows {
        let _ = writeln!(
            s,
            "  {:<12}{:>10.prec$}{:>10.prec$}",
            r.variable,
            r.mean,
            r.std,
            prec = precision
        );
    }
}

fn stability_block(s: &mut String, st: &StabilitySection) {
    for t in &st.temperatures {
        let _ = writeln!(
            s,
            "\nTemperature {} ({} trials): mean per-variable std {:.3}",
            t.temperature, t.trials, t.mean_std
        );
        let _ = writeln!(s, "  {:<12}{:>10}{:>10}", "Variable", "mean", "std");
        dispersion_rows(s, &t.rows, 2);
    }
    if let Some(r) = &st.rf_resamples {
        let _ = writeln!(
            s,
            "\nRandom-forest importance over {} resampled 1:1 datasets: mean std {:.4}",
            r.resamples, r.mean_std
        );
        let _ = writeln!(s, "  {:<12}{:>10}{:>10}", "Variable", "mean", "std");
        dispersion_rows(s, &r.rows, 4);
    }
}

/// One line per report, for comparing ablation cells side by side.
pub fn comparison_table(reports: &[RunReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<24}{:>10}{:>11}{:>8}{:>8}{:>10}{:>10}",
        "Tag", "Accuracy", "Precision", "Recall", "F1", "Top-k", "Spearman"
    );
    for r in reports {
        let lift = r.metric_report.as_ref().and_then(|m| m.lift.as_ref());
        let cell = |f: fn(&MetricReport) -> f64| lift.map_or("-".to_string(), |m| format!("{:.2}", f(m)));
        let (overlap, rho) = r.rankings.as_ref().map_or(("-".to_string(), "-".to_string()), |k| {
            (
                format!("{}/{}", k.comparison.top_k_overlap, k.comparison.k),
                format!("{:.2}", k.comparison.spearman),
            )
        });
        let _ = writeln!(
            s,
            "{:<24}{:>10}{:>11}{:>8}{:>8}{:>10}{:>10}",
            r.tag,
            cell(|m| m.accuracy),
            cell(|m| m.precision),
            cell(|m| m.recall),
            cell(|m| m.f1),
            overlap,
            rho
        );
    }
    s
}
