use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lift_core::dataset::EvalRatio;
use lift_core::litpipe::{AggregateOptions, ScreenOptions};
use lift_core::llmclient::EndpointConfig;
use lift_core::stats::{ForestParams, DEFAULT_ALPHA_LEVELS, MIN_PERMUTATIONS};
use lift_core::training::TrainingConfig;

use crate::error::CliError;

pub const API_KEY_ENV: &str = "LIFT_API_KEY";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dataset: PathBuf,
    pub kb: PathBuf,
    pub corpus_dir: PathBuf,
    pub screening_out: PathBuf,
    pub sft_out: PathBuf,
    pub training_config_out: PathBuf,
    pub report_out: PathBuf,
    pub log_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            dataset: "data/trips.csv".into(),
            kb: "kb/knowledge_base.json".into(),
            corpus_dir: "corpus".into(),
            screening_out: "kb/screening.jsonl".into(),
            sft_out: "out/sft_train.jsonl".into(),
            training_config_out: "out/training_config.json".into(),
            report_out: "out/report.json".into(),
            log_dir: "out/logs".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub temperature: f64,
    pub trials: usize,
    pub eval_ratio: EvalRatio,
    /// Cap on risky trips in the evaluation set; all of the test split when absent.
    pub eval_risky_limit: Option<usize>,
    pub train_fraction: f64,
    /// One random-forest fit per seed; importances and metrics are averaged.
    pub seeds: Vec<u64>,
    pub max_tokens: u32,
    pub top_k: usize,
    pub min_combination_mean: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            temperature: 0.5,
            trials: 10,
            eval_ratio: EvalRatio::INDUSTRY,
            eval_risky_limit: None,
            train_fraction: 0.5,
            seeds: (0..10).collect(),
            max_tokens: lift_core::llmclient::DEFAULT_MAX_TOKENS,
            top_k: 4,
            min_combination_mean: 2.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisSettings {
    /// Moments and shifts as JSON; the built-in fleet moments when absent.
    pub spec: Option<PathBuf>,
    pub n: usize,
}

impl Default for SynthesisSettings {
    fn default() -> Self {
        Self { spec: None, n: 1791 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PermanovaSettings {
    pub n_perm: usize,
    /// Loosest to strictest; one star per level passed.
    pub alpha_levels: [f64; 3],
    /// How many of the top-ranked combinations are tested.
    pub top_combinations: usize,
}

impl Default for PermanovaSettings {
    fn default() -> Self {
        Self {
            n_perm: 999,
            alpha_levels: DEFAULT_ALPHA_LEVELS,
            top_combinations: 6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoteSettings {
    pub k_neighbors: usize,
}

impl Default for SmoteSettings {
    fn default() -> Self {
        Self { k_neighbors: 5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub endpoint: EndpointConfig,
    /// Adapter tag to served model name, for `ablate --adapter`.
    pub adapters: BTreeMap<String, String>,
    pub seed: u64,
    pub paths: Paths,
    pub eval: EvalSettings,
    pub synthesis: SynthesisSettings,
    pub screening: ScreenOptions,
    pub aggregation: AggregateOptions,
    pub rf: ForestParams,
    pub permanova: PermanovaSettings,
    pub smote: SmoteSettings,
    pub training: TrainingConfig,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            endpoint: EndpointConfig::default(),
            adapters: BTreeMap::new(),
            seed: 42,
            paths: Paths::default(),
            eval: EvalSettings::default(),
            synthesis: SynthesisSettings::default(),
            screening: ScreenOptions::default(),
            aggregation: AggregateOptions::default(),
            rf: ForestParams::default(),
            permanova: PermanovaSettings::default(),
            smote: SmoteSettings::default(),
            training: TrainingConfig::default(),
        }
    }
}

impl HarnessConfig {
    /// Parses the file and resolves relative paths against its directory.
    /// Returns the raw bytes too, which feed the config hash.
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: HarnessConfig =
            serde_json::from_slice(&bytes).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.validate()?;
        Ok((cfg, bytes))
    }

    fn resolve(&mut self, base: &Path) {
        let p = &mut self.paths;
        for path in [
            &mut p.dataset,
            &mut p.kb,
            &mut p.corpus_dir,
            &mut p.screening_out,
            &mut p.sft_out,
            &mut p.training_config_out,
            &mut p.report_out,
            &mut p.log_dir,
        ] {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        if let Some(spec) = &mut self.synthesis.spec {
            if spec.is_relative() {
                *spec = base.join(&*spec);
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let mut problems = Vec::new();
        let e = &self.eval;
        if !(0.0..=2.0).contains(&e.temperature) {
            problems.push(format!("eval.temperature {} is outside [0, 2]", e.temperature));
        }
        if e.trials == 0 {
            problems.push("eval.trials must be >= 1".into());
        }
        if e.seeds.is_empty() {
            problems.push("eval.seeds must list at least one seed".into());
        }
        if !(e.train_fraction > 0.0 && e.train_fraction < 1.0) {
            problems.push("eval.train_fraction must lie strictly between 0 and 1".into());
        }
        if e.top_k == 0 {
            problems.push("eval.top_k must be >= 1".into());
        }
        if e.max_tokens == 0 {
            problems.push("eval.max_tokens must be >= 1".into());
        }
        if self.permanova.n_perm < MIN_PERMUTATIONS {
            problems.push(format!("permanova.n_perm must be >= {MIN_PERMUTATIONS}"));
        }
        let a = self.permanova.alpha_levels;
        if !(a[0] < 1.0 && a[0] > a[1] && a[1] > a[2] && a[2] > 0.0) {
            problems.push("permanova.alpha_levels must be strictly decreasing within (0, 1)".into());
        }
        if self.rf.n_trees == 0 || self.rf.min_leaf == 0 {
            problems.push("rf.n_trees and rf.min_leaf must be >= 1".into());
        }
        if self.smote.k_neighbors == 0 {
            problems.push("smote.k_neighbors must be >= 1".into());
        }
        if let Err(msg) = self.training.validate() {
            problems.push(format!("training: {msg}"));
        }
        if let Err(err) = self.endpoint.validate() {
            problems.push(format!("endpoint: {err}"));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(format!(
                "invalid configuration: {}",
                problems.join("; ")
            )))
        }
    }
}

/// SHA-256 over the config file bytes, then every input that changes the
/// outcome of a run: the invocation and the mock script, if any.
pub fn config_hash(config_bytes: &[u8], invocation: &serde_json::Value, mock_bytes: Option<&[u8]>) -> String {
    let mut h = Sha256::new();
    h.update((config_bytes.len() as u64).to_le_bytes());
    h.update(config_bytes);
    let inv = invocation.to_string();
    h.update((inv.len() as u64).to_le_bytes());
    h.update(inv.as_bytes());
    if let Some(m) = mock_bytes {
        h.update(m);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg: HarnessConfig = serde_json::from_str("{}").unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.eval.temperature, 0.5);
        assert_eq!(cfg.eval.eval_ratio, EvalRatio::INDUSTRY);
        assert_eq!(cfg.rf.n_trees, 200);
        assert_eq!(cfg.training.learning_rate, 1.0e-4);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(serde_json::from_str::<HarnessConfig>(r#"{"evall": {}}"#).is_err());
        let cfg: HarnessConfig = serde_json::from_str(r#"{"eval": {"temperature": 2.5, "trials": 0}}"#).unwrap();
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("temperature") && msg.contains("trials"));
    }

    #[test]
    fn api_key_is_never_read_from_file() {
        let cfg: HarnessConfig =
            serde_json::from_str(r#"{"endpoint": {"base_url": "http://x", "model_name": "m", "api_key": "leak"}}"#)
                .unwrap();
        assert!(cfg.endpoint.api_key.is_none());
    }

    #[test]
    fn hash_tracks_bytes_and_invocation() {
        let inv = json!({"command": "eval"});
        let a = config_hash(b"{}", &inv, None);
        assert_eq!(a, config_hash(b"{}", &inv, None));
        assert_ne!(a, config_hash(b"{ }", &inv, None));
        assert_ne!(a, config_hash(b"{}", &json!({"command": "eval", "kb": "off"}), None));
        assert_ne!(a, config_hash(b"{}", &inv, Some(b"mock")));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn relative_paths_follow_config_dir() {
        let mut cfg = HarnessConfig::default();
        cfg.resolve(Path::new("/srv/run"));
        assert_eq!(cfg.paths.dataset, Path::new("/srv/run/data/trips.csv"));
    }
}
