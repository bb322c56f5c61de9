//! Fine-tuning settings handed to the external adapter trainer alongside the
//! SFT corpus.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoraSettings {
    pub rank: u32,
    pub alpha: f64,
    pub dropout: f64,
    pub target_modules: Vec<String>,
}

impl Default for LoraSettings {
    fn default() -> Self {
        Self {
            rank: 8,
            alpha: 16.0,
            dropout: 0.0,
            target_modules: ["q_proj", "k_proj", "v_proj", "o_proj"].map(String::from).to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub base_model: String,
    pub precision: String,
    pub per_device_train_batch_size: u32,
    pub gradient_accumulation_steps: u32,
    pub learning_rate: f64,
    pub num_train_epochs: f64,
    pub lr_scheduler_type: String,
    pub warmup_ratio: f64,
    pub max_seq_length: u32,
    pub seed: u64,
    pub lora: LoraSettings,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            base_model: "Qwen2.5-7B-Instruct".into(),
            precision: "bf16".into(),
            per_device_train_batch_size: 1,
            gradient_accumulation_steps: 8,
            learning_rate: 1.0e-4,
            num_train_epochs: 3.0,
            lr_scheduler_type: "cosine".into(),
            warmup_ratio: 0.1,
            max_seq_length: 4096,
            seed: 42,
            lora: LoraSettings::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), String> {
        let mut problems = Vec::new();
        if self.lora.rank == 0 {
            problems.push("lora.rank must be >= 1");
        }
        if !(self.lora.alpha > 0.0 && self.lora.alpha.is_finite()) {
            problems.push("lora.alpha must be > 0");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push("learning_rate must be > 0");
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            problems.push("warmup_ratio must lie in [0, 1)");
        }
        if self.per_device_train_batch_size == 0 || self.gradient_accumulation_steps == 0 {
            problems.push("batch size and gradient accumulation must be >= 1");
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems.join("; "))
        }
    }
}
