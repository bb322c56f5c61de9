use std::io::BufWriter;

use lift_core::catalog::catalog;
use lift_core::dataset::{smote_balance, split};
use lift_core::textualize::{export_sft, KnowledgeMode, PromptRenderer};

use super::{say, write_file, Context};
use crate::error::CliError;

pub fn run(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let ds = ctx.dataset()?;
    let kb = ctx.knowledge_base()?;
    let renderer = PromptRenderer::new(&kb, catalog(), KnowledgeMode::Full)?;
    let (train, _) = split(&ds, cfg.eval.train_fraction, ctx.seed)?;
    let balanced = smote_balance(&train, cfg.smote.k_neighbors, ctx.seed)?;

    let path = &cfg.paths.sft_out;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let n = export_sft(&renderer, balanced.records(), BufWriter::new(file))?;

    let training = serde_json::to_string_pretty(&cfg.training).expect("training config serializes") + "\n";
    write_file(&cfg.paths.training_config_out, training.as_bytes())?;
    say(format!(
        "wrote {n} examples ({} risky after oversampling, {} from the split) to {}",
        balanced.positive_count(),
        train.len(),
        path.display()
    ));
    say(format!(
        "training config written to {}",
        cfg.paths.training_config_out.display()
    ));
    Ok(())
}
