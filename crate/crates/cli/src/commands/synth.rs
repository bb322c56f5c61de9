use std::path::PathBuf;

use lift_core::dataset::{synthesize, write_csv, SynthesisSpec};

use super::{say, write_file, Context};
use crate::error::CliError;

pub fn run(ctx: &Context, n: Option<u64>, out: Option<PathBuf>) -> Result<(), CliError> {
    let n = n.map_or(ctx.cfg.synthesis.n, |n| n as usize);
    if n == 0 {
        return Err(CliError::Usage("synthesis size must be at least 1".into()));
    }
    let spec = match &ctx.cfg.synthesis.spec {
        Some(path) => SynthesisSpec::from_json_file(path)?,
        None => SynthesisSpec::default(),
    };
    let ds = synthesize(&spec, n, ctx.seed)?;
    let mut buf = Vec::new();
    write_csv(&ds, &mut buf)?;
    let out = out.unwrap_or_else(|| ctx.cfg.paths.dataset.clone());
    write_file(&out, &buf)?;
    say(format!(
        "wrote {} trips ({} risky, {} non-risky) to {}",
        ds.len(),
        ds.positive_count(),
        ds.negative_count(),
        out.display()
    ));
    Ok(())
}
