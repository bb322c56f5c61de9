use lift_core::catalog::catalog;
use lift_core::litpipe::{aggregate_kb, ingest_markdown, screen_corpus};

use super::{say, write_file, write_jsonl, Context};
use crate::error::CliError;

pub fn run(ctx: &Context) -> Result<(), CliError> {
    let paths = &ctx.cfg.paths;
    let ingested = ingest_markdown(&paths.corpus_dir)?;
    for (path, why) in &ingested.failures {
        log::warn!("skipped {}: {why}", path.display());
    }
    if ingested.docs.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: no readable markdown papers",
            paths.corpus_dir.display()
        )));
    }
    let llm = ctx.client(None)?;
    let summaries = screen_corpus(&ingested.docs, &llm, &ctx.cfg.screening)?;
    write_jsonl(&paths.screening_out, &summaries)?;
    let relevant = summaries.iter().filter(|s| s.relevant).count();
    let failed = summaries.iter().filter(|s| s.parse_failed).count();
    say(format!(
        "screened {} papers: {relevant} relevant, {failed} unparseable",
        summaries.len()
    ));

    let kb = aggregate_kb(&summaries, catalog(), &llm, &ctx.cfg.aggregation)?;
    write_file(&paths.kb, kb.to_json().as_bytes())?;
    say(format!(
        "knowledge base with {} variables written to {}",
        kb.variables.len(),
        paths.kb.display()
    ));
    Ok(())
}
