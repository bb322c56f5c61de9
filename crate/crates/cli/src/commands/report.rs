use std::path::PathBuf;

use super::Context;
use crate::error::CliError;
use crate::report::{comparison_table, RunReport};

pub fn run(ctx: &Context, paths: Vec<PathBuf>) -> Result<(), CliError> {
    let paths = if paths.is_empty() {
        vec![ctx.cfg.paths.report_out.clone()]
    } else {
        paths
    };
    let reports = paths
        .iter()
        .map(|p| RunReport::load(p))
        .collect::<Result<Vec<_>, _>>()?;
    match reports.as_slice() {
        [one] => print!("{}", one.summary()),
        many => print!("{}", comparison_table(many)),
    }
    Ok(())
}
