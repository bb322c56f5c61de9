use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use lift_core::dataset::{load_csv, Dataset};
use lift_core::litpipe::KnowledgeBase;
use lift_core::llmclient::{ChatClient, MockScript};

use crate::args::{Cli, Command};
use crate::config::{config_hash, HarnessConfig, API_KEY_ENV};
use crate::error::CliError;

mod build_kb;
mod eval;
mod export_sft;
mod report;
mod stability;
mod synth;

/// Everything a command needs besides its own arguments.
pub struct Context {
    pub cfg: HarnessConfig,
    pub seed: u64,
    pub config_hash: String,
    mock: Option<MockScript>,
}

impl Context {
    pub fn new(cli: &Cli) -> Result<Self, CliError> {
        let (cfg, bytes) = if cli.config.exists() || cli.config != Path::new("lift.json") {
            HarnessConfig::load(&cli.config)?
        } else {
            log::info!("no {} found, using built-in defaults", cli.config.display());
            (HarnessConfig::default(), Vec::new())
        };
        let seed = cli.seed.unwrap_or(cfg.seed);
        let (mock, mock_bytes) = match &cli.mock {
            Some(path) => {
                let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
                let script: MockScript = serde_json::from_slice(&bytes)
                    .map_err(|e| CliError::Validation(format!("mock script {}: {e}", path.display())))?;
                (Some(script), Some(bytes))
            }
            None => (None, None),
        };
        let invocation = json!({"seed": seed, "invocation": &cli.command});
        let config_hash = config_hash(&bytes, &invocation, mock_bytes.as_deref());
        Ok(Self {
            cfg,
            seed,
            config_hash,
            mock,
        })
    }

    /// Client for the configured endpoint, or for `model` on the same endpoint.
    pub fn client(&self, model: Option<&str>) -> Result<ChatClient, CliError> {
        let mut endpoint = self.cfg.endpoint.clone();
        if let Some(m) = model {
            endpoint.model_name = m.to_string();
        }
        match &self.mock {
            Some(script) => Ok(ChatClient::mock(script.clone(), &endpoint)?.0),
            None => {
                endpoint.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
                Ok(ChatClient::http(&endpoint)?)
            }
        }
    }

    pub fn dataset(&self) -> Result<Dataset, CliError> {
        let path = &self.cfg.paths.dataset;
        if !path.exists() {
            return Err(CliError::Io(format!(
                "{}: dataset not found (run `lift synth` first or set paths.dataset)",
                path.display()
            )));
        }
        Ok(load_csv(path)?)
    }

    pub fn knowledge_base(&self) -> Result<KnowledgeBase, CliError> {
        let path = &self.cfg.paths.kb;
        KnowledgeBase::from_json_file(path).map_err(|e| CliError::io(path, e))
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Context::new(&cli)?;
    match cli.command {
        Command::Synth { n, out } => synth::run(&ctx, n, out),
        Command::BuildKb => build_kb::run(&ctx),
        Command::ExportSft => export_sft::run(&ctx),
        Command::Eval { task } => eval::run(&ctx, task, None),
        Command::Ablate { kb, adapter, task } => eval::run(&ctx, task, Some((kb, adapter))),
        Command::Stability { temps, resamples } => stability::run(&ctx, &temps, resamples),
        Command::Report { paths } => report::run(&ctx, paths),
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut buf = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut buf, row).expect("log rows serialize");
        buf.push(b'\n');
    }
    write_file(path, &buf)
}

/// `out/report.json` with suffix `x` becomes `out/report-x.json`.
pub fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("json");
    path.with_file_name(format!("{stem}-{suffix}.{ext}"))
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn say(line: impl AsRef<str>) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", line.as_ref());
}
