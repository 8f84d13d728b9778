//! Output files and the per-run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    io_error, output_directory, run_experiment, CliError, ConfigError, Experiment, Outcome, OutputFormat, RunConfig,
};
use crate::Execution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputRecord {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Everything needed to repeat a run: the full config echo plus the
/// experiment, and hashes of what was written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub experiment: Experiment,
    pub config: RunConfig,
    pub config_sha256: String,
    pub input_path: Option<String>,
    pub input_sha256: Option<String>,
    pub workers: Option<u32>,
    pub started_at: String,
    pub finished_at: String,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputRecord>,
    pub summary: serde_json::Value,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(super) struct Written {
    pub outcome: Outcome,
    pub manifest: RunManifest,
}

fn write_file(dir: &Path, name: String, bytes: &[u8], records: &mut Vec<OutputRecord>) -> Result<(), CliError> {
    let path = dir.join(&name);
    std::fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
    eprintln!("wrote {}", path.display());
    records.push(OutputRecord { file: name, sha256: sha256_hex(bytes), bytes: bytes.len() });
    Ok(())
}

pub(super) fn execute(
    experiment: Experiment,
    config: &RunConfig,
    input: Option<(String, Vec<u8>)>,
    exec: Execution,
    workers: Option<u32>,
) -> Result<Written, CliError> {
    let started_at = chrono::Utc::now();
    let clock = Instant::now();
    let outcome = run_experiment(experiment, config, exec)?;

    let dir = output_directory(config);
    std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    let mut outputs = Vec::new();
    for (name, table) in &outcome.tables {
        for format in &config.output.formats {
            match format {
                OutputFormat::Csv => {
                    let bytes = table.to_csv().map_err(super::csv_err)?;
                    write_file(&dir, format!("{name}.csv"), &bytes, &mut outputs)?;
                }
                OutputFormat::Json => {
                    let bytes = serde_json::to_vec_pretty(table).expect("sweep serializes");
                    write_file(&dir, format!("{name}.json"), &bytes, &mut outputs)?;
                }
            }
        }
    }
    for (name, bytes) in &outcome.extra_csv {
        write_file(&dir, format!("{name}.csv"), bytes, &mut outputs)?;
    }

    let config_json = serde_json::to_vec(config).expect("config serializes");
    let (input_path, input_sha256) = match input {
        Some((p, bytes)) => (Some(p), Some(sha256_hex(&bytes))),
        None => (None, None),
    };
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment,
        config: config.clone(),
        config_sha256: sha256_hex(&config_json),
        input_path,
        input_sha256,
        workers,
        started_at: started_at.to_rfc3339(),
        finished_at: chrono::Utc::now().to_rfc3339(),
        wall_time_s: clock.elapsed().as_secs_f64(),
        outputs,
        summary: outcome.summary.clone(),
    };
    let path = manifest_path(&dir, experiment);
    let bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
    eprintln!("wrote {}", path.display());
    Ok(Written { outcome, manifest })
}

pub fn manifest_path(dir: &Path, experiment: Experiment) -> PathBuf {
    dir.join(format!("{}.manifest.json", experiment.name()))
}

/// Repeats the recorded run and compares output hashes with the manifest.
pub(super) fn rerun(path: &Path, exec: Execution, workers: Option<u32>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let recorded: RunManifest = serde_path_to_error::deserialize(de)
        .map_err(|e| ConfigError::Schema { path: e.path().to_string(), message: e.into_inner().to_string() })?;
    recorded.config.validate()?;
    let written = execute(recorded.experiment, &recorded.config, None, exec, workers)?;
    let mismatched: Vec<String> = recorded
        .outputs
        .iter()
        .filter(|old| !written.manifest.outputs.iter().any(|new| new.file == old.file && new.sha256 == old.sha256))
        .map(|old| old.file.clone())
        .collect();
    if !mismatched.is_empty() {
        return Err(CliError::Mismatch(mismatched));
    }
    println!("re-run reproduced {} output file(s) byte for byte", recorded.outputs.len());
    written.outcome.into_result()
}
