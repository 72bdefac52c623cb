//! Command implementations behind the `imbstream` binary.

pub mod experiment;
pub mod scenario;

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use imbstream::io::{read_stream, write_arff, write_csv, StreamFormat, StreamIoError};
use imbstream::labeler::{label_windows, write_type_csv, LabelError};
use imbstream::validate_config;
use thiserror::Error;

use crate::experiment::{materialize, write_atomic, Experiment};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Stream { path: PathBuf, source: StreamIoError },
    #[error("{0}")]
    Generate(String),
    #[error(transparent)]
    Label(#[from] LabelError),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }
}

fn single_stream(exp: &Experiment) -> Result<&imbstream::StreamConfig, CliError> {
    match exp.streams.as_slice() {
        [one] => Ok(one),
        many => Err(CliError::Config(format!("expected exactly one stream, found {}", many.len()))),
    }
}

/// Materializes the single stream of `exp` to `out` in the given format.
pub fn export_stream(exp: &Experiment, format: StreamFormat, out: &Path) -> Result<u64, CliError> {
    let cfg = validate_config(single_stream(exp)?).map_err(|e| CliError::Config(e.to_string()))?;
    let (stream, _) = materialize(&cfg, None)?;
    let names = cfg.class_names();
    write_atomic(out, |w| match format {
        StreamFormat::Csv => write_csv(w, &names, &stream),
        StreamFormat::Arff => write_arff(w, &cfg.id, &names, &stream),
    })?;
    Ok(stream.len() as u64)
}

/// Writes every stream of `exp` as `<id>.csv` under `out_dir`.
pub fn generate_streams(exp: &Experiment, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut written = Vec::new();
    for cfg in &exp.streams {
        let v = validate_config(cfg).map_err(|e| CliError::Config(format!("{}: {e}", cfg.id)))?;
        let (stream, _) = materialize(&v, None)?;
        let path = out_dir.join(format!("{}.csv", v.id));
        write_atomic(&path, |w| write_csv(w, &v.class_names(), &stream))?;
        written.push(path);
    }
    Ok(written)
}

/// Labels a stream file window by window and writes the type-distribution CSV.
pub fn label_stream(input: &Path, k: usize, window: usize, out: &Path) -> Result<usize, CliError> {
    let file = fs::File::open(input).map_err(|e| CliError::io(input, e))?;
    let data = read_stream(BufReader::new(file)).map_err(|source| CliError::Stream { path: input.to_path_buf(), source })?;
    let hist = label_windows(&data.examples, data.class_names.len(), k, window)?;
    write_atomic(out, |w| write_type_csv(w, &hist, &data.class_names))?;
    Ok(hist.len())
}
