//! The stream × classifier grid: stream materialization (with an optional
//! on-disk cache), prequential runs in a worker pool, and result files.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use imbstream::classifier::{Classifier, ClassifierKind};
use imbstream::eval::{
    self, prequential_run, write_results_header, write_results_rows, write_snapshot_row, SnapshotPoints, Snapshots,
    DEFAULT_EVAL_WINDOW, DEFAULT_WARMUP,
};
use imbstream::io::{read_csv, write_csv};
use imbstream::{collect_stream, validate_config, GeometryParams, LabeledExample, StreamConfig, ValidatedConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::scenario::scenario_config;
use crate::CliError;

pub const CACHE_ENV: &str = "IMBSTREAM_CACHE_DIR";
pub const DEFAULT_SEED: u64 = 1;

/// A stream in an experiment file: a scenario identifier or a full configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StreamEntry {
    Id(String),
    Config(Box<StreamConfig>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    #[serde(default)]
    pub description: Option<String>,
    pub streams: Vec<StreamEntry>,
    #[serde(default)]
    pub classifiers: Option<Vec<ClassifierKind>>,
    #[serde(default)]
    pub window: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Geometry applied to streams given by identifier.
    #[serde(default)]
    pub geometry: Option<GeometryParams>,
}

/// Streams plus file-level defaults loaded from `--config`.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub streams: Vec<StreamConfig>,
    pub classifiers: Option<Vec<ClassifierKind>>,
    pub window: Option<usize>,
}

impl Experiment {
    /// Parses an experiment file or a single stream configuration.
    /// `seed` replaces every stream's seed when given.
    pub fn from_json(text: &str, seed: Option<u64>) -> Result<Self, CliError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let file: ExperimentFile = if value.get("streams").is_some() {
            serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?
        } else {
            let cfg: StreamConfig = serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))?;
            ExperimentFile { streams: vec![StreamEntry::Config(Box::new(cfg))], ..Default::default() }
        };
        let default_seed = seed.or(file.seed).unwrap_or(DEFAULT_SEED);
        let mut streams = Vec::new();
        for entry in file.streams {
            let mut cfg = match entry {
                StreamEntry::Id(id) => {
                    let mut cfg = scenario_config(&id, default_seed).map_err(|e| CliError::Config(e.to_string()))?;
                    if let Some(g) = &file.geometry {
                        cfg.geometry = g.clone();
                    }
                    cfg
                }
                StreamEntry::Config(c) => *c,
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            streams.push(cfg);
        }
        Ok(Self { streams, classifiers: file.classifiers, window: file.window })
    }

    pub fn load(path: &Path, seed: Option<u64>) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text, seed).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_scenarios(ids: &[String], seed: Option<u64>) -> Result<Self, CliError> {
        let streams = ids
            .iter()
            .map(|id| scenario_config(id, seed.unwrap_or(DEFAULT_SEED)).map_err(|e| CliError::Config(e.to_string())))
            .collect::<Result<_, _>>()?;
        Ok(Self { streams, classifiers: None, window: None })
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub classifiers: Vec<ClassifierKind>,
    pub window: usize,
    pub jobs: Option<usize>,
    pub cache_dir: Option<PathBuf>,
    /// Prints one line per finished cell to stderr.
    pub verbose: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            classifiers: ClassifierKind::ALL.to_vec(),
            window: DEFAULT_EVAL_WINDOW,
            jobs: None,
            cache_dir: std::env::var_os(CACHE_ENV).map(PathBuf::from),
            verbose: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellRecord {
    pub stream_id: String,
    pub classifier: ClassifierKind,
    pub stream_seed: u64,
    pub classifier_seed: u64,
    pub status: CellStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub seconds: f64,
    pub examples: u64,
    /// Mean windowed G-mean after the warm-up.
    pub mean_gmean: Option<f64>,
    pub snapshots: Option<Snapshots>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StreamRecord {
    pub id: String,
    pub seed: u64,
    pub length: u64,
    pub config_hash: String,
    pub from_cache: bool,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Drift windows, for plotting.
    pub drift_windows: Vec<(u64, u64)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub window: usize,
    pub warmup: u64,
    pub jobs: usize,
    pub streams: Vec<StreamRecord>,
    pub cells: Vec<CellRecord>,
}

impl Manifest {
    pub fn all_ok(&self) -> bool {
        self.cells.iter().all(|c| c.status == CellStatus::Ok)
    }

    pub fn cell(&self, stream_id: &str, classifier: ClassifierKind) -> Option<&CellRecord> {
        self.cells.iter().find(|c| c.stream_id == stream_id && c.classifier == classifier)
    }
}

/// In-memory outcome of a grid run.
pub struct GridOutput {
    pub manifest: Manifest,
    pub series: BTreeMap<(String, ClassifierKind), eval::EvalSeries>,
    pub n_classes: BTreeMap<String, usize>,
}

pub fn config_hash(cfg: &ValidatedConfig) -> String {
    let mut h = Sha256::new();
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    h.update(serde_json::to_vec(cfg).expect("config serializes"));
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Seed for a classifier's own random streams, derived from the stream seed.
pub fn classifier_seed(stream_seed: u64, kind: ClassifierKind) -> u64 {
    let k = ClassifierKind::ALL.iter().position(|c| *c == kind).expect("known kind") as u64;
    stream_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k + 1)
}

/// Writes `path` atomically through a temporary sibling.
pub fn write_atomic(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let file = fs::File::create(&tmp)?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush()?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    Ok(())
}

/// Materializes a stream, reading or filling the cache when `cache_dir` is set.
pub fn materialize(cfg: &ValidatedConfig, cache_dir: Option<&Path>) -> Result<(Vec<LabeledExample>, bool), CliError> {
    let names = cfg.class_names();
    let cached = cache_dir.map(|d| d.join(format!("{}.csv", config_hash(cfg))));
    if let Some(path) = cached.as_ref().filter(|p| p.exists()) {
        let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        if let Ok(data) = read_csv(BufReader::new(file), Some(&names)) {
            if data.examples.len() as u64 == cfg.length() {
                return Ok((data.examples, true));
            }
        }
    }
    let stream = collect_stream(cfg).map_err(|e| CliError::Generate(format!("{}: {e}", cfg.id)))?;
    if let Some(path) = cached {
        write_atomic(&path, |w| write_csv(w, &names, &stream))?;
    }
    Ok((stream, false))
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "panic".into())
}

/// Runs every (stream, classifier) cell. Invalid configurations fail their cells only.
pub fn run_grid(streams: &[StreamConfig], opts: &RunOptions) -> Result<GridOutput, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let jobs = pool.current_num_threads();
    let window = opts.window.max(1);

    pool.install(|| {
        let materialized: Vec<(StreamRecord, Result<(Arc<Vec<LabeledExample>>, usize), String>)> = streams
            .par_iter()
            .map(|cfg| {
                let start = Instant::now();
                let mut record = StreamRecord {
                    id: cfg.id.clone(),
                    seed: cfg.seed,
                    length: cfg.length.unwrap_or(0),
                    config_hash: String::new(),
                    from_cache: false,
                    seconds: 0.0,
                    error: None,
                    drift_windows: cfg.drifts.iter().map(|d| (d.t_start, d.t_end)).collect(),
                };
                let result = match validate_config(cfg) {
                    Err(e) => Err(format!("invalid config: {e}")),
                    Ok(v) => {
                        record.length = v.length();
                        record.config_hash = config_hash(&v);
                        match materialize(&v, opts.cache_dir.as_deref()) {
                            Ok((s, hit)) => {
                                record.from_cache = hit;
                                Ok((Arc::new(s), v.n_classes()))
                            }
                            Err(e) => Err(e.to_string()),
                        }
                    }
                };
                record.seconds = start.elapsed().as_secs_f64();
                record.error = result.as_ref().err().cloned();
                (record, result)
            })
            .collect();

        let mut jobs_list = Vec::new();
        for (si, (_, r)) in materialized.iter().enumerate() {
            for &kind in &opts.classifiers {
                jobs_list.push((si, kind, r.as_ref().ok().cloned()));
            }
        }
        let results: Vec<(CellRecord, Option<eval::EvalSeries>)> = jobs_list
            .into_par_iter()
            .map(|(si, kind, data)| {
                let cfg = &streams[si];
                let seed = classifier_seed(cfg.seed, kind);
                let mut rec = CellRecord {
                    stream_id: cfg.id.clone(),
                    classifier: kind,
                    stream_seed: cfg.seed,
                    classifier_seed: seed,
                    status: CellStatus::Failed,
                    error: None,
                    seconds: 0.0,
                    examples: 0,
                    mean_gmean: None,
                    snapshots: None,
                };
                let Some((stream, n_classes)) = data else {
                    rec.error = materialized[si].0.error.clone();
                    return (rec, None);
                };
                let start = Instant::now();
                let outcome = panic::catch_unwind(AssertUnwindSafe(|| {
                    let mut clf = Classifier::new(kind, n_classes, seed);
                    prequential_run(stream.iter().cloned(), &mut clf, n_classes, window)
                }));
                rec.seconds = start.elapsed().as_secs_f64();
                match outcome {
                    Ok(series) => {
                        rec.status = CellStatus::Ok;
                        rec.examples = series.examples;
                        let m = series.mean_gmean(DEFAULT_WARMUP);
                        rec.mean_gmean = m.is_finite().then_some(m);
                        rec.snapshots = Some(series.snapshots(SnapshotPoints::default()));
                        if opts.verbose {
                            eprintln!(
                                "{:<36} {:<5} mean {:.4} ({:.1}s)",
                                rec.stream_id,
                                kind.as_str(),
                                rec.mean_gmean.unwrap_or(f64::NAN),
                                rec.seconds
                            );
                        }
                        (rec, Some(series))
                    }
                    Err(p) => {
                        rec.error = Some(panic_message(p));
                        (rec, None)
                    }
                }
            })
            .collect();

        let mut series = BTreeMap::new();
        let mut cells = Vec::new();
        for (rec, s) in results {
            if let Some(s) = s {
                series.insert((rec.stream_id.clone(), rec.classifier), s);
            }
            cells.push(rec);
        }
        let n_classes = materialized
            .iter()
            .filter_map(|(rec, r)| r.as_ref().ok().map(|(_, n)| (rec.id.clone(), *n)))
            .collect();
        Ok(GridOutput {
            manifest: Manifest {
                tool: "imbstream".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                window,
                warmup: DEFAULT_WARMUP,
                jobs,
                streams: materialized.into_iter().map(|(r, _)| r).collect(),
                cells,
            },
            series,
            n_classes,
        })
    })
}

fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect()
}

/// Writes `results/<stream>.csv`, `snapshots.csv` and `manifest.json` under `out`.
pub fn write_outputs(out: &Path, grid: &GridOutput) -> Result<(), CliError> {
    for rec in &grid.manifest.streams {
        let Some(&n) = grid.n_classes.get(&rec.id) else { continue };
        let cells: Vec<_> = grid.series.iter().filter(|((s, _), _)| *s == rec.id).collect();
        if cells.is_empty() {
            continue;
        }
        let path = out.join("results").join(format!("{}.csv", file_stem(&rec.id)));
        write_atomic(&path, |w| {
            write_results_header(w, n)?;
            for ((_, kind), s) in &cells {
                write_results_rows(w, s, kind.as_str(), &rec.id)?;
            }
            Ok(())
        })?;
    }
    write_atomic(&out.join("snapshots.csv"), |w| {
        writeln!(w, "{}", eval::SNAPSHOT_HEADER)?;
        for c in &grid.manifest.cells {
            if let Some(s) = &c.snapshots {
                write_snapshot_row(w, &c.stream_id, c.classifier.as_str(), s)?;
            }
        }
        Ok(())
    })?;
    write_atomic(&out.join("manifest.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &grid.manifest)?;
        writeln!(w)
    })
}

/// Runs the grid and writes all outputs; returns the manifest.
pub fn run_experiment(exp: &Experiment, out: &Path, opts: &RunOptions) -> Result<Manifest, CliError> {
    let grid = run_grid(&exp.streams, opts)?;
    write_outputs(out, &grid)?;
    Ok(grid.manifest)
}
