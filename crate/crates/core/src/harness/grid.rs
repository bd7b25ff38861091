use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;

use super::config::{TrainConfig, HIDDEN_SIZES};
use super::evaluate::evaluate;
use super::experiment::{Experiment, Prepared};
use super::train::train;
use crate::autodiff::LossKind;
use crate::data::FeatureMode;
use crate::error::{Error, Result};
use crate::rnn::{save_checkpoint, CellKind};

pub const LEDGER_HEADER: [&str; 12] =
    ["model", "loss", "hidden", "normalized", "features", "seed", "mae", "rmse", "train_s", "predict_ms", "params", "status"];

/// Environment variable holding the worker-pool width.
pub const WORKERS_ENV: &str = "FLOWCAST_WORKERS";

/// Pool width from the environment, else the number of available cores.
pub fn workers_from_env() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub losses: Vec<LossKind>,
    pub sizes: Vec<usize>,
    pub normalize: Vec<bool>,
    pub seeds_per_config: usize,
    pub base_seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            losses: vec![LossKind::Mse, LossKind::Mae, LossKind::HUBER_DEFAULT],
            sizes: HIDDEN_SIZES.to_vec(),
            normalize: vec![true, false],
            seeds_per_config: 3,
            base_seed: 0,
        }
    }
}

impl GridSpec {
    /// Every run for one kind and feature mode, each exactly once.
    pub fn runs(&self, kind: CellKind, features: FeatureMode) -> Vec<RunKey> {
        let mut out = Vec::new();
        for &loss in &self.losses {
            for &hidden in &self.sizes {
                for &normalized in &self.normalize {
                    for rep in 0..self.seeds_per_config {
                        out.push(RunKey { kind, loss, hidden, normalized, features, seed: self.base_seed + rep as u64 });
                    }
                }
            }
        }
        out
    }
}

/// Identity of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunKey {
    pub kind: CellKind,
    pub loss: LossKind,
    pub hidden: usize,
    pub normalized: bool,
    pub features: FeatureMode,
    pub seed: u64,
}

impl RunKey {
    fn id(&self) -> (CellKind, &'static str, usize, bool, FeatureMode, u64) {
        (self.kind, self.loss.name(), self.hidden, self.normalized, self.features, self.seed)
    }

    /// File-name stem for this run's checkpoint.
    pub fn stem(&self) -> String {
        format!(
            "{}_{}_h{}_{}_{}_s{}",
            self.kind.id(),
            self.loss.name(),
            self.hidden,
            if self.normalized { "norm" } else { "raw" },
            self.features.id(),
            self.seed
        )
    }

    pub fn train_config(&self, template: &TrainConfig) -> TrainConfig {
        TrainConfig {
            loss: self.loss,
            hidden_size: self.hidden,
            normalize_visitors: self.normalized,
            use_external_features: self.features == FeatureMode::External,
            seed: self.seed,
            ..template.clone()
        }
    }
}

/// One ledger row. Failed runs carry NaN metrics and the error text.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub key: RunKey,
    pub mae: f64,
    pub rmse: f64,
    pub train_s: f64,
    pub predict_ms: f64,
    pub params: usize,
    pub status: String,
}

impl RunRecord {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }

    fn fields(&self) -> Vec<String> {
        let k = &self.key;
        vec![
            k.kind.id().into(),
            k.loss.name().into(),
            k.hidden.to_string(),
            k.normalized.to_string(),
            k.features.id().into(),
            k.seed.to_string(),
            self.mae.to_string(),
            self.rmse.to_string(),
            self.train_s.to_string(),
            self.predict_ms.to_string(),
            self.params.to_string(),
            self.status.clone(),
        ]
    }

    fn parse(r: &csv::StringRecord, line: u64, path: &str) -> Result<Self> {
        let bad = |msg: String| Error::Schema { path: path.into(), line, msg };
        let field = |i: usize| r.get(i).ok_or_else(|| bad(format!("missing column {}", LEDGER_HEADER[i])));
        fn num<V: std::str::FromStr>(s: &str, name: &str, bad: &dyn Fn(String) -> Error) -> Result<V> {
            s.parse().map_err(|_| bad(format!("bad {name} `{s}`")))
        }
        let kind = CellKind::parse(field(0)?).ok_or_else(|| bad(format!("unknown model `{}`", r.get(0).unwrap_or(""))))?;
        let loss = LossKind::parse(field(1)?).ok_or_else(|| bad("unknown loss".into()))?;
        let features = FeatureMode::parse(field(4)?).ok_or_else(|| bad("unknown feature mode".into()))?;
        Ok(Self {
            key: RunKey {
                kind,
                loss,
                hidden: num(field(2)?, "hidden", &bad)?,
                normalized: num(field(3)?, "normalized", &bad)?,
                features,
                seed: num(field(5)?, "seed", &bad)?,
            },
            mae: num(field(6)?, "mae", &bad)?,
            rmse: num(field(7)?, "rmse", &bad)?,
            train_s: num(field(8)?, "train_s", &bad)?,
            predict_ms: num(field(9)?, "predict_ms", &bad)?,
            params: num(field(10)?, "params", &bad)?,
            status: field(11)?.to_string(),
        })
    }
}

/// Reads every row of a ledger file.
pub fn read_ledger(path: &Path) -> Result<Vec<RunRecord>> {
    let name = path.display().to_string();
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != LEDGER_HEADER {
        return Err(Error::Schema { path: name, line: 1, msg: format!("expected header {}", LEDGER_HEADER.join(",")) });
    }
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        out.push(RunRecord::parse(&rec?, i as u64 + 2, &name)?);
    }
    Ok(out)
}

/// Append-only run ledger; rows are flushed as soon as they are written.
pub struct Ledger {
    path: PathBuf,
    records: Vec<RunRecord>,
    out: Mutex<BufWriter<File>>,
}

impl Ledger {
    /// Opens `path`, loading earlier rows, or creates it with a header.
    pub fn open(path: &Path) -> Result<Self> {
        let records = if path.exists() { read_ledger(path)? } else { Vec::new() };
        let fresh = !path.exists();
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut out = BufWriter::new(file);
        if fresh {
            writeln!(out, "{}", LEDGER_HEADER.join(","))?;
            out.flush()?;
        }
        Ok(Self { path: path.to_path_buf(), records, out: Mutex::new(out) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Rows present when the ledger was opened.
    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    pub fn append(&self, rec: &RunRecord) -> Result<()> {
        let mut line = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        line.write_record(rec.fields())?;
        let bytes = line.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
        let mut out = self.out.lock().expect("ledger lock");
        out.write_all(&bytes)?;
        out.flush()?;
        Ok(())
    }
}

/// Trains and evaluates one grid cell. Failures become ledger rows.
pub fn run_cell(key: &RunKey, data: &Prepared, template: &TrainConfig, checkpoint_dir: Option<&Path>) -> RunRecord {
    let cfg = key.train_config(template);
    let attempt = || -> Result<RunRecord> {
        let train_set = data.train_set()?;
        let test_set = data.test_set()?;
        let outcome = train(key.kind, &train_set, &cfg)?;
        let eval = evaluate(&outcome.model, &test_set)?;
        if let Some(dir) = checkpoint_dir {
            save_checkpoint(&dir.join(format!("{}.ckpt", key.stem())), &outcome.model)?;
        }
        Ok(RunRecord {
            key: *key,
            mae: eval.errors.mae,
            rmse: eval.errors.rmse,
            train_s: outcome.elapsed.as_secs_f64(),
            predict_ms: eval.predict_ms,
            params: outcome.model.param_count(),
            status: "ok".into(),
        })
    };
    attempt().unwrap_or_else(|e| RunRecord {
        key: *key,
        mae: f64::NAN,
        rmse: f64::NAN,
        train_s: 0.0,
        predict_ms: 0.0,
        params: 0,
        status: format!("failed: {e}").replace(['\n', ','], " "),
    })
}

#[derive(Debug, Clone)]
pub struct GridOptions {
    /// Shared settings; loss, size, normalization, features and seed come
    /// from each run key.
    pub template: TrainConfig,
    pub workers: usize,
    pub checkpoint_dir: Option<PathBuf>,
}

/// Lowest-RMSE successful run among `records` matching `keys`.
pub fn best_run<'a>(records: impl IntoIterator<Item = &'a RunRecord>, keys: &[RunKey]) -> Option<&'a RunRecord> {
    let wanted: HashSet<_> = keys.iter().map(RunKey::id).collect();
    records
        .into_iter()
        .filter(|r| r.ok() && wanted.contains(&r.key.id()))
        .min_by(|a, b| a.rmse.total_cmp(&b.rmse))
}

/// Runs every grid cell for `kind` that the ledger does not hold yet and
/// returns the run with the lowest test RMSE.
pub fn grid_search(
    kind: CellKind,
    features: FeatureMode,
    exp: &Experiment,
    spec: &GridSpec,
    ledger: &Ledger,
    opts: &GridOptions,
) -> Result<RunRecord> {
    let keys = spec.runs(kind, features);
    let done: HashSet<_> = ledger.records().iter().map(|r| r.key.id()).collect();
    let pending: Vec<RunKey> = keys.iter().filter(|k| !done.contains(&k.id())).copied().collect();
    let mut fresh = Vec::new();
    if !pending.is_empty() {
        let mut frames = Vec::new();
        for &norm in &spec.normalize {
            if pending.iter().any(|k| k.normalized == norm) {
                frames.push((norm, exp.prepare(features, norm)?));
            }
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers.max(1))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        let results: Vec<Result<RunRecord>> = pool.install(|| {
            pending
                .par_iter()
                .map(|key| {
                    let data = &frames.iter().find(|(n, _)| *n == key.normalized).expect("frame prepared").1;
                    let rec = run_cell(key, data, &opts.template, opts.checkpoint_dir.as_deref());
                    ledger.append(&rec)?;
                    log::info!("{} rmse={} status={}", key.stem(), rec.rmse, rec.status);
                    Ok(rec)
                })
                .collect()
        });
        for r in results {
            fresh.push(r?);
        }
    }
    best_run(ledger.records().iter().chain(&fresh), &keys).cloned().ok_or(Error::AllRunsFailed)
}
