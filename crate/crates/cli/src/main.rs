mod dataset;
mod report;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use flowcast::arima::{ArimaOrder, UpdatePolicy};
use flowcast::autodiff::LossKind;
use flowcast::data::records::parse_timestamp;
use flowcast::data::{FeatureMode, SynthConfig};
use flowcast::harness::compare::ArimaSummary;
use flowcast::harness::*;
use flowcast::rnn::{load_checkpoint, save_checkpoint, CellKind, Model};

use dataset::{load_dataset, write_dataset};
use report::{prediction_rows, read_predictions, render_svg, select_series, write_predictions, PredictionRow};

/// Invalid flags, inputs or missing prerequisites (exit code 2).
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Parser)]
#[command(name = "flowcast", version, about = "Hourly visitor-flow forecasting benchmark")]
struct Cli {
    /// Dataset directory (entries, weather, holidays, manifest).
    #[arg(long, global = true, default_value = "data")]
    data: PathBuf,
    /// Directory for models, ledgers and reports.
    #[arg(long, global = true, default_value = "runs")]
    out: PathBuf,
    /// Flat key=value file overriding defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overwrite existing artifacts.
    #[arg(long, global = true)]
    force: bool,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset into --data.
    Synth {
        /// Inclusive year span, e.g. 2017:2019.
        #[arg(long, default_value = "2017:2019")]
        years: String,
        #[arg(long, default_value_t = 32)]
        pois: usize,
    },
    /// Build the feature matrix and cache it as CSV.
    Ingest {
        #[arg(long, default_value = "visitors")]
        features: String,
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        normalize: bool,
    },
    /// Select and fit one ARIMA model per POI on the training years.
    FitArima,
    /// Train and evaluate one recurrent model.
    Train {
        #[arg(long)]
        model: String,
    },
    /// Run the hyperparameter grid; resumes from the ledger unless --force.
    Grid {
        /// Comma-separated model ids, or `all`.
        #[arg(long, default_value = "all")]
        models: String,
        /// Comma-separated feature modes.
        #[arg(long, default_value = "visitors,external")]
        features: String,
    },
    /// Write the comparison table and the predictions of every model.
    Compare,
    /// Plot truth and predictions for one POI as SVG.
    Plot {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        poi: String,
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
        #[arg(long = "svg")]
        svg: PathBuf,
    },
}

/// Settings read from --config.
#[derive(Debug, Clone)]
struct Settings {
    train: TrainConfig,
    grid: GridSpec,
    test_year: Option<i32>,
    synth: Vec<(String, f64)>,
    arima_latency_steps: usize,
}

fn list<T>(v: &str, f: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    v.split(',').map(|s| f(s.trim())).collect()
}

fn load_settings(path: Option<&Path>, seed: u64) -> Result<Settings> {
    let mut s = Settings {
        train: TrainConfig { seed, ..TrainConfig::default() },
        grid: GridSpec { base_seed: seed, ..GridSpec::default() },
        test_year: None,
        synth: Vec::new(),
        arima_latency_steps: 24,
    };
    let Some(path) = path else { return Ok(s) };
    let text = std::fs::read_to_string(path).map_err(|e| Usage(format!("cannot read config {}: {e}", path.display())))?;
    let kv = parse_key_values(&text).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
    for (k, v) in kv {
        let bad = || Usage(format!("{}: bad value for {k}: {v}", path.display()));
        match k.as_str() {
            "test_year" => s.test_year = Some(v.parse().map_err(|_| bad())?),
            "arima_latency_steps" => s.arima_latency_steps = v.parse().map_err(|_| bad())?,
            "grid_losses" => s.grid.losses = list(&v, LossKind::parse).ok_or_else(bad)?,
            "grid_sizes" => s.grid.sizes = list(&v, |x| x.parse().ok()).ok_or_else(bad)?,
            "grid_normalize" => s.grid.normalize = list(&v, |x| x.parse().ok()).ok_or_else(bad)?,
            "grid_seeds" => s.grid.seeds_per_config = v.parse().map_err(|_| bad())?,
            "weather_effect" | "national_factor" | "school_factor" => {
                s.synth.push((k.clone(), v.parse().map_err(|_| bad())?))
            }
            _ => s.train.set(&k, &v).map_err(|e| Usage(format!("{}: {e}", path.display())))?,
        }
    }
    s.train.validate().map_err(|e| Usage(e.to_string()))?;
    Ok(s)
}

/// Refuses to overwrite unless --force.
fn guard(force: bool, paths: &[PathBuf]) -> Result<()> {
    if !force {
        if let Some(p) = paths.iter().find(|p| p.exists()) {
            return Err(Usage(format!("{} exists; pass --force to overwrite", p.display())).into());
        }
    }
    Ok(())
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

fn parse_kinds(s: &str) -> Result<Vec<CellKind>> {
    if s == "all" {
        return Ok(CellKind::TABLE_ORDER.to_vec());
    }
    list(s, CellKind::parse).ok_or_else(|| Usage(format!("unknown model in `{s}`")).into())
}

fn parse_modes(s: &str) -> Result<Vec<FeatureMode>> {
    list(s, FeatureMode::parse).ok_or_else(|| Usage(format!("unknown feature mode in `{s}`")).into())
}

fn save_predictions(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    write_predictions(BufWriter::new(File::create(path)?), rows)?;
    announce(path);
    Ok(())
}

const ORDERS_FILE: &str = "arima_orders.csv";
const LEDGER_FILE: &str = "ledger.csv";

fn run(cli: Cli) -> Result<()> {
    let settings = load_settings(cli.config.as_deref(), cli.seed)?;
    let window = settings.train.sequence_length;
    match cli.command {
        Command::Synth { years, pois } => {
            let (a, b) = years
                .split_once(':')
                .and_then(|(a, b)| Some((a.parse::<i32>().ok()?, b.parse::<i32>().ok()?)))
                .ok_or_else(|| Usage(format!("--years expects FIRST:LAST, got `{years}`")))?;
            let mut cfg = SynthConfig::new(a, b, pois, cli.seed);
            for (k, v) in &settings.synth {
                match k.as_str() {
                    "weather_effect" => cfg.weather_effect = *v,
                    "national_factor" => cfg.national_factor = *v,
                    _ => cfg.school_factor = *v,
                }
            }
            cfg.validate().map_err(|e| Usage(e.to_string()))?;
            guard(cli.force, &dataset::files(&cli.data))?;
            for p in write_dataset(&cli.data, &cfg)? {
                announce(&p);
            }
        }
        Command::Ingest { features, normalize } => {
            let mode = FeatureMode::parse(&features).ok_or_else(|| Usage(format!("unknown feature mode `{features}`")))?;
            let path = cli.out.join(format!("features_{}_{}.csv", mode.id(), if normalize { "norm" } else { "raw" }));
            guard(cli.force, std::slice::from_ref(&path))?;
            let exp = load_dataset(&cli.data)?.experiment(settings.test_year, window)?;
            let prepared = exp.prepare(mode, normalize)?;
            std::fs::create_dir_all(&cli.out)?;
            let mut w = csv::Writer::from_path(&path)?;
            let frame = &prepared.frame;
            let mut header = vec!["timestamp".to_string()];
            header.extend(frame.columns.iter().cloned());
            w.write_record(&header)?;
            for t in 0..frame.n_rows() {
                let mut rec = vec![flowcast::data::records::format_timestamp(&frame.timestamps[t])];
                rec.extend(frame.row(t).iter().map(|v| v.to_string()));
                w.write_record(&rec)?;
            }
            w.flush()?;
            announce(&path);
        }
        Command::FitArima => {
            let path = cli.out.join(ORDERS_FILE);
            guard(cli.force, std::slice::from_ref(&path))?;
            let exp = load_dataset(&cli.data)?.experiment(settings.test_year, window)?;
            let fits = fit_per_poi(&exp.panel, exp.train_rows.clone())?;
            std::fs::create_dir_all(&cli.out)?;
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["poi", "p", "d", "q", "c", "phi", "theta", "sigma2", "aic", "loglik", "converged"])?;
            let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
            for f in &fits {
                w.write_record([
                    exp.panel.poi_names[f.poi].clone(),
                    f.order.p.to_string(),
                    f.order.d.to_string(),
                    f.order.q.to_string(),
                    f.model.c.to_string(),
                    join(&f.model.phi),
                    join(&f.model.theta),
                    f.model.sigma2.to_string(),
                    f.report.aic.to_string(),
                    f.report.loglik.to_string(),
                    f.report.converged.to_string(),
                ])?;
            }
            w.flush()?;
            announce(&path);
        }
        Command::Train { model } => {
            let kind = CellKind::parse(&model).ok_or_else(|| Usage(format!("unknown model `{model}`")))?;
            let cfg = settings.train.clone();
            let key = RunKey {
                kind,
                loss: cfg.loss,
                hidden: cfg.hidden_size,
                normalized: cfg.normalize_visitors,
                features: cfg.features(),
                seed: cfg.seed,
            };
            let ckpt_dir = cli.out.join("checkpoints");
            let ckpt = ckpt_dir.join(format!("{}.ckpt", key.stem()));
            let preds_path = cli.out.join(format!("predictions_{}.csv", key.stem()));
            guard(cli.force, &[ckpt.clone(), preds_path.clone()])?;
            let exp = load_dataset(&cli.data)?.experiment(settings.test_year, window)?;
            let prepared = exp.prepare(key.features, key.normalized)?;
            let outcome = train(kind, &prepared.train_set()?, &cfg)?;
            let eval = evaluate(&outcome.model, &prepared.test_set()?)?;
            std::fs::create_dir_all(&ckpt_dir)?;
            save_checkpoint(&ckpt, &outcome.model)?;
            announce(&ckpt);
            let ledger = Ledger::open(&cli.out.join(LEDGER_FILE))?;
            ledger.append(&RunRecord {
                key,
                mae: eval.errors.mae,
                rmse: eval.errors.rmse,
                train_s: outcome.elapsed.as_secs_f64(),
                predict_ms: eval.predict_ms,
                params: outcome.model.param_count(),
                status: "ok".into(),
            })?;
            announce(ledger.path());
            save_predictions(&preds_path, &prediction_rows(kind.id(), &exp.panel, &eval.predictions))?;
            println!("{kind}: mae {:.4} rmse {:.4}", eval.errors.mae, eval.errors.rmse);
        }
        Command::Grid { models, features } => {
            let kinds = parse_kinds(&models)?;
            let modes = parse_modes(&features)?;
            let path = cli.out.join(LEDGER_FILE);
            let exp = load_dataset(&cli.data)?.experiment(settings.test_year, window)?;
            std::fs::create_dir_all(cli.out.join("checkpoints"))?;
            if cli.force && path.exists() {
                std::fs::remove_file(&path)?;
            }
            let ledger = Ledger::open(&path)?;
            let opts = GridOptions {
                template: settings.train.clone(),
                workers: workers_from_env(),
                checkpoint_dir: Some(cli.out.join("checkpoints")),
            };
            for kind in kinds {
                for &mode in &modes {
                    let best = grid_search(kind, mode, &exp, &settings.grid, &ledger, &opts)?;
                    println!("{kind} {}: best {} rmse {:.4}", mode.id(), best.key.stem(), best.rmse);
                }
            }
            announce(&path);
            announce(&cli.out.join("checkpoints"));
        }
        Command::Compare => {
            let ledger_path = cli.out.join(LEDGER_FILE);
            let orders_path = cli.out.join(ORDERS_FILE);
            if !ledger_path.exists() {
                return Err(Usage(format!("missing run ledger {}; run `grid` first", ledger_path.display())).into());
            }
            if !orders_path.exists() {
                return Err(Usage(format!("missing ARIMA orders {}; run `fit-arima` first", orders_path.display())).into());
            }
            let table_path = cli.out.join("comparison.csv");
            let preds_path = cli.out.join("predictions.csv");
            guard(cli.force, &[table_path.clone(), preds_path.clone()])?;
            let records = read_ledger(&ledger_path)?;
            let exp = load_dataset(&cli.data)?.experiment(settings.test_year, window)?;
            let orders = read_orders(&orders_path, &exp.panel.poi_names)?;
            let mut fits = Vec::new();
            for (poi, order) in orders.into_iter().enumerate() {
                let series = &exp.panel.series(poi)[exp.train_rows.clone()];
                fits.push(flowcast::harness::baselines::fit_order(series, poi, order)?);
            }
            let rows = exp.target_rows();
            let arima = arima_rolling(&exp.panel, &fits, rows.clone(), UpdatePolicy::default())?;
            let latency = arima_refit_latency(&exp.panel, &fits, rows.start, settings.arima_latency_steps)?;
            let summary = ArimaSummary {
                params: fits.iter().map(|f| f.order.n_params()).sum(),
                predict_ms: latency,
                errors: arima.predictions.errors()?,
            };
            let table = comparison_table(&summary, &records, &settings.grid)
                .map_err(|e| Usage(format!("{e} in {}", ledger_path.display())))?;
            write_table(BufWriter::new(File::create(&table_path)?), &table)?;
            announce(&table_path);

            let mut all = prediction_rows("arima", &exp.panel, &arima.predictions);
            let naive = seasonal_naive(&exp.panel, rows)?;
            all.extend(prediction_rows("seasonal_naive", &exp.panel, &naive));
            let prepared = exp.prepare(FeatureMode::VisitorsOnly, true)?;
            let prepared_raw = exp.prepare(FeatureMode::VisitorsOnly, false)?;
            for kind in CellKind::TABLE_ORDER {
                let Some(best) = best_run(&records, &settings.grid.runs(kind, FeatureMode::VisitorsOnly)) else { continue };
                let ckpt = cli.out.join("checkpoints").join(format!("{}.ckpt", best.key.stem()));
                if !ckpt.exists() {
                    log::warn!("no checkpoint {}; {kind} left out of the predictions", ckpt.display());
                    continue;
                }
                let model: Model<f64> = load_checkpoint(&ckpt)?;
                let data = if best.key.normalized { &prepared } else { &prepared_raw };
                let preds = predict_all(&model, &data.test_set()?)?;
                all.extend(prediction_rows(kind.id(), &exp.panel, &preds));
            }
            save_predictions(&preds_path, &all)?;
        }
        Command::Plot { predictions, poi, from, to, svg } => {
            let ts = |s: &Option<String>| -> Result<Option<_>> {
                s.as_ref()
                    .map(|v| parse_timestamp(v).ok_or_else(|| Usage(format!("bad timestamp `{v}`")).into()))
                    .transpose()
            };
            let (from, to) = (ts(&from)?, ts(&to)?);
            guard(cli.force, std::slice::from_ref(&svg))?;
            let rows = read_predictions(&predictions)?;
            let (start, series) = select_series(&rows, &poi, from, to)?;
            if let Some(dir) = svg.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&svg, render_svg(&format!("Predicted and true visitors, {poi}"), start, &series))
                .with_context(|| format!("writing {}", svg.display()))?;
            announce(&svg);
        }
    }
    Ok(())
}

fn read_orders(path: &Path, names: &[String]) -> Result<Vec<ArimaOrder>> {
    let mut rd = csv::Reader::from_path(path)?;
    let mut by_name = std::collections::HashMap::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let bad = || Usage(format!("{}: line {}: malformed order row", path.display(), i + 2));
        let num = |j: usize| rec.get(j).and_then(|v| v.parse::<usize>().ok()).ok_or_else(bad);
        let order = ArimaOrder::new(num(1)?, num(2)?, num(3)?).map_err(|_| bad())?;
        by_name.insert(rec.get(0).ok_or_else(bad)?.to_string(), order);
    }
    names
        .iter()
        .map(|n| by_name.get(n).copied().ok_or_else(|| Usage(format!("{} has no order for {n}", path.display())).into()))
        .collect()
}

/// Validation problems exit with 2, everything else with 1.
fn exit_code(e: &anyhow::Error) -> u8 {
    use flowcast::Error as E;
    if e.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    if let Some(err) = e.downcast_ref::<E>() {
        return match err {
            E::Config(_) | E::Schema { .. } | E::Missing(_) | E::Invalid(_) | E::Empty(_) | E::SeriesTooShort { .. } => 2,
            E::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 2,
            _ => 1,
        };
    }
    if let Some(io) = e.downcast_ref::<std::io::Error>() {
        if io.kind() == std::io::ErrorKind::NotFound {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
