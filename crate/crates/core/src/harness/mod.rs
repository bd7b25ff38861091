//! Training loop, evaluation, baselines, grid search and the comparison
//! table.

pub mod baselines;
pub mod compare;
pub mod config;
pub mod evaluate;
pub mod experiment;
pub mod grid;
pub mod metrics;
pub mod train;

pub use baselines::{arima_refit_latency, arima_rolling, fit_per_poi, seasonal_naive, ArimaBaseline, PoiFit};
pub use compare::{comparison_table, write_table, ArimaSummary, TableRow, TABLE_HEADER};
pub use config::{parse_key_values, TrainConfig};
pub use evaluate::{evaluate, predict_all, Evaluation, Predictions};
pub use experiment::{Experiment, Prepared};
pub use grid::{best_run, grid_search, read_ledger, workers_from_env, GridOptions, GridSpec, Ledger, RunKey, RunRecord};
pub use metrics::{errors, Errors};
pub use train::{train, TrainOutcome};
