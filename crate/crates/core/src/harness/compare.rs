use std::io::Write;

use super::grid::{best_run, GridSpec, RunRecord};
use super::metrics::Errors;
use crate::data::FeatureMode;
use crate::error::{Error, Result};
use crate::rnn::CellKind;

pub const TABLE_HEADER: [&str; 9] =
    ["model", "cells", "params", "train_min", "predict_ms", "mae_vis", "rmse_vis", "mae_ext", "rmse_ext"];

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub model: String,
    pub cells: Option<usize>,
    pub params: Option<usize>,
    pub train_min: Option<f64>,
    pub predict_ms: f64,
    pub visitors: Errors,
    /// Absent for models that cannot take external features.
    pub external: Option<Errors>,
}

/// The classical baseline's summary line.
#[derive(Debug, Clone, PartialEq)]
pub struct ArimaSummary {
    pub params: usize,
    pub predict_ms: f64,
    pub errors: Errors,
}

/// ARIMA first, then one row per recurrent kind in table order using the
/// best run of each feature mode. Size, parameters and timings come from
/// the best visitors-only run.
pub fn comparison_table(arima: &ArimaSummary, records: &[RunRecord], spec: &GridSpec) -> Result<Vec<TableRow>> {
    let mut rows = vec![TableRow {
        model: "ARIMA".into(),
        cells: None,
        params: Some(arima.params),
        train_min: None,
        predict_ms: arima.predict_ms,
        visitors: arima.errors,
        external: None,
    }];
    for kind in CellKind::TABLE_ORDER {
        let best = |mode: FeatureMode| {
            best_run(records, &spec.runs(kind, mode))
                .ok_or_else(|| Error::Missing(format!("no successful {} run with {} features", kind.id(), mode.id())))
        };
        let vis = best(FeatureMode::VisitorsOnly)?;
        let ext = best(FeatureMode::External)?;
        rows.push(TableRow {
            model: kind.display_name().into(),
            cells: Some(vis.key.hidden),
            params: Some(vis.params),
            train_min: Some(vis.train_s / 60.0),
            predict_ms: vis.predict_ms,
            visitors: Errors { mae: vis.mae, rmse: vis.rmse },
            external: Some(Errors { mae: ext.mae, rmse: ext.rmse }),
        });
    }
    Ok(rows)
}

pub fn write_table<W: Write>(w: W, rows: &[TableRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TABLE_HEADER)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in rows {
        out.write_record([
            r.model.clone(),
            opt(r.cells.map(|c| c.to_string())),
            opt(r.params.map(|c| c.to_string())),
            opt(r.train_min.map(|m| format!("{m:.3}"))),
            format!("{:.4}", r.predict_ms),
            format!("{:.3}", r.visitors.mae),
            format!("{:.3}", r.visitors.rmse),
            opt(r.external.map(|e| format!("{:.3}", e.mae))),
            opt(r.external.map(|e| format!("{:.3}", e.rmse))),
        ])?;
    }
    out.flush()?;
    Ok(())
}
