use std::ops::Range;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::evaluate::Predictions;
use super::metrics::median_ms;
use crate::arima::{auto_select_with, css_fit_with, ArimaModel, ArimaOrder, FitReport, SelectionOptions, UpdatePolicy};
use crate::data::HourlyPanel;
use crate::error::{Error, Result};

/// Lag of the seasonal-naive forecast: one week of hours.
pub const WEEK_HOURS: usize = 168;

/// `ŷ(t) = y(t − 168 h)` for every row of `rows`.
pub fn seasonal_naive(panel: &HourlyPanel, rows: Range<usize>) -> Result<Predictions> {
    if rows.is_empty() {
        return Err(Error::Empty("test set"));
    }
    if rows.start < WEEK_HOURS || rows.end > panel.n_hours() {
        return Err(Error::Invalid(format!("rows {rows:?} need a full week of history")));
    }
    let p = panel.n_pois();
    let mut out = Predictions { rows: Vec::new(), y_pred: Vec::new(), y_true: Vec::new(), n_pois: p };
    for t in rows {
        out.rows.push(t);
        for poi in 0..p {
            out.y_pred.push(panel.count(t - WEEK_HOURS, poi) as f64);
            out.y_true.push(panel.count(t, poi) as f64);
        }
    }
    Ok(out)
}

/// Order and fit of one POI's model on the training rows.
#[derive(Debug, Clone)]
pub struct PoiFit {
    pub poi: usize,
    pub order: ArimaOrder,
    pub model: ArimaModel<f64>,
    pub report: FitReport<f64>,
}

/// Selects and fits one model per POI on `train` rows, in parallel.
pub fn fit_per_poi(panel: &HourlyPanel, train: Range<usize>) -> Result<Vec<PoiFit>> {
    let opts = SelectionOptions::default();
    (0..panel.n_pois())
        .into_par_iter()
        .map(|poi| {
            let series: Vec<f64> = panel.series(poi)[train.clone()].to_vec();
            let sel = auto_select_with(&series, &opts)?;
            fit_order(&series, poi, sel.order)
        })
        .collect()
}

/// Fits a known order (as stored by a previous selection).
pub fn fit_order(series: &[f64], poi: usize, order: ArimaOrder) -> Result<PoiFit> {
    let (model, report) = css_fit_with(series, order, &SelectionOptions::default().css)?;
    Ok(PoiFit { poi, order, model, report })
}

#[derive(Debug, Clone)]
pub struct ArimaBaseline {
    pub predictions: Predictions,
    /// Median forecast-plus-update time per POI.
    pub step_ms: Vec<f64>,
    pub refits: usize,
}

impl ArimaBaseline {
    /// Time to advance every POI's model by one hour.
    pub fn total_step_ms(&self) -> f64 {
        self.step_ms.iter().sum()
    }
}

/// Rolls every POI's model through rows `fits[..].model.history().len()..rows.end`,
/// keeping forecasts for `rows` only.
pub fn arima_rolling(panel: &HourlyPanel, fits: &[PoiFit], rows: Range<usize>, policy: UpdatePolicy) -> Result<ArimaBaseline> {
    if rows.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let p = panel.n_pois();
    if fits.len() != p {
        return Err(Error::Invalid(format!("{} fitted models for {p} POIs", fits.len())));
    }
    let per_poi: Vec<(Vec<f64>, Vec<Duration>, usize)> = fits
        .par_iter()
        .map(|fit| {
            let series = panel.series(fit.poi);
            let mut model = fit.model.clone().with_policy(policy);
            let from = model.history().len();
            if from > rows.start {
                return Err(Error::Invalid("model history overlaps the forecast rows".into()));
            }
            let mut preds = Vec::with_capacity(rows.len());
            let mut lat = Vec::with_capacity(rows.len());
            let mut refits = 0;
            for (t, &y) in series.iter().enumerate().take(rows.end).skip(from) {
                let start = Instant::now();
                let f = model.forecast_one_step()?;
                refits += usize::from(model.update_with_observation(y)?);
                let took = start.elapsed();
                if t >= rows.start {
                    preds.push(f);
                    lat.push(took);
                }
            }
            Ok((preds, lat, refits))
        })
        .collect::<Result<_>>()?;
    let mut out = Predictions { rows: rows.clone().collect(), y_pred: Vec::new(), y_true: Vec::new(), n_pois: p };
    for (k, t) in rows.enumerate() {
        for (poi, (preds, _, _)) in per_poi.iter().enumerate() {
            out.y_pred.push(preds[k]);
            out.y_true.push(panel.count(t, poi) as f64);
        }
    }
    Ok(ArimaBaseline {
        predictions: out,
        step_ms: per_poi.iter().map(|(_, lat, _)| median_ms(lat)).collect(),
        refits: per_poi.iter().map(|(_, _, r)| r).sum(),
    })
}

/// Median per-POI step time when every step refits, as in a model that is
/// re-estimated before each forecast; summed over POIs.
pub fn arima_refit_latency(panel: &HourlyPanel, fits: &[PoiFit], from: usize, steps: usize) -> Result<f64> {
    let rows = from..(from + steps).min(panel.n_hours());
    let mut total = 0.0;
    for fit in fits {
        let series = panel.series(fit.poi);
        let mut model = fit.model.clone().with_policy(UpdatePolicy::Filter);
        let start = model.history().len();
        for &y in &series[start..rows.start] {
            model.update_with_observation(y)?;
        }
        model.policy = UpdatePolicy::Refit { every: 1 };
        let mut lat = Vec::with_capacity(rows.len());
        for &y in &series[rows.clone()] {
            let t0 = Instant::now();
            std::hint::black_box(model.forecast_one_step()?);
            model.update_with_observation(y)?;
            lat.push(t0.elapsed());
        }
        total += median_ms(&lat);
    }
    Ok(total)
}
