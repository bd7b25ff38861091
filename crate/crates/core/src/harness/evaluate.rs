use std::time::{Duration, Instant};

use super::metrics::{errors, median_ms, Errors};
use crate::data::WindowedDataset;
use crate::error::{Error, Result};
use crate::rnn::Model;

/// Repetitions behind the latency median.
pub const LATENCY_REPS: usize = 100;

const EVAL_BATCH: usize = 256;

/// One-step predictions for a block of windows, in visitor counts.
#[derive(Debug, Clone)]
pub struct Predictions {
    /// Frame row of each prediction.
    pub rows: Vec<usize>,
    /// Row-major `N×P`.
    pub y_pred: Vec<f64>,
    pub y_true: Vec<f64>,
    pub n_pois: usize,
}

impl Predictions {
    pub fn errors(&self) -> Result<Errors> {
        errors(&self.y_pred, &self.y_true)
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub errors: Errors,
    /// Median wall time of one all-POI prediction from a single window.
    pub predict_ms: f64,
    pub predictions: Predictions,
}

/// Predicts every window of `data` and maps outputs back to counts.
pub fn predict_all(model: &Model<f64>, data: &WindowedDataset) -> Result<Predictions> {
    if data.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let frame = data.frame();
    let p = frame.n_pois();
    let mut out = Predictions { rows: Vec::new(), y_pred: Vec::new(), y_true: Vec::new(), n_pois: p };
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(EVAL_BATCH) {
        let (batch, _) = data.batch::<f64>(chunk)?;
        let pred = model.predict(&batch)?;
        for (r, &i) in chunk.iter().enumerate() {
            let row = data.target_row(i);
            out.rows.push(row);
            for poi in 0..p {
                out.y_pred.push(frame.denormalize(poi, pred.get(r, poi)));
                out.y_true.push(frame.raw_counts(row)[poi]);
            }
        }
    }
    Ok(out)
}

/// Median latency of a single-window prediction over `reps` windows.
pub fn prediction_latency(model: &Model<f64>, data: &WindowedDataset, reps: usize) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let mut samples: Vec<Duration> = Vec::with_capacity(reps);
    for k in 0..reps {
        let (batch, _) = data.batch::<f64>(&[k % data.len()])?;
        let start = Instant::now();
        let pred = model.predict(&batch)?;
        samples.push(start.elapsed());
        std::hint::black_box(pred);
    }
    Ok(median_ms(&samples))
}

pub fn evaluate(model: &Model<f64>, data: &WindowedDataset) -> Result<Evaluation> {
    let predictions = predict_all(model, data)?;
    let errors = predictions.errors()?;
    let predict_ms = prediction_latency(model, data, LATENCY_REPS)?;
    Ok(Evaluation { errors, predict_ms, predictions })
}
