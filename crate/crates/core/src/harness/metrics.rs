use std::time::Duration;

use crate::error::{Error, Result};

/// Pooled mean absolute and root-mean-square error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Errors {
    pub mae: f64,
    pub rmse: f64,
}

pub fn errors(pred: &[f64], truth: &[f64]) -> Result<Errors> {
    if pred.len() != truth.len() {
        return Err(Error::Invalid(format!("{} predictions for {} targets", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let n = pred.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (p, y) in pred.iter().zip(truth) {
        let r = p - y;
        abs += r.abs();
        sq += r * r;
    }
    Ok(Errors { mae: abs / n, rmse: (sq / n).sqrt() })
}

/// Median of a latency sample in milliseconds.
pub fn median_ms(samples: &[Duration]) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut ms: Vec<f64> = samples.iter().map(|d| d.as_secs_f64() * 1e3).collect();
    ms.sort_by(f64::total_cmp);
    let n = ms.len();
    if n % 2 == 1 {
        ms[n / 2]
    } else {
        0.5 * (ms[n / 2 - 1] + ms[n / 2])
    }
}
