use std::time::{Duration, Instant};

use super::ArimaModel;
use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct RollingOutput<T> {
    /// One raw forecast per test point, made before that point is revealed.
    pub predictions: Vec<T>,
    /// Wall time of each forecast-plus-update step.
    pub latencies: Vec<Duration>,
    pub refits: usize,
}

/// Rolling one-step-ahead evaluation: forecast the next point, then reveal
/// it to the model before forecasting the one after.
pub fn rolling_evaluate<T: Scalar>(model: &mut ArimaModel<T>, test: &[T]) -> Result<RollingOutput<T>> {
    let mut predictions = Vec::with_capacity(test.len());
    let mut latencies = Vec::with_capacity(test.len());
    let mut refits = 0;
    for &y in test {
        let start = Instant::now();
        let pred = model.forecast_one_step()?;
        if model.update_with_observation(y)? {
            refits += 1;
        }
        latencies.push(start.elapsed());
        predictions.push(pred);
    }
    Ok(RollingOutput {
        predictions,
        latencies,
        refits,
    })
}
