use std::ops::Range;

use chrono::{Datelike, Duration, NaiveDateTime};

use super::features::FeatureFrame;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rnn::SequenceBatch;
use crate::scalar::Scalar;

/// Default look-back length in hours.
pub const WINDOW_LEN: usize = 30;

/// Sliding windows over one contiguous block of frame rows. Sample `i` sees
/// rows `start+i .. start+i+len` and predicts the counts at `start+i+len`,
/// so no window reaches outside `rows`.
///
/// Step times are hours since Monday 00:00 of the week the window starts
/// in: gaps between steps are exact and the clock phase is kept, while the
/// values stay small.
#[derive(Debug, Clone, Copy)]
pub struct WindowedDataset<'a> {
    frame: &'a FeatureFrame,
    start: usize,
    end: usize,
    len: usize,
}

impl<'a> WindowedDataset<'a> {
    pub fn new(frame: &'a FeatureFrame, rows: Range<usize>, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Config("window length must be positive".into()));
        }
        if rows.end > frame.n_rows() || rows.start > rows.end {
            return Err(Error::Config(format!("rows {rows:?} not inside 0..{}", frame.n_rows())));
        }
        if rows.len() <= len {
            return Err(Error::SeriesTooShort { need: len + 1, got: rows.len() });
        }
        Ok(Self { frame, start: rows.start, end: rows.end, len })
    }

    pub fn frame(&self) -> &'a FeatureFrame {
        self.frame
    }

    pub fn window_len(&self) -> usize {
        self.len
    }

    /// Number of samples: block rows minus the window length.
    pub fn len(&self) -> usize {
        self.end - self.start - self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Frame row holding the target of sample `i`.
    pub fn target_row(&self, i: usize) -> usize {
        self.start + i + self.len
    }

    /// Scaled target of sample `i`.
    pub fn target(&self, i: usize) -> Vec<f64> {
        self.frame.target(self.target_row(i))
    }

    /// Stacks samples `idx` into a model batch and its `B×P` target.
    pub fn batch<T: Scalar>(&self, idx: &[usize]) -> Result<(SequenceBatch<T>, Tensor<T>)> {
        if idx.is_empty() {
            return Err(Error::Empty("batch"));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.len()) {
            return Err(Error::Invalid(format!("sample {bad} out of range 0..{}", self.len())));
        }
        let f = self.frame.n_features();
        let p = self.frame.n_pois();
        let b = idx.len();
        let mut inputs = Vec::with_capacity(self.len);
        let mut times = Vec::with_capacity(self.len);
        let origins: Vec<NaiveDateTime> = idx.iter().map(|&i| week_start(&self.frame.timestamps[self.start + i])).collect();
        for k in 0..self.len {
            let mut x = Vec::with_capacity(b * f);
            let mut ts = Vec::with_capacity(b);
            for (&i, origin) in idx.iter().zip(&origins) {
                let row = self.start + i + k;
                x.extend(self.frame.row(row).iter().map(|&v| T::lit(v)));
                let hours = (self.frame.timestamps[row] - *origin).num_seconds() as f64 / 3600.0;
                ts.push(T::lit(hours));
            }
            inputs.push(Tensor::from_vec(b, f, x)?);
            times.push(ts);
        }
        let mut y = Vec::with_capacity(b * p);
        for &i in idx {
            y.extend(self.target(i).into_iter().map(T::lit));
        }
        Ok((SequenceBatch { inputs, times, mask: None }, Tensor::from_vec(b, p, y)?))
    }
}

/// Monday 00:00 of the week containing `ts`.
pub fn week_start(ts: &NaiveDateTime) -> NaiveDateTime {
    let monday = ts.date() - Duration::days(ts.weekday().num_days_from_monday() as i64);
    monday.and_hms_opt(0, 0, 0).expect("midnight exists")
}
