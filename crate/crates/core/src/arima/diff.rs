use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `d`-fold first differences; the output is `d` points shorter.
pub fn difference<T: Scalar>(series: &[T], d: usize) -> Result<Vec<T>> {
    if series.len() <= d {
        return Err(Error::SeriesTooShort {
            need: d + 1,
            got: series.len(),
        });
    }
    let mut out = series.to_vec();
    for _ in 0..d {
        out = out.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(out)
}

/// Binomial weights of `(1 - B)^d`, lowest lag first: `d = 2` gives `[1, -2, 1]`.
pub(crate) fn difference_weights<T: Scalar>(d: usize) -> Vec<T> {
    let mut w = vec![T::one()];
    for _ in 0..d {
        let mut next = vec![T::zero(); w.len() + 1];
        for (i, &c) in w.iter().enumerate() {
            next[i] = next[i] + c;
            next[i + 1] = next[i + 1] - c;
        }
        w = next;
    }
    w
}

/// Maps a forecast of the `d`-times differenced series back to the original
/// scale given the observed history: `ŷ = ẑ - Σ_{k≥1} w_k·y_{t+1-k}`.
pub fn undifference<T: Scalar>(history: &[T], d: usize, diffed_forecast: T) -> Result<T> {
    if history.len() < d {
        return Err(Error::SeriesTooShort {
            need: d,
            got: history.len(),
        });
    }
    let w = difference_weights::<T>(d);
    let n = history.len();
    let mut y = diffed_forecast;
    for k in 1..=d {
        y = y - w[k] * history[n - k];
    }
    Ok(y)
}
