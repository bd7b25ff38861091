//! Non-seasonal ARIMA(p, d, q): conditional-sum-of-squares estimation,
//! KPSS-driven differencing, stepwise AIC order search and rolling
//! one-step-ahead forecasting.
//!
//! The model on the differenced series `z = (1 - B)^d y` is
//! `z_t = c + Σ φ_i z_{t-i} + Σ θ_j ε_{t-j} + ε_t`.

mod css;
mod diff;
mod kpss;
mod optim;
mod rolling;
mod select;

pub use css::{ar_is_stationary, css_fit, css_fit_with, innovations, CssOptions};
pub use diff::{difference, undifference};
pub use kpss::{kpss_lag, kpss_statistic, KPSS_CRITICAL_5PCT};
pub use optim::{Minimum, NelderMead};
pub use rolling::{rolling_evaluate, RollingOutput};
pub use select::{auto_select, is_admissible, auto_select_with, Candidate, Selection, SelectionOptions};

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_P: usize = 5;
pub const MAX_D: usize = 2;
pub const MAX_Q: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Result<Self> {
        if p > MAX_P || d > MAX_D || q > MAX_Q {
            return Err(Error::Config(format!(
                "ARIMA order ({p},{d},{q}) outside bounds p<={MAX_P}, d<={MAX_D}, q<={MAX_Q}"
            )));
        }
        Ok(Self { p, d, q })
    }

    /// Whether the fit estimates a constant (only for undifferenced series).
    pub fn has_constant(&self) -> bool {
        self.d == 0
    }

    /// Estimated quantities counted by AIC: coefficients, constant, σ².
    pub fn n_params(&self) -> usize {
        self.p + self.q + usize::from(self.has_constant()) + 1
    }

    /// True when `self` nests `other` at the same `d`.
    pub fn contains(&self, other: &ArimaOrder) -> bool {
        self.d == other.d && self.p >= other.p && self.q >= other.q
    }
}

impl fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

/// When a rolling model re-estimates its coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdatePolicy {
    /// Extend the innovation recursion only.
    Filter,
    /// Also refit every `every` observations, warm-started.
    Refit { every: usize },
}

impl Default for UpdatePolicy {
    fn default() -> Self {
        UpdatePolicy::Refit { every: 168 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport<T> {
    /// Gaussian conditional log-likelihood `-n/2·(ln(2πσ̂²) + 1)`.
    pub loglik: T,
    pub aic: T,
    pub converged: bool,
    pub iterations: usize,
    /// Number of innovations entering the sum of squares.
    pub n_used: usize,
}

/// Fitted model together with the observation and innovation history the
/// forecasting recursion needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ArimaModel<T> {
    pub order: ArimaOrder,
    pub phi: Vec<T>,
    pub theta: Vec<T>,
    pub c: T,
    pub sigma2: T,
    pub policy: UpdatePolicy,
    history: Vec<T>,
    diffed: Vec<T>,
    residuals: Vec<T>,
    since_refit: usize,
}

impl<T: Scalar> ArimaModel<T> {
    /// Builds a model with given coefficients and runs the innovation
    /// recursion over `series`.
    pub fn with_coefficients(order: ArimaOrder, phi: Vec<T>, theta: Vec<T>, c: T, series: &[T]) -> Result<Self> {
        if phi.len() != order.p || theta.len() != order.q {
            return Err(Error::Invalid("coefficient counts do not match the order".into()));
        }
        let diffed = difference(series, order.d)?;
        let residuals = innovations(&diffed, c, &phi, &theta);
        let n_used = diffed.len().saturating_sub(order.p).max(1);
        let sigma2 = residuals.iter().map(|e| *e * *e).sum::<T>() / T::from_usize(n_used).unwrap();
        Ok(Self {
            order,
            phi,
            theta,
            c,
            sigma2,
            policy: UpdatePolicy::Filter,
            history: series.to_vec(),
            diffed,
            residuals,
            since_refit: 0,
        })
    }

    pub fn history(&self) -> &[T] {
        &self.history
    }

    pub fn diffed(&self) -> &[T] {
        &self.diffed
    }

    /// Innovations on the differenced scale; the first `p` are zero.
    pub fn residuals(&self) -> &[T] {
        &self.residuals
    }

    pub fn with_policy(mut self, policy: UpdatePolicy) -> Self {
        self.policy = policy;
        self
    }

    /// Maps a forecast of the differenced series to the original scale.
    pub fn integrate_forecast(&self, diffed_forecast: T) -> Result<T> {
        undifference(&self.history, self.order.d, diffed_forecast)
    }

    /// One-step forecast on the differenced scale.
    pub fn forecast_diffed(&self) -> Result<T> {
        if self.history.len() <= self.order.d {
            return Err(Error::Unfitted);
        }
        let n = self.diffed.len();
        let mut z = self.c;
        for (i, &phi) in self.phi.iter().enumerate() {
            if n > i {
                z = z + phi * self.diffed[n - 1 - i];
            }
        }
        for (j, &theta) in self.theta.iter().enumerate() {
            if n > j {
                z = z + theta * self.residuals[n - 1 - j];
            }
        }
        Ok(z)
    }

    /// Next-step forecast on the original scale (unclamped).
    pub fn forecast_one_step(&self) -> Result<T> {
        let z = self.forecast_diffed()?;
        self.integrate_forecast(z)
    }

    /// Appends an observation and its innovation; coefficients stay fixed
    /// unless the refit policy is due. Returns whether a refit happened.
    pub fn update_with_observation(&mut self, y: T) -> Result<bool> {
        let z_hat = self.forecast_diffed()?;
        self.history.push(y);
        let w = diff::difference_weights::<T>(self.order.d);
        let n = self.history.len();
        let z: T = w.iter().enumerate().map(|(k, &wk)| wk * self.history[n - 1 - k]).sum();
        self.diffed.push(z);
        self.residuals.push(z - z_hat);
        self.since_refit += 1;
        if let UpdatePolicy::Refit { every } = self.policy {
            if every > 0 && self.since_refit >= every {
                self.refit()?;
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Re-estimates the coefficients on the full history, warm-started from
    /// the current values, and recomputes the innovations.
    pub fn refit(&mut self) -> Result<FitReport<T>> {
        let (fitted, report) = css::refit_from(self)?;
        let policy = self.policy;
        *self = fitted;
        self.policy = policy;
        self.since_refit = 0;
        Ok(report)
    }
}
