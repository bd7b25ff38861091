use super::optim::NelderMead;
use super::{difference, ArimaModel, ArimaOrder, FitReport, UpdatePolicy};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, Default)]
pub struct CssOptions {
    /// Number of leading innovations excluded from the sum of squares.
    /// Defaults to `p`; order search fixes it across candidates so their
    /// likelihoods cover the same observations.
    pub condition_on: Option<usize>,
    pub optimizer: NelderMead,
}

/// Innovation recursion with zero pre-sample values. The first `p` entries
/// are zero because the AR terms are not yet defined there.
pub fn innovations<T: Scalar>(z: &[T], c: T, phi: &[T], theta: &[T]) -> Vec<T> {
    let p = phi.len();
    let mut eps = vec![T::zero(); z.len()];
    for t in p..z.len() {
        let mut pred = c;
        for (i, &a) in phi.iter().enumerate() {
            pred = pred + a * z[t - 1 - i];
        }
        for (j, &b) in theta.iter().enumerate() {
            if t > j {
                pred = pred + b * eps[t - 1 - j];
            }
        }
        eps[t] = z[t] - pred;
    }
    eps
}

/// True when all roots of `1 - φ_1 x - … - φ_p x^p` lie outside the unit
/// circle, tested through the reflection coefficients of the step-down
/// Levinson recursion. Invertibility of an MA polynomial `1 + θ_1 x + …`
/// is `ar_is_stationary(-θ)`.
pub fn ar_is_stationary<T: Scalar>(phi: &[T]) -> bool {
    let mut a = phi.to_vec();
    while let Some(&k) = a.last() {
        if !(k.abs() < T::one()) {
            return false;
        }
        let m = a.len() - 1;
        let denom = T::one() - k * k;
        a = (0..m).map(|j| (a[j] + k * a[m - 1 - j]) / denom).collect();
    }
    true
}

fn split<T: Scalar>(x: &[T], order: &ArimaOrder) -> (T, Vec<T>, Vec<T>) {
    let off = usize::from(order.has_constant());
    let c = if off == 1 { x[0] } else { T::zero() };
    let phi = x[off..off + order.p].to_vec();
    let theta = x[off + order.p..].to_vec();
    (c, phi, theta)
}

fn sum_sq<T: Scalar>(eps: &[T], from: usize) -> T {
    eps[from.min(eps.len())..].iter().map(|e| *e * *e).sum()
}

/// Fits `order` to `series` by minimising the conditional sum of squares.
pub fn css_fit<T: Scalar>(series: &[T], order: ArimaOrder) -> Result<(ArimaModel<T>, FitReport<T>)> {
    css_fit_with(series, order, &CssOptions::default())
}

pub fn css_fit_with<T: Scalar>(
    series: &[T],
    order: ArimaOrder,
    opts: &CssOptions,
) -> Result<(ArimaModel<T>, FitReport<T>)> {
    let z = difference(series, order.d)?;
    let need = 10 * (order.p + order.q + 1);
    if z.len() < need {
        return Err(Error::SeriesTooShort { need, got: z.len() });
    }
    let mean = z.iter().copied().sum::<T>() / T::from_usize(z.len()).unwrap();
    let mut x0 = Vec::with_capacity(order.n_params());
    if order.has_constant() {
        x0.push(mean);
    }
    x0.extend(std::iter::repeat_n(T::zero(), order.p + order.q));
    fit_from(series, z, order, x0, opts)
}

pub(crate) fn refit_from<T: Scalar>(model: &ArimaModel<T>) -> Result<(ArimaModel<T>, FitReport<T>)> {
    let mut x0 = Vec::new();
    if model.order.has_constant() {
        x0.push(model.c);
    }
    x0.extend_from_slice(&model.phi);
    x0.extend_from_slice(&model.theta);
    fit_from(model.history(), model.diffed().to_vec(), model.order, x0, &CssOptions::default())
}

fn fit_from<T: Scalar>(
    series: &[T],
    z: Vec<T>,
    order: ArimaOrder,
    x0: Vec<T>,
    opts: &CssOptions,
) -> Result<(ArimaModel<T>, FitReport<T>)> {
    let cond = opts.condition_on.unwrap_or(order.p).max(order.p);
    if z.len() <= cond {
        return Err(Error::SeriesTooShort {
            need: cond + 1,
            got: z.len(),
        });
    }
    let n_used = z.len() - cond;
    let nf = T::from_usize(n_used).unwrap();
    let k = T::from_usize(order.n_params()).unwrap();
    let two = T::lit(2.0);

    let first = series[0];
    if series.iter().all(|v| *v == first) {
        // Constant series: nothing to explain beyond the level.
        let c = if order.has_constant() { first } else { T::zero() };
        let model = ArimaModel {
            order,
            phi: vec![T::zero(); order.p],
            theta: vec![T::zero(); order.q],
            c,
            sigma2: T::zero(),
            policy: UpdatePolicy::Filter,
            history: series.to_vec(),
            residuals: vec![T::zero(); z.len()],
            diffed: z,
            since_refit: 0,
        };
        let report = FitReport {
            loglik: T::infinity(),
            aic: T::neg_infinity(),
            converged: true,
            iterations: 0,
            n_used,
        };
        return Ok((model, report));
    }

    let mean = z.iter().copied().sum::<T>() / T::from_usize(z.len()).unwrap();
    let var = z.iter().map(|v| (*v - mean) * (*v - mean)).sum::<T>() / T::from_usize(z.len()).unwrap();
    let penalty = T::lit(1e30);
    let objective = |x: &[T]| -> T {
        let (c, phi, theta) = split(x, &order);
        let neg_theta: Vec<T> = theta.iter().map(|t| -*t).collect();
        if !ar_is_stationary(&phi) || !ar_is_stationary(&neg_theta) {
            return penalty;
        }
        let eps = innovations(&z, c, &phi, &theta);
        let v = sum_sq(&eps, cond) / nf;
        if v.is_finite() {
            v
        } else {
            penalty
        }
    };
    let mut step = vec![T::lit(0.1); x0.len()];
    if order.has_constant() {
        step[0] = T::lit(0.1) * var.sqrt().max(T::lit(1e-3));
    }
    let min = opts.optimizer.minimize(objective, &x0, &step);
    let (c, phi, theta) = split(&min.x, &order);
    let residuals = innovations(&z, c, &phi, &theta);
    let sigma2 = sum_sq(&residuals, cond) / nf;
    let loglik = -nf / two * ((two * T::PI() * sigma2).ln() + T::one());
    let aic = -two * loglik + two * k;
    let model = ArimaModel {
        order,
        phi,
        theta,
        c,
        sigma2,
        policy: UpdatePolicy::Filter,
        history: series.to_vec(),
        diffed: z,
        residuals,
        since_refit: 0,
    };
    Ok((
        model,
        FitReport {
            loglik,
            aic,
            converged: min.converged,
            iterations: min.iterations,
            n_used,
        },
    ))
}
