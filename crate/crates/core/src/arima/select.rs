use std::collections::BTreeMap;

use num_complex::Complex64;

use super::{ar_is_stationary, css_fit_with, ArimaModel, difference, kpss_statistic, ArimaOrder, CssOptions, KPSS_CRITICAL_5PCT, MAX_D, MAX_P, MAX_Q};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct SelectionOptions {
    pub max_p: usize,
    pub max_q: usize,
    pub css: CssOptions,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        Self {
            max_p: MAX_P,
            max_q: MAX_Q,
            css: CssOptions {
                condition_on: Some(MAX_P),
                ..CssOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate<T> {
    pub order: ArimaOrder,
    pub aic: T,
}

/// Outcome of the order search with every candidate that was fitted.
#[derive(Debug, Clone)]
pub struct Selection<T> {
    pub order: ArimaOrder,
    pub aic: T,
    pub kpss: Vec<T>,
    pub tried: Vec<Candidate<T>>,
}

/// `a` beats `b`: lower AIC, with near-ties going to fewer terms and then
/// to fewer AR terms.
fn better<T: Scalar>(a: &Candidate<T>, b: &Candidate<T>) -> bool {
    let tol = T::lit(1e-9) * b.aic.abs().max(T::one());
    if (a.aic - b.aic).abs() <= tol {
        let ka = (a.order.p + a.order.q, a.order.p);
        let kb = (b.order.p + b.order.q, b.order.p);
        ka < kb
    } else {
        a.aic < b.aic
    }
}

/// Candidates whose AR or MA roots fall within this modulus sit on the
/// penalty boundary and are skipped.
const ROOT_MARGIN: f64 = 1.01;

/// Roots of `1 - Σ a_i x^i` all lie outside radius `r` exactly when the
/// polynomial in `r·x` is stationary.
fn clear_of_unit_circle<T: Scalar>(phi: &[T], theta: &[T]) -> bool {
    let r = T::lit(ROOT_MARGIN);
    let scaled = |c: &[T], sign: T| -> Vec<T> {
        c.iter()
            .enumerate()
            .map(|(i, &v)| sign * v * r.powi(i as i32 + 1))
            .collect()
    };
    ar_is_stationary(&scaled(phi, T::one())) && ar_is_stationary(&scaled(theta, -T::one()))
}

/// Distance between an AR and an MA inverse root below which the pair is
/// treated as a cancelling factor.
const CANCEL_TOL: f64 = 0.1;

/// Roots of the monic `x^n + a_1 x^{n-1} + … + a_n` by Durand–Kerner.
fn monic_roots(a: &[f64]) -> Vec<Complex64> {
    let n = a.len();
    let eval = |x: Complex64| a.iter().fold(Complex64::new(1.0, 0.0), |acc, &c| acc * x + c);
    let seed = Complex64::new(0.4, 0.9);
    let mut r: Vec<Complex64> = (0..n).map(|i| seed.powu(i as u32)).collect();
    for _ in 0..500 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let denom = (0..n).filter(|&j| j != i).fold(Complex64::new(1.0, 0.0), |acc, j| acc * (r[i] - r[j]));
            if denom.norm() == 0.0 {
                continue;
            }
            let step = eval(r[i]) / denom;
            r[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-12 {
            break;
        }
    }
    r
}

/// An AR and an MA factor that nearly coincide make the ARMA terms
/// unidentified: the pair cancels and only fits noise.
fn has_common_factor<T: Scalar>(phi: &[T], theta: &[T]) -> bool {
    if phi.is_empty() || theta.is_empty() {
        return false;
    }
    // Inverse roots of 1 - Σφ x^i are the roots of x^p - Σφ_i x^{p-i}.
    let ar: Vec<f64> = phi.iter().map(|v| -v.as_f64()).collect();
    let ma: Vec<f64> = theta.iter().map(|v| v.as_f64()).collect();
    let ma_roots = monic_roots(&ma);
    monic_roots(&ar)
        .iter()
        .any(|a| ma_roots.iter().any(|m| (a - m).norm() < CANCEL_TOL))
}

/// Whether a fitted model may compete in order selection: roots clear of
/// the unit circle and no cancelling AR/MA factor.
pub fn is_admissible<T: Scalar>(model: &ArimaModel<T>) -> bool {
    clear_of_unit_circle(&model.phi, &model.theta) && !has_common_factor(&model.phi, &model.theta)
}

/// Chooses `d` by KPSS, then `(p, q)` by stepwise AIC search.
pub fn auto_select<T: Scalar>(series: &[T]) -> Result<ArimaOrder> {
    Ok(auto_select_with(series, &SelectionOptions::default())?.order)
}

pub fn auto_select_with<T: Scalar>(series: &[T], opts: &SelectionOptions) -> Result<Selection<T>> {
    if series.len() < 50 {
        return Err(Error::SeriesTooShort {
            need: 50,
            got: series.len(),
        });
    }
    let mut d = MAX_D;
    let mut kpss = Vec::new();
    for cand in 0..=MAX_D {
        let z = difference(series, cand)?;
        let stat = kpss_statistic(&z);
        kpss.push(stat);
        if stat < T::lit(KPSS_CRITICAL_5PCT) {
            d = cand;
            break;
        }
    }

    let z = difference(series, d)?;
    if z.iter().all(|v| *v == z[0]) {
        let order = ArimaOrder::new(0, d, 0)?;
        return Ok(Selection {
            order,
            aic: T::neg_infinity(),
            kpss,
            tried: vec![],
        });
    }

    let mut tried: BTreeMap<(usize, usize), Option<Candidate<T>>> = BTreeMap::new();
    let evaluate = |p: usize, q: usize, tried: &mut BTreeMap<(usize, usize), Option<Candidate<T>>>| {
        if p > opts.max_p || q > opts.max_q {
            return None;
        }
        *tried.entry((p, q)).or_insert_with(|| {
            let order = ArimaOrder::new(p, d, q).ok()?;
            let (model, report) = css_fit_with(series, order, &opts.css).ok()?;
            (report.aic.is_finite() && is_admissible(&model))
                .then_some(Candidate { order, aic: report.aic })
        })
    };

    let mut best: Option<Candidate<T>> = None;
    for (p, q) in [(0, 0), (1, 0), (0, 1), (2, 2)] {
        if let Some(c) = evaluate(p, q, &mut tried) {
            if best.is_none_or(|b| better(&c, &b)) {
                best = Some(c);
            }
        }
    }
    let mut best = best.ok_or_else(|| Error::Invalid("no ARIMA candidate could be fitted".into()))?;

    loop {
        let (p, q) = (best.order.p as isize, best.order.q as isize);
        let mut improved = false;
        for (dp, dq) in [(-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (1, 1), (-1, 1), (1, -1)] {
            let (np, nq) = (p + dp, q + dq);
            if np < 0 || nq < 0 {
                continue;
            }
            if let Some(c) = evaluate(np as usize, nq as usize, &mut tried) {
                if better(&c, &best) {
                    best = c;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }

    Ok(Selection {
        order: best.order,
        aic: best.aic,
        kpss,
        tried: tried.into_values().flatten().collect(),
    })
}
