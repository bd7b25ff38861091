//! Fixed-step explicit integrators that record every stage on the tape, so
//! gradients flow through the unrolled solve to the initial state and to
//! whatever parameters the vector field reads.

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Euler,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverConfig {
    pub method: Method,
    /// Steps per unit of time.
    pub steps_per_unit: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk4,
            steps_per_unit: 4,
        }
    }
}

impl SolverConfig {
    pub fn new(method: Method, steps_per_unit: usize) -> Result<Self> {
        let cfg = Self { method, steps_per_unit };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps_per_unit == 0 {
            return Err(Error::Config("solver step_count must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of steps used to cover a span of length `span`.
    pub fn steps_for<T: Scalar>(&self, span: T) -> usize {
        let n = (span * T::from_usize(self.steps_per_unit).unwrap()).ceil();
        n.to_usize().unwrap_or(1).max(1)
    }
}

/// Integrates the autonomous system `dh/dt = field(h)` from `t0` to `t1`.
///
/// The span is covered by `ceil((t1 - t0) · steps_per_unit)` equal steps.
pub fn integrate<T, F>(tape: &mut Tape<T>, mut field: F, h0: Var, t0: T, t1: T, cfg: &SolverConfig) -> Result<Var>
where
    T: Scalar,
    F: FnMut(&mut Tape<T>, Var) -> Var,
{
    cfg.validate()?;
    if !(t1 >= t0) {
        return Err(Error::Invalid(format!("integration span reversed: {t0} > {t1}")));
    }
    let span = t1 - t0;
    let n = cfg.steps_for(span);
    let dt = span / T::from_usize(n).unwrap();
    let mut h = h0;
    for step in 0..n {
        h = match cfg.method {
            Method::Euler => {
                let k = field(tape, h);
                let inc = tape.mul_scalar(k, dt);
                tape.add(h, inc)
            }
            Method::Rk4 => {
                let half = dt * T::lit(0.5);
                let k1 = field(tape, h);
                let s1 = tape.mul_scalar(k1, half);
                let h1 = tape.add(h, s1);
                let k2 = field(tape, h1);
                let s2 = tape.mul_scalar(k2, half);
                let h2 = tape.add(h, s2);
                let k3 = field(tape, h2);
                let s3 = tape.mul_scalar(k3, dt);
                let h3 = tape.add(h, s3);
                let k4 = field(tape, h3);
                let k23 = tape.add(k2, k3);
                let k23 = tape.mul_scalar(k23, T::lit(2.0));
                let k14 = tape.add(k1, k4);
                let sum = tape.add(k14, k23);
                let inc = tape.mul_scalar(sum, dt / T::lit(6.0));
                tape.add(h, inc)
            }
        };
        if !tape.value(h).is_finite() {
            return Err(Error::SolverDiverged { step });
        }
    }
    tape.check()?;
    Ok(h)
}

/// Integrates each row of `h0` over its own span `dt[row]`.
///
/// All rows take the same number of steps (set by the longest span) so the
/// batch stays a single matrix; per-row step sizes are `dt[row] / n`.
pub fn integrate_rows<T, F>(tape: &mut Tape<T>, mut field: F, h0: Var, dt: &[T], cfg: &SolverConfig) -> Result<Var>
where
    T: Scalar,
    F: FnMut(&mut Tape<T>, Var) -> Var,
{
    cfg.validate()?;
    let rows = tape.shape(h0)[0];
    if dt.len() != rows {
        return Err(Error::Shape {
            op: "integrate_rows",
            left: [rows, 1],
            right: [dt.len(), 1],
        });
    }
    if dt.iter().any(|d| !(*d >= T::zero())) {
        return Err(Error::Invalid("negative integration span".into()));
    }
    let longest = dt.iter().copied().fold(T::zero(), T::max);
    if dt.iter().all(|&d| d == longest) {
        return integrate(tape, field, h0, T::zero(), longest, cfg);
    }
    let n = cfg.steps_for(longest);
    let nn = T::from_usize(n).unwrap();
    let step: Vec<T> = dt.iter().map(|&d| d / nn).collect();
    let half_v: Vec<T> = step.iter().map(|&s| s * T::lit(0.5)).collect();
    let sixth_v: Vec<T> = step.iter().map(|&s| s / T::lit(6.0)).collect();
    let full = tape.constant(Tensor::column(step));
    let half = tape.constant(Tensor::column(half_v));
    let sixth = tape.constant(Tensor::column(sixth_v));
    let mut h = h0;
    for i in 0..n {
        h = match cfg.method {
            Method::Euler => {
                let k = field(tape, h);
                let inc = tape.mul(k, full);
                tape.add(h, inc)
            }
            Method::Rk4 => {
                let k1 = field(tape, h);
                let s1 = tape.mul(k1, half);
                let h1 = tape.add(h, s1);
                let k2 = field(tape, h1);
                let s2 = tape.mul(k2, half);
                let h2 = tape.add(h, s2);
                let k3 = field(tape, h2);
                let s3 = tape.mul(k3, full);
                let h3 = tape.add(h, s3);
                let k4 = field(tape, h3);
                let k23 = tape.add(k2, k3);
                let k23 = tape.mul_scalar(k23, T::lit(2.0));
                let k14 = tape.add(k1, k4);
                let sum = tape.add(k14, k23);
                let inc = tape.mul(sum, sixth);
                tape.add(h, inc)
            }
        };
        if !tape.value(h).is_finite() {
            return Err(Error::SolverDiverged { step: i });
        }
    }
    tape.check()?;
    Ok(h)
}
