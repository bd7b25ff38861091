use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Training objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    Mse,
    Mae,
    /// Quadratic below `delta`, linear above.
    Huber { delta: f64 },
}

impl LossKind {
    pub const HUBER_DEFAULT: LossKind = LossKind::Huber { delta: 1.0 };

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::Mae => "mae",
            LossKind::Huber { .. } => "huber",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Some(LossKind::Mse),
            "mae" => Some(LossKind::Mae),
            "huber" => Some(LossKind::HUBER_DEFAULT),
            _ => None,
        }
    }
}

/// Mean loss between `pred` and `target` recorded on the tape.
pub fn compute_loss<T: Scalar>(tape: &mut Tape<T>, kind: LossKind, pred: Var, target: Var) -> Result<Var> {
    let (sp, st) = (tape.shape(pred), tape.shape(target));
    if sp != st {
        return Err(Error::Shape {
            op: "compute_loss",
            left: sp,
            right: st,
        });
    }
    let r = tape.sub(pred, target);
    let per_elem = match kind {
        LossKind::Mse => tape.square(r),
        LossKind::Mae => tape.abs(r),
        LossKind::Huber { delta } => {
            if !(delta > 0.0) {
                return Err(Error::Config(format!("huber delta must be positive, got {delta}")));
            }
            let d = T::lit(delta);
            let half = T::lit(0.5);
            let inner = tape.value(r).map(|v| if v.abs() <= d { T::one() } else { T::zero() });
            let outer = inner.map(|v| T::one() - v);
            let inner = tape.constant(inner);
            let outer = tape.constant(outer);
            let sq = tape.square(r);
            let quad = tape.mul_scalar(sq, half);
            let ab = tape.abs(r);
            let shifted = tape.add_scalar(ab, -half * d);
            let lin = tape.mul_scalar(shifted, d);
            let q = tape.mul(quad, inner);
            let l = tape.mul(lin, outer);
            tape.add(q, l)
        }
    };
    let loss = tape.mean(per_elem);
    tape.check()?;
    Ok(loss)
}

/// Convenience: loss value for plain tensors.
pub fn loss_value<T: Scalar>(kind: LossKind, pred: &Tensor<T>, target: &Tensor<T>) -> Result<T> {
    let mut tape = Tape::new();
    let p = tape.constant(pred.clone());
    let t = tape.constant(target.clone());
    let l = compute_loss(&mut tape, kind, p, t)?;
    Ok(tape.value(l).item())
}
