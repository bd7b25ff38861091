use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    t: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> Default for Adam<T> {
    fn default() -> Self {
        Self::new(T::lit(1e-3), T::lit(0.9), T::lit(0.999), T::lit(1e-8))
    }
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: T, beta1: T, beta2: T, eps: T) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn with_lr(lr: T) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }

    /// Number of steps taken so far.
    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Applies one update in place. Moment buffers are allocated lazily on
    /// the first call and must keep matching shapes afterwards.
    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &[Tensor<T>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Invalid(format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::Shape {
                    op: "adam_step",
                    left: p.shape(),
                    right: g.shape(),
                });
            }
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient(i));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len() || self.m.iter().zip(params.iter()).any(|(m, p)| m.shape() != p.shape()) {
            return Err(Error::Invalid("parameter set changed between Adam steps".into()));
        }

        self.t += 1;
        let t = self.t as i32;
        let one = T::one();
        let bc1 = one - self.beta1.powi(t);
        let bc2 = one - self.beta2.powi(t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let (p, m, v) = (p.data_mut(), m.data_mut(), v.data_mut());
            for (j, &gj) in g.data().iter().enumerate() {
                m[j] = self.beta1 * m[j] + (one - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (one - self.beta2) * gj * gj;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] = p[j] - self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Rescales `grads` so that their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm<T: Scalar>(grads: &mut [Tensor<T>], max_norm: T) -> T {
    let norm = grads.iter().map(|g| g.norm_sq()).sum::<T>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            for v in g.data_mut() {
                *v = *v * s;
            }
        }
    }
    norm
}
