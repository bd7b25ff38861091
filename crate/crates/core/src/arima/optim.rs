//! Derivative-free minimisation (Nelder–Mead simplex).

use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub f: T,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub max_iter: usize,
    /// Relative spread of simplex values at which the search stops.
    pub f_tol: f64,
    /// Absolute simplex diameter at which the search stops.
    pub x_tol: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            f_tol: 1e-12,
            x_tol: 1e-9,
        }
    }
}

impl NelderMead {
    /// Minimises `f` from `x0` with initial simplex offsets `step` along
    /// each axis. One restart from the best vertex guards against premature
    /// collapse of the simplex.
    pub fn minimize<T: Scalar>(&self, mut f: impl FnMut(&[T]) -> T, x0: &[T], step: &[T]) -> Minimum<T> {
        let first = self.run(&mut f, x0, step, self.max_iter);
        if first.x.is_empty() {
            return first;
        }
        let left = self.max_iter.saturating_sub(first.iterations).max(1);
        let second = self.run(&mut f, &first.x, step, left);
        let (x, fx) = if second.f <= first.f { (second.x, second.f) } else { (first.x, first.f) };
        Minimum {
            x,
            f: fx,
            iterations: first.iterations + second.iterations,
            converged: first.converged && second.converged,
        }
    }

    fn run<T: Scalar>(&self, f: &mut impl FnMut(&[T]) -> T, x0: &[T], step: &[T], max_iter: usize) -> Minimum<T> {
        let n = x0.len();
        if n == 0 {
            return Minimum {
                x: vec![],
                f: f(&[]),
                iterations: 0,
                converged: true,
            };
        }
        let (alpha, gamma, rho, sigma) = (T::one(), T::lit(2.0), T::lit(0.5), T::lit(0.5));
        let mut simplex: Vec<Vec<T>> = Vec::with_capacity(n + 1);
        simplex.push(x0.to_vec());
        for i in 0..n {
            let mut v = x0.to_vec();
            v[i] = v[i] + step[i];
            simplex.push(v);
        }
        let mut values: Vec<T> = simplex.iter().map(|v| f(v)).collect();
        let f_tol = T::lit(self.f_tol);
        let x_tol = T::lit(self.x_tol);

        let mut iterations = 0;
        let mut converged = false;
        while iterations < max_iter {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let spread = (values[n] - values[0]).abs();
            let scale = values[0].abs() + T::lit(1e-300);
            let diameter = simplex[1..]
                .iter()
                .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (*a - *b).abs()).fold(T::zero(), T::max))
                .fold(T::zero(), T::max);
            if spread <= f_tol * scale && diameter <= x_tol.max(f_tol.sqrt() * T::lit(1e-3)) || diameter <= x_tol {
                converged = true;
                break;
            }
            iterations += 1;

            let nn = T::from_usize(n).unwrap();
            let centroid: Vec<T> = (0..n)
                .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<T>() / nn)
                .collect();
            let along = |coef: T| -> Vec<T> {
                centroid
                    .iter()
                    .zip(&simplex[n])
                    .map(|(c, w)| *c + coef * (*c - *w))
                    .collect()
            };
            let xr = along(alpha);
            let fr = f(&xr);
            if fr < values[0] {
                let xe = along(gamma);
                let fe = f(&xe);
                if fe < fr {
                    simplex[n] = xe;
                    values[n] = fe;
                } else {
                    simplex[n] = xr;
                    values[n] = fr;
                }
                continue;
            }
            if fr < values[n - 1] {
                simplex[n] = xr;
                values[n] = fr;
                continue;
            }
            let (xc, fc) = if fr < values[n] {
                let xc = along(rho);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(-rho);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
                continue;
            }
            let best = simplex[0].clone();
            for i in 1..=n {
                simplex[i] = best.iter().zip(&simplex[i]).map(|(b, v)| *b + sigma * (*v - *b)).collect();
                values[i] = f(&simplex[i]);
            }
        }
        let best = (0..=n)
            .min_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap();
        Minimum {
            x: simplex[best].clone(),
            f: values[best],
            iterations,
            converged,
        }
    }
}
