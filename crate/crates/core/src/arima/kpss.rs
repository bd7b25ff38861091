use crate::scalar::Scalar;

/// 5% critical value of the level-stationarity KPSS test.
pub const KPSS_CRITICAL_5PCT: f64 = 0.463;

/// Bartlett truncation lag `⌊4·(n/100)^{1/4}⌋`.
pub fn kpss_lag(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Level-stationarity KPSS statistic. Zero-variance input yields 0.
pub fn kpss_statistic<T: Scalar>(series: &[T]) -> T {
    let n = series.len();
    if n == 0 {
        return T::zero();
    }
    let nf = T::from_usize(n).unwrap();
    let mean = series.iter().copied().sum::<T>() / nf;
    let e: Vec<T> = series.iter().map(|v| *v - mean).collect();
    let gamma0 = e.iter().map(|v| *v * *v).sum::<T>() / nf;
    if gamma0 <= T::zero() {
        return T::zero();
    }
    let lag = kpss_lag(n);
    let mut lrv = gamma0;
    for j in 1..=lag.min(n - 1) {
        let g: T = (j..n).map(|t| e[t] * e[t - j]).sum::<T>() / nf;
        let w = T::one() - T::from_usize(j).unwrap() / T::from_usize(lag + 1).unwrap();
        lrv = lrv + T::lit(2.0) * w * g;
    }
    if lrv <= T::zero() {
        return T::zero();
    }
    let mut s = T::zero();
    let mut sum_s2 = T::zero();
    for v in &e {
        s = s + *v;
        sum_s2 = sum_s2 + s * s;
    }
    sum_s2 / (nf * nf * lrv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_is_zero() {
        assert_eq!(kpss_statistic(&[3.0f64; 50]), 0.0);
    }

    #[test]
    fn lag_rule() {
        assert_eq!(kpss_lag(100), 4);
        assert_eq!(kpss_lag(500), 5);
        assert_eq!(kpss_lag(17520), 14);
    }

    #[test]
    fn trend_is_not_stationary() {
        let y: Vec<f64> = (0..200).map(|i| i as f64).collect();
        assert!(kpss_statistic(&y) > KPSS_CRITICAL_5PCT);
    }
}
