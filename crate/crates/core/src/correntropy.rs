//! Gaussian kernel and correntropy estimators.
//!
//! All lagged estimators use only fully valid sample pairs and normalise each
//! lag by its own pair count, so `v[tau] = mean_t G(x(t), x(t - tau))` over
//! `t = tau..N`. Summation order is fixed (ascending `t`), which keeps the
//! results bit-reproducible.

use std::f64::consts::PI;

use crate::error::{FwfError, Result};
use crate::signal::{SupervisedDataset, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub sigma: f64,
    /// Scale by `1 / (sqrt(2 pi) sigma)` so the kernel integrates to one.
    pub normalized: bool,
}

impl KernelConfig {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(FwfError::param("sigma", format!("must be positive, got {sigma}")));
        }
        Ok(Self {
            sigma,
            normalized: false,
        })
    }

    pub fn normalized(sigma: f64) -> Result<Self> {
        Ok(Self {
            normalized: true,
            ..Self::new(sigma)?
        })
    }

    #[inline]
    fn peak(&self) -> f64 {
        if self.normalized {
            1.0 / ((2.0 * PI).sqrt() * self.sigma)
        } else {
            1.0
        }
    }

    #[inline]
    pub(crate) fn eval_sq(&self, dist_sq: f64) -> f64 {
        self.peak() * (-dist_sq / (2.0 * self.sigma * self.sigma)).exp()
    }

    /// Scalar kernel `G(a, b)`.
    #[inline]
    pub fn eval(&self, a: f64, b: f64) -> f64 {
        let d = a - b;
        self.eval_sq(d * d)
    }
}

/// `exp(-|a - b|^2 / (2 sigma^2))`, optionally normalised. Euclidean norm for
/// vector arguments.
pub fn gaussian(a: &[f64], b: &[f64], config: &KernelConfig) -> Result<f64> {
    if a.len() != b.len() {
        return Err(FwfError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(config.eval_sq(sq_dist(a, b)))
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lagged autocorrentropy `v[0..L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrentropyVector {
    pub values: Vec<f64>,
    pub sigma: f64,
    pub normalized: bool,
    /// Pairs contributing to each lag.
    pub n_effective: Vec<usize>,
    pub centered: bool,
}

impl CorrentropyVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check_config(&self, config: &KernelConfig) -> Result<()> {
        if self.sigma != config.sigma || self.normalized != config.normalized {
            return Err(FwfError::InconsistentConfig(format!(
                "vector built with sigma={} normalized={}, got sigma={} normalized={}",
                self.sigma, self.normalized, config.sigma, config.normalized
            )));
        }
        Ok(())
    }
}

/// Lagged input/target cross-correntropy `rho[0..L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCorrentropyVector {
    pub values: Vec<f64>,
    pub sigma: f64,
    pub centered: bool,
}

pub fn autocorrentropy(
    series: &TimeSeries,
    lags: usize,
    config: &KernelConfig,
) -> Result<CorrentropyVector> {
    let x = series.samples();
    let n = x.len();
    if lags == 0 {
        return Err(FwfError::param("lags", "must be at least 1"));
    }
    if lags >= n {
        return Err(FwfError::InsufficientData { needed: lags, got: n });
    }
    let mut values = Vec::with_capacity(lags);
    let mut counts = Vec::with_capacity(lags);
    for tau in 0..lags {
        let mut acc = 0.0;
        for t in tau..n {
            acc += config.eval(x[t], x[t - tau]);
        }
        values.push(acc / (n - tau) as f64);
        counts.push(n - tau);
    }
    Ok(CorrentropyVector {
        values,
        sigma: config.sigma,
        normalized: config.normalized,
        n_effective: counts,
        centered: false,
    })
}

/// `(1/N^2) sum_t sum_s G(a(t), b(s))`.
pub fn mean_kernel(a: &[f64], b: &[f64], config: &KernelConfig) -> f64 {
    let mut acc = 0.0;
    for &x in a {
        let mut row = 0.0;
        for &y in b {
            row += config.eval(x, y);
        }
        acc += row;
    }
    acc / (a.len() as f64 * b.len() as f64)
}

/// Subtracts the mean kernel value of the series from every lag.
pub fn center_correntropy(
    v: &CorrentropyVector,
    series: &TimeSeries,
    config: &KernelConfig,
) -> Result<CorrentropyVector> {
    v.check_config(config)?;
    if v.centered {
        return Err(FwfError::InconsistentConfig("vector is already centered".into()));
    }
    let m = mean_kernel(series.samples(), series.samples(), config);
    Ok(CorrentropyVector {
        values: v.values.iter().map(|x| x - m).collect(),
        centered: true,
        ..v.clone()
    })
}

/// `rho[tau] = mean_t G(x(t - tau), z(t))` over valid `t`, with `z` aligned
/// sample-for-sample to `x`.
pub fn cross_correntropy(
    inputs: &TimeSeries,
    targets: &TimeSeries,
    lags: usize,
    config: &KernelConfig,
) -> Result<CrossCorrentropyVector> {
    let x = inputs.samples();
    let z = targets.samples();
    if x.len() != z.len() {
        return Err(FwfError::DimensionMismatch {
            expected: x.len(),
            got: z.len(),
        });
    }
    let n = x.len();
    if lags == 0 {
        return Err(FwfError::param("lags", "must be at least 1"));
    }
    if lags >= n {
        return Err(FwfError::InsufficientData { needed: lags, got: n });
    }
    let values = (0..lags)
        .map(|tau| {
            let mut acc = 0.0;
            for t in tau..n {
                acc += config.eval(x[t - tau], z[t]);
            }
            acc / (n - tau) as f64
        })
        .collect();
    Ok(CrossCorrentropyVector {
        values,
        sigma: config.sigma,
        centered: false,
    })
}

pub fn center_cross_correntropy(
    rho: &CrossCorrentropyVector,
    inputs: &TimeSeries,
    targets: &TimeSeries,
    config: &KernelConfig,
) -> Result<CrossCorrentropyVector> {
    if rho.sigma != config.sigma {
        return Err(FwfError::InconsistentConfig(format!(
            "vector built with sigma={}, got sigma={}",
            rho.sigma, config.sigma
        )));
    }
    if rho.centered {
        return Err(FwfError::InconsistentConfig("vector is already centered".into()));
    }
    let m = mean_kernel(inputs.samples(), targets.samples(), config);
    Ok(CrossCorrentropyVector {
        values: rho.values.iter().map(|x| x - m).collect(),
        sigma: rho.sigma,
        centered: true,
    })
}

/// Autocorrentropy estimated over the windows of a dataset: each window
/// contributes the pair `(x(i), x(i - tau))` to lag `tau`. Works for
/// non-contiguous training sets such as cross-validation folds.
pub fn autocorrentropy_windows(
    data: &SupervisedDataset,
    config: &KernelConfig,
) -> Result<CorrentropyVector> {
    if data.is_empty() {
        return Err(FwfError::EmptyInput("training windows"));
    }
    let n = data.len();
    let values = (0..data.lags)
        .map(|tau| {
            let mut acc = 0.0;
            for w in &data.inputs {
                acc += config.eval(w.values[0], w.values[tau]);
            }
            acc / n as f64
        })
        .collect();
    Ok(CorrentropyVector {
        values,
        sigma: config.sigma,
        normalized: config.normalized,
        n_effective: vec![n; data.lags],
        centered: false,
    })
}

/// Cross-correntropy between window lags and targets.
pub fn cross_correntropy_windows(
    data: &SupervisedDataset,
    config: &KernelConfig,
) -> Result<CrossCorrentropyVector> {
    if data.is_empty() {
        return Err(FwfError::EmptyInput("training windows"));
    }
    let n = data.len();
    let values = (0..data.lags)
        .map(|tau| {
            let mut acc = 0.0;
            for (w, z) in data.inputs.iter().zip(&data.targets) {
                acc += config.eval(w.values[tau], *z);
            }
            acc / n as f64
        })
        .collect();
    Ok(CrossCorrentropyVector {
        values,
        sigma: config.sigma,
        centered: false,
    })
}

/// Mean kernel value over explicit sample pairs.
pub fn pair_correntropy(pairs: &[(f64, f64)], config: &KernelConfig) -> Result<f64> {
    if pairs.is_empty() {
        return Err(FwfError::EmptyInput("sample pairs"));
    }
    let acc: f64 = pairs.iter().map(|&(a, b)| config.eval(a, b)).sum();
    Ok(acc / pairs.len() as f64)
}

/// Empirical density of the event `x_a = x_b`: the fraction of pairs with
/// `|x_a - x_b| < eps`, divided by the strip width `2 eps`.
pub fn density_along_bisector(pairs: &[(f64, f64)], epsilon: f64) -> Result<f64> {
    if pairs.is_empty() {
        return Err(FwfError::EmptyInput("sample pairs"));
    }
    if !(epsilon > 0.0) {
        return Err(FwfError::param("epsilon", "must be positive"));
    }
    let hits = pairs
        .iter()
        .filter(|(a, b)| (a - b).abs() < epsilon)
        .count();
    Ok(hits as f64 / pairs.len() as f64 / (2.0 * epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg(sigma: f64) -> KernelConfig {
        KernelConfig::new(sigma).unwrap()
    }

    #[test]
    fn gaussian_values() {
        assert_eq!(gaussian(&[0.3], &[0.3], &cfg(0.7)).unwrap(), 1.0);
        assert_abs_diff_eq!(gaussian(&[0.0], &[2.0], &cfg(1.0)).unwrap(), 0.135335283236612_7, epsilon = 1e-15);
        let a = [0.1, -2.0, 3.0];
        let b = [1.5, 0.2, 2.0];
        assert_eq!(
            gaussian(&a, &b, &cfg(1.3)).unwrap(),
            gaussian(&b, &a, &cfg(1.3)).unwrap()
        );
        assert!(gaussian(&a, &b[..2], &cfg(1.0)).is_err());
        assert!(KernelConfig::new(0.0).is_err());
    }

    #[test]
    fn normalized_kernel_peak() {
        let k = KernelConfig::normalized(0.5).unwrap();
        assert_abs_diff_eq!(k.eval(1.0, 1.0), 1.0 / ((2.0 * PI).sqrt() * 0.5), epsilon = 1e-15);
    }

    #[test]
    fn constant_series_is_all_ones() {
        let s = TimeSeries::from_values(vec![0.7; 20]).unwrap();
        let v = autocorrentropy(&s, 5, &cfg(0.1)).unwrap();
        assert!(v.values.iter().all(|&x| x == 1.0));
        let c = center_correntropy(&v, &s, &cfg(0.1)).unwrap();
        assert!(c.values.iter().all(|&x| x == 0.0));
        assert!(c.centered);
    }

    #[test]
    fn alternating_series_lag_one() {
        let s = TimeSeries::from_values(vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        let v = autocorrentropy(&s, 2, &cfg(1.0)).unwrap();
        assert_eq!(v.values[0], 1.0);
        assert_abs_diff_eq!(v.values[1], (-2.0f64).exp(), epsilon = 1e-15);
        assert_eq!(v.n_effective, vec![4, 3]);
    }

    #[test]
    fn centering_two_point_series() {
        let s = TimeSeries::from_values(vec![1.0, -1.0]).unwrap();
        let v = autocorrentropy(&s, 1, &cfg(1.0)).unwrap();
        let c = center_correntropy(&v, &s, &cfg(1.0)).unwrap();
        let m = 0.25 * (2.0 + 2.0 * (-2.0f64).exp());
        assert_abs_diff_eq!(m, 0.567_667_641_618_306_3, epsilon = 1e-12);
        assert_abs_diff_eq!(c.values[0], 1.0 - m, epsilon = 1e-15);
    }

    #[test]
    fn centering_rejects_mismatched_config() {
        let s = TimeSeries::from_values(vec![1.0, -1.0, 0.5]).unwrap();
        let v = autocorrentropy(&s, 2, &cfg(1.0)).unwrap();
        assert!(matches!(
            center_correntropy(&v, &s, &cfg(2.0)),
            Err(FwfError::InconsistentConfig(_))
        ));
    }

    #[test]
    fn too_many_lags() {
        let s = TimeSeries::from_values(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            autocorrentropy(&s, 3, &cfg(1.0)),
            Err(FwfError::InsufficientData { .. })
        ));
    }

    #[test]
    fn cross_correntropy_shifted_copy() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let z: Vec<f64> = (0..30).map(|t| if t >= 3 { x[t - 3] } else { 5.0 }).collect();
        let xs = TimeSeries::from_values(x).unwrap();
        let zs = TimeSeries::from_values(z).unwrap();
        let rho = cross_correntropy(&xs, &zs, 5, &cfg(0.5)).unwrap();
        assert_eq!(rho.values[3], 1.0);
    }

    #[test]
    fn cross_correntropy_ramp() {
        let x = TimeSeries::from_values(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let rho = cross_correntropy(&x, &x, 2, &cfg(1.0)).unwrap();
        assert_eq!(rho.values[0], 1.0);
        assert_abs_diff_eq!(rho.values[1], (-0.5f64).exp(), epsilon = 1e-15);
        let c = TimeSeries::from_values(vec![2.5; 6]).unwrap();
        let rc = cross_correntropy(&c, &c, 3, &cfg(1.0)).unwrap();
        assert!(rc.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn cross_correntropy_alignment() {
        let x = TimeSeries::from_values(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let z = TimeSeries::from_values(vec![0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(
            cross_correntropy(&x, &z, 2, &cfg(1.0)),
            Err(FwfError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn bisector_density_identical_pairs() {
        let pairs = vec![(0.3, 0.3); 10];
        assert_abs_diff_eq!(density_along_bisector(&pairs, 0.05).unwrap(), 10.0, epsilon = 1e-12);
        assert!(density_along_bisector(&[], 0.05).is_err());
    }

    #[test]
    fn small_sigma_tends_to_identity() {
        let x: Vec<f64> = (0..200).map(|i| ((i * 7919) % 211) as f64 / 211.0).collect();
        let s = TimeSeries::from_values(x).unwrap();
        let v = autocorrentropy(&s, 5, &cfg(1e-4)).unwrap();
        assert_eq!(v.values[0], 1.0);
        assert!(v.values[1..].iter().all(|&x| x < 0.01));
    }
}
