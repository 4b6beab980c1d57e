//! Correntropy matrix, conditioning, and the closed-form filter weights.

use nalgebra::DMatrix;

use crate::correntropy::{
    autocorrentropy, autocorrentropy_windows, center_correntropy, center_cross_correntropy,
    cross_correntropy, cross_correntropy_windows, mean_kernel, CorrentropyVector,
    CrossCorrentropyVector, KernelConfig,
};
use crate::error::{FwfError, Result};
use crate::linalg;
use crate::signal::{embed_with_targets, LagVector, SupervisedDataset, TimeSeries};

pub const DEFAULT_TARGET_CONDITION: f64 = 30.0;

/// Diagonal shift applied to reach a target condition number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizationRecord {
    /// `lambda / eig_min`; infinite when `eig_min <= 0`.
    pub gamma: f64,
    pub lambda: f64,
    pub target_condition: f64,
    pub achieved_condition: f64,
    pub eig_min: f64,
    pub eig_max: f64,
}

impl RegularizationRecord {
    pub fn original_condition(&self) -> f64 {
        if self.eig_min > 0.0 {
            self.eig_max / self.eig_min
        } else {
            f64::INFINITY
        }
    }
}

/// Symmetric Toeplitz matrix `V[i][j] = v[|i - j|]`, stored as its first row,
/// plus an optional diagonal shift.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrentropyMatrix {
    first_row: CorrentropyVector,
    reg: Option<RegularizationRecord>,
}

impl CorrentropyMatrix {
    pub fn new(v: CorrentropyVector) -> Result<Self> {
        if v.is_empty() {
            return Err(FwfError::EmptyInput("correntropy vector"));
        }
        Ok(Self {
            first_row: v,
            reg: None,
        })
    }

    /// Reattaches a stored shift, e.g. when loading a saved model.
    pub(crate) fn with_regularization(mut self, reg: RegularizationRecord) -> Self {
        self.reg = Some(reg);
        self
    }

    pub fn order(&self) -> usize {
        self.first_row.len()
    }

    pub fn first_row(&self) -> &CorrentropyVector {
        &self.first_row
    }

    pub fn regularization(&self) -> Option<&RegularizationRecord> {
        self.reg.as_ref()
    }

    fn shift(&self) -> f64 {
        self.reg.map_or(0.0, |r| r.lambda)
    }

    /// Entry of the (possibly regularised) matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let v = self.first_row.values[i.abs_diff(j)];
        if i == j {
            v + self.shift()
        } else {
            v
        }
    }

    /// First row including the diagonal shift.
    pub fn shifted_row(&self) -> Vec<f64> {
        let mut row = self.first_row.values.clone();
        row[0] += self.shift();
        row
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        linalg::toeplitz(&self.shifted_row())
    }

    /// Shifts the diagonal so that `cond(V + lambda I)` equals `target`.
    ///
    /// With extreme eigenvalues `lo <= hi` the shift is
    /// `lambda = (hi - target * lo) / (target - 1)`. Matrices already at or
    /// below the target are returned with `lambda = 0`. Any earlier shift is
    /// discarded first.
    pub fn regularize(&self, target_condition: f64) -> Result<Self> {
        if !(target_condition > 1.0) {
            return Err(FwfError::param(
                "target_condition",
                format!("must exceed 1, got {target_condition}"),
            ));
        }
        let base = linalg::toeplitz(&self.first_row.values);
        let (lo, hi) = linalg::eig_extremes(&base);
        if !(hi > 0.0) {
            return Err(FwfError::DegenerateMatrix { eig_max: hi });
        }
        let current = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        let record = if current <= target_condition {
            RegularizationRecord {
                gamma: 0.0,
                lambda: 0.0,
                target_condition,
                achieved_condition: current,
                eig_min: lo,
                eig_max: hi,
            }
        } else {
            let lambda = (hi - target_condition * lo) / (target_condition - 1.0);
            RegularizationRecord {
                gamma: if lo > 0.0 { lambda / lo } else { f64::INFINITY },
                lambda,
                target_condition,
                achieved_condition: (hi + lambda) / (lo + lambda),
                eig_min: lo,
                eig_max: hi,
            }
        };
        Ok(Self {
            first_row: self.first_row.clone(),
            reg: Some(record),
        })
    }

    /// Solves `V w = rhs` by Cholesky factorisation of the dense matrix.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        linalg::cholesky_solve(&self.to_dense(), rhs)
    }

    /// Same system through the Levinson recursion.
    pub fn solve_toeplitz(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        linalg::levinson_solve(&self.shifted_row(), rhs)
    }

    /// `|V w - rhs|_inf`.
    pub fn residual(&self, w: &[f64], rhs: &[f64]) -> f64 {
        let n = self.order();
        (0..n)
            .map(|i| {
                let vw: f64 = (0..n).map(|j| self.get(i, j) * w[j]).sum();
                (vw - rhs[i]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Fitting switches beyond kernel size and conditioning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub target_condition: f64,
    /// Center both the autocorrentropy and the cross-correntropy.
    pub centered: bool,
    /// Keep the training windows in the model (needed by local models).
    pub retain_training: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            target_condition: DEFAULT_TARGET_CONDITION,
            centered: false,
            retain_training: true,
        }
    }
}

/// Trained filter: `L` weights of Gaussian bumps centred on the input lags.
#[derive(Debug, Clone, PartialEq)]
pub struct FwfModel {
    pub kernel: KernelConfig,
    pub lags: usize,
    pub horizon: usize,
    pub weights: Vec<f64>,
    pub matrix: CorrentropyMatrix,
    pub rho: CrossCorrentropyVector,
    pub training: Option<SupervisedDataset>,
}

impl FwfModel {
    /// Fits on the windows of a supervised dataset (any subset of anchors).
    pub fn fit(data: &SupervisedDataset, kernel: KernelConfig, target_condition: f64) -> Result<Self> {
        Self::fit_with(
            data,
            kernel,
            FitOptions {
                target_condition,
                ..FitOptions::default()
            },
        )
    }

    pub fn fit_with(data: &SupervisedDataset, kernel: KernelConfig, opts: FitOptions) -> Result<Self> {
        if data.len() <= data.lags {
            return Err(FwfError::InsufficientData {
                needed: data.lags,
                got: data.len(),
            });
        }
        let mut v = autocorrentropy_windows(data, &kernel)?;
        let mut rho = cross_correntropy_windows(data, &kernel)?;
        if opts.centered {
            let current: Vec<f64> = data.inputs.iter().map(LagVector::current).collect();
            let mv = mean_kernel(&current, &current, &kernel);
            let mr = mean_kernel(&current, &data.targets, &kernel);
            v.values.iter_mut().for_each(|x| *x -= mv);
            v.centered = true;
            rho.values.iter_mut().for_each(|x| *x -= mr);
            rho.centered = true;
        }
        let training = opts.retain_training.then(|| data.clone());
        Self::from_statistics(v, rho, kernel, data.horizon, opts.target_condition, training)
    }

    /// Fits from raw series: `z(t) = targets[t + horizon]` is predicted from
    /// the inputs up to `t`.
    pub fn fit_series(
        inputs: &TimeSeries,
        targets: &TimeSeries,
        lags: usize,
        horizon: usize,
        kernel: KernelConfig,
        opts: FitOptions,
    ) -> Result<Self> {
        let data = embed_with_targets(inputs, targets, lags, horizon)?;
        let n = inputs.len();
        let x = inputs.slice(0, n - horizon)?;
        let z = targets.slice(horizon, n)?;
        let mut v = autocorrentropy(inputs, lags, &kernel)?;
        let mut rho = cross_correntropy(&x, &z, lags, &kernel)?;
        if opts.centered {
            v = center_correntropy(&v, inputs, &kernel)?;
            rho = center_cross_correntropy(&rho, &x, &z, &kernel)?;
        }
        let training = opts.retain_training.then_some(data);
        Self::from_statistics(v, rho, kernel, horizon, opts.target_condition, training)
    }

    fn from_statistics(
        v: CorrentropyVector,
        rho: CrossCorrentropyVector,
        kernel: KernelConfig,
        horizon: usize,
        target_condition: f64,
        training: Option<SupervisedDataset>,
    ) -> Result<Self> {
        let lags = v.len();
        let matrix = CorrentropyMatrix::new(v)?.regularize(target_condition)?;
        let weights = matrix.solve(&rho.values)?;
        let model = Self {
            kernel,
            lags,
            horizon,
            weights,
            matrix,
            rho,
            training,
        };
        model.check_residual()?;
        Ok(model)
    }

    /// `|V_reg w - rho|_inf / |rho|_inf`.
    pub fn relative_residual(&self) -> f64 {
        let scale = self.rho.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let r = self.matrix.residual(&self.weights, &self.rho.values);
        if scale > 0.0 {
            r / scale
        } else {
            r
        }
    }

    pub(crate) fn check_residual(&self) -> Result<()> {
        let rel = self.relative_residual();
        if !(rel <= 1e-8) {
            return Err(FwfError::Decomposition(format!(
                "weight residual {rel:e} exceeds 1e-8 of |rho|"
            )));
        }
        Ok(())
    }

    pub fn regularization(&self) -> &RegularizationRecord {
        self.matrix
            .regularization()
            .expect("fitted models are always regularised")
    }

    pub fn sigma(&self) -> f64 {
        self.kernel.sigma
    }

    /// Output function `sum_tau w[tau] G(window[tau], y)` evaluated at `y`.
    /// Costs exactly `L` kernel evaluations.
    pub fn evaluate_functional(&self, window: &LagVector, y: f64) -> Result<f64> {
        self.check_window(window)?;
        Ok(self.functional(&window.values, y))
    }

    #[inline]
    pub(crate) fn functional(&self, window: &[f64], y: f64) -> f64 {
        self.weights
            .iter()
            .zip(window)
            .map(|(w, x)| w * self.kernel.eval(*x, y))
            .sum()
    }

    /// `sum_tau w[tau] G(a[tau], b[tau])` for two lag-aligned windows.
    #[inline]
    pub(crate) fn pair_functional(&self, a: &[f64], b: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (x, y))| w * self.kernel.eval(*x, *y))
            .sum()
    }

    pub(crate) fn check_window(&self, window: &LagVector) -> Result<()> {
        if window.len() != self.lags {
            return Err(FwfError::DimensionMismatch {
                expected: self.lags,
                got: window.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{embed, MackeyGlass};
    use approx::assert_relative_eq;

    fn vector(values: Vec<f64>) -> CorrentropyVector {
        let n = values.len();
        CorrentropyVector {
            values,
            sigma: 1.0,
            normalized: false,
            n_effective: vec![100; n],
            centered: false,
        }
    }

    #[test]
    fn matrix_layout() {
        let m = CorrentropyMatrix::new(vector(vec![1.0])).unwrap();
        assert_eq!(m.get(0, 0), 1.0);
        let m = CorrentropyMatrix::new(vector(vec![1.0, 0.5, 0.2])).unwrap();
        let expected = [[1.0, 0.5, 0.2], [0.5, 1.0, 0.5], [0.2, 0.5, 1.0]];
        for (i, row) in expected.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert_eq!(m.get(i, j), *v);
                assert_eq!(m.get(i, j), m.get(j, i));
            }
        }
        assert!(CorrentropyMatrix::new(vector(vec![])).is_err());
    }

    #[test]
    fn regularize_two_by_two() {
        // [[5.5, 4.5], [4.5, 5.5]] has eigenvalues 10 and 1.
        let m = CorrentropyMatrix::new(vector(vec![5.5, 4.5])).unwrap();
        let r = m.regularize(3.0).unwrap();
        let rec = r.regularization().unwrap();
        assert_relative_eq!(rec.lambda, 3.5, max_relative = 1e-12);
        assert_relative_eq!(rec.achieved_condition, 3.0, max_relative = 1e-12);
        assert_relative_eq!(rec.gamma, 3.5, max_relative = 1e-12);
        assert_relative_eq!(linalg::condition_number(&r.to_dense()), 3.0, max_relative = 1e-10);
    }

    #[test]
    fn regularize_leaves_well_conditioned_alone() {
        let id = CorrentropyMatrix::new(vector(vec![1.0, 0.0, 0.0])).unwrap();
        let r = id.regularize(5.0).unwrap();
        assert_eq!(r.regularization().unwrap().lambda, 0.0);
        // eigenvalues 1.5 +- 0.5 -> condition 2
        let m = CorrentropyMatrix::new(vector(vec![1.5, 0.5])).unwrap();
        let r = m.regularize(30.0).unwrap();
        assert_eq!(r.regularization().unwrap().lambda, 0.0);
        assert_relative_eq!(r.regularization().unwrap().achieved_condition, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn regularize_errors() {
        let m = CorrentropyMatrix::new(vector(vec![0.0, 0.0])).unwrap();
        assert!(matches!(m.regularize(30.0), Err(FwfError::DegenerateMatrix { .. })));
        let m = CorrentropyMatrix::new(vector(vec![1.0, 0.5])).unwrap();
        assert!(m.regularize(1.0).is_err());
    }

    #[test]
    fn regularize_singular_marks_gamma_undefined() {
        let m = CorrentropyMatrix::new(vector(vec![1.0; 4])).unwrap();
        let rec = *m.regularize(30.0).unwrap().regularization().unwrap();
        assert!(rec.gamma.is_infinite());
        assert_relative_eq!(rec.lambda, 4.0 / 29.0, max_relative = 1e-9);
        assert_relative_eq!(rec.achieved_condition, 30.0, max_relative = 1e-9);
    }

    #[test]
    fn conditioning_is_monotone_in_shift() {
        let m = CorrentropyMatrix::new(vector(vec![1.0, 0.9, 0.7, 0.4])).unwrap();
        let base = linalg::toeplitz(&m.first_row().values);
        let mut prev = f64::INFINITY;
        for k in 0..40 {
            let lambda = k as f64 * 0.025;
            let shifted = &base + DMatrix::identity(4, 4) * lambda;
            let c = linalg::condition_number(&shifted);
            assert!(c <= prev * (1.0 + 1e-12));
            prev = c;
        }
    }

    #[test]
    fn constant_data_gives_equal_weights() {
        let s = TimeSeries::from_values(vec![0.8; 40]).unwrap();
        let data = embed(&s, 4, 1).unwrap();
        let model = FwfModel::fit(&data, KernelConfig::new(1.0).unwrap(), 30.0).unwrap();
        let w0 = model.weights[0];
        for w in &model.weights {
            assert_relative_eq!(*w, w0, max_relative = 1e-10);
        }
        assert!(model.relative_residual() <= 1e-8);
    }

    #[test]
    fn tiny_sigma_gives_identity_system() {
        // distinct values -> off-diagonal correntropy underflows to zero
        let xs: Vec<f64> = (0..60).map(|i| i as f64 * 1.37 % 17.0).collect();
        let s = TimeSeries::from_values(xs).unwrap();
        let data = embed(&s, 3, 1).unwrap();
        let model = FwfModel::fit(&data, KernelConfig::new(1e-3).unwrap(), 30.0).unwrap();
        assert_eq!(model.regularization().lambda, 0.0);
        assert_eq!(model.weights, model.rho.values);
    }

    #[test]
    fn mg_fit_residual() {
        let s = MackeyGlass {
            n: 2000,
            ..MackeyGlass::default()
        }
        .generate()
        .unwrap();
        let data = embed(&s, 7, 1).unwrap();
        let model = FwfModel::fit(&data, KernelConfig::new(1.5).unwrap(), 30.0).unwrap();
        assert!(model.relative_residual() <= 1e-8);
        assert_relative_eq!(model.regularization().achieved_condition, 30.0, max_relative = 1e-6);
    }

    #[test]
    fn fit_series_matches_window_estimates_in_structure() {
        let s = MackeyGlass {
            n: 300,
            ..MackeyGlass::default()
        }
        .generate()
        .unwrap();
        let m = FwfModel::fit_series(&s, &s, 5, 1, KernelConfig::new(1.0).unwrap(), FitOptions::default())
            .unwrap();
        assert_eq!(m.weights.len(), 5);
        assert_eq!(m.matrix.first_row().values[0], 1.0);
        assert_eq!(m.training.as_ref().unwrap().len(), 300 - 5);
        assert!(m.relative_residual() <= 1e-8);
    }

    #[test]
    fn functional_values() {
        let s = TimeSeries::from_values(vec![0.0, 1.0, 0.5, 0.2, 0.9, 0.1]).unwrap();
        let data = embed(&s, 2, 1).unwrap();
        let mut model = FwfModel::fit(&data, KernelConfig::new(1.0).unwrap(), 30.0).unwrap();
        model.weights = vec![0.5, 0.5];
        let w = LagVector::new(vec![0.0, 2.0], 1);
        assert_relative_eq!(
            model.evaluate_functional(&w, 1.0).unwrap(),
            (-0.5f64).exp(),
            max_relative = 1e-14
        );
        assert!(model.evaluate_functional(&w, 1e6).unwrap().abs() < 1e-300);
        assert!(model.evaluate_functional(&LagVector::new(vec![1.0], 0), 0.0).is_err());
    }
}
