//! Comparison filters: the linear Wiener solution and two kernel adaptive
//! filters (KLMS and KRLS) over the same delay windows.

use nalgebra::{DMatrix, DVector};

use crate::correntropy::{sq_dist, KernelConfig};
use crate::error::{FwfError, Result};
use crate::linalg;
use crate::signal::{LagVector, SupervisedDataset};

fn check_len(expected: usize, window: &LagVector) -> Result<()> {
    if window.len() != expected {
        return Err(FwfError::DimensionMismatch {
            expected,
            got: window.len(),
        });
    }
    Ok(())
}

/// Linear FIR predictor solving `(R + ridge I) w = p`.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerModel {
    pub weights: Vec<f64>,
    pub lags: usize,
    pub ridge: f64,
    pub horizon: usize,
}

impl WienerModel {
    /// Biased (`1/N`) window autocorrelation `R` and cross-correlation `p`,
    /// accumulated in row order.
    pub fn fit(data: &SupervisedDataset, ridge: f64) -> Result<Self> {
        let l = data.lags;
        if data.len() <= l {
            return Err(FwfError::InsufficientData {
                needed: l,
                got: data.len(),
            });
        }
        if !(ridge >= 0.0) {
            return Err(FwfError::param("ridge", "must be non-negative"));
        }
        let n = data.len() as f64;
        let mut r = DMatrix::<f64>::zeros(l, l);
        let mut p = vec![0.0; l];
        for (w, z) in data.inputs.iter().zip(&data.targets) {
            for i in 0..l {
                p[i] += w.values[i] * z;
                for j in i..l {
                    r[(i, j)] += w.values[i] * w.values[j];
                }
            }
        }
        for i in 0..l {
            p[i] /= n;
            for j in i..l {
                r[(i, j)] /= n;
                r[(j, i)] = r[(i, j)];
            }
            r[(i, i)] += ridge;
        }
        let weights = linalg::cholesky_solve(&r, &p)?;
        let rw = &r * DVector::from_column_slice(&weights);
        let resid = rw.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if resid > 1e-8 * scale.max(f64::MIN_POSITIVE) {
            return Err(FwfError::Decomposition(format!(
                "normal equations residual {resid:e} too large (ill-conditioned without ridge?)"
            )));
        }
        Ok(Self {
            weights,
            lags: l,
            ridge,
            horizon: data.horizon,
        })
    }

    pub fn predict(&self, window: &LagVector) -> Result<f64> {
        check_len(self.lags, window)?;
        Ok(self.weights.iter().zip(&window.values).map(|(w, x)| w * x).sum())
    }

    pub fn training_mse(&self, data: &SupervisedDataset) -> Result<f64> {
        let mut acc = 0.0;
        for (w, z) in data.inputs.iter().zip(&data.targets) {
            let e = self.predict(w)? - z;
            acc += e * e;
        }
        Ok(acc / data.len() as f64)
    }
}

/// Kernel least-mean-squares: every training window becomes a centre with
/// coefficient `eta * error`.
#[derive(Debug, Clone, PartialEq)]
pub struct KlmsModel {
    /// Row-major `n x L` centre matrix.
    centers: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub eta: f64,
    pub kernel: KernelConfig,
    pub lags: usize,
    pub horizon: usize,
    /// A-priori error at each training step.
    pub learning_curve: Vec<f64>,
}

impl KlmsModel {
    pub fn new(lags: usize, eta: f64, sigma: f64, horizon: usize) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(FwfError::param("eta", "must be positive"));
        }
        if lags == 0 {
            return Err(FwfError::param("lags", "must be at least 1"));
        }
        Ok(Self {
            centers: Vec::new(),
            coefficients: Vec::new(),
            eta,
            kernel: KernelConfig::new(sigma)?,
            lags,
            horizon,
            learning_curve: Vec::new(),
        })
    }

    /// One online pass over the dataset.
    pub fn train(data: &SupervisedDataset, eta: f64, sigma: f64) -> Result<Self> {
        let mut model = Self::new(data.lags, eta, sigma, data.horizon)?;
        model.centers.reserve(data.len() * data.lags);
        for (w, z) in data.inputs.iter().zip(&data.targets) {
            model.update(w, *z)?;
        }
        Ok(model)
    }

    pub fn update(&mut self, window: &LagVector, target: f64) -> Result<f64> {
        let y = self.predict(window)?;
        let e = target - y;
        self.centers.extend_from_slice(&window.values);
        self.coefficients.push(self.eta * e);
        self.learning_curve.push(e);
        Ok(e)
    }

    pub fn from_parts(
        centers: Vec<Vec<f64>>,
        coefficients: Vec<f64>,
        eta: f64,
        sigma: f64,
        horizon: usize,
    ) -> Result<Self> {
        let lags = centers.first().map_or(0, Vec::len);
        let mut model = Self::new(lags.max(1), eta, sigma, horizon)?;
        if centers.len() != coefficients.len() || centers.iter().any(|c| c.len() != lags) {
            return Err(FwfError::InconsistentConfig("ragged KLMS centres".into()));
        }
        model.centers = centers.concat();
        model.coefficients = coefficients;
        Ok(model)
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.lags..(i + 1) * self.lags]
    }

    /// `sum_i a_i G(window, c_i)`; linear in the dictionary size.
    pub fn predict(&self, window: &LagVector) -> Result<f64> {
        check_len(self.lags, window)?;
        Ok(self
            .centers
            .chunks_exact(self.lags)
            .zip(&self.coefficients)
            .map(|(c, a)| a * self.kernel.eval_sq(sq_dist(c, &window.values)))
            .sum())
    }
}

/// Kernel recursive least squares without sparsification: the exact dual
/// solution `(K + ridge I) alpha = z` maintained through rank-one updates of
/// the inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct KrlsModel {
    centers: Vec<f64>,
    targets: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Inverse of the regularised Gram matrix, row-major `n x n`.
    kinv: Vec<f64>,
    pub ridge: f64,
    pub kernel: KernelConfig,
    pub lags: usize,
    pub horizon: usize,
    /// Maximum dictionary size; oldest centres are dropped beyond it.
    pub budget: Option<usize>,
    /// Times the inverse had to be rebuilt from scratch.
    pub refactorizations: usize,
}

impl KrlsModel {
    pub fn new(lags: usize, ridge: f64, sigma: f64, budget: Option<usize>, horizon: usize) -> Result<Self> {
        if !(ridge > 0.0) {
            return Err(FwfError::param("ridge", "must be positive"));
        }
        if budget == Some(0) {
            return Err(FwfError::param("budget", "must be at least 1"));
        }
        if lags == 0 {
            return Err(FwfError::param("lags", "must be at least 1"));
        }
        Ok(Self {
            centers: Vec::new(),
            targets: Vec::new(),
            alpha: Vec::new(),
            kinv: Vec::new(),
            ridge,
            kernel: KernelConfig::new(sigma)?,
            lags,
            horizon,
            budget,
            refactorizations: 0,
        })
    }

    pub fn train(data: &SupervisedDataset, ridge: f64, sigma: f64, budget: Option<usize>) -> Result<Self> {
        let mut model = Self::new(data.lags, ridge, sigma, budget, data.horizon)?;
        for (w, z) in data.inputs.iter().zip(&data.targets) {
            model.update(w, *z)?;
        }
        Ok(model)
    }

    pub fn from_parts(
        centers: Vec<Vec<f64>>,
        alpha: Vec<f64>,
        ridge: f64,
        sigma: f64,
        budget: Option<usize>,
        horizon: usize,
    ) -> Result<Self> {
        let lags = centers.first().map_or(0, Vec::len);
        let mut model = Self::new(lags.max(1), ridge, sigma, budget, horizon)?;
        if centers.len() != alpha.len() || centers.iter().any(|c| c.len() != lags) {
            return Err(FwfError::InconsistentConfig("ragged KRLS centres".into()));
        }
        model.centers = centers.concat();
        model.alpha = alpha;
        Ok(model)
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.lags..(i + 1) * self.lags]
    }

    fn gram(&self, a: &[f64], b: &[f64]) -> f64 {
        self.kernel.eval_sq(sq_dist(a, b))
    }

    pub fn update(&mut self, window: &LagVector, target: f64) -> Result<()> {
        check_len(self.lags, window)?;
        if self.targets.len() != self.alpha.len() {
            return Err(FwfError::InconsistentConfig(
                "model was loaded without training targets and cannot be updated".into(),
            ));
        }
        let n = self.len();
        let x = &window.values;
        let k: Vec<f64> = (0..n).map(|i| self.gram(self.center(i), x)).collect();
        let knn = self.gram(x, x) + self.ridge;
        // a = Kinv k
        let a: Vec<f64> = (0..n)
            .map(|i| self.kinv[i * n..(i + 1) * n].iter().zip(&k).map(|(q, v)| q * v).sum())
            .collect();
        let gamma = knn - k.iter().zip(&a).map(|(u, v)| u * v).sum::<f64>();

        self.centers.extend_from_slice(x);
        self.targets.push(target);

        // In exact arithmetic gamma >= ridge; falling well below it means the
        // recursive inverse has lost accuracy.
        if !(gamma >= 0.5 * self.ridge) {
            self.refactorize()?;
        } else {
            let e = target - k.iter().zip(&self.alpha).map(|(u, v)| u * v).sum::<f64>();
            let m = n + 1;
            let mut next = vec![0.0; m * m];
            for i in 0..n {
                for j in 0..n {
                    next[i * m + j] = self.kinv[i * n + j] + a[i] * a[j] / gamma;
                }
                next[i * m + n] = -a[i] / gamma;
                next[n * m + i] = -a[i] / gamma;
            }
            next[n * m + n] = 1.0 / gamma;
            self.kinv = next;
            for (al, ai) in self.alpha.iter_mut().zip(&a) {
                *al -= ai * e / gamma;
            }
            self.alpha.push(e / gamma);
        }

        if let Some(budget) = self.budget {
            if self.len() > budget {
                self.drop_oldest();
            }
        }
        Ok(())
    }

    /// Removes centre 0 via the partitioned-inverse downdate.
    fn drop_oldest(&mut self) {
        let n = self.len();
        let m = n - 1;
        let q00 = self.kinv[0];
        let mut next = vec![0.0; m * m];
        for i in 0..m {
            let qi = self.kinv[(i + 1) * n];
            for j in 0..m {
                let qj = self.kinv[j + 1];
                next[i * m + j] = self.kinv[(i + 1) * n + (j + 1)] - qi * qj / q00;
            }
        }
        self.kinv = next;
        self.centers.drain(0..self.lags);
        self.targets.remove(0);
        self.alpha = (0..m)
            .map(|i| self.kinv[i * m..(i + 1) * m].iter().zip(&self.targets).map(|(q, z)| q * z).sum())
            .collect();
    }

    /// Rebuilds the inverse and the dual weights from the dictionary.
    fn refactorize(&mut self) -> Result<()> {
        self.refactorizations += 1;
        let n = self.targets.len();
        let mut gram = DMatrix::from_fn(n, n, |i, j| self.gram(self.center(i), self.center(j)));
        for i in 0..n {
            gram[(i, i)] += self.ridge;
        }
        let chol = gram
            .cholesky()
            .ok_or_else(|| FwfError::Decomposition("KRLS Gram matrix is not positive definite".into()))?;
        let inv = chol.inverse();
        self.kinv = (0..n * n).map(|idx| inv[(idx / n, idx % n)]).collect();
        let alpha = chol.solve(&DVector::from_column_slice(&self.targets));
        self.alpha = alpha.iter().copied().collect();
        Ok(())
    }

    /// `|(K + ridge I) alpha - z|_inf / |z|_inf` over the current dictionary.
    pub fn dual_residual(&self) -> f64 {
        let n = self.len();
        let mut worst = 0.0f64;
        for i in 0..n {
            let mut acc = self.ridge * self.alpha[i];
            for j in 0..n {
                acc += self.gram(self.center(i), self.center(j)) * self.alpha[j];
            }
            worst = worst.max((acc - self.targets[i]).abs());
        }
        let scale = self.targets.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale > 0.0 {
            worst / scale
        } else {
            worst
        }
    }

    pub fn predict(&self, window: &LagVector) -> Result<f64> {
        check_len(self.lags, window)?;
        Ok(self
            .centers
            .chunks_exact(self.lags)
            .zip(&self.alpha)
            .map(|(c, a)| a * self.kernel.eval_sq(sq_dist(c, &window.values)))
            .sum())
    }
}
