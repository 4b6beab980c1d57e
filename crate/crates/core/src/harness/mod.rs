//! Experiment orchestration: cross-validation, hyperparameter surfaces,
//! noise and training-size studies, and report emission.
//!
//! All filters of one experiment see the same rows: each filter embeds the
//! series with its own `L`, and rows are aligned on the anchor sample so that
//! the folds (contiguous blocks of anchors) are identical across filters.

mod config;
pub mod emit;

use std::time::Instant;

pub use config::{ExperimentConfig, FilterSpec, GeneratorSpec};

use crate::baselines::{KlmsModel, KrlsModel, WienerModel};
use crate::correntropy::KernelConfig;
use crate::error::{FwfError, Result};
use crate::fwf::{FitOptions, FwfModel};
use crate::modelfile::SavedModel;
use crate::preimage::{fixed_point, FixedPointConfig, LocalModelConfig, LocalModelIndex};
use crate::signal::{
    add_gaussian_noise, embed_with_targets, kfold_split, Affine, LagVector, SupervisedDataset, TimeSeries,
};

/// Repetitions behind every recorded wall-clock time (the median is kept).
pub const TIMING_REPS: usize = 5;

/// Minimum wall-clock length of one timed test measurement.
const MIN_TEST_MS: f64 = 20.0;

pub fn mse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() {
        return Err(FwfError::DimensionMismatch {
            expected: targets.len(),
            got: predictions.len(),
        });
    }
    if targets.is_empty() {
        return Err(FwfError::EmptyInput("mse"));
    }
    let sum: f64 = predictions.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / targets.len() as f64)
}

/// A trained filter of any kind, ready to predict.
#[derive(Debug, Clone)]
pub enum FittedFilter {
    Wiener(WienerModel),
    FwfFp {
        model: FwfModel,
        config: FixedPointConfig,
    },
    FwfLm {
        model: FwfModel,
        index: LocalModelIndex,
        config: LocalModelConfig,
    },
    Klms(KlmsModel),
    Krls(KrlsModel),
}

impl FittedFilter {
    /// Trains `spec` on `data` (whose `lags` must already match the spec).
    pub fn fit(spec: &FilterSpec, data: &SupervisedDataset) -> Result<Self> {
        Ok(match spec {
            FilterSpec::Wiener { ridge, .. } => FittedFilter::Wiener(WienerModel::fit(data, *ridge)?),
            FilterSpec::FwfFp {
                sigma,
                target_condition,
                fp,
                ..
            } => {
                let opts = FitOptions {
                    target_condition: *target_condition,
                    retain_training: false,
                    ..FitOptions::default()
                };
                FittedFilter::FwfFp {
                    model: FwfModel::fit_with(data, KernelConfig::new(*sigma)?, opts)?,
                    config: *fp,
                }
            }
            FilterSpec::FwfLm {
                sigma,
                target_condition,
                lm,
                ..
            } => {
                let opts = FitOptions {
                    target_condition: *target_condition,
                    ..FitOptions::default()
                };
                let model = FwfModel::fit_with(data, KernelConfig::new(*sigma)?, opts)?;
                let index = LocalModelIndex::build(&model)?;
                FittedFilter::FwfLm {
                    model,
                    index,
                    config: *lm,
                }
            }
            FilterSpec::Klms { sigma, eta, .. } => FittedFilter::Klms(KlmsModel::train(data, *eta, *sigma)?),
            FilterSpec::Krls {
                sigma, ridge, budget, ..
            } => FittedFilter::Krls(KrlsModel::train(data, *ridge, *sigma, *budget)?),
        })
    }

    pub fn predict(&self, window: &LagVector) -> Result<f64> {
        match self {
            FittedFilter::Wiener(m) => m.predict(window),
            FittedFilter::FwfFp { model, config } => Ok(fixed_point(model, window, config)?.y),
            FittedFilter::FwfLm { model, index, config } => index.predict(model, window, config),
            FittedFilter::Klms(m) => m.predict(window),
            FittedFilter::Krls(m) => m.predict(window),
        }
    }

    pub fn predict_all(&self, data: &SupervisedDataset) -> Result<Vec<f64>> {
        data.inputs.iter().map(|w| self.predict(w)).collect()
    }

    /// Stored parameters: weights for the FWF and Wiener filters, dictionary
    /// size for the kernel adaptive filters.
    pub fn size(&self) -> usize {
        match self {
            FittedFilter::Wiener(m) => m.weights.len(),
            FittedFilter::FwfFp { model, .. } => model.weights.len(),
            FittedFilter::FwfLm { model, index, .. } => model.weights.len() + index.len(),
            FittedFilter::Klms(m) => m.len(),
            FittedFilter::Krls(m) => m.len(),
        }
    }

    pub fn lags(&self) -> usize {
        match self {
            FittedFilter::Wiener(m) => m.lags,
            FittedFilter::FwfFp { model, .. } | FittedFilter::FwfLm { model, .. } => model.lags,
            FittedFilter::Klms(m) => m.lags,
            FittedFilter::Krls(m) => m.lags,
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            FittedFilter::Wiener(m) => m.horizon,
            FittedFilter::FwfFp { model, .. } | FittedFilter::FwfLm { model, .. } => model.horizon,
            FittedFilter::Klms(m) => m.horizon,
            FittedFilter::Krls(m) => m.horizon,
        }
    }

    pub fn to_saved(&self) -> SavedModel {
        match self {
            FittedFilter::Wiener(m) => SavedModel::Wiener(m.clone()),
            FittedFilter::FwfFp { model, .. } => SavedModel::Fwf {
                model: model.clone(),
                index: None,
            },
            FittedFilter::FwfLm { model, index, .. } => SavedModel::Fwf {
                model: model.clone(),
                index: Some(index.clone()),
            },
            FittedFilter::Klms(m) => SavedModel::Klms(m.clone()),
            FittedFilter::Krls(m) => SavedModel::Krls(m.clone()),
        }
    }

    /// Wraps a loaded model. FWF models with an index predict through local
    /// models, others through the fixed point.
    pub fn from_saved(saved: SavedModel, fp: FixedPointConfig, lm: LocalModelConfig) -> Self {
        match saved {
            SavedModel::Fwf { model, index: Some(index) } => FittedFilter::FwfLm { model, index, config: lm },
            SavedModel::Fwf { model, index: None } => FittedFilter::FwfFp { model, config: fp },
            SavedModel::Wiener(m) => FittedFilter::Wiener(m),
            SavedModel::Klms(m) => FittedFilter::Klms(m),
            SavedModel::Krls(m) => FittedFilter::Krls(m),
        }
    }
}

/// Series prepared for an experiment: normalised clean targets and the
/// (possibly noisy) inputs.
#[derive(Debug, Clone)]
pub struct PreparedSeries {
    pub clean: TimeSeries,
    pub inputs: TimeSeries,
    pub affine: Affine,
}

pub fn load_series(config: &ExperimentConfig) -> Result<TimeSeries> {
    match &config.generator {
        GeneratorSpec::MackeyGlass(g) => g.generate(),
        GeneratorSpec::Lorenz(g) => g.generate(),
        GeneratorSpec::File { path, n } => {
            let f = std::fs::File::open(path).map_err(|e| FwfError::io(path, e))?;
            let s = TimeSeries::read_csv(std::io::BufReader::new(f))?;
            match n {
                Some(n) if *n < s.len() => s.slice(0, *n),
                _ => Ok(s),
            }
        }
    }
}

pub fn prepare(config: &ExperimentConfig) -> Result<PreparedSeries> {
    let raw = load_series(config)?;
    let affine = Affine::fit(&raw, config.normalization);
    let clean = affine.apply(&raw);
    let inputs = add_gaussian_noise(&clean, config.noise, config.seed)?;
    Ok(PreparedSeries { clean, inputs, affine })
}

/// Embeds with `lags`, keeping only anchors `>= first_anchor`.
pub fn aligned_dataset(
    prepared: &PreparedSeries,
    lags: usize,
    horizon: usize,
    first_anchor: usize,
) -> Result<SupervisedDataset> {
    let full = embed_with_targets(&prepared.inputs, &prepared.clean, lags, horizon)?;
    let skip = first_anchor.saturating_sub(lags - 1).min(full.len());
    let rows: Vec<usize> = (skip..full.len()).collect();
    Ok(full.subset(&rows))
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Metrics of one filter on one fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldMetrics {
    pub mse: f64,
    /// Median training time, `NaN` unless timing was requested.
    pub train_ms: f64,
    pub test_ms_per_sample: f64,
    pub model_size: usize,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldCell {
    pub fold: usize,
    /// Error message when the filter failed on this fold.
    pub outcome: std::result::Result<FoldMetrics, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterReport {
    pub spec: FilterSpec,
    pub cells: Vec<FoldCell>,
}

impl FilterReport {
    pub fn name(&self) -> &'static str {
        self.spec.name()
    }

    pub fn fold_mses(&self) -> Vec<f64> {
        self.cells
            .iter()
            .filter_map(|c| c.outcome.as_ref().ok().map(|m| m.mse))
            .collect()
    }

    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| c.outcome.is_err()).count()
    }

    /// Mean over folds; `NaN` if any fold failed.
    pub fn mean_mse(&self) -> f64 {
        let v = self.fold_mses();
        if self.failed() > 0 || v.is_empty() {
            return f64::NAN;
        }
        v.iter().sum::<f64>() / v.len() as f64
    }

    /// Sample standard deviation (`n - 1`) across folds; 0 for one fold.
    pub fn std_mse(&self) -> f64 {
        let v = self.fold_mses();
        if self.failed() > 0 || v.is_empty() {
            return f64::NAN;
        }
        if v.len() == 1 {
            return 0.0;
        }
        let m = self.mean_mse();
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    }

    pub fn first_error(&self) -> Option<&str> {
        self.cells.iter().find_map(|c| c.outcome.as_ref().err().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub config: ExperimentConfig,
    pub filters: Vec<FilterReport>,
}

impl EvalReport {
    /// First filter with the given display name.
    pub fn filter(&self, name: &str) -> Option<&FilterReport> {
        self.filters.iter().find(|f| f.name() == name)
    }

    pub fn mean_mse(&self, name: &str) -> f64 {
        self.filter(name).map_or(f64::NAN, FilterReport::mean_mse)
    }
}

/// Fits `reps` times; returns the last fit and the median time.
fn fit_timed(spec: &FilterSpec, train: &SupervisedDataset, reps: usize) -> Result<(FittedFilter, f64)> {
    let mut times = Vec::with_capacity(reps);
    let mut fitted = None;
    for _ in 0..reps.max(1) {
        let t0 = Instant::now();
        fitted = Some(FittedFilter::fit(spec, train)?);
        times.push(ms(t0));
    }
    Ok((fitted.expect("at least one repetition"), median(times)))
}

/// One test-time measurement in ms per sample. Fast filters finish a test
/// block in microseconds, so the pass repeats until the measurement is long
/// enough to be stable.
fn time_test(fitted: &FittedFilter, test: &SupervisedDataset) -> Result<f64> {
    let t0 = Instant::now();
    let mut passes = 0usize;
    loop {
        std::hint::black_box(fitted.predict_all(test)?);
        passes += 1;
        if ms(t0) >= MIN_TEST_MS {
            break;
        }
    }
    Ok(ms(t0) / (passes * test.len().max(1)) as f64)
}

fn test_mse(spec: &FilterSpec, fitted: &FittedFilter, test: &SupervisedDataset) -> Result<f64> {
    let err = mse(&fitted.predict_all(test)?, &test.targets)?;
    if !err.is_finite() {
        return Err(FwfError::Decomposition(format!("{} produced non-finite predictions", spec.name())));
    }
    Ok(err)
}

/// Fits and tests one filter on one fold.
fn run_cell(spec: &FilterSpec, train: &SupervisedDataset, test: &SupervisedDataset, timing: bool) -> Result<FoldMetrics> {
    let reps = if timing { TIMING_REPS } else { 1 };
    let (fitted, train_ms) = fit_timed(spec, train, reps)?;
    let err = test_mse(spec, &fitted, test)?;
    let test_ms_per_sample = if timing {
        median((0..reps).map(|_| time_test(&fitted, test)).collect::<Result<_>>()?)
    } else {
        f64::NAN
    };
    Ok(FoldMetrics {
        mse: err,
        train_ms: if timing { train_ms } else { f64::NAN },
        test_ms_per_sample,
        model_size: fitted.size(),
        n_train: train.len(),
        n_test: test.len(),
    })
}

/// K-fold cross-validation of every configured filter.
///
/// Setup problems (bad generator, too few rows for the folds) are errors;
/// a filter failing on a fold only marks that cell.
pub fn run_cv(config: &ExperimentConfig) -> Result<EvalReport> {
    config.validate()?;
    let prepared = prepare(config)?;
    run_cv_prepared(config, &prepared)
}

pub fn run_cv_prepared(config: &ExperimentConfig, prepared: &PreparedSeries) -> Result<EvalReport> {
    let first_anchor = config.max_lags() - 1;
    let datasets: Vec<Result<SupervisedDataset>> = config
        .filters
        .iter()
        .map(|f| aligned_dataset(prepared, f.lags(config.lags), config.horizon, first_anchor))
        .collect();
    let rows = datasets
        .iter()
        .filter_map(|d| d.as_ref().ok().map(SupervisedDataset::len))
        .next()
        .ok_or_else(|| FwfError::InsufficientData {
            needed: config.max_lags() + config.horizon + 1,
            got: prepared.clean.len(),
        })?;
    let folds = kfold_split(rows, config.folds)?;

    let filters = config
        .filters
        .iter()
        .zip(&datasets)
        .map(|(spec, data)| {
            let cells = folds
                .iter()
                .enumerate()
                .map(|(i, fold)| {
                    let outcome = match data {
                        Err(e) => Err(e.to_string()),
                        Ok(data) => run_cell(spec, &data.subset(&fold.train), &data.subset(&fold.test), config.timing)
                            .map_err(|e| e.to_string()),
                    };
                    FoldCell { fold: i, outcome }
                })
                .collect();
            FilterReport {
                spec: spec.clone(),
                cells,
            }
        })
        .collect();
    Ok(EvalReport {
        config: config.clone(),
        filters,
    })
}

/// One cell of a hyperparameter surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceCell {
    pub sigma: f64,
    pub lags: usize,
    /// Local-model order; 0 for filters without one.
    pub k: usize,
    /// Mean cross-validated MSE over the series, `NaN` when the cell failed.
    pub mse: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub cells: Vec<SurfaceCell>,
}

impl Surface {
    /// Lowest finite cell, optionally restricted to one `K`.
    pub fn argmin(&self, k: Option<usize>) -> Option<&SurfaceCell> {
        self.cells
            .iter()
            .filter(|c| c.mse.is_finite() && k.map_or(true, |k| c.k == k))
            .min_by(|a, b| a.mse.total_cmp(&b.mse))
    }

    pub fn get(&self, sigma: f64, lags: usize, k: usize) -> Option<&SurfaceCell> {
        self.cells.iter().find(|c| c.sigma == sigma && c.lags == lags && c.k == k)
    }
}

/// Error surface of `template` over `sigmas x lags x ks`.
///
/// Each cell is the mean K-fold test MSE of the base experiment with the
/// template filter alone; `ks` is ignored for filters without a local-model
/// order.
pub fn scan_hyperparameters(
    base: &ExperimentConfig,
    template: &FilterSpec,
    sigmas: &[f64],
    lags: &[usize],
    ks: &[usize],
) -> Result<Surface> {
    if sigmas.is_empty() || lags.is_empty() {
        return Err(FwfError::EmptyInput("hyperparameter grid"));
    }
    let ks: Vec<usize> = if template.k().is_some() {
        if ks.is_empty() {
            return Err(FwfError::EmptyInput("K grid"));
        }
        ks.to_vec()
    } else {
        vec![0]
    };
    let prepared = prepare(base)?;
    let mut cells = Vec::new();
    for &k in &ks {
        for &l in lags {
            for &sigma in sigmas {
                let spec = template.clone().with_sigma(sigma).with_lags(l).with_k(k);
                let cfg = ExperimentConfig {
                    lags: l,
                    timing: false,
                    filters: vec![spec],
                    ..base.clone()
                };
                let (mse, error) = match run_cv_prepared(&cfg, &prepared) {
                    Ok(r) => {
                        let f = &r.filters[0];
                        (f.mean_mse(), f.first_error().map(str::to_string))
                    }
                    Err(e) => (f64::NAN, Some(e.to_string())),
                };
                cells.push(SurfaceCell {
                    sigma,
                    lags: l,
                    k,
                    mse,
                    error,
                });
            }
        }
    }
    Ok(Surface { cells })
}

/// Runs the cross-validation once per input-noise level (targets stay clean).
pub fn run_noise_study(base: &ExperimentConfig, levels: &[f64]) -> Result<Vec<(f64, EvalReport)>> {
    if levels.is_empty() {
        return Err(FwfError::EmptyInput("noise levels"));
    }
    levels
        .iter()
        .map(|&noise| {
            let cfg = ExperimentConfig {
                noise,
                ..base.clone()
            };
            run_cv(&cfg).map(|r| (noise, r))
        })
        .collect()
}

/// One filter at one training size.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub filter: String,
    pub n: usize,
    pub mse: f64,
    pub train_ms: f64,
    pub test_ms_per_sample: f64,
    pub model_size: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

impl ScalingTable {
    fn points(&self, filter: &str, f: impl Fn(&ScalingRow) -> f64) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.filter == filter && r.error.is_none())
            .map(|r| (r.n as f64, f(r)))
            .collect()
    }

    pub fn test_slope(&self, filter: &str) -> f64 {
        loglog_slope(&self.points(filter, |r| r.test_ms_per_sample))
    }

    pub fn train_slope(&self, filter: &str) -> f64 {
        loglog_slope(&self.points(filter, |r| r.train_ms))
    }
}

/// Trains every filter on the `n` rows just before a fixed test block of
/// `test_len` rows, for each `n` in `sizes`, recording test MSE and the
/// median of [`TIMING_REPS`] wall-clock measurements.
pub fn run_scaling_study(config: &ExperimentConfig, sizes: &[usize], test_len: usize) -> Result<ScalingTable> {
    config.validate()?;
    let max_n = *sizes.iter().max().ok_or(FwfError::EmptyInput("training sizes"))?;
    if test_len == 0 {
        return Err(FwfError::param("test_len", "must be positive"));
    }
    let lmax = config.max_lags();
    let needed = max_n + test_len + lmax + config.horizon - 1;
    let cfg = match config.generator.n() {
        Some(n) if n >= needed => config.clone(),
        _ => ExperimentConfig {
            generator: config.generator.with_n(needed),
            ..config.clone()
        },
    };
    let prepared = prepare(&cfg)?;
    let mut rows = Vec::new();
    for spec in &cfg.filters {
        let data = aligned_dataset(&prepared, spec.lags(cfg.lags), cfg.horizon, lmax - 1)?;
        if data.len() < needed - lmax - cfg.horizon + 1 {
            return Err(FwfError::InsufficientData {
                needed,
                got: prepared.clean.len(),
            });
        }
        let test_start = max_n;
        let test = data.subset(&(test_start..test_start + test_len).collect::<Vec<_>>());
        let mut fitted = Vec::with_capacity(sizes.len());
        for &n in sizes {
            let train = data.subset(&(test_start - n..test_start).collect::<Vec<_>>());
            let row = fit_timed(spec, &train, TIMING_REPS)
                .and_then(|(f, train_ms)| test_mse(spec, &f, &test).map(|e| (f, train_ms, e)));
            fitted.push(row);
        }
        // Test timings are interleaved across sizes so that a transient slow
        // spell on the machine does not bias one size.
        let mut times = vec![Vec::with_capacity(TIMING_REPS); sizes.len()];
        for _ in 0..TIMING_REPS {
            for (i, f) in fitted.iter().enumerate() {
                if let Ok((f, _, _)) = f {
                    times[i].push(time_test(f, &test)?);
                }
            }
        }
        for ((&n, f), t) in sizes.iter().zip(fitted).zip(times) {
            rows.push(match f {
                Ok((f, train_ms, mse)) => ScalingRow {
                    filter: spec.name().to_string(),
                    n,
                    mse,
                    train_ms,
                    test_ms_per_sample: median(t),
                    model_size: f.size(),
                    error: None,
                },
                Err(e) => ScalingRow {
                    filter: spec.name().to_string(),
                    n,
                    mse: f64::NAN,
                    train_ms: f64::NAN,
                    test_ms_per_sample: f64::NAN,
                    model_size: 0,
                    error: Some(e.to_string()),
                },
            });
        }
    }
    Ok(ScalingTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::MackeyGlass;

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(mse(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]).unwrap(), 5.0 / 3.0);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mse(&[], &[]).is_err());
    }

    fn small_mg(n: usize) -> ExperimentConfig {
        ExperimentConfig {
            generator: GeneratorSpec::MackeyGlass(MackeyGlass {
                n,
                ..MackeyGlass::default()
            }),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn folds_are_aligned_across_lags() {
        let cfg = ExperimentConfig {
            filters: vec![FilterSpec::wiener().with_lags(3), FilterSpec::fwf_fp(1.5).with_lags(9)],
            ..small_mg(200)
        };
        let p = prepare(&cfg).unwrap();
        let a = aligned_dataset(&p, 3, 1, cfg.max_lags() - 1).unwrap();
        let b = aligned_dataset(&p, 9, 1, cfg.max_lags() - 1).unwrap();
        assert_eq!(a.len(), b.len());
        assert!(a.inputs.iter().zip(&b.inputs).all(|(x, y)| x.anchor == y.anchor));
        assert_eq!(a.targets, b.targets);
    }

    #[test]
    fn aggregation_identity() {
        let r = run_cv(&small_mg(300)).unwrap();
        for f in &r.filters {
            let v = f.fold_mses();
            assert_eq!(v.len(), 5);
            let m = v.iter().sum::<f64>() / 5.0;
            assert!((f.mean_mse() - m).abs() <= 1e-12);
        }
    }

    #[test]
    fn failure_is_isolated() {
        // A zero ridge on a constant series makes the Wiener system singular.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let s = TimeSeries::from_values(vec![0.5; 60]).unwrap();
        s.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
        let cfg = ExperimentConfig {
            generator: GeneratorSpec::File { path, n: None },
            lags: 3,
            filters: vec![FilterSpec::wiener(), FilterSpec::klms(1.0)],
            ..ExperimentConfig::default()
        };
        let r = run_cv(&cfg).unwrap();
        assert_eq!(r.filters[0].failed(), 5);
        assert!(r.filters[0].mean_mse().is_nan());
        assert_eq!(r.filters[1].failed(), 0);

        let alone = run_cv(&ExperimentConfig {
            filters: vec![FilterSpec::klms(1.0)],
            ..cfg
        })
        .unwrap();
        assert_eq!(alone.filters[0].fold_mses(), r.filters[1].fold_mses());
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [1.0f64, 2.0, 4.0, 8.0].iter().map(|&x| (x, 3.0 * x.powf(1.5))).collect();
        assert!((loglog_slope(&pts) - 1.5).abs() < 1e-12);
        assert!(loglog_slope(&pts[..1]).is_nan());
    }

    #[test]
    fn degenerate_surface_cell_is_marked() {
        let s = scan_hyperparameters(&small_mg(60), &FilterSpec::fwf_lm(1.5, 1), &[1.5], &[3, 80], &[1]).unwrap();
        assert_eq!(s.cells.len(), 2);
        assert!(s.cells[0].mse.is_finite());
        assert!(s.cells[1].mse.is_nan() && s.cells[1].error.is_some());
    }
}
