//! Mapping the filter's feature-space output back to a scalar.
//!
//! Two routes are provided:
//!
//! * [`fixed_point`] iterates the stationarity condition of the output
//!   function, a weighted mean-shift over the window samples. It needs
//!   nothing but the weights.
//! * [`LocalModelIndex`] pairs each training anchor `i` with the partner
//!   anchor `m` whose lag-aligned kernel evaluation
//!   `zhat = sum_tau w[tau] G(x(i - tau), x(m - tau))` best matches the
//!   training target. At test time the nearest training anchors lend their
//!   partners, and the ratio `z / zhat` restores the target scale.

use std::cmp::Ordering;

use crate::correntropy::sq_dist;
use crate::error::{FwfError, Result};
use crate::fwf::FwfModel;
use crate::signal::{LagVector, SupervisedDataset};

const DEGENERATE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPointInit {
    /// Most recent window sample.
    LastSample,
    /// Filter-weight average of the window.
    WeightedMean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub init: FixedPointInit,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: 1e-6,
            init: FixedPointInit::LastSample,
        }
    }
}

impl FixedPointConfig {
    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(FwfError::param("max_iters", "must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(FwfError::param("tol", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOutcome {
    pub y: f64,
    pub iters: usize,
    pub converged: bool,
    /// The weighted kernel sum vanished (mixed-sign weights cancelled).
    pub degenerate: bool,
}

/// One fixed-point update. `None` when the denominator vanishes.
pub fn fixed_point_step(model: &FwfModel, window: &[f64], y: f64) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (w, x) in model.weights.iter().zip(window) {
        let g = w * model.kernel.eval(*x, y);
        num += g * x;
        den += g;
    }
    (den.abs() >= DEGENERATE).then(|| num / den)
}

pub fn fixed_point(model: &FwfModel, window: &LagVector, config: &FixedPointConfig) -> Result<FixedPointOutcome> {
    model.check_window(window)?;
    config.validate()?;
    let xs = &window.values;
    let mut y = match config.init {
        FixedPointInit::LastSample => xs[0],
        FixedPointInit::WeightedMean => {
            let ws: f64 = model.weights.iter().sum();
            if ws.abs() >= DEGENERATE {
                model.weights.iter().zip(xs).map(|(w, x)| w * x).sum::<f64>() / ws
            } else {
                xs.iter().sum::<f64>() / xs.len() as f64
            }
        }
    };
    for iter in 1..=config.max_iters {
        let Some(next) = fixed_point_step(model, xs, y) else {
            return Ok(FixedPointOutcome {
                y,
                iters: iter - 1,
                converged: false,
                degenerate: true,
            });
        };
        let delta = (next - y).abs();
        y = next;
        if delta < config.tol {
            return Ok(FixedPointOutcome {
                y,
                iters: iter,
                converged: true,
                degenerate: false,
            });
        }
    }
    Ok(FixedPointOutcome {
        y,
        iters: config.max_iters,
        converged: false,
        degenerate: false,
    })
}

/// How `z / zhat` rescales the probes when `K > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleRule {
    /// Divide every probe target by the mean of the probes' `zhat`.
    MeanZhat,
    /// Each probe uses its own `z / zhat`.
    PerProbe,
}

/// How the probing training anchors are chosen for a test window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeMetric {
    /// Nearest by the amplitude of the most recent sample.
    Amplitude,
    /// Take `candidates` amplitude-nearest anchors, then keep the `K` closest
    /// by full-window Euclidean distance. Cost stays independent of `N`.
    Window { candidates: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalModelConfig {
    pub k: usize,
    pub scale: ScaleRule,
    pub probe: ProbeMetric,
}

impl Default for LocalModelConfig {
    fn default() -> Self {
        Self {
            k: 1,
            scale: ScaleRule::MeanZhat,
            probe: ProbeMetric::Window { candidates: 128 },
        }
    }
}

impl LocalModelConfig {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }
}

/// Best partner of one training anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalEntry {
    pub anchor: usize,
    pub partner: usize,
    /// Row of the partner within the training set.
    pub partner_row: usize,
    pub z: f64,
    pub zhat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalModelIndex {
    entries: Vec<LocalEntry>,
    /// Training rows ordered by `(x(i), row)`.
    sorted_rows: Vec<usize>,
    sorted_amp: Vec<f64>,
    /// Training windows in the same order, row-major, so a candidate pool is
    /// one contiguous scan.
    sorted_windows: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalPrediction {
    pub y: f64,
    pub probes: Vec<usize>,
    /// Probes whose scale was forced to 1 because `zhat` vanished.
    pub clamped: usize,
    /// `K` was larger than the training set.
    pub k_clamped: bool,
}

impl LocalModelIndex {
    /// Builds the index from the training windows retained in the model.
    pub fn build(model: &FwfModel) -> Result<Self> {
        let training = model
            .training
            .as_ref()
            .ok_or(FwfError::EmptyInput("model carries no training windows"))?;
        Self::build_from(model, training)
    }

    /// Exhaustive `O(N^2 L)` partner search; ties go to the lowest row.
    pub fn build_from(model: &FwfModel, training: &SupervisedDataset) -> Result<Self> {
        if training.is_empty() {
            return Err(FwfError::EmptyInput("training set"));
        }
        if training.lags != model.lags {
            return Err(FwfError::DimensionMismatch {
                expected: model.lags,
                got: training.lags,
            });
        }
        let rows = &training.inputs;
        let entries = rows
            .iter()
            .zip(&training.targets)
            .map(|(win_i, &z)| {
                let mut best = (f64::INFINITY, 0usize, 0.0);
                for (m, win_m) in rows.iter().enumerate() {
                    let zhat = model.pair_functional(&win_i.values, &win_m.values);
                    let err = (z - zhat).abs();
                    if err < best.0 {
                        best = (err, m, zhat);
                    }
                }
                LocalEntry {
                    anchor: win_i.anchor,
                    partner: rows[best.1].anchor,
                    partner_row: best.1,
                    z,
                    zhat: best.2,
                }
            })
            .collect();
        Ok(Self::from_entries(entries, training))
    }

    pub(crate) fn from_entries(entries: Vec<LocalEntry>, training: &SupervisedDataset) -> Self {
        let mut sorted_rows: Vec<usize> = (0..training.len()).collect();
        sorted_rows.sort_by(|&a, &b| {
            let (xa, xb) = (training.inputs[a].current(), training.inputs[b].current());
            xa.total_cmp(&xb).then(a.cmp(&b))
        });
        let sorted_amp = sorted_rows.iter().map(|&r| training.inputs[r].current()).collect();
        let sorted_windows = sorted_rows
            .iter()
            .flat_map(|&r| training.inputs[r].values.iter().copied())
            .collect();
        Self {
            entries,
            sorted_rows,
            sorted_amp,
            sorted_windows,
        }
    }

    pub fn entries(&self) -> &[LocalEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The `k` rows whose current amplitude is closest to `q`, ordered by
    /// `(distance, row)`. `O(k + log N)` barring large runs of ties.
    pub fn nearest_by_amplitude(&self, q: f64, k: usize) -> Vec<usize> {
        self.nearest_positions(q, k)
            .into_iter()
            .map(|p| self.sorted_rows[p])
            .collect()
    }

    /// Like [`Self::nearest_by_amplitude`], but returns positions in the
    /// sorted order.
    fn nearest_positions(&self, q: f64, k: usize) -> Vec<usize> {
        let n = self.sorted_amp.len();
        let k = k.min(n);
        if k == 0 {
            return Vec::new();
        }
        let split = self.sorted_amp.partition_point(|&a| a < q);
        let (mut lo, mut hi) = (split, split);
        let mut picked: Vec<(f64, usize)> = Vec::with_capacity(k + 2);
        // Expand outwards in non-decreasing distance; keep going while the next
        // candidate ties with the k-th distance so the final sort sees every
        // tied row.
        loop {
            let left = (lo > 0).then(|| (q - self.sorted_amp[lo - 1]).abs());
            let right = (hi < n).then(|| (self.sorted_amp[hi] - q).abs());
            let next = match (left, right) {
                (None, None) => break,
                (Some(l), None) => l,
                (None, Some(r)) => r,
                (Some(l), Some(r)) => l.min(r),
            };
            if picked.len() >= k && next > picked[k - 1].0 {
                break;
            }
            if right.is_some_and(|r| r == next) {
                picked.push((next, hi));
                hi += 1;
            } else {
                picked.push((next, lo - 1));
                lo -= 1;
            }
        }
        let rows = &self.sorted_rows;
        picked.sort_by(|a, b| a.0.total_cmp(&b.0).then(rows[a.1].cmp(&rows[b.1])));
        picked.truncate(k);
        picked.into_iter().map(|(_, p)| p).collect()
    }

    fn probes(&self, window: &[f64], k: usize, metric: ProbeMetric) -> Vec<usize> {
        match metric {
            ProbeMetric::Amplitude => self.nearest_by_amplitude(window[0], k),
            ProbeMetric::Window { candidates } => {
                let l = window.len();
                let pool = self.nearest_positions(window[0], candidates.max(k));
                let mut ranked: Vec<(f64, usize)> = pool
                    .into_iter()
                    .map(|p| (sq_dist(&self.sorted_windows[p * l..(p + 1) * l], window), self.sorted_rows[p]))
                    .collect();
                ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                ranked.truncate(k);
                ranked.into_iter().map(|(_, r)| r).collect()
            }
        }
    }

    pub fn predict(&self, model: &FwfModel, window: &LagVector, config: &LocalModelConfig) -> Result<f64> {
        Ok(self.predict_detailed(model, window, config)?.y)
    }

    pub fn predict_detailed(
        &self,
        model: &FwfModel,
        window: &LagVector,
        config: &LocalModelConfig,
    ) -> Result<LocalPrediction> {
        model.check_window(window)?;
        if config.k == 0 {
            return Err(FwfError::param("k", "must be at least 1"));
        }
        let training = model
            .training
            .as_ref()
            .ok_or(FwfError::EmptyInput("model carries no training windows"))?;
        if training.len() != self.entries.len() {
            return Err(FwfError::DimensionMismatch {
                expected: self.entries.len(),
                got: training.len(),
            });
        }
        let k_clamped = config.k > self.entries.len();
        let probes = self.probes(&window.values, config.k, config.probe);
        let k = probes.len() as f64;

        let mut clamped = 0;
        let mut acc = 0.0;
        match config.scale {
            ScaleRule::MeanZhat => {
                let zbar = probes.iter().map(|&r| self.entries[r].zhat).sum::<f64>() / k;
                let degenerate = zbar.abs() < DEGENERATE;
                for &r in &probes {
                    let e = &self.entries[r];
                    let u = model.pair_functional(&training.inputs[e.partner_row].values, &window.values);
                    let scale = if degenerate {
                        clamped += 1;
                        1.0
                    } else {
                        e.z / zbar
                    };
                    acc += scale * u;
                }
            }
            ScaleRule::PerProbe => {
                for &r in &probes {
                    let e = &self.entries[r];
                    let u = model.pair_functional(&training.inputs[e.partner_row].values, &window.values);
                    let scale = if e.zhat.abs() < DEGENERATE {
                        clamped += 1;
                        1.0
                    } else {
                        e.z / e.zhat
                    };
                    acc += scale * u;
                }
            }
        }
        Ok(LocalPrediction {
            y: acc / k,
            probes,
            clamped,
            k_clamped,
        })
    }
}

/// Pre-imaging route for a whole test set.
#[derive(Debug, Clone, Copy)]
pub enum Strategy<'a> {
    FixedPoint(FixedPointConfig),
    LocalModel(&'a LocalModelIndex, LocalModelConfig),
}

pub fn predict_series(model: &FwfModel, strategy: Strategy<'_>, test: &SupervisedDataset) -> Result<Vec<f64>> {
    if !test.is_empty() && (test.lags != model.lags || test.horizon != model.horizon) {
        return Err(FwfError::InconsistentConfig(format!(
            "test set embedded with L={} horizon={}, model has L={} horizon={}",
            test.lags, test.horizon, model.lags, model.horizon
        )));
    }
    test.inputs
        .iter()
        .map(|w| match strategy {
            Strategy::FixedPoint(cfg) => fixed_point(model, w, &cfg).map(|o| o.y),
            Strategy::LocalModel(index, cfg) => index.predict(model, w, &cfg),
        })
        .collect()
}

/// Ordering helper shared with tests: `(distance, row)` lexicographic.
pub fn by_distance_then_row(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correntropy::KernelConfig;
    use crate::signal::{embed, MackeyGlass, TimeSeries};
    use proptest::prelude::*;
    use proptest::strategy::Strategy;

    fn toy_model(weights: Vec<f64>, sigma: f64) -> FwfModel {
        let l = weights.len();
        let xs: Vec<f64> = (0..(l + 30)).map(|i| (i as f64 * 0.61).sin()).collect();
        let data = embed(&TimeSeries::from_values(xs).unwrap(), l, 1).unwrap();
        let mut m = FwfModel::fit(&data, KernelConfig::new(sigma).unwrap(), 30.0).unwrap();
        m.weights = weights;
        m
    }

    #[test]
    fn fixed_point_single_lag() {
        let m = toy_model(vec![1.0], 1.0);
        let out = fixed_point(&m, &LagVector::new(vec![0.42], 0), &FixedPointConfig::default()).unwrap();
        assert_eq!(out.y, 0.42);
        assert!(out.converged);
        assert_eq!(out.iters, 1);
    }

    #[test]
    fn fixed_point_coincident_centres() {
        let m = toy_model(vec![0.3, 0.3, 0.3], 0.5);
        let out = fixed_point(&m, &LagVector::new(vec![1.7; 3], 2), &FixedPointConfig::default()).unwrap();
        assert!((out.y - 1.7).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn fixed_point_symmetric_stationary_point() {
        let m = toy_model(vec![0.5, 0.5], 1.0);
        let cfg = FixedPointConfig {
            init: FixedPointInit::WeightedMean,
            ..FixedPointConfig::default()
        };
        let out = fixed_point(&m, &LagVector::new(vec![0.0, 2.0], 1), &cfg).unwrap();
        assert_eq!(out.y, 1.0);
        assert!(out.converged);
    }

    #[test]
    fn fixed_point_flags_cancellation() {
        let m = toy_model(vec![1.0, -1.0], 1.0);
        let out = fixed_point(&m, &LagVector::new(vec![0.5, 0.5], 1), &FixedPointConfig::default()).unwrap();
        assert!(out.degenerate);
        assert!(!out.converged);
        assert_eq!(out.y, 0.5);
    }

    fn mg_model(n: usize, l: usize) -> FwfModel {
        let s = MackeyGlass {
            n,
            ..MackeyGlass::default()
        }
        .generate()
        .unwrap();
        let data = embed(&s, l, 1).unwrap();
        FwfModel::fit(&data, KernelConfig::new(1.5).unwrap(), 30.0).unwrap()
    }

    #[test]
    fn single_anchor_index() {
        let model = mg_model(200, 3);
        let one = model.training.as_ref().unwrap().subset(&[10]);
        let idx = LocalModelIndex::build_from(&model, &one).unwrap();
        let e = idx.entries()[0];
        assert_eq!(e.partner_row, 0);
        let wsum: f64 = model.weights.iter().sum();
        assert!((e.zhat - wsum).abs() < 1e-12);
    }

    #[test]
    fn exact_recall_for_training_windows() {
        let model = mg_model(300, 5);
        let idx = LocalModelIndex::build(&model).unwrap();
        let train = model.training.as_ref().unwrap();
        for metric in [ProbeMetric::Amplitude, ProbeMetric::Window { candidates: 16 }] {
            let cfg = LocalModelConfig {
                k: 1,
                scale: ScaleRule::MeanZhat,
                probe: metric,
            };
            for r in (0..train.len()).step_by(17) {
                let y = idx.predict(&model, &train.inputs[r], &cfg).unwrap();
                assert!((y - train.targets[r]).abs() <= 1e-12 * train.targets[r].abs().max(1.0));
            }
        }
    }

    #[test]
    fn constant_training_full_k() {
        let s = TimeSeries::from_values(vec![0.9; 40]).unwrap();
        let data = embed(&s, 3, 1).unwrap();
        let model = FwfModel::fit(&data, KernelConfig::new(1.0).unwrap(), 30.0).unwrap();
        let idx = LocalModelIndex::build(&model).unwrap();
        let cfg = LocalModelConfig::with_k(data.len());
        let y = idx.predict(&model, &data.inputs[0], &cfg).unwrap();
        assert!((y - 0.9).abs() < 1e-12);
        let big = LocalModelConfig::with_k(data.len() + 5);
        let p = idx.predict_detailed(&model, &data.inputs[0], &big).unwrap();
        assert!(p.k_clamped);
        assert_eq!(p.probes.len(), data.len());
    }

    #[test]
    fn predict_series_edges() {
        let model = mg_model(200, 4);
        let train = model.training.clone().unwrap();
        let empty = train.subset(&[]);
        assert!(predict_series(&model, super::Strategy::FixedPoint(FixedPointConfig::default()), &empty)
            .unwrap()
            .is_empty());
        let one = train.subset(&[7]);
        let got = predict_series(&model, super::Strategy::FixedPoint(FixedPointConfig::default()), &one).unwrap();
        let direct = fixed_point(&model, &one.inputs[0], &FixedPointConfig::default()).unwrap().y;
        assert_eq!(got, vec![direct]);
    }

    proptest! {
        #[test]
        fn amplitude_lookup_matches_linear_scan(
            amps in proptest::collection::vec(prop_oneof![(-3i32..3).prop_map(f64::from), -3.0f64..3.0], 2..60),
            q in -4.0f64..4.0,
            k in 1usize..70,
        ) {
            let s = TimeSeries::from_values(amps.clone()).unwrap();
            let data = embed(&s, 1, 0).unwrap();
            let entries = (0..data.len()).map(|r| LocalEntry { anchor: r, partner: r, partner_row: r, z: 0.0, zhat: 1.0 }).collect();
            let idx = LocalModelIndex::from_entries(entries, &data);
            let mut scan: Vec<(f64, usize)> = amps.iter().enumerate().map(|(r, a)| ((a - q).abs(), r)).collect();
            scan.sort_by(by_distance_then_row);
            let expected: Vec<usize> = scan.into_iter().take(k).map(|(_, r)| r).collect();
            prop_assert_eq!(idx.nearest_by_amplitude(q, k), expected);
        }
    }
}
