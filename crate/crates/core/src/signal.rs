//! Series generation, perturbation, delay embedding and fold splitting.
//!
//! Every routine here is a pure function of its arguments (and seed). The
//! chaotic generators integrate with classical fourth-order Runge-Kutta; the
//! Mackey-Glass delay term is interpolated with cubic Hermite polynomials so
//! the scheme keeps its order across half steps.

use std::fmt;
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{FwfError, Result};
use crate::fmt_f64;

/// Where a series came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    MackeyGlass,
    Lorenz,
    File,
    Synthetic,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Origin::MackeyGlass => "mg",
            Origin::Lorenz => "lorenz",
            Origin::File => "file",
            Origin::Synthetic => "synthetic",
        };
        f.write_str(s)
    }
}

/// Uniformly sampled scalar sequence. Non-empty, finite, `dt > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    samples: Vec<f64>,
    dt: f64,
    origin: Origin,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, dt: f64, origin: Origin) -> Result<Self> {
        if samples.is_empty() {
            return Err(FwfError::EmptyInput("time series"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(FwfError::param("dt", format!("must be positive, got {dt}")));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(FwfError::param("samples", format!("non-finite value at index {i}")));
        }
        Ok(Self { samples, dt, origin })
    }

    /// Unit-interval synthetic series, mostly for tests.
    pub fn from_values(samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, 1.0, Origin::Synthetic)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Contiguous sub-range `[start, end)` keeping dt and origin.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.samples.len() {
            return Err(FwfError::param(
                "range",
                format!("[{start}, {end}) out of bounds for length {}", self.samples.len()),
            ));
        }
        Self::new(self.samples[start..end].to_vec(), self.dt, self.origin)
    }

    /// Writes `t,value` CSV with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,value")?;
        for (i, v) in self.samples.iter().enumerate() {
            writeln!(out, "{},{}", fmt_f64(i as f64 * self.dt), fmt_f64(*v))?;
        }
        Ok(())
    }

    /// Reads the `t,value` CSV written by [`TimeSeries::write_csv`]. The
    /// sample interval is taken from the first two time stamps.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| FwfError::parse(lineno, e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if idx == 0 {
                if line != "t,value" {
                    return Err(FwfError::parse(lineno, "expected header `t,value`"));
                }
                continue;
            }
            let (t, v) = line
                .split_once(',')
                .ok_or_else(|| FwfError::parse(lineno, "expected two columns"))?;
            times.push(parse_f64(t, lineno)?);
            values.push(parse_f64(v, lineno)?);
        }
        let dt = if times.len() >= 2 { times[1] - times[0] } else { 1.0 };
        Self::new(values, dt, Origin::File)
    }
}

pub(crate) fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| FwfError::parse(line, format!("bad number `{}`: {e}", s.trim())))
}

/// Mackey-Glass delay equation `dx/dt = -b x(t) + a x(t-tau) / (1 + x(t-tau)^10)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MackeyGlass {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub tau: f64,
    pub dt: f64,
    /// Integration steps per emitted sample.
    pub subsample: usize,
    pub x0: f64,
    /// Emitted samples dropped before the first returned one.
    pub discard: usize,
}

impl Default for MackeyGlass {
    fn default() -> Self {
        Self {
            n: 2000,
            a: 0.2,
            b: 0.1,
            tau: 30.0,
            dt: 0.1,
            subsample: 60,
            x0: 1.2,
            discard: 1000,
        }
    }
}

impl MackeyGlass {
    pub fn generate(&self) -> Result<TimeSeries> {
        if self.n == 0 {
            return Err(FwfError::param("n", "must be positive"));
        }
        if !(self.dt > 0.0) {
            return Err(FwfError::param("dt", "must be positive"));
        }
        if !(self.tau > 0.0) {
            return Err(FwfError::param("tau", "must be positive"));
        }
        if self.subsample == 0 {
            return Err(FwfError::param("subsample", "must be at least 1"));
        }
        let ratio = self.tau / self.dt;
        let delay = ratio.round() as usize;
        if delay == 0 || (ratio - delay as f64).abs() > 1e-9 * ratio.max(1.0) {
            return Err(FwfError::param(
                "tau",
                format!("must be a positive multiple of dt ({}), got {}", self.dt, self.tau),
            ));
        }

        let (a, b, dt) = (self.a, self.b, self.dt);
        let rhs = |x: f64, xd: f64| -b * x + a * xd / (1.0 + xd.powi(10));

        // Ring buffers of past states and derivatives on the integration grid:
        // step j lives in slot j % (delay + 1). While advancing step k, the
        // delayed endpoints are steps k - delay and k - delay + 1, i.e. slots
        // (k + 1) % cap and (k + 2) % cap. Negative steps are the constant
        // history (zero derivative). Step 0 is a kink: its slot holds the
        // history's derivative until the delayed window moves past it.
        let cap = delay + 1;
        let mut xs = vec![self.x0; cap];
        let mut fs = vec![0.0; cap];

        let total = (self.n + self.discard) * self.subsample;
        let mut out = Vec::with_capacity(self.n);
        let mut x = self.x0;
        for k in 0..total {
            if k == delay {
                fs[0] = rhs(self.x0, self.x0);
            }
            let (xd0, fd0) = (xs[(k + 1) % cap], fs[(k + 1) % cap]);
            let (xd1, fd1) = (xs[(k + 2) % cap], fs[(k + 2) % cap]);
            // Hermite midpoint of the delayed trajectory.
            let xdh = 0.5 * (xd0 + xd1) + dt / 8.0 * (fd0 - fd1);

            let k1 = rhs(x, xd0);
            let k2 = rhs(x + 0.5 * dt * k1, xdh);
            let k3 = rhs(x + 0.5 * dt * k2, xdh);
            let k4 = rhs(x + dt * k3, xd1);
            x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if !x.is_finite() {
                return Err(FwfError::GenerationDiverged { step: k + 1 });
            }
            let slot = (k + 1) % cap;
            xs[slot] = x;
            fs[slot] = rhs(x, xd1);

            if (k + 1) % self.subsample == 0 {
                let emitted = (k + 1) / self.subsample;
                if emitted > self.discard {
                    out.push(x);
                }
            }
        }
        TimeSeries::new(out, dt * self.subsample as f64, Origin::MackeyGlass)
    }
}

/// Lorenz system, returning the x component.
#[derive(Debug, Clone, PartialEq)]
pub struct Lorenz {
    pub n: usize,
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
    pub dt: f64,
    pub init: [f64; 3],
    pub subsample: usize,
    pub discard: usize,
}

impl Default for Lorenz {
    fn default() -> Self {
        Self {
            n: 2000,
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
            dt: 0.01,
            init: [1.0, 1.0, 1.0],
            subsample: 1,
            discard: 1000,
        }
    }
}

impl Lorenz {
    pub fn generate(&self) -> Result<TimeSeries> {
        Ok(self.trajectory()?.into_iter().map(|s| s[0]).collect::<Vec<_>>())
            .and_then(|xs| TimeSeries::new(xs, self.dt * self.subsample as f64, Origin::Lorenz))
    }

    /// Full emitted state trajectory after warmup.
    pub fn trajectory(&self) -> Result<Vec<[f64; 3]>> {
        if self.n == 0 {
            return Err(FwfError::param("n", "must be positive"));
        }
        if !(self.dt > 0.0) {
            return Err(FwfError::param("dt", "must be positive"));
        }
        if self.subsample == 0 {
            return Err(FwfError::param("subsample", "must be at least 1"));
        }
        let (s, r, b) = (self.sigma, self.rho, self.beta);
        let rhs = |v: [f64; 3]| [s * (v[1] - v[0]), v[0] * (r - v[2]) - v[1], v[0] * v[1] - b * v[2]];
        let axpy = |v: [f64; 3], h: f64, d: [f64; 3]| [v[0] + h * d[0], v[1] + h * d[1], v[2] + h * d[2]];

        let dt = self.dt;
        let mut v = self.init;
        let total = (self.n + self.discard) * self.subsample;
        let mut out = Vec::with_capacity(self.n);
        for k in 0..total {
            let k1 = rhs(v);
            let k2 = rhs(axpy(v, 0.5 * dt, k1));
            let k3 = rhs(axpy(v, 0.5 * dt, k2));
            let k4 = rhs(axpy(v, dt, k3));
            for i in 0..3 {
                v[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if v.iter().any(|c| !c.is_finite()) {
                return Err(FwfError::GenerationDiverged { step: k + 1 });
            }
            if (k + 1) % self.subsample == 0 && (k + 1) / self.subsample > self.discard {
                out.push(v);
            }
        }
        Ok(out)
    }
}

/// Adds i.i.d. zero-mean Gaussian noise. `std == 0` returns an exact copy.
pub fn add_gaussian_noise(series: &TimeSeries, std: f64, seed: u64) -> Result<TimeSeries> {
    if !(std >= 0.0 && std.is_finite()) {
        return Err(FwfError::param("std", format!("must be non-negative, got {std}")));
    }
    if std == 0.0 {
        return Ok(series.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std).map_err(|e| FwfError::param("std", e.to_string()))?;
    let samples = series
        .samples
        .iter()
        .map(|v| v + normal.sample(&mut rng))
        .collect();
    TimeSeries::new(samples, series.dt, series.origin)
}

/// Affine rescaling applied to a series (and undone on predictions).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    None,
    /// Zero mean, unit variance.
    ZScore,
    /// Map `[min, max]` onto `[0, 1]`.
    MinMax,
}

/// `y = (x - offset) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub offset: f64,
    pub scale: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine {
        offset: 0.0,
        scale: 1.0,
    };

    pub fn fit(series: &TimeSeries, mode: Normalization) -> Affine {
        let xs = series.samples();
        match mode {
            Normalization::None => Affine::IDENTITY,
            Normalization::ZScore => {
                let n = xs.len() as f64;
                let mean = xs.iter().sum::<f64>() / n;
                let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
                Affine { offset: mean, scale }
            }
            Normalization::MinMax => {
                let (lo, hi) = (series.min(), series.max());
                let scale = if hi > lo { hi - lo } else { 1.0 };
                Affine { offset: lo, scale }
            }
        }
    }

    pub fn apply(&self, series: &TimeSeries) -> TimeSeries {
        let samples = series
            .samples
            .iter()
            .map(|x| (x - self.offset) / self.scale)
            .collect();
        TimeSeries {
            samples,
            dt: series.dt,
            origin: series.origin,
        }
    }

    pub fn invert(&self, y: f64) -> f64 {
        y * self.scale + self.offset
    }
}

/// Delay window `[x(i), x(i-1), ..., x(i-L+1)]`, most recent first.
#[derive(Debug, Clone, PartialEq)]
pub struct LagVector {
    pub values: Vec<f64>,
    pub anchor: usize,
}

impl LagVector {
    pub fn new(values: Vec<f64>, anchor: usize) -> Self {
        Self { values, anchor }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Most recent sample `x(i)`.
    pub fn current(&self) -> f64 {
        self.values[0]
    }
}

/// Windows paired with their targets `z(i) = target_series[i + horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedDataset {
    pub inputs: Vec<LagVector>,
    pub targets: Vec<f64>,
    pub lags: usize,
    pub horizon: usize,
}

impl SupervisedDataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> SupervisedDataset {
        SupervisedDataset {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            lags: self.lags,
            horizon: self.horizon,
        }
    }
}

/// One `(window, target)` pair per anchor `i` in `[L-1, len-1-horizon]`.
pub fn embed(series: &TimeSeries, lags: usize, horizon: usize) -> Result<SupervisedDataset> {
    embed_with_targets(series, series, lags, horizon)
}

/// Like [`embed`], but targets come from a separate (e.g. noise-free) series
/// aligned sample-for-sample with the inputs.
pub fn embed_with_targets(
    inputs: &TimeSeries,
    targets: &TimeSeries,
    lags: usize,
    horizon: usize,
) -> Result<SupervisedDataset> {
    if lags == 0 {
        return Err(FwfError::param("lags", "must be at least 1"));
    }
    if inputs.len() != targets.len() {
        return Err(FwfError::DimensionMismatch {
            expected: inputs.len(),
            got: targets.len(),
        });
    }
    let n = inputs.len();
    if n <= lags + horizon {
        return Err(FwfError::InsufficientData {
            needed: lags + horizon,
            got: n,
        });
    }
    let xs = inputs.samples();
    let zs = targets.samples();
    let count = n - lags + 1 - horizon;
    let mut windows = Vec::with_capacity(count);
    let mut z = Vec::with_capacity(count);
    for i in (lags - 1)..(n - horizon) {
        let values = (0..lags).map(|tau| xs[i - tau]).collect();
        windows.push(LagVector::new(values, i));
        z.push(zs[i + horizon]);
    }
    Ok(SupervisedDataset {
        inputs: windows,
        targets: z,
        lags,
        horizon,
    })
}

/// A train/test partition of dataset row indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits `n` rows into `k` contiguous test blocks; the first `n % k` blocks
/// get one extra row.
pub fn kfold_split(n: usize, k: usize) -> Result<Vec<Fold>> {
    if k < 2 || k > n {
        return Err(FwfError::InvalidFold { k, n });
    }
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let end = start + size;
        folds.push(Fold {
            train: (0..start).chain(end..n).collect(),
            test: (start..end).collect(),
        });
        start = end;
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embed_enumerates_pairs() {
        let s = TimeSeries::from_values(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let d = embed(&s, 2, 1).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.inputs[0].values, vec![2.0, 1.0]);
        assert_eq!(d.targets[0], 3.0);
        assert_eq!(d.inputs[1].values, vec![3.0, 2.0]);
        assert_eq!(d.targets[1], 4.0);
        assert_eq!(d.inputs[0].anchor, 1);
    }

    #[test]
    fn embed_counts() {
        let s = TimeSeries::from_values((0..100).map(f64::from).collect()).unwrap();
        assert_eq!(embed(&s, 7, 1).unwrap().len(), 93);
        assert_eq!(embed(&s, 30, 10).unwrap().len(), 61);
    }

    #[test]
    fn embed_rejects_short_series() {
        let s = TimeSeries::from_values(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            embed(&s, 2, 1),
            Err(FwfError::InsufficientData { .. })
        ));
    }

    #[test]
    fn kfold_even_blocks() {
        let folds = kfold_split(10, 5).unwrap();
        let mut seen = vec![0; 10];
        for f in &folds {
            assert_eq!(f.test.len(), 2);
            assert_eq!(f.train.len(), 8);
            for &i in &f.test {
                seen[i] += 1;
                assert!(!f.train.contains(&i));
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn kfold_remainder_goes_first() {
        let folds = kfold_split(11, 2).unwrap();
        assert_eq!(folds[0].test.len(), 6);
        assert_eq!(folds[1].test.len(), 5);
    }

    #[test]
    fn kfold_rejects_bad_k() {
        assert!(matches!(kfold_split(3, 4), Err(FwfError::InvalidFold { .. })));
        assert!(matches!(kfold_split(3, 1), Err(FwfError::InvalidFold { .. })));
    }

    #[test]
    fn zero_noise_is_identity() {
        let s = TimeSeries::from_values(vec![0.5, 1.0, -2.0]).unwrap();
        assert_eq!(add_gaussian_noise(&s, 0.0, 9).unwrap(), s);
    }

    #[test]
    fn noise_is_seeded() {
        let s = TimeSeries::from_values(vec![0.0; 64]).unwrap();
        let a = add_gaussian_noise(&s, 0.3, 5).unwrap();
        let b = add_gaussian_noise(&s, 0.3, 5).unwrap();
        let c = add_gaussian_noise(&s, 0.3, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noise_std_matches() {
        let s = TimeSeries::from_values(vec![1.0; 10_000]).unwrap();
        let noisy = add_gaussian_noise(&s, 0.2, 17).unwrap();
        let d: Vec<f64> = noisy.samples().iter().map(|v| v - 1.0).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let std = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d.len() as f64).sqrt();
        assert!((0.19..=0.21).contains(&std), "std = {std}");
    }

    #[test]
    fn series_rejects_non_finite() {
        assert!(TimeSeries::from_values(vec![1.0, f64::NAN]).is_err());
        assert!(TimeSeries::from_values(vec![]).is_err());
        assert!(TimeSeries::new(vec![1.0], 0.0, Origin::Synthetic).is_err());
    }

    #[test]
    fn mg_without_feedback_is_exponential_decay() {
        let mg = MackeyGlass {
            n: 50,
            a: 0.0,
            b: 0.1,
            tau: 30.0,
            dt: 0.1,
            subsample: 10,
            x0: 1.0,
            discard: 0,
        };
        let s = mg.generate().unwrap();
        for (i, v) in s.samples().iter().enumerate() {
            let t = (i + 1) as f64 * 1.0;
            assert!((v - (-0.1 * t).exp()).abs() < 1e-6, "t={t} got {v}");
        }
    }

    #[test]
    fn mg_requires_grid_aligned_delay() {
        let mg = MackeyGlass {
            tau: 0.25,
            dt: 0.1,
            ..MackeyGlass::default()
        };
        assert!(matches!(
            mg.generate(),
            Err(FwfError::InvalidParameter { name: "tau", .. })
        ));
    }

    #[test]
    fn lorenz_decays_below_unit_rho() {
        let l = Lorenz {
            n: 3000,
            rho: 0.0,
            discard: 0,
            ..Lorenz::default()
        };
        let xs = l.generate().unwrap();
        let tail = &xs.samples()[500..];
        assert!(tail.windows(2).all(|w| w[1].abs() <= w[0].abs()));
        assert!(tail.last().unwrap().abs() < 1e-3);
    }

    #[test]
    fn csv_round_trip() {
        let s = TimeSeries::new(vec![0.1, 1.0 / 3.0, -2.5e-17], 0.6, Origin::MackeyGlass).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = TimeSeries::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.samples(), s.samples());
        assert_eq!(back.dt(), 0.6);
    }

    #[test]
    fn affine_round_trip() {
        let s = TimeSeries::from_values(vec![2.0, 4.0, 6.0]).unwrap();
        for mode in [Normalization::ZScore, Normalization::MinMax] {
            let a = Affine::fit(&s, mode);
            let t = a.apply(&s);
            for (x, y) in s.samples().iter().zip(t.samples()) {
                assert!((a.invert(*y) - x).abs() < 1e-12);
            }
        }
        let mm = Affine::fit(&s, Normalization::MinMax).apply(&s);
        assert_eq!(mm.samples(), &[0.0, 0.5, 1.0]);
    }
}
