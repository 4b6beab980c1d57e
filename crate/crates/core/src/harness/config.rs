//! Experiment configuration and its `key=value` text form.
//!
//! ```text
//! # comments start with '#'
//! generator=mg
//! n=2000
//! mg.subsample=60
//! lags=7
//! horizon=1
//! folds=5
//! seed=0
//! filter=wiener
//! filter=fwf_lm sigma=1.5 k=1
//! filter=fwf_fp sigma=1.5 lags=25
//! ```
//!
//! Keys not given keep their defaults; [`ExperimentConfig::to_text`] writes
//! every key so a saved config pins the run completely.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{FwfError, Result};
use crate::fwf::DEFAULT_TARGET_CONDITION;
use crate::preimage::{FixedPointConfig, FixedPointInit, LocalModelConfig, ProbeMetric, ScaleRule};
use crate::signal::{Lorenz, MackeyGlass, Normalization};

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    MackeyGlass(MackeyGlass),
    Lorenz(Lorenz),
    /// `t,value` CSV; `n`, when set, truncates it.
    File { path: PathBuf, n: Option<usize> },
}

impl GeneratorSpec {
    pub fn n(&self) -> Option<usize> {
        match self {
            GeneratorSpec::MackeyGlass(g) => Some(g.n),
            GeneratorSpec::Lorenz(g) => Some(g.n),
            GeneratorSpec::File { n, .. } => *n,
        }
    }

    pub fn with_n(&self, n: usize) -> Self {
        let mut g = self.clone();
        match &mut g {
            GeneratorSpec::MackeyGlass(m) => m.n = n,
            GeneratorSpec::Lorenz(l) => l.n = n,
            GeneratorSpec::File { n: f, .. } => *f = Some(n),
        }
        g
    }
}

/// One filter to evaluate. `lags: None` uses the experiment-wide `L`.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterSpec {
    Wiener {
        lags: Option<usize>,
        ridge: f64,
    },
    FwfFp {
        lags: Option<usize>,
        sigma: f64,
        target_condition: f64,
        fp: FixedPointConfig,
    },
    FwfLm {
        lags: Option<usize>,
        sigma: f64,
        target_condition: f64,
        lm: LocalModelConfig,
    },
    Klms {
        lags: Option<usize>,
        sigma: f64,
        eta: f64,
    },
    Krls {
        lags: Option<usize>,
        sigma: f64,
        ridge: f64,
        budget: Option<usize>,
    },
}

impl FilterSpec {
    pub fn wiener() -> Self {
        FilterSpec::Wiener { lags: None, ridge: 0.0 }
    }

    pub fn fwf_fp(sigma: f64) -> Self {
        FilterSpec::FwfFp {
            lags: None,
            sigma,
            target_condition: DEFAULT_TARGET_CONDITION,
            fp: FixedPointConfig::default(),
        }
    }

    pub fn fwf_lm(sigma: f64, k: usize) -> Self {
        FilterSpec::FwfLm {
            lags: None,
            sigma,
            target_condition: DEFAULT_TARGET_CONDITION,
            lm: LocalModelConfig::with_k(k),
        }
    }

    pub fn klms(sigma: f64) -> Self {
        FilterSpec::Klms {
            lags: None,
            sigma,
            eta: 0.1,
        }
    }

    pub fn krls(sigma: f64) -> Self {
        FilterSpec::Krls {
            lags: None,
            sigma,
            ridge: 1e-3,
            budget: None,
        }
    }

    /// Display name used in reports.
    pub fn name(&self) -> &'static str {
        match self {
            FilterSpec::Wiener { .. } => "Wiener",
            FilterSpec::FwfFp { .. } => "FWF_FP",
            FilterSpec::FwfLm { .. } => "FWF_LM",
            FilterSpec::Klms { .. } => "KLMS",
            FilterSpec::Krls { .. } => "KRLS",
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            FilterSpec::Wiener { .. } => "wiener",
            FilterSpec::FwfFp { .. } => "fwf_fp",
            FilterSpec::FwfLm { .. } => "fwf_lm",
            FilterSpec::Klms { .. } => "klms",
            FilterSpec::Krls { .. } => "krls",
        }
    }

    pub fn lags_override(&self) -> Option<usize> {
        match self {
            FilterSpec::Wiener { lags, .. }
            | FilterSpec::FwfFp { lags, .. }
            | FilterSpec::FwfLm { lags, .. }
            | FilterSpec::Klms { lags, .. }
            | FilterSpec::Krls { lags, .. } => *lags,
        }
    }

    pub fn lags(&self, default: usize) -> usize {
        self.lags_override().unwrap_or(default)
    }

    pub fn with_lags(mut self, l: usize) -> Self {
        match &mut self {
            FilterSpec::Wiener { lags, .. }
            | FilterSpec::FwfFp { lags, .. }
            | FilterSpec::FwfLm { lags, .. }
            | FilterSpec::Klms { lags, .. }
            | FilterSpec::Krls { lags, .. } => *lags = Some(l),
        }
        self
    }

    /// Kernel size, `None` for the linear filter.
    pub fn sigma(&self) -> Option<f64> {
        match self {
            FilterSpec::Wiener { .. } => None,
            FilterSpec::FwfFp { sigma, .. }
            | FilterSpec::FwfLm { sigma, .. }
            | FilterSpec::Klms { sigma, .. }
            | FilterSpec::Krls { sigma, .. } => Some(*sigma),
        }
    }

    pub fn with_sigma(mut self, s: f64) -> Self {
        match &mut self {
            FilterSpec::Wiener { .. } => {}
            FilterSpec::FwfFp { sigma, .. }
            | FilterSpec::FwfLm { sigma, .. }
            | FilterSpec::Klms { sigma, .. }
            | FilterSpec::Krls { sigma, .. } => *sigma = s,
        }
        self
    }

    /// Local-model order; `None` for other filters.
    pub fn k(&self) -> Option<usize> {
        match self {
            FilterSpec::FwfLm { lm, .. } => Some(lm.k),
            _ => None,
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        if let FilterSpec::FwfLm { lm, .. } = &mut self {
            lm.k = k;
        }
        self
    }

    /// Space-separated `key=value` parameters (the config syntax minus the kind).
    pub fn params(&self) -> String {
        let mut p = Vec::new();
        if let Some(l) = self.lags_override() {
            p.push(format!("lags={l}"));
        }
        match self {
            FilterSpec::Wiener { ridge, .. } => p.push(format!("ridge={ridge}")),
            FilterSpec::FwfFp {
                sigma,
                target_condition,
                fp,
                ..
            } => {
                p.push(format!("sigma={sigma}"));
                p.push(format!("condition={target_condition}"));
                p.push(format!("iters={}", fp.max_iters));
                p.push(format!("tol={}", fp.tol));
                p.push(format!(
                    "init={}",
                    match fp.init {
                        FixedPointInit::LastSample => "last",
                        FixedPointInit::WeightedMean => "mean",
                    }
                ));
            }
            FilterSpec::FwfLm {
                sigma,
                target_condition,
                lm,
                ..
            } => {
                p.push(format!("sigma={sigma}"));
                p.push(format!("condition={target_condition}"));
                p.push(format!("k={}", lm.k));
                p.push(format!(
                    "probe={}",
                    match lm.probe {
                        ProbeMetric::Amplitude => "amplitude".to_string(),
                        ProbeMetric::Window { candidates } => format!("window:{candidates}"),
                    }
                ));
                p.push(format!(
                    "scale={}",
                    match lm.scale {
                        ScaleRule::MeanZhat => "mean",
                        ScaleRule::PerProbe => "probe",
                    }
                ));
            }
            FilterSpec::Klms { sigma, eta, .. } => {
                p.push(format!("sigma={sigma}"));
                p.push(format!("eta={eta}"));
            }
            FilterSpec::Krls {
                sigma,
                ridge,
                budget,
                ..
            } => {
                p.push(format!("sigma={sigma}"));
                p.push(format!("ridge={ridge}"));
                p.push(format!("budget={}", budget.map_or("none".to_string(), |b| b.to_string())));
            }
        }
        p.join(" ")
    }

    /// Parses `kind key=value ...`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut parts = text.split_whitespace();
        let kind = parts.next().ok_or_else(|| FwfError::param("filter", "missing filter kind"))?;
        let mut spec = match kind {
            "wiener" => FilterSpec::wiener(),
            "fwf_fp" => FilterSpec::fwf_fp(1.5),
            "fwf_lm" => FilterSpec::fwf_lm(1.5, 1),
            "klms" => FilterSpec::klms(1.0),
            "krls" => FilterSpec::krls(1.0),
            other => return Err(FwfError::param("filter", format!("unknown filter `{other}`"))),
        };
        for kv in parts {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| FwfError::param("filter", format!("expected key=value, got `{kv}`")))?;
            spec.set(k, v)?;
        }
        Ok(spec)
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let name = self.name();
        let unknown = || FwfError::param("filter", format!("`{key}` does not apply to {name}"));
        if key == "lags" {
            *self = self.clone().with_lags(parse_num(key, v)?);
            return Ok(());
        }
        match (self, key) {
            (FilterSpec::FwfFp { sigma, .. }, "sigma")
            | (FilterSpec::FwfLm { sigma, .. }, "sigma")
            | (FilterSpec::Klms { sigma, .. }, "sigma")
            | (FilterSpec::Krls { sigma, .. }, "sigma") => *sigma = parse_num(key, v)?,
            (FilterSpec::FwfFp { target_condition, .. }, "condition")
            | (FilterSpec::FwfLm { target_condition, .. }, "condition") => *target_condition = parse_num(key, v)?,
            (FilterSpec::Wiener { ridge, .. }, "ridge") | (FilterSpec::Krls { ridge, .. }, "ridge") => {
                *ridge = parse_num(key, v)?
            }
            (FilterSpec::FwfFp { fp, .. }, "iters") => fp.max_iters = parse_num(key, v)?,
            (FilterSpec::FwfFp { fp, .. }, "tol") => fp.tol = parse_num(key, v)?,
            (FilterSpec::FwfFp { fp, .. }, "init") => {
                fp.init = match v {
                    "last" => FixedPointInit::LastSample,
                    "mean" => FixedPointInit::WeightedMean,
                    _ => return Err(FwfError::param("init", format!("expected last|mean, got `{v}`"))),
                }
            }
            (FilterSpec::FwfLm { lm, .. }, "k") => lm.k = parse_num(key, v)?,
            (FilterSpec::FwfLm { lm, .. }, "probe") => {
                lm.probe = match v.split_once(':') {
                    None if v == "amplitude" => ProbeMetric::Amplitude,
                    Some(("window", c)) => ProbeMetric::Window {
                        candidates: parse_num("probe", c)?,
                    },
                    _ => {
                        return Err(FwfError::param(
                            "probe",
                            format!("expected amplitude|window:<count>, got `{v}`"),
                        ))
                    }
                }
            }
            (FilterSpec::FwfLm { lm, .. }, "scale") => {
                lm.scale = match v {
                    "mean" => ScaleRule::MeanZhat,
                    "probe" => ScaleRule::PerProbe,
                    _ => return Err(FwfError::param("scale", format!("expected mean|probe, got `{v}`"))),
                }
            }
            (FilterSpec::Klms { eta, .. }, "eta") => *eta = parse_num(key, v)?,
            (FilterSpec::Krls { budget, .. }, "budget") => {
                *budget = if v == "none" { None } else { Some(parse_num(key, v)?) }
            }
            _ => return Err(unknown()),
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let params = self.params();
        if params.is_empty() {
            self.kind().to_string()
        } else {
            format!("{} {params}", self.kind())
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| FwfError::InconsistentConfig(format!("bad value `{v}` for `{key}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(FwfError::InconsistentConfig(format!("bad boolean `{v}` for `{key}`"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub generator: GeneratorSpec,
    /// Default embedding length for filters without their own `lags`.
    pub lags: usize,
    pub horizon: usize,
    /// Std of the Gaussian noise added to the inputs; targets stay clean.
    pub noise: f64,
    pub normalization: Normalization,
    pub folds: usize,
    pub seed: u64,
    /// Record wall-clock times (median of 5 runs). Off by default so that
    /// reports are reproducible byte for byte.
    pub timing: bool,
    pub filters: Vec<FilterSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorSpec::MackeyGlass(MackeyGlass::default()),
            lags: 7,
            horizon: 1,
            noise: 0.0,
            normalization: Normalization::None,
            folds: 5,
            seed: 0,
            timing: false,
            filters: vec![FilterSpec::wiener(), FilterSpec::fwf_lm(1.5, 1)],
        }
    }
}

fn norm_name(n: Normalization) -> &'static str {
    match n {
        Normalization::None => "none",
        Normalization::ZScore => "zscore",
        Normalization::MinMax => "minmax",
    }
}

impl ExperimentConfig {
    pub fn max_lags(&self) -> usize {
        self.filters
            .iter()
            .map(|f| f.lags(self.lags))
            .max()
            .unwrap_or(self.lags)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match &self.generator {
            GeneratorSpec::MackeyGlass(g) => {
                let _ = writeln!(s, "generator=mg");
                let _ = writeln!(s, "n={}", g.n);
                let _ = writeln!(s, "mg.a={}", g.a);
                let _ = writeln!(s, "mg.b={}", g.b);
                let _ = writeln!(s, "mg.tau={}", g.tau);
                let _ = writeln!(s, "mg.dt={}", g.dt);
                let _ = writeln!(s, "mg.subsample={}", g.subsample);
                let _ = writeln!(s, "mg.x0={}", g.x0);
                let _ = writeln!(s, "mg.discard={}", g.discard);
            }
            GeneratorSpec::Lorenz(g) => {
                let _ = writeln!(s, "generator=lorenz");
                let _ = writeln!(s, "n={}", g.n);
                let _ = writeln!(s, "lorenz.sigma={}", g.sigma);
                let _ = writeln!(s, "lorenz.rho={}", g.rho);
                let _ = writeln!(s, "lorenz.beta={}", g.beta);
                let _ = writeln!(s, "lorenz.dt={}", g.dt);
                let _ = writeln!(s, "lorenz.init={},{},{}", g.init[0], g.init[1], g.init[2]);
                let _ = writeln!(s, "lorenz.subsample={}", g.subsample);
                let _ = writeln!(s, "lorenz.discard={}", g.discard);
            }
            GeneratorSpec::File { path, n } => {
                let _ = writeln!(s, "generator=file");
                let _ = writeln!(s, "file={}", path.display());
                if let Some(n) = n {
                    let _ = writeln!(s, "n={n}");
                }
            }
        }
        let _ = writeln!(s, "lags={}", self.lags);
        let _ = writeln!(s, "horizon={}", self.horizon);
        let _ = writeln!(s, "noise={}", self.noise);
        let _ = writeln!(s, "normalization={}", norm_name(self.normalization));
        let _ = writeln!(s, "folds={}", self.folds);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "timing={}", self.timing);
        for f in &self.filters {
            let _ = writeln!(s, "filter={}", f.to_text());
        }
        s
    }

    /// Parses the text form. Any `filter=` line replaces the default filter
    /// list.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut filters = Vec::new();
        let mut generator = "mg".to_string();
        let mut mg = MackeyGlass::default();
        let mut lorenz = Lorenz::default();
        let mut file: Option<PathBuf> = None;
        let mut n: Option<usize> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, v) = line
                .split_once('=')
                .ok_or_else(|| FwfError::parse(i + 1, format!("expected key=value, got `{line}`")))?;
            let (key, v) = (key.trim(), v.trim());
            let at = |e: FwfError| match e {
                FwfError::Parse { .. } => e,
                other => FwfError::parse(i + 1, other.to_string()),
            };
            let res: Result<()> = (|| {
                match key {
                    "generator" => generator = v.to_string(),
                    "n" => n = Some(parse_num(key, v)?),
                    "file" => file = Some(PathBuf::from(v)),
                    "mg.a" => mg.a = parse_num(key, v)?,
                    "mg.b" => mg.b = parse_num(key, v)?,
                    "mg.tau" => mg.tau = parse_num(key, v)?,
                    "mg.dt" => mg.dt = parse_num(key, v)?,
                    "mg.subsample" => mg.subsample = parse_num(key, v)?,
                    "mg.x0" => mg.x0 = parse_num(key, v)?,
                    "mg.discard" => mg.discard = parse_num(key, v)?,
                    "lorenz.sigma" => lorenz.sigma = parse_num(key, v)?,
                    "lorenz.rho" => lorenz.rho = parse_num(key, v)?,
                    "lorenz.beta" => lorenz.beta = parse_num(key, v)?,
                    "lorenz.dt" => lorenz.dt = parse_num(key, v)?,
                    "lorenz.subsample" => lorenz.subsample = parse_num(key, v)?,
                    "lorenz.discard" => lorenz.discard = parse_num(key, v)?,
                    "lorenz.init" => {
                        let xs: Vec<f64> = v.split(',').map(|c| parse_num(key, c)).collect::<Result<_>>()?;
                        lorenz.init = xs
                            .try_into()
                            .map_err(|_| FwfError::InconsistentConfig("lorenz.init needs three values".into()))?;
                    }
                    "lags" => cfg.lags = parse_num(key, v)?,
                    "horizon" => cfg.horizon = parse_num(key, v)?,
                    "noise" => cfg.noise = parse_num(key, v)?,
                    "normalization" => {
                        cfg.normalization = match v {
                            "none" => Normalization::None,
                            "zscore" => Normalization::ZScore,
                            "minmax" => Normalization::MinMax,
                            _ => {
                                return Err(FwfError::InconsistentConfig(format!(
                                    "normalization must be none|zscore|minmax, got `{v}`"
                                )))
                            }
                        }
                    }
                    "folds" => cfg.folds = parse_num(key, v)?,
                    "seed" => cfg.seed = parse_num(key, v)?,
                    "timing" => cfg.timing = parse_bool(key, v)?,
                    "filter" => filters.push(FilterSpec::parse(v)?),
                    _ => return Err(FwfError::InconsistentConfig(format!("unknown key `{key}`"))),
                }
                Ok(())
            })();
            res.map_err(at)?;
        }
        cfg.generator = match generator.as_str() {
            "mg" => {
                if let Some(n) = n {
                    mg.n = n;
                }
                GeneratorSpec::MackeyGlass(mg)
            }
            "lorenz" => {
                if let Some(n) = n {
                    lorenz.n = n;
                }
                GeneratorSpec::Lorenz(lorenz)
            }
            "file" => GeneratorSpec::File {
                path: file.ok_or_else(|| FwfError::InconsistentConfig("generator=file needs file=<path>".into()))?,
                n,
            },
            other => {
                return Err(FwfError::InconsistentConfig(format!(
                    "generator must be mg|lorenz|file, got `{other}`"
                )))
            }
        };
        if !filters.is_empty() {
            cfg.filters = filters;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lags == 0 {
            return Err(FwfError::param("lags", "must be at least 1"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(FwfError::param("noise", "must be non-negative"));
        }
        if self.filters.is_empty() {
            return Err(FwfError::InconsistentConfig("no filters configured".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = ExperimentConfig {
            generator: GeneratorSpec::Lorenz(Lorenz {
                n: 1234,
                ..Lorenz::default()
            }),
            lags: 9,
            horizon: 10,
            noise: 0.04,
            normalization: Normalization::MinMax,
            folds: 3,
            seed: 42,
            timing: true,
            filters: vec![
                FilterSpec::wiener(),
                FilterSpec::fwf_fp(0.3).with_lags(30),
                FilterSpec::fwf_lm(0.1, 5),
                FilterSpec::klms(0.2),
                FilterSpec::Krls {
                    lags: None,
                    sigma: 0.7,
                    ridge: 1e-4,
                    budget: Some(300),
                },
            ],
        };
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
        cfg.generator = GeneratorSpec::File {
            path: "series.csv".into(),
            n: None,
        };
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn filter_lines() {
        let f = FilterSpec::parse("fwf_lm sigma=0.5 k=15 probe=amplitude scale=probe lags=3").unwrap();
        let FilterSpec::FwfLm { lags, sigma, lm, .. } = f else { panic!() };
        assert_eq!((lags, sigma, lm.k), (Some(3), 0.5, 15));
        assert_eq!(lm.probe, ProbeMetric::Amplitude);
        assert_eq!(lm.scale, ScaleRule::PerProbe);
        assert!(FilterSpec::parse("wiener eta=0.1").is_err());
        assert!(FilterSpec::parse("svm").is_err());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = ExperimentConfig::parse("lags=7\n\nfolds=x\n").unwrap_err();
        assert!(matches!(err, FwfError::Parse { line: 3, .. }), "{err}");
        assert!(ExperimentConfig::parse("bogus=1").is_err());
        assert!(ExperimentConfig::parse("generator=file").is_err());
    }

    #[test]
    fn filters_replace_defaults() {
        let cfg = ExperimentConfig::parse("filter=klms eta=0.2 # comment\n").unwrap();
        assert_eq!(cfg.filters.len(), 1);
        assert_eq!(cfg.filters[0].name(), "KLMS");
    }
}
