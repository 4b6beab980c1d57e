//! `fwf`: generate series, train and apply filters, and run the experiment
//! studies from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or I/O error, 3 numerical
//! failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use fwf_core::harness::{self, emit, ExperimentConfig, FilterSpec, FittedFilter, GeneratorSpec};
use fwf_core::modelfile::{read_model, write_model};
use fwf_core::preimage::{FixedPointConfig, LocalModelConfig};
use fwf_core::signal::{add_gaussian_noise, embed, Lorenz, MackeyGlass, TimeSeries};
use fwf_core::{fmt_f64, ErrorClass, FwfError};

#[derive(Parser, Debug)]
#[command(name = "fwf", version, about = "Functional Wiener filter toolkit")]
struct Cli {
    /// Seed for injected noise; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Experiment config (`key=value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Mg,
    Lorenz,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a series and write it as `t,value` CSV.
    Generate {
        /// Generator; ignored when a config file is given.
        #[arg(long, value_enum, default_value = "mg")]
        kind: Kind,
        #[arg(long)]
        n: Option<usize>,
        /// Additive Gaussian noise std.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value = "series.csv")]
        output: String,
    },
    /// Train a filter and save it as a model file.
    Fit {
        /// Filter spec, e.g. "fwf_lm sigma=1.5 k=1"; defaults to the config's first filter.
        #[arg(long)]
        filter: Option<String>,
        /// Training series CSV; defaults to the config generator.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        lags: Option<usize>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long, default_value = "model.txt")]
        output: String,
    },
    /// Apply a saved model to every window of a series.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Local-model order for FWF models with an index.
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value = "predictions.csv")]
        output: String,
    },
    /// K-fold cross-validation of the configured filters.
    Cv,
    /// Error surface over kernel size, lags and local-model order.
    Scan {
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,1.5,2,2.5,3")]
        sigmas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "3,5,7,9,11,13,15")]
        lags: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "5,15")]
        ks: Vec<usize>,
        /// Filter to scan; defaults to the config's first FWF filter.
        #[arg(long)]
        filter: Option<String>,
    },
    /// Cross-validation at several input-noise levels.
    Noise {
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.04,0.1,0.2")]
        levels: Vec<f64>,
    },
    /// Test MSE and wall-clock time against training size.
    Scaling {
        #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000,4000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 500)]
        test_len: usize,
    },
    /// Render an SVG from a surface, noise or scaling CSV.
    Plot { csv: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if let Some(f) = e.chain().find_map(|c| c.downcast_ref::<FwfError>()) {
        return match f.class() {
            ErrorClass::Numerical => 3,
            ErrorClass::Data | ErrorClass::Io => 2,
        };
    }
    if e.chain().any(|c| c.downcast_ref::<std::io::Error>().is_some()) {
        return 2;
    }
    1
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| FwfError::Io { path: path.clone(), source: e })?;
            ExperimentConfig::parse(&text).with_context(|| format!("reading {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_path(cli: &Cli, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&cli.out).map_err(|e| FwfError::Io {
        path: cli.out.clone(),
        source: e,
    })?;
    Ok(cli.out.join(name))
}

fn write(path: &Path, text: &str) -> Result<()> {
    emit::write_atomic(path, text.as_bytes())?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn read_series(path: &Path) -> Result<TimeSeries> {
    let f = std::fs::File::open(path).map_err(|e| FwfError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(TimeSeries::read_csv(std::io::BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::Generate { kind, n, noise, output } => {
            let mut generator = if cli.config.is_some() {
                cfg.generator.clone()
            } else {
                match kind {
                    Kind::Mg => GeneratorSpec::MackeyGlass(MackeyGlass::default()),
                    Kind::Lorenz => GeneratorSpec::Lorenz(Lorenz::default()),
                }
            };
            if let Some(n) = n {
                generator = generator.with_n(*n);
            }
            let series = harness::load_series(&ExperimentConfig {
                generator,
                ..cfg.clone()
            })?;
            let series = add_gaussian_noise(&series, *noise, cfg.seed)?;
            let mut buf = Vec::new();
            series.write_csv(&mut buf)?;
            emit::write_atomic(&out_path(&cli, output)?, &buf)?;
        }
        Command::Fit {
            filter,
            input,
            lags,
            horizon,
            output,
        } => {
            let spec = match filter {
                Some(text) => FilterSpec::parse(text)?,
                None => cfg.filters[0].clone(),
            };
            let series = match input {
                Some(path) => read_series(path)?,
                None => harness::prepare(&cfg)?.inputs,
            };
            let l = lags.unwrap_or_else(|| spec.lags(cfg.lags));
            let data = embed(&series, l, horizon.unwrap_or(cfg.horizon))?;
            let fitted = FittedFilter::fit(&spec, &data)?;
            let mut buf = Vec::new();
            write_model(&fitted.to_saved(), &mut buf)?;
            let path = out_path(&cli, output)?;
            emit::write_atomic(&path, &buf)?;
            eprintln!("{} on {} windows -> {}", spec.name(), data.len(), path.display());
        }
        Command::Predict { model, input, k, output } => {
            let f = std::fs::File::open(model).map_err(|e| FwfError::Io {
                path: model.clone(),
                source: e,
            })?;
            let saved = read_model(std::io::BufReader::new(f)).with_context(|| format!("reading {}", model.display()))?;
            let fitted = FittedFilter::from_saved(saved, FixedPointConfig::default(), LocalModelConfig::with_k(*k));
            let series = read_series(input)?;
            let data = embed(&series, fitted.lags(), fitted.horizon())?;
            let mut text = String::from("anchor,target,prediction\n");
            for (w, z) in data.inputs.iter().zip(&data.targets) {
                let y = fitted.predict(w)?;
                text.push_str(&format!("{},{},{}\n", w.anchor, fmt_f64(*z), fmt_f64(y)));
            }
            write(&out_path(&cli, output)?, &text)?;
        }
        Command::Cv => {
            let report = harness::run_cv(&cfg)?;
            write(&out_path(&cli, "results.csv")?, &emit::results_csv(&report))?;
            write(&out_path(&cli, "summary.csv")?, &emit::summary_csv(&report))?;
            write(&out_path(&cli, "config.txt")?, &cfg.to_text())?;
            for f in &report.filters {
                println!(
                    "{:<8} mean MSE {:.4e} (std {:.2e}){}",
                    f.name(),
                    f.mean_mse(),
                    f.std_mse(),
                    f.first_error().map(|e| format!("  failed: {e}")).unwrap_or_default()
                );
            }
        }
        Command::Scan { sigmas, lags, ks, filter } => {
            let template = match filter {
                Some(text) => FilterSpec::parse(text)?,
                None => cfg
                    .filters
                    .iter()
                    .find(|f| matches!(f, FilterSpec::FwfLm { .. } | FilterSpec::FwfFp { .. }))
                    .cloned()
                    .unwrap_or_else(|| FilterSpec::fwf_lm(1.5, 1)),
            };
            let surface = harness::scan_hyperparameters(&cfg, &template, sigmas, lags, ks)?;
            write(&out_path(&cli, "surface.csv")?, &emit::surface_csv(&surface))?;
            let mut orders: Vec<usize> = surface.cells.iter().map(|c| c.k).collect();
            orders.dedup();
            for k in orders {
                write(&out_path(&cli, &format!("surface_k{k}.svg"))?, &emit::surface_svg(&surface, k))?;
                if let Some(best) = surface.argmin(Some(k)) {
                    println!("K={k}: minimum MSE {:.4e} at sigma={} L={}", best.mse, best.sigma, best.lags);
                }
            }
        }
        Command::Noise { levels } => {
            let reports = harness::run_noise_study(&cfg, levels)?;
            let text = emit::noise_csv(&reports);
            write(&out_path(&cli, "noise.csv")?, &text)?;
            write(&out_path(&cli, "noise.svg")?, &emit::noise_svg(&emit::parse_noise_csv(&text)?))?;
            for (level, r) in &reports {
                for f in &r.filters {
                    println!("noise {level:<5} {:<8} mean MSE {:.4e}", f.name(), f.mean_mse());
                }
            }
        }
        Command::Scaling { sizes, test_len } => {
            let table = harness::run_scaling_study(&cfg, sizes, *test_len)?;
            write(&out_path(&cli, "scaling.csv")?, &emit::scaling_csv(&table))?;
            write(&out_path(&cli, "scaling_mse.svg")?, &emit::scaling_svg(&table, "mse"))?;
            write(&out_path(&cli, "scaling_test_time.svg")?, &emit::scaling_svg(&table, "test"))?;
            let mut names: Vec<&str> = table.rows.iter().map(|r| r.filter.as_str()).collect();
            names.dedup();
            for n in names {
                println!(
                    "{n:<8} log-log slope: train {:.3}, test per sample {:.3}",
                    table.train_slope(n),
                    table.test_slope(n)
                );
            }
        }
        Command::Plot { csv } => {
            let text = std::fs::read_to_string(csv).map_err(|e| FwfError::Io {
                path: csv.clone(),
                source: e,
            })?;
            let header = text.lines().next().unwrap_or("").trim();
            let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("plot").to_string();
            match header {
                emit::SURFACE_HEADER => {
                    let surface = emit::parse_surface_csv(&text)?;
                    let mut orders: Vec<usize> = surface.cells.iter().map(|c| c.k).collect();
                    orders.sort_unstable();
                    orders.dedup();
                    for k in orders {
                        write(&out_path(&cli, &format!("{stem}_k{k}.svg"))?, &emit::surface_svg(&surface, k))?;
                    }
                }
                emit::NOISE_HEADER => {
                    write(&out_path(&cli, &format!("{stem}.svg"))?, &emit::noise_svg(&emit::parse_noise_csv(&text)?))?;
                }
                emit::SCALING_HEADER => {
                    let table = emit::parse_scaling_csv(&text)?;
                    write(&out_path(&cli, &format!("{stem}_mse.svg"))?, &emit::scaling_svg(&table, "mse"))?;
                    write(&out_path(&cli, &format!("{stem}_test_time.svg"))?, &emit::scaling_svg(&table, "test"))?;
                }
                _ => bail!(FwfError::Parse {
                    line: 1,
                    msg: format!("{}: not a surface, noise or scaling table", csv.display()),
                }),
            }
        }
    }
    Ok(())
}
