//! CSV tables and SVG plots. Every file is written to a temporary sibling
//! and renamed into place.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use super::{EvalReport, ScalingRow, ScalingTable, Surface, SurfaceCell};
use crate::error::{FwfError, Result};
use crate::fmt_f64;
use crate::signal::parse_f64;

pub const RESULTS_HEADER: &str = "filter,fold,mse,train_ms,test_ms_per_sample,model_size,params";
pub const SUMMARY_HEADER: &str = "filter,mean_mse,std_mse,failed_folds,params";
pub const SURFACE_HEADER: &str = "sigma,lags,K,train_mse,log10_mse";
pub const NOISE_HEADER: &str = "noise,filter,mean_mse,std_mse,failed_folds";
pub const SCALING_HEADER: &str = "filter,n,mse,train_ms,test_ms_per_sample,model_size";

/// Writes `contents` to `path` atomically (temporary file + rename).
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| FwfError::io(path, std::io::Error::other("not a file path")))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(FwfError::io(path, e));
    }
    Ok(())
}

/// `params` cells use `;` between pairs so they never contain commas.
fn params_cell(p: &str) -> String {
    p.split_whitespace().collect::<Vec<_>>().join(";")
}

fn clean_message(msg: &str) -> String {
    msg.replace([',', '\n', ';'], " ")
}

/// Per-fold results. Failed cells carry `mse=nan` and an `error=` param.
pub fn results_csv(report: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{RESULTS_HEADER}");
    for f in &report.filters {
        let params = params_cell(&f.spec.params());
        for c in &f.cells {
            match &c.outcome {
                Ok(m) => {
                    let _ = writeln!(
                        s,
                        "{},{},{},{},{},{},{}",
                        f.name(),
                        c.fold,
                        fmt_f64(m.mse),
                        fmt_f64(m.train_ms),
                        fmt_f64(m.test_ms_per_sample),
                        m.model_size,
                        params
                    );
                }
                Err(e) => {
                    let sep = if params.is_empty() { "" } else { ";" };
                    let _ = writeln!(
                        s,
                        "{},{},nan,nan,nan,0,{params}{sep}error={}",
                        f.name(),
                        c.fold,
                        clean_message(e)
                    );
                }
            }
        }
    }
    s
}

pub fn summary_csv(report: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{SUMMARY_HEADER}");
    for f in &report.filters {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            f.name(),
            fmt_f64(f.mean_mse()),
            fmt_f64(f.std_mse()),
            f.failed(),
            params_cell(&f.spec.params())
        );
    }
    s
}

pub fn surface_csv(surface: &Surface) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{SURFACE_HEADER}");
    for c in &surface.cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_f64(c.sigma),
            c.lags,
            c.k,
            fmt_f64(c.mse),
            fmt_f64(c.mse.log10())
        );
    }
    s
}

pub fn noise_csv(levels: &[(f64, EvalReport)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{NOISE_HEADER}");
    for (level, r) in levels {
        for f in &r.filters {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                fmt_f64(*level),
                f.name(),
                fmt_f64(f.mean_mse()),
                fmt_f64(f.std_mse()),
                f.failed()
            );
        }
    }
    s
}

pub fn scaling_csv(table: &ScalingTable) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{SCALING_HEADER}");
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.filter,
            r.n,
            fmt_f64(r.mse),
            fmt_f64(r.train_ms),
            fmt_f64(r.test_ms_per_sample),
            r.model_size
        );
    }
    s
}

/// Splits a CSV with the expected header into rows of cells.
fn rows<'a>(text: &'a str, header: &str) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == header => {}
        _ => return Err(FwfError::parse(1, format!("expected header `{header}`"))),
    }
    let ncols = header.split(',').count();
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let cells: Vec<&str> = l.split(',').collect();
            if cells.len() != ncols {
                return Err(FwfError::parse(i + 2, format!("expected {ncols} columns")));
            }
            Ok((i + 2, cells))
        })
        .collect()
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.trim().parse().map_err(|_| FwfError::parse(line, format!("bad integer `{s}`")))
}

pub fn parse_surface_csv(text: &str) -> Result<Surface> {
    let cells = rows(text, SURFACE_HEADER)?
        .into_iter()
        .map(|(line, c)| {
            let mse = parse_f64(c[3], line)?;
            Ok(SurfaceCell {
                sigma: parse_f64(c[0], line)?,
                lags: parse_usize(c[1], line)?,
                k: parse_usize(c[2], line)?,
                mse,
                error: (!mse.is_finite()).then(|| "failed".to_string()),
            })
        })
        .collect::<Result<_>>()?;
    Ok(Surface { cells })
}

pub fn parse_scaling_csv(text: &str) -> Result<ScalingTable> {
    let rows = rows(text, SCALING_HEADER)?
        .into_iter()
        .map(|(line, c)| {
            let mse = parse_f64(c[2], line)?;
            Ok(ScalingRow {
                filter: c[0].to_string(),
                n: parse_usize(c[1], line)?,
                mse,
                train_ms: parse_f64(c[3], line)?,
                test_ms_per_sample: parse_f64(c[4], line)?,
                model_size: parse_usize(c[5], line)?,
                error: (!mse.is_finite()).then(|| "failed".to_string()),
            })
        })
        .collect::<Result<_>>()?;
    Ok(ScalingTable { rows })
}

/// `(noise, filter, mean_mse)` triples of a noise table.
pub fn parse_noise_csv(text: &str) -> Result<Vec<(f64, String, f64)>> {
    rows(text, NOISE_HEADER)?
        .into_iter()
        .map(|(line, c)| Ok((parse_f64(c[0], line)?, c[1].to_string(), parse_f64(c[2], line)?)))
        .collect()
}

/// Per-fold `(filter, fold, mse)` of a results table.
pub fn parse_results_csv(text: &str) -> Result<Vec<(String, usize, f64)>> {
    rows(text, RESULTS_HEADER)?
        .into_iter()
        .map(|(line, c)| Ok((c[0].to_string(), parse_usize(c[1], line)?, parse_f64(c[2], line)?)))
        .collect()
}

// ---- SVG -------------------------------------------------------------------

const W: f64 = 640.0;
const H: f64 = 420.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Blue (low) to red (high).
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    let g = (255.0 * (1.0 - (2.0 * t - 1.0).abs()) * 0.8).round() as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Heatmap of `log10(mse)` over `(sigma, lags)` for one local-model order;
/// one `<rect class="cell">` per grid point, failed cells in grey.
pub fn surface_svg(surface: &Surface, k: usize) -> String {
    let cells: Vec<&SurfaceCell> = surface.cells.iter().filter(|c| c.k == k).collect();
    let mut sigmas: Vec<f64> = cells.iter().map(|c| c.sigma).collect();
    sigmas.sort_by(f64::total_cmp);
    sigmas.dedup();
    let mut lags: Vec<usize> = cells.iter().map(|c| c.lags).collect();
    lags.sort_unstable();
    lags.dedup();
    let logs: Vec<f64> = cells.iter().map(|c| c.mse.log10()).filter(|v| v.is_finite()).collect();
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };

    let cw = (W - 2.0 * MARGIN) / sigmas.len().max(1) as f64;
    let ch = (H - 2.0 * MARGIN) / lags.len().max(1) as f64;
    let mut s = svg_open(&format!("log10 MSE surface, K = {k}"));
    for c in &cells {
        let i = sigmas.iter().position(|v| *v == c.sigma).unwrap_or(0);
        let j = lags.iter().position(|v| *v == c.lags).unwrap_or(0);
        let v = c.mse.log10();
        let fill = if v.is_finite() { ramp((v - lo) / span) } else { "#bbbbbb".to_string() };
        let _ = writeln!(
            s,
            r#"<rect class="cell" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"><title>sigma={} L={} log10(mse)={:.3}</title></rect>"#,
            MARGIN + i as f64 * cw,
            H - MARGIN - (j + 1) as f64 * ch,
            cw,
            ch,
            c.sigma,
            c.lags,
            v
        );
    }
    for (i, sg) in sigmas.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{sg}</text>"#,
            MARGIN + (i as f64 + 0.5) * cw,
            H - MARGIN + 16.0
        );
    }
    for (j, l) in lags.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{l}</text>"#,
            MARGIN - 6.0,
            H - MARGIN - (j as f64 + 0.5) * ch + 4.0
        );
    }
    axis_labels(&mut s, "kernel size sigma", "lags L");
    s.push_str("</svg>\n");
    s
}

/// Named polyline series.
pub struct LineSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Line plot with optional log axes; non-positive values are dropped on log
/// axes and non-finite values always.
pub fn lines_svg(title: &str, xlabel: &str, ylabel: &str, series: &[LineSeries], logx: bool, logy: bool) -> String {
    let tx = |v: f64| if logx { v.log10() } else { v };
    let ty = |v: f64| if logy { v.log10() } else { v };
    let mapped: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .map(|&(x, y)| (tx(x), ty(y)))
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .collect()
        })
        .collect();
    let all = mapped.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if !(y1 > y0) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let py = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut s = svg_open(title);
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    for (i, (ser, pts)) in series.iter().zip(&mapped).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
        for &(x, y) in pts {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(x), py(y));
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" fill="{color}">{}</text>"#,
            W - MARGIN + 6.0,
            MARGIN + 14.0 * (i as f64 + 1.0),
            esc(&ser.label)
        );
    }
    let fmt_tick = |v: f64, log: bool| if log { format!("1e{v:.1}") } else { format!("{v:.3}") };
    for (v, anchor, x, y) in [
        (x0, "start", px(x0), H - MARGIN + 16.0),
        (x1, "end", px(x1), H - MARGIN + 16.0),
    ] {
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{y:.2}" font-size="11" text-anchor="{anchor}">{}</text>"#, fmt_tick(v, logx));
    }
    for (v, y) in [(y0, py(y0)), (y1, py(y1))] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
            MARGIN - 6.0,
            y + 4.0,
            fmt_tick(v, logy)
        );
    }
    axis_labels(&mut s, xlabel, ylabel);
    s.push_str("</svg>\n");
    s
}

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{H}" viewBox="0 0 {} {H}" font-family="sans-serif">"#,
        W + 80.0,
        W + 80.0
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" font-size="15" text-anchor="middle">{}</text>"#,
        W / 2.0,
        esc(title)
    );
    s
}

fn axis_labels(s: &mut String, x: &str, y: &str) {
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 18.0,
        esc(x)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        esc(y)
    );
}

/// MSE against noise level, one line per filter.
pub fn noise_svg(points: &[(f64, String, f64)]) -> String {
    let mut names: Vec<&str> = Vec::new();
    for (_, f, _) in points {
        if !names.contains(&f.as_str()) {
            names.push(f);
        }
    }
    let series: Vec<LineSeries> = names
        .iter()
        .map(|n| LineSeries {
            label: n.to_string(),
            points: points.iter().filter(|p| p.1 == *n).map(|p| (p.0, p.2)).collect(),
        })
        .collect();
    lines_svg("Test MSE vs input noise", "noise std", "mean test MSE", &series, false, true)
}

/// MSE (`what = "mse"`) or per-sample test time against training size.
pub fn scaling_svg(table: &ScalingTable, what: &str) -> String {
    let mut names: Vec<&str> = Vec::new();
    for r in &table.rows {
        if !names.contains(&r.filter.as_str()) {
            names.push(&r.filter);
        }
    }
    let pick = |r: &ScalingRow| match what {
        "mse" => r.mse,
        "train" => r.train_ms,
        _ => r.test_ms_per_sample,
    };
    let series: Vec<LineSeries> = names
        .iter()
        .map(|n| LineSeries {
            label: n.to_string(),
            points: table.rows.iter().filter(|r| r.filter == *n).map(|r| (r.n as f64, pick(r))).collect(),
        })
        .collect();
    let (title, ylabel) = match what {
        "mse" => ("Test MSE vs training size", "test MSE"),
        "train" => ("Training time vs training size", "train ms"),
        _ => ("Test time per sample vs training size", "ms per sample"),
    };
    lines_svg(title, "training size N", ylabel, &series, true, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{ExperimentConfig, FilterReport, FilterSpec, FoldCell, FoldMetrics};

    fn report() -> EvalReport {
        let metrics = |mse: f64| FoldMetrics {
            mse,
            train_ms: f64::NAN,
            test_ms_per_sample: f64::NAN,
            model_size: 7,
            n_train: 10,
            n_test: 2,
        };
        EvalReport {
            config: ExperimentConfig::default(),
            filters: vec![
                FilterReport {
                    spec: FilterSpec::fwf_lm(1.5, 1),
                    cells: vec![
                        FoldCell { fold: 0, outcome: Ok(metrics(0.1 + 0.2)) },
                        FoldCell { fold: 1, outcome: Ok(metrics(1.0 / 3.0)) },
                    ],
                },
                FilterReport {
                    spec: FilterSpec::wiener(),
                    cells: vec![FoldCell {
                        fold: 0,
                        outcome: Err("singular, really\nbad".into()),
                    }],
                },
            ],
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = EvalReport {
            config: ExperimentConfig::default(),
            filters: vec![],
        };
        assert_eq!(results_csv(&r), format!("{RESULTS_HEADER}\n"));
        assert_eq!(summary_csv(&r), format!("{SUMMARY_HEADER}\n"));
    }

    #[test]
    fn results_round_trip_exactly() {
        let text = results_csv(&report());
        let parsed = parse_results_csv(&text).unwrap();
        assert_eq!(parsed[0].2.to_bits(), (0.1f64 + 0.2).to_bits());
        assert_eq!(parsed[1].2.to_bits(), (1.0f64 / 3.0).to_bits());
        assert!(parsed[2].2.is_nan());
        assert!(text.lines().nth(3).unwrap().contains("error=singular  really bad"));
    }

    #[test]
    fn surface_round_trip_and_svg_cells() {
        let mut cells = Vec::new();
        for (i, l) in [3usize, 5, 7].iter().enumerate() {
            for (j, s) in [0.5, 1.0].iter().enumerate() {
                cells.push(SurfaceCell {
                    sigma: *s,
                    lags: *l,
                    k: 5,
                    mse: 1e-3 * (1.0 + i as f64) / (3.0 + j as f64),
                    error: None,
                });
            }
        }
        cells[4].mse = f64::NAN;
        let surface = Surface { cells };
        let back = parse_surface_csv(&surface_csv(&surface)).unwrap();
        for (a, b) in surface.cells.iter().zip(&back.cells) {
            assert_eq!((a.sigma, a.lags, a.k), (b.sigma, b.lags, b.k));
            assert!(a.mse.to_bits() == b.mse.to_bits() || (a.mse.is_nan() && b.mse.is_nan()));
        }
        let svg = surface_svg(&surface, 5);
        assert_eq!(svg.matches(r#"class="cell""#).count(), 6);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        let err = write_atomic(&dir.path().join("missing/x.csv"), b"x").unwrap_err();
        assert!(err.to_string().contains("missing"));
    }
}
