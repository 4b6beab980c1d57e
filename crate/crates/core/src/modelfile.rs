//! Versioned text model files.
//!
//! Every file starts with a `<KIND> v1` header followed by `key=value` lines.
//! Vectors are written as `name: v0,v1,...` and tabular payloads as a
//! `name:` marker line followed by a CSV block with its own header. Numbers
//! carry 17 significant digits so a reload reproduces predictions bit for bit.
//!
//! ```text
//! FWF v1
//! sigma=1.5000000000000000e0
//! L=7
//! ...
//! weights: ...
//! rho: ...
//! training:
//! anchor,z,x0,x1,...
//! index:
//! anchor,partner,z,zhat
//! ```

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::baselines::{KlmsModel, KrlsModel, WienerModel};
use crate::correntropy::{CorrentropyVector, CrossCorrentropyVector, KernelConfig};
use crate::error::{FwfError, Result};
use crate::fmt_f64;
use crate::fwf::{CorrentropyMatrix, FwfModel};
use crate::preimage::{LocalEntry, LocalModelIndex};
use crate::signal::{parse_f64, LagVector, SupervisedDataset};

/// Any model the toolkit can persist.
#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    Fwf {
        model: FwfModel,
        index: Option<LocalModelIndex>,
    },
    Wiener(WienerModel),
    Klms(KlmsModel),
    Krls(KrlsModel),
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",")
}

pub fn write_model<W: Write>(model: &SavedModel, mut out: W) -> std::io::Result<()> {
    match model {
        SavedModel::Fwf { model, index } => {
            let reg = model.regularization();
            let v = model.matrix.first_row();
            writeln!(out, "FWF v1")?;
            writeln!(out, "sigma={}", fmt_f64(model.kernel.sigma))?;
            writeln!(out, "normalized={}", model.kernel.normalized)?;
            writeln!(out, "L={}", model.lags)?;
            writeln!(out, "horizon={}", model.horizon)?;
            writeln!(out, "lambda={}", fmt_f64(reg.lambda))?;
            writeln!(out, "gamma={}", fmt_f64(reg.gamma))?;
            writeln!(out, "target_condition={}", fmt_f64(reg.target_condition))?;
            writeln!(out, "achieved_condition={}", fmt_f64(reg.achieved_condition))?;
            writeln!(out, "eig_min={}", fmt_f64(reg.eig_min))?;
            writeln!(out, "eig_max={}", fmt_f64(reg.eig_max))?;
            writeln!(out, "centered={}", v.centered)?;
            writeln!(out, "weights: {}", join(&model.weights))?;
            writeln!(out, "rho: {}", join(&model.rho.values))?;
            writeln!(out, "correntropy: {}", join(&v.values))?;
            if let Some(train) = &model.training {
                writeln!(out, "training:")?;
                let cols: Vec<String> = (0..model.lags).map(|i| format!("x{i}")).collect();
                writeln!(out, "anchor,z,{}", cols.join(","))?;
                for (w, z) in train.inputs.iter().zip(&train.targets) {
                    writeln!(out, "{},{},{}", w.anchor, fmt_f64(*z), join(&w.values))?;
                }
            }
            if let Some(index) = index {
                writeln!(out, "index:")?;
                writeln!(out, "anchor,partner,z,zhat")?;
                for e in index.entries() {
                    writeln!(out, "{},{},{},{}", e.anchor, e.partner, fmt_f64(e.z), fmt_f64(e.zhat))?;
                }
            }
        }
        SavedModel::Wiener(m) => {
            writeln!(out, "WIENER v1")?;
            writeln!(out, "L={}", m.lags)?;
            writeln!(out, "horizon={}", m.horizon)?;
            writeln!(out, "ridge={}", fmt_f64(m.ridge))?;
            writeln!(out, "weights: {}", join(&m.weights))?;
        }
        SavedModel::Klms(m) => {
            writeln!(out, "KLMS v1")?;
            writeln!(out, "L={}", m.lags)?;
            writeln!(out, "horizon={}", m.horizon)?;
            writeln!(out, "eta={}", fmt_f64(m.eta))?;
            writeln!(out, "sigma={}", fmt_f64(m.kernel.sigma))?;
            write_centers(&mut out, m.lags, "coef", (0..m.len()).map(|i| (m.coefficients[i], m.center(i))))?;
        }
        SavedModel::Krls(m) => {
            writeln!(out, "KRLS v1")?;
            writeln!(out, "L={}", m.lags)?;
            writeln!(out, "horizon={}", m.horizon)?;
            writeln!(out, "ridge={}", fmt_f64(m.ridge))?;
            writeln!(out, "sigma={}", fmt_f64(m.kernel.sigma))?;
            writeln!(out, "budget={}", m.budget.map_or("none".to_string(), |b| b.to_string()))?;
            write_centers(&mut out, m.lags, "alpha", (0..m.len()).map(|i| (m.alpha[i], m.center(i))))?;
        }
    }
    Ok(())
}

fn write_centers<'a, W: Write>(
    out: &mut W,
    lags: usize,
    coef: &str,
    rows: impl Iterator<Item = (f64, &'a [f64])>,
) -> std::io::Result<()> {
    writeln!(out, "centers:")?;
    let cols: Vec<String> = (0..lags).map(|i| format!("x{i}")).collect();
    writeln!(out, "{coef},{}", cols.join(","))?;
    for (a, c) in rows {
        writeln!(out, "{},{}", fmt_f64(a), join(c))?;
    }
    Ok(())
}

/// Parsed but untyped model file.
struct RawModel {
    kind: String,
    keys: BTreeMap<String, (usize, String)>,
    vectors: BTreeMap<String, (usize, Vec<f64>)>,
    /// Block name -> (first data line number, header, rows).
    blocks: BTreeMap<String, (usize, String, Vec<String>)>,
}

impl RawModel {
    fn parse<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| FwfError::parse(1, "empty model file"))?;
        let header = header.map_err(|e| FwfError::parse(1, e.to_string()))?;
        let kind = header
            .trim()
            .strip_suffix(" v1")
            .ok_or_else(|| FwfError::parse(1, format!("unsupported header `{}`", header.trim())))?
            .to_string();
        let mut raw = RawModel {
            kind,
            keys: BTreeMap::new(),
            vectors: BTreeMap::new(),
            blocks: BTreeMap::new(),
        };
        let mut current_block: Option<String> = None;
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line.map_err(|e| FwfError::parse(lineno, e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_suffix(':') {
                if !name.contains(',') && !name.contains(' ') {
                    raw.blocks.insert(name.to_string(), (lineno + 2, String::new(), Vec::new()));
                    current_block = Some(name.to_string());
                    continue;
                }
            }
            if let Some(block) = &current_block {
                let entry = raw.blocks.get_mut(block).expect("block registered");
                if entry.1.is_empty() {
                    entry.1 = line.to_string();
                } else {
                    entry.2.push(line.to_string());
                }
                continue;
            }
            if let Some((name, rest)) = line.split_once(": ") {
                let values = if rest.trim().is_empty() {
                    Vec::new()
                } else {
                    rest.split(',').map(|v| parse_f64(v, lineno)).collect::<Result<_>>()?
                };
                raw.vectors.insert(name.trim().to_string(), (lineno, values));
            } else if let Some((k, v)) = line.split_once('=') {
                raw.keys.insert(k.trim().to_string(), (lineno, v.trim().to_string()));
            } else {
                return Err(FwfError::parse(lineno, format!("unrecognised line `{line}`")));
            }
        }
        Ok(raw)
    }

    fn key(&self, name: &str) -> Result<&(usize, String)> {
        self.keys
            .get(name)
            .ok_or_else(|| FwfError::parse(0, format!("missing key `{name}`")))
    }

    fn float(&self, name: &str) -> Result<f64> {
        let (line, v) = self.key(name)?;
        parse_f64(v, *line)
    }

    /// Optional boolean key, `false` when absent.
    fn flag(&self, name: &str) -> Result<bool> {
        match self.keys.get(name) {
            None => Ok(false),
            Some((line, v)) => v
                .parse()
                .map_err(|_| FwfError::parse(*line, format!("`{name}` must be true or false"))),
        }
    }

    fn usize(&self, name: &str) -> Result<usize> {
        let (line, v) = self.key(name)?;
        v.parse()
            .map_err(|_| FwfError::parse(*line, format!("`{name}` must be a non-negative integer")))
    }

    fn vector(&self, name: &str, len: usize) -> Result<Vec<f64>> {
        let (line, v) = self
            .vectors
            .get(name)
            .ok_or_else(|| FwfError::parse(0, format!("missing vector `{name}`")))?;
        if v.len() != len {
            return Err(FwfError::parse(*line, format!("`{name}` has {} entries, expected {len}", v.len())));
        }
        Ok(v.clone())
    }

    /// Rows of a numeric CSV block, checked against the expected header.
    fn block(&self, name: &str, header: &str) -> Result<Option<Vec<(usize, Vec<String>)>>> {
        let Some((first, got_header, rows)) = self.blocks.get(name) else {
            return Ok(None);
        };
        if got_header != header {
            return Err(FwfError::parse(first - 1, format!("expected header `{header}`")));
        }
        let ncols = header.split(',').count();
        rows.iter()
            .enumerate()
            .map(|(i, row)| {
                let cells: Vec<String> = row.split(',').map(|c| c.trim().to_string()).collect();
                if cells.len() != ncols {
                    return Err(FwfError::parse(first + i, format!("expected {ncols} columns")));
                }
                Ok((first + i, cells))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.parse()
        .map_err(|_| FwfError::parse(line, format!("bad integer `{s}`")))
}

fn center_rows(raw: &RawModel, lags: usize, coef: &str) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let cols: Vec<String> = (0..lags).map(|i| format!("x{i}")).collect();
    let rows = raw
        .block("centers", &format!("{coef},{}", cols.join(",")))?
        .unwrap_or_default();
    let mut centers = Vec::with_capacity(rows.len());
    let mut coefs = Vec::with_capacity(rows.len());
    for (line, cells) in rows {
        coefs.push(parse_f64(&cells[0], line)?);
        centers.push(cells[1..].iter().map(|c| parse_f64(c, line)).collect::<Result<Vec<_>>>()?);
    }
    Ok((centers, coefs))
}

pub fn read_model<R: BufRead>(input: R) -> Result<SavedModel> {
    let raw = RawModel::parse(input)?;
    match raw.kind.as_str() {
        "FWF" => read_fwf(&raw),
        "WIENER" => {
            let lags = raw.usize("L")?;
            Ok(SavedModel::Wiener(WienerModel {
                weights: raw.vector("weights", lags)?,
                lags,
                ridge: raw.float("ridge")?,
                horizon: raw.usize("horizon")?,
            }))
        }
        "KLMS" => {
            let lags = raw.usize("L")?;
            let (centers, coefs) = center_rows(&raw, lags, "coef")?;
            let mut m = KlmsModel::from_parts(centers, coefs, raw.float("eta")?, raw.float("sigma")?, raw.usize("horizon")?)?;
            m.lags = lags;
            Ok(SavedModel::Klms(m))
        }
        "KRLS" => {
            let lags = raw.usize("L")?;
            let (centers, alpha) = center_rows(&raw, lags, "alpha")?;
            let budget = match raw.key("budget")?.1.as_str() {
                "none" => None,
                _ => Some(raw.usize("budget")?),
            };
            let mut m = KrlsModel::from_parts(
                centers,
                alpha,
                raw.float("ridge")?,
                raw.float("sigma")?,
                budget,
                raw.usize("horizon")?,
            )?;
            m.lags = lags;
            Ok(SavedModel::Krls(m))
        }
        other => Err(FwfError::parse(1, format!("unknown model kind `{other}`"))),
    }
}

fn read_fwf(raw: &RawModel) -> Result<SavedModel> {
    use crate::fwf::RegularizationRecord;

    let lags = raw.usize("L")?;
    let horizon = raw.usize("horizon")?;
    let normalized = raw.flag("normalized")?;
    let kernel = if normalized {
        KernelConfig::normalized(raw.float("sigma")?)?
    } else {
        KernelConfig::new(raw.float("sigma")?)?
    };
    let centered = raw.flag("centered")?;
    let v = CorrentropyVector {
        values: raw.vector("correntropy", lags)?,
        sigma: kernel.sigma,
        normalized,
        n_effective: Vec::new(),
        centered,
    };
    let reg = RegularizationRecord {
        gamma: raw.float("gamma")?,
        lambda: raw.float("lambda")?,
        target_condition: raw.float("target_condition")?,
        achieved_condition: raw.float("achieved_condition")?,
        eig_min: raw.float("eig_min")?,
        eig_max: raw.float("eig_max")?,
    };
    let matrix = CorrentropyMatrix::new(v)?.with_regularization(reg);
    let rho = CrossCorrentropyVector {
        values: raw.vector("rho", lags)?,
        sigma: kernel.sigma,
        centered,
    };

    let cols: Vec<String> = (0..lags).map(|i| format!("x{i}")).collect();
    let training = match raw.block("training", &format!("anchor,z,{}", cols.join(",")))? {
        None => None,
        Some(rows) => {
            let mut inputs = Vec::with_capacity(rows.len());
            let mut targets = Vec::with_capacity(rows.len());
            for (line, cells) in rows {
                let anchor = parse_usize(&cells[0], line)?;
                targets.push(parse_f64(&cells[1], line)?);
                let values = cells[2..].iter().map(|c| parse_f64(c, line)).collect::<Result<Vec<_>>>()?;
                inputs.push(LagVector::new(values, anchor));
            }
            Some(SupervisedDataset {
                inputs,
                targets,
                lags,
                horizon,
            })
        }
    };

    let model = FwfModel {
        kernel,
        lags,
        horizon,
        weights: raw.vector("weights", lags)?,
        matrix,
        rho,
        training,
    };
    model.check_residual()?;

    let index = match raw.block("index", "anchor,partner,z,zhat")? {
        None => None,
        Some(rows) => {
            let train = model.training.as_ref().ok_or_else(|| {
                FwfError::parse(0, "local-model index requires the training block")
            })?;
            let row_of: BTreeMap<usize, usize> =
                train.inputs.iter().enumerate().map(|(r, w)| (w.anchor, r)).collect();
            if rows.len() != train.len() {
                return Err(FwfError::parse(0, "index and training blocks differ in length"));
            }
            let mut entries = Vec::with_capacity(rows.len());
            for (line, cells) in rows {
                let anchor = parse_usize(&cells[0], line)?;
                let partner = parse_usize(&cells[1], line)?;
                let partner_row = *row_of
                    .get(&partner)
                    .ok_or_else(|| FwfError::parse(line, format!("unknown partner anchor {partner}")))?;
                entries.push(LocalEntry {
                    anchor,
                    partner,
                    partner_row,
                    z: parse_f64(&cells[2], line)?,
                    zhat: parse_f64(&cells[3], line)?,
                });
            }
            Some(LocalModelIndex::from_entries(entries, train))
        }
    };
    Ok(SavedModel::Fwf { model, index })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preimage::{fixed_point, FixedPointConfig, LocalModelConfig};
    use crate::signal::{embed, MackeyGlass};

    fn round_trip(m: &SavedModel) -> SavedModel {
        let mut buf = Vec::new();
        write_model(m, &mut buf).unwrap();
        read_model(buf.as_slice()).unwrap()
    }

    #[test]
    fn fwf_round_trip_is_bit_exact() {
        let s = MackeyGlass {
            n: 300,
            ..MackeyGlass::default()
        }
        .generate()
        .unwrap();
        let data = embed(&s, 5, 1).unwrap();
        let model = FwfModel::fit(&data, KernelConfig::new(1.5).unwrap(), 30.0).unwrap();
        let index = LocalModelIndex::build(&model).unwrap();
        let saved = SavedModel::Fwf {
            model: model.clone(),
            index: Some(index.clone()),
        };
        let SavedModel::Fwf { model: m2, index: Some(i2) } = round_trip(&saved) else {
            panic!("wrong kind");
        };
        assert_eq!(m2.weights, model.weights);
        assert_eq!(i2, index);
        let cfg = LocalModelConfig::with_k(3);
        for w in data.inputs.iter().step_by(13) {
            let probe = LagVector::new(w.values.iter().map(|v| v + 0.01).collect(), w.anchor);
            assert_eq!(
                index.predict(&model, &probe, &cfg).unwrap().to_bits(),
                i2.predict(&m2, &probe, &cfg).unwrap().to_bits()
            );
            assert_eq!(
                fixed_point(&model, &probe, &FixedPointConfig::default()).unwrap().y.to_bits(),
                fixed_point(&m2, &probe, &FixedPointConfig::default()).unwrap().y.to_bits()
            );
        }
    }

    #[test]
    fn baseline_round_trips() {
        let s = MackeyGlass {
            n: 120,
            ..MackeyGlass::default()
        }
        .generate()
        .unwrap();
        let data = embed(&s, 3, 1).unwrap();
        let models = [
            SavedModel::Wiener(WienerModel::fit(&data, 1e-6).unwrap()),
            SavedModel::Klms(KlmsModel::train(&data, 0.1, 1.0).unwrap()),
            SavedModel::Krls(KrlsModel::train(&data, 1e-3, 1.0, Some(50)).unwrap()),
        ];
        for m in &models {
            let back = round_trip(m);
            for w in &data.inputs {
                let (a, b) = match (m, &back) {
                    (SavedModel::Wiener(a), SavedModel::Wiener(b)) => (a.predict(w).unwrap(), b.predict(w).unwrap()),
                    (SavedModel::Klms(a), SavedModel::Klms(b)) => (a.predict(w).unwrap(), b.predict(w).unwrap()),
                    (SavedModel::Krls(a), SavedModel::Krls(b)) => (a.predict(w).unwrap(), b.predict(w).unwrap()),
                    _ => panic!("kind changed"),
                };
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn rejects_bad_header_and_lengths() {
        assert!(read_model("FWF v2\n".as_bytes()).is_err());
        let bad = "WIENER v1\nL=3\nhorizon=1\nridge=0\nweights: 1,2\n";
        assert!(matches!(read_model(bad.as_bytes()), Err(FwfError::Parse { line: 5, .. })));
    }
}
