//! CSV ingestion and output.
//!
//! Curves come in long format, `curve_id[,t],c1,..,cd`, one row per point.
//! Covariates come as `curve_id,<name>,..`; columns that do not parse as
//! numbers are treated as categorical and expanded into 0/1 dummies against
//! the alphabetically first level.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use elastica::{Curve, Curve64, Dataset64};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Curves keyed by id, in order of first appearance.
#[derive(Debug, Clone)]
pub struct CurveTable {
    pub ids: Vec<String>,
    pub curves: Vec<Curve64>,
}

fn read_records(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let records = reader
        .records()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    Ok((header, records))
}

fn number(value: &str, path: &Path, line: usize) -> Result<f64, CliError> {
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::Parse(format!("{}: record {line}: '{value}' is not a finite number", path.display())))
}

/// Reads a long-format curve table. Without a `t` column curves get the
/// constant-speed parametrization; closed curves are closed if needed.
pub fn read_curves(path: &Path, closed: bool) -> Result<CurveTable, CliError> {
    let (header, records) = read_records(path)?;
    if header.first().map(String::as_str) != Some("curve_id") {
        return Err(CliError::Parse(format!("{}: first column must be curve_id", path.display())));
    }
    let has_t = header.get(1).map(String::as_str) == Some("t");
    let first_coord = if has_t { 2 } else { 1 };
    let dim = header.len() - first_coord;
    if dim < 2 || header[first_coord..].iter().enumerate().any(|(i, h)| *h != format!("c{}", i + 1)) {
        return Err(CliError::Parse(format!(
            "{}: expected coordinate columns c1,..,cd with d >= 2 after curve_id{}",
            path.display(),
            if has_t { ",t" } else { "" }
        )));
    }
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, (Vec<f64>, Vec<Vec<f64>>)> = HashMap::new();
    for (line, rec) in records.iter().enumerate() {
        let id = rec.get(0).unwrap_or_default().to_string();
        let entry = rows.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            (Vec::new(), Vec::new())
        });
        if has_t {
            entry.0.push(number(&rec[1], path, line + 1)?);
        }
        let point = (first_coord..header.len()).map(|c| number(&rec[c], path, line + 1)).collect::<Result<Vec<_>, _>>()?;
        entry.1.push(point);
    }
    let curves = order
        .iter()
        .map(|id| {
            let (times, points) = &rows[id];
            let built = if has_t {
                let flat: Vec<f64> = points.iter().flatten().copied().collect();
                Curve::with_times(&flat, times, dim, closed)
            } else {
                elastica::polygon_from_points(points, closed)
            };
            built.map_err(|e| CliError::Parse(format!("{}: curve '{id}': {e}", path.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CurveTable { ids: order, curves })
}

/// How a raw covariate column enters the design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Encoding {
    Numeric { name: String },
    Categorical { name: String, reference: String, levels: Vec<String> },
}

impl Encoding {
    /// Design column names produced by this column.
    pub fn columns(&self) -> Vec<String> {
        match self {
            Encoding::Numeric { name } => vec![name.clone()],
            Encoding::Categorical { name, levels, .. } => levels.iter().map(|l| format!("{name}_{l}")).collect(),
        }
    }

    fn encode(&self, value: &str, out: &mut Vec<f64>) -> Result<(), String> {
        match self {
            Encoding::Numeric { name } => {
                out.push(value.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| format!("{name}: '{value}' is not a number"))?)
            }
            Encoding::Categorical { name, reference, levels } => {
                if value != reference && !levels.iter().any(|l| l == value) {
                    return Err(format!("{name}: unknown level '{value}'"));
                }
                out.extend(levels.iter().map(|l| if l == value { 1.0 } else { 0.0 }));
            }
        }
        Ok(())
    }
}

/// Covariate rows keyed by id, plus the encoding that produced them.
#[derive(Debug, Clone)]
pub struct CovariateTable {
    pub encodings: Vec<Encoding>,
    pub rows: HashMap<String, Vec<f64>>,
    pub ids: Vec<String>,
}

impl CovariateTable {
    pub fn names(&self) -> Vec<String> {
        self.encodings.iter().flat_map(Encoding::columns).collect()
    }
}

/// Infers encodings from the data unless `encodings` is given.
pub fn read_covariates(path: &Path, encodings: Option<&[Encoding]>) -> Result<CovariateTable, CliError> {
    let (header, records) = read_records(path)?;
    if header.first().map(String::as_str) != Some("curve_id") {
        return Err(CliError::Parse(format!("{}: first column must be curve_id", path.display())));
    }
    let names = &header[1..];
    let encodings: Vec<Encoding> = match encodings {
        Some(e) => {
            let expected: Vec<&str> = e.iter().map(|e| match e {
                Encoding::Numeric { name } | Encoding::Categorical { name, .. } => name.as_str(),
            }).collect();
            if expected != names.iter().map(String::as_str).collect::<Vec<_>>() {
                return Err(CliError::Parse(format!("{}: expected covariate columns {}", path.display(), expected.join(","))));
            }
            e.to_vec()
        }
        None => names
            .iter()
            .enumerate()
            .map(|(c, name)| {
                let values: Vec<&str> = records.iter().map(|r| r.get(c + 1).unwrap_or_default()).collect();
                if values.iter().all(|v| v.parse::<f64>().map_or(false, f64::is_finite)) {
                    Encoding::Numeric { name: name.clone() }
                } else {
                    let mut levels: Vec<String> = values.iter().map(|v| v.to_string()).collect::<BTreeSet<_>>().into_iter().collect();
                    let reference = levels.remove(0);
                    Encoding::Categorical { name: name.clone(), reference, levels }
                }
            })
            .collect(),
    };
    let mut rows = HashMap::new();
    let mut ids = Vec::new();
    for (line, rec) in records.iter().enumerate() {
        let id = rec.get(0).unwrap_or_default().to_string();
        let mut row = Vec::new();
        for (c, enc) in encodings.iter().enumerate() {
            enc.encode(rec.get(c + 1).unwrap_or_default(), &mut row)
                .map_err(|e| CliError::Parse(format!("{}: record {}: {e}", path.display(), line + 1)))?;
        }
        if rows.insert(id.clone(), row).is_some() {
            return Err(CliError::Parse(format!("{}: duplicate curve_id '{id}'", path.display())));
        }
        ids.push(id);
    }
    Ok(CovariateTable { encodings, rows, ids })
}

/// Joins curves with their covariates.
pub fn dataset(curves: &CurveTable, covariates: &CovariateTable) -> Result<Dataset64, CliError> {
    let x = curves
        .ids
        .iter()
        .map(|id| covariates.rows.get(id).cloned().ok_or_else(|| CliError::Parse(format!("curve '{id}' has no covariate row"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset64::new(curves.curves.clone(), x, covariates.names())?)
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

/// Long-format CSV of labelled curves with their parameter values.
pub fn curves_csv<'a>(curves: impl IntoIterator<Item = (String, &'a Curve64)>) -> String {
    let mut out = String::new();
    let mut header = false;
    for (id, c) in curves {
        if !header {
            out.push_str("curve_id,t");
            (1..=c.dim()).for_each(|i| write!(out, ",c{i}").unwrap());
            out.push('\n');
            header = true;
        }
        for (l, &t) in c.times().iter().enumerate() {
            write!(out, "{id},{t}").unwrap();
            c.point(l).iter().for_each(|v| write!(out, ",{v}").unwrap());
            out.push('\n');
        }
    }
    out
}
