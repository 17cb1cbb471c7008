//! File formats shared by the command-line tools: headered CSV for
//! vectors, matrices, frequencies, and summaries, JSON for structured
//! results, and JSON lines for per-replicate records. Numbers are
//! written in shortest round-trip form so rereading a file reproduces
//! the in-memory values exactly.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::groups::{build_group_set, GroupSet, WeightScheme};
use crate::linalg::DenseMatrix;

fn parse_field(raw: &str, what: &'static str) -> Result<f64> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| Error::invalid(what, format!("not a number: {raw:?}")))
}

/// Writes a single-column CSV with header `value`.
pub fn write_vector_csv(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["value"])?;
    for v in values {
        w.write_record([format!("{v}")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vector_csv(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.len() != 1 {
        return Err(Error::invalid(
            "csv",
            format!("expected one `value` column, found {} columns", headers.len()),
        ));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push(parse_field(&rec[0], "value")?);
    }
    Ok(out)
}

/// Writes a matrix as CSV with columns `c1..cp`, one row per record.
pub fn write_matrix_csv(path: &Path, x: &DenseMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let header: Vec<String> = (1..=x.ncols()).map(|j| format!("c{j}")).collect();
    w.write_record(&header)?;
    for i in 0..x.nrows() {
        let row: Vec<String> = x.row(i).iter().map(|v| format!("{v}")).collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<DenseMatrix> {
    let mut r = csv::Reader::from_path(path)?;
    let ncols = r.headers()?.len();
    if ncols == 0 {
        return Err(Error::invalid("csv", "matrix file has no columns"));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != ncols {
            return Err(Error::invalid(
                "csv",
                format!(
                    "row {} has {} fields, expected {ncols}",
                    rows.len() + 2,
                    rec.len()
                ),
            ));
        }
        let mut row = Vec::with_capacity(ncols);
        for field in rec.iter() {
            row.push(parse_field(field, "matrix")?);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::invalid("csv", "matrix file has no data rows"));
    }
    Ok(DenseMatrix::from_rows(&rows))
}

/// On-disk description of a group system. Members are 1-based; exactly
/// one of `weights` (explicit, one per group) or `scheme` (derived from
/// group sizes) must be present.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupsFile {
    pub p: usize,
    pub groups: Vec<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<WeightScheme>,
}

impl GroupsFile {
    pub fn into_group_set(self) -> Result<GroupSet> {
        let mut members_zero = Vec::with_capacity(self.groups.len());
        for (gi, group) in self.groups.iter().enumerate() {
            let mut zero = Vec::with_capacity(group.len());
            for &i in group {
                if i == 0 || i > self.p {
                    return Err(Error::invalid(
                        "groups",
                        format!("group {} member {i} outside 1..={}", gi + 1, self.p),
                    ));
                }
                zero.push(i - 1);
            }
            members_zero.push(zero);
        }
        let weights = match (&self.weights, &self.scheme) {
            (Some(w), None) => {
                if w.len() != self.groups.len() {
                    return Err(Error::invalid(
                        "weights",
                        format!("{} weights for {} groups", w.len(), self.groups.len()),
                    ));
                }
                w.clone()
            }
            (None, Some(s)) => {
                s.validate()?;
                members_zero.iter().map(|g| s.weight(g.len())).collect()
            }
            _ => {
                return Err(Error::invalid(
                    "groups",
                    "exactly one of `weights` or `scheme` must be given",
                ))
            }
        };
        build_group_set(self.p, members_zero, weights)
    }

    pub fn from_group_set(gs: &GroupSet) -> GroupsFile {
        GroupsFile {
            p: gs.p(),
            groups: gs
                .groups()
                .iter()
                .map(|g| g.iter().map(|&i| i + 1).collect())
                .collect(),
            weights: Some(gs.weights().to_vec()),
            scheme: None,
        }
    }
}

pub fn read_groups_json(path: &Path) -> Result<GroupSet> {
    let file: GroupsFile = read_json(path)?;
    file.into_group_set()
}

pub fn write_groups_json(path: &Path, gs: &GroupSet) -> Result<()> {
    write_json(path, &GroupsFile::from_group_set(gs))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(f)?)
}

/// One JSON document per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut f, item)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Selection frequencies: header `covariate,` then one column per λ
/// (the header cell carries the λ value), one row per covariate with a
/// 1-based index.
pub fn write_frequencies_csv(path: &Path, freq: &[Vec<f64>], grid: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["covariate".to_string()];
    header.extend(grid.iter().map(|l| format!("{l}")));
    w.write_record(&header)?;
    for (i, row) in freq.iter().enumerate() {
        if row.len() != grid.len() {
            return Err(Error::invalid(
                "frequencies",
                format!("row {} has {} entries for {} grid points", i + 1, row.len(), grid.len()),
            ));
        }
        let mut rec = vec![format!("{}", i + 1)];
        rec.extend(row.iter().map(|v| format!("{v}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_frequencies_csv(path: &Path) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "covariate" {
        return Err(Error::invalid(
            "csv",
            "expected header `covariate` followed by one column per grid point",
        ));
    }
    let grid: Vec<f64> = headers
        .iter()
        .skip(1)
        .map(|h| parse_field(h, "lambda"))
        .collect::<Result<_>>()?;
    let mut freq = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row: Vec<f64> = rec
            .iter()
            .skip(1)
            .map(|f| parse_field(f, "frequency"))
            .collect::<Result<_>>()?;
        if row.len() != grid.len() {
            return Err(Error::invalid("csv", "ragged frequency row"));
        }
        freq.push(row);
    }
    Ok((grid, freq))
}

/// One row of the per-scheme experiment summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: String,
    pub mse: f64,
    pub lambda_star: f64,
    pub model_size: f64,
    pub rec_err: f64,
    pub rec_err_min: f64,
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

/// Reads an edge list CSV with header `u,v` and 1-based endpoints,
/// returning 0-based pairs.
pub fn read_edges_csv(path: &Path) -> Result<Vec<(usize, usize)>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.len() != 2 {
        return Err(Error::invalid("csv", "expected two columns `u,v`"));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let u: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::invalid("u", format!("not an index: {:?}", &rec[0])))?;
        let v: usize = rec[1]
            .trim()
            .parse()
            .map_err(|_| Error::invalid("v", format!("not an index: {:?}", &rec[1])))?;
        if u == 0 || v == 0 {
            return Err(Error::invalid("edges", "vertex indices are 1-based"));
        }
        out.push((u - 1, v - 1));
    }
    Ok(out)
}
