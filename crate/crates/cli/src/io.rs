//! CSV readers and writers for point clouds, distance matrices and labels.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use riswie::harness::DistanceMatrix;
use riswie::PointCloud;

use crate::error::{CliError, CliResult};

/// One non-blank CSV record with its 1-based line number.
struct Record {
    line: u64,
    fields: Vec<String>,
}

fn read_records(path: &Path) -> CliResult<Vec<Record>> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        // the reader's line count and offsets both land before skipped
        // blank lines
        let mut start = rec.position().map_or(0, |p| p.byte() as usize);
        while start < bytes.len() && bytes[start].is_ascii_whitespace() {
            start += 1;
        }
        let line = 1 + bytes[..start].iter().filter(|&&b| b == b'\n').count() as u64;
        out.push(Record {
            line,
            fields: rec.iter().map(str::to_owned).collect(),
        });
    }
    Ok(out)
}

fn is_number(s: &str) -> bool {
    s.parse::<f64>().is_ok()
}

fn number(path: &Path, line: u64, s: &str) -> CliResult<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(CliError::Parse(format!("{}:{line}: not a finite number: '{s}'", path.display()))),
    }
}

/// Read a cloud, one point per row. A first row whose first field is not a
/// number is taken as a header. The file stem becomes the cloud id.
pub fn read_cloud(path: &Path) -> CliResult<PointCloud> {
    let mut records = read_records(path)?;
    if records.first().is_some_and(|r| !is_number(&r.fields[0])) {
        records.remove(0);
    }
    let Some(first) = records.first() else {
        return Err(CliError::Parse(format!("{}: no points", path.display())));
    };
    let d = first.fields.len();
    let mut values = Vec::with_capacity(records.len() * d);
    for r in &records {
        if r.fields.len() != d {
            return Err(CliError::Parse(format!(
                "{}:{}: expected {d} columns, found {}",
                path.display(),
                r.line,
                r.fields.len()
            )));
        }
        for f in &r.fields {
            values.push(number(path, r.line, f)?);
        }
    }
    let points = Array2::from_shape_vec((records.len(), d), values).expect("shape checked above");
    let cloud = PointCloud::new(points).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    Ok(cloud.with_id(stem(path)))
}

pub fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned())
}

/// Expand a single directory argument into its `*.csv` files, sorted by name.
pub fn expand_inputs(inputs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    if let [dir] = inputs {
        if dir.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
                .map_err(|e| CliError::Parse(format!("{}: {e}", dir.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
                .collect();
            files.sort();
            if files.is_empty() {
                return Err(CliError::Config(format!("{}: no .csv files", dir.display())));
            }
            return Ok(files);
        }
    }
    Ok(inputs.to_vec())
}

/// Read a square matrix. When the first field of the file is not a number,
/// the first row and column hold ids and must agree.
pub fn read_matrix(path: &Path) -> CliResult<DistanceMatrix> {
    let records = read_records(path)?;
    let Some(first) = records.first() else {
        return Err(CliError::Parse(format!("{}: empty matrix", path.display())));
    };
    let labeled = !is_number(&first.fields[0]);
    let (col_ids, body) = if labeled {
        (Some(first.fields[1..].to_vec()), &records[1..])
    } else {
        (None, &records[..])
    };
    let m = body.len();
    let width = if labeled { m + 1 } else { m };
    let mut values = Array2::zeros((m, m));
    let mut row_ids = Vec::with_capacity(m);
    for (i, r) in body.iter().enumerate() {
        if r.fields.len() != width {
            return Err(CliError::Parse(format!(
                "{}:{}: expected {width} fields, found {}",
                path.display(),
                r.line,
                r.fields.len()
            )));
        }
        let cells = if labeled {
            row_ids.push(r.fields[0].clone());
            &r.fields[1..]
        } else {
            &r.fields[..]
        };
        for (j, f) in cells.iter().enumerate() {
            values[[i, j]] = number(path, r.line, f)?;
        }
    }
    let matrix = match col_ids {
        Some(cols) => {
            if cols != row_ids {
                return Err(CliError::Parse(format!("{}: row ids differ from column ids", path.display())));
            }
            DistanceMatrix::new(row_ids, values)
        }
        None => DistanceMatrix::unlabeled(values),
    };
    matrix.map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn matrix_csv(d: &DistanceMatrix) -> String {
    let mut out = String::from("id");
    for id in d.ids() {
        out.push(',');
        out.push_str(&csv_field(id));
    }
    out.push('\n');
    for (i, id) in d.ids().iter().enumerate() {
        out.push_str(&csv_field(id));
        for j in 0..d.len() {
            out.push(',');
            out.push_str(&fmt_float(d.get(i, j)));
        }
        out.push('\n');
    }
    out
}

pub fn points_csv(cloud: &PointCloud) -> String {
    let mut out = String::new();
    for row in cloud.points().rows() {
        let line: Vec<String> = row.iter().map(|v| fmt_float(*v)).collect();
        writeln!(out, "{}", line.join(",")).unwrap();
    }
    out
}

pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Labels as either `id,label` rows (matched to `ids`) or one label per row
/// in matrix order. A leading header row is skipped when its first field is
/// `id` or `label`.
pub fn read_labels(path: &Path, ids: &[String]) -> CliResult<Vec<String>> {
    let mut records = read_records(path)?;
    if records
        .first()
        .is_some_and(|r| matches!(r.fields[0].to_ascii_lowercase().as_str(), "id" | "label"))
    {
        records.remove(0);
    }
    if records.len() != ids.len() {
        return Err(CliError::Config(format!(
            "{}: {} labels for {} items",
            path.display(),
            records.len(),
            ids.len()
        )));
    }
    match records[0].fields.len() {
        1 => Ok(records.into_iter().map(|r| r.fields[0].clone()).collect()),
        2 => {
            let mut by_id = std::collections::HashMap::new();
            for r in &records {
                if by_id.insert(r.fields[0].clone(), r.fields[1].clone()).is_some() {
                    return Err(CliError::Parse(format!("{}:{}: duplicate id '{}'", path.display(), r.line, r.fields[0])));
                }
            }
            ids.iter()
                .map(|id| {
                    by_id
                        .get(id)
                        .cloned()
                        .ok_or_else(|| CliError::Config(format!("{}: no label for id '{id}'", path.display())))
                })
                .collect()
        }
        n => Err(CliError::Parse(format!(
            "{}:{}: expected 1 or 2 fields, found {n}",
            path.display(),
            records[0].line
        ))),
    }
}
