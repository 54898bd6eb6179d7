//! Matrix files, sampling sets and trace CSVs.
//!
//! Matrices are read from Matrix Market (`.mtx`, array or coordinate,
//! `real`/`integer`, `general`/`symmetric`) or headerless CSV (`.csv`),
//! chosen by extension.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::operators::SamplingSet;
use crate::solver::IterationRecord;

enum Format {
    MatrixMarket,
    Csv,
}

fn format_of(path: &Path) -> Result<Format> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("mtx") => Ok(Format::MatrixMarket),
        Some("csv") => Ok(Format::Csv),
        _ => Err(parse_error(path, "unknown matrix format; use .mtx or .csv")),
    }
}

fn parse_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), message: message.into() }
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    match format_of(path)? {
        Format::MatrixMarket => read_matrix_market(path),
        Format::Csv => read_csv_matrix(path),
    }
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format_of(path)? {
        Format::MatrixMarket => {
            writeln!(out, "%%MatrixMarket matrix array real general")?;
            writeln!(out, "{} {}", m.nrows(), m.ncols())?;
            for v in m.iter() {
                writeln!(out, "{v:e}")?;
            }
        }
        Format::Csv => {
            for i in 0..m.nrows() {
                let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:e}")).collect();
                writeln!(out, "{}", row.join(","))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn read_csv_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| parse_error(path, format!("row {}: {e}", line + 1))))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_error(path, format!("row {} has {} columns, expected {}", line + 1, row.len(), first.len())));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_error(path, "empty matrix"));
    }
    let (r, c) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn read_matrix_market(path: &Path) -> Result<DMatrix<f64>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.ok_or_else(|| parse_error(path, "empty file"))?;
    let fields: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if fields.len() < 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(parse_error(path, "missing %%MatrixMarket matrix header"));
    }
    let coordinate = match fields[2].as_str() {
        "array" => false,
        "coordinate" => true,
        other => return Err(parse_error(path, format!("unsupported layout {other}"))),
    };
    if !matches!(fields[3].as_str(), "real" | "integer" | "double") {
        return Err(parse_error(path, format!("unsupported field {}", fields[3])));
    }
    let symmetric = match fields[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(parse_error(path, format!("unsupported symmetry {other}"))),
    };

    let mut body = Vec::new();
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        body.push(t.to_string());
    }
    let mut body = body.into_iter();
    let size = body.next().ok_or_else(|| parse_error(path, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| parse_error(path, format!("bad size line '{size}'"))))
        .collect::<Result<_>>()?;
    let num = |s: &str| s.parse::<f64>().map_err(|_| parse_error(path, format!("bad value '{s}'")));

    if coordinate {
        let [rows, cols, nnz] = dims[..] else {
            return Err(parse_error(path, "coordinate size line needs rows cols nnz"));
        };
        let mut m = DMatrix::zeros(rows, cols);
        let mut count = 0;
        for entry in body {
            let parts: Vec<&str> = entry.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(parse_error(path, format!("bad entry '{entry}'")));
            }
            let i: usize = parts[0].parse().map_err(|_| parse_error(path, format!("bad row in '{entry}'")))?;
            let j: usize = parts[1].parse().map_err(|_| parse_error(path, format!("bad column in '{entry}'")))?;
            if i == 0 || j == 0 || i > rows || j > cols {
                return Err(parse_error(path, format!("entry ({i}, {j}) out of range")));
            }
            let v = num(parts[2])?;
            m[(i - 1, j - 1)] = v;
            if symmetric {
                m[(j - 1, i - 1)] = v;
            }
            count += 1;
        }
        if count != nnz {
            return Err(parse_error(path, format!("expected {nnz} entries, found {count}")));
        }
        Ok(m)
    } else {
        let [rows, cols] = dims[..] else {
            return Err(parse_error(path, "array size line needs rows cols"));
        };
        let values: Vec<f64> = body.map(|s| num(&s)).collect::<Result<_>>()?;
        if symmetric {
            if rows != cols || values.len() != rows * (rows + 1) / 2 {
                return Err(parse_error(path, "symmetric array needs the lower triangle of a square matrix"));
            }
            let mut m = DMatrix::zeros(rows, cols);
            let mut it = values.into_iter();
            for j in 0..cols {
                for i in j..rows {
                    let v = it.next().unwrap();
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            Ok(m)
        } else {
            if values.len() != rows * cols {
                return Err(parse_error(path, format!("expected {} values, found {}", rows * cols, values.len())));
            }
            Ok(DMatrix::from_column_slice(rows, cols, &values))
        }
    }
}

/// Reads `Ω` from a two-column CSV of 1-based `(row, col)` pairs, in the
/// canonical order (by column, then row).
pub fn read_sampling_csv(path: &Path, n: usize) -> Result<SamplingSet> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
    let mut pairs = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != 2 {
            return Err(parse_error(path, format!("row {} must have two columns", line + 1)));
        }
        let parse = |s: &str| {
            s.parse::<usize>().map_err(|_| parse_error(path, format!("row {}: bad index '{s}'", line + 1)))
        };
        pairs.push((parse(&record[0])?, parse(&record[1])?));
    }
    SamplingSet::new(n, &pairs)
}

pub const TRACE_HEADER: &str = "iter,elapsed_sec,f_value,ref_value,relobj,sym_gap,residual,mu_bar,sigma_bar,inner_iters";

/// Writes a trace as CSV. Floats use the shortest representation that
/// round-trips, so equal traces give equal bytes.
pub fn write_trace<W: Write>(out: W, trace: &[IterationRecord]) -> Result<()> {
    let mut w = BufWriter::new(out);
    writeln!(w, "{TRACE_HEADER}")?;
    for r in trace {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.k,
            r.elapsed_sec,
            r.f_value,
            r.ref_value,
            r.relobj,
            r.sym_gap,
            r.stationarity_residual,
            r.mu_bar,
            r.sigma_bar,
            r.inner_iterations
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(path: &Path, trace: &[IterationRecord]) -> Result<()> {
    write_trace(File::create(path)?, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn matrix_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let m = DMatrix::from_row_slice(2, 3, &[1.0, -2.5, 3.0, 0.125, 1e-300, 7.0]);
        for name in ["a.mtx", "a.csv"] {
            let p = dir.path().join(name);
            write_matrix(&p, &m).unwrap();
            assert_eq!(read_matrix(&p).unwrap(), m);
        }
    }

    #[test]
    fn matrix_market_variants() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.mtx");
        fs::write(&p, "%%MatrixMarket matrix coordinate real symmetric\n% comment\n3 3 2\n2 1 4.0\n3 3 1\n").unwrap();
        let m = read_matrix(&p).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(3, 3, &[0.0, 4.0, 0.0, 4.0, 0.0, 0.0, 0.0, 0.0, 1.0]));
        fs::write(&p, "%%MatrixMarket matrix array integer symmetric\n2 2\n1\n2\n3\n").unwrap();
        assert_eq!(read_matrix(&p).unwrap(), DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]));
        fs::write(&p, "%%MatrixMarket matrix coordinate pattern general\n1 1 1\n1 1\n").unwrap();
        assert!(matches!(read_matrix(&p), Err(Error::Parse { .. })));
        fs::write(&p, "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n").unwrap();
        assert!(read_matrix(&p).is_err());
    }

    #[test]
    fn unknown_extension_and_ragged_csv() {
        let dir = tempfile::tempdir().unwrap();
        assert!(read_matrix(&dir.path().join("m.txt")).is_err());
        let p = dir.path().join("r.csv");
        fs::write(&p, "1,2\n3\n").unwrap();
        assert!(read_matrix(&p).is_err());
    }

    #[test]
    fn sampling_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("omega.csv");
        fs::write(&p, "2,1\n1,2\n").unwrap();
        let s = read_sampling_csv(&p, 2).unwrap();
        assert_eq!(s.pairs_one_based().collect::<Vec<_>>(), vec![(2, 1), (1, 2)]);
        fs::write(&p, "2,1\n").unwrap();
        assert!(matches!(read_sampling_csv(&p, 2), Err(Error::InvalidSampling(_))));
    }

    #[test]
    fn trace_header() {
        let mut buf = Vec::new();
        write_trace(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{TRACE_HEADER}\n"));
    }
}
