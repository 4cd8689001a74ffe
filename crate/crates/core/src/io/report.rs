//! CSV readers and writers for convergence tables, traces and sweep reports.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::{TableRow, TABLE_COLUMNS};

/// File name of the per-run convergence table.
pub const TABLE_FILE: &str = "table.csv";

fn float(field: &str, column: &str, line: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| {
        Error::Parse(format!(
            "line {line}: column {column}: {field:?} is not a number"
        ))
    })
}

fn opt_float(field: &str, column: &str, line: usize) -> Result<Option<f64>> {
    if field.trim().is_empty() {
        Ok(None)
    } else {
        float(field, column, line).map(Some)
    }
}

fn count(field: &str, column: &str, line: usize) -> Result<usize> {
    field.trim().parse::<usize>().map_err(|_| {
        Error::Parse(format!(
            "line {line}: column {column}: {field:?} is not a count"
        ))
    })
}

/// Parses a convergence table written by `ConvergenceTable::to_csv`.
pub fn parse_table_csv(text: &str) -> Result<Vec<TableRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Parse(format!("table header: {e}")))?
        .clone();
    if header.iter().ne(TABLE_COLUMNS.iter().copied()) {
        return Err(Error::Parse(format!(
            "table header {:?} does not match {:?}",
            header.iter().collect::<Vec<_>>(),
            TABLE_COLUMNS
        )));
    }
    let mut rows = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        if rec.len() != TABLE_COLUMNS.len() {
            return Err(Error::Parse(format!(
                "line {line}: expected {} fields, got {}",
                TABLE_COLUMNS.len(),
                rec.len()
            )));
        }
        let c = |i: usize| &rec[i];
        rows.push(TableRow {
            n: count(c(0), TABLE_COLUMNS[0], line)?,
            distance: float(c(1), TABLE_COLUMNS[1], line)?,
            value_limit: float(c(2), TABLE_COLUMNS[2], line)?,
            value_gap: float(c(3), TABLE_COLUMNS[3], line)?,
            grad_norm_limit: float(c(4), TABLE_COLUMNS[4], line)?,
            grad_norm_own: float(c(5), TABLE_COLUMNS[5], line)?,
            iterations: count(c(6), TABLE_COLUMNS[6], line)?,
            status: c(7).to_string(),
            sup_value_diff: float(c(8), TABLE_COLUMNS[8], line)?,
            sup_dual_diff: float(c(9), TABLE_COLUMNS[9], line)?,
            secondary_distance: opt_float(c(10), TABLE_COLUMNS[10], line)?,
            secondary_value_gap: opt_float(c(11), TABLE_COLUMNS[11], line)?,
            error: Some(c(12).to_string()).filter(|s| !s.is_empty()),
        });
    }
    Ok(rows)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Numerical(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// Run directories below `dir` (and `dir` itself) holding a table, sorted by path.
pub fn find_tables(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let table = d.join(TABLE_FILE);
        if table.is_file() {
            out.push(table);
        }
        for entry in std::fs::read_dir(&d)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// One CSV with a leading `run` column naming the directory of each table.
pub fn collate_sweep(dir: &Path) -> Result<String> {
    let tables = find_tables(dir)?;
    if tables.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no {TABLE_FILE} found under {}",
            dir.display()
        )));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(std::iter::once("run").chain(TABLE_COLUMNS.iter().copied()))?;
    for table in tables {
        let run_dir = table.parent().expect("table has a parent");
        let run = run_dir
            .strip_prefix(dir)
            .unwrap_or(run_dir)
            .to_string_lossy();
        let run = if run.is_empty() {
            ".".to_string()
        } else {
            run.into_owned()
        };
        let text = std::fs::read_to_string(&table)?;
        parse_table_csv(&text).map_err(|e| Error::Parse(format!("{}: {e}", table.display())))?;
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        for rec in reader.records() {
            let rec = rec?;
            w.write_record(std::iter::once(run.as_str()).chain(rec.iter()))?;
        }
    }
    finish(w)
}
