//! CSV reading and writing for labeled tables.
//!
//! Table format: two header rows give the group (race) and level
//! (education) labels of the columns; the first two columns give them for
//! the rows; the remaining cells are numeric. Plain single-trait tables
//! leave the group labels empty.
//!
//! ```text
//! ,,B,B,B,W,W,W
//! ,,L,M,H,L,M,H
//! B,L,120,35,5,2,1,0
//! ...
//! ```

use crate::tables::{AxisLabel, ContingencyTable, TableError};
use std::io::{Read, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Table(#[from] TableError),
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> IoError {
    IoError::Parse { line, column, message: message.into() }
}

/// Reads a labeled table from the two-header-row CSV format.
pub fn read_table_csv(reader: impl Read) -> Result<ContingencyTable, IoError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        rows.push(record.iter().map(str::to_owned).collect());
        if rows.last().map_or(0, Vec::len) < 3 {
            return Err(parse_err(i + 1, 1, "expected at least two label columns and one data column"));
        }
    }
    if rows.len() < 3 {
        return Err(parse_err(
            rows.len(),
            1,
            "expected two header rows and at least one data row",
        ));
    }
    let width = rows[0].len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(parse_err(
                i + 1,
                row.len(),
                format!("row has {} fields, expected {width}", row.len()),
            ));
        }
    }
    for (i, row) in rows.iter().take(2).enumerate() {
        for (j, cell) in row.iter().take(2).enumerate() {
            if !cell.is_empty() {
                return Err(parse_err(i + 1, j + 1, "header corner cells must be empty"));
            }
        }
    }
    let n_cols = width - 2;
    let col_labels: Vec<AxisLabel> = (0..n_cols)
        .map(|j| AxisLabel::new(rows[0][j + 2].clone(), rows[1][j + 2].clone()))
        .collect();
    let mut row_labels = Vec::with_capacity(rows.len() - 2);
    let mut counts = Vec::with_capacity((rows.len() - 2) * n_cols);
    for (i, row) in rows.iter().enumerate().skip(2) {
        row_labels.push(AxisLabel::new(row[0].clone(), row[1].clone()));
        for (j, cell) in row.iter().enumerate().skip(2) {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(i + 1, j + 1, format!("not a number: `{cell}`")))?;
            counts.push(v);
        }
    }
    Ok(ContingencyTable::new(counts, row_labels, col_labels)?)
}

/// Fixed cell formatting: whole numbers bare, everything else with nine
/// decimal places.
pub fn format_cell(v: f64) -> String {
    if v.abs() < 9.0e15 && (v - v.round()).abs() <= 1e-9 && v.round() == v {
        format!("{}", v as i64)
    } else {
        format!("{v:.9}")
    }
}

/// Writes a table in the two-header-row CSV format.
pub fn write_table_csv(t: &ContingencyTable, writer: impl Write) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut groups = vec![String::new(), String::new()];
    let mut levels = vec![String::new(), String::new()];
    for label in t.col_labels() {
        groups.push(label.group.clone());
        levels.push(label.level.clone());
    }
    w.write_record(&groups)?;
    w.write_record(&levels)?;
    for r in 0..t.n_rows() {
        let mut row = vec![t.row_labels()[r].group.clone(), t.row_labels()[r].level.clone()];
        for c in 0..t.n_cols() {
            row.push(format_cell(t.get(r, c)));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_race_edu_table() {
        let csv = "\
,,B,B,W,W
,,L,H,L,H
B,L,10,2,1,0
B,H,3,20,0,1
W,L,1,0,30,4
W,H,0,2,5,40
";
        let t = read_table_csv(csv.as_bytes()).unwrap();
        assert_eq!(t.n_rows(), 4);
        assert_eq!(t.get(1, 1), 20.0);
        assert_eq!(t.row_labels()[2], AxisLabel::new("W", "L"));
        let mut out = Vec::new();
        write_table_csv(&t, &mut out).unwrap();
        let again = read_table_csv(out.as_slice()).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn plain_table_with_empty_groups() {
        let csv = "\
,,1,2
,,L,H
,L,30,10
,H,10,50
";
        let t = read_table_csv(csv.as_bytes()).unwrap();
        assert_eq!(t.col_labels()[0], AxisLabel::new("1", "L"));
        assert_eq!(t.get(1, 1), 50.0);
    }

    #[test]
    fn reports_position_of_bad_number() {
        let csv = "\
,,A,B
,,L,H
,L,30,x
,H,10,50
";
        let err = read_table_csv(csv.as_bytes()).unwrap_err();
        match err {
            IoError::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, 4);
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn fractional_cells_round_trip() {
        let t = ContingencyTable::from_rows(vec![vec![1.5, 2.0], vec![0.123456789, 4.0]]).unwrap();
        let mut out = Vec::new();
        write_table_csv(&t, &mut out).unwrap();
        let again = read_table_csv(out.as_slice()).unwrap();
        assert!(t.max_abs_diff(&again) < 1e-9);
    }
}
