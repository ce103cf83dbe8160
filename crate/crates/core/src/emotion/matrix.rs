//! Comma-separated 7x7 emotion matrices with a labeled header row and a
//! label in the first column of each data row. Labels may appear in any
//! order; values are returned in canonical [`Emotion`] order. Blank lines
//! and `#` comments are ignored.

use std::io::BufRead;
use std::path::Path;

use thiserror::Error;

use super::{Emotion, EMOTION_COUNT};

#[derive(Debug, Error)]
pub enum MatrixFileError {
    #[error("cannot read matrix file: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("expected a 7x7 matrix, found {rows} rows x {cols} columns")]
    DimensionMismatch { rows: usize, cols: usize },
    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: Emotion, col: Emotion, value: f64 },
}

/// `values[row][col]`, indexed by [`Emotion::index`].
pub type LabeledMatrix = [[f64; EMOTION_COUNT]; EMOTION_COUNT];

fn labels(cells: &[&str], line: usize) -> Result<Vec<Emotion>, MatrixFileError> {
    let mut out: Vec<Emotion> = Vec::with_capacity(cells.len());
    for c in cells {
        let e = c.parse::<Emotion>().map_err(|e| MatrixFileError::Malformed {
            line,
            message: e.to_string(),
        })?;
        if out.contains(&e) {
            return Err(MatrixFileError::Malformed {
                line,
                message: format!("duplicate label `{c}`"),
            });
        }
        out.push(e);
    }
    Ok(out)
}

pub fn read_labeled_matrix<R: BufRead>(input: R) -> Result<LabeledMatrix, MatrixFileError> {
    let mut header: Option<Vec<Emotion>> = None;
    let mut rows: Vec<(Emotion, Vec<f64>, usize)> = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        match &header {
            None => header = Some(labels(&cells[1..], line_no)?),
            Some(_) => {
                let row = labels(&cells[..1], line_no)?[0];
                if rows.iter().any(|(r, _, _)| *r == row) {
                    return Err(MatrixFileError::Malformed {
                        line: line_no,
                        message: format!("duplicate row `{row}`"),
                    });
                }
                let values = cells[1..]
                    .iter()
                    .map(|c| {
                        c.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| MatrixFileError::Malformed {
                                line: line_no,
                                message: format!("bad number `{c}`"),
                            })
                    })
                    .collect::<Result<Vec<f64>, _>>()?;
                rows.push((row, values, line_no));
            }
        }
    }
    let header = header.ok_or(MatrixFileError::DimensionMismatch { rows: 0, cols: 0 })?;
    if header.len() != EMOTION_COUNT || rows.len() != EMOTION_COUNT {
        return Err(MatrixFileError::DimensionMismatch {
            rows: rows.len(),
            cols: header.len(),
        });
    }
    let mut m = [[0.0; EMOTION_COUNT]; EMOTION_COUNT];
    for (row, values, _) in &rows {
        if values.len() != EMOTION_COUNT {
            return Err(MatrixFileError::DimensionMismatch {
                rows: rows.len(),
                cols: values.len(),
            });
        }
        for (col, v) in header.iter().zip(values) {
            if *v < 0.0 {
                return Err(MatrixFileError::NegativeEntry {
                    row: *row,
                    col: *col,
                    value: *v,
                });
            }
            m[row.index()][col.index()] = *v;
        }
    }
    Ok(m)
}

pub(crate) fn read_labeled_matrix_file(path: &Path) -> Result<LabeledMatrix, MatrixFileError> {
    let file = std::fs::File::open(path)?;
    read_labeled_matrix(std::io::BufReader::new(file))
}

/// Writes a matrix in canonical label order.
pub fn format_labeled_matrix(corner: &str, m: &LabeledMatrix) -> String {
    let mut out = String::from(corner);
    for e in Emotion::ALL {
        out.push(',');
        out.push_str(e.label());
    }
    out.push('\n');
    for r in Emotion::ALL {
        out.push_str(r.label());
        for c in Emotion::ALL {
            out.push(',');
            out.push_str(&m[r.index()][c.index()].to_string());
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reorders_labels_to_canonical() {
        let text = include_str!("../../data/recognition_confusion.csv");
        let m = read_labeled_matrix(text.as_bytes()).unwrap();
        // Row = predicted, column = true.
        assert_eq!(m[Emotion::Happy.index()][Emotion::Happy.index()], 0.83);
        assert_eq!(m[Emotion::Fear.index()][Emotion::Fear.index()], 0.42);
        assert_eq!(m[Emotion::Anger.index()][Emotion::Disgust.index()], 0.21);
        let again = read_labeled_matrix(format_labeled_matrix("x", &m).as_bytes()).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn six_rows_is_a_dimension_error() {
        let text = include_str!("../../data/transition_stats.csv");
        let short: String = text
            .lines()
            .filter(|l| !l.starts_with("neutral"))
            .map(|l| format!("{l}\n"))
            .collect();
        assert!(matches!(
            read_labeled_matrix(short.as_bytes()),
            Err(MatrixFileError::DimensionMismatch { rows: 6, cols: 7 })
        ));
    }

    #[test]
    fn negative_entry_rejected() {
        let text = include_str!("../../data/transition_stats.csv").replace("anger,0.34", "anger,-1");
        assert!(matches!(
            read_labeled_matrix(text.as_bytes()),
            Err(MatrixFileError::NegativeEntry { value, .. }) if value == -1.0
        ));
    }

    #[test]
    fn garbage_reports_line() {
        let text = "x,anger,disgust,fear,happy,sad,surprise,neutral\nanger,1,2,three,4,5,6,7\n";
        let err = read_labeled_matrix(text.as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "line 2: bad number `three`");
    }
}
