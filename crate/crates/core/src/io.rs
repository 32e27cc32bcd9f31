//! Headerless CSV for matrices (`rows × cols` decimal entries) and vectors
//! (single column).

use std::fs;
use std::path::Path;

use faer::{Col, ColRef, Mat, MatRef};

use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;

pub fn parse_matrix_csv(text: &str) -> Result<Mat<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { .. } => {
                Error::invalid(format!("ragged row in matrix CSV: {e}"))
            }
            _ => Error::invalid(format!("malformed CSV: {e}")),
        })?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| {
                    Error::invalid(format!("row {}: cannot parse {field:?} as a number", line + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::invalid("empty matrix CSV"));
    }
    let cols = rows[0].len();
    Ok(Mat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn parse_vector_csv(text: &str) -> Result<Col<f64>> {
    let m = parse_matrix_csv(text)?;
    if m.ncols() != 1 {
        return Err(Error::invalid(format!(
            "vector CSV must have exactly one column, found {}",
            m.ncols()
        )));
    }
    Ok(Col::from_fn(m.nrows(), |i| m[(i, 0)]))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Mat<f64>> {
    parse_matrix_csv(&read_text(path.as_ref())?)
}

pub fn read_symmetric_csv(path: impl AsRef<Path>) -> Result<SymmetricMatrix> {
    SymmetricMatrix::new(read_matrix_csv(path)?)
}

pub fn read_vector_csv(path: impl AsRef<Path>) -> Result<Col<f64>> {
    parse_vector_csv(&read_text(path.as_ref())?)
}

pub fn format_matrix_csv(m: MatRef<'_, f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&m[(i, j)].to_string());
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(path: impl AsRef<Path>, m: MatRef<'_, f64>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_matrix_csv(m)).map_err(|e| Error::io(path, e))
}

pub fn write_vector_csv(path: impl AsRef<Path>, v: ColRef<'_, f64>) -> Result<()> {
    write_matrix_csv(path, v.as_mat())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_matrix_and_vector() {
        let m = parse_matrix_csv("1, 2\n3,4.5\n").unwrap();
        assert_eq!((m.nrows(), m.ncols()), (2, 2));
        assert_eq!(m[(1, 1)], 4.5);
        let v = parse_vector_csv("1\n-2e-3\n").unwrap();
        assert_eq!(v.nrows(), 2);
        assert_eq!(v[1], -2e-3);
    }

    #[test]
    fn rejects_ragged_and_garbage() {
        assert!(matches!(parse_matrix_csv("1,2\n3\n"), Err(Error::InvalidInput(_))));
        assert!(matches!(parse_matrix_csv("1,x\n"), Err(Error::InvalidInput(_))));
        assert!(matches!(parse_matrix_csv(""), Err(Error::InvalidInput(_))));
        assert!(matches!(parse_vector_csv("1,2\n"), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn file_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let m = Mat::from_fn(3, 2, |i, j| (i as f64 + 0.1) / (j as f64 + 3.0));
        write_matrix_csv(&path, m.as_ref()).unwrap();
        assert_eq!(read_matrix_csv(&path).unwrap(), m);
        let missing = dir.path().join("nope.csv");
        assert!(matches!(read_matrix_csv(&missing), Err(Error::Io { .. })));
    }
}
