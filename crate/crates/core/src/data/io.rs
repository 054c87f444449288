//! Dense CSV and Matrix Market input, dense CSV output.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    /// Comma-separated, row-major, optional header line.
    Csv,
    /// Matrix Market coordinate format (general or symmetric).
    MatrixMarket,
}

impl MatrixFormat {
    /// `.mtx` means Matrix Market, anything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("mtx") => MatrixFormat::MatrixMarket,
            _ => MatrixFormat::Csv,
        }
    }
}

pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<Mat> {
    match format {
        MatrixFormat::Csv => load_csv(path),
        MatrixFormat::MatrixMarket => load_matrix_market(path),
    }
}

fn parse_number(field: &str, line: usize, column: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|e| Error::Parse {
        line,
        column,
        message: format!("cannot parse {field:?} as a number: {e}"),
    })
}

/// Dense CSV. The first record is treated as a header when none of its fields
/// parse as numbers.
pub fn load_csv(path: &Path) -> Result<Mat> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map_or(idx + 1, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if idx == 0 && rec.iter().all(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, f)| parse_number(f, line, c + 1))
            .collect::<Result<Vec<f64>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse {
                    line,
                    column: row.len().min(w) + 1,
                    message: format!("row {} has {} fields, expected {w}", rows.len() + 1, row.len()),
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    let ncols = width.unwrap_or(0);
    Ok(Mat::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Writes `m` row-major with 17 significant digits, so that loading it back
/// reproduces every value bit for bit.
pub fn save_csv(path: &Path, m: &Mat) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    for i in 0..m.nrows() {
        let line: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Matrix Market `coordinate` files with `real`, `integer` or `pattern`
/// fields and `general` or `symmetric` symmetry, expanded to a dense matrix.
pub fn load_matrix_market(path: &Path) -> Result<Mat> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines().enumerate();
    let (_, banner) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        column: 1,
        message: "empty file".into(),
    })?;
    let banner = banner?.to_ascii_lowercase();
    let tokens: Vec<&str> = banner.split_whitespace().collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "missing %%MatrixMarket matrix banner".into(),
        });
    }
    if tokens[2] != "coordinate" {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: format!("unsupported layout {:?}", tokens[2]),
        });
    }
    let pattern = match tokens[3] {
        "real" | "integer" | "double" => false,
        "pattern" => true,
        other => {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("unsupported field type {other:?}"),
            })
        }
    };
    let symmetric = match tokens[4] {
        "general" => false,
        "symmetric" => true,
        other => {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("unsupported symmetry {other:?}"),
            })
        }
    };

    let mut m: Option<Mat> = None;
    let mut expected = 0usize;
    let mut seen = 0usize;
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        match &mut m {
            None => {
                if fields.len() != 3 {
                    return Err(Error::Parse {
                        line: lineno,
                        column: 1,
                        message: "size line must be `rows cols nnz`".into(),
                    });
                }
                let dims = fields
                    .iter()
                    .enumerate()
                    .map(|(c, f)| {
                        f.parse::<usize>().map_err(|e| Error::Parse {
                            line: lineno,
                            column: c + 1,
                            message: e.to_string(),
                        })
                    })
                    .collect::<Result<Vec<usize>>>()?;
                m = Some(Mat::zeros(dims[0], dims[1]));
                expected = dims[2];
            }
            Some(mat) => {
                let want = if pattern { 2 } else { 3 };
                if fields.len() < want {
                    return Err(Error::Parse {
                        line: lineno,
                        column: fields.len() + 1,
                        message: format!("entry needs {want} fields"),
                    });
                }
                let index = |c: usize, bound: usize| -> Result<usize> {
                    let v = fields[c].parse::<usize>().map_err(|e| Error::Parse {
                        line: lineno,
                        column: c + 1,
                        message: e.to_string(),
                    })?;
                    if v == 0 || v > bound {
                        return Err(Error::Parse {
                            line: lineno,
                            column: c + 1,
                            message: format!("index {v} outside 1..={bound}"),
                        });
                    }
                    Ok(v - 1)
                };
                let i = index(0, mat.nrows())?;
                let j = index(1, mat.ncols())?;
                let v = if pattern { 1.0 } else { parse_number(fields[2], lineno, 3)? };
                mat[(i, j)] = v;
                if symmetric {
                    mat[(j, i)] = v;
                }
                seen += 1;
            }
        }
    }
    let m = m.ok_or_else(|| Error::Parse {
        line: 1,
        column: 1,
        message: "missing size line".into(),
    })?;
    if seen != expected {
        return Err(Error::Parse {
            line: 0,
            column: 0,
            message: format!("expected {expected} entries, found {seen}"),
        });
    }
    Ok(m)
}
