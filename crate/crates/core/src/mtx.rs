//! Matrix Market reader/writer, restricted to the real symmetric coordinate
//! format (1-based indices, `%` comment lines).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<DMatrix<f64>> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (lineno, header) = match lines.next() {
        Some((n, l)) => (n, l?),
        None => return Err(parse_err(1, "empty file")),
    };
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(lineno, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    if tokens[2] != "coordinate" {
        return Err(parse_err(
            lineno,
            format!("unsupported format '{}': only 'coordinate' is accepted", tokens[2]),
        ));
    }
    if tokens[3] != "real" {
        return Err(parse_err(
            lineno,
            format!("unsupported field '{}': only 'real' is accepted", tokens[3]),
        ));
    }
    if tokens[4] != "symmetric" {
        return Err(Error::Validation(format!(
            "matrix declared '{}' but a symmetric matrix is required",
            tokens[4]
        )));
    }

    let mut size: Option<(usize, usize, usize)> = None;
    let mut entries: Vec<(usize, usize, f64, usize)> = Vec::new();
    for (lineno, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "size line needs 'rows cols nnz'"));
                }
                let parse = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| parse_err(lineno, format!("invalid integer '{s}'")))
                };
                let (m, n, nnz) = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
                if m != n {
                    return Err(Error::Validation(format!(
                        "symmetric matrix must be square, got {m}x{n}"
                    )));
                }
                if m == 0 {
                    return Err(parse_err(lineno, "matrix dimension must be positive"));
                }
                size = Some((m, n, nnz));
            }
            Some((m, _, nnz)) => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "entry line needs 'row col value'"));
                }
                let i: usize = fields[0]
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("invalid row index '{}'", fields[0])))?;
                let j: usize = fields[1]
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("invalid column index '{}'", fields[1])))?;
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("invalid value '{}'", fields[2])))?;
                if i == 0 || j == 0 || i > m || j > m {
                    return Err(parse_err(
                        lineno,
                        format!("index ({i}, {j}) outside 1..={m}"),
                    ));
                }
                if !v.is_finite() {
                    return Err(parse_err(lineno, "non-finite value"));
                }
                if entries.len() == nnz {
                    return Err(parse_err(lineno, format!("more than the declared {nnz} entries")));
                }
                entries.push((i - 1, j - 1, v, lineno));
            }
        }
    }

    let (m, _, nnz) = size.ok_or_else(|| parse_err(lineno + 1, "missing size line"))?;
    if entries.len() != nnz {
        return Err(parse_err(
            entries.last().map_or(lineno, |e| e.3),
            format!("declared {nnz} entries, found {}", entries.len()),
        ));
    }
    let mut mat = DMatrix::<f64>::zeros(m, m);
    let mut seen = DMatrix::<bool>::from_element(m, m, false);
    for (i, j, v, lineno) in entries {
        // store lower triangle; upper-triangle entries are mirrored
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if seen[(r, c)] {
            return Err(parse_err(lineno, format!("duplicate entry ({}, {})", r + 1, c + 1)));
        }
        seen[(r, c)] = true;
        mat[(r, c)] = v;
        mat[(c, r)] = v;
    }
    Ok(mat)
}

pub fn read_matrix_market_file(path: &Path) -> Result<DMatrix<f64>> {
    let f = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_matrix_market(BufReader::new(f))
}

/// Writes the lower triangle's nonzeros. Values use the shortest
/// representation that parses back to the identical `f64`.
pub fn write_matrix_market<W: Write>(mut w: W, m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Validation("only square matrices can be written".into()));
    }
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            if m[(i, j)] != m[(j, i)] {
                return Err(Error::NotSymmetric {
                    which: "M",
                    row: i,
                    col: j,
                });
            }
        }
    }
    let mut entries = Vec::new();
    for j in 0..n {
        for i in j..n {
            if m[(i, j)] != 0.0 {
                entries.push((i + 1, j + 1, m[(i, j)]));
            }
        }
    }
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{n} {n} {}", entries.len())?;
    for (i, j, v) in entries {
        writeln!(w, "{i} {j} {v:e}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix_market_file(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_matrix_market(BufWriter::new(f), m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(s: &str) -> Result<DMatrix<f64>> {
        read_matrix_market(s.as_bytes())
    }

    #[test]
    fn reads_lower_triangle() {
        let m = read(
            "%%MatrixMarket matrix coordinate real symmetric\n% comment\n3 3 4\n1 1 2.0\n2 1 -1\n2 2 2\n3 3 5e-1\n",
        )
        .unwrap();
        assert_eq!(m[(0, 1)], -1.0);
        assert_eq!(m[(1, 0)], -1.0);
        assert_eq!(m[(2, 2)], 0.5);
        assert_eq!(m[(0, 2)], 0.0);
    }

    #[test]
    fn rejects_general_and_array() {
        assert!(matches!(
            read("%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 1\n"),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            read("%%MatrixMarket matrix array real symmetric\n1 1\n1\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn reports_line_numbers() {
        let e = read("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n2 x 3\n")
            .unwrap_err();
        assert!(matches!(e, Error::Parse { line: 4, .. }), "{e:?}");
        let e = read("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n3 1 1.0\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e:?}");
        let e = read("%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 1.0\n").unwrap_err();
        assert!(matches!(e, Error::Parse { .. }), "{e:?}");
        let e = read("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 2 1.0\n2 1 1.0\n")
            .unwrap_err();
        assert!(matches!(e, Error::Parse { line: 4, .. }), "{e:?}");
    }

    #[test]
    fn round_trip_is_exact() {
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[
                4.0, -1.0, 0.0, 0.1, -1.0, 4.0, -1.0, 0.0, 0.0, -1.0, 4.0, 1e-300, 0.1, 0.0, 1e-300,
                std::f64::consts::PI,
            ],
        );
        let mut buf = Vec::new();
        write_matrix_market(&mut buf, &m).unwrap();
        let back = read_matrix_market(buf.as_slice()).unwrap();
        assert_eq!(back, m);
    }
}
