//! Plain-text sparse matrix exchange in Matrix Market coordinate format.

use std::io::{BufRead, Write};

use super::SparseMatrix;
use crate::error::{Error, Result};

const HEADER: &str = "%%MatrixMarket matrix coordinate real general";

/// Writes `a` as 1-based `row col value` triplets. Values round-trip exactly.
pub fn write_matrix_market<W: Write>(a: &SparseMatrix, mut out: W) -> Result<()> {
    writeln!(out, "{HEADER}")?;
    writeln!(out, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (i, j, v) in a.triplets() {
        writeln!(out, "{} {} {}", i + 1, j + 1, v)?;
    }
    Ok(())
}

pub fn read_matrix_market<R: BufRead>(input: R) -> Result<SparseMatrix> {
    let mut size: Option<(usize, usize, usize)> = None;
    let mut trip = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = k + 1;
        let text = line.trim();
        if k == 0 {
            if !text.starts_with("%%MatrixMarket") {
                return Err(parse_err(lineno, "missing %%MatrixMarket header"));
            }
            let lower = text.to_ascii_lowercase();
            if !lower.contains("coordinate") || !lower.contains("real") {
                return Err(parse_err(lineno, "only coordinate real matrices are supported"));
            }
            continue;
        }
        if text.is_empty() || text.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(lineno, "expected three fields"));
        }
        match size {
            None => {
                let r = parse_usize(fields[0], lineno)?;
                let c = parse_usize(fields[1], lineno)?;
                let nnz = parse_usize(fields[2], lineno)?;
                trip.reserve(nnz);
                size = Some((r, c, nnz));
            }
            Some((r, c, _)) => {
                let i = parse_usize(fields[0], lineno)?;
                let j = parse_usize(fields[1], lineno)?;
                if i == 0 || j == 0 || i > r || j > c {
                    return Err(parse_err(
                        lineno,
                        &format!("entry ({i}, {j}) outside {r}x{c} matrix"),
                    ));
                }
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|_| parse_err(lineno, &format!("bad value '{}'", fields[2])))?;
                trip.push((i - 1, j - 1, v));
            }
        }
    }
    let (r, c, nnz) = size.ok_or_else(|| parse_err(0, "missing size line"))?;
    if trip.len() != nnz {
        return Err(parse_err(
            0,
            &format!("size line announces {nnz} entries, found {}", trip.len()),
        ));
    }
    SparseMatrix::from_triplets(r, c, &trip)
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.parse()
        .map_err(|_| parse_err(line, &format!("bad integer '{s}'")))
}

fn parse_err(line: usize, message: &str) -> Error {
    Error::Parse {
        line,
        message: message.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let a = SparseMatrix::from_triplets(
            3,
            4,
            &[(0, 0, 0.1), (2, 3, -1.0 / 3.0), (1, 2, 1e-300), (2, 0, 7.0)],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&a, &mut buf).unwrap();
        let b = read_matrix_market(buf.as_slice()).unwrap();
        assert_eq!(a.shape(), b.shape());
        assert_eq!(a.triplets().collect::<Vec<_>>(), b.triplets().collect::<Vec<_>>());
    }

    #[test]
    fn comments_are_skipped() {
        let text = "%%MatrixMarket matrix coordinate real general\n% note\n2 2 1\n2 1 5\n";
        let a = read_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(a.get(1, 0), 5.0);
    }

    #[test]
    fn bad_entry_names_line() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 5\n";
        match read_matrix_market(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
