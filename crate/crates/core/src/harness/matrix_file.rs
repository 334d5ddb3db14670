//! Plain-text matrix sequences for the `discrepancy` subcommand.
//!
//! Header line `n T`, then `T` blocks of `n` rows with `n` whitespace-separated
//! decimals each. Blank lines and `#` comments are ignored.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::symlin::SymMatrix;

pub fn parse_matrix_sequence(text: &str) -> Result<Vec<SymMatrix>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let parse_err = |line: usize, msg: String| Error::Parse { line, msg };

    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::EmptyData("matrix file has no header".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|tok| tok.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(hline, format!("bad header: {e}")))?;
    let [n, t] = dims[..] else {
        return Err(parse_err(hline, "header must be `n T`".into()));
    };
    if n == 0 {
        return Err(parse_err(hline, "n must be positive".into()));
    }

    let mut mats = Vec::with_capacity(t);
    for _ in 0..t {
        let mut rows = Vec::with_capacity(n);
        let mut first_line = 0;
        for _ in 0..n {
            let (lno, line) = lines
                .next()
                .ok_or_else(|| Error::InvalidInput(format!("expected {t} blocks of {n} rows")))?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|tok| tok.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| parse_err(lno, e.to_string()))?;
            if row.len() != n {
                return Err(parse_err(
                    lno,
                    format!("expected {n} entries, found {}", row.len()),
                ));
            }
            if rows.is_empty() {
                first_line = lno;
            }
            rows.push(row);
        }
        let asymmetric = (0..n).any(|i| {
            (0..i).any(|j| (rows[i][j] - rows[j][i]).abs() > 1e-12 * rows[i][j].abs().max(1.0))
        });
        if asymmetric {
            return Err(parse_err(first_line, "block is not symmetric".into()));
        }
        mats.push(SymMatrix::from_rows(&rows)?);
    }
    if let Some((lno, _)) = lines.next() {
        return Err(parse_err(lno, "trailing data after last block".into()));
    }
    Ok(mats)
}

pub fn load_matrix_sequence(path: &Path) -> Result<Vec<SymMatrix>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_sequence(&text)
}
