//! Plain-text formats for tomography records and complex matrices.
//!
//! Floats are written as `{:.16e}`, which round-trips every `f64` exactly.
//! Lines starting with `#` and blank lines are ignored by the parsers.
//!
//! Record line: `l0 l1 p_joint re00 im00 re01 im01 re10 im10 re11 im11`,
//! with `l0`, `l1` basis labels such as `x+` or `yz+`.
//!
//! Matrix file: a `rows cols` line, then one line per row holding
//! `re im` pairs.

use crate::error::{Error, Result};
use crate::qlinalg::{c, CMatrix};
use crate::quantum::{DensityMatrix, BASIS_LABELS};
use crate::tomography::TomoRecord;
use std::fmt::Write;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

/// Non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|e| parse_err(line, format!("{tok:?}: {e}")))
}

pub fn format_record(rec: &TomoRecord) -> String {
    let mut s = format!("{} {} {:.16e}", BASIS_LABELS[rec.l0], BASIS_LABELS[rec.l1], rec.p_joint);
    for z in rec.rho_measured.mat().as_slice() {
        write!(s, " {:.16e} {:.16e}", z.re, z.im).expect("writing to a String");
    }
    s
}

pub fn format_records(records: &[TomoRecord]) -> String {
    let mut s = String::new();
    for rec in records {
        s.push_str(&format_record(rec));
        s.push('\n');
    }
    s
}

fn label_index(tok: &str, line: usize) -> Result<usize> {
    BASIS_LABELS.iter().position(|l| *l == tok).ok_or_else(|| parse_err(line, format!("unknown basis label {tok:?}")))
}

pub fn parse_records(text: &str) -> Result<Vec<TomoRecord>> {
    content_lines(text)
        .map(|(n, line)| {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 11 {
                return Err(parse_err(n, format!("expected 11 fields, found {}", toks.len())));
            }
            let l0 = label_index(toks[0], n)?;
            let l1 = label_index(toks[1], n)?;
            let p = parse_f64(toks[2], n)?;
            let vals = toks[3..].iter().map(|t| parse_f64(t, n)).collect::<Result<Vec<_>>>()?;
            let data = vals.chunks(2).map(|p| c(p[0], p[1])).collect();
            let rho = CMatrix::new(2, 2, data).and_then(DensityMatrix::new);
            let rho = rho.map_err(|e| parse_err(n, e.to_string()))?;
            TomoRecord::new(l0, l1, rho, p).map_err(|e| parse_err(n, e.to_string()))
        })
        .collect()
}

pub fn format_matrix(m: &CMatrix) -> String {
    let mut s = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|j| format!("{:.16e} {:.16e}", m[(i, j)].re, m[(i, j)].im)).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn parse_matrix(text: &str) -> Result<CMatrix> {
    let mut lines = content_lines(text);
    let (n0, dims) = lines.next().ok_or_else(|| parse_err(0, "empty matrix file"))?;
    let dims: Vec<usize> = dims
        .split_whitespace()
        .map(|t| t.parse().map_err(|e| parse_err(n0, format!("{t:?}: {e}"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(parse_err(n0, "expected `rows cols`"));
    };
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (n, line) in lines {
        if seen == rows {
            return Err(parse_err(n, "more rows than declared"));
        }
        let vals = line.split_whitespace().map(|t| parse_f64(t, n)).collect::<Result<Vec<_>>>()?;
        if vals.len() != 2 * cols {
            return Err(parse_err(n, format!("expected {} numbers, found {}", 2 * cols, vals.len())));
        }
        data.extend(vals.chunks(2).map(|p| c(p[0], p[1])));
        seen += 1;
    }
    if seen != rows {
        return Err(parse_err(0, format!("declared {rows} rows, found {seen}")));
    }
    CMatrix::new(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::ProcessSpec;
    use crate::tomography::generate_records;
    use proptest::prelude::*;

    #[test]
    fn records_round_trip_exactly() {
        let recs = generate_records(&ProcessSpec::cnot_cz(), None).unwrap();
        let text = format!("# config_hash=abc\n{}", format_records(&recs));
        let back = parse_records(&text).unwrap();
        assert_eq!(back, recs);
        assert_eq!(format_records(&back), format_records(&recs));
    }

    #[test]
    fn record_line_layout() {
        let recs = generate_records(&ProcessSpec::cnot_cz(), None).unwrap();
        let line = format_record(&recs[0]);
        assert!(line.starts_with("x+ x+ "));
        assert_eq!(line.split_whitespace().count(), 11);
    }

    #[test]
    fn malformed_input_is_reported_with_line() {
        let err = parse_records("# header\nx+ q+ 1 0 0 0 0 0 0 0 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(matches!(parse_records("x+ x+ 1 0\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_matrix("2 2\n1 0 0 0\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_matrix("2 2\n1 0 0\n0 0 1 0\n"), Err(Error::Parse { line: 2, .. })));
        // an unphysical state is refused
        assert!(matches!(parse_records("x+ x+ 1 2 0 0 0 0 0 0 0\n"), Err(Error::Parse { .. })));
    }

    proptest! {
        #[test]
        fn matrices_round_trip_exactly(
            rows in 1usize..5,
            cols in 1usize..5,
            vals in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::ZERO, 32),
        ) {
            let data = (0..rows * cols).map(|k| c(vals[2 * k], vals[2 * k + 1])).collect();
            let m = CMatrix::new(rows, cols, data).unwrap();
            let back = parse_matrix(&format_matrix(&m)).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
