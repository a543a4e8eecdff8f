//! Triplet text format for observed matrices.
//!
//! Line 1 holds `m n nnz`; each following data line holds `i j value` with
//! 1-based indices. Lines starting with '%' are comments.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::ObservedMatrix;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Reads an observed matrix from the triplet text format.
pub fn read_triplets(path: impl AsRef<Path>) -> Result<ObservedMatrix> {
    let reader = BufReader::new(File::open(path)?);
    let mut header: Option<(usize, usize, usize)> = None;
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut entry_lines: Vec<usize> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        match header {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "expected header 'm n nnz'"));
                }
                let m = fields[0]
                    .parse::<usize>()
                    .map_err(|_| parse_err(lineno, format!("bad row count '{}'", fields[0])))?;
                let n = fields[1]
                    .parse::<usize>()
                    .map_err(|_| parse_err(lineno, format!("bad column count '{}'", fields[1])))?;
                let nnz = fields[2]
                    .parse::<usize>()
                    .map_err(|_| parse_err(lineno, format!("bad entry count '{}'", fields[2])))?;
                if m == 0 || n == 0 {
                    return Err(parse_err(lineno, "matrix dimensions must be positive"));
                }
                header = Some((m, n, nnz));
            }
            Some((m, n, _)) => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "expected 'i j value'"));
                }
                let i = fields[0]
                    .parse::<usize>()
                    .map_err(|_| parse_err(lineno, format!("bad row index '{}'", fields[0])))?;
                let j = fields[1]
                    .parse::<usize>()
                    .map_err(|_| parse_err(lineno, format!("bad column index '{}'", fields[1])))?;
                let x = fields[2]
                    .parse::<f64>()
                    .map_err(|_| parse_err(lineno, format!("bad value '{}'", fields[2])))?;
                if i == 0 || i > m || j == 0 || j > n {
                    return Err(parse_err(
                        lineno,
                        format!("entry ({i}, {j}) out of range for a {m}x{n} matrix"),
                    ));
                }
                entries.push((i - 1, j - 1, x));
                entry_lines.push(lineno);
            }
        }
    }

    let (m, n, nnz) = header.ok_or_else(|| parse_err(0, "missing header line"))?;
    if entries.len() != nnz {
        return Err(parse_err(
            0,
            format!("header declares {nnz} entries, file holds {}", entries.len()),
        ));
    }
    // Duplicate detection reports the offending line, so run it before
    // handing the entries to the (line-agnostic) constructor.
    let mut seen = std::collections::BTreeMap::new();
    for (pos, &(i, j, _)) in entries.iter().enumerate() {
        if seen.insert((i, j), pos).is_some() {
            return Err(parse_err(
                entry_lines[pos],
                format!("duplicate entry ({}, {})", i + 1, j + 1),
            ));
        }
    }
    ObservedMatrix::new(m, n, entries)
}

/// Writes an observed matrix in the triplet text format.
pub fn write_triplets(obs: &ObservedMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{} {} {}", obs.nrows(), obs.ncols(), obs.nnz())?;
    for &(i, j, x) in obs.entries() {
        // f64 Display is the shortest round-trip representation.
        writeln!(w, "{} {} {}", i + 1, j + 1, x)?;
    }
    w.flush()?;
    Ok(())
}
