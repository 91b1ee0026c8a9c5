//! Small CSV helpers for per-vertex value files (`vertex,value[,...]` with a
//! header row). Extra columns are ignored on read.

use std::path::Path;

use crate::errors::{CliError, CliResult};

/// Reads a per-vertex value column into a dense vector. Every vertex in
/// `[0, n)` must appear exactly once. `-inf` parses to the flag value.
pub fn read_vertex_values(path: &Path, n: Option<usize>) -> CliResult<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut rows: Vec<(usize, f64)> = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let bad =
            |what: &str| CliError::usage(format!("{}:{}: {what}", path.display(), lineno + 1));
        let id: usize = fields
            .next()
            .ok_or_else(|| bad("missing vertex id"))?
            .trim()
            .parse()
            .map_err(|_| bad("invalid vertex id"))?;
        let value: f64 = fields
            .next()
            .ok_or_else(|| bad("missing value column"))?
            .trim()
            .parse()
            .map_err(|_| bad("invalid value"))?;
        rows.push((id, value));
    }
    if rows.is_empty() {
        return Err(CliError::usage(format!("{}: no data rows", path.display())));
    }
    let n = n.unwrap_or_else(|| rows.iter().map(|&(id, _)| id + 1).max().unwrap_or(0));
    let mut out = vec![f64::NAN; n];
    let mut seen = vec![false; n];
    for (id, value) in rows {
        if id >= n {
            return Err(CliError::usage(format!(
                "{}: vertex id {id} out of range [0, {n})",
                path.display()
            )));
        }
        if seen[id] {
            return Err(CliError::usage(format!(
                "{}: duplicate vertex {id}",
                path.display()
            )));
        }
        seen[id] = true;
        out[id] = value;
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(CliError::usage(format!(
            "{}: vertex {missing} has no row",
            path.display()
        )));
    }
    Ok(out)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::usage(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}
