//! Flat-file formats: edge-list graphs (`n <count>` header, one "u v" pair per
//! line), whitespace-separated assignments, and CSV matrices. Vertices and
//! colors are 1-based on disk, 0-based in memory.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{PottsError, Result};
use crate::matrix::StochasticMatrix;
use crate::model::{ColorAssignment, SimpleGraph};

pub fn graph_to_string(g: &SimpleGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "n {}", g.n());
    for &(u, v) in g.edges() {
        let _ = writeln!(out, "{} {}", u + 1, v + 1);
    }
    out
}

pub fn graph_from_string(text: &str) -> Result<SimpleGraph> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| PottsError::Parse("empty graph file".into()))?;
    let mut tokens = header.split_whitespace();
    match (tokens.next(), tokens.next()) {
        (Some("n"), Some(count)) => {
            let n: usize = count
                .parse()
                .map_err(|_| PottsError::Parse(format!("bad vertex count {count:?}")))?;
            let mut edges = Vec::new();
            for line in lines {
                let mut parts = line.split_whitespace();
                let u: u32 = parse_vertex(parts.next(), line)?;
                let v: u32 = parse_vertex(parts.next(), line)?;
                if u == 0 || v == 0 {
                    return Err(PottsError::Parse(format!("vertices are 1-based: {line:?}")));
                }
                edges.push((u - 1, v - 1));
            }
            SimpleGraph::new(n, edges)
        }
        _ => Err(PottsError::Parse(format!(
            "bad header {header:?}, expected \"n <count>\""
        ))),
    }
}

fn parse_vertex(tok: Option<&str>, line: &str) -> Result<u32> {
    tok.ok_or_else(|| PottsError::Parse(format!("short edge line {line:?}")))?
        .parse()
        .map_err(|_| PottsError::Parse(format!("bad edge line {line:?}")))
}

pub fn write_graph(path: &Path, g: &SimpleGraph) -> Result<()> {
    std::fs::write(path, graph_to_string(g))?;
    Ok(())
}

pub fn read_graph(path: &Path) -> Result<SimpleGraph> {
    graph_from_string(&std::fs::read_to_string(path)?)
}

pub fn assignment_to_string(sigma: &ColorAssignment) -> String {
    let parts: Vec<String> = sigma
        .colors()
        .iter()
        .map(|&c| (c as usize + 1).to_string())
        .collect();
    parts.join(" ") + "\n"
}

pub fn assignment_from_string(text: &str, k: usize) -> Result<ColorAssignment> {
    let mut colors = Vec::new();
    for tok in text.split_whitespace() {
        let c: usize = tok
            .parse()
            .map_err(|_| PottsError::Parse(format!("bad color {tok:?}")))?;
        if c == 0 || c > k {
            return Err(PottsError::Parse(format!("color {c} outside 1..={k}")));
        }
        colors.push((c - 1) as u8);
    }
    ColorAssignment::new(colors, k)
}

pub fn write_assignment(path: &Path, sigma: &ColorAssignment) -> Result<()> {
    std::fs::write(path, assignment_to_string(sigma))?;
    Ok(())
}

pub fn read_assignment(path: &Path, k: usize) -> Result<ColorAssignment> {
    assignment_from_string(&std::fs::read_to_string(path)?, k)
}

/// CSV with k rows; floats carry 17 significant digits so they round-trip.
pub fn matrix_to_csv(m: &StochasticMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.k() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Parses a k x k CSV matrix back into raw entries; the caller decides which
/// stochasticity kind to validate against.
pub fn matrix_from_csv(text: &str) -> Result<(usize, Vec<f64>)> {
    let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let k = rows.len();
    if k == 0 {
        return Err(PottsError::Parse("empty matrix".into()));
    }
    let mut entries = Vec::with_capacity(k * k);
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        if cells.len() != k {
            return Err(PottsError::Parse(format!(
                "row with {} cells in a {k}-row matrix",
                cells.len()
            )));
        }
        for cell in cells {
            entries.push(
                cell.trim()
                    .parse()
                    .map_err(|_| PottsError::Parse(format!("bad cell {cell:?}")))?,
            );
        }
    }
    Ok((k, entries))
}
