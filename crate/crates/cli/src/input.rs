//! Point-file ingestion: headered CSV with columns `x,y,ring`, UTF-8,
//! `.` decimal separator, 1-based contiguous ring indices.

use concentric_core::{DataSet, Point};
use std::path::Path;

#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn err(msg: impl Into<String>) -> InputError {
    InputError(msg.into())
}

pub fn read_point_file(path: &Path, f0: f64) -> Result<DataSet, InputError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| err(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());

    let (_, header) = lines.next().ok_or_else(|| err("empty input file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() != 3
        || !cols[0].eq_ignore_ascii_case("x")
        || !cols[1].eq_ignore_ascii_case("y")
        || !cols[2].eq_ignore_ascii_case("ring")
    {
        return Err(err(format!("expected header `x,y,ring`, found `{header}`")));
    }

    let mut rows: Vec<(f64, f64, usize)> = Vec::new();
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(err(format!(
                "line {}: expected 3 fields, found {}",
                lineno + 1,
                fields.len()
            )));
        }
        let x: f64 = fields[0]
            .parse()
            .map_err(|_| err(format!("line {}: bad x `{}`", lineno + 1, fields[0])))?;
        let y: f64 = fields[1]
            .parse()
            .map_err(|_| err(format!("line {}: bad y `{}`", lineno + 1, fields[1])))?;
        let ring: usize = fields[2]
            .parse()
            .map_err(|_| err(format!("line {}: bad ring `{}`", lineno + 1, fields[2])))?;
        if ring == 0 {
            return Err(err(format!(
                "line {}: ring indices are 1-based",
                lineno + 1
            )));
        }
        if !(x.is_finite() && y.is_finite()) {
            return Err(err(format!("line {}: non-finite coordinate", lineno + 1)));
        }
        rows.push((x, y, ring));
    }
    if rows.is_empty() {
        return Err(err("no data rows"));
    }

    let k = rows.iter().map(|r| r.2).max().unwrap();
    let mut rings: Vec<Vec<Point>> = vec![Vec::new(); k];
    for (x, y, ring) in rows {
        rings[ring - 1].push(Point::new(x, y));
    }
    if let Some(missing) = rings.iter().position(Vec::is_empty) {
        return Err(err(format!(
            "non-contiguous ring indices: ring {} has no points (rings must cover 1..{k})",
            missing + 1
        )));
    }
    let total: usize = rings.iter().map(Vec::len).sum();
    let needed = 6 + k;
    if total < needed {
        return Err(err(format!(
            "insufficient points: need at least {needed} for {k} ring(s), got {total}"
        )));
    }
    Ok(DataSet::new(rings, f0))
}
