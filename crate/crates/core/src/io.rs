//! Plain-text field dumps: CSV with `node_index,x...,value` rows in
//! row-major order, and 8-bit PGM images of 2D fields and masks.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::Arc;

use crate::grid::{GridDomain, NodeSet, ScalarField};

const AXES: [&str; 3] = ["x", "y", "z"];

pub fn field_to_csv(u: &ScalarField) -> String {
    let domain = u.domain();
    let mut out = String::from("node_index");
    for name in AXES.iter().take(domain.dim()) {
        out.push(',');
        out.push_str(name);
    }
    out.push_str(",value\n");
    for i in 0..domain.len() {
        let x = domain.coords(i);
        let _ = write!(out, "{i}");
        for xa in x.iter().take(domain.dim()) {
            let _ = write!(out, ",{xa}");
        }
        let _ = writeln!(out, ",{}", u.get(i));
    }
    out
}

pub fn mask_to_csv(set: &NodeSet) -> String {
    let values = set.mask().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    field_to_csv(&ScalarField::from_values(set.domain(), values).expect("mask length"))
}

pub fn write_field_csv(u: &ScalarField, path: &Path) -> io::Result<()> {
    fs::write(path, field_to_csv(u))
}

/// Reads a CSV written by [`field_to_csv`] (or any file whose first column is
/// the node index and last column the value).
pub fn read_field_csv(domain: &Arc<GridDomain>, text: &str) -> Result<ScalarField, String> {
    let mut values = vec![f64::NAN; domain.len()];
    let mut seen = vec![false; domain.len()];
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("node_index") {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() < 2 {
            return Err(format!("line {}: expected at least two columns", line_no + 1));
        }
        let i: usize = cols[0]
            .parse()
            .map_err(|e| format!("line {}: bad node index: {e}", line_no + 1))?;
        if i >= domain.len() {
            return Err(format!("line {}: node index {i} out of range", line_no + 1));
        }
        let v: f64 = parse_value(cols[cols.len() - 1]).ok_or_else(|| format!("line {}: bad value", line_no + 1))?;
        values[i] = v;
        seen[i] = true;
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(format!("node {i} has no value"));
    }
    ScalarField::from_values(domain, values).map_err(|e| e.to_string())
}

fn parse_value(s: &str) -> Option<f64> {
    match s {
        "inf" | "+inf" | "Infinity" => Some(f64::INFINITY),
        "-inf" | "-Infinity" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

/// 8-bit PGM of a 2D field; finite values are mapped linearly from
/// [min, max] to [0, 255] and the range is recorded in a header comment.
/// Non-finite values map to 0 (-inf, NaN) or 255 (+inf).
pub fn field_to_pgm(u: &ScalarField) -> Result<Vec<u8>, String> {
    let domain = u.domain();
    if domain.dim() != 2 {
        return Err(format!("PGM output needs a 2D grid, got dimension {}", domain.dim()));
    }
    let finite = u.values().iter().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
    let span = if hi > lo { hi - lo } else { 1.0 };
    let pixels = (0..domain.len())
        .map(|i| {
            let v = u.get(i);
            if v.is_nan() || v == f64::NEG_INFINITY {
                0
            } else if v == f64::INFINITY {
                255
            } else {
                (((v - lo) / span) * 255.0).round().clamp(0.0, 255.0) as u8
            }
        })
        .collect();
    Ok(pgm_bytes(domain, pixels, &format!("min={lo} max={hi}")))
}

/// Classification image: 0 outside, 128 inconclusive, 255 inside.
pub fn classes_to_pgm(inside: &NodeSet, inconclusive: Option<&NodeSet>) -> Result<Vec<u8>, String> {
    let domain = inside.domain();
    if domain.dim() != 2 {
        return Err(format!("PGM output needs a 2D grid, got dimension {}", domain.dim()));
    }
    let pixels = (0..domain.len())
        .map(|i| {
            if inside.contains(i) {
                255
            } else if inconclusive.is_some_and(|s| s.contains(i)) {
                128
            } else {
                0
            }
        })
        .collect();
    Ok(pgm_bytes(domain, pixels, "0=outside 128=inconclusive 255=inside"))
}

/// Rows of the image run along the second axis, top row = largest y.
fn pgm_bytes(domain: &GridDomain, pixels: Vec<u8>, comment: &str) -> Vec<u8> {
    let (nx, ny) = (domain.shape()[0], domain.shape()[1]);
    let mut out = format!("P5\n# {comment}\n{nx} {ny}\n255\n").into_bytes();
    for row in (0..ny).rev() {
        for col in 0..nx {
            out.push(pixels[domain.flat_index(&[col, row, 0])]);
        }
    }
    out
}
