//! Plain-text file formats used by the command-line harness.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::{DualPotentials, TraceRecord, TransportPlan};

pub const TRACE_HEADER: &str = "iter,phi,res_nu,res_mu,step";

fn parse_value(s: &str, path: &Path, line: usize) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{}:{line}: cannot parse '{}' as a number", path.display(), s.trim())))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("{}:{line}: value {v} is not finite", path.display())));
    }
    Ok(v)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

/// One value per line; blank lines are skipped.
pub fn read_vector(path: impl AsRef<Path>) -> Result<Array1<f64>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_value(line, path, k + 1)?);
    }
    if out.is_empty() {
        return Err(Error::Parse(format!("{} contains no values", path.display())));
    }
    Ok(Array1::from(out))
}

/// Dense matrix, one comma-separated row per line.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut values = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line.split(',').map(|s| parse_value(s, path, k + 1)).collect::<Result<Vec<_>>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Dimension(format!(
                    "{}:{}: row has {} entries, expected {c}",
                    path.display(),
                    k + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Parse(format!("{} contains no rows", path.display())))?;
    Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::Dimension(e.to_string()))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

/// `row,col,value` triplets, 0-based, sorted row-major.
pub fn write_plan(path: impl AsRef<Path>, plan: &TransportPlan) -> Result<()> {
    let mut entries = plan.entries().to_vec();
    entries.sort_by_key(|&(i, j, _)| (i, j));
    let mut w = create(path.as_ref())?;
    for (i, j, v) in entries {
        writeln!(w, "{i},{j},{v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_plan`].
pub fn read_plan(path: impl AsRef<Path>, rows: usize, cols: usize) -> Result<TransportPlan> {
    let path = path.as_ref();
    let text = read_text(path)?;
    let mut entries = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("{}:{}: expected row,col,value", path.display(), k + 1)));
        }
        let idx = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("{}:{}: bad index '{s}'", path.display(), k + 1)))
        };
        entries.push((idx(parts[0])?, idx(parts[1])?, parse_value(parts[2], path, k + 1)?));
    }
    TransportPlan::from_triplets(rows, cols, entries)
}

pub fn write_potentials(path: impl AsRef<Path>, d: &DualPotentials) -> Result<()> {
    let mut w = create(path.as_ref())?;
    writeln!(w, "side,index,value")?;
    for (i, v) in d.alpha.iter().enumerate() {
        writeln!(w, "alpha,{i},{v}")?;
    }
    for (j, v) in d.beta.iter().enumerate() {
        writeln!(w, "beta,{j},{v}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(path: impl AsRef<Path>, trace: &[TraceRecord]) -> Result<()> {
    let mut w = create(path.as_ref())?;
    writeln!(w, "{TRACE_HEADER}")?;
    for r in trace {
        writeln!(w, "{},{},{},{},{}", r.iteration, r.phi, r.residual_nu_inf, r.residual_mu_inf, r.step_length)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a header line followed by pre-formatted rows.
pub fn write_csv(path: impl AsRef<Path>, header: &str, rows: &[String]) -> Result<()> {
    let mut w = create(path.as_ref())?;
    writeln!(w, "{header}")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// 8-bit grayscale pixels scaled so the largest entry maps to 255.
/// An all-zero (or empty) matrix gives an all-zero image.
pub fn pgm_pixels(dense: &Array2<f64>) -> Vec<u8> {
    let max = dense.iter().fold(0.0f64, |a, &v| a.max(v));
    dense
        .iter()
        .map(|&v| if max > 0.0 { (255.0 * v.max(0.0) / max).round() as u8 } else { 0 })
        .collect()
}

/// Binary (P5) portable graymap, one pixel per matrix entry.
pub fn write_pgm(path: impl AsRef<Path>, dense: &Array2<f64>) -> Result<()> {
    let (rows, cols) = dense.dim();
    let mut w = create(path.as_ref())?;
    write!(w, "P5\n{cols} {rows}\n255\n")?;
    w.write_all(&pgm_pixels(dense))?;
    w.flush()?;
    Ok(())
}
