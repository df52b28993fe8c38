use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use super::SmmpcError;

/// Writes an offline trajectory as CSV with header
/// `k,u_0..u_{m-1},y_0..y_{p-1}`, one row per step. Floats are formatted
/// with the shortest round-trip representation, so files are byte-stable.
pub fn write_trajectory_csv(
    path: &Path,
    u_data: &DMatrix<f64>,
    y_data: &DMatrix<f64>,
) -> Result<(), SmmpcError> {
    let t = u_data.ncols();
    if y_data.ncols() != t {
        return Err(SmmpcError::DimensionMismatch(format!(
            "inputs have {t} steps but outputs have {}",
            y_data.ncols()
        )));
    }
    let m = u_data.nrows();
    let p = y_data.nrows();
    let mut out = String::from("k");
    for i in 0..m {
        out.push_str(&format!(",u_{i}"));
    }
    for i in 0..p {
        out.push_str(&format!(",y_{i}"));
    }
    out.push('\n');
    for k in 0..t {
        out.push_str(&k.to_string());
        for i in 0..m {
            out.push_str(&format!(",{}", u_data[(i, k)]));
        }
        for i in 0..p {
            out.push_str(&format!(",{}", y_data[(i, k)]));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a trajectory written by [`write_trajectory_csv`], returning
/// `(m x T inputs, p x T outputs)`.
pub fn read_trajectory_csv(path: &Path) -> Result<(DMatrix<f64>, DMatrix<f64>), SmmpcError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| SmmpcError::Parse("empty file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"k") {
        return Err(SmmpcError::Parse(format!(
            "expected header starting with 'k', got '{header}'"
        )));
    }
    let m = cols.iter().filter(|c| c.starts_with("u_")).count();
    let p = cols.iter().filter(|c| c.starts_with("y_")).count();
    if m == 0 || p == 0 || cols.len() != 1 + m + p {
        return Err(SmmpcError::Parse(format!(
            "malformed header '{header}': need k,u_*,y_* columns"
        )));
    }
    let mut u_rows: Vec<Vec<f64>> = Vec::new();
    let mut y_rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 1 + m + p {
            return Err(SmmpcError::Parse(format!(
                "row {idx}: expected {} fields, got {}",
                1 + m + p,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64, SmmpcError> {
            s.parse()
                .map_err(|_| SmmpcError::Parse(format!("row {idx}: bad float '{s}'")))
        };
        let mut u = Vec::with_capacity(m);
        for f in &fields[1..1 + m] {
            u.push(parse(f)?);
        }
        let mut y = Vec::with_capacity(p);
        for f in &fields[1 + m..] {
            y.push(parse(f)?);
        }
        u_rows.push(u);
        y_rows.push(y);
    }
    let t = u_rows.len();
    if t == 0 {
        return Err(SmmpcError::Parse("no data rows".into()));
    }
    Ok((
        DMatrix::from_fn(m, t, |i, k| u_rows[k][i]),
        DMatrix::from_fn(p, t, |i, k| y_rows[k][i]),
    ))
}
