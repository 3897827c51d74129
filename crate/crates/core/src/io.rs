//! CSV formats.
//!
//! Functions: header `point,value_re,value_im`, one row per grid point.
//!
//! Matrices: row-major, one CSV row per matrix row. In complex mode each
//! entry takes two columns (`c{j}_re,c{j}_im`); in real mode one (`c{j}`).

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DiscreteFunction, Grid};
use crate::C64;

/// Alignment tolerance for data points, relative to `max(1, |p|)`.
pub const POINT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixMode {
    Real,
    #[default]
    Complex,
}

pub fn write_function<W: Write>(out: W, grid: &Grid, f: &DiscreteFunction) -> Result<()> {
    if f.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            found: f.len(),
        });
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["point", "value_re", "value_im"])?;
    for (p, v) in grid.points().iter().zip(f.values()) {
        w.write_record([p.to_string(), v.re.to_string(), v.im.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_function_file(
    path: impl AsRef<Path>,
    grid: &Grid,
    f: &DiscreteFunction,
) -> Result<()> {
    write_function(File::create(path)?, grid, f)
}

/// Raw `(point, value)` rows.
pub fn read_samples<R: Read>(input: R) -> Result<Vec<(f64, C64)>> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let expected = ["point", "value_re", "value_im"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(a, b)| a.trim() != b) {
        return Err(Error::Parse(format!(
            "expected header point,value_re,value_im, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {}: column {}: {e}", line + 1, i + 1)))
        };
        rows.push((num(0)?, Complex::new(num(1)?, num(2)?)));
    }
    Ok(rows)
}

/// Matches sample rows to grid nodes one to one, in order.
pub fn align_samples(grid: &Grid, rows: &[(f64, C64)]) -> Result<DiscreteFunction> {
    if rows.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            found: rows.len(),
        });
    }
    for (i, ((p, _), q)) in rows.iter().zip(grid.points()).enumerate() {
        if (p - q).abs() > POINT_TOL * q.abs().max(1.0) {
            return Err(Error::IncompatibleGrids(format!(
                "row {} has point {p}, grid node is {q}",
                i + 1
            )));
        }
    }
    DiscreteFunction::new(grid, rows.iter().map(|(_, v)| *v).collect())
}

pub fn read_function_file(path: impl AsRef<Path>, grid: &Grid) -> Result<DiscreteFunction> {
    align_samples(grid, &read_samples(File::open(path)?)?)
}

pub fn write_matrix<W: Write>(out: W, m: &DMatrix<C64>, mode: MatrixMode) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = (0..m.ncols())
        .flat_map(|j| match mode {
            MatrixMode::Real => vec![format!("c{j}")],
            MatrixMode::Complex => vec![format!("c{j}_re"), format!("c{j}_im")],
        })
        .collect();
    w.write_record(&header)?;
    for i in 0..m.nrows() {
        let mut row = Vec::with_capacity(header.len());
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            match mode {
                MatrixMode::Real => {
                    if z.im != 0.0 {
                        return Err(Error::InvalidParameter(format!(
                            "entry ({i}, {j}) is complex but the real-only mode was requested"
                        )));
                    }
                    row.push(z.re.to_string());
                }
                MatrixMode::Complex => {
                    row.push(z.re.to_string());
                    row.push(z.im.to_string());
                }
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix_file(path: impl AsRef<Path>, m: &DMatrix<C64>, mode: MatrixMode) -> Result<()> {
    write_matrix(File::create(path)?, m, mode)
}

pub fn read_matrix<R: Read>(input: R, mode: MatrixMode) -> Result<DMatrix<C64>> {
    let mut r = csv::Reader::from_reader(input);
    let width = r.headers()?.len();
    let per = match mode {
        MatrixMode::Real => 1,
        MatrixMode::Complex => 2,
    };
    if width == 0 || width % per != 0 {
        return Err(Error::Parse(format!(
            "{width} columns do not fit {mode:?} entries"
        )));
    }
    let ncols = width / per;
    let mut data = Vec::new();
    let mut nrows = 0;
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("row {}: {e}", line + 1)))?;
        for j in 0..ncols {
            data.push(match mode {
                MatrixMode::Real => Complex::new(vals[j], 0.0),
                MatrixMode::Complex => Complex::new(vals[2 * j], vals[2 * j + 1]),
            });
        }
        nrows += 1;
    }
    Ok(DMatrix::from_row_slice(nrows, ncols, &data))
}

pub fn read_matrix_file(path: impl AsRef<Path>, mode: MatrixMode) -> Result<DMatrix<C64>> {
    read_matrix(File::open(path)?, mode)
}
