//! Binary field files and CSV profiles.
//!
//! A field file is two text lines followed by raw data:
//!
//! ```text
//! LIGHTDD-FIELD 1
//! {"kind":"real","n":[..],"spacing":[..],"origin":[..],"boundary":[..],"unit":"density_m-3"}
//! <little-endian f64 values, row-major, z fastest; complex values as re, im pairs>
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::grid::{Boundary, ComplexField3D, FieldUnit, GridSpec, Profile1D, ScalarField3D};
use crate::{Error, Result};

const MAGIC: &str = "LIGHTDD-FIELD 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Real,
    Complex,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    kind: Kind,
    n: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    boundary: [Boundary; 3],
    unit: String,
}

fn write_header(w: &mut impl Write, kind: Kind, grid: &GridSpec, unit: &str) -> Result<()> {
    let h = Header {
        kind,
        n: grid.n,
        spacing: grid.spacing,
        origin: grid.origin,
        boundary: grid.boundary,
        unit: unit.to_string(),
    };
    writeln!(w, "{MAGIC}")?;
    let json = serde_json::to_string(&h).map_err(|e| Error::Format(e.to_string()))?;
    writeln!(w, "{json}")?;
    Ok(())
}

fn read_header(r: &mut impl BufRead) -> Result<Header> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim_end() != MAGIC {
        return Err(Error::Format(format!("bad magic line '{}'", line.trim_end())));
    }
    line.clear();
    r.read_line(&mut line)?;
    let h: Header = serde_json::from_str(line.trim_end()).map_err(|e| Error::Format(e.to_string()))?;
    GridSpec::new(h.n, h.spacing, h.origin, h.boundary)?;
    Ok(h)
}

fn read_f64s(r: &mut impl Read, count: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)
        .map_err(|e| Error::Format(format!("truncated data: {e}")))?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format("trailing bytes after field data".into()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn write_scalar_field(w: &mut impl Write, field: &ScalarField3D) -> Result<()> {
    write_header(w, Kind::Real, &field.grid, field.unit.tag())?;
    for v in field.values.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_complex_field(w: &mut impl Write, field: &ComplexField3D) -> Result<()> {
    write_header(w, Kind::Complex, &field.grid, "amplitude_m-3/2")?;
    for v in field.values.iter() {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_scalar_field(r: &mut impl BufRead) -> Result<ScalarField3D> {
    let h = read_header(r)?;
    if h.kind != Kind::Real {
        return Err(Error::Format("expected a real field".into()));
    }
    let unit = FieldUnit::from_tag(&h.unit)
        .ok_or_else(|| Error::Format(format!("unknown unit tag '{}'", h.unit)))?;
    let grid = GridSpec::new(h.n, h.spacing, h.origin, h.boundary)?;
    let data = read_f64s(r, grid.len())?;
    let values = Array3::from_shape_vec(grid.shape(), data).map_err(|e| Error::Format(e.to_string()))?;
    ScalarField3D::new(grid, values, unit)
}

pub fn read_complex_field(r: &mut impl BufRead) -> Result<ComplexField3D> {
    let h = read_header(r)?;
    if h.kind != Kind::Complex {
        return Err(Error::Format("expected a complex field".into()));
    }
    let grid = GridSpec::new(h.n, h.spacing, h.origin, h.boundary)?;
    let data = read_f64s(r, 2 * grid.len())?;
    let values: Vec<Complex64> = data.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    let values = Array3::from_shape_vec(grid.shape(), values).map_err(|e| Error::Format(e.to_string()))?;
    ComplexField3D::new(grid, values)
}

pub fn save_scalar_field(path: &Path, field: &ScalarField3D) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_scalar_field(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load_scalar_field(path: &Path) -> Result<ScalarField3D> {
    read_scalar_field(&mut BufReader::new(File::open(path)?))
}

pub fn save_complex_field(path: &Path, field: &ComplexField3D) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_complex_field(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load_complex_field(path: &Path) -> Result<ComplexField3D> {
    read_complex_field(&mut BufReader::new(File::open(path)?))
}

/// Two-column CSV: coordinate, value. `value_scale` converts the stored
/// value (e.g. 1/h to report energies in Hz).
pub fn write_profile_csv(
    w: &mut impl Write,
    profile: &Profile1D,
    coord_header: &str,
    value_header: &str,
    value_scale: f64,
) -> Result<()> {
    writeln!(w, "{coord_header},{value_header}")?;
    for (c, v) in profile.coords.iter().zip(&profile.values) {
        writeln!(w, "{c:.12e},{:.12e}", v * value_scale)?;
    }
    Ok(())
}
