//! `.fld` field files: one JSON header line terminated by `\n`, then `nx * ny`
//! little-endian values (`f64`, or interleaved `re, im` pairs for `c128`) in
//! row-major order with `y` as the slow index.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, RealField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub nx: usize,
    pub ny: usize,
    pub dtype: String,
    pub order: String,
    pub domain: [f64; 4],
    pub k: Option<f64>,
}

/// Contents of a field file.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldData {
    Real(RealField),
    Complex(ComplexField),
}

impl FieldData {
    pub fn grid(&self) -> &Grid {
        match self {
            FieldData::Real(f) => f.grid(),
            FieldData::Complex(f) => f.grid(),
        }
    }

    pub fn into_real(self) -> Result<RealField> {
        match self {
            FieldData::Real(f) => Ok(f),
            FieldData::Complex(_) => Err(Error::Format("expected a real (f64) field".into())),
        }
    }

    pub fn into_complex(self) -> ComplexField {
        match self {
            FieldData::Real(f) => f.to_complex(),
            FieldData::Complex(f) => f,
        }
    }
}

fn header_for(grid: &Grid, dtype: &str, k: Option<f64>) -> FieldHeader {
    FieldHeader {
        nx: grid.n(),
        ny: grid.n(),
        dtype: dtype.to_string(),
        order: "row-major".to_string(),
        domain: grid.bounds(),
        k,
    }
}

fn write_header(w: &mut impl Write, header: &FieldHeader) -> Result<()> {
    let line = serde_json::to_string(header).map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(line.as_bytes())?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_real(w: &mut impl Write, f: &RealField, k: Option<f64>) -> Result<()> {
    write_header(w, &header_for(f.grid(), "f64", k))?;
    let mut buf = Vec::with_capacity(8 * f.values().len());
    for v in f.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_complex(w: &mut impl Write, f: &ComplexField, k: Option<f64>) -> Result<()> {
    write_header(w, &header_for(f.grid(), "c128", k))?;
    let mut buf = Vec::with_capacity(16 * f.values().len());
    for v in f.values() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_data(w: &mut impl Write, f: &FieldData, k: Option<f64>) -> Result<()> {
    match f {
        FieldData::Real(f) => write_real(w, f, k),
        FieldData::Complex(f) => write_complex(w, f, k),
    }
}

/// Read a header line and the payload; returns the header alongside the data.
pub fn read(r: impl Read) -> Result<(FieldHeader, FieldData)> {
    let mut reader = BufReader::new(r);
    let mut line = Vec::new();
    reader.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::Format("header line is not terminated".into()));
    }
    line.pop();
    let header: FieldHeader =
        serde_json::from_slice(&line).map_err(|e| Error::Format(format!("bad header: {e}")))?;
    if header.order != "row-major" {
        return Err(Error::Format(format!("unsupported order {:?}", header.order)));
    }
    if header.nx != header.ny {
        return Err(Error::Format(format!("non-square field {}x{}", header.nx, header.ny)));
    }
    let [x0, y0, x1, y1] = header.domain;
    let grid = Grid::new(header.nx, x0, y0, x1, y1)?;
    let count = grid.len();
    let width = match header.dtype.as_str() {
        "f64" => 8,
        "c128" => 16,
        other => return Err(Error::Format(format!("unknown dtype {other:?}"))),
    };
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    if payload.len() != count * width {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            count * width,
            payload.len()
        )));
    }
    let le = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
    let data = if width == 8 {
        FieldData::Real(RealField::new(grid, payload.chunks_exact(8).map(le).collect())?)
    } else {
        let values = payload
            .chunks_exact(16)
            .map(|c| Complex64::new(le(&c[..8]), le(&c[8..])))
            .collect();
        FieldData::Complex(ComplexField::new(grid, values)?)
    };
    Ok((header, data))
}

pub fn save(path: impl AsRef<Path>, f: &FieldData, k: Option<f64>) -> Result<()> {
    let mut buf = Vec::new();
    write_data(&mut buf, f, k)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<(FieldHeader, FieldData)> {
    read(std::fs::File::open(path)?)
}
