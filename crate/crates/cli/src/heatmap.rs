//! 8-bit grayscale PGM export with a JSON sidecar.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use invmed_core::fld::FieldData;
use invmed_core::RealField;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Real,
    Imag,
    Abs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub min: f64,
    pub max: f64,
    pub part: Part,
}

pub fn select_part(field: FieldData, part: Option<Part>) -> CliResult<(RealField, Part)> {
    match (field, part) {
        (FieldData::Real(f), None | Some(Part::Real)) => Ok((f, Part::Real)),
        (FieldData::Real(f), Some(Part::Abs)) => Ok((f.map(f64::abs), Part::Abs)),
        (FieldData::Real(_), Some(Part::Imag)) => {
            Err(CliError::usage("a real field has no imaginary part"))
        }
        (FieldData::Complex(_), None) => {
            Err(CliError::usage("complex fields need --part real|imag|abs"))
        }
        (FieldData::Complex(f), Some(p)) => {
            let r = match p {
                Part::Real => f.real_part(),
                Part::Imag => f.imag_part(),
                Part::Abs => f.abs(),
            };
            Ok((r, p))
        }
    }
}

/// PGM bytes with `min -> 0`, `max -> 255`; the top row is the largest `y`.
/// A constant field maps to mid-gray, unless it is zero.
pub fn encode_pgm(field: &RealField) -> (Vec<u8>, f64, f64) {
    let n = field.grid().n();
    let values = field.values();
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let level = |v: f64| -> u8 {
        if max > min {
            ((v - min) / (max - min) * 255.0).round() as u8
        } else if max == 0.0 {
            0
        } else {
            128
        }
    };
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    for j in (0..n).rev() {
        out.extend(values[j * n..(j + 1) * n].iter().map(|&v| level(v)));
    }
    (out, min, max)
}

/// Writes `<dir>/<stem>.pgm` and `<dir>/<stem>.json`.
pub fn write_heatmap(field: &RealField, part: Part, dir: &Path, stem: &str) -> CliResult<PathBuf> {
    let (bytes, min, max) = encode_pgm(field);
    let image = dir.join(format!("{stem}.pgm"));
    std::fs::write(&image, bytes)?;
    let sidecar = serde_json::to_string(&Sidecar { min, max, part })?;
    std::fs::write(dir.join(format!("{stem}.json")), sidecar)?;
    Ok(image)
}
