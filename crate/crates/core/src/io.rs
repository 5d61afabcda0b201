//! On-disk formats.
//!
//! * matrix CSV: one matrix row per line, comma separated, no header;
//! * vector CSV: one value per line;
//! * instance bundle: a directory holding `A.csv`, `y.csv`, optional
//!   `xstar.csv` and `meta.json`.
//!
//! Floats are written in Rust's shortest round-trip form, so a write/read
//! cycle is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{normalize_columns, GroundTruth, InstanceSpec, ProblemInstance};

pub const MATRIX_FILE: &str = "A.csv";
pub const OBSERVATION_FILE: &str = "y.csv";
pub const TRUTH_FILE: &str = "xstar.csv";
pub const META_FILE: &str = "meta.json";

pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn parse_float(path: &Path, line: usize, field: &str) -> Result<f64> {
    let field = field.trim();
    let v: f64 = field.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("not a number: {field:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("non-finite value {field:?}"),
        });
    }
    Ok(v)
}

pub fn matrix_to_csv(a: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in a.row_iter() {
        let line = row
            .iter()
            .map(|v| format_float(*v))
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&line);
        out.push('\n');
    }
    out
}

pub fn vector_to_csv(v: &DVector<f64>) -> String {
    v.iter().fold(String::new(), |mut out, x| {
        let _ = writeln!(out, "{}", format_float(*x));
        out
    })
}

pub fn parse_matrix_csv(path: &Path, text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| parse_float(path, idx + 1, f))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    msg: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: "empty matrix".into(),
        });
    }
    let ncols = rows[0].len();
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.into_iter().flatten(),
    ))
}

pub fn parse_vector_csv(path: &Path, text: &str) -> Result<DVector<f64>> {
    let values = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_float(path, i + 1, l))
        .collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(values))
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix_csv(path, &read_text(path)?)
}

pub fn read_vector_csv(path: &Path) -> Result<DVector<f64>> {
    parse_vector_csv(path, &read_text(path)?)
}

/// A bundle as loaded from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub dir: PathBuf,
    /// Normalized system; the truth (if any) is in normalized coordinates.
    pub instance: ProblemInstance,
    pub meta: Option<InstanceSpec>,
}

/// Writes `instance` (whose matrix is taken to be the posed system, e.g.
/// from [`crate::generate_instance`]) and its generating spec to `dir`.
pub fn write_bundle(dir: &Path, instance: &ProblemInstance, meta: &InstanceSpec) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let a = &instance.matrix;
    let raw = DMatrix::from_fn(a.rows(), a.cols(), |i, j| {
        a.entries()[(i, j)] * a.column_scales()[j]
    });
    write_text(&dir.join(MATRIX_FILE), &matrix_to_csv(&raw))?;
    write_text(
        &dir.join(OBSERVATION_FILE),
        &vector_to_csv(&instance.observation),
    )?;
    if let Some(t) = &instance.truth {
        write_text(
            &dir.join(TRUTH_FILE),
            &vector_to_csv(&a.to_original(&t.signal)),
        )?;
    }
    let json = serde_json::to_string_pretty(meta).expect("spec serializes");
    write_text(&dir.join(META_FILE), &(json + "\n"))
}

pub fn read_meta(dir: &Path) -> Result<Option<InstanceSpec>> {
    let path = dir.join(META_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = read_text(&path)?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|source| Error::Json { path, source })
}

/// Loads a bundle, normalizing `A.csv` and mapping `xstar.csv` into the
/// normalized coordinates.
pub fn read_bundle(dir: &Path) -> Result<Bundle> {
    let raw = read_matrix_csv(&dir.join(MATRIX_FILE))?;
    let matrix = normalize_columns(&raw)?;
    let observation = read_vector_csv(&dir.join(OBSERVATION_FILE))?;
    let truth_path = dir.join(TRUTH_FILE);
    let truth = if truth_path.exists() {
        let x = read_vector_csv(&truth_path)?;
        if x.len() != matrix.cols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.cols(),
                actual: x.len(),
            });
        }
        Some(GroundTruth::from_signal(matrix.to_normalized(&x)))
    } else {
        None
    };
    let meta = read_meta(dir)?;
    let seed = meta.as_ref().map_or(0, |m| m.seed);
    let instance = ProblemInstance::new(matrix, observation, truth, seed)?;
    Ok(Bundle {
        dir: dir.to_path_buf(),
        instance,
        meta,
    })
}
