//! Matrix files: CSV (17 significant digits, lossless for f64) and `.mat64`.
//!
//! `.mat64` layout: `rows: u64`, `cols: u64`, then `rows·cols` f64 values in
//! row-major order, all little-endian.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Bin,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Bin => "mat64",
        }
    }

    fn of(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("mat64") => Format::Bin,
            _ => Format::Csv,
        }
    }
}

/// Scientific notation with 17 significant digits; every f64 round-trips.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(path: &Path, m: &DMatrix<f64>, header: Option<&[String]>) -> Result<()> {
    let mut out = String::with_capacity(m.nrows() * m.ncols() * 24);
    if let Some(h) = header {
        out.push_str(&h.join(","));
        out.push('\n');
    }
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64(m[(i, j)]));
        }
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

/// Reads a numeric CSV; a first line that does not parse is taken as a header.
pub fn read_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if k == 0 => continue,
            Err(e) => bail!("{}:{}: {e}", path.display(), k + 1),
        }
    }
    ensure!(!rows.is_empty(), "{} holds no numeric rows", path.display());
    let cols = rows[0].len();
    for (k, r) in rows.iter().enumerate() {
        ensure!(r.len() == cols, "{}: row {} has {} values, expected {cols}", path.display(), k + 1, r.len());
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn write_mat64(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = Vec::with_capacity(16 + 8 * m.len());
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_mat64(path: &Path) -> Result<DMatrix<f64>> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    ensure!(bytes.len() >= 16, "{} is too short for a .mat64 header", path.display());
    let word = |k: usize| u64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
    let (rows, cols) = (word(0) as usize, word(1) as usize);
    let expected = rows.checked_mul(cols).and_then(|n| n.checked_mul(8)).map(|n| n + 16);
    ensure!(
        expected == Some(bytes.len()),
        "{}: header says {rows}x{cols} but the file has {} bytes",
        path.display(),
        bytes.len()
    );
    Ok(DMatrix::from_fn(rows, cols, |i, j| {
        let at = 16 + 8 * (i * cols + j);
        f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
    }))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    match Format::of(path) {
        Format::Csv => read_csv(path),
        Format::Bin => read_mat64(path),
    }
}

/// Writes `<dir>/<stem>.<ext>` and returns the path.
pub fn write_matrix(dir: &Path, stem: &str, m: &DMatrix<f64>, format: Format, header: Option<&[String]>) -> Result<PathBuf> {
    let path = dir.join(format!("{stem}.{}", format.extension()));
    match format {
        Format::Csv => write_csv(&path, m, header)?,
        Format::Bin => write_mat64(&path, m)?,
    }
    Ok(path)
}

/// Files `<prefix><i>.{csv,mat64}` in `dir`, ordered by `i`; `i` must run 0..N.
pub fn indexed_files(dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    let mut found: Vec<(usize, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("cannot list {}", dir.display()))? {
        let path = entry?.path();
        let (Some(stem), Some(ext)) = (path.file_stem().and_then(|s| s.to_str()), path.extension().and_then(|s| s.to_str())) else {
            continue;
        };
        if ext != "csv" && ext != "mat64" {
            continue;
        }
        if let Some(idx) = stem.strip_prefix(prefix).and_then(|s| s.parse::<usize>().ok()) {
            found.push((idx, path));
        }
    }
    found.sort();
    for (k, (idx, path)) in found.iter().enumerate() {
        ensure!(*idx == k, "{}: expected index {k} (indices must be 0..N without gaps or duplicates)", path.display());
    }
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

/// Expands directories to their `client_<i>` files; plain files pass through in order.
pub fn data_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let files = indexed_files(p, "client_")?;
            ensure!(!files.is_empty(), "no client_<i> files in {}", p.display());
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    ensure!(!out.is_empty(), "no data files given");
    Ok(out)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
