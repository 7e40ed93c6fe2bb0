//! File formats: FCM1 binary matrices, PGM images, and headerless CSV.
//!
//! FCM1 is the lossless interchange format: magic bytes "FCM1", then rows and
//! columns as little-endian u32, then row-major little-endian f64 values.
//! PGM (P5 binary or P2 ASCII, maxval 255) covers masks (0 = opaque,
//! 255 = transparent) and scaled image previews; scaled writes record the
//! affine byte-to-value map in a sidecar CSV.

use crate::error::{Error, Result};
use ndarray::Array2;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

const FCM1_MAGIC: &[u8; 4] = b"FCM1";

pub fn write_fcm1(path: &Path, matrix: &Array2<f64>) -> Result<()> {
    let (rows, cols) = matrix.dim();
    let rows32 = u32::try_from(rows)
        .map_err(|_| Error::Format(format!("matrix rows {rows} exceed u32")))?;
    let cols32 = u32::try_from(cols)
        .map_err(|_| Error::Format(format!("matrix cols {cols} exceed u32")))?;
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(FCM1_MAGIC)?;
    w.write_all(&rows32.to_le_bytes())?;
    w.write_all(&cols32.to_le_bytes())?;
    for i in 0..rows {
        for j in 0..cols {
            w.write_all(&matrix[[i, j]].to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_fcm1(path: &Path) -> Result<Array2<f64>> {
    let file = fs::File::open(path)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != FCM1_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic {:?}, expected FCM1",
            path.display(),
            magic
        )));
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    let rows = u32::from_le_bytes(buf4) as usize;
    r.read_exact(&mut buf4)?;
    let cols = u32::from_le_bytes(buf4) as usize;
    let mut data = Vec::with_capacity(rows * cols);
    let mut buf8 = [0u8; 8];
    for _ in 0..rows * cols {
        r.read_exact(&mut buf8)?;
        data.push(f64::from_le_bytes(buf8));
    }
    Array2::from_shape_vec((rows, cols), data)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Row-major, comma-separated, no header.
pub fn write_csv_matrix(path: &Path, matrix: &Array2<f64>) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    for row in matrix.rows() {
        let line = row
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv_matrix(path: &Path) -> Result<Array2<f64>> {
    let file = fs::File::open(path)?;
    let r = BufReader::new(file);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let values: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|t| t.trim().parse::<f64>()).collect();
        let values =
            values.map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        match cols {
            None => cols = Some(values.len()),
            Some(c) if c != values.len() => {
                return Err(Error::Format(format!(
                    "{}: ragged rows ({} vs {})",
                    path.display(),
                    c,
                    values.len()
                )))
            }
            _ => {}
        }
        data.extend(values);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Format(format!("{}: empty file", path.display())))?;
    Array2::from_shape_vec((rows, cols), data)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    Binary, // P5
    Ascii,  // P2
}

/// Write values already in [0, 1] as a maxval-255 PGM.
pub fn write_pgm_unit(path: &Path, values: &Array2<f64>, format: PgmFormat) -> Result<()> {
    for &v in values {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Validation(format!(
                "PGM values must lie in [0, 1], got {v}"
            )));
        }
    }
    let (rows, cols) = values.dim();
    let file = fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    match format {
        PgmFormat::Binary => {
            write!(w, "P5\n{cols} {rows}\n255\n")?;
            for v in values {
                w.write_all(&[(v * 255.0).round() as u8])?;
            }
        }
        PgmFormat::Ascii => {
            write!(w, "P2\n{cols} {rows}\n255\n")?;
            for row in values.rows() {
                let line = row
                    .iter()
                    .map(|v| ((v * 255.0).round() as u8).to_string())
                    .collect::<Vec<_>>()
                    .join(" ");
                writeln!(w, "{line}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a P2 or P5 PGM into values in [0, 1].
pub fn read_pgm(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path)?;
    let mut pos = 0usize;

    fn next_token(bytes: &[u8], pos: &mut usize) -> Option<String> {
        // skip whitespace and '#' comments
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        if *pos >= bytes.len() {
            return None;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        Some(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    }

    let err = |msg: &str| Error::Format(format!("{}: {msg}", path.display()));
    let magic = next_token(&bytes, &mut pos).ok_or_else(|| err("missing magic"))?;
    let cols: usize = next_token(&bytes, &mut pos)
        .ok_or_else(|| err("missing width"))?
        .parse()
        .map_err(|_| err("bad width"))?;
    let rows: usize = next_token(&bytes, &mut pos)
        .ok_or_else(|| err("missing height"))?
        .parse()
        .map_err(|_| err("bad height"))?;
    let maxval: f64 = next_token(&bytes, &mut pos)
        .ok_or_else(|| err("missing maxval"))?
        .parse()
        .map_err(|_| err("bad maxval"))?;
    if maxval <= 0.0 || maxval > 255.0 {
        return Err(err("maxval must be in 1..=255"));
    }
    let mut data = Vec::with_capacity(rows * cols);
    match magic.as_str() {
        "P5" => {
            pos += 1; // single whitespace after maxval
            if bytes.len() < pos + rows * cols {
                return Err(err("truncated pixel data"));
            }
            for &b in &bytes[pos..pos + rows * cols] {
                data.push(f64::from(b) / maxval);
            }
        }
        "P2" => {
            for _ in 0..rows * cols {
                let t = next_token(&bytes, &mut pos).ok_or_else(|| err("truncated pixels"))?;
                let v: f64 = t.parse().map_err(|_| err("bad pixel"))?;
                data.push(v / maxval);
            }
        }
        other => return Err(err(&format!("unsupported magic {other}"))),
    }
    Array2::from_shape_vec((rows, cols), data)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.csv");
    std::path::PathBuf::from(s)
}

/// Write arbitrary real values as a PGM by scaling [min, max] onto 0..255,
/// recording `offset,scale` (value = offset + byte * scale) in a sidecar CSV.
pub fn write_pgm_scaled(path: &Path, values: &Array2<f64>, format: PgmFormat) -> Result<()> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Validation("image contains non-finite values".into()));
    }
    let scale = if hi > lo { (hi - lo) / 255.0 } else { 1.0 };
    let unit = values.mapv(|v| ((v - lo) / (scale * 255.0)).clamp(0.0, 1.0));
    write_pgm_unit(path, &unit, format)?;
    let mut w = BufWriter::new(fs::File::create(sidecar_path(path))?);
    writeln!(w, "{lo},{scale}")?;
    w.flush()?;
    Ok(())
}

/// Read back a PGM written by [`write_pgm_scaled`], applying the sidecar map.
pub fn read_pgm_scaled(path: &Path) -> Result<Array2<f64>> {
    let unit = read_pgm(path)?;
    let sidecar = fs::read_to_string(sidecar_path(path))?;
    let parts: Vec<&str> = sidecar.trim().split(',').collect();
    if parts.len() != 2 {
        return Err(Error::Format(format!(
            "{}: sidecar must hold offset,scale",
            sidecar_path(path).display()
        )));
    }
    let offset: f64 = parts[0]
        .parse()
        .map_err(|_| Error::Format("bad sidecar offset".into()))?;
    let scale: f64 = parts[1]
        .parse()
        .map_err(|_| Error::Format("bad sidecar scale".into()))?;
    Ok(unit.mapv(|v| offset + v * 255.0 * scale))
}
