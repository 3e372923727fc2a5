//! Big-endian IDX files (the MNIST distribution format), `u8` payloads only.

use std::fs;
use std::path::Path;

use advsvm_core::data::{RawDataset, ValueRange};

use crate::error::{AppError, AppResult, Location};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Parsed image file: `n` images of `rows x cols` bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn len(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols).max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

fn read_u32(bytes: &[u8], at: usize, path: &Path) -> AppResult<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| AppError::format(path, Location::Byte(bytes.len() as u64), "truncated header"))
}

fn check_magic(bytes: &[u8], want: u32, path: &Path) -> AppResult<()> {
    let got = read_u32(bytes, 0, path)?;
    if got != want {
        return Err(AppError::format(
            path,
            Location::Byte(0),
            format!("bad magic 0x{got:08x}, expected 0x{want:08x}"),
        ));
    }
    Ok(())
}

fn payload<'a>(bytes: &'a [u8], start: usize, len: usize, path: &Path) -> AppResult<&'a [u8]> {
    let end = start + len;
    if bytes.len() < end {
        return Err(AppError::format(
            path,
            Location::Byte(bytes.len() as u64),
            format!("truncated payload: need {end} bytes, file has {}", bytes.len()),
        ));
    }
    if bytes.len() > end {
        return Err(AppError::format(
            path,
            Location::Byte(end as u64),
            format!("{} trailing bytes after payload", bytes.len() - end),
        ));
    }
    Ok(&bytes[start..end])
}

pub fn parse_images(bytes: &[u8], path: &Path) -> AppResult<IdxImages> {
    check_magic(bytes, IMAGES_MAGIC, path)?;
    let n = read_u32(bytes, 4, path)? as usize;
    let rows = read_u32(bytes, 8, path)? as usize;
    let cols = read_u32(bytes, 12, path)? as usize;
    if rows == 0 || cols == 0 {
        return Err(AppError::format(path, Location::Byte(8), "image dimensions must be positive"));
    }
    let pixels = payload(bytes, 16, n * rows * cols, path)?.to_vec();
    Ok(IdxImages { rows, cols, pixels })
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> AppResult<Vec<u8>> {
    check_magic(bytes, LABELS_MAGIC, path)?;
    let n = read_u32(bytes, 4, path)? as usize;
    Ok(payload(bytes, 8, n, path)?.to_vec())
}

fn read(path: &Path) -> AppResult<Vec<u8>> {
    fs::read(path).map_err(|e| AppError::io(path, e))
}

/// Loads an image/label file pair as a raw byte-valued dataset.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> AppResult<RawDataset> {
    let images = parse_images(&read(images_path)?, images_path)?;
    let labels = parse_labels(&read(labels_path)?, labels_path)?;
    if images.len() != labels.len() {
        return Err(AppError::format(
            labels_path,
            Location::Byte(4),
            format!(
                "count mismatch: {} labels for {} images in {}",
                labels.len(),
                images.len(),
                images_path.display()
            ),
        ));
    }
    let raw = RawDataset::new(
        images.rows * images.cols,
        images.pixels.iter().map(|&p| p as f64).collect(),
        labels.iter().map(|&l| l as i64).collect(),
        ValueRange::Bytes,
        images_path.display().to_string(),
    )?;
    Ok(raw)
}

pub fn encode_images(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let n = pixels.len() / (rows * cols).max(1);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
