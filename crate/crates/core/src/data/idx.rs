//! Reader for the IDX binary format used by MNIST-style datasets.
//!
//! Images: magic `0x00000803`, then big-endian `u32` count, rows, cols,
//! followed by `count * rows * cols` unsigned bytes. Labels: magic
//! `0x00000801`, a big-endian `u32` count, then `count` unsigned bytes.

use std::path::Path;

use super::dataset::LabeledDataset;
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, offset: usize, detail: String) -> Error {
        Error::Idx {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            detail,
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let end = self.pos + 4;
        let slice = self.bytes.get(self.pos..end).ok_or_else(|| {
            self.err(
                self.pos,
                format!(
                    "truncated reading {what}: expected {end} bytes, file has {}",
                    self.bytes.len()
                ),
            )
        })?;
        self.pos = end;
        Ok(u32::from_be_bytes(slice.try_into().expect("4 bytes")))
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let found = self.u32("magic number")?;
        if found != expected {
            return Err(self.err(0, format!("magic {found:#010x}, expected {expected:#010x}")));
        }
        Ok(())
    }

    fn payload(&mut self, len: usize) -> Result<&'a [u8]> {
        let expected = self.pos + len;
        if self.bytes.len() < expected {
            return Err(self.err(
                self.bytes.len(),
                format!(
                    "truncated payload: expected {expected} bytes, file has {}",
                    self.bytes.len()
                ),
            ));
        }
        let out = &self.bytes[self.pos..expected];
        self.pos = expected;
        Ok(out)
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Idx {
        path: path.to_path_buf(),
        offset: 0,
        detail: e.to_string(),
    })
}

/// Parses an image file into `(rows, cols, pixels scaled to [0, 1])`.
pub fn parse_images(path: &Path, bytes: &[u8]) -> Result<(usize, usize, usize, Vec<f64>)> {
    let mut c = Cursor { path, bytes, pos: 0 };
    c.magic(IMAGES_MAGIC)?;
    let count = c.u32("image count")? as usize;
    let rows = c.u32("row count")? as usize;
    let cols = c.u32("column count")? as usize;
    let pixels = c.payload(count * rows * cols)?;
    Ok((
        count,
        rows,
        cols,
        pixels.iter().map(|&p| f64::from(p) / 255.0).collect(),
    ))
}

pub fn parse_labels(path: &Path, bytes: &[u8], class_count: usize) -> Result<Vec<usize>> {
    let mut c = Cursor { path, bytes, pos: 0 };
    c.magic(LABELS_MAGIC)?;
    let count = c.u32("label count")? as usize;
    let start = c.pos;
    let raw = c.payload(count)?;
    raw.iter()
        .enumerate()
        .map(|(i, &l)| {
            if (l as usize) < class_count {
                Ok(l as usize)
            } else {
                Err(c.err(start + i, format!("label {l} outside [0, {class_count})")))
            }
        })
        .collect()
}

/// Loads an image/label IDX pair as a dataset of `[1, rows, cols]` samples.
pub fn load_idx(images_path: &Path, labels_path: &Path, class_count: usize) -> Result<LabeledDataset> {
    let (count, rows, cols, pixels) = parse_images(images_path, &read(images_path)?)?;
    let labels = parse_labels(labels_path, &read(labels_path)?, class_count)?;
    if labels.len() != count {
        return Err(Error::Idx {
            path: labels_path.to_path_buf(),
            offset: 4,
            detail: format!("{} labels for {count} images", labels.len()),
        });
    }
    let name = images_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".into());
    LabeledDataset::new(name, class_count, vec![1, rows, cols], pixels, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn images_fixture() -> Vec<u8> {
        let mut b = vec![0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2];
        b.extend_from_slice(&[0, 255, 51, 102, 255, 0, 0, 0]);
        b
    }

    #[test]
    fn parses_handcrafted_images() {
        let (n, r, c, px) = parse_images(Path::new("mem"), &images_fixture()).unwrap();
        assert_eq!((n, r, c), (2, 2, 2));
        assert_eq!(px, vec![0.0, 1.0, 0.2, 0.4, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn truncated_payload_reports_lengths() {
        let bytes = images_fixture();
        let err = parse_images(Path::new("mem"), &bytes[..bytes.len() - 1]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("expected 24 bytes, file has 23"), "{msg}");
    }

    #[test]
    fn bad_magic_and_label_range() {
        let mut bytes = images_fixture();
        bytes[3] = 1;
        assert!(matches!(
            parse_images(Path::new("mem"), &bytes),
            Err(Error::Idx { offset: 0, .. })
        ));
        let labels = [0, 0, 8, 1, 0, 0, 0, 2, 1, 9];
        assert_eq!(parse_labels(Path::new("mem"), &labels, 10).unwrap(), vec![1, 9]);
        match parse_labels(Path::new("mem"), &labels, 5) {
            Err(Error::Idx { offset, .. }) => assert_eq!(offset, 9),
            other => panic!("unexpected {other:?}"),
        }
    }
}
