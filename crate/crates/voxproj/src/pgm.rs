//! Binary PGM (P5) images, maxval 255, one byte per pixel, row-major.
//! Pixel bytes are `round(255 * v)` with halves rounding up.

use std::fs;
use std::path::{Path, PathBuf};

use voxproj_core::{Image, SemanticImage};

use crate::error::{Error, Result};

pub fn write_image_pgm(img: &Image, path: &Path) -> Result<()> {
    let mut bytes = format!("P5\n{} {}\n255\n", img.w(), img.h()).into_bytes();
    bytes.extend(img.values().iter().map(|v| (255.0 * v).round() as u8));
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn header_token(bytes: &[u8], cursor: &mut usize, path: &Path, what: &str) -> Result<usize> {
    // skip whitespace and '#' comments
    loop {
        while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        if *cursor < bytes.len() && bytes[*cursor] == b'#' {
            while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                *cursor += 1;
            }
        } else {
            break;
        }
    }
    let start = *cursor;
    while *cursor < bytes.len() && !bytes[*cursor].is_ascii_whitespace() {
        *cursor += 1;
    }
    std::str::from_utf8(&bytes[start..*cursor])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::BadInput {
            path: path.to_path_buf(),
            message: format!("missing or malformed {what}"),
        })
}

pub fn read_image_pgm(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(Error::BadInput {
            path: path.to_path_buf(),
            message: "not a binary PGM (P5) file".into(),
        });
    }
    let mut cursor = 2usize;
    let w = header_token(&bytes, &mut cursor, path, "width")?;
    let h = header_token(&bytes, &mut cursor, path, "height")?;
    let maxval = header_token(&bytes, &mut cursor, path, "maxval")?;
    if maxval != 255 {
        return Err(Error::BadInput {
            path: path.to_path_buf(),
            message: format!("unsupported maxval {maxval}"),
        });
    }
    cursor += 1; // single whitespace byte after maxval
    let pixels = &bytes[cursor..];
    if pixels.len() != w * h {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected: w * h,
            actual: pixels.len(),
        });
    }
    let values = pixels.iter().map(|b| f64::from(*b) / 255.0).collect();
    Ok(Image::from_values(h, w, values)?)
}

/// Per-channel path for a semantic image: `name_c<k>.pgm`.
pub fn channel_path(base: &Path, channel: usize) -> PathBuf {
    let stem = base
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("image");
    base.with_file_name(format!("{stem}_c{channel}.pgm"))
}

/// Writes one PGM per channel with suffix `_c<k>`, returning the paths.
pub fn write_semantic_pgms(img: &SemanticImage, base: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::with_capacity(img.channels());
    for c in 0..img.channels() {
        let path = channel_path(base, c);
        let channel = Image::from_values(img.h(), img.w(), img.channel(c).to_vec())?;
        write_image_pgm(&channel, &path)?;
        paths.push(path);
    }
    Ok(paths)
}
