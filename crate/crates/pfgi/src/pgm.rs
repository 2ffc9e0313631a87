//! Binary greymap (PGM `P5`) reading and writing.
//!
//! Only 8-bit images are handled. Headers are written as
//! `P5\n<width> <height>\n255\n` followed by row-major bytes, which makes the
//! output identical on every platform.

use std::io::{self, Read, Write};

use pfgi_core::Grid;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("not a binary PGM (P5) file")]
    BadMagic,
    #[error("malformed PGM header: {0}")]
    BadHeader(String),
    #[error("only 8-bit PGM is supported (maxval {0})")]
    UnsupportedDepth(u32),
    #[error("PGM is {width}x{height}; expected a square image")]
    NotSquare { width: usize, height: usize },
    #[error("PGM pixel data truncated: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A decoded 8-bit greymap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u32,
    pub pixels: Vec<u8>,
}

pub fn write_pgm<W: Write>(mut w: W, width: usize, height: usize, pixels: &[u8]) -> io::Result<()> {
    assert_eq!(pixels.len(), width * height, "pixel buffer size mismatch");
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(pixels)?;
    w.flush()
}

pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(pixels.len() + 16);
    write_pgm(&mut out, width, height, pixels).expect("writing to a Vec cannot fail");
    out
}

fn skip_whitespace_and_comments(data: &[u8], mut pos: usize) -> usize {
    loop {
        while pos < data.len() && data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < data.len() && data[pos] == b'#' {
            while pos < data.len() && data[pos] != b'\n' {
                pos += 1;
            }
        } else {
            return pos;
        }
    }
}

fn header_number(data: &[u8], pos: &mut usize, what: &str) -> Result<u32, PgmError> {
    *pos = skip_whitespace_and_comments(data, *pos);
    let start = *pos;
    while *pos < data.len() && data[*pos].is_ascii_digit() {
        *pos += 1;
    }
    std::str::from_utf8(&data[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| PgmError::BadHeader(format!("missing {what}")))
}

pub fn read_pgm<R: Read>(mut r: R) -> Result<Pgm, PgmError> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    if data.len() < 2 || &data[..2] != b"P5" {
        return Err(PgmError::BadMagic);
    }
    let mut pos = 2;
    let width = header_number(&data, &mut pos, "width")? as usize;
    let height = header_number(&data, &mut pos, "height")? as usize;
    let maxval = header_number(&data, &mut pos, "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(PgmError::UnsupportedDepth(maxval));
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= data.len() || !data[pos].is_ascii_whitespace() {
        return Err(PgmError::BadHeader("no separator after maxval".into()));
    }
    pos += 1;
    let expected = width * height;
    let raster = &data[pos..];
    if raster.len() < expected {
        return Err(PgmError::Truncated {
            expected,
            got: raster.len(),
        });
    }
    Ok(Pgm {
        width,
        height,
        maxval,
        pixels: raster[..expected].to_vec(),
    })
}

/// Loads a square PGM as transmissivities `v / maxval` (`v / 255` for 8-bit files).
pub fn grid_from_pgm(pgm: &Pgm) -> Result<Grid, PgmError> {
    if pgm.width != pgm.height {
        return Err(PgmError::NotSquare {
            width: pgm.width,
            height: pgm.height,
        });
    }
    let scale = f64::from(pgm.maxval);
    let data = pgm.pixels.iter().map(|&v| f64::from(v) / scale).collect();
    Ok(Grid::from_vec(pgm.width, data).expect("square raster"))
}

/// Affine map applied when a real-valued image is quantized to 8 bits:
/// `byte = round((value - offset) * scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rescale {
    pub min: f64,
    pub max: f64,
    pub offset: f64,
    pub scale: f64,
}

/// Rescales `[min, max]` onto `[0, 255]`; a constant image maps to all zeros.
pub fn quantize(grid: &Grid) -> (Vec<u8>, Rescale) {
    let (min, max) = (grid.min(), grid.max());
    let scale = if max > min { 255.0 / (max - min) } else { 0.0 };
    let bytes = grid
        .as_slice()
        .iter()
        .map(|&v| ((v - min) * scale).round().clamp(0.0, 255.0) as u8)
        .collect();
    (
        bytes,
        Rescale {
            min,
            max,
            offset: min,
            scale,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_header_and_bytes() {
        let bytes = encode_pgm(3, 2, &[0, 255, 7, 1, 2, 3]);
        assert_eq!(&bytes[..11], b"P5\n3 2\n255\n");
        assert_eq!(&bytes[11..], &[0, 255, 7, 1, 2, 3]);
    }

    #[test]
    fn reads_comments_and_maxval() {
        let mut data = b"P5\n# made by hand\n2 2\n# depth\n100\n".to_vec();
        data.extend_from_slice(&[0, 50, 100, 25]);
        let pgm = read_pgm(&data[..]).unwrap();
        assert_eq!((pgm.width, pgm.height, pgm.maxval), (2, 2, 100));
        let g = grid_from_pgm(&pgm).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 0.5, 1.0, 0.25]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            read_pgm(&b"P2\n1 1\n255\n0"[..]),
            Err(PgmError::BadMagic)
        ));
        assert!(matches!(
            read_pgm(&b"P5\n2 2\n255\n\x00"[..]),
            Err(PgmError::Truncated {
                expected: 4,
                got: 1
            })
        ));
        assert!(matches!(
            read_pgm(&b"P5\n1 1\n65535\n\x00\x00"[..]),
            Err(PgmError::UnsupportedDepth(65535))
        ));
        let rect = read_pgm(&b"P5\n2 1\n255\n\x00\x00"[..]).unwrap();
        assert!(matches!(
            grid_from_pgm(&rect),
            Err(PgmError::NotSquare { .. })
        ));
    }

    #[test]
    fn quantize_extremes() {
        let g = Grid::from_vec(2, vec![1.0, 2.0, 3.0, 5.0]).unwrap();
        let (bytes, r) = quantize(&g);
        assert_eq!(bytes, vec![0, 64, 128, 255]);
        assert_eq!((r.min, r.max, r.offset), (1.0, 5.0, 1.0));
        let (flat, r) = quantize(&Grid::filled(2, 4.0));
        assert_eq!(flat, vec![0; 4]);
        assert_eq!(r.scale, 0.0);
    }

    #[test]
    fn round_trip_binary_frame() {
        let pixels: Vec<u8> = (0..25).map(|i| if i % 3 == 0 { 255 } else { 0 }).collect();
        let pgm = read_pgm(&encode_pgm(5, 5, &pixels)[..]).unwrap();
        assert_eq!(pgm.pixels, pixels);
    }
}
