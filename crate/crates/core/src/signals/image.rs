//! Binary PGM (P5) and PPM (P6), maxval 255.

use std::path::Path;

use super::{grid_coords, Modality, Signal, ValueScale};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.buf.len() {
            match self.buf[self.pos] {
                b'#' => {
                    while self.pos < self.buf.len() && self.buf[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.buf.len() && self.buf[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::parse(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.buf[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(start, format!("{what} out of range")))
    }
}

/// Parses a P5 or P6 image into a signal with values in `[-1, 1]`.
pub fn parse_pnm(buf: &[u8]) -> Result<Signal> {
    let channels = match buf.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(Error::parse(0, "not a binary PGM/PPM (expected P5 or P6)")),
    };
    let mut c = Cursor { buf, pos: 2 };
    let width = c.number("width")?;
    let height = c.number("height")?;
    c.skip_space_and_comments();
    let maxval_at = c.pos;
    let maxval = c.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::parse(maxval_at, "zero image dimension"));
    }
    if maxval != 255 {
        return Err(Error::parse(maxval_at, format!("maxval {maxval} unsupported (need 255)")));
    }
    match buf.get(c.pos) {
        Some(b) if b.is_ascii_whitespace() => c.pos += 1,
        _ => return Err(Error::parse(c.pos, "expected one whitespace byte after maxval")),
    }
    let len = width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(channels))
        .ok_or_else(|| Error::parse(0, "image dimensions overflow"))?;
    let payload = &buf[c.pos..];
    if payload.len() < len {
        return Err(Error::parse(
            buf.len(),
            format!("truncated payload: {} of {len} bytes", payload.len()),
        ));
    }
    let payload = &payload[..len];
    let values = Matrix::from_vec(
        width * height,
        channels,
        payload.iter().map(|&b| ValueScale::BYTE.to_value(b as f64)).collect(),
    )?;
    Ok(Signal {
        modality: Modality::Image2D,
        coords: grid_coords(&[height, width]),
        values,
        shape: vec![height, width],
        value_scale: ValueScale::BYTE,
        sample_rate: None,
    })
}

pub fn load_image(path: &Path) -> Result<Signal> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_pnm(&buf)
}

/// Encodes an image signal, rounding half to even and clamping to `[0, 255]`.
pub fn write_pnm(signal: &Signal) -> Result<Vec<u8>> {
    let (height, width) = match signal.shape.as_slice() {
        [h, w] => (*h, *w),
        _ => return Err(Error::invalid("image signal needs a 2D shape")),
    };
    let magic = match signal.channels() {
        1 => "P5",
        3 => "P6",
        c => return Err(Error::invalid(format!("{c}-channel image cannot be written"))),
    };
    if signal.values.rows() != width * height {
        return Err(Error::invalid("value count does not match image shape"));
    }
    let mut out = format!("{magic}\n{width} {height}\n255\n").into_bytes();
    out.extend(signal.values.as_slice().iter().map(|&v| {
        signal
            .value_scale
            .to_raw(v)
            .round_ties_even()
            .clamp(0.0, 255.0) as u8
    }));
    Ok(out)
}

pub fn save_image(signal: &Signal, path: &Path) -> Result<()> {
    std::fs::write(path, write_pnm(signal)?).map_err(|e| Error::io(path, e))
}
