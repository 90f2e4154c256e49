//! Grayscale PGM (P2 ASCII and P5 binary), maxval 255 only.
//!
//! Reading scales pixels to `[0, 1]` by `p / 255`. Writing quantizes with
//! round-half-up, `floor(255 v + 0.5)` clamped to `0..=255`, so an 8-bit
//! image survives a round trip exactly.

use std::path::Path;

use super::Signal;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    Ascii,
    Binary,
}

pub fn quantize(v: f64) -> u8 {
    (255.0 * v + 0.5).floor().clamp(0.0, 255.0) as u8
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Signal> {
    decode_pgm(&std::fs::read(path)?)
}

/// Writes a binary (P5) PGM.
pub fn write_pgm(path: impl AsRef<Path>, x: &Signal) -> Result<()> {
    write_pgm_as(path, x, PgmFormat::Binary)
}

pub fn write_pgm_as(path: impl AsRef<Path>, x: &Signal, format: PgmFormat) -> Result<()> {
    std::fs::write(path, encode_pgm(x, format)?)?;
    Ok(())
}

pub fn encode_pgm(x: &Signal, format: PgmFormat) -> Result<Vec<u8>> {
    let (rows, cols) = match x.shape() {
        super::Shape::D2 { rows, cols } => (rows, cols),
        super::Shape::D1(n) => (1, n),
    };
    let pixels = x.as_slice().iter().map(|&v| quantize(v));
    let mut out = Vec::new();
    match format {
        PgmFormat::Binary => {
            out.extend_from_slice(format!("P5\n{cols} {rows}\n255\n").as_bytes());
            out.extend(pixels);
        }
        PgmFormat::Ascii => {
            out.extend_from_slice(format!("P2\n{cols} {rows}\n255\n").as_bytes());
            let px: Vec<u8> = pixels.collect();
            for row in px.chunks(cols.max(1)) {
                let line: Vec<String> = row.iter().map(u8::to_string).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<&str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Pgm("unexpected end of file".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::Pgm("non-ASCII token".into()))
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let t = self.token()?;
        t.parse()
            .map_err(|_| Error::Pgm(format!("bad {what} '{t}'")))
    }
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Signal> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.token()?.to_string();
    let binary = match magic.as_str() {
        "P5" => true,
        "P2" => false,
        m => return Err(Error::Pgm(format!("unsupported magic '{m}'"))),
    };
    let cols = cur.number("width")?;
    let rows = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(Error::Pgm(format!("maxval {maxval} != 255")));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::Pgm(format!("empty image {cols}x{rows}")));
    }
    let n = rows * cols;
    let mut data = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(Error::Pgm("missing raster".into()));
        }
        let start = cur.pos + 1;
        let raster = bytes
            .get(start..start + n)
            .ok_or_else(|| Error::Pgm(format!("raster truncated: need {n} bytes")))?;
        data.extend(raster.iter().map(|&p| p as f64 / 255.0));
    } else {
        for k in 0..n {
            let p = cur
                .number("pixel")
                .map_err(|_| Error::Pgm(format!("pixel {k} of {n} missing or malformed")))?;
            if p > 255 {
                return Err(Error::Pgm(format!("pixel value {p} > 255")));
            }
            data.push(p as f64 / 255.0);
        }
    }
    Signal::image(rows, cols, data)
}
