//! Netpbm bitmap/graymap reader (P1, P2, P4, P5) and a raw PGM writer.

use std::path::Path;

use super::{BinaryImage, ImagingError};

/// Gray levels strictly below this (on a 0..=255 scale) are ink.
const GRAY_THRESHOLD: u32 = 128;

pub fn load_image(path: impl AsRef<Path>) -> Result<BinaryImage, ImagingError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => ImagingError::MissingFile(path.to_path_buf()),
        _ => ImagingError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    parse_pnm(&bytes)
}

struct Header<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.data.len() {
            let b = self.data[self.pos];
            if b == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn integer(&mut self, what: &str) -> Result<i64, ImagingError> {
        self.skip_ws_and_comments();
        let start = self.pos;
        if self.pos < self.data.len() && self.data[self.pos] == b'-' {
            self.pos += 1;
        }
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .ok()
            .and_then(|s| s.parse::<i64>().ok())
            .ok_or_else(|| ImagingError::MalformedHeader(format!("expected {what}")))
    }

    fn dimension(&mut self, what: &str) -> Result<usize, ImagingError> {
        let v = self.integer(what)?;
        if v <= 0 {
            return Err(ImagingError::MalformedHeader(format!(
                "{what} must be positive, got {v}"
            )));
        }
        usize::try_from(v).map_err(|_| ImagingError::MalformedHeader(format!("{what} too large")))
    }
}

pub fn parse_pnm(bytes: &[u8]) -> Result<BinaryImage, ImagingError> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(ImagingError::UnsupportedFormat(
            "missing netpbm magic".into(),
        ));
    }
    let kind = bytes[1];
    if !matches!(kind, b'1' | b'2' | b'4' | b'5') {
        return Err(ImagingError::UnsupportedFormat(format!(
            "magic P{}",
            char::from(kind)
        )));
    }
    let mut hdr = Header {
        data: bytes,
        pos: 2,
    };
    let width = hdr.dimension("width")?;
    let height = hdr.dimension("height")?;
    let maxval = if matches!(kind, b'2' | b'5') {
        let m = hdr.dimension("maxval")?;
        if m > 65535 {
            return Err(ImagingError::MalformedHeader(format!(
                "maxval {m} exceeds 65535"
            )));
        }
        m as u32
    } else {
        1
    };
    let n = width
        .checked_mul(height)
        .ok_or_else(|| ImagingError::MalformedHeader("dimensions overflow".into()))?;

    let pixels = match kind {
        b'1' => {
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                hdr.skip_ws_and_comments();
                match bytes.get(hdr.pos) {
                    Some(b'0') => out.push(false),
                    Some(b'1') => out.push(true),
                    Some(&b) => {
                        return Err(ImagingError::MalformedData(format!(
                            "unexpected byte {b:#04x} in plain bitmap"
                        )))
                    }
                    None => {
                        return Err(ImagingError::MalformedData("truncated plain bitmap".into()))
                    }
                }
                hdr.pos += 1;
            }
            out
        }
        b'2' => {
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                let v = hdr
                    .integer("gray value")
                    .map_err(|_| ImagingError::MalformedData("truncated plain graymap".into()))?;
                if v < 0 || v as u32 > maxval {
                    return Err(ImagingError::MalformedData(format!(
                        "gray value {v} out of range"
                    )));
                }
                out.push(is_ink(v as u32, maxval));
            }
            out
        }
        b'4' => {
            let data = raw_payload(bytes, hdr.pos)?;
            let stride = width.div_ceil(8);
            if data.len() < stride * height {
                return Err(ImagingError::MalformedData("truncated raw bitmap".into()));
            }
            let mut out = Vec::with_capacity(n);
            for r in 0..height {
                let row = &data[r * stride..(r + 1) * stride];
                for c in 0..width {
                    out.push(row[c / 8] & (0x80 >> (c % 8)) != 0);
                }
            }
            out
        }
        _ => {
            let data = raw_payload(bytes, hdr.pos)?;
            let wide = maxval > 255;
            let need = if wide { 2 * n } else { n };
            if data.len() < need {
                return Err(ImagingError::MalformedData("truncated raw graymap".into()));
            }
            (0..n)
                .map(|i| {
                    let v = if wide {
                        u32::from(u16::from_be_bytes([data[2 * i], data[2 * i + 1]]))
                    } else {
                        u32::from(data[i])
                    };
                    is_ink(v, maxval)
                })
                .collect()
        }
    };
    BinaryImage::new(width, height, pixels)
}

/// Raw formats have exactly one whitespace byte between header and payload.
fn raw_payload(bytes: &[u8], pos: usize) -> Result<&[u8], ImagingError> {
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => Ok(&bytes[pos + 1..]),
        _ => Err(ImagingError::MalformedHeader(
            "missing separator before raster".into(),
        )),
    }
}

fn is_ink(value: u32, maxval: u32) -> bool {
    // rescale to 0..=255 before thresholding
    let scaled = (u64::from(value) * 255 + u64::from(maxval) / 2) / u64::from(maxval);
    (scaled as u32) < GRAY_THRESHOLD
}

/// Encodes as raw 8-bit PGM, ink black (0) on white (255).
pub fn write_pgm_bytes(img: &BinaryImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.pixels().iter().map(|&p| if p { 0u8 } else { 255u8 }));
    out
}

pub fn write_pgm(img: &BinaryImage, path: impl AsRef<Path>) -> std::io::Result<()> {
    std::fs::write(path, write_pgm_bytes(img))
}
