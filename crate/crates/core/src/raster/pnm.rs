//! Netpbm readers and writers: P5 (grey, maxval 255) and P4 (packed bits,
//! 1 = black = ink).

use std::fs;
use std::path::Path;

use super::{Depth, RasterImage};
use crate::error::{Error, Result};

/// Encodes a binary image as raw PBM (P4).
pub fn encode_pbm(img: &RasterImage) -> Result<Vec<u8>> {
    img.require_binary()?;
    let mut out = format!("P4\n{} {}\n", img.width(), img.height()).into_bytes();
    let row_bytes = img.width().div_ceil(8);
    for y in 0..img.height() {
        let mut packed = vec![0u8; row_bytes];
        for (x, &p) in img.row(y).iter().enumerate() {
            if p != 0 {
                packed[x / 8] |= 0x80 >> (x % 8);
            }
        }
        out.extend_from_slice(&packed);
    }
    Ok(out)
}

/// Encodes a grey image as raw PGM (P5, maxval 255).
pub fn encode_pgm(img: &RasterImage) -> Result<Vec<u8>> {
    if img.depth() != Depth::Gray8 {
        return Err(Error::WrongDepth { expected: "gray8" });
    }
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    Ok(out)
}

struct HeaderReader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl HeaderReader<'_> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.data.len() {
            let c = self.data[self.pos];
            if c == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&[u8]> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format("netpbm", "truncated header"));
        }
        Ok(&self.data[start..self.pos])
    }

    fn number(&mut self) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format("netpbm", "bad header number"))
    }
}

/// Decodes P4 or P5 data. P5 input must have maxval 255.
pub fn decode_pnm(data: &[u8]) -> Result<RasterImage> {
    let mut hdr = HeaderReader { data, pos: 0 };
    let magic = hdr.token()?.to_vec();
    let width = hdr.number()?;
    let height = hdr.number()?;
    match magic.as_slice() {
        b"P4" => {
            // exactly one whitespace byte separates header and raster
            let start = hdr.pos + 1;
            let row_bytes = width.div_ceil(8);
            let need = row_bytes * height;
            let raster = data
                .get(start..start + need)
                .ok_or_else(|| Error::format("pbm", "truncated raster"))?;
            let mut img = RasterImage::new_binary(width, height);
            for y in 0..height {
                let row = &raster[y * row_bytes..(y + 1) * row_bytes];
                for x in 0..width {
                    if row[x / 8] & (0x80 >> (x % 8)) != 0 {
                        img.set(x, y, 1);
                    }
                }
            }
            Ok(img)
        }
        b"P5" => {
            let maxval = hdr.number()?;
            if maxval != 255 {
                return Err(Error::format("pgm", format!("unsupported maxval {maxval}")));
            }
            let start = hdr.pos + 1;
            let raster = data
                .get(start..start + width * height)
                .ok_or_else(|| Error::format("pgm", "truncated raster"))?;
            RasterImage::from_pixels(width, height, Depth::Gray8, raster.to_vec())
        }
        _ => Err(Error::format("netpbm", "expected P4 or P5 magic")),
    }
}

pub fn read_pnm(path: &Path) -> Result<RasterImage> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&data)
}

/// Writes P4 for binary images and P5 for grey ones.
pub fn write_pnm(path: &Path, img: &RasterImage) -> Result<()> {
    let data = match img.depth() {
        Depth::Binary => encode_pbm(img)?,
        Depth::Gray8 => encode_pgm(img)?,
    };
    fs::write(path, data).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pbm_bit_layout_is_msb_first_and_row_padded() {
        let img = RasterImage::from_ascii(&["#........#", ".#........"]);
        let bytes = encode_pbm(&img).unwrap();
        let header = b"P4\n10 2\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0x80, 0x40, 0x40, 0x00]);
        assert_eq!(decode_pnm(&bytes).unwrap(), img);
    }

    #[test]
    fn pgm_round_trip_and_comment_skipping() {
        let data = b"P5\n# made by hand\n3 1\n255\n\x00\x80\xff";
        let img = decode_pnm(data).unwrap();
        assert_eq!(img.pixels(), &[0, 128, 255]);
        let again = encode_pgm(&img).unwrap();
        assert_eq!(decode_pnm(&again).unwrap(), img);
    }

    #[test]
    fn rejects_truncated_raster() {
        assert!(decode_pnm(b"P4\n16 2\n\x00").is_err());
        assert!(decode_pnm(b"P5\n2 2\n65535\n\x00\x00").is_err());
    }
}
