use crate::error::{Error, Result};

/// Pixel depth of a [`RasterImage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Depth {
    /// 8-bit intensities, 0 = black.
    Gray8,
    /// Values in {0, 1}, 1 = ink.
    Binary,
}

/// Row-major pixel grid.
///
/// Binary images always use 1 for ink (foreground) and 0 for background,
/// regardless of how they were produced.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: usize,
    height: usize,
    depth: Depth,
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new_binary(width: usize, height: usize) -> Self {
        RasterImage { width, height, depth: Depth::Binary, pixels: vec![0; width * height] }
    }

    pub fn new_gray(width: usize, height: usize, fill: u8) -> Self {
        RasterImage { width, height, depth: Depth::Gray8, pixels: vec![fill; width * height] }
    }

    /// Builds an image from row-major pixels, validating size and depth.
    pub fn from_pixels(width: usize, height: usize, depth: Depth, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch { expected: width * height, got: pixels.len() });
        }
        if depth == Depth::Binary && pixels.iter().any(|&p| p > 1) {
            return Err(Error::InvalidInput("binary image pixels must be 0 or 1".into()));
        }
        Ok(RasterImage { width, height, depth, pixels })
    }

    /// Parses rows of `'#'`/`'1'` (ink) and anything else (background).
    /// Handy for tests and fixtures.
    pub fn from_ascii(rows: &[&str]) -> Self {
        let height = rows.len();
        let width = rows.iter().map(|r| r.chars().count()).max().unwrap_or(0);
        let mut img = RasterImage::new_binary(width, height);
        for (y, row) in rows.iter().enumerate() {
            for (x, c) in row.chars().enumerate() {
                if c == '#' || c == '1' {
                    img.set(x, y, 1);
                }
            }
        }
        img
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn depth(&self) -> Depth {
        self.depth
    }

    #[inline]
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Pixel value, or 0 outside the image.
    #[inline]
    pub fn get_or_zero(&self, x: isize, y: isize) -> u8 {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            0
        } else {
            self.pixels[y as usize * self.width + x as usize]
        }
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    #[inline]
    pub fn is_ink(&self, x: usize, y: usize) -> bool {
        self.pixels[y * self.width + x] != 0
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    pub fn ink_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p != 0).count()
    }

    pub(crate) fn require_binary(&self) -> Result<()> {
        if self.depth == Depth::Binary {
            Ok(())
        } else {
            Err(Error::WrongDepth { expected: "binary" })
        }
    }

    /// Copy of the rectangle `[x0, x0+w) × [y0, y0+h)`; parts outside the
    /// source are background.
    pub fn crop(&self, x0: isize, y0: isize, w: usize, h: usize) -> RasterImage {
        let mut out = RasterImage { width: w, height: h, depth: self.depth, pixels: vec![0; w * h] };
        for y in 0..h {
            for x in 0..w {
                out.pixels[y * w + x] = self.get_or_zero(x0 + x as isize, y0 + y as isize);
            }
        }
        out
    }

    /// Bounding box of ink as `(top, left, bottom, right)`, inclusive.
    pub fn ink_bbox(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bbox: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.is_ink(x, y) {
                    bbox = Some(match bbox {
                        None => (y, x, y, x),
                        Some((t, l, b, r)) => (t.min(y), l.min(x), b.max(y), r.max(x)),
                    });
                }
            }
        }
        bbox
    }

    /// Nearest-neighbour resample to `new_w × new_h`. Sample centres map
    /// as `src = floor((dst + 0.5) · src_len / dst_len)`.
    pub fn resize_nearest(&self, new_w: usize, new_h: usize) -> RasterImage {
        let mut out = RasterImage {
            width: new_w,
            height: new_h,
            depth: self.depth,
            pixels: vec![0; new_w * new_h],
        };
        if self.is_empty() {
            return out;
        }
        let xs: Vec<usize> = (0..new_w)
            .map(|x| (((2 * x + 1) * self.width) / (2 * new_w)).min(self.width - 1))
            .collect();
        for y in 0..new_h {
            let sy = (((2 * y + 1) * self.height) / (2 * new_h)).min(self.height - 1);
            let src = self.row(sy);
            let dst = &mut out.pixels[y * new_w..(y + 1) * new_w];
            for (d, &sx) in dst.iter_mut().zip(&xs) {
                *d = src[sx];
            }
        }
        out
    }

    /// Aspect-preserving nearest-neighbour rescale to the given height.
    pub fn rescale_to_height(&self, target_h: usize) -> RasterImage {
        if self.height == target_h {
            return self.clone();
        }
        let new_w = ((self.width * target_h) as f64 / self.height as f64).round().max(1.0) as usize;
        self.resize_nearest(new_w, target_h)
    }

    /// Pixel-wise union of ink; both images must share dimensions.
    pub fn union(&self, other: &RasterImage) -> Result<RasterImage> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch { expected: self.pixels.len(), got: other.pixels.len() });
        }
        let pixels = self.pixels.iter().zip(&other.pixels).map(|(&a, &b)| (a | b).min(1)).collect();
        Ok(RasterImage { width: self.width, height: self.height, depth: Depth::Binary, pixels })
    }
}
