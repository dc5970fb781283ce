//! Pyramid histograms of oriented gradients and the single-level local
//! gradient histogram.

use crate::raster::RasterImage;
use crate::scalar::Scalar;

/// Pyramid depth and orientation binning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhogParams {
    /// Highest pyramid level; level `i` splits the window into `2^i × 2^i`.
    pub levels: usize,
    /// Orientation bins over `[0°, 360°)`.
    pub bins: usize,
}

impl Default for PhogParams {
    fn default() -> Self {
        PhogParams { levels: 2, bins: 8 }
    }
}

impl PhogParams {
    pub fn dim(&self) -> usize {
        self.bins * (0..=self.levels).map(|i| 1usize << (2 * i)).sum::<usize>()
    }
}

/// Fixed layout of the local gradient histogram: 4 × 4 cells, 8 bins.
pub const LGH_GRID: usize = 4;
pub const LGH_BINS: usize = 8;
pub const LGH_DIM: usize = LGH_GRID * LGH_GRID * LGH_BINS;

/// Orientation bin of a gradient; angles measured by `atan2(gy, gx)` in
/// image coordinates, mapped to `[0, 360)`.
#[inline]
pub fn orientation_bin(gx: f64, gy: f64, bins: usize) -> usize {
    let mut deg = gy.atan2(gx).to_degrees();
    if deg < 0.0 {
        deg += 360.0;
    }
    ((deg * bins as f64 / 360.0) as usize).min(bins - 1)
}

/// 3×3 Sobel response at `(x, y)` of the zero-extended image.
#[inline]
pub fn sobel_at(img: &RasterImage, x: isize, y: isize) -> (f64, f64) {
    let p = |dx: isize, dy: isize| img.get_or_zero(x + dx, y + dy) as f64;
    let gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
    let gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
    (gx, gy)
}

/// Sobel magnitude and orientation bin for every pixel of an image, treating
/// everything outside the image as background.
pub struct GradientField<'a, T> {
    img: &'a RasterImage,
    bins: usize,
    magnitude: Vec<T>,
    bin: Vec<u8>,
}

impl<'a, T: Scalar> GradientField<'a, T> {
    pub fn new(img: &'a RasterImage, bins: usize) -> Self {
        let n = img.width() * img.height();
        let mut magnitude = vec![T::zero(); n];
        let mut bin = vec![0u8; n];
        for y in 0..img.height() {
            for x in 0..img.width() {
                let (gx, gy) = sobel_at(img, x as isize, y as isize);
                if gx != 0.0 || gy != 0.0 {
                    let i = y * img.width() + x;
                    magnitude[i] = T::lit((gx * gx + gy * gy).sqrt());
                    bin[i] = orientation_bin(gx, gy, bins) as u8;
                }
            }
        }
        GradientField { img, bins, magnitude, bin }
    }

    /// `(bin, magnitude)` at any integer position; positions outside the
    /// image are evaluated on the zero extension.
    #[inline]
    fn at(&self, x: isize, y: isize) -> (usize, T) {
        let (w, h) = (self.img.width() as isize, self.img.height() as isize);
        if x >= 0 && y >= 0 && x < w && y < h {
            let i = (y * w + x) as usize;
            (self.bin[i] as usize, self.magnitude[i])
        } else {
            let (gx, gy) = sobel_at(self.img, x, y);
            if gx == 0.0 && gy == 0.0 {
                (0, T::zero())
            } else {
                (orientation_bin(gx, gy, self.bins), T::lit((gx * gx + gy * gy).sqrt()))
            }
        }
    }

    /// Accumulates a `grid × grid` orientation histogram over the region
    /// `[x0, x0+w) × [y0, y0+h)` into `out` (length `grid² · bins`).
    fn grid_histogram(&self, x0: isize, y0: isize, w: usize, h: usize, grid: usize, out: &mut [T]) {
        for dy in 0..h {
            let cy = dy * grid / h;
            for dx in 0..w {
                let (b, m) = self.at(x0 + dx as isize, y0 + dy as isize);
                if m != T::zero() {
                    let cx = dx * grid / w;
                    out[(cy * grid + cx) * self.bins + b] += m;
                }
            }
        }
    }

    /// PHOG of a region: concatenated level histograms, each level block
    /// L1-normalised (all-zero blocks stay zero).
    pub fn phog_region(&self, x0: isize, y0: isize, w: usize, h: usize, levels: usize) -> Vec<T> {
        let p = PhogParams { levels, bins: self.bins };
        let mut out = vec![T::zero(); p.dim()];
        let mut offset = 0;
        for level in 0..=levels {
            let grid = 1usize << level;
            let len = grid * grid * self.bins;
            let block = &mut out[offset..offset + len];
            self.grid_histogram(x0, y0, w, h, grid, block);
            normalize_l1(block);
            offset += len;
        }
        out
    }

    /// Local gradient histogram of a region: 4×4 cells, each cell
    /// L1-normalised.
    pub fn lgh_region(&self, x0: isize, y0: isize, w: usize, h: usize) -> Vec<T> {
        let mut out = vec![T::zero(); LGH_GRID * LGH_GRID * self.bins];
        self.grid_histogram(x0, y0, w, h, LGH_GRID, &mut out);
        for cell in out.chunks_mut(self.bins) {
            normalize_l1(cell);
        }
        out
    }
}

fn normalize_l1<T: Scalar>(v: &mut [T]) {
    let s: T = v.iter().copied().sum();
    if s > T::zero() {
        for x in v.iter_mut() {
            *x /= s;
        }
    }
}

/// PHOG descriptor of a standalone window.
pub fn phog<T: Scalar>(window: &RasterImage, p: &PhogParams) -> Vec<T> {
    GradientField::new(window, p.bins).phog_region(0, 0, window.width(), window.height(), p.levels)
}

/// 128-dimensional local gradient histogram of a standalone window.
pub fn lgh<T: Scalar>(window: &RasterImage) -> Vec<T> {
    GradientField::new(window, LGH_BINS).lgh_region(0, 0, window.width(), window.height())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Direct per-pixel reference: recompute every gradient from scratch and
    /// bin it per level without the shared field.
    fn reference_phog(img: &RasterImage, levels: usize, bins: usize) -> Vec<f64> {
        let (w, h) = (img.width(), img.height());
        let mut out = Vec::new();
        for level in 0..=levels {
            let g = 1usize << level;
            let mut block = vec![0.0; g * g * bins];
            for y in 0..h {
                for x in 0..w {
                    let p = |dx: i64, dy: i64| {
                        let (xx, yy) = (x as i64 + dx, y as i64 + dy);
                        if xx < 0 || yy < 0 || xx >= w as i64 || yy >= h as i64 {
                            0.0
                        } else {
                            img.get(xx as usize, yy as usize) as f64
                        }
                    };
                    let gx = p(1, -1) + 2.0 * p(1, 0) + p(1, 1) - p(-1, -1) - 2.0 * p(-1, 0) - p(-1, 1);
                    let gy = p(-1, 1) + 2.0 * p(0, 1) + p(1, 1) - p(-1, -1) - 2.0 * p(0, -1) - p(1, -1);
                    let m = (gx * gx + gy * gy).sqrt();
                    if m == 0.0 {
                        continue;
                    }
                    let mut a = gy.atan2(gx).to_degrees();
                    if a < 0.0 {
                        a += 360.0;
                    }
                    let b = ((a / (360.0 / bins as f64)).floor() as usize).min(bins - 1);
                    let cx = x * g / w;
                    let cy = y * g / h;
                    block[(cy * g + cx) * bins + b] += m;
                }
            }
            let s: f64 = block.iter().sum();
            if s > 0.0 {
                block.iter_mut().for_each(|v| *v /= s);
            }
            out.extend(block);
        }
        out
    }

    fn random_window(seed: u64, w: usize, h: usize, density: u64) -> RasterImage {
        let mut img = RasterImage::new_binary(w, h);
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407) | 1;
        for y in 0..h {
            for x in 0..w {
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                if s % 100 < density {
                    img.set(x, y, 1);
                }
            }
        }
        img
    }

    #[test]
    fn default_dimension_is_168() {
        assert_eq!(PhogParams::default().dim(), 168);
        let v: Vec<f64> = phog(&RasterImage::new_binary(6, 40), &PhogParams::default());
        assert_eq!(v.len(), 168);
        assert_eq!(LGH_DIM, 128);
        assert_eq!(lgh::<f64>(&RasterImage::new_binary(6, 40)).len(), 128);
    }

    #[test]
    fn blank_window_gives_zero_vectors() {
        let blank = RasterImage::new_binary(6, 40);
        assert!(phog::<f64>(&blank, &PhogParams::default()).iter().all(|&v| v == 0.0));
        assert!(lgh::<f64>(&blank).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn horizontal_edges_land_in_vertical_bins() {
        // a bar spanning the full width: its top edge points down (90°),
        // its bottom edge up (270°)
        let mut img = RasterImage::new_binary(16, 16);
        for y in 6..10 {
            for x in 0..16 {
                img.set(x, y, 1);
            }
        }
        let p = PhogParams::default();
        // keep clear of the image's left and right borders, where the zero
        // extension adds vertical edges
        let field = GradientField::new(&img, 8);
        let v: Vec<f64> = field.phog_region(2, 0, 12, 16, 2);
        // 90° sits at the start of bin 2, 270° at the start of bin 6
        let level0 = &v[..8];
        assert!((level0[2] + level0[6] - 1.0).abs() < 1e-12);
        assert!(level0[2] > 0.0 && level0[6] > 0.0);
        let whole: Vec<f64> = phog(&img, &p);
        let reference = reference_phog(&img, p.levels, p.bins);
        for (a, b) in whole.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-9);
        }
        // a lone step edge puts all of its mass in one of the two bins
        let mut step = RasterImage::new_binary(16, 16);
        for y in 8..16 {
            for x in 0..16 {
                step.set(x, y, 1);
            }
        }
        let region: Vec<f64> = GradientField::new(&step, 8).phog_region(2, 4, 12, 8, 2);
        assert!((region[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lgh_is_phog_level_two_renormalised_per_cell() {
        for seed in 0..20 {
            let img = random_window(seed, 16, 16, 40);
            let p: Vec<f64> = phog(&img, &PhogParams::default());
            let l: Vec<f64> = lgh(&img);
            let level2 = &p[8 + 32..];
            for (cell_p, cell_l) in level2.chunks(8).zip(l.chunks(8)) {
                let s: f64 = cell_p.iter().sum();
                for (a, b) in cell_p.iter().zip(cell_l) {
                    let expect = if s > 0.0 { a / s } else { 0.0 };
                    assert!((expect - b).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn background_padding_does_not_change_region_descriptor() {
        for seed in 0..10 {
            let img = random_window(seed, 6, 40, 35);
            let padded = img.crop(-5, -3, 16, 46);
            let direct: Vec<f64> = phog(&img, &PhogParams::default());
            let via_pad: Vec<f64> =
                GradientField::new(&padded, 8).phog_region(5, 3, 6, 40, 2);
            assert_eq!(direct, via_pad);
        }
    }

    #[test]
    fn fuzzed_windows_are_finite_and_level_normalised() {
        let p = PhogParams::default();
        for seed in 0..1000u64 {
            let img = random_window(seed, 6, 40, seed % 100);
            let v: Vec<f64> = phog(&img, &p);
            assert!(v.iter().all(|x| x.is_finite() && *x >= 0.0));
            let mut off = 0;
            for level in 0..=2 {
                let len = 8usize << (2 * level);
                let s: f64 = v[off..off + len].iter().sum();
                assert!(s == 0.0 || (s - 1.0).abs() < 1e-9);
                off += len;
            }
            assert!(lgh::<f64>(&img).iter().all(|x| x.is_finite()));
        }
    }

    proptest! {
        #[test]
        fn matches_reference(seed in any::<u64>(), w in 1usize..12, h in 1usize..20, d in 0u64..100) {
            let img = random_window(seed, w, h, d);
            let v: Vec<f64> = phog(&img, &PhogParams::default());
            let r = reference_phog(&img, 2, 8);
            for (a, b) in v.iter().zip(&r) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
