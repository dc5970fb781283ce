use super::boundaries::ZoneBoundaries;
use crate::error::{Error, Result};
use crate::features::background_mask;
use crate::raster::RasterImage;

/// A line split into its three zones. All images keep the line's size.
#[derive(Debug, Clone)]
pub struct ZoneImages {
    pub middle: RasterImage,
    /// Bottom reservoirs of the full line clipped to the middle band.
    pub middle_reservoirs: RasterImage,
    pub upper: RasterImage,
    pub lower: RasterImage,
}

impl ZoneImages {
    /// Rows spanned by the middle band over all columns.
    pub fn band_rows(zb: &ZoneBoundaries) -> (usize, usize) {
        let top = zb.upper_line().iter().copied().min().unwrap_or(0);
        let bottom = zb.lower_line().iter().copied().max().unwrap_or(0);
        (top, bottom)
    }

    /// Middle ink and reservoirs cropped to the rows the band spans.
    pub fn middle_layers(&self, zb: &ZoneBoundaries) -> (RasterImage, RasterImage) {
        let (top, bottom) = Self::band_rows(zb);
        let (w, h) = (self.middle.width(), bottom - top + 1);
        (self.middle.crop(0, top as isize, w, h), self.middle_reservoirs.crop(0, top as isize, w, h))
    }
}

/// Splits `img` by `zb`. Reservoirs are found on the whole line first, so
/// cavities closed outside the band still contribute their middle part.
pub fn extract_middle_zone(img: &RasterImage, zb: &ZoneBoundaries) -> Result<ZoneImages> {
    img.require_binary()?;
    if (img.width(), img.height()) != (zb.width(), zb.height()) {
        return Err(Error::InvalidInput("zone boundaries do not match the line size".into()));
    }
    let (w, h) = (img.width(), img.height());
    let res = background_mask(img);
    let mut out = ZoneImages {
        middle: RasterImage::new_binary(w, h),
        middle_reservoirs: RasterImage::new_binary(w, h),
        upper: RasterImage::new_binary(w, h),
        lower: RasterImage::new_binary(w, h),
    };
    for x in 0..w {
        let (u, l) = (zb.upper(x), zb.lower(x));
        for y in 0..h {
            let inside = (u..=l).contains(&y);
            if img.is_ink(x, y) {
                let target = if y < u {
                    &mut out.upper
                } else if y > l {
                    &mut out.lower
                } else {
                    &mut out.middle
                };
                target.set(x, y, 1);
            }
            if inside && res.is_ink(x, y) {
                out.middle_reservoirs.set(x, y, 1);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_band_keeps_everything() {
        let img = RasterImage::from_ascii(&["#..#", ".##.", "#..#"]);
        let zb = ZoneBoundaries::constant(4, 3, 0, 2).unwrap();
        let z = extract_middle_zone(&img, &zb).unwrap();
        assert_eq!(z.middle, img);
        assert_eq!(z.upper.ink_count() + z.lower.ink_count(), 0);
    }

    #[test]
    fn clipped_reservoirs_shrink() {
        let img = RasterImage::from_ascii(&[
            "........",
            ".######.",
            ".#....#.",
            ".#....#.",
            ".#....#.",
            "........",
        ]);
        let zb = ZoneBoundaries::constant(8, 6, 0, 2).unwrap();
        let z = extract_middle_zone(&img, &zb).unwrap();
        assert_eq!(z.middle_reservoirs.ink_count(), 4);
        assert!(z.middle_reservoirs.ink_count() <= background_mask(&img).ink_count());
        let (m, r) = z.middle_layers(&zb);
        assert_eq!((m.height(), r.height()), (3, 3));
    }

    proptest! {
        #[test]
        fn bands_partition_ink(bits in proptest::collection::vec(any::<bool>(), 8 * 10), rows in proptest::collection::vec((0usize..10, 0usize..10), 8)) {
            let mut img = RasterImage::new_binary(8, 10);
            for (i, &b) in bits.iter().enumerate() {
                if b { img.set(i % 8, i / 8, 1); }
            }
            let zb = ZoneBoundaries::from_columns(10, rows.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect()).unwrap();
            let z = extract_middle_zone(&img, &zb).unwrap();
            for y in 0..10 {
                for x in 0..8 {
                    let n = [&z.middle, &z.upper, &z.lower].iter().filter(|m| m.is_ink(x, y)).count();
                    prop_assert_eq!(n, usize::from(img.is_ink(x, y)));
                }
            }
        }
    }
}
