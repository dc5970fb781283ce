use super::boundaries::{smooth_boundaries, Strip, ZoneBoundaries};
use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Projection-profile baseline mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionMode {
    /// One profile for the whole line.
    Global,
    /// One profile per tenth of the line width.
    Local,
}

/// Middle band from a row projection: the headline is the run of rows around
/// the projection peak; the band ends at the last row before the projection
/// (below its centroid) falls under 20% of the middle-band mean.
fn band_from_projection(proj: &[usize]) -> Option<(usize, usize)> {
    let total: usize = proj.iter().sum();
    if total == 0 {
        return None;
    }
    let peak = proj.iter().copied().max().unwrap();
    let argmax = proj.iter().position(|&p| p == peak).unwrap();
    let half = peak.div_ceil(2);
    let mut upper = argmax;
    while upper > 0 && proj[upper - 1] >= half {
        upper -= 1;
    }
    let centroid = proj.iter().enumerate().map(|(y, &p)| y * p).sum::<usize>() / total;
    let centroid = centroid.max(upper);
    let span = &proj[upper..=centroid];
    let mean = span.iter().sum::<usize>() as f64 / span.len() as f64;
    let last_ink = proj.iter().rposition(|&p| p > 0).unwrap();
    let lower = (centroid + 1..proj.len())
        .find(|&y| (proj[y] as f64) < 0.2 * mean)
        .map_or(last_ink, |y| y - 1);
    Some((upper, lower.max(upper)))
}

fn row_projection(img: &RasterImage, x0: usize, x1: usize) -> Vec<usize> {
    (0..img.height()).map(|y| img.row(y)[x0..x1].iter().filter(|&&p| p != 0).count()).collect()
}

/// Zone boundaries by projection analysis alone.
pub fn projection_zone_baseline(img: &RasterImage, mode: ProjectionMode) -> Result<ZoneBoundaries> {
    img.require_binary()?;
    if img.ink_count() == 0 {
        return Err(Error::EmptyImage);
    }
    let (w, h) = (img.width(), img.height());
    match mode {
        ProjectionMode::Global => {
            let (u, l) = band_from_projection(&row_projection(img, 0, w)).unwrap();
            ZoneBoundaries::constant(w, h, u, l)
        }
        ProjectionMode::Local => {
            let sw = w.div_ceil(10).max(1);
            let strips: Vec<Strip> =
                (0..w.div_ceil(sw)).map(|i| Strip { x_start: i * sw, x_end: ((i + 1) * sw).min(w) }).collect();
            let rows: Vec<Option<(f64, f64)>> = strips
                .iter()
                .map(|s| band_from_projection(&row_projection(img, s.x_start, s.x_end)).map(|(u, l)| (u as f64, l as f64)))
                .collect();
            // interpolation only: no outlier repair in the baseline
            smooth_boundaries(w, h, strips, &rows, usize::MAX / 8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> RasterImage {
        // headline rows 6..=7, stems to row 20, a small tail below
        let mut img = RasterImage::new_binary(60, 28);
        for x in 2..58 {
            img.set(x, 6, 1);
            img.set(x, 7, 1);
        }
        for x in (4..58).step_by(6) {
            for y in 8..=20 {
                img.set(x, y, 1);
                img.set(x + 1, y, 1);
            }
        }
        for y in 21..25 {
            img.set(30, y, 1);
        }
        img
    }

    #[test]
    fn global_finds_headline_and_baseline() {
        let zb = projection_zone_baseline(&line(), ProjectionMode::Global).unwrap();
        assert_eq!((zb.upper(0), zb.lower(0)), (6, 20));
        assert!(projection_zone_baseline(&RasterImage::new_binary(5, 5), ProjectionMode::Global).is_err());
    }

    #[test]
    fn local_uses_tenths() {
        let img = line();
        let zb = projection_zone_baseline(&img, ProjectionMode::Local).unwrap();
        assert_eq!(zb.strips().len(), 10);
        let wide = RasterImage::new_binary(103, 10);
        let mut wide = wide;
        wide.set(50, 5, 1);
        let zb = projection_zone_baseline(&wide, ProjectionMode::Local).unwrap();
        assert!((9..=11).contains(&zb.strips().len()));
    }
}
