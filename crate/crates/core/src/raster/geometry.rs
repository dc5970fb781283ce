//! Skew estimation, rotation and slant correction of binary line images.

use super::RasterImage;
use crate::error::{Error, Result};

/// Baseline skew fitted by least squares through the bottom-most ink pixel
/// of every inked column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewEstimate {
    /// Degrees; positive means the baseline descends to the right in image
    /// coordinates (y grows downwards).
    pub delta: f64,
    /// Number of columns used in the regression.
    pub support: usize,
}

pub fn estimate_skew(img: &RasterImage) -> Result<SkewEstimate> {
    img.require_binary()?;
    let points: Vec<(f64, f64)> = (0..img.width())
        .filter_map(|x| {
            (0..img.height()).rev().find(|&y| img.is_ink(x, y)).map(|y| (x as f64, y as f64))
        })
        .collect();
    if points.len() < 2 {
        return Err(Error::InsufficientInk);
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let delta = slope.atan().to_degrees().clamp(-45.0, 45.0);
    Ok(SkewEstimate { delta, support: points.len() })
}

/// Rotates by `degrees` about the image centre (positive turns a
/// horizontal line into one descending to the right). The canvas grows to
/// hold the whole rotated frame, centred; sampling is nearest neighbour.
pub fn rotate(img: &RasterImage, degrees: f64) -> RasterImage {
    if degrees == 0.0 || img.is_empty() {
        return img.clone();
    }
    let (s, c) = degrees.to_radians().sin_cos();
    let (w, h) = (img.width() as f64, img.height() as f64);
    let new_w = (w * c.abs() + h * s.abs()).ceil() as usize;
    let new_h = (w * s.abs() + h * c.abs()).ceil() as usize;
    let (cx, cy) = (w / 2.0, h / 2.0);
    let (ncx, ncy) = (new_w as f64 / 2.0, new_h as f64 / 2.0);
    let mut out = RasterImage::new_binary(new_w, new_h);
    for y in 0..new_h {
        for x in 0..new_w {
            let dx = x as f64 + 0.5 - ncx;
            let dy = y as f64 + 0.5 - ncy;
            // inverse rotation back into the source frame
            let sx = cx + dx * c + dy * s;
            let sy = cy - dx * s + dy * c;
            let (ix, iy) = (sx.floor() as isize, sy.floor() as isize);
            if img.get_or_zero(ix, iy) != 0 {
                out.set(x, y, 1);
            }
        }
    }
    out
}

/// Undoes a skew of `delta` degrees by rotating through `-delta`.
pub fn deskew(img: &RasterImage, delta: f64) -> Result<RasterImage> {
    img.require_binary()?;
    if delta.abs() > 45.0 {
        return Err(Error::InvalidInput(format!("skew {delta} outside ±45°")));
    }
    Ok(rotate(img, -delta))
}

/// Horizontal shear: row `y` shifts by `round((cy - y) · tan θ)` so positive
/// angles lean strokes to the right. Every ink pixel is kept; the canvas
/// widens just enough to hold the result.
pub fn shear(img: &RasterImage, degrees: f64) -> RasterImage {
    if degrees == 0.0 || img.is_empty() {
        return img.clone();
    }
    let t = degrees.to_radians().tan();
    let cy = (img.height() as f64 - 1.0) / 2.0;
    let shifts: Vec<isize> =
        (0..img.height()).map(|y| ((cy - y as f64) * t).round() as isize).collect();
    let min = *shifts.iter().min().unwrap();
    let max = *shifts.iter().max().unwrap();
    let width = img.width() + (max - min) as usize;
    let mut out = RasterImage::new_binary(width, img.height());
    for (y, &sh) in shifts.iter().enumerate() {
        for x in 0..img.width() {
            if img.is_ink(x, y) {
                out.set((x as isize + sh - min) as usize, y, 1);
            }
        }
    }
    out
}

/// Sum of squared column counts after shearing by `degrees`; proportional
/// to the vertical-projection variance since shear preserves ink count.
fn projection_energy(img: &RasterImage, degrees: f64) -> u64 {
    let t = degrees.to_radians().tan();
    let cy = (img.height() as f64 - 1.0) / 2.0;
    let pad = img.height() as isize + 1;
    let mut cols = vec![0u64; img.width() + 2 * pad as usize];
    for y in 0..img.height() {
        let sh = ((cy - y as f64) * t).round() as isize;
        for x in 0..img.width() {
            if img.is_ink(x, y) {
                cols[(x as isize + sh + pad) as usize] += 1;
            }
        }
    }
    cols.iter().map(|&c| c * c).sum()
}

/// Shear angle in `[-45, 45]` (1° grid) maximising vertical-projection
/// variance. Scans outward from 0 so ties favour the smallest correction.
pub fn slant_angle(img: &RasterImage) -> i32 {
    let mut best = (0i32, projection_energy(img, 0.0));
    for mag in 1..=45 {
        for theta in [-mag, mag] {
            let e = projection_energy(img, theta as f64);
            if e > best.1 {
                best = (theta, e);
            }
        }
    }
    best.0
}

/// Slant correction by shear search. Blank images come back unchanged.
pub fn deslant(img: &RasterImage) -> Result<RasterImage> {
    img.require_binary()?;
    if img.ink_count() == 0 {
        return Ok(img.clone());
    }
    Ok(shear(img, slant_angle(img) as f64))
}
