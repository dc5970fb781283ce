use super::phog::{GradientField, PhogParams};
use super::sequence::{FeatureSequence, Provenance};
use super::window::WindowSpec;
use crate::error::{Error, Result};
use crate::raster::{bottom_reservoirs, RasterImage};
use crate::scalar::Scalar;

/// Which channels make up each frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureMode {
    /// PHOG over ink.
    Fg,
    /// PHOG over the bottom-reservoir mask.
    Bg,
    /// Both, ink first.
    FgBg,
}

impl FeatureMode {
    pub fn dim(&self, p: &PhogParams) -> usize {
        match self {
            FeatureMode::Fg | FeatureMode::Bg => p.dim(),
            FeatureMode::FgBg => 2 * p.dim(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FeatureMode::Fg => "fg",
            FeatureMode::Bg => "bg",
            FeatureMode::FgBg => "fg+bg",
        }
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fg" => Ok(FeatureMode::Fg),
            "bg" => Ok(FeatureMode::Bg),
            "fg+bg" | "fgbg" => Ok(FeatureMode::FgBg),
            _ => Err(Error::InvalidInput(format!("unknown feature mode {s:?}"))),
        }
    }
}

/// Binary image whose ink is exactly the union of the bottom reservoirs.
pub fn background_mask(img: &RasterImage) -> RasterImage {
    let mut mask = RasterImage::new_binary(img.width(), img.height());
    for r in bottom_reservoirs(img) {
        for &(y, x) in &r.pixels {
            mask.set(x, y, 1);
        }
    }
    mask
}

/// Scale factor from original line columns to normalised frame columns.
pub fn frame_scale(img_height: usize, spec: &WindowSpec) -> f64 {
    spec.win_height as f64 / img_height as f64
}

/// Sliding-window features from an ink layer and a matching background
/// layer (same size). Both are height-normalised with the same mapping.
pub fn extract_from_layers<T: Scalar>(
    ink: &RasterImage,
    background: &RasterImage,
    spec: &WindowSpec,
    p: &PhogParams,
    mode: FeatureMode,
) -> Result<FeatureSequence<T>> {
    spec.validate()?;
    if ink.is_empty() {
        return Err(Error::EmptyImage);
    }
    if (ink.width(), ink.height()) != (background.width(), background.height()) {
        return Err(Error::InvalidInput("ink and background layers differ in size".into()));
    }
    let fg_img = ink.rescale_to_height(spec.win_height);
    let bg_img = background.rescale_to_height(spec.win_height);
    let fg = GradientField::<T>::new(&fg_img, p.bins);
    let bg = GradientField::<T>::new(&bg_img, p.bins);
    let provenance = match mode {
        FeatureMode::Fg => Provenance::Foreground,
        FeatureMode::Bg => Provenance::Background,
        FeatureMode::FgBg => Provenance::Concatenated,
    };
    let mut seq = FeatureSequence::new(mode.dim(p), provenance);
    let mut frame = Vec::with_capacity(mode.dim(p));
    for x in spec.offsets(fg_img.width()) {
        frame.clear();
        let region = |f: &GradientField<T>| f.phog_region(x as isize, 0, spec.win_width, spec.win_height, p.levels);
        if mode != FeatureMode::Bg {
            frame.extend(region(&fg));
        }
        if mode != FeatureMode::Fg {
            frame.extend(region(&bg));
        }
        seq.push(&frame)?;
    }
    Ok(seq)
}

/// Sliding-window PHOG features of a whole line.
pub fn extract_line_features<T: Scalar>(
    img: &RasterImage,
    spec: &WindowSpec,
    p: &PhogParams,
    mode: FeatureMode,
) -> Result<FeatureSequence<T>> {
    img.require_binary()?;
    if img.is_empty() {
        return Err(Error::EmptyImage);
    }
    let mask = if mode == FeatureMode::Fg {
        RasterImage::new_binary(img.width(), img.height())
    } else {
        background_mask(img)
    };
    extract_from_layers(img, &mask, spec, p, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::frame_windows;

    fn arch_line() -> RasterImage {
        // three arches hanging from a headline
        let mut rows = vec![String::new(); 40];
        for (y, row) in rows.iter_mut().enumerate() {
            for x in 0..60 {
                let c = match y {
                    5..=7 if (2..58).contains(&x) => '#',
                    8..=34 if x % 18 == 3 || x % 18 == 14 => '#',
                    _ => '.',
                };
                row.push(c);
            }
        }
        let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
        RasterImage::from_ascii(&refs)
    }

    #[test]
    fn concatenated_dimension_at_defaults() {
        let img = arch_line();
        let spec = WindowSpec::default();
        let p = PhogParams::default();
        for (mode, dim) in [(FeatureMode::Fg, 168), (FeatureMode::Bg, 168), (FeatureMode::FgBg, 336)] {
            let seq: FeatureSequence<f64> = extract_line_features(&img, &spec, &p, mode).unwrap();
            assert_eq!(seq.dim(), dim);
            assert_eq!(seq.len(), frame_windows(&img, &spec).unwrap().len());
        }
    }

    #[test]
    fn reservoir_free_line_has_zero_background_half() {
        let mut img = RasterImage::new_binary(50, 40);
        for x in 5..45 {
            for y in 18..22 {
                img.set(x, y, 1);
            }
        }
        let seq: FeatureSequence<f64> =
            extract_line_features(&img, &WindowSpec::default(), &PhogParams::default(), FeatureMode::FgBg).unwrap();
        for f in seq.frames() {
            assert!(f[168..].iter().all(|&v| v == 0.0));
        }
        assert!(seq.frames().any(|f| f[..168].iter().any(|&v| v > 0.0)));
    }

    #[test]
    fn background_mask_is_the_cavities() {
        let arch = RasterImage::from_ascii(&[
            "........",
            ".######.",
            ".#....#.",
            ".#....#.",
            "........",
        ]);
        let mask = background_mask(&arch);
        assert_eq!(mask.ink_count(), 8);
        for y in 0..arch.height() {
            for x in 0..arch.width() {
                assert!(!(mask.is_ink(x, y) && arch.is_ink(x, y)));
            }
        }
        let img = arch_line();
        let m = background_mask(&img);
        assert!(m.ink_count() > 0);
        assert!(m.pixels().iter().zip(img.pixels()).all(|(&a, &b)| a & b == 0));
        assert_eq!(background_mask(&RasterImage::new_binary(7, 7)).ink_count(), 0);
    }

    #[test]
    fn empty_image_is_rejected() {
        let r: Result<FeatureSequence<f64>> = extract_line_features(
            &RasterImage::new_binary(0, 5),
            &WindowSpec::default(),
            &PhogParams::default(),
            FeatureMode::Fg,
        );
        assert!(matches!(r, Err(Error::EmptyImage)));
    }
}
