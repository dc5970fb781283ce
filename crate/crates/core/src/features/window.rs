use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Sliding-window geometry for line framing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub win_height: usize,
    pub win_width: usize,
    pub step: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec { win_height: 40, win_width: 6, step: 3 }
    }
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        if self.win_width == 0 || self.step == 0 || self.step > self.win_width || self.win_height == 0 {
            return Err(Error::InvalidInput(format!("invalid window spec {self:?}")));
        }
        Ok(())
    }

    /// Left edges of the windows over a line `width` pixels wide (after
    /// height normalisation). Always at least one window.
    pub fn offsets(&self, width: usize) -> Vec<usize> {
        if width <= self.win_width {
            return vec![0];
        }
        (0..=(width - self.win_width) / self.step).map(|i| i * self.step).collect()
    }

    /// First pixel column covered by frame `a` in normalised coordinates.
    pub fn frame_start_px(&self, a: usize) -> usize {
        a * self.step
    }

    /// One past the last pixel column covered by frame `b`.
    pub fn frame_end_px(&self, b: usize) -> usize {
        b * self.step + self.win_width
    }
}

/// Rescales `img` to the window height and cuts it into windows; a line
/// narrower than one window yields a single right-padded window.
pub fn frame_windows(img: &RasterImage, spec: &WindowSpec) -> Result<Vec<RasterImage>> {
    spec.validate()?;
    if img.is_empty() {
        return Err(Error::EmptyImage);
    }
    let scaled = img.rescale_to_height(spec.win_height);
    Ok(spec
        .offsets(scaled.width())
        .into_iter()
        .map(|x| scaled.crop(x as isize, 0, spec.win_width, spec.win_height))
        .collect())
}
