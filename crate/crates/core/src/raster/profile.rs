use super::RasterImage;

/// Column and row statistics of a binary image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileSet {
    /// Ink pixels per column.
    pub vertical_projection: Vec<usize>,
    /// Ink pixels per row.
    pub horizontal_projection: Vec<usize>,
    /// Top-most ink row per column, -1 for empty columns.
    pub upper_profile: Vec<isize>,
    /// Bottom-most ink row per column, -1 for empty columns.
    pub lower_profile: Vec<isize>,
    /// Background-to-ink transitions per column, scanning downwards and
    /// counting an ink first pixel as one transition.
    pub crossings: Vec<usize>,
}

pub fn profiles(img: &RasterImage) -> ProfileSet {
    let (w, h) = (img.width(), img.height());
    let mut ps = ProfileSet {
        vertical_projection: vec![0; w],
        horizontal_projection: vec![0; h],
        upper_profile: vec![-1; w],
        lower_profile: vec![-1; w],
        crossings: vec![0; w],
    };
    for y in 0..h {
        for x in 0..w {
            if !img.is_ink(x, y) {
                continue;
            }
            ps.vertical_projection[x] += 1;
            ps.horizontal_projection[y] += 1;
            if ps.upper_profile[x] < 0 {
                ps.upper_profile[x] = y as isize;
            }
            ps.lower_profile[x] = y as isize;
            if y == 0 || !img.is_ink(x, y - 1) {
                ps.crossings[x] += 1;
            }
        }
    }
    ps
}
