use super::RasterImage;

/// Horizontal run-length smoothing: every background run strictly shorter
/// than `t` with ink on both sides becomes ink. Runs touching the left or
/// right border are left alone.
pub fn rlsa_horizontal(img: &RasterImage, t: usize) -> RasterImage {
    let mut out = img.clone();
    if t == 0 {
        return out;
    }
    for y in 0..img.height() {
        let row = img.row(y);
        let mut last_ink: Option<usize> = None;
        for x in 0..row.len() {
            if row[x] == 0 {
                continue;
            }
            if let Some(prev) = last_ink {
                let gap = x - prev - 1;
                if gap > 0 && gap < t {
                    for gx in prev + 1..x {
                        out.set(gx, y, 1);
                    }
                }
            }
            last_ink = Some(x);
        }
    }
    out
}
