use super::{Depth, RasterImage};

/// Otsu threshold of a grey image: the `t` maximising between-class
/// variance when class 0 is `≤ t`. Ties resolve to the lowest `t`.
/// Returns `None` when no threshold separates two non-empty classes with
/// positive variance (e.g. a constant image).
pub fn otsu_threshold(img: &RasterImage) -> Option<u8> {
    let mut hist = [0u64; 256];
    for &p in img.pixels() {
        hist[p as usize] += 1;
    }
    let total: u64 = hist.iter().sum();
    let total_sum: f64 = hist.iter().enumerate().map(|(v, &c)| v as f64 * c as f64).sum();

    let mut best: Option<(u8, f64)> = None;
    let mut n0 = 0u64;
    let mut s0 = 0f64;
    for t in 0..255usize {
        n0 += hist[t];
        s0 += t as f64 * hist[t] as f64;
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let w0 = n0 as f64 / total as f64;
        let w1 = n1 as f64 / total as f64;
        let m0 = s0 / n0 as f64;
        let m1 = (total_sum - s0) / n1 as f64;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > 0.0 && best.is_none_or(|(_, b)| between > b) {
            best = Some((t as u8, between));
        }
    }
    best.map(|(t, _)| t)
}

/// Global Otsu binarisation. Pixels at or below the threshold become ink.
///
/// Binary input is returned unchanged; a constant image becomes all
/// background.
pub fn binarize(img: &RasterImage) -> RasterImage {
    if img.depth() == Depth::Binary {
        return img.clone();
    }
    let mut out = RasterImage::new_binary(img.width(), img.height());
    if let Some(t) = otsu_threshold(img) {
        let pixels: Vec<u8> = img.pixels().iter().map(|&p| u8::from(p <= t)).collect();
        out = RasterImage::from_pixels(img.width(), img.height(), Depth::Binary, pixels)
            .expect("sizes match");
    }
    out
}

/// Renders a binary image as grey: ink black (0), background white (255).
pub fn to_gray(img: &RasterImage) -> RasterImage {
    let pixels = img.pixels().iter().map(|&p| if p != 0 { 0 } else { 255 }).collect();
    RasterImage::from_pixels(img.width(), img.height(), Depth::Gray8, pixels).expect("sizes match")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray(w: usize, h: usize, px: Vec<u8>) -> RasterImage {
        RasterImage::from_pixels(w, h, Depth::Gray8, px).unwrap()
    }

    /// Exhaustive scan of every threshold, straight from the definition.
    fn brute_otsu(px: &[u8]) -> Option<u8> {
        let mut best = None;
        let mut best_v = 0.0;
        for t in 0..=255u16 {
            let (lo, hi): (Vec<f64>, Vec<f64>) = (
                px.iter().filter(|&&p| p as u16 <= t).map(|&p| p as f64).collect(),
                px.iter().filter(|&&p| p as u16 > t).map(|&p| p as f64).collect(),
            );
            if lo.is_empty() || hi.is_empty() {
                continue;
            }
            let n = px.len() as f64;
            let m0 = lo.iter().sum::<f64>() / lo.len() as f64;
            let m1 = hi.iter().sum::<f64>() / hi.len() as f64;
            let v = (lo.len() as f64 / n) * (hi.len() as f64 / n) * (m0 - m1).powi(2);
            if v > best_v * (1.0 + 1e-12) {
                best_v = v;
                best = Some(t as u8);
            }
        }
        best
    }

    #[test]
    fn constant_image_is_all_background() {
        let out = binarize(&RasterImage::new_gray(7, 3, 128));
        assert_eq!(out.depth(), Depth::Binary);
        assert_eq!(out.ink_count(), 0);
    }

    #[test]
    fn two_level_image_splits_dark_to_ink() {
        let px: Vec<u8> = (0..40).map(|i| if i % 2 == 0 { 10 } else { 200 }).collect();
        let img = gray(8, 5, px.clone());
        assert_eq!(otsu_threshold(&img), Some(10));
        assert_eq!(brute_otsu(&px), Some(10));
        let out = binarize(&img);
        for (o, p) in out.pixels().iter().zip(&px) {
            assert_eq!(*o, u8::from(*p == 10));
        }
    }

    #[test]
    fn already_two_level_input_maps_black_to_ink() {
        let px = vec![0, 255, 255, 0, 0, 255];
        let out = binarize(&gray(3, 2, px.clone()));
        let expected: Vec<u8> = px.iter().map(|&p| 1 - p / 255).collect();
        assert_eq!(out.pixels(), expected.as_slice());
    }

    proptest! {
        #[test]
        fn threshold_matches_exhaustive_scan(px in proptest::collection::vec(any::<u8>(), 1..60)) {
            let img = gray(px.len(), 1, px.clone());
            prop_assert_eq!(otsu_threshold(&img), brute_otsu(&px));
        }

        #[test]
        fn idempotent_on_own_output(px in proptest::collection::vec(any::<u8>(), 1..80)) {
            let once = binarize(&gray(px.len(), 1, px));
            prop_assert_eq!(binarize(&once.clone()), once.clone());
            prop_assert_eq!(binarize(&to_gray(&once)), once);
        }
    }
}
