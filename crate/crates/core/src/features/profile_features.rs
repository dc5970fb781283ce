use crate::error::{Error, Result};
use crate::raster::{profiles, RasterImage};
use crate::scalar::Scalar;

/// The four column profiles of a word image, each min-max normalised to
/// `[0, 1]`: vertical projection, upper profile, lower profile, crossings.
///
/// Normalisation uses inked columns only; empty columns read 0, and a
/// constant profile normalises to all zeros.
pub fn dtw_profile_features<T: Scalar>(word: &RasterImage) -> Result<[Vec<T>; 4]> {
    word.require_binary()?;
    if word.is_empty() || word.ink_count() == 0 {
        return Err(Error::EmptyImage);
    }
    let ps = profiles(word);
    let inked: Vec<bool> = ps.vertical_projection.iter().map(|&c| c > 0).collect();
    let norm = |raw: Vec<f64>| -> Vec<T> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (v, &k) in raw.iter().zip(&inked) {
            if k {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
        }
        raw.iter()
            .zip(&inked)
            .map(|(&v, &k)| if k && hi > lo { T::lit((v - lo) / (hi - lo)) } else { T::zero() })
            .collect()
    };
    Ok([
        norm(ps.vertical_projection.iter().map(|&v| v as f64).collect()),
        norm(ps.upper_profile.iter().map(|&v| v as f64).collect()),
        norm(ps.lower_profile.iter().map(|&v| v as f64).collect()),
        norm(ps.crossings.iter().map(|&v| v as f64).collect()),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_built_glyph() {
        let img = RasterImage::from_ascii(&[
            "#....",
            "#.#..",
            "#.#..",
            "..#..",
            "#.##.",
        ]);
        let [vp, up, lo, cr]: [Vec<f64>; 4] = dtw_profile_features(&img).unwrap();
        // projections 4,0,4,1,0 over inked columns {0,2,3}: min 1, max 4
        assert_eq!(vp, vec![1.0, 0.0, 1.0, 0.0, 0.0]);
        // upper rows 0,-,1,4: min 0 max 4
        assert_eq!(up, vec![0.0, 0.0, 0.25, 1.0, 0.0]);
        // lower rows 4,-,4,4: constant → zeros
        assert_eq!(lo, vec![0.0; 5]);
        // crossings 2,-,1,1: min 1 max 2
        assert_eq!(cr, vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn constant_projection_and_lengths() {
        let img = RasterImage::from_ascii(&["####", "....", "####"]);
        let f: [Vec<f64>; 4] = dtw_profile_features(&img).unwrap();
        assert!(f.iter().all(|s| s.len() == 4));
        assert!(f[0].iter().all(|&v| v == 0.0));
        assert!(matches!(dtw_profile_features::<f64>(&RasterImage::new_binary(3, 3)), Err(Error::EmptyImage)));
    }
}
