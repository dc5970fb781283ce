use crate::error::{Error, Result};
use crate::features::{FeatureSequence, Provenance};
use crate::scalar::Scalar;

/// Sakoe-Chiba band radius; `None` leaves the warping unconstrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DtwParams {
    pub band_radius: Option<usize>,
}

/// Accumulated cost of the best warping path and that path's length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtwResult<T> {
    pub cost: T,
    pub path_len: usize,
}

impl<T: Scalar> DtwResult<T> {
    pub fn normalized(&self) -> T {
        self.cost / T::from_count(self.path_len)
    }
}

/// Dynamic time warping with unit steps `(-1,0)`, `(0,-1)`, `(-1,-1)` and a
/// per-cell cost equal to the L1 distance between frames. Among equal-cost
/// paths the shorter one is reported.
pub fn dtw_distance<T: Scalar>(a: &FeatureSequence<T>, b: &FeatureSequence<T>, p: &DtwParams) -> Result<DtwResult<T>> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return Err(Error::InvalidInput("DTW needs non-empty sequences".into()));
    }
    let r = p.band_radius.unwrap_or(n.max(m));
    if n.abs_diff(m) > r {
        return Err(Error::BandTooNarrow { radius: r, len_a: n, len_b: m });
    }
    let inf = (T::infinity(), usize::MAX);
    let mut prev = vec![inf; m + 1];
    let mut cur = vec![inf; m + 1];
    prev[0] = (T::zero(), 0);
    let better = |x: (T, usize), y: (T, usize)| if y.0 < x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x };
    for i in 1..=n {
        cur.fill(inf);
        let lo = i.saturating_sub(r).max(1);
        let hi = (i + r).min(m);
        let fa = a.frame(i - 1);
        for j in lo..=hi {
            let fb = b.frame(j - 1);
            let d: T = fa.iter().zip(fb).map(|(&x, &y)| (x - y).abs()).sum();
            let best = better(better(prev[j - 1], prev[j]), cur[j - 1]);
            if best.0.is_finite() {
                cur[j] = (best.0 + d, best.1 + 1);
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let (cost, path_len) = prev[m];
    Ok(DtwResult { cost, path_len })
}

/// Packs the four column profiles of a word into one multi-channel sequence.
pub fn profile_sequence<T: Scalar>(profiles: &[Vec<T>; 4]) -> Result<FeatureSequence<T>> {
    let n = profiles[0].len();
    if profiles.iter().any(|p| p.len() != n) {
        return Err(Error::InvalidInput("profile channels differ in length".into()));
    }
    let frames: Vec<Vec<T>> = (0..n).map(|i| profiles.iter().map(|p| p[i]).collect()).collect();
    let mut seq = FeatureSequence::new(4, Provenance::Foreground);
    for f in &frames {
        seq.push(f)?;
    }
    Ok(seq)
}

/// Candidates ordered by path-normalised DTW distance to `query`, nearest
/// first; ties keep candidate id order. The band is widened where needed so
/// every pair stays comparable.
pub fn dtw_baseline_rank<T: Scalar>(
    query: &FeatureSequence<T>,
    candidates: &[(String, FeatureSequence<T>)],
    band_radius: Option<usize>,
) -> Result<Vec<(String, f64)>> {
    let mut out = candidates
        .iter()
        .map(|(id, c)| {
            let band = band_radius.map(|r| r.max(query.len().abs_diff(c.len())));
            let d = dtw_distance(query, c, &DtwParams { band_radius: band })?;
            Ok((id.clone(), d.normalized().as_f64()))
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|x, y| x.1.total_cmp(&y.1).then_with(|| x.0.cmp(&y.0)));
    Ok(out)
}
