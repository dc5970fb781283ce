use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Vertical strip `[x_start, x_end)` of a line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Strip {
    pub x_start: usize,
    pub x_end: usize,
}

impl Strip {
    pub fn centre(&self) -> f64 {
        (self.x_start + self.x_end - 1) as f64 / 2.0
    }
}

/// Upper and lower middle-zone boundaries of a line.
///
/// The middle zone of column `c` is the closed row range
/// `upper[c]..=lower[c]`; rows above belong to the upper zone and rows below
/// to the lower zone. Per-column lines are interpolated linearly between strip
/// centres and held constant beyond the outer strips.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoneBoundaries {
    width: usize,
    height: usize,
    strips: Vec<Strip>,
    strip_rows: Vec<(usize, usize)>,
    upper: Vec<usize>,
    lower: Vec<usize>,
}

impl ZoneBoundaries {
    /// Builds boundaries from per-strip `(upper, lower)` rows.
    pub fn from_strips(width: usize, height: usize, strips: Vec<Strip>, rows: Vec<(usize, usize)>) -> Result<Self> {
        if strips.is_empty() || strips.len() != rows.len() || height == 0 {
            return Err(Error::InvalidInput("boundaries need one row pair per strip".into()));
        }
        if strips.windows(2).any(|w| w[0].x_start >= w[1].x_start) || strips.iter().any(|s| s.x_end <= s.x_start) {
            return Err(Error::InvalidInput("strips must be non-empty and ordered".into()));
        }
        let clamp = |(u, l): (usize, usize)| {
            let l = l.min(height - 1);
            (u.min(l), l)
        };
        let strip_rows: Vec<(usize, usize)> = rows.into_iter().map(clamp).collect();
        let centres: Vec<f64> = strips.iter().map(Strip::centre).collect();
        let interp = |vals: &[f64], x: f64| -> f64 {
            let i = centres.partition_point(|&c| c <= x);
            if i == 0 {
                vals[0]
            } else if i == centres.len() {
                vals[i - 1]
            } else {
                let (c0, c1) = (centres[i - 1], centres[i]);
                vals[i - 1] + (vals[i] - vals[i - 1]) * (x - c0) / (c1 - c0)
            }
        };
        let us: Vec<f64> = strip_rows.iter().map(|r| r.0 as f64).collect();
        let ls: Vec<f64> = strip_rows.iter().map(|r| r.1 as f64).collect();
        let mut upper = Vec::with_capacity(width);
        let mut lower = Vec::with_capacity(width);
        for c in 0..width {
            let (u, l) = clamp((interp(&us, c as f64).round() as usize, interp(&ls, c as f64).round() as usize));
            upper.push(u);
            lower.push(l);
        }
        Ok(ZoneBoundaries { width, height, strips, strip_rows, upper, lower })
    }

    /// Boundaries given exactly per column.
    pub fn from_columns(height: usize, rows: Vec<(usize, usize)>) -> Result<Self> {
        let strips = (0..rows.len()).map(|x| Strip { x_start: x, x_end: x + 1 }).collect();
        Self::from_strips(rows.len(), height, strips, rows)
    }

    /// Same boundary rows everywhere.
    pub fn constant(width: usize, height: usize, upper: usize, lower: usize) -> Result<Self> {
        Self::from_strips(width, height, vec![Strip { x_start: 0, x_end: width.max(1) }], vec![(upper, lower)])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn strips(&self) -> &[Strip] {
        &self.strips
    }

    pub fn strip_rows(&self) -> &[(usize, usize)] {
        &self.strip_rows
    }

    /// First middle-zone row of column `c`.
    #[inline]
    pub fn upper(&self, c: usize) -> usize {
        self.upper[c]
    }

    /// Last middle-zone row of column `c`.
    #[inline]
    pub fn lower(&self, c: usize) -> usize {
        self.lower[c]
    }

    pub fn upper_line(&self) -> &[usize] {
        &self.upper
    }

    pub fn lower_line(&self) -> &[usize] {
        &self.lower
    }

    /// Mean absolute per-column error of both lines against `truth`.
    pub fn mean_abs_error(&self, truth: &ZoneBoundaries) -> Result<f64> {
        if truth.width != self.width {
            return Err(Error::DimensionMismatch { expected: truth.width, got: self.width });
        }
        let mut total = 0.0;
        for c in 0..self.width {
            total += (self.upper[c] as f64 - truth.upper[c] as f64).abs();
            total += (self.lower[c] as f64 - truth.lower[c] as f64).abs();
        }
        Ok(total / (2 * self.width.max(1)) as f64)
    }

    /// `strip_index<TAB>x_start<TAB>x_end<TAB>upper_row<TAB>lower_row` rows
    /// after a `# width height` comment. `x_end` is exclusive.
    pub fn to_tsv(&self) -> String {
        let mut s = format!("# {}\t{}\n", self.width, self.height);
        for (i, (st, r)) in self.strips.iter().zip(&self.strip_rows).enumerate() {
            let _ = writeln!(s, "{i}\t{}\t{}\t{}\t{}", st.x_start, st.x_end, r.0, r.1);
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut size = None;
        let mut strips = Vec::new();
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let err = |m: String| Error::parse(path, n + 1, m);
            let num = |s: &str| s.trim().parse::<usize>().map_err(|e| err(format!("bad number {s:?}: {e}")));
            if let Some(rest) = line.strip_prefix('#') {
                let parts: Vec<&str> = rest.split('\t').collect();
                if parts.len() == 2 && size.is_none() {
                    size = Some((num(parts[0])?, num(parts[1])?));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 {
                return Err(err(format!("expected 5 columns, found {}", cols.len())));
            }
            if num(cols[0])? != strips.len() {
                return Err(err("strip indices must be consecutive from 0".into()));
            }
            strips.push(Strip { x_start: num(cols[1])?, x_end: num(cols[2])? });
            rows.push((num(cols[3])?, num(cols[4])?));
        }
        let (width, height) = match size {
            Some(s) => s,
            None => (
                strips.last().map_or(0, |s| s.x_end),
                rows.iter().map(|r| r.1 + 1).max().unwrap_or(1),
            ),
        };
        Self::from_strips(width, height, strips, rows).map_err(|e| Error::parse(path, 0, e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

/// Strips on each side that form the context of a strip.
const REPAIR_RADIUS: usize = 2;

/// Context repair and interpolation of per-strip boundary rows.
///
/// Strips without an estimate take the mean of their nearest estimated
/// neighbours. A row that differs by more than `line_height / 4` from the
/// median of its context (up to two strips on each side and itself) is an
/// outlier and is replaced by the mean of the nearest non-outlier strips on
/// either side. Upper and lower rows are repaired independently.
pub fn smooth_boundaries(
    width: usize,
    height: usize,
    strips: Vec<Strip>,
    rows: &[Option<(f64, f64)>],
    line_height: usize,
) -> Result<ZoneBoundaries> {
    let known: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].is_some()).collect();
    if known.is_empty() {
        return Err(Error::EmptyImage);
    }
    let filled: Vec<(f64, f64)> = (0..rows.len())
        .map(|i| match rows[i] {
            Some(r) => r,
            None => {
                let before = known.iter().rev().find(|&&k| k < i).map(|&k| rows[k].unwrap());
                let after = known.iter().find(|&&k| k > i).map(|&k| rows[k].unwrap());
                match (before, after) {
                    (Some(a), Some(b)) => ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0),
                    (Some(a), None) | (None, Some(a)) => a,
                    (None, None) => unreachable!(),
                }
            }
        })
        .collect();
    let limit = line_height as f64 / 4.0;
    let uppers = repair_outliers(&filled.iter().map(|r| r.0).collect::<Vec<_>>(), limit);
    let lowers = repair_outliers(&filled.iter().map(|r| r.1).collect::<Vec<_>>(), limit);
    let int_rows = uppers
        .iter()
        .zip(&lowers)
        .map(|(&u, &l)| (u.round().max(0.0) as usize, l.round().max(0.0) as usize))
        .collect();
    ZoneBoundaries::from_strips(width, height, strips, int_rows)
}

fn repair_outliers(values: &[f64], limit: f64) -> Vec<f64> {
    let n = values.len();
    let outlier: Vec<bool> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(REPAIR_RADIUS);
            let hi = (i + REPAIR_RADIUS + 1).min(n);
            let mut ctx = values[lo..hi].to_vec();
            ctx.sort_by(f64::total_cmp);
            let m = ctx.len();
            let median = if m % 2 == 1 { ctx[m / 2] } else { (ctx[m / 2 - 1] + ctx[m / 2]) / 2.0 };
            (values[i] - median).abs() > limit
        })
        .collect();
    if outlier.iter().all(|&o| o) {
        return values.to_vec();
    }
    (0..n)
        .map(|i| {
            if !outlier[i] {
                return values[i];
            }
            let before = (0..i).rev().find(|&j| !outlier[j]).map(|j| values[j]);
            let after = (i + 1..n).find(|&j| !outlier[j]).map(|j| values[j]);
            match (before, after) {
                (Some(a), Some(b)) => (a + b) / 2.0,
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => values[i],
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strips(n: usize, w: usize) -> Vec<Strip> {
        (0..n).map(|i| Strip { x_start: i * w, x_end: (i + 1) * w }).collect()
    }

    #[test]
    fn single_strip_is_constant() {
        let zb = smooth_boundaries(30, 40, strips(1, 30), &[Some((10.0, 25.0))], 20).unwrap();
        assert!(zb.upper_line().iter().all(|&u| u == 10));
        assert!(zb.lower_line().iter().all(|&l| l == 25));
    }

    #[test]
    fn outlier_is_replaced() {
        let rows: Vec<Option<(f64, f64)>> = [10.0, 10.0, 30.0, 10.0, 10.0].iter().map(|&u| Some((u, 35.0))).collect();
        let zb = smooth_boundaries(50, 40, strips(5, 10), &rows, 20).unwrap();
        assert_eq!(zb.strip_rows()[2], (10, 35));
    }

    #[test]
    fn monotone_rows_interpolate() {
        let rows: Vec<Option<(f64, f64)>> = [10.0, 12.0, 14.0].iter().map(|&u| Some((u, 30.0))).collect();
        let zb = smooth_boundaries(30, 40, strips(3, 10), &rows, 20).unwrap();
        assert_eq!(zb.strip_rows().iter().map(|r| r.0).collect::<Vec<_>>(), vec![10, 12, 14]);
        assert_eq!(zb.upper(0), 10);
        assert_eq!(zb.upper(10), 11);
        assert_eq!(zb.upper(29), 14);
    }

    #[test]
    fn missing_strips_are_filled_and_order_kept() {
        let rows = vec![None, Some((10.0, 8.0)), None];
        let zb = smooth_boundaries(30, 40, strips(3, 10), &rows, 20).unwrap();
        for c in 0..30 {
            assert!(zb.upper(c) <= zb.lower(c) && zb.lower(c) < 40);
        }
        assert!(smooth_boundaries(30, 40, strips(3, 10), &[None, None, None], 20).is_err());
    }

    #[test]
    fn tsv_round_trip() {
        let zb = ZoneBoundaries::from_strips(27, 40, strips(3, 9), vec![(5, 30), (7, 31), (6, 29)]).unwrap();
        let back = ZoneBoundaries::parse(&zb.to_tsv(), Path::new("z")).unwrap();
        assert_eq!(back, zb);
        assert_eq!(back.to_tsv(), zb.to_tsv());
        let cols = ZoneBoundaries::from_columns(20, vec![(3, 9), (4, 10)]).unwrap();
        assert_eq!(ZoneBoundaries::parse(&cols.to_tsv(), Path::new("z")).unwrap(), cols);
    }
}
