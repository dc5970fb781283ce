use rayon::prelude::*;

use super::boundaries::{smooth_boundaries, Strip, ZoneBoundaries};
use crate::error::{Error, Result};
use crate::features::{phog, FeatureSequence, PhogParams, Provenance};
use crate::raster::{bottom_reservoirs, RasterImage};
use crate::scalar::Scalar;
use crate::seqmodel::{
    build_optional_chain, train_models, viterbi, EmissionTable, ModelSet, StateGraph, TrainConfig, TrainLine,
    TrainingLog,
};

/// Vertical patch label within a strip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ZonePatchLabel {
    Space,
    Upper,
    Middle,
    Lower,
}

impl ZonePatchLabel {
    pub const ALL: [ZonePatchLabel; 4] = [ZonePatchLabel::Space, ZonePatchLabel::Upper, ZonePatchLabel::Middle, ZonePatchLabel::Lower];

    pub fn name(&self) -> &'static str {
        match self {
            ZonePatchLabel::Space => "space",
            ZonePatchLabel::Upper => "upper",
            ZonePatchLabel::Middle => "middle",
            ZonePatchLabel::Lower => "lower",
        }
    }

    fn index(&self) -> usize {
        *self as usize
    }
}

/// Strip and patch geometry for zone segmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneParams {
    /// Strip width as a multiple of the line height.
    pub alpha: f64,
    pub patch_width: usize,
    pub patch_height: usize,
    /// Vertical step between patches.
    pub v_step: usize,
    pub phog: PhogParams,
}

impl Default for ZoneParams {
    fn default() -> Self {
        ZoneParams { alpha: 1.5, patch_width: 40, patch_height: 8, v_step: 4, phog: PhogParams::default() }
    }
}

impl ZoneParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || self.patch_width == 0 || self.patch_height == 0 || self.v_step == 0 {
            return Err(Error::InvalidInput("zone parameters must be positive".into()));
        }
        Ok(())
    }

    /// Strip width for a line of height `line_height`, at least one column.
    pub fn strip_width(&self, line_height: usize) -> usize {
        ((self.alpha * line_height as f64).round() as usize).max(1)
    }

    /// Top rows of the patches in a strip of height `h`.
    pub fn patch_tops(&self, h: usize) -> Vec<usize> {
        if h < self.patch_height {
            return Vec::new();
        }
        (0..=(h - self.patch_height) / self.v_step).map(|k| k * self.v_step).collect()
    }

    /// Row a patch stands for.
    pub fn patch_centre(&self, top: usize) -> usize {
        top + self.patch_height / 2
    }
}

/// Estimated line height and whether it came from the fallback rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineHeight {
    pub rows: usize,
    pub fallback: bool,
}

/// Mode of the bottom-reservoir heights (ties to the larger height), or the
/// longest run of inked rows when the line has no reservoir. Clamped to
/// `[4, height]`.
pub fn estimate_line_height(img: &RasterImage) -> Result<LineHeight> {
    img.require_binary()?;
    if img.ink_count() == 0 {
        return Err(Error::EmptyImage);
    }
    let heights: Vec<usize> = bottom_reservoirs(img).iter().map(|r| r.height_rows).collect();
    let clamp = |h: usize| h.clamp(4.min(img.height()), img.height());
    if heights.is_empty() {
        let mut best = 0;
        let mut run = 0;
        for y in 0..img.height() {
            run = if img.row(y).iter().any(|&p| p != 0) { run + 1 } else { 0 };
            best = best.max(run);
        }
        return Ok(LineHeight { rows: clamp(best), fallback: true });
    }
    Ok(LineHeight { rows: clamp(mode_prefer_larger(&heights)), fallback: false })
}

fn mode_prefer_larger(values: &[usize]) -> usize {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let (mut best, mut best_n) = (sorted[0], 0);
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].partition_point(|&v| v == sorted[i]) + i;
        if j - i >= best_n {
            best = sorted[i];
            best_n = j - i;
        }
        i = j;
    }
    best
}

/// `ceil(width / strip_width)` strips; the last one is clipped to the image
/// (its patches are right-padded with background).
pub fn zone_strips(width: usize, strip_width: usize) -> Vec<Strip> {
    (0..width.div_ceil(strip_width))
        .map(|i| Strip { x_start: i * strip_width, x_end: ((i + 1) * strip_width).min(width) })
        .collect()
}

/// Patch features of one strip, top to bottom.
#[derive(Debug, Clone)]
pub struct StripFeatures<T> {
    pub strip: Strip,
    pub features: FeatureSequence<T>,
    pub tops: Vec<usize>,
    /// Topmost and bottommost inked rows of the strip.
    pub ink_rows: Option<(usize, usize)>,
}

/// Strips of width `strip_width`, each cut into overlapping patches that are
/// rescaled to the canonical patch size and PHOG-encoded.
pub fn zone_patch_sequence<T: Scalar>(img: &RasterImage, strip_width: usize, zp: &ZoneParams) -> Result<Vec<StripFeatures<T>>> {
    img.require_binary()?;
    zp.validate()?;
    if img.height() < zp.patch_height || img.width() == 0 {
        return Err(Error::InvalidInput(format!("line of height {} is shorter than one patch", img.height())));
    }
    let tops = zp.patch_tops(img.height());
    zone_strips(img.width(), strip_width)
        .into_iter()
        .map(|strip| {
            let mut seq = FeatureSequence::new(zp.phog.dim(), Provenance::Foreground);
            for &top in &tops {
                let patch = img
                    .crop(strip.x_start as isize, top as isize, strip_width, zp.patch_height)
                    .resize_nearest(zp.patch_width, zp.patch_height);
                seq.push(&phog::<T>(&patch, &zp.phog))?;
            }
            let ink = strip_ink_rows(img, strip);
            Ok(StripFeatures { strip, features: seq, tops: tops.clone(), ink_rows: ink })
        })
        .collect()
}

fn strip_ink_rows(img: &RasterImage, strip: Strip) -> Option<(usize, usize)> {
    let inked = |y: usize| img.row(y)[strip.x_start..strip.x_end].iter().any(|&p| p != 0);
    let top = (0..img.height()).find(|&y| inked(y))?;
    let bottom = (0..img.height()).rev().find(|&y| inked(y))?;
    Some((top, bottom))
}

/// Ground-truth patch labels of a strip.
///
/// A patch centred inside the strip's middle band is Middle; above it, Upper
/// when the strip has ink at or above the centre row, else Space; below it,
/// the mirror rule gives Lower or Space. Strips without ink are all Space.
pub fn patch_labels(sf: &StripFeatures<impl Scalar>, truth: &ZoneBoundaries, zp: &ZoneParams) -> Vec<ZonePatchLabel> {
    let Some((ink_top, ink_bottom)) = sf.ink_rows else {
        return vec![ZonePatchLabel::Space; sf.tops.len()];
    };
    let cols = sf.strip.x_start..sf.strip.x_end;
    let upper = cols.clone().map(|c| truth.upper(c)).sum::<usize>() as f64 / cols.len() as f64;
    let lower = cols.clone().map(|c| truth.lower(c)).sum::<usize>() as f64 / cols.len() as f64;
    sf.tops
        .iter()
        .map(|&top| {
            let c = zp.patch_centre(top) as f64;
            if c < upper.round() {
                if c >= ink_top as f64 { ZonePatchLabel::Upper } else { ZonePatchLabel::Space }
            } else if c > lower.round() {
                if c <= ink_bottom as f64 { ZonePatchLabel::Lower } else { ZonePatchLabel::Space }
            } else {
                ZonePatchLabel::Middle
            }
        })
        .collect()
}

/// Collapses a label sequence into one symbol per run.
pub fn label_runs(labels: &[ZonePatchLabel]) -> Vec<ZonePatchLabel> {
    let mut out: Vec<ZonePatchLabel> = Vec::new();
    for &l in labels {
        if out.last() != Some(&l) {
            out.push(l);
        }
    }
    out
}

/// One HMM per zone label. Every run of equally labelled patches is a
/// training sequence for its own label's model, so the known patch labels
/// fix the zone boundaries during training. Runs shorter than the model are
/// left out.
pub fn train_zone_hmm<T: Scalar>(sequences: &[(&FeatureSequence<T>, Vec<ZonePatchLabel>)], cfg: &TrainConfig) -> Result<(ModelSet<T>, TrainingLog)> {
    let mut runs: Vec<(FeatureSequence<T>, usize)> = Vec::new();
    for (f, labels) in sequences {
        if labels.len() != f.len() {
            return Err(Error::DimensionMismatch { expected: f.len(), got: labels.len() });
        }
        let mut start = 0;
        for end in 1..=labels.len() {
            if end == labels.len() || labels[end] != labels[start] {
                if end - start >= cfg.states {
                    runs.push((f.slice(start, end), labels[start].index()));
                }
                start = end;
            }
        }
    }
    if let Some(missing) = ZonePatchLabel::ALL.iter().find(|l| !runs.iter().any(|r| r.1 == l.index())) {
        return Err(Error::InvalidInput(format!("zone training data has no usable {} run", missing.name())));
    }
    let lines: Vec<TrainLine<T>> = runs.iter().map(|(f, l)| TrainLine { features: f, symbols: vec![*l] }).collect();
    let names: Vec<&str> = ZonePatchLabel::ALL.iter().map(ZonePatchLabel::name).collect();
    train_models(&names, &lines, cfg)
}

/// Zone parse of one strip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StripParse {
    /// Label of each patch.
    pub labels: Vec<ZonePatchLabel>,
    /// `(upper, lower)` middle-zone rows.
    pub rows: (usize, usize),
}

/// Viterbi parse of one strip under `Space? Upper? Middle Lower? Space?`.
/// The middle band runs between the centres of the first and last Middle
/// patches; when Upper (Lower) is absent the boundary moves to the topmost
/// (bottommost) ink inside the Middle patches instead.
pub fn align_zones<T: Scalar>(sf: &StripFeatures<T>, models: &ModelSet<T>, zp: &ZoneParams, img: &RasterImage) -> Result<StripParse> {
    let idx = |l: ZonePatchLabel| models.require(l.name());
    let (sp, up, mid, low) = (idx(ZonePatchLabel::Space)?, idx(ZonePatchLabel::Upper)?, idx(ZonePatchLabel::Middle)?, idx(ZonePatchLabel::Lower)?);
    let net = build_optional_chain(&[(sp, true), (up, true), (mid, false), (low, true), (sp, true)]);
    let graph = StateGraph::compile(&net, models)?;
    let em = EmissionTable::compute(models, &sf.features, None)?;
    let ali = viterbi(&graph, &em)?;
    let label_of = |m: usize| ZonePatchLabel::ALL.iter().copied().find(|l| idx(*l).ok() == Some(m)).unwrap_or(ZonePatchLabel::Space);
    let labels: Vec<ZonePatchLabel> = ali.path.iter().map(|&s| label_of(graph.states[s].model)).collect();
    let first = labels.iter().position(|&l| l == ZonePatchLabel::Middle).expect("middle is mandatory");
    let last = labels.iter().rposition(|&l| l == ZonePatchLabel::Middle).unwrap();
    let mut upper = zp.patch_centre(sf.tops[first]);
    let mut lower = zp.patch_centre(sf.tops[last]);
    let band_top = sf.tops[first];
    let band_bottom = (sf.tops[last] + zp.patch_height - 1).min(img.height() - 1);
    let inked = |y: usize| img.row(y)[sf.strip.x_start..sf.strip.x_end].iter().any(|&p| p != 0);
    if !labels.contains(&ZonePatchLabel::Upper) {
        if let Some(y) = (band_top..=band_bottom).find(|&y| inked(y)) {
            upper = y;
        }
    }
    if !labels.contains(&ZonePatchLabel::Lower) {
        if let Some(y) = (band_top..=band_bottom).rev().find(|&y| inked(y)) {
            lower = y;
        }
    }
    Ok(StripParse { labels, rows: (upper.min(lower), lower) })
}

/// Full HMM zone segmentation of a line: height estimate, strip parses and
/// boundary smoothing. Strips without ink take their neighbours' rows.
pub fn segment_zones<T: Scalar>(img: &RasterImage, models: &ModelSet<T>, zp: &ZoneParams) -> Result<ZoneBoundaries> {
    let h = estimate_line_height(img)?;
    let strips = zone_patch_sequence::<T>(img, zp.strip_width(h.rows), zp)?;
    let rows = strips
        .par_iter()
        .map(|sf| match sf.ink_rows {
            None => Ok(None),
            Some(_) => align_zones(sf, models, zp, img).map(|p| Some((p.rows.0 as f64, p.rows.1 as f64))),
        })
        .collect::<Result<Vec<_>>>()?;
    smooth_boundaries(img.width(), img.height(), strips.iter().map(|s| s.strip).collect(), &rows, h.rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn height_mode_and_ties() {
        assert_eq!(mode_prefer_larger(&[5, 7, 7, 9]), 7);
        assert_eq!(mode_prefer_larger(&[5, 5, 9, 9]), 9);
        let bar = RasterImage::from_ascii(&["......", "######", "######", "######", "......"]);
        assert_eq!(estimate_line_height(&bar).unwrap(), LineHeight { rows: 4, fallback: true });
        let arch = RasterImage::from_ascii(&[
            "..........",
            ".########.",
            ".#......#.",
            ".#......#.",
            ".#......#.",
            ".#......#.",
            ".#......#.",
            "..........",
        ]);
        assert_eq!(estimate_line_height(&arch).unwrap(), LineHeight { rows: 5, fallback: false });
    }

    #[test]
    fn patch_arithmetic() {
        let zp = ZoneParams::default();
        assert_eq!(zp.patch_tops(16), vec![0, 4, 8]);
        assert_eq!(zone_strips(100, 30).len(), 4);
        let img = RasterImage::from_ascii(&["#".repeat(100).as_str(); 16]);
        let seqs: Vec<StripFeatures<f64>> = zone_patch_sequence(&img, 30, &zp).unwrap();
        assert_eq!(seqs.len(), 4);
        assert!(seqs.iter().all(|s| s.features.len() == 3 && s.features.dim() == 168));
        assert!(zone_patch_sequence::<f64>(&RasterImage::new_binary(10, 5), 3, &zp).is_err());
    }

    #[test]
    fn labels_follow_the_band() {
        let zp = ZoneParams { v_step: 1, ..ZoneParams::default() };
        // ink rows 6..=25 around a middle band 10..=20
        let mut img = RasterImage::new_binary(12, 32);
        for y in 6..26 {
            img.set(5, y, 1);
        }
        let sf: Vec<StripFeatures<f64>> = zone_patch_sequence(&img, 12, &zp).unwrap();
        let truth = ZoneBoundaries::constant(12, 32, 10, 20).unwrap();
        let labels = patch_labels(&sf[0], &truth, &zp);
        let runs = label_runs(&labels);
        use ZonePatchLabel::*;
        assert_eq!(runs, vec![Space, Upper, Middle, Lower, Space]);
        let first_mid = labels.iter().position(|&l| l == Middle).unwrap();
        assert_eq!(zp.patch_centre(sf[0].tops[first_mid]), 10);
        let last_mid = labels.iter().rposition(|&l| l == Middle).unwrap();
        assert_eq!(zp.patch_centre(sf[0].tops[last_mid]), 20);
    }
}
