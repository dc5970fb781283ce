//! Keyword scoring against keyword and filler networks, thresholds, and
//! re-ranking by upper/lower modifier counts.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::WindowSpec;
use crate::lexmap::KeywordQuery;
use crate::raster::{remove_specks, rlsa_horizontal, RasterImage};
use crate::scalar::Scalar;
use crate::seqmodel::{
    build_filler, build_keyword_network, span_log_likelihood, viterbi, viterbi_range, EmissionTable, ModelSet,
    StateGraph,
};
use crate::zones::ZoneBoundaries;

/// Outcome of modifier re-ranking for a hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RerankStatus {
    NotApplied,
    Kept,
    Eliminated,
    /// Zone data was unusable; the hit stays.
    Skipped,
}

/// Best keyword occurrence in one line.
#[derive(Debug, Clone, PartialEq)]
pub struct SpotHit {
    pub line_id: String,
    pub keyword: String,
    /// First and last frame of the keyword span.
    pub a: usize,
    pub b: usize,
    /// Pixel columns `[l_s, l_f)` of the span in the line image.
    pub l_s: usize,
    pub l_f: usize,
    pub score: f64,
    pub kept: bool,
    pub rerank: RerankStatus,
    pub n_upper: Option<usize>,
    pub n_lower: Option<usize>,
}

/// Frame-to-column mapping of a line whose features were taken at `scale`
/// (normalised height over image height).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameGeometry {
    pub spec: WindowSpec,
    pub scale: f64,
    pub width: usize,
}

impl FrameGeometry {
    pub fn new(spec: WindowSpec, image_height: usize, width: usize) -> Self {
        FrameGeometry { spec, scale: spec.win_height as f64 / image_height as f64, width }
    }

    /// `[a·step, b·step + win_width)` in normalised columns, mapped back to
    /// image columns.
    pub fn columns(&self, a: usize, b: usize) -> (usize, usize) {
        let s = (self.spec.frame_start_px(a) as f64 / self.scale).floor() as usize;
        let f = (self.spec.frame_end_px(b) as f64 / self.scale).ceil() as usize;
        let f = f.min(self.width).max(s.min(self.width) + 1);
        (s.min(self.width.saturating_sub(1)), f)
    }
}

/// Compiled filler network shared by every keyword.
pub struct Spotter<'m, T> {
    models: &'m ModelSet<T>,
    filler: StateGraph<T>,
}

/// Compiled keyword network.
pub struct KeywordModel<T> {
    pub query: KeywordQuery,
    graph: StateGraph<T>,
}

impl<'m, T: Scalar> Spotter<'m, T> {
    pub fn new(models: &'m ModelSet<T>) -> Result<Self> {
        let filler = StateGraph::compile(&build_filler(models), models)?;
        Ok(Spotter { models, filler })
    }

    pub fn models(&self) -> &ModelSet<T> {
        self.models
    }

    pub fn keyword(&self, query: &KeywordQuery, symbols: &[String]) -> Result<KeywordModel<T>> {
        let net = build_keyword_network(symbols, self.models)?;
        Ok(KeywordModel { query: query.clone(), graph: StateGraph::compile(&net, self.models)? })
    }

    /// Keyword span `[a, b]` and its score
    /// `(log p(span | keyword) - log p(span | filler)) / frames`.
    pub fn score(&self, em: &EmissionTable<T>, kw: &KeywordModel<T>) -> Result<(usize, usize, f64)> {
        score_with_graphs(em, &kw.graph, &self.filler)
    }
}

/// Scores the keyword span found by `keyword` against `filler` forced over
/// the same frames.
pub fn score_with_graphs<T: Scalar>(em: &EmissionTable<T>, keyword: &StateGraph<T>, filler: &StateGraph<T>) -> Result<(usize, usize, f64)> {
    let ali = viterbi(keyword, em)?;
    let (a, end, span) = span_log_likelihood(keyword, em, &ali)
        .ok_or_else(|| Error::InvalidInput("keyword network has no tagged span".into()))?;
    let fill = viterbi_range(filler, em, a, end)?.log_likelihood;
    let frames = (end - a) as f64;
    let score = (span - fill).as_f64() / frames;
    let score = if score.is_nan() { f64::NEG_INFINITY } else { score };
    Ok((a, end - 1, score))
}

/// `global(θ)` or per-keyword thresholds with a global fallback.
#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdPolicy {
    Global(f64),
    Local { thresholds: BTreeMap<String, f64>, fallback: f64 },
}

impl ThresholdPolicy {
    /// Threshold for `keyword`, and whether it came from the fallback.
    pub fn threshold(&self, keyword: &str) -> (f64, bool) {
        match self {
            ThresholdPolicy::Global(t) => (*t, false),
            ThresholdPolicy::Local { thresholds, fallback } => match thresholds.get(keyword) {
                Some(t) => (*t, false),
                None => (*fallback, true),
            },
        }
    }
}

/// `keyword<TAB>threshold` lines with a header.
pub fn thresholds_to_tsv(thresholds: &BTreeMap<String, f64>) -> String {
    let mut s = String::from("keyword\tthreshold\n");
    for (k, t) in thresholds {
        let _ = writeln!(s, "{k}\t{t:.9}");
    }
    s
}

pub fn parse_thresholds(text: &str, path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if n == 0 && line.starts_with("keyword\t") || line.trim().is_empty() {
            continue;
        }
        let Some((k, t)) = line.split_once('\t') else {
            return Err(Error::parse(path, n + 1, "expected keyword<TAB>threshold"));
        };
        let t: f64 = t.trim().parse().map_err(|e| Error::parse(path, n + 1, format!("bad threshold {t:?}: {e}")))?;
        if out.insert(k.to_string(), t).is_some() {
            return Err(Error::parse(path, n + 1, format!("duplicate keyword {k:?}")));
        }
    }
    Ok(out)
}

pub fn read_thresholds(path: &Path) -> Result<BTreeMap<String, f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_thresholds(&text, path)
}

/// Hits scoring at least the threshold, and keywords that fell back to the
/// global value.
pub fn apply_threshold(hits: &[SpotHit], policy: &ThresholdPolicy) -> (Vec<SpotHit>, Vec<String>) {
    let mut fell_back = Vec::new();
    let kept = hits
        .iter()
        .filter(|h| {
            let (theta, fallback) = policy.threshold(&h.keyword);
            if fallback && !fell_back.contains(&h.keyword) {
                fell_back.push(h.keyword.clone());
            }
            h.score >= theta
        })
        .cloned()
        .collect();
    (kept, fell_back)
}

/// Per-keyword thresholds maximising F1 on labelled hits. Among equal F1
/// values the highest threshold wins.
pub fn fit_local_thresholds(hits: &[SpotHit], relevant: &dyn Fn(&SpotHit) -> bool, total_relevant: &HashMap<String, usize>) -> BTreeMap<String, f64> {
    let mut by_kw: BTreeMap<&str, Vec<&SpotHit>> = BTreeMap::new();
    for h in hits {
        by_kw.entry(&h.keyword).or_default().push(h);
    }
    let mut out = BTreeMap::new();
    for (kw, mut list) in by_kw {
        list.sort_by(|x, y| y.score.total_cmp(&x.score));
        let rel_total = *total_relevant.get(kw).unwrap_or(&0);
        let (mut best_f1, mut best_t) = (-1.0, f64::INFINITY);
        let mut tp = 0usize;
        for (i, h) in list.iter().enumerate() {
            tp += usize::from(relevant(h));
            if i + 1 < list.len() && list[i + 1].score == h.score {
                continue;
            }
            let p = tp as f64 / (i + 1) as f64;
            let r = if rel_total == 0 { 0.0 } else { tp as f64 / rel_total as f64 };
            let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            if f1 > best_f1 {
                best_f1 = f1;
                best_t = h.score;
            }
        }
        out.insert(kw.to_string(), best_t);
    }
    out
}

/// Modifier count from a zone image: runs of non-empty columns after
/// dropping specks smaller than `line_height / 4` pixels and horizontal
/// smoothing with threshold `line_height / 4`. Peaks only split where the
/// projection reaches zero.
pub fn count_modifier_peaks(zone: &RasterImage, line_height: usize) -> usize {
    if zone.is_empty() {
        return 0;
    }
    let smoothed = rlsa_horizontal(&remove_specks(zone, line_height / 4), line_height / 4);
    let mut count = 0;
    let mut inside = false;
    for x in 0..smoothed.width() {
        let any = (0..smoothed.height()).any(|y| smoothed.is_ink(x, y));
        if any && !inside {
            count += 1;
        }
        inside = any;
    }
    count
}

/// Counts runs of non-zero values in a projection.
pub fn count_projection_peaks(projection: &[usize]) -> usize {
    let mut count = 0;
    let mut inside = false;
    for &v in projection {
        if v > 0 && !inside {
            count += 1;
        }
        inside = v > 0;
    }
    count
}

/// Upper and lower zone images of columns `[x0, x1)`, leaving a `guard`
/// band of rows next to each boundary out.
pub fn modifier_zones(img: &RasterImage, zb: &ZoneBoundaries, x0: usize, x1: usize, guard: usize) -> (RasterImage, RasterImage) {
    let w = x1 - x0;
    let mut upper = RasterImage::new_binary(w, img.height());
    let mut lower = RasterImage::new_binary(w, img.height());
    for x in x0..x1 {
        let (u, l) = (zb.upper(x), zb.lower(x));
        for y in 0..img.height() {
            if !img.is_ink(x, y) {
                continue;
            }
            if y + guard < u {
                upper.set(x - x0, y, 1);
            } else if y > l + guard {
                lower.set(x - x0, y, 1);
            }
        }
    }
    (upper, lower)
}

/// Re-ranking parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RerankParams {
    pub line_height: usize,
    /// Rows next to each boundary ignored when counting, as a fraction of
    /// the line height.
    pub guard_ratio: f64,
}

/// Keeps the hit only when the observed modifier counts over its span match
/// the keyword's. Never turns an eliminated hit back on.
pub fn rerank(hit: &mut SpotHit, query: &KeywordQuery, zb: &ZoneBoundaries, line: &RasterImage, p: &RerankParams) {
    let usable = zb.width() == line.width() && zb.height() == line.height() && hit.l_s < hit.l_f && hit.l_f <= line.width();
    if !usable {
        hit.rerank = RerankStatus::Skipped;
        return;
    }
    let guard = (p.guard_ratio * p.line_height as f64).round() as usize;
    let (zu, zl) = modifier_zones(line, zb, hit.l_s, hit.l_f, guard);
    let nu = count_modifier_peaks(&zu, p.line_height);
    let nl = count_modifier_peaks(&zl, p.line_height);
    hit.n_upper = Some(nu);
    hit.n_lower = Some(nl);
    if nu == query.upper && nl == query.lower {
        hit.rerank = RerankStatus::Kept;
    } else {
        hit.rerank = RerankStatus::Eliminated;
        hit.kept = false;
    }
}

/// Orders hits by score (descending), then line id, then keyword.
pub fn rank_hits(hits: &mut [SpotHit]) {
    hits.sort_by(|x, y| y.score.total_cmp(&x.score).then_with(|| x.line_id.cmp(&y.line_id)).then_with(|| x.keyword.cmp(&y.keyword)));
}

/// `keyword line_id a b L_s L_f score kept` rows with a header.
pub fn hits_to_tsv(hits: &[SpotHit]) -> String {
    let mut s = String::from("keyword\tline_id\ta\tb\tL_s\tL_f\tscore\tkept\n");
    for h in hits {
        let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}\t{}\t{:.9}\t{}", h.keyword, h.line_id, h.a, h.b, h.l_s, h.l_f, h.score, u8::from(h.kept));
    }
    s
}

pub fn parse_hits(text: &str, path: &Path) -> Result<Vec<SpotHit>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if n == 0 && line.starts_with("keyword\t") || line.trim().is_empty() {
            continue;
        }
        let err = |m: String| Error::parse(path, n + 1, m);
        let c: Vec<&str> = line.split('\t').collect();
        if c.len() != 8 {
            return Err(err(format!("expected 8 columns, found {}", c.len())));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|e| err(format!("bad number {s:?}: {e}")));
        out.push(SpotHit {
            keyword: c[0].to_string(),
            line_id: c[1].to_string(),
            a: num(c[2])?,
            b: num(c[3])?,
            l_s: num(c[4])?,
            l_f: num(c[5])?,
            score: c[6].parse::<f64>().map_err(|e| err(format!("bad score: {e}")))?,
            kept: match c[7] {
                "1" => true,
                "0" => false,
                o => return Err(err(format!("bad kept flag {o:?}"))),
            },
            rerank: RerankStatus::NotApplied,
            n_upper: None,
            n_lower: None,
        });
    }
    Ok(out)
}

pub fn read_hits(path: &Path) -> Result<Vec<SpotHit>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_hits(&text, path)
}

pub fn write_hits(path: &Path, hits: &[SpotHit]) -> Result<()> {
    fs::write(path, hits_to_tsv(hits)).map_err(|e| Error::io(path, e))
}
