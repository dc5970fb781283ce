//! End-to-end workflow: loading lines, training character and zone models,
//! zone segmentation, spotting with optional re-ranking, evaluation and the
//! DTW baseline. The command-line tool is a thin layer over this module.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::eval::{dtw_distance, evaluate, profile_sequence, DtwParams, EvalReport, GroundTruth};
use crate::features::{dtw_profile_features, extract_from_layers, extract_line_features, FeatureMode, FeatureSequence, PhogParams, WindowSpec};
use crate::lexmap::{graphemes, map_keyword, KeywordQuery, ZoneRuleTable};
use crate::manifest::Manifest;
use crate::raster::{binarize, pnm, Depth, RasterImage};
use crate::seqmodel::{train_models, EmissionTable, ModelSet, TrainConfig, TrainLine, TrainingLog, SPACE};
use crate::spotting::{rank_hits, rerank, FrameGeometry, RerankParams, RerankStatus, SpotHit, Spotter, ThresholdPolicy};
use crate::synth::WordBox;
use crate::zones::{
    estimate_line_height, extract_middle_zone, patch_labels, projection_zone_baseline, segment_zones, train_zone_hmm,
    zone_patch_sequence, ProjectionMode, ZoneBoundaries, ZoneParams,
};

/// Which part of the line the character models see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpotMode {
    Full,
    Middle,
}

impl SpotMode {
    pub fn name(&self) -> &'static str {
        match self {
            SpotMode::Full => "full",
            SpotMode::Middle => "middle",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(SpotMode::Full),
            "middle" => Ok(SpotMode::Middle),
            o => Err(Error::InvalidInput(format!("unknown mode {o:?}, expected full or middle"))),
        }
    }
}

pub fn parse_feature_mode(s: &str) -> Result<FeatureMode> {
    match s {
        "fg" => Ok(FeatureMode::Fg),
        "bg" => Ok(FeatureMode::Bg),
        "fg+bg" | "fgbg" => Ok(FeatureMode::FgBg),
        o => Err(Error::InvalidInput(format!("unknown feature set {o:?}, expected fg, bg or fg+bg"))),
    }
}

/// Where zone boundaries come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZoneMethod {
    Hmm,
    Projection(ProjectionMode),
}

/// Every tunable of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub window: WindowSpec,
    pub phog: PhogParams,
    pub chars: TrainConfig,
    pub zones: ZoneParams,
    pub zone_train: TrainConfig,
    /// Upper bound on lines used for zone training; 0 uses all.
    pub zone_train_lines: usize,
    pub rerank_guard: f64,
    /// Sakoe-Chiba radius in columns for the DTW baseline.
    pub dtw_band: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            window: WindowSpec::default(),
            phog: PhogParams::default(),
            chars: TrainConfig::default(),
            zones: ZoneParams { v_step: 1, ..ZoneParams::default() },
            zone_train: TrainConfig { states: 8, ..TrainConfig::default() },
            zone_train_lines: 40,
            rerank_guard: 0.125,
            dtw_band: Some(20),
        }
    }
}

fn train_config(c: &Config, prefix: &str, d: &TrainConfig) -> Result<TrainConfig> {
    let key = |k: &str| format!("{prefix}.{k}");
    let t = TrainConfig {
        states: c.get(&key("states"), d.states)?,
        mixtures: c.get(&key("mixtures"), d.mixtures)?,
        iterations_per_stage: c.get(&key("iterations"), d.iterations_per_stage)?,
        var_floor_ratio: c.get(&key("var_floor_ratio"), d.var_floor_ratio)?,
        min_var: c.get(&key("min_var"), d.min_var)?,
        prune: c.get(&key("prune"), d.prune)?,
        split_offset: c.get(&key("split_offset"), d.split_offset)?,
    };
    if t.states == 0 || t.mixtures == 0 {
        return Err(Error::InvalidInput(format!("{prefix}: states and mixtures must be positive")));
    }
    Ok(t)
}

impl PipelineConfig {
    pub fn from_config(c: &Config) -> Result<Self> {
        let d = PipelineConfig::default();
        let window = WindowSpec {
            win_height: c.get("window.height", d.window.win_height)?,
            win_width: c.get("window.width", d.window.win_width)?,
            step: c.get("window.step", d.window.step)?,
        };
        window.validate()?;
        let phog = PhogParams { levels: c.get("phog.levels", d.phog.levels)?, bins: c.get("phog.bins", d.phog.bins)? };
        let zones = ZoneParams {
            alpha: c.get("zones.alpha", d.zones.alpha)?,
            patch_width: c.get("zones.patch_width", d.zones.patch_width)?,
            patch_height: c.get("zones.patch_height", d.zones.patch_height)?,
            v_step: c.get("zones.v_step", d.zones.v_step)?,
            phog,
        };
        zones.validate()?;
        let band: i64 = c.get("dtw.band", d.dtw_band.map_or(-1, |b| b as i64))?;
        Ok(PipelineConfig {
            window,
            phog,
            chars: train_config(c, "train", &d.chars)?,
            zones,
            zone_train: train_config(c, "zones.train", &d.zone_train)?,
            zone_train_lines: c.get("zones.train_lines", d.zone_train_lines)?,
            rerank_guard: c.get("rerank.guard_ratio", d.rerank_guard)?,
            dtw_band: usize::try_from(band).ok(),
        })
    }
}

/// A loaded manifest line.
#[derive(Debug, Clone)]
pub struct LineData {
    pub id: String,
    pub text: String,
    /// Binary image.
    pub image: RasterImage,
    pub truth: Option<ZoneBoundaries>,
}

/// Reads every line of a manifest, binarising grayscale images.
pub fn load_lines(m: &Manifest) -> Result<Vec<LineData>> {
    m.records
        .par_iter()
        .map(|r| {
            let img = pnm::read_pnm(&m.image_path(r))?;
            let image = if img.depth() == Depth::Binary { img } else { binarize(&img) };
            let truth = match m.zones_path(r) {
                Some(p) => Some(ZoneBoundaries::load(&p)?),
                None => None,
            };
            Ok(LineData { id: r.line_id.clone(), text: r.transcription.clone(), image, truth })
        })
        .collect()
}

pub fn load_manifest_lines(path: &Path) -> Result<Vec<LineData>> {
    load_lines(&Manifest::load(path)?)
}

/// Model symbols of a transcription, words separated (and surrounded) by
/// the space model. Middle mode maps graphemes through `rules`.
pub fn training_symbols(text: &str, mode: SpotMode, rules: Option<&ZoneRuleTable>) -> Result<Vec<String>> {
    let mut out = vec![SPACE.to_string()];
    for word in text.split_whitespace() {
        for g in graphemes(word) {
            match (mode, rules) {
                (SpotMode::Full, _) => out.push(g.to_string()),
                (SpotMode::Middle, Some(t)) => {
                    let rule = t.get(g).ok_or_else(|| Error::UnmappedGrapheme(g.to_string()))?;
                    out.extend(rule.middle.iter().cloned());
                }
                (SpotMode::Middle, None) => return Err(Error::InvalidInput("middle-zone mode needs a rule table".into())),
            }
        }
        out.push(SPACE.to_string());
    }
    Ok(out)
}

/// Features of one line and the mapping of its frames back to columns.
pub fn line_features(
    img: &RasterImage,
    zones: Option<&ZoneBoundaries>,
    mode: SpotMode,
    features: FeatureMode,
    cfg: &PipelineConfig,
) -> Result<(FeatureSequence<f64>, FrameGeometry)> {
    match mode {
        SpotMode::Full => {
            let seq = extract_line_features(img, &cfg.window, &cfg.phog, features)?;
            Ok((seq, FrameGeometry::new(cfg.window, img.height(), img.width())))
        }
        SpotMode::Middle => {
            let zb = zones.ok_or_else(|| Error::InvalidInput("middle-zone features need zone boundaries".into()))?;
            let parts = extract_middle_zone(img, zb)?;
            let (ink, background) = parts.middle_layers(zb);
            let seq = extract_from_layers(&ink, &background, &cfg.window, &cfg.phog, features)?;
            Ok((seq, FrameGeometry::new(cfg.window, ink.height(), img.width())))
        }
    }
}

fn zones_for<'a>(lines: &[LineData], zones: Option<&'a [ZoneBoundaries]>) -> Result<Vec<Option<&'a ZoneBoundaries>>> {
    match zones {
        None => Ok(vec![None; lines.len()]),
        Some(z) if z.len() == lines.len() => Ok(z.iter().map(Some).collect()),
        Some(z) => Err(Error::DimensionMismatch { expected: lines.len(), got: z.len() }),
    }
}

/// Trains one model per symbol seen in the transcriptions, plus space.
pub fn train_char_models(
    lines: &[LineData],
    zones: Option<&[ZoneBoundaries]>,
    mode: SpotMode,
    features: FeatureMode,
    rules: Option<&ZoneRuleTable>,
    cfg: &PipelineConfig,
) -> Result<(ModelSet<f64>, TrainingLog)> {
    if lines.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut bad = Vec::new();
    let mut symbol_lists = Vec::with_capacity(lines.len());
    for l in lines {
        match training_symbols(&l.text, mode, rules) {
            Ok(s) => symbol_lists.push(s),
            Err(Error::UnmappedGrapheme(g)) => bad.push(format!("{} ({g:?})", l.id)),
            Err(e) => return Err(e),
        }
    }
    if !bad.is_empty() {
        return Err(Error::InvalidInput(format!("transcriptions outside the rule table: {}", bad.join(", "))));
    }
    let zs = zones_for(lines, zones)?;
    let seqs = lines
        .par_iter()
        .zip(zs.par_iter())
        .map(|(l, z)| line_features(&l.image, *z, mode, features, cfg).map(|f| f.0))
        .collect::<Result<Vec<_>>>()?;
    let mut labels: BTreeSet<String> = symbol_lists.iter().flatten().cloned().collect();
    labels.remove(SPACE);
    let labels: Vec<String> = std::iter::once(SPACE.to_string()).chain(labels).collect();
    let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let train: Vec<TrainLine<f64>> = seqs
        .iter()
        .zip(&symbol_lists)
        .map(|(f, s)| TrainLine { features: f, symbols: s.iter().map(|x| index[x.as_str()]).collect() })
        .collect();
    info!("training {} symbol models on {} lines ({} mode, {})", labels.len(), lines.len(), mode.name(), features.name());
    train_models(&labels, &train, &cfg.chars)
}

/// Trains the four zone models from lines with zone ground truth.
pub fn train_zone_models(lines: &[LineData], cfg: &PipelineConfig) -> Result<(ModelSet<f64>, TrainingLog)> {
    let with_truth: Vec<&LineData> = lines.iter().filter(|l| l.truth.is_some()).collect();
    let take = if cfg.zone_train_lines == 0 { with_truth.len() } else { cfg.zone_train_lines.min(with_truth.len()) };
    if take == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let strips = with_truth[..take]
        .par_iter()
        .map(|l| {
            let truth = l.truth.as_ref().unwrap();
            let h = estimate_line_height(&l.image)?;
            let sfs = zone_patch_sequence::<f64>(&l.image, cfg.zones.strip_width(h.rows), &cfg.zones)?;
            Ok(sfs
                .into_iter()
                .filter(|sf| sf.ink_rows.is_some())
                .map(|sf| {
                    let labels = patch_labels(&sf, truth, &cfg.zones);
                    (sf.features, labels)
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let flat: Vec<(FeatureSequence<f64>, _)> = strips.into_iter().flatten().collect();
    let refs: Vec<(&FeatureSequence<f64>, _)> = flat.iter().map(|(f, l)| (f, l.clone())).collect();
    info!("training zone models on {} strips from {take} lines", refs.len());
    train_zone_hmm(&refs, &cfg.zone_train)
}

/// Zone boundaries of every line.
pub fn segment_lines(lines: &[LineData], method: ZoneMethod, models: Option<&ModelSet<f64>>, cfg: &PipelineConfig) -> Result<Vec<ZoneBoundaries>> {
    lines
        .par_iter()
        .map(|l| match method {
            ZoneMethod::Hmm => {
                let m = models.ok_or_else(|| Error::InvalidInput("HMM zone segmentation needs zone models".into()))?;
                segment_zones(&l.image, m, &cfg.zones)
            }
            ZoneMethod::Projection(p) => projection_zone_baseline(&l.image, p),
        })
        .collect()
}

/// Mean absolute boundary error over lines carrying ground truth.
pub fn mean_zone_error(lines: &[LineData], zones: &[ZoneBoundaries]) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0;
    for (l, z) in lines.iter().zip(zones) {
        if let Some(t) = &l.truth {
            sum += z.mean_abs_error(t)?;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::InvalidInput("no line has zone ground truth".into()));
    }
    Ok(sum / n as f64)
}

/// A keyword ready for spotting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedKeyword {
    pub query: KeywordQuery,
    pub symbols: Vec<String>,
}

/// Maps raw keywords onto model symbols. Keywords that cannot be expressed
/// with the models are returned separately.
pub fn prepare_keywords<S: AsRef<str>>(
    raw: &[S],
    mode: SpotMode,
    models: &ModelSet<f64>,
    rules: Option<&ZoneRuleTable>,
) -> (Vec<PreparedKeyword>, Vec<String>) {
    let mut ok = Vec::new();
    let mut oov = Vec::new();
    for k in raw {
        let k = k.as_ref();
        let query = match rules {
            Some(t) => map_keyword(k, t).ok(),
            None => Some(KeywordQuery { raw: k.to_string(), middle: Vec::new(), upper: 0, lower: 0 }),
        };
        let symbols: Option<Vec<String>> = match (mode, &query) {
            (SpotMode::Full, _) => Some(graphemes(k).into_iter().map(str::to_string).collect()),
            (SpotMode::Middle, Some(q)) => Some(q.middle.clone()),
            (SpotMode::Middle, None) => None,
        };
        match (query, symbols) {
            (Some(query), Some(symbols)) if !symbols.is_empty() && symbols.iter().all(|s| models.get(s).is_some()) => {
                ok.push(PreparedKeyword { query, symbols })
            }
            _ => oov.push(k.to_string()),
        }
    }
    (ok, oov)
}

/// Spotting run options.
#[derive(Debug, Clone, PartialEq)]
pub struct SpotOptions {
    pub mode: SpotMode,
    pub features: FeatureMode,
    pub threshold: ThresholdPolicy,
    pub rerank: bool,
}

/// Scores every keyword on every line. Hits come back ranked; threshold
/// and re-ranking decisions are recorded in `kept`.
pub fn spot_lines(
    lines: &[LineData],
    zones: Option<&[ZoneBoundaries]>,
    models: &ModelSet<f64>,
    keywords: &[PreparedKeyword],
    opts: &SpotOptions,
    cfg: &PipelineConfig,
) -> Result<Vec<SpotHit>> {
    if opts.rerank && zones.is_none() {
        return Err(Error::InvalidInput("re-ranking needs zone boundaries".into()));
    }
    let zs = zones_for(lines, zones)?;
    let spotter = Spotter::new(models)?;
    let compiled = keywords.iter().map(|k| spotter.keyword(&k.query, &k.symbols)).collect::<Result<Vec<_>>>()?;
    let per_line = lines
        .par_iter()
        .zip(zs.par_iter())
        .map(|(l, z)| {
            let (seq, geom) = line_features(&l.image, *z, opts.mode, opts.features, cfg)?;
            let em = EmissionTable::compute(models, &seq, None)?;
            let line_height = if opts.rerank { estimate_line_height(&l.image)?.rows } else { 0 };
            let mut hits = Vec::with_capacity(compiled.len());
            for kw in &compiled {
                let (a, b, score) = match spotter.score(&em, kw) {
                    Ok(s) => s,
                    Err(Error::TooShort { .. }) => continue,
                    Err(e) => return Err(e),
                };
                let (l_s, l_f) = geom.columns(a, b);
                let (theta, _) = opts.threshold.threshold(&kw.query.raw);
                let mut hit = SpotHit {
                    line_id: l.id.clone(),
                    keyword: kw.query.raw.clone(),
                    a,
                    b,
                    l_s,
                    l_f,
                    score,
                    kept: score >= theta,
                    rerank: RerankStatus::NotApplied,
                    n_upper: None,
                    n_lower: None,
                };
                if opts.rerank {
                    let zb = z.expect("checked above");
                    rerank(&mut hit, &kw.query, zb, &l.image, &RerankParams { line_height, guard_ratio: cfg.rerank_guard });
                }
                hits.push(hit);
            }
            Ok(hits)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut hits: Vec<SpotHit> = per_line.into_iter().flatten().collect();
    rank_hits(&mut hits);
    Ok(hits)
}

pub fn ground_truth(lines: &[LineData], keywords: &[String]) -> Result<GroundTruth> {
    GroundTruth::from_transcriptions(lines.iter().map(|l| (l.id.as_str(), l.text.as_str())), keywords)
}

pub fn evaluate_hits(hits: &[SpotHit], lines: &[LineData], keywords: &[String]) -> Result<EvalReport> {
    evaluate(hits, &ground_truth(lines, keywords)?, keywords)
}

fn word_sequence(line: &RasterImage, wb: &WordBox) -> Result<FeatureSequence<f64>> {
    if wb.x_end > line.width() || wb.x_start >= wb.x_end {
        return Err(Error::InvalidInput(format!("word box {}..{} lies outside the line", wb.x_start, wb.x_end)));
    }
    let img = line.crop(wb.x_start as isize, 0, wb.x_end - wb.x_start, line.height());
    let trimmed = match img.ink_bbox() {
        Some((x0, y0, x1, y1)) => img.crop(x0 as isize, y0 as isize, x1 - x0 + 1, y1 - y0 + 1),
        None => return Err(Error::InsufficientInk),
    };
    profile_sequence(&dtw_profile_features::<f64>(&trimmed)?)
}

/// Whole-word DTW over column profiles. Each keyword's query is its first
/// exemplar among the training words; a test line scores the negated
/// distance of its closest word.
pub fn dtw_baseline(
    train: &[LineData],
    test: &[LineData],
    words: &[(String, WordBox)],
    keywords: &[String],
    cfg: &PipelineConfig,
) -> Result<Vec<SpotHit>> {
    let by_id: HashMap<&str, &LineData> = train.iter().chain(test).map(|l| (l.id.as_str(), l)).collect();
    let mut line_words: BTreeMap<&str, Vec<&WordBox>> = BTreeMap::new();
    for (id, wb) in words {
        line_words.entry(id.as_str()).or_default().push(wb);
    }
    let mut queries = Vec::new();
    for k in keywords {
        let exemplar = train.iter().find_map(|l| {
            line_words.get(l.id.as_str()).and_then(|ws| ws.iter().find(|w| &w.text == k)).map(|w| (l, *w))
        });
        match exemplar {
            Some((l, w)) => queries.push((k.clone(), word_sequence(&l.image, w)?)),
            None => warn!("no training exemplar for keyword {k:?}; skipped"),
        }
    }
    let per_line = test
        .par_iter()
        .map(|l| {
            let ws = line_words.get(l.id.as_str()).cloned().unwrap_or_default();
            let seqs = ws.iter().map(|w| word_sequence(&by_id[l.id.as_str()].image, w)).collect::<Result<Vec<_>>>()?;
            let mut hits = Vec::new();
            for (k, q) in &queries {
                let mut best: Option<(f64, &WordBox)> = None;
                for (w, s) in ws.iter().zip(&seqs) {
                    let band = cfg.dtw_band.map(|r| r.max(q.len().abs_diff(s.len())));
                    let d = dtw_distance(q, s, &DtwParams { band_radius: band })?.normalized();
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, w));
                    }
                }
                if let Some((d, w)) = best {
                    hits.push(SpotHit {
                        line_id: l.id.clone(),
                        keyword: k.clone(),
                        a: 0,
                        b: 0,
                        l_s: w.x_start,
                        l_f: w.x_end,
                        score: -d,
                        kept: true,
                        rerank: RerankStatus::NotApplied,
                        n_upper: None,
                        n_lower: None,
                    });
                }
            }
            Ok(hits)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut hits: Vec<SpotHit> = per_line.into_iter().flatten().collect();
    rank_hits(&mut hits);
    Ok(hits)
}
