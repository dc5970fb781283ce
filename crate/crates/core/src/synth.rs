//! Procedural handwriting-like script for end-to-end experiments.
//!
//! Glyph bodies hang from a solid per-word headline, which closes cavities
//! between strokes into bottom reservoirs. Some graphemes carry an upper
//! mark (combining circumflex) or a lower mark (combining dot below) drawn in
//! their own bands. Every line records its true middle-zone rows and word
//! boxes.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::lexmap::{graphemes, ZoneRule, ZoneRuleTable};
use crate::manifest::{Manifest, ManifestRecord};
use crate::raster::{pnm, RasterImage};
use crate::zones::ZoneBoundaries;

pub const UPPER_MARK: char = '\u{302}';
pub const LOWER_MARK: char = '\u{323}';

type Polyline = &'static [(f64, f64)];

// Unit box: x left to right, y from the headline (0) down to the baseline (1).
const SHAPES: &[&[Polyline]] = &[
    &[&[(0.15, 0.0), (0.15, 1.0)], &[(0.85, 0.0), (0.85, 1.0)]],
    &[&[(0.5, 0.0), (0.5, 1.0)], &[(0.5, 0.5), (0.9, 0.5), (0.9, 0.75)]],
    &[&[(0.15, 0.0), (0.15, 1.0)], &[(0.85, 0.0), (0.85, 1.0)], &[(0.15, 0.55), (0.85, 0.55)]],
    &[&[(0.2, 0.0), (0.2, 1.0)], &[(0.2, 0.3), (0.9, 1.0)]],
    &[&[(0.8, 0.0), (0.8, 1.0)], &[(0.8, 0.4), (0.2, 0.4), (0.2, 1.0), (0.8, 1.0)]],
    &[&[(0.1, 0.0), (0.1, 1.0)], &[(0.5, 0.0), (0.5, 1.0)], &[(0.9, 0.0), (0.9, 1.0)]],
    &[&[(0.1, 0.0), (0.5, 0.6)], &[(0.9, 0.0), (0.5, 0.6)], &[(0.5, 0.6), (0.5, 1.0)]],
    &[&[(0.15, 0.0), (0.15, 1.0)], &[(0.15, 0.5), (0.85, 0.5), (0.85, 1.0)]],
    &[&[(0.2, 0.0), (0.2, 0.5), (0.8, 0.5), (0.8, 1.0)]],
    &[&[(0.85, 0.0), (0.85, 1.0)], &[(0.3, 0.0), (0.3, 0.6), (0.55, 1.0)]],
    &[&[(0.5, 0.0), (0.1, 1.0), (0.9, 1.0), (0.5, 0.0)]],
    &[&[(0.3, 0.0), (0.3, 1.0)], &[(0.3, 0.35), (0.85, 0.35)], &[(0.3, 0.7), (0.85, 0.7)]],
];

// Mark boxes: y from 0 (top) to 1 (bottom).
const UPPER_STYLES: &[Polyline] = &[
    &[(0.0, 1.0), (0.5, 0.0), (1.0, 1.0)],
    &[(0.0, 1.0), (0.15, 0.3), (0.5, 0.0), (0.85, 0.3), (1.0, 1.0)],
    &[(0.5, 1.0), (0.1, 0.6), (0.3, 0.05), (0.7, 0.05), (0.9, 0.6), (0.5, 1.0)],
];
const LOWER_STYLES: &[Polyline] = &[
    &[(0.0, 0.0), (0.5, 1.0), (1.0, 0.3)],
    &[(0.0, 0.0), (0.3, 1.0), (0.7, 1.0), (1.0, 0.0)],
    &[(0.5, 0.0), (0.1, 0.4), (0.3, 0.95), (0.7, 0.95), (0.9, 0.4), (0.5, 0.0)],
];

/// Per-point jitter of glyph and mark outlines, in box units.
const JITTER: f64 = 0.04;

/// Blank rows above and below the modifier bands.
const MARGIN: usize = 10;

/// Maximum supported alphabet size.
pub const MAX_ALPHABET: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub alphabet: usize,
    /// Fraction of base glyphs with an upper-mark variant.
    pub upper_fraction: f64,
    pub lower_fraction: f64,
    pub glyph_width: usize,
    /// Middle-zone height in rows.
    pub glyph_height: usize,
    /// Height of each modifier band.
    pub mark_band: usize,
    /// Inclusive range of gaps between words, in pixels.
    pub word_gap: (usize, usize),
    pub salt_pepper: f64,
    /// Lines are sheared vertically by a uniform angle in `[-j, j]` degrees.
    pub skew_jitter: f64,
    pub train_lines: usize,
    pub test_lines: usize,
    pub keywords: usize,
    pub vocabulary: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            alphabet: 10,
            upper_fraction: 0.3,
            lower_fraction: 0.3,
            glyph_width: 44,
            glyph_height: 32,
            mark_band: 14,
            word_gap: (36, 50),
            salt_pepper: 0.0,
            skew_jitter: 0.0,
            train_lines: 150,
            test_lines: 50,
            keywords: 8,
            vocabulary: 30,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn from_config(c: &Config) -> Result<Self> {
        let d = SynthConfig::default();
        let cfg = SynthConfig {
            alphabet: c.get("synth.alphabet", d.alphabet)?,
            upper_fraction: c.get("synth.upper_fraction", d.upper_fraction)?,
            lower_fraction: c.get("synth.lower_fraction", d.lower_fraction)?,
            glyph_width: c.get("synth.glyph_width", d.glyph_width)?,
            glyph_height: c.get("synth.glyph_height", d.glyph_height)?,
            mark_band: c.get("synth.mark_band", d.mark_band)?,
            word_gap: (c.get("synth.gap_min", d.word_gap.0)?, c.get("synth.gap_max", d.word_gap.1)?),
            salt_pepper: c.get("synth.salt_pepper", d.salt_pepper)?,
            skew_jitter: c.get("synth.skew_jitter", d.skew_jitter)?,
            train_lines: c.get("synth.train_lines", d.train_lines)?,
            test_lines: c.get("synth.test_lines", d.test_lines)?,
            keywords: c.get("synth.keywords", d.keywords)?,
            vocabulary: c.get("synth.vocabulary", d.vocabulary)?,
            seed: c.get("seed", d.seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_config(&self) -> Config {
        let mut c = Config::new();
        c.set("synth.alphabet", self.alphabet);
        c.set("synth.upper_fraction", self.upper_fraction);
        c.set("synth.lower_fraction", self.lower_fraction);
        c.set("synth.glyph_width", self.glyph_width);
        c.set("synth.glyph_height", self.glyph_height);
        c.set("synth.mark_band", self.mark_band);
        c.set("synth.gap_min", self.word_gap.0);
        c.set("synth.gap_max", self.word_gap.1);
        c.set("synth.salt_pepper", self.salt_pepper);
        c.set("synth.skew_jitter", self.skew_jitter);
        c.set("synth.train_lines", self.train_lines);
        c.set("synth.test_lines", self.test_lines);
        c.set("synth.keywords", self.keywords);
        c.set("synth.vocabulary", self.vocabulary);
        c.set("seed", self.seed);
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("synth config: {m}")));
        if !(2..=MAX_ALPHABET).contains(&self.alphabet) {
            return bad(&format!("alphabet must be in 2..={MAX_ALPHABET}"));
        }
        let in_unit = |f: f64| (0.0..=1.0).contains(&f);
        if !in_unit(self.upper_fraction) || !in_unit(self.lower_fraction) || self.upper_fraction + self.lower_fraction > 1.0 {
            return bad("mark fractions must lie in [0, 1] and sum to at most 1");
        }
        if !in_unit(self.salt_pepper) || !(0.0..45.0).contains(&self.skew_jitter) {
            return bad("noise out of range");
        }
        if self.glyph_width < 12 || self.glyph_height < 12 || self.mark_band < 8 {
            return bad("glyph too small");
        }
        if self.word_gap.0 > self.word_gap.1 || self.word_gap.0 == 0 {
            return bad("invalid word gap range");
        }
        if self.keywords == 0 || self.vocabulary < 2 * self.keywords || self.train_lines == 0 {
            return bad("need keywords, a vocabulary of at least twice as many words, and training lines");
        }
        Ok(())
    }

    fn upper_count(&self) -> usize {
        (self.alphabet as f64 * self.upper_fraction).round() as usize
    }

    fn lower_count(&self) -> usize {
        (self.alphabet as f64 * self.lower_fraction).round() as usize
    }
}

/// One grapheme of the synthetic script.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthGrapheme {
    pub text: String,
    pub base: usize,
    pub upper: bool,
    pub lower: bool,
}

/// Graphemes of the script: base letters `a`, `b`, ... followed by their
/// marked variants.
pub fn script_graphemes(cfg: &SynthConfig) -> Vec<SynthGrapheme> {
    let base_name = |i: usize| char::from(b'a' + i as u8).to_string();
    let mut out: Vec<SynthGrapheme> =
        (0..cfg.alphabet).map(|i| SynthGrapheme { text: base_name(i), base: i, upper: false, lower: false }).collect();
    let nu = cfg.upper_count();
    for i in 0..nu {
        out.push(SynthGrapheme { text: format!("{}{UPPER_MARK}", base_name(i)), base: i, upper: true, lower: false });
    }
    for i in nu..nu + cfg.lower_count() {
        out.push(SynthGrapheme { text: format!("{}{LOWER_MARK}", base_name(i)), base: i, upper: false, lower: true });
    }
    out
}

/// Zone rule table of the script.
pub fn rule_table(cfg: &SynthConfig) -> ZoneRuleTable {
    let mut t = ZoneRuleTable::new();
    for g in script_graphemes(cfg) {
        let middle = vec![char::from(b'a' + g.base as u8).to_string()];
        t.insert(g.text, ZoneRule { middle, upper: usize::from(g.upper), lower: usize::from(g.lower) })
            .expect("script graphemes are distinct");
    }
    t
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pub keywords: Vec<String>,
    /// Words sharing a keyword's middle form but not its marks.
    pub siblings: Vec<String>,
    pub distractors: Vec<String>,
}

/// Word box within a line, `x_end` exclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordBox {
    pub text: String,
    pub x_start: usize,
    pub x_end: usize,
}

#[derive(Debug, Clone)]
pub struct SynthLine {
    pub id: String,
    pub text: String,
    pub image: RasterImage,
    pub zones: ZoneBoundaries,
    pub words: Vec<WordBox>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    pub vocabulary: Vocabulary,
    pub rules: ZoneRuleTable,
    pub train: Vec<SynthLine>,
    pub test: Vec<SynthLine>,
}

fn middle_key(word: &[&SynthGrapheme]) -> Vec<usize> {
    word.iter().map(|g| g.base).collect()
}

fn build_vocabulary(rng: &mut ChaCha8Rng, cfg: &SynthConfig, gs: &[SynthGrapheme]) -> Result<Vocabulary> {
    let marked: Vec<&SynthGrapheme> = gs.iter().filter(|g| g.upper || g.lower).collect();
    let mut used = BTreeSet::new();
    let mut keyword_middles = BTreeSet::new();
    let mut keywords = Vec::new();
    let mut keyword_forms = Vec::new();
    let mut tries = 0;
    while keywords.len() < cfg.keywords {
        tries += 1;
        if tries > 10_000 {
            return Err(Error::InvalidInput("synth config: cannot draw enough distinct keywords".into()));
        }
        let len = rng.gen_range(2..=4);
        let mut w: Vec<&SynthGrapheme> = (0..len).map(|_| gs.choose(rng).unwrap()).collect();
        // most keywords carry at least one mark so that marks matter for spotting
        if keywords.len() * 4 < cfg.keywords * 3 && !marked.is_empty() && !w.iter().any(|g| g.upper || g.lower) {
            let i = rng.gen_range(0..len);
            w[i] = marked.choose(rng).unwrap();
        }
        let text: String = w.iter().map(|g| g.text.as_str()).collect();
        if used.contains(&text) || !keyword_middles.insert(middle_key(&w)) {
            continue;
        }
        used.insert(text.clone());
        keywords.push(text);
        keyword_forms.push(w);
    }
    let mut siblings = Vec::new();
    for w in keyword_forms.iter().take(cfg.keywords / 2) {
        let positions: Vec<usize> = (0..w.len()).filter(|&i| w[i].upper || w[i].lower).collect();
        let Some(&i) = positions.choose(rng) else { continue };
        let mut s = w.clone();
        s[i] = gs.iter().find(|g| g.base == w[i].base && !g.upper && !g.lower).unwrap();
        let text: String = s.iter().map(|g| g.text.as_str()).collect();
        if used.insert(text.clone()) {
            siblings.push(text);
        }
    }
    let mut distractors = Vec::new();
    tries = 0;
    while keywords.len() + siblings.len() + distractors.len() < cfg.vocabulary {
        tries += 1;
        if tries > 100_000 {
            return Err(Error::InvalidInput("synth config: cannot draw enough distinct distractor words".into()));
        }
        let len = rng.gen_range(2..=4);
        let w: Vec<&SynthGrapheme> = (0..len).map(|_| gs.choose(rng).unwrap()).collect();
        let text: String = w.iter().map(|g| g.text.as_str()).collect();
        if keyword_middles.contains(&middle_key(&w)) || !used.insert(text.clone()) {
            continue;
        }
        distractors.push(text);
    }
    Ok(Vocabulary { keywords, siblings, distractors })
}

fn draw_line_words(rng: &mut ChaCha8Rng, v: &Vocabulary) -> Vec<String> {
    let n = rng.gen_range(2..=4);
    let mut words: Vec<String> = Vec::with_capacity(n);
    while words.len() < n {
        let r: f64 = rng.gen();
        let pool = if r < 0.4 || v.siblings.is_empty() && r < 0.45 {
            &v.keywords
        } else if r < 0.45 {
            &v.siblings
        } else {
            &v.distractors
        };
        let w = pool.choose(rng).unwrap();
        if !words.contains(w) {
            words.push(w.clone());
        }
    }
    words
}

struct Writer {
    radius: i64,
    width_scale: f64,
    slant: f64,
    spacing: usize,
    middle: usize,
    top: usize,
}

struct Canvas {
    img: RasterImage,
    min_x: usize,
    max_x: usize,
}

impl Canvas {
    fn dot(&mut self, x: f64, y: f64, r: i64) {
        let (cx, cy) = (x.round() as i64, y.round() as i64);
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy > r * r + r / 2 {
                    continue;
                }
                let (px, py) = (cx + dx, cy + dy);
                if px >= 0 && py >= 0 && (px as usize) < self.img.width() && (py as usize) < self.img.height() {
                    self.img.set(px as usize, py as usize, 1);
                    self.min_x = self.min_x.min(px as usize);
                    self.max_x = self.max_x.max(px as usize);
                }
            }
        }
    }

    fn polyline(&mut self, pts: &[(f64, f64)], r: i64) {
        for seg in pts.windows(2) {
            let ((x0, y0), (x1, y1)) = (seg[0], seg[1]);
            let steps = ((x1 - x0).hypot(y1 - y0) / 0.4).ceil().max(1.0) as usize;
            for s in 0..=steps {
                let t = s as f64 / steps as f64;
                self.dot(x0 + (x1 - x0) * t, y0 + (y1 - y0) * t, r);
            }
        }
    }

    fn fill_rows(&mut self, x0: usize, x1: usize, y0: usize, y1: usize) {
        for y in y0..=y1 {
            for x in x0..=x1.min(self.img.width() - 1) {
                self.img.set(x, y, 1);
            }
        }
        self.min_x = self.min_x.min(x0);
        self.max_x = self.max_x.max(x1);
    }
}

fn jitter_point(rng: &mut ChaCha8Rng, (x, y): (f64, f64)) -> (f64, f64) {
    let x = (x + rng.gen_range(-JITTER..=JITTER)).clamp(0.0, 1.0);
    let y = if y == 0.0 || y == 1.0 { y } else { (y + rng.gen_range(-JITTER..=JITTER)).clamp(0.0, 1.0) };
    (x, y)
}

fn render_line(rng: &mut ChaCha8Rng, cfg: &SynthConfig, gs: &[SynthGrapheme], id: String, words: Vec<String>) -> Result<SynthLine> {
    let w = Writer {
        radius: rng.gen_range(1..=2),
        width_scale: rng.gen_range(0.9..=1.1),
        slant: rng.gen_range(-6.0f64..=6.0).to_radians().tan(),
        spacing: rng.gen_range(3..=7),
        middle: cfg.glyph_height + rng.gen_range(0..=4) - 2,
        top: MARGIN + rng.gen_range(0..=2),
    };
    let upper_row = w.top + cfg.mark_band;
    let lower_row = upper_row + w.middle - 1;
    let height = 2 * MARGIN + 4 + 2 * cfg.mark_band + cfg.glyph_height;
    let glyph_w = (cfg.glyph_width as f64 * w.width_scale).round() as usize;
    let margin = 40;

    let word_graphemes: Vec<Vec<&SynthGrapheme>> = words
        .iter()
        .map(|word| graphemes(word).into_iter().map(|t| gs.iter().find(|g| g.text == t).unwrap()).collect())
        .collect();
    let gaps: Vec<usize> = (1..words.len()).map(|_| rng.gen_range(cfg.word_gap.0..=cfg.word_gap.1)).collect();
    let word_px: Vec<usize> = word_graphemes.iter().map(|g| g.len() * glyph_w + (g.len() - 1) * w.spacing).collect();
    let width = 2 * margin + word_px.iter().sum::<usize>() + gaps.iter().sum::<usize>();
    let mut canvas = Canvas { img: RasterImage::new_binary(width, height), min_x: usize::MAX, max_x: 0 };

    let r = w.radius;
    let stroke_top = (upper_row as i64 + r) as f64;
    let stroke_bottom = (lower_row as i64 - r) as f64;
    let slant = |x: f64, y: f64| x + (lower_row as f64 - y) * w.slant;
    let mut boxes = Vec::new();
    let mut x = margin;
    for (wi, word) in word_graphemes.iter().enumerate() {
        canvas.min_x = usize::MAX;
        canvas.max_x = 0;
        canvas.fill_rows(x.saturating_sub(2), x + word_px[wi] + 1, upper_row, upper_row + 2);
        for (gi, g) in word.iter().enumerate() {
            let gx = (x + gi * (glyph_w + w.spacing)) as f64;
            let gw = glyph_w as f64;
            for line in SHAPES[g.base] {
                let pts: Vec<(f64, f64)> = line
                    .iter()
                    .map(|&p| {
                        let (ux, uy) = jitter_point(rng, p);
                        let y = stroke_top + uy * (stroke_bottom - stroke_top);
                        (slant(gx + ux * gw, y), y)
                    })
                    .collect();
                canvas.polyline(&pts, r);
            }
            if g.upper || g.lower {
                let styles = if g.upper { UPPER_STYLES } else { LOWER_STYLES };
                let style = styles.choose(rng).unwrap();
                let mw = gw * rng.gen_range(0.45..=0.6);
                let cx = gx + gw * (0.5 + rng.gen_range(-0.08..=0.08));
                let (y0, y1) = if g.upper {
                    ((upper_row + 2 - cfg.mark_band) as f64 + r as f64, (upper_row - 2) as f64 - r as f64)
                } else {
                    ((lower_row + 2) as f64 + r as f64, (lower_row + cfg.mark_band - 2) as f64 - r as f64)
                };
                let pts: Vec<(f64, f64)> = style
                    .iter()
                    .map(|&p| {
                        let (ux, uy) = jitter_point(rng, p);
                        let y = y0 + uy * (y1 - y0);
                        (slant(cx + (ux - 0.5) * mw, y), y)
                    })
                    .collect();
                canvas.polyline(&pts, r);
            }
        }
        boxes.push(WordBox { text: words[wi].clone(), x_start: canvas.min_x, x_end: canvas.max_x + 1 });
        x += word_px[wi] + gaps.get(wi).copied().unwrap_or(0);
    }

    let mut img = canvas.img;
    let mut rows = vec![(upper_row, lower_row); width];
    if cfg.skew_jitter > 0.0 {
        let tan = rng.gen_range(-cfg.skew_jitter..=cfg.skew_jitter).to_radians().tan();
        let offsets: Vec<i64> = (0..width).map(|c| ((c as f64 - width as f64 / 2.0) * tan).round() as i64).collect();
        let pad = offsets.iter().map(|o| o.unsigned_abs()).max().unwrap_or(0) as usize;
        let mut out = RasterImage::new_binary(width, height + 2 * pad);
        for yy in 0..height {
            for c in 0..width {
                if img.is_ink(c, yy) {
                    out.set(c, (yy as i64 + pad as i64 + offsets[c]) as usize, 1);
                }
            }
        }
        for (c, row) in rows.iter_mut().enumerate() {
            let shift = |v: usize| (v as i64 + pad as i64 + offsets[c]) as usize;
            *row = (shift(row.0), shift(row.1));
        }
        img = out;
    }
    if cfg.salt_pepper > 0.0 {
        for yy in 0..img.height() {
            for c in 0..img.width() {
                if rng.gen_bool(cfg.salt_pepper) {
                    let v = 1 - img.get(c, yy);
                    img.set(c, yy, v);
                }
            }
        }
    }
    let zones = ZoneBoundaries::from_columns(img.height(), rows)?;
    Ok(SynthLine { id, text: words.join(" "), image: img, zones, words: boxes })
}

/// Generates a corpus; identical configurations give identical corpora.
pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gs = script_graphemes(cfg);
    let vocabulary = build_vocabulary(&mut rng, cfg, &gs)?;
    let make = |prefix: &str, n: usize, rng: &mut ChaCha8Rng| -> Result<Vec<SynthLine>> {
        (0..n)
            .map(|i| {
                let words = draw_line_words(rng, &vocabulary);
                render_line(rng, cfg, &gs, format!("{prefix}{i:04}"), words)
            })
            .collect()
    };
    let train = make("train", cfg.train_lines, &mut rng)?;
    let test = make("test", cfg.test_lines, &mut rng)?;
    Ok(SynthCorpus { config: cfg.clone(), vocabulary: vocabulary.clone(), rules: rule_table(cfg), train, test })
}

/// Paths of a corpus written by [`SynthCorpus::write`].
#[derive(Debug, Clone)]
pub struct CorpusLayout {
    pub root: PathBuf,
}

impl CorpusLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        CorpusLayout { root: root.into() }
    }
    pub fn train_manifest(&self) -> PathBuf {
        self.root.join("train.tsv")
    }
    pub fn test_manifest(&self) -> PathBuf {
        self.root.join("test.tsv")
    }
    pub fn rules(&self) -> PathBuf {
        self.root.join("rules.tsv")
    }
    pub fn keywords(&self) -> PathBuf {
        self.root.join("keywords.txt")
    }
    pub fn words(&self) -> PathBuf {
        self.root.join("words.tsv")
    }
    pub fn config(&self) -> PathBuf {
        self.root.join("synth.conf")
    }
}

impl SynthCorpus {
    pub fn lines(&self) -> impl Iterator<Item = &SynthLine> {
        self.train.iter().chain(&self.test)
    }

    /// Writes images, zone truth, manifests, rule table, keyword list and
    /// word boxes under `dir`.
    pub fn write(&self, dir: &Path) -> Result<CorpusLayout> {
        let layout = CorpusLayout::new(dir);
        for sub in ["images", "zones"] {
            let p = dir.join(sub);
            fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        let mut words = String::new();
        for (lines, path) in [(&self.train, layout.train_manifest()), (&self.test, layout.test_manifest())] {
            let mut records = Vec::new();
            for l in lines.iter() {
                let image = PathBuf::from(format!("images/{}.pbm", l.id));
                let zones = PathBuf::from(format!("zones/{}.tsv", l.id));
                pnm::write_pnm(&dir.join(&image), &l.image)?;
                l.zones.save(&dir.join(&zones))?;
                for (i, wb) in l.words.iter().enumerate() {
                    let _ = writeln!(words, "{}\t{i}\t{}\t{}\t{}", l.id, wb.x_start, wb.x_end, wb.text);
                }
                records.push(ManifestRecord { line_id: l.id.clone(), image, transcription: l.text.clone(), zones: Some(zones) });
            }
            let m = Manifest { root: dir.to_path_buf(), records };
            fs::write(&path, m.to_tsv()).map_err(|e| Error::io(&path, e))?;
        }
        let write = |p: PathBuf, text: String| fs::write(&p, text).map_err(|e| Error::io(&p, e));
        write(layout.words(), words)?;
        self.rules.save(&layout.rules())?;
        write(layout.keywords(), self.vocabulary.keywords.iter().map(|k| format!("{k}\n")).collect())?;
        write(layout.config(), self.config.to_config().to_text())?;
        Ok(layout)
    }
}

/// Word boxes read back from `words.tsv`, grouped per line in file order.
pub fn read_word_boxes(path: &Path) -> Result<Vec<(String, WordBox)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let c: Vec<&str> = line.split('\t').collect();
        if c.len() != 5 {
            return Err(Error::parse(path, n + 1, "expected line_id, index, x_start, x_end, text"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|e| Error::parse(path, n + 1, e.to_string()));
        let (x_start, x_end) = (num(c[2])?, num(c[3])?);
        if x_end <= x_start {
            return Err(Error::parse(path, n + 1, "empty word box"));
        }
        out.push((c[0].to_string(), WordBox { text: c[4].to_string(), x_start, x_end }));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::bottom_reservoirs;

    fn small() -> SynthConfig {
        SynthConfig { train_lines: 12, test_lines: 4, ..SynthConfig::default() }
    }

    #[test]
    fn script_has_sixteen_graphemes() {
        let gs = script_graphemes(&SynthConfig::default());
        assert_eq!(gs.len(), 16);
        assert_eq!(gs.iter().filter(|g| g.upper).count(), 3);
        assert_eq!(gs.iter().filter(|g| g.lower).count(), 3);
        for g in &gs {
            assert_eq!(graphemes(&g.text).len(), 1, "{:?}", g.text);
        }
        assert_eq!(rule_table(&SynthConfig::default()).middle_charset().len(), 10);
    }

    #[test]
    fn deterministic_and_well_formed() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.vocabulary, b.vocabulary);
        assert_eq!(a.train.len(), 12);
        for (x, y) in a.lines().zip(b.lines()) {
            assert_eq!(x.image, y.image);
            assert_eq!(x.text, y.text);
        }
        let v = &a.vocabulary;
        assert_eq!(v.keywords.len(), 8);
        assert_eq!(v.keywords.len() + v.siblings.len() + v.distractors.len(), 30);
        for l in a.lines() {
            assert!(!bottom_reservoirs(&l.image).is_empty(), "{}", l.id);
            let (u, lo) = (l.zones.upper(0), l.zones.lower(0));
            // the headline's top row is ink somewhere and nothing of the body crosses the middle band
            assert!((0..l.image.width()).any(|x| l.image.is_ink(x, u)));
            assert!((0..l.image.width()).any(|x| l.image.is_ink(x, lo)));
            assert_eq!(l.words.len(), l.text.split(' ').count());
            assert!(l.words.windows(2).all(|w| w[0].x_end < w[1].x_start));
        }
    }

    #[test]
    fn marks_stay_in_their_bands() {
        let cfg = small();
        let c = generate(&cfg).unwrap();
        for l in c.lines() {
            let has_upper = l.text.contains(UPPER_MARK);
            let has_lower = l.text.contains(LOWER_MARK);
            let (u, lo) = (l.zones.upper(0), l.zones.lower(0));
            let above = (0..u).any(|y| (0..l.image.width()).any(|x| l.image.is_ink(x, y)));
            let below = (lo + 1..l.image.height()).any(|y| (0..l.image.width()).any(|x| l.image.is_ink(x, y)));
            assert_eq!(above, has_upper, "{}", l.id);
            assert_eq!(below, has_lower, "{}", l.id);
        }
    }

    #[test]
    fn skew_shifts_truth_with_ink() {
        let cfg = SynthConfig { skew_jitter: 3.0, ..small() };
        let c = generate(&cfg).unwrap();
        for l in c.lines() {
            for x in 0..l.image.width() {
                let u = l.zones.upper(x);
                let lo = l.zones.lower(x);
                assert!(u < lo);
                if let Some(top) = (0..l.image.height()).find(|&y| l.image.is_ink(x, y)) {
                    if !l.text.contains(UPPER_MARK) {
                        assert!(top >= u, "{} col {x}", l.id);
                    }
                }
            }
        }
    }

    #[test]
    fn write_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = generate(&SynthConfig { train_lines: 3, test_lines: 2, ..SynthConfig::default() }).unwrap();
        let layout = c.write(dir.path()).unwrap();
        let m = Manifest::load(&layout.train_manifest()).unwrap();
        assert_eq!(m.records.len(), 3);
        let img = pnm::read_pnm(&m.image_path(&m.records[0])).unwrap();
        assert_eq!(img, c.train[0].image);
        let zb = ZoneBoundaries::load(&m.zones_path(&m.records[0]).unwrap()).unwrap();
        assert_eq!(zb, c.train[0].zones);
        assert_eq!(read_word_boxes(&layout.words()).unwrap().len(), c.lines().map(|l| l.words.len()).sum::<usize>());
        let back = SynthConfig::from_config(&Config::load(&layout.config()).unwrap()).unwrap();
        assert_eq!(back, c.config);
        assert_eq!(ZoneRuleTable::load(&layout.rules()).unwrap(), c.rules);
    }
}
