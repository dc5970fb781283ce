use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::spotting::SpotHit;

/// Keywords truly present in each line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    lines: BTreeMap<String, BTreeSet<String>>,
}

impl GroundTruth {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_line(&mut self, line_id: impl Into<String>, keywords: impl IntoIterator<Item = String>) -> Result<()> {
        let id = line_id.into();
        if self.lines.contains_key(&id) {
            return Err(Error::InvalidInput(format!("duplicate line id {id:?}")));
        }
        self.lines.insert(id, keywords.into_iter().collect());
        Ok(())
    }

    /// Ground truth from line transcriptions: a keyword is present when it
    /// occurs as a whitespace-separated word.
    pub fn from_transcriptions<'a, S: AsRef<str>>(lines: impl IntoIterator<Item = (&'a str, &'a str)>, keywords: &[S]) -> Result<Self> {
        let mut gt = GroundTruth::new();
        for (id, text) in lines {
            let words: BTreeSet<&str> = text.split_whitespace().collect();
            let present = keywords.iter().map(|k| k.as_ref()).filter(|k| words.contains(k)).map(String::from);
            gt.insert_line(id, present)?;
        }
        Ok(gt)
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn contains_line(&self, id: &str) -> bool {
        self.lines.contains_key(id)
    }

    pub fn line_ids(&self) -> impl Iterator<Item = &str> {
        self.lines.keys().map(String::as_str)
    }

    pub fn is_relevant(&self, line_id: &str, keyword: &str) -> bool {
        self.lines.get(line_id).is_some_and(|k| k.contains(keyword))
    }

    /// Lines that contain `keyword`.
    pub fn relevant_count(&self, keyword: &str) -> usize {
        self.lines.values().filter(|k| k.contains(keyword)).count()
    }
}

/// Average precision of a ranked relevance list, given the number of
/// relevant items overall (relevant items never retrieved count as misses).
pub fn average_precision(ranked: &[bool], total_relevant: usize) -> f64 {
    if total_relevant == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &rel) in ranked.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    sum / total_relevant as f64
}

/// One threshold of a precision-recall sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// Per-keyword outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct KeywordAp {
    pub keyword: String,
    pub ap: f64,
    pub relevant: usize,
    pub retrieved_relevant: usize,
}

/// Retrieval quality of a hit list.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_keyword: Vec<KeywordAp>,
    /// Mean of per-keyword AP over keywords with at least one relevant line.
    pub map: f64,
    /// Keywords left out of the mean for having no relevant line.
    pub excluded: Vec<String>,
    pub curve: Vec<CurvePoint>,
    /// Area under the pooled precision-recall curve.
    pub curve_area: f64,
}

/// Stable ranking: score descending, then line id.
fn ranked<'a>(hits: impl Iterator<Item = &'a SpotHit>) -> Vec<&'a SpotHit> {
    let mut v: Vec<&SpotHit> = hits.collect();
    v.sort_by(|x, y| y.score.total_cmp(&x.score).then_with(|| x.line_id.cmp(&y.line_id)).then_with(|| x.keyword.cmp(&y.keyword)));
    v
}

/// Pooled precision-recall sweep over every distinct score. Recall uses all
/// relevant `(keyword, line)` pairs of `keywords`.
pub fn pr_curve(hits: &[SpotHit], gt: &GroundTruth, keywords: &[String]) -> Result<Vec<CurvePoint>> {
    if gt.is_empty() {
        return Err(Error::InvalidInput("ground truth is empty".into()));
    }
    let total: usize = keywords.iter().map(|k| gt.relevant_count(k)).sum();
    let list = ranked(hits.iter().filter(|h| h.kept));
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    for (i, h) in list.iter().enumerate() {
        if gt.is_relevant(&h.line_id, &h.keyword) {
            tp += 1;
        } else {
            fp += 1;
        }
        if i + 1 < list.len() && list[i + 1].score == h.score {
            continue;
        }
        out.push(CurvePoint {
            threshold: h.score,
            precision: tp as f64 / (tp + fp) as f64,
            recall: if total == 0 { 0.0 } else { tp as f64 / total as f64 },
            tp,
            fp,
            fn_: total.saturating_sub(tp),
        });
    }
    Ok(out)
}

/// Step-wise area under a precision-recall curve ordered by falling threshold.
pub fn curve_area(curve: &[CurvePoint]) -> f64 {
    let mut prev_r = 0.0;
    let mut area = 0.0;
    for p in curve {
        area += (p.recall - prev_r) * p.precision;
        prev_r = p.recall;
    }
    area
}

/// Highest precision reached at recall `r` or beyond (0 if never reached).
pub fn precision_at_recall(curve: &[CurvePoint], r: f64) -> f64 {
    curve.iter().filter(|p| p.recall >= r - 1e-12).map(|p| p.precision).fold(0.0, f64::max)
}

/// AP per keyword over the kept hits, and their mean.
pub fn mean_average_precision(hits: &[SpotHit], gt: &GroundTruth, keywords: &[String]) -> (Vec<KeywordAp>, f64, Vec<String>) {
    let mut per = Vec::new();
    let mut excluded = Vec::new();
    for kw in keywords {
        let relevant = gt.relevant_count(kw);
        if relevant == 0 {
            excluded.push(kw.clone());
            continue;
        }
        let list = ranked(hits.iter().filter(|h| h.kept && &h.keyword == kw));
        let rel: Vec<bool> = list.iter().map(|h| gt.is_relevant(&h.line_id, kw)).collect();
        per.push(KeywordAp {
            keyword: kw.clone(),
            ap: average_precision(&rel, relevant),
            relevant,
            retrieved_relevant: rel.iter().filter(|&&r| r).count(),
        });
    }
    let map = if per.is_empty() { 0.0 } else { per.iter().map(|k| k.ap).sum::<f64>() / per.len() as f64 };
    (per, map, excluded)
}

/// Full report. Every hit must refer to a line of `gt`.
pub fn evaluate(hits: &[SpotHit], gt: &GroundTruth, keywords: &[String]) -> Result<EvalReport> {
    let missing: BTreeSet<&str> = hits.iter().map(|h| h.line_id.as_str()).filter(|id| !gt.contains_line(id)).collect();
    if !missing.is_empty() {
        let list: Vec<&str> = missing.into_iter().collect();
        return Err(Error::InvalidInput(format!("hits reference unknown line ids: {}", list.join(", "))));
    }
    let (per_keyword, map, excluded) = mean_average_precision(hits, gt, keywords);
    let curve = pr_curve(hits, gt, keywords)?;
    let curve_area = curve_area(&curve);
    Ok(EvalReport { per_keyword, map, excluded, curve, curve_area })
}

impl EvalReport {
    pub fn curve_csv(&self) -> String {
        let mut s = String::from("threshold,precision,recall\n");
        for p in &self.curve {
            let _ = writeln!(s, "{:.9},{:.9},{:.9}", p.threshold, p.precision, p.recall);
        }
        s
    }

    pub fn report_tsv(&self) -> String {
        let mut s = String::from("keyword\tap\trelevant\tretrieved_relevant\n");
        for k in &self.per_keyword {
            let _ = writeln!(s, "{}\t{:.6}\t{}\t{}", k.keyword, k.ap, k.relevant, k.retrieved_relevant);
        }
        for k in &self.excluded {
            let _ = writeln!(s, "# excluded\t{k}");
        }
        let _ = writeln!(s, "MAP\t{:.6}", self.map);
        let _ = writeln!(s, "curve_area\t{:.6}", self.curve_area);
        s
    }

    /// Precision-recall chart on a fixed 800×600 canvas.
    pub fn curve_svg(&self, title: &str) -> String {
        let (x0, y0, w, h) = (80.0, 40.0, 680.0, 480.0);
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 800 600" width="800" height="600">"#);
        let _ = writeln!(s, r#"<rect x="0" y="0" width="800" height="600" fill="white"/>"#);
        let _ = writeln!(s, r#"<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="black"/>"#);
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{t:.1}</text>"#, x0 + t * w, y0 + h + 20.0);
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="end">{t:.1}</text>"#, x0 - 8.0, y0 + h - t * h + 4.0);
        }
        let pts: Vec<String> = self.curve.iter().map(|p| format!("{:.2},{:.2}", x0 + p.recall * w, y0 + h - p.precision * h)).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#, pts.join(" "));
        let _ = writeln!(s, r#"<text x="400" y="24" font-size="16" text-anchor="middle">{}</text>"#, escape(title));
        let _ = writeln!(s, r#"<text x="400" y="590" font-size="14" text-anchor="middle">recall</text>"#);
        let _ = writeln!(s, r#"<text x="20" y="300" font-size="14" text-anchor="middle" transform="rotate(-90 20 300)">precision</text>"#);
        s.push_str("</svg>\n");
        s
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Parses a `threshold,precision,recall` curve.
pub fn parse_curve_csv(text: &str) -> Result<Vec<(f64, f64, f64)>> {
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse::<f64>().map_err(|e| Error::format("curve", e.to_string()))).collect::<Result<_>>()?;
            if v.len() != 3 {
                return Err(Error::format("curve", format!("expected 3 fields in {l:?}")));
            }
            Ok((v[0], v[1], v[2]))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spotting::RerankStatus;

    fn hit(line: &str, kw: &str, score: f64) -> SpotHit {
        SpotHit {
            line_id: line.into(),
            keyword: kw.into(),
            a: 0,
            b: 1,
            l_s: 0,
            l_f: 1,
            score,
            kept: true,
            rerank: RerankStatus::NotApplied,
            n_upper: None,
            n_lower: None,
        }
    }

    fn gt() -> GroundTruth {
        GroundTruth::from_transcriptions([("l1", "ka ma"), ("l2", "ra"), ("l3", "ka")], &["ka"]).unwrap()
    }

    #[test]
    fn ap_examples() {
        assert!((average_precision(&[true, false, true], 2) - 0.833_333_333_333_333_4).abs() < 1e-9);
        assert_eq!(average_precision(&[true, true], 2), 1.0);
        assert!((average_precision(&[false, false, false, true], 1) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn curve_by_hand() {
        let hits = vec![hit("l1", "ka", 3.0), hit("l2", "ka", 2.0), hit("l3", "ka", 1.0)];
        let curve = pr_curve(&hits, &gt(), &["ka".to_string()]).unwrap();
        let pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.recall, (p.precision * 1000.0).round() / 1000.0)).collect();
        assert_eq!(pts, vec![(0.5, 1.0), (0.5, 0.5), (1.0, 0.667)]);
        let report = evaluate(&hits, &gt(), &["ka".to_string()]).unwrap();
        assert!((report.map - 0.8333333333333334).abs() < 1e-12);
        assert!((report.curve_area - report.map).abs() < 1e-12);
        assert!(evaluate(&[hit("zz", "ka", 1.0)], &gt(), &["ka".to_string()]).is_err());
        let back = parse_curve_csv(&report.curve_csv()).unwrap();
        assert_eq!(back.len(), 3);
        assert!(report.curve_svg("t").contains("viewBox=\"0 0 800 600\""));
    }

    #[test]
    fn perfect_hits_and_exclusions() {
        let hits = vec![hit("l1", "ka", 3.0), hit("l3", "ka", 2.0), hit("l2", "ka", 1.0)];
        let kws = vec!["ka".to_string(), "zu".to_string()];
        let r = evaluate(&hits, &gt(), &kws).unwrap();
        assert_eq!(r.map, 1.0);
        assert_eq!(r.excluded, vec!["zu".to_string()]);
        assert_eq!(precision_at_recall(&r.curve, 1.0), 1.0);
    }

    #[test]
    fn recall_never_rises_with_threshold() {
        let hits: Vec<SpotHit> = (0..20).map(|i| hit(&format!("l{i}"), "ka", (i * 7 % 11) as f64)).collect();
        let mut g = GroundTruth::new();
        for i in 0..20 {
            g.insert_line(format!("l{i}"), (i % 3 == 0).then(|| "ka".to_string())).unwrap();
        }
        let curve = pr_curve(&hits, &g, &["ka".to_string()]).unwrap();
        for w in curve.windows(2) {
            assert!(w[0].threshold > w[1].threshold && w[0].recall <= w[1].recall);
        }
    }
}
