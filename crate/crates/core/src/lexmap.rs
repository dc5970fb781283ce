//! Full-form keyword strings to middle-zone transcriptions plus expected
//! upper and lower modifier counts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use unicode_segmentation::UnicodeSegmentation;

use crate::error::{Error, Result};

/// How one grapheme projects onto the middle zone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoneRule {
    /// Middle-zone symbols, possibly empty.
    pub middle: Vec<String>,
    pub upper: usize,
    pub lower: usize,
}

/// Grapheme-keyed mapping rules.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ZoneRuleTable {
    rules: BTreeMap<String, ZoneRule>,
}

/// A query keyword with its middle-zone form and modifier counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KeywordQuery {
    pub raw: String,
    pub middle: Vec<String>,
    pub upper: usize,
    pub lower: usize,
}

/// Splits text into extended grapheme clusters.
pub fn graphemes(text: &str) -> Vec<&str> {
    text.graphemes(true).collect()
}

impl ZoneRuleTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, grapheme: impl Into<String>, rule: ZoneRule) -> Result<()> {
        let g = grapheme.into();
        if self.rules.contains_key(&g) {
            return Err(Error::InvalidInput(format!("duplicate rule for {g:?}")));
        }
        self.rules.insert(g, rule);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn get(&self, grapheme: &str) -> Option<&ZoneRule> {
        self.rules.get(grapheme)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ZoneRule)> {
        self.rules.iter().map(|(g, r)| (g.as_str(), r))
    }

    /// All graphemes that have a rule (the full-form charset).
    pub fn graphemes(&self) -> impl Iterator<Item = &str> {
        self.rules.keys().map(String::as_str)
    }

    /// Distinct middle-zone symbols, sorted.
    pub fn middle_charset(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.rules.values().flat_map(|r| &r.middle).collect();
        set.into_iter().cloned().collect()
    }

    /// Parses `grapheme<TAB>middle_form<TAB>upper<TAB>lower` rows. Middle
    /// forms are space-separated symbols, or `-` when empty; `#` starts a
    /// comment. With `middle_charset`, every middle symbol must belong to it.
    pub fn parse(text: &str, path: &Path, middle_charset: Option<&[String]>) -> Result<Self> {
        let mut table = ZoneRuleTable::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim_end_matches(['\r', ' ']);
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(Error::parse(path, line_no, format!("expected 4 tab-separated columns, found {}", cols.len())));
            }
            let grapheme = cols[0].trim();
            if graphemes(grapheme).len() != 1 {
                return Err(Error::parse(path, line_no, format!("{grapheme:?} is not a single grapheme")));
            }
            let middle: Vec<String> = match cols[1].trim() {
                "-" | "" => Vec::new(),
                m => m.split(' ').filter(|s| !s.is_empty()).map(String::from).collect(),
            };
            if let Some(cs) = middle_charset {
                if let Some(bad) = middle.iter().find(|s| !cs.contains(s)) {
                    return Err(Error::parse(path, line_no, format!("unknown middle symbol {bad:?}")));
                }
            }
            let count = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::parse(path, line_no, format!("bad count {s:?}: {e}")));
            let rule = ZoneRule { middle, upper: count(cols[2])?, lower: count(cols[3])? };
            if table.rules.contains_key(grapheme) {
                return Err(Error::parse(path, line_no, format!("duplicate rule for {grapheme:?}")));
            }
            table.rules.insert(grapheme.to_string(), rule);
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path, None)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("# grapheme\tmiddle_form\tupper\tlower\n");
        for (g, r) in &self.rules {
            let middle = if r.middle.is_empty() { "-".to_string() } else { r.middle.join(" ") };
            let _ = writeln!(s, "{g}\t{middle}\t{}\t{}", r.upper, r.lower);
        }
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    /// Checks that every grapheme of `charset` has a rule.
    pub fn covers<S: AsRef<str>>(&self, charset: &[S]) -> Result<()> {
        match charset.iter().find(|g| !self.rules.contains_key(g.as_ref())) {
            Some(g) => Err(Error::UnmappedGrapheme(g.as_ref().to_string())),
            None => Ok(()),
        }
    }
}

/// Concatenates the middle forms of `raw`'s graphemes and sums their marks.
pub fn map_keyword(raw: &str, table: &ZoneRuleTable) -> Result<KeywordQuery> {
    let mut q = KeywordQuery { raw: raw.to_string(), middle: Vec::new(), upper: 0, lower: 0 };
    for g in graphemes(raw) {
        let rule = table.get(g).ok_or_else(|| Error::UnmappedGrapheme(g.to_string()))?;
        q.middle.extend(rule.middle.iter().cloned());
        q.upper += rule.upper;
        q.lower += rule.lower;
    }
    if q.middle.is_empty() {
        return Err(Error::EmptyMiddleForm(raw.to_string()));
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table() -> ZoneRuleTable {
        let text = "# synthetic\na\ta\t0\t0\nb\tb\t0\t0\na\u{302}\ta\t1\t0\nb\u{323}\tb\t0\t1\n\u{2c6}\t-\t1\t0\n";
        ZoneRuleTable::parse(text, Path::new("t.tsv"), None).unwrap()
    }

    #[test]
    fn identity_and_modifier_rules() {
        let t = table();
        let q = map_keyword("a", &t).unwrap();
        assert_eq!((q.middle, q.upper, q.lower), (vec!["a".to_string()], 0, 0));
        let q = map_keyword("a\u{302}b\u{323}", &t).unwrap();
        assert_eq!((q.middle.join(""), q.upper, q.lower), ("ab".to_string(), 1, 1));
        assert!(matches!(map_keyword("c", &t), Err(Error::UnmappedGrapheme(_))));
        assert!(matches!(map_keyword("\u{2c6}", &t), Err(Error::EmptyMiddleForm(_))));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dup = "a\ta\t0\t0\n\na\ta\t1\t0\n";
        match ZoneRuleTable::parse(dup, Path::new("r.tsv"), None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let cs = vec!["a".to_string()];
        assert!(ZoneRuleTable::parse("b\tb\t0\t0\n", Path::new("r"), Some(&cs)).is_err());
        assert!(ZoneRuleTable::parse("a\ta\tx\t0\n", Path::new("r"), None).is_err());
        let empty = ZoneRuleTable::parse("", Path::new("r"), None).unwrap();
        assert!(empty.is_empty());
        empty.covers::<&str>(&[]).unwrap();
    }

    #[test]
    fn tsv_round_trip() {
        let t = table();
        let back = ZoneRuleTable::parse(&t.to_tsv(), Path::new("r"), None).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.to_tsv(), t.to_tsv());
        assert_eq!(t.middle_charset(), vec!["a".to_string(), "b".to_string()]);
    }

    proptest! {
        #[test]
        fn counts_add_over_concatenation(a in "[ab]{1,5}", b in "[ab]{1,5}", ma in proptest::collection::vec(any::<bool>(), 5)) {
            let t = table();
            let decorate = |s: &str| -> String {
                s.chars().zip(ma.iter().cycle()).map(|(c, &m)| match (c, m) {
                    ('a', true) => "a\u{302}".to_string(),
                    ('b', true) => "b\u{323}".to_string(),
                    (c, _) => c.to_string(),
                }).collect()
            };
            let (a, b) = (decorate(&a), decorate(&b));
            let qa = map_keyword(&a, &t).unwrap();
            let qb = map_keyword(&b, &t).unwrap();
            let qab = map_keyword(&(a.clone() + &b), &t).unwrap();
            prop_assert_eq!(qab.upper, qa.upper + qb.upper);
            prop_assert_eq!(qab.lower, qa.lower + qb.lower);
            let expect: usize = graphemes(&a).iter().chain(&graphemes(&b)).map(|g| t.get(g).unwrap().middle.len()).sum();
            prop_assert_eq!(qab.middle.len(), expect);
        }
    }
}
