//! Line manifests: `line_id<TAB>image_path<TAB>transcription<TAB>[zones_path]`
//! with paths relative to the manifest's directory.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    pub line_id: String,
    pub image: PathBuf,
    pub transcription: String,
    pub zones: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub root: PathBuf,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let c: Vec<&str> = line.split('\t').collect();
            if !(3..=4).contains(&c.len()) {
                return Err(Error::parse(path, n + 1, format!("expected 3 or 4 columns, found {}", c.len())));
            }
            if !seen.insert(c[0].to_string()) {
                return Err(Error::parse(path, n + 1, format!("duplicate line id {:?}", c[0])));
            }
            records.push(ManifestRecord {
                line_id: c[0].to_string(),
                image: PathBuf::from(c[1]),
                transcription: c[2].to_string(),
                zones: c.get(3).filter(|z| !z.is_empty()).map(PathBuf::from),
            });
        }
        Ok(Manifest { root, records })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            let zones = r.zones.as_ref().map(|z| z.display().to_string()).unwrap_or_default();
            let _ = writeln!(s, "{}\t{}\t{}\t{}", r.line_id, r.image.display(), r.transcription, zones);
        }
        s
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn image_path(&self, r: &ManifestRecord) -> PathBuf {
        self.resolve(&r.image)
    }

    pub fn zones_path(&self, r: &ManifestRecord) -> Option<PathBuf> {
        r.zones.as_ref().map(|z| self.resolve(z))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_resolve_round_trip() {
        let text = "l1\timages/l1.pbm\tab cd\tzones/l1.tsv\nl2\timages/l2.pbm\tef\t\n";
        let m = Manifest::parse(text, Path::new("/data/train.tsv")).unwrap();
        assert_eq!(m.records.len(), 2);
        assert_eq!(m.image_path(&m.records[0]), PathBuf::from("/data/images/l1.pbm"));
        assert_eq!(m.zones_path(&m.records[1]), None);
        assert_eq!(Manifest::parse(&m.to_tsv(), Path::new("/data/train.tsv")).unwrap(), m);
        assert!(Manifest::parse("a\tb\tc\na\tb\tc\n", Path::new("m")).is_err());
    }
}
