use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::Grade;

pub const MANIFEST_HEADER: [&str; 5] = ["sep_id", "image", "annotation", "label", "label2"];

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub sep_id: String,
    pub image: PathBuf,
    pub annotation: PathBuf,
    /// Reference label (final diagnosis or first rater).
    pub label: Option<Grade>,
    /// Second rater.
    pub label2: Option<Grade>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    /// Reads a manifest; relative paths resolve against its directory and
    /// every referenced file must exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let m = Self::parse(&text, base)?;
        for e in &m.entries {
            for p in [&e.image, &e.annotation] {
                if !p.is_file() {
                    return Err(Error::Manifest(format!("{}: missing file {}", e.sep_id, p.display())));
                }
            }
        }
        Ok(m)
    }

    /// Parses manifest text without touching the file system.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let col = |name: &str| header.iter().position(|h| h == name);
        let (Some(id), Some(img), Some(ann)) = (col("sep_id"), col("image"), col("annotation")) else {
            return Err(Error::Manifest(format!("header must be {}", MANIFEST_HEADER.join(","))));
        };
        let (l1, l2) = (col("label"), col("label2"));
        let mut seen = HashSet::new();
        let mut entries = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = row + 2;
            let get = |i: usize| rec.get(i).unwrap_or("");
            let label = |c: Option<usize>| -> Result<Option<Grade>> {
                match c.map(get) {
                    None | Some("") => Ok(None),
                    Some(s) => s
                        .parse()
                        .map(Some)
                        .map_err(|_| Error::Manifest(format!("line {line}: unknown grade {s:?}"))),
                }
            };
            let sep_id = get(id).to_string();
            if sep_id.is_empty() {
                return Err(Error::Manifest(format!("line {line}: empty sep_id")));
            }
            if !seen.insert(sep_id.clone()) {
                return Err(Error::Manifest(format!("line {line}: duplicate sep_id {sep_id}")));
            }
            entries.push(ManifestEntry {
                image: base.join(get(img)),
                annotation: base.join(get(ann)),
                label: label(l1)?,
                label2: label(l2)?,
                sep_id,
            });
        }
        Ok(Self { entries })
    }

    /// Manifest text with paths written relative to `base` where possible.
    pub fn to_csv(&self, base: &Path) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(MANIFEST_HEADER)?;
        let rel = |p: &Path| p.strip_prefix(base).unwrap_or(p).to_string_lossy().into_owned();
        for e in &self.entries {
            w.write_record([
                e.sep_id.clone(),
                rel(&e.image),
                rel(&e.annotation),
                e.label.map(|g| g.to_string()).unwrap_or_default(),
                e.label2.map(|g| g.to_string()).unwrap_or_default(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Table(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Table(e.to_string()))
    }
}
