//! Semantic search indexes and the concept → index map file.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A path of cluster indices through the label tree, ending in the concept's
/// position within its terminal node. Rendered as digits joined by `-`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SsId(Vec<u32>);

impl SsId {
    pub fn new(digits: Vec<u32>) -> Result<Self> {
        if digits.is_empty() {
            return Err(Error::InvalidSsid(String::new()));
        }
        Ok(Self(digits))
    }

    pub fn digits(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for SsId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl FromStr for SsId {
    type Err = Error;

    /// Accepts only the canonical rendering: no sign, no leading zeros, no spaces.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidSsid(s.to_string());
        let digits = s
            .split('-')
            .map(|part| {
                let canonical = !part.is_empty()
                    && part.bytes().all(|b| b.is_ascii_digit())
                    && (part == "0" || !part.starts_with('0'));
                if !canonical {
                    return Err(bad());
                }
                part.parse::<u32>().map_err(|_| bad())
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(digits)
    }
}

/// Injective concept → ssID assignment, kept in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SsidMap {
    entries: Vec<(String, SsId)>,
    by_id: HashMap<String, usize>,
}

impl SsidMap {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, SsId)>) -> Result<Self> {
        let mut map = Self::default();
        let mut seen: HashMap<SsId, usize> = HashMap::new();
        for (id, ssid) in pairs {
            if let Some(&j) = seen.get(&ssid) {
                return Err(Error::DuplicateSsid {
                    ssid: ssid.to_string(),
                    first: map.entries[j].0.clone(),
                    second: id,
                });
            }
            if map.by_id.contains_key(&id) {
                return Err(Error::Config(format!("concept {id:?} mapped twice")));
            }
            seen.insert(ssid.clone(), map.entries.len());
            map.by_id.insert(id.clone(), map.entries.len());
            map.entries.push((id, ssid));
        }
        Ok(map)
    }

    /// Parses rendered index strings; fails on anything that is not an ssID.
    pub fn from_index_strings(pairs: &[(String, String)]) -> Result<Self> {
        Self::from_pairs(
            pairs
                .iter()
                .map(|(id, s)| Ok((id.clone(), s.parse::<SsId>()?)))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&SsId> {
        self.by_id.get(id).map(|&i| &self.entries[i].1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &SsId)> + '_ {
        self.entries.iter().map(|(id, s)| (id.as_str(), s))
    }

    /// Sub-map containing only the concepts accepted by `keep`, order preserved.
    pub fn restrict(&self, mut keep: impl FnMut(&str) -> bool) -> Self {
        Self::from_pairs(self.entries.iter().filter(|(id, _)| keep(id)).cloned())
            .expect("subset of an injective map is injective")
    }

    pub fn to_index_strings(&self) -> Vec<(String, String)> {
        self.entries.iter().map(|(id, s)| (id.clone(), s.to_string())).collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let pairs = read_index_tsv(path)?;
        Self::from_index_strings(&pairs)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_index_tsv(path, &self.to_index_strings())
    }
}

/// Writes `concept_id \t index` lines.
pub fn write_index_tsv(path: &Path, pairs: &[(String, String)]) -> Result<()> {
    let mut buf = Vec::new();
    for (id, s) in pairs {
        writeln!(buf, "{id}\t{s}").expect("write to Vec");
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn read_index_tsv(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        match (parts.next(), parts.next(), parts.next()) {
            (Some(id), Some(s), None) if !id.is_empty() && !s.is_empty() => out.push((id.to_string(), s.to_string())),
            _ => {
                return Err(Error::Malformed {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: "expected two tab-separated columns".into(),
                })
            }
        }
    }
    Ok(out)
}
