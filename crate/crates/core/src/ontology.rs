//! Concept catalog: ids, names, synonyms and direct hypernym links.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::jsonl;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptEntry {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
    #[serde(default)]
    pub parents: Vec<String>,
}

/// Ordered, validated set of concepts. Iteration follows file order.
#[derive(Debug, Clone)]
pub struct ConceptCatalog {
    entries: Vec<ConceptEntry>,
    index: HashMap<String, usize>,
}

impl ConceptCatalog {
    /// Validates entries in order. Line numbers in errors are 1-based entry positions.
    pub fn new(entries: Vec<ConceptEntry>) -> Result<Self> {
        Self::with_lines(entries.into_iter().enumerate().map(|(i, e)| (i + 1, e)))
    }

    fn with_lines(records: impl IntoIterator<Item = (usize, ConceptEntry)>) -> Result<Self> {
        let mut entries = Vec::new();
        let mut lines = Vec::new();
        let mut index = HashMap::new();
        for (line, entry) in records {
            if entry.id.is_empty() {
                return Err(Error::Malformed {
                    path: Default::default(),
                    line,
                    msg: "empty concept id".into(),
                });
            }
            if index.insert(entry.id.clone(), entries.len()).is_some() {
                return Err(Error::DuplicateId { line, id: entry.id });
            }
            entries.push(entry);
            lines.push(line);
        }
        if entries.is_empty() {
            return Err(Error::EmptyCatalog);
        }
        for (entry, &line) in entries.iter().zip(&lines) {
            for p in &entry.parents {
                if *p == entry.id {
                    return Err(Error::SelfParent {
                        line,
                        id: entry.id.clone(),
                    });
                }
                if !index.contains_key(p) {
                    return Err(Error::DanglingParent {
                        line,
                        id: entry.id.clone(),
                        parent: p.clone(),
                    });
                }
            }
        }
        Ok(Self { entries, index })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let records = jsonl::read::<ConceptEntry>(path)?;
        Self::with_lines(records).map_err(|e| match e {
            Error::Malformed { line, msg, .. } => Error::Malformed {
                path: path.to_path_buf(),
                line,
                msg,
            },
            e => e,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        jsonl::write(path, &self.entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ConceptEntry] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> + '_ {
        self.entries.iter().map(|e| e.id.as_str())
    }

    pub fn get(&self, id: &str) -> Option<&ConceptEntry> {
        self.index.get(id).map(|&i| &self.entries[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }
}

/// Concatenates a concept's own vector with the mean of its direct parents'
/// vectors. A concept without parents repeats its own vector, so the output is
/// always `2 * dim` long.
pub fn compose_hypernym_vector(concept: &ConceptEntry, emb: &EmbeddingMatrix) -> Result<Vec<f32>> {
    let own = emb.require(&concept.id)?;
    let mut out = Vec::with_capacity(2 * own.len());
    out.extend_from_slice(own);
    if concept.parents.is_empty() {
        out.extend_from_slice(own);
        return Ok(out);
    }
    let mut acc = vec![0f64; own.len()];
    for p in &concept.parents {
        for (a, &x) in acc.iter_mut().zip(emb.require(p)?) {
            *a += x as f64;
        }
    }
    let n = concept.parents.len() as f64;
    out.extend(acc.into_iter().map(|a| (a / n) as f32));
    Ok(out)
}

/// Hypernym-composed matrix for the whole catalog, rows in catalog order.
pub fn compose_hypernym_matrix(catalog: &ConceptCatalog, emb: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    let rows = catalog
        .entries()
        .iter()
        .map(|c| Ok((c.id.clone(), compose_hypernym_vector(c, emb)?)))
        .collect::<Result<Vec<_>>>()?;
    EmbeddingMatrix::from_rows(rows)
}

/// Seeded bijection from concept ids onto `0..n`, in catalog order.
pub fn assign_random_ids(catalog: &ConceptCatalog, seed: u64) -> Vec<(String, usize)> {
    let mut numbers: Vec<usize> = (0..catalog.len()).collect();
    numbers.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    catalog.ids().map(String::from).zip(numbers).collect()
}

/// The ontology's own ids used verbatim as index strings.
pub fn assign_ontology_ids(catalog: &ConceptCatalog) -> Vec<(String, String)> {
    catalog.ids().map(|id| (id.to_string(), id.to_string())).collect()
}
