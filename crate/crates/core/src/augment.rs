//! Pairs generated claims with the gold concepts of their passage.
//!
//! A claim is paired with a gold concept when any of its mined excerpts has a
//! cosine similarity of at least the threshold to that concept. Pairs are then
//! grouped per claim into ssID target sequences.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::render_ssids;
use crate::embedding::{dot, norm, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::ssid::SsidMap;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimRecord {
    pub passage_id: String,
    pub claim: String,
    pub excerpts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub passage_id: String,
    pub concepts: Vec<String>,
}

/// Collapses gold records into sets; repeated passages are merged.
pub fn gold_sets(records: impl IntoIterator<Item = GoldRecord>) -> BTreeMap<String, BTreeSet<String>> {
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for r in records {
        out.entry(r.passage_id).or_default().extend(r.concepts);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimConceptPair {
    pub passage_id: String,
    pub claim: String,
    pub concept: String,
    pub excerpt: String,
    pub similarity: f64,
}

/// One training target: a claim and the ssIDs of every concept it was paired with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub passage_id: String,
    pub claim: String,
    pub ssids: String,
    pub concepts: Vec<String>,
}

fn cosine_or_zero(u: &[f32], un: f64, v: &[f32]) -> f64 {
    let vn = norm(v);
    if un == 0.0 || vn == 0.0 {
        0.0
    } else {
        (dot(u, v) / (un * vn)).clamp(-1.0, 1.0)
    }
}

/// Matches every claim against its passage's gold concepts. Output follows
/// claim order, then concept id. When several excerpts tie for the best
/// similarity the first one listed is recorded.
pub fn match_claims(
    claims: &[ClaimRecord],
    gold: &BTreeMap<String, BTreeSet<String>>,
    excerpt_emb: &EmbeddingMatrix,
    concept_emb: &EmbeddingMatrix,
    threshold: f64,
) -> Result<Vec<ClaimConceptPair>> {
    if excerpt_emb.dim() != concept_emb.dim() && !excerpt_emb.is_empty() {
        return Err(Error::DimMismatch {
            expected: concept_emb.dim(),
            actual: excerpt_emb.dim(),
        });
    }
    let per_claim = claims
        .par_iter()
        .map(|c| {
            let concepts = gold
                .get(&c.passage_id)
                .ok_or_else(|| Error::UnknownPassage(c.passage_id.clone()))?;
            let excerpts = c
                .excerpts
                .iter()
                .map(|e| {
                    excerpt_emb
                        .get(e)
                        .map(|v| (e, v, norm(v)))
                        .ok_or_else(|| Error::MissingVector(e.clone()))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut pairs = Vec::new();
            for concept in concepts {
                let cv = concept_emb.require(concept)?;
                let mut best: Option<(&String, f64)> = None;
                for &(e, ev, en) in &excerpts {
                    let sim = cosine_or_zero(ev, en, cv);
                    if best.is_none_or(|(_, b)| sim > b) {
                        best = Some((e, sim));
                    }
                }
                if let Some((e, sim)) = best.filter(|&(_, s)| s >= threshold) {
                    pairs.push(ClaimConceptPair {
                        passage_id: c.passage_id.clone(),
                        claim: c.claim.clone(),
                        concept: concept.clone(),
                        excerpt: e.clone(),
                        similarity: sim,
                    });
                }
            }
            Ok(pairs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_claim.concat())
}

/// Groups pairs by (passage, claim) in first-seen order and renders each
/// group's ssIDs in ascending concept id order.
pub fn emit_training_pairs(pairs: &[ClaimConceptPair], ssids: &SsidMap) -> Result<Vec<TrainingRecord>> {
    let mut order: Vec<(&str, &str)> = Vec::new();
    let mut groups: HashMap<(&str, &str), BTreeSet<&str>> = HashMap::new();
    for p in pairs {
        let key = (p.passage_id.as_str(), p.claim.as_str());
        groups
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                BTreeSet::new()
            })
            .insert(&p.concept);
    }
    order
        .into_iter()
        .map(|key| {
            let concepts = &groups[&key];
            let rendered = concepts
                .iter()
                .map(|c| ssids.get(c).ok_or_else(|| Error::UnmappedConcept(c.to_string())))
                .collect::<Result<Vec<_>>>()?;
            Ok(TrainingRecord {
                passage_id: key.0.to_string(),
                claim: key.1.to_string(),
                ssids: render_ssids(rendered),
                concepts: concepts.iter().map(|c| c.to_string()).collect(),
            })
        })
        .collect()
}
