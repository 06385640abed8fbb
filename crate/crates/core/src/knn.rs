//! Exact nearest-neighbour baseline over concept vectors.
//!
//! The `k` concepts nearest by Euclidean distance (ties by concept id) are
//! retrieved, then gated by cosine similarity: a retrieved concept below the
//! threshold is not a prediction. Both numbers are reported, along with each
//! hit's 1-based rank in the ungated distance order. On unit-normalized
//! embeddings the two orderings agree.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{dot, norm, squared_euclidean, EmbeddingMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
    /// Minimum cosine for a retrieved concept to count as a prediction.
    pub threshold: f64,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 10, threshold: 0.6 }
    }
}

impl KnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(-1.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold {} outside [-1, 1]", self.threshold)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: String,
    pub cosine: f64,
    pub euclidean: f64,
    /// Position in the distance ranking before gating, from 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnRecord {
    pub qid: String,
    pub hits: Vec<Hit>,
}

/// The `k` concepts nearest to `query`, minus those whose cosine falls below
/// the threshold.
pub fn knn_query(query: &[f32], emb: &EmbeddingMatrix, cfg: &KnnConfig) -> Result<Vec<Hit>> {
    cfg.validate()?;
    if emb.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if query.len() != emb.dim() {
        return Err(Error::DimMismatch {
            expected: emb.dim(),
            actual: query.len(),
        });
    }
    let qn = norm(query);
    if qn == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let ids = emb.ids();
    let mut pool: Vec<(usize, f64)> = emb
        .iter()
        .enumerate()
        .map(|(row, (_, v))| (row, squared_euclidean(query, v)))
        .collect();
    let order = |a: &(usize, f64), b: &(usize, f64)| {
        a.1.partial_cmp(&b.1)
            .unwrap_or(Ordering::Equal)
            .then_with(|| ids[a.0].cmp(&ids[b.0]))
    };
    if pool.len() > cfg.k {
        pool.select_nth_unstable_by(cfg.k - 1, order);
        pool.truncate(cfg.k);
    }
    pool.sort_by(order);

    let mut hits = Vec::with_capacity(pool.len());
    for (i, (row, sq)) in pool.into_iter().enumerate() {
        let v = emb.row(row);
        let vn = norm(v);
        if vn == 0.0 {
            return Err(Error::ZeroNorm);
        }
        let cosine = (dot(query, v) / (qn * vn)).clamp(-1.0, 1.0);
        if cosine >= cfg.threshold {
            hits.push(Hit {
                id: ids[row].clone(),
                cosine,
                euclidean: sq.sqrt(),
                rank: Some(i + 1),
            });
        }
    }
    Ok(hits)
}

/// Runs [`knn_query`] for every row of `queries`; output follows query order.
pub fn knn_batch(queries: &EmbeddingMatrix, emb: &EmbeddingMatrix, cfg: &KnnConfig) -> Result<Vec<KnnRecord>> {
    (0..queries.len())
        .into_par_iter()
        .map(|i| {
            Ok(KnnRecord {
                qid: queries.ids()[i].clone(),
                hits: knn_query(queries.row(i), emb, cfg)?,
            })
        })
        .collect()
}
