//! Passage-level scoring of decoded or retrieved concept sets.
//!
//! Predictions from every selected query of a passage are pooled into one set
//! and compared with the passage's gold set. Counts are summed over passages
//! (micro averaging).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::codec::{merge_topk, parse_sequence, SsidVocabulary};
use crate::decoder::DecodeRecord;
use crate::error::{Error, Result};
use crate::knn::KnnRecord;

pub type ConceptSets = BTreeMap<String, BTreeSet<String>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryLevel {
    Passage,
    Claim,
    Mention,
    Concept,
}

impl QueryLevel {
    pub const ALL: [QueryLevel; 4] = [Self::Passage, Self::Claim, Self::Mention, Self::Concept];

    pub fn name(self) -> &'static str {
        match self {
            Self::Passage => "passage",
            Self::Claim => "claim",
            Self::Mention => "mention",
            Self::Concept => "concept",
        }
    }
}

impl fmt::Display for QueryLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QueryLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown query level {s:?}")))
    }
}

/// Parses a `+`-joined level list such as `passage+claim`.
pub fn parse_level_set(s: &str) -> Result<BTreeSet<QueryLevel>> {
    let set = s
        .split('+')
        .map(|p| p.trim().parse())
        .collect::<Result<BTreeSet<_>>>()?;
    if set.is_empty() {
        return Err(Error::Config("empty level set".into()));
    }
    Ok(set)
}

fn level_set_name(levels: &BTreeSet<QueryLevel>) -> String {
    levels.iter().map(|l| l.name()).collect::<Vec<_>>().join("+")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub qid: String,
    pub passage_id: String,
    pub level: QueryLevel,
    #[serde(default)]
    pub text: String,
}

/// Unions the predictions of queries whose level is in `levels`, per passage.
/// Every selected query's passage appears in the output, even with an empty set.
pub fn aggregate_by_passage(
    predictions: &BTreeMap<String, BTreeSet<String>>,
    queries: &[QueryRecord],
    levels: &BTreeSet<QueryLevel>,
) -> Result<ConceptSets> {
    let by_qid: BTreeMap<&str, &QueryRecord> = queries.iter().map(|q| (q.qid.as_str(), q)).collect();
    if let Some(unknown) = predictions.keys().find(|qid| !by_qid.contains_key(qid.as_str())) {
        return Err(Error::UnknownQuery(unknown.clone()));
    }
    let mut out = ConceptSets::new();
    for q in queries.iter().filter(|q| levels.contains(&q.level)) {
        let set = out.entry(q.passage_id.clone()).or_default();
        if let Some(p) = predictions.get(&q.qid) {
            set.extend(p.iter().cloned());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
        }
    }
}

/// Micro precision, recall and F1 over the union of passages in `pred` and
/// `gold`; a passage missing from either side counts as an empty set.
pub fn micro_prf(pred: &ConceptSets, gold: &ConceptSets) -> Prf {
    let empty = BTreeSet::new();
    let passages: BTreeSet<&String> = pred.keys().chain(gold.keys()).collect();
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for p in passages {
        let ps = pred.get(p).unwrap_or(&empty);
        let gs = gold.get(p).unwrap_or(&empty);
        let hit = ps.intersection(gs).count();
        tp += hit;
        fp += ps.len() - hit;
        fn_ += gs.len() - hit;
    }
    Prf::from_counts(tp, fp, fn_)
}

/// Recall over gold concepts inside and outside `train`. `None` when the
/// partition holds no gold items.
pub fn seen_unseen_recall(
    pred: &ConceptSets,
    gold: &ConceptSets,
    train: &BTreeSet<String>,
) -> (Option<f64>, Option<f64>) {
    let empty = BTreeSet::new();
    let mut seen = (0usize, 0usize);
    let mut unseen = (0usize, 0usize);
    for (p, gs) in gold {
        let ps = pred.get(p).unwrap_or(&empty);
        for c in gs {
            let bucket = if train.contains(c) { &mut seen } else { &mut unseen };
            bucket.1 += 1;
            if ps.contains(c) {
                bucket.0 += 1;
            }
        }
    }
    let ratio = |(hit, total): (usize, usize)| (total > 0).then(|| hit as f64 / total as f64);
    (ratio(seen), ratio(unseen))
}

/// Output of a recognition system, keyed by query id.
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutput {
    Decode(Vec<DecodeRecord>),
    Knn(Vec<KnnRecord>),
}

/// Per-query concept sets at cut-off `k`, and the number of generated spans
/// that matched no ssID.
///
/// Decoder runs merge the concepts of the first `k` sequences. Retrieval runs
/// keep the hits ranked within the first `k` before gating.
pub fn predictions_at_k(run: &RunOutput, k: usize, vocab: Option<&SsidVocabulary>) -> Result<(ConceptSets, usize)> {
    let mut out = ConceptSets::new();
    let mut discarded = 0;
    match run {
        RunOutput::Decode(records) => {
            let vocab = vocab.ok_or_else(|| Error::Config("decoder output needs an ssID map to parse".into()))?;
            for r in records {
                let parsed: Vec<Vec<String>> = r
                    .sequences
                    .iter()
                    .take(k)
                    .map(|s| {
                        let p = parse_sequence(&s.text, vocab);
                        discarded += p.discarded;
                        p.concepts
                    })
                    .collect();
                out.entry(r.qid.clone()).or_default().extend(merge_topk(&parsed));
            }
        }
        RunOutput::Knn(records) => {
            for r in records {
                let set = out.entry(r.qid.clone()).or_default();
                for (i, h) in r.hits.iter().enumerate() {
                    if h.rank.unwrap_or(i + 1) <= k {
                        set.insert(h.id.clone());
                    }
                }
            }
        }
    }
    Ok((out, discarded))
}

/// Single levels present in `queries`, then the cumulative combinations
/// passage, passage+claim, passage+claim+mention, ... over the levels present.
pub fn default_level_sets(queries: &[QueryRecord]) -> Vec<BTreeSet<QueryLevel>> {
    let present: BTreeSet<QueryLevel> = queries.iter().map(|q| q.level).collect();
    let mut sets: Vec<BTreeSet<QueryLevel>> = present.iter().map(|&l| BTreeSet::from([l])).collect();
    let mut acc = BTreeSet::new();
    for &l in &present {
        acc.insert(l);
        if acc.len() > 1 {
            sets.push(acc.clone());
        }
    }
    sets
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub levels: String,
    pub k: usize,
    #[serde(flatten)]
    pub prf: Prf,
    pub seen_recall: Option<f64>,
    pub unseen_recall: Option<f64>,
    /// Generated spans at this `k` that matched no ssID, over all queries.
    pub discarded: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn row(&self, levels: &str, k: usize) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.levels == levels && r.k == k)
    }

    /// Aligned text table with percentages to one decimal.
    pub fn to_table(&self) -> String {
        let pct = |x: f64| format!("{:.1}", 100.0 * x);
        let opt = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), pct);
        let header = [
            "levels",
            "k",
            "P",
            "R",
            "F1",
            "tp",
            "fp",
            "fn",
            "seen_R",
            "unseen_R",
            "discarded",
        ];
        let body: Vec<[String; 11]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.levels.clone(),
                    r.k.to_string(),
                    pct(r.prf.precision),
                    pct(r.prf.recall),
                    pct(r.prf.f1),
                    r.prf.tp.to_string(),
                    r.prf.fp.to_string(),
                    r.prf.fn_.to_string(),
                    opt(r.seen_recall),
                    opt(r.unseen_recall),
                    r.discarded.to_string(),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &body {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let mut line = |cells: &[&str]| {
            let parts: Vec<String> = cells
                .iter()
                .zip(widths)
                .enumerate()
                .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&header);
        for row in &body {
            line(&row.each_ref().map(String::as_str));
        }
        out
    }
}

/// Scores `run` at each cut-off in `ks` for each level combination.
pub fn evaluate_run(
    run: &RunOutput,
    queries: &[QueryRecord],
    gold: &ConceptSets,
    vocab: Option<&SsidVocabulary>,
    train: Option<&BTreeSet<String>>,
    ks: &[usize],
    level_sets: &[BTreeSet<QueryLevel>],
) -> Result<EvalReport> {
    if ks.contains(&0) {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let mut rows = Vec::new();
    for levels in level_sets {
        for &k in ks {
            let (per_query, discarded) = predictions_at_k(run, k, vocab)?;
            let pred = aggregate_by_passage(&per_query, queries, levels)?;
            let (seen_recall, unseen_recall) = match train {
                Some(t) => seen_unseen_recall(&pred, gold, t),
                None => (None, None),
            };
            rows.push(EvalRow {
                levels: level_set_name(levels),
                k,
                prf: micro_prf(&pred, gold),
                seen_recall,
                unseen_recall,
                discarded,
            });
        }
    }
    Ok(EvalReport { rows })
}
