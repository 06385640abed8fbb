//! Constrained beam search over the ssID grammar.
//!
//! The decoder never sees a language model. Anything that can score the
//! grammar's allowed next tokens given the history implements [`Scorer`]:
//! the linear [`ScoringHead`] over a hidden state, the [`EmbeddingOracleScorer`]
//! that stands in for a trained model, or the test scorers below.
//!
//! A hypothesis score is the sum of its per-token scores. Candidates are
//! ranked by score, then by token sequence ascending, so equal-scoring paths
//! resolve to the lowest digits.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::codec::{render_tokens, GrammarCaps, GrammarState, SsidVocabulary, Token};
use crate::embedding::{dot, norm, EmbeddingMatrix};
use crate::error::{Error, Result};

/// What a scorer sees at one decoding step.
#[derive(Debug, Clone, Copy)]
pub struct DecodeStep<'a> {
    pub history: &'a [Token],
    pub state: &'a GrammarState,
}

/// Scores every allowed token, in the order given. Must be pure: the same
/// step and allowed set always produce the same scores.
pub trait Scorer {
    fn score(&self, step: DecodeStep<'_>, allowed: &[Token]) -> Vec<f64>;
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn score(&self, step: DecodeStep<'_>, allowed: &[Token]) -> Vec<f64> {
        (**self).score(step, allowed)
    }
}

/// Linear scoring head: each token's score averages its embedding's dot
/// product with the hidden state and a linear classifier logit,
/// `z_t = (e_t . h + W_t . h + b_t) / 2`.
///
/// Rows are indexed by token: digits `0..d`, then `;` at `d`, then the end
/// token at `d + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringHead {
    pub dim: usize,
    pub token_embeddings: Vec<Vec<f64>>,
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl ScoringHead {
    pub fn new(token_embeddings: Vec<Vec<f64>>, weight: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        let rows = token_embeddings.len();
        if rows < 2 || weight.len() != rows || bias.len() != rows {
            return Err(Error::Config(format!(
                "scoring head needs matching row counts >= 2 (embeddings {rows}, weight {}, bias {})",
                weight.len(),
                bias.len()
            )));
        }
        let dim = token_embeddings[0].len();
        for row in token_embeddings.iter().chain(&weight) {
            if row.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
        }
        let all = token_embeddings.iter().chain(&weight).flatten().chain(&bias);
        if let Some(x) = all.into_iter().find(|x| !x.is_finite()) {
            return Err(Error::Config(format!("scoring head holds non-finite value {x}")));
        }
        Ok(Self {
            dim,
            token_embeddings,
            weight,
            bias,
        })
    }

    /// Reads and validates a head stored as JSON.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: Self = serde_json::from_str(&text).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: e.line(),
            msg: e.to_string(),
        })?;
        let head = Self::new(raw.token_embeddings, raw.weight, raw.bias)?;
        if head.dim != raw.dim {
            return Err(Error::DimMismatch {
                expected: raw.dim,
                actual: head.dim,
            });
        }
        Ok(head)
    }

    pub fn digit_count(&self) -> usize {
        self.bias.len() - 2
    }

    fn row_of(&self, t: Token) -> Result<usize> {
        let d = self.digit_count();
        match t {
            Token::Digit(x) if (x as usize) < d => Ok(x as usize),
            Token::Digit(x) => Err(Error::Config(format!("digit {x} outside the head's {d} digit rows"))),
            Token::Sep => Ok(d),
            Token::Eos => Ok(d + 1),
        }
    }

    /// Raw scores `z_t` for each allowed token against hidden state `h`.
    pub fn score_tokens(&self, h: &[f64], allowed: &[Token]) -> Result<Vec<f64>> {
        if h.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                actual: h.len(),
            });
        }
        let dot = |a: &[f64]| a.iter().zip(h).map(|(x, y)| x * y).sum::<f64>();
        allowed
            .iter()
            .map(|&t| {
                let r = self.row_of(t)?;
                let relevance = dot(&self.token_embeddings[r]);
                let logit = dot(&self.weight[r]) + self.bias[r];
                Ok((relevance + logit) / 2.0)
            })
            .collect()
    }
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = z.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest value; the first one on ties.
pub fn argmax(z: &[f64]) -> Option<usize> {
    z.iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &x)| match best {
            Some((_, b)) if b >= x => best,
            _ => Some((i, x)),
        })
        .map(|(i, _)| i)
}

/// Source of the hidden state fed to a [`ScoringHead`] at each step.
pub trait HiddenState {
    fn hidden(&self, history: &[Token]) -> Vec<f64>;
}

/// A hidden state that does not depend on the history, such as a query embedding.
#[derive(Debug, Clone)]
pub struct StaticHidden(pub Vec<f64>);

impl HiddenState for StaticHidden {
    fn hidden(&self, _history: &[Token]) -> Vec<f64> {
        self.0.clone()
    }
}

pub struct HeadScorer<'a, H> {
    pub head: &'a ScoringHead,
    pub hidden: H,
}

impl<H: HiddenState> Scorer for HeadScorer<'_, H> {
    fn score(&self, step: DecodeStep<'_>, allowed: &[Token]) -> Vec<f64> {
        let h = self.hidden.hidden(step.history);
        // Tokens the head cannot score come back NaN and fail the decode.
        self.head
            .score_tokens(&h, allowed)
            .unwrap_or_else(|_| vec![f64::NAN; allowed.len()])
    }
}

/// Reference scorer built from embeddings alone. Extending a prefix with a
/// digit scores the best cosine between the query and any concept under the
/// resulting trie node; closing an ssID with `;` scores that concept's cosine;
/// the end token scores a fixed bias. A zero query vector scores everything 0.
#[derive(Debug, Clone)]
pub struct EmbeddingOracleScorer<'v> {
    vocab: &'v SsidVocabulary,
    /// Best cosine under each trie node.
    best: Vec<f64>,
    eos_bias: f64,
}

impl<'v> EmbeddingOracleScorer<'v> {
    pub fn new(query: &[f32], vocab: &'v SsidVocabulary, emb: &EmbeddingMatrix, eos_bias: f64) -> Result<Self> {
        if query.len() != emb.dim() {
            return Err(Error::DimMismatch {
                expected: emb.dim(),
                actual: query.len(),
            });
        }
        let qn = norm(query);
        let cos = |v: &[f32]| {
            let vn = norm(v);
            if qn == 0.0 || vn == 0.0 {
                0.0
            } else {
                dot(query, v) / (qn * vn)
            }
        };
        let concept_cos = vocab
            .concepts()
            .iter()
            .map(|id| emb.require(id).map(cos))
            .collect::<Result<Vec<_>>>()?;
        // Children always have larger indices than their parent, so one reverse
        // sweep sees every child before its parent.
        let mut best = vec![f64::NEG_INFINITY; vocab.node_count()];
        for n in (0..vocab.node_count()).rev() {
            let own = vocab.node_concept(n).map_or(f64::NEG_INFINITY, |c| concept_cos[c]);
            best[n] = vocab.node_children(n).map(|c| best[c]).fold(own, f64::max);
        }
        Ok(Self { vocab, best, eos_bias })
    }
}

impl Scorer for EmbeddingOracleScorer<'_> {
    fn score(&self, step: DecodeStep<'_>, allowed: &[Token]) -> Vec<f64> {
        let at = self.vocab.state_node(step.state).unwrap_or(0);
        allowed
            .iter()
            .map(|&t| match t {
                Token::Digit(d) => self.vocab.child(at, d).map_or(f64::NAN, |c| self.best[c]),
                Token::Sep => self.best[at],
                Token::Eos => self.eos_bias,
            })
            .collect()
    }
}

/// Rewards exactly the tokens of one target sequence: +1 for the next target
/// token while the history still follows the target, 0 otherwise.
#[derive(Debug, Clone)]
pub struct TeacherScorer {
    target: Vec<Token>,
}

impl TeacherScorer {
    /// Target is the given ssIDs, each followed by `;`, then the end token.
    pub fn new<'a>(ssids: impl IntoIterator<Item = &'a crate::ssid::SsId>) -> Self {
        let mut target = Vec::new();
        for s in ssids {
            target.extend(s.digits().iter().map(|&d| Token::Digit(d)));
            target.push(Token::Sep);
        }
        target.push(Token::Eos);
        Self { target }
    }
}

impl Scorer for TeacherScorer {
    fn score(&self, step: DecodeStep<'_>, allowed: &[Token]) -> Vec<f64> {
        let on_track = self.target.starts_with(step.history);
        let next = self.target.get(step.history.len());
        allowed
            .iter()
            .map(|t| if on_track && next == Some(t) { 1.0 } else { 0.0 })
            .collect()
    }
}

/// Uniform scores in `[0, 1)` from a hash of seed, history and token.
#[derive(Debug, Clone, Copy)]
pub struct RandomScorer {
    pub seed: u64,
}

impl Scorer for RandomScorer {
    fn score(&self, step: DecodeStep<'_>, allowed: &[Token]) -> Vec<f64> {
        let code = |t: &Token| match *t {
            Token::Digit(d) => d as u64 + 2,
            Token::Sep => 0,
            Token::Eos => 1,
        };
        let mut h = mix(self.seed);
        for t in step.history {
            h = mix(h ^ code(t));
        }
        allowed
            .iter()
            .map(|t| (mix(h ^ code(t).wrapping_mul(0xD6E8_FEB8_6659_FD93)) >> 11) as f64 / (1u64 << 53) as f64)
            .collect()
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub beam_width: usize,
    pub max_ssids: usize,
    pub max_tokens: usize,
    /// Rank by mean per-token score instead of the sum.
    pub length_normalize: bool,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            beam_width: 1,
            max_ssids: 16,
            max_tokens: 512,
            length_normalize: false,
        }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_width < 1 || self.max_ssids < 1 || self.max_tokens < 1 {
            return Err(Error::Config(
                "beam width, max_ssids and max_tokens must all be >= 1".into(),
            ));
        }
        Ok(())
    }

    fn caps(&self) -> GrammarCaps {
        GrammarCaps {
            max_ssids: self.max_ssids,
            max_tokens: self.max_tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Generated tokens, ending with the end token.
    pub tokens: Vec<Token>,
    pub score: f64,
}

impl Hypothesis {
    pub fn text(&self) -> String {
        render_tokens(&self.tokens)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecodeResult {
    /// Best first.
    pub sequences: Vec<Hypothesis>,
}

struct Beam {
    tokens: Vec<Token>,
    state: GrammarState,
    sum: f64,
}

struct Candidate {
    parent: usize,
    token: Token,
    sum: f64,
    key: f64,
}

/// Beam search in which every step only offers the grammar's allowed tokens,
/// so every returned sequence is a run of complete ssIDs closed by the end
/// token. Returns up to `beam_width` sequences, best first.
pub fn constrained_beam_search(scorer: &impl Scorer, vocab: &SsidVocabulary, cfg: &BeamConfig) -> Result<DecodeResult> {
    cfg.validate()?;
    if vocab.is_empty() {
        return Err(Error::Config("cannot decode with an empty vocabulary".into()));
    }
    let k = cfg.beam_width;
    let caps = cfg.caps();
    let mut live = vec![Beam {
        tokens: Vec::new(),
        state: vocab.start(),
        sum: 0.0,
    }];
    let mut done: Vec<Hypothesis> = Vec::new();

    while !live.is_empty() {
        let mut cands = Vec::new();
        for (i, beam) in live.iter().enumerate() {
            let allowed = vocab.allowed(&beam.state, &caps);
            assert!(!allowed.is_empty(), "grammar offers no token to a live beam");
            let scores = scorer.score(
                DecodeStep {
                    history: &beam.tokens,
                    state: &beam.state,
                },
                &allowed,
            );
            if scores.len() != allowed.len() {
                return Err(Error::ScoreCount {
                    expected: allowed.len(),
                    got: scores.len(),
                });
            }
            for (&token, &s) in allowed.iter().zip(&scores) {
                if !s.is_finite() {
                    return Err(Error::NonFiniteScore {
                        token: token.to_string(),
                        score: s,
                    });
                }
                let sum = beam.sum + s;
                let key = if cfg.length_normalize {
                    sum / (beam.tokens.len() + 1) as f64
                } else {
                    sum
                };
                cands.push(Candidate {
                    parent: i,
                    token,
                    sum,
                    key,
                });
            }
        }
        cands.sort_by(|a, b| {
            b.key
                .partial_cmp(&a.key)
                .unwrap_or(Ordering::Equal)
                .then_with(|| cmp_paths(&live[a.parent].tokens, a.token, &live[b.parent].tokens, b.token))
        });

        let mut next = Vec::with_capacity(k);
        for (rank, c) in cands.iter().enumerate() {
            if next.len() == k {
                break;
            }
            let parent = &live[c.parent];
            let mut tokens = parent.tokens.clone();
            tokens.push(c.token);
            if c.token == Token::Eos {
                if rank < k {
                    done.push(Hypothesis { tokens, score: c.key });
                }
            } else {
                next.push(Beam {
                    tokens,
                    state: vocab.advance(&parent.state, c.token),
                    sum: c.sum,
                });
            }
        }
        live = next;
    }

    done.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.tokens.cmp(&b.tokens))
    });
    done.truncate(k);
    Ok(DecodeResult { sequences: done })
}

fn cmp_paths(a: &[Token], at: Token, b: &[Token], bt: Token) -> Ordering {
    a.iter()
        .chain(std::iter::once(&at))
        .cmp(b.iter().chain(std::iter::once(&bt)))
}

/// One decoded query in the decode output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeRecord {
    pub qid: String,
    pub sequences: Vec<ScoredText>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredText {
    pub text: String,
    pub score: f64,
}

impl DecodeRecord {
    pub fn new(qid: impl Into<String>, result: &DecodeResult) -> Self {
        Self {
            qid: qid.into(),
            sequences: result
                .sequences
                .iter()
                .map(|h| ScoredText {
                    text: h.text(),
                    score: h.score,
                })
                .collect(),
        }
    }
}

/// Decodes every query with the embedding oracle, in parallel on the current
/// rayon pool; output order follows `queries`.
pub fn decode_with_oracle(
    queries: &[(String, Vec<f32>)],
    vocab: &SsidVocabulary,
    concept_emb: &EmbeddingMatrix,
    cfg: &BeamConfig,
    eos_bias: f64,
) -> Result<Vec<DecodeRecord>> {
    use rayon::prelude::*;
    queries
        .par_iter()
        .map(|(qid, v)| {
            let scorer = EmbeddingOracleScorer::new(v, vocab, concept_emb, eos_bias)?;
            let result = constrained_beam_search(&scorer, vocab, cfg)?;
            Ok(DecodeRecord::new(qid.clone(), &result))
        })
        .collect()
}
