//! ssID token grammar: the prefix trie that constrains decoding, rendering of
//! token sequences, and parsing of generated text back into concepts.
//!
//! Decoder tokens are one digit per tree level, the separator `;` and an end
//! token. The `-` between digits exists only in rendered text. A generated
//! sequence is any number of complete ssIDs, each followed by `;`, then the end
//! token: `6-2-8-0-5; 9-6-6-9-5;`.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::ssid::{SsId, SsidMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    Digit(u32),
    Sep,
    Eos,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Digit(d) => write!(f, "{d}"),
            Token::Sep => f.write_str(";"),
            Token::Eos => f.write_str("</s>"),
        }
    }
}

#[derive(Debug, Clone, Default)]
struct TrieNode {
    /// Sorted by digit.
    children: Vec<(u32, usize)>,
    concept: Option<usize>,
}

/// Trie over the valid ssIDs plus the concept each complete path names.
#[derive(Debug, Clone)]
pub struct SsidVocabulary {
    nodes: Vec<TrieNode>,
    concepts: Vec<String>,
    ssids: Vec<SsId>,
    by_rendered: HashMap<String, usize>,
    max_len: usize,
    digit_count: u32,
}

/// Position of a partially generated sequence within the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrammarState {
    /// Trie node of the ssID in progress; `None` between ssIDs.
    node: Option<usize>,
    /// Complete ssIDs emitted so far.
    emitted: usize,
    tokens: usize,
    finished: bool,
}

/// Generation limits applied by [`SsidVocabulary::allowed`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrammarCaps {
    pub max_ssids: usize,
    pub max_tokens: usize,
}

impl SsidVocabulary {
    pub fn build(map: &SsidMap) -> Result<Self> {
        let mut vocab = Self {
            nodes: vec![TrieNode::default()],
            concepts: Vec::with_capacity(map.len()),
            ssids: Vec::with_capacity(map.len()),
            by_rendered: HashMap::with_capacity(map.len()),
            max_len: 0,
            digit_count: 0,
        };
        // Insert shorter ssIDs first so prefix conflicts are caught either way round.
        let mut order: Vec<(&str, &SsId)> = map.iter().collect();
        order.sort_by_key(|(_, s)| s.len());
        for (id, ssid) in order {
            vocab.insert(id, ssid)?;
        }
        vocab.max_len = vocab.ssids.iter().map(SsId::len).max().unwrap_or(0);
        vocab.digit_count = vocab
            .ssids
            .iter()
            .flat_map(|s| s.digits().iter().copied())
            .max()
            .map_or(0, |d| d + 1);
        Ok(vocab)
    }

    fn insert(&mut self, id: &str, ssid: &SsId) -> Result<()> {
        let mut at = 0;
        for &d in ssid.digits() {
            if let Some(c) = self.nodes[at].concept {
                return Err(Error::PrefixConflict {
                    prefix: self.ssids[c].to_string(),
                    prefix_id: self.concepts[c].clone(),
                    ssid: ssid.to_string(),
                    id: id.to_string(),
                });
            }
            at = match self.nodes[at].children.binary_search_by_key(&d, |&(digit, _)| digit) {
                Ok(i) => self.nodes[at].children[i].1,
                Err(i) => {
                    let child = self.nodes.len();
                    self.nodes.push(TrieNode::default());
                    self.nodes[at].children.insert(i, (d, child));
                    child
                }
            };
        }
        if let Some(c) = self.nodes[at].concept {
            return Err(Error::DuplicateSsid {
                ssid: ssid.to_string(),
                first: self.concepts[c].clone(),
                second: id.to_string(),
            });
        }
        debug_assert!(self.nodes[at].children.is_empty(), "inserted in length order");
        let c = self.concepts.len();
        self.nodes[at].concept = Some(c);
        self.concepts.push(id.to_string());
        self.ssids.push(ssid.clone());
        self.by_rendered.insert(ssid.to_string(), c);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    /// Concept ids, indexed by the concept handles this vocabulary hands out.
    pub fn concepts(&self) -> &[String] {
        &self.concepts
    }

    pub fn ssid(&self, concept: usize) -> &SsId {
        &self.ssids[concept]
    }

    /// Number of distinct digit tokens: one more than the largest digit used.
    pub fn digit_count(&self) -> u32 {
        self.digit_count
    }

    pub fn max_ssid_len(&self) -> usize {
        self.max_len
    }

    /// Concept named by a rendered ssID, if it is one of ours.
    pub fn lookup(&self, rendered: &str) -> Option<usize> {
        self.by_rendered.get(rendered).copied()
    }

    /// Whether `digits` is exactly one of the vocabulary's ssIDs.
    pub fn accepts(&self, digits: &[u32]) -> bool {
        self.walk(digits).is_some_and(|n| self.nodes[n].concept.is_some())
    }

    fn walk(&self, digits: &[u32]) -> Option<usize> {
        digits.iter().try_fold(0, |at, &d| {
            let children = &self.nodes[at].children;
            children
                .binary_search_by_key(&d, |&(digit, _)| digit)
                .ok()
                .map(|i| children[i].1)
        })
    }

    /// Tokens that may follow a partial ssID: its children, or `;` once complete.
    /// `None` if `prefix` leaves the trie.
    pub fn allowed_after(&self, prefix: &[u32]) -> Option<Vec<Token>> {
        let n = self.walk(prefix)?;
        Some(self.node_tokens(n))
    }

    fn node_tokens(&self, n: usize) -> Vec<Token> {
        let node = &self.nodes[n];
        if node.concept.is_some() {
            vec![Token::Sep]
        } else {
            node.children.iter().map(|&(d, _)| Token::Digit(d)).collect()
        }
    }

    pub(crate) fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub(crate) fn child(&self, node: usize, digit: u32) -> Option<usize> {
        let children = &self.nodes[node].children;
        children
            .binary_search_by_key(&digit, |&(d, _)| d)
            .ok()
            .map(|i| children[i].1)
    }

    pub(crate) fn node_concept(&self, node: usize) -> Option<usize> {
        self.nodes[node].concept
    }

    pub(crate) fn node_children(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.nodes[node].children.iter().map(|&(_, c)| c)
    }

    pub fn start(&self) -> GrammarState {
        GrammarState {
            node: None,
            emitted: 0,
            tokens: 0,
            finished: false,
        }
    }

    /// Tokens the grammar permits next. Between ssIDs that is every first
    /// digit plus the end token, unless the caps leave room only to stop.
    /// Empty once the sequence has ended.
    pub fn allowed(&self, state: &GrammarState, caps: &GrammarCaps) -> Vec<Token> {
        if state.finished {
            return Vec::new();
        }
        match state.node {
            Some(n) => self.node_tokens(n),
            None => {
                // Room for the longest ssID, its separator and the end token.
                let fits = state.tokens + self.max_len + 2 <= caps.max_tokens;
                let mut out = Vec::new();
                if state.emitted < caps.max_ssids && fits {
                    out.extend(self.nodes[0].children.iter().map(|&(d, _)| Token::Digit(d)));
                }
                out.push(Token::Eos);
                out
            }
        }
    }

    /// Advances the state by one token. Panics on a token the grammar forbids.
    pub fn advance(&self, state: &GrammarState, token: Token) -> GrammarState {
        let mut next = *state;
        next.tokens += 1;
        match (state.node, token) {
            (_, Token::Eos) => {
                assert!(state.node.is_none(), "end token inside an ssID");
                next.finished = true;
            }
            (Some(n), Token::Sep) => {
                assert!(self.nodes[n].concept.is_some(), "separator after an incomplete ssID");
                next.node = None;
                next.emitted += 1;
            }
            (at, Token::Digit(d)) => {
                let from = at.unwrap_or(0);
                next.node = Some(self.child(from, d).expect("digit outside the trie"));
            }
            (None, Token::Sep) => panic!("separator with no ssID in progress"),
        }
        next
    }

    /// Trie node of the ssID in progress, if any.
    pub fn state_node(&self, state: &GrammarState) -> Option<usize> {
        state.node
    }

    /// Concept id for a complete-ssID trie node.
    pub fn concept_at(&self, state: &GrammarState) -> Option<usize> {
        state.node.and_then(|n| self.nodes[n].concept)
    }
}

impl GrammarState {
    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn emitted(&self) -> usize {
        self.emitted
    }

    pub fn tokens(&self) -> usize {
        self.tokens
    }
}

/// Renders tokens as text: digits joined by `-`, each ssID closed by `;`,
/// ssIDs separated by a space. The end token is not rendered.
pub fn render_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    let mut in_ssid = false;
    for t in tokens {
        match t {
            Token::Digit(d) => {
                if in_ssid {
                    out.push('-');
                } else if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(&d.to_string());
                in_ssid = true;
            }
            Token::Sep => {
                out.push(';');
                in_ssid = false;
            }
            Token::Eos => break,
        }
    }
    out
}

/// Renders a list of ssIDs as one sequence.
pub fn render_ssids<'a>(ssids: impl IntoIterator<Item = &'a SsId>) -> String {
    ssids.into_iter().map(|s| format!("{s};")).collect::<Vec<_>>().join(" ")
}

/// Concepts recovered from one generated sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedSequence {
    /// Concept ids in order of first appearance.
    pub concepts: Vec<String>,
    /// Non-empty spans that matched no ssID.
    pub discarded: usize,
    /// Valid spans that repeated an earlier concept.
    pub duplicates: usize,
}

/// Splits on `;`, trims each span, keeps spans that are exactly a known ssID.
pub fn parse_sequence(text: &str, vocab: &SsidVocabulary) -> ParsedSequence {
    let mut out = ParsedSequence::default();
    let mut seen = HashSet::new();
    for span in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        match vocab.lookup(span) {
            Some(c) if seen.insert(c) => out.concepts.push(vocab.concepts[c].clone()),
            Some(_) => out.duplicates += 1,
            None => out.discarded += 1,
        }
    }
    out
}

/// Union of ranked prediction sets, keeping first-seen order.
pub fn merge_topk<S: AsRef<str>>(sets: &[Vec<S>]) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for set in sets {
        for c in set {
            if seen.insert(c.as_ref().to_string()) {
                out.push(c.as_ref().to_string());
            }
        }
    }
    out
}
