//! Label tree construction and ssID assignment.
//!
//! The root holds every concept. Any node with more than `g` members is split
//! by k-means into `min(m, |members|)` children, recursively. A node with at
//! most `g` members is terminal; its members are ordered by concept id and the
//! position in that order becomes the final ssID digit. So a concept whose path
//! runs through clusters 6, 2, 8, 0 and sits fifth-from-zero in its terminal
//! node gets `6-2-8-0-5`.
//!
//! Sibling subtrees are built in parallel on the current rayon pool. Each
//! split seeds its k-means from the config seed mixed with the node path, so
//! the result does not depend on scheduling or thread count.

pub mod kmeans;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::ontology::{self, ConceptCatalog};
use crate::ssid::{SsId, SsidMap};

use kmeans::{kmeans, KmeansParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct IndexerConfig {
    /// Largest node that is left unsplit.
    pub g: usize,
    /// Most children a split may produce.
    pub m: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for IndexerConfig {
    fn default() -> Self {
        Self {
            g: 10,
            m: 10,
            seed: 42,
            max_iters: 100,
            tol: 1e-6,
        }
    }
}

impl IndexerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.g < 1 {
            return Err(Error::Config("g must be at least 1".into()));
        }
        if self.m < 2 {
            return Err(Error::Config("m must be at least 2".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::Config("tol must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    /// Child node indices; position in this list is the child's ssID digit.
    pub children: Vec<usize>,
    /// Row indices of the concepts under this node.
    pub members: Vec<usize>,
    pub centroid: Vec<f64>,
}

impl TreeNode {
    pub fn is_terminal(&self) -> bool {
        self.children.is_empty()
    }
}

/// Arena-allocated label tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelTree {
    nodes: Vec<TreeNode>,
    ids: Vec<String>,
}

impl LabelTree {
    pub fn root(&self) -> usize {
        0
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &TreeNode {
        &self.nodes[i]
    }

    /// Concept id of each row, in row order.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &LabelTree, n: usize) -> usize {
            t.nodes[n].children.iter().map(|&c| 1 + walk(t, c)).max().unwrap_or(0)
        }
        walk(self, 0)
    }

    /// Visits every node with its digit path from the root, preorder.
    pub fn walk(&self, mut f: impl FnMut(&[u32], &TreeNode)) {
        let mut stack = vec![(0usize, Vec::new())];
        while let Some((n, path)) = stack.pop() {
            let node = &self.nodes[n];
            f(&path, node);
            for (d, &c) in node.children.iter().enumerate().rev() {
                let mut p = path.clone();
                p.push(d as u32);
                stack.push((c, p));
            }
        }
    }

    /// One record per node: rendered path (empty for the root) and member ids.
    pub fn dump(&self) -> Vec<TreeDumpRecord> {
        let mut out = Vec::new();
        self.walk(|path, node| {
            out.push(TreeDumpRecord {
                path: path.iter().map(u32::to_string).collect::<Vec<_>>().join("-"),
                terminal: node.is_terminal(),
                members: node.members.iter().map(|&r| self.ids[r].clone()).collect(),
            })
        });
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeDumpRecord {
    pub path: String,
    pub terminal: bool,
    pub members: Vec<String>,
}

struct Subtree {
    members: Vec<usize>,
    centroid: Vec<f64>,
    children: Vec<Subtree>,
}

/// Builds the label tree over every row of `emb`.
pub fn build_label_tree(emb: &EmbeddingMatrix, cfg: &IndexerConfig) -> Result<LabelTree> {
    cfg.validate()?;
    if emb.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let dim = emb.dim();
    let points: Vec<f64> = emb.data().iter().map(|&x| x as f64).collect();
    let members: Vec<usize> = (0..emb.len()).collect();
    let root = split(&points, dim, members, Vec::new(), cfg)?;

    let mut nodes = Vec::new();
    flatten(root, &mut nodes);
    Ok(LabelTree {
        nodes,
        ids: emb.ids().to_vec(),
    })
}

fn flatten(sub: Subtree, nodes: &mut Vec<TreeNode>) -> usize {
    let at = nodes.len();
    nodes.push(TreeNode {
        children: Vec::new(),
        members: sub.members,
        centroid: sub.centroid,
    });
    let children: Vec<usize> = sub.children.into_iter().map(|c| flatten(c, nodes)).collect();
    nodes[at].children = children;
    at
}

fn centroid_of(points: &[f64], dim: usize, members: &[usize]) -> Vec<f64> {
    let mut c = vec![0.0; dim];
    for &r in members {
        for (a, x) in c.iter_mut().zip(&points[r * dim..(r + 1) * dim]) {
            *a += x;
        }
    }
    c.iter_mut().for_each(|a| *a /= members.len() as f64);
    c
}

fn split(points: &[f64], dim: usize, members: Vec<usize>, path: Vec<u32>, cfg: &IndexerConfig) -> Result<Subtree> {
    let centroid = centroid_of(points, dim, &members);
    if members.len() <= cfg.g {
        return Ok(Subtree {
            members,
            centroid,
            children: Vec::new(),
        });
    }
    let k = cfg.m.min(members.len());
    let local: Vec<f64> = members
        .iter()
        .flat_map(|&r| points[r * dim..(r + 1) * dim].iter().copied())
        .collect();
    let clustering = kmeans(
        &local,
        dim,
        KmeansParams {
            k,
            seed: path_seed(cfg.seed, &path),
            max_iters: cfg.max_iters,
            tol: cfg.tol,
        },
    )?;
    let mut groups = vec![Vec::new(); k];
    for (&r, &c) in members.iter().zip(&clustering.assignment) {
        groups[c].push(r);
    }
    let children = groups
        .into_par_iter()
        .enumerate()
        .map(|(d, group)| {
            let mut p = path.clone();
            p.push(d as u32);
            split(points, dim, group, p, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Subtree {
        members,
        centroid,
        children,
    })
}

/// SplitMix64 over the seed and each path digit.
fn path_seed(seed: u64, path: &[u32]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(seed), |h, &d| {
        mix(h ^ (d as u64 + 1).wrapping_mul(0xA24B_AED4_963E_E407))
    })
}

/// Assigns each concept its path digits plus its position, by id, in its terminal node.
pub fn assign_ssids(tree: &LabelTree) -> SsidMap {
    let mut by_row: Vec<Option<SsId>> = vec![None; tree.ids.len()];
    tree.walk(|path, node| {
        if !node.is_terminal() {
            return;
        }
        let mut rows = node.members.clone();
        rows.sort_by(|&a, &b| tree.ids[a].cmp(&tree.ids[b]));
        for (pos, r) in rows.into_iter().enumerate() {
            let mut digits = path.to_vec();
            digits.push(pos as u32);
            by_row[r] = Some(SsId::new(digits).expect("non-empty"));
        }
    });
    SsidMap::from_pairs(
        tree.ids
            .iter()
            .cloned()
            .zip(by_row.into_iter().map(|s| s.expect("every row sits in one terminal"))),
    )
    .expect("distinct tree paths give distinct ssIDs")
}

/// Histogram of ssID lengths (number of digits → concept count).
pub fn depth_histogram(map: &SsidMap) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for (_, s) in map.iter() {
        *h.entry(s.len()).or_insert(0) += 1;
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexVariant {
    /// Label tree over the concept name embeddings.
    SsidName,
    /// Label tree over `[own : mean(parents)]` vectors.
    SsidHypernym,
    /// Seeded random number per concept.
    RandomId,
    /// The ontology id itself.
    OntologyId,
}

impl FromStr for IndexVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ssid_name" => Ok(Self::SsidName),
            "ssid_hypernym" => Ok(Self::SsidHypernym),
            "random_id" => Ok(Self::RandomId),
            "ontology_id" => Ok(Self::OntologyId),
            other => Err(Error::Config(format!(
                "unknown index variant {other:?} (expected ssid_name, ssid_hypernym, random_id or ontology_id)"
            ))),
        }
    }
}

impl fmt::Display for IndexVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SsidName => "ssid_name",
            Self::SsidHypernym => "ssid_hypernym",
            Self::RandomId => "random_id",
            Self::OntologyId => "ontology_id",
        })
    }
}

impl IndexVariant {
    /// Whether the variant clusters embeddings into a label tree.
    pub fn uses_tree(self) -> bool {
        matches!(self, Self::SsidName | Self::SsidHypernym)
    }
}

/// Label tree behind a tree-based variant, over the catalog's concepts in
/// catalog order; `None` for the other variants.
pub fn variant_tree(
    variant: IndexVariant,
    catalog: &ConceptCatalog,
    emb: &EmbeddingMatrix,
    cfg: &IndexerConfig,
) -> Result<Option<LabelTree>> {
    let vectors = match variant {
        IndexVariant::SsidName => {
            let ids: Vec<&str> = catalog.ids().collect();
            emb.select(&ids)?
        }
        IndexVariant::SsidHypernym => ontology::compose_hypernym_matrix(catalog, emb)?,
        IndexVariant::RandomId | IndexVariant::OntologyId => return Ok(None),
    };
    build_label_tree(&vectors, cfg).map(Some)
}

/// Concept → index string for the chosen variant, in catalog order.
pub fn build_index_variant(
    variant: IndexVariant,
    catalog: &ConceptCatalog,
    emb: &EmbeddingMatrix,
    cfg: &IndexerConfig,
) -> Result<Vec<(String, String)>> {
    if let Some(tree) = variant_tree(variant, catalog, emb, cfg)? {
        return Ok(assign_ssids(&tree).to_index_strings());
    }
    match variant {
        IndexVariant::RandomId => Ok(ontology::assign_random_ids(catalog, cfg.seed)
            .into_iter()
            .map(|(id, n)| (id, n.to_string()))
            .collect()),
        IndexVariant::OntologyId => Ok(ontology::assign_ontology_ids(catalog)),
        IndexVariant::SsidName | IndexVariant::SsidHypernym => unreachable!("handled by variant_tree"),
    }
}
