//! Regenerates the bundled toy fixture.
//!
//! ```text
//! cargo run -p conrec --example make_toy_fixture -- crates/core/fixtures/toy
//! ```

use std::collections::BTreeSet;
use std::path::PathBuf;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;

use conrec::embedding::EmbeddingMatrix;
use conrec::ontology::{ConceptCatalog, ConceptEntry};

const GROUPS: usize = 5;
const PER_GROUP: usize = 10;
const DIM: usize = 16;
const SEED: u64 = 20240611;

fn concept_id(g: usize, c: usize) -> String {
    format!("TOY:{:04}", g * PER_GROUP + c)
}

fn noisy(base: &[f32], sigma: f32, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let n = Normal::new(0.0f32, sigma).unwrap();
    base.iter().map(|x| x + n.sample(rng)).collect()
}

fn mean(vs: &[&[f32]]) -> Vec<f32> {
    (0..DIM)
        .map(|d| vs.iter().map(|v| v[d]).sum::<f32>() / vs.len() as f32)
        .collect()
}

fn main() {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "crates/core/fixtures/toy".into()),
    );
    std::fs::create_dir_all(&out).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let unit = Normal::new(0.0f32, 1.0).unwrap();

    let mut entries = Vec::new();
    let mut rows: Vec<(String, Vec<f32>)> = Vec::new();
    for g in 0..GROUPS {
        let raw: Vec<f32> = (0..DIM).map(|_| unit.sample(&mut rng)).collect();
        let len = raw.iter().map(|x| x * x).sum::<f32>().sqrt();
        let center: Vec<f32> = raw.iter().map(|x| x / len).collect();
        for c in 0..PER_GROUP {
            let parents = match c {
                0 => vec![],
                1..=4 => vec![concept_id(g, 0)],
                _ => vec![concept_id(g, c - 4)],
            };
            entries.push(ConceptEntry {
                id: concept_id(g, c),
                name: format!("group {g} concept {c}"),
                synonyms: vec![format!("g{g}c{c}")],
                parents,
            });
            rows.push((concept_id(g, c), noisy(&center, 0.12, &mut rng)));
        }
    }
    let catalog = ConceptCatalog::new(entries).unwrap();
    catalog.save(&out.join("concepts.jsonl")).unwrap();
    let concepts = EmbeddingMatrix::from_rows(rows.clone()).unwrap();
    concepts
        .save(&out.join("concepts.vec"), &out.join("concepts.ids"))
        .unwrap();

    // Concepts with an even index within their group are "seen in training".
    let train: Vec<String> = (0..GROUPS)
        .flat_map(|g| (0..PER_GROUP).step_by(2).map(move |c| concept_id(g, c)))
        .collect();
    std::fs::write(out.join("train_concepts.txt"), train.join("\n") + "\n").unwrap();

    let all_ids: Vec<String> = rows.iter().map(|(id, _)| id.clone()).collect();
    let passages = ["P1", "P2", "P3"];
    let mut gold_lines = Vec::new();
    let mut queries = Vec::new();
    let mut query_rows: Vec<(String, Vec<f32>)> = Vec::new();
    let mut claims = Vec::new();
    let mut excerpt_rows: Vec<(String, Vec<f32>)> = Vec::new();
    for (pi, p) in passages.iter().enumerate() {
        let gold: BTreeSet<String> = loop {
            let pick: BTreeSet<String> = all_ids.choose_multiple(&mut rng, 4).cloned().collect();
            let unseen = pick.iter().filter(|c| !train.contains(c)).count();
            if (1..4).contains(&unseen) {
                break pick;
            }
        };
        gold_lines.push(json!({"passage_id": p, "concepts": gold}));
        let vecs: Vec<&[f32]> = gold.iter().map(|c| concepts.get(c).unwrap()).collect();

        let qid = format!("{p}-passage");
        queries.push(json!({"qid": qid, "passage_id": p, "level": "passage", "text": format!("passage {}", pi + 1)}));
        query_rows.push((qid, noisy(&mean(&vecs), 0.03, &mut rng)));

        for (ci, (c, v)) in gold.iter().zip(&vecs).enumerate() {
            let other = concepts.get(all_ids.choose(&mut rng).unwrap()).unwrap();
            let blend: Vec<f32> = v.iter().zip(other).map(|(a, b)| 0.75 * a + 0.25 * b).collect();
            let qid = format!("{p}-claim{}", ci + 1);
            queries.push(json!({"qid": qid, "passage_id": p, "level": "claim", "text": format!("claim about {c}")}));
            query_rows.push((qid, noisy(&blend, 0.03, &mut rng)));

            let qid = format!("{p}-concept{}", ci + 1);
            queries.push(json!({"qid": qid, "passage_id": p, "level": "concept", "text": c}));
            query_rows.push((qid, noisy(v, 0.02, &mut rng)));
        }

        for (ci, chunk) in vecs.chunks(2).enumerate() {
            let mut excerpts = Vec::new();
            for v in chunk {
                let text = format!("{p} excerpt {}", excerpt_rows.len() + 1);
                excerpt_rows.push((text.clone(), noisy(v, 0.03, &mut rng)));
                excerpts.push(text);
            }
            let text = format!("{p} excerpt {}", excerpt_rows.len() + 1);
            excerpt_rows.push((text.clone(), (0..DIM).map(|_| unit.sample(&mut rng)).collect()));
            excerpts.push(text);
            claims.push(json!({
                "passage_id": p,
                "claim": format!("{p} generated claim {}", ci + 1),
                "excerpts": excerpts,
            }));
        }
    }

    let lines = |v: &[serde_json::Value]| v.iter().map(|x| x.to_string() + "\n").collect::<String>();
    std::fs::write(out.join("gold.jsonl"), lines(&gold_lines)).unwrap();
    std::fs::write(out.join("queries.jsonl"), lines(&queries)).unwrap();
    std::fs::write(out.join("claims.jsonl"), lines(&claims)).unwrap();
    EmbeddingMatrix::from_rows(query_rows)
        .unwrap()
        .save(&out.join("queries.vec"), &out.join("queries.ids"))
        .unwrap();
    EmbeddingMatrix::from_rows(excerpt_rows)
        .unwrap()
        .save(&out.join("excerpts.vec"), &out.join("excerpts.ids"))
        .unwrap();
    println!("wrote toy fixture to {}", out.display());
}
