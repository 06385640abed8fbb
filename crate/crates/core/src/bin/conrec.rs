use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;

use conrec::augment::{self, ClaimRecord, GoldRecord};
use conrec::codec::{parse_sequence, SsidVocabulary};
use conrec::config::RunConfig;
use conrec::decoder::{
    constrained_beam_search, decode_with_oracle, BeamConfig, DecodeRecord, HeadScorer, RandomScorer, ScoringHead,
    StaticHidden, TeacherScorer,
};
use conrec::embedding::{default_ids_path, EmbeddingMatrix};
use conrec::eval::{self, QueryRecord, RunOutput};
use conrec::indexer::{self, IndexVariant, IndexerConfig};
use conrec::knn::{knn_batch, KnnConfig, KnnRecord};
use conrec::ontology::ConceptCatalog;
use conrec::ssid::{write_index_tsv, SsidMap};
use conrec::{jsonl, Error, Result};

#[derive(Parser)]
#[command(
    name = "conrec",
    version,
    about = "Index ontology concepts and recognize them in text queries"
)]
struct Cli {
    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML file with parameter defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed (default 42).
    #[arg(long, global = true, env = "MACOIR_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assign an ssID to every ontology concept.
    Index(IndexArgs),
    /// Generate ssID sequences for query vectors under the trie grammar.
    Decode(DecodeArgs),
    /// Nearest-neighbour concept retrieval for query vectors.
    Knn(KnnArgs),
    /// Pair claims with gold concepts and emit ssID training targets.
    Augment(AugmentArgs),
    /// Score a decode or knn run against gold annotations.
    Eval(EvalArgs),
}

#[derive(Args)]
struct ConceptVectors {
    /// Concept embedding matrix.
    #[arg(long)]
    embeddings: PathBuf,
    /// Row ids for --embeddings (default: same path with .ids).
    #[arg(long)]
    ids: Option<PathBuf>,
}

impl ConceptVectors {
    fn load(&self) -> Result<EmbeddingMatrix> {
        load_matrix(&self.embeddings, self.ids.as_deref())
    }
}

#[derive(Args)]
struct QueryVectors {
    /// Query embedding matrix; row ids are query ids.
    #[arg(long)]
    queries: PathBuf,
    /// Row ids for --queries (default: same path with .ids).
    #[arg(long)]
    query_ids: Option<PathBuf>,
}

impl QueryVectors {
    fn load(&self) -> Result<EmbeddingMatrix> {
        load_matrix(&self.queries, self.query_ids.as_deref())
    }
}

fn load_matrix(vec: &Path, ids: Option<&Path>) -> Result<EmbeddingMatrix> {
    let ids = ids.map_or_else(|| default_ids_path(vec), Path::to_path_buf);
    EmbeddingMatrix::load(vec, &ids)
}

#[derive(Args)]
struct IndexArgs {
    #[arg(long)]
    ontology: PathBuf,
    /// Concept embedding matrix; needed by the tree variants.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    ids: Option<PathBuf>,
    /// ssid_name, ssid_hypernym, random_id or ontology_id.
    #[arg(long)]
    variant: Option<IndexVariant>,
    /// Largest cluster left unsplit.
    #[arg(long)]
    g: Option<usize>,
    /// Most children per split.
    #[arg(long)]
    m: Option<usize>,
    /// Output TSV: concept id, ssID.
    #[arg(long)]
    out: PathBuf,
    /// Also write the label tree as JSON lines.
    #[arg(long)]
    tree_dump: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScorerKind {
    /// Cosine between the query and concepts under each prefix.
    Oracle,
    /// Seeded uniform scores.
    Random,
    /// Follows the gold targets in --targets.
    Teacher,
    /// Linear scoring head from --head applied to the query vector.
    Head,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    ssid_map: PathBuf,
    #[command(flatten)]
    queries: QueryVectors,
    /// Concept vectors; needed by the oracle scorer.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    ids: Option<PathBuf>,
    #[arg(long, value_enum)]
    scorer: Option<ScorerKind>,
    /// Scoring head JSON for --scorer head.
    #[arg(long)]
    head: Option<PathBuf>,
    /// JSON lines {"qid", "concepts"} for --scorer teacher.
    #[arg(long)]
    targets: Option<PathBuf>,
    /// Beam width, which is also the number of sequences kept per query.
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    max_ssids: Option<usize>,
    #[arg(long)]
    max_tokens: Option<usize>,
    /// Score of the end token under the oracle scorer.
    #[arg(long)]
    eos_bias: Option<f64>,
    /// Only let the decoder produce concepts listed in this file.
    #[arg(long)]
    restrict_to: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct KnnArgs {
    #[command(flatten)]
    vectors: ConceptVectors,
    #[command(flatten)]
    queries: QueryVectors,
    #[arg(long)]
    k: Option<usize>,
    /// Minimum cosine for a hit to count.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AugmentArgs {
    /// JSON lines {"passage_id", "claim", "excerpts"}.
    #[arg(long)]
    claims: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    /// Excerpt embedding matrix; row ids are the excerpt strings.
    #[arg(long)]
    excerpts: PathBuf,
    #[arg(long)]
    excerpt_ids: Option<PathBuf>,
    #[command(flatten)]
    vectors: ConceptVectors,
    #[arg(long)]
    ssid_map: PathBuf,
    #[arg(long)]
    threshold: Option<f64>,
    /// Training records {"passage_id", "claim", "ssids", "concepts"}.
    #[arg(long)]
    out: PathBuf,
    /// Also write every claim-concept pair with its excerpt and similarity.
    #[arg(long)]
    pairs_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Output of decode or knn.
    #[arg(long)]
    run: PathBuf,
    /// JSON lines {"qid", "passage_id", "level", "text"}.
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    /// Needed to parse decode runs.
    #[arg(long)]
    ssid_map: Option<PathBuf>,
    /// Concept ids seen in training, one per line; enables the seen/unseen split.
    #[arg(long)]
    train_concepts: Option<PathBuf>,
    /// Cut-offs, comma separated.
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    /// Level combinations such as passage+claim; repeatable.
    #[arg(long)]
    levels: Vec<String>,
    /// Report JSON.
    #[arg(long)]
    out: PathBuf,
    /// Also write the text table here instead of standard error.
    #[arg(long)]
    table: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))
            .and_then(|pool| pool.install(|| run(&cli))),
        None => run(&cli),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<String> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = config.resolve_seed(cli.seed);
    match &cli.command {
        Command::Index(a) => cmd_index(a, &config, seed),
        Command::Decode(a) => cmd_decode(a, &config, seed),
        Command::Knn(a) => cmd_knn(a, &config),
        Command::Augment(a) => cmd_augment(a, &config),
        Command::Eval(a) => cmd_eval(a, &config),
    }
}

fn cmd_index(a: &IndexArgs, config: &RunConfig, seed: u64) -> Result<String> {
    let catalog = ConceptCatalog::load(&a.ontology)?;
    let variant = match (a.variant, &config.index.variant) {
        (Some(v), _) => v,
        (None, Some(s)) => s.parse()?,
        (None, None) => IndexVariant::SsidName,
    };
    let defaults = IndexerConfig::default();
    let cfg = IndexerConfig {
        g: a.g.or(config.index.g).unwrap_or(defaults.g),
        m: a.m.or(config.index.m).unwrap_or(defaults.m),
        seed,
        max_iters: config.index.max_iters.unwrap_or(defaults.max_iters),
        tol: config.index.tol.unwrap_or(defaults.tol),
    };
    cfg.validate()?;
    let pairs = if variant.uses_tree() {
        let path = a
            .embeddings
            .as_deref()
            .ok_or_else(|| Error::Config(format!("--variant {variant} needs --embeddings")))?;
        let emb = load_matrix(path, a.ids.as_deref())?;
        let tree = indexer::variant_tree(variant, &catalog, &emb, &cfg)?.expect("tree variant");
        if let Some(dump) = &a.tree_dump {
            jsonl::write(dump, tree.dump())?;
        }
        indexer::assign_ssids(&tree).to_index_strings()
    } else {
        let unused = EmbeddingMatrix::new(vec![], 1, vec![])?;
        indexer::build_index_variant(variant, &catalog, &unused, &cfg)?
    };
    write_index_tsv(&a.out, &pairs)?;
    // Ontology ids are opaque strings, so only digit paths get a depth histogram.
    let depths = match SsidMap::from_index_strings(&pairs) {
        Ok(map) => indexer::depth_histogram(&map)
            .into_iter()
            .map(|(len, n)| format!("{len}:{n}"))
            .collect::<Vec<_>>()
            .join(","),
        Err(_) => "-".into(),
    };
    Ok(format!(
        "index variant={variant} concepts={} seed={seed} depths={depths}",
        pairs.len()
    ))
}

#[derive(Deserialize)]
struct TargetRecord {
    qid: String,
    concepts: Vec<String>,
}

fn cmd_decode(a: &DecodeArgs, config: &RunConfig, seed: u64) -> Result<String> {
    let full = SsidMap::load(&a.ssid_map)?;
    let map = match &a.restrict_to {
        Some(p) => {
            let keep: BTreeSet<String> = jsonl::read_lines(p)?.into_iter().collect();
            full.restrict(|id| keep.contains(id))
        }
        None => full,
    };
    let vocab = SsidVocabulary::build(&map)?;
    let queries = a.queries.load()?;
    let defaults = BeamConfig::default();
    let cfg = BeamConfig {
        beam_width: a.beam.or(config.decode.beam).unwrap_or(defaults.beam_width),
        max_ssids: a.max_ssids.or(config.decode.max_ssids).unwrap_or(defaults.max_ssids),
        max_tokens: a.max_tokens.or(config.decode.max_tokens).unwrap_or(defaults.max_tokens),
        length_normalize: config.decode.length_normalize.unwrap_or(defaults.length_normalize),
    };
    cfg.validate()?;
    let scorer = match (a.scorer, &config.decode.scorer) {
        (Some(s), _) => s,
        (None, Some(s)) => ScorerKind::from_str(s, true).map_err(|_| Error::Config(format!("unknown scorer {s:?}")))?,
        (None, None) => ScorerKind::Oracle,
    };
    let rows: Vec<(String, Vec<f32>)> = queries.iter().map(|(id, v)| (id.to_string(), v.to_vec())).collect();

    let records: Vec<DecodeRecord> = match scorer {
        ScorerKind::Oracle => {
            let path = a
                .embeddings
                .as_deref()
                .ok_or_else(|| Error::Config("--scorer oracle needs --embeddings".into()))?;
            let emb = load_matrix(path, a.ids.as_deref())?;
            let eos_bias = a.eos_bias.or(config.decode.eos_bias).unwrap_or(0.0);
            decode_with_oracle(&rows, &vocab, &emb, &cfg, eos_bias)?
        }
        ScorerKind::Random => rows
            .par_iter()
            .enumerate()
            .map(|(i, (qid, _))| {
                let scorer = RandomScorer {
                    seed: seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                };
                Ok(DecodeRecord::new(
                    qid.clone(),
                    &constrained_beam_search(&scorer, &vocab, &cfg)?,
                ))
            })
            .collect::<Result<_>>()?,
        ScorerKind::Teacher => {
            let path = a
                .targets
                .as_deref()
                .ok_or_else(|| Error::Config("--scorer teacher needs --targets".into()))?;
            let targets: BTreeMap<String, Vec<String>> = jsonl::read::<TargetRecord>(path)?
                .into_iter()
                .map(|(_, t)| (t.qid, t.concepts))
                .collect();
            rows.par_iter()
                .map(|(qid, _)| {
                    let concepts: BTreeSet<&String> = targets.get(qid).into_iter().flatten().collect();
                    let ssids = concepts
                        .into_iter()
                        .map(|c| map.get(c).ok_or_else(|| Error::UnmappedConcept(c.clone())))
                        .collect::<Result<Vec<_>>>()?;
                    let scorer = TeacherScorer::new(ssids);
                    Ok(DecodeRecord::new(
                        qid.clone(),
                        &constrained_beam_search(&scorer, &vocab, &cfg)?,
                    ))
                })
                .collect::<Result<_>>()?
        }
        ScorerKind::Head => {
            let path = a
                .head
                .as_deref()
                .ok_or_else(|| Error::Config("--scorer head needs --head".into()))?;
            let head = ScoringHead::load(path)?;
            if (head.digit_count() as u32) < vocab.digit_count() {
                return Err(Error::Config(format!(
                    "scoring head covers {} digits but the ssID map uses {}",
                    head.digit_count(),
                    vocab.digit_count()
                )));
            }
            rows.par_iter()
                .map(|(qid, v)| {
                    let scorer = HeadScorer {
                        head: &head,
                        hidden: StaticHidden(v.iter().map(|&x| x as f64).collect()),
                    };
                    Ok(DecodeRecord::new(
                        qid.clone(),
                        &constrained_beam_search(&scorer, &vocab, &cfg)?,
                    ))
                })
                .collect::<Result<_>>()?
        }
    };

    let sequences: usize = records.iter().map(|r| r.sequences.len()).sum();
    let invalid: usize = records
        .iter()
        .flat_map(|r| &r.sequences)
        .map(|s| parse_sequence(&s.text, &vocab).discarded)
        .sum();
    jsonl::write(&a.out, &records)?;
    Ok(format!(
        "decode queries={} beam={} sequences={sequences} invalid_spans={invalid}",
        records.len(),
        cfg.beam_width
    ))
}

fn cmd_knn(a: &KnnArgs, config: &RunConfig) -> Result<String> {
    let emb = a.vectors.load()?;
    let queries = a.queries.load()?;
    let defaults = KnnConfig::default();
    let cfg = KnnConfig {
        k: a.k.or(config.knn.k).unwrap_or(defaults.k),
        threshold: a.threshold.or(config.knn.threshold).unwrap_or(defaults.threshold),
    };
    let records = knn_batch(&queries, &emb, &cfg)?;
    let hits: usize = records.iter().map(|r| r.hits.len()).sum();
    jsonl::write(&a.out, &records)?;
    Ok(format!(
        "knn queries={} k={} threshold={} hits={hits}",
        records.len(),
        cfg.k,
        cfg.threshold
    ))
}

fn cmd_augment(a: &AugmentArgs, config: &RunConfig) -> Result<String> {
    let claims: Vec<ClaimRecord> = jsonl::read(&a.claims)?.into_iter().map(|(_, c)| c).collect();
    let gold = augment::gold_sets(jsonl::read::<GoldRecord>(&a.gold)?.into_iter().map(|(_, g)| g));
    let excerpts = load_matrix(&a.excerpts, a.excerpt_ids.as_deref())?;
    let concepts = a.vectors.load()?;
    let map = SsidMap::load(&a.ssid_map)?;
    let threshold = a
        .threshold
        .or(config.augment.threshold)
        .unwrap_or(augment::DEFAULT_THRESHOLD);
    let pairs = augment::match_claims(&claims, &gold, &excerpts, &concepts, threshold)?;
    let records = augment::emit_training_pairs(&pairs, &map)?;
    if let Some(p) = &a.pairs_out {
        jsonl::write(p, &pairs)?;
    }
    jsonl::write(&a.out, &records)?;
    Ok(format!(
        "augment claims={} pairs={} records={} threshold={threshold}",
        claims.len(),
        pairs.len(),
        records.len()
    ))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AnyRunRecord {
    Decode(DecodeRecord),
    Knn(KnnRecord),
}

fn load_run(path: &Path) -> Result<RunOutput> {
    let mut decode = Vec::new();
    let mut knn = Vec::new();
    for (line, r) in jsonl::read::<AnyRunRecord>(path)? {
        match r {
            AnyRunRecord::Decode(d) if knn.is_empty() => decode.push(d),
            AnyRunRecord::Knn(k) if decode.is_empty() => knn.push(k),
            _ => {
                return Err(Error::Malformed {
                    path: path.to_path_buf(),
                    line,
                    msg: "mixes decode and knn records".into(),
                })
            }
        }
    }
    Ok(if knn.is_empty() {
        RunOutput::Decode(decode)
    } else {
        RunOutput::Knn(knn)
    })
}

fn cmd_eval(a: &EvalArgs, config: &RunConfig) -> Result<String> {
    let run = load_run(&a.run)?;
    let queries: Vec<QueryRecord> = jsonl::read(&a.queries)?.into_iter().map(|(_, q)| q).collect();
    let gold = augment::gold_sets(jsonl::read::<GoldRecord>(&a.gold)?.into_iter().map(|(_, g)| g));
    let vocab = match &a.ssid_map {
        Some(p) => Some(SsidVocabulary::build(&SsidMap::load(p)?)?),
        None => None,
    };
    let train: Option<BTreeSet<String>> = match &a.train_concepts {
        Some(p) => Some(jsonl::read_lines(p)?.into_iter().collect()),
        None => None,
    };
    let ks = if !a.k.is_empty() {
        a.k.clone()
    } else {
        config.eval.ks.clone().unwrap_or_else(|| vec![1, 5, 10])
    };
    let level_names = if !a.levels.is_empty() {
        a.levels.clone()
    } else {
        config.eval.levels.clone().unwrap_or_default()
    };
    let level_sets = if level_names.is_empty() {
        eval::default_level_sets(&queries)
    } else {
        level_names
            .iter()
            .map(|s| eval::parse_level_set(s))
            .collect::<Result<_>>()?
    };
    let report = eval::evaluate_run(&run, &queries, &gold, vocab.as_ref(), train.as_ref(), &ks, &level_sets)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&a.out, json + "\n").map_err(|e| Error::io(a.out.clone(), e))?;
    let table = report.to_table();
    match &a.table {
        Some(p) => std::fs::write(p, &table).map_err(|e| Error::io(p.clone(), e))?,
        None => eprint!("{table}"),
    }
    let last = report.rows.last();
    Ok(format!(
        "eval rows={} levels={} k={} precision={:.6} recall={:.6} f1={:.6}",
        report.rows.len(),
        last.map_or("-", |r| r.levels.as_str()),
        last.map_or(0, |r| r.k),
        last.map_or(0.0, |r| r.prf.precision),
        last.map_or(0.0, |r| r.prf.recall),
        last.map_or(0.0, |r| r.prf.f1),
    ))
}
