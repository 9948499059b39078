//! The `intermedia` command line.

use std::collections::HashSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use intermedia_core::corpus::{Corpus, Tokenizer, MANIFEST_FILE, TWEETS_FILE};
use intermedia_core::portrait::{build_portrait, PoliticalKeywords};
use intermedia_core::recsys::{
    cluster_with_model, Algorithm, RecConfig, Recommendation, RecommendationCluster, Recommender,
};
use intermedia_core::synth::{self, evaluate_corpus, generate, EvalConfig, SynthSpec};
use intermedia_core::topicgraph::{
    build_graph, intermediary_topics, CentralityMethod, GraphReport,
};
use intermedia_core::topics::{self, ModelConfig, TopicModel, TopicVector};
use intermedia_service::{AppState, ServiceConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "intermedia",
    version,
    about = "Intermediary-topic people recommendation and data portraits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokenize a tweets NDJSON file into a corpus directory.
    Ingest(IngestArgs),
    /// Fit an LDA topic model on a corpus.
    Train(TrainArgs),
    /// Build the topic graph and select intermediary topics.
    Graph(GraphArgs),
    /// Rank candidates for one user.
    Recommend(RecommendArgs),
    /// Build one user's data portrait.
    Portrait(PortraitArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Generate a planted two-community corpus.
    Simulate(SimulateArgs),
    /// Compare IT and KLD cross-community fractions on a labeled corpus.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// One stopword per line; defaults to the bundled Spanish and English lists.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus directory (from `ingest`) or a tweets NDJSON file.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    /// Defaults to 100, or a fifth of `--iters` when that is smaller.
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Dirichlet prior on document topics; defaults to 50/k.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = topics::DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = CentralityMethod::WeightedCloseness)]
    pub method: CentralityMethod,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub target: String,
    #[arg(long, default_value = "IT")]
    pub algorithm: Algorithm,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 20)]
    pub top_n: usize,
    /// With a corpus, candidates are limited to recently active users and
    /// users absent from the model are folded in.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 48)]
    pub window_hours: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PortraitArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub user: String,
    /// Political keyword list; defaults to the bundled illustrative list.
    #[arg(long)]
    pub keywords: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    /// Seed for condition assignment.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for the event log and condition snapshot.
    #[arg(long, default_value = "state")]
    pub state: PathBuf,
    #[arg(long)]
    pub keywords: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub top_n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON spec; omitted fields take their defaults.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Corpus directory or tweets NDJSON file.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    #[arg(long, default_value_t = 10)]
    pub top_n: usize,
    /// Number of LDA seeds, starting at 0.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[arg(long, default_value_t = CentralityMethod::WeightedCloseness)]
    pub method: CentralityMethod,
    #[arg(long)]
    pub report: PathBuf,
}

/// Output of `recommend`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendOutput {
    pub target: String,
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub candidate_count: usize,
    pub recommendations: Vec<Recommendation>,
    pub clusters: Vec<RecommendationCluster>,
}

/// Opens an ingested corpus directory, or ingests a tweets file (or a
/// directory holding only `tweets.ndjson`) on the fly.
pub fn open_corpus(path: &Path) -> Result<Corpus> {
    if path.is_dir() {
        if path.join(MANIFEST_FILE).exists() {
            return Corpus::load_dir(path)
                .with_context(|| format!("loading corpus {}", path.display()));
        }
        let tweets = path.join(TWEETS_FILE);
        if tweets.exists() {
            return Ok(Corpus::ingest(&tweets, Tokenizer::default())?);
        }
        bail!(
            "{} holds neither a corpus manifest nor {TWEETS_FILE}",
            path.display()
        );
    }
    Ok(Corpus::ingest(path, Tokenizer::default())?)
}

fn default_burn_in(iters: usize) -> usize {
    (iters / 5).min(100)
}

fn keywords(path: Option<&Path>) -> Result<PoliticalKeywords> {
    Ok(match path {
        Some(p) => PoliticalKeywords::from_file(p)?,
        None => PoliticalKeywords::starter(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let bytes = serde_json::to_vec_pretty(value)?;
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Train(a) => train(a),
        Command::Graph(a) => graph(a),
        Command::Recommend(a) => recommend(a),
        Command::Portrait(a) => portrait(a),
        Command::Serve(a) => serve(a),
        Command::Simulate(a) => simulate(a),
        Command::Evaluate(a) => evaluate(a),
    }
}

fn ingest(a: IngestArgs) -> Result<()> {
    let tokenizer = match &a.stopwords {
        Some(p) => Tokenizer::from_stopword_file(p)?,
        None => Tokenizer::default(),
    };
    let corpus = Corpus::ingest(&a.input, tokenizer)?;
    corpus.save_dir(&a.out)?;
    println!(
        "ingested {} tweets from {} users ({} lines skipped, {} distinct tokens) into {}",
        corpus.tweet_count(),
        corpus.user_count(),
        corpus.skipped(),
        corpus.vocabulary().len(),
        a.out.display()
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let corpus = open_corpus(&a.corpus)?;
    let mut cfg = ModelConfig::with_topics(a.k);
    cfg.iterations = a.iters;
    cfg.burn_in = a.burn_in.unwrap_or_else(|| default_burn_in(a.iters));
    cfg.beta = a.beta;
    if let Some(alpha) = a.alpha {
        cfg.alpha = alpha;
    }
    cfg.rng_seed = a.seed;
    let model = topics::train(&corpus, &cfg)?;
    model.save(&a.out)?;
    println!(
        "trained k={} on {} users; model written to {}",
        model.k(),
        model.user_ids().count(),
        a.out.display()
    );
    Ok(())
}

fn graph(a: GraphArgs) -> Result<()> {
    let model = TopicModel::load(&a.model)?;
    let g = build_graph(&model.user_vectors(), a.epsilon)?;
    let itset = intermediary_topics(&g, a.method);
    let report = GraphReport::new(&g, &itset);
    report.save(&a.out)?;
    println!(
        "{} topics, {} edges, {} intermediary topics ({}); written to {}",
        g.node_count(),
        g.edge_count(),
        report.intermediary.len(),
        a.method,
        a.out.display()
    );
    Ok(())
}

fn recommend(a: RecommendArgs) -> Result<()> {
    let model = TopicModel::load(&a.model)?;
    let report = GraphReport::load(&a.graph)?;
    if report.k != model.k() {
        bail!(
            "graph has {} topics but the model has {}",
            report.k,
            model.k()
        );
    }
    let cfg = RecConfig {
        gamma: a.gamma,
        top_n: a.top_n,
        candidate_window_hours: a.window_hours,
        algorithm: a.algorithm,
    };
    let (vectors, candidates): (Vec<TopicVector>, Vec<String>) = match &a.corpus {
        Some(path) => {
            let corpus = open_corpus(path)?;
            let vectors = corpus
                .documents()
                .map(|d| {
                    model
                        .user_vector(&d.user_id)
                        .unwrap_or_else(|| model.infer(d, corpus.vocabulary()).vector)
                })
                .collect();
            let candidates = corpus
                .latest_activity()
                .map(|t| corpus.active_users(t, a.window_hours))
                .unwrap_or_default();
            (vectors, candidates)
        }
        None => {
            let vectors = model.user_vectors();
            let ids = vectors.iter().map(|v| v.user_id.clone()).collect();
            (vectors, ids)
        }
    };
    let itset = report.intermediary_set();
    let recommender = Recommender::new(&vectors, &itset, report.epsilon);
    let recommendations = recommender.recommend(&a.target, &candidates, &cfg, &HashSet::new())?;
    let out = RecommendOutput {
        clusters: cluster_with_model(&recommendations, &model),
        target: a.target,
        algorithm: a.algorithm,
        gamma: a.gamma,
        candidate_count: candidates.len().saturating_sub(1),
        recommendations,
    };
    write_json(&a.out, &out)?;
    println!(
        "{} recommendations for {} ({}) written to {}",
        out.recommendations.len(),
        out.target,
        out.algorithm,
        a.out.display()
    );
    Ok(())
}

fn portrait(a: PortraitArgs) -> Result<()> {
    let corpus = open_corpus(&a.corpus)?;
    let kw = keywords(a.keywords.as_deref())?;
    let p = build_portrait(&corpus, &a.user, &kw, chrono::Utc::now())?;
    write_json(&a.out, &p)?;
    println!(
        "portrait of {} ({} bins, political: {}) written to {}",
        a.user,
        p.bins.len(),
        p.political_content,
        a.out.display()
    );
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let corpus = open_corpus(&a.corpus)?;
    let model = TopicModel::load(&a.model)?;
    let report = GraphReport::load(&a.graph)?;
    let config = ServiceConfig {
        seed: a.seed,
        state_dir: Some(a.state.clone()),
        rec: RecConfig {
            gamma: a.gamma,
            top_n: a.top_n,
            ..RecConfig::default()
        },
        keywords: keywords(a.keywords.as_deref())?,
    };
    let state = AppState::new(corpus, model, &report, config)?;
    let addr = SocketAddr::new(a.host, a.port);
    tokio::runtime::Runtime::new()?.block_on(intermedia_service::serve(state, addr))?;
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let spec: SynthSpec = match &a.spec {
        Some(p) => {
            let bytes = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", p.display()))?
        }
        None => SynthSpec::default(),
    };
    let corpus = generate(&spec)?;
    corpus.save(&a.out)?;
    println!(
        "{} tweets from {} users written to {} (labels in {})",
        corpus.tweets.len(),
        corpus.labels.len(),
        a.out.join(synth::TWEETS_FILE).display(),
        a.out.join(synth::LABELS_FILE).display()
    );
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let corpus = open_corpus(&a.corpus)?;
    let labels = synth::load_labels(&a.labels)?;
    let config = EvalConfig {
        k: a.k,
        iterations: a.iters,
        burn_in: default_burn_in(a.iters),
        gamma: a.gamma,
        top_n: a.top_n,
        method: a.method,
        seeds: (0..a.seeds).collect(),
        ..EvalConfig::default()
    };
    let report = evaluate_corpus(&corpus, &labels, &config)?;
    write_json(&a.report, &report)?;
    println!(
        "{:>6} {:>10} {:>10} {:>5} {:>8}",
        "seed", "IT", "KLD", "|IT|", "seconds"
    );
    for r in &report.per_seed {
        println!(
            "{:>6} {:>10.4} {:>10.4} {:>5} {:>8.1}",
            r.seed,
            r.it_fraction,
            r.kld_fraction,
            r.intermediary_topics.len(),
            r.seconds
        );
    }
    println!(
        "{:>6} {:>10.4} {:>10.4}\nseparation (IT - KLD): {:.4}",
        "mean", report.mean_it_fraction, report.mean_kld_fraction, report.separation
    );
    Ok(())
}
