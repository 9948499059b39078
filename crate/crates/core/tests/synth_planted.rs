use std::collections::HashSet;

use intermedia_core::corpus::{Corpus, Tokenizer};
use intermedia_core::recsys::{Algorithm, RecConfig, Recommender};
use intermedia_core::synth::{generate, Community, SynthSpec};
use intermedia_core::topicgraph::{build_graph, intermediary_topics, CentralityMethod};
use intermedia_core::topics::{train, ModelConfig};

#[test]
fn default_spec_gives_every_user_a_shared_theme_token() {
    let spec = SynthSpec::default();
    let synth = generate(&spec).unwrap();
    assert_eq!(synth.labels.len(), 200);
    let corpus = Corpus::from_tweets(synth.tweets, Tokenizer::default(), 0);
    let themes = spec.theme_vocabulary();
    let vocab = corpus.vocabulary();
    for doc in corpus.documents() {
        let has_theme = doc
            .tokens
            .keys()
            .any(|&id| themes.contains(vocab.surface(id).unwrap_or_default()));
        assert!(has_theme, "{} has no shared-theme token", doc.user_id);
    }
}

#[test]
fn community_vocabularies_are_disjoint() {
    let spec = SynthSpec::default();
    let a = spec.community_vocabulary(Community::A);
    let b = spec.community_vocabulary(Community::B);
    let t = spec.theme_vocabulary();
    assert!(a.is_disjoint(&b) && a.is_disjoint(&t) && b.is_disjoint(&t));
    assert_eq!(a.len(), spec.political_vocab_a);
    assert_eq!(t.len(), spec.shared_themes * spec.theme_vocab);
}

#[test]
fn without_shared_themes_cross_community_it_scores_are_zero() {
    for seed in 0..4 {
        separated_fit_has_no_cross_community_it(seed);
    }
}

fn separated_fit_has_no_cross_community_it(seed: u64) {
    let spec = SynthSpec {
        users_per_community: 30,
        // single-word tweets keep the vocabulary to repeated unigrams
        tweets_per_user: 1000,
        words_per_tweet: 1,
        issues_per_community: 1,
        community_weight: 1.0,
        shared_weight: 0.0,
        rng_seed: seed,
        ..SynthSpec::default()
    };
    let synth = generate(&spec).unwrap();
    let labels = synth.label_map();
    let corpus = Corpus::from_tweets(synth.tweets, Tokenizer::default(), 0);
    let mut cfg = ModelConfig::with_topics(20);
    cfg.iterations = 300;
    cfg.rng_seed = seed;
    let model = train(&corpus, &cfg).unwrap();
    // the smoothing floor alpha / (N + k alpha) must sit below epsilon, or
    // every topic is significant for everyone
    let floor = cfg.alpha / (1000.0 + cfg.k as f64 * cfg.alpha);
    assert!(floor < cfg.epsilon);

    // the fit must be well separated: each topic's mass sits on one community
    let vocab = corpus.vocabulary();
    let a_words = spec.community_vocabulary(Community::A);
    for t in 0..model.k() {
        let mut mass = [0.0, 0.0];
        for (id, surface) in vocab.surfaces().iter().enumerate() {
            let side = usize::from(!surface.split('_').all(|p| a_words.contains(p)));
            mass[side] += model.topic_word(t, id as u32);
        }
        assert!(
            mass[0].min(mass[1]) < 0.05,
            "topic {t} mixes communities: {mass:?}"
        );
    }

    let vectors = model.user_vectors();
    let graph = build_graph(&vectors, cfg.epsilon).unwrap();
    let itset = intermediary_topics(&graph, CentralityMethod::WeightedCloseness);
    let rec = Recommender::new(&vectors, &itset, cfg.epsilon);
    let users: Vec<String> = vectors.iter().map(|v| v.user_id.clone()).collect();
    let rc = RecConfig {
        algorithm: Algorithm::It,
        top_n: users.len(),
        ..RecConfig::default()
    };
    for u in users.iter().step_by(7) {
        for r in rec.recommend(u, &users, &rc, &HashSet::new()).unwrap() {
            if labels[&r.candidate_id] != labels[u] {
                assert_eq!(r.score, 0.0, "{u} -> {}", r.candidate_id);
                assert_eq!(r.jit, 0.0);
            }
        }
    }
}
