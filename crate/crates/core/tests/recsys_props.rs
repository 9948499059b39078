use std::collections::{BTreeSet, HashSet};

use intermedia_core::recsys::{cluster, fscore, Algorithm, RecConfig, Recommender};
use intermedia_core::topicgraph::{CentralityMethod, IntermediaryTopicSet};
use intermedia_core::topics::TopicVector;
use proptest::prelude::*;

const EPS: f64 = 0.01;

fn distribution(k: usize) -> impl Strategy<Value = Vec<f64>> {
    // a few heavy topics and many light ones, so significance varies
    prop::collection::vec(prop_oneof![1e-4..5e-3f64, 0.05..1.0f64], k).prop_map(|raw| {
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|x| x / total).collect()
    })
}

fn scenario() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, f64, usize)> {
    (3usize..12).prop_flat_map(|k| {
        (
            prop::collection::vec(distribution(k), 2..=51),
            prop::collection::vec(0.0..1.0f64, k),
            0.1..4.0f64,
            1usize..30,
        )
    })
}

struct Oracle {
    id: String,
    score: f64,
    raw: f64,
}

/// Scores every candidate from scratch and sorts.
fn oracle(vectors: &[TopicVector], itset: &BTreeSet<usize>, cfg: &RecConfig) -> Vec<Oracle> {
    let target = &vectors[0];
    let it = |v: &TopicVector| -> BTreeSet<usize> {
        (0..v.probs.len())
            .filter(|t| v.probs[*t] >= EPS && itset.contains(t))
            .collect()
    };
    let raws: Vec<f64> = vectors[1..]
        .iter()
        .map(|c| {
            (0..c.probs.len())
                .map(|i| {
                    let (p, q) = (target.probs[i], c.probs[i]);
                    p * (p / q).ln() + q * (q / p).ln()
                })
                .sum()
        })
        .collect();
    let max = raws.iter().cloned().fold(0.0, f64::max);
    let mut out: Vec<Oracle> = vectors[1..]
        .iter()
        .zip(&raws)
        .map(|(c, &raw)| {
            let d = if max > 0.0 { raw / max } else { 0.0 };
            let score = match cfg.algorithm {
                Algorithm::Kld => 1.0 - d,
                Algorithm::It => {
                    let (a, b) = (it(target), it(c));
                    let union = a.union(&b).count();
                    let s = if union == 0 {
                        0.0
                    } else {
                        a.intersection(&b).count() as f64 / union as f64
                    };
                    let r = 1.0 - d;
                    if s == 0.0 || r == 0.0 {
                        0.0
                    } else {
                        let g2 = cfg.gamma * cfg.gamma;
                        1.0 / (g2 / ((1.0 + g2) * s) + 1.0 / ((1.0 + g2) * r))
                    }
                }
            };
            Oracle {
                id: c.user_id.clone(),
                score,
                raw,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then_with(|| a.id.cmp(&b.id))
    });
    out.truncate(cfg.top_n);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ranking_matches_brute_force((probs, centrality, gamma, top_n) in scenario(), it_alg in any::<bool>()) {
        let vectors: Vec<TopicVector> = probs
            .into_iter()
            .enumerate()
            .map(|(i, p)| TopicVector { user_id: format!("u{i:02}"), probs: p })
            .collect();
        let itset = IntermediaryTopicSet::from_centrality(centrality, CentralityMethod::WeightedCloseness);
        let cfg = RecConfig {
            gamma,
            top_n,
            algorithm: if it_alg { Algorithm::It } else { Algorithm::Kld },
            ..RecConfig::default()
        };
        let candidates: Vec<String> = vectors.iter().map(|v| v.user_id.clone()).collect();
        let got = Recommender::new(&vectors, &itset, EPS)
            .recommend("u00", &candidates, &cfg, &HashSet::new())
            .unwrap();
        let ids: BTreeSet<usize> = itset.topic_ids.iter().copied().collect();
        let want = oracle(&vectors, &ids, &cfg);
        prop_assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            prop_assert_eq!(&g.candidate_id, &w.id);
            prop_assert!((g.score - w.score).abs() <= 1e-9);
            prop_assert!((g.distance - w.raw).abs() <= 1e-9 * w.raw.max(1.0));
        }

        // clusters partition the list
        let clusters = cluster(&got, |t| vec![format!("t{t}")]);
        let members: Vec<&str> = clusters.iter().flat_map(|c| c.members.iter().map(|m| m.candidate_id.as_str())).collect();
        let unique: HashSet<&str> = members.iter().copied().collect();
        prop_assert_eq!(members.len(), got.len());
        prop_assert_eq!(unique.len(), got.len());
        for c in &clusters {
            prop_assert!(c.members.iter().all(|m| m.dominant_topic == c.cluster_topic));
        }
        prop_assert!(clusters.windows(2).all(|w| w[0].members.len() >= w[1].members.len()));
    }

    #[test]
    fn kld_top_one_is_raw_argmin((probs, centrality, _gamma, _n) in scenario()) {
        let vectors: Vec<TopicVector> = probs
            .into_iter()
            .enumerate()
            .map(|(i, p)| TopicVector { user_id: format!("u{i:02}"), probs: p })
            .collect();
        let itset = IntermediaryTopicSet::from_centrality(centrality, CentralityMethod::WeightedCloseness);
        let cfg = RecConfig { algorithm: Algorithm::Kld, top_n: 1, ..RecConfig::default() };
        let candidates: Vec<String> = vectors.iter().map(|v| v.user_id.clone()).collect();
        let rec = Recommender::new(&vectors, &itset, EPS);
        let top = rec.recommend("u00", &candidates, &cfg, &HashSet::new()).unwrap();
        let all = rec
            .recommend("u00", &candidates, &RecConfig { top_n: 100, ..cfg }, &HashSet::new())
            .unwrap();
        let min = all.iter().map(|r| r.distance).fold(f64::INFINITY, f64::min);
        prop_assert_eq!(top[0].distance, min);
    }

    #[test]
    fn fscore_monotone(s1 in 0.0..=1.0f64, s2 in 0.0..=1.0f64, d1 in 0.0..=1.0f64, d2 in 0.0..=1.0f64, g in 0.05..20.0f64) {
        let (slo, shi) = (s1.min(s2), s1.max(s2));
        let (dlo, dhi) = (d1.min(d2), d1.max(d2));
        prop_assert!(fscore(slo, d1, g).unwrap() <= fscore(shi, d1, g).unwrap() + 1e-12);
        prop_assert!(fscore(s1, dhi, g).unwrap() <= fscore(s1, dlo, g).unwrap() + 1e-12);
        let f = fscore(s1, d1, g).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
    }

    #[test]
    fn fscore_gamma_limits(s in 0.01..0.99f64, d in 0.01..0.99f64) {
        prop_assert!((fscore(s, d, 1e-4).unwrap() - (1.0 - d)).abs() < 1e-6);
        prop_assert!((fscore(s, d, 1e4).unwrap() - s).abs() < 1e-6);
    }
}
