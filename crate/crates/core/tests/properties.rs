use std::collections::BTreeMap;

use mmdialog_core::agent::{cosine_loss, gumbel_softmax};
use mmdialog_core::catalog::{
    build_vocabulary, encode_catalog, generate_catalog, AttributeIndex, Catalog, CatalogConfig, VocabConfig,
    Vocabulary, DEFAULT_IMAGE_NOISE,
};
use mmdialog_core::numerics::{cosine_similarity, euclidean_distance, gumbel_from_uniform, softmax, SeededRng};
use mmdialog_core::simulator::{
    knn, sample_n1, step_fsa, Dendrogram, DialogContext, FsaConfig, FsaNode,
};
use proptest::prelude::*;

fn vector(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, len)
}

fn nonzero(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, len).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

fn distribution(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01..1.0f64, len).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn desk_vocab() -> Vocabulary {
    build_vocabulary(&VocabConfig::desk(), &mut SeededRng::new(1, 0)).unwrap()
}

fn catalog(vocab: &Vocabulary, n: usize, seed: u64) -> Catalog {
    let ps = generate_catalog(vocab, &CatalogConfig { products: n, family: None }, &mut SeededRng::new(seed, 0)).unwrap();
    Catalog::new(ps, vocab).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn softmax_is_shift_invariant(v in vector(1..12), c in -100.0..100.0f64) {
        let a = softmax(&v).unwrap();
        let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
        let b = softmax(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_is_scale_invariant(a in nonzero(6), b in nonzero(6), s in 0.01..100.0f64) {
        let scaled: Vec<f64> = a.iter().map(|x| x * s).collect();
        let c1 = cosine_similarity(&a, &b).unwrap();
        let c2 = cosine_similarity(&scaled, &b).unwrap();
        prop_assert!((c1 - c2).abs() < 1e-9);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&c1));
    }

    #[test]
    fn gumbel_weights_are_a_distribution(
        pi in distribution(4),
        u in prop::collection::vec(1e-9..1.0f64, 4),
        tau in 0.05..5.0f64,
    ) {
        let g: Vec<f64> = u.iter().map(|&x| gumbel_from_uniform(x)).collect();
        let w = gumbel_softmax(&pi, &g, tau).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(w.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn low_temperature_approaches_one_hot(
        pi in distribution(3),
        u in prop::collection::vec(1e-6..1.0f64, 3),
    ) {
        let g: Vec<f64> = u.iter().map(|&x| gumbel_from_uniform(x)).collect();
        let z: Vec<f64> = pi.iter().zip(&g).map(|(p, g)| p.ln() + g).collect();
        let mut sorted = z.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        prop_assume!(sorted[0] - sorted[1] > 0.05);
        let arg = z.iter().position(|&x| x == sorted[0]).unwrap();
        let w = gumbel_softmax(&pi, &g, 1e-3).unwrap();
        prop_assert!(w[arg] > 1.0 - 1e-12, "{w:?}");
    }

    #[test]
    fn cosine_loss_is_bounded(
        samples in prop::collection::vec(nonzero(5), 1..7),
        truths in prop::collection::vec(nonzero(5), 1..7),
    ) {
        let l = cosine_loss(&samples, &truths).unwrap();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&l));
    }

    #[test]
    fn knn_matches_brute_force(
        points in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 3), 2..40),
        q in any::<prop::sample::Index>(),
        n in 1usize..10,
    ) {
        let q = q.index(points.len());
        let got = knn(&points, q, n).unwrap();
        let mut oracle: Vec<(f64, usize)> = (0..points.len())
            .filter(|&i| i != q)
            .map(|i| {
                let d: f64 = points[i].iter().zip(&points[q]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                (d, i)
            })
            .collect();
        oracle.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let expected: Vec<usize> = oracle.iter().take(n).map(|&(_, i)| i).collect();
        prop_assert_eq!(got.indices(), expected);
        prop_assert_eq!(got.truncated, n > points.len() - 1);
    }

    #[test]
    fn dendrogram_cut_is_a_partition(
        points in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 2), 1..30),
        threshold in 0.0..4.0f64,
    ) {
        let d = Dendrogram::average_linkage(&points).unwrap();
        prop_assert_eq!(d.merges().len(), points.len() - 1);
        prop_assert!(d.merges().windows(2).all(|w| w[0].height <= w[1].height));
        let labels = d.cut(threshold);
        for leaf in 0..points.len() {
            let members = d.cluster_of(leaf, threshold);
            prop_assert!(members.contains(&leaf));
            for &m in &members {
                prop_assert_eq!(labels[m], labels[leaf]);
            }
            let same = labels.iter().filter(|&&l| l == labels[leaf]).count();
            prop_assert_eq!(same, members.len());
        }
    }

    #[test]
    fn index_is_complete_and_search_sound(seed in 0u64..1000, picks in prop::collection::vec(any::<prop::sample::Index>(), 1..4)) {
        let vocab = desk_vocab();
        let cat = catalog(&vocab, 60, seed);
        let index = AttributeIndex::build(&cat);
        for (i, p) in cat.products().iter().enumerate() {
            for (a, t) in p.pairs() {
                prop_assert!(index.postings(a, t).contains(&i));
            }
        }
        let keys: Vec<(String, String)> = index.keys().map(|(a, t)| (a.to_string(), t.to_string())).collect();
        let constraints: BTreeMap<String, String> = picks.iter().map(|ix| keys[ix.index(keys.len())].clone()).collect();
        let ranked = index.ranked(&constraints).unwrap();
        let brute: Vec<(usize, usize)> = cat
            .products()
            .iter()
            .enumerate()
            .map(|(i, p)| (i, constraints.iter().filter(|(a, t)| p.value(a) == Some(t.as_str())).count()))
            .filter(|&(_, c)| c > 0)
            .collect();
        prop_assert_eq!(ranked.len(), brute.len());
        for w in ranked.windows(2) {
            prop_assert!(w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0));
        }
        for (i, c) in &ranked {
            prop_assert!(brute.contains(&(*i, *c)));
        }
        let hits = index.search(&constraints, 6).unwrap();
        prop_assert!(hits.iter().all(|i| brute.iter().any(|(j, _)| j == i)));
    }

    #[test]
    fn context_stays_consistent(picks in prop::collection::vec(prop::collection::vec(any::<prop::sample::Index>(), 1..4), 1..8)) {
        let vocab = desk_vocab();
        let tokens: Vec<&str> = vocab.tokens().collect();
        let mut ctx = DialogContext::default();
        for query in picks {
            let q: Vec<&str> = query.iter().map(|ix| tokens[ix.index(tokens.len())]).collect();
            ctx.apply_tokens(&q, &vocab).unwrap();
            prop_assert!(ctx.is_consistent(&vocab), "{ctx:?} after {q:?}");
        }
    }

    #[test]
    fn n1_stays_in_its_support(round in 0usize..20, seed in any::<u64>()) {
        let cfg = FsaConfig::default();
        let mut rng = SeededRng::new(seed, 0);
        let n1 = sample_n1(round, &cfg, &mut rng);
        prop_assert!(((round + 1).min(6)..=6).contains(&n1));
    }
}

#[test]
fn fsa_transition_frequencies_match_the_configuration() {
    let cfg = FsaConfig::default();
    let mut ctx = DialogContext::default();
    ctx.gender = Some("women".into());
    ctx.category = Some("shoes".into());
    let mut rng = SeededRng::new(42, 0);
    let draws = 40_000;
    for node in FsaNode::ALL.into_iter().filter(|&n| n != FsaNode::End) {
        let mut counts: BTreeMap<FsaNode, usize> = BTreeMap::new();
        for _ in 0..draws {
            *counts.entry(step_fsa(node, &ctx, &cfg, &mut rng).unwrap()).or_default() += 1;
        }
        for (target, p) in cfg.effective_row(node).unwrap() {
            let freq = *counts.get(&target).unwrap_or(&0) as f64 / draws as f64;
            assert!((freq - p).abs() < 0.02, "{node:?} -> {target:?}: {freq} vs {p}");
        }
    }
}

#[test]
fn image_nearest_neighbour_shares_category() {
    for scale in [VocabConfig::desk(), VocabConfig::full()] {
        let vocab = build_vocabulary(&scale, &mut SeededRng::new(3, 0)).unwrap();
        let cat = catalog(&vocab, 500, 4);
        let enc = encode_catalog(&cat, &vocab, 4, DEFAULT_IMAGE_NOISE).unwrap();
        let mut same = 0usize;
        let mut eligible = 0usize;
        for i in 0..enc.len() {
            let category = &cat.get(i).category;
            if cat.products().iter().filter(|p| &p.category == category).count() < 2 {
                continue;
            }
            eligible += 1;
            let nearest = (0..enc.len())
                .filter(|&j| j != i)
                .min_by(|&a, &b| {
                    euclidean_distance(&enc[a].image, &enc[i].image)
                        .total_cmp(&euclidean_distance(&enc[b].image, &enc[i].image))
                })
                .unwrap();
            same += usize::from(&cat.get(nearest).category == category);
        }
        let share = same as f64 / eligible as f64;
        assert!(share >= 0.9, "{share} over {eligible} products");
    }
}
