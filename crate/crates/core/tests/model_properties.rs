mod common;

use lingmess_core::categorizer::SpanProfile;
use lingmess_core::scorers::{antecedent_score, mention_score, route, AntecedentHead, DocForward, MentionHead};
use lingmess_core::synthdata::{generate, SynthSpec};
use lingmess_core::training::{
    candidate_sets, coref_loss, doc_loss, expert_loss, gold_antecedents, marginal_nll, prune_by_scores, prune_mentions,
    restricted_candidates, restricted_candidates_with, shared_loss,
};
use lingmess_core::{
    categorize, checkpoint, enumerate_spans, pair_score, score_matrix_masked, train, Category, LossMode, MentionPair,
    Model, RoutingMode, TrainConfig,
};
use rand::seq::SliceRandom;
use rand::Rng;

#[test]
fn masked_matrix_matches_pairwise_scores() {
    for seed in 0..100 {
        let mode = RoutingMode::ALL[seed as usize % RoutingMode::ALL.len()];
        let (doc, model) = common::instance(seed, mode);
        let mut rng = common::rng(seed ^ 0xabc);
        let mut spans = enumerate_spans(&doc, 2);
        spans.shuffle(&mut rng);
        spans.truncate(rng.gen_range(1..=12));
        spans.sort();
        let fwd = DocForward::new(&model, &doc);
        let enc = model.encode(&doc);
        let matrix = score_matrix_masked(&spans, &spans, &doc, &fwd, &model);
        for (qi, q) in spans.iter().enumerate() {
            for (ci, c) in spans.iter().enumerate() {
                let cell = matrix.get(qi, ci);
                match MentionPair::new(*c, *q) {
                    Some(pair) => {
                        let expected = pair_score(pair, &doc, &enc, &model).total;
                        assert!((cell - expected).abs() <= 1e-12, "seed {seed}: {cell} vs {expected}");
                    }
                    None => assert_eq!(cell, f64::NEG_INFINITY),
                }
            }
        }
    }
}

/// Shared-only routing agrees bit for bit with scores and losses assembled
/// directly from the mention scorer and the shared antecedent scorer.
#[test]
fn shared_only_reduces_to_single_scorer() {
    for seed in 0..20 {
        let (doc, model) = common::instance(1000 + seed, RoutingMode::SharedOnly);
        let enc = model.encode(&doc);
        let mention = MentionHead::from_store(&model.params, &model.layout.mention);
        let shared = AntecedentHead::from_store(&model.params, &model.layout.shared);
        let f_s = |pair: MentionPair| {
            mention_score(pair.candidate(), &enc, &mention)
                + mention_score(pair.query(), &enc, &mention)
                + antecedent_score(pair, &enc, &shared)
        };

        let fwd = DocForward::new(&model, &doc);
        let pruned = prune_mentions(&doc, &fwd, &model);
        let clusters = doc.gold_cluster_index();
        let mut expected_loss = 0.0;
        for cs in candidate_sets(&pruned) {
            let mut scores: Vec<f64> = Vec::new();
            for c in &cs.candidates {
                let pair = MentionPair::new(*c, cs.query).unwrap();
                let direct = f_s(pair);
                assert_eq!(pair_score(pair, &doc, &enc, &model).total.to_bits(), direct.to_bits());
                scores.push(direct);
            }
            scores.push(0.0);
            let gold = gold_antecedents(&cs, &clusters);
            expected_loss += marginal_nll(&scores, &gold.mask(&cs)).unwrap().loss;
        }
        let (loss, _) = doc_loss(&model, &doc, None).unwrap();
        assert_eq!(loss.total.to_bits(), expected_loss.to_bits(), "seed {seed}");
        assert_eq!(loss.coref, 0.0);
        assert_eq!(loss.experts, [0.0; 6]);
    }
}

#[test]
fn perturbing_one_expert_leaves_other_categories_alone() {
    let doc = generate(&SynthSpec::new(1, 9)).unwrap().remove(0);
    let config = TrainConfig {
        d_emb: 6,
        d_enc: 6,
        d_hidden: 6,
        max_span_width: 2,
        ..TrainConfig::default()
    };
    let base = Model::new(config, std::slice::from_ref(&doc));
    let spans = enumerate_spans(&doc, 2);
    let pairs: Vec<(MentionPair, Category)> = spans
        .iter()
        .flat_map(|c| spans.iter().filter_map(move |q| MentionPair::new(*c, *q)))
        .map(|p| (p, categorize(p, &doc)))
        .collect();
    for t in Category::ALL {
        let mut perturbed = base.clone();
        for id in perturbed.layout.experts[t.index()].all() {
            for v in perturbed.params.value_mut(id).data_mut() {
                *v += 0.25;
            }
        }
        let (enc_a, enc_b) = (base.encode(&doc), perturbed.encode(&doc));
        let mut changed = 0;
        for (pair, category) in &pairs {
            let a = pair_score(*pair, &doc, &enc_a, &base).total;
            let b = pair_score(*pair, &doc, &enc_b, &perturbed).total;
            if *category == t {
                changed += usize::from(a != b);
            } else {
                assert_eq!(a.to_bits(), b.to_bits(), "{t} leaked into {category}");
            }
        }
        assert!(changed > 0, "{t} expert had no effect");
    }
}

#[test]
fn full_loss_is_sum_of_independent_terms() {
    for seed in 0..10 {
        let (doc, model) = common::instance(2000 + seed, RoutingMode::Linguistic);
        let enc = model.encode(&doc);
        let fwd = DocForward::new(&model, &doc);
        let pruned = prune_mentions(&doc, &fwd, &model);
        let clusters = doc.gold_cluster_index();
        let (mut coref, mut shared, mut experts) = (0.0, 0.0, 0.0);
        for cs in candidate_sets(&pruned) {
            let gold = gold_antecedents(&cs, &clusters);
            let breakdowns: Vec<_> = cs
                .candidates
                .iter()
                .map(|c| pair_score(MentionPair::new(*c, cs.query).unwrap(), &doc, &enc, &model))
                .collect();
            let with_null = |f: &dyn Fn(&lingmess_core::PairScoreBreakdown) -> f64| {
                let mut v: Vec<f64> = breakdowns.iter().map(f).collect();
                v.push(0.0);
                v
            };
            coref += coref_loss(&cs, &gold, &with_null(&|b| b.total)).unwrap().loss;
            shared += shared_loss(&cs, &gold, &with_null(&|b| b.shared_total())).unwrap().loss;
            for t in Category::ALL {
                let restricted = restricted_candidates(&cs, t, &doc);
                if restricted.candidates.is_empty() {
                    continue;
                }
                let mut scores: Vec<f64> = restricted
                    .candidates
                    .iter()
                    .map(|c| {
                        let i = cs.candidates.iter().position(|x| x == c).unwrap();
                        breakdowns[i].expert_total()
                    })
                    .collect();
                scores.push(0.0);
                experts += expert_loss(&restricted, &gold, &scores).unwrap().loss;
            }
        }
        let (loss, _) = doc_loss(&model, &doc, None).unwrap();
        let expected = coref + shared + experts;
        assert!((loss.total - expected).abs() < 1e-10, "seed {seed}: {} vs {expected}", loss.total);
    }
}

#[test]
fn raising_lambda_never_drops_spans() {
    let mut rng = common::rng(3);
    for _ in 0..200 {
        let n = rng.gen_range(1..30);
        let spans: Vec<_> = (0..n).map(|i| lingmess_core::Span::new(i, i)).collect();
        let scores: Vec<f64> = (0..n).map(|_| (rng.gen_range(-3..3) as f64) * 0.5).collect();
        let (a, b) = (rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0));
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let small = prune_by_scores(&spans, &scores, n, lo);
        let large = prune_by_scores(&spans, &scores, n, hi);
        assert!(small.iter().all(|s| large.contains(s)));
    }
}

#[test]
fn restricted_candidates_have_the_requested_category() {
    for seed in 0..30 {
        let (doc, _) = common::instance(3000 + seed, RoutingMode::Linguistic);
        for cs in candidate_sets(&enumerate_spans(&doc, 2)) {
            for t in Category::ALL {
                for mode in [RoutingMode::Linguistic, RoutingMode::Random] {
                    let restricted = restricted_candidates_with(&cs, t, &doc, mode);
                    let q = SpanProfile::new(cs.query, &doc);
                    for c in &restricted.candidates {
                        assert_eq!(route(mode, &SpanProfile::new(*c, &doc), &q), t);
                    }
                }
            }
        }
    }
}

#[test]
fn training_is_identical_across_thread_counts() {
    let docs = generate(&SynthSpec::new(4, 1)).unwrap();
    let config = TrainConfig {
        d_emb: 8,
        d_enc: 8,
        d_hidden: 8,
        epochs: 3,
        token_budget_train: 200,
        max_span_width: 3,
        ..TrainConfig::default()
    };
    for loss_mode in [LossMode::Full, LossMode::CorefOnly] {
        let config = TrainConfig {
            loss_mode,
            ..config.clone()
        };
        let (serial, log_a) = train(&docs, config.clone(), 1).unwrap();
        let (parallel, log_b) = train(&docs, config, 3).unwrap();
        assert_eq!(checkpoint::to_bytes(&serial).unwrap(), checkpoint::to_bytes(&parallel).unwrap());
        let losses = |log: &[lingmess_core::training::EpochLog]| log.iter().map(|e| e.loss.to_bits()).collect::<Vec<_>>();
        assert_eq!(losses(&log_a), losses(&log_b));
        assert!(log_a.last().unwrap().loss < log_a[0].loss);
    }
}
