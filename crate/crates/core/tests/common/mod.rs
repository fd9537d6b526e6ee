#![allow(dead_code)]

use lingmess_core::{enumerate_spans, Document, Model, RoutingMode, Span, TrainConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: [&str; 24] = [
    "he", "She", "it", "they", "my", "I", "her", "the", "of", "Smith", "Anna", "lake", "fire", "Japan", "U.S.", "and",
    "president", "met", "saw", "a", "company", "this", "them", "river",
];

/// Random document with up to `max_tokens` tokens over a small vocabulary,
/// with a few random gold clusters over width-≤2 spans.
pub fn random_document(rng: &mut ChaCha8Rng, max_tokens: usize) -> Document {
    let n = rng.gen_range(4..=max_tokens);
    let mut tokens: Vec<String> = (0..n).map(|_| WORDS.choose(rng).unwrap().to_string()).collect();
    let split = rng.gen_range(1..n);
    let second = tokens.split_off(split);
    let probe = Document::new("probe", vec![tokens.clone(), second.clone()], vec![]).unwrap();
    let mut spans = enumerate_spans(&probe, 2);
    spans.shuffle(rng);
    let mut used: Vec<Span> = Vec::new();
    let mut clusters: Vec<Vec<Span>> = Vec::new();
    for s in spans.into_iter().take(rng.gen_range(2..=6)) {
        if used.iter().any(|u| u.start <= s.end && s.start <= u.end) {
            continue;
        }
        used.push(s);
        if clusters.is_empty() || rng.gen_bool(0.5) {
            clusters.push(vec![s]);
        } else {
            let i = rng.gen_range(0..clusters.len());
            clusters[i].push(s);
        }
    }
    Document::new(format!("rand{}", rng.gen::<u32>()), vec![tokens, second], clusters).unwrap()
}

pub fn small_config(rng: &mut ChaCha8Rng, routing_mode: RoutingMode) -> TrainConfig {
    TrainConfig {
        d_emb: rng.gen_range(2..=8),
        d_enc: rng.gen_range(2..=8),
        d_hidden: rng.gen_range(2..=8),
        max_span_width: 2,
        top_lambda: 1.0,
        seed: rng.gen(),
        routing_mode,
        ..TrainConfig::default()
    }
}

pub fn instance(seed: u64, routing_mode: RoutingMode) -> (Document, Model) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let doc = random_document(&mut rng, 8);
    let config = small_config(&mut rng, routing_mode);
    let model = Model::new(config, std::slice::from_ref(&doc));
    (doc, model)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
