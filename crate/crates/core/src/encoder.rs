//! Word-level contextual encoder.
//!
//! Each token vector is `GeLU(W_ctx · [e_{i-1}; e_i; e_{i+1}] + b_ctx)` where
//! `e_j` is the embedding of token `j`. Context slots outside the token's
//! sentence are zero.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::numerics::{gelu, gelu_grad, init_rng, uniform_init, Gradients, ParamId, ParamStore, Tensor2};

pub const UNK: usize = 0;
pub const PAD: usize = 1;
const UNK_TOKEN: &str = "<unk>";
const PAD_TOKEN: &str = "<pad>";

/// Lowercased token types mapped to contiguous ids; 0 and 1 are reserved.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    words: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn from_words<I: IntoIterator<Item = String>>(words: I) -> Self {
        let mut all = vec![UNK_TOKEN.to_string(), PAD_TOKEN.to_string()];
        all.extend(words);
        let index = all.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocab { words: all, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(&token.to_lowercase()).copied().unwrap_or(UNK)
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

impl TryFrom<Vec<String>> for Vocab {
    type Error = String;

    fn try_from(words: Vec<String>) -> Result<Self, Self::Error> {
        if words.len() < 2 || words[UNK] != UNK_TOKEN || words[PAD] != PAD_TOKEN {
            return Err("vocabulary must start with the reserved <unk> and <pad> entries".into());
        }
        let vocab = Vocab::from_words(words.into_iter().skip(2));
        if vocab.index.len() != vocab.words.len() {
            return Err("vocabulary contains duplicate entries".into());
        }
        Ok(vocab)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(vocab: Vocab) -> Self {
        vocab.words
    }
}

/// Keeps lowercase types seen at least `min_count` times, most frequent
/// first, ties alphabetical.
pub fn build_vocab(docs: &[Document], min_count: usize) -> Vocab {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for doc in docs {
        for token in doc.tokens() {
            *counts.entry(token.text.to_lowercase()).or_default() += 1;
        }
    }
    let mut kept: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(w, c)| *c >= min_count && w != UNK_TOKEN && w != PAD_TOKEN)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Vocab::from_words(kept.into_iter().map(|(w, _)| w))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncoderIds {
    pub embedding: ParamId,
    pub w_ctx: ParamId,
    pub b_ctx: ParamId,
}

impl EncoderIds {
    pub fn register(store: &mut ParamStore, vocab_size: usize, d_emb: usize, d_enc: usize, seed: u64) -> Self {
        let mut rng = init_rng(seed, 0);
        let embedding = store.add("encoder.embedding", uniform_init(vocab_size, d_emb, d_emb, &mut rng));
        let w_ctx = store.add("encoder.w_ctx", uniform_init(d_enc, 3 * d_emb, 3 * d_emb, &mut rng));
        let b_ctx = store.add("encoder.b_ctx", uniform_init(d_enc, 1, 3 * d_emb, &mut rng));
        EncoderIds {
            embedding,
            w_ctx,
            b_ctx,
        }
    }
}

/// Borrowed view of the encoder parameters.
#[derive(Clone, Copy, Debug)]
pub struct EncoderParams<'a> {
    pub embedding: &'a Tensor2,
    pub w_ctx: &'a Tensor2,
    pub b_ctx: &'a Tensor2,
}

impl<'a> EncoderParams<'a> {
    pub fn from_store(store: &'a ParamStore, ids: &EncoderIds) -> Self {
        EncoderParams {
            embedding: store.value(ids.embedding),
            w_ctx: store.value(ids.w_ctx),
            b_ctx: store.value(ids.b_ctx),
        }
    }

    pub fn d_emb(&self) -> usize {
        self.embedding.cols()
    }
}

/// Forward values kept for the backward pass.
#[derive(Clone, Debug)]
pub struct EncoderForward {
    token_ids: Vec<usize>,
    /// `(prev, next)` context token per position, `None` at sentence edges.
    neighbours: Vec<(Option<usize>, Option<usize>)>,
    context: Tensor2,
    pre: Tensor2,
    output: Tensor2,
}

impl EncoderForward {
    pub fn new(doc: &Document, params: EncoderParams<'_>, vocab: &Vocab) -> Self {
        let n = doc.len();
        let d_emb = params.d_emb();
        let d_enc = params.w_ctx.rows();
        let token_ids: Vec<usize> = doc.tokens().iter().map(|t| vocab.id(&t.text)).collect();

        let mut neighbours = vec![(None, None); n];
        for sentence in doc.sentences() {
            for i in sentence.clone() {
                let prev = (i > sentence.start).then(|| token_ids[i - 1]);
                let next = (i + 1 < sentence.end).then(|| token_ids[i + 1]);
                neighbours[i] = (prev, next);
            }
        }

        let mut context = Tensor2::zeros(n, 3 * d_emb);
        for i in 0..n {
            let (prev, next) = neighbours[i];
            let row = context.row_mut(i);
            if let Some(p) = prev {
                row[..d_emb].copy_from_slice(params.embedding.row(p));
            }
            row[d_emb..2 * d_emb].copy_from_slice(params.embedding.row(token_ids[i]));
            if let Some(q) = next {
                row[2 * d_emb..].copy_from_slice(params.embedding.row(q));
            }
        }

        let mut pre = Tensor2::zeros(n, d_enc);
        let mut output = Tensor2::zeros(n, d_enc);
        for i in 0..n {
            let z = params.w_ctx.matvec(context.row(i));
            for (k, zk) in z.into_iter().enumerate() {
                let v = zk + params.b_ctx.data()[k];
                pre.set(i, k, v);
                output.set(i, k, gelu(v));
            }
        }

        EncoderForward {
            token_ids,
            neighbours,
            context,
            pre,
            output,
        }
    }

    /// Token vectors, one row per token.
    pub fn output(&self) -> &Tensor2 {
        &self.output
    }

    pub fn token_ids(&self) -> &[usize] {
        &self.token_ids
    }

    /// Backpropagates `d_output` (same shape as [`Self::output`]).
    pub fn backward(&self, params: EncoderParams<'_>, ids: &EncoderIds, d_output: &Tensor2, grads: &mut Gradients) {
        let d_emb = params.d_emb();
        let mut d_pre = d_output.clone();
        for (d, &z) in d_pre.data_mut().iter_mut().zip(self.pre.data()) {
            *d *= gelu_grad(z);
        }

        grads.get_mut(ids.w_ctx).add_assign(&d_pre.t_matmul(&self.context));
        let db = grads.get_mut(ids.b_ctx);
        for i in 0..d_pre.rows() {
            for (b, d) in db.data_mut().iter_mut().zip(d_pre.row(i)) {
                *b += d;
            }
        }

        let d_context = d_pre.matmul(params.w_ctx);
        let d_embedding = grads.get_mut(ids.embedding);
        for i in 0..self.token_ids.len() {
            let row = d_context.row(i);
            let (prev, next) = self.neighbours[i];
            let slots = [(prev, 0), (Some(self.token_ids[i]), 1), (next, 2)];
            for (token, slot) in slots {
                if let Some(t) = token {
                    let src = &row[slot * d_emb..(slot + 1) * d_emb];
                    for (g, s) in d_embedding.row_mut(t).iter_mut().zip(src) {
                        *g += s;
                    }
                }
            }
        }
    }
}

/// Token vectors `x_1..x_n` for `doc`.
pub fn encode(doc: &Document, params: EncoderParams<'_>, vocab: &Vocab) -> Tensor2 {
    EncoderForward::new(doc, params, vocab).output
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(sentences: &[&[&str]]) -> Document {
        Document::new(
            "d",
            sentences
                .iter()
                .map(|s| s.iter().map(|w| w.to_string()).collect())
                .collect(),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn vocab_min_count() {
        let corpus = [doc(&[&["a", "a", "b"]])];
        let v = build_vocab(&corpus, 2);
        assert_eq!(v.words(), &["<unk>", "<pad>", "a"]);
        let v = build_vocab(&corpus, 1);
        assert_eq!(v.words(), &["<unk>", "<pad>", "a", "b"]);
        assert_eq!(v.id("B"), 3);
        assert_eq!(v.id("zzz"), UNK);
    }

    #[test]
    fn vocab_tie_order() {
        // counts: d=2, b=2, c=1, a=1; sorted by count desc, then alphabetically
        let corpus = [doc(&[&["d", "c", "b", "a", "b", "D"]])];
        let v = build_vocab(&corpus, 0);
        let mut oracle: Vec<(&str, i32)> = vec![("a", 1), ("b", 2), ("c", 1), ("d", 2)];
        oracle.sort_by_key(|&(w, c)| (-c, w));
        let expected: Vec<&str> = oracle.into_iter().map(|(w, _)| w).collect();
        assert_eq!(&v.words()[2..], expected.as_slice());
        assert_eq!(&v.words()[2..], &["b", "d", "a", "c"]);
    }

    #[test]
    fn vocab_serde_roundtrip() {
        let v = build_vocab(&[doc(&[&["x", "y"]])], 1);
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocab = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.id("y"), v.id("y"));
        assert!(serde_json::from_str::<Vocab>(r#"["a","b"]"#).is_err());
    }

    fn params_store(vocab: &Vocab, d_emb: usize, d_enc: usize) -> (ParamStore, EncoderIds) {
        let mut store = ParamStore::new();
        let ids = EncoderIds::register(&mut store, vocab.len(), d_emb, d_enc, 11);
        (store, ids)
    }

    #[test]
    fn zero_params_give_zero_vectors() {
        let d = doc(&[&["a", "b", "c"]]);
        let vocab = build_vocab(std::slice::from_ref(&d), 1);
        let (mut store, ids) = params_store(&vocab, 4, 3);
        for p in store.params_mut() {
            p.value.fill(0.0);
        }
        let x = encode(&d, EncoderParams::from_store(&store, &ids), &vocab);
        assert!(x.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_computed_two_token_doc() {
        // vocab ids: <unk>=0, <pad>=1, "a"=2, "b"=3 (tie broken alphabetically)
        let d = doc(&[&["a", "b"]]);
        let vocab = build_vocab(std::slice::from_ref(&d), 1);
        let mut store = ParamStore::new();
        let mut emb = Tensor2::zeros(4, 1);
        emb.set(2, 0, 1.0);
        emb.set(3, 0, 2.0);
        let ids = EncoderIds {
            embedding: store.add("e", emb),
            // x = GeLU(w · [prev, self, next] + b) with d_emb = d_enc = 1
            w_ctx: store.add("w", Tensor2::from_rows(&[vec![0.5, 1.0, -1.0]])),
            b_ctx: store.add("b", Tensor2::from_vec(1, 1, vec![0.25])),
        };
        let x = encode(&d, EncoderParams::from_store(&store, &ids), &vocab);
        // token 0: 0.5*0 + 1*1 - 1*2 + 0.25 = -0.75
        // token 1: 0.5*1 + 1*2 - 1*0 + 0.25 = 2.75
        assert!((x.get(0, 0) - gelu(-0.75)).abs() < 1e-15);
        assert!((x.get(1, 0) - gelu(2.75)).abs() < 1e-15);
    }

    #[test]
    fn single_token_sentence_is_zero_padded() {
        let d = doc(&[&["a"], &["b"]]);
        let vocab = build_vocab(std::slice::from_ref(&d), 1);
        let (store, ids) = params_store(&vocab, 3, 2);
        let fwd = EncoderForward::new(&d, EncoderParams::from_store(&store, &ids), &vocab);
        let ctx = fwd.context.row(0);
        assert!(ctx[..3].iter().all(|&v| v == 0.0));
        assert!(ctx[6..].iter().all(|&v| v == 0.0));
        assert_eq!(&ctx[3..6], store.value(ids.embedding).row(vocab.id("a")));
    }

    #[test]
    fn locality() {
        let a = doc(&[&["w", "x", "y", "z", "q"], &["r", "s"]]);
        let b = doc(&[&["w", "x", "UNSEEN", "z", "q"], &["r", "s"]]);
        let vocab = build_vocab(std::slice::from_ref(&a), 1);
        let (store, ids) = params_store(&vocab, 4, 4);
        let p = EncoderParams::from_store(&store, &ids);
        let (xa, xb) = (encode(&a, p, &vocab), encode(&b, p, &vocab));
        for i in 0..a.len() {
            let changed = xa.row(i) != xb.row(i);
            assert_eq!(changed, (1..=3).contains(&i), "token {i}");
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let d = doc(&[&["a", "b", "c"], &["b", "d"]]);
        let vocab = build_vocab(std::slice::from_ref(&d), 1);
        let (mut store, ids) = params_store(&vocab, 3, 2);
        // loss = Σ_i Σ_k c_ik x_ik with fixed coefficients
        let coeff: Vec<f64> = (0..d.len() * 2).map(|k| (k as f64 * 0.37).sin()).collect();
        let err = crate::numerics::check_gradients(&mut store, 1e-6, |store| {
            let p = EncoderParams::from_store(store, &ids);
            let fwd = EncoderForward::new(&d, p, &vocab);
            let loss: f64 = fwd.output.data().iter().zip(&coeff).map(|(x, c)| x * c).sum();
            let d_out = Tensor2::from_vec(d.len(), 2, coeff.clone());
            let mut grads = store.zeros_like();
            fwd.backward(p, &ids, &d_out, &mut grads);
            store.accumulate(&grads);
            Ok(loss)
        })
        .unwrap();
        assert!(err < 1e-6, "max relative error {err}");
    }

    #[test]
    fn embedding_rows_of_present_tokens_get_gradient() {
        let d = doc(&[&["a", "b", "c"]]);
        let vocab = build_vocab(std::slice::from_ref(&d), 1);
        let (store, ids) = params_store(&vocab, 3, 2);
        let p = EncoderParams::from_store(&store, &ids);
        let fwd = EncoderForward::new(&d, p, &vocab);
        let mut d_out = Tensor2::zeros(3, 2);
        d_out.fill(1.0);
        let mut grads = store.zeros_like();
        fwd.backward(p, &ids, &d_out, &mut grads);
        let g = grads.get(ids.embedding);
        for w in ["a", "b", "c"] {
            assert!(g.row(vocab.id(w)).iter().any(|&v| v != 0.0), "{w}");
        }
        assert!(g.row(UNK).iter().all(|&v| v == 0.0));
        assert!(g.row(PAD).iter().all(|&v| v == 0.0));
    }
}
