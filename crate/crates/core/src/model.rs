//! The full parameter set: encoder, mention head, shared head and six experts.

use crate::categorizer::Category;
use crate::corpus::Document;
use crate::encoder::{build_vocab, encode, EncoderIds, EncoderParams, Vocab};
use crate::error::{Error, Result};
use crate::numerics::{ParamStore, Tensor2};
use crate::scorers::{AntecedentIds, MentionIds};
use crate::training::TrainConfig;

/// Where each head lives in the [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub encoder: EncoderIds,
    pub mention: MentionIds,
    pub shared: AntecedentIds,
    /// Indexed by [`Category::index`].
    pub experts: [AntecedentIds; 6],
}

impl Layout {
    /// Registers every tensor with its seeded initialization. Each head draws
    /// from its own RNG stream: 0 encoder, 1 mention, 2 shared, 3 + t expert t.
    pub fn register(store: &mut ParamStore, vocab_size: usize, config: &TrainConfig) -> Self {
        let (d_emb, d_enc, d_hidden, seed) = (config.d_emb, config.d_enc, config.d_hidden, config.seed);
        let encoder = EncoderIds::register(store, vocab_size, d_emb, d_enc, seed);
        let mention = MentionIds::register(store, d_enc, d_hidden, seed);
        let shared = AntecedentIds::register(store, "shared", d_enc, d_hidden, seed, 2);
        let experts = Category::ALL.map(|t| {
            AntecedentIds::register(
                store,
                &format!("expert.{}", t.slug()),
                d_enc,
                d_hidden,
                seed,
                3 + t.index() as u64,
            )
        });
        Layout {
            encoder,
            mention,
            shared,
            experts,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Model {
    pub config: TrainConfig,
    pub vocab: Vocab,
    pub params: ParamStore,
    pub layout: Layout,
}

impl Model {
    /// Freshly initialized model with a vocabulary built from `docs`.
    pub fn new(config: TrainConfig, docs: &[Document]) -> Self {
        let vocab = build_vocab(docs, config.min_count);
        Self::with_vocab(config, vocab)
    }

    pub fn with_vocab(config: TrainConfig, vocab: Vocab) -> Self {
        let mut params = ParamStore::new();
        let layout = Layout::register(&mut params, vocab.len(), &config);
        Model {
            config,
            vocab,
            params,
            layout,
        }
    }

    /// Rebuilds a model from stored tensors. Every expected tensor must be
    /// present with the shape implied by `config` and `vocab`.
    pub fn from_tensors(config: TrainConfig, vocab: Vocab, tensors: Vec<(String, Tensor2)>) -> Result<Self> {
        config.validate()?;
        let mut model = Self::with_vocab(config, vocab);
        if tensors.len() != model.params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors, found {}",
                model.params.len(),
                tensors.len()
            )));
        }
        for (name, value) in tensors {
            let id = model
                .params
                .id(&name)
                .ok_or_else(|| Error::Checkpoint(format!("unexpected tensor `{name}`")))?;
            let slot = model.params.value_mut(id);
            if slot.shape() != value.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor `{name}` has shape {:?}, expected {:?}",
                    value.shape(),
                    slot.shape()
                )));
            }
            if !value.is_finite() {
                return Err(Error::Checkpoint(format!("tensor `{name}` holds non-finite values")));
            }
            *slot = value;
        }
        Ok(model)
    }

    pub fn encoder_params(&self) -> EncoderParams<'_> {
        EncoderParams::from_store(&self.params, &self.layout.encoder)
    }

    pub fn encode(&self, doc: &Document) -> Tensor2 {
        encode(doc, self.encoder_params(), &self.vocab)
    }
}
