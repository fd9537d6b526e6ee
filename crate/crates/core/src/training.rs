//! Pruning, candidate and gold-antecedent sets, the three loss families and
//! the optimization loop.
//!
//! Every loss is a negated log-marginal over a candidate list that always
//! ends with the null antecedent ε (score 0):
//!
//! ```text
//! L = logsumexp(all scores) - logsumexp(gold scores)
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::categorizer::{Category, SpanProfile};
use crate::corpus::{enumerate_spans, Document, Span};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::{log_sum_exp, Gradients};
use crate::scorers::{route, DocForward, ScoreGrads};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutingMode {
    /// Shared scorer plus the expert chosen by the linguistic rules.
    #[default]
    Linguistic,
    /// Shared scorer plus an expert chosen from the last characters.
    Random,
    /// Shared scorer alone, trained on its own loss.
    SharedOnly,
    /// Experts alone, without the shared scorer or its loss.
    ExpertsOnly,
}

impl RoutingMode {
    pub const ALL: [RoutingMode; 4] = [
        RoutingMode::Linguistic,
        RoutingMode::Random,
        RoutingMode::SharedOnly,
        RoutingMode::ExpertsOnly,
    ];

    pub fn uses_shared(self) -> bool {
        self != RoutingMode::ExpertsOnly
    }

    pub fn uses_experts(self) -> bool {
        self != RoutingMode::SharedOnly
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RoutingMode::Linguistic => "linguistic",
            RoutingMode::Random => "random",
            RoutingMode::SharedOnly => "shared_only",
            RoutingMode::ExpertsOnly => "experts_only",
        }
    }
}

impl fmt::Display for RoutingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RoutingMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown routing mode `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Coreference loss plus every expert loss plus the shared loss.
    #[default]
    Full,
    /// Coreference loss only.
    CorefOnly,
}

impl LossMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LossMode::Full => "full",
            LossMode::CorefOnly => "coref_only",
        }
    }
}

impl fmt::Display for LossMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "full" => Ok(LossMode::Full),
            "coref_only" => Ok(LossMode::CorefOnly),
            other => Err(format!("unknown loss mode `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub top_lambda: f64,
    pub max_span_width: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    pub token_budget_train: usize,
    pub token_budget_eval: usize,
    pub seed: u64,
    pub d_emb: usize,
    pub d_enc: usize,
    pub d_hidden: usize,
    pub min_count: usize,
    pub routing_mode: RoutingMode,
    pub loss_mode: LossMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            top_lambda: 0.4,
            max_span_width: 10,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            epochs: 100,
            token_budget_train: 5000,
            token_budget_eval: 10000,
            seed: 42,
            d_emb: 32,
            d_enc: 32,
            d_hidden: 64,
            min_count: 1,
            routing_mode: RoutingMode::Linguistic,
            loss_mode: LossMode::Full,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.top_lambda > 0.0 && self.top_lambda <= 1.0) {
            return fail(format!("top_lambda must be in (0, 1], got {}", self.top_lambda));
        }
        for (name, value) in [
            ("max_span_width", self.max_span_width),
            ("token_budget_train", self.token_budget_train),
            ("token_budget_eval", self.token_budget_eval),
            ("d_emb", self.d_emb),
            ("d_enc", self.d_enc),
            ("d_hidden", self.d_hidden),
        ] {
            if value == 0 {
                return fail(format!("{name} must be positive"));
            }
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be finite and non-negative, got {}", self.learning_rate));
        }
        for (name, beta) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return fail(format!("{name} must be in [0, 1), got {beta}"));
            }
        }
        if !(self.adam_eps > 0.0) {
            return fail(format!("adam_eps must be positive, got {}", self.adam_eps));
        }
        Ok(())
    }

    /// Parses a config file: a JSON object, or `key = value` lines with `#`
    /// comments. Unknown keys are rejected; missing keys take defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let value = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            serde_json::Value::Object(parse_key_values(text)?)
        };
        let config: TrainConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Applies `key=value` overrides on top of `self`.
    pub fn with_overrides(&self, overrides: serde_json::Map<String, serde_json::Value>) -> Result<Self> {
        let mut value = serde_json::to_value(self)?;
        let map = value.as_object_mut().expect("config serializes to an object");
        for (k, v) in overrides {
            map.insert(k.replace('-', "_"), v);
        }
        let config: TrainConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }
}

fn parse_key_values(text: &str) -> Result<serde_json::Map<String, serde_json::Value>> {
    let mut map = serde_json::Map::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, raw) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        let raw = raw.trim();
        let value = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        map.insert(key.trim().replace('-', "_"), value);
    }
    Ok(map)
}

/// Keeps the `⌈λ·n_tokens⌉` best-scoring spans (at most all of them), ties
/// broken by position, returned in document order.
pub fn prune_by_scores(spans: &[Span], scores: &[f64], n_tokens: usize, top_lambda: f64) -> Vec<Span> {
    assert_eq!(spans.len(), scores.len(), "one score per span");
    // The small slack keeps products like 0.1 * 30 from rounding up a whole span.
    let k = ((top_lambda * n_tokens as f64) - 1e-9).ceil().max(0.0) as usize;
    let k = k.min(spans.len());
    let mut order: Vec<usize> = (0..spans.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| spans[a].cmp(&spans[b])));
    let mut kept: Vec<Span> = order[..k].iter().map(|&i| spans[i]).collect();
    kept.sort();
    kept
}

/// Top-λ spans of `doc` by mention score.
pub fn prune_mentions(doc: &Document, fwd: &DocForward, model: &Model) -> Vec<Span> {
    let spans = enumerate_spans(doc, model.config.max_span_width);
    let scores: Vec<f64> = spans.iter().map(|s| fwd.mention_score(model, *s)).collect();
    prune_by_scores(&spans, &scores, doc.len(), model.config.top_lambda)
}

/// Candidate antecedents of one query; ε is always an implicit extra member.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CandidateSet {
    pub query: Span,
    pub candidates: Vec<Span>,
}

impl CandidateSet {
    pub fn includes_null(&self) -> bool {
        true
    }

    /// Number of entries including ε.
    pub fn len_with_null(&self) -> usize {
        self.candidates.len() + 1
    }
}

/// One set per pruned span; `pruned` must be in document order.
pub fn candidate_sets(pruned: &[Span]) -> Vec<CandidateSet> {
    pruned
        .iter()
        .enumerate()
        .map(|(i, q)| CandidateSet {
            query: *q,
            candidates: pruned[..i].iter().copied().filter(|c| c.precedes(q)).collect(),
        })
        .collect()
}

/// Candidates routed to category `t` under `mode`; ε stays.
pub fn restricted_candidates_with(cs: &CandidateSet, t: Category, doc: &Document, mode: RoutingMode) -> CandidateSet {
    let q = SpanProfile::new(cs.query, doc);
    CandidateSet {
        query: cs.query,
        candidates: cs
            .candidates
            .iter()
            .copied()
            .filter(|c| route(mode, &SpanProfile::new(*c, doc), &q) == t)
            .collect(),
    }
}

/// Candidates whose linguistic category is `t`; ε stays.
pub fn restricted_candidates(cs: &CandidateSet, t: Category, doc: &Document) -> CandidateSet {
    restricted_candidates_with(cs, t, doc, RoutingMode::Linguistic)
}

/// True antecedents of a query among its candidates, or ε alone.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GoldAntecedents {
    pub query: Span,
    /// Empty means the gold set is `{ε}`.
    pub gold: Vec<Span>,
}

impl GoldAntecedents {
    pub fn is_null(&self) -> bool {
        self.gold.is_empty()
    }

    /// Mask aligned with `cs.candidates` followed by ε.
    pub fn mask(&self, cs: &CandidateSet) -> Vec<bool> {
        let mut mask: Vec<bool> = cs.candidates.iter().map(|c| self.gold.contains(c)).collect();
        mask.push(self.is_null());
        mask
    }

    /// `gold ∩ C_t(q)`, falling back to `{ε}`.
    pub fn restrict(&self, restricted: &CandidateSet) -> GoldAntecedents {
        GoldAntecedents {
            query: self.query,
            gold: self
                .gold
                .iter()
                .copied()
                .filter(|g| restricted.candidates.contains(g))
                .collect(),
        }
    }
}

pub fn gold_antecedents(cs: &CandidateSet, clusters: &BTreeMap<Span, usize>) -> GoldAntecedents {
    let gold = match clusters.get(&cs.query) {
        Some(id) => cs
            .candidates
            .iter()
            .copied()
            .filter(|c| clusters.get(c) == Some(id))
            .collect(),
        None => Vec::new(),
    };
    GoldAntecedents { query: cs.query, gold }
}

/// Loss value and its gradient with respect to each score.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalLoss {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// `logsumexp(scores) - logsumexp(scores[gold])`; the gradient is the full
/// softmax minus the softmax restricted to gold entries.
pub fn marginal_nll(scores: &[f64], gold: &[bool]) -> Result<MarginalLoss> {
    assert_eq!(scores.len(), gold.len(), "one gold flag per score");
    let gold_scores = || scores.iter().zip(gold).filter(|(_, &g)| g).map(|(s, _)| *s);
    if gold_scores().next().is_none() {
        return Err(Error::NoValidCandidate);
    }
    let all = log_sum_exp(scores.iter().copied());
    let gold_lse = log_sum_exp(gold_scores().collect::<Vec<_>>());
    if !all.is_finite() || !gold_lse.is_finite() {
        return Err(Error::NoValidCandidate);
    }
    let grad = scores
        .iter()
        .zip(gold)
        .map(|(&s, &g)| {
            let p = (s - all).exp();
            if g {
                p - (s - gold_lse).exp()
            } else {
                p
            }
        })
        .collect();
    Ok(MarginalLoss {
        loss: all - gold_lse,
        grad,
    })
}

/// `scores` holds `F(c, q)` for `cs.candidates` followed by `F(ε, q) = 0`.
pub fn coref_loss(cs: &CandidateSet, gold: &GoldAntecedents, scores: &[f64]) -> Result<MarginalLoss> {
    assert_eq!(scores.len(), cs.len_with_null());
    marginal_nll(scores, &gold.mask(cs))
}

/// `scores` holds `F_t(c, q)` over the restricted set followed by 0 for ε;
/// `gold` is restricted to the same set internally.
pub fn expert_loss(restricted: &CandidateSet, gold: &GoldAntecedents, scores: &[f64]) -> Result<MarginalLoss> {
    assert_eq!(scores.len(), restricted.len_with_null());
    marginal_nll(scores, &gold.restrict(restricted).mask(restricted))
}

/// `scores` holds `F_s(c, q)` over the full set followed by 0 for ε.
pub fn shared_loss(cs: &CandidateSet, gold: &GoldAntecedents, scores: &[f64]) -> Result<MarginalLoss> {
    coref_loss(cs, gold, scores)
}

/// Per-family loss totals over one document.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub coref: f64,
    pub shared: f64,
    pub experts: [f64; 6],
    pub total: f64,
}

impl LossBreakdown {
    fn finish(mut self) -> Self {
        self.total = self.coref + self.experts.iter().sum::<f64>() + self.shared;
        self
    }
}

/// Loss of one document and its gradient. `pruned` overrides pruning, which
/// keeps the span set fixed under parameter perturbation.
pub fn doc_loss(model: &Model, doc: &Document, pruned: Option<&[Span]>) -> Result<(LossBreakdown, Gradients)> {
    doc_loss_with(model, doc, pruned, marginal_nll)
}

/// [`doc_loss`] with a custom per-term loss. `head` receives each score
/// vector (ε last) and its gold mask, always in the same order for a fixed
/// span set.
pub fn doc_loss_with<H>(
    model: &Model,
    doc: &Document,
    pruned: Option<&[Span]>,
    mut head: H,
) -> Result<(LossBreakdown, Gradients)>
where
    H: FnMut(&[f64], &[bool]) -> Result<MarginalLoss>,
{
    let fwd = DocForward::new(model, doc);
    let pruned = match pruned {
        Some(spans) => spans.to_vec(),
        None => prune_mentions(doc, &fwd, model),
    };
    let mode = model.config.routing_mode;
    let full = model.config.loss_mode == LossMode::Full;
    let clusters = doc.gold_cluster_index();
    let profiles: Vec<SpanProfile> = pruned.iter().map(|s| SpanProfile::new(*s, doc)).collect();
    let mention: Vec<f64> = pruned.iter().map(|s| fwd.mention_score(model, *s)).collect();

    let mut sg = ScoreGrads::new(doc.len());
    let mut out = LossBreakdown::default();

    for (qi, cs) in candidate_sets(&pruned).into_iter().enumerate() {
        let q = cs.query;
        let gold = gold_antecedents(&cs, &clusters);
        let n = cs.candidates.len();
        let mut cats = Vec::with_capacity(n);
        let mut shared = Vec::with_capacity(n);
        let mut expert = Vec::with_capacity(n);
        for (ci, c) in cs.candidates.iter().enumerate() {
            let t = route(mode, &profiles[ci], &profiles[qi]);
            cats.push(t);
            shared.push(fwd.shared_score(*c, q));
            expert.push(fwd.expert_score(t, *c, q));
        }
        let f_m = |ci: usize| mention[ci] + mention[qi];

        if mode == RoutingMode::SharedOnly {
            // The combined score is F_s itself and only L_s is optimized.
            let mut scores: Vec<f64> = (0..n).map(|ci| f_m(ci) + shared[ci]).collect();
            scores.push(0.0);
            let l = head(&scores, &gold.mask(&cs))?;
            out.shared += l.loss;
            for (ci, c) in cs.candidates.iter().enumerate() {
                push_pair_grad(&mut sg, *c, q, l.grad[ci], true, None);
            }
            continue;
        }

        let mut scores: Vec<f64> = (0..n).map(|ci| f_m(ci) + shared[ci] + expert[ci]).collect();
        scores.push(0.0);
        let l = head(&scores, &gold.mask(&cs))?;
        out.coref += l.loss;
        for (ci, c) in cs.candidates.iter().enumerate() {
            push_pair_grad(&mut sg, *c, q, l.grad[ci], mode.uses_shared(), Some(cats[ci]));
        }

        if !full {
            continue;
        }
        for t in Category::ALL {
            let members: Vec<usize> = (0..n).filter(|&ci| cats[ci] == t).collect();
            if members.is_empty() {
                // {ε} against {ε}: zero loss, zero gradient.
                continue;
            }
            let restricted = CandidateSet {
                query: q,
                candidates: members.iter().map(|&ci| cs.candidates[ci]).collect(),
            };
            let mut scores: Vec<f64> = members.iter().map(|&ci| f_m(ci) + expert[ci]).collect();
            scores.push(0.0);
            let l = head(&scores, &gold.restrict(&restricted).mask(&restricted))?;
            out.experts[t.index()] += l.loss;
            for (k, &ci) in members.iter().enumerate() {
                push_pair_grad(&mut sg, cs.candidates[ci], q, l.grad[k], false, Some(t));
            }
        }
        if mode.uses_shared() {
            let mut scores: Vec<f64> = (0..n).map(|ci| f_m(ci) + shared[ci]).collect();
            scores.push(0.0);
            let l = head(&scores, &gold.mask(&cs))?;
            out.shared += l.loss;
            for (ci, c) in cs.candidates.iter().enumerate() {
                push_pair_grad(&mut sg, *c, q, l.grad[ci], true, None);
            }
        }
    }

    let out = out.finish();
    if !out.total.is_finite() {
        return Err(Error::NonFiniteLoss {
            value: out.total,
            context: format!("document `{}`", doc.doc_key()),
        });
    }
    let mut grads = model.params.zeros_like();
    fwd.backward(model, &sg, &mut grads);
    Ok((out, grads))
}

fn push_pair_grad(sg: &mut ScoreGrads, c: Span, q: Span, g: f64, shared: bool, expert: Option<Category>) {
    sg.mention(c, g);
    sg.mention(q, g);
    if shared {
        sg.shared(c, q, g);
    }
    if let Some(t) = expert {
        sg.expert(t, c, q, g);
    }
}

/// Greedy batches in document order: a batch grows while its token count
/// stays within `budget`; an oversized document forms its own batch.
pub fn make_batches(doc_lens: &[usize], budget: usize) -> Vec<Range<usize>> {
    let mut batches = Vec::new();
    let (mut start, mut tokens) = (0, 0);
    for (i, &len) in doc_lens.iter().enumerate() {
        if i > start && tokens + len > budget {
            batches.push(start..i);
            start = i;
            tokens = 0;
        }
        tokens += len;
    }
    if start < doc_lens.len() {
        batches.push(start..doc_lens.len());
    }
    batches
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(model: &Model) -> Self {
        Adam {
            beta1: model.config.adam_beta1,
            beta2: model.config.adam_beta2,
            eps: model.config.adam_eps,
            step: 0,
            m: model.params.zeros_like(),
            v: model.params.zeros_like(),
        }
    }

    pub fn step(&mut self, model: &mut Model, grads: &Gradients) {
        let lr = model.config.learning_rate;
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let slots = model.params.params_mut().iter_mut().zip(grads.iter());
        for ((param, g), (m, v)) in slots.zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let (g, m, v) = (g.data(), m.data_mut(), v.data_mut());
            for (k, w) in param.value.data_mut().iter_mut().enumerate() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean per-document loss over the epoch.
    pub loss: f64,
    pub wall_time_s: f64,
}

/// Per-document losses and gradients, merged in document order so the result
/// does not depend on the worker count.
fn batch_loss(model: &Model, docs: &[Document], threads: usize) -> Result<(Vec<LossBreakdown>, Gradients)> {
    let results: Vec<Result<(LossBreakdown, Gradients)>> = if threads > 1 {
        docs.par_iter().map(|d| doc_loss(model, d, None)).collect()
    } else {
        docs.iter().map(|d| doc_loss(model, d, None)).collect()
    };
    let mut total = model.params.zeros_like();
    let mut losses = Vec::with_capacity(docs.len());
    for r in results {
        let (loss, grads) = r?;
        total.add_assign(&grads);
        losses.push(loss);
    }
    Ok((losses, total))
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads <= 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Trains `model` in place for `model.config.epochs` epochs. `threads` caps
/// the number of documents processed concurrently (0 or 1 is serial).
pub fn train_model(
    model: &mut Model,
    docs: &[Document],
    threads: usize,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<Vec<EpochLog>> {
    model.config.validate()?;
    if docs.is_empty() {
        return Err(Error::Config("no training documents".into()));
    }
    let lens: Vec<usize> = docs.iter().map(Document::len).collect();
    let batches = make_batches(&lens, model.config.token_budget_train);
    let mut adam = Adam::new(model);
    let mut log = Vec::with_capacity(model.config.epochs);
    let started = Instant::now();

    for epoch in 1..=model.config.epochs {
        let mut sum = 0.0;
        for batch in &batches {
            let current: &Model = model;
            let (losses, grads) = with_pool(threads, || batch_loss(current, &docs[batch.clone()], threads))??;
            for (loss, doc) in losses.iter().zip(&docs[batch.clone()]) {
                if !loss.total.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        value: loss.total,
                        context: format!("epoch {epoch}, document `{}`", doc.doc_key()),
                    });
                }
                sum += loss.total;
            }
            adam.step(model, &grads);
        }
        let entry = EpochLog {
            epoch,
            loss: sum / docs.len() as f64,
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        if !entry.loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                value: entry.loss,
                context: format!("epoch {epoch}"),
            });
        }
        on_epoch(&entry);
        log.push(entry);
    }
    Ok(log)
}

/// Builds a vocabulary from `docs`, initializes a model and trains it.
pub fn train(docs: &[Document], config: TrainConfig, threads: usize) -> Result<(Model, Vec<EpochLog>)> {
    config.validate()?;
    let mut model = Model::new(config, docs);
    let log = train_model(&mut model, docs, threads, |_| {})?;
    Ok((model, log))
}

/// Mean per-document loss without updating anything.
pub fn corpus_loss(model: &Model, docs: &[Document]) -> Result<f64> {
    let mut sum = 0.0;
    for doc in docs {
        sum += doc_loss(model, doc, None)?.0.total;
    }
    Ok(sum / docs.len().max(1) as f64)
}
