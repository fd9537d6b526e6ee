//! Mention scorer, shared antecedent scorer and the six category experts.
//!
//! ```text
//! f_m(q)   = m_s(x_i)·v_s + m_e(x_j)·v_e + m_s(x_i)ᵀ B_m m_e(x_j)
//! f_a(c,q) = a_s(x_i)ᵀB_ss a_s(x_k) + a_e(x_j)ᵀB_es a_s(x_k)
//!          + a_s(x_i)ᵀB_se a_e(x_l) + a_e(x_j)ᵀB_ee a_e(x_l)
//! F(c,q)   = f_m(c) + f_m(q) + f_a(c,q) + f_a^{T(c,q)}(c,q),   F(ε,q) = 0
//! ```
//!
//! with `c = (i, j)`, `q = (k, l)` and every projection `GeLU(W x)`.
//!
//! Two evaluation paths exist. The free functions ([`mention_score`],
//! [`antecedent_score`], [`pair_score`]) score one pair at a time straight
//! from token vectors. [`DocForward`] caches projections for a whole
//! document, evaluates pairs in bulk and owns the backward pass. Both use the
//! same floating-point operation order, so they agree bit for bit.

use serde::Serialize;

use crate::categorizer::{Category, SpanProfile};
use crate::corpus::{Document, MentionPair, Span};
use crate::encoder::EncoderForward;
use crate::model::Model;
use crate::numerics::{axpy, bilinear, dot, gelu, gelu_grad, init_rng, uniform_init, Gradients, ParamId, ParamStore, Tensor2};
use crate::training::RoutingMode;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MentionIds {
    pub w_start: ParamId,
    pub w_end: ParamId,
    pub v_start: ParamId,
    pub v_end: ParamId,
    pub bilinear: ParamId,
}

impl MentionIds {
    pub fn register(store: &mut ParamStore, d_enc: usize, d_hidden: usize, seed: u64) -> Self {
        let mut rng = init_rng(seed, 1);
        MentionIds {
            w_start: store.add("mention.w_start", uniform_init(d_hidden, d_enc, d_enc, &mut rng)),
            w_end: store.add("mention.w_end", uniform_init(d_hidden, d_enc, d_enc, &mut rng)),
            v_start: store.add("mention.v_start", uniform_init(d_hidden, 1, d_hidden, &mut rng)),
            v_end: store.add("mention.v_end", uniform_init(d_hidden, 1, d_hidden, &mut rng)),
            bilinear: store.add("mention.b", uniform_init(d_hidden, d_hidden, d_hidden, &mut rng)),
        }
    }
}

/// The six matrices of one antecedent scorer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AntecedentIds {
    pub w_start: ParamId,
    pub w_end: ParamId,
    pub b_ss: ParamId,
    pub b_es: ParamId,
    pub b_se: ParamId,
    pub b_ee: ParamId,
}

impl AntecedentIds {
    pub fn register(store: &mut ParamStore, prefix: &str, d_enc: usize, d_hidden: usize, seed: u64, stream: u64) -> Self {
        let mut rng = init_rng(seed, stream);
        let mut add = |name: &str, rows, cols, fan_in| {
            store.add(format!("{prefix}.{name}"), uniform_init(rows, cols, fan_in, &mut rng))
        };
        AntecedentIds {
            w_start: add("w_start", d_hidden, d_enc, d_enc),
            w_end: add("w_end", d_hidden, d_enc, d_enc),
            b_ss: add("b_ss", d_hidden, d_hidden, d_hidden),
            b_es: add("b_es", d_hidden, d_hidden, d_hidden),
            b_se: add("b_se", d_hidden, d_hidden, d_hidden),
            b_ee: add("b_ee", d_hidden, d_hidden, d_hidden),
        }
    }

    pub fn all(&self) -> [ParamId; 6] {
        [self.w_start, self.w_end, self.b_ss, self.b_es, self.b_se, self.b_ee]
    }
}

#[derive(Clone, Copy, Debug)]
pub struct MentionHead<'a> {
    pub w_start: &'a Tensor2,
    pub w_end: &'a Tensor2,
    pub v_start: &'a [f64],
    pub v_end: &'a [f64],
    pub bilinear: &'a Tensor2,
}

impl<'a> MentionHead<'a> {
    pub fn from_store(store: &'a ParamStore, ids: &MentionIds) -> Self {
        MentionHead {
            w_start: store.value(ids.w_start),
            w_end: store.value(ids.w_end),
            v_start: store.value(ids.v_start).data(),
            v_end: store.value(ids.v_end).data(),
            bilinear: store.value(ids.bilinear),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AntecedentHead<'a> {
    pub w_start: &'a Tensor2,
    pub w_end: &'a Tensor2,
    pub b_ss: &'a Tensor2,
    pub b_es: &'a Tensor2,
    pub b_se: &'a Tensor2,
    pub b_ee: &'a Tensor2,
}

impl<'a> AntecedentHead<'a> {
    pub fn from_store(store: &'a ParamStore, ids: &AntecedentIds) -> Self {
        AntecedentHead {
            w_start: store.value(ids.w_start),
            w_end: store.value(ids.w_end),
            b_ss: store.value(ids.b_ss),
            b_es: store.value(ids.b_es),
            b_se: store.value(ids.b_se),
            b_ee: store.value(ids.b_ee),
        }
    }
}

/// `GeLU(W x)`.
pub fn project(w: &Tensor2, x: &[f64]) -> Vec<f64> {
    w.matvec(x).into_iter().map(gelu).collect()
}

pub fn mention_score(span: Span, enc: &Tensor2, head: &MentionHead<'_>) -> f64 {
    let start = project(head.w_start, enc.row(span.start));
    let end = project(head.w_end, enc.row(span.end));
    dot(&start, head.v_start) + dot(&end, head.v_end) + bilinear(&start, head.bilinear, &end)
}

pub fn antecedent_score(pair: MentionPair, enc: &Tensor2, head: &AntecedentHead<'_>) -> f64 {
    let (c, q) = (pair.candidate(), pair.query());
    let c_start = project(head.w_start, enc.row(c.start));
    let c_end = project(head.w_end, enc.row(c.end));
    let q_start = project(head.w_start, enc.row(q.start));
    let q_end = project(head.w_end, enc.row(q.end));
    bilinear(&c_start, head.b_ss, &q_start)
        + bilinear(&c_end, head.b_es, &q_start)
        + bilinear(&c_start, head.b_se, &q_end)
        + bilinear(&c_end, head.b_ee, &q_end)
}

/// The four summands of `F(c, q)` and their total.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairScoreBreakdown {
    pub f_m_c: f64,
    pub f_m_q: f64,
    pub f_a_shared: f64,
    pub f_a_expert: f64,
    /// `None` for the null antecedent.
    pub category: Option<Category>,
    pub total: f64,
}

impl PairScoreBreakdown {
    pub fn new(f_m_c: f64, f_m_q: f64, f_a_shared: f64, f_a_expert: f64, category: Category) -> Self {
        PairScoreBreakdown {
            f_m_c,
            f_m_q,
            f_a_shared,
            f_a_expert,
            category: Some(category),
            total: f_m_c + f_m_q + f_a_shared + f_a_expert,
        }
    }

    /// `F(ε, q) = 0`.
    pub fn null() -> Self {
        PairScoreBreakdown {
            f_m_c: 0.0,
            f_m_q: 0.0,
            f_a_shared: 0.0,
            f_a_expert: 0.0,
            category: None,
            total: 0.0,
        }
    }

    /// `F_s(c, q)`: mention scores plus the shared scorer only.
    pub fn shared_total(&self) -> f64 {
        if self.category.is_none() {
            return 0.0;
        }
        self.f_m_c + self.f_m_q + self.f_a_shared
    }

    /// `F_t(c, q)` for the routed category `t`.
    pub fn expert_total(&self) -> f64 {
        if self.category.is_none() {
            return 0.0;
        }
        self.f_m_c + self.f_m_q + self.f_a_expert
    }
}

/// Category of a pair under the model's routing mode.
pub fn route(mode: RoutingMode, candidate: &SpanProfile, query: &SpanProfile) -> Category {
    match mode {
        RoutingMode::Random => crate::categorizer::categorize_random_profiles(candidate, query),
        _ => crate::categorizer::categorize_profiles(candidate, query),
    }
}

/// Reference single-pair evaluation of `F(c, q)` from token vectors.
pub fn pair_score(pair: MentionPair, doc: &Document, enc: &Tensor2, model: &Model) -> PairScoreBreakdown {
    let mode = model.config.routing_mode;
    let category = route(
        mode,
        &SpanProfile::new(pair.candidate(), doc),
        &SpanProfile::new(pair.query(), doc),
    );
    let layout = &model.layout;
    let mention = MentionHead::from_store(&model.params, &layout.mention);
    let f_m_c = mention_score(pair.candidate(), enc, &mention);
    let f_m_q = mention_score(pair.query(), enc, &mention);
    let shared = if mode.uses_shared() {
        antecedent_score(pair, enc, &AntecedentHead::from_store(&model.params, &layout.shared))
    } else {
        0.0
    };
    let expert = if mode.uses_experts() {
        let ids = &layout.experts[category.index()];
        antecedent_score(pair, enc, &AntecedentHead::from_store(&model.params, ids))
    } else {
        0.0
    };
    PairScoreBreakdown::new(f_m_c, f_m_q, shared, expert, category)
}

/// `GeLU(W x_t)` for every token, with pre-activations kept for backward.
#[derive(Clone, Debug)]
struct Projection {
    pre: Tensor2,
    out: Tensor2,
}

impl Projection {
    fn new(w: &Tensor2, x: &Tensor2) -> Self {
        let mut pre = Tensor2::zeros(x.rows(), w.rows());
        let mut out = Tensor2::zeros(x.rows(), w.rows());
        for t in 0..x.rows() {
            let z = w.matvec(x.row(t));
            for (k, zk) in z.into_iter().enumerate() {
                pre.set(t, k, zk);
                out.set(t, k, gelu(zk));
            }
        }
        Projection { pre, out }
    }

    fn backward(&self, w: &Tensor2, x: &Tensor2, mut d_out: Tensor2, d_w: &mut Tensor2, d_x: &mut Tensor2) {
        for (d, &z) in d_out.data_mut().iter_mut().zip(self.pre.data()) {
            *d *= gelu_grad(z);
        }
        d_w.add_assign(&d_out.t_matmul(x));
        d_x.add_assign(&d_out.matmul(w));
    }
}

/// Sparse gradient of `S = U B Vᵀ` at token cells `(u_row, v_row)`.
#[derive(Clone, Debug, Default)]
struct BilinearGrad(Vec<(u32, u32, f64)>);

impl BilinearGrad {
    fn push(&mut self, u_row: usize, v_row: usize, g: f64) {
        self.0.push((u_row as u32, v_row as u32, g));
    }

    fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Accumulates gradients of `Σ g · (U B)[i] · V[k]` into `d_u`, `d_v`, `d_b`.
    fn backward(&self, u: &Tensor2, v: &Tensor2, ub: &Tensor2, b: &Tensor2, d_u: &mut Tensor2, d_v: &mut Tensor2, d_b: &mut Tensor2) {
        if self.is_empty() {
            return;
        }
        let mut gv = Tensor2::zeros(u.rows(), v.cols());
        for &(i, k, g) in &self.0 {
            let (i, k) = (i as usize, k as usize);
            axpy(g, v.row(k), gv.row_mut(i));
            axpy(g, ub.row(i), d_v.row_mut(k));
        }
        d_b.add_assign(&u.t_matmul(&gv));
        d_u.add_assign(&gv.matmul_t(b));
    }
}

#[derive(Clone, Debug)]
struct MentionForward {
    start: Projection,
    end: Projection,
    /// `m_s(x_t)ᵀ B_m` per token.
    start_b: Tensor2,
}

#[derive(Clone, Debug)]
struct AntecedentForward {
    start: Projection,
    end: Projection,
    ss: Tensor2,
    es: Tensor2,
    se: Tensor2,
    ee: Tensor2,
}

impl AntecedentForward {
    fn new(head: &AntecedentHead<'_>, x: &Tensor2) -> Self {
        let start = Projection::new(head.w_start, x);
        let end = Projection::new(head.w_end, x);
        AntecedentForward {
            ss: start.out.matmul(head.b_ss),
            es: end.out.matmul(head.b_es),
            se: start.out.matmul(head.b_se),
            ee: end.out.matmul(head.b_ee),
            start,
            end,
        }
    }

    fn score(&self, c: Span, q: Span) -> f64 {
        let (qs, qe) = (self.start.out.row(q.start), self.end.out.row(q.end));
        dot(self.ss.row(c.start), qs)
            + dot(self.es.row(c.end), qs)
            + dot(self.se.row(c.start), qe)
            + dot(self.ee.row(c.end), qe)
    }
}

#[derive(Clone, Debug, Default)]
struct AntecedentGrad {
    ss: BilinearGrad,
    es: BilinearGrad,
    se: BilinearGrad,
    ee: BilinearGrad,
}

impl AntecedentGrad {
    fn push(&mut self, c: Span, q: Span, g: f64) {
        self.ss.push(c.start, q.start, g);
        self.es.push(c.end, q.start, g);
        self.se.push(c.start, q.end, g);
        self.ee.push(c.end, q.end, g);
    }

    fn is_empty(&self) -> bool {
        self.ss.is_empty()
    }
}

/// Gradients of the loss with respect to individual score components,
/// collected during the loss computation and consumed by
/// [`DocForward::backward`].
#[derive(Clone, Debug)]
pub struct ScoreGrads {
    mention_start: Vec<f64>,
    mention_end: Vec<f64>,
    mention_pair: BilinearGrad,
    shared: AntecedentGrad,
    experts: Vec<AntecedentGrad>,
}

impl ScoreGrads {
    pub fn new(n_tokens: usize) -> Self {
        ScoreGrads {
            mention_start: vec![0.0; n_tokens],
            mention_end: vec![0.0; n_tokens],
            mention_pair: BilinearGrad::default(),
            shared: AntecedentGrad::default(),
            experts: vec![AntecedentGrad::default(); Category::ALL.len()],
        }
    }

    pub fn mention(&mut self, span: Span, g: f64) {
        if g == 0.0 {
            return;
        }
        self.mention_start[span.start] += g;
        self.mention_end[span.end] += g;
        self.mention_pair.push(span.start, span.end, g);
    }

    pub fn shared(&mut self, c: Span, q: Span, g: f64) {
        if g != 0.0 {
            self.shared.push(c, q, g);
        }
    }

    pub fn expert(&mut self, category: Category, c: Span, q: Span, g: f64) {
        if g != 0.0 {
            self.experts[category.index()].push(c, q, g);
        }
    }
}

/// Cached forward pass over one document.
#[derive(Clone, Debug)]
pub struct DocForward {
    encoder: EncoderForward,
    mention: MentionForward,
    shared: Option<AntecedentForward>,
    experts: Option<Vec<AntecedentForward>>,
}

impl DocForward {
    pub fn new(model: &Model, doc: &Document) -> Self {
        let params = &model.params;
        let layout = &model.layout;
        let mode = model.config.routing_mode;
        let encoder = EncoderForward::new(doc, model.encoder_params(), &model.vocab);
        let x = encoder.output();

        let mh = MentionHead::from_store(params, &layout.mention);
        let m_start = Projection::new(mh.w_start, x);
        let mention = MentionForward {
            start_b: m_start.out.matmul(mh.bilinear),
            end: Projection::new(mh.w_end, x),
            start: m_start,
        };

        let shared = mode
            .uses_shared()
            .then(|| AntecedentForward::new(&AntecedentHead::from_store(params, &layout.shared), x));
        let experts = mode.uses_experts().then(|| {
            layout
                .experts
                .iter()
                .map(|ids| AntecedentForward::new(&AntecedentHead::from_store(params, ids), x))
                .collect()
        });

        DocForward {
            encoder,
            mention,
            shared,
            experts,
        }
    }

    pub fn token_vectors(&self) -> &Tensor2 {
        self.encoder.output()
    }

    pub fn mention_score(&self, model: &Model, span: Span) -> f64 {
        let ids = &model.layout.mention;
        let start = self.mention.start.out.row(span.start);
        let end = self.mention.end.out.row(span.end);
        dot(start, model.params.value(ids.v_start).data())
            + dot(end, model.params.value(ids.v_end).data())
            + dot(self.mention.start_b.row(span.start), end)
    }

    /// Shared antecedent score, 0 when the routing mode drops the shared scorer.
    pub fn shared_score(&self, c: Span, q: Span) -> f64 {
        self.shared.as_ref().map_or(0.0, |h| h.score(c, q))
    }

    /// Expert antecedent score, 0 when the routing mode drops the experts.
    pub fn expert_score(&self, category: Category, c: Span, q: Span) -> f64 {
        self.experts
            .as_ref()
            .map_or(0.0, |e| e[category.index()].score(c, q))
    }

    /// Expert score computed for all six categories and selected with a
    /// one-hot mask.
    pub fn masked_expert_score(&self, category: Category, c: Span, q: Span) -> f64 {
        let Some(experts) = &self.experts else {
            return 0.0;
        };
        let mut total = 0.0;
        for (t, head) in experts.iter().enumerate() {
            let mask = if t == category.index() { 1.0 } else { 0.0 };
            total += mask * head.score(c, q);
        }
        total
    }

    pub fn breakdown(&self, f_m_c: f64, f_m_q: f64, c: Span, q: Span, category: Category) -> PairScoreBreakdown {
        PairScoreBreakdown::new(
            f_m_c,
            f_m_q,
            self.shared_score(c, q),
            self.expert_score(category, c, q),
            category,
        )
    }

    /// Backpropagates collected score gradients into `out`.
    pub fn backward(&self, model: &Model, grads: &ScoreGrads, out: &mut Gradients) {
        let params = &model.params;
        let layout = &model.layout;
        let x = self.encoder.output();
        let (n, d_hidden) = (x.rows(), self.mention.start.out.cols());
        let mut d_x = Tensor2::zeros(n, x.cols());

        let ids = &layout.mention;
        let mh = MentionHead::from_store(params, ids);
        let mut d_start = Tensor2::zeros(n, d_hidden);
        let mut d_end = Tensor2::zeros(n, d_hidden);
        for t in 0..n {
            let (gs, ge) = (grads.mention_start[t], grads.mention_end[t]);
            if gs != 0.0 {
                axpy(gs, self.mention.start.out.row(t), out.get_mut(ids.v_start).data_mut());
                axpy(gs, mh.v_start, d_start.row_mut(t));
            }
            if ge != 0.0 {
                axpy(ge, self.mention.end.out.row(t), out.get_mut(ids.v_end).data_mut());
                axpy(ge, mh.v_end, d_end.row_mut(t));
            }
        }
        let mut d_b = Tensor2::zeros(d_hidden, d_hidden);
        grads.mention_pair.backward(
            &self.mention.start.out,
            &self.mention.end.out,
            &self.mention.start_b,
            mh.bilinear,
            &mut d_start,
            &mut d_end,
            &mut d_b,
        );
        out.get_mut(ids.bilinear).add_assign(&d_b);
        self.mention.start.backward(mh.w_start, x, d_start, out.get_mut(ids.w_start), &mut d_x);
        self.mention.end.backward(mh.w_end, x, d_end, out.get_mut(ids.w_end), &mut d_x);

        if let Some(shared) = &self.shared {
            antecedent_backward(shared, &grads.shared, params, &layout.shared, x, out, &mut d_x);
        }
        if let Some(experts) = &self.experts {
            for (t, fwd) in experts.iter().enumerate() {
                antecedent_backward(fwd, &grads.experts[t], params, &layout.experts[t], x, out, &mut d_x);
            }
        }

        self.encoder
            .backward(model.encoder_params(), &layout.encoder, &d_x, out);
    }
}

fn antecedent_backward(
    fwd: &AntecedentForward,
    grads: &AntecedentGrad,
    params: &ParamStore,
    ids: &AntecedentIds,
    x: &Tensor2,
    out: &mut Gradients,
    d_x: &mut Tensor2,
) {
    if grads.is_empty() {
        return;
    }
    let head = AntecedentHead::from_store(params, ids);
    let (n, h) = fwd.start.out.shape();
    let mut d_e = Tensor2::zeros(n, h);
    let (s, e) = (&fwd.start.out, &fwd.end.out);

    // `U` and `V` alias in the ss/ee terms; accumulate the two halves separately.
    let mut d_s = Tensor2::zeros(n, h);
    let mut d_v = Tensor2::zeros(n, h);
    let mut d_b = Tensor2::zeros(h, h);
    grads.ss.backward(s, s, &fwd.ss, head.b_ss, &mut d_s, &mut d_v, &mut d_b);
    d_s.add_assign(&d_v);
    out.get_mut(ids.b_ss).add_assign(&d_b);

    let mut d_b = Tensor2::zeros(h, h);
    grads.es.backward(e, s, &fwd.es, head.b_es, &mut d_e, &mut d_s, &mut d_b);
    out.get_mut(ids.b_es).add_assign(&d_b);

    let mut d_b = Tensor2::zeros(h, h);
    grads.se.backward(s, e, &fwd.se, head.b_se, &mut d_s, &mut d_e, &mut d_b);
    out.get_mut(ids.b_se).add_assign(&d_b);

    let mut d_u = Tensor2::zeros(n, h);
    let mut d_v = Tensor2::zeros(n, h);
    let mut d_b = Tensor2::zeros(h, h);
    grads.ee.backward(e, e, &fwd.ee, head.b_ee, &mut d_u, &mut d_v, &mut d_b);
    d_e.add_assign(&d_u);
    d_e.add_assign(&d_v);
    out.get_mut(ids.b_ee).add_assign(&d_b);

    fwd.start.backward(head.w_start, x, d_s, out.get_mut(ids.w_start), d_x);
    fwd.end.backward(head.w_end, x, d_e, out.get_mut(ids.w_end), d_x);
}

/// Scores of every `(candidate, query)` cell, rows indexed by query.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix {
    pub candidates: Vec<Span>,
    pub queries: Vec<Span>,
    /// `totals[q][c]`; `-inf` where the candidate does not precede the query.
    pub totals: Tensor2,
}

impl ScoreMatrix {
    pub fn get(&self, query: usize, candidate: usize) -> f64 {
        self.totals.get(query, candidate)
    }
}

/// Every valid cell evaluates all six experts and keeps the routed one with
/// a one-hot mask; cells where the candidate does not precede the query are
/// `-inf`.
pub fn score_matrix_masked(
    candidates: &[Span],
    queries: &[Span],
    doc: &Document,
    fwd: &DocForward,
    model: &Model,
) -> ScoreMatrix {
    let mode = model.config.routing_mode;
    let profile = |s: &Span| SpanProfile::new(*s, doc);
    let c_profiles: Vec<SpanProfile> = candidates.iter().map(profile).collect();
    let q_profiles: Vec<SpanProfile> = queries.iter().map(profile).collect();
    let c_mention: Vec<f64> = candidates.iter().map(|s| fwd.mention_score(model, *s)).collect();

    let mut totals = Tensor2::zeros(queries.len(), candidates.len());
    totals.fill(f64::NEG_INFINITY);
    for (qi, q) in queries.iter().enumerate() {
        let f_m_q = fwd.mention_score(model, *q);
        for (ci, c) in candidates.iter().enumerate() {
            if !c.precedes(q) {
                continue;
            }
            let category = route(mode, &c_profiles[ci], &q_profiles[qi]);
            let total = c_mention[ci]
                + f_m_q
                + fwd.shared_score(*c, *q)
                + fwd.masked_expert_score(category, *c, *q);
            totals.set(qi, ci, total);
        }
    }
    ScoreMatrix {
        candidates: candidates.to_vec(),
        queries: queries.to_vec(),
        totals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::TrainConfig;

    fn tiny_doc() -> Document {
        Document::new(
            "t",
            vec![
                vec!["Anna".into(), "Smith".into(), "met".into(), "him".into()],
                vec!["She".into(), "saw".into(), "Smith".into()],
            ],
            vec![],
        )
        .unwrap()
    }

    fn tiny_model(doc: &Document, routing: RoutingMode, d: usize) -> Model {
        let config = TrainConfig {
            d_emb: d,
            d_enc: d,
            d_hidden: d,
            routing_mode: routing,
            ..TrainConfig::default()
        };
        Model::new(config, std::slice::from_ref(doc))
    }

    #[test]
    fn zero_mention_params_score_zero() {
        let doc = tiny_doc();
        let mut model = tiny_model(&doc, RoutingMode::Linguistic, 3);
        let ids = model.layout.mention;
        for id in [ids.w_start, ids.w_end, ids.v_start, ids.v_end, ids.bilinear] {
            model.params.value_mut(id).fill(0.0);
        }
        let enc = model.encode(&doc);
        let head = MentionHead::from_store(&model.params, &ids);
        assert_eq!(mention_score(Span::new(0, 1), &enc, &head), 0.0);
    }

    #[test]
    fn mention_score_term_isolation() {
        let doc = tiny_doc();
        let mut model = tiny_model(&doc, RoutingMode::Linguistic, 3);
        let ids = model.layout.mention;
        model.params.value_mut(ids.bilinear).fill(0.0);
        model.params.value_mut(ids.v_end).fill(0.0);
        let enc = model.encode(&doc);
        let head = MentionHead::from_store(&model.params, &ids);
        let span = Span::new(0, 1);
        let expected = dot(&project(head.w_start, enc.row(0)), head.v_start);
        assert_eq!(mention_score(span, &enc, &head), expected);
    }

    /// Crafted two-dimensional instance evaluated with explicit scalar
    /// arithmetic.
    #[test]
    fn mention_score_two_dim_oracle() {
        let enc = Tensor2::from_rows(&[vec![1.0, -0.5], vec![0.2, 0.3]]);
        let w_start = Tensor2::from_rows(&[vec![1.0, 0.0], vec![0.5, 2.0]]);
        let w_end = Tensor2::from_rows(&[vec![-1.0, 1.0], vec![0.0, 1.0]]);
        let b = Tensor2::from_rows(&[vec![0.5, -1.0], vec![2.0, 0.25]]);
        let head = MentionHead {
            w_start: &w_start,
            w_end: &w_end,
            v_start: &[1.0, -2.0],
            v_end: &[0.5, 3.0],
            bilinear: &b,
        };
        // start token 0: W_s x = [1.0, 0.5 - 1.0] = [1.0, -0.5]
        let ms = [gelu(1.0), gelu(-0.5)];
        // end token 1: W_e x = [-0.2 + 0.3, 0.3] = [0.1, 0.3]
        let me = [gelu(0.1), gelu(0.3)];
        let lin = ms[0] * 1.0 + ms[1] * -2.0 + me[0] * 0.5 + me[1] * 3.0;
        let bil = ms[0] * (0.5 * me[0] - 1.0 * me[1]) + ms[1] * (2.0 * me[0] + 0.25 * me[1]);
        assert!((mention_score(Span::new(0, 1), &enc, &head) - (lin + bil)).abs() < 1e-14);
    }

    #[test]
    fn antecedent_score_two_dim_oracle() {
        let enc = Tensor2::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]]);
        let w_start = Tensor2::identity(2);
        let w_end = Tensor2::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let m = |a: f64, b: f64, c: f64, d: f64| Tensor2::from_rows(&[vec![a, b], vec![c, d]]);
        let (b_ss, b_es, b_se, b_ee) = (m(1.0, 0.0, 0.0, 1.0), m(0.0, 2.0, 0.0, 0.0), m(0.0, 0.0, -1.0, 0.0), m(0.5, 0.5, 0.5, 0.5));
        let head = AntecedentHead {
            w_start: &w_start,
            w_end: &w_end,
            b_ss: &b_ss,
            b_es: &b_es,
            b_se: &b_se,
            b_ee: &b_ee,
        };
        let pair = MentionPair::new(Span::new(0, 1), Span::new(2, 2)).unwrap();
        let g = gelu;
        let as_i = [g(1.0), g(0.0)];
        let ae_j = [g(1.0), g(0.0)];
        let as_k = [g(0.5), g(0.5)];
        let ae_l = [g(0.5), g(0.5)];
        let expected = (as_i[0] * as_k[0] + as_i[1] * as_k[1])
            + (ae_j[0] * 2.0 * as_k[1])
            + (-as_i[1] * ae_l[0])
            + 0.5 * (ae_j[0] + ae_j[1]) * (ae_l[0] + ae_l[1]);
        assert!((antecedent_score(pair, &enc, &head) - expected).abs() < 1e-14);
    }

    #[test]
    fn antecedent_score_term_isolation() {
        let doc = tiny_doc();
        let mut model = tiny_model(&doc, RoutingMode::Linguistic, 4);
        let ids = model.layout.shared;
        for id in [ids.b_es, ids.b_se, ids.b_ee] {
            model.params.value_mut(id).fill(0.0);
        }
        let enc = model.encode(&doc);
        let head = AntecedentHead::from_store(&model.params, &ids);
        let pair = MentionPair::new(Span::new(0, 1), Span::new(3, 3)).unwrap();
        let expected = bilinear(&project(head.w_start, enc.row(0)), head.b_ss, &project(head.w_start, enc.row(3)));
        assert_eq!(antecedent_score(pair, &enc, &head), expected);
        model.params.value_mut(ids.b_ss).fill(0.0);
        let head = AntecedentHead::from_store(&model.params, &ids);
        assert_eq!(antecedent_score(pair, &enc, &head), 0.0);
    }

    #[test]
    fn null_antecedent_is_zero() {
        let b = PairScoreBreakdown::null();
        assert_eq!(b.total, 0.0);
        assert_eq!(b.shared_total(), 0.0);
        assert_eq!(b.expert_total(), 0.0);
        assert!(b.category.is_none());
    }

    #[test]
    fn zero_experts_reduce_to_shared() {
        let doc = tiny_doc();
        let mut model = tiny_model(&doc, RoutingMode::Linguistic, 4);
        for ids in model.layout.experts {
            for id in ids.all() {
                model.params.value_mut(id).fill(0.0);
            }
        }
        let enc = model.encode(&doc);
        let pair = MentionPair::new(Span::new(0, 1), Span::new(6, 6)).unwrap();
        let b = pair_score(pair, &doc, &enc, &model);
        assert_eq!(b.f_a_expert, 0.0);
        assert_eq!(b.total, b.shared_total());
    }

    #[test]
    fn breakdown_total_is_component_sum() {
        let doc = tiny_doc();
        let model = tiny_model(&doc, RoutingMode::Linguistic, 4);
        let enc = model.encode(&doc);
        let pair = MentionPair::new(Span::new(0, 1), Span::new(6, 6)).unwrap();
        let b = pair_score(pair, &doc, &enc, &model);
        assert_eq!(b.category, Some(Category::Contains));
        let mention = MentionHead::from_store(&model.params, &model.layout.mention);
        let shared = AntecedentHead::from_store(&model.params, &model.layout.shared);
        let expert = AntecedentHead::from_store(&model.params, &model.layout.experts[Category::Contains.index()]);
        let sum = mention_score(pair.candidate(), &enc, &mention)
            + mention_score(pair.query(), &enc, &mention)
            + antecedent_score(pair, &enc, &shared)
            + antecedent_score(pair, &enc, &expert);
        assert!((b.total - sum).abs() < 1e-12);
    }

    #[test]
    fn masked_matrix_single_cell_and_ordering() {
        let doc = tiny_doc();
        let model = tiny_model(&doc, RoutingMode::Linguistic, 4);
        let fwd = DocForward::new(&model, &doc);
        let (c, q) = (Span::new(0, 1), Span::new(4, 4));
        let m = score_matrix_masked(&[c], &[q], &doc, &fwd, &model);
        let expected = pair_score(MentionPair::new(c, q).unwrap(), &doc, fwd.token_vectors(), &model);
        assert_eq!(m.get(0, 0), expected.total);
        let m = score_matrix_masked(&[q], &[q], &doc, &fwd, &model);
        assert_eq!(m.get(0, 0), f64::NEG_INFINITY);
    }

    #[test]
    fn cached_path_matches_reference_bitwise() {
        let doc = tiny_doc();
        for mode in [RoutingMode::Linguistic, RoutingMode::Random, RoutingMode::SharedOnly, RoutingMode::ExpertsOnly] {
            let model = tiny_model(&doc, mode, 5);
            let fwd = DocForward::new(&model, &doc);
            let spans = crate::corpus::enumerate_spans(&doc, 3);
            let m = score_matrix_masked(&spans, &spans, &doc, &fwd, &model);
            for (qi, q) in spans.iter().enumerate() {
                for (ci, c) in spans.iter().enumerate() {
                    match MentionPair::new(*c, *q) {
                        Some(pair) => {
                            let reference = pair_score(pair, &doc, fwd.token_vectors(), &model);
                            assert_eq!(m.get(qi, ci), reference.total, "{mode:?} {c} {q}");
                        }
                        None => assert_eq!(m.get(qi, ci), f64::NEG_INFINITY),
                    }
                }
            }
        }
    }
}
