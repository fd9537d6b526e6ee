//! Bundled toy document and the end-to-end gradient check.

use serde::Serialize;

use crate::categorizer::{categorize, Category};
use crate::corpus::{enumerate_spans, Document, MentionPair, Span};
use crate::error::Result;
use crate::model::Model;
use crate::numerics::{check_gradients, log_sum_exp, ParamStore};
use crate::training::{doc_loss_with, marginal_nll, MarginalLoss, TrainConfig};

/// Eight tokens whose width-≤2 spans produce pairs of every category.
pub fn gradcheck_document() -> Document {
    let sentences = [["She", "met", "her", "Smith"], ["Anna", "Smith", "saw", "him"]];
    Document::new(
        "gradcheck",
        sentences
            .iter()
            .map(|s| s.iter().map(|t| t.to_string()).collect())
            .collect(),
        vec![
            vec![Span::new(0, 0), Span::new(2, 2), Span::new(4, 5)],
            vec![Span::new(3, 3), Span::new(5, 5)],
        ],
    )
    .expect("bundled document is valid")
}

/// Finite-difference step used by the bundled check.
pub const GRADCHECK_EPS: f64 = 1e-5;

/// Configuration used by the bundled check: dimension 4 everywhere.
pub fn gradcheck_config() -> TrainConfig {
    TrainConfig {
        d_emb: 4,
        d_enc: 4,
        d_hidden: 4,
        max_span_width: 2,
        ..TrainConfig::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub max_relative_error: f64,
    pub parameters: usize,
    pub scalars: usize,
    pub spans: usize,
    pub categories_covered: Vec<Category>,
}

/// Categories present among ordered pairs of `spans`.
pub fn categories_covered(doc: &Document, spans: &[Span]) -> Vec<Category> {
    let mut seen = [false; 6];
    for (i, c) in spans.iter().enumerate() {
        for q in &spans[i + 1..] {
            if let Some(pair) = MentionPair::new(*c, *q) {
                seen[categorize(pair, doc).index()] = true;
            }
        }
    }
    Category::ALL.into_iter().filter(|t| seen[t.index()]).collect()
}

/// `lse(s[mask]) - lse(r[mask])` computed from the score shifts, exact to
/// rounding of the shift itself rather than of the log-sum-exp values.
fn lse_shift(reference: &[f64], scores: &[f64], mask: impl Fn(usize) -> bool) -> f64 {
    let idx: Vec<usize> = (0..scores.len()).filter(|&i| mask(i)).collect();
    let lse_ref = log_sum_exp(idx.iter().map(|&i| reference[i]).collect::<Vec<_>>());
    let acc: f64 = idx
        .iter()
        .map(|&i| (reference[i] - lse_ref).exp() * (scores[i] - reference[i]).exp_m1())
        .sum();
    acc.ln_1p()
}

/// Loss of one term relative to its value at `reference` scores.
fn offset_loss(reference: &[f64], scores: &[f64], gold: &[bool]) -> Result<MarginalLoss> {
    let base = marginal_nll(scores, gold)?;
    let loss = lse_shift(reference, scores, |_| true) - lse_shift(reference, scores, |i| gold[i]);
    Ok(MarginalLoss { loss, grad: base.grad })
}

/// Compares analytic and central-difference gradients of the full loss on
/// `doc`, over every parameter. Pruning is bypassed: all enumerated spans
/// are queries, so every expert receives gradient.
///
/// The loss is evaluated as an offset from its value at the unperturbed
/// parameters, term by term. It differs from the plain loss by a constant,
/// but its central differences are not swamped by rounding of an O(100)
/// total, which matters for gradient entries of order 1e-7.
pub fn gradcheck(doc: &Document, config: TrainConfig, eps: f64) -> Result<GradcheckReport> {
    config.validate()?;
    let mut model = Model::new(config, std::slice::from_ref(doc));
    let spans = enumerate_spans(doc, model.config.max_span_width);

    let mut reference: Vec<Vec<f64>> = Vec::new();
    doc_loss_with(&model, doc, Some(&spans), |scores, gold| {
        reference.push(scores.to_vec());
        marginal_nll(scores, gold)
    })?;

    let mut params = std::mem::take(&mut model.params);
    let max_relative_error = check_gradients(&mut params, eps, |p: &mut ParamStore| {
        std::mem::swap(&mut model.params, p);
        let mut terms = reference.iter();
        let result = doc_loss_with(&model, doc, Some(&spans), |scores, gold| {
            let r = terms.next().expect("term count is fixed by the span set");
            offset_loss(r, scores, gold)
        });
        std::mem::swap(&mut model.params, p);
        let (loss, grads) = result?;
        p.accumulate(&grads);
        Ok(loss.total)
    })?;
    Ok(GradcheckReport {
        max_relative_error,
        parameters: params.len(),
        scalars: params.num_scalars(),
        spans: spans.len(),
        categories_covered: categories_covered(doc, &spans),
    })
}
