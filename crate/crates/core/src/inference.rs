//! Antecedent linking and chain formation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Span};
use crate::model::Model;
use crate::scorers::{score_matrix_masked, DocForward, ScoreMatrix};
use crate::training::{make_batches, prune_mentions};

/// Predicted entities of one document.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    pub doc_key: String,
    pub clusters: Vec<Vec<Span>>,
}

impl Clustering {
    /// Normalizes order: mentions sorted within clusters, clusters by first
    /// mention.
    pub fn new(doc_key: impl Into<String>, mut clusters: Vec<Vec<Span>>) -> Self {
        for c in &mut clusters {
            c.sort();
        }
        clusters.retain(|c| !c.is_empty());
        clusters.sort();
        Clustering {
            doc_key: doc_key.into(),
            clusters,
        }
    }

    pub fn from_gold(doc: &Document) -> Self {
        Self::new(doc.doc_key(), doc.gold_clusters().to_vec())
    }

    pub fn mentions(&self) -> impl Iterator<Item = Span> + '_ {
        self.clusters.iter().flatten().copied()
    }

    /// Links that reproduce this clustering: each mention to its predecessor.
    pub fn links(&self) -> Vec<Link> {
        let mut links: Vec<Link> = self
            .clusters
            .iter()
            .flat_map(|c| {
                c.iter().enumerate().map(|(i, q)| Link {
                    query: *q,
                    antecedent: i.checked_sub(1).map(|p| c[p]),
                })
            })
            .collect();
        links.sort_by_key(|l| l.query);
        links
    }
}

/// A query and its chosen antecedent; `None` is ε.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Link {
    pub query: Span,
    pub antecedent: Option<Span>,
}

/// Links each query to its best-scoring candidate, or to ε (score 0) when
/// nothing beats it. Ties prefer ε, then the earliest candidate.
pub fn link_antecedents(matrix: &ScoreMatrix) -> Vec<Link> {
    matrix
        .queries
        .iter()
        .enumerate()
        .map(|(qi, q)| {
            let mut best: (f64, Option<Span>) = (0.0, None);
            for (ci, c) in matrix.candidates.iter().enumerate() {
                let score = matrix.get(qi, ci);
                if score > best.0 {
                    best = (score, Some(*c));
                }
            }
            Link {
                query: *q,
                antecedent: best.1,
            }
        })
        .collect()
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller index as root keeps roots deterministic.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Connected components of the link graph, singletons dropped.
pub fn build_clusters(doc_key: &str, links: &[Link]) -> Clustering {
    let mut spans: Vec<Span> = links
        .iter()
        .flat_map(|l| std::iter::once(l.query).chain(l.antecedent))
        .collect();
    spans.sort();
    spans.dedup();
    let index = |s: &Span| spans.binary_search(s).expect("span collected above");

    let mut uf = UnionFind::new(spans.len());
    for link in links {
        if let Some(a) = link.antecedent {
            uf.union(index(&link.query), index(&a));
        }
    }
    let mut groups: Vec<Vec<Span>> = vec![Vec::new(); spans.len()];
    for (i, s) in spans.iter().enumerate() {
        let root = uf.find(i);
        groups[root].push(*s);
    }
    Clustering::new(doc_key, groups.into_iter().filter(|g| g.len() >= 2).collect())
}

/// Pruned spans and their masked score matrix for one document.
pub fn score_document(model: &Model, doc: &Document) -> (Vec<Span>, ScoreMatrix) {
    let fwd = DocForward::new(model, doc);
    let pruned = prune_mentions(doc, &fwd, model);
    let matrix = score_matrix_masked(&pruned, &pruned, doc, &fwd, model);
    (pruned, matrix)
}

pub fn predict(model: &Model, doc: &Document) -> Clustering {
    let (_, matrix) = score_document(model, doc);
    build_clusters(doc.doc_key(), &link_antecedents(&matrix))
}

/// Predicts every document, in batches of at most `token_budget_eval`
/// tokens; documents within a batch run in parallel when `threads > 1`.
pub fn predict_corpus(model: &Model, docs: &[Document], threads: usize) -> Vec<Clustering> {
    let lens: Vec<usize> = docs.iter().map(Document::len).collect();
    let mut out = Vec::with_capacity(docs.len());
    let run = |batch: &[Document]| -> Vec<Clustering> {
        if threads > 1 {
            batch.par_iter().map(|d| predict(model, d)).collect()
        } else {
            batch.iter().map(|d| predict(model, d)).collect()
        }
    };
    let pool = (threads > 1)
        .then(|| rayon::ThreadPoolBuilder::new().num_threads(threads).build().ok())
        .flatten();
    for batch in make_batches(&lens, model.config.token_budget_eval) {
        let docs = &docs[batch];
        match &pool {
            Some(pool) => out.extend(pool.install(|| run(docs))),
            None => out.extend(run(docs)),
        }
    }
    out
}
