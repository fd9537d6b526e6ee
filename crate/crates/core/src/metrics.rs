//! Coreference metrics: MUC, B³, CEAF-φ4, LEA, CoNLL F1, per-category
//! pairwise scores and a paired sign-flip permutation test.
//!
//! Corpus scores sum numerators and denominators over documents before
//! dividing. Ratios with a zero denominator are 0.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::categorizer::{categorize, Category, SpanProfile};
use crate::corpus::{Document, MentionPair, Span};
use crate::error::{Error, Result};
use crate::inference::Clustering;
use crate::model::Model;
use crate::numerics::init_rng;
use crate::scorers::{route, DocForward};
use crate::training::prune_mentions;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }
}

/// Recall and precision as unreduced fractions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub recall_num: f64,
    pub recall_den: f64,
    pub precision_num: f64,
    pub precision_den: f64,
}

impl Counts {
    pub fn prf(&self) -> Prf {
        Prf::new(
            ratio(self.precision_num, self.precision_den),
            ratio(self.recall_num, self.recall_den),
        )
    }

    pub fn add(&mut self, other: &Counts) {
        self.recall_num += other.recall_num;
        self.recall_den += other.recall_den;
        self.precision_num += other.precision_num;
        self.precision_den += other.precision_den;
    }

    fn from_halves((recall_num, recall_den): (f64, f64), (precision_num, precision_den): (f64, f64)) -> Self {
        Counts {
            recall_num,
            recall_den,
            precision_num,
            precision_den,
        }
    }
}

type Clusters = [Vec<Span>];

fn membership(clusters: &Clusters) -> HashMap<Span, usize> {
    clusters
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.iter().map(move |m| (*m, i)))
        .collect()
}

fn muc_half(key: &Clusters, response: &Clusters) -> (f64, f64) {
    let owner = membership(response);
    let (mut num, mut den) = (0.0, 0.0);
    for k in key {
        let mut parts: Vec<usize> = Vec::new();
        let mut unaligned = 0;
        for m in k {
            match owner.get(m) {
                Some(&r) => parts.push(r),
                None => unaligned += 1,
            }
        }
        parts.sort_unstable();
        parts.dedup();
        num += (k.len() - parts.len() - unaligned) as f64;
        den += (k.len() - 1) as f64;
    }
    (num, den)
}

pub fn muc_counts(key: &Clusters, response: &Clusters) -> Counts {
    Counts::from_halves(muc_half(key, response), muc_half(response, key))
}

fn b3_half(key: &Clusters, response: &Clusters) -> (f64, f64) {
    let owner = membership(response);
    let (mut num, mut den) = (0.0, 0.0);
    for k in key {
        let mut overlap: HashMap<usize, usize> = HashMap::new();
        let mut unaligned = 0;
        for m in k {
            match owner.get(m) {
                Some(&r) => *overlap.entry(r).or_default() += 1,
                None => unaligned += 1,
            }
        }
        // Each mention m contributes |K ∩ R_m| / |K|; an absent mention's
        // response cluster is {m}, overlapping K in one mention.
        let mut sum: f64 = overlap.values().map(|&n| (n * n) as f64).sum();
        sum += unaligned as f64;
        num += sum / k.len() as f64;
        den += k.len() as f64;
    }
    (num, den)
}

pub fn b_cubed_counts(key: &Clusters, response: &Clusters) -> Counts {
    Counts::from_halves(b3_half(key, response), b3_half(response, key))
}

fn phi4(k: &[Span], r: &[Span]) -> f64 {
    let shared = k.iter().filter(|m| r.contains(m)).count();
    2.0 * shared as f64 / (k.len() + r.len()) as f64
}

pub fn ceaf_phi4_counts(key: &Clusters, response: &Clusters) -> Counts {
    let weights: Vec<Vec<f64>> = key
        .iter()
        .map(|k| response.iter().map(|r| phi4(k, r)).collect())
        .collect();
    let total: f64 = max_weight_matching(&weights)
        .into_iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| weights[i][j]))
        .sum();
    Counts {
        recall_num: total,
        recall_den: key.len() as f64,
        precision_num: total,
        precision_den: response.len() as f64,
    }
}

/// Maximum-weight one-to-one assignment of rows to columns (Hungarian
/// algorithm with potentials, O(n²m)). Returns the column of each row.
pub fn max_weight_matching(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    // Work on an n×m cost matrix with n ≤ m.
    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    let cost = |i: usize, j: usize| -> f64 {
        if transpose {
            -weights[j][i]
        } else {
            -weights[i][j]
        }
    };

    // 1-based arrays; index 0 is the virtual start column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut matched_row = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0;
        let mut min_v = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < min_v[j] {
                    min_v[j] = cur;
                    way[j] = j0;
                }
                if min_v[j] < delta {
                    delta = min_v[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![None; rows];
    for (j, &i) in matched_row.iter().enumerate().skip(1) {
        if i == 0 {
            continue;
        }
        let (r, c) = if transpose { (j - 1, i - 1) } else { (i - 1, j - 1) };
        assignment[r] = Some(c);
    }
    assignment
}

fn links(n: usize) -> f64 {
    (n * n.saturating_sub(1) / 2) as f64
}

fn lea_half(key: &Clusters, response: &Clusters) -> (f64, f64) {
    let owner = membership(response);
    let (mut num, mut den) = (0.0, 0.0);
    for k in key {
        let size = k.len() as f64;
        let resolved = if k.len() == 1 {
            // A singleton's self-link is resolved only by the same singleton.
            let alone = owner.get(&k[0]).is_some_and(|&r| response[r].len() == 1);
            if alone {
                1.0
            } else {
                0.0
            }
        } else {
            let mut overlap: HashMap<usize, usize> = HashMap::new();
            for m in k {
                if let Some(&r) = owner.get(m) {
                    *overlap.entry(r).or_default() += 1;
                }
            }
            overlap.values().map(|&n| links(n)).sum::<f64>() / links(k.len())
        };
        num += size * resolved;
        den += size;
    }
    (num, den)
}

pub fn lea_counts(key: &Clusters, response: &Clusters) -> Counts {
    Counts::from_halves(lea_half(key, response), lea_half(response, key))
}

pub fn muc(key: &Clusters, response: &Clusters) -> Prf {
    muc_counts(key, response).prf()
}

pub fn b_cubed(key: &Clusters, response: &Clusters) -> Prf {
    b_cubed_counts(key, response).prf()
}

pub fn ceaf_phi4(key: &Clusters, response: &Clusters) -> Prf {
    ceaf_phi4_counts(key, response).prf()
}

pub fn lea(key: &Clusters, response: &Clusters) -> Prf {
    lea_counts(key, response).prf()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricCounts {
    pub muc: Counts,
    pub b3: Counts,
    pub ceaf_phi4: Counts,
    pub lea: Counts,
}

impl MetricCounts {
    pub fn of(key: &Clusters, response: &Clusters) -> Self {
        MetricCounts {
            muc: muc_counts(key, response),
            b3: b_cubed_counts(key, response),
            ceaf_phi4: ceaf_phi4_counts(key, response),
            lea: lea_counts(key, response),
        }
    }

    pub fn add(&mut self, other: &MetricCounts) {
        self.muc.add(&other.muc);
        self.b3.add(&other.b3);
        self.ceaf_phi4.add(&other.ceaf_phi4);
        self.lea.add(&other.lea);
    }

    pub fn report(&self) -> EvalReport {
        let (muc, b3, ceaf_phi4, lea) = (self.muc.prf(), self.b3.prf(), self.ceaf_phi4.prf(), self.lea.prf());
        EvalReport {
            muc,
            b3,
            ceaf_phi4,
            lea,
            conll_f1: conll_f1(&muc, &b3, &ceaf_phi4),
            per_category: BTreeMap::new(),
        }
    }
}

pub fn conll_f1(muc: &Prf, b3: &Prf, ceaf: &Prf) -> f64 {
    (muc.f1 + b3.f1 + ceaf.f1) / 3.0
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub muc: Prf,
    pub b3: Prf,
    pub ceaf_phi4: Prf,
    pub lea: Prf,
    pub conll_f1: f64,
    /// Empty unless pairwise scores were requested.
    pub per_category: BTreeMap<Category, Prf>,
}

/// Corpus-level report over aligned `(key, response)` clusterings.
pub fn evaluate(pairs: &[(&Clustering, &Clustering)]) -> EvalReport {
    let mut total = MetricCounts::default();
    for (key, response) in pairs {
        total.add(&MetricCounts::of(&key.clusters, &response.clusters));
    }
    total.report()
}

/// CoNLL F1 of a single document.
pub fn doc_conll_f1(key: &Clustering, response: &Clustering) -> f64 {
    MetricCounts::of(&key.clusters, &response.clusters).report().conll_f1
}

/// Confusion counts of the pairwise diagnostic for one category.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_negative: usize,
}

impl PairCounts {
    pub fn total(&self) -> usize {
        self.true_positive + self.false_positive + self.false_negative + self.true_negative
    }

    pub fn prf(&self) -> Prf {
        let tp = self.true_positive as f64;
        Prf::new(
            ratio(tp, tp + self.false_positive as f64),
            ratio(tp, tp + self.false_negative as f64),
        )
    }
}

/// Pairwise diagnostic over ordered gold-mention pairs: a pair is predicted
/// coreferent iff `F(c, q) > 0`, and bucketed by its linguistic category.
/// With `pruned_only`, pairs with a mention outside the pruned set are
/// skipped.
pub fn pairwise_counts(docs: &[Document], model: &Model, pruned_only: bool) -> BTreeMap<Category, PairCounts> {
    let mut out: BTreeMap<Category, PairCounts> = Category::ALL.into_iter().map(|t| (t, PairCounts::default())).collect();
    let mode = model.config.routing_mode;
    for doc in docs {
        let fwd = DocForward::new(model, doc);
        let pruned = pruned_only.then(|| prune_mentions(doc, &fwd, model));
        let clusters = doc.gold_cluster_index();
        let mentions: Vec<Span> = clusters.keys().copied().collect();
        let profiles: Vec<_> = mentions
            .iter()
            .map(|m| SpanProfile::new(*m, doc))
            .collect();
        for (qi, q) in mentions.iter().enumerate() {
            for (ci, c) in mentions[..qi].iter().enumerate() {
                let pair = MentionPair::new(*c, *q).expect("mentions are sorted and distinct");
                if let Some(p) = &pruned {
                    if p.binary_search(c).is_err() || p.binary_search(q).is_err() {
                        continue;
                    }
                }
                let routed = route(mode, &profiles[ci], &profiles[qi]);
                let score = fwd
                    .breakdown(fwd.mention_score(model, *c), fwd.mention_score(model, *q), *c, *q, routed)
                    .total;
                let predicted = score > 0.0;
                let actual = clusters[c] == clusters[q];
                let counts = out.get_mut(&categorize(pair, doc)).expect("every category present");
                match (predicted, actual) {
                    (true, true) => counts.true_positive += 1,
                    (true, false) => counts.false_positive += 1,
                    (false, true) => counts.false_negative += 1,
                    (false, false) => counts.true_negative += 1,
                }
            }
        }
    }
    out
}

pub fn pairwise_by_category(docs: &[Document], model: &Model, pruned_only: bool) -> BTreeMap<Category, Prf> {
    pairwise_counts(docs, model, pruned_only)
        .into_iter()
        .map(|(t, c)| (t, c.prf()))
        .collect()
}

fn signed_mean(diffs: &[f64], flip: impl Fn(usize) -> bool) -> f64 {
    let sum: f64 = diffs
        .iter()
        .enumerate()
        .map(|(i, d)| if flip(i) { -d } else { *d })
        .sum();
    sum / diffs.len() as f64
}

/// Two-sided paired permutation test on the mean difference, by random
/// sign flips: `p = (1 + #{|resampled| ≥ |observed|}) / (resamples + 1)`.
pub fn permutation_test(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Config(format!(
            "paired lists differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Config("permutation test needs at least one pair".into()));
    }
    if resamples < 1000 {
        return Err(Error::Config(format!("at least 1000 resamples required, got {resamples}")));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let observed = signed_mean(&diffs, |_| false).abs();
    let mut rng = init_rng(seed, 0);
    let mut hits = 0usize;
    let mut flips = vec![false; diffs.len()];
    for _ in 0..resamples {
        for f in flips.iter_mut() {
            *f = rng.gen();
        }
        if signed_mean(&diffs, |i| flips[i]).abs() >= observed {
            hits += 1;
        }
    }
    Ok((1 + hits) as f64 / (resamples + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(i: usize) -> Span {
        Span::new(i, i)
    }

    fn c(ids: &[usize]) -> Vec<Span> {
        ids.iter().map(|&i| m(i)).collect()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn identical_clusterings_score_one() {
        let key = vec![c(&[0, 1, 2]), c(&[3, 4]), c(&[5])];
        for f in [muc, b_cubed, ceaf_phi4, lea] {
            let p = f(&key, &key);
            assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn muc_partition_example() {
        let p = muc(&[c(&[0, 1, 2, 3])], &[c(&[0, 1]), c(&[2, 3])]);
        assert!(close(p.recall, 2.0 / 3.0));
        assert_eq!(p.precision, 1.0);
        let empty = muc(&[c(&[0, 1])], &[]);
        assert_eq!((empty.precision, empty.recall, empty.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn b_cubed_unlinked_example() {
        let p = b_cubed(&[c(&[0, 1])], &[c(&[0]), c(&[1])]);
        assert!(close(p.recall, 0.5));
        assert_eq!(p.precision, 1.0);
        // Absent response mentions count as singletons.
        let q = b_cubed(&[c(&[0, 1])], &[]);
        assert!(close(q.recall, 0.5));
    }

    #[test]
    fn ceaf_example() {
        let p = ceaf_phi4(&[c(&[0, 1, 2])], &[c(&[0, 1]), c(&[2])]);
        assert!(close(p.recall, 0.8));
        assert!(close(p.precision, 0.4));
        assert!(close(p.f1, 2.0 * 0.8 * 0.4 / 1.2));
    }

    #[test]
    fn lea_example() {
        let p = lea(&[c(&[0, 1, 2])], &[c(&[0, 1])]);
        assert!(close(p.recall, 1.0 / 3.0));
        assert_eq!(p.precision, 1.0);
    }

    #[test]
    fn lea_singletons() {
        assert_eq!(lea(&[c(&[0])], &[c(&[0])]).recall, 1.0);
        assert_eq!(lea(&[c(&[0])], &[c(&[0, 1])]).recall, 0.0);
    }

    #[test]
    fn hungarian_rectangular() {
        let w = vec![vec![0.1, 0.9, 0.0], vec![0.8, 0.7, 0.0]];
        assert_eq!(max_weight_matching(&w), vec![Some(1), Some(0)]);
        let t = vec![vec![0.1, 0.8], vec![0.9, 0.7], vec![0.0, 0.0]];
        let a = max_weight_matching(&t);
        assert_eq!((a[0], a[1]), (Some(1), Some(0)));
        assert_eq!(a[2], None);
        assert!(max_weight_matching(&[]).is_empty());
    }

    #[test]
    fn conll_is_mean() {
        let key = vec![c(&[0, 1, 2]), c(&[3, 4])];
        let resp = vec![c(&[0, 1]), c(&[2, 3, 4])];
        let r = MetricCounts::of(&key, &resp).report();
        assert!((r.conll_f1 - (r.muc.f1 + r.b3.f1 + r.ceaf_phi4.f1) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn swapping_key_and_response_swaps_p_and_r() {
        let key = vec![c(&[0, 1, 2]), c(&[3, 4])];
        let resp = vec![c(&[0, 1]), c(&[2, 3, 4, 5])];
        for f in [muc, b_cubed, ceaf_phi4, lea] {
            let (a, b) = (f(&key, &resp), f(&resp, &key));
            assert!(close(a.precision, b.recall) && close(a.recall, b.precision));
        }
    }

    #[test]
    fn permutation_identical_and_shifted() {
        let a: Vec<f64> = (0..50).map(|i| i as f64 * 0.37 % 1.0).collect();
        assert_eq!(permutation_test(&a, &a, 1000, 3).unwrap(), 1.0);
        let b: Vec<f64> = a.iter().map(|x| x + 10.0).collect();
        assert!(permutation_test(&b, &a, 10_000, 3).unwrap() <= 0.01);
        assert!(permutation_test(&[1.0, 0.0], &[0.0, 0.5], 1000, 9).unwrap() >= 0.25);
        assert!(permutation_test(&[1.0], &[1.0, 2.0], 1000, 0).is_err());
        assert!(permutation_test(&a, &a, 10, 0).is_err());
    }
}
