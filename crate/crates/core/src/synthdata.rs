//! Deterministic synthetic corpus whose gold pairs cover all six categories.
//!
//! Each document tells the same short story about three people and an
//! object, with names, genders, roles and nouns drawn from a small lexicon.
//! Person A and person B share a surname; C has A's gender. With
//! `ambiguous`, a fourth person of A's gender is woven in, so pronouns and
//! surnames have more plausible antecedents.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::categorizer::{categorize, Category};
use crate::corpus::{Document, MentionPair, Span};
use crate::error::{Error, Result};
use crate::numerics::init_rng;

/// Minimum positive and negative gold pairs per category over a corpus.
pub const MIN_PAIRS_PER_CATEGORY: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_docs: usize,
    pub seed: u64,
    #[serde(default)]
    pub ambiguous: bool,
}

impl SynthSpec {
    pub fn new(n_docs: usize, seed: u64) -> Self {
        SynthSpec {
            n_docs,
            seed,
            ambiguous: false,
        }
    }
}

const MALE_NAMES: [&str; 8] = ["Bob", "Tom", "Paul", "Mark", "Sam", "Leo", "Ivan", "Hugo"];
const FEMALE_NAMES: [&str; 8] = ["Anna", "Carol", "Lucy", "Maria", "Nina", "Rosa", "Emma", "Vera"];
const SURNAMES: [&str; 8] = ["Smith", "Jones", "Brown", "Clark", "Lewis", "Walker", "Young", "Hall"];
const ROLES: [&str; 6] = ["teacher", "doctor", "pilot", "lawyer", "farmer", "banker"];
const NOUNS: [&str; 6] = ["book", "letter", "report", "map", "key", "note"];

#[derive(Clone, Copy, PartialEq, Eq)]
enum Gender {
    Male,
    Female,
}

impl Gender {
    fn other(self) -> Gender {
        match self {
            Gender::Male => Gender::Female,
            Gender::Female => Gender::Male,
        }
    }

    fn names(self) -> &'static [&'static str] {
        match self {
            Gender::Male => &MALE_NAMES,
            Gender::Female => &FEMALE_NAMES,
        }
    }

    fn title(self) -> &'static str {
        match self {
            Gender::Male => "Mr",
            Gender::Female => "Ms",
        }
    }

    fn subject(self, capital: bool) -> &'static str {
        match (self, capital) {
            (Gender::Male, false) => "he",
            (Gender::Male, true) => "He",
            (Gender::Female, false) => "she",
            (Gender::Female, true) => "She",
        }
    }

    fn object(self) -> &'static str {
        match self {
            Gender::Male => "him",
            Gender::Female => "her",
        }
    }
}

struct Person {
    first: &'static str,
    last: &'static str,
    gender: Gender,
}

/// Accumulates sentences and gold mentions keyed by entity id.
#[derive(Default)]
struct Builder {
    sentences: Vec<Vec<String>>,
    current: Vec<String>,
    offset: usize,
    clusters: BTreeMap<usize, Vec<Span>>,
}

impl Builder {
    fn words(&mut self, text: &str) -> &mut Self {
        for w in text.split_whitespace() {
            self.current.push(w.to_string());
        }
        self
    }

    fn mention(&mut self, entity: usize, text: &str) -> &mut Self {
        let start = self.offset + self.current.len();
        self.words(text);
        let end = self.offset + self.current.len() - 1;
        self.clusters.entry(entity).or_default().push(Span::new(start, end));
        self
    }

    fn end(&mut self) {
        self.words(".");
        self.offset += self.current.len();
        self.sentences.push(std::mem::take(&mut self.current));
    }

    fn finish(self, doc_key: String) -> Result<Document> {
        Document::new(doc_key, self.sentences, self.clusters.into_values().collect())
    }
}

fn pick<R: Rng>(rng: &mut R, pool: &[&'static str], avoid: &[&str]) -> &'static str {
    let allowed: Vec<&'static str> = pool.iter().copied().filter(|w| !avoid.contains(w)).collect();
    allowed.choose(rng).copied().expect("lexicon larger than exclusions")
}

fn document(index: usize, spec: &SynthSpec) -> Result<Document> {
    let mut rng = init_rng(spec.seed, index as u64);
    let g = if rng.gen() { Gender::Male } else { Gender::Female };
    let surname = pick(&mut rng, &SURNAMES, &[]);
    let a = Person {
        first: pick(&mut rng, g.names(), &[]),
        last: surname,
        gender: g,
    };
    let b = Person {
        first: pick(&mut rng, g.other().names(), &[]),
        last: surname,
        gender: g.other(),
    };
    let c_first = pick(&mut rng, g.names(), &[a.first]);
    let c_last = pick(&mut rng, &SURNAMES, &[surname]);
    let c = Person {
        first: c_first,
        last: c_last,
        gender: g,
    };
    let d = Person {
        first: pick(&mut rng, g.names(), &[a.first, c.first]),
        last: pick(&mut rng, &SURNAMES, &[surname, c.last]),
        gender: g,
    };
    let role = pick(&mut rng, &ROLES, &[]);
    let noun = pick(&mut rng, &NOUNS, &[]);
    let (role, noun) = (format!("the {role}"), format!("the {noun}"));
    let full = |p: &Person| format!("{} {}", p.first, p.last);
    const A: usize = 0;
    const B: usize = 1;
    const C: usize = 2;
    const X: usize = 3;
    const D: usize = 4;

    let mut s = Builder::default();
    s.mention(A, &full(&a)).words("met").mention(B, &full(&b)).end();
    s.mention(A, a.gender.subject(true)).words("thanked").mention(B, b.gender.object()).end();
    s.words("\" ").mention(A, "I").words("am late , \"").mention(A, a.gender.subject(false)).words("said").end();
    s.words(a.gender.title()).mention(A, a.last).words(",").mention(A, &role).words(", read").mention(X, &noun).end();
    if spec.ambiguous {
        s.mention(D, &full(&d)).words("saw").mention(A, a.gender.object()).end();
    }
    s.words(b.gender.title()).mention(B, b.last).words("liked").mention(X, "it").end();
    s.mention(C, &full(&c)).words("called").mention(A, a.gender.object()).end();
    s.mention(C, c.gender.subject(true)).words("took").mention(X, "it").end();
    if spec.ambiguous {
        s.mention(D, d.gender.subject(true)).words("waved at").mention(C, c.gender.object()).end();
    }
    s.words("\" ").mention(B, "My").words("day was long , \"").mention(B, b.gender.subject(false)).words("said").end();
    s.words(b.gender.title()).mention(B, b.last).words("took").mention(X, &noun).end();
    s.words(c.gender.title()).mention(C, c.last).words("thanked").mention(A, &role).end();
    s.words(a.gender.title()).mention(A, a.last).words("waved").end();
    s.words(b.gender.title()).mention(B, b.last).words("nodded").end();
    s.mention(C, c.gender.subject(true)).words("went home").end();
    s.mention(A, &full(&a)).words("left").end();

    let prefix = if spec.ambiguous { "synth_amb" } else { "synth" };
    s.finish(format!("{prefix}_{index:04}"))
}

/// Positive and negative gold-pair counts per category.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairHistogram {
    pub positive: usize,
    pub negative: usize,
}

/// Ordered gold-mention pairs of `docs`, bucketed by category.
pub fn gold_pair_histogram(docs: &[Document]) -> BTreeMap<Category, PairHistogram> {
    let mut out: BTreeMap<Category, PairHistogram> = Category::ALL.into_iter().map(|t| (t, PairHistogram::default())).collect();
    for doc in docs {
        let index = doc.gold_cluster_index();
        let mentions: Vec<(&Span, &usize)> = index.iter().collect();
        for (i, (q, qc)) in mentions.iter().enumerate() {
            for (c, cc) in &mentions[..i] {
                let pair = MentionPair::new(**c, **q).expect("sorted distinct mentions");
                let h = out.get_mut(&categorize(pair, doc)).expect("all categories present");
                if cc == qc {
                    h.positive += 1;
                } else {
                    h.negative += 1;
                }
            }
        }
    }
    out
}

/// Generates `spec.n_docs` documents. Fails if the corpus misses the
/// per-category pair minimum, which would mean a broken template.
pub fn generate(spec: &SynthSpec) -> Result<Vec<Document>> {
    if spec.n_docs == 0 {
        return Err(Error::Synth("n_docs must be positive".into()));
    }
    let docs = (0..spec.n_docs).map(|i| document(i, spec)).collect::<Result<Vec<_>>>()?;
    for (category, h) in gold_pair_histogram(&docs) {
        if h.positive < MIN_PAIRS_PER_CATEGORY || h.negative < MIN_PAIRS_PER_CATEGORY {
            return Err(Error::Synth(format!(
                "{category} has {} positive and {} negative gold pairs, need {MIN_PAIRS_PER_CATEGORY} each",
                h.positive, h.negative
            )));
        }
    }
    Ok(docs)
}
