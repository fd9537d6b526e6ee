use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use lingmess_core::metrics::{doc_conll_f1, evaluate, pairwise_by_category, permutation_test, EvalReport, Prf};
use lingmess_core::{checkpoint, Clustering, Document};
use serde::Serialize;

use crate::io::{read_documents, write_output, InputFormat};

#[derive(Args)]
pub struct EvaluateArgs {
    /// Gold corpus (JSONL or CoNLL-2012).
    #[arg(long)]
    gold: PathBuf,
    /// Predictions as JSONL; the `clusters` field is the response.
    #[arg(long)]
    pred: PathBuf,
    /// Second prediction file, compared by a paired permutation test.
    #[arg(long)]
    compare: Option<PathBuf>,
    /// Checkpoint for the per-category pairwise diagnostic.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Restrict the pairwise diagnostic to pairs of pruned mentions.
    #[arg(long)]
    pruned_only: bool,
    #[arg(long, default_value_t = 10_000)]
    resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the JSON report instead of the table.
    #[arg(long)]
    json: bool,
    #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
    gold_format: InputFormat,
}

#[derive(Serialize)]
struct Output {
    report: EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    compare: Option<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_value: Option<f64>,
}

/// Responses aligned to gold document order; every gold key must be present
/// exactly once and no extra keys are allowed.
fn align(gold: &[Document], pred: Vec<Document>, path: &Path) -> Result<Vec<Clustering>> {
    let mut by_key: BTreeMap<String, Clustering> = BTreeMap::new();
    for doc in pred {
        let key = doc.doc_key().to_string();
        let clustering = Clustering::new(key.clone(), doc.gold_clusters().to_vec());
        if by_key.insert(key.clone(), clustering).is_some() {
            bail!("{}: duplicate doc_key `{key}`", path.display());
        }
    }
    let gold_keys: BTreeSet<&str> = gold.iter().map(Document::doc_key).collect();
    let missing: Vec<&str> = gold_keys.iter().copied().filter(|k| !by_key.contains_key(*k)).collect();
    let extra: Vec<&str> = by_key.keys().map(String::as_str).filter(|k| !gold_keys.contains(k)).collect();
    if !missing.is_empty() || !extra.is_empty() {
        bail!(
            "{}: doc_key mismatch with gold; missing [{}], unexpected [{}]",
            path.display(),
            missing.join(", "),
            extra.join(", ")
        );
    }
    Ok(gold
        .iter()
        .map(|d| by_key.remove(d.doc_key()).expect("checked above"))
        .collect())
}

fn report_for(keys: &[Clustering], responses: &[Clustering]) -> EvalReport {
    let pairs: Vec<_> = keys.iter().zip(responses).collect();
    evaluate(&pairs)
}

fn pct(x: f64) -> String {
    format!("{:6.2}", 100.0 * x)
}

fn prf_cells(p: &Prf) -> String {
    format!("{} {} {}", pct(p.recall), pct(p.precision), pct(p.f1))
}

fn table(output: &Output) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<8} {:^20}   {:^20}   {:^20}   {:^20}   {:>6}",
        "", "MUC", "B3", "CEAF-phi4", "LEA", "CoNLL"
    );
    let head = format!("{:>6} {:>6} {:>6}", "R", "P", "F1");
    let _ = writeln!(s, "{:<8} {head}   {head}   {head}   {head}   {:>6}", "", "F1");
    let mut row = |name: &str, r: &EvalReport| {
        let _ = writeln!(
            s,
            "{name:<8} {}   {}   {}   {}   {}",
            prf_cells(&r.muc),
            prf_cells(&r.b3),
            prf_cells(&r.ceaf_phi4),
            prf_cells(&r.lea),
            pct(r.conll_f1)
        );
    };
    row("pred", &output.report);
    if let Some(c) = &output.compare {
        row("compare", c);
    }
    if let Some(p) = output.p_value {
        let _ = writeln!(s, "\npermutation test p = {p:.4}");
    }
    if !output.report.per_category.is_empty() {
        let _ = writeln!(s, "\n{:<12} {:>6} {:>6} {:>6}", "category", "P", "R", "F1");
        for (t, p) in &output.report.per_category {
            let _ = writeln!(s, "{:<12} {} {} {}", t.as_str(), pct(p.precision), pct(p.recall), pct(p.f1));
        }
    }
    s
}

pub fn run(args: EvaluateArgs) -> Result<()> {
    let gold = read_documents(&args.gold, args.gold_format)?;
    let keys: Vec<Clustering> = gold.iter().map(Clustering::from_gold).collect();
    let pred = align(&gold, read_documents(&args.pred, InputFormat::Jsonl)?, &args.pred)?;
    let mut report = report_for(&keys, &pred);
    if let Some(path) = &args.model {
        let model = checkpoint::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
        report.per_category = pairwise_by_category(&gold, &model, args.pruned_only);
    }

    let (compare, p_value) = match &args.compare {
        Some(path) => {
            let other = align(&gold, read_documents(path, InputFormat::Jsonl)?, path)?;
            let f1 = |responses: &[Clustering]| -> Vec<f64> {
                keys.iter().zip(responses).map(|(k, r)| doc_conll_f1(k, r)).collect()
            };
            let p = permutation_test(&f1(&pred), &f1(&other), args.resamples, args.seed)?;
            (Some(report_for(&keys, &other)), Some(p))
        }
        None => (None, None),
    };
    let output = Output {
        report,
        compare,
        p_value,
    };
    let json = serde_json::to_string_pretty(&output)? + "\n";
    if let Some(path) = &args.out {
        std::fs::write(path, &json).with_context(|| format!("writing {}", path.display()))?;
    }
    if args.json {
        write_output(None, json.as_bytes())
    } else {
        write_output(None, table(&output).as_bytes())
    }
}
