use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use lingmess_core::{parse_conll2012, parse_jsonl, Document};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    /// CoNLL-2012 for `.conll` / `*_conll` files, JSONL otherwise.
    Auto,
    Jsonl,
    Conll,
}

fn looks_like_conll(path: &Path) -> bool {
    path.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.ends_with(".conll") || n.ends_with("_conll"))
}

pub fn read_documents(path: &Path, format: InputFormat) -> Result<Vec<Document>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let reader = BufReader::new(file);
    let conll = match format {
        InputFormat::Auto => looks_like_conll(path),
        InputFormat::Jsonl => false,
        InputFormat::Conll => true,
    };
    let docs = if conll {
        parse_conll2012(reader)
    } else {
        parse_jsonl(reader)
    };
    docs.with_context(|| format!("parsing {}", path.display()))
}

pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

/// Worker count from `LINGMESS_THREADS`; unset or 0 means serial.
pub fn threads() -> Result<usize> {
    match std::env::var("LINGMESS_THREADS") {
        Ok(v) if !v.trim().is_empty() => {
            let n: usize = v
                .trim()
                .parse()
                .with_context(|| format!("LINGMESS_THREADS must be a non-negative integer, got `{v}`"))?;
            Ok(n.max(1))
        }
        _ => Ok(1),
    }
}
