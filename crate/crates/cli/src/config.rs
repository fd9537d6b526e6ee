//! TrainConfig resolution: defaults, then the config file, then flags.

use std::path::Path;

use anyhow::{Context, Result};
use clap::Args;
use lingmess_core::{LossMode, RoutingMode, TrainConfig};
use serde_json::{Map, Value};

/// One flag per config key; unset flags leave the file value alone.
#[derive(Args, Debug, Default)]
pub struct ConfigFlags {
    #[arg(long)]
    pub top_lambda: Option<f64>,
    #[arg(long)]
    pub max_span_width: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub adam_beta1: Option<f64>,
    #[arg(long)]
    pub adam_beta2: Option<f64>,
    #[arg(long)]
    pub adam_eps: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub token_budget_train: Option<usize>,
    #[arg(long)]
    pub token_budget_eval: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub d_emb: Option<usize>,
    #[arg(long)]
    pub d_enc: Option<usize>,
    #[arg(long)]
    pub d_hidden: Option<usize>,
    #[arg(long)]
    pub min_count: Option<usize>,
    /// linguistic, random, shared_only or experts_only
    #[arg(long)]
    pub routing_mode: Option<RoutingMode>,
    /// full or coref_only
    #[arg(long)]
    pub loss_mode: Option<LossMode>,
}

impl ConfigFlags {
    fn overrides(&self) -> Result<Map<String, Value>> {
        let mut map = Map::new();
        let mut set = |key: &str, value: Option<Value>| {
            if let Some(v) = value {
                map.insert(key.to_string(), v);
            }
        };
        set("top_lambda", self.top_lambda.map(Value::from));
        set("max_span_width", self.max_span_width.map(Value::from));
        set("learning_rate", self.learning_rate.map(Value::from));
        set("adam_beta1", self.adam_beta1.map(Value::from));
        set("adam_beta2", self.adam_beta2.map(Value::from));
        set("adam_eps", self.adam_eps.map(Value::from));
        set("epochs", self.epochs.map(Value::from));
        set("token_budget_train", self.token_budget_train.map(Value::from));
        set("token_budget_eval", self.token_budget_eval.map(Value::from));
        set("seed", self.seed.map(Value::from));
        set("d_emb", self.d_emb.map(Value::from));
        set("d_enc", self.d_enc.map(Value::from));
        set("d_hidden", self.d_hidden.map(Value::from));
        set("min_count", self.min_count.map(Value::from));
        set("routing_mode", self.routing_mode.map(serde_json::to_value).transpose()?);
        set("loss_mode", self.loss_mode.map(serde_json::to_value).transpose()?);
        Ok(map)
    }
}

pub fn resolve(path: Option<&Path>, flags: &ConfigFlags) -> Result<TrainConfig> {
    let base = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            TrainConfig::parse(&text).with_context(|| format!("config {}", p.display()))?
        }
        None => TrainConfig::default(),
    };
    let config = base.with_overrides(flags.overrides()?)?;
    config.validate()?;
    Ok(config)
}
