//! Flat `key=value` experiment configuration with dotted section keys.
//!
//! ```text
//! # cora.cfg
//! data.name = cora
//! data.edges = cora.edges
//! data.features = cora.features
//! eba.r_m = 0.14
//! loss.tau = 0.5
//! ```
//!
//! Every key has a default; relative data paths resolve against `COEBA_DATA_DIR`
//! when it is set.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{Graph, SplitRatios};
use crate::trainer::TrainConfig;

pub const DATA_DIR_ENV: &str = "COEBA_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataConfig {
    pub name: String,
    pub edges: Option<PathBuf>,
    pub features: Option<PathBuf>,
}

impl DataConfig {
    /// Paths after resolving relative ones against `data_dir`.
    pub fn resolved(&self, data_dir: Option<&Path>) -> Result<(PathBuf, PathBuf)> {
        let resolve = |key: &str, p: &Option<PathBuf>| -> Result<PathBuf> {
            let p = p.as_ref().ok_or_else(|| Error::Config(format!("{key} is not set")))?;
            Ok(match data_dir {
                Some(root) if p.is_relative() => root.join(p),
                _ => p.clone(),
            })
        };
        Ok((
            resolve("data.edges", &self.edges)?,
            resolve("data.features", &self.features)?,
        ))
    }

    pub fn load(&self) -> Result<Graph> {
        let env = std::env::var_os(DATA_DIR_ENV).map(PathBuf::from);
        let (edges, features) = self.resolved(env.as_deref())?;
        Graph::load(edges, features)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub train: TrainConfig,
}

/// Every recognised key, in the order `to_text` writes them.
pub const KEYS: &[&str] = &[
    "data.name",
    "data.edges",
    "data.features",
    "train.lr",
    "train.weight_decay",
    "train.decoupled_weight_decay",
    "train.epochs",
    "train.seed",
    "train.num_splits",
    "train.split",
    "train.eval_every",
    "train.early_stop_patience",
    "train.warmup_recon_only",
    "train.workers",
    "eba.enabled",
    "eba.r_m",
    "eba.r_a",
    "eba.p_f",
    "eba.period",
    "eba.warmup_epochs",
    "loss.lambda1",
    "loss.lambda2",
    "loss.lambda3",
    "loss.btn_weight",
    "loss.tau",
    "loss.recon_mode",
    "model.backbone",
    "model.hidden_dim",
    "model.out_dim",
    "model.dropout",
    "model.appnp_steps",
    "model.appnp_teleport",
    "model.norm_scale",
    "eval.k",
    "eval.cluster_k",
    "eval.distance_sample",
    "eval.diagnostics",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got `{value}`"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let t = &mut self.train;
        match key.trim() {
            "data.name" => self.data.name = value.to_string(),
            "data.edges" => self.data.edges = Some(PathBuf::from(value)),
            "data.features" => self.data.features = Some(PathBuf::from(value)),
            "train.lr" => t.optimizer.lr = parse(key, value)?,
            "train.weight_decay" => t.optimizer.weight_decay = parse(key, value)?,
            "train.decoupled_weight_decay" => t.optimizer.decoupled = parse_bool(key, value)?,
            "train.epochs" => t.epochs = parse(key, value)?,
            "train.seed" => t.seed = parse(key, value)?,
            "train.num_splits" => t.num_splits = parse(key, value)?,
            "train.split" => {
                let r: Vec<f64> = parse_list(key, value)?;
                let [train, valid, test] = r[..] else {
                    return Err(Error::Config(format!("{key}: expected three fractions, got `{value}`")));
                };
                t.split = SplitRatios { train, valid, test };
            }
            "train.eval_every" => t.eval_every = parse(key, value)?,
            "train.early_stop_patience" => {
                t.early_stop_patience = match value {
                    "" | "none" | "off" | "0" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "train.warmup_recon_only" => t.warmup_recon_only = parse_bool(key, value)?,
            "train.workers" => t.workers = parse(key, value)?,
            "eba.enabled" => t.eba.enabled = parse_bool(key, value)?,
            "eba.r_m" => t.eba.r_m = parse(key, value)?,
            "eba.r_a" => t.eba.r_a = parse(key, value)?,
            "eba.p_f" => t.eba.p_f = parse(key, value)?,
            "eba.period" => t.eba.period = parse(key, value)?,
            "eba.warmup_epochs" => t.eba.warmup_epochs = parse(key, value)?,
            "loss.lambda1" => t.loss.lambda1 = parse(key, value)?,
            "loss.lambda2" => t.loss.lambda2 = parse(key, value)?,
            "loss.lambda3" => t.loss.lambda3 = parse(key, value)?,
            "loss.btn_weight" => t.loss.btn_weight = parse(key, value)?,
            "loss.tau" => t.loss.tau = parse(key, value)?,
            "loss.recon_mode" => t.loss.recon_mode = value.parse()?,
            "model.backbone" => t.encoder.backbone = value.parse()?,
            "model.hidden_dim" => t.encoder.hidden_dim = parse(key, value)?,
            "model.out_dim" => t.encoder.out_dim = parse(key, value)?,
            "model.dropout" => t.encoder.dropout = parse(key, value)?,
            "model.appnp_steps" => t.encoder.appnp_steps = parse(key, value)?,
            "model.appnp_teleport" => t.encoder.appnp_teleport = parse(key, value)?,
            "model.norm_scale" => t.encoder.norm_scale = parse(key, value)?,
            "eval.k" => t.eval.ks = parse_list(key, value)?,
            "eval.cluster_k" => t.eval.cluster_k = parse(key, value)?,
            "eval.distance_sample" => t.eval.distance_sample = parse(key, value)?,
            "eval.diagnostics" => t.eval.diagnostics = parse_bool(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let t = &self.train;
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        Some(match key {
            "data.name" => self.data.name.clone(),
            "data.edges" => path(&self.data.edges),
            "data.features" => path(&self.data.features),
            "train.lr" => t.optimizer.lr.to_string(),
            "train.weight_decay" => t.optimizer.weight_decay.to_string(),
            "train.decoupled_weight_decay" => t.optimizer.decoupled.to_string(),
            "train.epochs" => t.epochs.to_string(),
            "train.seed" => t.seed.to_string(),
            "train.num_splits" => t.num_splits.to_string(),
            "train.split" => join(&[t.split.train, t.split.valid, t.split.test]),
            "train.eval_every" => t.eval_every.to_string(),
            "train.early_stop_patience" => t.early_stop_patience.map_or("none".into(), |p| p.to_string()),
            "train.warmup_recon_only" => t.warmup_recon_only.to_string(),
            "train.workers" => t.workers.to_string(),
            "eba.enabled" => t.eba.enabled.to_string(),
            "eba.r_m" => t.eba.r_m.to_string(),
            "eba.r_a" => t.eba.r_a.to_string(),
            "eba.p_f" => t.eba.p_f.to_string(),
            "eba.period" => t.eba.period.to_string(),
            "eba.warmup_epochs" => t.eba.warmup_epochs.to_string(),
            "loss.lambda1" => t.loss.lambda1.to_string(),
            "loss.lambda2" => t.loss.lambda2.to_string(),
            "loss.lambda3" => t.loss.lambda3.to_string(),
            "loss.btn_weight" => t.loss.btn_weight.to_string(),
            "loss.tau" => t.loss.tau.to_string(),
            "loss.recon_mode" => t.loss.recon_mode.to_string(),
            "model.backbone" => t.encoder.backbone.to_string(),
            "model.hidden_dim" => t.encoder.hidden_dim.to_string(),
            "model.out_dim" => t.encoder.out_dim.to_string(),
            "model.dropout" => t.encoder.dropout.to_string(),
            "model.appnp_steps" => t.encoder.appnp_steps.to_string(),
            "model.appnp_teleport" => t.encoder.appnp_teleport.to_string(),
            "model.norm_scale" => t.encoder.norm_scale.to_string(),
            "eval.k" => join(&t.eval.ks),
            "eval.cluster_k" => t.eval.cluster_k.to_string(),
            "eval.distance_sample" => t.eval.distance_sample.to_string(),
            "eval.diagnostics" => t.eval.diagnostics.to_string(),
            _ => return None,
        })
    }

    /// Parses a configuration document on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got `{line}`", i + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", i + 1)));
            }
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, strip_prefix(&e))))?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), strip_prefix(&e))))
    }

    /// The full configuration, one `key = value` line per key.
    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{k} = {}\n", self.get(k).unwrap_or_default()))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()
    }
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Config(msg) => msg.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Backbone;

    #[test]
    fn defaults_match_the_published_settings() {
        let t = ExperimentConfig::default().train;
        assert_eq!(t.optimizer.lr, 0.001);
        assert_eq!(t.optimizer.weight_decay, 5e-4);
        assert_eq!(t.epochs, 1000);
        assert_eq!((t.loss.lambda1, t.loss.lambda2, t.loss.lambda3), (3.0, 1.0, 3.0));
        assert_eq!((t.eba.r_m, t.eba.r_a, t.eba.warmup_epochs), (0.14, 0.40, 200));
        assert_eq!(t.encoder.hidden_dim, 256);
        assert_eq!(t.encoder.dropout, 0.3);
        assert_eq!(t.num_splits, 10);
        assert_eq!((t.split.train, t.split.valid, t.split.test), (0.85, 0.05, 0.10));
    }

    #[test]
    fn parses_dotted_keys_and_comments() {
        let cfg = ExperimentConfig::parse(
            "# comment\n\ndata.name = cora\ndata.edges=cora.edges\neba.r_m = 0.2\nloss.tau=0.7\n\
             model.backbone = gae\ntrain.split = 0.8, 0.1, 0.1\neval.k = 10,50\ntrain.early_stop_patience = 50\n",
        )
        .unwrap();
        assert_eq!(cfg.data.name, "cora");
        assert_eq!(cfg.train.eba.r_m, 0.2);
        assert_eq!(cfg.train.loss.tau, 0.7);
        assert_eq!(cfg.train.encoder.backbone, Backbone::Gae);
        assert_eq!(cfg.train.split.valid, 0.1);
        assert_eq!(cfg.train.eval.ks, vec![10, 50]);
        assert_eq!(cfg.train.early_stop_patience, Some(50));
    }

    #[test]
    fn text_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("data.features", "x/feat.txt").unwrap();
        cfg.set("loss.recon_mode", "sampled").unwrap();
        cfg.set("train.decoupled_weight_decay", "true").unwrap();
        cfg.set("eba.p_f", "0.25").unwrap();
        let again = ExperimentConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(again.train, cfg.train);
        assert_eq!(again.data.features, cfg.data.features);
        assert_eq!(cfg.to_text().lines().count(), KEYS.len());
    }

    #[test]
    fn errors_name_the_line() {
        for (text, needle) in [
            ("eba.r_m = 0.1\nbogus.key = 1\n", "line 2"),
            ("eba.r_m = abc\n", "eba.r_m"),
            ("just text\n", "key=value"),
            ("loss.tau=1\nloss.tau=2\n", "duplicate"),
            ("model.backbone = gcn\n", "backbone"),
            ("train.split = 0.5,0.5\n", "three"),
        ] {
            match ExperimentConfig::parse(text) {
                Err(Error::Config(msg)) => assert!(msg.contains(needle), "{msg}"),
                other => panic!("expected config error for {text:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn relative_paths_use_the_data_dir() {
        let mut data = DataConfig::default();
        assert!(data.resolved(None).is_err());
        data.edges = Some("cora.edges".into());
        data.features = Some("/abs/cora.features".into());
        let (e, f) = data.resolved(Some(Path::new("/data"))).unwrap();
        assert_eq!(e, PathBuf::from("/data/cora.edges"));
        assert_eq!(f, PathBuf::from("/abs/cora.features"));
        let (e, _) = data.resolved(None).unwrap();
        assert_eq!(e, PathBuf::from("cora.edges"));
    }
}
