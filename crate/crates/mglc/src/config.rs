//! Run configuration as a flat `key = value` text file. `#` starts a comment.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mglc_core::autodiff::AdamConfig;
use mglc_core::context::{GraphMode, WeightScheme};
use mglc_core::encoders::{ModelConfig, PropertyInit, Readout};
use mglc_core::fewshot::{Augment, EvalConfig, TrainConfig};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    /// Precomputed dictionary; built from the dataset molecules when absent.
    pub dictionary: Option<PathBuf>,
    pub top_k: usize,
    /// The last `test_properties` columns are held out for evaluation.
    pub test_properties: usize,
    pub k: usize,
    pub query_size: usize,
    pub mode: GraphMode,
    pub scheme: WeightScheme,
    pub readout: Readout,
    pub property_init: PropertyInit,
    pub hidden_dim: usize,
    pub global_layers: usize,
    pub inter_layer_transform: bool,
    pub head_hidden: usize,
    pub lr: f64,
    pub train_episodes: usize,
    /// Training-time task augmentation.
    pub shuffle_motifs: bool,
    /// Cosine learning-rate decay over the training episodes.
    pub lr_decay: bool,
    pub eval_episodes: usize,
    pub fine_tune_steps: usize,
    pub fine_tune_lr: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        Self {
            dataset: None,
            dictionary: None,
            top_k: 32,
            test_properties: 1,
            k: 10,
            query_size: 32,
            mode: model.mode,
            scheme: model.scheme,
            readout: model.readout,
            property_init: model.property_init,
            hidden_dim: model.hidden_dim,
            global_layers: model.global_layers,
            inter_layer_transform: model.inter_layer_transform,
            head_hidden: model.head_hidden,
            lr: 1e-2,
            train_episodes: 2000,
            shuffle_motifs: true,
            lr_decay: true,
            eval_episodes: 50,
            fine_tune_steps: 0,
            fine_tune_lr: 3e-2,
            seed: 0,
        }
    }
}

pub fn parse_mode(s: &str) -> Option<GraphMode> {
    [GraphMode::Bipartite, GraphMode::Tripartite].into_iter().find(|m| m.name() == s)
}

pub fn parse_scheme(s: &str) -> Option<WeightScheme> {
    [WeightScheme::UniformRow, WeightScheme::Symmetric, WeightScheme::RowNormalizedSymmetric]
        .into_iter()
        .find(|m| m.name() == s)
}

pub fn parse_readout(s: &str) -> Option<Readout> {
    [Readout::Subgraph, Readout::Node].into_iter().find(|m| m.name() == s)
}

pub fn parse_property_init(s: &str) -> Option<PropertyInit> {
    [PropertyInit::Table, PropertyInit::MaskedTarget, PropertyInit::RoleOnly].into_iter().find(|m| m.name() == s)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Usage(format!("invalid value {value:?} for {key}")))
}

fn parse_enum<T>(key: &str, value: &str, f: fn(&str) -> Option<T>) -> Result<T> {
    f(value).ok_or_else(|| Error::Usage(format!("invalid value {value:?} for {key}")))
}

impl RunConfig {
    /// Sets one field by its file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset" => self.dataset = Some(PathBuf::from(value)),
            "dictionary" => self.dictionary = Some(PathBuf::from(value)),
            "top_k" => self.top_k = parse_value(key, value)?,
            "test_properties" => self.test_properties = parse_value(key, value)?,
            "k" => self.k = parse_value(key, value)?,
            "query_size" => self.query_size = parse_value(key, value)?,
            "mode" => self.mode = parse_enum(key, value, parse_mode)?,
            "scheme" => self.scheme = parse_enum(key, value, parse_scheme)?,
            "readout" => self.readout = parse_enum(key, value, parse_readout)?,
            "property_init" => self.property_init = parse_enum(key, value, parse_property_init)?,
            "hidden_dim" => self.hidden_dim = parse_value(key, value)?,
            "global_layers" => self.global_layers = parse_value(key, value)?,
            "inter_layer_transform" => self.inter_layer_transform = parse_value(key, value)?,
            "head_hidden" => self.head_hidden = parse_value(key, value)?,
            "lr" => self.lr = parse_value(key, value)?,
            "train_episodes" => self.train_episodes = parse_value(key, value)?,
            "eval_episodes" => self.eval_episodes = parse_value(key, value)?,
            "fine_tune_steps" => self.fine_tune_steps = parse_value(key, value)?,
            "fine_tune_lr" => self.fine_tune_lr = parse_value(key, value)?,
            "shuffle_motifs" => self.shuffle_motifs = parse_value(key, value)?,
            "lr_decay" => self.lr_decay = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            _ => return Err(Error::Usage(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("config line {}: expected key = value", i + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Usage(format!("config line {}: duplicate key {key:?}", i + 1)));
            }
            cfg.set(key, value.trim()).map_err(|e| Error::Usage(format!("config line {}: {e}", i + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Episode counts and fine-tuning steps may be zero; every other count
    /// and both learning rates must be positive.
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("top_k", self.top_k),
            ("test_properties", self.test_properties),
            ("k", self.k),
            ("query_size", self.query_size),
            ("hidden_dim", self.hidden_dim),
            ("global_layers", self.global_layers),
            ("head_hidden", self.head_hidden),
            ("eval_episodes", self.eval_episodes),
        ];
        if let Some((key, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Usage(format!("{key} must be positive")));
        }
        for (key, v) in [("lr", self.lr), ("fine_tune_lr", self.fine_tune_lr)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Usage(format!("{key} must be a positive number")));
            }
        }
        Ok(())
    }

    /// Every field in file order; parsing the output yields `self` again.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| writeln!(out, "{k} = {v}").expect("writing to a String");
        if let Some(p) = &self.dataset {
            kv("dataset", &p.display());
        }
        if let Some(p) = &self.dictionary {
            kv("dictionary", &p.display());
        }
        kv("top_k", &self.top_k);
        kv("test_properties", &self.test_properties);
        kv("k", &self.k);
        kv("query_size", &self.query_size);
        kv("mode", &self.mode.name());
        kv("scheme", &self.scheme.name());
        kv("readout", &self.readout.name());
        kv("property_init", &self.property_init.name());
        kv("hidden_dim", &self.hidden_dim);
        kv("global_layers", &self.global_layers);
        kv("inter_layer_transform", &self.inter_layer_transform);
        kv("head_hidden", &self.head_hidden);
        kv("lr", &self.lr);
        kv("train_episodes", &self.train_episodes);
        kv("shuffle_motifs", &self.shuffle_motifs);
        kv("lr_decay", &self.lr_decay);
        kv("eval_episodes", &self.eval_episodes);
        kv("fine_tune_steps", &self.fine_tune_steps);
        kv("fine_tune_lr", &self.fine_tune_lr);
        kv("seed", &self.seed);
        out
    }

    /// SHA-256 of [`Self::to_text`], hex encoded.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_text().as_bytes()))
    }

    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            hidden_dim: self.hidden_dim,
            global_layers: self.global_layers,
            inter_layer_transform: self.inter_layer_transform,
            head_hidden: self.head_hidden,
            readout: self.readout,
            mode: self.mode,
            scheme: self.scheme,
            property_init: self.property_init,
        }
    }

    pub fn train(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            episodes: self.train_episodes,
            k: self.k,
            query_size: self.query_size,
            adam: AdamConfig { lr: self.lr, ..AdamConfig::default() },
            seed,
            augment: Augment { shuffle_motifs: self.shuffle_motifs },
            decay_steps: if self.lr_decay { self.train_episodes } else { 0 },
        }
    }

    pub fn eval(&self, seed: u64) -> EvalConfig {
        EvalConfig {
            episodes: self.eval_episodes,
            k: self.k,
            query_size: self.query_size,
            fine_tune_steps: self.fine_tune_steps,
            fine_tune: AdamConfig { lr: self.fine_tune_lr, ..AdamConfig::default() },
            seed,
        }
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_overrides_defaults() {
        let cfg = RunConfig::parse("# ablation\nmode = bipartite\nscheme=uniform_row # old\nreadout = node\nk = 5\n").unwrap();
        assert_eq!(cfg.mode, GraphMode::Bipartite);
        assert_eq!(cfg.scheme, WeightScheme::UniformRow);
        assert_eq!(cfg.readout, Readout::Node);
        assert_eq!(cfg.k, 5);
        assert_eq!(cfg.top_k, RunConfig::default().top_k);
    }

    #[test]
    fn rejects_bad_input() {
        for text in ["k = 0", "lr = -1", "mode = quadpartite", "nope = 1", "k = 2\nk = 3", "just words", "k = ten"] {
            let e = RunConfig::parse(text).unwrap_err();
            assert_eq!(e.exit_code(), 1, "{text}: {e}");
        }
        assert!(RunConfig::parse("train_episodes = 0\nfine_tune_steps = 0").is_ok());
    }

    proptest! {
        #[test]
        fn text_round_trips(k in 1usize..50, lr in 1e-6f64..1.0, seed in any::<u64>(), bi in any::<bool>()) {
            let cfg = RunConfig {
                k,
                lr,
                seed,
                mode: if bi { GraphMode::Bipartite } else { GraphMode::Tripartite },
                dataset: Some("data/x.csv".into()),
                ..RunConfig::default()
            };
            let back = RunConfig::parse(&cfg.to_text()).unwrap();
            prop_assert_eq!(&back, &cfg);
            prop_assert_eq!(back.hash(), cfg.hash());
        }
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let b = RunConfig { k: 5, ..RunConfig::default() };
        assert_eq!(a.hash().len(), 64);
        assert_ne!(a.hash(), b.hash());
    }
}
