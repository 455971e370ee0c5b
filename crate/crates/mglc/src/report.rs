//! JSON form of an evaluation report.

use mglc_core::fewshot::{EvalReport, PropertyDataset};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeJson {
    pub index: usize,
    pub target: String,
    pub auc: Option<f64>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedJson {
    pub seed: u64,
    pub mean_auc: Option<f64>,
    pub skipped: usize,
    pub episodes: Vec<EpisodeJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportJson {
    pub config_hash: String,
    /// Mean of the per-seed mean AUCs; `null` when no episode was scored.
    pub mean_auc: Option<f64>,
    /// Sample standard deviation across seeds.
    pub std_auc: Option<f64>,
    pub seeds: Vec<SeedJson>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl ReportJson {
    pub fn new(report: &EvalReport, properties: &[String], config_hash: &str) -> Self {
        Self {
            config_hash: config_hash.to_string(),
            mean_auc: finite(report.mean),
            std_auc: finite(report.std),
            seeds: report
                .seeds
                .iter()
                .map(|s| SeedJson {
                    seed: s.seed,
                    mean_auc: s.mean_auc,
                    skipped: s.skipped(),
                    episodes: s
                        .episodes
                        .iter()
                        .map(|e| EpisodeJson {
                            index: e.index,
                            target: properties[e.target].clone(),
                            auc: e.auc,
                            skipped: e.skipped.clone(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_dataset(report: &EvalReport, ds: &PropertyDataset, config_hash: &str) -> Self {
        Self::new(report, ds.properties(), config_hash)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
