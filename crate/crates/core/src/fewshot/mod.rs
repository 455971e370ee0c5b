//! Datasets, 2-way K-shot episodes, training, evaluation and ROC-AUC.

mod dataset;
mod episode;
mod metrics;
mod synthetic;
mod train;

pub use dataset::{DatasetError, PropertyDataset, TaskSplit};
pub use episode::{auxiliary_properties, sample_episode, sample_episode_for, Episode, EpisodeError, Phase};
pub use metrics::{roc_auc, AucError};
pub use synthetic::{contains_substructure, generate_synthetic, MotifRule, SyntheticConfig, SyntheticError};
pub use train::{
    episode_seed, evaluate, run_graph, evaluate_episode, fine_tune, mean_std, query_scores, run_episode, train, train_step,
    Augment, EpisodePass, EpisodeResult, EvalConfig, EvalReport, SeedReport, TrainConfig, TrainError, TrainLog,
};
