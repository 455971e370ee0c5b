//! Seeded train / evaluate runs over a loaded dataset.

use std::time::Instant;

use mglc_core::autodiff::{Adam, ParameterStore, Tape};
use mglc_core::context::{build_context_graph, compute_weights, ContextGraph, MotifIndex, NodeKind};
use mglc_core::encoders::{EpisodeForward, Model};
use mglc_core::fewshot::{
    evaluate_episode, generate_synthetic, sample_episode, train, EvalConfig, EvalReport, Episode, Phase,
    PropertyDataset, SeedReport, SyntheticConfig, TaskSplit, TrainError,
};
use mglc_core::motif::{build_dictionary, MotifDictionary};
use mglc_core::rng::{derive_seed, substream};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};

/// A dataset with its property split and motif index.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: PropertyDataset,
    pub split: TaskSplit,
    pub dictionary: MotifDictionary,
    pub motifs: MotifIndex,
}

impl Prepared {
    /// Holds out the last `cfg.test_properties` columns and, without a given
    /// dictionary, builds the top-`cfg.top_k` one from the dataset molecules.
    pub fn new(dataset: PropertyDataset, cfg: &RunConfig, dictionary: Option<MotifDictionary>) -> Result<Self> {
        let p = dataset.property_count();
        if cfg.test_properties >= p {
            return Err(Error::Data(format!(
                "{} test properties leave no training property among {p}",
                cfg.test_properties
            )));
        }
        let split = TaskSplit::last(p, cfg.test_properties).map_err(|e| Error::Data(e.to_string()))?;
        let dictionary = match dictionary {
            Some(d) => d,
            None => build_dictionary(dataset.molecules(), cfg.top_k).map_err(|e| Error::Data(e.to_string()))?,
        };
        let motifs = MotifIndex::build(&dataset, &dictionary).map_err(|e| Error::Data(e.to_string()))?;
        Ok(Self { dataset, split, dictionary, motifs })
    }

    /// The synthetic benchmark generated for `seed`.
    pub fn synthetic(seed: u64, label_dropout: f64, cfg: &RunConfig) -> Result<Self> {
        let (sc, rules) = SyntheticConfig::benchmark(label_dropout);
        let ds = generate_synthetic(&sc, &rules, seed).map_err(|e| Error::Data(e.to_string()))?;
        Self::new(ds, cfg, None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub episode: usize,
    pub loss: f64,
    /// Milliseconds since training started.
    pub wall_ms: u128,
}

#[derive(Debug, Clone)]
pub struct TrainedSeed {
    pub seed: u64,
    pub model: Model,
    pub store: ParameterStore,
    pub adam: Adam,
    pub log: Vec<LogRow>,
}

/// Fresh model for `seed`; parameters come from the `"init"` substream.
pub fn init_model(p: &Prepared, cfg: &RunConfig, seed: u64) -> Result<(Model, ParameterStore, Adam)> {
    let (model, store) =
        Model::new(cfg.model(), p.dataset.property_count(), p.dictionary.len(), derive_seed(seed, "init"))
            .map_err(|e| Error::Usage(e.to_string()))?;
    let adam = Adam::new(cfg.train(seed).adam, &store);
    Ok((model, store, adam))
}

pub fn train_seed(p: &Prepared, cfg: &RunConfig, seed: u64) -> Result<TrainedSeed> {
    let (model, mut store, mut adam) = init_model(p, cfg, seed)?;
    let log = continue_training(&model, &mut store, &mut adam, p, cfg, seed)?;
    Ok(TrainedSeed { seed, model, store, adam, log })
}

/// Runs `cfg.train_episodes` more episodes from the optimizer's current step.
pub fn continue_training(
    model: &Model,
    store: &mut ParameterStore,
    adam: &mut Adam,
    p: &Prepared,
    cfg: &RunConfig,
    seed: u64,
) -> Result<Vec<LogRow>> {
    let start = Instant::now();
    let mut log = Vec::with_capacity(cfg.train_episodes);
    train(model, store, adam, &p.dataset, &p.split, &p.motifs, &cfg.train(seed), |episode, loss| {
        log.push(LogRow { episode, loss, wall_ms: start.elapsed().as_millis() });
    })?;
    Ok(log)
}

/// Scores the test episodes in parallel over a shared, read-only store. The
/// result does not depend on the thread count.
pub fn evaluate_parallel(
    model: &Model,
    store: &ParameterStore,
    p: &Prepared,
    config: &EvalConfig,
) -> Result<SeedReport> {
    p.split.assert_disjoint();
    let episodes = (0..config.episodes)
        .into_par_iter()
        .map(|i| evaluate_episode(model, store, &p.dataset, &p.split, &p.motifs, config, i))
        .collect::<Result<Vec<_>, TrainError>>()?;
    Ok(SeedReport::new(config.seed, episodes))
}

/// Trains and evaluates every seed on datasets from `prepare(seed)`.
pub fn run_seeds(
    seeds: &[u64],
    cfg: &RunConfig,
    mut prepare: impl FnMut(u64) -> Result<Prepared>,
) -> Result<(Vec<TrainedSeed>, EvalReport)> {
    let mut trained = Vec::new();
    let mut reports = Vec::new();
    for &seed in seeds {
        let p = prepare(seed)?;
        let t = train_seed(&p, cfg, seed)?;
        reports.push(evaluate_parallel(&t.model, &t.store, &p, &cfg.eval(seed))?);
        trained.push(t);
    }
    Ok((trained, EvalReport::from_seeds(reports)))
}

/// The first test episode of `seed`, as used by the stats and embedding
/// exports.
pub fn representative_episode(p: &Prepared, k: usize, query_size: usize, seed: u64) -> Result<Episode> {
    let mut rng = substream(seed, "representative");
    sample_episode(&p.dataset, &p.split, Phase::Test, k, query_size, &mut rng).map_err(|e| Error::Data(e.to_string()))
}

pub fn episode_graph(p: &Prepared, episode: &Episode, cfg: &RunConfig) -> Result<ContextGraph> {
    build_context_graph(&p.dataset, episode, &p.motifs, cfg.mode).map_err(|e| Error::Data(e.to_string()))
}

/// Runs the model on one episode and keeps the tape for inspection.
pub fn forward_episode(
    model: &Model,
    store: &ParameterStore,
    p: &Prepared,
    g: &ContextGraph,
) -> Result<(Tape, EpisodeForward)> {
    let weights = compute_weights(g, model.config().scheme).map_err(|e| Error::Data(e.to_string()))?;
    let molecules: Vec<_> = g.sources(NodeKind::Molecule).iter().map(|&m| p.dataset.molecule(m)).collect();
    let scored: Vec<usize> = g.query_molecules().collect();
    let mut tape = Tape::new();
    let fwd = model
        .forward(&mut tape, store, g, &weights, &molecules, &scored)
        .map_err(TrainError::from)?;
    Ok((tape, fwd))
}
