use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;

use super::dataset::{PropertyDataset, TaskSplit};
use super::episode::{sample_episode, Episode, EpisodeError, Phase};
use super::metrics::{roc_auc, AucError};
use crate::autodiff::{Adam, AdamConfig, AutodiffError, ParameterStore, Tape};
use crate::context::{build_context_graph, compute_weights, ContextError, ContextGraph, MotifIndex, NodeKind};
use crate::encoders::{EncoderError, EpisodeForward, Model};
use crate::rng::{child_seed, derive_seed, Rng};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Auc(#[from] AucError),
}

impl TrainError {
    /// Non-finite values or gradients, as opposed to bad input data.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            TrainError::Autodiff(AutodiffError::NonFinite { .. } | AutodiffError::NonFiniteGradient(_))
                | TrainError::Encoder(EncoderError::Autodiff(
                    AutodiffError::NonFinite { .. } | AutodiffError::NonFiniteGradient(_)
                ))
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub episodes: usize,
    /// Support examples per class.
    pub k: usize,
    pub query_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub augment: Augment,
    /// Cosine decay of the learning rate down to `MIN_LR_FACTOR` of its base
    /// value at this optimizer step; 0 keeps it constant.
    pub decay_steps: usize,
}

pub const MIN_LR_FACTOR: f64 = 0.05;

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            k: 10,
            query_size: 32,
            adam: AdamConfig { lr: 1e-2, ..AdamConfig::default() },
            seed: 0,
            augment: Augment::default(),
            decay_steps: 2000,
        }
    }
}

/// Per-episode task augmentation during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Augment {
    /// Give the episode's motif nodes a random permutation of the motif
    /// table rows, so motif identity cannot be memorised per property and
    /// has to be read from the support labels in the graph.
    pub shuffle_motifs: bool,
}

impl Default for Augment {
    fn default() -> Self {
        Self { shuffle_motifs: true }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    /// Mean query BCE per episode.
    pub losses: Vec<f64>,
}

/// Everything recorded for one episode's forward pass.
#[derive(Debug)]
pub struct EpisodePass {
    pub graph: ContextGraph,
    pub tape: Tape,
    pub forward: EpisodeForward,
    /// Target labels of the scored (query) molecules.
    pub labels: Vec<bool>,
}

/// Builds the episode's context graph and runs the model on its queries.
pub fn run_episode(
    model: &Model,
    store: &ParameterStore,
    ds: &PropertyDataset,
    motifs: &MotifIndex,
    episode: &Episode,
) -> Result<EpisodePass, TrainError> {
    let graph = build_context_graph(ds, episode, motifs, model.config().mode)?;
    run_graph(model, store, ds, graph, episode.query_labels(ds))
}

/// Runs the model on the query molecules of an already built graph.
pub fn run_graph(
    model: &Model,
    store: &ParameterStore,
    ds: &PropertyDataset,
    graph: ContextGraph,
    labels: Vec<bool>,
) -> Result<EpisodePass, TrainError> {
    let weights = compute_weights(&graph, model.config().scheme)?;
    let molecules: Vec<_> = graph.sources(NodeKind::Molecule).iter().map(|&m| ds.molecule(m)).collect();
    let scored: Vec<usize> = graph.query_molecules().collect();
    let mut tape = Tape::new();
    let forward = model.forward(&mut tape, store, &graph, &weights, &molecules, &scored)?;
    Ok(EpisodePass { graph, tape, forward, labels })
}

fn targets(labels: &[bool]) -> Vec<f64> {
    labels.iter().map(|&y| f64::from(u8::from(y))).collect()
}

/// One optimizer step on the query loss of `episode`; returns the loss.
pub fn train_step(
    model: &Model,
    store: &mut ParameterStore,
    adam: &mut Adam,
    ds: &PropertyDataset,
    motifs: &MotifIndex,
    episode: &Episode,
) -> Result<f64, TrainError> {
    let pass = run_episode(model, store, ds, motifs, episode)?;
    optimize(store, adam, pass)
}

fn optimize(store: &mut ParameterStore, adam: &mut Adam, mut pass: EpisodePass) -> Result<f64, TrainError> {
    let loss = pass.tape.bce_with_logits(pass.forward.logits, &targets(&pass.labels))?;
    let value = pass.tape.value(loss).item();
    store.zero_grad();
    pass.tape.backward(loss, store)?;
    adam.step(store)?;
    Ok(value)
}

/// Seed of the `index`-th episode of the named stream.
pub fn episode_seed(root: u64, stream: &str, index: u64) -> u64 {
    child_seed(derive_seed(root, stream), index)
}

/// Learning-rate multiplier at optimizer step `step` (0-based).
pub fn lr_factor(step: u64, decay_steps: usize) -> f64 {
    if decay_steps == 0 {
        return 1.0;
    }
    let progress = (step as f64 / decay_steps as f64).min(1.0);
    let cosine = 0.5 * (1.0 + libm::cos(core::f64::consts::PI * progress));
    MIN_LR_FACTOR + (1.0 - MIN_LR_FACTOR) * cosine
}

/// Plain episodic training over train-phase properties.
///
/// Episode `i` is drawn from its own seed, offset by the optimizer's step
/// count, so resuming from a checkpoint continues the same sequence.
/// `on_episode(index, loss)` runs after every step.
#[allow(clippy::too_many_arguments)]
pub fn train(
    model: &Model,
    store: &mut ParameterStore,
    adam: &mut Adam,
    ds: &PropertyDataset,
    split: &TaskSplit,
    motifs: &MotifIndex,
    config: &TrainConfig,
    mut on_episode: impl FnMut(usize, f64),
) -> Result<TrainLog, TrainError> {
    split.assert_disjoint();
    let start = adam.steps();
    let mut log = TrainLog::default();
    for i in 0..config.episodes {
        let index = start + i as u64;
        let mut rng = Rng::seed_from_u64(episode_seed(config.seed, "sampling", index));
        let episode = sample_episode(ds, split, Phase::Train, config.k, config.query_size, &mut rng)?;
        let mut graph = build_context_graph(ds, &episode, motifs, model.config().mode)?;
        let labels = episode.query_labels(ds);
        if config.augment.shuffle_motifs {
            let mut map: Vec<usize> = (0..motifs.dictionary_len()).collect();
            map.shuffle(&mut rng);
            graph = graph.with_motifs_remapped(&map);
        }
        let pass = run_graph(model, store, ds, graph, labels)?;
        adam.config.lr = config.adam.lr * lr_factor(index, config.decay_steps);
        let loss = optimize(store, adam, pass)?;
        log.losses.push(loss);
        on_episode(index as usize, loss);
    }
    Ok(log)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub episodes: usize,
    pub k: usize,
    pub query_size: usize,
    /// Gradient steps on the support set before scoring; 0 disables.
    pub fine_tune_steps: usize,
    pub fine_tune: AdamConfig,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { episodes: 50, k: 10, query_size: 32, fine_tune_steps: 0, fine_tune: AdamConfig::default(), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub index: usize,
    pub target: usize,
    /// `None` when the episode was skipped.
    pub auc: Option<f64>,
    pub skipped: Option<String>,
}

/// Splits the support into two class-balanced halves and trains with one
/// half as support and the other as query, swapping roles every step. Real
/// query labels are never used.
pub fn fine_tune(
    model: &Model,
    store: &mut ParameterStore,
    ds: &PropertyDataset,
    motifs: &MotifIndex,
    episode: &Episode,
    steps: usize,
    config: AdamConfig,
) -> Result<(), TrainError> {
    let k = episode.support.len() / 2;
    if steps == 0 || k < 2 {
        return Ok(());
    }
    let half = k / 2;
    let (pos, neg) = episode.support.split_at(k);
    let halves = |first: bool| -> Vec<usize> {
        let pick = |xs: &[usize]| if first { xs[..half].to_vec() } else { xs[half..].to_vec() };
        pick(pos).into_iter().chain(pick(neg)).collect()
    };
    let pseudo = [true, false].map(|first| Episode {
        target: episode.target,
        auxiliary: episode.auxiliary.clone(),
        support: halves(first),
        query: halves(!first),
    });
    let mut adam = Adam::new(config, store);
    for step in 0..steps {
        train_step(model, store, &mut adam, ds, motifs, &pseudo[step % 2])?;
    }
    Ok(())
}

/// Samples and scores test episode `index`. Depends only on the arguments,
/// so episodes can be evaluated in any order or in parallel.
pub fn evaluate_episode(
    model: &Model,
    store: &ParameterStore,
    ds: &PropertyDataset,
    split: &TaskSplit,
    motifs: &MotifIndex,
    config: &EvalConfig,
    index: usize,
) -> Result<EpisodeResult, TrainError> {
    let mut rng = Rng::seed_from_u64(episode_seed(config.seed, "eval", index as u64));
    let episode = sample_episode(ds, split, Phase::Test, config.k, config.query_size, &mut rng)?;
    let scores = if config.fine_tune_steps > 0 {
        let mut tuned = store.clone();
        fine_tune(model, &mut tuned, ds, motifs, &episode, config.fine_tune_steps, config.fine_tune)?;
        query_scores(model, &tuned, ds, motifs, &episode)?
    } else {
        query_scores(model, store, ds, motifs, &episode)?
    };
    let labels = episode.query_labels(ds);
    let (auc, skipped) = match roc_auc(&scores, &labels) {
        Ok(a) => (Some(a), None),
        Err(e @ AucError::SingleClass { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    Ok(EpisodeResult { index, target: episode.target, auc, skipped })
}

/// Query logits of an episode (column order = `episode.query`).
pub fn query_scores(
    model: &Model,
    store: &ParameterStore,
    ds: &PropertyDataset,
    motifs: &MotifIndex,
    episode: &Episode,
) -> Result<Vec<f64>, TrainError> {
    let pass = run_episode(model, store, ds, motifs, episode)?;
    Ok(pass.tape.value(pass.forward.logits).data().to_vec())
}

/// Results of one seed's evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedReport {
    pub seed: u64,
    pub episodes: Vec<EpisodeResult>,
    /// Mean AUC over scored episodes; `None` if all were skipped.
    pub mean_auc: Option<f64>,
}

impl SeedReport {
    pub fn new(seed: u64, episodes: Vec<EpisodeResult>) -> Self {
        let aucs: Vec<f64> = episodes.iter().filter_map(|e| e.auc).collect();
        let mean_auc = (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64);
        Self { seed, episodes, mean_auc }
    }

    pub fn skipped(&self) -> usize {
        self.episodes.iter().filter(|e| e.auc.is_none()).count()
    }
}

/// Per-seed reports plus mean and sample standard deviation of the per-seed
/// mean AUCs.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub seeds: Vec<SeedReport>,
    pub mean: f64,
    pub std: f64,
}

impl EvalReport {
    pub fn from_seeds(seeds: Vec<SeedReport>) -> Self {
        let means: Vec<f64> = seeds.iter().filter_map(|s| s.mean_auc).collect();
        let (mean, std) = mean_std(&means);
        Self { seeds, mean, std }
    }
}

/// Mean and sample (n - 1) standard deviation; NaN mean for no values and
/// zero spread for one.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var))
}

/// Sequential evaluation of `config.episodes` test episodes.
pub fn evaluate(
    model: &Model,
    store: &ParameterStore,
    ds: &PropertyDataset,
    split: &TaskSplit,
    motifs: &MotifIndex,
    config: &EvalConfig,
) -> Result<SeedReport, TrainError> {
    split.assert_disjoint();
    let episodes = (0..config.episodes)
        .map(|i| evaluate_episode(model, store, ds, split, motifs, config, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SeedReport::new(config.seed, episodes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::ModelConfig;
    use crate::fewshot::synthetic::{generate_synthetic, SyntheticConfig};
    use crate::motif::build_dictionary;
    use alloc::vec;

    struct Setup {
        ds: PropertyDataset,
        split: TaskSplit,
        motifs: MotifIndex,
        model: Model,
        store: ParameterStore,
    }

    fn setup() -> Setup {
        let (mut config, rules) = SyntheticConfig::benchmark(0.0);
        config.n_molecules = 120;
        let ds = generate_synthetic(&config, &rules, 4).unwrap();
        let split = TaskSplit::last(ds.property_count(), 1).unwrap();
        let dict = build_dictionary(ds.molecules(), 16).unwrap();
        let motifs = MotifIndex::build(&ds, &dict).unwrap();
        let config = ModelConfig { hidden_dim: 8, head_hidden: 8, ..ModelConfig::default() };
        let (model, store) = Model::new(config, ds.property_count(), dict.len(), 1).unwrap();
        Setup { ds, split, motifs, model, store }
    }

    fn small_train(episodes: usize) -> TrainConfig {
        TrainConfig { episodes, k: 5, query_size: 16, ..TrainConfig::default() }
    }

    #[test]
    fn initial_loss_is_near_ln2() {
        let s = setup();
        let mut rng = Rng::seed_from_u64(0);
        let ep = sample_episode(&s.ds, &s.split, Phase::Train, 5, 16, &mut rng).unwrap();
        let mut pass = run_episode(&s.model, &s.store, &s.ds, &s.motifs, &ep).unwrap();
        let loss = pass.tape.bce_with_logits(pass.forward.logits, &targets(&pass.labels)).unwrap();
        assert!((pass.tape.value(loss).item() - core::f64::consts::LN_2).abs() <= 0.2);
    }

    #[test]
    fn zero_episodes_leave_parameters_alone() {
        let mut s = setup();
        let before = s.store.clone();
        let mut adam = Adam::new(AdamConfig::default(), &s.store);
        let log = train(&s.model, &mut s.store, &mut adam, &s.ds, &s.split, &s.motifs, &small_train(0), |_, _| {}).unwrap();
        assert!(log.losses.is_empty());
        assert_eq!(s.store, before);
    }

    #[test]
    fn cosine_schedule() {
        assert_eq!(lr_factor(0, 0), 1.0);
        assert_eq!(lr_factor(5000, 0), 1.0);
        assert_eq!(lr_factor(0, 100), 1.0);
        assert!((lr_factor(50, 100) - (MIN_LR_FACTOR + 1.0) / 2.0).abs() < 1e-12);
        assert!((lr_factor(100, 100) - MIN_LR_FACTOR).abs() < 1e-12);
        assert!((lr_factor(400, 100) - MIN_LR_FACTOR).abs() < 1e-12);
        assert!((1..100).all(|s| lr_factor(s, 100) < lr_factor(s - 1, 100)));
    }

    #[test]
    fn shuffled_motifs_change_only_the_motif_rows() {
        let s = setup();
        let tc = |shuffle_motifs| TrainConfig { augment: Augment { shuffle_motifs }, ..small_train(3) };
        let run = |config: &TrainConfig| {
            let mut s = setup();
            let mut adam = Adam::new(config.adam, &s.store);
            train(&s.model, &mut s.store, &mut adam, &s.ds, &s.split, &s.motifs, config, |_, _| {}).unwrap();
            s.store
        };
        let (plain, shuffled) = (run(&tc(false)), run(&tc(true)));
        assert_ne!(plain, shuffled);
        assert_ne!(s.store, plain);
    }

    #[test]
    fn training_is_deterministic_and_resumable() {
        let mut a = setup();
        let mut adam_a = Adam::new(AdamConfig::default(), &a.store);
        let full = train(&a.model, &mut a.store, &mut adam_a, &a.ds, &a.split, &a.motifs, &small_train(5), |_, _| {}).unwrap();

        let mut b = setup();
        let mut adam_b = Adam::new(AdamConfig::default(), &b.store);
        let mut seen = Vec::new();
        let first = train(&b.model, &mut b.store, &mut adam_b, &b.ds, &b.split, &b.motifs, &small_train(2), |i, _| seen.push(i)).unwrap();
        let rest = train(&b.model, &mut b.store, &mut adam_b, &b.ds, &b.split, &b.motifs, &small_train(3), |i, _| seen.push(i)).unwrap();
        assert_eq!(seen, [0, 1, 2, 3, 4]);
        let resumed: Vec<f64> = first.losses.into_iter().chain(rest.losses).collect();
        assert_eq!(full.losses, resumed);
        assert_eq!(a.store, b.store);
        assert_ne!(a.store, setup().store);
    }

    #[test]
    fn evaluation_reads_but_never_writes() {
        let s = setup();
        let before = s.store.clone();
        let config = EvalConfig { episodes: 3, k: 5, query_size: 16, fine_tune_steps: 2, ..EvalConfig::default() };
        let report = evaluate(&s.model, &s.store, &s.ds, &s.split, &s.motifs, &config).unwrap();
        assert_eq!(s.store, before);
        assert_eq!(report.episodes.len(), 3);
        assert!(report.episodes.iter().all(|e| e.target == 3));
        assert_eq!(report, evaluate(&s.model, &s.store, &s.ds, &s.split, &s.motifs, &config).unwrap());
        let auc = report.mean_auc.unwrap();
        assert!((0.0..=1.0).contains(&auc));
    }

    #[test]
    fn report_statistics() {
        assert_eq!(mean_std(&[1.0]), (1.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
        assert!(mean_std(&[]).0.is_nan());
        let r = |seed, auc: Option<f64>| {
            SeedReport::new(seed, vec![EpisodeResult { index: 0, target: 0, auc, skipped: auc.is_none().then(String::new) }])
        };
        let report = EvalReport::from_seeds(vec![r(0, Some(0.5)), r(1, None), r(2, Some(0.7))]);
        assert!((report.mean - 0.6).abs() < 1e-12);
        assert_eq!(report.seeds[1].skipped(), 1);
        assert_eq!(report.seeds[1].mean_auc, None);
    }
}
