//! Argument parsing and subcommands of the `mglc` binary.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mglc_core::context::{propagation_stats, NodeKind};
use mglc_core::fewshot::{generate_synthetic, EvalReport, SyntheticConfig};
use mglc_core::motif::build_dictionary;

use crate::checkpoint::Checkpoint;
use crate::config::{parse_mode, parse_scheme, RunConfig};
use crate::corpus::read_corpus;
use crate::dataset::{load_dataset, write_dataset, LoadMode};
use crate::dictionary::{format_dictionary, read_dictionary};
use crate::error::{Error, Result};
use crate::experiment::{
    continue_training, episode_graph, evaluate_parallel, forward_episode, init_model, representative_episode, Prepared,
};
use crate::export::{write_embeddings, write_stats, write_train_log, EmbeddingLayer};
use crate::manifest::Manifest;
use crate::report::ReportJson;

#[derive(Debug, Parser)]
#[command(name = "mglc", version, about = "Few-shot molecular property prediction over motif context graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a top-K motif dictionary from a SMILES corpus.
    Motifs {
        corpus: PathBuf,
        #[arg(long, default_value_t = 32)]
        top_k: usize,
        /// Write dictionary.tsv and a manifest here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export per-node propagation weights of one episode graph.
    Stats {
        dataset: PathBuf,
        #[arg(long, default_value = "tripartite")]
        mode: String,
        /// Repeatable; defaults to uniform_row and symmetric.
        #[arg(long = "scheme")]
        schemes: Vec<String>,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 4)]
        query_size: usize,
        #[arg(long, default_value_t = 32)]
        top_k: usize,
        #[arg(long, default_value_t = 1)]
        test_properties: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model per seed and save checkpoints.
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate saved checkpoints on test episodes.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// A checkpoint file, or a `train` output directory.
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also dump embeddings of one test episode per seed.
        #[arg(long)]
        dump_embeddings: bool,
    },
    /// Train and evaluate in one go.
    Run {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dump_embeddings: bool,
    },
    /// Write the synthetic ring-motif benchmark as a dataset CSV.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        dropout: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        molecules: Option<usize>,
    },
}

/// Shared options of `train`, `eval` and `run`. Flags override the config file.
#[derive(Debug, Args)]
pub struct RunArgs {
    /// Dataset CSV (may also come from the config file).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    /// Seeds: `3`, `0,2,5` or an inclusive range `0..9`.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Skip malformed dataset rows instead of failing.
    #[arg(long)]
    pub permissive: bool,
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub query_size: Option<String>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub readout: Option<String>,
    #[arg(long)]
    pub property_init: Option<String>,
    #[arg(long)]
    pub hidden_dim: Option<String>,
    #[arg(long)]
    pub global_layers: Option<String>,
    #[arg(long)]
    pub inter_layer_transform: Option<String>,
    #[arg(long)]
    pub head_hidden: Option<String>,
    #[arg(long)]
    pub lr: Option<String>,
    /// Training episodes per seed.
    #[arg(long)]
    pub episodes: Option<String>,
    #[arg(long)]
    pub eval_episodes: Option<String>,
    #[arg(long)]
    pub fine_tune_steps: Option<String>,
    #[arg(long)]
    pub fine_tune_lr: Option<String>,
    #[arg(long)]
    pub shuffle_motifs: Option<String>,
    #[arg(long)]
    pub lr_decay: Option<String>,
    #[arg(long)]
    pub top_k: Option<String>,
    #[arg(long)]
    pub test_properties: Option<String>,
}

impl RunArgs {
    pub fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let overrides = [
            ("k", &self.k),
            ("query_size", &self.query_size),
            ("mode", &self.mode),
            ("scheme", &self.scheme),
            ("readout", &self.readout),
            ("property_init", &self.property_init),
            ("hidden_dim", &self.hidden_dim),
            ("global_layers", &self.global_layers),
            ("inter_layer_transform", &self.inter_layer_transform),
            ("head_hidden", &self.head_hidden),
            ("lr", &self.lr),
            ("train_episodes", &self.episodes),
            ("eval_episodes", &self.eval_episodes),
            ("fine_tune_steps", &self.fine_tune_steps),
            ("fine_tune_lr", &self.fine_tune_lr),
            ("shuffle_motifs", &self.shuffle_motifs),
            ("lr_decay", &self.lr_decay),
            ("top_k", &self.top_k),
            ("test_properties", &self.test_properties),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        if let Some(p) = &self.dataset {
            cfg.dataset = Some(p.clone());
        }
        if let Some(p) = &self.dictionary {
            cfg.dictionary = Some(p.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn seeds(&self, cfg: &RunConfig) -> Result<Vec<u64>> {
        match &self.seeds {
            Some(s) => parse_seeds(s),
            None => Ok(vec![cfg.seed]),
        }
    }

    fn prepared(&self, cfg: &RunConfig, out: &mut dyn Write) -> Result<Prepared> {
        let path = cfg.dataset.as_ref().ok_or_else(|| Error::Usage("no dataset given (--dataset or config)".into()))?;
        let mode = if self.permissive { LoadMode::Permissive } else { LoadMode::Strict };
        let loaded = load_dataset(path, mode)?;
        for s in &loaded.skipped {
            writeln!(out, "skipped line {}: {}", s.line, s.reason).ok();
        }
        let dictionary = cfg.dictionary.as_deref().map(read_dictionary).transpose()?;
        Prepared::new(loaded.dataset, cfg, dictionary)
    }
}

/// `3`, `0,2,5` or the inclusive range `0..9`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Usage(format!("invalid seed list {s:?}"));
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?
    };
    Ok(seeds)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_file(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

/// Parses `args` (program name first) and runs the subcommand, printing
/// progress to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Usage(e.to_string()))?;
    execute(cli.command, out)
}

pub fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Motifs { corpus, top_k, out: dir } => motifs(&corpus, top_k, dir.as_deref(), out),
        Command::Stats { dataset, mode, schemes, k, query_size, top_k, test_properties, seed, out: dir } => {
            let mode = parse_mode(&mode).ok_or_else(|| Error::Usage(format!("invalid mode {mode:?}")))?;
            let schemes = if schemes.is_empty() { vec!["uniform_row".into(), "symmetric".into()] } else { schemes };
            let schemes = schemes
                .iter()
                .map(|s| parse_scheme(s).ok_or_else(|| Error::Usage(format!("invalid scheme {s:?}"))))
                .collect::<Result<Vec<_>>>()?;
            let cfg = RunConfig { mode, k, query_size, top_k, test_properties, seed, ..RunConfig::default() };
            cfg.validate()?;
            let ds = load_dataset(&dataset, LoadMode::Strict)?.dataset;
            let p = Prepared::new(ds, &cfg, None)?;
            let episode = representative_episode(&p, k, query_size, seed)?;
            let g = episode_graph(&p, &episode, &cfg)?;
            create_dir(&dir)?;
            writeln!(out, "scheme\tkind\tcount\tmean\tstd\tcv").ok();
            for scheme in schemes {
                let stats = propagation_stats(&g, scheme).map_err(|e| Error::Data(e.to_string()))?;
                let path = dir.join(format!("stats_{}.csv", scheme.name()));
                write_stats(create_file(&path)?, &g, &stats)?;
                for s in &stats.kinds {
                    writeln!(out, "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}", scheme.name(), s.kind.name(), s.count, s.mean, s.std, s.cv)
                        .ok();
                }
            }
            Manifest::write(&dir, "stats", &cfg.hash())?;
            Ok(())
        }
        Command::Train { run, out: dir } => {
            let cfg = run.config()?;
            let seeds = run.seeds(&cfg)?;
            let p = run.prepared(&cfg, out)?;
            create_dir(&dir)?;
            write_file(&dir.join("config.txt"), cfg.to_text())?;
            for &seed in &seeds {
                train_one(&p, &cfg, seed, &dir, out)?;
            }
            Manifest::write(&dir, "train", &cfg.hash())?;
            Ok(())
        }
        Command::Eval { run, checkpoint, out: dir, dump_embeddings } => {
            let cfg = run.config()?;
            let seeds = run.seeds.as_deref().map(parse_seeds).transpose()?;
            let checkpoints = find_checkpoints(&checkpoint, seeds.as_deref())?;
            let base = run.prepared(&cfg, out)?;
            create_dir(&dir)?;
            write_file(&dir.join("config.txt"), cfg.to_text())?;
            let mut reports = Vec::new();
            for path in checkpoints {
                let ck = Checkpoint::load(&path)?;
                reports.push(eval_one(&base, &cfg, &ck, &dir, dump_embeddings, out)?);
            }
            finish_eval(&dir, &base, &cfg, reports, "eval", out)
        }
        Command::Run { run, out: dir, dump_embeddings } => {
            let cfg = run.config()?;
            let seeds = run.seeds(&cfg)?;
            let p = run.prepared(&cfg, out)?;
            create_dir(&dir)?;
            write_file(&dir.join("config.txt"), cfg.to_text())?;
            let mut reports = Vec::new();
            for &seed in &seeds {
                let ck = train_one(&p, &cfg, seed, &dir, out)?;
                reports.push(eval_one(&p, &cfg, &ck, &dir, dump_embeddings, out)?);
            }
            finish_eval(&dir, &p, &cfg, reports, "run", out)
        }
        Command::Synth { out: path, dropout, seed, molecules } => {
            let (mut sc, rules) = SyntheticConfig::benchmark(dropout);
            if let Some(n) = molecules {
                sc.n_molecules = n;
            }
            let ds = generate_synthetic(&sc, &rules, seed).map_err(|e| Error::Usage(e.to_string()))?;
            write_dataset(create_file(&path)?, &ds)?;
            writeln!(out, "wrote {} molecules x {} properties to {}", ds.molecule_count(), ds.property_count(), path.display())
                .ok();
            Ok(())
        }
    }
}

fn motifs(corpus: &Path, top_k: usize, dir: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    if top_k == 0 {
        return Err(Error::Usage("--top-k must be positive".into()));
    }
    let entries = read_corpus(corpus)?;
    let graphs: Vec<_> = entries.into_iter().map(|e| e.graph).collect();
    let dict = build_dictionary(&graphs, top_k).map_err(|e| Error::Data(e.to_string()))?;
    for (rank, e) in dict.entries().iter().enumerate() {
        writeln!(out, "{}\t{}\t{}\t{}", rank + 1, e.frequency, e.example_smiles, e.code.to_hex()).ok();
    }
    if let Some(dir) = dir {
        create_dir(dir)?;
        write_file(&dir.join("dictionary.tsv"), format_dictionary(&dict))?;
        let hash = RunConfig { top_k, ..RunConfig::default() }.hash();
        Manifest::write(dir, "motifs", &hash)?;
    }
    Ok(())
}

fn train_one(p: &Prepared, cfg: &RunConfig, seed: u64, dir: &Path, out: &mut dyn Write) -> Result<Checkpoint> {
    let (model, mut store, mut adam) = init_model(p, cfg, seed)?;
    let log = continue_training(&model, &mut store, &mut adam, p, cfg, seed)?;
    let seed_dir = dir.join(format!("seed-{seed}"));
    create_dir(&seed_dir)?;
    write_train_log(create_file(&seed_dir.join("train_log.csv"))?, &log)?;
    let ck = Checkpoint::capture(&model, &store, &adam, &p.dictionary, p.dataset.properties(), seed);
    ck.save(&seed_dir.join("checkpoint.json"))?;
    let tail = &log[log.len().saturating_sub(50)..];
    if !tail.is_empty() {
        let mean = tail.iter().map(|r| r.loss).sum::<f64>() / tail.len() as f64;
        writeln!(out, "seed {seed}: {} episodes, final loss {mean:.4}", log.len()).ok();
    } else {
        writeln!(out, "seed {seed}: initialized").ok();
    }
    Ok(ck)
}

/// `path` itself if it is a file, else `path/seed-*/checkpoint.json` for the
/// requested seeds (all present ones when `seeds` is `None`).
fn find_checkpoints(path: &Path, seeds: Option<&[u64]>) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    if !path.is_dir() {
        return Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "checkpoint not found")));
    }
    let seeds = match seeds {
        Some(s) => s.to_vec(),
        None => {
            let mut found: Vec<u64> = fs::read_dir(path)
                .map_err(|e| Error::io(path, e))?
                .filter_map(|e| e.ok()?.file_name().to_str()?.strip_prefix("seed-")?.parse().ok())
                .collect();
            found.sort_unstable();
            found
        }
    };
    let files: Vec<PathBuf> = seeds.iter().map(|s| path.join(format!("seed-{s}")).join("checkpoint.json")).collect();
    if files.is_empty() {
        return Err(Error::Data(format!("{}: no checkpoints found", path.display())));
    }
    if let Some(missing) = files.iter().find(|f| !f.is_file()) {
        return Err(Error::io(missing, std::io::Error::new(std::io::ErrorKind::NotFound, "checkpoint not found")));
    }
    Ok(files)
}

fn eval_one(
    base: &Prepared,
    cfg: &RunConfig,
    ck: &Checkpoint,
    dir: &Path,
    dump_embeddings: bool,
    out: &mut dyn Write,
) -> Result<mglc_core::fewshot::SeedReport> {
    if ck.properties != base.dataset.properties() {
        return Err(Error::Data("checkpoint properties do not match the dataset header".into()));
    }
    let r = ck.restore()?;
    let p = Prepared::new(base.dataset.clone(), cfg, Some(r.dictionary))?;
    let report = evaluate_parallel(&r.model, &r.store, &p, &cfg.eval(ck.seed))?;
    match report.mean_auc {
        Some(auc) => writeln!(out, "seed {}: mean AUC {auc:.4} ({} skipped)", ck.seed, report.skipped()).ok(),
        None => writeln!(out, "seed {}: every episode skipped", ck.seed).ok(),
    };
    if dump_embeddings {
        let episode = representative_episode(&p, cfg.k, cfg.query_size, ck.seed)?;
        let model_cfg = RunConfig { mode: r.model.config().mode, ..cfg.clone() };
        let g = episode_graph(&p, &episode, &model_cfg)?;
        let (tape, fwd) = forward_episode(&r.model, &r.store, &p, &g)?;
        let all: Vec<usize> = (0..g.node_count()).collect();
        let queries: Vec<usize> = g.query_molecules().map(|m| g.index(mglc_core::context::NodeRef { kind: NodeKind::Molecule, id: m })).collect();
        let mut layers: Vec<EmbeddingLayer<'_>> = fwd
            .layers
            .iter()
            .enumerate()
            .map(|(i, &v)| EmbeddingLayer { layer: format!("h{i}"), nodes: all.clone(), values: tape.value(v) })
            .collect();
        layers.push(EmbeddingLayer { layer: "h_mol".into(), nodes: queries, values: tape.value(fwd.h_mol) });
        layers.push(EmbeddingLayer { layer: "h_prop".into(), nodes: vec![g.index(g.target())], values: tape.value(fwd.h_prop) });
        let emb_dir = dir.join("embeddings");
        create_dir(&emb_dir)?;
        write_embeddings(create_file(&emb_dir.join(format!("seed-{}.csv", ck.seed)))?, &g, &layers)?;
    }
    Ok(report)
}

fn finish_eval(
    dir: &Path,
    p: &Prepared,
    cfg: &RunConfig,
    reports: Vec<mglc_core::fewshot::SeedReport>,
    command: &str,
    out: &mut dyn Write,
) -> Result<()> {
    let report = EvalReport::from_seeds(reports);
    let json = ReportJson::from_dataset(&report, &p.dataset, &cfg.hash());
    write_file(&dir.join("report.json"), json.to_json())?;
    writeln!(out, "mean AUC {:.4} +/- {:.4} over {} seeds", report.mean, report.std, report.seeds.len()).ok();
    Manifest::write(dir, command, &cfg.hash())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0..9").unwrap(), (0..10).collect::<Vec<_>>());
        assert_eq!(parse_seeds("4").unwrap(), [4]);
        assert_eq!(parse_seeds("1, 3,5").unwrap(), [1, 3, 5]);
        for bad in ["", "a", "3..1", "1..x"] {
            assert_eq!(parse_seeds(bad).unwrap_err().exit_code(), 1, "{bad}");
        }
    }

    #[test]
    fn usage_errors_exit_with_one() {
        let mut sink = Vec::new();
        assert_eq!(run(["mglc", "frobnicate"], &mut sink).unwrap_err().exit_code(), 1);
        assert_eq!(run(["mglc", "train", "--out", "x", "--k", "0"], &mut sink).unwrap_err().exit_code(), 1);
        assert_eq!(run(["mglc", "train", "--out", "x"], &mut sink).unwrap_err().exit_code(), 1);
    }
}
