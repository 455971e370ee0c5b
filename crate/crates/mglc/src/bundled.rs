//! Small data sets shipped with the crate.

use mglc_core::context::{build_context_graph, ContextGraph, GraphMode};
use mglc_core::fewshot::PropertyDataset;

use crate::config::RunConfig;
use crate::dataset::{parse_dataset, LoadMode};
use crate::experiment::{representative_episode, Prepared};

/// Twenty drug-like molecules, one SMILES per line.
pub const CORPUS_20: &str = include_str!("../data/corpus20.smi");
/// Ten-molecule subset used for dictionary examples.
pub const TOY_CORPUS: &str = include_str!("../data/toy10.smi");
/// Twelve molecules with two auxiliary properties and a `target` column.
pub const EXAMPLE_CONTEXT: &str = include_str!("../data/example_context.csv");

/// Support size per class and query size of the example episode.
pub const EXAMPLE_K: usize = 2;
pub const EXAMPLE_QUERY: usize = 4;

pub fn example_dataset() -> PropertyDataset {
    parse_dataset(EXAMPLE_CONTEXT.as_bytes(), "example_context.csv", LoadMode::Strict)
        .expect("bundled dataset parses")
        .dataset
}

/// The bundled tri-partite example: the representative `target` episode
/// of [`example_dataset`] with seed 0.
pub fn example_graph() -> ContextGraph {
    let cfg = RunConfig::default();
    let p = Prepared::new(example_dataset(), &cfg, None).expect("bundled dataset prepares");
    let episode = representative_episode(&p, EXAMPLE_K, EXAMPLE_QUERY, 0).expect("bundled episode samples");
    build_context_graph(&p.dataset, &episode, &p.motifs, GraphMode::Tripartite).expect("bundled graph builds")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_corpus;
    use mglc_core::context::NodeKind;

    #[test]
    fn bundled_data_loads() {
        assert_eq!(parse_corpus(CORPUS_20, "corpus20").unwrap().len(), 20);
        assert_eq!(parse_corpus(TOY_CORPUS, "toy10").unwrap().len(), 10);
        let ds = example_dataset();
        assert_eq!((ds.molecule_count(), ds.property_count()), (12, 3));
        let g = example_graph();
        assert_eq!(g.count(NodeKind::Molecule), 2 * EXAMPLE_K + EXAMPLE_QUERY);
        assert!(g.count(NodeKind::Motif) > 0);
        g.check_no_leakage().unwrap();
    }
}
