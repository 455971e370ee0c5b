//! Episode context graphs over motif, molecule and property nodes.
//!
//! Support molecules connect to every episode property (target and
//! auxiliary) with an Active / Inactive / Unknown edge; query molecules connect
//! to auxiliary properties only. In tri-partite mode each molecule also
//! connects once to every distinct dictionary motif it contains.
//!
//! Node indices are global: molecules first (support, then query), then
//! properties (target first), then motifs.

use alloc::vec;
use alloc::vec::Vec;

use crate::fewshot::{Episode, PropertyDataset};
use crate::motif::{MotifDictionary, MotifError};

/// Largest graph accepted by [`row_normalized_operator`].
pub const MAX_DENSE_NODES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Motif,
    Molecule,
    Property,
}

impl NodeKind {
    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Motif => "motif",
            NodeKind::Molecule => "molecule",
            NodeKind::Property => "property",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeRef {
    pub kind: NodeKind,
    pub id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    MolProp,
    MotifMol,
}

/// Edge attribute. Molecule-property edges carry a label, motif-molecule
/// edges are plain containment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeLabel {
    Active,
    Inactive,
    Unknown,
    Contains,
}

impl EdgeLabel {
    pub const COUNT: usize = 4;

    pub fn relation(self) -> Relation {
        match self {
            EdgeLabel::Contains => Relation::MotifMol,
            _ => Relation::MolProp,
        }
    }

    /// Row in the edge-attribute embedding table.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_label(label: Option<bool>) -> Self {
        match label {
            Some(true) => EdgeLabel::Active,
            Some(false) => EdgeLabel::Inactive,
            None => EdgeLabel::Unknown,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphMode {
    Bipartite,
    Tripartite,
}

impl GraphMode {
    pub fn name(self) -> &'static str {
        match self {
            GraphMode::Bipartite => "bipartite",
            GraphMode::Tripartite => "tripartite",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightScheme {
    /// `1/d_i` on every message into node `i`.
    UniformRow,
    /// `1/sqrt(d_i d_j)` in both directions.
    Symmetric,
    /// Symmetric weights re-normalized so each node's incoming weights sum to 1.
    RowNormalizedSymmetric,
}

impl WeightScheme {
    pub fn name(self) -> &'static str {
        match self {
            WeightScheme::UniformRow => "uniform_row",
            WeightScheme::Symmetric => "symmetric",
            WeightScheme::RowNormalizedSymmetric => "row_normalized_symmetric",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContextError {
    #[error("query molecule {molecule} would be connected to the target property")]
    Leakage { molecule: usize },
    #[error("episode lists the target property among its auxiliary properties")]
    TargetIsAuxiliary,
    #[error("molecule {0} is in both the support and the query set")]
    SupportQueryOverlap(usize),
    #[error("node {0:?} has degree zero")]
    ZeroDegree(NodeRef),
    #[error("edge {edge} joins {a:?} and {b:?}, which is not allowed for {label:?}")]
    InvalidEdge { edge: usize, a: NodeRef, b: NodeRef, label: EdgeLabel },
    #[error("edge {0} duplicates an earlier edge")]
    DuplicateEdge(usize),
    #[error("edge {0} references a missing node")]
    NodeOutOfRange(usize),
    #[error("graph has {0} nodes; the dense operator is limited to {MAX_DENSE_NODES}")]
    TooLarge(usize),
    #[error(transparent)]
    Motif(#[from] MotifError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContextEdge {
    pub a: usize,
    pub b: usize,
    pub label: EdgeLabel,
}

/// Distinct dictionary motifs of every dataset molecule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotifIndex {
    per_molecule: Vec<Vec<usize>>,
    dictionary_len: usize,
}

impl MotifIndex {
    pub fn build(ds: &PropertyDataset, dictionary: &MotifDictionary) -> Result<Self, MotifError> {
        let per_molecule = ds
            .molecules()
            .iter()
            .map(|g| dictionary.motif_ids(g))
            .collect::<Result<_, _>>()?;
        Ok(Self { per_molecule, dictionary_len: dictionary.len() })
    }

    pub fn from_lists(per_molecule: Vec<Vec<usize>>, dictionary_len: usize) -> Self {
        Self { per_molecule, dictionary_len }
    }

    pub fn motifs_of(&self, molecule: usize) -> &[usize] {
        &self.per_molecule[molecule]
    }

    pub fn dictionary_len(&self) -> usize {
        self.dictionary_len
    }
}

/// Immutable tri-partite (or bipartite) context graph of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextGraph {
    molecules: Vec<usize>,
    support_count: usize,
    properties: Vec<usize>,
    motifs: Vec<usize>,
    edges: Vec<ContextEdge>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl ContextGraph {
    /// Builds a graph from explicit nodes and edges, checking the kind rules.
    /// `molecules`, `properties` and `motifs` hold source ids (dataset or
    /// dictionary indices) for each node of that kind.
    pub fn from_edges(
        molecules: Vec<usize>,
        support_count: usize,
        properties: Vec<usize>,
        motifs: Vec<usize>,
        edges: Vec<ContextEdge>,
    ) -> Result<Self, ContextError> {
        let n = molecules.len() + properties.len() + motifs.len();
        let mut g = Self { molecules, support_count, properties, motifs, edges: Vec::new(), adjacency: vec![Vec::new(); n] };
        for (i, e) in edges.iter().enumerate() {
            if e.a >= n || e.b >= n {
                return Err(ContextError::NodeOutOfRange(i));
            }
            let (ka, kb) = (g.node(e.a).kind, g.node(e.b).kind);
            let ok = match e.label.relation() {
                Relation::MolProp => matches!(
                    (ka, kb),
                    (NodeKind::Molecule, NodeKind::Property) | (NodeKind::Property, NodeKind::Molecule)
                ),
                Relation::MotifMol => matches!(
                    (ka, kb),
                    (NodeKind::Motif, NodeKind::Molecule) | (NodeKind::Molecule, NodeKind::Motif)
                ),
            };
            if !ok {
                return Err(ContextError::InvalidEdge { edge: i, a: g.node(e.a), b: g.node(e.b), label: e.label });
            }
            if g.adjacency[e.a].iter().any(|&(v, _)| v == e.b) {
                return Err(ContextError::DuplicateEdge(i));
            }
            g.adjacency[e.a].push((e.b, i));
            g.adjacency[e.b].push((e.a, i));
        }
        g.edges = edges;
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        match kind {
            NodeKind::Molecule => self.molecules.len(),
            NodeKind::Property => self.properties.len(),
            NodeKind::Motif => self.motifs.len(),
        }
    }

    pub fn index(&self, node: NodeRef) -> usize {
        match node.kind {
            NodeKind::Molecule => node.id,
            NodeKind::Property => self.molecules.len() + node.id,
            NodeKind::Motif => self.molecules.len() + self.properties.len() + node.id,
        }
    }

    pub fn node(&self, index: usize) -> NodeRef {
        let (m, p) = (self.molecules.len(), self.properties.len());
        if index < m {
            NodeRef { kind: NodeKind::Molecule, id: index }
        } else if index < m + p {
            NodeRef { kind: NodeKind::Property, id: index - m }
        } else {
            NodeRef { kind: NodeKind::Motif, id: index - m - p }
        }
    }

    /// Dataset molecule, dataset property or dictionary entry behind a node.
    pub fn source(&self, node: NodeRef) -> usize {
        match node.kind {
            NodeKind::Molecule => self.molecules[node.id],
            NodeKind::Property => self.properties[node.id],
            NodeKind::Motif => self.motifs[node.id],
        }
    }

    pub fn sources(&self, kind: NodeKind) -> &[usize] {
        match kind {
            NodeKind::Molecule => &self.molecules,
            NodeKind::Property => &self.properties,
            NodeKind::Motif => &self.motifs,
        }
    }

    pub fn support_count(&self) -> usize {
        self.support_count
    }

    /// Local molecule ids of the query set.
    pub fn query_molecules(&self) -> core::ops::Range<usize> {
        self.support_count..self.molecules.len()
    }

    /// The target property is always local property 0.
    pub fn target(&self) -> NodeRef {
        NodeRef { kind: NodeKind::Property, id: 0 }
    }

    pub fn edges(&self) -> &[ContextEdge] {
        &self.edges
    }

    /// `(neighbor, edge)` pairs of a node given by global index.
    pub fn neighbors(&self, index: usize) -> &[(usize, usize)] {
        &self.adjacency[index]
    }

    pub fn degree(&self, index: usize) -> usize {
        self.adjacency[index].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    /// Copy whose motif nodes read dictionary entry `map[z]` instead of `z`.
    pub fn with_motifs_remapped(&self, map: &[usize]) -> Self {
        let mut g = self.clone();
        for z in &mut g.motifs {
            *z = map[*z];
        }
        g
    }

    /// Fails if any query molecule touches the target property.
    pub fn check_no_leakage(&self) -> Result<(), ContextError> {
        let target = self.index(self.target());
        for q in self.query_molecules() {
            if self.adjacency[q].iter().any(|&(v, _)| v == target) {
                return Err(ContextError::Leakage { molecule: self.molecules[q] });
            }
        }
        Ok(())
    }
}

/// Wires the context graph of an episode.
pub fn build_context_graph(
    ds: &PropertyDataset,
    episode: &Episode,
    motifs: &MotifIndex,
    mode: GraphMode,
) -> Result<ContextGraph, ContextError> {
    if episode.auxiliary.contains(&episode.target) {
        return Err(ContextError::TargetIsAuxiliary);
    }
    if let Some(&m) = episode.query.iter().find(|m| episode.support.contains(m)) {
        return Err(ContextError::SupportQueryOverlap(m));
    }
    let molecules: Vec<usize> = episode.support.iter().chain(&episode.query).copied().collect();
    let properties: Vec<usize> = core::iter::once(episode.target).chain(episode.auxiliary.iter().copied()).collect();
    let (n_mol, n_prop) = (molecules.len(), properties.len());
    let support_count = episode.support.len();

    let mut edges = Vec::new();
    for (local, &mol) in molecules.iter().enumerate() {
        // query molecules skip property 0, the target
        let first = if local < support_count { 0 } else { 1 };
        for (p_local, &prop) in properties.iter().enumerate().skip(first) {
            edges.push(ContextEdge { a: local, b: n_mol + p_local, label: EdgeLabel::from_label(ds.label(mol, prop)) });
        }
    }

    let mut motif_nodes = Vec::new();
    if mode == GraphMode::Tripartite {
        let mut present = vec![false; motifs.dictionary_len()];
        let mut containment = Vec::new();
        for (local, &mol) in molecules.iter().enumerate() {
            for &z in motifs.motifs_of(mol) {
                containment.push((local, z));
                present[z] = true;
            }
        }
        // motif nodes in dictionary order, only those present in the episode
        let mut local_of = vec![usize::MAX; motifs.dictionary_len()];
        for (z, _) in present.iter().enumerate().filter(|(_, &p)| p) {
            local_of[z] = motif_nodes.len();
            motif_nodes.push(z);
        }
        for (mol_local, z) in containment {
            edges.push(ContextEdge { a: n_mol + n_prop + local_of[z], b: mol_local, label: EdgeLabel::Contains });
        }
    }

    let g = ContextGraph::from_edges(molecules, support_count, properties, motif_nodes, edges)?;
    g.check_no_leakage()?;
    Ok(g)
}

/// Directed weights per edge: `into[e] = [w(a <- b), w(b <- a)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeWeights {
    pub scheme: WeightScheme,
    pub into: Vec<[f64; 2]>,
}

impl EdgeWeights {
    /// Weight of the message travelling `src -> dst` along `edge`.
    pub fn message(&self, g: &ContextGraph, edge: usize, dst: usize) -> f64 {
        if g.edges[edge].a == dst {
            self.into[edge][0]
        } else {
            self.into[edge][1]
        }
    }
}

fn require_positive_degrees(g: &ContextGraph) -> Result<Vec<usize>, ContextError> {
    let degrees = g.degrees();
    if let Some(i) = degrees.iter().position(|&d| d == 0) {
        return Err(ContextError::ZeroDegree(g.node(i)));
    }
    Ok(degrees)
}

pub fn compute_weights(g: &ContextGraph, scheme: WeightScheme) -> Result<EdgeWeights, ContextError> {
    let d = require_positive_degrees(g)?;
    let sym = |e: &ContextEdge| 1.0 / libm::sqrt(d[e.a] as f64 * d[e.b] as f64);
    let into = match scheme {
        WeightScheme::UniformRow => g.edges.iter().map(|e| [1.0 / d[e.a] as f64, 1.0 / d[e.b] as f64]).collect(),
        WeightScheme::Symmetric => g.edges.iter().map(|e| {
            let w = sym(e);
            [w, w]
        }).collect(),
        WeightScheme::RowNormalizedSymmetric => {
            let mut row_sum = vec![0.0; g.node_count()];
            for e in &g.edges {
                let w = sym(e);
                row_sum[e.a] += w;
                row_sum[e.b] += w;
            }
            g.edges.iter().map(|e| {
                let w = sym(e);
                [w / row_sum[e.a], w / row_sum[e.b]]
            }).collect()
        }
    };
    Ok(EdgeWeights { scheme, into })
}

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Uniform-row operator `D^-1 A`.
pub fn uniform_row_operator(g: &ContextGraph) -> Result<DenseMatrix, ContextError> {
    dense_operator(g, |d, i, _| 1.0 / d[i] as f64, false)
}

/// `(D')^-1 D^-1/2 A D^-1/2`, where `D'` holds the row sums of the
/// symmetric operator.
pub fn row_normalized_operator(g: &ContextGraph) -> Result<DenseMatrix, ContextError> {
    dense_operator(g, |d, i, j| 1.0 / libm::sqrt(d[i] as f64 * d[j] as f64), true)
}

fn dense_operator(
    g: &ContextGraph,
    entry: impl Fn(&[usize], usize, usize) -> f64,
    renormalize: bool,
) -> Result<DenseMatrix, ContextError> {
    let n = g.node_count();
    if n > MAX_DENSE_NODES {
        return Err(ContextError::TooLarge(n));
    }
    let d = require_positive_degrees(g)?;
    let mut m = DenseMatrix::zeros(n);
    for e in &g.edges {
        m.data[e.a * n + e.b] = entry(&d, e.a, e.b);
        m.data[e.b * n + e.a] = entry(&d, e.b, e.a);
    }
    if renormalize {
        for i in 0..n {
            let row = &mut m.data[i * n..(i + 1) * n];
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeStat {
    pub node: NodeRef,
    pub degree: usize,
    /// Total weight this node sends to all of its neighbours.
    pub out_weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KindStats {
    pub kind: NodeKind,
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    /// `std / mean`; zero when the mean is zero.
    pub cv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationStats {
    pub scheme: WeightScheme,
    pub nodes: Vec<NodeStat>,
    pub kinds: Vec<KindStats>,
}

impl PropagationStats {
    pub fn kind(&self, kind: NodeKind) -> Option<&KindStats> {
        self.kinds.iter().find(|k| k.kind == kind)
    }
}

/// Column sums of the propagation operator, summarized per node kind.
pub fn propagation_stats(g: &ContextGraph, scheme: WeightScheme) -> Result<PropagationStats, ContextError> {
    let w = compute_weights(g, scheme)?;
    let mut out = vec![0.0; g.node_count()];
    for (e, edge) in g.edges.iter().enumerate() {
        // into[e][0] flows b -> a, into[e][1] flows a -> b
        out[edge.b] += w.into[e][0];
        out[edge.a] += w.into[e][1];
    }
    let nodes: Vec<NodeStat> = (0..g.node_count())
        .map(|i| NodeStat { node: g.node(i), degree: g.degree(i), out_weight: out[i] })
        .collect();
    let mut kinds = Vec::new();
    for kind in [NodeKind::Motif, NodeKind::Molecule, NodeKind::Property] {
        let values: Vec<f64> = nodes.iter().filter(|s| s.node.kind == kind).map(|s| s.out_weight).collect();
        if values.is_empty() {
            continue;
        }
        let count = values.len();
        let mean = values.iter().sum::<f64>() / count as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count as f64;
        let std = libm::sqrt(var);
        let cv = if mean == 0.0 { 0.0 } else { std / mean };
        kinds.push(KindStats { kind, count, mean, std, cv });
    }
    Ok(PropagationStats { scheme, nodes, kinds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fewshot::{sample_episode, Phase, TaskSplit};
    use crate::motif::build_dictionary;
    use alloc::string::{String, ToString};
    use rand::SeedableRng;

    fn dataset(rows: &[(&str, &[Option<bool>])], props: usize) -> PropertyDataset {
        let names = (0..props).map(|p| alloc::format!("p{p}")).collect();
        let rows = rows.iter().map(|(s, l)| (s.to_string(), l.to_vec())).collect();
        PropertyDataset::from_smiles(names, rows).unwrap()
    }

    fn no_motifs(n: usize) -> MotifIndex {
        MotifIndex::from_lists(vec![Vec::new(); n], 0)
    }

    fn episode(target: usize, auxiliary: &[usize], support: &[usize], query: &[usize]) -> Episode {
        Episode { target, auxiliary: auxiliary.to_vec(), support: support.to_vec(), query: query.to_vec() }
    }

    #[test]
    fn remapped_motifs_keep_the_wiring() {
        let ds = dataset(&[("c1ccccc1CC1CC1", &[Some(true), None]), ("C1CC1N", &[Some(false), Some(true)])], 2);
        let index = MotifIndex::build(&ds, &build_dictionary(ds.molecules(), 8).unwrap()).unwrap();
        let g = build_context_graph(&ds, &episode(0, &[1], &[0], &[1]), &index, GraphMode::Tripartite).unwrap();
        let map: Vec<usize> = (0..index.dictionary_len()).rev().collect();
        let r = g.with_motifs_remapped(&map);
        assert_eq!(r.edges(), g.edges());
        let expected: Vec<usize> = g.sources(NodeKind::Motif).iter().map(|&z| map[z]).collect();
        assert_eq!(r.sources(NodeKind::Motif), &expected[..]);
        assert_eq!(r.sources(NodeKind::Molecule), g.sources(NodeKind::Molecule));
    }

    #[test]
    fn support_molecule_wires_to_every_property() {
        let ds = dataset(&[("CC", &[Some(true), None])], 2);
        let g = build_context_graph(&ds, &episode(0, &[1], &[0], &[]), &no_motifs(1), GraphMode::Bipartite).unwrap();
        assert_eq!(g.edges().len(), 2);
        assert_eq!(g.edges()[0].label, EdgeLabel::Active);
        assert_eq!(g.edges()[1].label, EdgeLabel::Unknown);
    }

    #[test]
    fn query_molecule_skips_the_target() {
        let ds = dataset(&[("CC", &[Some(true), Some(false), Some(true)]), ("CO", &[Some(false), Some(true), None])], 3);
        let g = build_context_graph(&ds, &episode(0, &[1, 2], &[0], &[1]), &no_motifs(2), GraphMode::Bipartite).unwrap();
        let target = g.index(g.target());
        let q = g.query_molecules().start;
        assert_eq!(g.degree(q), 2);
        assert!(g.neighbors(q).iter().all(|&(v, _)| v != target));
        g.check_no_leakage().unwrap();
    }

    #[test]
    fn biphenyl_gets_one_contains_edge() {
        let ds = dataset(&[("c1ccccc1-c1ccccc1", &[Some(true), Some(false)])], 2);
        let dict = build_dictionary(ds.molecules(), 8).unwrap();
        let index = MotifIndex::build(&ds, &dict).unwrap();
        let g = build_context_graph(&ds, &episode(0, &[1], &[0], &[]), &index, GraphMode::Tripartite).unwrap();
        assert_eq!(g.count(NodeKind::Motif), 1);
        assert_eq!(g.edges().iter().filter(|e| e.label == EdgeLabel::Contains).count(), 1);
    }

    #[test]
    fn bad_episodes_and_edges_are_rejected() {
        let ds = dataset(&[("CC", &[Some(true), Some(true)]), ("CO", &[Some(false), Some(true)])], 2);
        let m = no_motifs(2);
        assert_eq!(
            build_context_graph(&ds, &episode(0, &[0, 1], &[0], &[1]), &m, GraphMode::Bipartite),
            Err(ContextError::TargetIsAuxiliary)
        );
        assert_eq!(
            build_context_graph(&ds, &episode(0, &[1], &[0, 1], &[1]), &m, GraphMode::Bipartite),
            Err(ContextError::SupportQueryOverlap(1))
        );
        // a hand-built query -> target edge is leakage
        let g = ContextGraph::from_edges(
            vec![0, 1],
            1,
            vec![0],
            vec![],
            vec![ContextEdge { a: 1, b: 2, label: EdgeLabel::Active }],
        )
        .unwrap();
        assert_eq!(g.check_no_leakage(), Err(ContextError::Leakage { molecule: 1 }));
        // molecule-molecule and motif-property edges are invalid
        let err = ContextGraph::from_edges(vec![0, 1], 2, vec![], vec![], vec![ContextEdge { a: 0, b: 1, label: EdgeLabel::Active }]);
        assert!(matches!(err, Err(ContextError::InvalidEdge { .. })));
        let err = ContextGraph::from_edges(vec![], 0, vec![0], vec![0], vec![ContextEdge { a: 0, b: 1, label: EdgeLabel::Contains }]);
        assert!(matches!(err, Err(ContextError::InvalidEdge { .. })));
        let dup = ContextEdge { a: 0, b: 1, label: EdgeLabel::Unknown };
        assert_eq!(ContextGraph::from_edges(vec![0], 1, vec![0], vec![], vec![dup, dup]), Err(ContextError::DuplicateEdge(1)));
    }

    /// Path molecule(A) - property(B) - molecule(C).
    fn path() -> ContextGraph {
        let e = |a, b| ContextEdge { a, b, label: EdgeLabel::Unknown };
        ContextGraph::from_edges(vec![0, 1], 2, vec![0], vec![], vec![e(0, 2), e(1, 2)]).unwrap()
    }

    #[test]
    fn weight_examples() {
        let w = compute_weights(&path(), WeightScheme::Symmetric).unwrap();
        assert!((w.into[0][0] - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((w.into[0][0] - 0.70711).abs() < 1e-5);

        let single = ContextGraph::from_edges(vec![0], 1, vec![0], vec![], vec![ContextEdge { a: 0, b: 1, label: EdgeLabel::Active }]).unwrap();
        for scheme in [WeightScheme::UniformRow, WeightScheme::Symmetric, WeightScheme::RowNormalizedSymmetric] {
            assert_eq!(compute_weights(&single, scheme).unwrap().into[0], [1.0, 1.0]);
        }

        // star: one property, four molecules
        let edges = (0..4).map(|m| ContextEdge { a: m, b: 4, label: EdgeLabel::Inactive }).collect();
        let star = ContextGraph::from_edges(vec![0, 1, 2, 3], 4, vec![0], vec![], edges).unwrap();
        let w = compute_weights(&star, WeightScheme::Symmetric).unwrap();
        assert!(w.into.iter().all(|&[x, y]| x == 0.5 && y == 0.5));
        let w = compute_weights(&star, WeightScheme::UniformRow).unwrap();
        // into the leaf: 1/1, into the centre: 1/4
        assert!(w.into.iter().all(|&[leaf, centre]| leaf == 1.0 && centre == 0.25));
        assert_eq!(w.message(&star, 0, 4), 0.25);
    }

    #[test]
    fn zero_degree_is_an_error() {
        let g = ContextGraph::from_edges(vec![0], 1, vec![0], vec![], vec![]).unwrap();
        assert!(matches!(compute_weights(&g, WeightScheme::Symmetric), Err(ContextError::ZeroDegree(_))));
        assert!(matches!(row_normalized_operator(&g), Err(ContextError::ZeroDegree(_))));
    }

    #[test]
    fn operator_examples() {
        let m = row_normalized_operator(&path()).unwrap();
        let row_b = m.row(2);
        assert!((row_b[0] - 0.5).abs() < 1e-12 && (row_b[1] - 0.5).abs() < 1e-12 && row_b[2] == 0.0);
        let single = ContextGraph::from_edges(vec![0], 1, vec![0], vec![], vec![ContextEdge { a: 0, b: 1, label: EdgeLabel::Active }]).unwrap();
        assert_eq!(row_normalized_operator(&single).unwrap().data, vec![0.0, 1.0, 1.0, 0.0]);
        assert_eq!(uniform_row_operator(&single).unwrap().data, vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn uniform_degree_bipartite_has_no_dispersion() {
        // 4 molecules x 2 properties, complete bipartite
        let mut edges = Vec::new();
        for m in 0..4 {
            for p in 0..2 {
                edges.push(ContextEdge { a: m, b: 4 + p, label: EdgeLabel::Unknown });
            }
        }
        let g = ContextGraph::from_edges(vec![0, 1, 2, 3], 4, vec![0, 1], vec![], edges).unwrap();
        let stats = propagation_stats(&g, WeightScheme::UniformRow).unwrap();
        for k in &stats.kinds {
            assert_eq!(k.cv, 0.0, "{:?}", k.kind);
        }
        // out-weights sum to the node count under row-stochastic weights
        let total: f64 = stats.nodes.iter().map(|s| s.out_weight).sum();
        assert!((total - 6.0).abs() < 1e-12);
    }

    #[test]
    fn rows_are_stochastic_and_symmetric_weights_symmetric() {
        let (config, rules) = crate::fewshot::SyntheticConfig::benchmark(0.3);
        let mut config = config;
        config.n_molecules = 120;
        let ds = crate::fewshot::generate_synthetic(&config, &rules, 4).unwrap();
        let dict = build_dictionary(ds.molecules(), 16).unwrap();
        let index = MotifIndex::build(&ds, &dict).unwrap();
        let split = TaskSplit::last(4, 1).unwrap();
        let mut rng = crate::rng::Rng::seed_from_u64(0);
        for _ in 0..10 {
            let ep = sample_episode(&ds, &split, Phase::Train, 3, 8, &mut rng).unwrap();
            let g = build_context_graph(&ds, &ep, &index, GraphMode::Tripartite).unwrap();
            for op in [uniform_row_operator(&g).unwrap(), row_normalized_operator(&g).unwrap()] {
                for i in 0..op.n {
                    assert!((op.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
            }
            let w = compute_weights(&g, WeightScheme::Symmetric).unwrap();
            assert!(w.into.iter().all(|&[x, y]| x == y));
            // the sparse row-normalized weights agree with the dense operator
            let rn = compute_weights(&g, WeightScheme::RowNormalizedSymmetric).unwrap();
            let dense = row_normalized_operator(&g).unwrap();
            for (e, edge) in g.edges().iter().enumerate() {
                assert!((rn.into[e][0] - dense.get(edge.a, edge.b)).abs() < 1e-12);
                assert!((rn.into[e][1] - dense.get(edge.b, edge.a)).abs() < 1e-12);
            }
            // no intra-kind edges
            for e in g.edges() {
                assert_ne!(g.node(e.a).kind, g.node(e.b).kind);
            }
            // bipartite = tripartite without motif nodes
            let bi = build_context_graph(&ds, &ep, &index, GraphMode::Bipartite).unwrap();
            let kept: Vec<ContextEdge> = g.edges().iter().copied().filter(|e| e.label != EdgeLabel::Contains).collect();
            assert_eq!(bi.edges(), kept.as_slice());
            assert_eq!(bi.count(NodeKind::Motif), 0);
            assert_eq!(bi.sources(NodeKind::Molecule), g.sources(NodeKind::Molecule));
        }
    }

    #[test]
    fn names() {
        let names: Vec<String> =
            [WeightScheme::UniformRow, WeightScheme::Symmetric].iter().map(|s| s.name().to_string()).collect();
        assert_eq!(names, ["uniform_row", "symmetric"]);
        assert_eq!(EdgeLabel::from_label(None), EdgeLabel::Unknown);
        assert_eq!(EdgeLabel::from_label(Some(false)), EdgeLabel::Inactive);
    }
}
