//! Context encoders and the scoring head.
//!
//! - A structural encoder turns each molecule's atom graph into its initial
//!   node feature.
//! - The global encoder applies the weighted message-passing layer
//!   `h_i' = sum_j w_ij (h_j + e_ij) + h_i` over the whole context graph.
//! - Local-focus encoders re-run one such layer, with their own parameters,
//!   on the 1-hop subgraph around a molecule or property and mean-pool it.
//! - The head scores `[structural; h_mol; h_prop]` with a one-hidden-layer MLP.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::autodiff::{xavier_init, AutodiffError, ParamId, ParameterStore, Tape, Tensor, Var};
use crate::context::{ContextGraph, EdgeLabel, EdgeWeights, GraphMode, NodeKind, NodeRef, WeightScheme};
use crate::molgraph::{Element, MolecularGraph};
use crate::rng::child_seed;

/// One-hot element plus an aromatic flag.
pub const ATOM_FEATURES: usize = Element::ALL.len() + 1;
pub const STRUCTURAL_ROUNDS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Readout {
    /// Pool a dedicated encoder over the 1-hop subgraph of each node.
    Subgraph,
    /// Read the global encoder's rows directly.
    Node,
}

impl Readout {
    pub fn name(self) -> &'static str {
        match self {
            Readout::Subgraph => "subgraph",
            Readout::Node => "node",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub hidden_dim: usize,
    pub global_layers: usize,
    /// Learnable linear map + relu between global layers.
    pub inter_layer_transform: bool,
    pub head_hidden: usize,
    pub readout: Readout,
    pub mode: GraphMode,
    pub scheme: WeightScheme,
    pub property_init: PropertyInit,
}

/// Which property nodes start from their own table row (all of them add a
/// target/auxiliary role vector).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropertyInit {
    Table,
    MaskedTarget,
    RoleOnly,
}

impl PropertyInit {
    pub fn name(self) -> &'static str {
        match self {
            PropertyInit::Table => "table",
            PropertyInit::MaskedTarget => "masked_target",
            PropertyInit::RoleOnly => "role_only",
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 32,
            global_layers: 2,
            inter_layer_transform: true,
            head_hidden: 32,
            readout: Readout::Subgraph,
            mode: GraphMode::Tripartite,
            scheme: WeightScheme::Symmetric,
            property_init: PropertyInit::RoleOnly,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EncoderError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("subgraph centred on {got:?} given to the {expected:?} encoder")]
    CenterKind { expected: NodeKind, got: NodeKind },
    #[error("parameter {0:?} is missing")]
    MissingParameter(String),
    #[error("parameter {name:?} has shape {got:?}, expected {expected:?}")]
    ParameterShape { name: String, expected: [usize; 2], got: [usize; 2] },
    #[error("model dimensions must be positive")]
    ZeroDimension,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Linear {
    weight: ParamId,
    bias: ParamId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Params {
    edge: ParamId,
    property_table: ParamId,
    property_role: ParamId,
    motif_table: ParamId,
    structural: Vec<Linear>,
    global: Vec<Linear>,
    phi_mol: Linear,
    phi_prop: Linear,
    head_hidden: Linear,
    head_out: Linear,
}

/// Parameter layout of the full model. The values live in a
/// [`ParameterStore`]; a `Model` only knows where to find them.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    property_count: usize,
    motif_count: usize,
    params: Params,
}

/// Which local-focus encoder to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubgraphEncoder {
    Molecule,
    Property,
}

impl Model {
    /// `(name, shape, xavier?)` for every parameter, in registration order.
    fn layout(config: &ModelConfig, property_count: usize, motif_count: usize) -> Vec<(String, [usize; 2], bool)> {
        let d = config.hidden_dim;
        let mut out = vec![
            (String::from("edge_embedding"), [EdgeLabel::COUNT, d], true),
            (String::from("property_table"), [property_count, d], true),
            (String::from("property_role"), [2, d], true),
            (String::from("motif_table"), [motif_count, d], true),
        ];
        let mut linear = |name: String, fan_in: usize, fan_out: usize| {
            out.push((format!("{name}.weight"), [fan_in, fan_out], true));
            out.push((format!("{name}.bias"), [1, fan_out], false));
        };
        for r in 0..STRUCTURAL_ROUNDS {
            linear(format!("structural.{r}"), if r == 0 { ATOM_FEATURES } else { d }, d);
        }
        if config.inter_layer_transform {
            for k in 0..config.global_layers.saturating_sub(1) {
                linear(format!("global.{k}"), d, d);
            }
        }
        linear(String::from("phi_mol"), d, d);
        linear(String::from("phi_prop"), d, d);
        linear(String::from("head.hidden"), 3 * d, config.head_hidden);
        linear(String::from("head.out"), config.head_hidden, 1);
        // a zero output layer starts every logit at 0 (loss ln 2)
        if let Some(last) = out.iter_mut().rev().find(|p| p.0 == "head.out.weight") {
            last.2 = false;
        }
        out
    }

    /// Registers Xavier-initialised parameters (biases start at zero).
    pub fn new(
        config: ModelConfig,
        property_count: usize,
        motif_count: usize,
        seed: u64,
    ) -> Result<(Self, ParameterStore), EncoderError> {
        if config.hidden_dim == 0 || config.head_hidden == 0 {
            return Err(EncoderError::ZeroDimension);
        }
        let mut store = ParameterStore::new();
        for (i, (name, [r, c], xavier)) in Self::layout(&config, property_count, motif_count).into_iter().enumerate() {
            let value = if xavier { xavier_init(r, c, child_seed(seed, i as u64)) } else { Tensor::zeros(r, c) };
            store.add(&name, value)?;
        }
        let model = Self::bind(config, property_count, motif_count, &store)?;
        Ok((model, store))
    }

    /// Looks up an existing store (e.g. loaded from a checkpoint).
    pub fn bind(
        config: ModelConfig,
        property_count: usize,
        motif_count: usize,
        store: &ParameterStore,
    ) -> Result<Self, EncoderError> {
        for (name, shape, _) in Self::layout(&config, property_count, motif_count) {
            let id = store.id(&name).ok_or_else(|| EncoderError::MissingParameter(name.clone()))?;
            let got = store.value(id).shape();
            if got != shape {
                return Err(EncoderError::ParameterShape { name, expected: shape, got });
            }
        }
        let id = |n: &str| store.id(n).expect("checked above");
        let lin = |n: &str| Linear { weight: id(&format!("{n}.weight")), bias: id(&format!("{n}.bias")) };
        let global = if config.inter_layer_transform {
            (0..config.global_layers.saturating_sub(1)).map(|k| lin(&format!("global.{k}"))).collect()
        } else {
            Vec::new()
        };
        let params = Params {
            edge: id("edge_embedding"),
            property_table: id("property_table"),
            property_role: id("property_role"),
            motif_table: id("motif_table"),
            structural: (0..STRUCTURAL_ROUNDS).map(|r| lin(&format!("structural.{r}"))).collect(),
            global,
            phi_mol: lin("phi_mol"),
            phi_prop: lin("phi_prop"),
            head_hidden: lin("head.hidden"),
            head_out: lin("head.out"),
        };
        Ok(Self { config, property_count, motif_count, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn property_count(&self) -> usize {
        self.property_count
    }

    pub fn motif_count(&self) -> usize {
        self.motif_count
    }

    /// Parameter groups by name prefix, for reporting.
    pub fn groups() -> &'static [&'static str] {
        &[
            "edge_embedding",
            "property_table",
            "property_role",
            "motif_table",
            "structural",
            "global",
            "phi_mol",
            "phi_prop",
            "head",
        ]
    }

    fn linear(&self, tape: &mut Tape, store: &ParameterStore, x: Var, l: Linear) -> Result<Var, AutodiffError> {
        let w = tape.param(store, l.weight);
        let b = tape.param(store, l.bias);
        tape.linear(x, w, b)
    }

    /// Sum-pooled atom embeddings, one row per molecule.
    pub fn structural_encode(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        molecules: &[&MolecularGraph],
    ) -> Result<Var, EncoderError> {
        let batch = AtomBatch::new(molecules);
        let mut x = tape.constant(batch.features)?;
        for &layer in &self.params.structural {
            let from = tape.gather_rows(x, &batch.src)?;
            let summed = tape.scatter_add(from, &batch.dst, batch.atoms)?;
            let agg = tape.add(x, summed)?;
            let lin = self.linear(tape, store, agg, layer)?;
            x = tape.relu(lin)?;
        }
        Ok(tape.scatter_add(x, &batch.molecule_of, molecules.len())?)
    }

    /// Initial node features: structural rows for molecules, table rows for
    /// properties (plus a target/auxiliary role vector) and motifs.
    pub fn initial_features(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        g: &ContextGraph,
        structural: Var,
    ) -> Result<Var, EncoderError> {
        let table = tape.param(store, self.params.property_table);
        let props = tape.gather_rows(table, g.sources(NodeKind::Property))?;
        let role_table = tape.param(store, self.params.property_role);
        let roles: Vec<usize> = (0..g.count(NodeKind::Property)).map(|p| usize::from(p != 0)).collect();
        let role = tape.gather_rows(role_table, &roles)?;
        let keep: Vec<f64> = (0..g.count(NodeKind::Property))
            .map(|p| match self.config.property_init {
                PropertyInit::Table => 1.0,
                PropertyInit::MaskedTarget => f64::from(u8::from(p != 0)),
                PropertyInit::RoleOnly => 0.0,
            })
            .collect();
        let keep = tape.constant(Tensor::column(keep))?;
        let props = tape.mul(props, keep)?;
        let props = tape.add(props, role)?;
        let motif_table = tape.param(store, self.params.motif_table);
        let motifs = tape.gather_rows(motif_table, g.sources(NodeKind::Motif))?;
        Ok(tape.concat_rows(&[structural, props, motifs])?)
    }

    /// One weighted message-passing layer without parameters of its own
    /// beyond the shared edge embeddings.
    pub fn message_layer(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        h: Var,
        arcs: &MessageArcs,
    ) -> Result<Var, EncoderError> {
        let edge = tape.param(store, self.params.edge);
        Ok(message_layer(tape, h, edge, arcs)?)
    }

    /// Runs the global encoder; returns `[h^0, h^1, ..., h^k]`.
    pub fn global_encode(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        h0: Var,
        arcs: &MessageArcs,
    ) -> Result<Vec<Var>, EncoderError> {
        let mut layers = vec![h0];
        let mut h = h0;
        for k in 0..self.config.global_layers {
            h = self.message_layer(tape, store, h, arcs)?;
            if let Some(&l) = self.params.global.get(k) {
                let lin = self.linear(tape, store, h, l)?;
                h = tape.relu(lin)?;
            }
            layers.push(h);
        }
        Ok(layers)
    }

    /// Encodes each subgraph with the chosen dedicated encoder and mean-pools
    /// it; one output row per subgraph.
    #[allow(clippy::too_many_arguments)]
    pub fn encode_subgraphs(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        encoder: SubgraphEncoder,
        g: &ContextGraph,
        weights: &EdgeWeights,
        subgraphs: &[LocalSubgraph],
        h: Var,
    ) -> Result<Var, EncoderError> {
        let (expected, layer) = match encoder {
            SubgraphEncoder::Molecule => (NodeKind::Molecule, self.params.phi_mol),
            SubgraphEncoder::Property => (NodeKind::Property, self.params.phi_prop),
        };
        if let Some(s) = subgraphs.iter().find(|s| s.center.kind != expected) {
            return Err(EncoderError::CenterKind { expected, got: s.center.kind });
        }
        let batch = SubgraphBatch::new(g, weights, subgraphs);
        let x = tape.gather_rows(h, &batch.nodes)?;
        let y = self.message_layer(tape, store, x, &batch.arcs)?;
        let lin = self.linear(tape, store, y, layer)?;
        let z = tape.relu(lin)?;
        let pooled = tape.scatter_add(z, &batch.segment, subgraphs.len())?;
        let inv = tape.constant(Tensor::column(batch.sizes.iter().map(|&s| 1.0 / s as f64).collect()))?;
        Ok(tape.mul(pooled, inv)?)
    }

    /// Logits for rows of `[structural; h_mol; h_prop]`.
    pub fn score(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        structural: Var,
        h_mol: Var,
        h_prop: Var,
    ) -> Result<Var, EncoderError> {
        let x = tape.concat_cols(&[structural, h_mol, h_prop])?;
        let hidden = self.linear(tape, store, x, self.params.head_hidden)?;
        let hidden = tape.relu(hidden)?;
        Ok(self.linear(tape, store, hidden, self.params.head_out)?)
    }

    /// Full forward pass over one context graph. `molecules` are the graphs
    /// of the molecule nodes in local order; `scored` lists the local
    /// molecule ids to score against the target property.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParameterStore,
        g: &ContextGraph,
        weights: &EdgeWeights,
        molecules: &[&MolecularGraph],
        scored: &[usize],
    ) -> Result<EpisodeForward, EncoderError> {
        let structural = self.structural_encode(tape, store, molecules)?;
        let h0 = self.initial_features(tape, store, g, structural)?;
        let arcs = MessageArcs::from_graph(g, weights);
        let layers = self.global_encode(tape, store, h0, &arcs)?;
        let h = *layers.last().expect("at least h0");
        let target = g.index(g.target());
        let (h_mol, h_prop) = match self.config.readout {
            Readout::Node => {
                let h_mol = tape.gather_rows(h, scored)?;
                let h_prop = tape.gather_rows(h, &vec![target; scored.len()])?;
                (h_mol, h_prop)
            }
            Readout::Subgraph => {
                let subs: Vec<LocalSubgraph> = scored
                    .iter()
                    .map(|&m| extract_subgraph(g, NodeRef { kind: NodeKind::Molecule, id: m }))
                    .collect();
                let h_mol = self.encode_subgraphs(tape, store, SubgraphEncoder::Molecule, g, weights, &subs, h)?;
                let prop_sub = extract_subgraph(g, g.target());
                let one = self.encode_subgraphs(tape, store, SubgraphEncoder::Property, g, weights, &[prop_sub], h)?;
                let h_prop = tape.gather_rows(one, &vec![0; scored.len()])?;
                (h_mol, h_prop)
            }
        };
        let s = tape.gather_rows(structural, scored)?;
        let logits = self.score(tape, store, s, h_mol, h_prop)?;
        Ok(EpisodeForward { logits, structural, layers, h_mol, h_prop })
    }
}

/// Handles into the tape for one forward pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeForward {
    /// `n x 1`, one per scored molecule.
    pub logits: Var,
    /// `molecules x d`.
    pub structural: Var,
    /// Global encoder output per layer, `h^0` first.
    pub layers: Vec<Var>,
    pub h_mol: Var,
    pub h_prop: Var,
}

/// Directed messages `src -> dst` with their edge label and weight.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MessageArcs {
    pub nodes: usize,
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    pub label: Vec<usize>,
    pub weight: Vec<f64>,
}

impl MessageArcs {
    pub fn from_graph(g: &ContextGraph, weights: &EdgeWeights) -> Self {
        let mut arcs = Self { nodes: g.node_count(), ..Self::default() };
        for (e, edge) in g.edges().iter().enumerate() {
            arcs.push(edge.a, edge.b, edge.label.index(), weights.into[e][0]);
            arcs.push(edge.b, edge.a, edge.label.index(), weights.into[e][1]);
        }
        arcs
    }

    pub fn push(&mut self, dst: usize, src: usize, label: usize, weight: f64) {
        self.dst.push(dst);
        self.src.push(src);
        self.label.push(label);
        self.weight.push(weight);
    }
}

/// `h + scatter(w * (h[src] + e[label]))`.
pub fn message_layer(tape: &mut Tape, h: Var, edge: Var, arcs: &MessageArcs) -> Result<Var, AutodiffError> {
    let hs = tape.gather_rows(h, &arcs.src)?;
    let es = tape.gather_rows(edge, &arcs.label)?;
    let msg = tape.add(hs, es)?;
    let w = tape.constant(Tensor::column(arcs.weight.clone()))?;
    let weighted = tape.mul(msg, w)?;
    let agg = tape.scatter_add(weighted, &arcs.dst, arcs.nodes)?;
    tape.add(agg, h)
}

/// The centre, its 1-hop neighbours and every context edge among them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalSubgraph {
    pub center: NodeRef,
    /// Global node indices, centre first.
    pub nodes: Vec<usize>,
    /// Context edge ids, ascending.
    pub edges: Vec<usize>,
}

pub fn extract_subgraph(g: &ContextGraph, center: NodeRef) -> LocalSubgraph {
    let c = g.index(center);
    let mut nodes = vec![c];
    nodes.extend(g.neighbors(c).iter().map(|&(v, _)| v));
    let members: BTreeSet<usize> = nodes.iter().copied().collect();
    let mut edges = BTreeSet::new();
    for &u in &nodes {
        for &(v, e) in g.neighbors(u) {
            if members.contains(&v) {
                edges.insert(e);
            }
        }
    }
    LocalSubgraph { center, nodes, edges: edges.into_iter().collect() }
}

/// Disjoint union of subgraphs with inherited edge weights.
struct SubgraphBatch {
    nodes: Vec<usize>,
    segment: Vec<usize>,
    sizes: Vec<usize>,
    arcs: MessageArcs,
}

impl SubgraphBatch {
    fn new(g: &ContextGraph, weights: &EdgeWeights, subgraphs: &[LocalSubgraph]) -> Self {
        let mut nodes = Vec::new();
        let mut segment = Vec::new();
        let mut sizes = Vec::new();
        let mut arcs = MessageArcs::default();
        for (s, sub) in subgraphs.iter().enumerate() {
            let offset = nodes.len();
            let local = |global: usize| offset + sub.nodes.iter().position(|&n| n == global).expect("edge inside subgraph");
            for &e in &sub.edges {
                let edge = g.edges()[e];
                let (a, b) = (local(edge.a), local(edge.b));
                arcs.push(a, b, edge.label.index(), weights.into[e][0]);
                arcs.push(b, a, edge.label.index(), weights.into[e][1]);
            }
            nodes.extend_from_slice(&sub.nodes);
            segment.extend(core::iter::repeat_n(s, sub.nodes.len()));
            sizes.push(sub.nodes.len());
        }
        arcs.nodes = nodes.len();
        Self { nodes, segment, sizes, arcs }
    }
}

/// Atom features and bonds of several molecules as one disjoint graph.
struct AtomBatch {
    atoms: usize,
    features: Tensor,
    src: Vec<usize>,
    dst: Vec<usize>,
    molecule_of: Vec<usize>,
}

impl AtomBatch {
    fn new(molecules: &[&MolecularGraph]) -> Self {
        let atoms: usize = molecules.iter().map(|m| m.atom_count()).sum();
        let mut features = Tensor::zeros(atoms, ATOM_FEATURES);
        let (mut src, mut dst, mut molecule_of) = (Vec::new(), Vec::new(), Vec::with_capacity(atoms));
        let mut offset = 0;
        for (mi, m) in molecules.iter().enumerate() {
            for a in m.atoms() {
                let row = features.row_mut(offset + a.index);
                row[a.element.ordinal()] = 1.0;
                row[ATOM_FEATURES - 1] = f64::from(u8::from(a.aromatic));
                molecule_of.push(mi);
            }
            for b in m.bonds() {
                let (u, v) = (offset + b.endpoints.0, offset + b.endpoints.1);
                src.extend([u, v]);
                dst.extend([v, u]);
            }
            offset += m.atom_count();
        }
        Self { atoms, features, src, dst, molecule_of }
    }
}
