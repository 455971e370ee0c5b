//! Random ring-and-linker molecules labelled by substructure rules.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};

use super::dataset::{DatasetError, PropertyDataset};
use crate::molgraph::{parse_smiles, Atom, Bond, BondOrder, Element, MolecularGraph, SmilesError};
use crate::rng::{derive_seed, Rng as StreamRng};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SyntheticError {
    #[error("motif {smiles:?} does not parse: {source}")]
    InvalidMotif { smiles: String, source: SmilesError },
    #[error("property {property:?}: motif {smiles:?} cannot occur in any generated molecule")]
    ImpossibleMotif { property: String, smiles: String },
    #[error("palette block {smiles:?} is invalid: {reason}")]
    InvalidBlock { smiles: String, reason: &'static str },
    #[error("no motif rules given")]
    NoRules,
    #[error("block range {min}..={max} is empty or zero")]
    BlockRange { min: usize, max: usize },
    #[error("label dropout {0} is outside [0, 1)")]
    Dropout(f64),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// "Property `property` is 1 iff the molecule contains `smiles`."
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotifRule {
    pub property: String,
    pub smiles: String,
    pattern: MolecularGraph,
}

impl MotifRule {
    pub fn new(property: &str, smiles: &str) -> Result<Self, SyntheticError> {
        let pattern = parse_smiles(smiles)
            .map_err(|source| SyntheticError::InvalidMotif { smiles: smiles.to_string(), source })?;
        Ok(Self { property: property.to_string(), smiles: smiles.to_string(), pattern })
    }

    pub fn pattern(&self) -> &MolecularGraph {
        &self.pattern
    }

    pub fn applies(&self, m: &MolecularGraph) -> bool {
        contains_substructure(m, &self.pattern)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_molecules: usize,
    /// Ring blocks, each joined to an earlier one by a carbon linker.
    pub palette: Vec<String>,
    pub min_blocks: usize,
    pub max_blocks: usize,
    /// Linker length is uniform in `0..=max_linker` carbons; 0 is a direct bond.
    pub max_linker: usize,
    /// Probability that any single label is hidden.
    pub label_dropout: f64,
}

impl SyntheticConfig {
    /// Four ring-size rules over a ten-block palette; the last rule is the
    /// held-out test property. All-carbon rings of different sizes look
    /// alike to a few rounds of neighbour-sum message passing, so the rules
    /// are hard to read off atom features alone.
    pub fn benchmark(label_dropout: f64) -> (Self, Vec<MotifRule>) {
        let palette = [
            "C1CC1", "C1CCC1", "C1CCCC1", "C1CCCCC1", "C1CCCCCC1", "c1ccccc1", "C1CCOC1", "C1CCNCC1", "c1ccncc1", "c1ccoc1",
        ];
        let config = Self {
            n_molecules: 600,
            palette: palette.iter().map(|s| s.to_string()).collect(),
            min_blocks: 2,
            max_blocks: 4,
            max_linker: 2,
            label_dropout,
        };
        let rules = [("cyclopropyl", "C1CC1"), ("cyclobutyl", "C1CCC1"), ("cycloheptyl", "C1CCCCCC1"), ("cyclohexyl", "C1CCCCC1")]
            .iter()
            .map(|(p, s)| MotifRule::new(p, s).expect("benchmark rules parse"))
            .collect();
        (config, rules)
    }
}

/// Generates `config.n_molecules` molecules and labels them by `rules`.
///
/// Molecule shapes come from the `"molecules"` substream of `seed` and label
/// dropout from `"label_dropout"`, so changing the dropout rate leaves the
/// molecules unchanged. Every SMILES is the writer's output and re-parses to
/// the stored graph.
pub fn generate_synthetic(
    config: &SyntheticConfig,
    rules: &[MotifRule],
    seed: u64,
) -> Result<PropertyDataset, SyntheticError> {
    if rules.is_empty() {
        return Err(SyntheticError::NoRules);
    }
    if config.min_blocks == 0 || config.min_blocks > config.max_blocks {
        return Err(SyntheticError::BlockRange { min: config.min_blocks, max: config.max_blocks });
    }
    if !(0.0..1.0).contains(&config.label_dropout) {
        return Err(SyntheticError::Dropout(config.label_dropout));
    }
    if config.n_molecules == 0 {
        return Err(DatasetError::NoMolecules.into());
    }
    let mut palette = Vec::with_capacity(config.palette.len());
    for s in &config.palette {
        let g = parse_smiles(s).map_err(|_| SyntheticError::InvalidBlock { smiles: s.clone(), reason: "unparsable" })?;
        if !g.atoms().iter().any(|a| a.element == Element::C) {
            return Err(SyntheticError::InvalidBlock { smiles: s.clone(), reason: "no carbon to attach linkers to" });
        }
        palette.push(g);
    }
    if palette.is_empty() {
        return Err(SyntheticError::InvalidBlock { smiles: String::new(), reason: "empty palette" });
    }
    for r in rules {
        if !palette.iter().any(|b| contains_substructure(b, &r.pattern)) {
            return Err(SyntheticError::ImpossibleMotif { property: r.property.clone(), smiles: r.smiles.clone() });
        }
    }

    let mut shapes = StreamRng::seed_from_u64(derive_seed(seed, "molecules"));
    let mut dropout = StreamRng::seed_from_u64(derive_seed(seed, "label_dropout"));
    let mut rows = Vec::with_capacity(config.n_molecules);
    for _ in 0..config.n_molecules {
        let built = assemble(config, &palette, &mut shapes);
        let smiles = built.to_smiles();
        let g = parse_smiles(&smiles).expect("writer output re-parses");
        let labels = rules
            .iter()
            .map(|r| {
                let y = r.applies(&g);
                let hidden = config.label_dropout > 0.0 && dropout.random_bool(config.label_dropout);
                (!hidden).then_some(y)
            })
            .collect();
        rows.push((smiles, g, labels));
    }
    let properties = rules.iter().map(|r| r.property.clone()).collect();
    Ok(PropertyDataset::new(properties, rows)?)
}

fn assemble<R: Rng + ?Sized>(config: &SyntheticConfig, palette: &[MolecularGraph], rng: &mut R) -> MolecularGraph {
    let n_blocks = rng.random_range(config.min_blocks..=config.max_blocks);
    let mut atoms: Vec<Atom> = Vec::new();
    let mut bonds: Vec<Bond> = Vec::new();
    let mut degree: Vec<usize> = Vec::new();
    let mut block_atoms: Vec<Vec<usize>> = Vec::new();

    fn add_atom(atoms: &mut Vec<Atom>, degree: &mut Vec<usize>, element: Element, aromatic: bool) -> usize {
        let index = atoms.len();
        atoms.push(Atom { element, aromatic, index });
        degree.push(0);
        index
    }
    fn add_bond(bonds: &mut Vec<Bond>, degree: &mut [usize], u: usize, v: usize, order: BondOrder) {
        bonds.push(Bond { endpoints: (u, v), order });
        degree[u] += 1;
        degree[v] += 1;
    }
    // ring carbons take at most one substituent
    let free_carbon = |atoms: &[Atom], degree: &[usize], block: &[usize], rng: &mut R| -> Option<usize> {
        let free: Vec<usize> = block.iter().copied().filter(|&a| atoms[a].element == Element::C && degree[a] < 3).collect();
        (!free.is_empty()).then(|| free[rng.random_range(0..free.len())])
    };

    for b in 0..n_blocks {
        let block = &palette[rng.random_range(0..palette.len())];
        let offset = atoms.len();
        let mut mine = Vec::with_capacity(block.atom_count());
        for a in block.atoms() {
            mine.push(add_atom(&mut atoms, &mut degree, a.element, a.aromatic));
        }
        for bond in block.bonds() {
            add_bond(&mut bonds, &mut degree, offset + bond.endpoints.0, offset + bond.endpoints.1, bond.order);
        }
        if b > 0 {
            // attach to a random earlier block that still has a free carbon
            let start = rng.random_range(0..block_atoms.len());
            let mut anchor = None;
            for i in 0..block_atoms.len() {
                let earlier = &block_atoms[(start + i) % block_atoms.len()];
                if let Some(a) = free_carbon(&atoms, &degree, earlier, rng) {
                    anchor = Some(a);
                    break;
                }
            }
            let here = free_carbon(&atoms, &degree, &mine, rng);
            if let (Some(mut prev), Some(here)) = (anchor, here) {
                for _ in 0..rng.random_range(0..=config.max_linker) {
                    let c = add_atom(&mut atoms, &mut degree, Element::C, false);
                    add_bond(&mut bonds, &mut degree, prev, c, BondOrder::Single);
                    prev = c;
                }
                add_bond(&mut bonds, &mut degree, prev, here, BondOrder::Single);
            } else {
                // nowhere to attach: drop the block again
                atoms.truncate(offset);
                degree.truncate(offset);
                bonds.retain(|bd| bd.endpoints.0 < offset && bd.endpoints.1 < offset);
                continue;
            }
        }
        block_atoms.push(mine);
    }
    MolecularGraph::from_parts(atoms, bonds).expect("assembled graph is valid")
}

/// True iff `pattern` maps injectively into `g` preserving element,
/// aromaticity and every pattern bond with its order (a subgraph
/// monomorphism; extra bonds in `g` are allowed).
pub fn contains_substructure(g: &MolecularGraph, pattern: &MolecularGraph) -> bool {
    let n = pattern.atom_count();
    if n == 0 {
        return true;
    }
    if n > g.atom_count() || pattern.bond_count() > g.bond_count() {
        return false;
    }
    // match pattern atoms in BFS order so each new atom has a mapped neighbour
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        order.push(root);
        let mut head = order.len() - 1;
        while head < order.len() {
            let u = order[head];
            head += 1;
            for &(v, _) in pattern.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    order.push(v);
                }
            }
        }
    }
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; g.atom_count()];
    extend(g, pattern, &order, 0, &mut map, &mut used)
}

fn extend(
    g: &MolecularGraph,
    p: &MolecularGraph,
    order: &[usize],
    depth: usize,
    map: &mut [usize],
    used: &mut [bool],
) -> bool {
    if depth == order.len() {
        return true;
    }
    let u = order[depth];
    let pu = &p.atoms()[u];
    for t in 0..g.atom_count() {
        let ta = &g.atoms()[t];
        if used[t] || ta.element != pu.element || ta.aromatic != pu.aromatic || g.degree(t) < p.degree(u) {
            continue;
        }
        let consistent = p.neighbors(u).iter().all(|&(v, bond)| {
            map[v] == usize::MAX
                || g.bond_between(t, map[v]).is_some_and(|gb| g.bonds()[gb].order == p.bonds()[bond].order)
        });
        if !consistent {
            continue;
        }
        map[u] = t;
        used[t] = true;
        if extend(g, p, order, depth + 1, map, used) {
            return true;
        }
        map[u] = usize::MAX;
        used[t] = false;
    }
    false
}
