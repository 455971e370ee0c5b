//! Motif extraction by bridge-bond detachment and the motif dictionary.
//!
//! A bond `(u, v)` is detached when both endpoints have degree at least two,
//! at least one endpoint is a ring atom, and the bond itself is a
//! graph-theoretic bridge. Every connected component left after detaching is
//! a motif, including single atoms.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::molgraph::MolecularGraph;

/// Canonicalization is exact and exponential in the worst case.
pub const MAX_CANONICAL_ATOMS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MotifError {
    #[error("motif with {0} atoms exceeds the canonicalization limit of {MAX_CANONICAL_ATOMS}")]
    TooLarge(usize),
    #[error("motif dictionary capacity must be positive")]
    ZeroCapacity,
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("dictionary has {entries} entries but capacity {capacity}")]
    OverCapacity { entries: usize, capacity: usize },
    #[error("dictionary entry {0} has zero frequency")]
    ZeroFrequency(usize),
    #[error("dictionary entry {0} repeats an earlier code")]
    DuplicateCode(usize),
    #[error("dictionary entries are not in frequency-then-code order at entry {0}")]
    Unordered(usize),
}

/// Isomorphism-invariant byte code of a labeled graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MotifCode(Vec<u8>);

impl MotifCode {
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        Self(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        const DIGITS: &[u8; 16] = b"0123456789abcdef";
        let mut s = String::with_capacity(self.0.len() * 2);
        for b in &self.0 {
            s.push(DIGITS[(b >> 4) as usize] as char);
            s.push(DIGITS[(b & 0xf) as usize] as char);
        }
        s
    }

    pub fn from_hex(hex: &str) -> Option<Self> {
        let bytes = hex.as_bytes();
        if bytes.len() % 2 != 0 {
            return None;
        }
        let nibble = |c: u8| match c {
            b'0'..=b'9' => Some(c - b'0'),
            b'a'..=b'f' => Some(c - b'a' + 10),
            b'A'..=b'F' => Some(c - b'A' + 10),
            _ => None,
        };
        bytes
            .chunks(2)
            .map(|p| Some(nibble(p[0])? << 4 | nibble(p[1])?))
            .collect::<Option<Vec<u8>>>()
            .map(Self)
    }
}

impl fmt::Display for MotifCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// A motif: an owned copy of a connected fragment plus its canonical code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Motif {
    pub graph: MolecularGraph,
    pub code: MotifCode,
    /// Atom indices in the source molecule, parallel to `graph.atoms()`.
    pub source_atoms: Vec<usize>,
}

impl Motif {
    /// SMILES written in canonical atom order; identical for isomorphic motifs.
    pub fn canonical_smiles(&self) -> String {
        canonical_smiles(&self.graph).unwrap_or_else(|_| self.graph.to_smiles())
    }
}

/// Bond indices detached during motif extraction, ascending.
pub fn find_bridge_bonds(g: &MolecularGraph) -> Vec<usize> {
    let ring = g.ring_atoms();
    g.bonds()
        .iter()
        .enumerate()
        .filter(|&(bi, b)| {
            let (u, v) = b.endpoints;
            g.degree(u) >= 2 && g.degree(v) >= 2 && (ring[u] || ring[v]) && g.is_bridge(bi)
        })
        .map(|(bi, _)| bi)
        .collect()
}

/// Detaches all bridge bonds and returns the components, ordered by their
/// smallest source atom.
pub fn extract_motifs(g: &MolecularGraph) -> Result<Vec<Motif>, MotifError> {
    let mut removed = vec![false; g.bond_count()];
    for b in find_bridge_bonds(g) {
        removed[b] = true;
    }
    g.components_without(&removed)
        .into_iter()
        .map(|atoms| {
            let graph = g.induced(&atoms);
            let code = canonical_code(&graph)?;
            Ok(Motif { graph, code, source_atoms: atoms })
        })
        .collect()
}

/// Canonical code of a connected labeled graph with at most
/// [`MAX_CANONICAL_ATOMS`] atoms.
pub fn canonical_code(g: &MolecularGraph) -> Result<MotifCode, MotifError> {
    canonical_labeling(g).map(|(code, _)| code)
}

/// Canonical code and the canonical order (`order[k]` is the atom placed at
/// position `k`).
pub fn canonical_labeling(g: &MolecularGraph) -> Result<(MotifCode, Vec<usize>), MotifError> {
    let n = g.atom_count();
    if n > MAX_CANONICAL_ATOMS {
        return Err(MotifError::TooLarge(n));
    }
    let initial: Vec<(u8, usize)> = g.atoms().iter().map(|a| (a.label(), g.degree(a.index))).collect();
    let colors = dense_rank(&initial);
    let mut best: Option<(Vec<u8>, Vec<usize>)> = None;
    search(g, colors, &mut best);
    let (bytes, order) = best.unwrap_or_else(|| (vec![0], Vec::new()));
    Ok((MotifCode(bytes), order))
}

pub fn canonical_smiles(g: &MolecularGraph) -> Result<String, MotifError> {
    let (_, order) = canonical_labeling(g)?;
    let p = g.permuted(&order);
    // neighbour order follows bond order, so bonds must be sorted too
    let mut bonds = p.bonds().to_vec();
    for b in &mut bonds {
        let (u, v) = b.endpoints;
        b.endpoints = (u.min(v), u.max(v));
    }
    bonds.sort_by_key(|b| b.endpoints);
    let sorted = MolecularGraph::from_parts(p.atoms().to_vec(), bonds).expect("relabelled valid graph");
    Ok(sorted.to_smiles())
}

fn dense_rank<T: Ord + Clone>(keys: &[T]) -> Vec<u32> {
    let mut sorted: Vec<T> = keys.to_vec();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).expect("key present") as u32)
        .collect()
}

fn color_count(colors: &[u32]) -> usize {
    colors.iter().max().map_or(0, |&m| m as usize + 1)
}

/// Colour refinement to the coarsest equitable partition. Colours stay dense
/// ranks, and the relative order of existing cells is preserved.
fn refine(g: &MolecularGraph, colors: &mut Vec<u32>) {
    loop {
        let before = color_count(colors);
        let signatures: Vec<(u32, Vec<(u8, u32)>)> = (0..g.atom_count())
            .map(|u| {
                let mut around: Vec<(u8, u32)> = g
                    .neighbors(u)
                    .iter()
                    .map(|&(v, b)| (g.bonds()[b].order.code(), colors[v]))
                    .collect();
                around.sort_unstable();
                (colors[u], around)
            })
            .collect();
        *colors = dense_rank(&signatures);
        if color_count(colors) == before {
            return;
        }
    }
}

fn search(g: &MolecularGraph, mut colors: Vec<u32>, best: &mut Option<(Vec<u8>, Vec<usize>)>) {
    refine(g, &mut colors);
    let n = g.atom_count();
    if color_count(&colors) == n {
        let mut order = vec![0usize; n];
        for (atom, &c) in colors.iter().enumerate() {
            order[c as usize] = atom;
        }
        let bytes = serialize(g, &colors, n);
        if best.as_ref().is_none_or(|(b, _)| bytes < *b) {
            *best = Some((bytes, order));
        }
        return;
    }
    let mut sizes = vec![0usize; color_count(&colors)];
    for &c in &colors {
        sizes[c as usize] += 1;
    }
    let target = sizes.iter().position(|&s| s > 1).expect("non-discrete partition") as u32;
    for v in (0..n).filter(|&u| colors[u] == target) {
        let keys: Vec<(u32, bool)> = colors
            .iter()
            .enumerate()
            .map(|(u, &c)| (c, c == target && u != v))
            .collect();
        search(g, dense_rank(&keys), best);
    }
}

fn serialize(g: &MolecularGraph, position: &[u32], n: usize) -> Vec<u8> {
    let mut labels = vec![0u8; n];
    for a in g.atoms() {
        labels[position[a.index] as usize] = a.label();
    }
    let mut edges: Vec<(u8, u8, u8)> = g
        .bonds()
        .iter()
        .map(|b| {
            let (u, v) = (position[b.endpoints.0] as u8, position[b.endpoints.1] as u8);
            (u.min(v), u.max(v), b.order.code())
        })
        .collect();
    edges.sort_unstable();
    let mut out = Vec::with_capacity(1 + n + 3 * edges.len());
    out.push(n as u8);
    out.extend_from_slice(&labels);
    for (u, v, o) in edges {
        out.extend_from_slice(&[u, v, o]);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DictionaryEntry {
    pub code: MotifCode,
    pub frequency: u64,
    pub example_smiles: String,
}

/// Top-K motifs by corpus frequency, ties broken by ascending code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotifDictionary {
    entries: Vec<DictionaryEntry>,
    capacity: usize,
    index: BTreeMap<MotifCode, usize>,
}

impl MotifDictionary {
    /// Validates ordering, positivity and capacity of imported entries.
    pub fn from_entries(entries: Vec<DictionaryEntry>, capacity: usize) -> Result<Self, MotifError> {
        if capacity == 0 {
            return Err(MotifError::ZeroCapacity);
        }
        if entries.len() > capacity {
            return Err(MotifError::OverCapacity { entries: entries.len(), capacity });
        }
        let mut index = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            if e.frequency == 0 {
                return Err(MotifError::ZeroFrequency(i));
            }
            if i > 0 {
                let prev = &entries[i - 1];
                let ordered = prev.frequency > e.frequency
                    || (prev.frequency == e.frequency && prev.code < e.code);
                if !ordered && prev.code != e.code {
                    return Err(MotifError::Unordered(i));
                }
            }
            if index.insert(e.code.clone(), i).is_some() {
                return Err(MotifError::DuplicateCode(i));
            }
        }
        Ok(Self { entries, capacity, index })
    }

    pub fn entries(&self) -> &[DictionaryEntry] {
        &self.entries
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, code: &MotifCode) -> Option<usize> {
        self.index.get(code).copied()
    }

    /// Distinct dictionary entries occurring in `g`, ascending.
    pub fn motif_ids(&self, g: &MolecularGraph) -> Result<Vec<usize>, MotifError> {
        let mut ids: Vec<usize> = extract_motifs(g)?
            .iter()
            .filter_map(|m| self.position(&m.code))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        Ok(ids)
    }
}

/// Counts every motif occurrence across the corpus and keeps the top `k`.
pub fn build_dictionary(corpus: &[MolecularGraph], k: usize) -> Result<MotifDictionary, MotifError> {
    if k == 0 {
        return Err(MotifError::ZeroCapacity);
    }
    if corpus.is_empty() {
        return Err(MotifError::EmptyCorpus);
    }
    let mut counts: BTreeMap<MotifCode, (u64, Motif)> = BTreeMap::new();
    for g in corpus {
        for m in extract_motifs(g)? {
            counts
                .entry(m.code.clone())
                .and_modify(|(c, _)| *c += 1)
                .or_insert((1, m));
        }
    }
    let mut ranked: Vec<(MotifCode, u64, Motif)> =
        counts.into_iter().map(|(code, (c, m))| (code, c, m)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    let entries = ranked
        .into_iter()
        .map(|(code, frequency, m)| DictionaryEntry { example_smiles: m.canonical_smiles(), code, frequency })
        .collect();
    MotifDictionary::from_entries(entries, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::{parse_smiles, Atom, Bond, BondOrder, Element};
    use proptest::prelude::*;

    fn parse(s: &str) -> MolecularGraph {
        parse_smiles(s).unwrap()
    }

    fn code(s: &str) -> MotifCode {
        canonical_code(&parse(s)).unwrap()
    }

    /// Labeled isomorphism by trying every bijection.
    fn brute_isomorphic(a: &MolecularGraph, b: &MolecularGraph) -> bool {
        fn key(g: &MolecularGraph, perm: &[usize]) -> (Vec<u8>, Vec<(usize, usize, u8)>) {
            let mut pos = vec![0; perm.len()];
            for (k, &v) in perm.iter().enumerate() {
                pos[v] = k;
            }
            let labels = perm.iter().map(|&v| g.atoms()[v].label()).collect();
            let mut edges: Vec<_> = g
                .bonds()
                .iter()
                .map(|bd| {
                    let (u, v) = (pos[bd.endpoints.0], pos[bd.endpoints.1]);
                    (u.min(v), u.max(v), bd.order.code())
                })
                .collect();
            edges.sort_unstable();
            (labels, edges)
        }
        fn permutations(n: usize) -> Vec<Vec<usize>> {
            if n == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for p in permutations(n - 1) {
                for i in 0..=p.len() {
                    let mut q = p.clone();
                    q.insert(i, n - 1);
                    out.push(q);
                }
            }
            out
        }
        if a.atom_count() != b.atom_count() || a.bond_count() != b.bond_count() {
            return false;
        }
        let identity: Vec<usize> = (0..a.atom_count()).collect();
        let target = key(a, &identity);
        permutations(b.atom_count()).iter().any(|p| key(b, p) == target)
    }

    #[test]
    fn toluene_has_no_bridge_bonds() {
        let g = parse("Cc1ccccc1");
        assert!(find_bridge_bonds(&g).is_empty());
        let motifs = extract_motifs(&g).unwrap();
        assert_eq!(motifs.len(), 1);
        assert_eq!(motifs[0].graph.atom_count(), 7);
    }

    #[test]
    fn biphenyl_splits_into_two_benzenes() {
        let g = parse("c1ccccc1-c1ccccc1");
        assert_eq!(g.bond_count(), 13);
        let bridges = find_bridge_bonds(&g);
        assert_eq!(bridges.len(), 1);
        assert_eq!(g.bonds()[bridges[0]].endpoints, (5, 6));
        let motifs = extract_motifs(&g).unwrap();
        assert_eq!(motifs.len(), 2);
        assert_eq!(motifs[0].code, code("c1ccccc1"));
        assert_eq!(motifs[1].code, code("c1ccccc1"));
    }

    #[test]
    fn ethylbenzene_splits_ring_and_ethyl() {
        let g = parse("c1ccccc1CC");
        assert_eq!(find_bridge_bonds(&g), vec![g.bond_between(5, 6).unwrap()]);
        let motifs = extract_motifs(&g).unwrap();
        assert_eq!(motifs.len(), 2);
        assert_eq!(motifs[0].code, code("c1ccccc1"));
        assert_eq!(motifs[1].code, code("CC"));
        assert_eq!(motifs[1].source_atoms, vec![6, 7]);
    }

    #[test]
    fn single_atoms_and_fused_rings() {
        // the linker CH2 of diphenylmethane becomes a one-atom motif
        let motifs = extract_motifs(&parse("c1ccccc1Cc1ccccc1")).unwrap();
        assert_eq!(motifs.len(), 3);
        assert_eq!(motifs[1].code, code("C"));
        assert_eq!(code("C"), canonical_code(&parse("C")).unwrap());
        // ring-internal bonds of a fused system are never detached
        assert!(find_bridge_bonds(&parse("c1ccc2ccccc2c1")).is_empty());
    }

    #[test]
    fn codes_distinguish_aromaticity_and_elements() {
        assert_ne!(code("c1ccccc1"), code("C1CCCCC1"));
        assert_ne!(code("c1ccncc1"), code("c1ccccc1"));
        assert_ne!(code("C=CC"), code("CCC"));
        assert_eq!(code("c1ccccc1"), code("c1ccc(cc1)"));
        assert_eq!(code("OCC"), code("CCO"));
        let benzene = parse("c1ccccc1");
        let cyclohexane = parse("C1CCCCC1");
        assert!(!brute_isomorphic(&benzene, &cyclohexane));
    }

    #[test]
    fn too_large_is_rejected() {
        let chain = "C".repeat(MAX_CANONICAL_ATOMS + 1);
        assert_eq!(canonical_code(&parse(&chain)), Err(MotifError::TooLarge(MAX_CANONICAL_ATOMS + 1)));
    }

    #[test]
    fn hex_round_trip() {
        let c = code("c1ccccc1CC");
        assert_eq!(MotifCode::from_hex(&c.to_hex()), Some(c.clone()));
        assert_eq!(MotifCode::from_hex("zz"), None);
        assert_eq!(MotifCode::from_hex("abc"), None);
    }

    #[test]
    fn dictionary_examples() {
        let d = build_dictionary(&[parse("c1ccccc1-c1ccccc1")], 8).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.entries()[0].code, code("c1ccccc1"));
        assert_eq!(d.entries()[0].frequency, 2);

        let toluene = parse("Cc1ccccc1");
        let d = build_dictionary(&[toluene.clone(), toluene], 1).unwrap();
        assert_eq!(d.entries()[0].frequency, 2);
        assert_eq!(d.entries()[0].code, code("Cc1ccccc1"));

        let d = build_dictionary(&[parse("c1ccccc1-c1ccccc1"), parse("c1ccccc1CC")], 1).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.entries()[0].code, code("c1ccccc1"));
        assert_eq!(d.entries()[0].frequency, 3);

        assert_eq!(build_dictionary(&[parse("CC")], 0), Err(MotifError::ZeroCapacity));
        assert_eq!(build_dictionary(&[], 3), Err(MotifError::EmptyCorpus));
    }

    #[test]
    fn dictionary_is_independent_of_corpus_order() {
        let mut corpus: Vec<MolecularGraph> =
            ["c1ccccc1CC", "C1CC1CCC1CC1", "c1ccccc1-c1ccncc1", "CC(C)C", "C1CCOC1Cc1ccccc1", "OCC1CC1"]
                .iter()
                .map(|s| parse(s))
                .collect();
        let a = build_dictionary(&corpus, 4).unwrap();
        corpus.reverse();
        let b = build_dictionary(&corpus, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn from_entries_validates_order() {
        let e = |code: &str, frequency| DictionaryEntry {
            code: MotifCode::from_hex(code).unwrap(),
            frequency,
            example_smiles: String::new(),
        };
        assert!(MotifDictionary::from_entries(vec![e("02", 5), e("01", 3), e("03", 3)], 3).is_ok());
        assert_eq!(MotifDictionary::from_entries(vec![e("01", 3), e("02", 5)], 3), Err(MotifError::Unordered(1)));
        assert_eq!(MotifDictionary::from_entries(vec![e("02", 3), e("01", 3)], 3), Err(MotifError::Unordered(1)));
        assert_eq!(MotifDictionary::from_entries(vec![e("01", 3), e("01", 3)], 3), Err(MotifError::DuplicateCode(1)));
        assert_eq!(MotifDictionary::from_entries(vec![e("01", 0)], 3), Err(MotifError::ZeroFrequency(0)));
        assert!(matches!(
            MotifDictionary::from_entries(vec![e("01", 2), e("02", 1)], 1),
            Err(MotifError::OverCapacity { .. })
        ));
    }

    fn arb_small_graph(max: usize) -> impl Strategy<Value = MolecularGraph> {
        (1usize..=max)
            .prop_flat_map(|n| {
                let parents: Vec<_> = (1..n).map(|i| 0..i).collect();
                (
                    Just(n),
                    parents,
                    proptest::collection::vec((0..n, 0..n, 0u8..2), 0..4),
                    proptest::collection::vec(0usize..3, n),
                )
            })
            .prop_map(|(n, parents, extra, elements)| {
                let atoms = (0..n)
                    .map(|i| Atom { element: [Element::C, Element::N, Element::O][elements[i]], aromatic: false, index: i })
                    .collect();
                let mut bonds: Vec<Bond> = parents
                    .iter()
                    .enumerate()
                    .map(|(i, &p)| Bond { endpoints: (p, i + 1), order: BondOrder::Single })
                    .collect();
                for (u, v, o) in extra {
                    let dup = bonds.iter().any(|b| b.endpoints == (u, v) || b.endpoints == (v, u));
                    if u != v && !dup {
                        let order = if o == 0 { BondOrder::Single } else { BondOrder::Double };
                        bonds.push(Bond { endpoints: (u, v), order });
                    }
                }
                MolecularGraph::from_parts(atoms, bonds).unwrap()
            })
    }

    fn shuffle(n: usize, seed: u64) -> Vec<usize> {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        order
    }

    proptest! {
        #[test]
        fn code_is_permutation_invariant(g in arb_small_graph(14), seed in any::<u64>()) {
            let base = canonical_code(&g).unwrap();
            for i in 0..100 {
                let p = g.permuted(&shuffle(g.atom_count(), seed ^ i));
                prop_assert_eq!(&canonical_code(&p).unwrap(), &base);
            }
        }

        #[test]
        fn code_equality_matches_brute_force_isomorphism(a in arb_small_graph(6), b in arb_small_graph(6)) {
            let same = canonical_code(&a).unwrap() == canonical_code(&b).unwrap();
            prop_assert_eq!(same, brute_isomorphic(&a, &b));
        }

        #[test]
        fn canonical_smiles_is_order_free(g in arb_small_graph(10), seed in any::<u64>()) {
            let p = g.permuted(&shuffle(g.atom_count(), seed));
            prop_assert_eq!(canonical_smiles(&g).unwrap(), canonical_smiles(&p).unwrap());
        }

        #[test]
        fn motifs_partition_atoms(g in arb_small_graph(16)) {
            let motifs = extract_motifs(&g).unwrap();
            let total: usize = motifs.iter().map(|m| m.graph.atom_count()).sum();
            prop_assert_eq!(total, g.atom_count());
            prop_assert_eq!(motifs.len(), find_bridge_bonds(&g).len() + 1);
            for m in &motifs {
                prop_assert!(m.graph.is_connected());
            }
        }
    }
}
