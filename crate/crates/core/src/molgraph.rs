//! Molecular graphs from a minimal SMILES dialect.
//!
//! Supported: organic-subset atoms `B C N O P S F Cl Br I`, lowercase aromatic
//! atoms `b c n o p s`, bond symbols `- = # :`, branches and ring closures
//! (`1`-`9`, `%nn`). Hydrogens are implicit and never materialized, so degrees
//! count heavy-atom bonds only.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;


/// Elements accepted by the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Element {
    B,
    C,
    N,
    O,
    P,
    S,
    F,
    Cl,
    Br,
    I,
}

impl Element {
    pub const ALL: [Element; 10] = [
        Element::B,
        Element::C,
        Element::N,
        Element::O,
        Element::P,
        Element::S,
        Element::F,
        Element::Cl,
        Element::Br,
        Element::I,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::P => "P",
            Element::S => "S",
            Element::F => "F",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    /// Position in [`Element::ALL`]; used for one-hot atom features.
    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn can_be_aromatic(self) -> bool {
        matches!(
            self,
            Element::B | Element::C | Element::N | Element::O | Element::P | Element::S
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    pub index: usize,
}

impl Atom {
    /// Label used for canonicalization and substructure matching.
    pub fn label(&self) -> u8 {
        (self.element.ordinal() as u8) << 1 | self.aromatic as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub endpoints: (usize, usize),
    pub order: BondOrder,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.endpoints.0 == atom {
            self.endpoints.1
        } else {
            self.endpoints.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("bond {bond} references atom {atom} but the graph has {atoms} atoms")]
    AtomOutOfRange { bond: usize, atom: usize, atoms: usize },
    #[error("bond {0} is a self-loop")]
    SelfLoop(usize),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("atom {0} has index field {1}")]
    BadAtomIndex(usize, usize),
    #[error("element {0:?} cannot be aromatic")]
    BadAromatic(Element),
}

/// Heavy-atom molecular graph with cached degrees, adjacency and ring flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MolecularGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
    degree: Vec<usize>,
    ring_atom: Vec<bool>,
    bridge: Vec<bool>,
}

impl MolecularGraph {
    /// Builds a graph, validating bond endpoints and uniqueness. Atom `index`
    /// fields must equal their position.
    pub fn from_parts(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, GraphError> {
        for (i, a) in atoms.iter().enumerate() {
            if a.index != i {
                return Err(GraphError::BadAtomIndex(i, a.index));
            }
            if a.aromatic && !a.element.can_be_aromatic() {
                return Err(GraphError::BadAromatic(a.element));
            }
        }
        let n = atoms.len();
        let mut adjacency = vec![Vec::new(); n];
        for (bi, b) in bonds.iter().enumerate() {
            let (u, v) = b.endpoints;
            for atom in [u, v] {
                if atom >= n {
                    return Err(GraphError::AtomOutOfRange { bond: bi, atom, atoms: n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(bi));
            }
            if adjacency[u].iter().any(|&(w, _)| w == v) {
                return Err(GraphError::DuplicateBond(u.min(v), u.max(v)));
            }
            adjacency[u].push((v, bi));
            adjacency[v].push((u, bi));
        }
        let degree = adjacency.iter().map(Vec::len).collect();
        let bridge = find_bridges(n, &bonds, &adjacency);
        let mut ring_atom = vec![false; n];
        for (bi, b) in bonds.iter().enumerate() {
            if !bridge[bi] {
                ring_atom[b.endpoints.0] = true;
                ring_atom[b.endpoints.1] = true;
            }
        }
        Ok(Self { atoms, bonds, adjacency, degree, ring_atom, bridge })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    /// Heavy-atom degree of every atom.
    pub fn degrees(&self) -> &[usize] {
        &self.degree
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.degree[atom]
    }

    /// `(neighbor, bond index)` pairs of an atom.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    /// Ring flag per atom: true iff the atom is incident to a non-bridge bond.
    pub fn ring_atoms(&self) -> &[bool] {
        &self.ring_atom
    }

    /// True iff removing the bond disconnects its endpoints.
    pub fn is_bridge(&self, bond: usize) -> bool {
        self.bridge[bond]
    }

    pub fn bond_between(&self, u: usize, v: usize) -> Option<usize> {
        self.adjacency[u].iter().find(|&&(w, _)| w == v).map(|&(_, b)| b)
    }

    /// Connected components as sorted atom lists, ordered by smallest atom.
    pub fn components_without(&self, removed: &[bool]) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut comp = Vec::new();
            while let Some(u) = stack.pop() {
                comp.push(u);
                for &(v, b) in &self.adjacency[u] {
                    if !removed.get(b).copied().unwrap_or(false) && !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.atoms.len() <= 1 || self.components_without(&[]).len() == 1
    }

    /// Induced subgraph on `atoms` (in the given order), as an owned copy.
    pub fn induced(&self, atoms: &[usize]) -> MolecularGraph {
        let mut position = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in atoms.iter().enumerate() {
            position[old] = new;
        }
        let new_atoms = atoms
            .iter()
            .enumerate()
            .map(|(i, &old)| Atom { index: i, ..self.atoms[old] })
            .collect();
        let new_bonds = self
            .bonds
            .iter()
            .filter_map(|b| {
                let (u, v) = (position[b.endpoints.0], position[b.endpoints.1]);
                (u != usize::MAX && v != usize::MAX).then_some(Bond { endpoints: (u, v), order: b.order })
            })
            .collect();
        MolecularGraph::from_parts(new_atoms, new_bonds).expect("induced subgraph of a valid graph")
    }

    /// Relabels atoms so that old atom `order[k]` becomes atom `k`.
    pub fn permuted(&self, order: &[usize]) -> MolecularGraph {
        self.induced(order)
    }

    /// Writes the graph in the supported dialect; `parse_smiles` on the output
    /// yields an isomorphic graph. Only the component of atom 0 is written.
    pub fn to_smiles(&self) -> String {
        write_smiles(self)
    }
}

/// Ring membership per atom, computed through bridge detection.
pub fn ring_membership(g: &MolecularGraph) -> Vec<bool> {
    g.ring_atom.clone()
}

/// Iterative Tarjan low-link bridge finding.
fn find_bridges(n: usize, bonds: &[Bond], adjacency: &[Vec<(usize, usize)>]) -> Vec<bool> {
    let mut bridge = vec![false; bonds.len()];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut timer = 0;
    // (vertex, bond used to enter it, next adjacency cursor)
    let mut stack: Vec<(usize, usize, usize)> = Vec::new();
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        stack.push((root, usize::MAX, 0));
        while let Some(top) = stack.last_mut() {
            let (u, parent_bond, cursor) = *top;
            if cursor < adjacency[u].len() {
                top.2 += 1;
                let (v, b) = adjacency[u][cursor];
                if b == parent_bond {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, b, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        bridge[parent_bond] = true;
                    }
                }
            }
        }
    }
    bridge
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SmilesErrorKind {
    Empty,
    UnbalancedParenthesis,
    UnmatchedRingClosure(u32),
    UnsupportedToken(char),
    /// Bond symbol not followed by an atom or ring label.
    DanglingBond,
    /// Branch or bond with nothing to attach to.
    MissingAtom,
    RingClosureSelfLoop(u32),
    DuplicateBond,
    ConflictingRingBond(u32),
}

/// Parse failure with the byte offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmilesError {
    pub offset: usize,
    pub kind: SmilesErrorKind,
}

impl fmt::Display for SmilesError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            SmilesErrorKind::Empty => write!(f, "empty SMILES"),
            SmilesErrorKind::UnbalancedParenthesis => {
                write!(f, "unbalanced parenthesis at byte {}", self.offset)
            }
            SmilesErrorKind::UnmatchedRingClosure(l) => {
                write!(f, "unmatched ring closure {l} at byte {}", self.offset)
            }
            SmilesErrorKind::UnsupportedToken(c) => {
                write!(f, "unsupported token {c:?} at byte {}", self.offset)
            }
            SmilesErrorKind::DanglingBond => write!(f, "dangling bond symbol at byte {}", self.offset),
            SmilesErrorKind::MissingAtom => write!(f, "expected an atom at byte {}", self.offset),
            SmilesErrorKind::RingClosureSelfLoop(l) => {
                write!(f, "ring closure {l} closes on its own atom at byte {}", self.offset)
            }
            SmilesErrorKind::DuplicateBond => write!(f, "duplicate bond at byte {}", self.offset),
            SmilesErrorKind::ConflictingRingBond(l) => {
                write!(f, "conflicting bond orders on ring closure {l} at byte {}", self.offset)
            }
        }
    }
}

impl core::error::Error for SmilesError {}

fn err(offset: usize, kind: SmilesErrorKind) -> SmilesError {
    SmilesError { offset, kind }
}

struct OpenRing {
    atom: usize,
    order: Option<BondOrder>,
    offset: usize,
}

/// Parses one molecule of the supported dialect into a connected graph.
pub fn parse_smiles(text: &str) -> Result<MolecularGraph, SmilesError> {
    let bytes = text.as_bytes();
    if bytes.is_empty() {
        return Err(err(0, SmilesErrorKind::Empty));
    }
    let mut atoms: Vec<Atom> = Vec::new();
    let mut bonds: Vec<Bond> = Vec::new();
    let mut branch_stack: Vec<(usize, usize)> = Vec::new();
    let mut open_rings: Vec<(u32, OpenRing)> = Vec::new();
    let mut prev: Option<usize> = None;
    let mut pending: Option<(BondOrder, usize)> = None;
    let mut i = 0;

    let add_bond = |bonds: &mut Vec<Bond>, atoms: &[Atom], u: usize, v: usize, order: Option<BondOrder>, at: usize| {
        if bonds.iter().any(|b| b.endpoints == (u, v) || b.endpoints == (v, u)) {
            return Err(err(at, SmilesErrorKind::DuplicateBond));
        }
        let order = order.unwrap_or(if atoms[u].aromatic && atoms[v].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        });
        bonds.push(Bond { endpoints: (u, v), order });
        Ok(())
    };

    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let atom = match c {
            b'C' if bytes.get(i + 1) == Some(&b'l') => {
                i += 2;
                Some((Element::Cl, false))
            }
            b'B' if bytes.get(i + 1) == Some(&b'r') => {
                i += 2;
                Some((Element::Br, false))
            }
            b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I' => {
                i += 1;
                let e = match c {
                    b'B' => Element::B,
                    b'C' => Element::C,
                    b'N' => Element::N,
                    b'O' => Element::O,
                    b'P' => Element::P,
                    b'S' => Element::S,
                    b'F' => Element::F,
                    _ => Element::I,
                };
                Some((e, false))
            }
            b'b' | b'c' | b'n' | b'o' | b'p' | b's' => {
                i += 1;
                let e = match c {
                    b'b' => Element::B,
                    b'c' => Element::C,
                    b'n' => Element::N,
                    b'o' => Element::O,
                    b'p' => Element::P,
                    _ => Element::S,
                };
                Some((e, true))
            }
            _ => None,
        };
        if let Some((element, aromatic)) = atom {
            let idx = atoms.len();
            atoms.push(Atom { element, aromatic, index: idx });
            match prev {
                Some(p) => {
                    let order = pending.take().map(|(o, _)| o);
                    add_bond(&mut bonds, &atoms, p, idx, order, start)?;
                }
                None => {
                    if let Some((_, at)) = pending {
                        return Err(err(at, SmilesErrorKind::MissingAtom));
                    }
                }
            }
            prev = Some(idx);
            continue;
        }
        match c {
            b'-' | b'=' | b'#' | b':' => {
                if prev.is_none() {
                    return Err(err(i, SmilesErrorKind::MissingAtom));
                }
                if pending.is_some() {
                    return Err(err(i, SmilesErrorKind::DanglingBond));
                }
                let order = match c {
                    b'-' => BondOrder::Single,
                    b'=' => BondOrder::Double,
                    b'#' => BondOrder::Triple,
                    _ => BondOrder::Aromatic,
                };
                pending = Some((order, i));
                i += 1;
            }
            b'(' => {
                let Some(p) = prev else {
                    return Err(err(i, SmilesErrorKind::MissingAtom));
                };
                if let Some((_, at)) = pending {
                    return Err(err(at, SmilesErrorKind::DanglingBond));
                }
                branch_stack.push((p, i));
                i += 1;
            }
            b')' => {
                if let Some((_, at)) = pending {
                    return Err(err(at, SmilesErrorKind::DanglingBond));
                }
                let Some((p, _)) = branch_stack.pop() else {
                    return Err(err(i, SmilesErrorKind::UnbalancedParenthesis));
                };
                // "C()" and "C(C)" both leave prev at the branch point.
                prev = Some(p);
                i += 1;
            }
            b'1'..=b'9' | b'%' => {
                let (label, len) = if c == b'%' {
                    match (bytes.get(i + 1), bytes.get(i + 2)) {
                        (Some(a), Some(b)) if a.is_ascii_digit() && b.is_ascii_digit() => {
                            (u32::from(a - b'0') * 10 + u32::from(b - b'0'), 3)
                        }
                        _ => return Err(err(i, SmilesErrorKind::UnsupportedToken('%'))),
                    }
                } else {
                    (u32::from(c - b'0'), 1)
                };
                let Some(p) = prev else {
                    return Err(err(i, SmilesErrorKind::MissingAtom));
                };
                let order = pending.take().map(|(o, _)| o);
                if let Some(pos) = open_rings.iter().position(|(l, _)| *l == label) {
                    let (_, open) = open_rings.remove(pos);
                    if open.atom == p {
                        return Err(err(i, SmilesErrorKind::RingClosureSelfLoop(label)));
                    }
                    let order = match (open.order, order) {
                        (Some(a), Some(b)) if a != b => {
                            return Err(err(i, SmilesErrorKind::ConflictingRingBond(label)))
                        }
                        (a, b) => a.or(b),
                    };
                    add_bond(&mut bonds, &atoms, open.atom, p, order, i)?;
                } else {
                    open_rings.push((label, OpenRing { atom: p, order, offset: i }));
                }
                i += len;
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(err(i, SmilesErrorKind::UnsupportedToken(ch)));
            }
        }
    }
    if let Some((_, at)) = pending {
        return Err(err(at, SmilesErrorKind::DanglingBond));
    }
    if let Some((_, at)) = branch_stack.first() {
        return Err(err(*at, SmilesErrorKind::UnbalancedParenthesis));
    }
    if let Some((label, open)) = open_rings.first() {
        return Err(err(open.offset, SmilesErrorKind::UnmatchedRingClosure(*label)));
    }
    Ok(MolecularGraph::from_parts(atoms, bonds).expect("parser produces valid graphs"))
}

fn write_smiles(g: &MolecularGraph) -> String {
    let n = g.atom_count();
    let mut out = String::new();
    if n == 0 {
        return out;
    }
    // DFS tree from atom 0; non-tree bonds become ring closures.
    let mut visited = vec![false; n];
    let mut rank = vec![usize::MAX; n];
    let mut children: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut tree = vec![false; g.bond_count()];
    let mut next_rank = 0;
    let mut stack = vec![(0usize, usize::MAX, usize::MAX)];
    while let Some((u, parent, via)) = stack.pop() {
        if visited[u] {
            continue;
        }
        visited[u] = true;
        rank[u] = next_rank;
        next_rank += 1;
        if via != usize::MAX {
            tree[via] = true;
            children[parent].push((u, via));
        }
        for &(v, b) in g.neighbors(u).iter().rev() {
            if !visited[v] {
                stack.push((v, u, b));
            }
        }
    }
    let mut closures: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (b, bond) in g.bonds().iter().enumerate() {
        if !tree[b] {
            closures[bond.endpoints.0].push(b);
            closures[bond.endpoints.1].push(b);
        }
    }
    for (a, list) in closures.iter_mut().enumerate() {
        list.sort_by_key(|&b| rank[g.bonds()[b].other(a)]);
    }
    let mut writer = Writer {
        g,
        children,
        closures,
        rank,
        ring_label: vec![None; g.bond_count()],
        free: vec![true; 100],
        out: &mut out,
    };
    writer.atom(0, usize::MAX);
    out
}

struct Writer<'a> {
    g: &'a MolecularGraph,
    children: Vec<Vec<(usize, usize)>>,
    closures: Vec<Vec<usize>>,
    rank: Vec<usize>,
    ring_label: Vec<Option<u32>>,
    free: Vec<bool>,
    out: &'a mut String,
}

impl Writer<'_> {
    fn atom(&mut self, a: usize, via: usize) {
        if via != usize::MAX {
            self.bond(via);
        }
        let atom = self.g.atoms()[a];
        if atom.aromatic {
            for ch in atom.element.symbol().chars() {
                self.out.push(ch.to_ascii_lowercase());
            }
        } else {
            self.out.push_str(atom.element.symbol());
        }
        for k in 0..self.closures[a].len() {
            let b = self.closures[a][k];
            let other = self.g.bonds()[b].other(a);
            if self.rank[other] < self.rank[a] {
                let label = self.ring_label[b].take().expect("ring opened at earlier atom");
                self.bond(b);
                self.label(label);
                self.free[label as usize] = true;
            } else {
                let label = (1..100u32)
                    .find(|&l| self.free[l as usize])
                    .expect("fewer than 99 open rings");
                self.free[label as usize] = false;
                self.ring_label[b] = Some(label);
                self.label(label);
            }
        }
        let kids = core::mem::take(&mut self.children[a]);
        for (k, &(child, b)) in kids.iter().enumerate() {
            if k + 1 < kids.len() {
                self.out.push('(');
                self.atom(child, b);
                self.out.push(')');
            } else {
                self.atom(child, b);
            }
        }
    }

    fn bond(&mut self, b: usize) {
        let bond = self.g.bonds()[b];
        let (u, v) = bond.endpoints;
        let both_aromatic = self.g.atoms()[u].aromatic && self.g.atoms()[v].aromatic;
        let symbol = match bond.order {
            BondOrder::Single if both_aromatic => "-",
            BondOrder::Single => "",
            BondOrder::Double => "=",
            BondOrder::Triple => "#",
            BondOrder::Aromatic if both_aromatic => "",
            BondOrder::Aromatic => ":",
        };
        self.out.push_str(symbol);
    }

    fn label(&mut self, label: u32) {
        if label < 10 {
            self.out.push(char::from(b'0' + label as u8));
        } else {
            self.out.push('%');
            self.out.push(char::from(b'0' + (label / 10) as u8));
            self.out.push(char::from(b'0' + (label % 10) as u8));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(s: &str) -> MolecularGraph {
        parse_smiles(s).unwrap_or_else(|e| panic!("{s}: {e}"))
    }

    /// Ring atoms by deleting each bond and testing reachability.
    fn brute_force_rings(g: &MolecularGraph) -> Vec<bool> {
        let mut ring = vec![false; g.atom_count()];
        for (bi, b) in g.bonds().iter().enumerate() {
            let mut removed = vec![false; g.bond_count()];
            removed[bi] = true;
            let comps = g.components_without(&removed);
            let (u, v) = b.endpoints;
            if comps.iter().any(|c| c.contains(&u) && c.contains(&v)) {
                ring[u] = true;
                ring[v] = true;
            }
        }
        ring
    }

    #[test]
    fn ethane() {
        let g = parse("CC");
        assert_eq!(g.atom_count(), 2);
        assert_eq!(g.bond_count(), 1);
        assert_eq!(g.bonds()[0].order, BondOrder::Single);
        assert_eq!(g.degrees(), &[1, 1]);
    }

    #[test]
    fn cyclopropane_is_all_ring() {
        let g = parse("C1CC1");
        assert_eq!((g.atom_count(), g.bond_count()), (3, 3));
        assert_eq!(g.ring_atoms(), &[true, true, true]);
    }

    #[test]
    fn diphenylmethane() {
        let g = parse("c1ccccc1Cc1ccccc1");
        assert_eq!(g.atom_count(), 13);
        assert_eq!(g.bond_count(), 14);
        let aromatic_ring = g.atoms().iter().filter(|a| a.aromatic && g.ring_atoms()[a.index]).count();
        assert_eq!(aromatic_ring, 12);
        assert_eq!(g.degree(6), 2);
        assert!(!g.ring_atoms()[6]);
        assert_eq!(g.bonds().iter().filter(|b| b.order == BondOrder::Aromatic).count(), 12);
    }

    #[test]
    fn ring_membership_examples() {
        assert_eq!(ring_membership(&parse("CCC")), vec![false; 3]);
        assert_eq!(ring_membership(&parse("C1CC1")), vec![true; 3]);
        let eb = ring_membership(&parse("c1ccccc1CC"));
        assert_eq!(eb.iter().filter(|&&r| r).count(), 6);
        assert_eq!(eb.iter().filter(|&&r| !r).count(), 2);
    }

    #[test]
    fn errors_carry_offsets() {
        assert_eq!(parse_smiles("C1CC").unwrap_err().kind, SmilesErrorKind::UnmatchedRingClosure(1));
        let e = parse_smiles("CC(C").unwrap_err();
        assert_eq!(e.kind, SmilesErrorKind::UnbalancedParenthesis);
        assert_eq!(e.offset, 2);
        let e = parse_smiles("CC)C").unwrap_err();
        assert_eq!((e.kind, e.offset), (SmilesErrorKind::UnbalancedParenthesis, 2));
        let e = parse_smiles("CC[NH4+]").unwrap_err();
        assert_eq!((e.kind, e.offset), (SmilesErrorKind::UnsupportedToken('['), 2));
        assert_eq!(parse_smiles("").unwrap_err().kind, SmilesErrorKind::Empty);
        assert_eq!(parse_smiles("CC=").unwrap_err().kind, SmilesErrorKind::DanglingBond);
        assert_eq!(parse_smiles("C.C").unwrap_err().kind, SmilesErrorKind::UnsupportedToken('.'));
        assert_eq!(parse_smiles("x").unwrap_err().offset, 0);
    }

    #[test]
    fn bond_symbols_and_two_letter_elements() {
        let g = parse("C#N");
        assert_eq!(g.bonds()[0].order, BondOrder::Triple);
        let g = parse("O=CCl");
        assert_eq!(g.bonds()[0].order, BondOrder::Double);
        assert_eq!(g.atoms()[2].element, Element::Cl);
        let g = parse("BrCBr");
        assert_eq!(g.atoms()[0].element, Element::Br);
        let g = parse("C%12CC%12");
        assert_eq!(g.bond_count(), 3);
        // explicit single bond between aromatic atoms (biphenyl linkage)
        let g = parse("c1ccccc1-c1ccccc1");
        assert_eq!(g.bonds().iter().filter(|b| b.order == BondOrder::Single).count(), 1);
    }

    #[test]
    fn writer_round_trips_examples() {
        for s in ["CC", "C1CC1", "c1ccccc1Cc1ccccc1", "CC(C)(C)C", "c1ccccc1-c1ccccc1", "C1CC2CCC1CC2", "O=C(O)c1ccncc1", "C#CC(=O)N"] {
            let g = parse(s);
            let back = parse(&g.to_smiles());
            assert_eq!(back.atom_count(), g.atom_count(), "{s}");
            assert_eq!(
                crate::motif::canonical_code(&back).unwrap(),
                crate::motif::canonical_code(&g).unwrap(),
                "{s} -> {}",
                g.to_smiles()
            );
        }
    }

    #[test]
    fn from_parts_rejects_bad_graphs() {
        let a = |i| Atom { element: Element::C, aromatic: false, index: i };
        let single = |u, v| Bond { endpoints: (u, v), order: BondOrder::Single };
        assert_eq!(MolecularGraph::from_parts(vec![a(0)], vec![single(0, 0)]), Err(GraphError::SelfLoop(0)));
        assert!(matches!(
            MolecularGraph::from_parts(vec![a(0), a(1)], vec![single(0, 1), single(1, 0)]),
            Err(GraphError::DuplicateBond(0, 1))
        ));
        assert!(matches!(
            MolecularGraph::from_parts(vec![a(0)], vec![single(0, 3)]),
            Err(GraphError::AtomOutOfRange { .. })
        ));
    }

    /// Random connected graph: a random tree plus extra edges.
    fn arb_graph() -> impl Strategy<Value = MolecularGraph> {
        (1usize..20)
            .prop_flat_map(|n| {
                let parents: Vec<_> = (1..n).map(|i| 0..i).collect();
                (Just(n), parents, proptest::collection::vec((0..n, 0..n), 0..6), proptest::collection::vec(0usize..4, n))
            })
            .prop_map(|(n, parents, extra, elements)| {
                let atoms = (0..n)
                    .map(|i| Atom { element: [Element::C, Element::N, Element::O, Element::S][elements[i]], aromatic: false, index: i })
                    .collect();
                let mut pairs: Vec<(usize, usize)> = parents.iter().enumerate().map(|(i, &p)| (p, i + 1)).collect();
                for (u, v) in extra {
                    if u != v && !pairs.iter().any(|&(a, b)| (a, b) == (u, v) || (a, b) == (v, u)) {
                        pairs.push((u, v));
                    }
                }
                let bonds = pairs.into_iter().map(|(u, v)| Bond { endpoints: (u, v), order: BondOrder::Single }).collect();
                MolecularGraph::from_parts(atoms, bonds).unwrap()
            })
    }

    proptest! {
        #[test]
        fn rings_match_brute_force(g in arb_graph()) {
            prop_assert_eq!(ring_membership(&g), brute_force_rings(&g));
            prop_assert_eq!(g.degrees().iter().sum::<usize>(), 2 * g.bond_count());
        }

        #[test]
        fn writer_round_trip_is_isomorphic(g in arb_graph()) {
            let text = g.to_smiles();
            let back = parse_smiles(&text).unwrap();
            prop_assert_eq!(
                crate::motif::canonical_code(&back).unwrap(),
                crate::motif::canonical_code(&g).unwrap(),
                "{}", text
            );
        }
    }
}
