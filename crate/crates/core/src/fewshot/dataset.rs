use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::molgraph::{parse_smiles, MolecularGraph, SmilesError};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DatasetError {
    #[error("dataset has no molecules")]
    NoMolecules,
    #[error("dataset has no property columns")]
    NoProperties,
    #[error("duplicate property name {0:?}")]
    DuplicateProperty(String),
    #[error("row {row} has {got} labels, expected {expected}")]
    RowWidth { row: usize, expected: usize, got: usize },
    #[error("row {row}: {source}")]
    Smiles { row: usize, source: SmilesError },
    #[error("property {0} out of range")]
    PropertyOutOfRange(usize),
    #[error("train and test properties overlap on property {0}")]
    SplitOverlap(usize),
    #[error("property {0} is in neither the train nor the test split")]
    SplitIncomplete(usize),
    #[error("a split phase has no properties")]
    EmptySplit,
}

/// Molecules with a binary label matrix; `None` marks a missing label.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyDataset {
    smiles: Vec<String>,
    molecules: Vec<MolecularGraph>,
    properties: Vec<String>,
    labels: Vec<Option<bool>>,
}

impl PropertyDataset {
    pub fn new(
        properties: Vec<String>,
        rows: Vec<(String, MolecularGraph, Vec<Option<bool>>)>,
    ) -> Result<Self, DatasetError> {
        if properties.is_empty() {
            return Err(DatasetError::NoProperties);
        }
        if rows.is_empty() {
            return Err(DatasetError::NoMolecules);
        }
        let mut seen = BTreeSet::new();
        for p in &properties {
            if !seen.insert(p.as_str()) {
                return Err(DatasetError::DuplicateProperty(p.clone()));
            }
        }
        let width = properties.len();
        let mut smiles = Vec::with_capacity(rows.len());
        let mut molecules = Vec::with_capacity(rows.len());
        let mut labels = Vec::with_capacity(rows.len() * width);
        for (row, (s, g, l)) in rows.into_iter().enumerate() {
            if l.len() != width {
                return Err(DatasetError::RowWidth { row, expected: width, got: l.len() });
            }
            smiles.push(s);
            molecules.push(g);
            labels.extend(l);
        }
        Ok(Self { smiles, molecules, properties, labels })
    }

    /// Parses every SMILES strictly.
    pub fn from_smiles(
        properties: Vec<String>,
        rows: Vec<(String, Vec<Option<bool>>)>,
    ) -> Result<Self, DatasetError> {
        let parsed = rows
            .into_iter()
            .enumerate()
            .map(|(row, (s, l))| {
                let g = parse_smiles(&s).map_err(|source| DatasetError::Smiles { row, source })?;
                Ok((s, g, l))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(properties, parsed)
    }

    pub fn molecule_count(&self) -> usize {
        self.molecules.len()
    }

    pub fn property_count(&self) -> usize {
        self.properties.len()
    }

    pub fn properties(&self) -> &[String] {
        &self.properties
    }

    pub fn molecules(&self) -> &[MolecularGraph] {
        &self.molecules
    }

    pub fn molecule(&self, i: usize) -> &MolecularGraph {
        &self.molecules[i]
    }

    pub fn smiles(&self, i: usize) -> &str {
        &self.smiles[i]
    }

    pub fn label(&self, molecule: usize, property: usize) -> Option<bool> {
        self.labels[molecule * self.properties.len() + property]
    }

    pub fn row(&self, molecule: usize) -> &[Option<bool>] {
        let w = self.properties.len();
        &self.labels[molecule * w..(molecule + 1) * w]
    }

    /// Molecules labeled `value` for `property`, ascending.
    pub fn labeled(&self, property: usize, value: bool) -> Vec<usize> {
        (0..self.molecules.len())
            .filter(|&m| self.label(m, property) == Some(value))
            .collect()
    }

    /// Share of missing cells in the label matrix.
    pub fn unknown_fraction(&self) -> f64 {
        let missing = self.labels.iter().filter(|l| l.is_none()).count();
        missing as f64 / self.labels.len() as f64
    }
}

/// Disjoint, exhaustive partition of the properties into train and test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSplit {
    train: Vec<usize>,
    test: Vec<usize>,
}

impl TaskSplit {
    pub fn new(train: Vec<usize>, test: Vec<usize>, property_count: usize) -> Result<Self, DatasetError> {
        if train.is_empty() || test.is_empty() {
            return Err(DatasetError::EmptySplit);
        }
        let mut owner = alloc::vec![0u8; property_count];
        for (side, list) in [(1u8, &train), (2u8, &test)] {
            for &p in list {
                if p >= property_count {
                    return Err(DatasetError::PropertyOutOfRange(p));
                }
                if owner[p] != 0 {
                    return Err(DatasetError::SplitOverlap(p));
                }
                owner[p] = side;
            }
        }
        if let Some(p) = owner.iter().position(|&o| o == 0) {
            return Err(DatasetError::SplitIncomplete(p));
        }
        Ok(Self { train, test })
    }

    /// The last `test_count` properties form the test split.
    pub fn last(property_count: usize, test_count: usize) -> Result<Self, DatasetError> {
        let cut = property_count.saturating_sub(test_count);
        Self::new((0..cut).collect(), (cut..property_count).collect(), property_count)
    }

    pub fn train(&self) -> &[usize] {
        &self.train
    }

    pub fn test(&self) -> &[usize] {
        &self.test
    }

    /// Re-checks disjointness; cheap enough to run at the start of every run.
    pub fn assert_disjoint(&self) {
        assert!(
            self.train.iter().all(|p| !self.test.contains(p)),
            "train and test properties overlap"
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|p| alloc::format!("p{p}")).collect()
    }

    #[test]
    fn accessors() {
        let ds = PropertyDataset::from_smiles(
            names(2),
            vec![("CC".to_string(), vec![Some(true), None]), ("CO".to_string(), vec![Some(false), None])],
        )
        .unwrap();
        assert_eq!(ds.molecule_count(), 2);
        assert_eq!(ds.smiles(1), "CO");
        assert_eq!(ds.label(0, 0), Some(true));
        assert_eq!(ds.labeled(0, false), vec![1]);
        assert_eq!(ds.row(1), &[Some(false), None]);
        assert_eq!(ds.unknown_fraction(), 0.5);
    }

    #[test]
    fn malformed_input_is_rejected() {
        let row = |s: &str, l: Vec<Option<bool>>| (s.to_string(), l);
        assert_eq!(PropertyDataset::from_smiles(vec![], vec![row("C", vec![])]), Err(DatasetError::NoProperties));
        assert_eq!(PropertyDataset::from_smiles(names(1), vec![]), Err(DatasetError::NoMolecules));
        assert_eq!(
            PropertyDataset::from_smiles(vec!["a".into(), "a".into()], vec![row("C", vec![None, None])]),
            Err(DatasetError::DuplicateProperty("a".into()))
        );
        assert_eq!(
            PropertyDataset::from_smiles(names(2), vec![row("C", vec![None])]),
            Err(DatasetError::RowWidth { row: 0, expected: 2, got: 1 })
        );
        assert!(matches!(
            PropertyDataset::from_smiles(names(1), vec![row("C", vec![None]), row("C1CC", vec![None])]),
            Err(DatasetError::Smiles { row: 1, .. })
        ));
    }

    #[test]
    fn splits() {
        let s = TaskSplit::last(4, 1).unwrap();
        assert_eq!((s.train(), s.test()), (&[0, 1, 2][..], &[3][..]));
        s.assert_disjoint();
        assert_eq!(TaskSplit::new(vec![0, 1], vec![1], 2), Err(DatasetError::SplitOverlap(1)));
        assert_eq!(TaskSplit::new(vec![0], vec![2], 3), Err(DatasetError::SplitIncomplete(1)));
        assert_eq!(TaskSplit::new(vec![0], vec![5], 2), Err(DatasetError::PropertyOutOfRange(5)));
        assert_eq!(TaskSplit::last(2, 0), Err(DatasetError::EmptySplit));
    }
}
