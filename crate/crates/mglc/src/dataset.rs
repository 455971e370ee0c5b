//! Dataset CSV: header `smiles,<prop1>,<prop2>,...`, label cells `1`, `0` or
//! empty for a missing label.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use mglc_core::fewshot::PropertyDataset;
use mglc_core::molgraph::parse_smiles;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LoadMode {
    /// The first malformed row is an error.
    #[default]
    Strict,
    /// Malformed rows are skipped and reported.
    Permissive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub dataset: PropertyDataset,
    pub skipped: Vec<SkippedRow>,
}

fn parse_cell(cell: &str) -> Option<Option<bool>> {
    match cell.trim() {
        "" => Some(None),
        "1" => Some(Some(true)),
        "0" => Some(Some(false)),
        _ => None,
    }
}

pub fn parse_dataset<R: Read>(reader: R, origin: &str, mode: LoadMode) -> Result<LoadedDataset> {
    let data = |msg: String| Error::Data(format!("{origin}: {msg}"));
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| data(e.to_string()))?.clone();
    if header.get(0).map(str::trim) != Some("smiles") {
        return Err(data("first header column must be `smiles`".into()));
    }
    let properties: Vec<String> = header.iter().skip(1).map(|h| h.trim().to_string()).collect();
    let width = properties.len();

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| data(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let parsed = (|| {
            if record.len() != width + 1 {
                return Err(format!("expected {} fields, found {}", width + 1, record.len()));
            }
            let smiles = record[0].trim().to_string();
            let graph = parse_smiles(&smiles).map_err(|e| format!("SMILES {smiles:?}: {e}"))?;
            let labels = record
                .iter()
                .skip(1)
                .map(|c| parse_cell(c).ok_or_else(|| format!("label {c:?} is not 1, 0 or empty")))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((smiles, graph, labels))
        })();
        match (parsed, mode) {
            (Ok(row), _) => rows.push(row),
            (Err(reason), LoadMode::Permissive) => skipped.push(SkippedRow { line, reason }),
            (Err(reason), LoadMode::Strict) => return Err(data(format!("line {line}: {reason}"))),
        }
    }
    let dataset = PropertyDataset::new(properties, rows).map_err(|e| data(e.to_string()))?;
    Ok(LoadedDataset { dataset, skipped })
}

pub fn load_dataset(path: &Path, mode: LoadMode) -> Result<LoadedDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(file, &path.display().to_string(), mode)
}

pub fn write_dataset<W: Write>(out: W, ds: &PropertyDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["smiles".to_string()];
    header.extend(ds.properties().iter().cloned());
    let err = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(&header).map_err(err)?;
    for m in 0..ds.molecule_count() {
        let mut row = vec![ds.smiles(m).to_string()];
        row.extend(ds.row(m).iter().map(|l| match l {
            Some(true) => "1".to_string(),
            Some(false) => "0".to_string(),
            None => String::new(),
        }));
        w.write_record(&row).map_err(err)?;
    }
    w.flush().map_err(|e| Error::Data(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, mode: LoadMode) -> Result<LoadedDataset> {
        parse_dataset(text.as_bytes(), "t.csv", mode)
    }

    #[test]
    fn empty_cell_is_missing() {
        let d = parse("smiles,a,b\nCC,1,\nCO,0,1\n", LoadMode::Strict).unwrap().dataset;
        assert_eq!(d.molecule_count(), 2);
        assert_eq!(d.label(0, 1), None);
        assert_eq!(d.unknown_fraction(), 0.25);
    }

    #[test]
    fn fully_labeled_file_has_no_unknowns() {
        let d = parse("smiles,a\nCC,1\nCO,0\n", LoadMode::Strict).unwrap().dataset;
        assert_eq!(d.unknown_fraction(), 0.0);
    }

    #[test]
    fn header_only_is_an_error() {
        let e = parse("smiles,a,b\n", LoadMode::Strict).unwrap_err();
        assert!(e.to_string().contains("no molecules"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn malformed_rows_carry_line_numbers() {
        let text = "smiles,a\nCC,1\nC1CC,0\nCO,2\nCN\nCCC,0\n";
        let e = parse(text, LoadMode::Strict).unwrap_err().to_string();
        assert!(e.contains("line 3"), "{e}");
        let loaded = parse(text, LoadMode::Permissive).unwrap();
        assert_eq!(loaded.dataset.molecule_count(), 2);
        assert_eq!(loaded.skipped.iter().map(|s| s.line).collect::<Vec<_>>(), [3, 4, 5]);
    }

    #[test]
    fn duplicate_properties_and_bad_header() {
        assert!(parse("smiles,a,a\nCC,1,0\n", LoadMode::Strict).unwrap_err().to_string().contains("duplicate"));
        assert!(parse("mol,a\nCC,1\n", LoadMode::Strict).is_err());
    }

    #[test]
    fn write_then_read() {
        let d = parse("smiles,a,b\nCC,1,\nc1ccccc1,0,1\n", LoadMode::Strict).unwrap().dataset;
        let mut buf = Vec::new();
        write_dataset(&mut buf, &d).unwrap();
        assert_eq!(parse(std::str::from_utf8(&buf).unwrap(), LoadMode::Strict).unwrap().dataset, d);
    }
}
