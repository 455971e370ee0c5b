//! Plain-text SMILES corpora: one molecule per line. Blank lines and lines
//! starting with `#` are ignored.

use std::fs;
use std::path::Path;

use mglc_core::molgraph::{parse_smiles, MolecularGraph};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    /// 1-based line number in the source.
    pub line: usize,
    pub smiles: String,
    pub graph: MolecularGraph,
}

pub fn parse_corpus(text: &str, origin: &str) -> Result<Vec<CorpusEntry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let smiles = raw.trim();
        if smiles.is_empty() || smiles.starts_with('#') {
            continue;
        }
        let graph = parse_smiles(smiles).map_err(|e| Error::Data(format!("{origin}:{}: {e}", i + 1)))?;
        out.push(CorpusEntry { line: i + 1, smiles: smiles.to_string(), graph });
    }
    if out.is_empty() {
        return Err(Error::Data(format!("{origin}: corpus has no molecules")));
    }
    Ok(out)
}

pub fn read_corpus(path: &Path) -> Result<Vec<CorpusEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skips_blanks_and_comments_and_reports_lines() {
        let c = parse_corpus("# header\nCC\n\n  c1ccccc1 \n", "x").unwrap();
        assert_eq!(c.iter().map(|e| (e.line, e.smiles.as_str())).collect::<Vec<_>>(), [(2, "CC"), (4, "c1ccccc1")]);
        let err = parse_corpus("CC\nC1CC\n", "file.smi").unwrap_err().to_string();
        assert!(err.starts_with("file.smi:2:"), "{err}");
        assert!(parse_corpus("\n# only\n", "x").is_err());
    }
}
