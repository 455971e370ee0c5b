//! Motif dictionary file: one entry per line,
//! `<frequency>\t<canonical_code_hex>\t<example_smiles>`, most frequent first.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mglc_core::motif::{DictionaryEntry, MotifCode, MotifDictionary};

use crate::error::{Error, Result};

pub fn format_dictionary(dict: &MotifDictionary) -> String {
    let mut out = String::new();
    for e in dict.entries() {
        writeln!(out, "{}\t{}\t{}", e.frequency, e.code.to_hex(), e.example_smiles).expect("writing to a String");
    }
    out
}

/// Parses a dictionary; its capacity is the number of entries (at least 1).
pub fn parse_dictionary(text: &str, origin: &str) -> Result<MotifDictionary> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Data(format!("{origin}:{}: {what}", i + 1));
        let mut fields = line.split('\t');
        let (Some(freq), Some(code), Some(example), None) = (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(bad("expected 3 tab-separated fields"));
        };
        let frequency = freq.parse().map_err(|_| bad("frequency is not a non-negative integer"))?;
        let code = MotifCode::from_hex(code).ok_or_else(|| bad("malformed canonical code"))?;
        entries.push(DictionaryEntry { code, frequency, example_smiles: example.to_string() });
    }
    let capacity = entries.len().max(1);
    MotifDictionary::from_entries(entries, capacity).map_err(|e| Error::Data(format!("{origin}: {e}")))
}

pub fn read_dictionary(path: &Path) -> Result<MotifDictionary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dictionary(&text, &path.display().to_string())
}
