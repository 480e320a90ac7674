//! Term weighting: document frequencies and tf-idf masses.
//!
//! Documents — acoustic-word streams or tokenized transcripts — are
//! reduced to sparse per-type masses `m_v = tf(v) · idf(v)` with
//! `idf(v) = ln(D / df(v))`, where `tf` is the raw occurrence count in
//! the document, `D` the number of training documents, and `df` the
//! number of training documents containing the type. Types seen in
//! every document get idf 0 and vanish; unseen types (df = 0) are
//! given `ln D` so inference-time documents never divide by zero.
//!
//! Masses stay fractional downstream; [`WeightedDocument::rounded`]
//! provides the integer-count variant for comparison runs.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Lowercased whitespace tokenization; punctuation is kept as part of
/// tokens so the scheme is reproducible without language resources.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Document-frequency table over a fixed type inventory.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    pub vocab_size: usize,
    /// Number of documents the table was estimated from.
    pub doc_count: usize,
    /// Per-type document frequencies, `df[v] ≤ doc_count`.
    pub df: Vec<u64>,
    /// Optional surface forms for text vocabularies; index = type id.
    pub terms: Option<Vec<String>>,
}

impl IdfTable {
    /// Inverse document frequency; df 0 is treated as df 1.
    pub fn idf(&self, type_id: usize) -> f64 {
        let df = self.df[type_id].max(1) as f64;
        (self.doc_count as f64 / df).ln()
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 {
            return Err(Error::Validation("vocabulary must be non-empty".into()));
        }
        if self.doc_count == 0 {
            return Err(Error::Validation("corpus must contain ≥1 document".into()));
        }
        if self.df.len() != self.vocab_size {
            return Err(Error::Validation(format!(
                "df table has {} entries for vocabulary of {}",
                self.df.len(),
                self.vocab_size
            )));
        }
        if let Some(v) = self.df.iter().position(|&d| d > self.doc_count as u64) {
            return Err(Error::Validation(format!(
                "df[{v}] = {} exceeds document count {}",
                self.df[v], self.doc_count
            )));
        }
        if let Some(terms) = &self.terms {
            if terms.len() != self.vocab_size {
                return Err(Error::Validation(format!(
                    "term list has {} entries for vocabulary of {}",
                    terms.len(),
                    self.vocab_size
                )));
            }
        }
        Ok(())
    }

    /// Token → type-id lookup for text vocabularies.
    pub fn term_index(&self) -> HashMap<&str, usize> {
        match &self.terms {
            None => HashMap::new(),
            Some(terms) => terms
                .iter()
                .enumerate()
                .map(|(i, t)| (t.as_str(), i))
                .collect(),
        }
    }
}

/// Count document frequencies over type-id documents.
pub fn build_idf(documents: &[Vec<usize>], vocab_size: usize) -> Result<IdfTable> {
    if documents.is_empty() {
        return Err(Error::Validation("corpus must contain ≥1 document".into()));
    }
    if vocab_size == 0 {
        return Err(Error::Validation("vocabulary must be non-empty".into()));
    }
    let mut df = vec![0u64; vocab_size];
    let mut seen = vec![usize::MAX; vocab_size];
    for (d, doc) in documents.iter().enumerate() {
        for &v in doc {
            if v >= vocab_size {
                return Err(Error::InvalidArgument(format!(
                    "type id {v} outside vocabulary of {vocab_size} in document {d}"
                )));
            }
            if seen[v] != d {
                seen[v] = d;
                df[v] += 1;
            }
        }
    }
    let table = IdfTable {
        vocab_size,
        doc_count: documents.len(),
        df,
        terms: None,
    };
    table.validate()?;
    Ok(table)
}

/// Build a text vocabulary from training transcripts (first-appearance
/// order) and return the tokenized documents as type ids.
pub fn build_text_corpus(transcripts: &[String]) -> (Vec<Vec<usize>>, Vec<String>) {
    let mut terms: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut docs = Vec::with_capacity(transcripts.len());
    for text in transcripts {
        let mut doc = Vec::new();
        for token in tokenize(text) {
            let id = match index.get(&token) {
                Some(&id) => id,
                None => {
                    let id = terms.len();
                    terms.push(token.clone());
                    index.insert(token, id);
                    id
                }
            };
            doc.push(id);
        }
        docs.push(doc);
    }
    (docs, terms)
}

/// Map tokens through a vocabulary index, dropping out-of-vocabulary
/// tokens (inference-time documents may contain unseen words).
pub fn map_tokens(tokens: &[String], index: &HashMap<&str, usize>) -> Vec<usize> {
    tokens
        .iter()
        .filter_map(|t| index.get(t.as_str()).copied())
        .collect()
}

/// A document as sparse non-negative per-type masses.
///
/// Entries are sorted by type id, contain no duplicates, and hold only
/// strictly positive masses; `total_mass` is their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDocument {
    pub entries: Vec<(usize, f64)>,
    pub total_mass: f64,
}

impl WeightedDocument {
    /// Build from (type, mass) pairs; validates the representation
    /// invariants and drops nothing.
    pub fn new(mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.sort_by_key(|&(v, _)| v);
        let mut total = 0.0;
        for i in 0..entries.len() {
            let (v, m) = entries[i];
            if i > 0 && entries[i - 1].0 == v {
                return Err(Error::Validation(format!("duplicate type id {v}")));
            }
            if !m.is_finite() || m <= 0.0 {
                return Err(Error::Validation(format!(
                    "mass for type {v} must be positive and finite, got {m}"
                )));
            }
            total += m;
        }
        Ok(WeightedDocument {
            entries,
            total_mass: total,
        })
    }

    /// Build from raw token counts (mass = count).
    pub fn from_counts(tokens: &[usize]) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Validation("document has no tokens".into()));
        }
        let mut counts: HashMap<usize, f64> = HashMap::new();
        for &v in tokens {
            *counts.entry(v).or_insert(0.0) += 1.0;
        }
        let entries: Vec<(usize, f64)> = counts.into_iter().collect();
        WeightedDocument::new(entries)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Integer-rounding variant: each mass is rounded to the nearest
    /// integer and zero-mass types are dropped. The result may be empty
    /// if every mass rounds down to zero.
    pub fn rounded(&self) -> WeightedDocument {
        let entries: Vec<(usize, f64)> = self
            .entries
            .iter()
            .map(|&(v, m)| (v, m.round()))
            .filter(|&(_, m)| m > 0.0)
            .collect();
        let total = entries.iter().map(|&(_, m)| m).sum();
        WeightedDocument {
            entries,
            total_mass: total,
        }
    }
}

/// Apply tf-idf to one token stream.
///
/// Types whose idf is 0 (present in every training document) drop out;
/// the result can therefore be empty even for non-empty input.
pub fn weight_document(tokens: &[usize], idf: &IdfTable) -> Result<WeightedDocument> {
    if tokens.is_empty() {
        return Err(Error::Validation("document has no tokens".into()));
    }
    let mut tf: HashMap<usize, f64> = HashMap::new();
    for &v in tokens {
        if v >= idf.vocab_size {
            return Err(Error::InvalidArgument(format!(
                "type id {v} outside vocabulary of {}",
                idf.vocab_size
            )));
        }
        *tf.entry(v).or_insert(0.0) += 1.0;
    }
    let entries: Vec<(usize, f64)> = tf
        .into_iter()
        .map(|(v, count)| (v, count * idf.idf(v)))
        .filter(|&(_, m)| m > 0.0)
        .collect();
    WeightedDocument::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_lowercases_and_splits() {
        assert_eq!(
            tokenize("  The QUICK\tbrown\nfox "),
            vec!["the", "quick", "brown", "fox"]
        );
        assert!(tokenize("   \n\t ").is_empty());
    }

    #[test]
    fn df_counts_documents_not_occurrences() {
        // Type 0 in all three docs, type 1 in one (three times),
        // type 2 in two.
        let docs = vec![vec![0, 0, 2], vec![0, 1, 1, 1], vec![0, 2]];
        let table = build_idf(&docs, 4).unwrap();
        assert_eq!(table.df, vec![3, 1, 2, 0]);
        assert_eq!(table.doc_count, 3);

        // idf(0) = ln(3/3) = 0; idf(1) = ln 3; idf(2) = ln(3/2);
        // unseen type 3 behaves as df 1.
        assert_eq!(table.idf(0), 0.0);
        assert!((table.idf(1) - 3.0f64.ln()).abs() < 1e-15);
        assert!((table.idf(2) - 1.5f64.ln()).abs() < 1e-15);
        assert!((table.idf(3) - 3.0f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn weighting_matches_hand_computation() {
        let docs = vec![vec![0, 0, 2], vec![0, 1, 1, 1], vec![0, 2]];
        let table = build_idf(&docs, 3).unwrap();
        // Document [0, 1, 1, 2, 2, 2]: tf = {0:1, 1:2, 2:3}.
        // m_0 = 1·0 (dropped), m_1 = 2·ln3, m_2 = 3·ln1.5.
        let doc = weight_document(&[0, 1, 1, 2, 2, 2], &table).unwrap();
        assert_eq!(doc.entries.len(), 2);
        assert_eq!(doc.entries[0].0, 1);
        assert!((doc.entries[0].1 - 2.0 * 3.0f64.ln()).abs() < 1e-12);
        assert_eq!(doc.entries[1].0, 2);
        assert!((doc.entries[1].1 - 3.0 * 1.5f64.ln()).abs() < 1e-12);
        let expect_total = 2.0 * 3.0f64.ln() + 3.0 * 1.5f64.ln();
        assert!((doc.total_mass - expect_total).abs() < 1e-12);
    }

    #[test]
    fn empty_documents_are_rejected_with_exact_message() {
        let table = build_idf(&[vec![0]], 1).unwrap();
        let err = weight_document(&[], &table).unwrap_err();
        assert_eq!(err.to_string(), "document has no tokens");
        let err = build_idf(&[], 1).unwrap_err();
        assert_eq!(err.to_string(), "corpus must contain ≥1 document");
    }

    #[test]
    fn ubiquitous_types_vanish() {
        let docs = vec![vec![0], vec![0], vec![0]];
        let table = build_idf(&docs, 1).unwrap();
        let doc = weight_document(&[0, 0, 0], &table).unwrap();
        assert!(doc.is_empty());
        assert_eq!(doc.total_mass, 0.0);
    }

    #[test]
    fn rounding_mode_drops_small_masses() {
        let doc = WeightedDocument::new(vec![(3, 0.4), (1, 1.6), (7, 2.5)]).unwrap();
        // Entries sorted by type id.
        assert_eq!(
            doc.entries.iter().map(|e| e.0).collect::<Vec<_>>(),
            vec![1, 3, 7]
        );
        let rounded = doc.rounded();
        assert_eq!(rounded.entries, vec![(1, 2.0), (7, 3.0)]);
        assert_eq!(rounded.total_mass, 5.0);
    }

    #[test]
    fn invalid_masses_are_rejected() {
        assert!(WeightedDocument::new(vec![(0, -1.0)]).is_err());
        assert!(WeightedDocument::new(vec![(0, 0.0)]).is_err());
        assert!(WeightedDocument::new(vec![(0, f64::NAN)]).is_err());
        assert!(WeightedDocument::new(vec![(0, 1.0), (0, 2.0)]).is_err());
    }

    #[test]
    fn text_corpus_round_trip() {
        let transcripts = vec![
            "goal GOAL header".to_string(),
            "header lineup goal".to_string(),
        ];
        let (docs, terms) = build_text_corpus(&transcripts);
        assert_eq!(terms, vec!["goal", "header", "lineup"]);
        assert_eq!(docs, vec![vec![0, 0, 1], vec![1, 2, 0]]);

        let table = IdfTable {
            vocab_size: 3,
            doc_count: 2,
            df: vec![2, 2, 1],
            terms: Some(terms),
        };
        let index = table.term_index();
        let tokens = tokenize("goal unknown lineup");
        assert_eq!(map_tokens(&tokens, &index), vec![0, 2]);
    }
}
