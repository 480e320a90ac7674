//! Plain-text artifact tables.
//!
//! Every intermediate product of the pipeline that is not a model
//! archive or a frame matrix is a small TSV file: word streams (one
//! integer per line), weighted documents (`type<TAB>mass`), keyed
//! vector tables (`key<TAB>v0<TAB>v1…`, used for γ vectors, features
//! and scores), label files (`key<TAB>label`) and prediction files
//! (`key<TAB>label<TAB>s0…`). Floats are written with Rust's shortest
//! round-trip formatting, so loading returns bit-identical values and
//! rewriting is byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::weighting::WeightedDocument;

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::to_owned).collect())
}

fn parse_field<T: FromStr>(path: &Path, line: usize, what: &str, field: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| Error::parse(path, line, format!("bad {what} {field:?}")))
}

// ── key/value config files ──────────────────────────────────────────

/// A `key<TAB>value` config file; `#` lines and blank lines are
/// skipped. Duplicate keys are rejected at load.
#[derive(Debug, Clone)]
pub struct KvFile {
    path: PathBuf,
    pairs: Vec<(String, String)>,
}

impl KvFile {
    pub fn load(path: &Path) -> Result<Self> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        for (idx, line) in read_lines(path)?.iter().enumerate() {
            let line_no = idx + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('\t').ok_or_else(|| {
                Error::parse(path, line_no, "expected key<TAB>value")
            })?;
            if pairs.iter().any(|(k, _)| k == key) {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("duplicate field `{key}`"),
                ));
            }
            pairs.push((key.to_owned(), value.to_owned()));
        }
        Ok(KvFile {
            path: path.to_owned(),
            pairs,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Fetch a mandatory field; absence is a config error.
    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| {
            Error::Config(format!(
                "{}: missing field `{key}`",
                self.path.display()
            ))
        })
    }

    /// Parse an optional field, erring on malformed values.
    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| {
                Error::Config(format!(
                    "{}: bad value {raw:?} for field `{key}`",
                    self.path.display()
                ))
            }),
        }
    }

    /// Parse an optional field, falling back to `default`.
    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.parse_opt(key)?.unwrap_or(default))
    }

    /// Parse a mandatory field.
    pub fn require_parse<T: FromStr>(&self, key: &str) -> Result<T> {
        self.require(key)?;
        Ok(self.parse_opt(key)?.unwrap())
    }

    /// Reject fields outside `known`, catching config typos early.
    pub fn reject_unknown(&self, known: &[&str]) -> Result<()> {
        for (key, _) in &self.pairs {
            if !known.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "{}: unknown field `{key}`",
                    self.path.display()
                )));
            }
        }
        Ok(())
    }
}

// ── word streams ────────────────────────────────────────────────────

/// Write a quantized word sequence, one integer per line.
pub fn save_word_stream(path: &Path, words: &[usize]) -> Result<()> {
    let mut out = String::with_capacity(words.len() * 4);
    for w in words {
        writeln!(out, "{w}").unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_word_stream(path: &Path) -> Result<Vec<usize>> {
    let mut words = Vec::new();
    for (idx, line) in read_lines(path)?.iter().enumerate() {
        words.push(parse_field(path, idx + 1, "acoustic word", line)?);
    }
    Ok(words)
}

// ── weighted documents ──────────────────────────────────────────────

/// Write a weighted document as `type<TAB>mass` lines.
pub fn save_weighted_document(path: &Path, doc: &WeightedDocument) -> Result<()> {
    let mut out = String::new();
    for &(type_id, mass) in &doc.entries {
        writeln!(out, "{type_id}\t{mass}").unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_weighted_document(path: &Path) -> Result<WeightedDocument> {
    let mut entries = Vec::new();
    for (idx, line) in read_lines(path)?.iter().enumerate() {
        let line_no = idx + 1;
        let (type_id, mass) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, line_no, "expected type<TAB>mass"))?;
        entries.push((
            parse_field(path, line_no, "type id", type_id)?,
            parse_field(path, line_no, "mass", mass)?,
        ));
    }
    WeightedDocument::new(entries).map_err(|e| Error::format(path, e.to_string()))
}

// ── keyed vector tables ─────────────────────────────────────────────

/// Write rows of `key<TAB>v0<TAB>v1…`; every row must have the same
/// width and keys must be unique.
pub fn save_keyed_vectors(path: &Path, rows: &[(String, Vec<f64>)]) -> Result<()> {
    check_rows(path, rows.iter().map(|(k, v)| (k.as_str(), v.len())))?;
    let mut out = String::new();
    for (key, values) in rows {
        out.push_str(key);
        for v in values {
            write!(out, "\t{v}").unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_keyed_vectors(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    for (idx, line) in read_lines(path)?.iter().enumerate() {
        let line_no = idx + 1;
        let mut fields = line.split('\t');
        let key = fields.next().unwrap_or_default();
        if key.is_empty() {
            return Err(Error::parse(path, line_no, "empty key"));
        }
        let mut values = Vec::new();
        for field in fields {
            values.push(parse_field(path, line_no, "value", field)?);
        }
        rows.push((key.to_owned(), values));
    }
    check_rows(path, rows.iter().map(|(k, v)| (k.as_str(), v.len())))?;
    Ok(rows)
}

fn check_rows<'a>(path: &Path, rows: impl Iterator<Item = (&'a str, usize)>) -> Result<()> {
    let mut width: Option<usize> = None;
    let mut keys: Vec<&str> = Vec::new();
    for (key, w) in rows {
        match width {
            None => width = Some(w),
            Some(expected) if expected != w => {
                return Err(Error::format(
                    path,
                    format!("row {key:?} has {w} values, expected {expected}"),
                ));
            }
            Some(_) => {}
        }
        if keys.contains(&key) {
            return Err(Error::format(path, format!("duplicate key {key:?}")));
        }
        keys.push(key);
    }
    if width.is_none() {
        return Err(Error::format(path, "table contains no rows"));
    }
    Ok(())
}

// ── label files ─────────────────────────────────────────────────────

/// Write `key<TAB>label` rows (truth labels, show→genre maps).
pub fn save_labels(path: &Path, rows: &[(String, String)]) -> Result<()> {
    check_rows(path, rows.iter().map(|(k, _)| (k.as_str(), 1)))?;
    let mut out = String::new();
    for (key, label) in rows {
        writeln!(out, "{key}\t{label}").unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_labels(path: &Path) -> Result<Vec<(String, String)>> {
    let mut rows = Vec::new();
    for (idx, line) in read_lines(path)?.iter().enumerate() {
        let line_no = idx + 1;
        let (key, label) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, line_no, "expected key<TAB>label"))?;
        if key.is_empty() {
            return Err(Error::parse(path, line_no, "empty key"));
        }
        rows.push((key.to_owned(), label.to_owned()));
    }
    check_rows(path, rows.iter().map(|(k, _)| (k.as_str(), 1)))?;
    Ok(rows)
}

// ── prediction files ────────────────────────────────────────────────

/// One classified document: predicted label plus per-class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub key: String,
    pub label: String,
    pub scores: Vec<f64>,
}

/// Write `key<TAB>label<TAB>s0<TAB>s1…` rows.
pub fn save_predictions(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    check_rows(path, rows.iter().map(|r| (r.key.as_str(), r.scores.len())))?;
    let mut out = String::new();
    for row in rows {
        write!(out, "{}\t{}", row.key, row.label).unwrap();
        for s in &row.scores {
            write!(out, "\t{s}").unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    let mut rows: Vec<PredictionRow> = Vec::new();
    for (idx, line) in read_lines(path)?.iter().enumerate() {
        let line_no = idx + 1;
        let mut fields = line.split('\t');
        let key = fields.next().unwrap_or_default();
        let label = fields.next().ok_or_else(|| {
            Error::parse(path, line_no, "expected key<TAB>label<TAB>scores…")
        })?;
        if key.is_empty() {
            return Err(Error::parse(path, line_no, "empty key"));
        }
        let mut scores = Vec::new();
        for field in fields {
            scores.push(parse_field(path, line_no, "score", field)?);
        }
        rows.push(PredictionRow {
            key: key.to_owned(),
            label: label.to_owned(),
            scores,
        });
    }
    check_rows(path, rows.iter().map(|r| (r.key.as_str(), r.scores.len())))?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_files_parse_and_validate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.tsv");
        fs::write(&path, "# comment\ncorpus\tdata/manifest.tsv\n\nseed\t42\n").unwrap();
        let kv = KvFile::load(&path).unwrap();
        assert_eq!(kv.get("corpus"), Some("data/manifest.tsv"));
        assert_eq!(kv.require_parse::<u64>("seed").unwrap(), 42);
        assert_eq!(kv.parse_or("k", 16usize).unwrap(), 16);
        kv.reject_unknown(&["corpus", "seed"]).unwrap();

        let err = kv.require("work_dir").unwrap_err();
        assert!(err.is_config(), "{err}");
        assert!(err.to_string().contains("missing field `work_dir`"));

        let err = kv.reject_unknown(&["corpus"]).unwrap_err();
        assert!(err.to_string().contains("unknown field `seed`"));

        fs::write(&path, "a\t1\na\t2\n").unwrap();
        let err = KvFile::load(&path).unwrap_err();
        assert!(err.to_string().contains("duplicate field `a`"));

        fs::write(&path, "no-tab-here\n").unwrap();
        assert!(KvFile::load(&path).is_err());
    }

    #[test]
    fn kv_bad_value_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.tsv");
        fs::write(&path, "seed\tnotanumber\n").unwrap();
        let kv = KvFile::load(&path).unwrap();
        let err = kv.require_parse::<u64>("seed").unwrap_err();
        assert!(err.is_config(), "{err}");
        assert!(err.to_string().contains("bad value"));
    }

    #[test]
    fn word_streams_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("words.tsv");
        let words = vec![3usize, 0, 17, 17, 2];
        save_word_stream(&path, &words).unwrap();
        assert_eq!(load_word_stream(&path).unwrap(), words);
        assert_eq!(load_word_stream(&path).unwrap().len(), 5);

        fs::write(&path, "1\n-2\n").unwrap();
        let err = load_word_stream(&path).unwrap_err();
        assert!(err.to_string().contains(":2: bad acoustic word"), "{err}");
    }

    #[test]
    fn weighted_documents_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("doc.tsv");
        let doc = WeightedDocument::new(vec![(0, 0.1), (4, 2.0 / 3.0), (9, 1e-12)]).unwrap();
        save_weighted_document(&path, &doc).unwrap();
        let loaded = load_weighted_document(&path).unwrap();
        assert_eq!(loaded, doc);
    }

    #[test]
    fn keyed_vectors_round_trip_and_validate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.tsv");
        let rows = vec![
            ("show_a".to_owned(), vec![0.25, -1.5, 1.0 / 3.0]),
            ("show_b".to_owned(), vec![1e300, 2e-308, 0.0]),
        ];
        save_keyed_vectors(&path, &rows).unwrap();
        assert_eq!(load_keyed_vectors(&path).unwrap(), rows);

        let ragged = vec![
            ("a".to_owned(), vec![1.0]),
            ("b".to_owned(), vec![1.0, 2.0]),
        ];
        assert!(save_keyed_vectors(&path, &ragged).is_err());

        let dup = vec![
            ("a".to_owned(), vec![1.0]),
            ("a".to_owned(), vec![2.0]),
        ];
        let err = save_keyed_vectors(&path, &dup).unwrap_err();
        assert!(err.to_string().contains("duplicate key"), "{err}");

        assert!(save_keyed_vectors(&path, &[]).is_err());
    }

    #[test]
    fn labels_and_predictions_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let labels_path = dir.path().join("truth.tsv");
        let labels = vec![
            ("s1".to_owned(), "news".to_owned()),
            ("s2".to_owned(), "drama".to_owned()),
        ];
        save_labels(&labels_path, &labels).unwrap();
        assert_eq!(load_labels(&labels_path).unwrap(), labels);

        let pred_path = dir.path().join("pred.tsv");
        let rows = vec![
            PredictionRow {
                key: "s1".to_owned(),
                label: "news".to_owned(),
                scores: vec![1.5, -0.25],
            },
            PredictionRow {
                key: "s2".to_owned(),
                label: "news".to_owned(),
                scores: vec![0.75, 0.5],
            },
        ];
        save_predictions(&pred_path, &rows).unwrap();
        assert_eq!(load_predictions(&pred_path).unwrap(), rows);

        fs::write(&pred_path, "s1\n").unwrap();
        assert!(load_predictions(&pred_path).is_err());
    }
}
