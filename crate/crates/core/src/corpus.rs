//! Corpus manifests: the catalog of shows, labels, and artifact paths.
//!
//! A corpus is described by a single TSV manifest (columns separated
//! by real tabs, shown here as spaces). Lines starting with `#` form a
//! key/value preamble (`feature_dim` and `frame_period_ms` are
//! required), followed by a header row and one row per show:
//!
//! ```text
//! #feature_dim 3
//! #frame_period_ms 10
//! show_id genre show_name channel hour split features transcript segments
//! s00_e00 news newsdesk 1 7 train feats/s00_e00.bin text/s00_e00.txt seg/s00_e00.tsv
//! ```
//!
//! Artifact paths are resolved relative to the manifest's directory. A
//! `-` in the transcript or segments column means "absent". Label
//! tables for genres and show names are built in first-appearance
//! order, so integer class ids are reproducible across runs.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::matrix::{self, AcousticDocument};

/// Train/test partition of a show.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// A half-open frame range `[start, end)` within a show.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Interned class names with stable first-appearance ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelTable {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Id of `name`, interning it on first sight.
    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// One show (one broadcast episode) in the corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct ShowRecord {
    pub show_id: String,
    pub genre: String,
    pub show_name: String,
    /// Broadcast channel, 1-based.
    pub channel: u8,
    /// Start hour of day, 0..=23.
    pub hour: u8,
    pub split: Split,
    pub features_path: PathBuf,
    pub transcript_path: Option<PathBuf>,
    pub segments_path: Option<PathBuf>,
    /// Dense genre id from the corpus label table.
    pub genre_id: usize,
    /// Dense show-name id from the corpus label table.
    pub show_name_id: usize,
}

/// A loaded manifest: show catalog plus label tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub root: PathBuf,
    pub feature_dim: usize,
    pub frame_period_ms: f64,
    pub shows: Vec<ShowRecord>,
    pub genres: LabelTable,
    pub show_names: LabelTable,
}

const MANIFEST_COLUMNS: [&str; 9] = [
    "show_id",
    "genre",
    "show_name",
    "channel",
    "hour",
    "split",
    "features",
    "transcript",
    "segments",
];

impl Corpus {
    /// Parse and validate a manifest file.
    pub fn load(path: &Path) -> Result<Corpus> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let root = path.parent().unwrap_or(Path::new(".")).to_path_buf();

        let mut feature_dim: Option<usize> = None;
        let mut frame_period_ms: Option<f64> = None;
        let mut header_seen = false;
        let mut shows: Vec<ShowRecord> = Vec::new();
        let mut genres = LabelTable::new();
        let mut show_names = LabelTable::new();
        let mut seen_ids: HashMap<String, usize> = HashMap::new();
        let mut name_genre: HashMap<usize, (usize, usize)> = HashMap::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end_matches(['\r', '\n']);
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if header_seen || !shows.is_empty() {
                    return Err(Error::parse(
                        path,
                        line_no,
                        "preamble lines must precede the header",
                    ));
                }
                let (key, value) = rest
                    .split_once('\t')
                    .ok_or_else(|| Error::parse(path, line_no, "preamble needs `#key\\tvalue`"))?;
                match key.trim() {
                    "feature_dim" => {
                        let v: usize = value.trim().parse().map_err(|_| {
                            Error::parse(path, line_no, format!("bad feature_dim {value:?}"))
                        })?;
                        feature_dim = Some(v);
                    }
                    "frame_period_ms" => {
                        let v: f64 = value.trim().parse().map_err(|_| {
                            Error::parse(path, line_no, format!("bad frame_period_ms {value:?}"))
                        })?;
                        frame_period_ms = Some(v);
                    }
                    // Unknown preamble keys are advisory and ignored.
                    _ => {}
                }
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if !header_seen {
                if fields != MANIFEST_COLUMNS {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("header must be `{}`", MANIFEST_COLUMNS.join("\t")),
                    ));
                }
                header_seen = true;
                continue;
            }
            if fields.len() != MANIFEST_COLUMNS.len() {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!(
                        "expected {} columns, found {}",
                        MANIFEST_COLUMNS.len(),
                        fields.len()
                    ),
                ));
            }
            let show_id = fields[0].to_string();
            if show_id.is_empty() {
                return Err(Error::parse(path, line_no, "empty show_id"));
            }
            if let Some(prev) = seen_ids.insert(show_id.clone(), line_no) {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("duplicate show_id {show_id:?} (first seen on line {prev})"),
                ));
            }
            let genre = fields[1].to_string();
            let show_name = fields[2].to_string();
            if genre.is_empty() || show_name.is_empty() {
                return Err(Error::parse(path, line_no, "empty genre or show_name"));
            }
            let channel: u8 = fields[3]
                .parse()
                .map_err(|_| Error::parse(path, line_no, format!("bad channel {:?}", fields[3])))?;
            if !(1..=4).contains(&channel) {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("channel {channel} out of range 1..=4"),
                ));
            }
            let hour: u8 = fields[4]
                .parse()
                .map_err(|_| Error::parse(path, line_no, format!("bad hour {:?}", fields[4])))?;
            if hour > 23 {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("hour {hour} out of range 0..=23"),
                ));
            }
            let split = Split::parse(fields[5]).ok_or_else(|| {
                Error::parse(
                    path,
                    line_no,
                    format!("split must be `train` or `test`, found {:?}", fields[5]),
                )
            })?;
            if fields[6] == "-" || fields[6].is_empty() {
                return Err(Error::parse(path, line_no, "features path is required"));
            }
            let genre_id = genres.intern(&genre);
            let show_name_id = show_names.intern(&show_name);
            if let Some(&(expected, first_line)) = name_genre.get(&show_name_id) {
                if expected != genre_id {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!(
                            "show_name {show_name:?} maps to genre {:?} here but {:?} on line {first_line}",
                            genre,
                            genres.name(expected).unwrap_or("?")
                        ),
                    ));
                }
            } else {
                name_genre.insert(show_name_id, (genre_id, line_no));
            }
            let optional = |s: &str| {
                if s == "-" || s.is_empty() {
                    None
                } else {
                    Some(root.join(s))
                }
            };
            shows.push(ShowRecord {
                show_id,
                genre,
                show_name,
                channel,
                hour,
                split,
                features_path: root.join(fields[6]),
                transcript_path: optional(fields[7]),
                segments_path: optional(fields[8]),
                genre_id,
                show_name_id,
            });
        }

        if shows.is_empty() {
            return Err(Error::Validation("corpus must contain ≥1 show".into()));
        }
        let feature_dim = feature_dim
            .ok_or_else(|| Error::format(path, "missing required preamble key feature_dim"))?;
        if feature_dim == 0 {
            return Err(Error::format(path, "feature_dim must be at least 1"));
        }
        let frame_period_ms = frame_period_ms
            .ok_or_else(|| Error::format(path, "missing required preamble key frame_period_ms"))?;
        if !(frame_period_ms > 0.0) || !frame_period_ms.is_finite() {
            return Err(Error::format(path, "frame_period_ms must be positive"));
        }

        Ok(Corpus {
            root,
            feature_dim,
            frame_period_ms,
            shows,
            genres,
            show_names,
        })
    }

    pub fn train_shows(&self) -> impl Iterator<Item = &ShowRecord> {
        self.shows.iter().filter(|s| s.split == Split::Train)
    }

    pub fn test_shows(&self) -> impl Iterator<Item = &ShowRecord> {
        self.shows.iter().filter(|s| s.split == Split::Test)
    }

    /// Load a show's frames, checking them against the corpus dimension.
    pub fn load_frames(&self, show: &ShowRecord) -> Result<AcousticDocument> {
        let doc = matrix::load_feature_matrix(&show.features_path)?;
        if doc.feature_dim() != self.feature_dim {
            return Err(Error::Dimension {
                expected: self.feature_dim,
                found: doc.feature_dim(),
            });
        }
        Ok(doc)
    }

    /// Load a show's transcript text, if the manifest lists one.
    pub fn load_transcript(&self, show: &ShowRecord) -> Result<Option<String>> {
        match &show.transcript_path {
            None => Ok(None),
            Some(p) => fs::read_to_string(p).map(Some).map_err(|e| Error::io(p, e)),
        }
    }

    /// Load a show's segment list; absent segment files yield one
    /// whole-show segment.
    pub fn load_segments(&self, show: &ShowRecord, frame_count: usize) -> Result<Vec<Segment>> {
        let path = match &show.segments_path {
            None => {
                return Ok(vec![Segment {
                    start: 0,
                    end: frame_count,
                }])
            }
            Some(p) => p,
        };
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut segments = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (a, b) = line
                .split_once('\t')
                .or_else(|| line.split_once(' '))
                .ok_or_else(|| Error::parse(path, line_no, "segment needs `start\\tend`"))?;
            let start: usize = a
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, line_no, format!("bad start {a:?}")))?;
            let end: usize = b
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, line_no, format!("bad end {b:?}")))?;
            if start >= end {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("segment start {start} must be < end {end}"),
                ));
            }
            if end > frame_count {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("segment end {end} exceeds frame count {frame_count}"),
                ));
            }
            segments.push(Segment { start, end });
        }
        if segments.is_empty() {
            return Err(Error::format(path, "segment file lists no segments"));
        }
        Ok(segments)
    }

    /// Mapping from show-name id to genre id.
    ///
    /// Well-defined because the loader rejects manifests where one show
    /// name appears under two genres.
    pub fn show_to_genre(&self) -> Vec<usize> {
        let mut map = vec![0usize; self.show_names.len()];
        for show in &self.shows {
            map[show.show_name_id] = show.genre_id;
        }
        map
    }
}
