//! Synthetic corpus generation.
//!
//! Samples the generative story the pipeline inverts: each genre owns
//! a block of topics, each show identity draws a topic mixture θ from
//! its genre's Dirichlet, and every token drawn from a topic emits an
//! acoustic frame (from a per-acoustic-word Gaussian) plus a text
//! word. Topics own disjoint blocks of acoustic and text vocabulary,
//! so separability is engineered and tunable: `emitter_spread`
//! controls how confusable the acoustic words are, and metadata
//! (channel, hour) follows genre-dominant priors with configurable
//! mass. The generated corpus is written to disk in manifest form and
//! is byte-identical for a fixed seed.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, Normal};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::matrix::{save_feature_matrix, AcousticDocument};
use crate::tsv::KvFile;

/// Parameters of the synthetic generative process.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// Number of genres G; genre g owns a contiguous block of topics.
    pub genres: usize,
    /// Distinct show identities S, assigned to genres round-robin.
    pub show_identities: usize,
    /// Recordings per identity; the last one lands in the test split.
    pub episodes: usize,
    /// True topic count K*.
    pub topics: usize,
    /// Text vocabulary size V, partitioned evenly across topics.
    pub text_vocab: usize,
    /// Acoustic vocabulary size, partitioned evenly across topics.
    pub acoustic_words: usize,
    /// Dimension of emitted frames.
    pub feature_dim: usize,
    pub segments_per_show: usize,
    pub tokens_per_segment: usize,
    /// Dirichlet concentration per topic inside a genre's block.
    pub dirichlet_concentration: f64,
    /// Grid spacing between neighboring emitter centers.
    pub emitter_separation: f64,
    /// Per-dimension standard deviation of each emitter; raise toward
    /// `emitter_separation` to make acoustic words confusable.
    pub emitter_spread: f64,
    /// Probability mass on a genre's dominant channel and hour band.
    pub metadata_mass: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    /// Desk-scale default: 4 genres, 12 show identities with 3
    /// episodes each, 8 topics, 200 text words — the full pipeline
    /// runs on it in well under a minute.
    fn default() -> Self {
        SynthSpec {
            genres: 4,
            show_identities: 12,
            episodes: 3,
            topics: 8,
            text_vocab: 200,
            acoustic_words: 16,
            feature_dim: 3,
            segments_per_show: 20,
            tokens_per_segment: 50,
            dirichlet_concentration: 0.5,
            emitter_separation: 1.0,
            emitter_spread: 0.2,
            metadata_mass: 0.8,
            seed: 17,
        }
    }
}

const SPEC_FIELDS: [&str; 14] = [
    "genres",
    "show_identities",
    "episodes",
    "topics",
    "text_vocab",
    "acoustic_words",
    "feature_dim",
    "segments_per_show",
    "tokens_per_segment",
    "dirichlet_concentration",
    "emitter_separation",
    "emitter_spread",
    "metadata_mass",
    "seed",
];

impl SynthSpec {
    /// Read a spec from a `key<TAB>value` file; absent keys keep their
    /// defaults and unknown keys are rejected.
    pub fn from_file(path: &Path) -> Result<SynthSpec> {
        let kv = KvFile::load(path)?;
        kv.reject_unknown(&SPEC_FIELDS)?;
        let d = SynthSpec::default();
        let spec = SynthSpec {
            genres: kv.parse_or("genres", d.genres)?,
            show_identities: kv.parse_or("show_identities", d.show_identities)?,
            episodes: kv.parse_or("episodes", d.episodes)?,
            topics: kv.parse_or("topics", d.topics)?,
            text_vocab: kv.parse_or("text_vocab", d.text_vocab)?,
            acoustic_words: kv.parse_or("acoustic_words", d.acoustic_words)?,
            feature_dim: kv.parse_or("feature_dim", d.feature_dim)?,
            segments_per_show: kv.parse_or("segments_per_show", d.segments_per_show)?,
            tokens_per_segment: kv.parse_or("tokens_per_segment", d.tokens_per_segment)?,
            dirichlet_concentration: kv
                .parse_or("dirichlet_concentration", d.dirichlet_concentration)?,
            emitter_separation: kv.parse_or("emitter_separation", d.emitter_separation)?,
            emitter_spread: kv.parse_or("emitter_spread", d.emitter_spread)?,
            metadata_mass: kv.parse_or("metadata_mass", d.metadata_mass)?,
            seed: kv.parse_or("seed", d.seed)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Validation(m));
        if self.genres == 0 || self.show_identities == 0 {
            return err("need ≥1 genre and ≥1 show identity".into());
        }
        if self.episodes < 2 {
            return err("need ≥2 episodes so both splits are populated".into());
        }
        if self.topics < self.genres {
            return err(format!(
                "{} topics cannot cover {} genres",
                self.topics, self.genres
            ));
        }
        if self.text_vocab < self.topics || self.acoustic_words < self.topics {
            return err("each topic needs ≥1 text word and ≥1 acoustic word".into());
        }
        if self.feature_dim == 0 {
            return err("feature_dim must be ≥1".into());
        }
        if self.segments_per_show == 0 || self.tokens_per_segment == 0 {
            return err("segments and tokens per segment must be ≥1".into());
        }
        if !(self.dirichlet_concentration > 0.0) || !self.dirichlet_concentration.is_finite() {
            return err("dirichlet_concentration must be positive".into());
        }
        if !(self.emitter_separation > 0.0) || !(self.emitter_spread > 0.0) {
            return err("emitter separation and spread must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.metadata_mass) {
            return err("metadata_mass must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Split `0..n` into `parts` contiguous blocks whose sizes differ by
/// at most one; block `i` is returned as a half-open range.
fn block(n: usize, parts: usize, i: usize) -> std::ops::Range<usize> {
    let base = n / parts;
    let extra = n % parts;
    let start = i * base + i.min(extra);
    let len = base + usize::from(i < extra);
    start..start + len
}

/// Deterministic emitter-center grid: word `a` sits at lattice cell
/// `((a / side^0) % side, (a / side^1) % side, …)` scaled by the
/// separation, plus a small seeded jitter to break ties.
fn emitter_centers(spec: &SynthSpec, rng: &mut ChaCha20Rng) -> Array2<f64> {
    let mut side = 1usize;
    while side.pow(spec.feature_dim as u32) < spec.acoustic_words {
        side += 1;
    }
    let jitter = Normal::new(0.0, 0.15 * spec.emitter_separation).unwrap();
    let mut centers = Array2::zeros((spec.acoustic_words, spec.feature_dim));
    for a in 0..spec.acoustic_words {
        let mut cell = a;
        for d in 0..spec.feature_dim {
            centers[[a, d]] =
                spec.emitter_separation * (cell % side) as f64 + jitter.sample(rng);
            cell /= side;
        }
    }
    centers
}

/// Draw from a Dirichlet over one topic block via normalized Gammas;
/// topics outside the block get exactly zero mass.
fn draw_theta(spec: &SynthSpec, genre: usize, rng: &mut ChaCha20Rng) -> Vec<f64> {
    let gamma = Gamma::new(spec.dirichlet_concentration, 1.0).unwrap();
    let mut theta = vec![0.0; spec.topics];
    let topics = block(spec.topics, spec.genres, genre);
    let mut total = 0.0;
    for k in topics.clone() {
        // A Gamma draw can underflow to zero at tiny concentrations;
        // the floor keeps θ a valid distribution.
        let g = gamma.sample(rng).max(1e-300);
        theta[k] = g;
        total += g;
    }
    for k in topics {
        theta[k] /= total;
    }
    theta
}

fn sample_index(weights: &[f64], rng: &mut ChaCha20Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Sample uniformly from `range`.
fn sample_in(range: std::ops::Range<usize>, rng: &mut ChaCha20Rng) -> usize {
    rng.random_range(range)
}

/// Channel the genre broadcasts on most of the time.
fn dominant_channel(genre: usize) -> u8 {
    (genre % 4) as u8 + 1
}

/// Three-hour band (0..8) the genre usually airs in.
fn dominant_band(genre: usize) -> u8 {
    ((2 * genre) % 8) as u8
}

fn sample_channel(genre: usize, mass: f64, rng: &mut ChaCha20Rng) -> u8 {
    let dom = dominant_channel(genre);
    if rng.random::<f64>() < mass {
        dom
    } else {
        // Uniform over the three other channels.
        let mut c = rng.random_range(1..4u8);
        if c >= dom {
            c += 1;
        }
        c
    }
}

fn sample_hour(genre: usize, mass: f64, rng: &mut ChaCha20Rng) -> u8 {
    let band_start = dominant_band(genre) * 3;
    if rng.random::<f64>() < mass {
        band_start + rng.random_range(0..3u8)
    } else {
        // Uniform over the 21 hours outside the dominant band.
        let mut h = rng.random_range(0..21u8);
        if h >= band_start {
            h += 3;
        }
        h
    }
}

/// Generate a corpus under `out_dir` and load it back, so the result
/// is guaranteed manifest-valid. Rerunning with the same spec writes
/// byte-identical files.
pub fn generate_synthetic_corpus(spec: &SynthSpec, out_dir: &Path) -> Result<Corpus> {
    spec.validate()?;
    for sub in ["feats", "text", "seg"] {
        let dir = out_dir.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }

    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let centers = emitter_centers(spec, &mut rng);
    let frame_noise = Normal::new(0.0, spec.emitter_spread).unwrap();
    let thetas: Vec<Vec<f64>> = (0..spec.show_identities)
        .map(|s| draw_theta(spec, s % spec.genres, &mut rng))
        .collect();

    let mut manifest = String::new();
    manifest.push_str(&format!("#feature_dim\t{}\n", spec.feature_dim));
    manifest.push_str("#frame_period_ms\t10\n");
    manifest.push_str("show_id\tgenre\tshow_name\tchannel\thour\tsplit\tfeatures\ttranscript\tsegments\n");

    let tokens_per_show = spec.segments_per_show * spec.tokens_per_segment;
    for identity in 0..spec.show_identities {
        let genre = identity % spec.genres;
        let theta = &thetas[identity];
        for episode in 0..spec.episodes {
            let show_id = format!("s{identity:02}e{episode}");
            let split = if episode + 1 == spec.episodes {
                "test"
            } else {
                "train"
            };
            let channel = sample_channel(genre, spec.metadata_mass, &mut rng);
            let hour = sample_hour(genre, spec.metadata_mass, &mut rng);

            let mut frames = Array2::zeros((tokens_per_show, spec.feature_dim));
            let mut transcript = String::new();
            let mut segments = String::new();
            for seg in 0..spec.segments_per_show {
                let seg_start = seg * spec.tokens_per_segment;
                segments.push_str(&format!(
                    "{}\t{}\n",
                    seg_start,
                    seg_start + spec.tokens_per_segment
                ));
                for tok in 0..spec.tokens_per_segment {
                    let z = sample_index(theta, &mut rng);
                    let word =
                        sample_in(block(spec.acoustic_words, spec.topics, z), &mut rng);
                    let t = seg_start + tok;
                    for d in 0..spec.feature_dim {
                        frames[[t, d]] = centers[[word, d]] + frame_noise.sample(&mut rng);
                    }
                    let text = sample_in(block(spec.text_vocab, spec.topics, z), &mut rng);
                    if tok > 0 {
                        transcript.push(' ');
                    }
                    transcript.push_str(&format!("w{text:03}"));
                }
                transcript.push('\n');
            }

            let feat_rel = format!("feats/{show_id}.bin");
            let text_rel = format!("text/{show_id}.txt");
            let seg_rel = format!("seg/{show_id}.tsv");
            save_feature_matrix(&out_dir.join(&feat_rel), &AcousticDocument::new(frames)?)?;
            let text_path = out_dir.join(&text_rel);
            fs::write(&text_path, transcript).map_err(|e| Error::io(&text_path, e))?;
            let seg_path = out_dir.join(&seg_rel);
            fs::write(&seg_path, segments).map_err(|e| Error::io(&seg_path, e))?;

            manifest.push_str(&format!(
                "{show_id}\tgenre{genre}\tshow{identity:02}\t{channel}\t{hour}\t{split}\t{feat_rel}\t{text_rel}\t{seg_rel}\n"
            ));
        }
    }

    let manifest_path = out_dir.join("manifest.tsv");
    fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;
    Corpus::load(&manifest_path)
}
