//! End-to-end pipeline orchestration.
//!
//! Chains every stage from a corpus manifest to evaluation reports:
//! GMM acoustic-word training and quantization, tf-idf weighting, LDA
//! topic training per requested K, posterior pooling into show
//! features (optionally with metadata one-hots), one-vs-rest SVMs for
//! the genre and show axes, and logistic score fusion calibrated on
//! out-of-fold training scores. Every intermediate artifact is written
//! under the work directory so each stage is independently inspectable
//! and a rerun with the same seed reproduces every file byte for byte.
//!
//! All randomness flows from the single config seed, salted per stage
//! with a stable string hash, so adding or removing one stage never
//! perturbs the draws of another.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::archive::{save_model, Model};
use crate::corpus::{Corpus, Split};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::featurize::{
    append_metadata, normalize_simplex, pool_segments, time_chunk, FeatureMode,
};
use crate::fusion::{fuse_scores, train_fusion, FusionConfig};
use crate::lda::{infer_document, train_lda, InferConfig, LdaModel, TrainConfig};
use crate::matrix::{pool_frames, AcousticDocument};
use crate::svm::{svm_scores, train_svm, SvmConfig};
use crate::tsv::{
    save_keyed_vectors, save_predictions, save_word_stream, KvFile, PredictionRow,
};
use crate::vq::{quantize_frames, train_gmm, EmConfig};
use crate::weighting::{
    build_idf, map_tokens, tokenize, weight_document, IdfTable, WeightedDocument,
};

/// Everything `run_pipeline` needs, parsed from a `key<TAB>value`
/// config file.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub work_dir: PathBuf,
    /// Acoustic vocabulary size; must be a power of two for mix-up.
    pub gmm_components: usize,
    /// Topic counts to train; each K yields one system per branch.
    pub k_list: Vec<usize>,
    pub feature_mode: FeatureMode,
    pub svm_c: f64,
    /// Folds for out-of-fold fusion calibration.
    pub fusion_folds: usize,
    /// Branch switches: acoustic-word systems, transcript systems, and
    /// metadata one-hots (appended to every system's features, or a
    /// standalone system when both branches are off).
    pub acoustic: bool,
    pub text: bool,
    pub metadata: bool,
    pub seed: u64,
}

const CONFIG_FIELDS: [&str; 11] = [
    "corpus",
    "work_dir",
    "gmm_components",
    "k_list",
    "feature_mode",
    "svm_c",
    "fusion_folds",
    "acoustic",
    "text",
    "metadata",
    "seed",
];

impl PipelineConfig {
    /// Parse a config file; `corpus`, `work_dir` and `seed` are
    /// mandatory, the rest keep their defaults. Relative paths resolve
    /// against the current directory.
    pub fn from_file(path: &Path) -> Result<PipelineConfig> {
        let kv = KvFile::load(path)?;
        kv.reject_unknown(&CONFIG_FIELDS)?;
        let k_list = match kv.get("k_list") {
            None => vec![8],
            Some(raw) => raw
                .split(',')
                .map(|s| {
                    s.trim().parse::<usize>().map_err(|_| {
                        Error::Config(format!("bad topic count {s:?} in k_list"))
                    })
                })
                .collect::<Result<Vec<usize>>>()?,
        };
        let config = PipelineConfig {
            corpus: PathBuf::from(kv.require("corpus")?),
            work_dir: PathBuf::from(kv.require("work_dir")?),
            gmm_components: kv.parse_or("gmm_components", 16)?,
            k_list,
            feature_mode: kv.parse_or("feature_mode", FeatureMode::Hard)?,
            svm_c: kv.parse_or("svm_c", 1.0)?,
            fusion_folds: kv.parse_or("fusion_folds", 5)?,
            acoustic: kv.parse_or("acoustic", true)?,
            text: kv.parse_or("text", true)?,
            metadata: kv.parse_or("metadata", false)?,
            seed: kv.require_parse("seed")?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gmm_components.is_power_of_two() || self.gmm_components < 2 {
            return Err(Error::Config(format!(
                "gmm_components must be a power of two ≥ 2, got {}",
                self.gmm_components
            )));
        }
        if self.k_list.is_empty() || self.k_list.contains(&0) {
            return Err(Error::Config("k_list needs ≥1 topic count, each ≥1".into()));
        }
        if !(self.svm_c > 0.0) || !self.svm_c.is_finite() {
            return Err(Error::Config(format!(
                "svm_c must be positive, got {}",
                self.svm_c
            )));
        }
        if self.fusion_folds < 2 {
            return Err(Error::Config(format!(
                "fusion_folds must be ≥ 2, got {}",
                self.fusion_folds
            )));
        }
        if !self.acoustic && !self.text && !self.metadata {
            return Err(Error::Config("config enables no systems".into()));
        }
        Ok(())
    }
}

/// Stable FNV-1a hash; *not* `DefaultHasher`, whose output may change
/// between Rust releases and would break seed reproducibility.
fn fnv1a64(s: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Per-stage seed: the run seed salted by the stage name.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    seed ^ fnv1a64(stage)
}

/// Prefix errors with the failing stage; config errors keep their
/// class so exit codes stay correct.
fn in_stage<T>(stage: &str, result: Result<T>) -> Result<T> {
    result.map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("stage {stage}: {m}")),
        other => Error::Validation(format!("stage {stage}: {other}")),
    })
}

/// Fused reports plus the per-system ones that fed them.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub genre_report: EvalReport,
    pub show_report: EvalReport,
    pub system_reports: Vec<SystemOutcome>,
}

/// Held-out evaluation of one unfused system.
#[derive(Debug, Clone)]
pub struct SystemOutcome {
    pub system: String,
    pub genre: EvalReport,
    pub show: EvalReport,
}

/// One system's per-show feature rows, aligned with `corpus.shows`.
struct SystemFeatures {
    name: String,
    rows: Vec<Vec<f64>>,
}

/// One show's token units: `(tokens, pooling length)` per segment.
pub type TokenUnits = Vec<(Vec<usize>, f64)>;

/// One show's inferable documents: `(weighted doc, pooling length)`.
/// Segment modes hold one entry per non-empty segment; whole mode
/// holds exactly one.
pub type DocSet = Vec<(WeightedDocument, f64)>;

/// Acoustic token units for every show: one `(segment words, frame
/// count)` entry per segment. `words[i]` must hold one word per frame
/// of show `i`, as produced by quantization.
pub fn acoustic_units(corpus: &Corpus, words: &[Vec<usize>]) -> Result<Vec<TokenUnits>> {
    if words.len() != corpus.shows.len() {
        return Err(Error::Dimension {
            expected: corpus.shows.len(),
            found: words.len(),
        });
    }
    corpus
        .shows
        .iter()
        .zip(words)
        .map(|(show, w)| {
            let segments = corpus.load_segments(show, w.len())?;
            Ok(segments
                .iter()
                .map(|s| (w[s.start..s.end].to_vec(), s.len() as f64))
                .collect())
        })
        .collect()
}

/// Tokenized transcript lines for every show; each line is one text
/// segment. Shows without a transcript are an error.
pub fn text_line_tokens(corpus: &Corpus) -> Result<Vec<Vec<Vec<String>>>> {
    corpus
        .shows
        .iter()
        .map(|show| {
            let text = corpus.load_transcript(show)?.ok_or_else(|| {
                Error::Validation(format!("show {} has no transcript", show.show_id))
            })?;
            Ok(text.lines().map(tokenize).collect())
        })
        .collect()
}

/// First-appearance vocabulary over the training shows' lines.
pub fn train_text_vocab(corpus: &Corpus, lines: &[Vec<Vec<String>>]) -> Result<Vec<String>> {
    let mut vocab: Vec<String> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (show, show_lines) in corpus.shows.iter().zip(lines) {
        if show.split != Split::Train {
            continue;
        }
        for line in show_lines {
            for token in line {
                if seen.insert(token.clone()) {
                    vocab.push(token.clone());
                }
            }
        }
    }
    if vocab.is_empty() {
        return Err(Error::Validation(
            "training transcripts contain no tokens".into(),
        ));
    }
    Ok(vocab)
}

/// Map tokenized lines to id units; out-of-vocabulary tokens drop out
/// and lengths count the tokens that survive.
pub fn map_line_tokens(
    lines: &[Vec<Vec<String>>],
    index: &HashMap<&str, usize>,
) -> Vec<TokenUnits> {
    lines
        .iter()
        .map(|show_lines| {
            show_lines
                .iter()
                .map(|line| {
                    let ids = map_tokens(line, index);
                    let len = ids.len() as f64;
                    (ids, len)
                })
                .collect()
        })
        .collect()
}

/// Flatten the training shows' units into one document per segment,
/// the granularity document frequencies are estimated at.
pub fn idf_documents(corpus: &Corpus, units: &[Vec<(Vec<usize>, f64)>]) -> Vec<Vec<usize>> {
    corpus
        .shows
        .iter()
        .zip(units)
        .filter(|(show, _)| show.split == Split::Train)
        .flat_map(|(_, u)| u.iter().map(|(t, _)| t.clone()))
        .collect()
}

/// Weight token units into per-show document sets under `mode`.
/// `units[i]` lists `(tokens, length)` per segment of show `i`; units
/// whose tokens vanish (empty, or all types idf-0) are dropped.
pub fn build_docsets(
    corpus: &Corpus,
    units: &[Vec<(Vec<usize>, f64)>],
    idf: &IdfTable,
    mode: FeatureMode,
) -> Result<Vec<DocSet>> {
    let mut docsets = Vec::with_capacity(units.len());
    for (show, show_units) in corpus.shows.iter().zip(units) {
        let mut docs: DocSet = Vec::new();
        if mode == FeatureMode::Whole {
            let tokens: Vec<usize> = show_units
                .iter()
                .flat_map(|(t, _)| t.iter().copied())
                .collect();
            if !tokens.is_empty() {
                let doc = weight_document(&tokens, idf)?;
                if !doc.is_empty() {
                    docs.push((doc, 1.0));
                }
            }
        } else {
            for (tokens, length) in show_units {
                if tokens.is_empty() {
                    continue;
                }
                let doc = weight_document(tokens, idf)?;
                if !doc.is_empty() {
                    docs.push((doc, *length));
                }
            }
        }
        if docs.is_empty() {
            return Err(Error::Validation(format!(
                "show {} yields no weighted tokens",
                show.show_id
            )));
        }
        docsets.push(docs);
    }
    Ok(docsets)
}

/// Training-split documents at the mode's granularity, flattened for
/// LDA estimation.
pub fn training_documents(corpus: &Corpus, docsets: &[DocSet]) -> Vec<WeightedDocument> {
    corpus
        .shows
        .iter()
        .zip(docsets)
        .filter(|(show, _)| show.split == Split::Train)
        .flat_map(|(_, docs)| docs.iter().map(|(d, _)| d.clone()))
        .collect()
}

/// Infer topic posteriors for one show's documents and pool them into
/// a feature vector.
fn featurize_show(model: &LdaModel, mode: FeatureMode, docs: &DocSet) -> Result<Vec<f64>> {
    let infer = InferConfig::default();
    if mode == FeatureMode::Whole {
        let state = infer_document(model, &docs[0].0, &infer)?;
        normalize_simplex(&state.gamma)
    } else {
        let mut gammas = Vec::with_capacity(docs.len());
        let mut lengths = Vec::with_capacity(docs.len());
        for (doc, length) in docs {
            gammas.push(infer_document(model, doc, &infer)?.gamma);
            lengths.push(*length);
        }
        pool_segments(mode, &gammas, &lengths)
    }
}

/// Feature rows for every show of one system: pooled posteriors, with
/// channel/time one-hots appended when `with_metadata` is set.
pub fn featurize_docsets(
    corpus: &Corpus,
    docsets: &[DocSet],
    model: &LdaModel,
    mode: FeatureMode,
    with_metadata: bool,
) -> Result<Vec<Vec<f64>>> {
    corpus
        .shows
        .iter()
        .zip(docsets)
        .map(|(show, docs)| {
            let feat = featurize_show(model, mode, docs)?;
            if with_metadata {
                append_metadata(&feat, show.channel, time_chunk(show.hour)?)
            } else {
                Ok(feat)
            }
        })
        .collect()
}

/// Stratified fold assignment: within each class, positions are
/// shuffled once and dealt round-robin, so folds stay balanced per
/// class wherever counts allow.
fn fold_assignment(
    labels: &[usize],
    class_count: usize,
    folds: usize,
    rng: &mut ChaCha20Rng,
) -> Vec<usize> {
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); class_count];
    for (i, &l) in labels.iter().enumerate() {
        groups[l].push(i);
    }
    let mut fold = vec![0usize; labels.len()];
    // The deal rolls over from one class to the next; restarting at
    // fold 0 per class would pile every singleton class into fold 0
    // and could empty that fold's training complement.
    let mut next = 0usize;
    for group in &mut groups {
        group.shuffle(rng);
        for (rank, &pos) in group.iter().enumerate() {
            fold[pos] = (next + rank) % folds;
        }
        next = (next + group.len()) % folds;
    }
    fold
}

/// Out-of-fold decision scores: each training show is scored by an
/// SVM that never saw it. Retrains only the SVM per fold; upstream
/// features are fold-independent.
fn oof_scores(
    rows: &[Vec<f64>],
    labels: &[usize],
    class_count: usize,
    fold: &[usize],
    folds: usize,
    base_seed: u64,
    config: &SvmConfig,
) -> Result<Array2<f64>> {
    let mut scores = Array2::zeros((rows.len(), class_count));
    for f in 0..folds {
        let eval_pos: Vec<usize> = (0..rows.len()).filter(|&i| fold[i] == f).collect();
        if eval_pos.is_empty() {
            continue;
        }
        let train_pos: Vec<usize> = (0..rows.len()).filter(|&i| fold[i] != f).collect();
        let feats: Vec<Vec<f64>> = train_pos.iter().map(|&i| rows[i].clone()).collect();
        let labs: Vec<usize> = train_pos.iter().map(|&i| labels[i]).collect();
        let fold_config = SvmConfig {
            seed: base_seed.wrapping_add(f as u64),
            ..config.clone()
        };
        let training = train_svm(&feats, &labs, class_count, &fold_config)?;
        for &i in &eval_pos {
            for (c, v) in svm_scores(&training.model, &rows[i])?.into_iter().enumerate() {
                scores[[i, c]] = v;
            }
        }
    }
    Ok(scores)
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Run the whole pipeline. See the module docs for the stage graph.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutcome> {
    config.validate()?;
    let corpus = in_stage("load-corpus", Corpus::load(&config.corpus))?;
    let work = &config.work_dir;
    for sub in ["models", "words", "features", "scores", "predictions", "reports"] {
        let dir = work.join(sub);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }

    let shows = &corpus.shows;
    let show_ids: Vec<String> = shows.iter().map(|s| s.show_id.clone()).collect();
    let train_idx: Vec<usize> = (0..shows.len())
        .filter(|&i| shows[i].split == Split::Train)
        .collect();
    let test_idx: Vec<usize> = (0..shows.len())
        .filter(|&i| shows[i].split == Split::Test)
        .collect();
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::Validation(
            "stage load-corpus: corpus needs at least one train and one test show".into(),
        ));
    }

    // Metadata one-hots per show, validated once up front.
    let metadata_onehots: Vec<Vec<f64>> = shows
        .iter()
        .map(|s| append_metadata(&[], s.channel, time_chunk(s.hour)?))
        .collect::<Result<_>>()?;

    let mut systems: Vec<SystemFeatures> = Vec::new();

    if config.acoustic {
        // Load frames for every show.
        let mut frame_docs = Vec::with_capacity(shows.len());
        for show in shows {
            frame_docs.push(in_stage("quantize", corpus.load_frames(show))?);
        }

        // train-gmm on the pooled training frames.
        let train_docs: Vec<&AcousticDocument> =
            train_idx.iter().map(|&i| &frame_docs[i]).collect();
        let pooled = in_stage("train-gmm", pool_frames(&train_docs))?;
        log::info!(
            "stage train-gmm: {} components from {} frames",
            config.gmm_components,
            pooled.nrows()
        );
        let gmm = in_stage(
            "train-gmm",
            train_gmm(pooled.view(), config.gmm_components, &EmConfig::default()),
        )?
        .model;
        in_stage(
            "train-gmm",
            save_model(&work.join("models/gmm.bin"), &Model::Gmm(gmm.clone())),
        )?;

        // quantize every show to acoustic words.
        let mut words = Vec::with_capacity(shows.len());
        for (i, doc) in frame_docs.iter().enumerate() {
            let w = in_stage("quantize", quantize_frames(&gmm, doc.frames.view()))?;
            in_stage(
                "quantize",
                save_word_stream(&work.join(format!("words/{}.tsv", show_ids[i])), &w),
            )?;
            words.push(w);
        }

        // Token units per segment; lengths are frame counts.
        let units = in_stage("quantize", acoustic_units(&corpus, &words))?;

        // Document frequencies are always estimated at segment
        // granularity: with a small acoustic vocabulary every word
        // occurs in every whole show, which would zero all idf.
        let idf = in_stage(
            "build-idf-acoustic",
            build_idf(&idf_documents(&corpus, &units), gmm.n_components()),
        )?;
        in_stage(
            "build-idf-acoustic",
            save_model(&work.join("models/idf_acoustic.bin"), &Model::Idf(idf.clone())),
        )?;

        let docsets = in_stage(
            "featurize-acoustic",
            build_docsets(&corpus, &units, &idf, config.feature_mode),
        )?;
        for &k in &config.k_list {
            let stage = format!("train-lda-acoustic-k{k}");
            let train_docs = training_documents(&corpus, &docsets);
            let lda_config = TrainConfig {
                seed: stage_seed(config.seed, &stage),
                ..TrainConfig::default()
            };
            log::info!("stage {stage}: {} documents", train_docs.len());
            let lda = in_stage(
                &stage,
                train_lda(&train_docs, idf.vocab_size, k, &lda_config),
            )?
            .model;
            in_stage(
                &stage,
                save_model(
                    &work.join(format!("models/lda_acoustic_k{k}.bin")),
                    &Model::Lda(lda.clone()),
                ),
            )?;

            let stage = format!("featurize-acoustic-k{k}");
            let rows = in_stage(
                &stage,
                featurize_docsets(&corpus, &docsets, &lda, config.feature_mode, config.metadata),
            )?;
            systems.push(SystemFeatures {
                name: format!("acoustic_k{k}"),
                rows,
            });
        }
    }

    if config.text {
        // Tokenize transcripts; each line is one text segment. The
        // vocabulary is interned from training shows in reading order,
        // so test-only words drop out during mapping.
        let line_tokens = in_stage("tokenize", text_line_tokens(&corpus))?;
        let vocab = in_stage("tokenize", train_text_vocab(&corpus, &line_tokens))?;
        let index: HashMap<&str, usize> = vocab
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        let units = map_line_tokens(&line_tokens, &index);

        let mut idf = in_stage(
            "build-idf-text",
            build_idf(&idf_documents(&corpus, &units), vocab.len()),
        )?;
        idf.terms = Some(vocab);
        in_stage(
            "build-idf-text",
            save_model(&work.join("models/idf_text.bin"), &Model::Idf(idf.clone())),
        )?;

        let docsets = in_stage(
            "featurize-text",
            build_docsets(&corpus, &units, &idf, config.feature_mode),
        )?;
        for &k in &config.k_list {
            let stage = format!("train-lda-text-k{k}");
            let train_docs = training_documents(&corpus, &docsets);
            let lda_config = TrainConfig {
                seed: stage_seed(config.seed, &stage),
                ..TrainConfig::default()
            };
            log::info!("stage {stage}: {} documents", train_docs.len());
            let lda = in_stage(
                &stage,
                train_lda(&train_docs, idf.vocab_size, k, &lda_config),
            )?
            .model;
            in_stage(
                &stage,
                save_model(
                    &work.join(format!("models/lda_text_k{k}.bin")),
                    &Model::Lda(lda.clone()),
                ),
            )?;

            let stage = format!("featurize-text-k{k}");
            let rows = in_stage(
                &stage,
                featurize_docsets(&corpus, &docsets, &lda, config.feature_mode, config.metadata),
            )?;
            systems.push(SystemFeatures {
                name: format!("text_k{k}"),
                rows,
            });
        }
    }

    if config.metadata && systems.is_empty() {
        // Channel and time alone — the "only metadata" system.
        systems.push(SystemFeatures {
            name: "metadata".into(),
            rows: metadata_onehots.clone(),
        });
    }

    for sys in &systems {
        let keyed: Vec<(String, Vec<f64>)> = show_ids
            .iter()
            .cloned()
            .zip(sys.rows.iter().cloned())
            .collect();
        save_keyed_vectors(&work.join(format!("features/{}.tsv", sys.name)), &keyed)?;
    }

    // Axes: (name, per-show label ids, class names).
    let axes: [(&str, Vec<usize>, Vec<String>); 2] = [
        (
            "genre",
            shows.iter().map(|s| s.genre_id).collect(),
            corpus.genres.names().to_vec(),
        ),
        (
            "show",
            shows.iter().map(|s| s.show_name_id).collect(),
            corpus.show_names.names().to_vec(),
        ),
    ];

    let mut fused_reports: Vec<EvalReport> = Vec::new();
    let mut per_system: Vec<Vec<EvalReport>> = vec![Vec::new(); systems.len()];
    for (axis, labels, class_names) in &axes {
        let class_count = class_names.len();
        let train_labels: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
        let test_labels: Vec<usize> = test_idx.iter().map(|&i| labels[i]).collect();
        let test_ids: Vec<String> = test_idx.iter().map(|&i| show_ids[i].clone()).collect();

        // Per-system SVMs on the full training split.
        let mut test_scores: Vec<Vec<Vec<f64>>> = Vec::with_capacity(systems.len());
        for (s, sys) in systems.iter().enumerate() {
            let stage = format!("train-svm-{}-{axis}", sys.name);
            let feats: Vec<Vec<f64>> = train_idx.iter().map(|&i| sys.rows[i].clone()).collect();
            let svm_config = SvmConfig {
                c: config.svm_c,
                seed: stage_seed(config.seed, &stage),
                ..SvmConfig::default()
            };
            let model = in_stage(
                &stage,
                train_svm(&feats, &train_labels, class_count, &svm_config),
            )?
            .model;
            in_stage(
                &stage,
                save_model(
                    &work.join(format!("models/svm_{}_{axis}.bin", sys.name)),
                    &Model::Svm(model.clone()),
                ),
            )?;

            let mut scores = Vec::with_capacity(test_idx.len());
            let mut predictions = Vec::with_capacity(test_idx.len());
            let mut pred_ids = Vec::with_capacity(test_idx.len());
            for (&i, id) in test_idx.iter().zip(&test_ids) {
                let s = in_stage(&stage, svm_scores(&model, &sys.rows[i]))?;
                let best = argmax(&s);
                pred_ids.push(best);
                predictions.push(PredictionRow {
                    key: id.clone(),
                    label: class_names[best].clone(),
                    scores: s.clone(),
                });
                scores.push(s);
            }
            let keyed: Vec<(String, Vec<f64>)> =
                test_ids.iter().cloned().zip(scores.iter().cloned()).collect();
            save_keyed_vectors(&work.join(format!("scores/{}_{axis}.tsv", sys.name)), &keyed)?;
            save_predictions(
                &work.join(format!("predictions/{}_{axis}.tsv", sys.name)),
                &predictions,
            )?;

            let report = in_stage(
                &stage,
                evaluate(axis, &pred_ids, &test_labels, class_names),
            )?;
            log::info!("system {} {}", sys.name, report.summary());
            report.write_tsv(&work.join(format!("reports/{}_{axis}.tsv", sys.name)))?;
            per_system[s].push(report);
            test_scores.push(scores);
        }

        // Fusion calibrated on out-of-fold scores.
        let stage = format!("train-fusion-{axis}");
        let mut cv_rng = ChaCha20Rng::seed_from_u64(stage_seed(config.seed, &format!("cv-{axis}")));
        let fold = fold_assignment(
            &train_labels,
            class_count,
            config.fusion_folds,
            &mut cv_rng,
        );
        let mut score_sets = Vec::with_capacity(systems.len());
        for sys in &systems {
            let rows: Vec<Vec<f64>> = train_idx.iter().map(|&i| sys.rows[i].clone()).collect();
            let oof_stage = format!("svm-oof-{}-{axis}", sys.name);
            let svm_config = SvmConfig {
                c: config.svm_c,
                ..SvmConfig::default()
            };
            score_sets.push(in_stage(
                &stage,
                oof_scores(
                    &rows,
                    &train_labels,
                    class_count,
                    &fold,
                    config.fusion_folds,
                    stage_seed(config.seed, &oof_stage),
                    &svm_config,
                ),
            )?);
        }
        let fusion = in_stage(
            &stage,
            train_fusion(&score_sets, &train_labels, &FusionConfig::default()),
        )?
        .model;
        in_stage(
            &stage,
            save_model(
                &work.join(format!("models/fusion_{axis}.bin")),
                &Model::Fusion(fusion.clone()),
            ),
        )?;

        // Fuse per-system test scores and evaluate.
        let stage = format!("fuse-{axis}");
        let mut fused_rows = Vec::with_capacity(test_idx.len());
        let mut predictions = Vec::with_capacity(test_idx.len());
        let mut pred_ids = Vec::with_capacity(test_idx.len());
        for (t, id) in test_ids.iter().enumerate() {
            let per_sys: Vec<Vec<f64>> =
                test_scores.iter().map(|s| s[t].clone()).collect();
            let fused = in_stage(&stage, fuse_scores(&fusion, &per_sys))?;
            let best = argmax(&fused);
            pred_ids.push(best);
            predictions.push(PredictionRow {
                key: id.clone(),
                label: class_names[best].clone(),
                scores: fused.clone(),
            });
            fused_rows.push((id.clone(), fused));
        }
        save_keyed_vectors(&work.join(format!("scores/fused_{axis}.tsv")), &fused_rows)?;
        save_predictions(
            &work.join(format!("predictions/fused_{axis}.tsv")),
            &predictions,
        )?;
        let report = in_stage(&stage, evaluate(axis, &pred_ids, &test_labels, class_names))?;
        log::info!("fused {}", report.summary());
        report.write_tsv(&work.join(format!("report_{axis}.tsv")))?;
        fused_reports.push(report);
    }

    let show_report = fused_reports.pop().unwrap();
    let genre_report = fused_reports.pop().unwrap();
    let system_reports = systems
        .iter()
        .zip(per_system)
        .map(|(sys, mut reports)| {
            let show = reports.pop().unwrap();
            let genre = reports.pop().unwrap();
            SystemOutcome {
                system: sys.name.clone(),
                genre,
                show,
            }
        })
        .collect();
    Ok(PipelineOutcome {
        genre_report,
        show_report,
        system_reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_synthetic_corpus, SynthSpec};

    fn tiny_corpus(dir: &Path) -> PathBuf {
        let spec = SynthSpec {
            genres: 2,
            show_identities: 4,
            episodes: 2,
            topics: 4,
            text_vocab: 16,
            acoustic_words: 8,
            segments_per_show: 4,
            tokens_per_segment: 12,
            seed: 5,
            ..SynthSpec::default()
        };
        generate_synthetic_corpus(&spec, dir).unwrap();
        dir.join("manifest.tsv")
    }

    fn tiny_config(manifest: PathBuf, work_dir: PathBuf) -> PipelineConfig {
        PipelineConfig {
            corpus: manifest,
            work_dir,
            gmm_components: 8,
            k_list: vec![4],
            feature_mode: FeatureMode::Hard,
            svm_c: 1.0,
            fusion_folds: 2,
            acoustic: true,
            text: true,
            metadata: false,
            seed: 11,
        }
    }

    #[test]
    fn stage_seeds_differ_per_stage_and_follow_the_run_seed() {
        let a = stage_seed(7, "train-gmm");
        let b = stage_seed(7, "train-lda-acoustic-k8");
        let c = stage_seed(8, "train-gmm");
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, stage_seed(7, "train-gmm"));
    }

    #[test]
    fn fold_assignment_is_stratified() {
        let labels = [0, 0, 0, 0, 1, 1, 1, 1, 1, 1];
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let fold = fold_assignment(&labels, 2, 2, &mut rng);
        for class in 0..2 {
            for f in 0..2 {
                let count = labels
                    .iter()
                    .zip(&fold)
                    .filter(|&(&l, &ff)| l == class && ff == f)
                    .count();
                // 4 and 6 per class split 2+2 and 3+3.
                assert_eq!(count, if class == 0 { 2 } else { 3 });
            }
        }
    }

    #[test]
    fn config_files_require_corpus_work_dir_and_seed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.tsv");
        fs::write(&path, "work_dir\tw\nseed\t1\n").unwrap();
        let err = PipelineConfig::from_file(&path).unwrap_err();
        assert!(err.is_config(), "{err}");
        assert!(err.to_string().contains("missing field `corpus`"), "{err}");

        fs::write(&path, "corpus\tc.tsv\nwork_dir\tw\n").unwrap();
        let err = PipelineConfig::from_file(&path).unwrap_err();
        assert!(err.to_string().contains("missing field `seed`"), "{err}");

        fs::write(
            &path,
            "corpus\tc.tsv\nwork_dir\tw\nseed\t3\nk_list\t4,8\ngmm_components\t32\n",
        )
        .unwrap();
        let config = PipelineConfig::from_file(&path).unwrap();
        assert_eq!(config.k_list, vec![4, 8]);
        assert_eq!(config.gmm_components, 32);
        assert_eq!(config.feature_mode, FeatureMode::Hard);
        assert!(config.acoustic && config.text && !config.metadata);

        fs::write(
            &path,
            "corpus\tc.tsv\nwork_dir\tw\nseed\t3\ngmm_components\t12\n",
        )
        .unwrap();
        let err = PipelineConfig::from_file(&path).unwrap_err();
        assert!(err.to_string().contains("power of two"), "{err}");
    }

    #[test]
    fn pipeline_runs_end_to_end_and_is_deterministic() {
        let corpus_dir = tempfile::tempdir().unwrap();
        let manifest = tiny_corpus(corpus_dir.path());

        let work_a = tempfile::tempdir().unwrap();
        let config = tiny_config(manifest.clone(), work_a.path().to_path_buf());
        let outcome = run_pipeline(&config).unwrap();

        assert_eq!(outcome.genre_report.axis, "genre");
        assert_eq!(outcome.show_report.axis, "show");
        assert_eq!(outcome.genre_report.total, 4);
        assert_eq!(outcome.system_reports.len(), 2);
        assert_eq!(outcome.system_reports[0].system, "acoustic_k4");
        assert_eq!(outcome.system_reports[1].system, "text_k4");

        // Key artifacts exist.
        for rel in [
            "models/gmm.bin",
            "models/idf_acoustic.bin",
            "models/idf_text.bin",
            "models/lda_acoustic_k4.bin",
            "models/svm_text_k4_show.bin",
            "models/fusion_genre.bin",
            "features/acoustic_k4.tsv",
            "scores/fused_show.tsv",
            "predictions/acoustic_k4_genre.tsv",
            "reports/text_k4_genre.tsv",
            "report_genre.tsv",
            "report_show.tsv",
        ] {
            assert!(work_a.path().join(rel).exists(), "{rel}");
        }

        // Rerun with the same seed: byte-identical reports.
        let work_b = tempfile::tempdir().unwrap();
        let config_b = tiny_config(manifest, work_b.path().to_path_buf());
        run_pipeline(&config_b).unwrap();
        for rel in ["report_genre.tsv", "report_show.tsv", "features/text_k4.tsv"] {
            let a = fs::read(work_a.path().join(rel)).unwrap();
            let b = fs::read(work_b.path().join(rel)).unwrap();
            assert_eq!(a, b, "{rel}");
        }
    }

    #[test]
    fn metadata_only_system_runs() {
        let corpus_dir = tempfile::tempdir().unwrap();
        let manifest = tiny_corpus(corpus_dir.path());
        let work = tempfile::tempdir().unwrap();
        let config = PipelineConfig {
            acoustic: false,
            text: false,
            metadata: true,
            ..tiny_config(manifest, work.path().to_path_buf())
        };
        let outcome = run_pipeline(&config).unwrap();
        assert_eq!(outcome.system_reports.len(), 1);
        assert_eq!(outcome.system_reports[0].system, "metadata");
        assert!(work.path().join("features/metadata.tsv").exists());
        // 4 channel slots + 8 time slots.
        let rows = crate::tsv::load_keyed_vectors(&work.path().join("features/metadata.tsv"))
            .unwrap();
        assert!(rows.iter().all(|(_, v)| v.len() == 12));
    }

    #[test]
    fn stage_errors_name_the_stage() {
        let corpus_dir = tempfile::tempdir().unwrap();
        let manifest = tiny_corpus(corpus_dir.path());
        let work = tempfile::tempdir().unwrap();
        let config = PipelineConfig {
            // 64 components cannot be trained from so few frames.
            gmm_components: 4096,
            ..tiny_config(manifest, work.path().to_path_buf())
        };
        let err = run_pipeline(&config).unwrap_err();
        assert!(err.to_string().contains("stage train-gmm"), "{err}");
    }
}
