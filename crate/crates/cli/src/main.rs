//! Command-line drivers for the media genre/show identification
//! pipeline.
//!
//! Every subcommand is a thin wrapper over the library: flags and
//! config files go in, artifact files come out. Logs go to standard
//! error; data goes to files (or standard output where a subcommand
//! says so). Exit codes: 0 on success, 1 on a data or computation
//! error, 2 on a usage or config error.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mediatopic_core::archive::{
    load_bank, load_fusion, load_gmm, load_idf, load_lda, load_svm, save_model, Model,
};
use mediatopic_core::baseline::{classify_loglik, train_class_gmms, ClassAxis};
use mediatopic_core::corpus::{Corpus, LabelTable, ShowRecord, Split};
use mediatopic_core::eval::evaluate;
use mediatopic_core::featurize::FeatureMode;
use mediatopic_core::fusion::{fuse_scores, stack_scores, train_fusion, FusionConfig};
use mediatopic_core::lda::{infer_document, train_lda, InferConfig, TrainConfig};
use mediatopic_core::matrix::pool_frames;
use mediatopic_core::pipeline::{
    acoustic_units, build_docsets, featurize_docsets, idf_documents, map_line_tokens,
    run_pipeline, text_line_tokens, train_text_vocab, PipelineConfig,
};
use mediatopic_core::svm::{svm_scores, train_svm, SvmConfig};
use mediatopic_core::synth::{generate_synthetic_corpus, SynthSpec};
use mediatopic_core::tsv::{
    load_keyed_vectors, load_labels, load_predictions, load_weighted_document, load_word_stream,
    save_keyed_vectors, save_predictions, save_weighted_document, save_word_stream, PredictionRow,
};
use mediatopic_core::vq::{quantize_frames, train_gmm, EmConfig};
use mediatopic_core::weighting::{build_idf, map_tokens, tokenize, weight_document};
use mediatopic_core::{Error, Result};

/// Genre and show identification over acoustic-word topic models.
#[derive(Parser)]
#[command(name = "mediatopic", version, about, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the acoustic-word GMM on the pooled training frames.
    TrainGmm(TrainGmmArgs),
    /// Convert every show's frames into an acoustic-word stream.
    Quantize(QuantizeArgs),
    /// Train one GMM per class for the generative baseline.
    BaselineTrain(BaselineTrainArgs),
    /// Classify shows by per-class GMM log-likelihood.
    BaselineClassify(BaselineClassifyArgs),
    /// Estimate inverse document frequencies from the training split.
    BuildIdf(BuildIdfArgs),
    /// Weight one document's tokens by tf-idf.
    Weight(WeightArgs),
    /// Train an LDA topic model on weighted documents.
    TrainLda(TrainLdaArgs),
    /// Infer topic posteriors (gamma rows) for weighted documents.
    Infer(InferArgs),
    /// Pool per-segment posteriors into one feature row per show.
    Featurize(FeaturizeArgs),
    /// Train one-vs-rest linear SVMs on show features.
    TrainSvm(TrainSvmArgs),
    /// Score shows with a trained SVM and pick the best class.
    Predict(PredictArgs),
    /// Calibrate logistic score fusion on aligned system scores.
    TrainFusion(TrainFusionArgs),
    /// Combine per-system scores with a trained fusion model.
    Fuse(FuseArgs),
    /// Compare predictions against truth labels.
    Eval(EvalArgs),
    /// Generate a synthetic corpus from a generative spec.
    Synth(SynthArgs),
    /// Run the end-to-end pipeline from a config file.
    Pipeline(PipelineArgs),
}

/// Which label set a command targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AxisArg {
    Genre,
    Show,
}

impl AxisArg {
    fn core(self) -> ClassAxis {
        match self {
            AxisArg::Genre => ClassAxis::Genre,
            AxisArg::Show => ClassAxis::Show,
        }
    }
}

/// Which token source a command reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SourceArg {
    /// Acoustic-word streams written by `quantize`.
    Acoustic,
    /// Transcript lines from the corpus.
    Text,
}

/// Which corpus split a command operates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    All,
}

impl SplitArg {
    fn keeps(self, split: Split) -> bool {
        match self {
            SplitArg::Train => split == Split::Train,
            SplitArg::Test => split == Split::Test,
            SplitArg::All => true,
        }
    }
}

/// Document granularity for document-frequency counting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GranularityArg {
    /// One document per segment (or transcript line).
    Segment,
    /// One document per whole show.
    Show,
}

#[derive(Args)]
struct TrainGmmArgs {
    /// Corpus manifest (TSV).
    #[arg(long)]
    corpus: PathBuf,
    /// Mixture components to reach by mix-up; must be a power of two.
    #[arg(long)]
    components: usize,
    /// EM iterations at each mix-up level.
    #[arg(long, default_value_t = EmConfig::default().iterations_per_level)]
    iterations: usize,
    /// Output model archive.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QuantizeArgs {
    /// GMM archive from `train-gmm`.
    #[arg(long)]
    gmm: PathBuf,
    /// Corpus manifest (TSV).
    #[arg(long)]
    corpus: PathBuf,
    /// Directory receiving one `<show_id>.tsv` word stream per show.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BaselineTrainArgs {
    /// Corpus manifest (TSV).
    #[arg(long)]
    corpus: PathBuf,
    /// Label set to train one mixture per class for.
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Mixture components per class; must be a power of two.
    #[arg(long)]
    components: usize,
    /// EM iterations at each mix-up level.
    #[arg(long, default_value_t = EmConfig::default().iterations_per_level)]
    iterations: usize,
    /// Output bank archive.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BaselineClassifyArgs {
    /// Bank archive from `baseline-train`.
    #[arg(long)]
    bank: PathBuf,
    /// Corpus manifest (TSV).
    #[arg(long)]
    corpus: PathBuf,
    /// Label set the bank was trained for (checked against the bank).
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Report show predictions as their mapped genres.
    #[arg(long)]
    map_shows_to_genres: bool,
    /// Use per-frame mean log-likelihoods instead of totals.
    #[arg(long)]
    average: bool,
    /// Shows to classify.
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    split: SplitArg,
    /// Output predictions TSV: show_id, label, per-class scores.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildIdfArgs {
    /// Corpus manifest (TSV).
    #[arg(long)]
    corpus: PathBuf,
    /// Token source for document-frequency counting.
    #[arg(long, value_enum)]
    source: SourceArg,
    /// Word-stream directory from `quantize` (acoustic source only).
    #[arg(long)]
    words_dir: Option<PathBuf>,
    /// Acoustic vocabulary size (acoustic source only).
    #[arg(long)]
    vocab_size: Option<usize>,
    /// Document granularity for df counting.
    #[arg(long, value_enum, default_value_t = GranularityArg::Segment)]
    granularity: GranularityArg,
    /// Output idf archive.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct WeightArgs {
    /// Idf archive from `build-idf`.
    #[arg(long)]
    idf: PathBuf,
    /// Input document: an acoustic-word stream, or raw text with --text.
    #[arg(long)]
    input: PathBuf,
    /// Tokenize the input as text and map it via the archive's terms.
    #[arg(long)]
    text: bool,
    /// Round masses to integers (types rounding to zero drop out).
    #[arg(long)]
    rounded: bool,
    /// Output weighted-document TSV: type_id, mass.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainLdaArgs {
    /// Topic count K.
    #[arg(long)]
    k: usize,
    /// Symmetric Dirichlet concentration; defaults to 1/K.
    #[arg(long)]
    alpha: Option<f64>,
    /// Topic-type smoothing mass added in the M-step.
    #[arg(long, default_value_t = TrainConfig::default().eta)]
    eta: f64,
    /// Seed for the topic initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Upper bound on variational EM iterations.
    #[arg(long, default_value_t = TrainConfig::default().max_iterations)]
    max_iterations: usize,
    /// Vocabulary size; alternative to --idf.
    #[arg(long)]
    vocab_size: Option<usize>,
    /// Idf archive supplying the vocabulary size; alternative to --vocab-size.
    #[arg(long)]
    idf: Option<PathBuf>,
    /// Output model archive.
    #[arg(long)]
    out: PathBuf,
    /// Weighted-document TSV files (the training corpus).
    #[arg(required = true)]
    docs: Vec<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    /// LDA archive from `train-lda`.
    #[arg(long)]
    lda: PathBuf,
    /// Output TSV of gamma rows keyed by document file stem.
    #[arg(long)]
    out: PathBuf,
    /// Weighted-document TSV files to infer.
    #[arg(required = true)]
    docs: Vec<PathBuf>,
}

#[derive(Args)]
struct FeaturizeArgs {
    /// Corpus manifest (TSV).
    #[arg(long)]
    corpus: PathBuf,
    /// Token source to featurize.
    #[arg(long, value_enum)]
    source: SourceArg,
    /// Word-stream directory from `quantize` (acoustic source only).
    #[arg(long)]
    words_dir: Option<PathBuf>,
    /// Idf archive matching the source.
    #[arg(long)]
    idf: PathBuf,
    /// LDA archive matching the source.
    #[arg(long)]
    lda: PathBuf,
    /// Posterior pooling mode.
    #[arg(long, default_value = "hard", value_parser = parse_mode)]
    mode: FeatureMode,
    /// Append channel and broadcast-time one-hot features.
    #[arg(long)]
    with_metadata: bool,
    /// Output features TSV keyed by show_id (all shows).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainSvmArgs {
    /// Corpus manifest (TSV); supplies training labels.
    #[arg(long)]
    corpus: PathBuf,
    /// Features TSV from `featurize`.
    #[arg(long)]
    features: PathBuf,
    /// Label set to train against.
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Hinge-loss cost C.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Seed for the coordinate visit order.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output model archive.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// SVM archive from `train-svm`.
    #[arg(long)]
    svm: PathBuf,
    /// Corpus manifest (TSV); supplies class names.
    #[arg(long)]
    corpus: PathBuf,
    /// Features TSV from `featurize`.
    #[arg(long)]
    features: PathBuf,
    /// Label set the model was trained against.
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Shows to score.
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    split: SplitArg,
    /// Output predictions TSV: show_id, label, per-class scores.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainFusionArgs {
    /// Per-system score TSVs; all files must list identical keys.
    #[arg(long, required = true, num_args = 1..)]
    scores: Vec<PathBuf>,
    /// Truth TSV: key, class index (matching the score columns).
    #[arg(long)]
    labels: PathBuf,
    /// Output model archive.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FuseArgs {
    /// Fusion archive from `train-fusion`.
    #[arg(long)]
    fusion: PathBuf,
    /// Per-system score TSVs, in training order; identical keys.
    #[arg(long, required = true, num_args = 1..)]
    scores: Vec<PathBuf>,
    /// Output fused-score TSV keyed like the inputs.
    #[arg(long)]
    out: PathBuf,
    /// Also write argmax predictions (labels are class indices).
    #[arg(long)]
    pred: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Predictions TSV: key, label[, scores...].
    #[arg(long)]
    pred: PathBuf,
    /// Truth TSV: key, label.
    #[arg(long)]
    truth: PathBuf,
    /// Label map TSV applied to predictions (e.g. show -> genre).
    #[arg(long)]
    map: Option<PathBuf>,
    /// Axis name recorded in the report.
    #[arg(long, default_value = "labels")]
    axis: String,
    /// Report TSV path; omit to print the TSV to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Generative spec (TSV key-value); defaults apply when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output corpus directory; the manifest path is printed.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    /// Pipeline config (TSV key-value).
    #[arg(long)]
    config: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn run(command: &Command) -> Result<()> {
    match command {
        Command::TrainGmm(args) => run_train_gmm(args),
        Command::Quantize(args) => run_quantize(args),
        Command::BaselineTrain(args) => run_baseline_train(args),
        Command::BaselineClassify(args) => run_baseline_classify(args),
        Command::BuildIdf(args) => run_build_idf(args),
        Command::Weight(args) => run_weight(args),
        Command::TrainLda(args) => run_train_lda(args),
        Command::Infer(args) => run_infer(args),
        Command::Featurize(args) => run_featurize(args),
        Command::TrainSvm(args) => run_train_svm(args),
        Command::Predict(args) => run_predict(args),
        Command::TrainFusion(args) => run_train_fusion(args),
        Command::Fuse(args) => run_fuse(args),
        Command::Eval(args) => run_eval(args),
        Command::Synth(args) => run_synth(args),
        Command::Pipeline(args) => run_pipeline_cmd(args),
    }
}

fn parse_mode(s: &str) -> std::result::Result<FeatureMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn axis_names(corpus: &Corpus, axis: AxisArg) -> &[String] {
    match axis {
        AxisArg::Genre => corpus.genres.names(),
        AxisArg::Show => corpus.show_names.names(),
    }
}

fn axis_label(show: &ShowRecord, axis: AxisArg) -> usize {
    match axis {
        AxisArg::Genre => show.genre_id,
        AxisArg::Show => show.show_name_id,
    }
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate() {
        if v > scores[best] {
            best = i;
        }
    }
    best
}

/// One word stream per show, read from `<dir>/<show_id>.tsv`.
fn load_words_dir(corpus: &Corpus, dir: &Path) -> Result<Vec<Vec<usize>>> {
    corpus
        .shows
        .iter()
        .map(|s| load_word_stream(&dir.join(format!("{}.tsv", s.show_id))))
        .collect()
}

fn load_feature_map(path: &Path) -> Result<HashMap<String, Vec<f64>>> {
    Ok(load_keyed_vectors(path)?.into_iter().collect())
}

fn feature_row(
    table: &HashMap<String, Vec<f64>>,
    path: &Path,
    show_id: &str,
) -> Result<Vec<f64>> {
    table.get(show_id).cloned().ok_or_else(|| {
        Error::Validation(format!("{} has no row for show {show_id}", path.display()))
    })
}

/// Per-system score rows (outer: system, inner: sample) sharing one
/// key sequence.
type AlignedScores = (Vec<String>, Vec<Vec<Vec<f64>>>);

/// Load several score tables and require their keys to agree row-wise.
fn load_aligned_scores(paths: &[PathBuf]) -> Result<AlignedScores> {
    let mut keys: Vec<String> = Vec::new();
    let mut sets = Vec::with_capacity(paths.len());
    for (p, path) in paths.iter().enumerate() {
        let rows = load_keyed_vectors(path)?;
        let file_keys: Vec<&String> = rows.iter().map(|(k, _)| k).collect();
        if p == 0 {
            keys = file_keys.into_iter().cloned().collect();
        } else if file_keys.len() != keys.len() || file_keys.iter().zip(&keys).any(|(a, b)| *a != b)
        {
            return Err(Error::Validation(format!(
                "{} lists different keys than {}",
                path.display(),
                paths[0].display()
            )));
        }
        sets.push(rows.into_iter().map(|(_, v)| v).collect());
    }
    Ok((keys, sets))
}

fn run_train_gmm(args: &TrainGmmArgs) -> Result<()> {
    let corpus = Corpus::load(&args.corpus)?;
    let mut docs = Vec::new();
    for show in corpus.train_shows() {
        docs.push(corpus.load_frames(show)?);
    }
    let refs: Vec<_> = docs.iter().collect();
    let pooled = pool_frames(&refs)?;
    log::info!(
        "training {} components on {} frames",
        args.components,
        pooled.nrows()
    );
    let config = EmConfig {
        iterations_per_level: args.iterations,
        ..EmConfig::default()
    };
    let training = train_gmm(pooled.view(), args.components, &config)?;
    save_model(&args.out, &Model::Gmm(training.model))
}

fn run_quantize(args: &QuantizeArgs) -> Result<()> {
    let gmm = load_gmm(&args.gmm)?;
    let corpus = Corpus::load(&args.corpus)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    for show in &corpus.shows {
        let doc = corpus.load_frames(show)?;
        let words = quantize_frames(&gmm, doc.frames.view())?;
        save_word_stream(&args.out_dir.join(format!("{}.tsv", show.show_id)), &words)?;
    }
    Ok(())
}

fn run_baseline_train(args: &BaselineTrainArgs) -> Result<()> {
    let corpus = Corpus::load(&args.corpus)?;
    let config = EmConfig {
        iterations_per_level: args.iterations,
        ..EmConfig::default()
    };
    let bank = train_class_gmms(&corpus, args.axis.core(), args.components, &config)?;
    save_model(&args.out, &Model::Bank(bank))
}

fn run_baseline_classify(args: &BaselineClassifyArgs) -> Result<()> {
    let bank = load_bank(&args.bank)?;
    let corpus = Corpus::load(&args.corpus)?;
    if bank.axis != args.axis.core() {
        return Err(Error::Config(format!(
            "bank was trained for the {} axis, not {}",
            bank.axis.as_str(),
            args.axis.core().as_str()
        )));
    }
    if args.map_shows_to_genres && bank.axis != ClassAxis::Show {
        return Err(Error::Config(
            "--map-shows-to-genres requires a show-axis bank".into(),
        ));
    }
    let names = axis_names(&corpus, args.axis);
    if bank.class_count() != names.len() {
        return Err(Error::Validation(format!(
            "bank has {} classes but the corpus {} axis has {}",
            bank.class_count(),
            bank.axis.as_str(),
            names.len()
        )));
    }
    let show_to_genre = corpus.show_to_genre();
    let mut rows = Vec::new();
    for show in corpus.shows.iter().filter(|s| args.split.keeps(s.split)) {
        let doc = corpus.load_frames(show)?;
        let (best, scores) = classify_loglik(&bank, doc.frames.view(), args.average)?;
        let label = if args.map_shows_to_genres {
            corpus
                .genres
                .name(show_to_genre[best])
                .expect("mapped genre id in table")
                .to_string()
        } else {
            names[best].clone()
        };
        rows.push(PredictionRow {
            key: show.show_id.clone(),
            label,
            scores,
        });
    }
    if rows.is_empty() {
        return Err(Error::Validation(
            "the requested split contains no shows".into(),
        ));
    }
    save_predictions(&args.out, &rows)
}

fn run_build_idf(args: &BuildIdfArgs) -> Result<()> {
    let corpus = Corpus::load(&args.corpus)?;
    let (units, vocab_size, terms) = match args.source {
        SourceArg::Acoustic => {
            let dir = args.words_dir.as_ref().ok_or_else(|| {
                Error::Config("--words-dir is required with --source acoustic".into())
            })?;
            let vocab_size = args.vocab_size.ok_or_else(|| {
                Error::Config("--vocab-size is required with --source acoustic".into())
            })?;
            let words = load_words_dir(&corpus, dir)?;
            (acoustic_units(&corpus, &words)?, vocab_size, None)
        }
        SourceArg::Text => {
            if args.words_dir.is_some() || args.vocab_size.is_some() {
                return Err(Error::Config(
                    "--words-dir and --vocab-size apply only to --source acoustic".into(),
                ));
            }
            let lines = text_line_tokens(&corpus)?;
            let vocab = train_text_vocab(&corpus, &lines)?;
            let index: HashMap<&str, usize> = vocab
                .iter()
                .enumerate()
                .map(|(i, t)| (t.as_str(), i))
                .collect();
            let units = map_line_tokens(&lines, &index);
            let size = vocab.len();
            (units, size, Some(vocab))
        }
    };
    let documents: Vec<Vec<usize>> = match args.granularity {
        GranularityArg::Segment => idf_documents(&corpus, &units),
        GranularityArg::Show => corpus
            .shows
            .iter()
            .zip(&units)
            .filter(|(s, _)| s.split == Split::Train)
            .map(|(_, u)| u.iter().flat_map(|(t, _)| t.iter().copied()).collect())
            .collect(),
    };
    let mut idf = build_idf(&documents, vocab_size)?;
    idf.terms = terms;
    save_model(&args.out, &Model::Idf(idf))
}

fn run_weight(args: &WeightArgs) -> Result<()> {
    let idf = load_idf(&args.idf)?;
    let tokens: Vec<usize> = if args.text {
        if idf.terms.is_none() {
            return Err(Error::Config(
                "idf archive carries no term table; build it with --source text".into(),
            ));
        }
        let text = fs::read_to_string(&args.input).map_err(|e| Error::io(&args.input, e))?;
        map_tokens(&tokenize(&text), &idf.term_index())
    } else {
        load_word_stream(&args.input)?
    };
    let doc = weight_document(&tokens, &idf)?;
    let doc = if args.rounded { doc.rounded() } else { doc };
    save_weighted_document(&args.out, &doc)
}

fn run_train_lda(args: &TrainLdaArgs) -> Result<()> {
    let vocab_size = match (args.vocab_size, &args.idf) {
        (Some(v), None) => v,
        (None, Some(p)) => load_idf(p)?.vocab_size,
        _ => {
            return Err(Error::Config(
                "exactly one of --vocab-size or --idf is required".into(),
            ))
        }
    };
    let docs = args
        .docs
        .iter()
        .map(|p| load_weighted_document(p))
        .collect::<Result<Vec<_>>>()?;
    let config = TrainConfig {
        alpha: args.alpha,
        eta: args.eta,
        seed: args.seed,
        max_iterations: args.max_iterations,
        ..TrainConfig::default()
    };
    let training = train_lda(&docs, vocab_size, args.k, &config)?;
    log::info!(
        "trained K={} in {} EM iterations, final corpus ELBO {:.6}",
        args.k,
        training.corpus_elbo.len(),
        training.corpus_elbo.last().copied().unwrap_or(f64::NAN)
    );
    save_model(&args.out, &Model::Lda(training.model))
}

fn run_infer(args: &InferArgs) -> Result<()> {
    let model = load_lda(&args.lda)?;
    let config = InferConfig::default();
    let mut rows = Vec::with_capacity(args.docs.len());
    for path in &args.docs {
        let doc = load_weighted_document(path)?;
        let state = infer_document(&model, &doc, &config)?;
        let key = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        rows.push((key, state.gamma));
    }
    save_keyed_vectors(&args.out, &rows)
}

fn run_featurize(args: &FeaturizeArgs) -> Result<()> {
    let corpus = Corpus::load(&args.corpus)?;
    let idf = load_idf(&args.idf)?;
    let lda = load_lda(&args.lda)?;
    let units = match args.source {
        SourceArg::Acoustic => {
            let dir = args.words_dir.as_ref().ok_or_else(|| {
                Error::Config("--words-dir is required with --source acoustic".into())
            })?;
            acoustic_units(&corpus, &load_words_dir(&corpus, dir)?)?
        }
        SourceArg::Text => {
            if args.words_dir.is_some() {
                return Err(Error::Config(
                    "--words-dir applies only to --source acoustic".into(),
                ));
            }
            if idf.terms.is_none() {
                return Err(Error::Config(
                    "idf archive carries no term table; build it with --source text".into(),
                ));
            }
            let lines = text_line_tokens(&corpus)?;
            map_line_tokens(&lines, &idf.term_index())
        }
    };
    let docsets = build_docsets(&corpus, &units, &idf, args.mode)?;
    let rows = featurize_docsets(&corpus, &docsets, &lda, args.mode, args.with_metadata)?;
    let keyed: Vec<(String, Vec<f64>)> = corpus
        .shows
        .iter()
        .map(|s| s.show_id.clone())
        .zip(rows)
        .collect();
    save_keyed_vectors(&args.out, &keyed)
}

fn run_train_svm(args: &TrainSvmArgs) -> Result<()> {
    let corpus = Corpus::load(&args.corpus)?;
    let table = load_feature_map(&args.features)?;
    let names = axis_names(&corpus, args.axis);
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    for show in corpus.train_shows() {
        feats.push(feature_row(&table, &args.features, &show.show_id)?);
        labels.push(axis_label(show, args.axis));
    }
    let config = SvmConfig {
        c: args.c,
        seed: args.seed,
        ..SvmConfig::default()
    };
    let training = train_svm(&feats, &labels, names.len(), &config)?;
    save_model(&args.out, &Model::Svm(training.model))
}

fn run_predict(args: &PredictArgs) -> Result<()> {
    let model = load_svm(&args.svm)?;
    let corpus = Corpus::load(&args.corpus)?;
    let table = load_feature_map(&args.features)?;
    let names = axis_names(&corpus, args.axis);
    if model.class_count() != names.len() {
        return Err(Error::Validation(format!(
            "model scores {} classes but the corpus {} axis has {}",
            model.class_count(),
            args.axis.core().as_str(),
            names.len()
        )));
    }
    let mut rows = Vec::new();
    for show in corpus.shows.iter().filter(|s| args.split.keeps(s.split)) {
        let feat = feature_row(&table, &args.features, &show.show_id)?;
        let scores = svm_scores(&model, &feat)?;
        let best = argmax(&scores);
        rows.push(PredictionRow {
            key: show.show_id.clone(),
            label: names[best].clone(),
            scores,
        });
    }
    if rows.is_empty() {
        return Err(Error::Validation(
            "the requested split contains no shows".into(),
        ));
    }
    save_predictions(&args.out, &rows)
}

fn run_train_fusion(args: &TrainFusionArgs) -> Result<()> {
    let (keys, sets) = load_aligned_scores(&args.scores)?;
    let label_rows = load_labels(&args.labels)?;
    let mut by_key: HashMap<&str, &str> = HashMap::with_capacity(label_rows.len());
    for (k, v) in &label_rows {
        if by_key.insert(k.as_str(), v.as_str()).is_some() {
            return Err(Error::Validation(format!(
                "{} has a duplicate key {k:?}",
                args.labels.display()
            )));
        }
    }
    let labels = keys
        .iter()
        .map(|k| {
            let raw = by_key.get(k.as_str()).ok_or_else(|| {
                Error::Validation(format!(
                    "{} has no label for key {k:?}",
                    args.labels.display()
                ))
            })?;
            raw.parse::<usize>().map_err(|_| {
                Error::Validation(format!("label {raw:?} for key {k:?} is not a class index"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let matrices = sets
        .iter()
        .map(|rows| stack_scores(rows))
        .collect::<Result<Vec<_>>>()?;
    let training = train_fusion(&matrices, &labels, &FusionConfig::default())?;
    log::info!(
        "fusion converged in {} accepted steps, scales {:?}",
        training.objective_history.len().saturating_sub(1),
        training.model.scales
    );
    save_model(&args.out, &Model::Fusion(training.model))
}

fn run_fuse(args: &FuseArgs) -> Result<()> {
    let model = load_fusion(&args.fusion)?;
    let (keys, sets) = load_aligned_scores(&args.scores)?;
    if sets.len() != model.system_count() {
        return Err(Error::Validation(format!(
            "model fuses {} systems but {} score files were given",
            model.system_count(),
            sets.len()
        )));
    }
    let mut fused_rows = Vec::with_capacity(keys.len());
    let mut preds = Vec::with_capacity(keys.len());
    for (i, key) in keys.iter().enumerate() {
        let per_sys: Vec<Vec<f64>> = sets.iter().map(|s| s[i].clone()).collect();
        let fused = fuse_scores(&model, &per_sys)?;
        let best = argmax(&fused);
        preds.push(PredictionRow {
            key: key.clone(),
            label: best.to_string(),
            scores: fused.clone(),
        });
        fused_rows.push((key.clone(), fused));
    }
    save_keyed_vectors(&args.out, &fused_rows)?;
    if let Some(path) = &args.pred {
        save_predictions(path, &preds)?;
    }
    Ok(())
}

fn run_eval(args: &EvalArgs) -> Result<()> {
    let preds = load_predictions(&args.pred)?;
    let truth = load_labels(&args.truth)?;
    let mapping: Option<HashMap<String, String>> = match &args.map {
        Some(p) => Some(load_labels(p)?.into_iter().collect()),
        None => None,
    };
    let mut pred_by_key: HashMap<&str, &str> = HashMap::with_capacity(preds.len());
    for row in &preds {
        if pred_by_key
            .insert(row.key.as_str(), row.label.as_str())
            .is_some()
        {
            return Err(Error::Validation(format!(
                "duplicate prediction for key {:?}",
                row.key
            )));
        }
    }
    if preds.len() != truth.len() {
        return Err(Error::Validation(format!(
            "{} has {} rows but {} has {}",
            args.pred.display(),
            preds.len(),
            args.truth.display(),
            truth.len()
        )));
    }
    let mut classes = LabelTable::new();
    let mut pred_ids = Vec::with_capacity(truth.len());
    let mut truth_ids = Vec::with_capacity(truth.len());
    let mut seen = HashSet::new();
    for (key, truth_label) in &truth {
        if !seen.insert(key.as_str()) {
            return Err(Error::Validation(format!("duplicate truth key {key:?}")));
        }
        let pred_label = *pred_by_key
            .get(key.as_str())
            .ok_or_else(|| Error::Validation(format!("no prediction for key {key:?}")))?;
        let pred_label = match &mapping {
            Some(m) => m
                .get(pred_label)
                .ok_or_else(|| {
                    Error::Validation(format!("label {pred_label:?} missing from map"))
                })?
                .as_str(),
            None => pred_label,
        };
        truth_ids.push(classes.intern(truth_label));
        pred_ids.push(classes.intern(pred_label));
    }
    let report = evaluate(&args.axis, &pred_ids, &truth_ids, classes.names())?;
    match &args.out {
        Some(path) => {
            report.write_tsv(path)?;
            print!("{}", report.summary());
        }
        None => {
            print!("{}", report.to_tsv());
            eprint!("{}", report.summary());
        }
    }
    Ok(())
}

fn run_synth(args: &SynthArgs) -> Result<()> {
    let spec = match &args.spec {
        Some(path) => SynthSpec::from_file(path)?,
        None => SynthSpec::default(),
    };
    generate_synthetic_corpus(&spec, &args.out)?;
    println!("{}", args.out.join("manifest.tsv").display());
    Ok(())
}

fn run_pipeline_cmd(args: &PipelineArgs) -> Result<()> {
    let config = PipelineConfig::from_file(&args.config)?;
    let outcome = run_pipeline(&config)?;
    for sys in &outcome.system_reports {
        print!("[{}] {}", sys.system, sys.genre.summary());
        print!("[{}] {}", sys.system, sys.show.summary());
    }
    print!("[fused] {}", outcome.genre_report.summary());
    print!("[fused] {}", outcome.show_report.summary());
    Ok(())
}
