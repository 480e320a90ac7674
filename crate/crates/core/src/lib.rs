//! Genre and show identification for broadcast audio.
//!
//! The crate implements a full tagging pipeline: acoustic frames are
//! quantized against a mixture model into discrete "acoustic words",
//! word streams (acoustic or textual) are reweighted with tf-idf and
//! summarized by latent-topic posteriors, topic posteriors are pooled
//! into fixed-length show features, and linear classifiers plus a
//! score-fusion stage produce the final genre and show decisions.
//!
//! Module map:
//!
//! * [`corpus`] / [`matrix`] / [`archive`] / [`tsv`] — on-disk formats
//!   (manifests, frame matrices, model archives, tabular artifacts).
//! * [`vq`] — diagonal-covariance Gaussian mixtures trained by EM with
//!   binary mix-up splitting, and frame quantization.
//! * [`baseline`] — per-class mixture banks classified by pooled
//!   log-likelihood.
//! * [`weighting`] — tokenization, document frequencies, tf-idf masses.
//! * [`lda`] — variational-Bayes latent Dirichlet allocation over
//!   fractionally weighted documents.
//! * [`featurize`] — segment-posterior pooling and metadata features.
//! * [`svm`] — one-vs-rest linear SVMs trained by dual coordinate
//!   descent.
//! * [`fusion`] — multiclass logistic-regression score fusion.
//! * [`eval`] — accuracy / confusion reporting.
//! * [`synth`] — synthetic corpus generator for end-to-end checks.
//! * [`pipeline`] — orchestration of the above into one run.
//!
//! Everything is single-threaded and deterministic: all randomness
//! flows from one explicit 64-bit seed, and repeated runs with the
//! same inputs produce byte-identical artifacts.

// Guards written as `!(x > 0.0)` are deliberate: they reject NaN,
// where the suggested `x <= 0.0` would silently accept it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// The EM kernels walk several parallel arrays by index; zipped
// iterators obscure the update equations there.
#![allow(clippy::needless_range_loop)]

pub mod archive;
pub mod baseline;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod featurize;
pub mod fusion;
pub mod lda;
pub mod math;
pub mod matrix;
pub mod pipeline;
pub mod svm;
pub mod synth;
pub mod tsv;
pub mod vq;
pub mod weighting;

pub use error::{Error, Result};
