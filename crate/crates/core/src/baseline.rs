//! Likelihood baseline: one mixture per class, classified by pooled
//! frame log-likelihood.
//!
//! For each class (genre or show name) a mixture is trained on the
//! pooled frames of that class's training shows. A test document is
//! assigned the class whose mixture gives the highest total (or
//! per-frame average — the argmax is identical) log-likelihood. Show
//! decisions can be mapped onto genres through the corpus name→genre
//! table, which is how the show-level baseline doubles as a second
//! genre system.

use ndarray::{Array2, ArrayView2, Axis};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::vq::{train_gmm, EmConfig, GmmModel};

/// Which label set a bank or classifier run is aimed at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassAxis {
    Genre,
    Show,
}

impl ClassAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassAxis::Genre => "genre",
            ClassAxis::Show => "show",
        }
    }
}

/// Per-class mixtures, indexed by dense class id.
#[derive(Debug, Clone)]
pub struct ClassGmmBank {
    pub axis: ClassAxis,
    pub models: Vec<GmmModel>,
}

impl ClassGmmBank {
    pub fn class_count(&self) -> usize {
        self.models.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.models.first().map_or(0, GmmModel::feature_dim)
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::Validation("bank has no class models".into()));
        }
        let dim = self.models[0].feature_dim();
        for (c, model) in self.models.iter().enumerate() {
            model.validate()?;
            if model.feature_dim() != dim {
                return Err(Error::Validation(format!(
                    "class {c} model has feature dimension {}, expected {dim}",
                    model.feature_dim()
                )));
            }
        }
        Ok(())
    }
}

/// Train one mixture per class on the pooled training frames of that
/// class. Every class must have at least one training show.
pub fn train_class_gmms(
    corpus: &Corpus,
    axis: ClassAxis,
    components: usize,
    config: &EmConfig,
) -> Result<ClassGmmBank> {
    let class_count = match axis {
        ClassAxis::Genre => corpus.genres.len(),
        ClassAxis::Show => corpus.show_names.len(),
    };
    let label_of = |show: &crate::corpus::ShowRecord| match axis {
        ClassAxis::Genre => show.genre_id,
        ClassAxis::Show => show.show_name_id,
    };

    let mut models = Vec::with_capacity(class_count);
    for class in 0..class_count {
        let mut pooled: Vec<f64> = Vec::new();
        let mut rows = 0usize;
        for show in corpus.train_shows().filter(|s| label_of(s) == class) {
            let doc = corpus.load_frames(show)?;
            rows += doc.frame_count();
            pooled.extend(doc.frames.iter());
        }
        if rows == 0 {
            let name = match axis {
                ClassAxis::Genre => corpus.genres.name(class),
                ClassAxis::Show => corpus.show_names.name(class),
            };
            return Err(Error::Validation(format!(
                "{} {:?} has no training frames",
                axis.as_str(),
                name.unwrap_or("?")
            )));
        }
        let frames = Array2::from_shape_vec((rows, corpus.feature_dim), pooled)
            .expect("pooled frame shape");
        log::info!(
            "baseline: training {} class {class} on {rows} frames",
            axis.as_str()
        );
        models.push(train_gmm(frames.view(), components, config)?.model);
    }
    let bank = ClassGmmBank { axis, models };
    bank.validate()?;
    Ok(bank)
}

/// Score a document against every class mixture.
///
/// Returns `(argmax class, per-class scores)`. With `average` set the
/// scores are per-frame means; the winning class is unaffected because
/// the frame count is shared across classes. Ties resolve to the lowest
/// class id.
pub fn classify_loglik(
    bank: &ClassGmmBank,
    frames: ArrayView2<f64>,
    average: bool,
) -> Result<(usize, Vec<f64>)> {
    if frames.nrows() == 0 {
        return Err(Error::Validation("document has no frames".into()));
    }
    if frames.ncols() != bank.feature_dim() {
        return Err(Error::Dimension {
            expected: bank.feature_dim(),
            found: frames.ncols(),
        });
    }
    let mut scores = Vec::with_capacity(bank.class_count());
    for model in &bank.models {
        let mut total = 0.0;
        for row in frames.axis_iter(Axis(0)) {
            total += model.frame_log_likelihood(row)?;
        }
        if average {
            total /= frames.nrows() as f64;
        }
        scores.push(total);
    }
    let mut best = 0usize;
    for c in 1..scores.len() {
        if scores[c] > scores[best] {
            best = c;
        }
    }
    Ok((best, scores))
}

/// Map show-level predictions onto genres via a name→genre table.
pub fn map_show_to_genre(predictions: &[usize], show_to_genre: &[usize]) -> Result<Vec<usize>> {
    predictions
        .iter()
        .map(|&p| {
            show_to_genre.get(p).copied().ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "show id {p} outside mapping of length {}",
                    show_to_genre.len()
                ))
            })
        })
        .collect()
}
