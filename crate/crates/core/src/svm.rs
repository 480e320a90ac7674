//! One-vs-rest linear SVMs trained by dual coordinate descent.
//!
//! Each class gets an independent L2-regularized hinge-loss binary
//! problem over bias-augmented features `x̃ = [x | 1]`:
//!
//! ```text
//! min_w  ½‖w‖² + Σᵢ costᵢ · max(0, 1 − yᵢ·w·x̃ᵢ)
//! ```
//!
//! solved in the dual by single-coordinate exact maximization over
//! `0 ≤ αᵢ ≤ costᵢ` in a seeded random order per epoch. Epochs stop
//! once the duality gap satisfies `primal − dual ≤ tol·(1 + |primal|)`,
//! which certifies the dual objective to the same tolerance. The final
//! weight vector is recomputed from α in index order so results do not
//! depend on accumulated update drift.

use ndarray::Array2;
use rand::seq::SliceRandom as _;
use rand::SeedableRng as _;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

/// One-vs-rest linear model; row c scores class c on `[x | 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    /// C × (feature_dim + 1); the last column is the bias.
    pub weights: Array2<f64>,
    /// Regularization parameter the model was trained with.
    pub c_param: f64,
}

impl SvmModel {
    pub fn class_count(&self) -> usize {
        self.weights.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.ncols().saturating_sub(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.nrows() == 0 || self.weights.ncols() < 2 {
            return Err(Error::Validation(
                "svm model must have ≥1 class and ≥1 feature dimension".into(),
            ));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Validation("svm weights must be finite".into()));
        }
        if !(self.c_param > 0.0) {
            return Err(Error::Validation("svm c_param must be positive".into()));
        }
        Ok(())
    }
}

/// Solver controls.
#[derive(Debug, Clone)]
pub struct SvmConfig {
    /// Hinge-loss cost C.
    pub c: f64,
    /// Upper bound on coordinate-descent epochs per class.
    pub max_epochs: usize,
    /// Relative duality-gap stopping tolerance.
    pub gap_tolerance: f64,
    /// Seed for the per-epoch visit order.
    pub seed: u64,
    /// Scale per-sample costs inversely to class frequency.
    pub class_weighting: bool,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            max_epochs: 1000,
            gap_tolerance: 1e-6,
            seed: 0,
            class_weighting: false,
        }
    }
}

/// Trained model plus per-class convergence diagnostics.
#[derive(Debug, Clone)]
pub struct SvmTraining {
    pub model: SvmModel,
    /// Dual objective after each epoch, per class; non-decreasing
    /// within 1e-12.
    pub dual_objectives: Vec<Vec<f64>>,
    /// Final duality gap per class (primal − dual).
    pub final_gaps: Vec<f64>,
    /// Final primal objective per class.
    pub final_primals: Vec<f64>,
}

fn binary_primal(w: &[f64], aug: &[Vec<f64>], y: &[f64], cost: &[f64]) -> f64 {
    let mut value = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    for i in 0..aug.len() {
        let margin: f64 = w.iter().zip(&aug[i]).map(|(a, b)| a * b).sum();
        value += cost[i] * (1.0 - y[i] * margin).max(0.0);
    }
    value
}

/// Train one binary problem; returns (w, per-epoch duals, gap, primal).
fn train_binary(
    aug: &[Vec<f64>],
    y: &[f64],
    cost: &[f64],
    q_diag: &[f64],
    config: &SvmConfig,
    seed: u64,
) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let n = aug.len();
    let dim = aug[0].len();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; dim];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut duals = Vec::new();
    let mut gap = f64::INFINITY;
    let mut primal = f64::INFINITY;

    for _ in 0..config.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let x = &aug[i];
            let margin: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
            let grad = y[i] * margin - 1.0;
            let projected = if alpha[i] <= 0.0 {
                grad.min(0.0)
            } else if alpha[i] >= cost[i] {
                grad.max(0.0)
            } else {
                grad
            };
            if projected.abs() <= 1e-12 {
                continue;
            }
            let next = (alpha[i] - grad / q_diag[i]).clamp(0.0, cost[i]);
            let delta = next - alpha[i];
            if delta != 0.0 {
                for (wd, &xd) in w.iter_mut().zip(x) {
                    *wd += delta * y[i] * xd;
                }
                alpha[i] = next;
            }
        }
        let dual =
            alpha.iter().sum::<f64>() - 0.5 * w.iter().map(|v| v * v).sum::<f64>();
        duals.push(dual);
        primal = binary_primal(&w, aug, y, cost);
        gap = primal - dual;
        if gap <= config.gap_tolerance * (1.0 + primal.abs()) {
            break;
        }
    }

    // Deterministic reconstruction of w from α in index order.
    let mut w = vec![0.0; dim];
    for i in 0..n {
        if alpha[i] != 0.0 {
            for (wd, &xd) in w.iter_mut().zip(&aug[i]) {
                *wd += alpha[i] * y[i] * xd;
            }
        }
    }
    (w, duals, gap, primal)
}

/// Train a one-vs-rest SVM.
///
/// `class_count` fixes the number of binary problems (and score rows);
/// it may exceed the labels actually present — absent classes train
/// against all-negative data — but at least two distinct labels must
/// be present.
pub fn train_svm(
    features: &[Vec<f64>],
    labels: &[usize],
    class_count: usize,
    config: &SvmConfig,
) -> Result<SvmTraining> {
    if features.is_empty() {
        return Err(Error::Validation("training set is empty".into()));
    }
    if features.len() != labels.len() {
        return Err(Error::Dimension {
            expected: features.len(),
            found: labels.len(),
        });
    }
    let dim = features[0].len();
    if dim == 0 {
        return Err(Error::Validation("features must have ≥1 dimension".into()));
    }
    for (i, f) in features.iter().enumerate() {
        if f.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: f.len(),
            });
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite feature value in sample {i}"
            )));
        }
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} outside class count {class_count}"
        )));
    }
    let mut present = vec![false; class_count];
    for &l in labels {
        present[l] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::Validation(
            "training data contains a single class".into(),
        ));
    }
    if !(config.c > 0.0) {
        return Err(Error::Config("svm cost C must be positive".into()));
    }
    if !(config.gap_tolerance > 0.0) {
        return Err(Error::Config("gap tolerance must be positive".into()));
    }

    let n = features.len();
    let aug: Vec<Vec<f64>> = features
        .iter()
        .map(|f| {
            let mut x = Vec::with_capacity(dim + 1);
            x.extend_from_slice(f);
            x.push(1.0);
            x
        })
        .collect();
    // Qᵢᵢ = ‖x̃ᵢ‖² ≥ 1 thanks to the bias coordinate.
    let q_diag: Vec<f64> = aug
        .iter()
        .map(|x| x.iter().map(|v| v * v).sum())
        .collect();

    let mut weights = Array2::zeros((class_count, dim + 1));
    let mut dual_objectives = Vec::with_capacity(class_count);
    let mut final_gaps = Vec::with_capacity(class_count);
    let mut final_primals = Vec::with_capacity(class_count);
    for class in 0..class_count {
        let y: Vec<f64> = labels
            .iter()
            .map(|&l| if l == class { 1.0 } else { -1.0 })
            .collect();
        let positives = y.iter().filter(|&&v| v > 0.0).count();
        let cost: Vec<f64> = if config.class_weighting && positives > 0 && positives < n {
            // Inverse-frequency costs balance the two sides' total pull.
            let pos_cost = config.c * n as f64 / (2.0 * positives as f64);
            let neg_cost = config.c * n as f64 / (2.0 * (n - positives) as f64);
            y.iter()
                .map(|&v| if v > 0.0 { pos_cost } else { neg_cost })
                .collect()
        } else {
            vec![config.c; n]
        };
        let class_seed = config
            .seed
            .wrapping_add((class as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let (w, duals, gap, primal) =
            train_binary(&aug, &y, &cost, &q_diag, config, class_seed);
        if gap > config.gap_tolerance * (1.0 + primal.abs()) {
            log::warn!(
                "svm class {class}: duality gap {gap:.3e} above tolerance after {} epochs",
                config.max_epochs
            );
        }
        for (d, &wd) in w.iter().enumerate() {
            weights[[class, d]] = wd;
        }
        dual_objectives.push(duals);
        final_gaps.push(gap);
        final_primals.push(primal);
    }

    let model = SvmModel {
        weights,
        c_param: config.c,
    };
    model.validate()?;
    Ok(SvmTraining {
        model,
        dual_objectives,
        final_gaps,
        final_primals,
    })
}

/// Per-class decision values `w_c · [x | 1]`.
pub fn svm_scores(model: &SvmModel, feature: &[f64]) -> Result<Vec<f64>> {
    if feature.len() != model.feature_dim() {
        return Err(Error::Dimension {
            expected: model.feature_dim(),
            found: feature.len(),
        });
    }
    let mut scores = Vec::with_capacity(model.class_count());
    for c in 0..model.class_count() {
        let row = model.weights.row(c);
        let mut s = row[feature.len()]; // bias
        for (d, &x) in feature.iter().enumerate() {
            s += row[d] * x;
        }
        scores.push(s);
    }
    Ok(scores)
}

/// Argmax class of [`svm_scores`]; ties resolve to the lowest index.
pub fn svm_predict(model: &SvmModel, feature: &[f64]) -> Result<usize> {
    let scores = svm_scores(model, feature)?;
    let mut best = 0usize;
    for c in 1..scores.len() {
        if scores[c] > scores[best] {
            best = c;
        }
    }
    Ok(best)
}
