//! Score fusion by multiclass logistic regression.
//!
//! Each input system k contributes an N×C score matrix S_k; the fused
//! score row is `Σ_k λ_k·S_k[n] + δ` with one scalar scale per system
//! and one shared per-class offset vector. Training maximizes the
//! penalized conditional log-likelihood
//!
//! ```text
//! L(λ, δ) = Σₙ ln softmax(Σ_k λ_k·S_k[n] + δ)[yₙ] − ½r(‖λ‖² + ‖δ‖²)
//! ```
//!
//! by gradient ascent with backtracking (Armijo) line search, stopping
//! when the gradient max-norm drops below tolerance. The tiny ridge
//! term r keeps the optimum bounded when one system separates the data
//! perfectly. Objective and gradient are exposed so the gradient can
//! be verified against finite differences.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::math::log_sum_exp;

/// Fusion parameters: per-system scales and per-class offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    pub scales: Vec<f64>,
    pub offsets: Vec<f64>,
}

impl FusionModel {
    pub fn system_count(&self) -> usize {
        self.scales.len()
    }

    pub fn class_count(&self) -> usize {
        self.offsets.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() || self.offsets.is_empty() {
            return Err(Error::Validation(
                "fusion model needs ≥1 system and ≥1 class".into(),
            ));
        }
        if self
            .scales
            .iter()
            .chain(&self.offsets)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Validation("fusion parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Optimizer controls.
#[derive(Debug, Clone)]
pub struct FusionConfig {
    /// Ridge coefficient r on λ and δ.
    pub l2: f64,
    /// Stop when max |∂L| falls below this.
    pub gradient_tolerance: f64,
    /// Upper bound on accepted ascent steps.
    pub max_iterations: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            l2: 1e-6,
            gradient_tolerance: 1e-6,
            max_iterations: 1000,
        }
    }
}

/// Trained model plus the objective after the initial point and every
/// accepted step (non-decreasing within 1e-12).
#[derive(Debug, Clone)]
pub struct FusionTraining {
    pub model: FusionModel,
    pub objective_history: Vec<f64>,
}

fn check_inputs(score_sets: &[Array2<f64>], labels: &[usize]) -> Result<(usize, usize)> {
    if score_sets.is_empty() {
        return Err(Error::Validation("fusion needs ≥1 input system".into()));
    }
    let (n, c) = score_sets[0].dim();
    if n == 0 || c == 0 {
        return Err(Error::Validation("fusion scores are empty".into()));
    }
    for (k, s) in score_sets.iter().enumerate() {
        if s.dim() != (n, c) {
            return Err(Error::Validation(format!(
                "system {k} has shape {:?}, expected {:?}",
                s.dim(),
                (n, c)
            )));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "system {k} contains non-finite scores"
            )));
        }
    }
    if labels.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} outside class count {c}"
        )));
    }
    let first = labels[0];
    if labels.iter().all(|&l| l == first) {
        return Err(Error::Validation(
            "fusion training data contains a single class".into(),
        ));
    }
    Ok((n, c))
}

/// Penalized log-likelihood and its gradient at packed parameters
/// `[λ_0..λ_{K-1}, δ_0..δ_{C-1}]`. Exposed for gradient verification.
pub fn fusion_objective_gradient(
    score_sets: &[Array2<f64>],
    labels: &[usize],
    params: &[f64],
    l2: f64,
) -> Result<(f64, Vec<f64>)> {
    let (n, c) = check_inputs(score_sets, labels)?;
    let k = score_sets.len();
    if params.len() != k + c {
        return Err(Error::Dimension {
            expected: k + c,
            found: params.len(),
        });
    }
    let (scales, offsets) = params.split_at(k);

    let mut objective = 0.0;
    let mut grad = vec![0.0; k + c];
    let mut fused = vec![0.0; c];
    for i in 0..n {
        for cc in 0..c {
            let mut s = offsets[cc];
            for kk in 0..k {
                s += scales[kk] * score_sets[kk][[i, cc]];
            }
            fused[cc] = s;
        }
        let lse = log_sum_exp(&fused);
        objective += fused[labels[i]] - lse;
        for cc in 0..c {
            let p = (fused[cc] - lse).exp();
            let indicator = if cc == labels[i] { 1.0 } else { 0.0 };
            let residual = indicator - p;
            grad[k + cc] += residual;
            for kk in 0..k {
                grad[kk] += residual * score_sets[kk][[i, cc]];
            }
        }
    }
    for (g, &p) in grad.iter_mut().zip(params) {
        *g -= l2 * p;
    }
    objective -= 0.5 * l2 * params.iter().map(|p| p * p).sum::<f64>();
    Ok((objective, grad))
}

/// Fit fusion parameters on per-system score matrices.
pub fn train_fusion(
    score_sets: &[Array2<f64>],
    labels: &[usize],
    config: &FusionConfig,
) -> Result<FusionTraining> {
    let (_, c) = check_inputs(score_sets, labels)?;
    let k = score_sets.len();
    if !(config.l2 >= 0.0) {
        return Err(Error::Config("l2 must be nonnegative".into()));
    }
    if config.max_iterations == 0 {
        return Err(Error::Config("max_iterations must be ≥ 1".into()));
    }

    // λ = 1 (pass-through), δ = 0.
    let mut params = vec![0.0; k + c];
    params[..k].fill(1.0);

    let (mut objective, mut grad) =
        fusion_objective_gradient(score_sets, labels, &params, config.l2)?;
    let mut history = vec![objective];

    for _ in 0..config.max_iterations {
        let grad_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_norm < config.gradient_tolerance {
            break;
        }
        let grad_sq: f64 = grad.iter().map(|g| g * g).sum();
        // Backtracking line search on the ascent direction g.
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = params
                .iter()
                .zip(&grad)
                .map(|(p, g)| p + step * g)
                .collect();
            let (trial_obj, trial_grad) =
                fusion_objective_gradient(score_sets, labels, &trial, config.l2)?;
            if trial_obj >= objective + 1e-4 * step * grad_sq {
                params = trial;
                objective = trial_obj;
                grad = trial_grad;
                history.push(objective);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No float-representable improvement along the gradient.
            break;
        }
    }

    let model = FusionModel {
        scales: params[..k].to_vec(),
        offsets: params[k..].to_vec(),
    };
    model.validate()?;
    Ok(FusionTraining {
        model,
        objective_history: history,
    })
}

/// Stack per-sample score rows into the matrix form training expects.
pub fn stack_scores(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let first = rows
        .first()
        .ok_or_else(|| Error::Validation("score set has no rows".into()))?;
    let c = first.len();
    let mut matrix = Array2::zeros((rows.len(), c));
    for (n, row) in rows.iter().enumerate() {
        if row.len() != c {
            return Err(Error::Dimension {
                expected: c,
                found: row.len(),
            });
        }
        for (j, &v) in row.iter().enumerate() {
            matrix[[n, j]] = v;
        }
    }
    Ok(matrix)
}

/// Fuse one sample's per-system score rows: `Σ_k λ_k·s_k + δ`.
pub fn fuse_scores(model: &FusionModel, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    if rows.len() != model.system_count() {
        return Err(Error::Dimension {
            expected: model.system_count(),
            found: rows.len(),
        });
    }
    let c = model.class_count();
    let mut fused = model.offsets.clone();
    for (k, row) in rows.iter().enumerate() {
        if row.len() != c {
            return Err(Error::Dimension {
                expected: c,
                found: row.len(),
            });
        }
        for (f, &s) in fused.iter_mut().zip(row) {
            *f += model.scales[k] * s;
        }
    }
    Ok(fused)
}
