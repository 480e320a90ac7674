//! Diagonal-covariance Gaussian mixtures and acoustic-word quantization.
//!
//! Mixtures are grown by binary mix-up: start from a single maximum-
//! likelihood Gaussian, then repeatedly split every component by
//! perturbing its mean ±0.2σ per dimension (halving its weight) and
//! refine with a fixed number of EM iterations, until the target
//! component count — a power of two — is reached.
//!
//! All densities are evaluated in log space. Two guard rails keep EM
//! healthy on degenerate data: per-dimension variance floors derived
//! from the global data variance, and a rescue step that re-seeds
//! components whose responsibility mass collapses by splitting the
//! currently heaviest component.
//!
//! Quantization maps each frame to the index of the component with the
//! highest posterior (equivalently, highest weighted log-density);
//! ties resolve to the lowest index.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::math::{log_sum_exp, LN_2PI};
use crate::matrix::AcousticDocument;

/// A trained mixture: `weights[c]`, `means[c, d]`, `variances[c, d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Array2<f64>,
    pub variances: Array2<f64>,
}

impl GmmModel {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.means.ncols()
    }

    /// Structural and numeric sanity checks, used after deserialization.
    pub fn validate(&self) -> Result<()> {
        let n = self.weights.len();
        if n == 0 {
            return Err(Error::Validation("mixture has no components".into()));
        }
        if self.means.nrows() != n || self.variances.nrows() != n {
            return Err(Error::Validation(
                "mixture arrays disagree on component count".into(),
            ));
        }
        if self.means.ncols() != self.variances.ncols() || self.means.ncols() == 0 {
            return Err(Error::Validation(
                "mixture arrays disagree on feature dimension".into(),
            ));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-6 || self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Validation(format!(
                "mixture weights must be a probability vector (sum {sum})"
            )));
        }
        if self.means.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite mixture mean".into()));
        }
        if self.variances.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Validation(
                "mixture variances must be positive and finite".into(),
            ));
        }
        Ok(())
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.feature_dim() {
            return Err(Error::Dimension {
                expected: self.feature_dim(),
                found,
            });
        }
        Ok(())
    }

    /// ln(wᶜ · N(x; μᶜ, σᶜ²)) for every component, written into `out`.
    fn log_joint(&self, frame: ArrayView1<f64>, out: &mut [f64]) {
        for c in 0..self.n_components() {
            let mut acc = self.weights[c].ln();
            for d in 0..self.feature_dim() {
                let var = self.variances[[c, d]];
                let diff = frame[d] - self.means[[c, d]];
                acc -= 0.5 * (LN_2PI + var.ln() + diff * diff / var);
            }
            out[c] = acc;
        }
    }

    /// Total log-density ln Σᶜ wᶜ·N(x; μᶜ, σᶜ²) of one frame.
    pub fn frame_log_likelihood(&self, frame: ArrayView1<f64>) -> Result<f64> {
        self.check_dim(frame.len())?;
        let mut joint = vec![0.0; self.n_components()];
        self.log_joint(frame, &mut joint);
        Ok(log_sum_exp(&joint))
    }
}

/// Component posteriors P(c | x); exact simplex (explicitly normalized).
pub fn gmm_posteriors(model: &GmmModel, frame: ArrayView1<f64>) -> Result<Vec<f64>> {
    model.check_dim(frame.len())?;
    let mut joint = vec![0.0; model.n_components()];
    model.log_joint(frame, &mut joint);
    let lse = log_sum_exp(&joint);
    let mut post: Vec<f64> = joint.iter().map(|&j| (j - lse).exp()).collect();
    let sum: f64 = post.iter().sum();
    for p in &mut post {
        *p /= sum;
    }
    Ok(post)
}

/// EM and mix-up hyperparameters.
#[derive(Debug, Clone)]
pub struct EmConfig {
    /// EM iterations run after each split level (and at level one).
    pub iterations_per_level: usize,
    /// Per-dimension variance floor as a fraction of global variance.
    pub variance_floor_factor: f64,
    /// Absolute lower bound on any variance; keeps constant dimensions
    /// usable where the relative floor would be zero.
    pub min_variance: f64,
    /// Mean perturbation at a split, in units of per-dimension σ.
    pub mixup_offset: f64,
    /// A component is "empty" when its responsibility mass falls below
    /// this fraction of the frame count.
    pub empty_threshold: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            iterations_per_level: 10,
            variance_floor_factor: 1e-3,
            min_variance: 1e-10,
            mixup_offset: 0.2,
            empty_threshold: 1e-8,
        }
    }
}

impl EmConfig {
    fn validate(&self) -> Result<()> {
        if !(self.variance_floor_factor >= 0.0) {
            return Err(Error::Config("variance_floor_factor must be ≥ 0".into()));
        }
        if !(self.min_variance > 0.0) {
            return Err(Error::Config("min_variance must be > 0".into()));
        }
        if !(self.mixup_offset > 0.0) {
            return Err(Error::Config("mixup_offset must be > 0".into()));
        }
        if !(self.empty_threshold > 0.0 && self.empty_threshold < 1.0) {
            return Err(Error::Config("empty_threshold must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Diagnostics for one mix-up level.
///
/// `log_likelihoods` holds the pooled data log-likelihood before the
/// first iteration and after every EM iteration, so it has one more
/// entry than `floor_hits` / `rescues`. EM guarantees the sequence is
/// non-decreasing except across iterations where a floor or rescue
/// intervened.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelStats {
    pub components: usize,
    pub log_likelihoods: Vec<f64>,
    pub floor_hits: Vec<bool>,
    pub rescues: Vec<bool>,
}

/// A trained model plus per-level training diagnostics.
#[derive(Debug, Clone)]
pub struct GmmTraining {
    pub model: GmmModel,
    pub levels: Vec<LevelStats>,
}

struct Accumulators {
    log_likelihood: f64,
    resp_sum: Vec<f64>,
    mean_sum: Array2<f64>,
    sq_sum: Array2<f64>,
}

fn e_step(model: &GmmModel, frames: ArrayView2<f64>) -> Accumulators {
    let n = model.n_components();
    let f = model.feature_dim();
    // Hoist the per-component normalization out of the frame loop.
    let mut log_const = vec![0.0; n];
    let mut inv_var = Array2::<f64>::zeros((n, f));
    for c in 0..n {
        let mut acc = model.weights[c].ln();
        for d in 0..f {
            let var = model.variances[[c, d]];
            acc -= 0.5 * (LN_2PI + var.ln());
            inv_var[[c, d]] = 1.0 / var;
        }
        log_const[c] = acc;
    }

    let mut out = Accumulators {
        log_likelihood: 0.0,
        resp_sum: vec![0.0; n],
        mean_sum: Array2::zeros((n, f)),
        sq_sum: Array2::zeros((n, f)),
    };
    let mut joint = vec![0.0; n];
    for t in 0..frames.nrows() {
        let x = frames.row(t);
        for c in 0..n {
            let mut quad = 0.0;
            for d in 0..f {
                let diff = x[d] - model.means[[c, d]];
                quad += diff * diff * inv_var[[c, d]];
            }
            joint[c] = log_const[c] - 0.5 * quad;
        }
        let lse = log_sum_exp(&joint);
        out.log_likelihood += lse;
        for c in 0..n {
            let r = (joint[c] - lse).exp();
            if r > 0.0 {
                out.resp_sum[c] += r;
                for d in 0..f {
                    out.mean_sum[[c, d]] += r * x[d];
                    out.sq_sum[[c, d]] += r * x[d] * x[d];
                }
            }
        }
    }
    out
}

/// Maximization update. Returns (floor_hit, rescued).
fn m_step(
    model: &mut GmmModel,
    acc: &Accumulators,
    floor: &[f64],
    frame_count: usize,
    config: &EmConfig,
) -> (bool, bool) {
    let n = model.n_components();
    let f = model.feature_dim();
    let total = frame_count as f64;
    let dead_cutoff = config.empty_threshold * total;
    let mut floor_hit = false;
    let mut dead = Vec::new();

    for c in 0..n {
        let r = acc.resp_sum[c];
        if r < dead_cutoff {
            // Parameters kept until the rescue below re-seeds them.
            dead.push(c);
            model.weights[c] = r / total;
            continue;
        }
        model.weights[c] = r / total;
        for d in 0..f {
            let mean = acc.mean_sum[[c, d]] / r;
            let mut var = acc.sq_sum[[c, d]] / r - mean * mean;
            if var < floor[d] {
                var = floor[d];
                floor_hit = true;
            }
            model.means[[c, d]] = mean;
            model.variances[[c, d]] = var;
        }
    }

    let rescued = !dead.is_empty();
    for c in dead {
        // Split the heaviest surviving component into the dead slot.
        let donor = (0..n)
            .max_by(|&a, &b| model.weights[a].total_cmp(&model.weights[b]))
            .expect("mixture has components");
        let half = model.weights[donor] / 2.0;
        model.weights[donor] = half;
        model.weights[c] = half;
        for d in 0..f {
            let sigma = model.variances[[donor, d]].sqrt();
            let mu = model.means[[donor, d]];
            model.means[[donor, d]] = mu - config.mixup_offset * sigma;
            model.means[[c, d]] = mu + config.mixup_offset * sigma;
            model.variances[[c, d]] = model.variances[[donor, d]];
        }
    }

    // Wash accumulated float error (and any rescue residue) so the
    // weight simplex holds tightly.
    let sum: f64 = model.weights.iter().sum();
    for w in &mut model.weights {
        *w /= sum;
    }
    (floor_hit, rescued)
}

fn split_all(model: &GmmModel, offset: f64) -> GmmModel {
    let n = model.n_components();
    let f = model.feature_dim();
    let mut weights = Vec::with_capacity(2 * n);
    let mut means = Array2::zeros((2 * n, f));
    let mut variances = Array2::zeros((2 * n, f));
    for c in 0..n {
        let half = model.weights[c] / 2.0;
        weights.push(half);
        weights.push(half);
        for d in 0..f {
            let sigma = model.variances[[c, d]].sqrt();
            means[[2 * c, d]] = model.means[[c, d]] - offset * sigma;
            means[[2 * c + 1, d]] = model.means[[c, d]] + offset * sigma;
            variances[[2 * c, d]] = model.variances[[c, d]];
            variances[[2 * c + 1, d]] = model.variances[[c, d]];
        }
    }
    GmmModel {
        weights,
        means,
        variances,
    }
}

/// Train a mixture of `target_components` (a power of two) on pooled
/// frames by mix-up splitting with EM refinement at every level.
pub fn train_gmm(
    frames: ArrayView2<f64>,
    target_components: usize,
    config: &EmConfig,
) -> Result<GmmTraining> {
    config.validate()?;
    let m = frames.nrows();
    let f = frames.ncols();
    if m == 0 {
        return Err(Error::Validation("document has no frames".into()));
    }
    if f == 0 {
        return Err(Error::Validation(
            "feature dimension must be at least 1".into(),
        ));
    }
    if let Some(((r, c), v)) = frames.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::Validation(format!(
            "non-finite value {v} at frame {r}, dimension {c}"
        )));
    }
    if !target_components.is_power_of_two() {
        return Err(Error::Config(format!(
            "component count must be a power of two, got {target_components}"
        )));
    }
    if m < target_components {
        return Err(Error::InvalidArgument(format!(
            "cannot train {target_components} components from {m} frames"
        )));
    }

    // Global per-dimension moments seed the level-one model and the
    // variance floor.
    let total = m as f64;
    let mut mean = vec![0.0; f];
    let mut sq = vec![0.0; f];
    for t in 0..m {
        for d in 0..f {
            let v = frames[[t, d]];
            mean[d] += v;
            sq[d] += v * v;
        }
    }
    let mut floor = vec![0.0; f];
    let mut variance = vec![0.0; f];
    for d in 0..f {
        mean[d] /= total;
        let var = (sq[d] / total - mean[d] * mean[d]).max(0.0);
        floor[d] = (config.variance_floor_factor * var).max(config.min_variance);
        variance[d] = var.max(floor[d]);
    }

    let mut model = GmmModel {
        weights: vec![1.0],
        means: Array2::from_shape_vec((1, f), mean).expect("shape"),
        variances: Array2::from_shape_vec((1, f), variance).expect("shape"),
    };

    let mut levels = Vec::new();
    loop {
        let mut stats = LevelStats {
            components: model.n_components(),
            log_likelihoods: Vec::with_capacity(config.iterations_per_level + 1),
            floor_hits: Vec::with_capacity(config.iterations_per_level),
            rescues: Vec::with_capacity(config.iterations_per_level),
        };
        for _ in 0..config.iterations_per_level {
            let acc = e_step(&model, frames);
            stats.log_likelihoods.push(acc.log_likelihood);
            let (floor_hit, rescued) = m_step(&mut model, &acc, &floor, m, config);
            stats.floor_hits.push(floor_hit);
            stats.rescues.push(rescued);
        }
        // One extra E-pass records the likelihood of the final params.
        stats
            .log_likelihoods
            .push(e_step(&model, frames).log_likelihood);
        log::debug!(
            "gmm level {}: log-likelihood {:.6}",
            stats.components,
            stats.log_likelihoods.last().unwrap()
        );
        levels.push(stats);

        if model.n_components() >= target_components {
            break;
        }
        model = split_all(&model, config.mixup_offset);
    }

    model.validate()?;
    Ok(GmmTraining { model, levels })
}

/// One document's acoustic-word sequence; every id is a component index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedDocument {
    pub words: Vec<usize>,
}

/// Map every frame to its maximum-posterior component index.
pub fn quantize_frames(model: &GmmModel, frames: ArrayView2<f64>) -> Result<Vec<usize>> {
    if frames.nrows() == 0 {
        return Err(Error::Validation("document has no frames".into()));
    }
    model.check_dim(frames.ncols())?;
    let mut joint = vec![0.0; model.n_components()];
    let mut words = Vec::with_capacity(frames.nrows());
    for t in 0..frames.nrows() {
        model.log_joint(frames.row(t), &mut joint);
        let mut best = 0usize;
        for c in 1..joint.len() {
            if joint[c] > joint[best] {
                best = c;
            }
        }
        words.push(best);
    }
    Ok(words)
}

/// [`quantize_frames`] over a whole document.
pub fn quantize_document(model: &GmmModel, doc: &AcousticDocument) -> Result<QuantizedDocument> {
    Ok(QuantizedDocument {
        words: quantize_frames(model, doc.frames.view())?,
    })
}
