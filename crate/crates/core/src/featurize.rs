//! Fixed-dimensional show features from topic posteriors and metadata.
//!
//! A show is summarized either by its whole-show posterior or by
//! pooling per-segment posteriors with a length-weighted average:
//!
//! ```text
//! x = (1 / Σᵢ len(i)) · Σᵢ len(i) · γᵢ
//! ```
//!
//! Before pooling, each segment vector is brought onto the simplex:
//! "soft" mode divides γ by its sum (the posterior mean of θ), "hard"
//! mode replaces it with a one-hot at its argmax — the hard variant
//! trades granularity for robustness to posterior noise and is the
//! default for segment systems. Broadcast metadata (channel 1–4 and
//! the 3-hour chunk of the start time) can be appended as two one-hot
//! groups, giving K+12 dimensions.

use crate::error::{Error, Result};

/// How per-segment posteriors become a show feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMode {
    /// One whole-show document; its normalized γ is the feature.
    Whole,
    /// Pool simplex-normalized segment posteriors.
    Soft,
    /// Pool one-hot-hardened segment posteriors.
    Hard,
}

impl FeatureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Whole => "whole",
            FeatureMode::Soft => "soft",
            FeatureMode::Hard => "hard",
        }
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whole" => Ok(FeatureMode::Whole),
            "soft" => Ok(FeatureMode::Soft),
            "hard" => Ok(FeatureMode::Hard),
            other => Err(Error::Config(format!(
                "feature mode must be whole|soft|hard, got {other:?}"
            ))),
        }
    }
}

/// Divide a nonnegative vector by its sum.
pub fn normalize_simplex(values: &[f64]) -> Result<Vec<f64>> {
    let sum: f64 = values.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::Validation(format!(
            "cannot normalize a vector with mass {sum}"
        )));
    }
    Ok(values.iter().map(|&v| v / sum).collect())
}

/// Length-weighted average of segment vectors.
pub fn accumulate_segments(segment_gammas: &[Vec<f64>], segment_lengths: &[f64]) -> Result<Vec<f64>> {
    if segment_gammas.is_empty() {
        return Err(Error::Validation("no segments to accumulate".into()));
    }
    if segment_gammas.len() != segment_lengths.len() {
        return Err(Error::Dimension {
            expected: segment_gammas.len(),
            found: segment_lengths.len(),
        });
    }
    let k = segment_gammas[0].len();
    if k == 0 {
        return Err(Error::Validation("segment vectors are empty".into()));
    }
    let mut pooled = vec![0.0; k];
    let mut total = 0.0;
    for (gamma, &len) in segment_gammas.iter().zip(segment_lengths) {
        if gamma.len() != k {
            return Err(Error::Dimension {
                expected: k,
                found: gamma.len(),
            });
        }
        if !(len > 0.0) || !len.is_finite() {
            return Err(Error::Validation(format!(
                "segment length must be positive, got {len}"
            )));
        }
        total += len;
        for (p, &g) in pooled.iter_mut().zip(gamma) {
            *p += len * g;
        }
    }
    for p in &mut pooled {
        *p /= total;
    }
    Ok(pooled)
}

/// One-hot vector at the argmax; ties break to the lowest index.
pub fn argmax_onehot(gamma: &[f64]) -> Result<Vec<f64>> {
    if gamma.is_empty() {
        return Err(Error::Validation("cannot take argmax of empty vector".into()));
    }
    if gamma.iter().any(|v| v.is_nan()) {
        return Err(Error::Validation("argmax of vector containing NaN".into()));
    }
    let mut best = 0usize;
    for i in 1..gamma.len() {
        if gamma[i] > gamma[best] {
            best = i;
        }
    }
    let mut out = vec![0.0; gamma.len()];
    out[best] = 1.0;
    Ok(out)
}

/// Pool segment posteriors under a segment-level mode.
pub fn pool_segments(
    mode: FeatureMode,
    segment_gammas: &[Vec<f64>],
    segment_lengths: &[f64],
) -> Result<Vec<f64>> {
    let transformed: Vec<Vec<f64>> = match mode {
        FeatureMode::Whole => {
            return Err(Error::InvalidArgument(
                "whole-show mode does not pool segments".into(),
            ))
        }
        FeatureMode::Soft => segment_gammas
            .iter()
            .map(|g| normalize_simplex(g))
            .collect::<Result<_>>()?,
        FeatureMode::Hard => segment_gammas
            .iter()
            .map(|g| argmax_onehot(g))
            .collect::<Result<_>>()?,
    };
    accumulate_segments(&transformed, segment_lengths)
}

/// Map a start hour (0..=23) to its 3-hour chunk (0..=7).
pub fn time_chunk(hour: u8) -> Result<usize> {
    if hour > 23 {
        return Err(Error::InvalidArgument(format!(
            "hour {hour} out of range 0..=23"
        )));
    }
    Ok(hour as usize / 3)
}

/// Append channel and time-chunk one-hot groups to a feature vector.
///
/// Layout: `[feature | channel one-hot (4) | chunk one-hot (8)]`. An
/// empty feature yields the pure 12-dimensional metadata vector.
pub fn append_metadata(feature: &[f64], channel: u8, chunk: usize) -> Result<Vec<f64>> {
    if !(1..=4).contains(&channel) {
        return Err(Error::InvalidArgument(format!(
            "channel {channel} out of range 1..=4"
        )));
    }
    if chunk > 7 {
        return Err(Error::InvalidArgument(format!(
            "time chunk {chunk} out of range 0..=7"
        )));
    }
    let mut out = Vec::with_capacity(feature.len() + 12);
    out.extend_from_slice(feature);
    for c in 0..4 {
        out.push(if c == (channel - 1) as usize { 1.0 } else { 0.0 });
    }
    for c in 0..8 {
        out.push(if c == chunk { 1.0 } else { 0.0 });
    }
    Ok(out)
}
