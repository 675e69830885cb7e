//! Membership attacks against a trained denoiser.
//!
//! Every score is oriented so that lower means more member-like. Classifier
//! attacks (GSA and the blind baseline) emit feature vectors instead; the
//! classifier that turns them into scores lives in [`crate::classifier`].

mod blind;
mod config;
mod gsa;
mod io;
mod loss_based;
mod probe;

pub use blind::{blind_features, BLIND_FEATURES};
pub use config::{attack_query_count, AttackConfig, Method, PfamiParams};
pub use gsa::{
    gsa1_features, gsa1_gradient, gsa1_gradient_with_noises, gsa2_features, gsa2_gradients, gsa2_gradients_with_noises,
    gsa_noises, AttackFeatures,
};
pub use io::{
    is_feature_csv, read_feature_csv, read_score_csv, score_csv_bytes, feature_csv_bytes, write_feature_csv,
    write_score_csv,
};
pub use loss_based::{center_crop_resize, pfami_score, pia_score, secmi_score, AttackScore};
pub use probe::QueryCount;

use serde::{Deserialize, Serialize};

use crate::data::{BenchmarkSplit, EvalSplit, ImageSample, ImageShape};
use crate::diffusion::{LatentState, ModelCheckpoint};
use crate::error::{Error, Result};
use crate::rng;

/// Per-image stream for attack randomness.
pub(crate) fn sample_stream(seed: u64, sample_id: u64) -> rng::Rng {
    rng::stream(rng::derive_seed(seed, rng::TAG_ATTACK), sample_id)
}

/// Attack score `R(x, theta)` for one sample with its membership label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiaScore {
    pub sample_id: u64,
    pub score: f64,
    /// 1 = member, 0 = non-member.
    pub label: u8,
}

/// Classifier input `g_theta(x)` for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub sample_id: u64,
    pub values: Vec<f64>,
    pub schema_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SampleOutput {
    Score(f64),
    Features(Vec<f64>),
}

/// Runs one attack on one image and returns its output and query cost.
pub fn attack_sample(
    model: &ModelCheckpoint,
    sample: &ImageSample,
    shape: ImageShape,
    cfg: &AttackConfig,
) -> Result<(SampleOutput, QueryCount)> {
    if cfg.method == Method::Blind {
        let f = blind_features(&sample.pixels, shape.height, shape.width)?;
        return Ok((SampleOutput::Features(f), QueryCount::default()));
    }
    let x0 = LatentState::new(sample.pixels.clone(), shape.height, shape.width, 0)?;
    Ok(match cfg.method {
        Method::SecMi | Method::SecMiPlusPlus => {
            let s = secmi_score(model, &x0, cfg)?;
            (SampleOutput::Score(s.score), s.queries)
        }
        Method::Pia => {
            let s = pia_score(model, &x0, cfg)?;
            (SampleOutput::Score(s.score), s.queries)
        }
        Method::Pfami => {
            let s = pfami_score(model, &x0, sample.id, cfg)?;
            (SampleOutput::Score(s.score), s.queries)
        }
        Method::Gsa1 => {
            let f = gsa1_features(model, &x0, sample.id, cfg)?;
            (SampleOutput::Features(f.values), f.queries)
        }
        Method::Gsa2 => {
            let f = gsa2_features(model, &x0, sample.id, cfg)?;
            (SampleOutput::Features(f.values), f.queries)
        }
        Method::Blind => unreachable!(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttackRows {
    Scores(Vec<(MiaScore, EvalSplit)>),
    Features(Vec<(FeatureVector, u8, EvalSplit)>),
}

impl AttackRows {
    pub fn len(&self) -> usize {
        match self {
            AttackRows::Scores(r) => r.len(),
            AttackRows::Features(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Output of an attack over every validation and test sample of a split.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackRun {
    pub method: Method,
    pub rows: AttackRows,
    /// Queries spent per image; identical for every image.
    pub queries_per_image: QueryCount,
}

/// Attacks all evaluation samples (validation first, then test) and checks
/// every image's instrumented query counters against the analytic cost.
pub fn run_attack(model: &ModelCheckpoint, split: &BenchmarkSplit, cfg: &AttackConfig) -> Result<AttackRun> {
    cfg.validate(model.schedule.steps())?;
    let expected = attack_query_count(cfg);
    let mut scores = Vec::new();
    let mut features = Vec::new();
    for (sample, label, which) in split.eval_samples() {
        let (out, observed) = attack_sample(model, sample, split.shape, cfg)?;
        if observed != expected {
            return Err(Error::QueryMismatch {
                method: cfg.method.to_string(),
                expected: expected.as_pair(),
                observed: observed.as_pair(),
            });
        }
        match out {
            SampleOutput::Score(score) => {
                if !score.is_finite() {
                    return Err(Error::Eval(format!("non-finite score for sample {}", sample.id)));
                }
                scores.push((
                    MiaScore {
                        sample_id: sample.id,
                        score,
                        label,
                    },
                    which,
                ))
            }
            SampleOutput::Features(values) => {
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Eval(format!("non-finite feature for sample {}", sample.id)));
                }
                features.push((
                    FeatureVector {
                        sample_id: sample.id,
                        values,
                        schema_id: cfg.method.id().to_string(),
                    },
                    label,
                    which,
                ))
            }
        }
    }
    let rows = if cfg.method.is_classifier() {
        AttackRows::Features(features)
    } else {
        AttackRows::Scores(scores)
    };
    Ok(AttackRun {
        method: cfg.method,
        rows,
        queries_per_image: expected,
    })
}
