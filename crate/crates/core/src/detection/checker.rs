//! The composite similarity checker.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::kernels::{control_similarity, logical_similarity, numeric_similarity};
use crate::features::{ScrUsage, UsageGroup};
use crate::kb::ScrRecord;

/// Weights and thresholds of the checker. `w_o` and `w_t` weigh the numeric
/// and control similarities for the comprehensive and targeted groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckerParams {
    pub w_o: [f64; 2],
    pub w_t: [f64; 2],
    pub tau_o: f64,
    pub tau_t: f64,
    pub tau_l: f64,
}

impl Default for CheckerParams {
    fn default() -> Self {
        CheckerParams {
            w_o: [0.27, 0.73],
            w_t: [0.42, 0.58],
            tau_o: 0.92,
            tau_t: 0.68,
            tau_l: 0.90,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("weight vector {name} = {value:?} must be non-negative and sum to 1")]
    Weights { name: &'static str, value: [f64; 2] },
    #[error("threshold {name} = {value} must lie in (0, 1]")]
    Threshold { name: &'static str, value: f64 },
}

impl CheckerParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        for (name, w) in [("w_o", self.w_o), ("w_t", self.w_t)] {
            if w.iter().any(|x| !x.is_finite() || *x < 0.0) || (w[0] + w[1] - 1.0).abs() > 1e-9 {
                return Err(ParamError::Weights { name, value: w });
            }
        }
        for (name, t) in [("tau_o", self.tau_o), ("tau_t", self.tau_t), ("tau_l", self.tau_l)] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(ParamError::Threshold { name, value: t });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityScores {
    pub s_n: f64,
    pub s_c: f64,
    /// Guard-sequence similarity; only computed for calls.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_l: Option<f64>,
}

impl SimilarityScores {
    pub fn compute(usage: &ScrUsage, reference: &ScrRecord) -> Self {
        SimilarityScores {
            s_n: numeric_similarity(&usage.embedding, &reference.embedding),
            s_c: control_similarity(&usage.embedding, &reference.embedding),
            s_l: (usage.group == UsageGroup::Targeted).then(|| logical_similarity(&usage.sequence, &reference.sequence)),
        }
    }

    /// Weighted numeric and control similarity for the group.
    pub fn composite(&self, group: UsageGroup, params: &CheckerParams) -> f64 {
        let w = match group {
            UsageGroup::Comprehensive => params.w_o,
            UsageGroup::Targeted => params.w_t,
        };
        w[0] * self.s_n + w[1] * self.s_c
    }
}

/// A usage departs from its reference when its composite similarity falls
/// below the group threshold; calls must also depart in their guards.
pub fn is_flagged(scores: &SimilarityScores, group: UsageGroup, params: &CheckerParams) -> bool {
    let composite = scores.composite(group, params);
    match group {
        UsageGroup::Comprehensive => composite < params.tau_o,
        UsageGroup::Targeted => composite < params.tau_t && scores.s_l.unwrap_or(0.0) < params.tau_l,
    }
}

pub fn similarity_check(usage: &ScrUsage, reference: &ScrRecord, params: &CheckerParams) -> (SimilarityScores, bool) {
    let scores = SimilarityScores::compute(usage, reference);
    (scores, is_flagged(&scores, usage.group, params))
}
