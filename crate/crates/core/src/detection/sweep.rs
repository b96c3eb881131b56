//! Sensitivity of detection quality to the checker weights and thresholds.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::checker::{is_flagged, CheckerParams, SimilarityScores};
use crate::features::UsageGroup;

/// Perturbation steps on each side of the base value.
const STEPS: i32 = 5;
/// Absolute step for weights, relative step for thresholds.
const STEP: f64 = 0.01;

/// One labeled item with precomputed scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledScores {
    pub id: String,
    pub group: UsageGroup,
    pub scores: SimilarityScores,
    /// Whether the item is a real violation.
    pub violation: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepFamily {
    WT,
    WO,
    TauT,
    TauO,
    TauL,
}

impl SweepFamily {
    pub const ALL: [SweepFamily; 5] = [SweepFamily::WT, SweepFamily::WO, SweepFamily::TauT, SweepFamily::TauO, SweepFamily::TauL];

    pub fn label(self) -> &'static str {
        match self {
            SweepFamily::WT => "w_t",
            SweepFamily::WO => "w_o",
            SweepFamily::TauT => "tau_t",
            SweepFamily::TauO => "tau_o",
            SweepFamily::TauL => "tau_l",
        }
    }

    /// Parameters with step `k` applied, and the swept value. Weight families
    /// move the numeric weight by `k` steps and keep the pair summing to 1;
    /// threshold families scale the threshold by `1 + k` steps.
    pub fn perturb(self, base: &CheckerParams, k: i32) -> (CheckerParams, f64) {
        let mut p = *base;
        let shift = |w: [f64; 2]| {
            let n = (w[0] + f64::from(k) * STEP).clamp(0.0, 1.0);
            [n, 1.0 - n]
        };
        let scale = 1.0 + f64::from(k) * STEP;
        let value = match self {
            SweepFamily::WT => {
                p.w_t = shift(p.w_t);
                p.w_t[0]
            }
            SweepFamily::WO => {
                p.w_o = shift(p.w_o);
                p.w_o[0]
            }
            SweepFamily::TauT => {
                p.tau_t *= scale;
                p.tau_t
            }
            SweepFamily::TauO => {
                p.tau_o *= scale;
                p.tau_o
            }
            SweepFamily::TauL => {
                p.tau_l *= scale;
                p.tau_l
            }
        };
        (p, value)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub flagged: usize,
}

/// Precision, recall and F1 of the flagged set. A ratio with an empty
/// denominator is 0.
pub fn evaluate(items: &[LabeledScores], params: &CheckerParams) -> Metrics {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for it in items {
        match (is_flagged(&it.scores, it.group, params), it.violation) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Metrics {
        precision,
        recall,
        f1,
        flagged: tp + fp,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSetting {
    pub step: i32,
    pub value: f64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySweep {
    pub family: SweepFamily,
    pub settings: Vec<SweepSetting>,
    /// Mean absolute change against the base point, over all settings.
    pub mean_abs_delta: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub base_params: CheckerParams,
    pub base: Metrics,
    pub families: Vec<FamilySweep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SweepError {
    #[error("the sweep needs at least one labeled item")]
    EmptyFixtureSet,
}

/// Sweeps every family over `-5..=5` steps around `params`.
pub fn sensitivity_sweep(params: &CheckerParams, items: &[LabeledScores]) -> Result<SweepReport, SweepError> {
    sweep_families(params, items, &SweepFamily::ALL, STEPS)
}

/// Sweeps the given families over `-steps..=steps`.
pub fn sweep_families(
    params: &CheckerParams,
    items: &[LabeledScores],
    families: &[SweepFamily],
    steps: i32,
) -> Result<SweepReport, SweepError> {
    if items.is_empty() {
        return Err(SweepError::EmptyFixtureSet);
    }
    let base = evaluate(items, params);
    let families = families
        .iter()
        .map(|&family| {
            let settings: Vec<SweepSetting> = (-steps..=steps)
                .map(|k| {
                    let (p, value) = family.perturb(params, k);
                    SweepSetting {
                        step: k,
                        value,
                        metrics: evaluate(items, &p),
                    }
                })
                .collect();
            let n = settings.len() as f64;
            let mean = |f: fn(&Metrics) -> f64| settings.iter().map(|s| (f(&s.metrics) - f(&base)).abs()).sum::<f64>() / n;
            let mean_abs_delta = Metrics {
                precision: mean(|m| m.precision),
                recall: mean(|m| m.recall),
                f1: mean(|m| m.f1),
                flagged: 0,
            };
            FamilySweep {
                family,
                settings,
                mean_abs_delta,
            }
        })
        .collect();
    Ok(SweepReport {
        base_params: *params,
        base,
        families,
    })
}

impl SweepReport {
    /// Plain-text table, one row per setting.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "base: precision {:.4} recall {:.4} f1 {:.4} flagged {}",
            self.base.precision, self.base.recall, self.base.f1, self.base.flagged
        );
        let _ = writeln!(out, "{:<6} {:>4} {:>8} {:>9} {:>7} {:>7} {:>7}", "param", "step", "value", "precision", "recall", "f1", "flagged");
        for fam in &self.families {
            for s in &fam.settings {
                let _ = writeln!(
                    out,
                    "{:<6} {:>4} {:>8.4} {:>9.4} {:>7.4} {:>7.4} {:>7}",
                    fam.family.label(),
                    s.step,
                    s.value,
                    s.metrics.precision,
                    s.metrics.recall,
                    s.metrics.f1,
                    s.metrics.flagged
                );
            }
            let d = &fam.mean_abs_delta;
            let _ = writeln!(
                out,
                "{:<6} mean |delta|: precision {:.4} recall {:.4} f1 {:.4}",
                fam.family.label(),
                d.precision,
                d.recall,
                d.f1
            );
        }
        out
    }
}
