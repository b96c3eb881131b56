//! Reference retrieval: weighted per-item edit-distance similarity between
//! composite signatures, with item weights inferred from the knowledge base.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::features::CompositeSignature;
use crate::kb::{KnowledgeBase, ScrRecord};
use crate::util::write_atomic;

/// Shipped default weights (contract, function, param count, return type).
pub const DEFAULT_SIGNATURE_WEIGHTS: [f64; 4] = [0.079, 0.421, 0.313, 0.187];

/// Share of the total weight given to each item group.
const GROUP_PRIOR: f64 = 0.5;
/// Items of the name group and of the interface-shape group.
const GROUPS: [[usize; 2]; 2] = [[0, 1], [2, 3]];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RetrievalError {
    #[error("knowledge base is empty")]
    EmptyKb,
    #[error("weight inference needs at least two records")]
    SingleRecord,
}

/// Inference intermediates for one signature item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemTrace {
    /// Lengths divided by the item's total length over the corpus.
    pub normalized_lengths: Vec<f64>,
    pub variance: f64,
    pub stability: f64,
    /// Weight within the item's group, before the group prior.
    pub group_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureWeights {
    pub w: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<[ItemTrace; 4]>,
}

impl SignatureWeights {
    pub fn new(w: [f64; 4]) -> Self {
        SignatureWeights { w, trace: None }
    }

    pub fn is_valid(&self) -> bool {
        self.w.iter().all(|x| x.is_finite() && *x >= 0.0) && (self.w.iter().sum::<f64>() - 1.0).abs() <= 1e-9
    }
}

impl Default for SignatureWeights {
    fn default() -> Self {
        SignatureWeights::new(DEFAULT_SIGNATURE_WEIGHTS)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RetrievalHit<'kb> {
    pub record: &'kb ScrRecord,
    pub score: f64,
}

/// `1 - lev(a, b) / max(|a|, |b|)` over characters; 1 when both are empty.
pub fn item_similarity(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - strsim::levenshtein(a, b) as f64 / longest as f64
}

pub fn signature_similarity(a: &CompositeSignature, b: &CompositeSignature, w: &SignatureWeights) -> f64 {
    let (ia, ib) = (a.items(), b.items());
    let s: f64 = (0..4).map(|i| w.w[i] * item_similarity(&ia[i], &ib[i])).sum();
    s.clamp(0.0, 1.0)
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Weights from the spread of item lengths across the corpus: within each
/// group an item gets weight inversely proportional to the variance of its
/// normalized lengths, and each group carries half of the total.
///
/// When an item's variance and the stability constant are both zero its
/// inverse variance is unbounded; such items then share the group weight
/// equally and the others in the group get none.
pub fn infer_signature_weights(kb: &KnowledgeBase) -> Result<SignatureWeights, RetrievalError> {
    match kb.len() {
        0 => return Err(RetrievalError::EmptyKb),
        1 => return Err(RetrievalError::SingleRecord),
        _ => {}
    }
    let normalized: Vec<Vec<f64>> = (0..4)
        .map(|i| {
            let lengths: Vec<f64> = kb
                .records
                .iter()
                .map(|r| r.signature.items()[i].chars().count() as f64)
                .collect();
            let total: f64 = lengths.iter().sum();
            if total == 0.0 {
                vec![1.0 / lengths.len() as f64; lengths.len()]
            } else {
                lengths.iter().map(|l| l / total).collect()
            }
        })
        .collect();
    let variance: Vec<f64> = normalized.iter().map(|xs| sample_variance(xs)).collect();
    let mut w = [0.0; 4];
    let mut stability = [0.0; 4];
    let mut group_weight = [0.0; 4];
    for group in GROUPS {
        // Lower median of a two-element set is its minimum.
        let eps = 0.01 * group.iter().map(|&i| variance[i]).fold(f64::INFINITY, f64::min);
        let denom: Vec<f64> = group.iter().map(|&i| variance[i] + eps).collect();
        let degenerate = denom.iter().filter(|d| **d == 0.0).count();
        let inv: Vec<f64> = if degenerate > 0 {
            denom.iter().map(|d| if *d == 0.0 { 1.0 } else { 0.0 }).collect()
        } else {
            denom.iter().map(|d| 1.0 / d).collect()
        };
        let sum: f64 = inv.iter().sum();
        for (k, &i) in group.iter().enumerate() {
            stability[i] = eps;
            group_weight[i] = inv[k] / sum;
            w[i] = GROUP_PRIOR * group_weight[i];
        }
    }
    let trace = [0, 1, 2, 3].map(|i| ItemTrace {
        normalized_lengths: normalized[i].clone(),
        variance: variance[i],
        stability: stability[i],
        group_weight: group_weight[i],
    });
    Ok(SignatureWeights { w, trace: Some(trace) })
}

/// Best-scoring record for `target`; equal scores go to the smallest record id.
pub fn retrieve_reference<'kb>(
    target: &CompositeSignature,
    kb: &'kb KnowledgeBase,
    w: &SignatureWeights,
) -> Result<RetrievalHit<'kb>, RetrievalError> {
    kb.records
        .iter()
        .map(|record| RetrievalHit {
            record,
            score: signature_similarity(target, &record.signature, w),
        })
        .reduce(|best, hit| {
            if hit.score > best.score || (hit.score == best.score && hit.record.id < best.record.id) {
                hit
            } else {
                best
            }
        })
        .ok_or(RetrievalError::EmptyKb)
}

/// Hex sha256 of the knowledge-base file contents.
pub fn kb_digest(kb_bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(kb_bytes))
}

/// Sidecar file caching inferred weights next to a knowledge-base file.
pub fn weights_sidecar_path(kb_path: &Path) -> PathBuf {
    let mut name = kb_path.as_os_str().to_owned();
    name.push(".weights.json");
    PathBuf::from(name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    kb_sha256: String,
    weights: SignatureWeights,
}

/// Reads cached weights if the sidecar was written for the same KB contents.
pub fn read_cached_weights(kb_path: &Path, kb_bytes: &[u8]) -> Option<SignatureWeights> {
    let text = std::fs::read_to_string(weights_sidecar_path(kb_path)).ok()?;
    let sidecar: Sidecar = serde_json::from_str(&text).ok()?;
    (sidecar.kb_sha256 == kb_digest(kb_bytes) && sidecar.weights.is_valid()).then_some(sidecar.weights)
}

pub fn write_cached_weights(kb_path: &Path, kb_bytes: &[u8], weights: &SignatureWeights) -> std::io::Result<()> {
    let sidecar = Sidecar {
        kb_sha256: kb_digest(kb_bytes),
        weights: weights.clone(),
    };
    let json = serde_json::to_vec_pretty(&sidecar).expect("weights serialize");
    write_atomic(&weights_sidecar_path(kb_path), &json)
}
