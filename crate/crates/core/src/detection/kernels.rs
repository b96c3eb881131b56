//! Similarity kernels between a usage and its reference record.

use crate::features::{ConstraintKind, LogicalSequence, StructuralEmbedding};
use crate::retrieval::item_similarity;

/// Cosine similarity clipped to `[0, 1]`. Two zero vectors are identical;
/// a zero vector is maximally different from any other.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    match (na == 0.0, nb == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        _ => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            (dot / (na * nb).sqrt()).clamp(0.0, 1.0)
        }
    }
}

/// Cosine over node count, parameter count, call counts and the return-class one-hot.
pub fn numeric_similarity(a: &StructuralEmbedding, b: &StructuralEmbedding) -> f64 {
    cosine(&a.numeric_vector(), &b.numeric_vector())
}

/// Cosine over the control-flow node counts.
pub fn control_similarity(a: &StructuralEmbedding, b: &StructuralEmbedding) -> f64 {
    cosine(&a.control_vector(), &b.control_vector())
}

fn step_cost(a: (ConstraintKind, &str), b: (ConstraintKind, &str)) -> f64 {
    if a.0 == b.0 {
        1.0 - item_similarity(a.1, b.1)
    } else {
        1.0
    }
}

/// Edit distance over guard steps, where substituting a step of the same kind
/// costs the edit-distance dissimilarity of the two conditions. Normalized by
/// the longer sequence; two empty sequences are identical.
pub fn logical_similarity(a: &LogicalSequence, b: &LogicalSequence) -> f64 {
    let (n, m) = (a.len(), b.len());
    if n == 0 && m == 0 {
        return 1.0;
    }
    if n == 0 || m == 0 {
        return 0.0;
    }
    let mut prev: Vec<f64> = (0..=m).map(|j| j as f64).collect();
    for i in 1..=n {
        let mut cur = vec![i as f64; m + 1];
        let sa = &a.steps[i - 1];
        for j in 1..=m {
            let sb = &b.steps[j - 1];
            let sub = prev[j - 1] + step_cost((sa.kind, &sa.condition), (sb.kind, &sb.condition));
            cur[j] = sub.min(prev[j] + 1.0).min(cur[j - 1] + 1.0);
        }
        prev = cur;
    }
    (1.0 - prev[m] / n.max(m) as f64).clamp(0.0, 1.0)
}
