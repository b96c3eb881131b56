//! Seeded synthetic inputs for the benchmarks.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use scrcheck_core::features::{ConstraintKind, LogicalConstraint};
use scrcheck_core::kb::UsageKnowledge;
use scrcheck_core::{CompositeSignature, KnowledgeBase, LogicalSequence, ScrRecord, StructuralEmbedding};

const RETURNS: [&str; 6] = ["void", "bool", "uint256", "address", "tuple", "bytes32"];

fn ident(rng: &mut StdRng, max: usize) -> String {
    const CHARS: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_";
    let len = rng.gen_range(1..=max);
    (0..len).map(|_| CHARS[rng.gen_range(0..CHARS.len())] as char).collect()
}

pub fn signature(rng: &mut StdRng) -> CompositeSignature {
    CompositeSignature::new(
        &ident(rng, 24),
        &ident(rng, 18),
        rng.gen_range(0..8),
        RETURNS[rng.gen_range(0..RETURNS.len())],
    )
}

/// A guard sequence of `len` steps drawn from common guard shapes.
pub fn sequence(rng: &mut StdRng, len: usize) -> LogicalSequence {
    const KINDS: [ConstraintKind; 4] =
        [ConstraintKind::Modifier, ConstraintKind::If, ConstraintKind::Require, ConstraintKind::Revert];
    const CONDS: [&str; 5] = ["amount>0", "amountOutMin>=quote*95/100", "msg.sender==owner", "onlyOwner", "totalSupply()+amount<=cap"];
    LogicalSequence::new(
        (0..len)
            .map(|_| LogicalConstraint::new(KINDS[rng.gen_range(0..4)], CONDS[rng.gen_range(0..CONDS.len())]))
            .collect(),
    )
}

/// A knowledge base of `n` records with random signatures.
pub fn knowledge_base(n: usize, seed: u64) -> KnowledgeBase {
    let mut rng = StdRng::seed_from_u64(seed);
    let records = (0..n)
        .map(|i| {
            let sig = signature(&mut rng);
            ScrRecord {
                id: format!("bench::{i:05}"),
                embedding: StructuralEmbedding::bodiless(sig.param_count, &sig.return_type),
                signature: sig,
                sequence: sequence(&mut rng, 3),
                knowledge: UsageKnowledge::default(),
                provenance: "bench".into(),
                diagnostics: vec![],
            }
        })
        .collect();
    KnowledgeBase::new(records)
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}
