//! Writes the labeled score sets used by the sweep command and tests:
//! `fixtures/sweep/labeled/scores.json`, a seeded mix of real violations
//! (composites mostly below the thresholds) and clean usages (mostly above),
//! and `fixtures/sweep/step/step.json`, where every composite is exactly 0.95.
//!
//! Run with `cargo run -p scrcheck-core --example make_sweep_fixtures`.

use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use scrcheck_core::detection::{CheckerParams, LabeledScores};
use scrcheck_core::{SimilarityScores, UsageGroup};

fn clamp(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

fn labeled(rng: &mut StdRng, n: usize) -> Vec<LabeledScores> {
    let params = CheckerParams::default();
    (0..n)
        .map(|i| {
            let violation = i % 3 != 2;
            let group = if i % 2 == 0 { UsageGroup::Targeted } else { UsageGroup::Comprehensive };
            let tau = match group {
                UsageGroup::Targeted => params.tau_t,
                UsageGroup::Comprehensive => params.tau_o,
            };
            // Centre violations just below the threshold and clean usages just
            // above it, so small perturbations move some items across.
            let centre = if violation { tau - 0.03 } else { tau + 0.03 };
            let s_n = clamp(centre + rng.gen_range(-0.06..0.06));
            let s_c = clamp(centre + rng.gen_range(-0.06..0.06));
            let s_l = (group == UsageGroup::Targeted).then(|| {
                let c = if violation { params.tau_l - 0.04 } else { params.tau_l + 0.02 };
                clamp(c + rng.gen_range(-0.05..0.05))
            });
            LabeledScores {
                id: format!("item-{i:03}"),
                group,
                scores: SimilarityScores { s_n, s_c, s_l },
                violation,
            }
        })
        .collect()
}

fn step(n: usize) -> Vec<LabeledScores> {
    (0..n)
        .map(|i| LabeledScores {
            id: format!("step-{i:02}"),
            group: UsageGroup::Comprehensive,
            scores: SimilarityScores { s_n: 0.95, s_c: 0.95, s_l: None },
            violation: i % 2 == 0,
        })
        .collect()
}

fn write(path: PathBuf, items: &[LabeledScores]) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    let mut text = serde_json::to_string_pretty(items).unwrap();
    text.push('\n');
    std::fs::write(&path, text).unwrap();
    println!("{}: {} items", path.display(), items.len());
}

fn main() {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    let mut rng = StdRng::seed_from_u64(0x5eed);
    write(root.join("sweep/labeled/scores.json"), &labeled(&mut rng, 60));
    write(root.join("sweep/step/step.json"), &step(20));
}
