//! Synthetic inputs for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kpa_core::scoring::ScoreTable;
use kpa_core::selection::{Item, KeyPoint};

/// Comments, candidates and a strict table scoring every pair the
/// selection step can ask for.
pub struct SelectionInput {
    pub items: Vec<Item>,
    pub candidates: Vec<KeyPoint>,
    pub table: ScoreTable,
}

pub const TOPIC: &str = "bench";

pub fn selection_input(comments: usize, candidates: usize, seed: u64) -> SelectionInput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items: Vec<Item> = (0..comments).map(|i| Item::comment(format!("c{i:05}"), format!("c{i:05}"))).collect();
    let kps: Vec<KeyPoint> = (0..candidates)
        .map(|j| KeyPoint::new(format!("k{j:04}"), format!("k{j:04}")))
        .collect();
    let mut table = ScoreTable::new().strict(true);
    for kp in &kps {
        for item in &items {
            table.insert(&item.text, &kp.text, TOPIC, rng.gen_range(0.0..1.0)).unwrap();
        }
        for other in &kps {
            table.insert(&other.text, &kp.text, TOPIC, rng.gen_range(0.0..1.0)).unwrap();
        }
    }
    SelectionInput {
        items,
        candidates: kps,
        table,
    }
}

/// Labeled (label, score) pairs with labels correlated to scores.
pub fn labeled_sample(n: usize, seed: u64) -> Vec<(bool, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let s: f64 = rng.gen_range(0.0..1.0);
            (rng.gen_bool(s), s)
        })
        .collect()
}
