//! Seeded fixtures shared by the criterion benches.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use storypref_core::dimcat::InstanceScores;
use storypref_core::evalharness::{BenchCandidate, BenchmarkInstance, ScriptedAdapter};
use storypref_core::{Dimension, Ranking, Source};

pub fn rankings(n: usize, len: usize, seed: u64) -> Vec<Ranking> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut ids: Vec<String> = (0..len).map(|i| format!("s{i:03}")).collect();
            for i in (1..ids.len()).rev() {
                ids.swap(i, rng.random_range(0..=i));
            }
            Ranking::from_order(ids).expect("distinct ids")
        })
        .collect()
}

pub fn instance_scores(n: usize, seed: u64) -> Vec<InstanceScores> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut row = move || -> [f64; 5] { std::array::from_fn(|_| f64::from(rng.random_range(0..=20u8)) / 2.0) };
    (0..n)
        .map(|_| {
            let chosen = row();
            InstanceScores::new(chosen, (0..3).map(|_| row()).collect()).expect("finite scores")
        })
        .collect()
}

pub fn sentence_lengths(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| f64::from(rng.random_range(3..60u32))).collect()
}

pub fn benchmark(n: usize, seed: u64) -> (Vec<BenchmarkInstance>, ScriptedAdapter) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scores = HashMap::new();
    let instances = (0..n)
        .map(|k| {
            let candidates = (0..4)
                .map(|i| {
                    let id = format!("b{k:05}-{i}");
                    scores.insert(id.clone(), rng.random::<f64>());
                    BenchCandidate {
                        id,
                        text: format!("story {i}"),
                        source: Source::model(format!("m{i}")),
                    }
                })
                .collect();
            let dim = Dimension::ALL[k % Dimension::ALL.len()];
            BenchmarkInstance::new(format!("premise {k}"), candidates, k % 4, dim).expect("valid instance")
        })
        .collect();
    (instances, ScriptedAdapter::new("bench", scores))
}
