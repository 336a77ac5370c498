//! Seeded inputs shared by the criterion benches.

use loctrack::synth::{self, Scenario};
use loctrack::{BBox, Detection, Embedding, SimilarityMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dense `n x m` similarity matrix with entries in `[0, 1)`.
pub fn random_similarity(n: usize, m: usize, seed: u64) -> SimilarityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| rng.random::<f64>()).collect())
        .collect();
    SimilarityMatrix::from_rows(&rows)
}

/// `n` detections scattered over a 1920x1080 arena with unit embeddings of
/// dimension `dim`, plus `n` track boxes shifted slightly from them.
pub fn detections_and_tracks(
    n: usize,
    dim: usize,
    seed: u64,
) -> (Vec<Detection>, Vec<BBox>, Vec<Option<Embedding>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |rng: &mut ChaCha8Rng| {
        let raw: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
        Embedding::normalized(raw).expect("non-zero draw")
    };
    let mut dets = Vec::with_capacity(n);
    let mut boxes = Vec::with_capacity(n);
    let mut embs = Vec::with_capacity(n);
    for _ in 0..n {
        let x = rng.random_range(0.0..1800.0);
        let y = rng.random_range(0.0..900.0);
        let b = BBox::new(x, y, 60.0, 150.0).unwrap();
        let d = Detection::new(b, rng.random(), rng.random())
            .unwrap()
            .with_embedding(unit(&mut rng));
        dets.push(d);
        boxes.push(BBox::new(x + rng.random_range(-5.0..5.0), y, 60.0, 150.0).unwrap());
        embs.push(Some(unit(&mut rng)));
    }
    (dets, boxes, embs)
}

pub fn mixed_scenario(seed: u64) -> Scenario {
    synth::generate(&synth::mixed_spec(seed)).expect("preset is valid")
}
