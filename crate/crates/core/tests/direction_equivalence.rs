//! Forward/backward equivalence of the Euclidean center distance and of the
//! retrieval test, over a large population of random models and triples.
//! Rotations are isometric, so answering (h, r, ?) by rotating the head
//! forward must agree with answering it through the inverse rotation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sphere_kge::model::{DistanceDirection, ModelConfig, SphereModel};

#[test]
fn forward_backward_agree_over_ten_thousand_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(20_000);
    let mut draws = 0usize;
    let mut worst: f64 = 0.0;
    while draws < 10_000 {
        let k = [2usize, 3, 4, 5][rng.random_range(0..4)];
        let n_entities = rng.random_range(3..12);
        let n_relations = rng.random_range(1..4);
        let config = ModelConfig {
            k,
            n_blocks: rng.random_range(1..4),
            p_norm: 2,
            ..ModelConfig::default()
        };
        let mut model = SphereModel::init(config, n_entities, n_relations, &mut rng).unwrap();
        for c in model.centers.iter_mut() {
            *c = rng.random_range(-2.0..2.0);
        }
        for r in model.radii.iter_mut() {
            *r = rng.random_range(-0.5..1.5);
        }
        for _ in 0..50 {
            let h = rng.random_range(0..n_entities as u32);
            let t = rng.random_range(0..n_entities as u32);
            let rel = rng.random_range(0..n_relations as u32);
            let fwd = model.center_distance(h, rel, t, DistanceDirection::Forward).unwrap();
            let bwd = model.center_distance(h, rel, t, DistanceDirection::Backward).unwrap();
            worst = worst.max((fwd - bwd).abs());
            assert!(
                (fwd - bwd).abs() < 1e-9,
                "k={k}: forward {fwd} vs backward {bwd}"
            );
            let retrieved_fwd = model.is_retrieved(h, rel, t).unwrap();
            let retrieved_bwd = bwd <= model.radius(h) + model.radius(t);
            assert_eq!(retrieved_fwd, retrieved_bwd, "k={k} h={h} rel={rel} t={t}");
            draws += 1;
        }
    }
    println!("10,000 draws, worst forward/backward gap {worst:.3e}");
}
