//! Rotation kernels against dense-matrix oracles: application equivalence,
//! exact inversion, transpose-as-inverse, and unit determinant.

mod common;

use common::{rotation_matrix, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sphere_kge::rotation::{RotationKind, RotationParams};

const KINDS: [RotationKind; 4] = [
    RotationKind::Angle2,
    RotationKind::Quat3,
    RotationKind::Householder { dim: 4, reflections: 2 },
    RotationKind::Householder { dim: 6, reflections: 4 },
];

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn apply_matches_dense_matrix_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for kind in KINDS {
        for _ in 0..50 {
            let p = RotationParams::random(kind, &mut rng);
            let v = random_vec(&mut rng, kind.dim());
            let fast = p.apply(&v).unwrap();
            let dense = rotation_matrix(&p).matvec(&v);
            assert!(
                max_abs_diff(&fast, &dense) < 1e-9,
                "{kind:?}: kernel {fast:?} vs oracle {dense:?}"
            );
        }
    }
}

#[test]
fn apply_inverse_matches_transposed_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for kind in KINDS {
        for _ in 0..50 {
            let p = RotationParams::random(kind, &mut rng);
            let v = random_vec(&mut rng, kind.dim());
            let fast = p.apply_inverse(&v).unwrap();
            let dense = rotation_matrix(&p).transpose().matvec(&v);
            assert!(
                max_abs_diff(&fast, &dense) < 1e-9,
                "{kind:?}: kernel {fast:?} vs transposed oracle {dense:?}"
            );
        }
    }
}

#[test]
fn inverse_of_apply_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for kind in KINDS {
        for _ in 0..50 {
            let p = RotationParams::random(kind, &mut rng);
            let v = random_vec(&mut rng, kind.dim());
            let round = p.apply_inverse(&p.apply(&v).unwrap()).unwrap();
            assert!(max_abs_diff(&round, &v) < 1e-9, "{kind:?}: {round:?} vs {v:?}");
        }
    }
}

#[test]
fn reconstructed_matrices_have_unit_determinant() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for kind in KINDS {
        for _ in 0..30 {
            let p = RotationParams::random(kind, &mut rng);
            let det = rotation_matrix(&p).det();
            assert!((det - 1.0).abs() < 1e-6, "{kind:?}: det = {det}");
        }
    }
}

#[test]
fn reconstructed_matrices_are_orthogonal() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for kind in KINDS {
        let p = RotationParams::random(kind, &mut rng);
        let m = rotation_matrix(&p);
        let product = m.transpose().matmul(&m);
        let id = Mat::identity(kind.dim());
        assert!(max_abs_diff(&product.data, &id.data) < 1e-9, "{kind:?}");
    }
}
