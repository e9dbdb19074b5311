//! Shared oracles for the integration suites: dense-matrix reconstructions
//! of every rotation variant, plus an independently coded brute-force
//! retrieval path. These deliberately avoid the library's computational
//! shortcuts so they can vouch for them.

// Each test binary uses a different subset of these helpers.
#![allow(dead_code)]

use sphere_kge::kg::{EntityId, QueryDirection, RelationId};
use sphere_kge::model::SphereModel;
use sphere_kge::rotation::RotationParams;

/// Row-major dense square matrix.
#[derive(Debug, Clone)]
pub struct Mat {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Mat { n, data }
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.n + c]
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| (0..self.n).map(|c| self.at(r, c) * v[c]).sum())
            .collect()
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                data[r * n + c] = (0..n).map(|k| self.at(r, k) * other.at(k, c)).sum();
            }
        }
        Mat { n, data }
    }

    pub fn transpose(&self) -> Mat {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                data[c * n + r] = self.at(r, c);
            }
        }
        Mat { n, data }
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn det(&self) -> f64 {
        let n = self.n;
        let mut a = self.data.clone();
        let mut det = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| {
                    a[i * n + col].abs().partial_cmp(&a[j * n + col].abs()).unwrap()
                })
                .unwrap();
            if a[pivot * n + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for c in 0..n {
                    a.swap(col * n + c, pivot * n + c);
                }
                det = -det;
            }
            det *= a[col * n + col];
            for row in col + 1..n {
                let factor = a[row * n + col] / a[col * n + col];
                for c in col..n {
                    a[row * n + c] -= factor * a[col * n + c];
                }
            }
        }
        det
    }
}

/// Dense matrix of one rotation block, built through formulas independent of
/// the library's application kernels.
pub fn rotation_matrix(params: &RotationParams) -> Mat {
    match params {
        RotationParams::Angle2D { theta } => {
            let (s, c) = theta.sin_cos();
            Mat { n: 2, data: vec![c, -s, s, c] }
        }
        RotationParams::Quat3D { q } => {
            let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
            let (w, x, y, z) = (q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm);
            // Textbook quaternion-to-matrix expansion.
            Mat {
                n: 3,
                data: vec![
                    1.0 - 2.0 * (y * y + z * z),
                    2.0 * (x * y - w * z),
                    2.0 * (x * z + w * y),
                    2.0 * (x * y + w * z),
                    1.0 - 2.0 * (x * x + z * z),
                    2.0 * (y * z - w * x),
                    2.0 * (x * z - w * y),
                    2.0 * (y * z + w * x),
                    1.0 - 2.0 * (x * x + y * y),
                ],
            }
        }
        RotationParams::HouseholderKD { dim, normals } => {
            let mut m = Mat::identity(*dim);
            for u in normals.chunks(*dim) {
                let mut h = Mat::identity(*dim);
                for r in 0..*dim {
                    for c in 0..*dim {
                        h.data[r * dim + c] -= 2.0 * u[r] * u[c];
                    }
                }
                // Reflections apply first-to-last, so each new one lands on
                // the left of the accumulated product.
                m = h.matmul(&m);
            }
            m
        }
    }
}

/// Dense per-block matrices for one relation of a model.
pub fn relation_matrices(model: &SphereModel, rel: RelationId) -> Vec<Mat> {
    model.rotations[rel as usize].iter().map(rotation_matrix).collect()
}

/// Blockwise dense-matrix application of a relation to a center vector.
pub fn oracle_transform(model: &SphereModel, rel: RelationId, center: &[f64]) -> Vec<f64> {
    let k = model.config.k;
    let mut out = Vec::with_capacity(center.len());
    for (block, m) in relation_matrices(model, rel).iter().enumerate() {
        out.extend(m.matvec(&center[block * k..(block + 1) * k]));
    }
    out
}

pub fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Independent retrieval: answer both query directions with the *forward*
/// sphere test on dense-matrix transforms, never touching the library's
/// inverse-rotation path.
pub fn oracle_retrieve(
    model: &SphereModel,
    direction: QueryDirection,
    anchor: EntityId,
    rel: RelationId,
) -> Vec<EntityId> {
    let mut out = Vec::new();
    for e in 0..model.n_entities as EntityId {
        let (h, t) = match direction {
            QueryDirection::Tail => (anchor, e),
            QueryDirection::Head => (e, anchor),
        };
        let transformed = oracle_transform(model, rel, model.center(h));
        let d = l2(&transformed, model.center(t));
        if d <= model.radius(h) + model.radius(t) {
            out.push(e);
        }
    }
    out
}
