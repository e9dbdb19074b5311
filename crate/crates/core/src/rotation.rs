//! Blockwise rotation kernels with exact inverses.
//!
//! Three parameterizations, picked by block dimension: a raw angle in 2D, an
//! unnormalized quaternion in 3D (normalized on every application), and a
//! chain of an even number of Householder reflections in kD. All three are
//! isometries, so the relation transformation and its inverse preserve
//! center distances and head/tail queries can be answered through either
//! direction.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SphereError};

/// Shape of one rotation block: dimension plus parameter layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotationKind {
    Angle2,
    Quat3,
    Householder { dim: usize, reflections: usize },
}

impl RotationKind {
    /// Kind used for a model with block dimension `k`.
    ///
    /// 2 → angle, 3 → quaternion, ≥4 → Householder chain with `reflections`
    /// normals per block (`reflections` must be even so the product has
    /// determinant +1).
    pub fn for_block_dim(k: usize, reflections: usize) -> Self {
        match k {
            2 => RotationKind::Angle2,
            3 => RotationKind::Quat3,
            _ => RotationKind::Householder { dim: k, reflections },
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            RotationKind::Angle2 => 2,
            RotationKind::Quat3 => 3,
            RotationKind::Householder { dim, .. } => *dim,
        }
    }

    /// Number of raw scalar parameters per block.
    pub fn param_count(&self) -> usize {
        match self {
            RotationKind::Angle2 => 1,
            RotationKind::Quat3 => 4,
            RotationKind::Householder { dim, reflections } => dim * reflections,
        }
    }
}

/// Rotation parameters for one block of one relation.
#[derive(Debug, Clone, PartialEq)]
pub enum RotationParams {
    /// Plane rotation by `theta` radians.
    Angle2D { theta: f64 },
    /// 3D rotation by the quaternion `q = [w, x, y, z]`, stored unnormalized
    /// and normalized on every application.
    Quat3D { q: [f64; 4] },
    /// Composition of `normals.len() / dim` reflections `I − 2uuᵀ`, applied
    /// first-to-last. The normals are kept unit-length by projection after
    /// each optimizer step.
    HouseholderKD { dim: usize, normals: Vec<f64> },
}

/// Reflect `v` across the hyperplane with normal `u` in place: v ← v − 2(u·v)u.
pub fn reflect_in_place(u: &[f64], v: &mut [f64]) {
    let s = 2.0 * dot(u, v);
    for (vi, ui) in v.iter_mut().zip(u) {
        *vi -= s * ui;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Rotate `v` by the *unit* quaternion `(w, u)`: v + 2w(u×v) + 2u×(u×v).
fn quat_rotate(w: f64, u: [f64; 3], v: [f64; 3]) -> [f64; 3] {
    let t = cross(u, v);
    let t = [2.0 * t[0], 2.0 * t[1], 2.0 * t[2]];
    let c = cross(u, t);
    [
        v[0] + w * t[0] + c[0],
        v[1] + w * t[1] + c[1],
        v[2] + w * t[2] + c[2],
    ]
}

fn unit_quat(q: &[f64; 4]) -> Result<[f64; 4]> {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    if !n.is_finite() || n < 1e-300 {
        return Err(SphereError::NonFinite("quaternion norm".into()));
    }
    Ok([q[0] / n, q[1] / n, q[2] / n, q[3] / n])
}

impl RotationParams {
    pub fn kind(&self) -> RotationKind {
        match self {
            RotationParams::Angle2D { .. } => RotationKind::Angle2,
            RotationParams::Quat3D { .. } => RotationKind::Quat3,
            RotationParams::HouseholderKD { dim, normals } => RotationKind::Householder {
                dim: *dim,
                reflections: normals.len() / dim,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.kind().dim()
    }

    /// The identity rotation of the given kind.
    ///
    /// For Householder chains this is pairs of identical axis reflections,
    /// which cancel exactly.
    pub fn identity(kind: RotationKind) -> Self {
        match kind {
            RotationKind::Angle2 => RotationParams::Angle2D { theta: 0.0 },
            RotationKind::Quat3 => RotationParams::Quat3D { q: [1.0, 0.0, 0.0, 0.0] },
            RotationKind::Householder { dim, reflections } => {
                let mut normals = vec![0.0; dim * reflections];
                for r in 0..reflections {
                    normals[r * dim] = 1.0;
                }
                RotationParams::HouseholderKD { dim, normals }
            }
        }
    }

    /// A uniformly random rotation parameter of the given kind.
    pub fn random<R: Rng>(kind: RotationKind, rng: &mut R) -> Self {
        match kind {
            RotationKind::Angle2 => RotationParams::Angle2D {
                theta: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            },
            RotationKind::Quat3 => {
                let mut q = [0.0; 4];
                loop {
                    for c in q.iter_mut() {
                        *c = rng.sample(StandardNormal);
                    }
                    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if n > 1e-6 {
                        q.iter_mut().for_each(|x| *x /= n);
                        break;
                    }
                }
                RotationParams::Quat3D { q }
            }
            RotationKind::Householder { dim, reflections } => {
                let mut normals = vec![0.0; dim * reflections];
                for u in normals.chunks_mut(dim) {
                    loop {
                        for c in u.iter_mut() {
                            *c = rng.sample(StandardNormal);
                        }
                        let n = dot(u, u).sqrt();
                        if n > 1e-6 {
                            u.iter_mut().for_each(|x| *x /= n);
                            break;
                        }
                    }
                }
                RotationParams::HouseholderKD { dim, normals }
            }
        }
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(SphereError::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        Ok(())
    }

    /// Apply the rotation to `v`, writing into `out` (same length).
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_dim(v)?;
        self.check_dim(out)?;
        match self {
            RotationParams::Angle2D { theta } => {
                let (s, c) = theta.sin_cos();
                out[0] = c * v[0] - s * v[1];
                out[1] = s * v[0] + c * v[1];
            }
            RotationParams::Quat3D { q } => {
                let q = unit_quat(q)?;
                let r = quat_rotate(q[0], [q[1], q[2], q[3]], [v[0], v[1], v[2]]);
                out.copy_from_slice(&r);
            }
            RotationParams::HouseholderKD { dim, normals } => {
                out.copy_from_slice(v);
                for u in normals.chunks(*dim) {
                    reflect_in_place(u, out);
                }
            }
        }
        Ok(())
    }

    /// Apply the inverse rotation to `v`, writing into `out`.
    ///
    /// Angle rotations negate the angle, quaternions conjugate, Householder
    /// chains replay their reflections in reverse order.
    pub fn apply_inverse_into(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_dim(v)?;
        self.check_dim(out)?;
        match self {
            RotationParams::Angle2D { theta } => {
                let (s, c) = (-theta).sin_cos();
                out[0] = c * v[0] - s * v[1];
                out[1] = s * v[0] + c * v[1];
            }
            RotationParams::Quat3D { q } => {
                let q = unit_quat(q)?;
                let r = quat_rotate(q[0], [-q[1], -q[2], -q[3]], [v[0], v[1], v[2]]);
                out.copy_from_slice(&r);
            }
            RotationParams::HouseholderKD { dim, normals } => {
                out.copy_from_slice(v);
                for u in normals.chunks(*dim).rev() {
                    reflect_in_place(u, out);
                }
            }
        }
        Ok(())
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; v.len()];
        self.apply_into(v, &mut out)?;
        Ok(out)
    }

    pub fn apply_inverse(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; v.len()];
        self.apply_inverse_into(v, &mut out)?;
        Ok(out)
    }

    /// Accumulate gradients of the forward application.
    ///
    /// Given `grad_out = ∂L/∂(apply(input))`, adds `∂L/∂input` into
    /// `grad_in` and `∂L/∂params` into `grad_params` (raw parameter layout,
    /// chaining through the quaternion normalization). The forward is
    /// differentiated exactly as computed, so central finite differences on
    /// the raw parameters agree with these formulas.
    pub(crate) fn backward(
        &self,
        input: &[f64],
        grad_out: &[f64],
        grad_in: &mut [f64],
        grad_params: &mut [f64],
    ) {
        match self {
            RotationParams::Angle2D { theta } => {
                let (s, c) = theta.sin_cos();
                let (x, y) = (input[0], input[1]);
                let (g0, g1) = (grad_out[0], grad_out[1]);
                // d(out)/dθ = (−s·x − c·y, c·x − s·y)
                grad_params[0] += g0 * (-s * x - c * y) + g1 * (c * x - s * y);
                // Rᵀ · grad_out
                grad_in[0] += c * g0 + s * g1;
                grad_in[1] += -s * g0 + c * g1;
            }
            RotationParams::Quat3D { q } => {
                let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
                let qh = [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
                let w = qh[0];
                let u = [qh[1], qh[2], qh[3]];
                let v = [input[0], input[1], input[2]];
                let g = [grad_out[0], grad_out[1], grad_out[2]];
                // grad wrt input: Rᵀ g = rotation by the conjugate.
                let gi = quat_rotate(w, [-u[0], -u[1], -u[2]], g);
                grad_in[0] += gi[0];
                grad_in[1] += gi[1];
                grad_in[2] += gi[2];
                // grad wrt the unit quaternion (w, u):
                //   out = v + 2w(u×v) + 2[u(u·v) − v(u·u)]
                let uxv = cross(u, v);
                let gw = 2.0 * dot(&uxv, &g);
                let vxg = cross(v, g);
                let uv = dot(&u, &v);
                let ug = dot(&u, &g);
                let vg = dot(&v, &g);
                let mut gq = [
                    gw,
                    2.0 * (w * vxg[0] + uv * g[0] + ug * v[0] - 2.0 * vg * u[0]),
                    2.0 * (w * vxg[1] + uv * g[1] + ug * v[1] - 2.0 * vg * u[1]),
                    2.0 * (w * vxg[2] + uv * g[2] + ug * v[2] - 2.0 * vg * u[2]),
                ];
                // Chain through normalization: grad_q = (I − q̂q̂ᵀ) grad_q̂ / |q|.
                let proj = gq[0] * qh[0] + gq[1] * qh[1] + gq[2] * qh[2] + gq[3] * qh[3];
                for i in 0..4 {
                    gq[i] = (gq[i] - proj * qh[i]) / n;
                    grad_params[i] += gq[i];
                }
            }
            RotationParams::HouseholderKD { dim, normals } => {
                let m = normals.len() / dim;
                // Forward intermediates v_0 .. v_{m-1} (inputs to each reflection).
                let mut inters = Vec::with_capacity(m);
                let mut cur = input.to_vec();
                for u in normals.chunks(*dim) {
                    inters.push(cur.clone());
                    reflect_in_place(u, &mut cur);
                }
                let mut g = grad_out.to_vec();
                for i in (0..m).rev() {
                    let u = &normals[i * dim..(i + 1) * dim];
                    let vin = &inters[i];
                    let gu = dot(&g, u);
                    let uv = dot(u, vin);
                    let gp = &mut grad_params[i * dim..(i + 1) * dim];
                    for j in 0..*dim {
                        gp[j] += -2.0 * (gu * vin[j] + uv * g[j]);
                    }
                    // Hᵀ = H (symmetric): g ← g − 2(u·g)u.
                    reflect_in_place(u, &mut g);
                }
                for (gi, gj) in grad_in.iter_mut().zip(&g) {
                    *gi += gj;
                }
            }
        }
    }

    /// Project the parameters back onto their constraint set.
    ///
    /// Quaternions are scaled to unit norm, Householder normals to unit
    /// length; angles are untouched.
    pub fn renormalize(&mut self) {
        match self {
            RotationParams::Angle2D { .. } => {}
            RotationParams::Quat3D { q } => {
                if let Ok(u) = unit_quat(q) {
                    *q = u;
                }
            }
            RotationParams::HouseholderKD { dim, normals } => {
                for u in normals.chunks_mut(*dim) {
                    let n = dot(u, u).sqrt();
                    if n > 1e-300 {
                        u.iter_mut().for_each(|x| *x /= n);
                    }
                }
            }
        }
    }

    /// Raw parameter view in the canonical layout (θ | wxyz | normals).
    pub fn params(&self) -> &[f64] {
        match self {
            RotationParams::Angle2D { theta } => std::slice::from_ref(theta),
            RotationParams::Quat3D { q } => q,
            RotationParams::HouseholderKD { normals, .. } => normals,
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            RotationParams::Angle2D { theta } => std::slice::from_mut(theta),
            RotationParams::Quat3D { q } => q,
            RotationParams::HouseholderKD { normals, .. } => normals,
        }
    }
}

/// Apply `p1` then `p2` and `p2` then `p1` to `v`.
///
/// Lets callers probe commutativity: the two outputs agree for 2D angle
/// pairs and generally differ from 3D upward.
pub fn compose_check(
    p1: &RotationParams,
    p2: &RotationParams,
    v: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let forward = p2.apply(&p1.apply(v)?)?;
    let reversed = p1.apply(&p2.apply(v)?)?;
    Ok((forward, reversed))
}
