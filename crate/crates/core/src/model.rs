//! Learnable parameters and the sphere-intersection criterion.
//!
//! Every entity owns a center vector of `k·n_blocks` coordinates plus a
//! scalar radius (sign-unconstrained; rarely-seen entities tend to learn a
//! negative one). Every relation owns one rotation per block. A fact (h, r, t)
//! is retrieved when the blockwise-rotated head center lies within
//! `radius_h + radius_t` of the tail center.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SphereError};
use crate::kg::{EntityId, RelationId};
use crate::rotation::{RotationKind, RotationParams};

/// All hyperparameters of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Rotation block dimension: 2 (angle), 3 (quaternion), or ≥4 (Householder).
    pub k: usize,
    /// Blocks per entity; the center dimension is `k * n_blocks`.
    pub n_blocks: usize,
    /// Margin γ of the sigmoid loss.
    pub gamma: f64,
    /// Head-radius slack α ≥ 0 (training only).
    pub alpha: f64,
    /// Tail-radius slack β ≥ 0 (training only).
    pub beta: f64,
    /// Norm order for the training distance; evaluation always uses 2.
    pub p_norm: u32,
    /// Self-adversarial softmax temperature.
    pub adv_temperature: f64,
    pub learning_rate: f64,
    /// Negatives sampled per positive.
    pub neg_count: usize,
    pub batch_size: usize,
    /// Optimizer steps to run.
    pub steps: usize,
    pub seed: u64,
    /// Relation-category threshold for the n-to-n metric.
    pub rmp_threshold: f64,
    /// Householder reflections per block (even), used only when k ≥ 4.
    pub reflections: usize,
    /// Emit a training-log row every this many steps.
    pub log_every: usize,
    /// Resample corruptions that collide with triples true in train.
    ///
    /// Raw uniform corruption is fine on large graphs, but on small or dense
    /// ones most corruptions of a many-answer query hit another true answer
    /// and the adversarial weighting then actively unlearns the fact.
    pub filter_negatives: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            k: 2,
            n_blocks: 100,
            gamma: 6.0,
            alpha: 0.0,
            beta: 0.0,
            p_norm: 2,
            adv_temperature: 1.0,
            learning_rate: 1e-4,
            neg_count: 16,
            batch_size: 512,
            steps: 10_000,
            seed: 42,
            rmp_threshold: 1.5,
            reflections: 2,
            log_every: 100,
            filter_negatives: false,
        }
    }
}

impl ModelConfig {
    pub fn dim(&self) -> usize {
        self.k * self.n_blocks
    }

    pub fn rotation_kind(&self) -> RotationKind {
        RotationKind::for_block_dim(self.k, self.reflections)
    }

    /// Check every field, naming the offender on failure.
    pub fn validate(&self) -> Result<()> {
        fn bad(field: &'static str, reason: impl Into<String>) -> SphereError {
            SphereError::InvalidConfig { field, reason: reason.into() }
        }
        if self.k < 2 {
            return Err(bad("k", format!("must be at least 2, got {}", self.k)));
        }
        if self.n_blocks == 0 {
            return Err(bad("n_blocks", "must be at least 1"));
        }
        if !(self.gamma > 0.0) {
            return Err(bad("gamma", format!("must be > 0, got {}", self.gamma)));
        }
        if !(self.alpha >= 0.0) {
            return Err(bad("alpha", format!("must be ≥ 0, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0) {
            return Err(bad("beta", format!("must be ≥ 0, got {}", self.beta)));
        }
        if self.p_norm == 0 {
            return Err(bad("p_norm", "must be a positive integer"));
        }
        if !(self.adv_temperature > 0.0) {
            return Err(bad(
                "adv_temperature",
                format!("must be > 0, got {}", self.adv_temperature),
            ));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(bad(
                "learning_rate",
                format!("must be a finite value ≥ 0, got {}", self.learning_rate),
            ));
        }
        if self.neg_count == 0 {
            return Err(bad("neg_count", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(bad("batch_size", "must be at least 1"));
        }
        if self.k >= 4 && (self.reflections == 0 || self.reflections % 2 != 0) {
            return Err(bad(
                "reflections",
                format!("must be a positive even number, got {}", self.reflections),
            ));
        }
        if self.log_every == 0 {
            return Err(bad("log_every", "must be at least 1"));
        }
        Ok(())
    }
}

/// Which form of the center distance to evaluate.
///
/// `Forward` is ‖f_r(c_h) − c_t‖, `Backward` is ‖c_h − f_r⁻¹(c_t)‖. For the
/// Euclidean norm the two agree because rotations are isometric.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceDirection {
    Forward,
    Backward,
}

/// A full parameter set: centers, radii, and per-relation rotations.
#[derive(Debug, Clone)]
pub struct SphereModel {
    pub config: ModelConfig,
    pub n_entities: usize,
    pub n_relations: usize,
    /// Row-major `n_entities × dim` center matrix.
    pub centers: Vec<f64>,
    pub radii: Vec<f64>,
    /// `rotations[rel][block]`.
    pub rotations: Vec<Vec<RotationParams>>,
}

/// Radius every entity starts from.
pub const INITIAL_RADIUS: f64 = 0.05;

impl SphereModel {
    /// Random initialization: centers uniform in ±γ/dim per coordinate,
    /// radii at [`INITIAL_RADIUS`], rotations uniformly random.
    pub fn init(
        config: ModelConfig,
        n_entities: usize,
        n_relations: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        config.validate()?;
        let dim = config.dim();
        let bound = config.gamma / dim as f64;
        let centers: Vec<f64> =
            (0..n_entities * dim).map(|_| rng.random_range(-bound..bound)).collect();
        let radii = vec![INITIAL_RADIUS; n_entities];
        let kind = config.rotation_kind();
        let rotations: Vec<Vec<RotationParams>> = (0..n_relations)
            .map(|_| (0..config.n_blocks).map(|_| RotationParams::random(kind, rng)).collect())
            .collect();
        Ok(SphereModel { config, n_entities, n_relations, centers, radii, rotations })
    }

    /// Identity-rotation variant of [`SphereModel::init`], handy for tests.
    pub fn init_identity(
        config: ModelConfig,
        n_entities: usize,
        n_relations: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let mut model = Self::init(config, n_entities, n_relations, rng)?;
        let kind = model.config.rotation_kind();
        for rel in model.rotations.iter_mut() {
            for block in rel.iter_mut() {
                *block = RotationParams::identity(kind);
            }
        }
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.config.dim()
    }

    pub fn check_entity(&self, e: EntityId) -> Result<()> {
        if (e as usize) < self.n_entities {
            Ok(())
        } else {
            Err(SphereError::UnknownEntity(e))
        }
    }

    pub fn check_relation(&self, r: RelationId) -> Result<()> {
        if (r as usize) < self.n_relations {
            Ok(())
        } else {
            Err(SphereError::UnknownRelation(r))
        }
    }

    pub fn center(&self, e: EntityId) -> &[f64] {
        let dim = self.dim();
        &self.centers[e as usize * dim..(e as usize + 1) * dim]
    }

    pub fn radius(&self, e: EntityId) -> f64 {
        self.radii[e as usize]
    }

    /// Blockwise rotation of a center vector by relation `rel`.
    pub fn transform_head_into(&self, rel: RelationId, center: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_relation(rel)?;
        let k = self.config.k;
        if center.len() != self.dim() || out.len() != self.dim() {
            return Err(SphereError::DimensionMismatch {
                expected: self.dim(),
                got: center.len(),
            });
        }
        for (block, params) in self.rotations[rel as usize].iter().enumerate() {
            params.apply_into(&center[block * k..(block + 1) * k], &mut out[block * k..(block + 1) * k])?;
        }
        Ok(())
    }

    pub fn transform_head(&self, rel: RelationId, center: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.transform_head_into(rel, center, &mut out)?;
        Ok(out)
    }

    /// Blockwise inverse rotation, used to answer head queries.
    pub fn transform_tail_inverse_into(
        &self,
        rel: RelationId,
        center: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        self.check_relation(rel)?;
        let k = self.config.k;
        if center.len() != self.dim() || out.len() != self.dim() {
            return Err(SphereError::DimensionMismatch {
                expected: self.dim(),
                got: center.len(),
            });
        }
        for (block, params) in self.rotations[rel as usize].iter().enumerate() {
            params.apply_inverse_into(
                &center[block * k..(block + 1) * k],
                &mut out[block * k..(block + 1) * k],
            )?;
        }
        Ok(())
    }

    pub fn transform_tail_inverse(&self, rel: RelationId, center: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.transform_tail_inverse_into(rel, center, &mut out)?;
        Ok(out)
    }

    /// ‖f_r(c_h) − c_t‖_p (forward) or ‖c_h − f_r⁻¹(c_t)‖_p (backward),
    /// with p from the config.
    pub fn center_distance(
        &self,
        h: EntityId,
        rel: RelationId,
        t: EntityId,
        direction: DistanceDirection,
    ) -> Result<f64> {
        self.center_distance_p(h, rel, t, direction, self.config.p_norm)
    }

    pub(crate) fn center_distance_p(
        &self,
        h: EntityId,
        rel: RelationId,
        t: EntityId,
        direction: DistanceDirection,
        p: u32,
    ) -> Result<f64> {
        self.check_entity(h)?;
        self.check_entity(t)?;
        let mut transformed = vec![0.0; self.dim()];
        Ok(match direction {
            DistanceDirection::Forward => {
                self.transform_head_into(rel, self.center(h), &mut transformed)?;
                lp_distance(&transformed, self.center(t), p)
            }
            DistanceDirection::Backward => {
                self.transform_tail_inverse_into(rel, self.center(t), &mut transformed)?;
                lp_distance(self.center(h), &transformed, p)
            }
        })
    }

    /// Hinged training distance:
    /// max(0, ‖f_r(c_h) − c_t‖_p − (1+α)·radius_h − (1+β)·radius_t).
    ///
    /// The α/β slack encourages intersections during optimization; the
    /// retrieval criterion itself is unslacked.
    pub fn training_distance(&self, h: EntityId, rel: RelationId, t: EntityId) -> Result<f64> {
        let d = self.center_distance(h, rel, t, DistanceDirection::Forward)?;
        let slack = (1.0 + self.config.alpha) * self.radius(h)
            + (1.0 + self.config.beta) * self.radius(t);
        Ok((d - slack).max(0.0))
    }

    /// The retrieval test: transformed head sphere and tail sphere are
    /// non-disjoint. Tangency counts as retrieved; evaluation is always the
    /// Euclidean norm.
    pub fn is_retrieved(&self, h: EntityId, rel: RelationId, t: EntityId) -> Result<bool> {
        let d = self.center_distance_p(h, rel, t, DistanceDirection::Forward, 2)?;
        Ok(d <= self.radius(h) + self.radius(t))
    }

    /// Guard against NaN/Inf having crept into any parameter.
    pub fn assert_finite(&self) -> Result<()> {
        if !self.centers.iter().all(|x| x.is_finite()) {
            return Err(SphereError::NonFinite("entity centers".into()));
        }
        if !self.radii.iter().all(|x| x.is_finite()) {
            return Err(SphereError::NonFinite("entity radii".into()));
        }
        for rel in &self.rotations {
            for block in rel {
                if !block.params().iter().all(|x| x.is_finite()) {
                    return Err(SphereError::NonFinite("rotation parameters".into()));
                }
            }
        }
        Ok(())
    }
}

/// p-norm of the difference of two equal-length vectors.
pub(crate) fn lp_distance(a: &[f64], b: &[f64], p: u32) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    match p {
        1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        2 => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        p => {
            let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs().powi(p as i32)).sum();
            sum.powf(1.0 / p as f64)
        }
    }
}
