//! Negative sampling, the self-adversarial sigmoid loss, analytic gradients
//! for every parameter class, and the Adam training loop.
//!
//! The loss for a positive x with negatives x′ is
//!
//!   L = −log σ(γ − d(x)) − Σ_{x′} p(x′) · log σ(d(x′) − γ)
//!
//! where d is the hinged training distance and p(x′) is a softmax over the
//! negatives of `adv_temperature · (γ − d(x′))`, treated as a constant (no
//! gradient flows through the weights). Batches average over positives.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SphereError};
use crate::kg::{AnswerIndex, KnowledgeGraph, QueryDirection, Triple};
use crate::model::{lp_distance, SphereModel};

/// One mini-batch: positives plus `neg_count` corruptions of each.
#[derive(Debug, Clone)]
pub struct TrainingBatch {
    pub positives: Vec<Triple>,
    /// `negatives[i]` belongs to `positives[i]`.
    pub negatives: Vec<Vec<Triple>>,
}

impl TrainingBatch {
    /// Corrupt each positive `neg_count` times.
    pub fn sample(
        rng: &mut ChaCha8Rng,
        positives: &[Triple],
        n_entities: usize,
        neg_count: usize,
    ) -> Result<Self> {
        let negatives = positives
            .iter()
            .map(|p| sample_negatives(rng, n_entities, *p, neg_count))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainingBatch { positives: positives.to_vec(), negatives })
    }
}

/// Loss of one batch, split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub total_loss: f64,
    pub positive_term: f64,
    pub negative_term: f64,
    /// Mean hinged training distance of the positives.
    pub mean_training_distance: f64,
}

/// One row of the training log.
#[derive(Debug, Clone, Copy)]
pub struct LogRow {
    pub step: usize,
    pub loss: f64,
    pub positive_term: f64,
    pub negative_term: f64,
    pub mean_training_distance: f64,
}

/// Replace the head or the tail (fair coin) of `positive` with a uniformly
/// random *different* entity, `neg_count` times. Negatives are raw: they are
/// not filtered against known true triples.
pub fn sample_negatives(
    rng: &mut ChaCha8Rng,
    n_entities: usize,
    positive: Triple,
    neg_count: usize,
) -> Result<Vec<Triple>> {
    if n_entities < 2 {
        return Err(SphereError::TooFewEntities(n_entities));
    }
    let mut out = Vec::with_capacity(neg_count);
    for _ in 0..neg_count {
        let corrupt_head = rng.random_bool(0.5);
        let original = if corrupt_head { positive.head } else { positive.tail };
        let replacement = loop {
            let e = rng.random_range(0..n_entities as u32);
            if e != original {
                break e;
            }
        };
        out.push(if corrupt_head {
            Triple::new(replacement, positive.rel, positive.tail)
        } else {
            Triple::new(positive.head, positive.rel, replacement)
        });
    }
    Ok(out)
}

/// Like [`sample_negatives`], but resample corruptions that collide with a
/// triple true in the train split (RotatE-style filtered corruption).
///
/// `train_index` must be built over train only. If a side of a query is so
/// dense that no false corruption turns up within a bounded number of
/// retries, the last non-identical draw is kept.
pub fn sample_negatives_filtered(
    rng: &mut ChaCha8Rng,
    n_entities: usize,
    train_index: &AnswerIndex,
    positive: Triple,
    neg_count: usize,
) -> Result<Vec<Triple>> {
    if n_entities < 2 {
        return Err(SphereError::TooFewEntities(n_entities));
    }
    let mut out = Vec::with_capacity(neg_count);
    for _ in 0..neg_count {
        let corrupt_head = rng.random_bool(0.5);
        let (original, truth) = if corrupt_head {
            (positive.head, train_index.answers(QueryDirection::Head, positive.tail, positive.rel))
        } else {
            (positive.tail, train_index.answers(QueryDirection::Tail, positive.head, positive.rel))
        };
        let mut replacement = original;
        for attempt in 0..(8 * n_entities).max(64) {
            let e = rng.random_range(0..n_entities as u32);
            if e == original {
                continue;
            }
            replacement = e;
            if truth.binary_search(&e).is_err() || attempt + 1 == (8 * n_entities).max(64) {
                break;
            }
        }
        if replacement == original {
            return Err(SphereError::TooFewEntities(n_entities));
        }
        out.push(if corrupt_head {
            Triple::new(replacement, positive.rel, positive.tail)
        } else {
            Triple::new(positive.head, positive.rel, replacement)
        });
    }
    Ok(out)
}

/// Softmax of `adv_temperature · (γ − d)` over the negatives' training
/// distances. The caller treats the result as constants.
pub fn adversarial_weights(
    model: &SphereModel,
    negatives: &[Triple],
    adv_temperature: f64,
) -> Result<Vec<f64>> {
    if negatives.is_empty() {
        return Err(SphereError::EmptyNegatives);
    }
    let distances = negatives
        .iter()
        .map(|t| model.training_distance(t.head, t.rel, t.tail))
        .collect::<Result<Vec<_>>>()?;
    Ok(softmax_weights(model.config.gamma, adv_temperature, &distances))
}

fn softmax_weights(gamma: f64, temperature: f64, distances: &[f64]) -> Vec<f64> {
    let logits: Vec<f64> = distances.iter().map(|d| temperature * (gamma - d)).collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Numerically stable −log σ(z) = softplus(−z).
fn neg_log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// Numerically stable logistic sigmoid.
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Batch loss, averaged over positives.
pub fn loss(model: &SphereModel, batch: &TrainingBatch) -> Result<LossReport> {
    model.assert_finite()?;
    let gamma = model.config.gamma;
    let temperature = model.config.adv_temperature;
    let n = batch.positives.len().max(1) as f64;
    let mut positive_term = 0.0;
    let mut negative_term = 0.0;
    let mut mean_distance = 0.0;
    for (pos, negs) in batch.positives.iter().zip(&batch.negatives) {
        let d_pos = model.training_distance(pos.head, pos.rel, pos.tail)?;
        positive_term += neg_log_sigmoid(gamma - d_pos);
        mean_distance += d_pos;
        if negs.is_empty() {
            continue;
        }
        let d_negs = negs
            .iter()
            .map(|t| model.training_distance(t.head, t.rel, t.tail))
            .collect::<Result<Vec<_>>>()?;
        let weights = softmax_weights(gamma, temperature, &d_negs);
        for (d, w) in d_negs.iter().zip(&weights) {
            negative_term += w * neg_log_sigmoid(d - gamma);
        }
    }
    positive_term /= n;
    negative_term /= n;
    Ok(LossReport {
        total_loss: positive_term + negative_term,
        positive_term,
        negative_term,
        mean_training_distance: mean_distance / n,
    })
}

/// The per-positive adversarial weight vectors of a batch.
pub fn batch_weights(model: &SphereModel, batch: &TrainingBatch) -> Result<Vec<Vec<f64>>> {
    batch
        .negatives
        .iter()
        .map(|negs| {
            if negs.is_empty() {
                Ok(Vec::new())
            } else {
                adversarial_weights(model, negs, model.config.adv_temperature)
            }
        })
        .collect()
}

/// Batch loss with externally supplied negative weights.
///
/// The training gradient treats the self-adversarial weights as detached
/// constants, so finite-difference checks must differentiate *this* function
/// with the weights frozen at the base point, not [`loss`] (whose weights
/// move with the parameters).
pub fn loss_with_frozen_weights(
    model: &SphereModel,
    batch: &TrainingBatch,
    weights: &[Vec<f64>],
) -> Result<LossReport> {
    model.assert_finite()?;
    let gamma = model.config.gamma;
    let n = batch.positives.len().max(1) as f64;
    let mut positive_term = 0.0;
    let mut negative_term = 0.0;
    let mut mean_distance = 0.0;
    for ((pos, negs), w) in batch.positives.iter().zip(&batch.negatives).zip(weights) {
        let d_pos = model.training_distance(pos.head, pos.rel, pos.tail)?;
        positive_term += neg_log_sigmoid(gamma - d_pos);
        mean_distance += d_pos;
        for (neg, wi) in negs.iter().zip(w) {
            let d = model.training_distance(neg.head, neg.rel, neg.tail)?;
            negative_term += wi * neg_log_sigmoid(d - gamma);
        }
    }
    positive_term /= n;
    negative_term /= n;
    Ok(LossReport {
        total_loss: positive_term + negative_term,
        positive_term,
        negative_term,
        mean_training_distance: mean_distance / n,
    })
}

/// Gradient buffers with the same shapes as the model parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub centers: Vec<f64>,
    pub radii: Vec<f64>,
    /// `rotations[rel][block]` in each rotation's raw parameter layout.
    pub rotations: Vec<Vec<Vec<f64>>>,
}

impl Gradients {
    pub fn zeros_like(model: &SphereModel) -> Self {
        Gradients {
            centers: vec![0.0; model.centers.len()],
            radii: vec![0.0; model.radii.len()],
            rotations: model
                .rotations
                .iter()
                .map(|rel| rel.iter().map(|b| vec![0.0; b.params().len()]).collect())
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        self.centers.iter_mut().for_each(|x| *x = 0.0);
        self.radii.iter_mut().for_each(|x| *x = 0.0);
        for rel in &mut self.rotations {
            for b in rel {
                b.iter_mut().for_each(|x| *x = 0.0);
            }
        }
    }
}

struct Scratch {
    transformed: Vec<f64>,
    grad_diff: Vec<f64>,
}

/// Forward one triple and, if its hinge is active, accumulate `upstream`
/// (= ∂L/∂d) through the distance into all touched parameters. Returns d.
///
/// Subgradient conventions: the hinge contributes 0 at its kink, the p-norm
/// contributes 0 at coincident centers.
fn accumulate_triple(
    model: &SphereModel,
    triple: Triple,
    upstream: f64,
    grads: &mut Gradients,
    scratch: &mut Scratch,
) -> Result<f64> {
    let (h, rel, t) = (triple.head, triple.rel, triple.tail);
    model.check_entity(h)?;
    model.check_entity(t)?;
    let dim = model.dim();
    let k = model.config.k;
    let p = model.config.p_norm;
    let cfg = &model.config;

    model.transform_head_into(rel, model.center(h), &mut scratch.transformed)?;
    let center_dist = lp_distance(&scratch.transformed, model.center(t), p);
    let slack = (1.0 + cfg.alpha) * model.radius(h) + (1.0 + cfg.beta) * model.radius(t);
    let pre_hinge = center_dist - slack;
    if pre_hinge <= 0.0 {
        return Ok(0.0);
    }
    if upstream != 0.0 {
        grads.radii[h as usize] += upstream * -(1.0 + cfg.alpha);
        grads.radii[t as usize] += upstream * -(1.0 + cfg.beta);
        if center_dist > 0.0 {
            let c_t = model.center(t);
            for i in 0..dim {
                let x = scratch.transformed[i] - c_t[i];
                let g = match p {
                    1 => sign(x),
                    2 => x / center_dist,
                    p => sign(x) * x.abs().powi(p as i32 - 1) / center_dist.powi(p as i32 - 1),
                };
                scratch.grad_diff[i] = upstream * g;
            }
            let tail_base = t as usize * dim;
            for i in 0..dim {
                grads.centers[tail_base + i] -= scratch.grad_diff[i];
            }
            let head_base = h as usize * dim;
            let c_h = model.center(h);
            for (block, params) in model.rotations[rel as usize].iter().enumerate() {
                let span = block * k..(block + 1) * k;
                params.backward(
                    &c_h[span.clone()],
                    &scratch.grad_diff[span.clone()],
                    &mut grads.centers[head_base + span.start..head_base + span.end],
                    &mut grads.rotations[rel as usize][block],
                );
            }
        }
    }
    Ok(pre_hinge)
}

/// signum with sign(0) = 0, the subgradient convention for |x|.
fn sign(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum()
    }
}

/// Compute the batch loss and accumulate its gradients into `grads`
/// (which the caller provides zeroed).
pub fn gradients_into(
    model: &SphereModel,
    batch: &TrainingBatch,
    grads: &mut Gradients,
) -> Result<LossReport> {
    model.assert_finite()?;
    let gamma = model.config.gamma;
    let temperature = model.config.adv_temperature;
    let n = batch.positives.len().max(1) as f64;
    let dim = model.dim();
    let mut scratch = Scratch { transformed: vec![0.0; dim], grad_diff: vec![0.0; dim] };
    let mut positive_term = 0.0;
    let mut negative_term = 0.0;
    let mut mean_distance = 0.0;
    for (pos, negs) in batch.positives.iter().zip(&batch.negatives) {
        // Positive: ∂L/∂d = σ(d − γ) / n.
        let d_pos = model.training_distance(pos.head, pos.rel, pos.tail)?;
        let upstream = sigmoid(d_pos - gamma) / n;
        accumulate_triple(model, *pos, upstream, grads, &mut scratch)?;
        positive_term += neg_log_sigmoid(gamma - d_pos);
        mean_distance += d_pos;
        if negs.is_empty() {
            continue;
        }
        let d_negs = negs
            .iter()
            .map(|t| model.training_distance(t.head, t.rel, t.tail))
            .collect::<Result<Vec<_>>>()?;
        let weights = softmax_weights(gamma, temperature, &d_negs);
        for ((neg, d), w) in negs.iter().zip(&d_negs).zip(&weights) {
            // Negative: ∂L/∂d = −p(x′) σ(γ − d) / n, weights detached.
            negative_term += w * neg_log_sigmoid(d - gamma);
            let upstream = -w * sigmoid(gamma - d) / n;
            accumulate_triple(model, *neg, upstream, grads, &mut scratch)?;
        }
    }
    positive_term /= n;
    negative_term /= n;
    Ok(LossReport {
        total_loss: positive_term + negative_term,
        positive_term,
        negative_term,
        mean_training_distance: mean_distance / n,
    })
}

/// Allocating convenience wrapper around [`gradients_into`].
pub fn gradients(model: &SphereModel, batch: &TrainingBatch) -> Result<(LossReport, Gradients)> {
    let mut grads = Gradients::zeros_like(model);
    let report = gradients_into(model, batch, &mut grads)?;
    Ok((report, grads))
}

/// Adam with the usual moment defaults (β₁ = 0.9, β₂ = 0.999, ε = 1e-8).
#[derive(Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(model: &SphereModel, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Gradients::zeros_like(model),
            v: Gradients::zeros_like(model),
        }
    }

    /// One dense update over every parameter; zeroes `grads` as it goes.
    pub fn step(&mut self, model: &mut SphereModel, grads: &mut Gradients) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let scalars = (self.lr, self.beta1, self.beta2, self.eps, bc1, bc2);
        adam_update(&mut model.centers, &mut grads.centers, &mut self.m.centers, &mut self.v.centers, scalars);
        adam_update(&mut model.radii, &mut grads.radii, &mut self.m.radii, &mut self.v.radii, scalars);
        for (rel, rel_params) in model.rotations.iter_mut().enumerate() {
            for (block, params) in rel_params.iter_mut().enumerate() {
                adam_update(
                    params.params_mut(),
                    &mut grads.rotations[rel][block],
                    &mut self.m.rotations[rel][block],
                    &mut self.v.rotations[rel][block],
                    scalars,
                );
            }
        }
    }
}

fn adam_update(
    params: &mut [f64],
    grads: &mut [f64],
    m: &mut [f64],
    v: &mut [f64],
    (lr, beta1, beta2, eps, bc1, bc2): (f64, f64, f64, f64, f64, f64),
) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        params[i] -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
        grads[i] = 0.0;
    }
}

/// Run the optimization loop: shuffled fixed-size mini-batches, negative
/// sampling, Adam updates, and projection of rotation parameters back onto
/// their constraint sets after every step.
///
/// Deterministic for a fixed seed (single-threaded). Returns the training
/// log; `on_log` additionally sees each row as it is produced.
pub fn fit<F: FnMut(&LogRow)>(
    model: &mut SphereModel,
    kg: &KnowledgeGraph,
    rng: &mut ChaCha8Rng,
    mut on_log: F,
) -> Result<Vec<LogRow>> {
    model.config.validate()?;
    if kg.train.is_empty() {
        log::warn!("empty train split: nothing to fit");
        return Ok(Vec::new());
    }
    let cfg = model.config.clone();
    let batch_size = cfg.batch_size.min(kg.train.len());
    let train_index = cfg.filter_negatives.then(|| AnswerIndex::build(&[&kg.train]));
    let mut order: Vec<usize> = (0..kg.train.len()).collect();
    let mut cursor = usize::MAX; // force initial shuffle
    let mut grads = Gradients::zeros_like(model);
    let mut adam = Adam::new(model, cfg.learning_rate);
    let mut log_rows = Vec::new();
    let mut positives = Vec::with_capacity(batch_size);

    for step in 1..=cfg.steps {
        if cursor.saturating_add(batch_size) > order.len() {
            shuffle(&mut order, rng);
            cursor = 0;
        }
        positives.clear();
        positives.extend(order[cursor..cursor + batch_size].iter().map(|&i| kg.train[i]));
        cursor += batch_size;

        let negatives = positives
            .iter()
            .map(|p| match &train_index {
                Some(index) => {
                    sample_negatives_filtered(rng, kg.n_entities(), index, *p, cfg.neg_count)
                }
                None => sample_negatives(rng, kg.n_entities(), *p, cfg.neg_count),
            })
            .collect::<Result<Vec<_>>>()?;
        let batch = TrainingBatch { positives: positives.clone(), negatives };
        let report = gradients_into(model, &batch, &mut grads)?;
        if !report.total_loss.is_finite() {
            return Err(SphereError::Diverged {
                step,
                what: format!("loss became {}", report.total_loss),
            });
        }
        adam.step(model, &mut grads);
        for rel in model.rotations.iter_mut() {
            for block in rel.iter_mut() {
                block.renormalize();
            }
        }
        if step == 1 || step % cfg.log_every == 0 || step == cfg.steps {
            let row = LogRow {
                step,
                loss: report.total_loss,
                positive_term: report.positive_term,
                negative_term: report.negative_term,
                mean_training_distance: report.mean_training_distance,
            };
            on_log(&row);
            log_rows.push(row);
        }
    }
    model.assert_finite()?;
    Ok(log_rows)
}

/// Fisher–Yates with the crate's seeded RNG.
fn shuffle(order: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
}

/// Header + one formatted row per [`LogRow`], the CSV layout used for
/// training logs.
pub const TRAINING_LOG_HEADER: &str = "step,loss,positive_term,negative_term,mean_training_distance";

pub fn format_log_row(row: &LogRow) -> String {
    format!(
        "{},{:.6},{:.6},{:.6},{:.6}",
        row.step, row.loss, row.positive_term, row.negative_term, row.mean_training_distance
    )
}
