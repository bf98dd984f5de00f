//! Losses and the optimization loop for NPSN against a frozen Gaussian head.
//!
//! The full chain is differentiated by hand: samples in the unit square go
//! through Box-Muller, the per-frame Cholesky pushforward, and then the
//! winner-takes-all distance loss. The discrepancy loss acts directly on the
//! unit-square samples.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::npsn::{NpsnModel, NpsnParams, SampleTensor, Tape};
use crate::predictor::{predict_head, sample_futures, GaussianHead, HeadHyper, PredictionSet};
use crate::scene::{Point, Scene, T_PRED};
use crate::transform::{box_muller_jacobian, box_muller_pair};

/// Clamp inside the logarithm of the discrepancy loss.
pub const DISC_EPS: f64 = 1e-6;
pub const DEFAULT_LAMBDA: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub l_dist: f64,
    pub l_disc: f64,
    pub total: f64,
    pub lambda: f64,
}

impl LossBreakdown {
    pub fn new(l_dist: f64, l_disc: f64, lambda: f64) -> Self {
        Self {
            l_dist,
            l_disc,
            total: l_dist + lambda * l_disc,
            lambda,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.l_dist.is_finite() && self.l_disc.is_finite() && self.total.is_finite()
    }
}

fn check_dist_shapes(preds: &[PredictionSet], gt: &[&[Point]]) -> Result<()> {
    if preds.len() != gt.len() || preds.is_empty() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} ground-truth futures", preds.len()),
            found: format!("{}", gt.len()),
        });
    }
    if let Some(bad) = gt.iter().find(|g| g.len() != T_PRED) {
        return Err(Error::ShapeMismatch {
            expected: format!("{T_PRED} future frames"),
            found: format!("{}", bad.len()),
        });
    }
    Ok(())
}

fn path_error(pred: &[Point], gt: &[Point]) -> f64 {
    pred.iter()
        .zip(gt)
        .map(|(p, g)| (p[0] - g[0]).hypot(p[1] - g[1]))
        .sum()
}

/// Index of the closest sample path; the lowest index wins ties.
fn best_sample(set: &PredictionSet, gt: &[Point]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (n, path) in set.iter().enumerate() {
        let e = path_error(path, gt);
        if e < best.1 {
            best = (n, e);
        }
    }
    best
}

/// Mean over pedestrians of the smallest summed per-frame distance.
pub fn loss_dist(preds: &[PredictionSet], gt: &[&[Point]]) -> Result<f64> {
    check_dist_shapes(preds, gt)?;
    let total: f64 = preds.iter().zip(gt).map(|(p, g)| best_sample(p, g).1).sum();
    Ok(total / preds.len() as f64)
}

/// [`loss_dist`] and its gradient with respect to every predicted point,
/// laid out like each [`PredictionSet`] (`N × T_PRED`).
pub fn loss_dist_with_grad(
    preds: &[PredictionSet],
    gt: &[&[Point]],
) -> Result<(f64, Vec<Vec<Point>>)> {
    check_dist_shapes(preds, gt)?;
    let scale = 1.0 / preds.len() as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(preds.len());
    for (set, g) in preds.iter().zip(gt) {
        let (n, e) = best_sample(set, g);
        total += e;
        let mut grad = vec![[0.0; 2]; set.n_samples() * T_PRED];
        for (t, (p, y)) in set.trajectory(n).iter().zip(g.iter()).enumerate() {
            let d = [p[0] - y[0], p[1] - y[1]];
            let norm = d[0].hypot(d[1]);
            if norm > 0.0 {
                grad[n * T_PRED + t] = [scale * d[0] / norm, scale * d[1] / norm];
            }
        }
        grads.push(grad);
    }
    Ok((total * scale, grads))
}

fn sample_distance(s: &SampleTensor, l: usize, i: usize, j: usize) -> f64 {
    (0..s.latent_dim)
        .map(|d| (s.get(l, d, i) - s.get(l, d, j)).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn nearest(s: &SampleTensor, l: usize, i: usize) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for j in (0..s.samples).filter(|&j| j != i) {
        let d = sample_distance(s, l, i, j);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn check_disc(samples: &SampleTensor) -> Result<()> {
    if samples.samples < 2 {
        return Err(Error::invalid(
            "the discrepancy loss needs at least two samples",
        ));
    }
    if samples.pedestrians == 0 {
        return Err(Error::invalid("no pedestrians"));
    }
    Ok(())
}

/// Mean negative log nearest-neighbour distance among each pedestrian's samples.
pub fn loss_disc(samples: &SampleTensor) -> Result<f64> {
    check_disc(samples)?;
    let mut total = 0.0;
    for l in 0..samples.pedestrians {
        for i in 0..samples.samples {
            total -= nearest(samples, l, i).1.max(DISC_EPS).ln();
        }
    }
    Ok(total / (samples.pedestrians * samples.samples) as f64)
}

/// [`loss_disc`] and its gradient. Clamped terms contribute no gradient.
pub fn loss_disc_with_grad(samples: &SampleTensor) -> Result<(f64, SampleTensor)> {
    check_disc(samples)?;
    let scale = 1.0 / (samples.pedestrians * samples.samples) as f64;
    let mut grad = SampleTensor::zeros(samples.pedestrians, samples.latent_dim, samples.samples);
    let mut total = 0.0;
    for l in 0..samples.pedestrians {
        for i in 0..samples.samples {
            let (j, dist) = nearest(samples, l, i);
            total -= dist.max(DISC_EPS).ln();
            if dist <= DISC_EPS {
                continue;
            }
            for d in 0..samples.latent_dim {
                let diff = samples.get(l, d, i) - samples.get(l, d, j);
                let g = -scale * diff / (dist * dist);
                let (ii, jj) = (grad.index(l, d, i), grad.index(l, d, j));
                grad.values[ii] += g;
                grad.values[jj] -= g;
            }
        }
    }
    Ok((total * scale, grad))
}

/// Standard-normal latent pairs for pedestrian `l` via Box-Muller.
pub fn latent_normals(samples: &SampleTensor, l: usize) -> Result<Vec<[f64; 2]>> {
    if samples.latent_dim != 2 {
        return Err(Error::invalid(format!(
            "the Gaussian head consumes 2-D latents, sampler emits {}",
            samples.latent_dim
        )));
    }
    Ok((0..samples.samples)
        .map(|n| box_muller_pair(samples.get(l, 0, n), samples.get(l, 1, n)))
        .collect())
}

/// Frozen head outputs for every pedestrian of every scene.
pub fn prepare_heads(scenes: &[Scene], hyper: &HeadHyper) -> Result<Vec<Vec<GaussianHead>>> {
    scenes
        .iter()
        .map(|s| {
            s.observations()
                .into_iter()
                .map(|o| predict_head(o, hyper))
                .collect()
        })
        .collect()
}

fn scene_eval(
    model: &NpsnModel,
    heads: &[GaussianHead],
    scene: &Scene,
    lambda: f64,
    tape: Option<&mut Tape>,
) -> Result<(LossBreakdown, Option<SampleTensor>)> {
    if heads.len() != scene.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} heads", scene.len()),
            found: format!("{}", heads.len()),
        });
    }
    let obs = scene.observations();
    let record = tape.is_some();
    let samples = match tape {
        Some(t) => model.forward_recorded(&obs, t)?,
        None => model.forward(&obs)?,
    };
    let mut preds = Vec::with_capacity(scene.len());
    for (l, head) in heads.iter().enumerate() {
        preds.push(sample_futures(head, &latent_normals(&samples, l)?)?);
    }
    let gt: Vec<&[Point]> = scene.trajectories.iter().map(|t| t.future()).collect();
    let use_disc = samples.samples >= 2;
    if !record {
        let l_dist = loss_dist(&preds, &gt)?;
        let l_disc = if use_disc { loss_disc(&samples)? } else { 0.0 };
        return Ok((LossBreakdown::new(l_dist, l_disc, lambda), None));
    }

    let (l_dist, d_paths) = loss_dist_with_grad(&preds, &gt)?;
    let (l_disc, mut d_samples) = if use_disc {
        let (v, mut g) = loss_disc_with_grad(&samples)?;
        g.values.iter_mut().for_each(|x| *x *= lambda);
        (v, g)
    } else {
        (
            0.0,
            SampleTensor::zeros(samples.pedestrians, samples.latent_dim, samples.samples),
        )
    };
    // Y_t = μ_t + L_t z, z = BoxMuller(u).
    for (l, head) in heads.iter().enumerate() {
        for n in 0..samples.samples {
            let mut dz = [0.0; 2];
            for (t, c) in head.chol.iter().enumerate() {
                let dy = d_paths[l][n * T_PRED + t];
                dz[0] += c.l11 * dy[0] + c.l21 * dy[1];
                dz[1] += c.l22 * dy[1];
            }
            if dz == [0.0, 0.0] {
                continue;
            }
            let j = box_muller_jacobian(samples.get(l, 0, n), samples.get(l, 1, n));
            for d in 0..2 {
                let idx = d_samples.index(l, d, n);
                d_samples.values[idx] += j[0][d] * dz[0] + j[1][d] * dz[1];
            }
        }
    }
    Ok((LossBreakdown::new(l_dist, l_disc, lambda), Some(d_samples)))
}

/// Full-chain loss of one scene.
pub fn scene_loss(
    model: &NpsnModel,
    heads: &[GaussianHead],
    scene: &Scene,
    lambda: f64,
) -> Result<LossBreakdown> {
    Ok(scene_eval(model, heads, scene, lambda, None)?.0)
}

/// Full-chain loss of one scene and its gradient with respect to every
/// NPSN parameter.
pub fn scene_loss_and_grad(
    model: &NpsnModel,
    heads: &[GaussianHead],
    scene: &Scene,
    lambda: f64,
) -> Result<(LossBreakdown, NpsnParams)> {
    let mut tape = Tape::default();
    let (loss, d_samples) = scene_eval(model, heads, scene, lambda, Some(&mut tape))?;
    let d_samples = d_samples.expect("recorded pass yields a sample gradient");
    Ok((loss, model.backward(&tape, &d_samples)?))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_scenes: usize,
    pub lr: f64,
    /// The learning rate is multiplied by `lr_gamma` every `lr_step_epochs`.
    pub lr_step_epochs: usize,
    pub lr_gamma: f64,
    pub weight_decay: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 128,
            batch_scenes: 128,
            lr: 1e-3,
            lr_step_epochs: 32,
            lr_gamma: 0.5,
            weight_decay: 1e-4,
            lambda: DEFAULT_LAMBDA,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_scenes == 0 || self.lr_step_epochs == 0 {
            return Err(Error::invalid(
                "epochs, batch size and lr step must be at least 1",
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(self.lr_gamma > 0.0 && self.weight_decay >= 0.0 && self.lambda >= 0.0) {
            return Err(Error::invalid(
                "lr gamma must be positive; weight decay and lambda non-negative",
            ));
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.lr_gamma.powi((epoch / self.lr_step_epochs) as i32)
    }
}

/// Adam with decoupled weight decay.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl AdamW {
    pub fn new(n_params: usize, weight_decay: f64) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }

    pub fn step(&mut self, params: &mut NpsnParams, grads: &NpsnParams, lr: f64) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let grads = grads.to_flat();
        let mut k = 0;
        for tensor in params.tensors_mut() {
            for p in tensor.iter_mut() {
                let g = grads[k];
                self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
                self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
                *p *= 1.0 - lr * self.weight_decay;
                *p -= lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + self.eps);
                k += 1;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub lr: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: NpsnModel,
    pub log: Vec<EpochLog>,
}

fn batch_results(
    model: &NpsnModel,
    heads: &[Vec<GaussianHead>],
    scenes: &[Scene],
    batch: &[usize],
    lambda: f64,
) -> Vec<Result<(LossBreakdown, NpsnParams)>> {
    let f = |&i: &usize| scene_loss_and_grad(model, &heads[i], &scenes[i], lambda);
    #[cfg(feature = "parallel")]
    return batch.par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return batch.iter().map(f).collect();
}

pub fn train(
    model: NpsnModel,
    hyper: &HeadHyper,
    scenes: &[Scene],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with_progress(model, hyper, scenes, cfg, |_| {})
}

/// Trains NPSN with AdamW and a step schedule. Scene order is shuffled per
/// epoch by a ChaCha stream seeded from `cfg.seed`; gradients are reduced in
/// batch order, so results do not depend on the worker count.
pub fn train_with_progress(
    mut model: NpsnModel,
    hyper: &HeadHyper,
    scenes: &[Scene],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if scenes.is_empty() {
        return Err(Error::invalid("no training scenes"));
    }
    let heads = prepare_heads(scenes, hyper)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = AdamW::new(model.parameter_count(), cfg.weight_decay);
    let mut order: Vec<usize> = (0..scenes.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        let (mut sum_dist, mut sum_disc) = (0.0, 0.0);
        for (b, batch) in order.chunks(cfg.batch_scenes).enumerate() {
            let mut grad = NpsnParams::zeros(&model.config);
            let (mut l_dist, mut l_disc) = (0.0, 0.0);
            for r in batch_results(&model, &heads, scenes, batch, cfg.lambda) {
                let (loss, g) = r.map_err(|e| match e {
                    Error::NonFinite(_) => Error::NonFiniteLoss {
                        epoch: epoch + 1,
                        batch: b + 1,
                        l_dist: f64::NAN,
                        l_disc: f64::NAN,
                    },
                    other => other,
                })?;
                l_dist += loss.l_dist;
                l_disc += loss.l_disc;
                grad.add_scaled(&g, 1.0);
            }
            let inv = 1.0 / batch.len() as f64;
            if !(l_dist.is_finite() && l_disc.is_finite() && grad.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch: b + 1,
                    l_dist: l_dist * inv,
                    l_disc: l_disc * inv,
                });
            }
            sum_dist += l_dist;
            sum_disc += l_disc;
            let mut mean_grad = NpsnParams::zeros(&model.config);
            mean_grad.add_scaled(&grad, inv);
            opt.step(&mut model.params, &mean_grad, lr);
        }
        let n = scenes.len() as f64;
        let entry = EpochLog {
            epoch: epoch + 1,
            loss: LossBreakdown::new(sum_dist / n, sum_disc / n, cfg.lambda),
            lr,
        };
        on_epoch(&entry);
        log.push(entry);
    }
    Ok(TrainOutcome { model, log })
}

/// Mean loss of a model over scenes, without gradients.
pub fn mean_loss(
    model: &NpsnModel,
    hyper: &HeadHyper,
    scenes: &[Scene],
    lambda: f64,
) -> Result<LossBreakdown> {
    let heads = prepare_heads(scenes, hyper)?;
    let (mut d, mut c) = (0.0, 0.0);
    for (s, h) in scenes.iter().zip(&heads) {
        let l = scene_loss(model, h, s, lambda)?;
        d += l.l_dist;
        c += l.l_disc;
    }
    let n = scenes.len() as f64;
    Ok(LossBreakdown::new(d / n, c / n, lambda))
}
