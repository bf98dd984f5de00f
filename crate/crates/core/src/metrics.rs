//! Best-of-N evaluation: min-ADE, min-FDE and TCC.

use std::fmt;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lds::{
    derive_seed, halton_points, mc_points, scrambled_sobol_points, sobol_points, SamplerKind,
};
use crate::npsn::{NpsnModel, SampleTensor};
use crate::predictor::{sample_futures, GaussianHead, HeadHyper, PredictionSet};
use crate::scene::{Point, Scene};
use crate::train::{latent_normals, prepare_heads};

fn check_pair(pred: &[Point], gt: &[Point]) -> Result<()> {
    if pred.len() != gt.len() || gt.is_empty() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} frames", gt.len()),
            found: format!("{} frames", pred.len()),
        });
    }
    Ok(())
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Mean per-frame Euclidean distance.
pub fn ade(pred: &[Point], gt: &[Point]) -> Result<f64> {
    check_pair(pred, gt)?;
    Ok(pred.iter().zip(gt).map(|(&p, &g)| dist(p, g)).sum::<f64>() / gt.len() as f64)
}

/// Distance at the final frame.
pub fn fde(pred: &[Point], gt: &[Point]) -> Result<f64> {
    check_pair(pred, gt)?;
    Ok(dist(pred[pred.len() - 1], gt[gt.len() - 1]))
}

/// Below this variance (m²) an axis is treated as constant.
const FLAT_VARIANCE: f64 = 1e-18;

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    let (va, vb) = (saa / n, sbb / n);
    match (va < FLAT_VARIANCE, vb < FLAT_VARIANCE) {
        (true, true) => 1.0,
        (false, false) => (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0),
        _ => 0.0,
    }
}

/// Per-axis Pearson correlation of the coordinate series, averaged over the
/// two axes. An axis that is constant in both series scores 1; constant in
/// only one of them scores 0.
pub fn tcc(pred: &[Point], gt: &[Point]) -> Result<f64> {
    check_pair(pred, gt)?;
    let axis = |v: &[Point], k: usize| v.iter().map(|p| p[k]).collect::<Vec<_>>();
    Ok(0.5 * (pearson(&axis(pred, 0), &axis(gt, 0)) + pearson(&axis(pred, 1), &axis(gt, 1))))
}

/// Best-of-N scores of one pedestrian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BestOfN {
    pub min_ade: f64,
    pub min_fde: f64,
    /// TCC of the min-ADE sample.
    pub tcc: f64,
}

/// min-ADE and min-FDE are minimized independently; TCC follows the
/// min-ADE sample (lowest index on ties).
pub fn best_of_n(set: &PredictionSet, gt: &[Point]) -> Result<BestOfN> {
    let mut best_ade = (0, f64::INFINITY);
    let mut min_fde = f64::INFINITY;
    for (n, path) in set.iter().enumerate() {
        let a = ade(path, gt)?;
        if a < best_ade.1 {
            best_ade = (n, a);
        }
        min_fde = min_fde.min(fde(path, gt)?);
    }
    Ok(BestOfN {
        min_ade: best_ade.1,
        min_fde,
        tcc: tcc(set.trajectory(best_ade.0), gt)?,
    })
}

/// Source of unit-square latent points for every pedestrian of a scene.
#[derive(Clone, Debug)]
pub enum LatentSampler {
    /// A generic point generator; `SamplerKind::ScrambledSobol` is the QMC sampler.
    Points(SamplerKind),
    Npsn(Box<NpsnModel>),
}

impl LatentSampler {
    pub const MC: LatentSampler = LatentSampler::Points(SamplerKind::Mc);
    pub const QMC: LatentSampler = LatentSampler::Points(SamplerKind::ScrambledSobol);

    pub fn npsn(model: NpsnModel) -> Self {
        LatentSampler::Npsn(Box::new(model))
    }

    pub fn name(&self) -> &'static str {
        match self {
            LatentSampler::Points(SamplerKind::Mc) => "mc",
            LatentSampler::Points(SamplerKind::ScrambledSobol) => "qmc",
            LatentSampler::Points(SamplerKind::Sobol) => "sobol",
            LatentSampler::Points(SamplerKind::Halton) => "halton",
            LatentSampler::Npsn(_) => "npsn",
        }
    }

    pub fn is_deterministic(&self) -> bool {
        match self {
            LatentSampler::Points(k) => k.is_deterministic(),
            LatentSampler::Npsn(_) => true,
        }
    }

    /// `L × 2 × n` unit-square samples. Stochastic generators are seeded per
    /// pedestrian from `seed` and the pedestrian's observed coordinates, so
    /// draws do not depend on scene or pedestrian order. Unscrambled Sobol
    /// drops its first point, the origin.
    pub fn draw(&self, scene: &Scene, n: usize, seed: u64) -> Result<SampleTensor> {
        if n == 0 {
            return Err(Error::invalid("sample count must be at least 1"));
        }
        if let LatentSampler::Npsn(model) = self {
            if model.config.samples != n || model.config.latent_dim != 2 {
                return Err(Error::invalid(format!(
                    "checkpoint emits {} samples of dimension {}, evaluation needs {n} of dimension 2",
                    model.config.samples, model.config.latent_dim
                )));
            }
            return model.forward(&scene.observations());
        }
        let LatentSampler::Points(kind) = self else {
            unreachable!()
        };
        let mut out = SampleTensor::zeros(scene.len(), 2, n);
        for (l, traj) in scene.trajectories.iter().enumerate() {
            let ped_seed = derive_seed(&[seed, observation_key(traj.observed())]);
            let ps = match kind {
                SamplerKind::Mc => mc_points(n, 2, ped_seed)?,
                SamplerKind::ScrambledSobol => scrambled_sobol_points(n, 2, ped_seed)?,
                SamplerKind::Sobol => sobol_points(n + 1, 2)?.skip(1)?,
                SamplerKind::Halton => halton_points(n, 2)?,
            };
            for (i, p) in ps.iter().enumerate() {
                for d in 0..2 {
                    let k = out.index(l, d, i);
                    out.values[k] = p[d];
                }
            }
        }
        Ok(out)
    }
}

impl fmt::Display for LatentSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn observation_key(obs: &[Point]) -> u64 {
    let bits: Vec<u64> = obs.iter().flatten().map(|v| v.to_bits()).collect();
    derive_seed(&bits)
}

/// Aggregated best-of-N scores. Means are over pedestrians, then repeats;
/// spreads are sample standard deviations across repeats.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub sampler: String,
    pub n_samples: usize,
    pub repeats: usize,
    pub min_ade: f64,
    pub min_fde: f64,
    pub tcc: f64,
    pub sd_ade: f64,
    pub sd_fde: f64,
    pub sd_tcc: f64,
    /// Per-repeat means, `[min_ade, min_fde, tcc]`.
    pub per_repeat: Vec<[f64; 3]>,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str =
        "sampler,n,repeats,min_ade,min_fde,tcc,sd_ade,sd_fde,sd_tcc";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.sampler,
            self.n_samples,
            self.repeats,
            self.min_ade,
            self.min_fde,
            self.tcc,
            self.sd_ade,
            self.sd_fde,
            self.sd_tcc
        )
    }

    pub fn repeat_fde(&self) -> Vec<f64> {
        self.per_repeat.iter().map(|r| r[1]).collect()
    }

    pub fn repeat_ade(&self) -> Vec<f64> {
        self.per_repeat.iter().map(|r| r[0]).collect()
    }
}

/// Sample mean and standard deviation (zero for a single value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn scene_scores(
    scene: &Scene,
    heads: &[GaussianHead],
    sampler: &LatentSampler,
    n: usize,
    seed: u64,
) -> Result<Vec<BestOfN>> {
    let samples = sampler.draw(scene, n, seed)?;
    heads
        .iter()
        .zip(&scene.trajectories)
        .enumerate()
        .map(|(l, (head, traj))| {
            let set = sample_futures(head, &latent_normals(&samples, l)?)?;
            best_of_n(&set, traj.future())
        })
        .collect()
}

/// Mean scores over all pedestrians for one draw.
fn single_pass(
    scenes: &[Scene],
    heads: &[Vec<GaussianHead>],
    sampler: &LatentSampler,
    n: usize,
    seed: u64,
) -> Result<[f64; 3]> {
    let f = |(s, h): (&Scene, &Vec<GaussianHead>)| scene_scores(s, h, sampler, n, seed);
    #[cfg(feature = "parallel")]
    let per_scene: Vec<Result<Vec<BestOfN>>> =
        scenes.par_iter().zip(heads.par_iter()).map(f).collect();
    #[cfg(not(feature = "parallel"))]
    let per_scene: Vec<Result<Vec<BestOfN>>> = scenes.iter().zip(heads.iter()).map(f).collect();
    let mut sums = [0.0; 3];
    let mut count = 0usize;
    for scores in per_scene {
        for b in scores? {
            sums[0] += b.min_ade;
            sums[1] += b.min_fde;
            sums[2] += b.tcc;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::invalid("no pedestrians to evaluate"));
    }
    Ok(sums.map(|s| s / count as f64))
}

/// Best-of-`n` evaluation with `repeats` independent draws. Deterministic
/// samplers always run once.
pub fn evaluate(
    scenes: &[Scene],
    hyper: &HeadHyper,
    sampler: &LatentSampler,
    n: usize,
    repeats: usize,
    seed: u64,
) -> Result<EvalReport> {
    let heads = prepare_heads(scenes, hyper)?;
    evaluate_with_heads(scenes, &heads, sampler, n, repeats, seed)
}

/// [`evaluate`] with precomputed head outputs (see [`prepare_heads`]).
pub fn evaluate_with_heads(
    scenes: &[Scene],
    heads: &[Vec<GaussianHead>],
    sampler: &LatentSampler,
    n: usize,
    repeats: usize,
    seed: u64,
) -> Result<EvalReport> {
    if repeats == 0 {
        return Err(Error::invalid("repeats must be at least 1"));
    }
    if scenes.len() != heads.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} head lists", scenes.len()),
            found: format!("{}", heads.len()),
        });
    }
    let repeats = if sampler.is_deterministic() {
        1
    } else {
        repeats
    };
    let per_repeat = (0..repeats)
        .map(|r| single_pass(scenes, heads, sampler, n, derive_seed(&[seed, r as u64])))
        .collect::<Result<Vec<_>>>()?;
    let column = |k: usize| mean_sd(&per_repeat.iter().map(|r| r[k]).collect::<Vec<_>>());
    let (min_ade, sd_ade) = column(0);
    let (min_fde, sd_fde) = column(1);
    let (tcc, sd_tcc) = column(2);
    Ok(EvalReport {
        sampler: sampler.name().to_string(),
        n_samples: n,
        repeats,
        min_ade,
        min_fde,
        tcc,
        sd_ade,
        sd_fde,
        sd_tcc,
        per_repeat,
    })
}
