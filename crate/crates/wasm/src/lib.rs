//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each exported operation has a plain Rust counterpart so it can be tested
//! natively; the `#[wasm_bindgen]` wrappers only convert errors.

use std::str::FromStr;

use npsn_core::biaslab::{convergence_study, Integrand};
use npsn_core::lds::{min_pairwise_distance, star_discrepancy, SamplerKind};
use npsn_core::metrics::{best_of_n, LatentSampler};
use npsn_core::predictor::{fit_head, predict_head, sample_futures, HeadHyper};
use npsn_core::scene::{synth_generate, Scene, SynthSpec};
use npsn_core::train::latent_normals;
use npsn_core::Result;
use wasm_bindgen::prelude::*;

fn js(e: npsn_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// A 2-D point set with its quality measures.
#[wasm_bindgen]
pub struct PointSetView {
    points: Vec<f64>,
    star_discrepancy: f64,
    min_distance: f64,
}

#[wasm_bindgen]
impl PointSetView {
    /// Row-major `x0, y0, x1, y1, …`.
    #[wasm_bindgen(getter)]
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }

    #[wasm_bindgen(getter, js_name = starDiscrepancy)]
    pub fn star_discrepancy(&self) -> f64 {
        self.star_discrepancy
    }

    #[wasm_bindgen(getter, js_name = minDistance)]
    pub fn min_distance(&self) -> f64 {
        self.min_distance
    }
}

pub fn build_point_set(sampler: &str, n: usize, seed: u64) -> Result<PointSetView> {
    let ps = SamplerKind::from_str(sampler)?.generate(n, 2, seed)?;
    Ok(PointSetView {
        star_discrepancy: star_discrepancy(&ps)?,
        min_distance: if n >= 2 { min_pairwise_distance(&ps)? } else { f64::NAN },
        points: ps.into_vec(),
    })
}

#[wasm_bindgen(js_name = pointSet)]
pub fn point_set(sampler: &str, n: usize, seed: u32) -> std::result::Result<PointSetView, JsError> {
    build_point_set(sampler, n, seed.into()).map_err(js)
}

/// One pedestrian's observed track, ground truth and sampled futures.
#[wasm_bindgen]
pub struct Prediction {
    observed: Vec<f64>,
    future: Vec<f64>,
    samples: Vec<f64>,
    best: usize,
    min_ade: f64,
    min_fde: f64,
}

#[wasm_bindgen]
impl Prediction {
    #[wasm_bindgen(getter)]
    pub fn observed(&self) -> Vec<f64> {
        self.observed.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn future(&self) -> Vec<f64> {
        self.future.clone()
    }

    /// `n × 12` points, flattened sample by sample.
    #[wasm_bindgen(getter)]
    pub fn samples(&self) -> Vec<f64> {
        self.samples.clone()
    }

    /// Index of the sample with the smallest ADE.
    #[wasm_bindgen(getter)]
    pub fn best(&self) -> usize {
        self.best
    }

    #[wasm_bindgen(getter, js_name = minAde)]
    pub fn min_ade(&self) -> f64 {
        self.min_ade
    }

    #[wasm_bindgen(getter, js_name = minFde)]
    pub fn min_fde(&self) -> f64 {
        self.min_fde
    }
}

/// Synthetic branching scenes with a head fitted on them.
#[wasm_bindgen]
pub struct Playground {
    scenes: Vec<Scene>,
    hyper: HeadHyper,
}

impl Playground {
    pub fn build(n_scenes: usize, seed: u64) -> Result<Self> {
        let scenes = synth_generate(&SynthSpec {
            n_scenes,
            seed,
            ..SynthSpec::default()
        })?
        .scenes;
        let hyper = fit_head(&scenes)?;
        Ok(Self { scenes, hyper })
    }

    pub fn predict_native(&self, scene: usize, sampler: &str, n: usize, seed: u64) -> Result<Prediction> {
        let scene = self
            .scenes
            .get(scene)
            .ok_or_else(|| npsn_core::Error::InvalidArgument(format!("scene {scene} out of range")))?;
        let traj = &scene.trajectories[0];
        let head = predict_head(traj.observed(), &self.hyper)?;
        let latent = LatentSampler::Points(SamplerKind::from_str(sampler)?).draw(scene, n, seed)?;
        let set = sample_futures(&head, &latent_normals(&latent, 0)?)?;
        let score = best_of_n(&set, traj.future())?;
        let ade = |p: &[[f64; 2]]| -> f64 {
            p.iter().zip(traj.future()).map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1])).sum()
        };
        let best = (0..set.n_samples()).fold(0, |b, k| {
            if ade(set.trajectory(k)) < ade(set.trajectory(b)) {
                k
            } else {
                b
            }
        });
        Ok(Prediction {
            observed: traj.observed().iter().flatten().copied().collect(),
            future: traj.future().iter().flatten().copied().collect(),
            samples: set.iter().flatten().flatten().copied().collect(),
            best,
            min_ade: score.min_ade,
            min_fde: score.min_fde,
        })
    }
}

#[wasm_bindgen]
impl Playground {
    #[wasm_bindgen(constructor)]
    pub fn new(n_scenes: usize, seed: u32) -> std::result::Result<Playground, JsError> {
        Self::build(n_scenes, seed.into()).map_err(js)
    }

    #[wasm_bindgen(getter, js_name = sceneCount)]
    pub fn scene_count(&self) -> usize {
        self.scenes.len()
    }

    /// Futures for the first pedestrian of `scene`.
    pub fn predict(&self, scene: usize, sampler: &str, n: usize, seed: u32) -> std::result::Result<Prediction, JsError> {
        self.predict_native(scene, sampler, n, seed.into()).map_err(js)
    }
}

pub fn convergence_native(sampler: &str, trials: usize, seed: u64) -> Result<Vec<f64>> {
    let kind = SamplerKind::from_str(sampler)?;
    let grid: Vec<usize> = (4..=11).map(|k| 1 << k).collect();
    let table = convergence_study(&Integrand::product(), &[kind], &grid, trials, seed)?;
    Ok(table.rows.iter().flat_map(|r| [r.n as f64, r.rms_error]).collect())
}

/// RMS integration error of `x1·x2` for n = 16…2048, as `n0, e0, n1, e1, …`.
#[wasm_bindgen]
pub fn convergence(sampler: &str, trials: usize, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
    convergence_native(sampler, trials, seed.into()).map_err(js)
}
