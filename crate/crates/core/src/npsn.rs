//! The purposive sampling network.
//!
//! Per pedestrian, the seven observed displacements are embedded by a linear
//! layer with per-channel PReLU. One single-head graph-attention layer over
//! the complete pedestrian graph (self-loops included) mixes the embeddings,
//! followed by ELU. Three linear layers (two with PReLU) and a sigmoid emit
//! `s·N` values in `(0,1)`, read as `N` latent points of dimension `s`.
//!
//! With `hidden = 32`, `s = 2`, `N = 20` the network has exactly 5,128
//! parameters.
//!
//! Gradients are computed by hand: [`NpsnModel::forward_recorded`] stores the
//! activations on a [`Tape`] and [`NpsnModel::backward`] replays them.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scene::{Point, T_OBS};

pub const INPUT_DIM: usize = 2 * (T_OBS - 1);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NpsnConfig {
    pub hidden: usize,
    /// Latent dimension `s` per sample.
    pub latent_dim: usize,
    /// Samples `N` per pedestrian.
    pub samples: usize,
    pub leaky_slope: f64,
}

impl Default for NpsnConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            latent_dim: 2,
            samples: 20,
            leaky_slope: 0.2,
        }
    }
}

impl NpsnConfig {
    pub fn output_dim(&self) -> usize {
        self.latent_dim * self.samples
    }

    fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.latent_dim == 0 || self.samples == 0 {
            return Err(Error::invalid(
                "hidden width, latent dimension and sample count must be positive",
            ));
        }
        if !(self.leaky_slope.is_finite() && self.leaky_slope >= 0.0) {
            return Err(Error::invalid(
                "leaky slope must be finite and non-negative",
            ));
        }
        Ok(())
    }
}

/// Every learnable tensor. Gradients use the same layout.
#[derive(Clone, Debug, PartialEq)]
pub struct NpsnParams {
    pub embed_w: Vec<f64>,
    pub embed_b: Vec<f64>,
    pub embed_slope: Vec<f64>,
    pub gat_w: Vec<f64>,
    pub gat_b: Vec<f64>,
    pub gat_a: Vec<f64>,
    pub head1_w: Vec<f64>,
    pub head1_b: Vec<f64>,
    pub head1_slope: Vec<f64>,
    pub head2_w: Vec<f64>,
    pub head2_b: Vec<f64>,
    pub head2_slope: Vec<f64>,
    pub head3_w: Vec<f64>,
    pub head3_b: Vec<f64>,
}

impl NpsnParams {
    pub fn zeros(cfg: &NpsnConfig) -> Self {
        let h = cfg.hidden;
        let out = cfg.output_dim();
        Self {
            embed_w: vec![0.0; h * INPUT_DIM],
            embed_b: vec![0.0; h],
            embed_slope: vec![0.0; h],
            gat_w: vec![0.0; h * h],
            gat_b: vec![0.0; h],
            gat_a: vec![0.0; 2 * h],
            head1_w: vec![0.0; h * h],
            head1_b: vec![0.0; h],
            head1_slope: vec![0.0; h],
            head2_w: vec![0.0; h * h],
            head2_b: vec![0.0; h],
            head2_slope: vec![0.0; h],
            head3_w: vec![0.0; out * h],
            head3_b: vec![0.0; out],
        }
    }

    /// Named tensors with shapes, in checkpoint order.
    pub fn tensors(&self, cfg: &NpsnConfig) -> [(&'static str, Vec<usize>, &[f64]); 14] {
        let h = cfg.hidden;
        let o = cfg.output_dim();
        [
            ("embed.weight", vec![h, INPUT_DIM], &self.embed_w),
            ("embed.bias", vec![h], &self.embed_b),
            ("embed.prelu", vec![h], &self.embed_slope),
            ("gat.weight", vec![h, h], &self.gat_w),
            ("gat.bias", vec![h], &self.gat_b),
            ("gat.attention", vec![2 * h], &self.gat_a),
            ("head1.weight", vec![h, h], &self.head1_w),
            ("head1.bias", vec![h], &self.head1_b),
            ("head1.prelu", vec![h], &self.head1_slope),
            ("head2.weight", vec![h, h], &self.head2_w),
            ("head2.bias", vec![h], &self.head2_b),
            ("head2.prelu", vec![h], &self.head2_slope),
            ("head3.weight", vec![o, h], &self.head3_w),
            ("head3.bias", vec![o], &self.head3_b),
        ]
    }

    /// Mutable views in the same order as [`NpsnParams::tensors`].
    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 14] {
        [
            &mut self.embed_w,
            &mut self.embed_b,
            &mut self.embed_slope,
            &mut self.gat_w,
            &mut self.gat_b,
            &mut self.gat_a,
            &mut self.head1_w,
            &mut self.head1_b,
            &mut self.head1_slope,
            &mut self.head2_w,
            &mut self.head2_b,
            &mut self.head2_slope,
            &mut self.head3_w,
            &mut self.head3_b,
        ]
    }

    fn flat(&self) -> impl Iterator<Item = &f64> {
        [
            &self.embed_w,
            &self.embed_b,
            &self.embed_slope,
            &self.gat_w,
            &self.gat_b,
            &self.gat_a,
            &self.head1_w,
            &self.head1_b,
            &self.head1_slope,
            &self.head2_w,
            &self.head2_b,
            &self.head2_slope,
            &self.head3_w,
            &self.head3_b,
        ]
        .into_iter()
        .flatten()
    }

    pub fn count(&self) -> usize {
        self.flat().count()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.flat().copied().collect()
    }

    pub fn flat_get_mut(&mut self, mut index: usize) -> &mut f64 {
        for t in self.tensors_mut() {
            if index < t.len() {
                return &mut t[index];
            }
            index -= t.len();
        }
        panic!("parameter index out of range");
    }

    /// `self += scale · other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &NpsnParams, scale: f64) {
        let others = [
            &other.embed_w,
            &other.embed_b,
            &other.embed_slope,
            &other.gat_w,
            &other.gat_b,
            &other.gat_a,
            &other.head1_w,
            &other.head1_b,
            &other.head1_slope,
            &other.head2_w,
            &other.head2_b,
            &other.head2_slope,
            &other.head3_w,
            &other.head3_b,
        ];
        for (dst, src) in self.tensors_mut().into_iter().zip(others) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.flat().all(|v| v.is_finite())
    }
}

/// Network output: `L × s × N` values in `(0,1)`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleTensor {
    pub pedestrians: usize,
    pub latent_dim: usize,
    pub samples: usize,
    pub values: Vec<f64>,
}

impl SampleTensor {
    pub fn zeros(pedestrians: usize, latent_dim: usize, samples: usize) -> Self {
        Self {
            pedestrians,
            latent_dim,
            samples,
            values: vec![0.0; pedestrians * latent_dim * samples],
        }
    }

    #[inline]
    pub fn index(&self, l: usize, d: usize, n: usize) -> usize {
        (l * self.latent_dim + d) * self.samples + n
    }

    #[inline]
    pub fn get(&self, l: usize, d: usize, n: usize) -> f64 {
        self.values[self.index(l, d, n)]
    }

    /// Sample `n` of pedestrian `l` as an `s`-vector.
    pub fn sample(&self, l: usize, n: usize) -> Vec<f64> {
        (0..self.latent_dim).map(|d| self.get(l, d, n)).collect()
    }

    fn same_shape(&self, other: &SampleTensor) -> bool {
        self.pedestrians == other.pedestrians
            && self.latent_dim == other.latent_dim
            && self.samples == other.samples
            && self.values.len() == other.values.len()
    }
}

/// Activations stored by a recorded forward pass.
#[derive(Clone, Debug, Default)]
pub struct Tape {
    cache: Option<Cache>,
}

impl Tape {
    pub fn is_recorded(&self) -> bool {
        self.cache.is_some()
    }

    pub fn clear(&mut self) {
        self.cache = None;
    }

    /// Attention weights `α[i][j]` of the last recorded pass.
    pub fn attention(&self) -> Option<Vec<Vec<f64>>> {
        let c = self.cache.as_ref()?;
        Some(c.alpha.chunks(c.l).map(<[f64]>::to_vec).collect())
    }
}

#[derive(Clone, Debug)]
struct Cache {
    l: usize,
    x: Vec<f64>,
    e_pre: Vec<f64>,
    e: Vec<f64>,
    g: Vec<f64>,
    score_pre: Vec<f64>,
    alpha: Vec<f64>,
    agg: Vec<f64>,
    gat: Vec<f64>,
    m1_pre: Vec<f64>,
    m1: Vec<f64>,
    m2_pre: Vec<f64>,
    m2: Vec<f64>,
    out: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NpsnModel {
    pub config: NpsnConfig,
    pub params: NpsnParams,
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize, len: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..len).map(|_| rng.gen_range(-limit..limit)).collect()
}

/// `out[r] = b[r] + Σ_c w[r, c]·x[c]` for each row of `x`.
fn linear(w: &[f64], b: &[f64], x: &[f64], in_dim: usize) -> Vec<f64> {
    let out_dim = b.len();
    let rows = x.len() / in_dim;
    let mut out = Vec::with_capacity(rows * out_dim);
    for xr in x.chunks_exact(in_dim) {
        for (r, wr) in w.chunks_exact(in_dim).enumerate() {
            out.push(b[r] + wr.iter().zip(xr).map(|(a, b)| a * b).sum::<f64>());
        }
    }
    out
}

/// Accumulates weight/bias gradients and returns the input gradient.
fn linear_backward(
    w: &[f64],
    x: &[f64],
    dy: &[f64],
    in_dim: usize,
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let out_dim = db.len();
    let mut dx = vec![0.0; x.len()];
    for ((xr, dyr), dxr) in x
        .chunks_exact(in_dim)
        .zip(dy.chunks_exact(out_dim))
        .zip(dx.chunks_exact_mut(in_dim))
    {
        for (r, &g) in dyr.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            db[r] += g;
            let wr = &w[r * in_dim..(r + 1) * in_dim];
            let dwr = &mut dw[r * in_dim..(r + 1) * in_dim];
            for c in 0..in_dim {
                dwr[c] += g * xr[c];
                dxr[c] += g * wr[c];
            }
        }
    }
    dx
}

fn prelu(pre: &[f64], slope: &[f64]) -> Vec<f64> {
    let h = slope.len();
    pre.iter()
        .enumerate()
        .map(|(i, &v)| if v > 0.0 { v } else { slope[i % h] * v })
        .collect()
}

fn prelu_backward(pre: &[f64], slope: &[f64], dy: &[f64], dslope: &mut [f64]) -> Vec<f64> {
    let h = slope.len();
    pre.iter()
        .zip(dy)
        .enumerate()
        .map(|(i, (&v, &g))| {
            if v > 0.0 {
                g
            } else {
                dslope[i % h] += g * v;
                g * slope[i % h]
            }
        })
        .collect()
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

/// Flattened displacement input for one observed window.
pub fn displacement_features(obs: &[Point]) -> Result<[f64; INPUT_DIM]> {
    if obs.len() != T_OBS {
        return Err(Error::ShapeMismatch {
            expected: format!("{T_OBS} observed frames"),
            found: format!("{} frames", obs.len()),
        });
    }
    let mut x = [0.0; INPUT_DIM];
    for (t, w) in obs.windows(2).enumerate() {
        x[2 * t] = w[1][0] - w[0][0];
        x[2 * t + 1] = w[1][1] - w[0][1];
    }
    Ok(x)
}

impl NpsnModel {
    /// Glorot-uniform weights, zero biases, PReLU slopes 0.25.
    pub fn new(config: NpsnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = config.hidden;
        let o = config.output_dim();
        let mut p = NpsnParams::zeros(&config);
        p.embed_w = glorot(&mut rng, INPUT_DIM, h, h * INPUT_DIM);
        p.gat_w = glorot(&mut rng, h, h, h * h);
        p.gat_a = glorot(&mut rng, 2 * h, 1, 2 * h);
        p.head1_w = glorot(&mut rng, h, h, h * h);
        p.head2_w = glorot(&mut rng, h, h, h * h);
        p.head3_w = glorot(&mut rng, h, o, o * h);
        for slope in [&mut p.embed_slope, &mut p.head1_slope, &mut p.head2_slope] {
            slope.fill(0.25);
        }
        Ok(Self { config, params: p })
    }

    pub fn parameter_count(&self) -> usize {
        self.params.count()
    }

    /// Embedding of a single pedestrian history (no attention).
    pub fn embed_history(&self, obs: &[Point]) -> Result<Vec<f64>> {
        let x = displacement_features(obs)?;
        let p = &self.params;
        Ok(prelu(
            &linear(&p.embed_w, &p.embed_b, &x, INPUT_DIM),
            &p.embed_slope,
        ))
    }

    /// Graph attention over `L × hidden` features; returns the mixed
    /// features and the `L × L` attention matrix.
    pub fn gat_layer(&self, features: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h = self.config.hidden;
        let p = &self.params;
        let g = linear(&p.gat_w, &p.gat_b, features, h);
        let (_, alpha, agg) = self.attend(&g);
        (agg.iter().map(|&v| elu(v)).collect(), alpha)
    }

    fn attend(&self, g: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let h = self.config.hidden;
        let l = g.len() / h;
        let (a_src, a_dst) = self.params.gat_a.split_at(h);
        let dot = |a: &[f64], v: &[f64]| a.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
        let src: Vec<f64> = g.chunks_exact(h).map(|gi| dot(a_src, gi)).collect();
        let dst: Vec<f64> = g.chunks_exact(h).map(|gj| dot(a_dst, gj)).collect();
        let mut score_pre = vec![0.0; l * l];
        let mut alpha = vec![0.0; l * l];
        let slope = self.config.leaky_slope;
        for i in 0..l {
            let row = &mut score_pre[i * l..(i + 1) * l];
            for j in 0..l {
                row[j] = src[i] + dst[j];
            }
            let scores: Vec<f64> = row
                .iter()
                .map(|&t| if t > 0.0 { t } else { slope * t })
                .collect();
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let total: f64 = exps.iter().sum();
            for j in 0..l {
                alpha[i * l + j] = exps[j] / total;
            }
        }
        let mut agg = vec![0.0; l * h];
        for i in 0..l {
            for j in 0..l {
                let a = alpha[i * l + j];
                for k in 0..h {
                    agg[i * h + k] += a * g[j * h + k];
                }
            }
        }
        (score_pre, alpha, agg)
    }

    fn run(&self, observations: &[&[Point]]) -> Result<Cache> {
        if observations.is_empty() {
            return Err(Error::invalid("scene has no pedestrians"));
        }
        let h = self.config.hidden;
        let p = &self.params;
        let l = observations.len();
        let mut x = Vec::with_capacity(l * INPUT_DIM);
        for obs in observations {
            x.extend(displacement_features(obs)?);
        }
        let e_pre = linear(&p.embed_w, &p.embed_b, &x, INPUT_DIM);
        let e = prelu(&e_pre, &p.embed_slope);
        let g = linear(&p.gat_w, &p.gat_b, &e, h);
        let (score_pre, alpha, agg) = self.attend(&g);
        let gat: Vec<f64> = agg.iter().map(|&v| elu(v)).collect();
        let m1_pre = linear(&p.head1_w, &p.head1_b, &gat, h);
        let m1 = prelu(&m1_pre, &p.head1_slope);
        let m2_pre = linear(&p.head2_w, &p.head2_b, &m1, h);
        let m2 = prelu(&m2_pre, &p.head2_slope);
        let out: Vec<f64> = linear(&p.head3_w, &p.head3_b, &m2, h)
            .into_iter()
            .map(sigmoid)
            .collect();
        Ok(Cache {
            l,
            x,
            e_pre,
            e,
            g,
            score_pre,
            alpha,
            agg,
            gat,
            m1_pre,
            m1,
            m2_pre,
            m2,
            out,
        })
    }

    fn to_samples(&self, l: usize, out: Vec<f64>) -> SampleTensor {
        SampleTensor {
            pedestrians: l,
            latent_dim: self.config.latent_dim,
            samples: self.config.samples,
            values: out,
        }
    }

    /// Latent samples for every pedestrian of a scene.
    pub fn forward(&self, observations: &[&[Point]]) -> Result<SampleTensor> {
        let cache = self.run(observations)?;
        Ok(self.to_samples(cache.l, cache.out))
    }

    /// As [`NpsnModel::forward`], keeping activations for [`NpsnModel::backward`].
    pub fn forward_recorded(
        &self,
        observations: &[&[Point]],
        tape: &mut Tape,
    ) -> Result<SampleTensor> {
        let cache = self.run(observations)?;
        let samples = self.to_samples(cache.l, cache.out.clone());
        tape.cache = Some(cache);
        Ok(samples)
    }

    /// Parameter gradients given `∂loss/∂samples` for the recorded pass.
    pub fn backward(&self, tape: &Tape, grad: &SampleTensor) -> Result<NpsnParams> {
        let c = tape.cache.as_ref().ok_or(Error::NoForwardPass)?;
        let expected = self.to_samples(c.l, vec![0.0; c.out.len()]);
        if !expected.same_shape(grad) {
            return Err(Error::ShapeMismatch {
                expected: format!(
                    "{} x {} x {}",
                    c.l, self.config.latent_dim, self.config.samples
                ),
                found: format!(
                    "{} x {} x {}",
                    grad.pedestrians, grad.latent_dim, grad.samples
                ),
            });
        }
        let h = self.config.hidden;
        let l = c.l;
        let p = &self.params;
        let mut d = NpsnParams::zeros(&self.config);

        let d_out_pre: Vec<f64> = grad
            .values
            .iter()
            .zip(&c.out)
            .map(|(g, y)| g * y * (1.0 - y))
            .collect();
        let d_m2 = linear_backward(
            &p.head3_w,
            &c.m2,
            &d_out_pre,
            h,
            &mut d.head3_w,
            &mut d.head3_b,
        );
        let d_m2_pre = prelu_backward(&c.m2_pre, &p.head2_slope, &d_m2, &mut d.head2_slope);
        let d_m1 = linear_backward(
            &p.head2_w,
            &c.m1,
            &d_m2_pre,
            h,
            &mut d.head2_w,
            &mut d.head2_b,
        );
        let d_m1_pre = prelu_backward(&c.m1_pre, &p.head1_slope, &d_m1, &mut d.head1_slope);
        let d_gat = linear_backward(
            &p.head1_w,
            &c.gat,
            &d_m1_pre,
            h,
            &mut d.head1_w,
            &mut d.head1_b,
        );
        let d_agg: Vec<f64> = d_gat
            .iter()
            .zip(&c.agg)
            .map(|(g, &v)| if v > 0.0 { *g } else { g * v.exp() })
            .collect();

        // agg_i = Σ_j α_ij g_j
        let mut d_g = vec![0.0; l * h];
        let mut d_alpha = vec![0.0; l * l];
        for i in 0..l {
            for j in 0..l {
                let a = c.alpha[i * l + j];
                let mut dot = 0.0;
                for k in 0..h {
                    d_g[j * h + k] += a * d_agg[i * h + k];
                    dot += d_agg[i * h + k] * c.g[j * h + k];
                }
                d_alpha[i * l + j] = dot;
            }
        }
        // Softmax rows, then the leaky rectifier, then the additive score.
        let (a_src, a_dst) = p.gat_a.split_at(h);
        let (da_src, da_dst) = d.gat_a.split_at_mut(h);
        let slope = self.config.leaky_slope;
        for i in 0..l {
            let row = i * l..(i + 1) * l;
            let weighted: f64 = c.alpha[row.clone()]
                .iter()
                .zip(&d_alpha[row.clone()])
                .map(|(a, g)| a * g)
                .sum();
            for j in 0..l {
                let a = c.alpha[i * l + j];
                let d_score = a * (d_alpha[i * l + j] - weighted);
                let t = c.score_pre[i * l + j];
                let d_t = if t > 0.0 { d_score } else { slope * d_score };
                if d_t == 0.0 {
                    continue;
                }
                for k in 0..h {
                    da_src[k] += d_t * c.g[i * h + k];
                    da_dst[k] += d_t * c.g[j * h + k];
                    d_g[i * h + k] += d_t * a_src[k];
                    d_g[j * h + k] += d_t * a_dst[k];
                }
            }
        }
        let d_e = linear_backward(&p.gat_w, &c.e, &d_g, h, &mut d.gat_w, &mut d.gat_b);
        let d_e_pre = prelu_backward(&c.e_pre, &p.embed_slope, &d_e, &mut d.embed_slope);
        linear_backward(
            &p.embed_w,
            &c.x,
            &d_e_pre,
            INPUT_DIM,
            &mut d.embed_w,
            &mut d.embed_b,
        );
        Ok(d)
    }

    /// Text checkpoint; floats use shortest round-trip formatting so a
    /// save/load cycle is bit exact.
    pub fn to_checkpoint(&self) -> String {
        let c = &self.config;
        let mut out = format!(
            "npsn-checkpoint v1\nconfig hidden={} latent_dim={} samples={} leaky_slope={}\n",
            c.hidden, c.latent_dim, c.samples, c.leaky_slope
        );
        for (name, shape, data) in self.params.tensors(c) {
            let dims: Vec<String> = shape.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "tensor {name} {}", dims.join(" "));
            let vals: Vec<String> = data.iter().map(ToString::to_string).collect();
            out.push_str(&vals.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_checkpoint(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        if lines.next().map(|(_, l)| l) != Some("npsn-checkpoint v1") {
            return Err(err(1, "missing 'npsn-checkpoint v1' header".into()));
        }
        let (line_no, cfg_line) = lines
            .next()
            .ok_or_else(|| err(2, "missing config line".into()))?;
        let mut config = NpsnConfig::default();
        let mut fields = cfg_line.split_whitespace();
        if fields.next() != Some("config") {
            return Err(err(line_no, "expected config line".into()));
        }
        for kv in fields {
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| err(line_no, format!("bad config entry '{kv}'")))?;
            let bad = |_| err(line_no, format!("bad value for {key}"));
            match key {
                "hidden" => config.hidden = value.parse().map_err(bad)?,
                "latent_dim" => config.latent_dim = value.parse().map_err(bad)?,
                "samples" => config.samples = value.parse().map_err(bad)?,
                "leaky_slope" => {
                    config.leaky_slope = value
                        .parse()
                        .map_err(|_| err(line_no, "bad leaky_slope".into()))?
                }
                other => return Err(err(line_no, format!("unknown config key '{other}'"))),
            }
        }
        config.validate().map_err(|e| err(line_no, e.to_string()))?;
        let mut model = NpsnModel {
            config,
            params: NpsnParams::zeros(&config),
        };
        let expected: Vec<(&str, Vec<usize>)> = model
            .params
            .tensors(&config)
            .into_iter()
            .map(|(n, s, _)| (n, s))
            .collect();
        for ((name, shape), dst) in expected.into_iter().zip(model.params.tensors_mut()) {
            let (line_no, header) = lines
                .next()
                .ok_or_else(|| err(0, format!("missing tensor {name}")))?;
            let want = format!(
                "tensor {name} {}",
                shape
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join(" ")
            );
            if header != want {
                return Err(err(line_no, format!("expected '{want}', found '{header}'")));
            }
            let (line_no, body) = lines
                .next()
                .ok_or_else(|| err(line_no, format!("missing values for {name}")))?;
            let values: Vec<f64> = body
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| err(line_no, format!("bad value in {name}")))?;
            if values.len() != dst.len() {
                return Err(err(
                    line_no,
                    format!(
                        "{name}: expected {} values, found {}",
                        dst.len(),
                        values.len()
                    ),
                ));
            }
            *dst = values;
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_checkpoint()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint(&text, path)
    }
}
