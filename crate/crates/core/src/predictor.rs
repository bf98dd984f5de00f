//! Constant-velocity bivariate Gaussian predictor.
//!
//! The mean extrapolates the average of the last three observed
//! displacements; the covariance per horizon is fitted from training
//! residuals and shared across pedestrians. A single 2-D latent point drives
//! all twelve frames of one sampled future.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scene::{Point, Scene, T_OBS, T_PRED};
use crate::transform::{cholesky_2x2, gaussian_push, Chol2x2};

pub const SIGMA_FLOOR: f64 = 1e-3;
pub const RHO_LIMIT: f64 = 0.99;
const VELOCITY_WINDOW: usize = 3;

/// Per-horizon covariance schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadHyper {
    pub sigma_x: [f64; T_PRED],
    pub sigma_y: [f64; T_PRED],
    pub rho: [f64; T_PRED],
}

impl HeadHyper {
    /// The same isotropic covariance at every horizon.
    pub fn isotropic(sigma: f64) -> Self {
        Self {
            sigma_x: [sigma; T_PRED],
            sigma_y: [sigma; T_PRED],
            rho: [0.0; T_PRED],
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("npsn-head v1\n# horizon sigma_x sigma_y rho\n");
        for t in 0..T_PRED {
            let _ = writeln!(
                out,
                "{} {} {} {}",
                t + 1,
                self.sigma_x[t],
                self.sigma_y[t],
                self.rho[t]
            );
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, message: &str| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: message.to_string(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        if lines.next().map(|(_, l)| l) != Some("npsn-head v1") {
            return Err(err(1, "missing 'npsn-head v1' header"));
        }
        let mut hyper = HeadHyper::isotropic(1.0);
        let mut seen = [false; T_PRED];
        for (line_no, line) in lines {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(err(line_no, "expected 'horizon sigma_x sigma_y rho'"));
            }
            let t: usize = fields[0].parse().map_err(|_| err(line_no, "bad horizon"))?;
            if !(1..=T_PRED).contains(&t) || seen[t - 1] {
                return Err(err(line_no, "horizon out of range or repeated"));
            }
            let vals: Vec<f64> = fields[1..]
                .iter()
                .map(|f| f.parse().map_err(|_| err(line_no, "bad number")))
                .collect::<Result<_>>()?;
            cholesky_2x2(vals[0], vals[1], vals[2]).map_err(|e| err(line_no, &e.to_string()))?;
            hyper.sigma_x[t - 1] = vals[0];
            hyper.sigma_y[t - 1] = vals[1];
            hyper.rho[t - 1] = vals[2];
            seen[t - 1] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(err(0, "not every horizon is present"));
        }
        Ok(hyper)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

/// Constant-velocity mean path for the prediction window.
pub fn extrapolate(obs: &[Point]) -> Result<[Point; T_PRED]> {
    if obs.len() != T_OBS {
        return Err(Error::ShapeMismatch {
            expected: format!("{T_OBS} observed frames"),
            found: format!("{} frames", obs.len()),
        });
    }
    let last = obs[T_OBS - 1];
    let first = obs[T_OBS - 1 - VELOCITY_WINDOW];
    let v = [
        (last[0] - first[0]) / VELOCITY_WINDOW as f64,
        (last[1] - first[1]) / VELOCITY_WINDOW as f64,
    ];
    let mut mu = [[0.0; 2]; T_PRED];
    for (t, m) in mu.iter_mut().enumerate() {
        let k = (t + 1) as f64;
        *m = [last[0] + k * v[0], last[1] + k * v[1]];
    }
    Ok(mu)
}

/// Fits the per-horizon covariance to constant-velocity residuals.
///
/// The head's mean is the extrapolation itself, so the Gaussian maximum
/// likelihood scale is the residual second moment about zero.
pub fn fit_head(scenes: &[Scene]) -> Result<HeadHyper> {
    if scenes.is_empty() {
        return Err(Error::Fit("no training scenes".into()));
    }
    let mut sxx = [0.0; T_PRED];
    let mut syy = [0.0; T_PRED];
    let mut sxy = [0.0; T_PRED];
    let mut count = 0usize;
    for traj in scenes.iter().flat_map(|s| &s.trajectories) {
        let mu = extrapolate(traj.observed())?;
        for (t, (gt, m)) in traj.future().iter().zip(&mu).enumerate() {
            let (rx, ry) = (gt[0] - m[0], gt[1] - m[1]);
            sxx[t] += rx * rx;
            syy[t] += ry * ry;
            sxy[t] += rx * ry;
        }
        count += 1;
    }
    if count < 2 {
        return Err(Error::Fit(format!(
            "need at least 2 residuals per horizon, found {count}"
        )));
    }
    let n = count as f64;
    let mut hyper = HeadHyper::isotropic(SIGMA_FLOOR);
    for t in 0..T_PRED {
        let (vx, vy, cxy) = (sxx[t] / n, syy[t] / n, sxy[t] / n);
        let rho = if vx > 0.0 && vy > 0.0 {
            cxy / (vx * vy).sqrt()
        } else {
            0.0
        };
        hyper.sigma_x[t] = vx.sqrt().max(SIGMA_FLOOR);
        hyper.sigma_y[t] = vy.sqrt().max(SIGMA_FLOOR);
        hyper.rho[t] = rho.clamp(-RHO_LIMIT, RHO_LIMIT);
    }
    Ok(hyper)
}

/// Per-frame Gaussian parameters for one pedestrian.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianHead {
    pub mu: [Point; T_PRED],
    pub sigma_x: [f64; T_PRED],
    pub sigma_y: [f64; T_PRED],
    pub rho: [f64; T_PRED],
    pub chol: [Chol2x2; T_PRED],
}

pub fn predict_head(obs: &[Point], hyper: &HeadHyper) -> Result<GaussianHead> {
    let mu = extrapolate(obs)?;
    let mut chol = [Chol2x2::IDENTITY; T_PRED];
    for (t, c) in chol.iter_mut().enumerate() {
        *c = cholesky_2x2(hyper.sigma_x[t], hyper.sigma_y[t], hyper.rho[t])?;
    }
    Ok(GaussianHead {
        mu,
        sigma_x: hyper.sigma_x,
        sigma_y: hyper.sigma_y,
        rho: hyper.rho,
        chol,
    })
}

/// `N` sampled futures of one pedestrian, `N × T_PRED` points.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionSet {
    data: Vec<Point>,
}

impl PredictionSet {
    pub fn from_trajectories(trajectories: Vec<[Point; T_PRED]>) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(Error::invalid("a prediction set needs at least one sample"));
        }
        Ok(Self {
            data: trajectories.into_iter().flatten().collect(),
        })
    }

    pub fn n_samples(&self) -> usize {
        self.data.len() / T_PRED
    }

    pub fn trajectory(&self, n: usize) -> &[Point] {
        &self.data[n * T_PRED..(n + 1) * T_PRED]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[Point]> + '_ {
        self.data.chunks_exact(T_PRED)
    }
}

/// Pushes each latent point through every frame's Gaussian. The Jacobian of
/// frame `t` with respect to the latent is `head.chol[t].matrix()`.
pub fn sample_futures(head: &GaussianHead, latent: &[[f64; 2]]) -> Result<PredictionSet> {
    if latent.is_empty() {
        return Err(Error::invalid("no latent points"));
    }
    if latent.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("latent point".into()));
    }
    let mut data = Vec::with_capacity(latent.len() * T_PRED);
    for &z in latent {
        data.extend(
            head.mu
                .iter()
                .zip(&head.chol)
                .map(|(&mu, c)| gaussian_push(z, mu, c)),
        );
    }
    Ok(PredictionSet { data })
}
