//! Monte Carlo versus quasi-Monte Carlo integration experiments.
//!
//! Covers the plain sample-mean estimator, the `M/N` bias of a smooth
//! functional of an estimate, error-versus-`n` convergence rates, the
//! expected best-of-`n` ADE of a Gaussian head, and the error versus star
//! discrepancy scatter.

use std::f64::consts::PI;

use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::lds::{
    derive_seed, scrambled_sobol_points, sobol_points, star_discrepancy, PointSet, SamplerKind,
};
use crate::metrics::{ade, mean_sd};
use crate::predictor::{sample_futures, GaussianHead};
use crate::scene::Point;
use crate::transform::box_muller;

const BUMP_WIDTH: f64 = 0.25;

/// A test function on the unit cube with optional closed-form moments.
#[derive(Clone, Copy, Debug)]
pub struct Integrand {
    pub name: &'static str,
    pub dim: usize,
    pub eval: fn(&[f64]) -> f64,
    /// `I(τ)` under the uniform density.
    pub exact: Option<f64>,
    /// `K(τ) = Var τ(x)`.
    pub variance: Option<f64>,
}

fn bump_axis_moments() -> (f64, f64) {
    let w = BUMP_WIDTH;
    let first = w * (2.0 * PI).sqrt() * erf(0.5 / (w * 2f64.sqrt()));
    let second = w * PI.sqrt() * erf(0.5 / w);
    (first, second)
}

impl Integrand {
    pub const NAMES: [&'static str; 4] = ["constant", "x1", "product", "bump"];

    pub fn constant() -> Self {
        Self {
            name: "constant",
            dim: 2,
            eval: |_| 1.0,
            exact: Some(1.0),
            variance: Some(0.0),
        }
    }

    /// `τ(x) = x₁` in one dimension.
    pub fn coordinate() -> Self {
        Self {
            name: "x1",
            dim: 1,
            eval: |x| x[0],
            exact: Some(0.5),
            variance: Some(1.0 / 12.0),
        }
    }

    /// `τ(x) = x₁·x₂`.
    pub fn product() -> Self {
        Self {
            name: "product",
            dim: 2,
            eval: |x| x[0] * x[1],
            exact: Some(0.25),
            variance: Some(1.0 / 9.0 - 1.0 / 16.0),
        }
    }

    /// Isotropic Gaussian bump of width 0.25 centred in the square.
    pub fn gaussian_bump() -> Self {
        let (a, b) = bump_axis_moments();
        Self {
            name: "bump",
            dim: 2,
            eval: |x| {
                let r2 = (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2);
                (-r2 / (2.0 * BUMP_WIDTH * BUMP_WIDTH)).exp()
            },
            exact: Some(a * a),
            variance: Some(b * b - a.powi(4)),
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "constant" => Ok(Self::constant()),
            "x1" => Ok(Self::coordinate()),
            "product" => Ok(Self::product()),
            "bump" => Ok(Self::gaussian_bump()),
            other => Err(Error::invalid(format!(
                "unknown integrand '{other}' (expected one of {:?})",
                Self::NAMES
            ))),
        }
    }

    fn exact_value(&self) -> Result<f64> {
        self.exact.ok_or_else(|| {
            Error::invalid(format!(
                "integrand '{}' has no closed-form value",
                self.name
            ))
        })
    }
}

/// Sample mean of `τ` over the points.
pub fn estimate(tau: &Integrand, ps: &PointSet) -> Result<f64> {
    if ps.dim() != tau.dim {
        return Err(Error::ShapeMismatch {
            expected: format!("dimension {}", tau.dim),
            found: format!("dimension {}", ps.dim()),
        });
    }
    Ok(ps.iter().map(tau.eval).sum::<f64>() / ps.len() as f64)
}

/// A smooth map applied to an estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Functional {
    Linear { slope: f64, intercept: f64 },
    Square,
    Exp,
}

impl Functional {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Functional::Linear { slope, intercept } => slope * x + intercept,
            Functional::Square => x * x,
            Functional::Exp => x.exp(),
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match *self {
            Functional::Linear { .. } => 0.0,
            Functional::Square => 2.0,
            Functional::Exp => x.exp(),
        }
    }
}

/// Points for one trial; the seed is ignored by deterministic generators.
fn trial_points(
    sampler: SamplerKind,
    n: usize,
    dim: usize,
    seed: u64,
    trial: usize,
) -> Result<PointSet> {
    sampler.generate(n, dim, derive_seed(&[seed, trial as u64]))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiasResult {
    pub n: usize,
    pub trials: usize,
    /// Mean of `F(Î) − F(I)` over trials.
    pub empirical_bias: f64,
    /// `M / n`.
    pub predicted_bias: f64,
    pub standard_error: f64,
    /// `M = K·F″(I)/2`.
    pub m_constant: f64,
}

impl BiasResult {
    pub const CSV_HEADER: &'static str =
        "sampler,n,trials,empirical_bias,predicted_bias,standard_error,m_constant";

    pub fn csv_row(&self, sampler: SamplerKind) -> String {
        format!(
            "{sampler},{},{},{},{},{},{}",
            self.n,
            self.trials,
            self.empirical_bias,
            self.predicted_bias,
            self.standard_error,
            self.m_constant
        )
    }

    /// Distance from the prediction in standard errors.
    pub fn z_score(&self) -> f64 {
        (self.empirical_bias - self.predicted_bias) / self.standard_error
    }
}

/// Measures `E[F(Î_n)] − F(I)` over independent randomized point sets and
/// compares it with the second-order prediction `K·F″(I)/(2n)`.
pub fn bias_experiment(
    tau: &Integrand,
    f: Functional,
    n: usize,
    trials: usize,
    sampler: SamplerKind,
    seed: u64,
) -> Result<BiasResult> {
    if trials < 100 {
        return Err(Error::invalid("bias experiments need at least 100 trials"));
    }
    if sampler.is_deterministic() {
        return Err(Error::invalid(format!(
            "sampler '{sampler}' is deterministic; trials would be identical"
        )));
    }
    let exact = tau.exact_value()?;
    let k = tau.variance.ok_or_else(|| {
        Error::invalid(format!(
            "integrand '{}' has no closed-form variance",
            tau.name
        ))
    })?;
    let target = f.value(exact);
    let mut diffs = Vec::with_capacity(trials);
    for t in 0..trials {
        let v = f.value(estimate(tau, &trial_points(sampler, n, tau.dim, seed, t)?)?);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("functional value in trial {t}")));
        }
        diffs.push(v - target);
    }
    let (mean, sd) = mean_sd(&diffs);
    let m = k * f.second_derivative(exact) / 2.0;
    Ok(BiasResult {
        n,
        trials,
        empirical_bias: mean,
        predicted_bias: m / n as f64,
        standard_error: sd / (trials as f64).sqrt(),
        m_constant: m,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub sampler: SamplerKind,
    pub n: usize,
    pub trials: usize,
    pub rms_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `ln rms` against `ln n`, per sampler.
    pub slopes: Vec<(SamplerKind, f64)>,
}

impl ConvergenceTable {
    pub const CSV_HEADER: &'static str = "sampler,n,trials,rms_error,slope";

    pub fn slope(&self, sampler: SamplerKind) -> Option<f64> {
        self.slopes
            .iter()
            .find(|(s, _)| *s == sampler)
            .map(|(_, v)| *v)
    }

    pub fn errors(&self, sampler: SamplerKind) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.sampler == sampler)
            .map(|r| r.rms_error)
            .collect()
    }

    pub fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                let slope = self.slope(r.sampler).unwrap_or(f64::NAN);
                format!(
                    "{},{},{},{},{}",
                    r.sampler, r.n, r.trials, r.rms_error, slope
                )
            })
            .collect()
    }
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// RMS integration error per sampler over a strictly increasing `n` grid.
/// Deterministic samplers run a single trial.
pub fn convergence_study(
    tau: &Integrand,
    samplers: &[SamplerKind],
    grid: &[usize],
    trials: usize,
    seed: u64,
) -> Result<ConvergenceTable> {
    if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] == 0 {
        return Err(Error::invalid(
            "n grid must be positive and strictly increasing",
        ));
    }
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let exact = tau.exact_value()?;
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for &sampler in samplers {
        let t_count = if sampler.is_deterministic() {
            1
        } else {
            trials
        };
        let mut log_n = Vec::new();
        let mut log_e = Vec::new();
        for &n in grid {
            let mut sq = 0.0;
            for t in 0..t_count {
                let e = estimate(tau, &trial_points(sampler, n, tau.dim, seed, t)?)? - exact;
                sq += e * e;
            }
            let rms = (sq / t_count as f64).sqrt();
            rows.push(ConvergenceRow {
                sampler,
                n,
                trials: t_count,
                rms_error: rms,
            });
            log_n.push((n as f64).ln());
            log_e.push(rms.ln());
        }
        let slope = if log_e.iter().all(|v| v.is_finite()) && grid.len() > 1 {
            fit_slope(&log_n, &log_e)
        } else {
            f64::NAN
        };
        slopes.push((sampler, slope));
    }
    Ok(ConvergenceTable { rows, slopes })
}

/// Number of scrambled-Sobol samples behind the dense best-of-`n` reference.
pub const DENSE_SAMPLES: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BestOfNBias {
    pub n: usize,
    pub trials: usize,
    pub mean_min_ade: f64,
    pub sd: f64,
    pub standard_error: f64,
    /// min-ADE over [`DENSE_SAMPLES`] scrambled-Sobol draws.
    pub dense_oracle: f64,
}

impl BestOfNBias {
    pub const CSV_HEADER: &'static str =
        "sampler,n,trials,mean_min_ade,sd,standard_error,dense_oracle";

    pub fn csv_row(&self, sampler: SamplerKind) -> String {
        format!(
            "{sampler},{},{},{},{},{},{}",
            self.n, self.trials, self.mean_min_ade, self.sd, self.standard_error, self.dense_oracle
        )
    }
}

fn min_ade_of(head: &GaussianHead, gt: &[Point], uniforms: &PointSet) -> Result<f64> {
    let z = box_muller(uniforms)?;
    let latent: Vec<[f64; 2]> = z.iter().map(|p| [p[0], p[1]]).collect();
    let set = sample_futures(head, &latent)?;
    let mut best = f64::INFINITY;
    for path in set.iter() {
        best = best.min(ade(path, gt)?);
    }
    Ok(best)
}

/// Expected best-of-`n` ADE for one head and ground truth. Unscrambled Sobol
/// drops the origin as in trajectory evaluation.
pub fn best_of_n_bias(
    head: &GaussianHead,
    gt: &[Point],
    sampler: SamplerKind,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<BestOfNBias> {
    if n == 0 || trials == 0 {
        return Err(Error::invalid("n and trials must be at least 1"));
    }
    let trials = if sampler.is_deterministic() {
        1
    } else {
        trials
    };
    let mut values = Vec::with_capacity(trials);
    for t in 0..trials {
        let ps = match sampler {
            SamplerKind::Sobol => sobol_points(n + 1, 2)?.skip(1)?,
            other => trial_points(other, n, 2, seed, t)?,
        };
        values.push(min_ade_of(head, gt, &ps)?);
    }
    let (mean, sd) = mean_sd(&values);
    let dense = scrambled_sobol_points(DENSE_SAMPLES, 2, derive_seed(&[seed, u64::MAX]))?;
    Ok(BestOfNBias {
        n,
        trials,
        mean_min_ade: mean,
        sd,
        standard_error: sd / (trials as f64).sqrt(),
        dense_oracle: min_ade_of(head, gt, &dense)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScatterPoint {
    pub star_discrepancy: f64,
    pub abs_error: f64,
}

/// Integration error against exact star discrepancy for `trials` point
/// sets of a 2-D integrand.
pub fn discrepancy_scatter(
    tau: &Integrand,
    sampler: SamplerKind,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<Vec<ScatterPoint>> {
    let exact = tau.exact_value()?;
    let trials = if sampler.is_deterministic() {
        1
    } else {
        trials
    };
    (0..trials)
        .map(|t| {
            let ps = trial_points(sampler, n, tau.dim, seed, t)?;
            Ok(ScatterPoint {
                star_discrepancy: star_discrepancy(&ps)?,
                abs_error: (estimate(tau, &ps)? - exact).abs(),
            })
        })
        .collect()
}
