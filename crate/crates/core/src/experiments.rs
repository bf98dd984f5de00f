//! Sampler comparison and sample-count sweeps over a scene set.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::metrics::{evaluate_with_heads, mean_sd, EvalReport, LatentSampler};
use crate::npsn::NpsnModel;
use crate::predictor::HeadHyper;
use crate::scene::Scene;
use crate::train::prepare_heads;

/// Relative min-FDE improvement over the MC baseline, in percent.
pub fn gain_pct(mc_fde: f64, fde: f64) -> f64 {
    (mc_fde - fde) / mc_fde * 100.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonRow {
    pub report: EvalReport,
    pub gain_pct: f64,
}

impl ComparisonRow {
    pub const CSV_HEADER: &'static str =
        "sampler,n,repeats,min_ade,min_fde,tcc,sd_ade,sd_fde,sd_tcc,gain_pct";

    pub fn csv_row(&self) -> String {
        format!("{},{}", self.report.csv_row(), self.gain_pct)
    }
}

/// Evaluates MC, QMC (scrambled Sobol) and, when given, NPSN at `n` samples.
/// The MC row comes first and anchors the gain column.
pub fn compare_samplers(
    scenes: &[Scene],
    hyper: &HeadHyper,
    npsn: Option<&NpsnModel>,
    n: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<ComparisonRow>> {
    let heads = prepare_heads(scenes, hyper)?;
    let mut samplers = vec![LatentSampler::MC, LatentSampler::QMC];
    if let Some(model) = npsn {
        samplers.push(LatentSampler::npsn(model.clone()));
    }
    let reports = samplers
        .iter()
        .map(|s| evaluate_with_heads(scenes, &heads, s, n, repeats, seed))
        .collect::<Result<Vec<_>>>()?;
    let mc_fde = reports[0].min_fde;
    Ok(reports
        .into_iter()
        .map(|report| ComparisonRow {
            gain_pct: gain_pct(mc_fde, report.min_fde),
            report,
        })
        .collect())
}

/// Best-of-`n` reports for every sampler over a strictly increasing grid.
/// NPSN samplers only report at the sample count they were built for.
pub fn n_sweep(
    scenes: &[Scene],
    hyper: &HeadHyper,
    samplers: &[LatentSampler],
    grid: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<Vec<EvalReport>> {
    if grid.is_empty() || grid[0] == 0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "n grid must be positive and strictly increasing",
        ));
    }
    let heads = prepare_heads(scenes, hyper)?;
    let mut out = Vec::new();
    for &n in grid {
        for sampler in samplers {
            if let LatentSampler::Npsn(m) = sampler {
                if m.config.samples != n {
                    continue;
                }
            }
            out.push(evaluate_with_heads(
                scenes, &heads, sampler, n, repeats, seed,
            )?);
        }
    }
    Ok(out)
}

/// One-sided Welch test p-value for `mean(a) < mean(b)`.
pub fn welch_less_p(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid(
            "Welch's test needs at least two values per group",
        ));
    }
    let (ma, sa) = mean_sd(a);
    let (mb, sb) = mean_sd(b);
    let (va, vb) = (sa * sa / a.len() as f64, sb * sb / b.len() as f64);
    let se = (va + vb).sqrt();
    if se == 0.0 {
        return Ok(if ma < mb { 0.0 } else { 1.0 });
    }
    let df = (va + vb).powi(2) / (va * va / (a.len() - 1) as f64 + vb * vb / (b.len() - 1) as f64);
    let t = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(t.cdf((ma - mb) / se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lds::SamplerKind;
    use crate::npsn::NpsnConfig;
    use crate::predictor::fit_head;
    use crate::scene::{synth_generate, SynthSpec};

    fn data() -> (Vec<Scene>, HeadHyper) {
        let scenes = synth_generate(&SynthSpec {
            n_scenes: 60,
            seed: 11,
            ..SynthSpec::default()
        })
        .unwrap()
        .scenes;
        let hyper = fit_head(&scenes).unwrap();
        (scenes, hyper)
    }

    #[test]
    fn gain_of_baseline_is_zero() {
        assert_eq!(gain_pct(1.3, 1.3), 0.0);
        assert!((gain_pct(2.0, 1.5) - 25.0).abs() < 1e-12);
        let (scenes, hyper) = data();
        let rows = compare_samplers(&scenes, &hyper, None, 20, 5, 1).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].gain_pct, 0.0);
        assert_eq!(rows[1].report.sampler, "qmc");
    }

    #[test]
    fn comparison_requires_matching_checkpoint() {
        let (scenes, hyper) = data();
        let model = NpsnModel::new(NpsnConfig::default(), 0).unwrap();
        let rows = compare_samplers(&scenes, &hyper, Some(&model), 20, 3, 0).unwrap();
        assert_eq!(rows[2].report.repeats, 1);
        assert!(compare_samplers(&scenes, &hyper, Some(&model), 10, 3, 0).is_err());
    }

    #[test]
    fn sweep_is_monotone_and_npsn_rows_match_checkpoint() {
        let (scenes, hyper) = data();
        let one = NpsnModel::new(
            NpsnConfig {
                samples: 1,
                ..NpsnConfig::default()
            },
            0,
        )
        .unwrap();
        let samplers = [
            LatentSampler::MC,
            LatentSampler::Points(SamplerKind::Sobol),
            LatentSampler::npsn(one),
        ];
        let rows = n_sweep(&scenes, &hyper, &samplers, &[1, 4, 16, 64], 20, 3).unwrap();
        let npsn: Vec<_> = rows.iter().filter(|r| r.sampler == "npsn").collect();
        assert_eq!(npsn.len(), 1);
        assert_eq!((npsn[0].n_samples, npsn[0].sd_ade), (1, 0.0));
        for name in ["mc", "sobol"] {
            let ade: Vec<f64> = rows
                .iter()
                .filter(|r| r.sampler == name)
                .map(|r| r.min_ade)
                .collect();
            assert_eq!(ade.len(), 4);
            assert!(ade.windows(2).all(|w| w[1] <= w[0]), "{name}: {ade:?}");
        }
        assert!(n_sweep(&scenes, &hyper, &samplers, &[4, 4], 1, 0).is_err());
    }

    #[test]
    fn welch_detects_shift() {
        let a: Vec<f64> = (0..50).map(|i| (i % 7) as f64 * 0.1).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 0.5).collect();
        assert!(welch_less_p(&a, &b).unwrap() < 1e-6);
        assert!(welch_less_p(&b, &a).unwrap() > 0.999);
        assert!((welch_less_p(&a, &a).unwrap() - 0.5).abs() < 1e-9);
        assert!(welch_less_p(&a[..1], &b).is_err());
    }
}
