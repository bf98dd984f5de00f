//! Point sets in the unit cube: pseudo-random, Sobol (plain and
//! Owen-scrambled) and Halton generators, plus quality measures.

mod discrepancy;
mod halton;
mod sobol;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use discrepancy::{
    min_pairwise_distance, report, star_discrepancy, star_discrepancy_bound, DiscrepancyReport,
    EXACT_DISCREPANCY_MAX_POINTS,
};
pub use halton::{halton_points, radical_inverse, HALTON_MAX_DIM, PRIMES};
pub use sobol::{scrambled_sobol_points, sobol_points, SobolState, SOBOL_MAX_DIM};

/// `n` points in `[0,1)^dim`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    dim: usize,
    data: Vec<f64>,
}

impl PointSet {
    /// Builds a point set from row-major coordinates, checking the `[0,1)` contract.
    pub fn from_rows(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("point dimension must be at least 1"));
        }
        if data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::ShapeMismatch {
                expected: format!("a non-empty multiple of {dim} coordinates"),
                found: format!("{} coordinates", data.len()),
            });
        }
        if let Some(bad) = data.iter().find(|x| !(0.0..1.0).contains(*x)) {
            return Err(Error::invalid(format!(
                "coordinate {bad} lies outside [0,1)"
            )));
        }
        Ok(Self { dim, data })
    }

    pub(crate) fn from_rows_unchecked(dim: usize, data: Vec<f64>) -> Self {
        debug_assert!(dim > 0 && !data.is_empty() && data.len().is_multiple_of(dim));
        Self { dim, data }
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Drops the first `k` points.
    pub fn skip(&self, k: usize) -> Result<Self> {
        if k >= self.len() {
            return Err(Error::invalid(format!(
                "cannot skip {k} of {} points",
                self.len()
            )));
        }
        Ok(Self {
            dim: self.dim,
            data: self.data[k * self.dim..].to_vec(),
        })
    }
}

fn check_shape(n: usize, dim: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("point count must be at least 1"));
    }
    if dim == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    Ok(())
}

/// Combines several integers into one well-mixed seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243f_6a88_85a3_08d3, |acc, &p| {
        sobol::mix64(acc ^ sobol::mix64(p))
    })
}

/// IID uniform points from a seeded ChaCha8 stream.
pub fn mc_points(n: usize, dim: usize, seed: u64) -> Result<PointSet> {
    check_shape(n, dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * dim).map(|_| rng.gen::<f64>()).collect();
    Ok(PointSet::from_rows_unchecked(dim, data))
}

/// The point generators exposed on the command line and to experiments.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    /// Pseudo-random IID points.
    Mc,
    /// Unscrambled Sobol; deterministic.
    Sobol,
    /// Owen-scrambled Sobol.
    ScrambledSobol,
    /// Halton; deterministic.
    Halton,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 4] = [
        SamplerKind::Mc,
        SamplerKind::Sobol,
        SamplerKind::ScrambledSobol,
        SamplerKind::Halton,
    ];

    pub fn is_deterministic(self) -> bool {
        matches!(self, SamplerKind::Sobol | SamplerKind::Halton)
    }

    /// Generates `n` points; `seed` is ignored by the deterministic generators.
    pub fn generate(self, n: usize, dim: usize, seed: u64) -> Result<PointSet> {
        match self {
            SamplerKind::Mc => mc_points(n, dim, seed),
            SamplerKind::Sobol => sobol_points(n, dim),
            SamplerKind::ScrambledSobol => scrambled_sobol_points(n, dim, seed),
            SamplerKind::Halton => halton_points(n, dim),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Mc => "mc",
            SamplerKind::Sobol => "sobol",
            SamplerKind::ScrambledSobol => "ssobol",
            SamplerKind::Halton => "halton",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc" => Ok(SamplerKind::Mc),
            "sobol" => Ok(SamplerKind::Sobol),
            "ssobol" | "qmc" => Ok(SamplerKind::ScrambledSobol),
            "halton" => Ok(SamplerKind::Halton),
            other => Err(Error::invalid(format!("unknown sampler '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mc_mean_near_half() {
        for seed in 0..5 {
            let ps = mc_points(1000, 2, seed).unwrap();
            for d in 0..2 {
                let mean = ps.iter().map(|p| p[d]).sum::<f64>() / 1000.0;
                assert!((mean - 0.5).abs() < 0.03, "seed {seed} dim {d}: {mean}");
            }
        }
    }

    #[test]
    fn mc_is_seed_deterministic() {
        assert_eq!(mc_points(5, 2, 7).unwrap(), mc_points(5, 2, 7).unwrap());
        assert_ne!(mc_points(5, 2, 7).unwrap(), mc_points(5, 2, 8).unwrap());
    }

    #[test]
    fn mc_range_and_errors() {
        let ps = mc_points(20, 2, 3).unwrap();
        assert!(ps.as_slice().iter().all(|x| (0.0..1.0).contains(x)));
        assert!(mc_points(0, 2, 0).is_err());
        assert!(mc_points(3, 0, 0).is_err());
    }

    #[test]
    fn point_set_rejects_out_of_range() {
        assert!(PointSet::from_rows(2, vec![0.1, 1.0]).is_err());
        assert!(PointSet::from_rows(2, vec![0.1, 0.2, 0.3]).is_err());
        assert!(PointSet::from_rows(0, vec![]).is_err());
        let ps = PointSet::from_rows(2, vec![0.0, 0.5, 0.25, 0.75]).unwrap();
        assert_eq!(ps.len(), 2);
        assert_eq!(ps.point(1), &[0.25, 0.75]);
        assert_eq!(ps.skip(1).unwrap().point(0), &[0.25, 0.75]);
    }

    #[test]
    fn sampler_names_round_trip() {
        for kind in SamplerKind::ALL {
            assert_eq!(kind.name().parse::<SamplerKind>().unwrap(), kind);
        }
        assert!("zig".parse::<SamplerKind>().is_err());
    }
}
