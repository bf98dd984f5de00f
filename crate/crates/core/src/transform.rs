//! Uniform → standard normal (Box-Muller) and standard normal → bivariate
//! Gaussian (Cholesky pushforward), each with its analytic Jacobian.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::lds::PointSet;

/// Lower clamp applied to the radial uniform before the logarithm.
/// Caps the radius at `sqrt(-2 ln 1e-12) ≈ 7.43`.
pub const UNIFORM_EPS: f64 = 1e-12;

/// `n × s` standard-normal coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalPointSet {
    dim: usize,
    data: Vec<f64>,
}

impl NormalPointSet {
    pub fn from_rows(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.is_empty() || !data.len().is_multiple_of(dim) {
            return Err(Error::ShapeMismatch {
                expected: format!("a non-empty multiple of {dim} coordinates"),
                found: format!("{} coordinates", data.len()),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("normal point set coordinate".into()));
        }
        Ok(Self { dim, data })
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
}

/// One Box-Muller pair. `u_odd` sets the angle, `u_even` the radius.
#[inline]
pub fn box_muller_pair(u_odd: f64, u_even: f64) -> [f64; 2] {
    let r = (-2.0 * u_even.clamp(UNIFORM_EPS, 1.0).ln()).sqrt();
    let (sin, cos) = (TAU * u_odd).sin_cos();
    [r * cos, r * sin]
}

/// `J[i][j] = ∂z_i/∂u_j` with `u = (u_odd, u_even)`.
///
/// The radial derivative is zero inside the lower clamp region and at
/// `u_even = 1`, where the true derivative diverges.
#[inline]
pub fn box_muller_jacobian(u_odd: f64, u_even: f64) -> [[f64; 2]; 2] {
    let clamped = u_even.clamp(UNIFORM_EPS, 1.0);
    let r = (-2.0 * clamped.ln()).sqrt();
    let (sin, cos) = (TAU * u_odd).sin_cos();
    let dr = if u_even < UNIFORM_EPS || r == 0.0 {
        0.0
    } else {
        -1.0 / (clamped * r)
    };
    [[-TAU * r * sin, cos * dr], [TAU * r * cos, sin * dr]]
}

/// Applies Box-Muller to consecutive coordinate pairs `(0,1), (2,3), …`;
/// the first of each pair is the angular uniform.
pub fn box_muller(u: &PointSet) -> Result<NormalPointSet> {
    if !u.dim().is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "Box-Muller needs an even dimension, got {}",
            u.dim()
        )));
    }
    let mut data = Vec::with_capacity(u.as_slice().len());
    for pair in u.as_slice().chunks_exact(2) {
        data.extend(box_muller_pair(pair[0], pair[1]));
    }
    Ok(NormalPointSet { dim: u.dim(), data })
}

/// Lower-triangular factor of a 2×2 covariance matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Chol2x2 {
    pub l11: f64,
    pub l21: f64,
    pub l22: f64,
}

impl Chol2x2 {
    pub const IDENTITY: Chol2x2 = Chol2x2 {
        l11: 1.0,
        l21: 0.0,
        l22: 1.0,
    };

    /// `L·Lᵀ` as `[[a, b], [b, c]]`.
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let b = self.l11 * self.l21;
        [
            [self.l11 * self.l11, b],
            [b, self.l21 * self.l21 + self.l22 * self.l22],
        ]
    }

    /// The factor as a dense matrix; also the Jacobian of [`gaussian_push`] in `z`.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.l11, 0.0], [self.l21, self.l22]]
    }
}

pub fn cholesky_2x2(sigma_x: f64, sigma_y: f64, rho: f64) -> Result<Chol2x2> {
    if !(sigma_x > 0.0 && sigma_x.is_finite() && sigma_y > 0.0 && sigma_y.is_finite()) {
        return Err(Error::invalid(format!(
            "standard deviations must be positive and finite, got ({sigma_x}, {sigma_y})"
        )));
    }
    if rho.is_nan() || rho.abs() >= 1.0 {
        return Err(Error::invalid(format!(
            "correlation must lie in (-1, 1), got {rho}"
        )));
    }
    Ok(Chol2x2 {
        l11: sigma_x,
        l21: rho * sigma_y,
        l22: sigma_y * (1.0 - rho * rho).sqrt(),
    })
}

/// `mu + L·z`.
#[inline]
pub fn gaussian_push(z: [f64; 2], mu: [f64; 2], chol: &Chol2x2) -> [f64; 2] {
    [
        mu[0] + chol.l11 * z[0],
        mu[1] + chol.l21 * z[0] + chol.l22 * z[1],
    ]
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::lds::{mc_points, scrambled_sobol_points};

    const HALF_LOG: f64 = 0.606_530_659_712_633_4; // e^(-1/2)

    #[test]
    fn box_muller_fixed_points() {
        assert_eq!(box_muller_pair(0.37, 1.0).map(f64::abs), [0.0, 0.0]);
        let z = box_muller_pair(0.0, HALF_LOG);
        assert!((z[0] - 1.0).abs() < 1e-15 && z[1].abs() < 1e-15);
        let z = box_muller_pair(0.25, HALF_LOG);
        assert!(z[0].abs() < 1e-15 && (z[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn box_muller_clamps_zero() {
        let z = box_muller_pair(0.0, 0.0);
        assert!((z[0] - (-2.0 * UNIFORM_EPS.ln()).sqrt()).abs() < 1e-12);
        assert!(z[0] < 7.44);
        let j = box_muller_jacobian(0.1, 0.0);
        assert!(j.iter().flatten().all(|v| v.is_finite()));
        assert_eq!(j[0][1], 0.0);
    }

    #[test]
    fn box_muller_rejects_odd_dimension() {
        let u = mc_points(4, 3, 0).unwrap();
        assert!(box_muller(&u).is_err());
        let u = mc_points(4, 4, 0).unwrap();
        assert_eq!(box_muller(&u).unwrap().dim(), 4);
    }

    #[test]
    fn cholesky_examples() {
        assert_eq!(cholesky_2x2(1.0, 1.0, 0.0).unwrap(), Chol2x2::IDENTITY);
        let c = cholesky_2x2(2.0, 1.0, 0.5).unwrap();
        assert_eq!((c.l11, c.l21), (2.0, 0.5));
        assert!((c.l22 - 0.75f64.sqrt()).abs() < 1e-15);
        let cov = c.covariance();
        let expected = [[4.0, 1.0], [1.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((cov[i][j] - expected[i][j]).abs() < 1e-12);
            }
        }
        let near = cholesky_2x2(1.5, 2.0, 0.999_999_999).unwrap();
        assert!(near.l22 > 0.0 && near.l22 < 1e-3);
    }

    #[test]
    fn cholesky_rejects_invalid() {
        assert!(cholesky_2x2(1.0, 1.0, 1.0).is_err());
        assert!(cholesky_2x2(1.0, 1.0, -1.0).is_err());
        assert!(cholesky_2x2(0.0, 1.0, 0.0).is_err());
        assert!(cholesky_2x2(1.0, -2.0, 0.0).is_err());
        assert!(cholesky_2x2(1.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn push_examples() {
        let c = cholesky_2x2(2.0, 1.0, 0.5).unwrap();
        assert_eq!(gaussian_push([0.0, 0.0], [3.0, -1.0], &c), [3.0, -1.0]);
        assert_eq!(
            gaussian_push([1.0, 0.0], [3.0, 4.0], &Chol2x2::IDENTITY),
            [4.0, 4.0]
        );
    }

    #[test]
    fn pushforward_moments() {
        let n = 100_000;
        let c = cholesky_2x2(2.0, 1.0, 0.5).unwrap();
        let z = box_muller(&mc_points(n, 2, 17).unwrap()).unwrap();
        let samples: Vec<[f64; 2]> = z
            .iter()
            .map(|p| gaussian_push([p[0], p[1]], [0.0, 0.0], &c))
            .collect();
        let mean = |k: usize| samples.iter().map(|s| s[k]).sum::<f64>() / n as f64;
        let (mx, my) = (mean(0), mean(1));
        let cov = |a: usize, b: usize, ma: f64, mb: f64| {
            samples
                .iter()
                .map(|s| (s[a] - ma) * (s[b] - mb))
                .sum::<f64>()
                / (n - 1) as f64
        };
        let sxx = cov(0, 0, mx, mx);
        let syy = cov(1, 1, my, my);
        let sxy = cov(0, 1, mx, my);
        assert!((sxx - 4.0).abs() < 0.03 * 4.0, "sxx {sxx}");
        assert!((syy - 1.0).abs() < 0.03, "syy {syy}");
        assert!((sxy - 1.0).abs() < 0.03, "sxy {sxy}");
        // Correlation within 3 standard errors of rho; se ≈ (1 - rho²)/sqrt(n).
        let corr = sxy / (sxx * syy).sqrt();
        assert!(
            (corr - 0.5).abs() < 3.0 * 0.75 / (n as f64).sqrt(),
            "corr {corr}"
        );
    }

    #[test]
    fn sobol_box_muller_moments() {
        let z = box_muller(&scrambled_sobol_points(1 << 14, 2, 5).unwrap()).unwrap();
        for d in 0..2 {
            let mean = z.iter().map(|p| p[d]).sum::<f64>() / z.len() as f64;
            let var = z.iter().map(|p| (p[d] - mean).powi(2)).sum::<f64>() / z.len() as f64;
            assert!(
                mean.abs() < 0.01 && (var - 1.0).abs() < 0.02,
                "{mean} {var}"
            );
        }
    }

    proptest! {
        #[test]
        fn box_muller_jacobian_matches_central_differences(uo in 0.01f64..0.99, ue in 0.01f64..0.99) {
            let h = 1e-6;
            let j = box_muller_jacobian(uo, ue);
            let cols = [
                (box_muller_pair(uo + h, ue), box_muller_pair(uo - h, ue)),
                (box_muller_pair(uo, ue + h), box_muller_pair(uo, ue - h)),
            ];
            for (col, (plus, minus)) in cols.iter().enumerate() {
                for row in 0..2 {
                    let fd = (plus[row] - minus[row]) / (2.0 * h);
                    let scale = j[row][col].abs().max(1.0);
                    prop_assert!((fd - j[row][col]).abs() / scale < 1e-5,
                        "d z{row}/d u{col}: fd {fd} analytic {}", j[row][col]);
                }
            }
        }

        #[test]
        fn push_jacobian_is_the_factor(z0 in -4.0f64..4.0, z1 in -4.0f64..4.0, rho in -0.95f64..0.95) {
            let c = cholesky_2x2(0.7, 1.3, rho).unwrap();
            let h = 1e-6;
            let m = c.matrix();
            for col in 0..2 {
                let mut zp = [z0, z1];
                let mut zm = [z0, z1];
                zp[col] += h;
                zm[col] -= h;
                let (p, q) = (gaussian_push(zp, [1.0, 2.0], &c), gaussian_push(zm, [1.0, 2.0], &c));
                for row in 0..2 {
                    let fd = (p[row] - q[row]) / (2.0 * h);
                    prop_assert!((fd - m[row][col]).abs() < 1e-5 * m[row][col].abs().max(1.0));
                }
            }
        }

        #[test]
        fn cholesky_reproduces_covariance(sx in 1e-3f64..10.0, sy in 1e-3f64..10.0, rho in -0.999f64..0.999) {
            let c = cholesky_2x2(sx, sy, rho).unwrap();
            let cov = c.covariance();
            let expected = [[sx * sx, rho * sx * sy], [rho * sx * sy, sy * sy]];
            for i in 0..2 {
                for j in 0..2 {
                    let scale = expected[i][i].max(expected[j][j]);
                    prop_assert!((cov[i][j] - expected[i][j]).abs() <= 1e-12 * scale);
                }
            }
        }
    }
}
