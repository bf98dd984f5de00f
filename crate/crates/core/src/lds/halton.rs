use super::{check_shape, PointSet};
use crate::error::{Error, Result};

pub const HALTON_MAX_DIM: usize = 16;

pub const PRIMES: [u64; HALTON_MAX_DIM] =
    [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `index` in `base`: digits mirrored about the radix point.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv_base = 1.0 / base as f64;
    let mut scale = inv_base;
    let mut value = 0.0;
    while index > 0 {
        value += (index % base) as f64 * scale;
        index /= base;
        scale *= inv_base;
    }
    // Rounding can push the sum to 1.0 for very long digit strings.
    value.min(1.0 - f64::EPSILON / 2.0)
}

/// Halton points for indices `1..=n` (the all-zero index 0 is skipped).
pub fn halton_points(n: usize, dim: usize) -> Result<PointSet> {
    check_shape(n, dim)?;
    if dim > HALTON_MAX_DIM {
        return Err(Error::DimensionTooLarge {
            requested: dim,
            max: HALTON_MAX_DIM,
        });
    }
    let mut data = Vec::with_capacity(n * dim);
    for i in 1..=n as u64 {
        data.extend(PRIMES[..dim].iter().map(|&b| radical_inverse(i, b)));
    }
    Ok(PointSet::from_rows_unchecked(dim, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_one() {
        let ps = halton_points(1, 3).unwrap();
        assert_eq!(ps.point(0)[0], 0.5);
        assert!((ps.point(0)[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((ps.point(0)[2] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn first_ten_match_hand_computation() {
        // Base 2: 1/2 1/4 3/4 1/8 5/8 3/8 7/8 1/16 9/16 5/16
        // Base 3: 1/3 2/3 1/9 4/9 7/9 2/9 5/9 8/9 1/27 10/27
        let base2 = [8.0, 4.0, 12.0, 2.0, 10.0, 6.0, 14.0, 1.0, 9.0, 5.0].map(|k| k / 16.0);
        let base3 = [9.0, 18.0, 3.0, 12.0, 21.0, 6.0, 15.0, 24.0, 1.0, 10.0].map(|k| k / 27.0);
        let ps = halton_points(10, 2).unwrap();
        for (i, p) in ps.iter().enumerate() {
            assert!((p[0] - base2[i]).abs() < 1e-15, "index {}", i + 1);
            assert!((p[1] - base3[i]).abs() < 1e-15, "index {}", i + 1);
        }
    }

    #[test]
    fn rejects_too_many_dimensions() {
        assert!(halton_points(4, 17).is_err());
        assert!(halton_points(4, 16).is_ok());
    }
}
