use std::sync::OnceLock;

use super::{check_shape, PointSet};
use crate::error::{Error, Result};

/// Number of dimensions covered by the embedded direction-number table.
pub const SOBOL_MAX_DIM: usize = 64;

const BITS: usize = 32;
const TO_UNIT: f64 = 1.0 / 4_294_967_296.0;

/// Joe & Kuo `new-joe-kuo-6.21201`, rows for dimensions 2..=64.
static JOE_KUO: &str = include_str!("../../data/new-joe-kuo-6.64.txt");

fn direction_table() -> &'static [[u32; BITS]] {
    static TABLE: OnceLock<Vec<[u32; BITS]>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(SOBOL_MAX_DIM);
        // First dimension: van der Corput in base 2.
        let mut first = [0u32; BITS];
        for (k, v) in first.iter_mut().enumerate() {
            *v = 1 << (31 - k);
        }
        table.push(first);
        for line in JOE_KUO.lines().skip(1) {
            let fields: Vec<u32> = line
                .split_whitespace()
                .map(|f| f.parse().expect("embedded direction table is well formed"))
                .collect();
            let (degree, coeffs, m) = (fields[1] as usize, fields[2], &fields[3..]);
            debug_assert_eq!(m.len(), degree);
            table.push(directions(degree, coeffs, m));
        }
        debug_assert_eq!(table.len(), SOBOL_MAX_DIM);
        table
    })
}

fn directions(degree: usize, coeffs: u32, m: &[u32]) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    for k in 0..BITS.min(degree) {
        v[k] = m[k] << (31 - k);
    }
    for k in degree..BITS {
        let mut value = v[k - degree] ^ (v[k - degree] >> degree);
        for j in 1..degree {
            if (coeffs >> (degree - 1 - j)) & 1 == 1 {
                value ^= v[k - j];
            }
        }
        v[k] = value;
    }
    v
}

#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Nested uniform (Owen) scramble of a 32-digit binary fraction: the digit at
/// each level is flipped by a coin that depends on the seed, the level, and
/// every more significant original digit.
#[inline]
fn owen_scramble(x: u32, seed: u64) -> u32 {
    let mut out = 0u32;
    for level in 0..BITS {
        let prefix = if level == 0 {
            0
        } else {
            u64::from(x >> (BITS - level))
        };
        let key = seed
            ^ mix64((level as u64) << 32 | 0x9e37_79b9)
            ^ mix64(prefix ^ 0x632b_e59b_d9b4_e019);
        let flip = (mix64(key) >> 63) as u32;
        let bit = (x >> (31 - level)) & 1;
        out |= (bit ^ flip) << (31 - level);
    }
    out
}

/// Incremental Sobol generator in natural (non-Gray) index order.
#[derive(Clone, Debug)]
pub struct SobolState {
    dimension: usize,
    directions: &'static [[u32; BITS]],
    index: u64,
    scramble: Option<Vec<u64>>,
}

impl SobolState {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if dimension > SOBOL_MAX_DIM {
            return Err(Error::DimensionTooLarge {
                requested: dimension,
                max: SOBOL_MAX_DIM,
            });
        }
        Ok(Self {
            dimension,
            directions: &direction_table()[..dimension],
            index: 0,
            scramble: None,
        })
    }

    /// Same sequence with an independent Owen scramble per dimension.
    pub fn scrambled(dimension: usize, seed: u64) -> Result<Self> {
        let mut state = Self::new(dimension)?;
        let seeds = (0..dimension as u64)
            .map(|d| mix64(seed ^ mix64(d.wrapping_add(0x5851_f42d_4c95_7f2d))))
            .collect();
        state.scramble = Some(seeds);
        Ok(state)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn skip_to(&mut self, index: u64) {
        self.index = index;
    }

    /// Raw 32-bit digits of point `index` in dimension `dim` (unscrambled).
    pub fn raw(&self, index: u64, dim: usize) -> u32 {
        let v = &self.directions[dim];
        let mut x = 0u32;
        let mut i = index;
        let mut k = 0;
        while i != 0 && k < BITS {
            if i & 1 == 1 {
                x ^= v[k];
            }
            i >>= 1;
            k += 1;
        }
        x
    }

    /// Writes the next point into `out` and advances the index.
    pub fn next_into(&mut self, out: &mut [f64]) {
        assert_eq!(out.len(), self.dimension);
        for (d, slot) in out.iter_mut().enumerate() {
            let mut x = self.raw(self.index, d);
            if let Some(seeds) = &self.scramble {
                x = owen_scramble(x, seeds[d]);
            }
            *slot = f64::from(x) * TO_UNIT;
        }
        self.index += 1;
    }

    pub fn take_points(&mut self, n: usize) -> PointSet {
        let mut data = vec![0.0; n * self.dimension];
        for row in data.chunks_exact_mut(self.dimension) {
            self.next_into(row);
        }
        PointSet::from_rows_unchecked(self.dimension, data)
    }
}

/// First `n` points of the unscrambled Sobol sequence, starting at the origin.
pub fn sobol_points(n: usize, dim: usize) -> Result<PointSet> {
    check_shape(n, dim)?;
    Ok(SobolState::new(dim)?.take_points(n))
}

/// First `n` points of an Owen-scrambled Sobol sequence.
pub fn scrambled_sobol_points(n: usize, dim: usize, seed: u64) -> Result<PointSet> {
    check_shape(n, dim)?;
    Ok(SobolState::scrambled(dim, seed)?.take_points(n))
}
