use super::PointSet;
use crate::error::{Error, Result};

/// Largest point count for which the exact two-dimensional algorithm is used.
pub const EXACT_DISCREPANCY_MAX_POINTS: usize = 4096;

/// Upper limit on grid corners used by the bracketing bound.
const GRID_BUDGET: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq)]
pub struct DiscrepancyReport {
    pub star_discrepancy: f64,
    /// `false` when `star_discrepancy` is the grid upper bound.
    pub exact: bool,
    /// `None` for single-point sets.
    pub min_pairwise_distance: Option<f64>,
    pub n_points: usize,
    pub dimension: usize,
}

impl DiscrepancyReport {
    /// `key=value` lines, one field per line.
    pub fn to_key_values(&self) -> String {
        let mpd = self
            .min_pairwise_distance
            .map_or_else(|| "nan".to_string(), |d| format!("{d:.12e}"));
        format!(
            "star_discrepancy={:.12e}\nstar_discrepancy_kind={}\nmin_pairwise_distance={}\nn_points={}\ndimension={}\n",
            self.star_discrepancy,
            if self.exact { "exact" } else { "upper_bound" },
            mpd,
            self.n_points,
            self.dimension
        )
    }
}

/// Exact star discrepancy for `s ≤ 2` and at most
/// [`EXACT_DISCREPANCY_MAX_POINTS`] points.
///
/// Only anchored boxes whose upper corner sits on point coordinates (or on 1)
/// can attain the supremum: open boxes for the volume-excess side, closed
/// boxes for the count-excess side. A sweep over x with a rank histogram on y
/// evaluates all of them in `O(n²)`.
pub fn star_discrepancy(ps: &PointSet) -> Result<f64> {
    if ps.is_empty() {
        return Err(Error::invalid("star discrepancy of an empty point set"));
    }
    if ps.len() > EXACT_DISCREPANCY_MAX_POINTS {
        return Err(Error::invalid(format!(
            "exact star discrepancy supports at most {EXACT_DISCREPANCY_MAX_POINTS} points, got {}; use the grid bound",
            ps.len()
        )));
    }
    match ps.dim() {
        1 => Ok(exact_1d(ps)),
        2 => Ok(exact_2d(ps)),
        d => Err(Error::invalid(format!(
            "exact star discrepancy is only available for s <= 2, got s = {d}"
        ))),
    }
}

fn exact_1d(ps: &PointSet) -> f64 {
    let n = ps.len() as f64;
    let mut xs: Vec<f64> = ps.iter().map(|p| p[0]).collect();
    xs.sort_by(f64::total_cmp);
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        d = d.max((i + 1) as f64 / n - x).max(x - i as f64 / n);
    }
    d
}

fn exact_2d(ps: &PointSet) -> f64 {
    let n = ps.len();
    let inv_n = 1.0 / n as f64;
    let mut pts: Vec<(f64, f64)> = ps.iter().map(|p| (p[0], p[1])).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let rank = |y: f64| ys.partition_point(|&v| v < y);

    let mut hist = vec![0usize; ys.len()];
    let mut included = 0usize;
    let mut d: f64 = 0.0;

    let open_pass = |hist: &[usize], included: usize, xt: f64, d: &mut f64| {
        let mut below = 0usize;
        for (r, &y) in ys.iter().enumerate() {
            *d = d.max(xt * y - below as f64 * inv_n);
            below += hist[r];
        }
        *d = d.max(xt - included as f64 * inv_n);
    };

    let mut i = 0;
    while i < n {
        let xt = pts[i].0;
        open_pass(&hist, included, xt, &mut d);
        while i < n && pts[i].0 == xt {
            hist[rank(pts[i].1)] += 1;
            included += 1;
            i += 1;
        }
        let mut at_or_below = 0usize;
        for (r, &y) in ys.iter().enumerate() {
            at_or_below += hist[r];
            d = d.max(at_or_below as f64 * inv_n - xt * y);
        }
    }
    open_pass(&hist, included, 1.0, &mut d);
    d.clamp(0.0, 1.0)
}

/// Upper bound on the star discrepancy in any dimension by bracketing every
/// anchored box between two corners of a uniform grid with `k` cells per axis.
///
/// Returns `(bound, k)`. The bound loosens by at most the volume of one grid
/// shell; in dimensions where even `k = 2` exceeds the grid budget the trivial
/// bound `1.0` is returned with `k = 1`.
pub fn star_discrepancy_bound(ps: &PointSet) -> Result<(f64, usize)> {
    if ps.is_empty() {
        return Err(Error::invalid("star discrepancy of an empty point set"));
    }
    let s = ps.dim();
    let mut k = 1usize;
    while (k + 2)
        .checked_pow(s as u32)
        .is_some_and(|c| c <= GRID_BUDGET)
    {
        k += 1;
    }
    if k < 2 {
        return Ok((1.0, 1));
    }
    let side = k + 1;
    let corners = side.pow(s as u32);
    let kf = k as f64;

    // open[j]: points with x < j/k on every axis; closed[j]: x <= j/k.
    let mut open = vec![0u32; corners];
    let mut closed = vec![0u32; corners];
    for p in ps.iter() {
        let (mut lo, mut hi) = (0usize, 0usize);
        for &x in p.iter() {
            let f = (x * kf).floor() as usize + 1;
            let c = (x * kf).ceil() as usize;
            lo = lo * side + f.min(k);
            hi = hi * side + c.min(k);
        }
        open[lo] += 1;
        closed[hi] += 1;
    }
    for axis in 0..s {
        let stride = side.pow((s - 1 - axis) as u32);
        for idx in 0..corners {
            if !(idx / stride).is_multiple_of(side) {
                open[idx] += open[idx - stride];
                closed[idx] += closed[idx - stride];
            }
        }
    }

    let inv_n = 1.0 / ps.len() as f64;
    let mut bound: f64 = 0.0;
    let mut digits = vec![0usize; s];
    // Iterate lower corners j in [0, k-1]^s.
    let lower_count = k.pow(s as u32);
    for _ in 0..lower_count {
        let (mut lo_idx, mut hi_idx) = (0usize, 0usize);
        let (mut lo_vol, mut hi_vol) = (1.0, 1.0);
        for &j in &digits {
            lo_idx = lo_idx * side + j;
            hi_idx = hi_idx * side + j + 1;
            lo_vol *= j as f64 / kf;
            hi_vol *= (j + 1) as f64 / kf;
        }
        bound = bound
            .max(hi_vol - f64::from(open[lo_idx]) * inv_n)
            .max(f64::from(closed[hi_idx]) * inv_n - lo_vol);
        for digit in digits.iter_mut().rev() {
            *digit += 1;
            if *digit < k {
                break;
            }
            *digit = 0;
        }
    }
    Ok((bound.clamp(0.0, 1.0), k))
}

/// Smallest Euclidean distance between two distinct points of the set.
pub fn min_pairwise_distance(ps: &PointSet) -> Result<f64> {
    if ps.len() < 2 {
        return Err(Error::invalid(
            "minimum pairwise distance needs at least two points",
        ));
    }
    let mut order: Vec<&[f64]> = ps.iter().collect();
    order.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut best_sq = f64::INFINITY;
    for (i, a) in order.iter().enumerate() {
        for b in &order[i + 1..] {
            let dx = b[0] - a[0];
            if dx * dx >= best_sq {
                break;
            }
            let d2: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum();
            best_sq = best_sq.min(d2);
        }
    }
    Ok(best_sq.sqrt())
}

/// Full diagnostic; the exact discrepancy is used whenever it is available.
pub fn report(ps: &PointSet) -> Result<DiscrepancyReport> {
    let (star, exact) = match star_discrepancy(ps) {
        Ok(d) => (d, true),
        Err(_) => (star_discrepancy_bound(ps)?.0, false),
    };
    let min_pairwise_distance = if ps.len() >= 2 {
        Some(min_pairwise_distance(ps)?)
    } else {
        None
    };
    Ok(DiscrepancyReport {
        star_discrepancy: star,
        exact,
        min_pairwise_distance,
        n_points: ps.len(),
        dimension: ps.dim(),
    })
}
