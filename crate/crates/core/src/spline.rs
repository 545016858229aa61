//! Clamped B-spline bases over a dynamic feature's range, and the integrated
//! basis `Phi(t) = int_0^t B(z(tau)) dtau` along an individual's feature path.
//!
//! A basis with order `v` and `u` internal knots has `u + v` functions of
//! degree `v - 1`.

use serde::{Deserialize, Serialize};

use crate::data::{DynamicSeries, TimeGrid};
use crate::error::{BoostError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBasis {
    order: usize,
    internal: usize,
    knots: Vec<f64>,
}

impl SplineBasis {
    /// Clamped basis with explicit internal knots.
    pub fn with_knots(lo: f64, hi: f64, internal_knots: &[f64], order: usize) -> Result<Self> {
        if order < 1 {
            return Err(BoostError::invalid("spline order v must be at least 1"));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(BoostError::invalid(format!("invalid knot range [{lo}, {hi}]")));
        }
        let mut prev = lo;
        for &k in internal_knots {
            if !(k > prev && k < hi) {
                return Err(BoostError::invalid(format!(
                    "internal knot {k} not strictly ascending inside ({lo}, {hi})"
                )));
            }
            prev = k;
        }
        let mut knots = vec![lo; order];
        knots.extend_from_slice(internal_knots);
        knots.extend(std::iter::repeat_n(hi, order));
        Ok(Self {
            order,
            internal: internal_knots.len(),
            knots,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn degree(&self) -> usize {
        self.order - 1
    }

    pub fn internal_count(&self) -> usize {
        self.internal
    }

    pub fn len(&self) -> usize {
        self.internal + self.order
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn lo(&self) -> f64 {
        self.knots[0]
    }

    pub fn hi(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    pub fn internal_knots(&self) -> &[f64] {
        &self.knots[self.order..self.order + self.internal]
    }

    /// Index `i` of the knot span `[t_i, t_{i+1})` holding `z`, restricted to
    /// the non-degenerate spans `degree..len`.
    fn span(&self, z: f64) -> usize {
        let n = self.len();
        let deg = self.degree();
        if z >= self.hi() {
            return n - 1;
        }
        // Largest i in [deg, n-1] with knots[i] <= z.
        let upper = self.knots[deg + 1..=n].partition_point(|&k| k <= z);
        deg + upper
    }

    /// All basis values at `z` (clamped into the knot range).
    pub fn eval(&self, z: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(z, &mut out);
        out
    }

    /// Writes all basis values at `z` into `out`, which must have `len()` slots.
    pub fn eval_into(&self, z: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.len());
        let z = z.clamp(self.lo(), self.hi());
        let deg = self.degree();
        let i = self.span(z);
        let t = &self.knots;

        let mut n = vec![0.0; deg + 1];
        let mut left = vec![0.0; deg + 1];
        let mut right = vec![0.0; deg + 1];
        n[0] = 1.0;
        for j in 1..=deg {
            left[j] = z - t[i + 1 - j];
            right[j] = t[i + j] - z;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        out.fill(0.0);
        out[i - deg..=i].copy_from_slice(&n);
    }
}

/// Type-7 (linear interpolation) quantile of sorted data.
fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * level;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Builds a clamped basis over the sample range with `u` internal knots at
/// evenly spaced sample quantiles. When quantiles collide (heavily repeated
/// values) the internal knots are spread evenly over the range instead.
pub fn make_basis(samples: &[f64], u: usize, v: usize) -> Result<SplineBasis> {
    if v < 1 {
        return Err(BoostError::invalid("spline order v must be at least 1"));
    }
    let mut sorted: Vec<f64> = samples.iter().copied().filter(|s| s.is_finite()).collect();
    if sorted.len() < 2 {
        return Err(BoostError::invalid("need at least two finite samples for a basis"));
    }
    sorted.sort_by(f64::total_cmp);
    let lo = sorted[0];
    let hi = sorted[sorted.len() - 1];
    if lo == hi {
        return Err(BoostError::DegenerateRange(sorted.len()));
    }
    let quantiles: Vec<f64> = (1..=u)
        .map(|k| quantile_sorted(&sorted, k as f64 / (u + 1) as f64))
        .collect();
    let valid = quantiles
        .iter()
        .scan(lo, |prev, &q| {
            let ok = q > *prev && q < hi;
            *prev = q;
            Some(ok)
        })
        .all(|ok| ok);
    let internal = if valid {
        quantiles
    } else {
        (1..=u)
            .map(|k| lo + (hi - lo) * k as f64 / (u + 1) as f64)
            .collect()
    };
    SplineBasis::with_knots(lo, hi, &internal, v)
}

/// Integrated basis of one feature path at ascending times: row `k` holds
/// `int_0^{times[k]} B_b(z(tau)) dtau` for every basis function `b`.
///
/// The path is held constant between samples, so the integrand is piecewise
/// constant and each piece is integrated exactly.
pub fn integrate_basis_at(
    basis: &SplineBasis,
    series: &DynamicSeries,
    times: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if series.times().is_empty() {
        return Err(BoostError::invalid("dynamic series is empty"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(BoostError::invalid("integration times must be ascending"));
    }
    let nb = basis.len();
    let st = series.times();
    let sv = series.values();
    let mut acc = vec![0.0; nb];
    let mut b = vec![0.0; nb];
    let mut out = Vec::with_capacity(times.len());

    // Segment k covers [st[k], st[k+1]) with value sv[k]; the last is open-ended.
    let mut seg = 0;
    let mut pos = 0.0;
    basis.eval_into(sv[0], &mut b);
    for &t in times {
        while pos < t {
            let seg_end = st.get(seg + 1).copied().unwrap_or(f64::INFINITY);
            let stop = seg_end.min(t);
            let len = stop - pos;
            for (a, &bv) in acc.iter_mut().zip(&b) {
                *a += bv * len;
            }
            pos = stop;
            if pos >= seg_end {
                seg += 1;
                basis.eval_into(sv[seg], &mut b);
            }
        }
        out.push(acc.clone());
    }
    Ok(out)
}

/// Integrated basis of one feature path on every grid point.
pub fn integrate_basis(
    basis: &SplineBasis,
    series: &DynamicSeries,
    grid: &TimeGrid,
) -> Result<Vec<Vec<f64>>> {
    integrate_basis_at(basis, series, &grid.points())
}

/// Per-individual integrated bases for all dynamic features, flattened so that
/// row `j` is `[Phi_1(t_j) | Phi_2(t_j) | ... | Phi_q(t_j)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegratedBasis {
    width: usize,
    rows: Vec<f64>,
}

impl IntegratedBasis {
    pub fn build(bases: &[SplineBasis], series: &[DynamicSeries], times: &[f64]) -> Result<Self> {
        if bases.len() != series.len() {
            return Err(BoostError::DimensionMismatch {
                expected: bases.len(),
                got: series.len(),
            });
        }
        let width: usize = bases.iter().map(SplineBasis::len).sum();
        let mut rows = vec![0.0; width * times.len()];
        let mut offset = 0;
        for (basis, s) in bases.iter().zip(series) {
            let phi = integrate_basis_at(basis, s, times)?;
            for (j, row) in phi.iter().enumerate() {
                rows[j * width + offset..j * width + offset + basis.len()].copy_from_slice(row);
            }
            offset += basis.len();
        }
        Ok(Self { width, rows })
    }

    pub fn on_grid(bases: &[SplineBasis], series: &[DynamicSeries], grid: &TimeGrid) -> Result<Self> {
        Self::build(bases, series, &grid.points())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.rows.len().checked_div(self.width).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.rows[j * self.width..(j + 1) * self.width]
    }

    /// `Phi(t_j) . beta` for every row.
    pub fn apply(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|j| self.row(j).iter().zip(beta).map(|(a, b)| a * b).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Textbook recursive definition, independent of the triangular scheme.
    fn cox_de_boor(knots: &[f64], i: usize, order: usize, z: f64, right_end: bool) -> f64 {
        if order == 1 {
            let inside = knots[i] <= z && z < knots[i + 1];
            let at_end = right_end && z == knots[i + 1] && knots[i] < knots[i + 1];
            return if inside || at_end { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = knots[i + order - 1] - knots[i];
        if d1 > 0.0 {
            v += (z - knots[i]) / d1 * cox_de_boor(knots, i, order - 1, z, right_end);
        }
        let d2 = knots[i + order] - knots[i + 1];
        if d2 > 0.0 {
            v += (knots[i + order] - z) / d2 * cox_de_boor(knots, i + 1, order - 1, z, right_end);
        }
        v
    }

    #[test]
    fn basis_count_is_u_plus_v() {
        let samples: Vec<f64> = (0..100).map(|k| k as f64 / 99.0).collect();
        let b = make_basis(&samples, 2, 3).unwrap();
        assert_eq!(b.len(), 5);
        assert_eq!(b.degree(), 2);
    }

    #[test]
    fn single_box_basis() {
        let b = make_basis(&[0.0, 1.0, 2.0], 0, 1).unwrap();
        assert_eq!(b.len(), 1);
        for z in [0.0, 0.3, 1.7, 2.0] {
            assert_eq!(b.eval(z), vec![1.0]);
        }
    }

    #[test]
    fn degenerate_range_rejected() {
        assert!(matches!(
            make_basis(&[1.0, 1.0, 1.0], 2, 3),
            Err(BoostError::DegenerateRange(3))
        ));
    }

    #[test]
    fn internal_knots_near_quartiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut samples: Vec<f64> = (0..4001).map(|_| rng.random::<f64>()).collect();
        let b = make_basis(&samples, 3, 4).unwrap();
        samples.sort_by(f64::total_cmp);
        // Quantile oracle: order statistics at n/4, n/2, 3n/4.
        let oracle = [samples[1000], samples[2000], samples[3000]];
        for (k, o) in b.internal_knots().iter().zip(oracle) {
            assert!((k - o).abs() < 1e-12, "{k} vs {o}");
        }
        for (k, q) in b.internal_knots().iter().zip([0.25, 0.5, 0.75]) {
            assert!((k - q).abs() < 0.03);
        }
    }

    #[test]
    fn clamped_boundaries() {
        let b = SplineBasis::with_knots(0.0, 1.0, &[0.3, 0.6], 3).unwrap();
        let lo = b.eval(0.0);
        assert_eq!(lo[0], 1.0);
        assert!(lo[1..].iter().all(|&v| v == 0.0));
        let hi = b.eval(1.0);
        assert_eq!(hi[4], 1.0);
        // Out of range clamps.
        assert_eq!(b.eval(-3.0), lo);
        assert_eq!(b.eval(7.0), hi);
    }

    #[test]
    fn matches_recursive_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for order in 1..=4 {
            let b = SplineBasis::with_knots(-1.0, 2.0, &[-0.2, 0.5, 1.1], order).unwrap();
            for _ in 0..200 {
                let z = rng.random_range(-1.0..=2.0);
                let got = b.eval(z);
                for (i, g) in got.iter().enumerate() {
                    let want = cox_de_boor(b.knots(), i, order, z, true);
                    assert!((g - want).abs() < 1e-12, "order {order} z {z} i {i}");
                }
            }
        }
    }

    #[test]
    fn constant_path_integrates_linearly() {
        let b = SplineBasis::with_knots(0.0, 1.0, &[0.4, 0.7], 3).unwrap();
        let g = TimeGrid::new(10.0, 5).unwrap();
        let phi = integrate_basis(&b, &DynamicSeries::constant(0.55), &g).unwrap();
        let bz = b.eval(0.55);
        for (j, row) in phi.iter().enumerate() {
            for (p, bv) in row.iter().zip(&bz) {
                assert_eq!(*p, bv * g.point(j));
            }
        }
    }

    #[test]
    fn two_segment_path() {
        let b = SplineBasis::with_knots(0.0, 1.0, &[0.5], 2).unwrap();
        let g = TimeGrid::new(8.0, 4).unwrap();
        let s = DynamicSeries::new(vec![0.0, 4.0], vec![0.2, 0.9]).unwrap();
        let phi = integrate_basis(&b, &s, &g).unwrap();
        let (b1, b2) = (b.eval(0.2), b.eval(0.9));
        for k in 0..b.len() {
            assert!((phi[3][k] - (b1[k] + b2[k]) * 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_series_rejected() {
        assert!(DynamicSeries::new(vec![], vec![]).is_err());
    }

    #[test]
    fn rows_sum_to_time() {
        let b = SplineBasis::with_knots(-1.0, 1.0, &[-0.3, 0.2], 3).unwrap();
        let times: Vec<f64> = (0..200).map(|k| k as f64 * 0.5).collect();
        let vals: Vec<f64> = times.iter().map(|t| (t * 0.3).sin()).collect();
        let s = DynamicSeries::new(times, vals).unwrap();
        let g = TimeGrid::new(100.0, 50).unwrap();
        let phi = integrate_basis(&b, &s, &g).unwrap();
        for (j, row) in phi.iter().enumerate() {
            let t = g.point(j);
            assert!((row.iter().sum::<f64>() - t).abs() <= 1e-9 * t);
            if j > 0 {
                assert!(row.iter().zip(&phi[j - 1]).all(|(a, b)| a >= b));
            }
        }
    }

    #[test]
    fn midpoint_sampled_path_converges_at_second_order() {
        // A smooth path sampled once per grid cell at the cell midpoint; the
        // held path is then the midpoint rule, whose error falls ~4x per halving.
        let b = SplineBasis::with_knots(-1.0, 1.0, &[-0.3, 0.2], 3).unwrap();
        let z = |t: f64| (0.7 * t).sin();
        let exact = {
            let n = 400_000;
            let h = 10.0 / n as f64;
            let mut acc = vec![0.0; b.len()];
            for k in 0..n {
                for (a, v) in acc.iter_mut().zip(b.eval(z((k as f64 + 0.5) * h))) {
                    *a += v * h;
                }
            }
            acc
        };
        let err = |m: usize| {
            let h = 10.0 / m as f64;
            let times: Vec<f64> = (0..m).map(|k| k as f64 * h).collect();
            let vals: Vec<f64> = times.iter().map(|t| z(t + 0.5 * h)).collect();
            let s = DynamicSeries::new(times, vals).unwrap();
            let phi = integrate_basis_at(&b, &s, &[10.0]).unwrap();
            phi[0].iter().zip(&exact).map(|(a, e)| (a - e).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(200), err(400));
        let rate = (e1 / e2).log2();
        assert!(rate >= 1.9, "empirical order {rate}");
    }
}
