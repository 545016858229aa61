//! Recurrent event records, the shared time grid and sampled curves.
//!
//! Every individual is observed on one uniform grid `t_j = j * delta`,
//! `j = 1..=m`, spanning `(0, t_max]`. Individual censoring is expressed by a
//! per-curve mask that is a prefix of `true` values followed by `false`.

use serde::{Deserialize, Serialize};

use crate::error::{BoostError, Result};

/// Ordered event times of one individual plus its right-censoring time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventHistory {
    times: Vec<f64>,
    censor: f64,
}

impl EventHistory {
    pub fn new(times: Vec<f64>, censor: f64) -> Result<Self> {
        if !(censor > 0.0 && censor.is_finite()) {
            return Err(BoostError::invalid(format!(
                "censoring time must be positive, got {censor}"
            )));
        }
        for (k, &t) in times.iter().enumerate() {
            if !(t > 0.0 && t.is_finite()) {
                return Err(BoostError::invalid(format!("event time {t} is not positive")));
            }
            if t > censor {
                return Err(BoostError::invalid(format!(
                    "event time {t} is after censoring time {censor}"
                )));
            }
            if k > 0 && t <= times[k - 1] {
                return Err(BoostError::invalid(format!(
                    "event times not strictly ascending at {t}"
                )));
            }
        }
        Ok(Self { times, censor })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn censor(&self) -> f64 {
        self.censor
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Number of events in `(0, t]`.
    pub fn count_by(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t)
    }
}

/// One dynamic feature path, sampled at ascending times starting at 0 and
/// held constant between samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl DynamicSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(BoostError::invalid("dynamic series is empty"));
        }
        if times.len() != values.len() {
            return Err(BoostError::DimensionMismatch {
                expected: times.len(),
                got: values.len(),
            });
        }
        if times[0] != 0.0 {
            return Err(BoostError::invalid(format!(
                "dynamic series must start at t=0, starts at {}",
                times[0]
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(BoostError::invalid("dynamic series times not strictly ascending"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BoostError::invalid("dynamic series has non-finite values"));
        }
        Ok(Self { times, values })
    }

    /// Constant path `z(t) = value`.
    pub fn constant(value: f64) -> Self {
        Self {
            times: vec![0.0],
            values: vec![value],
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Zero-order-hold value at `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        self.values[k.saturating_sub(1)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub id: String,
    pub x: Vec<f64>,
    #[serde(default)]
    pub z: Vec<DynamicSeries>,
    pub events: EventHistory,
}

/// Uniform grid `t_j = j * t_max / m` for `j = 1..=m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t_max: f64,
    m: usize,
}

impl TimeGrid {
    pub fn new(t_max: f64, m: usize) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(BoostError::invalid(format!("t_max must be positive, got {t_max}")));
        }
        if m < 2 {
            return Err(BoostError::invalid(format!("grid needs m >= 2 points, got {m}")));
        }
        Ok(Self { t_max, m })
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn delta(&self) -> f64 {
        self.t_max / self.m as f64
    }

    /// Time of the 0-based grid index `j`, i.e. `(j + 1) * delta`.
    pub fn point(&self, j: usize) -> f64 {
        (j + 1) as f64 * self.delta()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.m).map(|j| self.point(j)).collect()
    }

    /// Number of leading grid points with `t_j <= t`.
    pub fn observed_len(&self, t: f64) -> usize {
        // Compare against the same products `point` produces so that a
        // censoring time exactly on the grid keeps its point.
        (0..self.m).take_while(|&j| self.point(j) <= t).count()
    }

    /// Trapezoid weights for the first `len` grid points. The integrand is
    /// carried flat from `t_1` back to the origin, so constants integrate
    /// exactly: the weights sum to `len * delta`.
    pub fn trapezoid_weights(&self, len: usize) -> Vec<f64> {
        let d = self.delta();
        match len {
            0 => Vec::new(),
            1 => vec![d],
            _ => {
                let mut w = vec![d; len];
                w[0] = 1.5 * d;
                w[len - 1] = 0.5 * d;
                w
            }
        }
    }
}

/// Real-valued function sampled on a [`TimeGrid`], with an observed-region mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    grid: TimeGrid,
    values: Vec<f64>,
    mask: Vec<bool>,
}

impl Curve {
    /// Fully observed curve.
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::with_observed(grid, values, n)
    }

    /// Curve whose first `observed` points are unmasked.
    pub fn with_observed(grid: TimeGrid, values: Vec<f64>, observed: usize) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(BoostError::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        let mask = (0..grid.len()).map(|j| j < observed).collect();
        Ok(Self { grid, values, mask })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
            mask: vec![true; grid.len()],
        }
    }

    pub fn constant(grid: TimeGrid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
            mask: vec![true; grid.len()],
        }
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid,
            values: grid.points().into_iter().map(f).collect(),
            mask: vec![true; grid.len()],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Length of the observed prefix.
    pub fn observed_len(&self) -> usize {
        self.mask.iter().take_while(|&&b| b).count()
    }

    /// Values with masked points replaced by zero.
    pub fn observed_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.mask)
            .map(|(&v, &m)| if m { v } else { 0.0 })
            .collect()
    }

    fn check_grid(&self, other: &Curve) -> Result<()> {
        if self.grid != other.grid {
            return Err(BoostError::GridMismatch);
        }
        Ok(())
    }

    /// Pointwise combination; the result is observed where both inputs are.
    pub fn zip_with(&self, other: &Curve, f: impl Fn(f64, f64) -> f64) -> Result<Curve> {
        self.check_grid(other)?;
        Ok(Curve {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            mask: self.mask.iter().zip(&other.mask).map(|(&a, &b)| a && b).collect(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Curve {
        Curve {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            mask: self.mask.clone(),
        }
    }

    /// Linear interpolation with value 0 at the origin; beyond `t_max` the
    /// last segment's slope is continued.
    pub fn value_at(&self, t: f64) -> f64 {
        let d = self.grid.delta();
        let m = self.values.len();
        if t <= 0.0 {
            return 0.0;
        }
        let s = t / d;
        if s >= m as f64 {
            let last = self.values[m - 1];
            let slope = (last - self.values[m - 2]) / d;
            return last + slope * (t - self.grid.t_max());
        }
        let k = s.floor() as usize;
        let frac = s - k as f64;
        let left = if k == 0 { 0.0 } else { self.values[k - 1] };
        let right = self.values[k];
        left + frac * (right - left)
    }

    /// Slope of the last grid segment, used for extrapolation.
    pub fn terminal_slope(&self) -> f64 {
        let m = self.values.len();
        (self.values[m - 1] - self.values[m - 2]) / self.grid.delta()
    }
}

/// Individuals sharing one feature layout and one time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    individuals: Vec<Individual>,
    p: usize,
    q: usize,
    grid: TimeGrid,
}

impl Dataset {
    /// Builds a dataset whose grid spans `[0, max censor]` with `m` points.
    pub fn new(individuals: Vec<Individual>, m: usize) -> Result<Self> {
        let t_max = individuals
            .iter()
            .map(|ind| ind.events.censor())
            .fold(0.0, f64::max);
        if individuals.is_empty() {
            return Err(BoostError::invalid("dataset is empty"));
        }
        let grid = TimeGrid::new(t_max, m)?;
        Self::with_grid(individuals, grid)
    }

    pub fn with_grid(individuals: Vec<Individual>, grid: TimeGrid) -> Result<Self> {
        let first = individuals
            .first()
            .ok_or_else(|| BoostError::invalid("dataset is empty"))?;
        let p = first.x.len();
        let q = first.z.len();
        for ind in &individuals {
            if ind.x.len() != p {
                return Err(BoostError::invalid(format!(
                    "individual {} has {} static features, expected {p}",
                    ind.id,
                    ind.x.len()
                )));
            }
            if ind.z.len() != q {
                return Err(BoostError::invalid(format!(
                    "individual {} has {} dynamic features, expected {q}",
                    ind.id,
                    ind.z.len()
                )));
            }
        }
        Ok(Self {
            individuals,
            p,
            q,
            grid,
        })
    }

    pub fn individuals(&self) -> &[Individual] {
        &self.individuals
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Same grid, chosen individuals in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let inds = indices.iter().map(|&i| self.individuals[i].clone()).collect();
        Dataset::with_grid(inds, self.grid)
    }

    /// Static features as a row-major `n x p` matrix.
    pub fn feature_rows(&self) -> Vec<Vec<f64>> {
        self.individuals.iter().map(|ind| ind.x.clone()).collect()
    }
}

/// Event-count step function of a single individual on `grid`.
pub fn empirical_mcf(events: &EventHistory, grid: &TimeGrid) -> Curve {
    let observed = grid.observed_len(events.censor());
    let at_censor = events.len() as f64;
    let values = (0..grid.len())
        .map(|j| {
            if j < observed {
                events.count_by(grid.point(j)) as f64
            } else {
                at_censor
            }
        })
        .collect();
    Curve {
        grid: *grid,
        values,
        mask: (0..grid.len()).map(|j| j < observed).collect(),
    }
}

/// Trapezoid approximation of `int a(t) b(t) dt` over the region observed in
/// both curves.
pub fn curve_integral(a: &Curve, b: &Curve) -> Result<f64> {
    a.check_grid(b)?;
    let len = a
        .mask
        .iter()
        .zip(&b.mask)
        .take_while(|(&x, &y)| x && y)
        .count();
    let w = a.grid.trapezoid_weights(len);
    Ok(w
        .iter()
        .zip(&a.values)
        .zip(&b.values)
        .map(|((w, x), y)| w * x * y)
        .sum())
}
