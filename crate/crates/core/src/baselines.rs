//! Comparison methods: population MCF, nearest-neighbour MCF, a log-linear
//! homogeneous Poisson model, and boosting with time as an ordinary feature.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::boost_static::{BoostConfig, CurveCriterion, CurveLeaf};
use crate::data::{empirical_mcf, Curve, Dataset, Individual, TimeGrid};
use crate::error::{BoostError, Result};
use crate::tree::{grow_tree, FeatureMatrix, Node, Tree};

/// Nelson-Aalen type estimate `sum_{s <= t} dN(s) / Y(s)` with `Y(s)` the
/// number of individuals still observed at `s`.
pub fn pooled_mcf_of(individuals: &[&Individual], grid: &TimeGrid) -> Curve {
    let mut censors: Vec<f64> = individuals.iter().map(|i| i.events.censor()).collect();
    censors.sort_by(f64::total_cmp);
    let mut events: Vec<f64> = individuals
        .iter()
        .flat_map(|i| i.events.times().iter().copied())
        .collect();
    events.sort_by(f64::total_cmp);
    let at_risk = |s: f64| censors.len() - censors.partition_point(|&c| c < s);

    let mut values = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    let mut k = 0;
    for t in grid.points() {
        while k < events.len() && events[k] <= t {
            let s = events[k];
            let mut d = 0;
            while k < events.len() && events[k] == s {
                d += 1;
                k += 1;
            }
            acc += d as f64 / at_risk(s) as f64;
        }
        values.push(acc);
    }
    Curve::new(*grid, values).expect("one value per grid point")
}

pub fn pooled_mcf(train: &Dataset) -> Curve {
    let all: Vec<&Individual> = train.individuals().iter().collect();
    pooled_mcf_of(&all, train.grid())
}

/// Pooled MCF of the `k` training individuals nearest to `x` in Euclidean
/// distance; equal distances keep dataset order.
pub fn mcf_knn(train: &Dataset, x: &[f64], k: usize) -> Result<Curve> {
    if k < 1 {
        return Err(BoostError::invalid("K must be at least 1"));
    }
    if k > train.len() {
        return Err(BoostError::invalid(format!("K = {k} exceeds the {} training individuals", train.len())));
    }
    if x.len() != train.p() {
        return Err(BoostError::DimensionMismatch {
            expected: train.p(),
            got: x.len(),
        });
    }
    let mut dist: Vec<(f64, usize)> = train
        .individuals()
        .iter()
        .enumerate()
        .map(|(i, ind)| (ind.x.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), i))
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let near: Vec<&Individual> = dist[..k].iter().map(|&(_, i)| &train.individuals()[i]).collect();
    Ok(pooled_mcf_of(&near, train.grid()))
}

/// `rate_i = exp(beta0 + beta' x_i)` fitted by Poisson maximum likelihood
/// with exposure `c_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HppModel {
    /// `[beta0, beta_1, ..., beta_p]`; `None` when the training data hold no
    /// events, in which case every rate is zero.
    pub coefficients: Option<Vec<f64>>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

const HPP_MAX_ITER: usize = 100;
const HPP_GRAD_TOL: f64 = 1e-8;

pub fn hpp_loglinear_fit(train: &Dataset) -> Result<HppModel> {
    let n = train.len();
    let dim = train.p() + 1;
    let design = DMatrix::from_fn(n, dim, |i, j| if j == 0 { 1.0 } else { train.individuals()[i].x[j - 1] });
    let counts = DVector::from_iterator(n, train.individuals().iter().map(|i| i.events.len() as f64));
    let exposure = DVector::from_iterator(n, train.individuals().iter().map(|i| i.events.censor()));
    let total = counts.sum();
    if total == 0.0 {
        return Ok(HppModel {
            coefficients: None,
            iterations: 0,
            gradient_norm: 0.0,
        });
    }

    let loglik = |beta: &DVector<f64>| -> f64 {
        let eta = &design * beta;
        (0..n).map(|i| counts[i] * eta[i] - exposure[i] * eta[i].exp()).sum()
    };
    let mut beta = DVector::zeros(dim);
    beta[0] = (total / exposure.sum()).ln();
    let mut ll = loglik(&beta);
    for iter in 0..HPP_MAX_ITER {
        let eta = &design * &beta;
        let mu = DVector::from_fn(n, |i, _| exposure[i] * eta[i].exp());
        let grad = design.transpose() * (&counts - &mu);
        let gnorm = grad.norm();
        if gnorm < HPP_GRAD_TOL {
            return Ok(HppModel {
                coefficients: Some(beta.as_slice().to_vec()),
                iterations: iter,
                gradient_norm: gnorm,
            });
        }
        let weighted = DMatrix::from_fn(n, dim, |i, j| design[(i, j)] * mu[i]);
        let info = design.transpose() * weighted;
        let step = match info.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => {
                let ridge = &info + DMatrix::identity(dim, dim) * 1e-6;
                ridge
                    .cholesky()
                    .ok_or(BoostError::NonConvergence(iter))?
                    .solve(&grad)
            }
        };
        // Near the optimum the likelihood change drops below its rounding
        // error, so ascent is only required up to that noise.
        let slack = 1e-12 * (1.0 + ll.abs());
        let mut scale = 1.0;
        loop {
            let cand = &beta + &step * scale;
            let cll = loglik(&cand);
            if cll >= ll - slack {
                beta = cand;
                ll = cll.max(ll);
                break;
            }
            scale *= 0.5;
            if scale < 1e-10 {
                return Err(BoostError::NonConvergence(iter + 1));
            }
        }
    }
    Err(BoostError::NonConvergence(HPP_MAX_ITER))
}

impl HppModel {
    pub fn rate(&self, x: &[f64]) -> f64 {
        match &self.coefficients {
            None => 0.0,
            Some(c) => (c[0] + c[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()).exp(),
        }
    }

    pub fn predict(&self, x: &[f64], grid: &TimeGrid) -> Curve {
        let r = self.rate(x);
        Curve::from_fn(*grid, |t| r * t)
    }
}

/// Boosted constant-leaf trees on rows `(x_i, t_j) -> mcf_i(t_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeFeatureModel {
    pub config: BoostConfig,
    pub p: usize,
    pub trees: Vec<Tree<CurveLeaf>>,
}

/// Defaults for the time-as-feature booster: shallow-ish trees with mild
/// shrinkage, on a per-row loss scale.
pub fn time_feature_default_config() -> BoostConfig {
    BoostConfig {
        n_trees: 50,
        gamma1: 1.0,
        gamma2: 1.0,
        d_max: 8,
        min_leaf: 20,
        max_thresholds: 32,
        learning_rate: 0.5,
        seed: 0,
    }
}

pub fn time_feature_booster_fit(train: &Dataset, config: &BoostConfig) -> Result<TimeFeatureModel> {
    config.validate()?;
    let grid = *train.grid();
    let mut rows = Vec::new();
    let mut target = Vec::new();
    for ind in train.individuals() {
        let mcf = empirical_mcf(&ind.events, &grid);
        for j in 0..mcf.observed_len() {
            let mut r = ind.x.clone();
            r.push(grid.point(j));
            rows.push(r);
            target.push(mcf.values()[j]);
        }
    }
    let p = train.p();
    if rows.is_empty() {
        return Ok(TimeFeatureModel {
            config: *config,
            p,
            trees: vec![],
        });
    }
    let features = FeatureMatrix::from_rows(&rows)?;
    let all: Vec<usize> = (0..rows.len()).collect();
    let mut pred = vec![0.0; rows.len()];
    let hess = vec![1.0; rows.len()];
    let weights = [1.0];
    let mut trees = Vec::with_capacity(config.n_trees);
    for _ in 0..config.n_trees {
        let grads: Vec<f64> = pred.iter().zip(&target).map(|(a, b)| a - b).collect();
        let crit = CurveCriterion {
            grads: &grads,
            hess: &hess,
            weights: &weights,
            gamma1: config.gamma1,
            gamma2: config.gamma2,
        };
        let (mut tree, assignment) = grow_tree(&crit, &features, &all, &config.limits());
        for node in &mut tree.nodes {
            if let Node::Leaf(leaf) = node {
                leaf.leaf_values[0] *= config.learning_rate;
            }
        }
        for (row, node) in assignment {
            if let Node::Leaf(leaf) = &tree.nodes[node] {
                pred[row] += leaf.leaf_values[0];
            }
        }
        trees.push(tree);
    }
    Ok(TimeFeatureModel {
        config: *config,
        p,
        trees,
    })
}

impl TimeFeatureModel {
    pub fn predict_at(&self, x: &[f64], times: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.p {
            return Err(BoostError::DimensionMismatch {
                expected: self.p,
                got: x.len(),
            });
        }
        let mut row = x.to_vec();
        row.push(0.0);
        Ok(times
            .iter()
            .map(|&t| {
                row[self.p] = t;
                self.trees.iter().map(|tree| tree.leaf_for(&row).leaf_values[0]).sum()
            })
            .collect())
    }

    pub fn predict(&self, x: &[f64], grid: &TimeGrid) -> Result<Curve> {
        Curve::new(*grid, self.predict_at(x, &grid.points())?)
    }
}
