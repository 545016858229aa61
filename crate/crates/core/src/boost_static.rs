//! Boosted trees whose leaves are time curves, for static features only.
//!
//! Each round fits a tree to the first and second derivatives (`g`, `h`) of the
//! squared L2 loss between every individual's empirical MCF and the current
//! ensemble prediction. A leaf holding individuals `I_d` minimises
//! `int g_d f + 1/2 (h_d + gamma2) f^2 dt`, giving `f = -g_d / (h_d + gamma2)`
//! pointwise, and a split is taken when
//! `G1 = score(parent) - score(left) - score(right) - gamma1 > 0`.

use serde::{Deserialize, Serialize};

use crate::data::{curve_integral, empirical_mcf, Curve, Dataset, TimeGrid};
use crate::error::{BoostError, Result};
use crate::tree::{find_best_split, grow_tree, FeatureMatrix, GrowthLimits, SplitChoice, SplitCriterion, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    /// Number of trees K.
    pub n_trees: usize,
    /// Leaf-count penalty.
    pub gamma1: f64,
    /// Shrinkage penalty on leaf functions.
    pub gamma2: f64,
    pub d_max: usize,
    pub min_leaf: usize,
    pub max_thresholds: usize,
    /// Multiplier on every fitted leaf. 1.0 leaves shrinkage to `gamma2` alone.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            n_trees: 50,
            gamma1: 300.0,
            gamma2: 100.0,
            d_max: 4,
            min_leaf: 5,
            max_thresholds: 32,
            learning_rate: 1.0,
            seed: 0,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma1 >= 0.0 && self.gamma1.is_finite()) {
            return Err(BoostError::invalid(format!("gamma1 must be >= 0, got {}", self.gamma1)));
        }
        if !(self.gamma2 >= 0.0 && self.gamma2.is_finite()) {
            return Err(BoostError::invalid(format!("gamma2 must be >= 0, got {}", self.gamma2)));
        }
        if self.d_max < 2 {
            return Err(BoostError::invalid(format!("d_max must be >= 2, got {}", self.d_max)));
        }
        if self.min_leaf < 1 {
            return Err(BoostError::invalid("min_leaf must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(BoostError::invalid("learning rate must be positive"));
        }
        Ok(())
    }

    pub fn limits(&self) -> GrowthLimits {
        GrowthLimits {
            d_max: self.d_max,
            min_leaf: self.min_leaf,
            max_thresholds: self.max_thresholds,
        }
    }
}

/// First and second derivative of `1/2 (mu_hat - mu_tilde)^2` with respect to
/// `mu_hat`, zero outside the observed region.
pub fn gradients(mu_tilde: &Curve, mu_hat: &Curve) -> Result<(Curve, Curve)> {
    let g = mu_hat.zip_with(mu_tilde, |a, b| a - b)?;
    let observed = mu_tilde.observed_len();
    let gv = g
        .values()
        .iter()
        .enumerate()
        .map(|(j, &v)| if j < observed { v } else { 0.0 })
        .collect();
    let hv = (0..g.values().len())
        .map(|j| if j < observed { 1.0 } else { 0.0 })
        .collect();
    let grid = *mu_tilde.grid();
    Ok((
        Curve::with_observed(grid, gv, observed)?,
        Curve::with_observed(grid, hv, observed)?,
    ))
}

fn leaf_value(g: f64, h: f64, gamma2: f64) -> f64 {
    let denom = h + gamma2;
    if denom > 0.0 {
        -g / denom
    } else {
        0.0
    }
}

fn score_term(g: f64, h: f64, gamma2: f64) -> f64 {
    let denom = h + gamma2;
    if denom > 0.0 {
        g * g / denom
    } else {
        0.0
    }
}

/// Minimiser of the node objective: `-gsum / (hsum + gamma2)` pointwise.
pub fn optimal_leaf(gsum: &Curve, hsum: &Curve, gamma2: f64) -> Result<Curve> {
    let f = gsum.zip_with(hsum, |g, h| leaf_value(g, h, gamma2))?;
    Curve::new(*f.grid(), f.values().to_vec())
}

/// Node objective at its optimal leaf, `-1/2 int gsum^2 / (hsum + gamma2) dt`.
pub fn node_score(gsum: &Curve, hsum: &Curve, gamma2: f64) -> Result<f64> {
    let ratio = gsum.zip_with(hsum, |g, h| score_term(g, h, gamma2))?;
    let ratio = Curve::new(*ratio.grid(), ratio.values().to_vec())?;
    let one = Curve::constant(*gsum.grid(), 1.0);
    Ok(-0.5 * curve_integral(&ratio, &one)?)
}

pub fn split_gain_g1(parent_score: f64, left_score: f64, right_score: f64, gamma1: f64) -> f64 {
    parent_score - left_score - right_score - gamma1
}

/// Leaf payload of a static tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveLeaf {
    pub leaf_values: Vec<f64>,
}

/// Per-row gradient blocks of a common width, integrated with `weights`.
///
/// Static trees use one block of `m` grid values per individual; the
/// time-as-feature baseline uses blocks of width 1.
pub struct CurveCriterion<'a> {
    pub grads: &'a [f64],
    pub hess: &'a [f64],
    pub weights: &'a [f64],
    pub gamma1: f64,
    pub gamma2: f64,
}

impl CurveCriterion<'_> {
    fn width(&self) -> usize {
        self.weights.len()
    }

    /// Objective value of an aggregated node at its optimal leaf.
    pub fn score_of(&self, gsum: &[f64], hsum: &[f64]) -> f64 {
        -0.5 * self
            .weights
            .iter()
            .zip(gsum)
            .zip(hsum)
            .map(|((w, &g), &h)| w * score_term(g, h, self.gamma2))
            .sum::<f64>()
    }
}

impl SplitCriterion for CurveCriterion<'_> {
    type Acc = (Vec<f64>, Vec<f64>);
    type Leaf = CurveLeaf;

    fn empty(&self) -> Self::Acc {
        (vec![0.0; self.width()], vec![0.0; self.width()])
    }

    fn add_row(&self, acc: &mut Self::Acc, row: usize) {
        let w = self.width();
        let g = &self.grads[row * w..(row + 1) * w];
        let h = &self.hess[row * w..(row + 1) * w];
        for (a, &v) in acc.0.iter_mut().zip(g) {
            *a += v;
        }
        for (a, &v) in acc.1.iter_mut().zip(h) {
            *a += v;
        }
    }

    fn difference(&self, total: &Self::Acc, part: &Self::Acc) -> Self::Acc {
        (
            total.0.iter().zip(&part.0).map(|(a, b)| a - b).collect(),
            total.1.iter().zip(&part.1).map(|(a, b)| a - b).collect(),
        )
    }

    fn evaluate(&self, acc: &Self::Acc, _warm: Option<&CurveLeaf>) -> (f64, CurveLeaf) {
        let leaf_values = acc
            .0
            .iter()
            .zip(&acc.1)
            .map(|(&g, &h)| leaf_value(g, h, self.gamma2))
            .collect();
        (self.score_of(&acc.0, &acc.1), CurveLeaf { leaf_values })
    }

    fn split_penalty(&self) -> f64 {
        self.gamma1
    }
}

/// Gradient state of every individual, flattened `n x m`.
#[derive(Debug, Clone)]
pub struct GradientTable {
    pub grads: Vec<f64>,
    pub hess: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GradientTable {
    pub fn from_curves(gs: &[Curve], hs: &[Curve]) -> Result<Self> {
        let grid = gs
            .first()
            .map(|c| *c.grid())
            .ok_or_else(|| BoostError::invalid("no gradient curves"))?;
        let mut grads = Vec::with_capacity(gs.len() * grid.len());
        let mut hess = Vec::with_capacity(gs.len() * grid.len());
        for (g, h) in gs.iter().zip(hs) {
            if *g.grid() != grid || *h.grid() != grid {
                return Err(BoostError::GridMismatch);
            }
            grads.extend(g.observed_values());
            hess.extend(h.observed_values());
        }
        Ok(Self {
            grads,
            hess,
            weights: grid.trapezoid_weights(grid.len()),
        })
    }

    pub fn criterion(&self, gamma1: f64, gamma2: f64) -> CurveCriterion<'_> {
        CurveCriterion {
            grads: &self.grads,
            hess: &self.hess,
            weights: &self.weights,
            gamma1,
            gamma2,
        }
    }
}

/// Best split of the node holding `rows`, scored by G1.
pub fn find_best_split_static(
    features: &FeatureMatrix,
    rows: &[usize],
    table: &GradientTable,
    config: &BoostConfig,
) -> Option<SplitChoice<CurveLeaf>> {
    let crit = table.criterion(config.gamma1, config.gamma2);
    let mut acc = crit.empty();
    for &i in rows {
        crit.add_row(&mut acc, i);
    }
    let (score, leaf) = crit.evaluate(&acc, None);
    find_best_split(&crit, features, rows, &acc, score, &leaf, &config.limits())
}

/// Grows one curve-leaf tree on the given gradient state.
pub fn grow_static_tree(
    features: &FeatureMatrix,
    table: &GradientTable,
    config: &BoostConfig,
) -> (Tree<CurveLeaf>, Vec<(usize, usize)>) {
    let crit = table.criterion(config.gamma1, config.gamma2);
    let rows: Vec<usize> = (0..features.n()).collect();
    grow_tree(&crit, features, &rows, &config.limits())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStatic {
    pub config: BoostConfig,
    pub grid: TimeGrid,
    pub p: usize,
    pub trees: Vec<Tree<CurveLeaf>>,
    /// Summed split gains per feature, before the `1/K^2` factor.
    pub importance_raw: Vec<f64>,
}

/// Per-round training diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    /// Squared-L2 training loss after `k` trees, `k = 0..=K`.
    pub loss: Vec<f64>,
    /// Leaves of each tree.
    pub leaves: Vec<usize>,
}

/// `sum_i int 1/2 (mu_hat_i - mu_tilde_i)^2 dt` over each observed region,
/// integrated with the same weights the boosting objective uses.
pub fn training_loss(mu_tilde: &[Curve], mu_hat: &[Curve]) -> f64 {
    let Some(first) = mu_tilde.first() else {
        return 0.0;
    };
    let w = first.grid().trapezoid_weights(first.grid().len());
    mu_tilde
        .iter()
        .zip(mu_hat)
        .map(|(t, h)| {
            let obs = t.observed_len();
            (0..obs)
                .map(|j| 0.5 * w[j] * (h.values()[j] - t.values()[j]).powi(2))
                .sum::<f64>()
        })
        .sum()
}

pub fn fit_static(dataset: &Dataset, config: &BoostConfig) -> Result<(EnsembleStatic, TrainingTrace)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(BoostError::invalid("dataset is empty"));
    }
    let grid = *dataset.grid();
    let m = grid.len();
    let n = dataset.len();
    let features = FeatureMatrix::from_rows(&dataset.feature_rows())?;
    let mu_tilde: Vec<Curve> = dataset
        .individuals()
        .iter()
        .map(|ind| empirical_mcf(&ind.events, &grid))
        .collect();
    let mut mu_hat = vec![Curve::zeros(grid); n];
    let weights = grid.trapezoid_weights(m);

    let mut trees = Vec::with_capacity(config.n_trees);
    let mut importance_raw = vec![0.0; dataset.p()];
    let mut trace = TrainingTrace {
        loss: vec![training_loss(&mu_tilde, &mu_hat)],
        leaves: Vec::with_capacity(config.n_trees),
    };

    let mut grads = vec![0.0; n * m];
    let mut hess = vec![0.0; n * m];
    for _ in 0..config.n_trees {
        for i in 0..n {
            let obs = mu_tilde[i].observed_len();
            for j in 0..m {
                let (g, h) = if j < obs {
                    (mu_hat[i].values()[j] - mu_tilde[i].values()[j], 1.0)
                } else {
                    (0.0, 0.0)
                };
                grads[i * m + j] = g;
                hess[i * m + j] = h;
            }
        }
        let table = GradientTable {
            grads: std::mem::take(&mut grads),
            hess: std::mem::take(&mut hess),
            weights: weights.clone(),
        };
        let (mut tree, assignment) = grow_static_tree(&features, &table, config);
        GradientTable {
            grads,
            hess,
            ..
        } = table;

        if config.learning_rate != 1.0 {
            for node in &mut tree.nodes {
                if let crate::tree::Node::Leaf(leaf) = node {
                    for v in &mut leaf.leaf_values {
                        *v *= config.learning_rate;
                    }
                }
            }
        }
        for (row, node) in assignment {
            let crate::tree::Node::Leaf(leaf) = &tree.nodes[node] else {
                unreachable!("assignment points at leaves");
            };
            let updated = mu_hat[row]
                .values()
                .iter()
                .zip(&leaf.leaf_values)
                .map(|(a, b)| a + b)
                .collect();
            mu_hat[row] = Curve::new(grid, updated)?;
        }
        for (f, gain) in tree.split_gains() {
            importance_raw[f] += gain;
        }
        trace.leaves.push(tree.leaf_count());
        trace.loss.push(training_loss(&mu_tilde, &mu_hat));
        trees.push(tree);
    }

    Ok((
        EnsembleStatic {
            config: *config,
            grid,
            p: dataset.p(),
            trees,
            importance_raw,
        },
        trace,
    ))
}

impl EnsembleStatic {
    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.p {
            return Err(BoostError::DimensionMismatch {
                expected: self.p,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Sum of the leaf curves `x` reaches in every tree.
    pub fn predict(&self, x: &[f64]) -> Result<Curve> {
        self.check_x(x)?;
        let mut values = vec![0.0; self.grid.len()];
        for tree in &self.trees {
            for (v, l) in values.iter_mut().zip(&tree.leaf_for(x).leaf_values) {
                *v += l;
            }
        }
        Curve::new(self.grid, values)
    }

    /// Prediction floored at zero.
    pub fn predict_clamped(&self, x: &[f64]) -> Result<Curve> {
        Ok(self.predict(x)?.map(|v| v.max(0.0)))
    }

    /// Prediction at arbitrary times: interpolated on the grid, continued
    /// with the last segment's slope past `t_max`.
    pub fn predict_at(&self, x: &[f64], times: &[f64]) -> Result<Vec<f64>> {
        let c = self.predict(x)?;
        Ok(times.iter().map(|&t| c.value_at(t)).collect())
    }

    /// `w_i = (1/K^2) sum_k sum_{splits on i} gain`, optionally rescaled so
    /// the largest is 1 and the smallest 0.
    pub fn feature_importance(&self, standardize: bool) -> Vec<f64> {
        importance(&self.importance_raw, self.trees.len(), standardize)
    }
}

pub(crate) fn importance(raw: &[f64], n_trees: usize, standardize: bool) -> Vec<f64> {
    let k2 = (n_trees.max(1) as f64).powi(2);
    let w: Vec<f64> = raw.iter().map(|g| g / k2).collect();
    if !standardize {
        return w;
    }
    let lo = w.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; w.len()];
    }
    w.iter().map(|v| (v - lo) / (hi - lo)).collect()
}
