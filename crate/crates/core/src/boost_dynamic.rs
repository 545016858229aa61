//! Boosting with time-varying covariates.
//!
//! Trees still split on static features, but a leaf `d` now contributes
//! `f_d(t) = sum_l sum_j beta_{j,l} int_0^t B_j(z_l(tau)) dtau`, so the curve
//! it adds differs between the individuals it holds. Leaf coefficients
//! minimise `F2(beta) + 1/2 gamma2 sum_l ||beta_l||` and splits use
//! `G2 = F2(parent) - F2(left) - F2(right) - 2 gamma1`, with every `F2`
//! evaluated at its own node's solution and without the penalty term.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::boost_static::{importance, training_loss, BoostConfig, TrainingTrace};
use crate::data::{empirical_mcf, Curve, Dataset, DynamicSeries, TimeGrid};
use crate::error::{BoostError, Result};
use crate::group_lasso::{group_lasso_fit, Groups, NodeQuadratic, SolveStatus, SolverOptions};
use crate::spline::{make_basis, IntegratedBasis, SplineBasis};
use crate::tree::{grow_tree, FeatureMatrix, Node, SplitCriterion, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicConfig {
    pub boost: BoostConfig,
    /// Internal knots per dynamic feature.
    pub u: usize,
    /// Spline order; basis functions have degree `v - 1`.
    pub v: usize,
}

impl Default for DynamicConfig {
    fn default() -> Self {
        Self {
            boost: BoostConfig::default(),
            u: 2,
            v: 3,
        }
    }
}

impl DynamicConfig {
    pub fn validate(&self) -> Result<()> {
        self.boost.validate()?;
        if self.v < 1 {
            return Err(BoostError::invalid("spline order v must be at least 1"));
        }
        Ok(())
    }

    pub fn n_basis(&self) -> usize {
        self.u + self.v
    }
}

/// Spline coefficients of one leaf, groups of `u + v` per dynamic feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynLeaf {
    pub beta: Vec<f64>,
}

/// Integrated bases of every individual on the training grid, plus the
/// constant part of their node quadratics.
pub struct DynamicDesign {
    pub phis: Vec<IntegratedBasis>,
    /// `A_i = sum_j w_j h_ij Phi_ij Phi_ij'`.
    pub a: Vec<DMatrix<f64>>,
    pub observed: Vec<usize>,
    pub weights: Vec<f64>,
    pub groups: Groups,
}

impl DynamicDesign {
    pub fn build(dataset: &Dataset, bases: &[SplineBasis]) -> Result<Self> {
        let grid = *dataset.grid();
        let weights = grid.trapezoid_weights(grid.len());
        let nb = bases.first().map(SplineBasis::len).unwrap_or(0);
        let groups = Groups {
            size: nb,
            count: bases.len(),
        };
        let mut phis = Vec::with_capacity(dataset.len());
        let mut a = Vec::with_capacity(dataset.len());
        let mut observed = Vec::with_capacity(dataset.len());
        for ind in dataset.individuals() {
            if ind.z.len() != bases.len() {
                return Err(BoostError::invalid(format!(
                    "individual {} has {} dynamic series, expected {}",
                    ind.id,
                    ind.z.len(),
                    bases.len()
                )));
            }
            let phi = IntegratedBasis::on_grid(bases, &ind.z, &grid)?;
            let obs = grid.observed_len(ind.events.censor());
            a.push(assemble_a(&phi, &weights, obs));
            phis.push(phi);
            observed.push(obs);
        }
        Ok(Self {
            phis,
            a,
            observed,
            weights,
            groups,
        })
    }

    /// `b_i = sum_j w_j g_ij Phi_ij` for gradients stored row-major `n x m`.
    pub fn linear_terms(&self, grads: &[f64]) -> Vec<DVector<f64>> {
        let m = self.weights.len();
        self.phis
            .iter()
            .enumerate()
            .map(|(i, phi)| {
                let mut b = DVector::zeros(phi.width());
                for j in 0..self.observed[i] {
                    let c = self.weights[j] * grads[i * m + j];
                    if c != 0.0 {
                        for (bk, &p) in b.iter_mut().zip(phi.row(j)) {
                            *bk += c * p;
                        }
                    }
                }
                b
            })
            .collect()
    }
}

fn assemble_a(phi: &IntegratedBasis, weights: &[f64], observed: usize) -> DMatrix<f64> {
    let w = phi.width();
    let mut a = DMatrix::zeros(w, w);
    for (j, &wj) in weights.iter().enumerate().take(observed) {
        let row = DVector::from_column_slice(phi.row(j));
        a.ger(wj, &row, &row, 1.0);
    }
    a
}

/// Node quadratic of the individuals in `rows`, given per-individual linear
/// terms and the design's `A_i`.
pub fn assemble_quadratic(design: &DynamicDesign, b: &[DVector<f64>], rows: &[usize]) -> Result<NodeQuadratic> {
    let dim = design.groups.dim();
    let mut q = NodeQuadratic::zeros(dim);
    for &i in rows {
        if b[i].len() != dim {
            return Err(BoostError::DimensionMismatch {
                expected: dim,
                got: b[i].len(),
            });
        }
        q.a += &design.a[i];
        q.b += &b[i];
    }
    Ok(q)
}

pub fn split_gain_g2(parent_f2: f64, left_f2: f64, right_f2: f64, gamma1: f64) -> f64 {
    parent_f2 - left_f2 - right_f2 - 2.0 * gamma1
}

pub struct DynamicCriterion<'a> {
    pub design: &'a DynamicDesign,
    pub b: &'a [DVector<f64>],
    pub gamma1: f64,
    pub gamma2: f64,
    pub solver: SolverOptions,
    pub warnings: &'a std::sync::atomic::AtomicUsize,
}

impl DynamicCriterion<'_> {
    /// Group-lasso solution of a node and its unpenalised `F2`.
    pub fn fit_node(&self, q: &NodeQuadratic, warm: Option<&[f64]>) -> (f64, Vec<f64>) {
        let fit = group_lasso_fit(q, self.gamma2, self.design.groups, warm, &self.solver)
            .expect("node quadratic matches the design groups");
        if fit.status == SolveStatus::MaxSweeps {
            self.warnings.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        }
        (q.f2(&fit.beta), fit.beta)
    }
}

impl SplitCriterion for DynamicCriterion<'_> {
    type Acc = NodeQuadratic;
    type Leaf = DynLeaf;

    fn empty(&self) -> NodeQuadratic {
        NodeQuadratic::zeros(self.design.groups.dim())
    }

    fn add_row(&self, acc: &mut NodeQuadratic, row: usize) {
        acc.a += &self.design.a[row];
        acc.b += &self.b[row];
    }

    fn difference(&self, total: &NodeQuadratic, part: &NodeQuadratic) -> NodeQuadratic {
        total.sub(part)
    }

    fn evaluate(&self, acc: &NodeQuadratic, warm: Option<&DynLeaf>) -> (f64, DynLeaf) {
        let (f2, beta) = self.fit_node(acc, warm.map(|l| l.beta.as_slice()));
        (f2, DynLeaf { beta })
    }

    fn split_penalty(&self) -> f64 {
        2.0 * self.gamma1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDynamic {
    pub config: DynamicConfig,
    pub grid: TimeGrid,
    pub p: usize,
    pub q: usize,
    pub bases: Vec<SplineBasis>,
    pub trees: Vec<Tree<DynLeaf>>,
    pub importance_raw: Vec<f64>,
    /// Training range of each static feature.
    pub x_ranges: Vec<(f64, f64)>,
}

/// One basis per dynamic feature over the pooled samples of all individuals.
pub fn build_bases(dataset: &Dataset, u: usize, v: usize) -> Result<Vec<SplineBasis>> {
    (0..dataset.q())
        .map(|l| {
            let samples: Vec<f64> = dataset
                .individuals()
                .iter()
                .flat_map(|ind| ind.z[l].values().iter().copied())
                .collect();
            make_basis(&samples, u, v)
        })
        .collect()
}

pub fn fit_dynamic(dataset: &Dataset, config: &DynamicConfig) -> Result<(EnsembleDynamic, TrainingTrace, usize)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(BoostError::invalid("dataset is empty"));
    }
    if dataset.q() == 0 {
        return Err(BoostError::invalid("dynamic mode needs at least one dynamic feature"));
    }
    let grid = *dataset.grid();
    let m = grid.len();
    let n = dataset.len();
    let bases = build_bases(dataset, config.u, config.v)?;
    let design = DynamicDesign::build(dataset, &bases)?;
    let features = FeatureMatrix::from_rows(&dataset.feature_rows())?;
    let mu_tilde: Vec<Curve> = dataset
        .individuals()
        .iter()
        .map(|ind| empirical_mcf(&ind.events, &grid))
        .collect();
    let mut mu_hat = vec![vec![0.0; m]; n];
    let warnings = std::sync::atomic::AtomicUsize::new(0);
    let bc = &config.boost;

    let mut trees = Vec::with_capacity(bc.n_trees);
    let mut importance_raw = vec![0.0; dataset.p()];
    let as_curves = |mu: &[Vec<f64>]| -> Result<Vec<Curve>> { mu.iter().map(|v| Curve::new(grid, v.clone())).collect() };
    let mut trace = TrainingTrace {
        loss: vec![training_loss(&mu_tilde, &as_curves(&mu_hat)?)],
        leaves: Vec::with_capacity(bc.n_trees),
    };

    let mut grads = vec![0.0; n * m];
    let rows: Vec<usize> = (0..n).collect();
    for _ in 0..bc.n_trees {
        for i in 0..n {
            let obs = design.observed[i];
            for j in 0..m {
                grads[i * m + j] = if j < obs {
                    mu_hat[i][j] - mu_tilde[i].values()[j]
                } else {
                    0.0
                };
            }
        }
        let b = design.linear_terms(&grads);
        let crit = DynamicCriterion {
            design: &design,
            b: &b,
            gamma1: bc.gamma1,
            gamma2: bc.gamma2,
            solver: SolverOptions::default(),
            warnings: &warnings,
        };
        let (mut tree, assignment) = grow_tree(&crit, &features, &rows, &bc.limits());
        if bc.learning_rate != 1.0 {
            for node in &mut tree.nodes {
                if let Node::Leaf(leaf) = node {
                    for v in &mut leaf.beta {
                        *v *= bc.learning_rate;
                    }
                }
            }
        }
        for (row, node) in assignment {
            let Node::Leaf(leaf) = &tree.nodes[node] else {
                unreachable!("assignment points at leaves");
            };
            for (acc, add) in mu_hat[row].iter_mut().zip(design.phis[row].apply(&leaf.beta)) {
                *acc += add;
            }
        }
        for (f, gain) in tree.split_gains() {
            importance_raw[f] += gain;
        }
        trace.leaves.push(tree.leaf_count());
        trace.loss.push(training_loss(&mu_tilde, &as_curves(&mu_hat)?));
        trees.push(tree);
    }

    let x_ranges = (0..dataset.p())
        .map(|f| {
            (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
                let v = features.get(i, f);
                (lo.min(v), hi.max(v))
            })
        })
        .collect();
    Ok((
        EnsembleDynamic {
            config: *config,
            grid,
            p: dataset.p(),
            q: dataset.q(),
            bases,
            trees,
            importance_raw,
            x_ranges,
        },
        trace,
        warnings.into_inner(),
    ))
}

impl EnsembleDynamic {
    /// Sum of the leaf coefficients `x` reaches in every tree.
    pub fn total_beta(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.p {
            return Err(BoostError::DimensionMismatch {
                expected: self.p,
                got: x.len(),
            });
        }
        let dim = self.q * self.config.n_basis();
        let mut beta = vec![0.0; dim];
        for tree in &self.trees {
            for (a, b) in beta.iter_mut().zip(&tree.leaf_for(x).beta) {
                *a += b;
            }
        }
        Ok(beta)
    }

    fn check_series(&self, z: &[DynamicSeries]) -> Result<()> {
        if z.len() != self.q {
            return Err(BoostError::invalid(format!(
                "missing dynamic series: got {}, model needs {}",
                z.len(),
                self.q
            )));
        }
        Ok(())
    }

    /// `mu_hat(t)` at arbitrary ascending times, including past the training
    /// horizon when `z` covers them.
    pub fn predict_at(&self, x: &[f64], z: &[DynamicSeries], times: &[f64]) -> Result<Vec<f64>> {
        self.check_series(z)?;
        let beta = self.total_beta(x)?;
        let phi = IntegratedBasis::build(&self.bases, z, times)?;
        Ok(phi.apply(&beta))
    }

    pub fn predict(&self, x: &[f64], z: &[DynamicSeries]) -> Result<Curve> {
        Curve::new(self.grid, self.predict_at(x, z, &self.grid.points())?)
    }

    pub fn feature_importance(&self, standardize: bool) -> Vec<f64> {
        importance(&self.importance_raw, self.trees.len(), standardize)
    }

    /// Summed coefficients at the centres of a `resolution x resolution` grid
    /// over the static feature plane.
    pub fn beta_by_region(&self, resolution: usize) -> Result<BetaMap> {
        if self.p != 2 {
            return Err(BoostError::Unsupported(format!(
                "coefficient map needs exactly 2 static features, model has {}",
                self.p
            )));
        }
        let nb = self.config.n_basis();
        let mut header = vec!["x1".to_string(), "x2".to_string()];
        for l in 0..self.q {
            for j in 0..nb {
                header.push(format!("beta_{}_{}", j + 1, l + 1));
            }
        }
        if self.trees.is_empty() || resolution == 0 {
            return Ok(BetaMap { header, rows: vec![] });
        }
        let centre = |(lo, hi): (f64, f64), k: usize| lo + (hi - lo) * (k as f64 + 0.5) / resolution as f64;
        let mut rows = Vec::with_capacity(resolution * resolution);
        for a in 0..resolution {
            for b in 0..resolution {
                let x = [centre(self.x_ranges[0], a), centre(self.x_ranges[1], b)];
                let mut row = x.to_vec();
                row.extend(self.total_beta(&x)?);
                rows.push(row);
            }
        }
        Ok(BetaMap { header, rows })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaMap {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}
