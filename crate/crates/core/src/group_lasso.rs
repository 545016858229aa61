//! Group-lasso regularised quadratic:
//! `min_beta  b'beta + 1/2 beta' A beta + 1/2 gamma2 sum_l ||beta_l||`
//! with equal-width groups, solved by block coordinate descent.
//!
//! Each block subproblem is solved exactly: with `A_ll = V S V'` and
//! `c = b_l + sum_{k != l} A_lk beta_k`, the block is zero when
//! `||c|| <= lambda`, otherwise `beta_l = -V (S + lambda/r)^{-1} V'c` where the
//! norm `r` solves `sum_k c_k^2 / (s_k r + lambda)^2 = 1`.
//!
//! Sweeps alone converge linearly and crawl when groups are strongly
//! coupled, so every sweep ends with damped Newton steps on the groups that
//! are currently non-zero. Any step that fails to lower the objective is
//! dropped.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{BoostError, Result};

/// `F2(beta) = b'beta + 1/2 beta' A beta`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeQuadratic {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl NodeQuadratic {
    pub fn zeros(dim: usize) -> Self {
        Self {
            a: DMatrix::zeros(dim, dim),
            b: DVector::zeros(dim),
        }
    }

    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() || a.nrows() != b.len() {
            return Err(BoostError::DimensionMismatch {
                expected: b.len(),
                got: a.nrows(),
            });
        }
        Ok(Self { a, b })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn f2(&self, beta: &[f64]) -> f64 {
        let beta = DVector::from_column_slice(beta);
        self.b.dot(&beta) + 0.5 * beta.dot(&(&self.a * &beta))
    }

    pub fn add_assign(&mut self, other: &NodeQuadratic) {
        self.a += &other.a;
        self.b += &other.b;
    }

    pub fn sub(&self, other: &NodeQuadratic) -> NodeQuadratic {
        NodeQuadratic {
            a: &self.a - &other.a,
            b: &self.b - &other.b,
        }
    }
}

/// `count` contiguous groups of `size` coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Groups {
    pub size: usize,
    pub count: usize,
}

impl Groups {
    pub fn dim(&self) -> usize {
        self.size * self.count
    }

    fn range(&self, l: usize) -> std::ops::Range<usize> {
        l * self.size..(l + 1) * self.size
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_sweeps: usize,
    /// Stop once the KKT residual falls below this, relative to
    /// `max(1, |b|_inf)`.
    pub kkt_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 500,
            kkt_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    /// Sweep budget exhausted; the best iterate is returned.
    MaxSweeps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupLassoFit {
    pub beta: Vec<f64>,
    /// Penalised objective at the start and after every sweep.
    pub objective_trace: Vec<f64>,
    pub sweeps: usize,
    pub status: SolveStatus,
    pub kkt: f64,
}

fn group_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn group_lasso_objective(q: &NodeQuadratic, beta: &[f64], gamma2: f64, groups: Groups) -> f64 {
    let pen: f64 = (0..groups.count).map(|l| group_norm(&beta[groups.range(l)])).sum();
    q.f2(beta) + 0.5 * gamma2 * pen
}

/// Largest violation of the optimality conditions over all groups.
pub fn kkt_residual(q: &NodeQuadratic, beta: &[f64], gamma2: f64, groups: Groups) -> f64 {
    let lambda = 0.5 * gamma2;
    let grad = &q.b + &q.a * DVector::from_column_slice(beta);
    (0..groups.count)
        .map(|l| {
            let r = groups.range(l);
            let g = &grad.as_slice()[r.clone()];
            let bl = &beta[r];
            let norm = group_norm(bl);
            if norm == 0.0 {
                (group_norm(g) - lambda).max(0.0)
            } else {
                let v: Vec<f64> = g.iter().zip(bl).map(|(gi, bi)| gi + lambda * bi / norm).collect();
                group_norm(&v)
            }
        })
        .fold(0.0, f64::max)
}

/// Smallest `gamma2` at which `beta = 0` is optimal: `2 max_l ||b_l||`.
pub fn zero_threshold(q: &NodeQuadratic, groups: Groups) -> f64 {
    (0..groups.count)
        .map(|l| 2.0 * group_norm(&q.b.as_slice()[groups.range(l)]))
        .fold(0.0, f64::max)
}

struct Block {
    vectors: DMatrix<f64>,
    values: Vec<f64>,
    kept: Vec<usize>,
}

impl Block {
    fn new(a: DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(a);
        let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let smax = values.iter().copied().fold(0.0, f64::max);
        let kept = (0..values.len()).filter(|&k| values[k] > 1e-12 * smax && smax > 0.0).collect();
        Self {
            vectors: eig.eigenvectors,
            values,
            kept,
        }
    }

    /// Exact minimiser of `c'x + 1/2 x'A_ll x + lambda ||x||`.
    fn solve(&self, c: &DVector<f64>, lambda: f64) -> DVector<f64> {
        let n = c.len();
        let ct = self.vectors.transpose() * c;
        let kept: Vec<(f64, f64)> = self.kept.iter().map(|&k| (self.values[k], ct[k])).collect();
        let cnorm = kept.iter().map(|(_, c)| c * c).sum::<f64>().sqrt();
        if kept.is_empty() || cnorm <= lambda {
            return DVector::zeros(n);
        }
        let mut xt = DVector::zeros(n);
        if lambda == 0.0 {
            for &k in &self.kept {
                xt[k] = -ct[k] / self.values[k];
            }
            return &self.vectors * xt;
        }
        let smin = kept.iter().map(|(s, _)| *s).fold(f64::INFINITY, f64::min);
        let excess = |r: f64| kept.iter().map(|(s, c)| (c / (s * r + lambda)).powi(2)).sum::<f64>() - 1.0;
        let (mut lo, mut hi) = (0.0, cnorm / smin);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if excess(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r = 0.5 * (lo + hi);
        for &k in &self.kept {
            xt[k] = -r * ct[k] / (self.values[k] * r + lambda);
        }
        &self.vectors * xt
    }
}

fn block_value(c: &DVector<f64>, a: &DMatrix<f64>, x: &DVector<f64>, lambda: f64) -> f64 {
    c.dot(x) + 0.5 * x.dot(&(a * x)) + lambda * x.norm()
}

const NEWTON_STEPS: usize = 5;

/// Damped Newton steps on the non-zero groups with the zero groups held
/// fixed. Returns whether any step was taken.
fn newton_polish(q: &NodeQuadratic, beta: &mut DVector<f64>, gamma2: f64, groups: Groups) -> bool {
    let lambda = 0.5 * gamma2;
    let active: Vec<usize> = (0..groups.count)
        .filter(|&l| beta.rows(l * groups.size, groups.size).norm() > 0.0)
        .collect();
    if active.is_empty() {
        return false;
    }
    let idx: Vec<usize> = active.iter().flat_map(|&l| groups.range(l)).collect();
    let k = idx.len();
    let mut moved = false;
    let mut obj = group_lasso_objective(q, beta.as_slice(), gamma2, groups);
    for _ in 0..NEWTON_STEPS {
        let grad = &q.b + &q.a * &*beta;
        let mut g = DVector::from_fn(k, |i, _| grad[idx[i]]);
        let mut h = DMatrix::from_fn(k, k, |i, j| q.a[(idx[i], idx[j])]);
        for (pos, &l) in active.iter().enumerate() {
            let off = pos * groups.size;
            let bl = beta.rows(l * groups.size, groups.size).into_owned();
            let r = bl.norm();
            if r == 0.0 {
                return moved;
            }
            for a in 0..groups.size {
                g[off + a] += lambda * bl[a] / r;
                for c in 0..groups.size {
                    let id = if a == c { 1.0 / r } else { 0.0 };
                    h[(off + a, off + c)] += lambda * (id - bl[a] * bl[c] / (r * r * r));
                }
            }
        }
        let ridge = 1e-12 * h.diagonal().amax().max(f64::MIN_POSITIVE);
        let chol = h.clone().cholesky().or_else(|| (h + DMatrix::identity(k, k) * ridge).cholesky());
        let Some(chol) = chol else {
            return moved;
        };
        let d = chol.solve(&(-g));
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let mut cand = beta.clone();
            for (i, &c) in idx.iter().enumerate() {
                cand[c] += t * d[i];
            }
            let cobj = group_lasso_objective(q, cand.as_slice(), gamma2, groups);
            if cobj < obj {
                *beta = cand;
                obj = cobj;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        moved = true;
    }
    moved
}

/// Minimises the group-lasso objective, warm-started from `warm` when given.
///
/// Every accepted block update lowers the objective; a sweep that fails to
/// (through rounding) is rolled back and ends the solve.
pub fn group_lasso_fit(
    q: &NodeQuadratic,
    gamma2: f64,
    groups: Groups,
    warm: Option<&[f64]>,
    options: &SolverOptions,
) -> Result<GroupLassoFit> {
    if groups.dim() != q.dim() {
        return Err(BoostError::DimensionMismatch {
            expected: q.dim(),
            got: groups.dim(),
        });
    }
    if !(gamma2 >= 0.0 && gamma2.is_finite()) {
        return Err(BoostError::invalid(format!("gamma2 must be >= 0, got {gamma2}")));
    }
    let lambda = 0.5 * gamma2;
    let mut beta = match warm {
        Some(w) if w.len() == q.dim() => DVector::from_column_slice(w),
        Some(w) => {
            return Err(BoostError::DimensionMismatch {
                expected: q.dim(),
                got: w.len(),
            })
        }
        None => DVector::zeros(q.dim()),
    };
    let blocks: Vec<(DMatrix<f64>, Block)> = (0..groups.count)
        .map(|l| {
            let r = groups.range(l);
            let a = q.a.view((r.start, r.start), (groups.size, groups.size)).into_owned();
            let a = (&a + a.transpose()) * 0.5;
            let block = Block::new(a.clone());
            (a, block)
        })
        .collect();

    let scale = q.b.amax().max(1.0);
    let tol_kkt = options.kkt_tol * scale;
    let mut grad = &q.b + &q.a * &beta;
    let mut trace = vec![group_lasso_objective(q, beta.as_slice(), gamma2, groups)];
    let mut sweeps = 0;
    while sweeps < options.max_sweeps && kkt_residual(q, beta.as_slice(), gamma2, groups) > tol_kkt {
        let before = beta.clone();
        let mut max_change: f64 = 0.0;
        for (l, (a_ll, block)) in blocks.iter().enumerate() {
            let r = groups.range(l);
            let old = beta.rows(r.start, groups.size).into_owned();
            let c = grad.rows(r.start, groups.size) - a_ll * &old;
            let new = block.solve(&c, lambda);
            if block_value(&c, a_ll, &new, lambda) >= block_value(&c, a_ll, &old, lambda) {
                continue;
            }
            let delta = &new - &old;
            max_change = max_change.max(delta.amax());
            grad += q.a.columns(r.start, groups.size) * &delta;
            beta.rows_mut(r.start, groups.size).copy_from(&new);
        }
        let polished = newton_polish(q, &mut beta, gamma2, groups);
        sweeps += 1;
        let obj = group_lasso_objective(q, beta.as_slice(), gamma2, groups);
        if obj > *trace.last().expect("trace starts non-empty") {
            // Rounding floor reached.
            beta = before;
            break;
        }
        trace.push(obj);
        grad = &q.b + &q.a * &beta;
        if max_change == 0.0 && !polished {
            break;
        }
    }
    let kkt = kkt_residual(q, beta.as_slice(), gamma2, groups);
    let status = if kkt <= tol_kkt {
        SolveStatus::Converged
    } else {
        SolveStatus::MaxSweeps
    };
    Ok(GroupLassoFit {
        beta: beta.as_slice().to_vec(),
        objective_trace: trace,
        sweeps,
        status,
        kkt,
    })
}
