//! Binary trees over static features and the level-wise grower shared by the
//! boosters. What a leaf holds and how a node is scored is supplied by a
//! [`SplitCriterion`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{BoostError, Result};

/// `x[feature] <= threshold` goes left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    pub feature: usize,
    pub threshold: f64,
}

impl SplitRule {
    pub fn goes_left(&self, x: &[f64]) -> bool {
        x[self.feature] <= self.threshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node<L> {
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: usize,
        right: usize,
    },
    Leaf(L),
}

/// Flat tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<L> {
    pub nodes: Vec<Node<L>>,
}

impl<L> Tree<L> {
    pub fn leaf(value: L) -> Self {
        Self {
            nodes: vec![Node::Leaf(value)],
        }
    }

    /// Index of the node `x` ends up in.
    pub fn route(&self, x: &[f64]) -> usize {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                Node::Leaf(_) => return k,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    k = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn leaf_for(&self, x: &[f64]) -> &L {
        match &self.nodes[self.route(x)] {
            Node::Leaf(l) => l,
            Node::Split { .. } => unreachable!("route ends at a leaf"),
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    pub fn is_root_only(&self) -> bool {
        self.nodes.len() == 1
    }

    /// `(feature, gain)` of every internal node.
    pub fn split_gains(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, gain, .. } => Some((*feature, *gain)),
            Node::Leaf(_) => None,
        })
    }

    /// Axis-aligned box `[lo, hi]` per feature for every leaf, in node order.
    /// Unbounded sides are reported as `-inf` / `+inf`.
    pub fn leaf_boxes(&self, p: usize) -> Vec<(usize, Vec<(f64, f64)>)> {
        let mut out = Vec::new();
        let mut stack = vec![(0usize, vec![(f64::NEG_INFINITY, f64::INFINITY); p])];
        while let Some((k, bounds)) = stack.pop() {
            match &self.nodes[k] {
                Node::Leaf(_) => out.push((k, bounds)),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    let mut lb = bounds.clone();
                    lb[*feature].1 = lb[*feature].1.min(*threshold);
                    let mut rb = bounds;
                    rb[*feature].0 = rb[*feature].0.max(*threshold);
                    stack.push((*right, rb));
                    stack.push((*left, lb));
                }
            }
        }
        out.sort_by_key(|(k, _)| *k);
        out
    }
}

/// Row-major `n x p` matrix of static features.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    p: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * p);
        for r in rows {
            if r.len() != p {
                return Err(BoostError::DimensionMismatch {
                    expected: p,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { p, data })
    }

    pub fn n(&self) -> usize {
        self.data.len().checked_div(self.p).unwrap_or(0)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn get(&self, i: usize, f: usize) -> f64 {
        self.data[i * self.p + f]
    }
}

/// Tree-growth limits shared by every booster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthLimits {
    /// Growth stops once a level starts with at least this many leaves.
    pub d_max: usize,
    pub min_leaf: usize,
    /// Cap on candidate thresholds per feature and node.
    pub max_thresholds: usize,
}

/// Node scoring used by the grower.
///
/// `evaluate` returns the node's contribution to the objective at its optimal
/// leaf (lower is better) together with that leaf. A split's gain is
/// `parent - left - right - split_penalty`.
pub trait SplitCriterion: Sync {
    type Acc: Clone + Send + Sync;
    type Leaf: Clone + Send + Sync;

    fn empty(&self) -> Self::Acc;
    fn add_row(&self, acc: &mut Self::Acc, row: usize);
    /// `total - part`, both accumulated over rows of one node.
    fn difference(&self, total: &Self::Acc, part: &Self::Acc) -> Self::Acc;
    fn evaluate(&self, acc: &Self::Acc, warm: Option<&Self::Leaf>) -> (f64, Self::Leaf);
    fn split_penalty(&self) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitChoice<L> {
    pub rule: SplitRule,
    pub gain: f64,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub left_leaf: L,
    pub right_leaf: L,
}

/// Midpoints between consecutive distinct values that leave at least
/// `min_leaf` rows on each side, thinned to `max_thresholds` evenly spaced
/// picks. `sorted` must be ascending. Returns `(threshold, left_count)`.
pub fn candidate_thresholds(
    sorted: &[f64],
    min_leaf: usize,
    max_thresholds: usize,
) -> Vec<(f64, usize)> {
    let n = sorted.len();
    let mut all = Vec::new();
    for k in 1..n {
        if sorted[k] > sorted[k - 1] && k >= min_leaf && n - k >= min_leaf {
            all.push((0.5 * (sorted[k - 1] + sorted[k]), k));
        }
    }
    if max_thresholds == 0 || all.len() <= max_thresholds {
        return all;
    }
    if max_thresholds == 1 {
        return vec![all[(all.len() - 1) / 2]];
    }
    let c = all.len() - 1;
    let picks = max_thresholds - 1;
    (0..max_thresholds)
        .map(|k| all[(k * c + picks / 2) / picks])
        .collect()
}

/// Relative tolerance under which two gains are treated as tied, so that the
/// lowest (feature, threshold) wins regardless of summation order.
pub const GAIN_TIE_TOLERANCE: f64 = 1e-10;

/// Best positive-gain split of `rows`, or `None` when the node is terminal.
pub fn find_best_split<C: SplitCriterion>(
    criterion: &C,
    features: &FeatureMatrix,
    rows: &[usize],
    node_acc: &C::Acc,
    node_score: f64,
    node_leaf: &C::Leaf,
    limits: &GrowthLimits,
) -> Option<SplitChoice<C::Leaf>> {
    if rows.len() < 2 * limits.min_leaf.max(1) {
        return None;
    }
    let penalty = criterion.split_penalty();

    // Per feature: every candidate's gain, in ascending threshold order.
    let per_feature: Vec<Vec<(f64, f64, usize)>> = (0..features.p())
        .into_par_iter()
        .map(|f| {
            let mut order = rows.to_vec();
            order.sort_by(|&a, &b| features.get(a, f).total_cmp(&features.get(b, f)).then(a.cmp(&b)));
            let sorted: Vec<f64> = order.iter().map(|&i| features.get(i, f)).collect();
            let candidates = candidate_thresholds(&sorted, limits.min_leaf, limits.max_thresholds);
            let mut out = Vec::with_capacity(candidates.len());
            let mut left = criterion.empty();
            let mut filled = 0;
            for (threshold, k) in candidates {
                while filled < k {
                    criterion.add_row(&mut left, order[filled]);
                    filled += 1;
                }
                let right = criterion.difference(node_acc, &left);
                let (ls, _) = criterion.evaluate(&left, Some(node_leaf));
                let (rs, _) = criterion.evaluate(&right, Some(node_leaf));
                out.push((threshold, node_score - ls - rs - penalty, k));
            }
            out
        })
        .collect();

    let best = per_feature
        .iter()
        .flatten()
        .map(|c| c.1)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(best > 0.0) {
        return None;
    }
    let tol = GAIN_TIE_TOLERANCE * best.abs().max(1.0);
    let (feature, &(threshold, gain, _)) = per_feature
        .iter()
        .enumerate()
        .flat_map(|(f, cands)| cands.iter().map(move |c| (f, c)))
        .find(|(_, c)| c.1 >= best - tol)
        .expect("best came from this list");

    let rule = SplitRule { feature, threshold };
    let (left, right): (Vec<usize>, Vec<usize>) =
        rows.iter().partition(|&&i| rule.goes_left(features.row(i)));
    // Leaves are refit from row-order accumulations so they do not depend on
    // which feature's sort order produced the split.
    let accumulate = |part: &[usize]| {
        let mut acc = criterion.empty();
        for &i in part {
            criterion.add_row(&mut acc, i);
        }
        acc
    };
    let (_, left_leaf) = criterion.evaluate(&accumulate(&left), Some(node_leaf));
    let (_, right_leaf) = criterion.evaluate(&accumulate(&right), Some(node_leaf));
    Some(SplitChoice {
        rule,
        gain,
        left,
        right,
        left_leaf,
        right_leaf,
    })
}

/// Grows one tree level by level: every splittable leaf of a level is split
/// at once, and growth stops when no leaf splits or a level starts with at
/// least `d_max` leaves. The final leaf count can therefore exceed `d_max`.
///
/// Returns the tree and, for every row, the node index it is routed to.
pub fn grow_tree<C: SplitCriterion>(
    criterion: &C,
    features: &FeatureMatrix,
    rows: &[usize],
    limits: &GrowthLimits,
) -> (Tree<C::Leaf>, Vec<(usize, usize)>) {
    let mut root_acc = criterion.empty();
    for &i in rows {
        criterion.add_row(&mut root_acc, i);
    }
    let (root_score, root_leaf) = criterion.evaluate(&root_acc, None);

    struct Open<A, L> {
        node: usize,
        rows: Vec<usize>,
        acc: A,
        score: f64,
        leaf: L,
    }

    let mut nodes: Vec<Node<C::Leaf>> = vec![Node::Leaf(root_leaf.clone())];
    let mut frontier = vec![Open {
        node: 0,
        rows: rows.to_vec(),
        acc: root_acc,
        score: root_score,
        leaf: root_leaf,
    }];
    let mut finished: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut leaves = 1;

    while !frontier.is_empty() {
        if leaves >= limits.d_max {
            finished.extend(frontier.drain(..).map(|o| (o.node, o.rows)));
            break;
        }
        let choices: Vec<Option<SplitChoice<C::Leaf>>> = frontier
            .iter()
            .map(|o| find_best_split(criterion, features, &o.rows, &o.acc, o.score, &o.leaf, limits))
            .collect();
        let mut next = Vec::new();
        for (open, choice) in frontier.drain(..).zip(choices) {
            let Some(choice) = choice else {
                finished.push((open.node, open.rows));
                continue;
            };
            let li = nodes.len();
            let ri = li + 1;
            nodes[open.node] = Node::Split {
                feature: choice.rule.feature,
                threshold: choice.rule.threshold,
                gain: choice.gain,
                left: li,
                right: ri,
            };
            nodes.push(Node::Leaf(choice.left_leaf.clone()));
            nodes.push(Node::Leaf(choice.right_leaf.clone()));
            leaves += 1;
            for (idx, part, leaf) in [
                (li, choice.left, choice.left_leaf),
                (ri, choice.right, choice.right_leaf),
            ] {
                let mut acc = criterion.empty();
                for &i in &part {
                    criterion.add_row(&mut acc, i);
                }
                let (score, leaf) = criterion.evaluate(&acc, Some(&leaf));
                next.push(Open {
                    node: idx,
                    rows: part,
                    acc,
                    score,
                    leaf,
                });
            }
        }
        frontier = next;
    }

    let mut assignment: Vec<(usize, usize)> = finished
        .into_iter()
        .flat_map(|(node, rows)| rows.into_iter().map(move |r| (r, node)))
        .collect();
    assignment.sort_unstable();
    (Tree { nodes }, assignment)
}
