//! Repeated train/test evaluation of every method, and Latin hypercube
//! search over the two boosting penalties.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{hpp_loglinear_fit, mcf_knn, pooled_mcf, time_feature_booster_fit, HppModel, TimeFeatureModel};
use crate::boost_dynamic::{fit_dynamic, DynamicConfig, EnsembleDynamic};
use crate::boost_static::{fit_static, BoostConfig, EnsembleStatic};
use crate::data::{empirical_mcf, Curve, Dataset, Individual};
use crate::error::{BoostError, Result};
use crate::metrics::{c_index, l2_distance, mse_counts};
use crate::simulate::{individual_rng, true_mu, DatasetKind};

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    BoostR(BoostConfig),
    BoostRDynamic(DynamicConfig),
    PooledMcf,
    McfKnn(usize),
    HppLogLinear,
    TimeFeature(BoostConfig),
    /// True cumulative intensity of a synthetic dataset.
    Oracle(DatasetKind),
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Self::BoostR(_) => "boostr".into(),
            Self::BoostRDynamic(_) => "boostr-dynamic".into(),
            Self::PooledMcf => "pooled-mcf".into(),
            Self::McfKnn(k) => format!("mcf-knn-{k}"),
            Self::HppLogLinear => "hpp-loglinear".into(),
            Self::TimeFeature(_) => "time-feature".into(),
            Self::Oracle(_) => "oracle".into(),
        }
    }
}

/// A method fitted on one training set.
pub enum Fitted {
    Static(EnsembleStatic),
    Dynamic(EnsembleDynamic),
    Pooled(Curve),
    Knn(Dataset, usize),
    Hpp(HppModel),
    Time(TimeFeatureModel),
    Oracle(DatasetKind),
}

pub fn fit_method(method: &Method, train: &Dataset) -> Result<Fitted> {
    Ok(match method {
        Method::BoostR(cfg) => Fitted::Static(fit_static(train, cfg)?.0),
        Method::BoostRDynamic(cfg) => Fitted::Dynamic(fit_dynamic(train, cfg)?.0),
        Method::PooledMcf => Fitted::Pooled(pooled_mcf(train)),
        Method::McfKnn(k) => Fitted::Knn(train.clone(), *k),
        Method::HppLogLinear => Fitted::Hpp(hpp_loglinear_fit(train)?),
        Method::TimeFeature(cfg) => Fitted::Time(time_feature_booster_fit(train, cfg)?),
        Method::Oracle(kind) => Fitted::Oracle(*kind),
    })
}

impl Fitted {
    /// Predicted cumulative intensity on the training grid.
    pub fn predict(&self, ind: &Individual, grid: &crate::data::TimeGrid) -> Result<Curve> {
        match self {
            Self::Static(m) => m.predict(&ind.x),
            Self::Dynamic(m) => m.predict(&ind.x, &ind.z),
            Self::Pooled(c) => Ok(c.clone()),
            Self::Knn(train, k) => mcf_knn(train, &ind.x, *k),
            Self::Hpp(m) => Ok(m.predict(&ind.x, grid)),
            Self::Time(m) => m.predict(&ind.x, grid),
            Self::Oracle(kind) => {
                if true_mu(*kind, &ind.x, 1.0).is_none() {
                    return Err(BoostError::Unsupported(format!("no closed-form truth for {kind:?}")));
                }
                Ok(Curve::from_fn(*grid, |t| true_mu(*kind, &ind.x, t).expect("checked above")))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepMetrics {
    pub rep: usize,
    pub c_index: f64,
    pub l2: f64,
    pub mse_counts: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            if v.is_empty() {
                return f64::NAN;
            }
            let h = (v.len() - 1) as f64 * p;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub t_eval: f64,
    pub c_index: Summary,
    pub l2: Summary,
    pub mse_counts: Summary,
    pub reps: Vec<RepMetrics>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvSettings {
    pub n_train: usize,
    pub n_test: usize,
    pub reps: usize,
    pub seed: u64,
    /// Defaults to the grid horizon.
    pub t_eval: Option<f64>,
}

impl Default for CvSettings {
    fn default() -> Self {
        Self {
            n_train: 150,
            n_test: 50,
            reps: 50,
            seed: 0,
            t_eval: None,
        }
    }
}

/// Metrics of fitted predictions on a test set. Individuals censored before
/// `t_eval` are left out of the concordance and count error.
pub fn score_test_set(fitted: &Fitted, test: &[&Individual], grid: &crate::data::TimeGrid, t_eval: f64) -> Result<(f64, f64, f64)> {
    let mut pred_at = Vec::new();
    let mut obs_at = Vec::new();
    let mut l2 = 0.0;
    for ind in test {
        let pred = fitted.predict(ind, grid)?;
        let mcf = empirical_mcf(&ind.events, grid);
        l2 += l2_distance(&pred, &mcf)?;
        if ind.events.censor() >= t_eval {
            pred_at.push(pred.value_at(t_eval));
            obs_at.push(ind.events.count_by(t_eval) as f64);
        }
    }
    Ok((
        c_index(&pred_at, &obs_at)?,
        l2 / test.len() as f64,
        mse_counts(&pred_at, &obs_at)?,
    ))
}

/// Random train/test splits of the id-sorted dataset, one independent
/// stream per replicate.
pub fn split_indices(n: usize, settings: &CvSettings, rep: usize) -> (Vec<usize>, Vec<usize>) {
    let mut rng = individual_rng(settings.seed, rep);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let train = perm[..settings.n_train].to_vec();
    let test = perm[settings.n_train..settings.n_train + settings.n_test].to_vec();
    (train, test)
}

pub fn cross_validate(dataset: &Dataset, method: &Method, settings: &CvSettings) -> Result<MetricReport> {
    if settings.n_train == 0 || settings.n_test == 0 {
        return Err(BoostError::invalid("train and test sizes must be positive"));
    }
    if settings.n_train + settings.n_test > dataset.len() {
        return Err(BoostError::invalid(format!(
            "split {}+{} exceeds {} individuals",
            settings.n_train,
            settings.n_test,
            dataset.len()
        )));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.sort_by(|&a, &b| dataset.individuals()[a].id.cmp(&dataset.individuals()[b].id));
    let sorted = dataset.subset(&order)?;
    let grid = *sorted.grid();
    let t_eval = settings.t_eval.unwrap_or(grid.t_max());

    let reps: Vec<RepMetrics> = (0..settings.reps)
        .into_par_iter()
        .map(|rep| {
            let (train_idx, test_idx) = split_indices(sorted.len(), settings, rep);
            let train = sorted.subset(&train_idx)?;
            let fitted = fit_method(method, &train)?;
            let test: Vec<&Individual> = test_idx.iter().map(|&i| &sorted.individuals()[i]).collect();
            let (c, l2, mse) = score_test_set(&fitted, &test, &grid, t_eval)?;
            Ok(RepMetrics {
                rep,
                c_index: c,
                l2,
                mse_counts: mse,
            })
        })
        .collect::<Result<_>>()?;

    let pick = |f: fn(&RepMetrics) -> f64| Summary::of(&reps.iter().map(f).collect::<Vec<_>>());
    Ok(MetricReport {
        method: method.name(),
        t_eval,
        c_index: pick(|r| r.c_index),
        l2: pick(|r| r.l2),
        mse_counts: pick(|r| r.mse_counts),
        reps,
    })
}

/// Latin hypercube over axis-aligned ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LhdDesign {
    pub ranges: Vec<(f64, f64)>,
    pub runs: Vec<Vec<f64>>,
}

const LHD_CANDIDATES: usize = 200;

/// Best of 200 random jittered Latin hypercubes by smallest pairwise distance
/// in the unit cube.
pub fn lhd_sample(ranges: &[(f64, f64)], n_runs: usize, seed: u64) -> Result<LhdDesign> {
    if n_runs < 2 {
        return Err(BoostError::invalid("a design needs at least 2 runs"));
    }
    if ranges.iter().any(|&(lo, hi)| !(hi > lo)) {
        return Err(BoostError::invalid("every range needs lo < hi"));
    }
    let mut rng = individual_rng(seed, 0);
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    for _ in 0..LHD_CANDIDATES {
        let columns: Vec<Vec<f64>> = ranges
            .iter()
            .map(|_| {
                let mut perm: Vec<usize> = (0..n_runs).collect();
                perm.shuffle(&mut rng);
                perm.into_iter()
                    .map(|s| (s as f64 + rng.random::<f64>()) / n_runs as f64)
                    .collect()
            })
            .collect();
        let unit: Vec<Vec<f64>> = (0..n_runs).map(|r| columns.iter().map(|c| c[r]).collect()).collect();
        let mut min_d = f64::INFINITY;
        for a in 0..n_runs {
            for b in a + 1..n_runs {
                let d: f64 = unit[a].iter().zip(&unit[b]).map(|(x, y)| (x - y).powi(2)).sum();
                min_d = min_d.min(d);
            }
        }
        if best.as_ref().is_none_or(|(d, _)| min_d > *d) {
            best = Some((min_d, unit));
        }
    }
    let (_, unit) = best.expect("at least one candidate");
    let runs = unit
        .into_iter()
        .map(|u| u.iter().zip(ranges).map(|(v, &(lo, hi))| lo + v * (hi - lo)).collect())
        .collect();
    Ok(LhdDesign {
        ranges: ranges.to_vec(),
        runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRun {
    pub gamma1: f64,
    pub gamma2: f64,
    pub leaves: Vec<usize>,
    pub median_leaves: f64,
    /// Median leaves per tree in `[4, 8]`.
    pub in_target: bool,
}

/// Fits the booster at every `(gamma1, gamma2)` of the design.
pub fn tune(dataset: &Dataset, design: &LhdDesign, base: &BoostConfig) -> Result<Vec<TuneRun>> {
    if design.ranges.len() != 2 {
        return Err(BoostError::invalid("tuning designs span (gamma1, gamma2)"));
    }
    design
        .runs
        .par_iter()
        .map(|run| {
            let cfg = BoostConfig {
                gamma1: run[0],
                gamma2: run[1],
                ..*base
            };
            let (_, trace) = fit_static(dataset, &cfg)?;
            let leaves = trace.leaves;
            let median = Summary::of(&leaves.iter().map(|&l| l as f64).collect::<Vec<_>>()).median;
            Ok(TuneRun {
                gamma1: run[0],
                gamma2: run[1],
                leaves,
                median_leaves: median,
                in_target: (4.0..=8.0).contains(&median),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::gen_dataset;

    fn small_settings(reps: usize) -> CvSettings {
        CvSettings {
            n_train: 60,
            n_test: 40,
            reps,
            seed: 3,
            t_eval: None,
        }
    }

    #[test]
    fn lhd_latin_property() {
        let d = lhd_sample(&[(0.0, 600.0), (0.0, 200.0)], 15, 1).unwrap();
        assert_eq!(d.runs.len(), 15);
        for (k, &(lo, hi)) in d.ranges.iter().enumerate() {
            let mut strata: Vec<usize> = d
                .runs
                .iter()
                .map(|r| (((r[k] - lo) / (hi - lo) * 15.0).floor() as usize).min(14))
                .collect();
            strata.sort_unstable();
            assert_eq!(strata, (0..15).collect::<Vec<_>>());
        }
        assert!(lhd_sample(&[(0.0, 1.0)], 1, 0).is_err());
    }

    #[test]
    fn unpenalised_trees_reach_cap() {
        let ds = gen_dataset(DatasetKind::A, 100, 2, 50, 0.0).unwrap();
        let design = LhdDesign {
            ranges: vec![(0.0, 600.0), (0.0, 200.0)],
            runs: vec![vec![0.0, 0.0]],
        };
        let base = BoostConfig {
            n_trees: 5,
            ..BoostConfig::default()
        };
        let runs = tune(&ds, &design, &base).unwrap();
        assert!(runs[0].leaves.iter().all(|&l| l >= base.d_max));
    }

    #[test]
    fn cv_is_deterministic_and_order_invariant() {
        let ds = gen_dataset(DatasetKind::A, 100, 8, 50, 0.0).unwrap();
        let m = Method::McfKnn(10);
        let a = cross_validate(&ds, &m, &small_settings(3)).unwrap();
        let b = cross_validate(&ds, &m, &small_settings(3)).unwrap();
        assert_eq!(a, b);
        let mut rev: Vec<usize> = (0..100).collect();
        rev.reverse();
        let shuffled = ds.subset(&rev).unwrap();
        assert_eq!(a, cross_validate(&shuffled, &m, &small_settings(3)).unwrap());
    }

    #[test]
    fn oracle_beats_fitted_methods() {
        // Continuous truth: on region-constant truths the oracle's tied
        // predictions leave a margin below single-dataset noise.
        let ds = gen_dataset(DatasetKind::D, 200, 12, 100, 0.0).unwrap();
        let settings = CvSettings {
            reps: 20,
            ..CvSettings::default()
        };
        let oracle = cross_validate(&ds, &Method::Oracle(DatasetKind::D), &settings).unwrap();
        let boost = BoostConfig {
            n_trees: 30,
            gamma1: 100.0,
            gamma2: 100.0,
            ..BoostConfig::default()
        };
        for m in [Method::PooledMcf, Method::McfKnn(20), Method::HppLogLinear, Method::BoostR(boost)] {
            let r = cross_validate(&ds, &m, &settings).unwrap();
            assert!(
                oracle.c_index.mean > r.c_index.mean,
                "{} {} vs oracle {}",
                r.method,
                r.c_index.mean,
                oracle.c_index.mean
            );
        }
        assert!(cross_validate(&ds, &Method::Oracle(DatasetKind::Morvita), &settings).is_err());
    }

    #[test]
    fn pooled_mcf_is_uninformative() {
        let ds = gen_dataset(DatasetKind::A, 100, 4, 50, 0.0).unwrap();
        let r = cross_validate(&ds, &Method::PooledMcf, &small_settings(2)).unwrap();
        assert!(r.reps.iter().all(|m| m.c_index == 0.5));
    }

    #[test]
    fn rejects_oversized_split() {
        let ds = gen_dataset(DatasetKind::A, 50, 4, 50, 0.0).unwrap();
        assert!(cross_validate(&ds, &Method::PooledMcf, &CvSettings::default()).is_err());
    }

    #[test]
    fn summary_quartiles() {
        let s = Summary::of(&[4.0, 1.0, 3.0, 2.0, 5.0]);
        assert_eq!((s.mean, s.q1, s.median, s.q3), (3.0, 2.0, 3.0, 4.0));
    }
}
