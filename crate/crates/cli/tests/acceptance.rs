//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use boostr::baselines::{time_feature_booster_fit, time_feature_default_config};
use boostr::boost_static::{
    find_best_split_static, fit_static, gradients, node_score, optimal_leaf, BoostConfig, EnsembleStatic,
    GradientTable,
};
use boostr::evaluate::{cross_validate, CvSettings, Method};
use boostr::group_lasso::{
    group_lasso_fit, kkt_residual, zero_threshold, Groups, NodeQuadratic, SolveStatus,
    SolverOptions,
};
use boostr::metrics::spearman;
use boostr::simulate::{
    gen_dataset, individual_rng, region_rate, sim_intensity, sim_nhpp_thinning, true_mu, DatasetKind, IntensitySpec,
};
use boostr::spline::{integrate_basis, SplineBasis};
use boostr::tree::FeatureMatrix;
use boostr::{empirical_mcf, Curve, Dataset, DynamicSeries, EventHistory, TimeGrid};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

const SEED: u64 = 20240611;

/// Outcome of one criterion: pass flag and a short detail line.
type Outcome = (bool, String);

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool")
        .install(f)
}

fn tree_config(n_trees: usize, gamma1: f64, gamma2: f64) -> BoostConfig {
    BoostConfig {
        n_trees,
        gamma1,
        gamma2,
        d_max: 4,
        ..BoostConfig::default()
    }
}

struct DatasetARun {
    data: Dataset,
    model: EnsembleStatic,
    elapsed: Duration,
}

fn dataset_a_run() -> DatasetARun {
    let data = gen_dataset(DatasetKind::A, 200, SEED, 100, 0.0).expect("dataset A");
    let start = Instant::now();
    let (model, _) = single_threaded(|| fit_static(&data, &tree_config(50, 300.0, 100.0))).expect("fit");
    DatasetARun {
        data,
        model,
        elapsed: start.elapsed(),
    }
}

fn c1_region_recovery(run: &DatasetARun) -> Outcome {
    let rates = [0.01, 0.05, 0.10];
    let mut sums = [0.0; 3];
    let mut counts = [0usize; 3];
    for ind in run.data.individuals() {
        let r = region_rate(ind.x[0], ind.x[1]);
        let k = rates.iter().position(|&v| v == r).expect("known region");
        sums[k] += run.model.predict_at(&ind.x, &[100.0]).expect("predict")[0] / 100.0;
        counts[k] += 1;
    }
    let means: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let ordered = means[0] < means[1] && means[1] < means[2];
    let within = means.iter().zip(&rates).all(|(m, r)| (m - r).abs() <= 0.4 * r);
    let fast = run.elapsed < Duration::from_secs(60);
    (
        ordered && within && fast,
        format!(
            "region means {:.4}/{:.4}/{:.4} vs 0.01/0.05/0.10, fit {:.2}s single-threaded",
            means[0],
            means[1],
            means[2],
            run.elapsed.as_secs_f64()
        ),
    )
}

fn c2_root_only_tail(run: &DatasetARun) -> Outcome {
    let roots: Vec<usize> = (29..50).filter(|&k| run.model.trees[k].is_root_only()).map(|k| k + 1).collect();
    (
        !roots.is_empty(),
        format!("seed {SEED}: {} of trees 30-50 are root-only, first is tree {:?}", roots.len(), roots.first()),
    )
}

fn c3_importance_b() -> Outcome {
    let data = gen_dataset(DatasetKind::B, 200, SEED, 100, 0.0).expect("dataset B");
    let start = Instant::now();
    let (model, _) = fit_static(&data, &tree_config(50, 300.0, 100.0)).expect("fit");
    let elapsed = start.elapsed();
    let imp = model.feature_importance(true);
    let mut order: Vec<usize> = (0..imp.len()).collect();
    order.sort_by(|&a, &b| imp[b].total_cmp(&imp[a]));
    let top_two = {
        let mut t = [order[0], order[1]];
        t.sort();
        t == [0, 1]
    };
    let redundant_max = imp[2..].iter().copied().fold(0.0, f64::max);
    (
        top_two && redundant_max <= 0.2 && elapsed < Duration::from_secs(90),
        format!(
            "x1={:.3} x2={:.3}, max redundant {:.3}, fit {:.2}s",
            imp[0],
            imp[1],
            redundant_max,
            elapsed.as_secs_f64()
        ),
    )
}

fn c4_cindex_ordering() -> Outcome {
    let data = gen_dataset(DatasetKind::A, 200, SEED, 100, 0.0).expect("dataset A");
    let settings = CvSettings {
        reps: 50,
        seed: SEED,
        ..CvSettings::default()
    };
    let mean = |m: Method| cross_validate(&data, &m, &settings).expect("cv").c_index.mean;
    let boost = mean(Method::BoostR(tree_config(50, 300.0, 100.0)));
    let pooled = mean(Method::PooledMcf);
    let knn = mean(Method::McfKnn(20));
    let hpp = mean(Method::HppLogLinear);
    (
        boost >= pooled + 0.05 && boost > knn && boost > hpp,
        format!("mean C-index boostr {boost:.4}, pooled {pooled:.4}, knn-20 {knn:.4}, hpp {hpp:.4}"),
    )
}

/// Random node of up to 10 individuals on a grid of up to 20 points, with
/// per-individual gradient curves.
struct RandomNode {
    grid: TimeGrid,
    g: Vec<Curve>,
    h: Vec<Curve>,
    x: Vec<Vec<f64>>,
}

fn random_node(rng: &mut impl Rng, p: usize) -> RandomNode {
    let m = rng.random_range(2..=20);
    let t_max = rng.random_range(1.0..50.0);
    let grid = TimeGrid::new(t_max, m).expect("grid");
    let n = rng.random_range(2..=10);
    let mut g = Vec::new();
    let mut h = Vec::new();
    let mut x = Vec::new();
    for _ in 0..n {
        let censor = rng.random_range(0.2..=1.0) * t_max;
        let mut times: Vec<f64> = (0..rng.random_range(0..6)).map(|_| rng.random_range(0.0..censor)).collect();
        times.sort_by(f64::total_cmp);
        let events = EventHistory::new(times, censor).expect("events");
        let tilde = empirical_mcf(&events, &grid);
        let hat_values: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..4.0)).collect();
        let hat = Curve::with_observed(grid, hat_values, tilde.observed_len()).expect("curve");
        let (gi, hi) = gradients(&tilde, &hat).expect("gradients");
        g.push(gi);
        h.push(hi);
        // One decimal so that ties occur.
        x.push((0..p).map(|_| (rng.random::<f64>() * 10.0).round() / 10.0).collect());
    }
    RandomNode { grid, g, h, x }
}

/// Reference trapezoid weights: flat extension to the origin.
fn ref_weights(grid: &TimeGrid) -> Vec<f64> {
    let d = grid.delta();
    let m = grid.len();
    (0..m)
        .map(|j| match j {
            _ if m == 1 => d,
            0 => 1.5 * d,
            _ if j == m - 1 => 0.5 * d,
            _ => d,
        })
        .collect()
}

/// Discretized node objective, summed individual by individual.
fn node_objective(node: &RandomNode, members: &[usize], f: &[f64], gamma2: f64) -> f64 {
    let w = ref_weights(&node.grid);
    let mut total = 0.0;
    for &i in members {
        let (g, h) = (node.g[i].values(), node.h[i].values());
        for j in 0..f.len() {
            total += w[j] * (g[j] * f[j] + 0.5 * h[j] * f[j] * f[j]);
        }
    }
    for j in 0..f.len() {
        total += w[j] * 0.5 * gamma2 * f[j] * f[j];
    }
    total
}

/// Coordinate-wise minimisation by bisection on a central-difference slope.
fn numeric_minimiser(node: &RandomNode, members: &[usize], gamma2: f64) -> Vec<f64> {
    let m = node.grid.len();
    let mut f = vec![0.0; m];
    for j in 0..m {
        let slope = |f: &mut Vec<f64>, v: f64| {
            let keep = f[j];
            f[j] = v + 1.0;
            let up = node_objective(node, members, f, gamma2);
            f[j] = v - 1.0;
            let down = node_objective(node, members, f, gamma2);
            f[j] = keep;
            (up - down) / 2.0
        };
        let (mut lo, mut hi) = (-1e3, 1e3);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if slope(&mut f, mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        f[j] = 0.5 * (lo + hi);
    }
    f
}

fn sums(node: &RandomNode, members: &[usize]) -> (Curve, Curve) {
    let m = node.grid.len();
    let mut gs = vec![0.0; m];
    let mut hs = vec![0.0; m];
    for &i in members {
        for j in 0..m {
            gs[j] += node.g[i].values()[j];
            hs[j] += node.h[i].values()[j];
        }
    }
    (
        Curve::new(node.grid, gs).expect("curve"),
        Curve::new(node.grid, hs).expect("curve"),
    )
}

fn c5_leaf_oracle() -> Outcome {
    let mut rng = individual_rng(SEED, 5);
    let mut worst_leaf: f64 = 0.0;
    let mut worst_score: f64 = 0.0;
    for _ in 0..20 {
        let node = random_node(&mut rng, 1);
        let gamma2 = rng.random_range(0.1..5.0);
        let members: Vec<usize> = (0..node.g.len()).collect();
        let (gsum, hsum) = sums(&node, &members);
        let leaf = optimal_leaf(&gsum, &hsum, gamma2).expect("leaf");
        let reference = numeric_minimiser(&node, &members, gamma2);
        for (a, b) in leaf.values().iter().zip(&reference) {
            worst_leaf = worst_leaf.max((a - b).abs());
        }
        let score = node_score(&gsum, &hsum, gamma2).expect("score");
        let substituted = node_objective(&node, &members, leaf.values(), gamma2);
        worst_score = worst_score.max((score - substituted).abs());
    }
    (
        worst_leaf <= 1e-8 && worst_score <= 1e-10,
        format!("max leaf deviation {worst_leaf:.2e}, max score deviation {worst_score:.2e}"),
    )
}

fn c6_split_brute_force() -> Outcome {
    let mut rng = individual_rng(SEED, 6);
    let mut worst: f64 = 0.0;
    let mut rule_mismatch = 0;
    let mut splits = 0;
    for _ in 0..20 {
        let p = 3;
        let node = random_node(&mut rng, p);
        let gamma1 = rng.random_range(0.0..2.0);
        let gamma2 = rng.random_range(0.1..5.0);
        let n = node.g.len();
        let all: Vec<usize> = (0..n).collect();
        let score_of = |members: &[usize]| {
            let (gs, hs) = sums(&node, members);
            let f: Vec<f64> = gs
                .values()
                .iter()
                .zip(hs.values())
                .map(|(g, h)| -g / (h + gamma2))
                .collect();
            node_objective(&node, members, &f, gamma2)
        };
        let parent = score_of(&all);
        // (feature, threshold, gain) for every distinct midpoint, in order.
        let mut cands = Vec::new();
        for f in 0..p {
            let mut vals: Vec<f64> = node.x.iter().map(|r| r[f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let thr = 0.5 * (w[0] + w[1]);
                let (l, r): (Vec<usize>, Vec<usize>) = all.iter().partition(|&&i| node.x[i][f] <= thr);
                cands.push((f, thr, parent - score_of(&l) - score_of(&r) - gamma1));
            }
        }
        let best = cands.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
        let expected = cands
            .iter()
            .find(|c| best > 0.0 && c.2 >= best - 1e-10 * best.abs().max(1.0))
            .copied();

        let features = FeatureMatrix::from_rows(&node.x).expect("features");
        let table = GradientTable::from_curves(&node.g, &node.h).expect("table");
        let cfg = BoostConfig {
            gamma1,
            gamma2,
            min_leaf: 1,
            ..BoostConfig::default()
        };
        let got = find_best_split_static(&features, &all, &table, &cfg);
        match (expected, got) {
            (None, None) => {}
            (Some((f, thr, gain)), Some(choice)) => {
                splits += 1;
                worst = worst.max((choice.gain - gain).abs());
                if choice.rule.feature != f || choice.rule.threshold != thr {
                    rule_mismatch += 1;
                }
            }
            _ => rule_mismatch += 1,
        }
    }
    (
        worst <= 1e-9 && rule_mismatch == 0,
        format!("{splits} nodes split, max gain deviation {worst:.2e}, {rule_mismatch} rule mismatches"),
    )
}

fn c7_splines() -> Outcome {
    let mut rng = individual_rng(SEED, 7);
    let mut knots: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..2.0)).collect();
    knots.sort_by(f64::total_cmp);
    let basis = SplineBasis::with_knots(-1.0, 2.0, &knots, 4).expect("basis");
    let unity = (0..1000)
        .map(|_| (basis.eval(rng.random_range(-1.0..=2.0)).iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max);

    // Path held between samples placed on the refined mesh.
    let grid = TimeGrid::new(40.0, 80).expect("grid");
    let fine = grid.delta() / 10.0;
    let mut times = vec![0.0];
    let mut t = 0.0;
    while t < 40.0 {
        t += fine * rng.random_range(1..40) as f64;
        times.push(t);
    }
    let values: Vec<f64> = times.iter().map(|_| rng.random_range(-1.5..2.5)).collect();
    let series = DynamicSeries::new(times, values).expect("series");
    let phi = integrate_basis(&basis, &series, &grid).expect("integrate");
    let mut quad = vec![0.0; basis.len()];
    let mut rel: f64 = 0.0;
    let mut sum_dev: f64 = 0.0;
    let mut step = 0;
    for (j, row) in phi.iter().enumerate() {
        let tj = grid.point(j);
        while step < 10 * (j + 1) {
            let mid = (step as f64 + 0.5) * fine;
            for (q, b) in quad.iter_mut().zip(basis.eval(series.value_at(mid))) {
                *q += b * fine;
            }
            step += 1;
        }
        let scale = quad.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for (a, b) in row.iter().zip(&quad) {
            rel = rel.max((a - b).abs() / scale);
        }
        sum_dev = sum_dev.max((row.iter().sum::<f64>() - tj).abs() / tj);
    }
    (
        unity <= 1e-12 && rel <= 1e-3 && sum_dev <= 1e-9,
        format!("unity {unity:.1e}, quadrature rel {rel:.1e}, sum vs t {sum_dev:.1e}"),
    )
}

fn c8_group_lasso() -> Outcome {
    let mut rng = individual_rng(SEED, 8);
    let mut monotone = true;
    let mut worst_kkt: f64 = 0.0;
    let mut zeroed = true;
    let mut converged = 0;
    for _ in 0..50 {
        let groups = Groups {
            size: rng.random_range(1..=5),
            count: rng.random_range(1..=4),
        };
        let d = groups.dim();
        let rank = rng.random_range(1..=d + 2);
        let mfac = DMatrix::from_fn(rank, d, |_, _| rng.random_range(-1.0..1.0));
        let a = mfac.transpose() * &mfac;
        // b in the range of A keeps the unpenalised problem bounded below.
        let y = DVector::from_fn(rank, |_, _| rng.random_range(-3.0..3.0));
        let b = mfac.transpose() * y;
        let q = NodeQuadratic::new(a, b).expect("quadratic");
        let gamma2 = rng.random_range(0.0..4.0);
        let fit = group_lasso_fit(&q, gamma2, groups, None, &SolverOptions::default()).expect("solve");
        monotone &= fit.objective_trace.windows(2).all(|w| w[1] <= w[0]);
        let kkt = kkt_residual(&q, &fit.beta, gamma2, groups);
        worst_kkt = worst_kkt.max(kkt);
        converged += usize::from(fit.status == SolveStatus::Converged);
        let above = zero_threshold(&q, groups) * 1.01 + 1e-9;
        let z = group_lasso_fit(&q, above, groups, None, &SolverOptions::default()).expect("solve");
        zeroed &= z.beta.iter().all(|&v| v == 0.0);
    }
    (
        monotone && worst_kkt <= 1e-5 && zeroed,
        format!("monotone {monotone}, max KKT {worst_kkt:.1e}, {converged}/50 converged, zero above bound {zeroed}"),
    )
}

/// Asymptotic Kolmogorov survival function with the usual small-sample
/// correction.
fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

fn c9_thinning() -> Outcome {
    let reps = 2000;
    let spec = IntensitySpec::Power {
        scale: 1.0,
        exponent: -0.5,
    };
    let counts: Vec<f64> = (0..reps)
        .map(|r| {
            let mut rng = individual_rng(SEED, r);
            sim_intensity(&spec, 50.0, &mut rng).expect("sim").len() as f64
        })
        .collect();
    let mean = counts.iter().sum::<f64>() / reps as f64;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
    let se = (var / reps as f64).sqrt();
    let target = 2.0 * 50f64.sqrt();
    let z = (mean - target) / se;

    let rate = 0.7;
    let mut gaps = Vec::new();
    for r in 0..200 {
        let mut rng = individual_rng(SEED + 1, r);
        let ev = sim_nhpp_thinning(&|_| rate, 2.0 * rate, 40.0, &mut rng).expect("thinning");
        let mut prev = 0.0;
        for &t in ev.times() {
            gaps.push(t - prev);
            prev = t;
        }
    }
    gaps.sort_by(f64::total_cmp);
    let n = gaps.len();
    let d = gaps
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = 1.0 - (-rate * x).exp();
            (cdf - i as f64 / n as f64).max((i + 1) as f64 / n as f64 - cdf)
        })
        .fold(0.0, f64::max);
    let p = ks_p_value(d, n);
    (
        z.abs() <= 3.0 && p > 0.001,
        format!("mean count {mean:.3} vs {target:.3} ({z:+.2} SE), KS p={p:.3} on {n} gaps"),
    )
}

fn c10_surfaces() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for (kind, cfg, t_eval) in [
        (DatasetKind::C, tree_config(500, 10.0, 5.0), 50.0),
        (DatasetKind::D, tree_config(300, 100.0, 100.0), 100.0),
    ] {
        let data = gen_dataset(kind, 1000, SEED, 100, 0.0).expect("dataset");
        let (model, _) = fit_static(&data, &cfg).expect("fit");
        let mut pred = Vec::new();
        let mut truth = Vec::new();
        for a in 0..20 {
            for b in 0..20 {
                let x = [(a as f64 + 0.5) / 20.0, (b as f64 + 0.5) / 20.0];
                pred.push(model.predict_at(&x, &[t_eval]).expect("predict")[0]);
                truth.push(true_mu(kind, &x, t_eval).expect("truth"));
            }
        }
        let rho = spearman(&pred, &truth).expect("spearman");
        ok &= rho >= 0.8;
        parts.push(format!("{kind:?} rho {rho:.3}"));
    }
    let elapsed = start.elapsed();
    (
        ok && elapsed < Duration::from_secs(600),
        format!("{}, {:.1}s", parts.join(", "), elapsed.as_secs_f64()),
    )
}

fn trial_config() -> BoostConfig {
    BoostConfig {
        n_trees: 50,
        gamma1: 50.0,
        gamma2: 50.0,
        d_max: 4,
        ..BoostConfig::default()
    }
}

fn c11_trial_l2() -> Outcome {
    let data = gen_dataset(DatasetKind::Morvita, 1000, SEED, 120, 0.0).expect("trial");
    let settings = CvSettings {
        n_train: 750,
        n_test: 250,
        reps: 10,
        seed: SEED,
        t_eval: None,
    };
    let boost = cross_validate(&data, &Method::BoostR(trial_config()), &settings).expect("cv");
    let pooled = cross_validate(&data, &Method::PooledMcf, &settings).expect("cv");
    let wins = boost.reps.iter().zip(&pooled.reps).filter(|(b, p)| b.l2 < p.l2).count();
    (
        boost.l2.mean < pooled.l2.mean,
        format!(
            "mean test L2 boostr {:.3} vs pooled {:.3}, boostr lower in {wins}/10 splits",
            boost.l2.mean, pooled.l2.mean
        ),
    )
}

fn c12_extrapolation() -> Outcome {
    let data = gen_dataset(DatasetKind::Morvita, 300, SEED, 120, 0.0).expect("trial");
    let horizon = data.grid().t_max();
    let time_model = time_feature_booster_fit(&data, &time_feature_default_config()).expect("fit");
    let (boost, _) = fit_static(&data, &trial_config()).expect("fit");
    let mut flat = true;
    let mut rising = true;
    let mut positive = 0;
    for ind in data.individuals() {
        let tf = time_model.predict_at(&ind.x, &[horizon, 240.0]).expect("predict");
        flat &= tf[0] == tf[1];
        let curve = boost.predict(&ind.x).expect("predict");
        if curve.terminal_slope() > 0.0 {
            positive += 1;
            let v = boost.predict_at(&ind.x, &[horizon, 240.0]).expect("predict");
            rising &= v[1] > v[0];
        }
    }
    (
        horizon == 120.0 && flat && rising && positive > 0,
        format!(
            "horizon {horizon}, time-feature constant past it: {flat}; boostr rises for all {positive} positive-slope individuals: {rising}"
        ),
    )
}

fn run_bin(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_boostr"))
        .args(args)
        .env_remove("BOOSTR_SEED")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn c13_determinism(dir: &Path) -> Outcome {
    let s = |p: &Path| p.to_str().expect("utf-8 path").to_string();
    let data = dir.join("a");
    let seed = SEED.to_string();
    if !run_bin(&["simulate", "--dataset", "A", "--n", "200", "--seed", &seed, "--out-dir", &s(&data)]) {
        return (false, "simulate failed".into());
    }
    let mut outputs = Vec::new();
    for threads in ["1", "8"] {
        let out = dir.join(format!("m{threads}"));
        let ok = run_bin(&[
            "--threads",
            threads,
            "train",
            "--dataset",
            &s(&data),
            "--K",
            "50",
            "--gamma1",
            "300",
            "--gamma2",
            "100",
            "--d-max",
            "4",
            "--out-dir",
            &s(&out),
        ]);
        if !ok {
            return (false, format!("train with {threads} threads failed"));
        }
        outputs.push(std::fs::read(out.join("model.json")).expect("model.json"));
    }
    (
        outputs[0] == outputs[1],
        format!("model.json {} bytes, identical: {}", outputs[0].len(), outputs[0] == outputs[1]),
    )
}

fn main() {
    let tmp = tempfile::tempdir().expect("tempdir");
    let run_a = dataset_a_run();
    let checks: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("dataset A region recovery", Box::new(|| c1_region_recovery(&run_a))),
        ("root-only tail", Box::new(|| c2_root_only_tail(&run_a))),
        ("dataset B feature importance", Box::new(c3_importance_b)),
        ("C-index ordering on dataset A", Box::new(c4_cindex_ordering)),
        ("leaf fit vs numeric minimiser", Box::new(c5_leaf_oracle)),
        ("split gain vs brute force", Box::new(c6_split_brute_force)),
        ("spline basis", Box::new(c7_splines)),
        ("group lasso solver", Box::new(c8_group_lasso)),
        ("thinning validity", Box::new(c9_thinning)),
        ("datasets C/D surface recovery", Box::new(c10_surfaces)),
        ("trial L2 vs pooled MCF", Box::new(c11_trial_l2)),
        ("extrapolation contrast", Box::new(c12_extrapolation)),
        ("thread-count determinism", Box::new(|| c13_determinism(tmp.path()))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = check();
        failed += usize::from(!ok);
        println!(
            "{} criterion {:>2} {name}: {detail} [{:.1}s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
